//! Sum tree over nonnegative leaf weights.
//!
//! The tree is stored as an implicit complete binary tree in a flat array with
//! the root at index 1 and leaves at `[size, 2*size)`, where `size` is the
//! smallest power of two `>= n`. Padding leaves hold zero weight. Internal nodes
//! are always recomputed as `left + right` so they never drift from their children.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTree<S = f64> {
    len: usize,
    size: usize,
    nodes: Vec<S>,
}

impl<S: Scalar> WeightTree<S> {
    /// Builds a tree over `weights`. At least one weight must be positive.
    pub fn build(weights: &[S]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("weight tree needs at least one leaf"));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= S::zero()) || !w.is_finite()) {
            return Err(Error::config(format!("leaf weight {i} must be finite and nonnegative, got {w}")));
        }
        if !weights.iter().any(|w| *w > S::zero()) {
            return Err(Error::config("weight tree needs at least one positive weight"));
        }
        let size = weights.len().next_power_of_two();
        let mut nodes = vec![S::zero(); 2 * size];
        nodes[size..size + weights.len()].copy_from_slice(weights);
        let mut tree = WeightTree { len: weights.len(), size, nodes };
        tree.rebuild_internal();
        Ok(tree)
    }

    fn rebuild_internal(&mut self) {
        for k in (1..self.size).rev() {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> S {
        self.nodes[1]
    }

    pub fn leaf(&self, i: usize) -> S {
        self.nodes[self.size + i]
    }

    pub fn leaves(&self) -> &[S] {
        &self.nodes[self.size..self.size + self.len]
    }

    /// Node visits performed by one sample or one update.
    pub fn path_len(&self) -> usize {
        self.size.trailing_zeros() as usize + 1
    }

    /// Returns the unique `i` with `prefix(i) <= u < prefix(i + 1)`.
    pub fn sample(&self, u: S) -> Result<usize> {
        if !(u >= S::zero() && u < self.total()) {
            return Err(Error::contract(format!("sample point {u} outside [0, {})", self.total())));
        }
        Ok(self.sample_counted(u).0)
    }

    /// Descends from the root, returning the leaf index and the number of nodes visited.
    ///
    /// A `u` at or past the total (from rounding in the caller) lands on the
    /// last positive leaf; zero-weight leaves are never returned.
    pub fn sample_counted(&self, u: S) -> (usize, usize) {
        let mut k = 1;
        let mut rest = u;
        let mut visits = 1;
        while k < self.size {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            if rest < left || !(right > S::zero()) {
                k *= 2;
            } else {
                rest = rest - left;
                k = 2 * k + 1;
            }
            visits += 1;
        }
        (k - self.size, visits)
    }

    /// Replaces leaf `i` and refreshes its ancestors.
    pub fn update(&mut self, i: usize, weight: S) -> Result<()> {
        self.update_counted(i, weight).map(|_| ())
    }

    /// Like [`update`](Self::update), returning the number of nodes written.
    pub fn update_counted(&mut self, i: usize, weight: S) -> Result<usize> {
        if i >= self.len {
            return Err(Error::contract(format!("leaf index {i} out of range for {} leaves", self.len)));
        }
        if !(weight >= S::zero()) || !weight.is_finite() {
            return Err(Error::contract(format!("leaf weight must be finite and nonnegative, got {weight}")));
        }
        let mut k = self.size + i;
        self.nodes[k] = weight;
        let mut visits = 1;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            visits += 1;
        }
        Ok(visits)
    }

    /// Multiplies every leaf by `factor` and rebuilds the partial sums. O(n).
    pub fn scale_all(&mut self, factor: S) {
        for w in &mut self.nodes[self.size..self.size + self.len] {
            *w = *w * factor;
        }
        self.rebuild_internal();
    }

    /// Sets every leaf to `value`. O(n).
    pub fn fill(&mut self, value: S) {
        for w in &mut self.nodes[self.size..self.size + self.len] {
            *w = value;
        }
        self.rebuild_internal();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(weights: &[f64], u: f64) -> usize {
        let mut prefix = 0.0;
        for (i, w) in weights.iter().enumerate() {
            if u < prefix + w {
                return i;
            }
            prefix += w;
        }
        unreachable!("u beyond total")
    }

    #[test]
    fn build_totals() {
        assert_eq!(WeightTree::build(&[1.0, 1.0, 1.0, 1.0]).unwrap().total(), 4.0);
        assert_eq!(WeightTree::build(&[0.0, 2.0, 0.0, 3.0]).unwrap().total(), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let tree = WeightTree::build(&ws).unwrap();
        let direct: f64 = ws.iter().sum();
        assert!(((tree.total() - direct) / direct).abs() < 1e-9);
        for (i, w) in ws.iter().enumerate() {
            assert_eq!(tree.leaf(i), *w);
        }
    }

    #[test]
    fn build_rejects_degenerate_weights() {
        assert!(WeightTree::<f64>::build(&[0.0, 0.0]).is_err());
        assert!(WeightTree::<f64>::build(&[]).is_err());
        assert!(WeightTree::build(&[1.0, -1.0]).is_err());
        assert!(WeightTree::build(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sample_examples() {
        let t = WeightTree::build(&[1.0, 0.0, 3.0]).unwrap();
        assert_eq!(t.sample(0.5).unwrap(), 0);
        assert_eq!(t.sample(2.0).unwrap(), 2);
        assert_eq!(t.sample(1.0).unwrap(), 2);
        for k in 0..400 {
            assert_ne!(t.sample(k as f64 / 100.0).unwrap(), 1);
        }
        assert!(t.sample(4.0).is_err());
        assert!(t.sample(-0.1).is_err());
    }

    #[test]
    fn clamped_descent_never_hits_zero_leaf() {
        let t = WeightTree::build(&[1.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.sample_counted(3.0).0, 1);
        assert_eq!(t.sample_counted(1e9).0, 1);
    }

    #[test]
    fn update_examples() {
        let mut t = WeightTree::build(&[1.0, 2.0, 3.0]).unwrap();
        t.update(1, 5.0).unwrap();
        assert_eq!(t.total(), 9.0);
        t.update(0, 0.0).unwrap();
        for k in 0..80 {
            assert_ne!(t.sample(k as f64 / 10.0).unwrap(), 0);
        }
        assert!(t.update(3, 1.0).is_err());
        assert!(t.update(0, -2.0).is_err());
    }

    #[test]
    fn random_updates_match_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 777;
        let mut ws: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let mut tree = WeightTree::build(&ws).unwrap();
        for _ in 0..10_000 {
            let i = rng.random_range(0..n);
            let w = rng.random::<f64>() * 10.0;
            ws[i] = w;
            tree.update(i, w).unwrap();
        }
        let fresh = WeightTree::build(&ws).unwrap();
        assert!(((tree.total() - fresh.total()) / fresh.total()).abs() < 1e-6);
        assert_eq!(tree.leaves(), &ws[..]);
    }

    #[test]
    fn internal_nodes_sum_children() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tree = WeightTree::build(&vec![1.0; 37]).unwrap();
        for _ in 0..500 {
            tree.update(rng.random_range(0..37), rng.random::<f64>() * 100.0).unwrap();
        }
        for k in 1..tree.size {
            let s = tree.nodes[2 * k] + tree.nodes[2 * k + 1];
            assert!((tree.nodes[k] - s).abs() <= 1e-9 * s.abs());
        }
    }

    #[test]
    fn tree_matches_linear_scan_on_shared_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 300;
        let mut ws: Vec<f64> = (0..n).map(|k| if k % 7 == 0 { 0.0 } else { rng.random::<f64>() }).collect();
        let mut tree = WeightTree::build(&ws).unwrap();
        for step in 0..20_000 {
            if step % 3 == 0 {
                let i = rng.random_range(0..n);
                let w = if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() * 4.0 };
                ws[i] = w;
                tree.update(i, w).unwrap();
                if !ws.iter().any(|w| *w > 0.0) {
                    ws[0] = 1.0;
                    tree.update(0, 1.0).unwrap();
                }
            }
            let total: f64 = ws.iter().sum();
            let u = rng.random::<f64>() * total.min(tree.total());
            assert_eq!(tree.sample(u).unwrap(), linear_scan(&ws, u));
        }
    }

    #[test]
    fn visits_are_logarithmic() {
        for n in [1usize, 2, 3, 16, 17, 1024, 5000] {
            let mut t = WeightTree::build(&vec![1.0; n]).unwrap();
            let bound = 2 * ((n as f64).log2().ceil() as usize + 1);
            assert!(t.sample_counted(0.5).1 <= bound);
            assert!(t.update_counted(n - 1, 2.0).unwrap() <= bound);
        }
    }

    #[test]
    fn scale_and_fill() {
        let mut t = WeightTree::build(&[1.0, 2.0, 5.0]).unwrap();
        t.scale_all(0.5);
        assert_eq!(t.leaves(), &[0.5, 1.0, 2.5]);
        assert_eq!(t.total(), 4.0);
        t.fill(1.0);
        assert_eq!(t.total(), 3.0);
    }
}
