use mabs_core::io::{parse_libsvm_str, tau_of_scale, write_libsvm, LabelMode, LibsvmOptions, SyntheticConfig};
use mabs_core::metrics::{effective_variance, effective_variance_gradient};
use mabs_core::model::{DataPoint, Dataset, Loss, ProblemSpec, Regularizer, SparseVec};
use mabs_core::optimize::{EstimatorKind, EstimatorState};
use mabs_core::sampling::{MabsParams, MabsState, WeightTree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn linear_scan(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tree_matches_linear_scan(weights in prop::collection::vec(0u32..20, 1..70), picks in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let weights: Vec<f64> = weights.into_iter().map(f64::from).collect();
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let tree = WeightTree::build(&weights).unwrap();
        prop_assert_eq!(tree.total(), total);
        for u in picks {
            let u = (u * total).floor();
            prop_assert_eq!(tree.sample(u).unwrap(), linear_scan(&weights, u));
        }
    }

    #[test]
    fn effective_variance_is_convex(
        a in prop::collection::vec(0.0f64..5.0, 2..12),
        p in prop::collection::vec(0.01f64..1.0, 12),
        q in prop::collection::vec(0.01f64..1.0, 12),
        theta in 0.0f64..1.0,
    ) {
        let n = a.len();
        let (p, q) = (simplex(&p[..n]), simplex(&q[..n]));
        let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| theta * x + (1.0 - theta) * y).collect();
        let (vp, vq, vm) = (effective_variance(&a, &p).unwrap(), effective_variance(&a, &q).unwrap(), effective_variance(&a, &mix).unwrap());
        let chord = theta * vp + (1.0 - theta) * vq;
        prop_assert!(vm <= chord * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn effective_variance_is_homogeneous(a in prop::collection::vec(0.0f64..5.0, 2..12), p in prop::collection::vec(0.01f64..1.0, 12)) {
        let p = simplex(&p[..a.len()]);
        let v = effective_variance(&a, &p).unwrap();
        let grad = effective_variance_gradient(&a, &p);
        let inner: f64 = grad.iter().zip(&p).map(|(g, x)| g * x).sum();
        prop_assert!((inner + v).abs() <= 1e-10 * v.max(1.0));
    }

    #[test]
    fn libsvm_round_trip(rows in prop::collection::vec((any::<bool>(), prop::collection::btree_map(1usize..30, -1e3f64..1e3, 0..6)), 1..15)) {
        let points: Vec<DataPoint> = rows
            .iter()
            .map(|(pos, feats)| {
                let pairs = feats.iter().map(|(i, v)| (*i - 1, *v));
                DataPoint::new(SparseVec::from_pairs(pairs).unwrap(), if *pos { 1.0 } else { -1.0 })
            })
            .collect();
        let data = Dataset::new(points, 30).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        let opts = LibsvmOptions { labels: LabelMode::Classification, dim: Some(30) };
        let back: Dataset = parse_libsvm_str(std::str::from_utf8(&buf).unwrap(), opts).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn tau_grows_with_scale(seed in 0u64..50, c1 in 1.0f64..20.0, dc in 0.0f64..20.0) {
        let cfg = SyntheticConfig { n: 30, seed, ..Default::default() };
        let spec = ProblemSpec::new(Loss::Ridge, Regularizer::None, 0.0).unwrap();
        let lo = tau_of_scale(&cfg, &spec, c1).unwrap();
        let hi = tau_of_scale(&cfg, &spec, c1 + dc).unwrap();
        prop_assert!(lo >= 1.0);
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn mabs_distribution_stays_valid(n in 2usize..40, updates in prop::collection::vec((0usize..40, 0.0f64..50.0), 0..200), k in 1i32..60) {
        let params = MabsParams::default();
        let mut state = MabsState::new(n, 100, 1.0, params).unwrap();
        for (i, a) in updates {
            state.update(i % n, a).unwrap();
        }
        let p = state.probabilities();
        let floor = params.eta / n as f64;
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x >= floor * (1.0 - 1e-12)));
        // Power-of-two rescaling leaves the distribution bit-identical.
        let mut scaled = state.clone();
        scaled.rescale_weights(2f64.powi(-k));
        prop_assert_eq!(scaled.probabilities(), p);
    }

    #[test]
    fn estimators_are_unbiased(seed in 0u64..1000, kind in prop::sample::select(vec![EstimatorKind::PlainSgd, EstimatorKind::ProxSvrg, EstimatorKind::Saga])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, data) = mabs_core::verify::random_instance(&mut rng, 6, 3, Loss::Logistic).unwrap();
        let anchor = vec![0.3, -0.2, 0.1];
        let w = vec![-0.5, 0.4, 0.9];
        let state = EstimatorState::new(kind, &spec, &data, &anchor).unwrap();
        let p = mabs_core::verify::random_simplex(&mut rng, data.len());
        let mut expect = [0.0; 3];
        for (i, pi) in p.iter().enumerate() {
            let est = state.estimate(&spec, &data, &w, i, *pi).unwrap();
            for (e, g) in expect.iter_mut().zip(&est.g_hat) {
                *e += pi * g;
            }
        }
        let target = spec.full_gradient(&data, &w).unwrap();
        for (e, t) in expect.iter().zip(&target) {
            prop_assert!((e - t).abs() <= 1e-12 * t.abs().max(1.0));
        }
    }
}
