use std::sync::OnceLock;

use gelrom::fom::{assemble_affine, MaterialParams};
use gelrom::mesh::{Discretization, ScenarioSpec};
use gelrom::pod::{
    collect_snapshots, pod_spectra, sample_parameters, ParamBox, ParameterSampler, PodWeights, ReducedBasis, SamplingDistribution,
    Truncation,
};
use gelrom::rom::{project, ReducedOperators};
use gelrom::uq::{draw_samples, propagate, UqConfig};
use proptest::prelude::*;

struct Model {
    disc: Discretization,
    basis: ReducedBasis,
    reduced: ReducedOperators,
}

fn build(spec: ScenarioSpec) -> Model {
    let disc = Discretization::new(&spec).unwrap();
    let base = MaterialParams::nominal();
    let sampler = ParameterSampler { bounds: ParamBox::TRAINING, n_train: 5, n_test: 0, seed: 5, distribution: SamplingDistribution::Uniform };
    let (train, _) = sample_parameters(&sampler).unwrap();
    let s = collect_snapshots(&disc, &base, &train, 20, 0.25).unwrap();
    let basis = pod_spectra(&s, PodWeights::default()).basis(Truncation::Rank(6), Truncation::Rank(6)).unwrap();
    let reduced = project(&assemble_affine(&disc, &base), &basis, &base).unwrap();
    Model { disc, basis, reduced }
}

fn bar() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| build(ScenarioSpec::bar(4)))
}

fn square() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| build(ScenarioSpec::square(6)))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn same_seed_same_bits_on_any_pool(seed in any::<u64>()) {
        let m = bar();
        let cfg = UqConfig { n_samples: 60, seed, ..Default::default() };
        let a = in_pool(1, || propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap());
        let b = in_pool(4, || propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap());
        prop_assert_eq!(&a.summary, &b.summary);
        prop_assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
    }

    #[test]
    fn probe_potential_stays_between_initial_and_ambient(seed in any::<u64>()) {
        let m = bar();
        let p = MaterialParams::nominal();
        let cfg = UqConfig { n_samples: 40, seed, stress: false, ..Default::default() };
        let e = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap();
        let (lo, hi) = (p.mu_0, p.mu_inf.max(0.0));
        let slack = 0.01 * (hi - lo);
        for t in &e.traces {
            for trace in &t.probe_mu {
                prop_assert!(trace.iter().all(|&v| v >= lo - slack && v <= hi + slack), "{trace:?}");
            }
        }
    }

    #[test]
    fn draws_respect_the_box(seed in any::<u64>(), rel in 0.0..0.6f64) {
        let cfg = UqConfig { n_samples: 200, seed, rel_std: rel, ..Default::default() };
        prop_assert!(draw_samples(&cfg).unwrap().iter().all(|t| cfg.bounds.contains(t)));
    }
}

#[test]
fn square_mean_stresses_are_symmetric() {
    let m = square();
    let cfg = UqConfig { n_samples: 20, seed: 3, probes: vec![[0.5, 0.5]], ..Default::default() };
    let e = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap();
    for t in &e.traces {
        let scale = t.mean_xx.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
        for (x, y) in t.mean_xx.iter().zip(&t.mean_yy) {
            assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y}");
        }
    }
}

#[test]
fn stress_maximum_dominates_the_mean() {
    let m = bar();
    let cfg = UqConfig { n_samples: 30, seed: 8, ..Default::default() };
    let e = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap();
    for t in &e.traces {
        assert!(t.max_xx.iter().zip(&t.mean_xx).all(|(a, b)| a >= b));
        assert!(t.max_yy.iter().zip(&t.mean_yy).all(|(a, b)| a >= b));
    }
}

#[test]
fn resuming_from_a_checkpoint_reproduces_the_ensemble() {
    let m = bar();
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    let cfg = UqConfig { n_samples: 230, seed: 17, ..Default::default() };
    let first = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, Some(&ck)).unwrap();
    assert!(ck.exists());
    let resumed = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, Some(&ck)).unwrap();
    assert_eq!(first.summary, resumed.summary);
    let fresh = propagate(&cfg, &m.disc, &m.reduced, &m.basis, 20, 0.25, None).unwrap();
    assert_eq!(first.summary, fresh.summary);
}
