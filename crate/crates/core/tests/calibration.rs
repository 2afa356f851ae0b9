use std::sync::OnceLock;

use gelrom::calibration::{grid_oracle, identify, linspace, loss, Observation, OptimizerSettings, RomForward};
use gelrom::fom::{assemble_affine, solve_fom_with, MaterialParams, NoForcing, Theta};
use gelrom::mesh::{Discretization, ScenarioSpec};
use gelrom::pod::{
    collect_snapshots, pod_spectra, sample_parameters, ParamBox, ParameterSampler, PodWeights, ReducedBasis, SamplingDistribution,
    Truncation,
};
use gelrom::rom::{project, ReducedOperators};
use proptest::prelude::*;

const N_T: usize = 20;

struct Setup {
    disc: Discretization,
    basis: ReducedBasis,
    reduced: ReducedOperators,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let disc = Discretization::new(&ScenarioSpec::square(5)).unwrap();
        let base = MaterialParams::nominal();
        let sampler = ParameterSampler { bounds: ParamBox::TRAINING, n_train: 6, n_test: 0, seed: 21, distribution: SamplingDistribution::Uniform };
        let (train, _) = sample_parameters(&sampler).unwrap();
        let s = collect_snapshots(&disc, &base, &train, N_T, 0.25).unwrap();
        let basis = pod_spectra(&s, PodWeights::default()).basis(Truncation::Rank(5), Truncation::Rank(5)).unwrap();
        let reduced = project(&assemble_affine(&disc, &base), &basis, &base).unwrap();
        Setup { disc, basis, reduced }
    })
}

fn forward(s: &Setup) -> RomForward<'_> {
    RomForward { reduced: &s.reduced, basis: &s.basis, n_t: N_T, t_final: 0.25 }
}

fn observe(s: &Setup, truth: Theta, times: &[f64]) -> Observation {
    let p = MaterialParams::nominal().with_theta(truth);
    let tr = solve_fom_with(&s.disc, &assemble_affine(&s.disc, &p), &p, N_T, 0.25, &NoForcing).unwrap();
    Observation::from_trajectory(&tr, times, truth, &s.disc.spec.digest()).unwrap()
}

fn theta_in_box() -> impl Strategy<Value = Theta> {
    (1000.0..=2000.0f64, 2000.0..=6000.0f64).prop_map(|(l, a)| Theta::new(l, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn result_stays_in_the_box_and_improves_on_the_start(truth in theta_in_box(), theta0 in theta_in_box()) {
        let s = setup();
        let obs = observe(s, truth, &[0.15, 0.25]);
        let settings = OptimizerSettings { theta0, ..Default::default() };
        let rep = identify(&obs, &forward(s), &settings).unwrap();
        prop_assert!(settings.bounds.contains(&rep.theta_opt), "{:?}", rep.theta_opt);
        let at_start = loss(theta0, &obs, &forward(s)).unwrap();
        prop_assert!(rep.loss <= at_start);
        prop_assert_eq!(rep.initial_loss, at_start);
    }

    #[test]
    fn order_of_observation_times_is_irrelevant(truth in theta_in_box()) {
        let s = setup();
        let a = identify(&observe(s, truth, &[0.15, 0.25]), &forward(s), &OptimizerSettings::default()).unwrap();
        let b = identify(&observe(s, truth, &[0.25, 0.15]), &forward(s), &OptimizerSettings::default()).unwrap();
        prop_assert_eq!(a.theta_opt, b.theta_opt);
        prop_assert_eq!(a.loss, b.loss);
        prop_assert_eq!(a.n_evals, b.n_evals);
    }

    #[test]
    fn final_loss_beats_a_coarse_grid(truth in theta_in_box()) {
        let s = setup();
        let obs = observe(s, truth, &[0.15, 0.25]);
        let rep = identify(&obs, &forward(s), &OptimizerSettings::default()).unwrap();
        let grid = grid_oracle(&obs, &forward(s), &linspace(1000.0, 2000.0, 5), &linspace(2000.0, 6000.0, 5)).unwrap();
        prop_assert!(rep.loss <= grid.best_loss, "{} vs grid {}", rep.loss, grid.best_loss);
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let s = setup();
    let obs = observe(s, Theta::new(1400.0, 4500.0), &[0.15, 0.25]);
    let mut a = identify(&obs, &forward(s), &OptimizerSettings::default()).unwrap();
    let mut b = identify(&obs, &forward(s), &OptimizerSettings::default()).unwrap();
    a.wall_seconds = 0.0;
    b.wall_seconds = 0.0;
    assert_eq!(a, b);
}

#[test]
fn observation_files_round_trip() {
    let s = setup();
    let obs = observe(s, Theta::NOMINAL, &[0.15, 0.25]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.bin");
    obs.save(&path).unwrap();
    let back = Observation::load(&path).unwrap();
    assert_eq!(back, obs);
    back.validate(s.disc.layout.n_u, s.disc.layout.n_mu, 0.25).unwrap();
    assert!(back.validate(s.disc.layout.n_u + 1, s.disc.layout.n_mu, 0.25).is_err());
}

#[test]
fn box_outside_the_start_is_rejected() {
    let s = setup();
    let obs = observe(s, Theta::NOMINAL, &[0.25]);
    let settings = OptimizerSettings { theta0: Theta::new(2500.0, 4000.0), ..Default::default() };
    assert!(identify(&obs, &forward(s), &settings).is_err());
}
