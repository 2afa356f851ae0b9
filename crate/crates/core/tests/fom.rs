use gelrom::analysis::{manufactured_verification, FieldId, Manufactured, ManufacturedKind, Norm, TimeProfile};
use gelrom::fom::{assemble_affine, solve_fom, solve_fom_with, stress_field, MaterialParams, NoForcing, Theta};
use gelrom::mesh::{Discretization, ScenarioId, ScenarioSpec};
use proptest::prelude::*;

fn theta() -> impl Strategy<Value = Theta> {
    (1000.0..2000.0f64, 2000.0..6000.0f64).prop_map(|(l, a)| Theta::new(l, a))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn equilibrium_data_give_a_constant_trajectory(t in theta(), mu0 in -2.0..0.0f64, id in prop_oneof![Just(ScenarioId::Square), Just(ScenarioId::Bar)]) {
        let disc = Discretization::new(&ScenarioSpec::from_id(id, 4)).unwrap();
        let mut p = MaterialParams::nominal().with_theta(t);
        p.mu_0 = mu0;
        p.mu_inf = mu0;
        let tr = solve_fom(&disc, &p, 6, 0.25).unwrap();
        let first = &tr.states[0];
        for s in &tr.states[1..] {
            let du = s.u.iter().zip(&first.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let dm = s.mu.iter().zip(&first.mu).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(du < 1e-10 && dm < 1e-10, "drift u {du:e} mu {dm:e}");
        }
    }

    #[test]
    fn momentum_balance_holds_after_every_step(t in theta(), n_h in 2usize..7) {
        let disc = Discretization::new(&ScenarioSpec::square(n_h)).unwrap();
        let p = MaterialParams::nominal().with_theta(t);
        let ops = assemble_affine(&disc, &p);
        let tr = solve_fom_with(&disc, &ops, &p, 5, 0.25, &NoForcing).unwrap();
        let fixed = disc.layout.is_constrained();
        let rhs: Vec<f64> = ops.b_vec.iter().zip(&ops.a3_ones).map(|(b, a)| b + p.a * p.mu_0 * a).collect();
        for s in &tr.states[1..] {
            // 2 A1 u + λ A2 u + A A3 μ on the free rows
            let mut lhs: Vec<f64> = ops.a1.mul_vec(&s.u).iter().map(|v| 2.0 * v).collect();
            ops.a2.mul_vec_add(p.lambda, &s.u, &mut lhs);
            ops.a3.mul_vec_add(p.a, &s.mu, &mut lhs);
            let res: Vec<f64> = lhs.iter().zip(&rhs).zip(&fixed).map(|((a, b), &c)| if c { 0.0 } else { a - b }).collect();
            let scale = max_abs(&rhs).max(max_abs(&lhs));
            prop_assert!(max_abs(&res) < 1e-9 * scale, "residual {:e} vs {scale:e}", max_abs(&res));
        }
    }

    #[test]
    fn stress_tensor_is_symmetric_bitwise(t in theta()) {
        let disc = Discretization::new(&ScenarioSpec::bar(3)).unwrap();
        let p = MaterialParams::nominal().with_theta(t);
        let tr = solve_fom(&disc, &p, 3, 0.25).unwrap();
        let sf = stress_field(&disc, tr.final_state(), &p);
        for q in 0..sf.xx.len() {
            let s = sf.tensor(q);
            prop_assert_eq!(s[0][1].to_bits(), s[1][0].to_bits());
        }
    }
}

#[test]
fn benchmark_relaxation_raises_the_minimum_potential() {
    let disc = Discretization::new(&ScenarioSpec::square(20)).unwrap();
    let p = MaterialParams::nominal();
    let tr = solve_fom(&disc, &p, 100, 0.25).unwrap();
    let mins: Vec<f64> = tr.states.iter().map(|s| s.mu.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    // slack for the transient Mandel-Cryer dip of the coupled problem
    for w in mins.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "min mu fell from {} to {}", w[0], w[1]);
    }
    assert!(mins.iter().all(|&m| m >= p.mu_0 - 1e-5));
    assert!(mins.last().unwrap() > &p.mu_0);
}

#[test]
fn manufactured_spatial_orders() {
    let p = MaterialParams::nominal();
    let cubic = Manufactured::new(ManufacturedKind::CubicU, TimeProfile::Steady, p);
    let r = manufactured_verification(&cubic, &[4, 8, 16], 20, true, 1.0).unwrap();
    let u = r.order(FieldId::U, Norm::L2).unwrap();
    assert!(u >= 2.0, "u L2 order {u}");

    let smooth = Manufactured::new(ManufacturedKind::Smooth, TimeProfile::Steady, p);
    let r = manufactured_verification(&smooth, &[4, 8, 16], 20, true, 1.0).unwrap();
    let mu = r.order(FieldId::Mu, Norm::L2).unwrap();
    assert!(mu >= 1.8, "mu L2 order {mu}");
}

#[test]
fn manufactured_temporal_order() {
    let sol = Manufactured::new(ManufacturedKind::InSpace, TimeProfile::Decay, MaterialParams::nominal());
    let r = manufactured_verification(&sol, &[20, 40, 80], 4, false, 1.0).unwrap();
    for field in [FieldId::U, FieldId::Mu] {
        let p = r.order(field, Norm::L2).unwrap();
        assert!((0.85..=1.05).contains(&p), "{field:?} temporal order {p}");
    }
}
