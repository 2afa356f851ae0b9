use crate::error::{Error, Result};
use crate::mesh::{Discretization, Point};
use crate::sparse::{CsrMatrix, SparseLu};

use super::assemble::{assemble_affine, AffineOperators};
use super::params::MaterialParams;

/// Full-order state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<FomState>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &FomState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Time-dependent data beyond the constant affine loads. The default
/// implementation adds nothing, which is the physical setting; the
/// manufactured-solution harness overrides every hook.
pub trait Forcing: Sync {
    /// Added to the momentum load at time `t`.
    fn momentum_load(&self, _t: f64, _out: &mut [f64]) {}

    /// Added to the mass-balance load (before scaling by the step) at time `t`.
    fn mass_load(&self, _t: f64, _out: &mut [f64]) {}

    /// Prescribed displacement component at a constrained node.
    fn dirichlet_value(&self, _t: f64, _at: Point, _component: usize, default: f64) -> f64 {
        default
    }

    /// Initial chemical potential; `None` means the uniform `μ0`.
    fn initial_mu(&self, _disc: &Discretization) -> Option<Vec<f64>> {
        None
    }

    /// False when every hook is a no-op, letting the solver skip work.
    fn is_active(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn is_active(&self) -> bool {
        false
    }
}

/// Implicit Euler integrator for one parameter value. The monolithic matrix
/// is constant, so it is factored once.
pub struct FomSolver<'a> {
    disc: &'a Discretization,
    ops: &'a AffineOperators,
    params: MaterialParams,
    dt: f64,
    lu: SparseLu,
    /// Entries of the unconstrained matrix in constrained columns, kept for
    /// the lifting of nonzero boundary values.
    lifting: Vec<(usize, usize, f64)>,
    /// Constant part of the momentum load: `b + A μ0 A3 1`.
    momentum_rhs: Vec<f64>,
}

impl<'a> FomSolver<'a> {
    pub fn new(disc: &'a Discretization, ops: &'a AffineOperators, params: &MaterialParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let (n_u, n_mu) = (ops.n_u, ops.n_mu);
        let n = n_u + n_mu;
        let constrained = {
            let mut m = disc.layout.is_constrained();
            m.resize(n, false);
            m
        };

        let mut trip = Vec::with_capacity(2 * ops.a1.nnz() + 2 * ops.a3.nnz() + ops.c2.nnz() + ops.c3.nnz());
        trip.extend(ops.a1.triplets().map(|(r, c, v)| (r, c, 2.0 * v)));
        trip.extend(ops.a2.triplets().map(|(r, c, v)| (r, c, params.lambda * v)));
        trip.extend(ops.a3.triplets().map(|(r, c, v)| (r, n_u + c, params.a * v)));
        trip.extend(ops.c1.triplets().map(|(r, c, v)| (n_u + r, c, v)));
        trip.extend(ops.c2.triplets().map(|(r, c, v)| (n_u + r, n_u + c, dt * v)));
        trip.extend(ops.c3.triplets().map(|(r, c, v)| (n_u + r, n_u + c, dt * v)));

        let mut kept = Vec::with_capacity(trip.len());
        let mut lifting = Vec::new();
        for (r, c, v) in trip {
            if constrained[r] {
                continue;
            }
            if constrained[c] {
                lifting.push((r, c, v));
            } else {
                kept.push((r, c, v));
            }
        }
        kept.extend((0..n).filter(|&i| constrained[i]).map(|i| (i, i, 1.0)));
        let lu = SparseLu::factor(&CsrMatrix::from_triplets(n, n, kept))?;

        let mut momentum_rhs = ops.b_vec.clone();
        for (m, a) in momentum_rhs.iter_mut().zip(&ops.a3_ones) {
            *m += params.a * params.mu_0 * a;
        }

        Ok(FomSolver { disc, ops, params: *params, dt, lu, lifting, momentum_rhs })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    fn boundary_values(&self, t: f64, forcing: &dyn Forcing) -> Vec<(usize, f64)> {
        let nodes = &self.disc.layout.nodes;
        self.disc
            .layout
            .dirichlet
            .iter()
            .map(|d| (d.dof, forcing.dirichlet_value(t, nodes[d.node], d.component, d.value)))
            .collect()
    }

    /// The consistent initial state: `μ = μ0` (or the forcing's field) and
    /// displacement in mechanical equilibrium with it.
    pub fn initial_state(&self, forcing: &dyn Forcing) -> Result<FomState> {
        let n_mu = self.ops.n_mu;
        let mu = match forcing.initial_mu(self.disc) {
            Some(mu) => {
                if mu.len() != n_mu {
                    return Err(Error::DimensionMismatch { context: "initial potential", expected: n_mu, found: mu.len() });
                }
                mu
            }
            None => vec![self.params.mu_0; n_mu],
        };
        let shift: Vec<f64> = mu.iter().map(|m| m - self.params.mu_0).collect();
        let mut rhs = self.ops.b_vec.clone();
        forcing.momentum_load(0.0, &mut rhs);
        self.ops.a3.mul_vec_add(-self.params.a, &shift, &mut rhs);
        let bc = self.boundary_values(0.0, forcing);

        if rhs.iter().all(|&v| v == 0.0) && bc.iter().all(|&(_, v)| v == 0.0) {
            return Ok(FomState { u: vec![0.0; self.ops.n_u], mu, t: 0.0 });
        }
        let u = solve_momentum(self.ops, &self.disc.layout.is_constrained(), &self.params, rhs, &bc)?;
        Ok(FomState { u, mu, t: 0.0 })
    }

    pub fn step(&self, state: &FomState, forcing: &dyn Forcing) -> Result<FomState> {
        let (n_u, n_mu) = (self.ops.n_u, self.ops.n_mu);
        if state.u.len() != n_u || state.mu.len() != n_mu {
            return Err(Error::DimensionMismatch { context: "fom state", expected: n_u + n_mu, found: state.u.len() + state.mu.len() });
        }
        let t = state.t + self.dt;
        let mut rhs = vec![0.0; n_u + n_mu];
        rhs[..n_u].copy_from_slice(&self.momentum_rhs);
        {
            let mass = &mut rhs[n_u..];
            mass.copy_from_slice(&self.ops.d_vec);
            forcing.mass_load(t, mass);
            for m in mass.iter_mut() {
                *m *= self.dt;
            }
            self.ops.c1.mul_vec_add(1.0, &state.u, mass);
        }
        forcing.momentum_load(t, &mut rhs[..n_u]);

        let bc = self.boundary_values(t, forcing);
        if bc.iter().any(|&(_, v)| v != 0.0) {
            let mut g = vec![0.0; n_u + n_mu];
            for &(dof, v) in &bc {
                g[dof] = v;
            }
            for &(r, c, v) in &self.lifting {
                rhs[r] -= v * g[c];
            }
        }
        for &(dof, v) in &bc {
            rhs[dof] = v;
        }

        self.lu.solve_in_place(&mut rhs)?;
        let mu = rhs.split_off(n_u);
        Ok(FomState { u: rhs, mu, t })
    }
}

/// Solve `(2 A1 + λ A2) u = rhs` with the displacement constraints.
fn solve_momentum(
    ops: &AffineOperators,
    constrained: &[bool],
    params: &MaterialParams,
    mut rhs: Vec<f64>,
    bc: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let n = ops.n_u;
    let mut g = vec![0.0; n];
    for &(dof, v) in bc {
        g[dof] = v;
    }
    let mut trip = Vec::with_capacity(ops.a1.nnz() + ops.a2.nnz());
    let entries = ops
        .a1
        .triplets()
        .map(|(r, c, v)| (r, c, 2.0 * v))
        .chain(ops.a2.triplets().map(|(r, c, v)| (r, c, params.lambda * v)));
    for (r, c, v) in entries {
        if constrained[r] {
            continue;
        }
        if constrained[c] {
            rhs[r] -= v * g[c];
        } else {
            trip.push((r, c, v));
        }
    }
    for (i, _) in constrained.iter().enumerate().filter(|(_, &c)| c) {
        trip.push((i, i, 1.0));
        rhs[i] = g[i];
    }
    let lu = SparseLu::factor(&CsrMatrix::from_triplets(n, n, trip))?;
    lu.solve_in_place(&mut rhs)?;
    Ok(rhs)
}

/// Integrate from the consistent initial state with `n_t` uniform steps.
pub fn solve_fom(disc: &Discretization, params: &MaterialParams, n_t: usize, t_final: f64) -> Result<Trajectory> {
    let ops = assemble_affine(disc, params);
    solve_fom_with(disc, &ops, params, n_t, t_final, &NoForcing)
}

pub fn solve_fom_with(
    disc: &Discretization,
    ops: &AffineOperators,
    params: &MaterialParams,
    n_t: usize,
    t_final: f64,
    forcing: &dyn Forcing,
) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("final time must be positive, got {t_final}")));
    }
    let dt = if n_t == 0 { t_final } else { t_final / n_t as f64 };
    let solver = FomSolver::new(disc, ops, params, dt)?;
    let mut states = Vec::with_capacity(n_t + 1);
    states.push(solver.initial_state(forcing)?);
    for n in 0..n_t {
        let mut next = solver.step(&states[n], forcing)?;
        // accumulate time without drift
        next.t = (n + 1) as f64 * dt;
        states.push(next);
    }
    Ok(Trajectory { dt, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ScenarioSpec;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let disc = Discretization::new(&ScenarioSpec::square(4)).unwrap();
        let mut p = MaterialParams::nominal();
        p.mu_inf = p.mu_0;
        let traj = solve_fom(&disc, &p, 5, 0.25).unwrap();
        for s in &traj.states {
            assert!(s.u.iter().all(|v| v.abs() < 1e-10));
            assert!(s.mu.iter().all(|v| (v - p.mu_0).abs() < 1e-10));
        }
    }

    #[test]
    fn zero_steps_gives_initial_state_only() {
        let disc = Discretization::new(&ScenarioSpec::square(2)).unwrap();
        let traj = solve_fom(&disc, &MaterialParams::nominal(), 0, 0.25).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert!(traj.states[0].u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn momentum_residual_is_small_on_free_rows() {
        let disc = Discretization::new(&ScenarioSpec::square(6)).unwrap();
        let p = MaterialParams::nominal();
        let ops = assemble_affine(&disc, &p);
        let traj = solve_fom_with(&disc, &ops, &p, 4, 0.25, &NoForcing).unwrap();
        let mask = disc.layout.is_constrained();
        for s in &traj.states[1..] {
            let mut r = ops.a1.mul_vec(&s.u);
            for v in r.iter_mut() {
                *v *= 2.0;
            }
            ops.a2.mul_vec_add(p.lambda, &s.u, &mut r);
            ops.a3.mul_vec_add(p.a, &s.mu, &mut r);
            let rhs: Vec<f64> = ops.b_vec.iter().zip(&ops.a3_ones).map(|(b, a)| b + p.a * p.mu_0 * a).collect();
            let scale = rhs.iter().chain(r.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            let res = r.iter().zip(&rhs).zip(&mask).filter(|(_, &c)| !c).fold(0.0f64, |m, ((a, b), _)| m.max((a - b).abs()));
            assert!(res < 1e-9 * scale, "residual {res} vs {scale}");
        }
    }

    #[test]
    fn dirichlet_dofs_hold_their_values() {
        let disc = Discretization::new(&ScenarioSpec::square(3)).unwrap();
        let traj = solve_fom(&disc, &MaterialParams::nominal(), 3, 0.25).unwrap();
        for s in &traj.states {
            for d in &disc.layout.dirichlet {
                assert_eq!(s.u[d.dof], d.value);
            }
        }
    }
}
