//! Full-order Taylor–Hood model: affine assembly, implicit Euler stepping and
//! derived fields.

mod assemble;
mod fields;
mod params;
mod solver;

pub use assemble::{assemble_affine, robin_blocks, scalar_load, vector_load, AffineOperators};
pub use fields::{eval_at, probe, stress_field, PointEval, ProbeValue, StrainOperator, StressField};
pub use params::{normalize, DimensionalParams, MaterialParams, Normalization, Theta};
pub use solver::{solve_fom, solve_fom_with, FomSolver, FomState, Forcing, NoForcing, Trajectory};
