//! Refinement studies against a fine reference and reduced-model error
//! tables over a test set.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{solve_fom, AffineOperators, FomState, MaterialParams, Theta};
use crate::io::csv_string;
use crate::mesh::{Discretization, ScenarioId, ScenarioSpec};
use crate::pod::{PodMethod, PodSpectra, Truncation};
use crate::rom::{lift, project, solve_rom};

use super::{cross_mesh_error, difference_norm, ConvergenceReport, FieldId, Norm};

const STUDY_NORMS: [Norm; 4] = [Norm::L2, Norm::H1, Norm::H1Semi, Norm::Linf];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioId,
    pub params: MaterialParams,
    /// Varying resolution, coarse to fine.
    pub levels: Vec<usize>,
    pub reference: usize,
    /// Resolution of the dimension held fixed.
    pub fixed: usize,
    pub t_final: f64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 3 {
            return Err(Error::Config("an order estimate needs at least three levels".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) || self.levels.last().is_some_and(|&l| l >= self.reference) {
            return Err(Error::Config("levels must increase and stay below the reference".into()));
        }
        Ok(())
    }
}

fn collect(rows: Vec<Vec<(String, f64)>>) -> BTreeMap<String, Vec<f64>> {
    let mut errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        for (k, e) in row {
            errors.entry(k).or_default().push(e);
        }
    }
    errors
}

/// Mesh refinement at fixed `N_t = cfg.fixed`; errors at the final time
/// against the solution on `N_h = cfg.reference`.
pub fn spatial_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let run = |n_h: usize| -> Result<(Discretization, FomState)> {
        let disc = Discretization::new(&ScenarioSpec::from_id(cfg.scenario, n_h))?;
        let tr = solve_fom(&disc, &cfg.params, cfg.fixed, cfg.t_final)?;
        let last = tr.final_state().clone();
        Ok((disc, last))
    };
    let (fine, coarse) = rayon::join(|| run(cfg.reference), || cfg.levels.par_iter().map(|&n| run(n)).collect::<Result<Vec<_>>>());
    let (fd, fs) = fine?;
    let rows = coarse?
        .par_iter()
        .map(|(cd, cs)| -> Result<Vec<(String, f64)>> {
            let mut row = Vec::new();
            for field in [FieldId::U, FieldId::Mu] {
                for norm in STUDY_NORMS {
                    row.push((ConvergenceReport::key(field, norm), cross_mesh_error(&fd, &fs, cd, cs, field, norm)?));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_errors(cfg.levels.clone(), collect(rows)))
}

/// Step refinement at fixed `N_h = cfg.fixed`; errors at the final time
/// against the solution with `N_t = cfg.reference` steps.
pub fn temporal_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let disc = Discretization::new(&ScenarioSpec::from_id(cfg.scenario, cfg.fixed))?;
    let ops = crate::fom::assemble_affine(&disc, &cfg.params);
    let run = |n_t: usize| -> Result<FomState> {
        let tr = crate::fom::solve_fom_with(&disc, &ops, &cfg.params, n_t, cfg.t_final, &crate::fom::NoForcing)?;
        Ok(tr.final_state().clone())
    };
    let (reference, levels) = rayon::join(|| run(cfg.reference), || cfg.levels.par_iter().map(|&n| run(n)).collect::<Result<Vec<_>>>());
    let reference = reference?;
    let mut rows = Vec::new();
    for s in levels? {
        let mut row = Vec::new();
        for field in [FieldId::U, FieldId::Mu] {
            for norm in STUDY_NORMS {
                row.push((ConvergenceReport::key(field, norm), difference_norm(&disc, &reference, &s, field, norm)?));
            }
        }
        rows.push(row);
    }
    Ok(ConvergenceReport::from_errors(cfg.levels.clone(), collect(rows)))
}

/// Statistics over the test set at one rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub r: usize,
    pub field: FieldId,
    pub l2_mean: f64,
    pub l2_max: f64,
    pub l1_mean: f64,
    pub l1_max: f64,
    pub linf_mean: f64,
    pub linf_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub method: PodMethod,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn row(&self, r: usize, field: FieldId) -> Option<&ErrorRow> {
        self.rows.iter().find(|e| e.r == r && e.field == field)
    }

    /// `r, l2_mean, l2_max, l1_mean, l1_max, linf_mean, linf_max` for one field.
    pub fn csv(&self, field: FieldId) -> String {
        let header: Vec<String> =
            ["r", "l2_mean", "l2_max", "l1_mean", "l1_max", "linf_mean", "linf_max"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .filter(|e| e.field == field)
            .map(|e| vec![e.r as f64, e.l2_mean, e.l2_max, e.l1_mean, e.l1_max, e.linf_mean, e.linf_max])
            .collect();
        csv_string(&header, &rows)
    }
}

fn mean_max(v: &[f64]) -> (f64, f64) {
    (v.iter().sum::<f64>() / v.len() as f64, v.iter().copied().fold(0.0, f64::max))
}

/// Final-time errors of the lifted reduced solution against `fom_final`
/// (one full-order final state per test parameter) for each rank, with the
/// same rank for both fields.
#[allow(clippy::too_many_arguments)]
pub fn rom_error_table(
    disc: &Discretization,
    ops: &AffineOperators,
    base: &MaterialParams,
    spectra: &PodSpectra,
    ranks: &[usize],
    test: &[Theta],
    fom_final: &[FomState],
    n_t: usize,
    t_final: f64,
) -> Result<ErrorTable> {
    if test.is_empty() || test.len() != fom_final.len() {
        return Err(Error::DimensionMismatch { context: "test set", expected: test.len(), found: fom_final.len() });
    }
    let rows = ranks
        .par_iter()
        .map(|&r| -> Result<Vec<ErrorRow>> {
            let basis = spectra.basis(Truncation::Rank(r), Truncation::Rank(r))?;
            let red = project(ops, &basis, base)?;
            let per_sample = test
                .iter()
                .zip(fom_final)
                .map(|(&theta, fom)| -> Result<[[f64; 3]; 2]> {
                    let tr = solve_rom(&red, theta, n_t, t_final)?;
                    let rom = lift(tr.states.last().expect("trajectory has an initial state"), &basis);
                    let mut out = [[0.0; 3]; 2];
                    for (i, field) in [FieldId::U, FieldId::Mu].into_iter().enumerate() {
                        for (j, norm) in [Norm::L2, Norm::L1, Norm::Linf].into_iter().enumerate() {
                            out[i][j] = difference_norm(disc, &rom, fom, field, norm)?;
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok([FieldId::U, FieldId::Mu]
                .into_iter()
                .enumerate()
                .map(|(i, field)| {
                    let col = |j: usize| per_sample.iter().map(|s| s[i][j]).collect::<Vec<_>>();
                    let (l2_mean, l2_max) = mean_max(&col(0));
                    let (l1_mean, l1_max) = mean_max(&col(1));
                    let (linf_mean, linf_max) = mean_max(&col(2));
                    ErrorRow { r, field, l2_mean, l2_max, l1_mean, l1_max, linf_mean, linf_max }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTable { method: spectra.method, rows: rows.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_levels_rejected() {
        let cfg = StudyConfig {
            scenario: ScenarioId::Square,
            params: MaterialParams::nominal(),
            levels: vec![2, 4],
            reference: 8,
            fixed: 2,
            t_final: 0.25,
        };
        assert!(spatial_study(&cfg).is_err());
        assert!(temporal_study(&StudyConfig { levels: vec![2, 4, 8], reference: 8, ..cfg }).is_err());
    }

    #[test]
    fn table_means_bounded_by_maxes() {
        let t = ErrorTable {
            method: PodMethod::Pod,
            rows: vec![ErrorRow { r: 1, field: FieldId::U, l2_mean: 1.0, l2_max: 2.0, l1_mean: 0.5, l1_max: 0.7, linf_mean: 3.0, linf_max: 4.0 }],
        };
        let csv = t.csv(FieldId::U);
        assert!(csv.starts_with("r,l2_mean,l2_max,l1_mean,l1_max,linf_mean,linf_max\n1.0,"));
        assert_eq!(t.csv(FieldId::Mu).lines().count(), 1);
    }
}
