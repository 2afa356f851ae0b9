//! Limited-memory BFGS on a box, with finite-difference gradients.
//!
//! The iteration runs in coordinates scaled to the unit box so that
//! parameters of very different magnitude share one curvature estimate.
//! Bounds are handled by fixing variables that sit on a face with the
//! gradient pushing outward and by projecting every trial point.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    pub maxfun: usize,
    pub maxiter: usize,
    pub ftol: f64,
    pub gtol: f64,
    pub eps: f64,
    pub maxls: usize,
    pub memory: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings { maxfun: 15_000, maxiter: 15_000, ftol: 2.220446049250313e-9, gtol: 1e-5, eps: 1e-8, maxls: 20, memory: 10 }
    }
}

impl LbfgsSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = [("ftol", self.ftol), ("gtol", self.gtol), ("eps", self.eps)];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("maxfun", self.maxfun), ("maxiter", self.maxiter), ("maxls", self.maxls), ("memory", self.memory)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gtol,
    Ftol,
    MaxIter,
    MaxFun,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub n_iter: usize,
    /// Objective after each accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

struct Problem<'a> {
    f: &'a (dyn Fn(&[f64]) -> Result<f64> + Sync),
    lo: &'a [f64],
    hi: &'a [f64],
    eps: f64,
    evals: usize,
    maxfun: usize,
}

impl Problem<'_> {
    fn width(&self, i: usize) -> f64 {
        let w = self.hi[i] - self.lo[i];
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    fn to_x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(i, zi)| (self.lo[i] + zi * self.width(i)).clamp(self.lo[i], self.hi[i])).collect()
    }

    /// Finite-difference step along axis `i`, in scaled coordinates.
    fn axis_step(&self, z: &[f64], i: usize) -> f64 {
        let x = self.lo[i] + z[i] * self.width(i);
        self.eps * x.abs().max(1.0) / self.width(i)
    }

    fn eval(&mut self, z: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(&self.to_x(z))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Optimizer("objective is not finite".into()))
        }
    }

    /// Finite differences along the orthonormal columns of `dirs` (scaled
    /// coordinates), or along the axes when `dirs` is `None`. The step along
    /// axis `i` is `eps · max(1, |x_i|)` in the original coordinates. Forward
    /// points that would leave the box are flipped backward; `central` uses
    /// both sides wherever both fit.
    fn grad(&mut self, z: &[f64], fz: f64, dirs: Option<&DMatrix<f64>>, central: bool) -> Result<Vec<f64>> {
        let n = z.len();
        let axis_step: Vec<f64> = (0..n).map(|i| self.axis_step(z, i)).collect();
        let shifted = |e: &[f64], h: f64| -> Option<Vec<f64>> {
            let zp: Vec<f64> = z.iter().zip(e).map(|(zi, ei)| zi + h * ei).collect();
            zp.iter().all(|v| (0.0..=1.0).contains(v)).then_some(zp)
        };
        // one or two points per direction, with the signed step of each
        let stencil = |e: &[f64]| -> Option<Vec<(Vec<f64>, f64)>> {
            let h: f64 = e.iter().zip(&axis_step).map(|(ei, hi)| ei.abs() * hi).sum();
            match (shifted(e, h), shifted(e, -h)) {
                (Some(p), Some(m)) if central => Some(vec![(p, h), (m, -h)]),
                (Some(p), _) => Some(vec![(p, h)]),
                (None, Some(m)) => Some(vec![(m, -h)]),
                (None, None) => None,
            }
        };
        let axes = DMatrix::<f64>::identity(n, n);
        let rotated =
            dirs.and_then(|d| (0..n).map(|k| stencil(d.column(k).as_slice())).collect::<Option<Vec<_>>>().map(|t| (d, t)));
        let (basis, stencils) = match rotated {
            Some(found) => found,
            None => {
                // an axis step always fits: each face allows one direction
                let t = (0..n).map(|k| stencil(axes.column(k).as_slice()).expect("axis step fits in the box")).collect();
                (&axes, t)
            }
        };
        let f = self.f;
        let lo = self.lo;
        let width: Vec<f64> = (0..n).map(|i| self.width(i)).collect();
        let points: Vec<&Vec<f64>> = stencils.iter().flatten().map(|(zp, _)| zp).collect();
        let mut values = points
            .par_iter()
            .map(|zp| {
                let xp: Vec<f64> = zp.iter().enumerate().map(|(i, zi)| lo[i] + zi * width[i]).collect();
                f(&xp)
            })
            .collect::<Vec<Result<f64>>>()
            .into_iter();
        self.evals += points.len();
        let mut g = vec![0.0; n];
        for (k, st) in stencils.iter().enumerate() {
            let dk = match st.as_slice() {
                [(_, h)] => (values.next().expect("one value per point")? - fz) / h,
                [(_, h), _] => {
                    let fp = values.next().expect("one value per point")?;
                    let fm = values.next().expect("one value per point")?;
                    (fp - fm) / (2.0 * h)
                }
                _ => unreachable!("stencils hold one or two points"),
            };
            for (gi, ei) in g.iter_mut().zip(basis.column(k).iter()) {
                *gi += dk * ei;
            }
        }
        Ok(g)
    }
}

/// Eigen decomposition of the dense BFGS matrix built from the stored pairs.
///
/// Differencing along its eigenvectors keeps the large curvature of a narrow
/// valley out of the gradient component along the valley floor, and the
/// eigenvector of the smallest eigenvalue points along that floor.
fn curvature_model(mem: &VecDeque<(Vec<f64>, Vec<f64>)>, n: usize) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    let (s, y) = mem.back()?;
    let mut b = DMatrix::<f64>::identity(n, n) * (dot(y, y) / dot(s, y));
    for (s, y) in mem {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        let bs = &b * &s;
        let sbs = s.dot(&bs);
        let sy = s.dot(&y);
        if sbs > 0.0 && sy > 0.0 {
            b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
        }
    }
    let eig = SymmetricEigen::new(b);
    eig.eigenvectors.iter().all(|v| v.is_finite()).then_some(eig)
}

/// Least and most curved directions at `z`, from a Hessian assembled out
/// of central-difference gradients a short distance apart. The quasi-Newton
/// memory cannot supply them: on a valley floor every stored step points
/// across the valley.
fn curvature_directions(p: &mut Problem, z: &[f64], fz: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    const SPREAD: f64 = 1e-5;
    let n = z.len();
    let g0 = p.grad(z, fz, None, true)?;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let step = if z[j] + SPREAD <= 1.0 { SPREAD } else { -SPREAD };
        let mut zj = z.to_vec();
        zj[j] += step;
        let fj = p.eval(&zj)?;
        let gj = p.grad(&zj, fj, None, true)?;
        for i in 0..n {
            h[(i, j)] = (gj[i] - g0[i]) / step;
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    let col = |k: usize| eig.eigenvectors.column(k).iter().copied().collect::<Vec<f64>>();
    Ok(Some((col(eig.eigenvalues.iamin()), col(eig.eigenvalues.imax()))))
}

/// Derivative-free search along the valley floor through `z`. Trial points
/// step along the least curved direction; each is pulled back to the floor
/// by a parabola along the most curved one, so a slightly wrong direction
/// does not climb the valley wall. A parabola through the floor values
/// picks the next trial, twice. Returns the best point when it improves
/// on `fz`.
fn floor_search(p: &mut Problem, z: &[f64], fz: f64) -> Result<Option<(Vec<f64>, f64)>> {
    // cross offset for the pull back, inside the quadratic zone of a valley
    // wall yet far above the noise of the objective
    const CROSS: f64 = 1e-5;
    let Some((w, v)) = curvature_directions(p, z, fz)? else {
        return Ok(None);
    };
    let inside = |q: &[f64]| q.iter().all(|c| (0.0..=1.0).contains(c));
    let point = |t: f64, c: f64| -> Vec<f64> { z.iter().zip(&w).zip(&v).map(|((zi, wi), vi)| zi + t * wi + c * vi).collect() };
    // floor value at `t`, with the point that attains it
    let floor = |p: &mut Problem, t: f64| -> Result<Option<(f64, Vec<f64>)>> {
        let mid = point(t, 0.0);
        let (plus, minus) = (point(t, CROSS), point(t, -CROSS));
        if !inside(&mid) {
            return Ok(None);
        }
        let f0 = if t == 0.0 { fz } else { p.eval(&mid)? };
        let mut best = (f0, mid);
        if inside(&plus) && inside(&minus) {
            let (fp, fm) = (p.eval(&plus)?, p.eval(&minus)?);
            for (fc, q) in [(fp, plus), (fm, minus)] {
                if fc < best.0 {
                    best = (fc, q);
                }
            }
            if let Some(c) = parabola_vertex((0.0, f0), (CROSS, fp), (-CROSS, fm)) {
                let q = point(t, c.clamp(-10.0 * CROSS, 10.0 * CROSS));
                if inside(&q) {
                    let fc = p.eval(&q)?;
                    if fc < best.0 {
                        best = (fc, q);
                    }
                }
            }
        }
        Ok(Some(best))
    };
    let reach = 0.1 / inf_norm(&w);
    let mut pts: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for t in [0.0, reach, -reach] {
        // shrink toward z until the trial point fits in the box
        let mut t = t;
        for _ in 0..8 {
            if inside(&point(t, 0.0)) {
                break;
            }
            t *= 0.5;
        }
        if let Some((fv, q)) = floor(p, t)? {
            pts.push((t, fv, q));
        }
    }
    for _ in 0..2 {
        if pts.len() < 3 || p.evals + 4 > p.maxfun {
            break;
        }
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let Some(t) = parabola_vertex((pts[0].0, pts[0].1), (pts[1].0, pts[1].1), (pts[2].0, pts[2].1)) else {
            break;
        };
        let t = t.clamp(-10.0 * reach, 10.0 * reach);
        let span = pts.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max) - pts.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
        if pts.iter().any(|q| (q.0 - t).abs() <= 1e-3 * span) {
            break;
        }
        match floor(p, t)? {
            Some((fv, q)) => pts.push((t, fv, q)),
            None => break,
        }
    }
    let best = pts.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("the start point is present");
    Ok((best.1 < fz).then_some((best.2, best.1)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Two-loop recursion: `-H g` from the stored pairs.
fn lbfgs_direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y) in mem.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y), (a, rho)) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimize `f` over the box `[lo, hi]` from `x0` (clamped into the box).
pub fn minimize_box(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    settings: &LbfgsSettings,
) -> Result<Minimum> {
    minimize_impl(f, x0, lo, hi, settings, false)
}

/// As [`minimize_box`] for an objective that is never negative.
///
/// The iteration runs on `f²`, which has the same minimizers but stays
/// smooth where `f` has a cone-shaped zero. `gtol` applies to the projected
/// gradient of `ln f`, so the test does not depend on the scale of `f`.
/// Reported values are values of `f`.
pub fn minimize_box_nonneg(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    settings: &LbfgsSettings,
) -> Result<Minimum> {
    let sq = |x: &[f64]| -> Result<f64> {
        let v = f(x)?;
        if v < 0.0 {
            return Err(Error::Optimizer(format!("objective is negative ({v})")));
        }
        Ok(v * v)
    };
    let mut m = minimize_impl(&sq, x0, lo, hi, settings, true)?;
    m.f = m.f.sqrt();
    m.trace.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(m)
}

fn minimize_impl(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    settings: &LbfgsSettings,
    squared: bool,
) -> Result<Minimum> {
    settings.validate()?;
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch { context: "optimizer bounds", expected: n, found: lo.len().min(hi.len()) });
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(Error::Config("optimizer bounds are not ordered".into()));
    }
    let mut p = Problem { f, lo, hi, eps: settings.eps, evals: 0, maxfun: settings.maxfun };
    let mut z: Vec<f64> = (0..n).map(|i| ((x0[i].clamp(lo[i], hi[i]) - lo[i]) / p.width(i)).clamp(0.0, 1.0)).collect();
    let mut fz = p.eval(&z)?;
    let mut g = p.grad(&z, fz, None, false)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(settings.memory);
    let mut trace = vec![fz];
    let mut iter = 0;
    // escalation after a stall; cleared by ordinary progress except `central`
    let mut floor_failed = false;
    let mut restarted = false;
    let mut central = false;

    let stop = loop {
        // projected gradient in the scaled coordinates; for a squared
        // objective the test is on d(ln f) = d(f²) / 2f²
        let gscale = if squared { 2.0 * fz } else { 1.0 };
        let pg: Vec<f64> = (0..n).map(|i| (z[i] - g[i] / gscale).clamp(0.0, 1.0) - z[i]).collect();
        if fz == 0.0 || inf_norm(&pg) <= settings.gtol {
            break StopReason::Gtol;
        }
        if iter >= settings.maxiter {
            break StopReason::MaxIter;
        }
        if p.evals + n + 1 > p.maxfun {
            break StopReason::MaxFun;
        }

        let free: Vec<bool> = (0..n).map(|i| !((z[i] <= 0.0 && g[i] > 0.0) || (z[i] >= 1.0 && g[i] < 0.0))).collect();
        let gf: Vec<f64> = g.iter().zip(&free).map(|(gi, &fr)| if fr { *gi } else { 0.0 }).collect();
        let mut d: Vec<f64> = lbfgs_direction(&gf, &mem).into_iter().zip(&free).map(|(di, &fr)| if fr { di } else { 0.0 }).collect();
        if dot(&d, &gf) >= -1e-300 {
            mem.clear();
            d = gf.iter().map(|v| -v).collect();
        }
        let dn = inf_norm(&d);
        if dn == 0.0 {
            break StopReason::Gtol;
        }
        // without curvature information, the first move spans a tenth of the box
        let mut alpha = if mem.is_empty() { 0.1 / dn } else { 1.0 };

        let mut accepted = None;
        let mut failures = 0;
        for _ in 0..settings.maxls {
            if p.evals + 1 > p.maxfun {
                break;
            }
            let zt: Vec<f64> = (0..n).map(|i| (z[i] + alpha * d[i]).clamp(0.0, 1.0)).collect();
            if zt == z {
                break;
            }
            let step: Vec<f64> = zt.iter().zip(&z).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &step);
            match p.eval(&zt) {
                Ok(ft) if ft <= fz + 1e-4 * slope => {
                    accepted = Some((zt, ft));
                    break;
                }
                Ok(ft) => {
                    // safeguarded quadratic interpolation of the backtrack factor
                    let denom = 2.0 * (ft - fz - slope);
                    let t = if denom > 0.0 { (-slope / denom).clamp(0.1, 0.5) } else { 0.5 };
                    alpha *= t;
                }
                Err(e) => {
                    log::debug!("trial point rejected: {e}");
                    failures += 1;
                    alpha *= 0.5;
                }
            }
        }
        if failures == settings.maxls {
            return Err(Error::Optimizer(format!("forward model failed at {failures} consecutive trial points")));
        }

        let mut progressed = false;
        let line_search_failed = accepted.is_none();
        if let Some((zt, ft)) = accepted {
            iter += 1;
            let s: Vec<f64> = zt.iter().zip(&z).map(|(a, b)| a - b).collect();
            let resolved = s.iter().enumerate().any(|(i, si)| si.abs() > p.axis_step(&z, i));
            let rel = relative_decrease(fz, ft);
            if p.evals + n > p.maxfun {
                z = zt;
                fz = ft;
                trace.push(fz);
                break StopReason::MaxFun;
            }
            let axes = curvature_model(&mem, n).map(|e| e.eigenvectors);
            let gt = p.grad(&zt, ft, axes.as_ref(), central)?;
            let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            if dot(&s, &y) > f64::EPSILON * dot(&y, &y) {
                if mem.len() == settings.memory {
                    mem.pop_front();
                }
                mem.push_back((s, y));
            }
            z = zt;
            fz = ft;
            g = gt;
            trace.push(fz);
            progressed = rel > settings.ftol && resolved;
        }
        if progressed {
            floor_failed = false;
            restarted = false;
            continue;
        }

        // Stalled. On the floor of a narrow valley the stored curvature pairs
        // all point across it and the forward-difference error can swamp the
        // slope along it. Escalate: search along the floor, restart from
        // steepest descent, switch to central differences, then give up.
        if !floor_failed && p.evals + 2 * n * (n + 1) + 8 <= p.maxfun {
            if let Some((zf, ff)) = floor_search(&mut p, &z, fz)? {
                if relative_decrease(fz, ff) > settings.ftol {
                    iter += 1;
                    z = zf;
                    fz = ff;
                    let axes = curvature_model(&mem, n).map(|e| e.eigenvectors);
                    g = p.grad(&z, fz, axes.as_ref(), central)?;
                    trace.push(fz);
                    restarted = false;
                    continue;
                }
            }
            floor_failed = true;
        }
        if !restarted && !mem.is_empty() {
            restarted = true;
            mem.clear();
            continue;
        }
        if !central && p.evals + 2 * n <= p.maxfun {
            central = true;
            restarted = false;
            mem.clear();
            g = p.grad(&z, fz, None, true)?;
            continue;
        }
        break if line_search_failed { StopReason::LineSearch } else { StopReason::Ftol };
    };

    Ok(Minimum { x: p.to_x(&z), f: fz, n_evals: p.evals, n_iter: iter, trace, stop })
}

fn relative_decrease(before: f64, after: f64) -> f64 {
    (before - after) / before.abs().max(after.abs()).max(f64::MIN_POSITIVE)
}

fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<f64> {
    let (d1, d2) = (b.0 - a.0, c.0 - a.0);
    let (s1, s2) = ((b.1 - a.1) / d1, (c.1 - a.1) / d2);
    let curv = (s2 - s1) / (d2 - d1);
    if !(curv > 0.0) || !curv.is_finite() {
        return None;
    }
    // f = a.1 + s1 (t - a.0) + curv (t - a.0)(t - b.0)
    let v = 0.5 * (a.0 + b.0) - s1 / (2.0 * curv);
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_quadratic_is_recovered() {
        let c = [1437.0, 4210.0];
        let d = [1.0, 0.25];
        let f = move |x: &[f64]| -> Result<f64> { Ok(d[0] * (x[0] - c[0]).powi(2) + d[1] * (x[1] - c[1]).powi(2)) };
        let m = minimize_box(&f, &[1800.0, 3800.0], &[1000.0, 2000.0], &[2000.0, 6000.0], &LbfgsSettings::default()).unwrap();
        // the stall checks before stopping account for most of the budget
        assert!(m.n_evals < 150, "{} evaluations", m.n_evals);
        assert!((m.x[0] - c[0]).abs() < 1e-6 * c[0], "{:?}", m.x);
        assert!((m.x[1] - c[1]).abs() < 1e-6 * c[1], "{:?}", m.x);
    }

    #[test]
    fn minimum_outside_box_lands_on_face() {
        let f = |x: &[f64]| -> Result<f64> { Ok((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)) };
        let m = minimize_box(&f, &[0.5, 0.5], &[0.0, 0.0], &[2.0, 2.0], &LbfgsSettings::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-12 && m.x[1].abs() < 1e-12, "{:?}", m.x);
    }

    #[test]
    fn nonconvex_rosenbrock_stays_in_box_and_descends() {
        let f = |x: &[f64]| -> Result<f64> { Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)) };
        let m = minimize_box(&f, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &LbfgsSettings::default()).unwrap();
        assert!(m.x.iter().all(|v| (-2.0..=2.0).contains(v)));
        assert!(m.f < 1e-6, "f = {} after {:?}", m.f, m.stop);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn persistent_failure_aborts() {
        let f = |x: &[f64]| -> Result<f64> {
            if x[0] > 0.5001 {
                Err(Error::Singular { equation: 0 })
            } else {
                Ok(-x[0])
            }
        };
        let s = LbfgsSettings { maxls: 3, ..Default::default() };
        let r = minimize_box(&f, &[0.5], &[0.0], &[1.0], &s);
        assert!(matches!(r, Err(Error::Optimizer(_))), "{r:?}");
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| -> Result<f64> { Ok((x[0] - 0.3).powi(2) * (1.0 + x[1] * x[1]) + (x[1] - 0.7).powi(4)) };
        let s = LbfgsSettings::default();
        let a = minimize_box(&f, &[0.9, 0.1], &[0.0, 0.0], &[1.0, 1.0], &s).unwrap();
        let b = minimize_box(&f, &[0.9, 0.1], &[0.0, 0.0], &[1.0, 1.0], &s).unwrap();
        assert_eq!(a, b);
    }
}
