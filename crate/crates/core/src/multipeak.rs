//! k-peak construction: per-peak ground states, the shared coefficient
//! `M(C*^{N-2} A_total) = C*^2`, the superposition ansatz and its Newton
//! polish. Full polish is 1D only.

use serde::{Deserialize, Serialize};

use crate::concentration::{Field, VectorField};
use crate::correspondence::{kirchhoff_residual, weighted_norm, ResidualNorms};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, LineGrid};
use crate::kirchhoff_map::{derive_scan_cap, find_g_roots, GRoots, KirchhoffFunction, RootScan};
use crate::numerics::{linear_fit, parabolic_peak};
use crate::profiles::{ground_state, GroundState};
use crate::semilinear::{self, Coefficient, NewtonOptions};

#[derive(Clone)]
pub struct MultiPeakSpec {
    pub dim: usize,
    pub p: f64,
    pub v: Field,
    pub peaks: Vec<Vec<f64>>,
    /// `V(P_j)`.
    pub masses: Vec<f64>,
    pub grounds: Vec<GroundState>,
    pub a_total: f64,
    /// Expansion `V(x) = V(P_j) + sum_i b_{j,i} |x_i - P_{j,i}|^alpha + ...`.
    pub alpha: f64,
    pub b: Vec<Vec<f64>>,
    pub m: KirchhoffFunction,
    pub roots: GRoots,
    pub c_star: f64,
}

impl std::fmt::Debug for MultiPeakSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiPeakSpec")
            .field("dim", &self.dim)
            .field("peaks", &self.peaks)
            .field("masses", &self.masses)
            .field("a_total", &self.a_total)
            .field("b", &self.b)
            .field("c_star", &self.c_star)
            .finish_non_exhaustive()
    }
}

impl MultiPeakSpec {
    pub fn k(&self) -> usize {
        self.peaks.len()
    }

    /// Smallest distance between two peaks (infinite for `k = 1`).
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.peaks.len() {
            for j in i + 1..self.peaks.len() {
                best = best.min(distance(&self.peaks[i], &self.peaks[j]));
            }
        }
        best
    }

    /// Build from another root of `G` instead of the smallest one. Experimental:
    /// nothing guarantees a solution branch along it.
    pub fn with_root(mut self, index: usize) -> Result<Self> {
        let root = *self.roots.roots.get(index).ok_or_else(|| {
            Error::InvalidParameter(format!("G has {} roots, index {index} requested", self.roots.roots.len()))
        })?;
        self.c_star = root;
        Ok(self)
    }

    /// `M(C*^{N-2} A_total)`.
    pub fn coefficient(&self) -> f64 {
        self.m.eval(self.c_star.powi(self.dim as i32 - 2) * self.a_total)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-peak ground states, `A_total` and `C*` for the given peak points.
pub fn build_multi_peak_spec(
    v: Field,
    grad: VectorField,
    p: f64,
    peaks: Vec<Vec<f64>>,
    m: &KirchhoffFunction,
    alpha: f64,
) -> Result<MultiPeakSpec> {
    let dim = peaks.first().ok_or(Error::Empty("peak list"))?.len();
    if peaks.iter().any(|q| q.len() != dim) {
        return Err(Error::InvalidParameter("peaks have mixed dimensions".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("expansion degree must be positive, got {alpha}")));
    }
    let mut masses = Vec::with_capacity(peaks.len());
    let mut b = Vec::with_capacity(peaks.len());
    for q in &peaks {
        let g = grad(q).iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(g < 1e-10) {
            return Err(Error::NotCritical {
                point: q.clone(),
                gradient: g,
            });
        }
        let vq = v(q);
        if !(vq > 0.0) {
            return Err(Error::InvalidParameter(format!("V({q:?}) = {vq} is not positive")));
        }
        // symmetric difference quotient for b_{j,i}
        let r = 1e-3f64;
        let mut row = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut up = q.clone();
            let mut dn = q.clone();
            up[i] += r;
            dn[i] -= r;
            let bi = (v(&up) + v(&dn) - 2.0 * vq) / (2.0 * r.powf(alpha));
            // the expansion only matters for k >= 2; a single peak may sit on a flat V
            if !(bi.abs() > 1e-8) && peaks.len() > 1 {
                return Err(Error::Hypothesis(format!(
                    "expansion coefficient b[{i}] at {q:?} vanishes for alpha = {alpha}"
                )));
            }
            row.push(bi);
        }
        masses.push(vq);
        b.push(row);
    }
    let grounds = masses
        .iter()
        .map(|&mj| ground_state(dim, mj, p))
        .collect::<Result<Vec<_>>>()?;
    let a_total: f64 = grounds.iter().map(|w| w.gradient_norm_sq).sum();
    // same bracket as the single-peak correspondence
    let m0 = m
        .m0()
        .filter(|x| *x > 0.0)
        .ok_or_else(|| Error::InvalidParameter("a positive lower bound m0 must be declared".into()))?;
    let k = derive_scan_cap(m, a_total, dim)?;
    let roots = find_g_roots(m, a_total, dim, (0.5 * m0.sqrt(), 2.0 * k), &RootScan::default())?;
    Ok(MultiPeakSpec {
        dim,
        p,
        v,
        peaks,
        masses,
        grounds,
        a_total,
        alpha,
        b,
        m: m.clone(),
        c_star: roots.c_star,
        roots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResidual {
    pub per_peak: Vec<f64>,
    pub coefficient: f64,
    /// `|M(C*^{N-2} A_total) - C*^2|`.
    pub root_mismatch: f64,
    pub c_star: f64,
}

/// Residual of the limit system for `U_j = W_j(x / C*)` with the shared
/// coefficient, optionally at a caller-supplied `C*`.
pub fn system_residual(spec: &MultiPeakSpec, c_star: Option<f64>) -> Result<SystemResidual> {
    let c = c_star.unwrap_or(spec.c_star);
    let coefficient = spec.m.eval(c.powi(spec.dim as i32 - 2) * spec.a_total);
    let per_peak = spec
        .grounds
        .iter()
        .map(|w| Ok(w.rescaled(c)?.equation_residual(coefficient)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SystemResidual {
        per_peak,
        coefficient,
        root_mismatch: (coefficient - c * c).abs(),
        c_star: c,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MultiPeakOptions {
    pub polish: bool,
    /// Grid cells per `eps C*`.
    pub cells_per_delta: f64,
    /// Grid margin beyond the outer peaks in units of `eps C* / sqrt(min m)`.
    pub margin: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MultiPeakOptions {
    fn default() -> Self {
        Self {
            polish: true,
            cells_per_delta: 1000.0,
            margin: 30.0,
            tol: 1e-9,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPeakSolution {
    pub epsilon: f64,
    pub c_star: f64,
    pub profile: GridFunction,
    pub ansatz: Vec<f64>,
    /// Re-identified maxima, one per peak.
    pub centers: Vec<f64>,
    /// `polished - ansatz(centers)`; absent without polish.
    pub correction: Option<Vec<f64>>,
    pub residual: ResidualNorms,
    pub iterations: usize,
}

impl MultiPeakSolution {
    pub fn polished(&self) -> bool {
        self.correction.is_some()
    }
}

fn superpose(spec: &MultiPeakSpec, nodes: &[f64], centers: &[f64], delta: f64) -> Vec<f64> {
    nodes
        .iter()
        .map(|x| {
            spec.grounds
                .iter()
                .zip(centers)
                .map(|(w, c)| w.eval((x - c) / delta))
                .sum()
        })
        .collect()
}

/// Interior local maxima above half of the smallest peak height.
fn local_maxima(u: &[f64], floor: f64) -> Vec<usize> {
    (1..u.len().saturating_sub(1))
        .filter(|&i| u[i] > floor && u[i] >= u[i - 1] && u[i] > u[i + 1])
        .collect()
}

/// Grid used by [`build_multi_peak`] at `eps`.
pub fn multi_peak_grid(spec: &MultiPeakSpec, eps: f64, opts: &MultiPeakOptions) -> Result<LineGrid> {
    if spec.dim != 1 {
        return Err(Error::UnsupportedDimension(spec.dim));
    }
    let delta = eps * spec.c_star;
    let m_min = spec.masses.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = opts.margin * delta / m_min.sqrt();
    let lo = spec.peaks.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min) - half;
    let hi = spec.peaks.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max) + half;
    Ok(LineGrid::with_spacing(lo, hi, delta / opts.cells_per_delta))
}

/// Superposition `sum_j W_j((x - c_j)/(eps C*))`, optionally polished by the
/// frozen-coefficient Newton iteration on the Kirchhoff system.
pub fn build_multi_peak(
    spec: &MultiPeakSpec,
    eps: f64,
    centers: Option<&[f64]>,
    opts: &MultiPeakOptions,
) -> Result<MultiPeakSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let line = multi_peak_grid(spec, eps, opts)?;
    let grid = Grid::Line(line);
    build_multi_peak_on(spec, eps, centers, opts, grid)
}

/// Same as [`build_multi_peak`] on a caller-supplied grid.
pub fn build_multi_peak_on(
    spec: &MultiPeakSpec,
    eps: f64,
    centers: Option<&[f64]>,
    opts: &MultiPeakOptions,
    grid: Grid,
) -> Result<MultiPeakSolution> {
    let Grid::Line(_) = grid else {
        return Err(Error::UnsupportedDimension(grid.dim()));
    };
    let k = spec.k();
    let start: Vec<f64> = match centers {
        Some(c) if c.len() != k => {
            return Err(Error::InvalidParameter(format!("{} centers given for {k} peaks", c.len())));
        }
        Some(c) => c.to_vec(),
        None => spec.peaks.iter().map(|q| q[0]).collect(),
    };
    let delta = eps * spec.c_star;
    let nodes = grid.nodes();
    let ansatz = superpose(spec, &nodes, &start, delta);
    let floor = 0.5 * spec.grounds.iter().map(|w| w.peak()).fold(f64::INFINITY, f64::min);
    let found = local_maxima(&ansatz, floor).len();
    if found < k {
        return Err(Error::PeakMerge { found, expected: k });
    }
    if spec.separation() <= 20.0 * eps {
        log::warn!(
            "peak separation {} is within 20 eps = {}; results are outside the asymptotic regime",
            spec.separation(),
            20.0 * eps
        );
    }
    let v: Vec<f64> = nodes.iter().map(|x| (spec.v)(&[*x])).collect();

    let (values, iterations) = if opts.polish {
        let newton = NewtonOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            ..Default::default()
        };
        let sol = semilinear::solve(
            &grid,
            Coefficient::Kirchhoff {
                m: &spec.m,
                epsilon: eps,
            },
            &v,
            spec.p,
            &ansatz,
            &newton,
        )
        .or_else(|e| match e {
            Error::NegativeDip { .. } => semilinear::solve(
                &grid,
                Coefficient::Kirchhoff {
                    m: &spec.m,
                    epsilon: eps,
                },
                &v,
                spec.p,
                &ansatz,
                &NewtonOptions {
                    min_damping: 1e-8,
                    ..newton
                },
            ),
            other => Err(other),
        })?;
        (sol.values, sol.iterations)
    } else {
        (ansatz.clone(), 0)
    };

    // one maximum per peak: the largest node inside its Voronoi cell
    let centers: Vec<f64> = start
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut best: Option<usize> = None;
            for (i, x) in nodes.iter().enumerate() {
                let nearest = start
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (x - a.1).abs().total_cmp(&(x - b.1).abs()))
                    .map(|(idx, _)| idx);
                if nearest == Some(j) && best.is_none_or(|b| values[i] > values[b]) {
                    best = Some(i);
                }
            }
            best.map_or(*c, |i| parabolic_peak(&nodes, &values, i))
        })
        .collect();
    let after = local_maxima(&values, floor).len();
    if after < k {
        return Err(Error::PeakMerge { found: after, expected: k });
    }

    let profile = GridFunction::new(grid, values);
    let residual = kirchhoff_residual(&profile, &v, &spec.m, spec.p, eps);
    let (ansatz, correction) = if opts.polish {
        let moved = superpose(spec, &nodes, &centers, delta);
        let phi = profile.values.iter().zip(&moved).map(|(u, a)| u - a).collect();
        (moved, Some(phi))
    } else {
        (ansatz, None)
    };
    Ok(MultiPeakSolution {
        epsilon: eps,
        c_star: spec.c_star,
        profile,
        ansatz,
        centers,
        correction,
        residual,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionNorm {
    pub norm: f64,
    /// `|phi|_eps / eps^{N/2}`.
    pub ratio: f64,
}

/// Weighted norm of the correction and its ratio to `eps^{N/2}`.
pub fn correction_norm(sol: &MultiPeakSolution, v: &Field) -> Result<CorrectionNorm> {
    let phi = sol.correction.as_ref().ok_or(Error::Unpolished)?;
    let grid = sol.profile.grid;
    let vv: Vec<f64> = grid.nodes().iter().map(|x| v(&[*x])).collect();
    let norm = weighted_norm(&GridFunction::new(grid, phi.clone()), &vv, sol.epsilon);
    Ok(CorrectionNorm {
        norm,
        ratio: norm / sol.epsilon.powf(0.5 * grid.dim() as f64),
    })
}

/// Largest contribution of the other peaks within half a separation of each
/// peak, for the unpolished ansatz at `eps`.
pub fn interaction_strength(spec: &MultiPeakSpec, eps: f64) -> Result<f64> {
    if spec.k() < 2 {
        return Ok(0.0);
    }
    let delta = eps * spec.c_star;
    let half = 0.5 * spec.separation();
    let mut worst = 0.0f64;
    for (j, q) in spec.peaks.iter().enumerate() {
        // the other terms are largest at the edge of the ball, sample it finely
        let samples = 201;
        for s in 0..samples {
            let x: Vec<f64> = q
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { c - half + 2.0 * half * s as f64 / (samples - 1) as f64 } else { *c })
                .collect();
            let others: f64 = spec
                .grounds
                .iter()
                .zip(&spec.peaks)
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, (w, c))| w.eval(distance(&x, c) / delta))
                .sum();
            worst = worst.max(others);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionFit {
    /// `(separation / (eps C*), strength)` rows.
    pub rows: Vec<(f64, f64)>,
    /// Slope of `log strength` against `separation / (eps C*)`.
    pub slope: f64,
}

pub fn interaction_decay(spec: &MultiPeakSpec, eps_values: &[f64]) -> Result<InteractionFit> {
    if eps_values.len() < 2 {
        return Err(Error::Empty("need at least two eps values"));
    }
    let mut rows = Vec::with_capacity(eps_values.len());
    for &e in eps_values {
        rows.push((spec.separation() / (e * spec.c_star), interaction_strength(spec, e)?));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.max(f64::MIN_POSITIVE).ln()).collect();
    let (_, slope) = linear_fit(&xs, &ys).ok_or(Error::Empty("interaction fit"))?;
    Ok(InteractionFit { rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn double_well(m: &KirchhoffFunction) -> MultiPeakSpec {
        build_multi_peak_spec(
            Arc::new(|x: &[f64]| 1.0 + (x[0] * x[0] - 1.0).powi(2)),
            Arc::new(|x: &[f64]| vec![4.0 * x[0] * (x[0] * x[0] - 1.0)]),
            4.0,
            vec![vec![-1.0], vec![1.0]],
            m,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn double_well_spec() {
        let spec = double_well(&KirchhoffFunction::affine(1.0, 1.0));
        assert!((spec.a_total - 8.0 / 3.0).abs() < 1e-9);
        assert!((spec.b[0][0] - 4.0).abs() < 1e-5 && (spec.b[1][0] - 4.0).abs() < 1e-5);
        let sys = system_residual(&spec, None).unwrap();
        assert!(sys.root_mismatch < 1e-10);
        assert!(sys.per_peak.iter().all(|r| *r < 1e-6), "{sys:?}");
        let off = system_residual(&spec, Some(1.1 * spec.c_star)).unwrap();
        assert!(off.per_peak[0] > 1e-2 * spec.grounds[0].peak());
        let unit = double_well(&KirchhoffFunction::constant(1.0));
        assert!((unit.c_star - 1.0).abs() < 1e-11);
    }

    #[test]
    fn non_critical_peak_rejected() {
        let err = build_multi_peak_spec(
            Arc::new(|x: &[f64]| 1.0 + x[0] * x[0]),
            Arc::new(|x: &[f64]| vec![2.0 * x[0]]),
            4.0,
            vec![vec![0.5]],
            &KirchhoffFunction::constant(1.0),
            2.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotCritical { .. }));
    }

    #[test]
    fn merged_peaks_and_unpolished_correction() {
        let spec = double_well(&KirchhoffFunction::affine(1.0, 1.0));
        let err = build_multi_peak(&spec, 1.0, None, &MultiPeakOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PeakMerge { expected: 2, .. }), "{err:?}");
        let opts = MultiPeakOptions {
            polish: false,
            cells_per_delta: 100.0,
            ..Default::default()
        };
        let sol = build_multi_peak(&spec, 0.1, None, &opts).unwrap();
        assert_eq!(correction_norm(&sol, &spec.v), Err(Error::Unpolished));
    }

    #[test]
    fn interaction_decays_with_separation() {
        let spec = double_well(&KirchhoffFunction::affine(1.0, 1.0));
        let fit = interaction_decay(&spec, &[0.1, 0.07, 0.05]).unwrap();
        assert!(fit.slope < 0.0, "{fit:?}");
    }
}
