//! Large-potential nonexistence: `sigma = inf M(t)/t^{2/(N-2)}`, the sharp
//! Gagliardo-Nirenberg constant `C_l`, the Young-inequality threshold on
//! `inf V`, and a numerical probe that only the zero solution survives above it.
//!
//! The Young exponent is called `q_y` throughout; `p`/`ell` is always the
//! nonlinearity power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ScalingMap;
use crate::grid::{sphere_area, Grid, RadialGrid};
use crate::kirchhoff_map::{solve_delta_epsilon, DeltaOptions, KirchhoffFunction};
use crate::numerics::{gauss_legendre, golden_section, linear_fit, log_space};
use crate::profiles::{critical_exponent, ground_state};
use crate::semilinear::{self, Coefficient, NewtonOptions};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SigmaOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Log-log slope over the last decade below which the ratio is taken to
    /// keep decreasing to 0.
    pub tail_slope: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self {
            t_min: 1e-6,
            t_max: 1e9,
            points: 3000,
            tail_slope: -0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub dim: usize,
    /// `0` when the hypothesis fails.
    pub sigma: f64,
    /// Smallest value seen on the grid, before any extrapolation.
    pub grid_min: f64,
    pub argmin: f64,
    /// Log-log slope of the ratio over the last decade of the grid.
    pub tail_slope: f64,
    pub hypothesis_holds: bool,
    pub detail: String,
}

fn ratio(m: &KirchhoffFunction, dim: usize, t: f64) -> f64 {
    m.eval(t) / t.powf(2.0 / (dim as f64 - 2.0))
}

/// `inf_{t > 0} M(t) / t^{2/(N-2)}` on a log grid, refined by golden section.
pub fn sigma_inf(m: &KirchhoffFunction, dim: usize, opts: &SigmaOptions) -> Result<SigmaReport> {
    if dim < 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if opts.points < 10 || !(opts.t_min > 0.0 && opts.t_max > opts.t_min) {
        return Err(Error::InvalidParameter("sigma grid needs t_min > 0, t_max > t_min and 10 points".into()));
    }
    let ts = log_space(opts.t_min, opts.t_max, opts.points);
    let rs: Vec<f64> = ts.iter().map(|&t| ratio(m, dim, t)).collect();
    let i = crate::numerics::argmin(&rs);
    let (mut argmin, mut best) = (ts[i], rs[i]);
    if i > 0 && i + 1 < ts.len() {
        let (x, fx) = golden_section(ts[i - 1].ln(), ts[i + 1].ln(), 1e-14, |s| ratio(m, dim, s.exp()));
        if fx < best {
            argmin = x.exp();
            best = fx;
        }
    }
    // still decreasing like a power at the end of the grid -> infimum 0
    let last: Vec<usize> = (0..ts.len()).filter(|&k| ts[k] >= opts.t_max / 10.0).collect();
    let xs: Vec<f64> = last.iter().map(|&k| ts[k].ln()).collect();
    let ys: Vec<f64> = last.iter().map(|&k| rs[k].max(f64::MIN_POSITIVE).ln()).collect();
    let slope = linear_fit(&xs, &ys).map_or(0.0, |(_, s)| s);
    let decaying = i + 1 == ts.len() && slope < opts.tail_slope;
    let (sigma, holds, detail) = if best < 1e-12 {
        (0.0, false, format!("sigma = {best:e} is numerically zero"))
    } else if decaying {
        (0.0, false, format!("ratio keeps decreasing at t = {:e} (log-log slope {slope:.3})", opts.t_max))
    } else {
        (best, true, format!("minimum {best} at t = {argmin:e}"))
    };
    Ok(SigmaReport {
        dim,
        sigma,
        grid_min: best,
        argmin,
        tail_slope: slope,
        hypothesis_holds: holds,
        detail,
    })
}

/// Radial Gaussian mixture `sum_k c_k exp(-a_k r^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub coefficients: Vec<f64>,
    pub rates: Vec<f64>,
}

impl GaussianMixture {
    fn value(&self, r: f64) -> f64 {
        self.coefficients.iter().zip(&self.rates).map(|(c, a)| c * (-a * r * r).exp()).sum()
    }

    fn slope(&self, r: f64) -> f64 {
        self.coefficients
            .iter()
            .zip(&self.rates)
            .map(|(c, a)| -2.0 * a * c * r * (-a * r * r).exp())
            .sum()
    }

    /// `lambda u(mu x)`.
    pub fn scaled(&self, lambda: f64, mu: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| lambda * c).collect(),
            rates: self.rates.iter().map(|a| a * mu * mu).collect(),
        }
    }

    /// `(|grad u|_2^2, |u|_2^2, |u|_l^l)` by composite Gauss-Legendre in `r`.
    pub fn norms(&self, dim: usize, ell: f64) -> (f64, f64, f64) {
        let a_min = self.rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let radius = 12.0 / a_min.sqrt();
        let panels = 400;
        let width = radius / panels as f64;
        let (gx, gw) = gauss_legendre(12);
        let area = sphere_area(dim);
        let (mut g, mut l2, mut lp) = (0.0, 0.0, 0.0);
        for k in 0..panels {
            for (x, w) in gx.iter().zip(&gw) {
                let r = (k as f64 + 0.5 * (x + 1.0)) * width;
                let vol = 0.5 * width * w * area * r.powi(dim as i32 - 1);
                let u = self.value(r);
                let du = self.slope(r);
                g += vol * du * du;
                l2 += vol * u * u;
                lp += vol * u.abs().powf(ell);
            }
        }
        (g, l2, lp)
    }
}

/// `|u|_l^l / (|grad u|_2^{N(l-2)/2} |u|_2^{l - N(l-2)/2})` from the three norms.
pub fn gn_ratio(dim: usize, ell: f64, grad_sq: f64, mass: f64, lp: f64) -> f64 {
    let theta = dim as f64 * (ell - 2.0) / 2.0;
    lp / (grad_sq.powf(0.5 * theta) * mass.powf(0.5 * (ell - theta)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnReport {
    pub dim: usize,
    pub ell: f64,
    pub constant: f64,
    /// GN ratio of every battery function.
    pub battery: Vec<f64>,
    pub max_ratio: f64,
    /// Largest relative change of the ratio under `u -> lambda u(mu x)`.
    pub scaling_defect: f64,
    pub seed: u64,
}

pub const BATTERY_SIZE: usize = 50;

/// Sharp constant from the ground state `Q` of `-Delta Q + Q = Q^{l-1}`,
/// validated on a seeded battery of radial Gaussian mixtures.
pub fn gn_constant(dim: usize, ell: f64, seed: u64) -> Result<GnReport> {
    if dim < 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let upper = critical_exponent(dim);
    if !(ell > 2.0 && ell < upper) {
        return Err(Error::ExponentOutOfRange { dim, p: ell, upper });
    }
    let q = ground_state(dim, 1.0, ell)?;
    let constant = gn_ratio(dim, ell, q.gradient_norm_sq, q.mass, q.p_norm);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut battery = Vec::with_capacity(BATTERY_SIZE);
    let mut scaling_defect = 0.0f64;
    let mut mixtures = Vec::with_capacity(BATTERY_SIZE);
    for _ in 0..BATTERY_SIZE {
        let terms = rng.gen_range(1..=3);
        mixtures.push(GaussianMixture {
            coefficients: (0..terms).map(|_| rng.gen_range(0.1..2.0)).collect(),
            rates: (0..terms).map(|_| rng.gen_range(0.1..10.0)).collect(),
        });
    }
    for (index, u) in mixtures.iter().enumerate() {
        let (g, l2, lp) = u.norms(dim, ell);
        let r = gn_ratio(dim, ell, g, l2, lp);
        if r > constant * (1.0 + 1e-6) {
            return Err(Error::GnBattery {
                index,
                ratio: r,
                constant,
            });
        }
        if index < 5 {
            for (lambda, mu) in [(2.0, 1.0), (1.0, 2.0), (3.0, 0.5)] {
                let (g, l2, lp) = u.scaled(lambda, mu).norms(dim, ell);
                scaling_defect = scaling_defect.max((gn_ratio(dim, ell, g, l2, lp) / r - 1.0).abs());
            }
        }
        battery.push(r);
    }
    let max_ratio = battery.iter().cloned().fold(0.0, f64::max);
    Ok(GnReport {
        dim,
        ell,
        constant,
        battery,
        max_ratio,
        scaling_defect,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub dim: usize,
    pub ell: f64,
    pub sigma: f64,
    pub c_ell: f64,
    pub eta: f64,
    pub c_eta: f64,
    pub q_y: f64,
    pub v0_bound: f64,
    pub sigma_report: SigmaReport,
    pub gn: GnReport,
}

/// Exponent of Young's inequality in the nonexistence chain.
pub fn young_exponent(dim: usize, ell: f64) -> f64 {
    4.0 / ((dim as f64 - 2.0) * (ell - 2.0))
}

/// `eta + C_eta C_l (q-1) q^{-q/(q-1)} sigma^{-1/(q-1)}`.
pub fn threshold_formula(sigma: f64, c_ell: f64, eta: f64, c_eta: f64, q_y: f64) -> f64 {
    eta + c_eta * c_ell * (q_y - 1.0) * q_y.powf(-q_y / (q_y - 1.0)) * sigma.powf(-1.0 / (q_y - 1.0))
}

/// Threshold on `inf V` above which only `u = 0` solves the problem. For the
/// pure power `f(s) = s^{l-1}` the split is `eta = 0`, `C_eta = 1`.
pub fn v0_threshold(
    m: &KirchhoffFunction,
    dim: usize,
    ell: f64,
    eta: f64,
    c_eta: f64,
    sigma_opts: &SigmaOptions,
    seed: u64,
) -> Result<ThresholdReport> {
    if dim < 3 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let q_y = young_exponent(dim, ell);
    if !(q_y > 1.0) {
        return Err(Error::Hypothesis(format!("Young exponent q = {q_y} is not above 1")));
    }
    if !(eta >= 0.0 && c_eta > 0.0) {
        return Err(Error::InvalidParameter(format!("need eta >= 0 and C_eta > 0, got {eta}, {c_eta}")));
    }
    let sigma_report = sigma_inf(m, dim, sigma_opts)?;
    if !sigma_report.hypothesis_holds {
        return Err(Error::Hypothesis(format!("sigma = 0, no threshold: {}", sigma_report.detail)));
    }
    let gn = gn_constant(dim, ell, seed)?;
    let sigma = sigma_report.sigma;
    Ok(ThresholdReport {
        dim,
        ell,
        sigma,
        c_ell: gn.constant,
        eta,
        c_eta,
        q_y,
        v0_bound: threshold_formula(sigma, gn.constant, eta, c_eta, q_y),
        sigma_report,
        gn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Collapsed,
    Nontrivial,
    Stalled,
}

/// Energy inequality every solution must satisfy; replayed on nontrivial finds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrial {
    pub trial: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub width: f64,
    pub final_norm: f64,
    pub residual: f64,
    pub iterations: usize,
    pub outcome: ProbeOutcome,
    pub chain: Option<ChainCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub dim: usize,
    pub ell: f64,
    pub v: f64,
    pub trials: Vec<ProbeTrial>,
}

impl ProbeReport {
    pub fn collapsed(&self) -> usize {
        self.trials.iter().filter(|t| t.outcome == ProbeOutcome::Collapsed).count()
    }

    pub fn nontrivial(&self) -> usize {
        self.trials.iter().filter(|t| t.outcome == ProbeOutcome::Nontrivial).count()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub dim: usize,
    /// Radial grid step; `min(0.05, 0.05/sqrt(V))` when absent.
    pub step: Option<f64>,
    /// Grid radius; `40/sqrt(V)` (at least 20) when absent.
    pub radius: Option<f64>,
    pub amplitude: (f64, f64),
    pub width: (f64, f64),
    pub collapse_norm: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `(sigma, C_l, eta)` for the chain replay on nontrivial finds.
    pub chain: Option<(f64, f64, f64)>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            dim: 3,
            step: None,
            radius: None,
            amplitude: (0.5, 5.0),
            width: (0.5, 5.0),
            collapse_norm: 1e-8,
            tol: 1e-11,
            max_iter: 200,
            chain: None,
        }
    }
}

fn probe_grid(v: f64, opts: &ProbeOptions) -> Grid {
    let radius = opts.radius.unwrap_or((40.0 / v.sqrt()).max(20.0));
    let step = opts.step.unwrap_or((0.05 / v.sqrt()).min(0.05));
    Grid::Radial(RadialGrid::new(opts.dim, step, (radius / step).ceil() as usize + 1))
}

fn l2_norm(grid: &Grid, u: &[f64]) -> f64 {
    let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
    grid.integrate(&sq).sqrt()
}

fn chain_check(grid: &Grid, u: &[f64], v: f64, ell: f64, sigma: f64, c_ell: f64, eta: f64) -> ChainCheck {
    let dim = grid.dim() as f64;
    let g = grid.dirichlet_energy(u);
    let mass = l2_norm(grid, u).powi(2);
    let star = 2.0 * dim / (dim - 2.0);
    let theta = dim * (ell - 2.0) / 2.0;
    let lhs = sigma * g.powf(0.5 * star) + (v - eta) * mass;
    let rhs = c_ell * g.powf(0.5 * theta) * mass.powf(0.5 * (ell - theta));
    ChainCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-6),
    }
}

fn run_probe(
    grid: &Grid,
    m: &KirchhoffFunction,
    v: f64,
    ell: f64,
    initial: &[f64],
    opts: &ProbeOptions,
) -> (Vec<f64>, f64, usize, ProbeOutcome) {
    let vv = vec![v; grid.len()];
    let newton = NewtonOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        min_damping: 1e-6,
        require_positive: false,
    };
    match semilinear::solve(grid, Coefficient::Kirchhoff { m, epsilon: 1.0 }, &vv, ell, initial, &newton) {
        Ok(sol) => {
            let norm = l2_norm(grid, &sol.values);
            let outcome = if norm < opts.collapse_norm {
                ProbeOutcome::Collapsed
            } else {
                ProbeOutcome::Nontrivial
            };
            (sol.values, sol.residual, sol.iterations, outcome)
        }
        Err(e) => {
            let residual = match e {
                Error::NoConvergence { residual, .. } => residual,
                _ => f64::NAN,
            };
            (initial.to_vec(), residual, opts.max_iter, ProbeOutcome::Stalled)
        }
    }
}

/// Newton from `trials` random Gaussian bumps at constant `V` and `eps = 1`.
pub fn probe_nonexistence(
    m: &KirchhoffFunction,
    v: f64,
    ell: f64,
    trials: usize,
    seed: u64,
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("V must be positive, got {v}")));
    }
    let grid = probe_grid(v, opts);
    let nodes = grid.nodes();
    let results: Vec<ProbeTrial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = seed.wrapping_add(trial as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let amplitude = rng.gen_range(opts.amplitude.0..=opts.amplitude.1);
            let width = rng.gen_range(opts.width.0..=opts.width.1);
            let initial: Vec<f64> = nodes.iter().map(|r| amplitude * (-(r / width).powi(2)).exp()).collect();
            let (u, residual, iterations, outcome) = run_probe(&grid, m, v, ell, &initial, opts);
            let chain = match (outcome, opts.chain) {
                (ProbeOutcome::Nontrivial, Some((sigma, c_ell, eta))) => {
                    Some(chain_check(&grid, &u, v, ell, sigma, c_ell, eta))
                }
                _ => None,
            };
            ProbeTrial {
                trial,
                seed: trial_seed,
                amplitude,
                width,
                final_norm: l2_norm(&grid, &u),
                residual,
                iterations,
                outcome,
                chain,
            }
        })
        .collect();
    Ok(ProbeReport {
        dim: opts.dim,
        ell,
        v,
        trials: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededProbe {
    pub v: f64,
    /// `delta_eps` at `eps = 1` when the correspondence exists.
    pub delta: Option<f64>,
    /// Why no seed could be built.
    pub seed_error: Option<String>,
    pub trial: Option<ProbeTrial>,
}

impl SeededProbe {
    pub fn found_nontrivial(&self) -> bool {
        self.trial.as_ref().is_some_and(|t| t.outcome == ProbeOutcome::Nontrivial)
    }
}

/// Below the threshold: seed Newton with the correspondence profile
/// `W_V(r / delta)` at `eps = 1` and check it stays nontrivial.
pub fn probe_seeded(m: &KirchhoffFunction, v: f64, ell: f64, opts: &ProbeOptions) -> Result<SeededProbe> {
    let w = ground_state(opts.dim, v, ell)?;
    let map = ScalingMap::new(opts.dim, w.gradient_norm_sq);
    let delta = match solve_delta_epsilon(m, &map, 1.0, &DeltaOptions::default()) {
        Ok(c) => c.delta,
        Err(e) => {
            return Ok(SeededProbe {
                v,
                delta: None,
                seed_error: Some(e.to_string()),
                trial: None,
            });
        }
    };
    // the profile is spread over delta / sqrt(V)
    let scale = delta / v.sqrt();
    let grid_opts = ProbeOptions {
        radius: Some(opts.radius.unwrap_or(40.0 * scale)),
        step: Some(opts.step.unwrap_or(scale / 50.0)),
        ..*opts
    };
    let grid = probe_grid(v, &grid_opts);
    let initial: Vec<f64> = grid.nodes().iter().map(|r| w.eval(r / delta)).collect();
    let (u, residual, iterations, outcome) = run_probe(&grid, m, v, ell, &initial, &grid_opts);
    let chain = opts
        .chain
        .map(|(sigma, c_ell, eta)| chain_check(&grid, &u, v, ell, sigma, c_ell, eta));
    Ok(SeededProbe {
        v,
        delta: Some(delta),
        seed_error: None,
        trial: Some(ProbeTrial {
            trial: 0,
            seed: 0,
            amplitude: w.peak(),
            width: scale,
            final_norm: l2_norm(&grid, &u),
            residual,
            iterations,
            outcome,
            chain,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_examples() {
        let opts = SigmaOptions::default();
        let s = sigma_inf(&KirchhoffFunction::power(1.0, 1.0, 2.0), 3, &opts).unwrap();
        assert!(s.hypothesis_holds && (s.sigma - 1.0).abs() < 1e-8, "{s:?}");
        let s = sigma_inf(&KirchhoffFunction::affine(2.0, 0.5), 4, &opts).unwrap();
        assert!((s.sigma - 0.5).abs() < 1e-8, "{s:?}");
        let s = sigma_inf(&KirchhoffFunction::constant(1.0), 4, &opts).unwrap();
        assert!(!s.hypothesis_holds && s.sigma == 0.0, "{s:?}");
        // interior minimum: (1 + t^3)/t^2 is smallest at t = 2^{1/3}
        let s = sigma_inf(&KirchhoffFunction::power(1.0, 1.0, 3.0), 3, &opts).unwrap();
        let t = 2f64.powf(1.0 / 3.0);
        assert!((s.sigma - (1.0 + t.powi(3)) / (t * t)).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(young_exponent(3, 4.0), 2.0);
        let base = threshold_formula(1.0, 0.04, 0.0, 1.0, 2.0);
        assert!((base - 0.01).abs() < 1e-15);
        assert!((threshold_formula(1.0, 0.04, 0.3, 1.0, 2.0) - base - 0.3).abs() < 1e-15);
        let q = 1.5;
        let ratio = threshold_formula(2.0, 0.04, 0.0, 1.0, q) / threshold_formula(1.0, 0.04, 0.0, 1.0, q);
        assert!((ratio - 2f64.powf(-1.0 / (q - 1.0))).abs() < 1e-14);
    }

    #[test]
    fn gn_out_of_range() {
        assert!(matches!(gn_constant(3, 7.0, 0), Err(Error::ExponentOutOfRange { .. })));
        assert!(matches!(gn_constant(2, 4.0, 0), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn empty_probe() {
        let r = probe_nonexistence(&KirchhoffFunction::power(1.0, 1.0, 2.0), 1.0, 4.0, 0, 1, &ProbeOptions::default()).unwrap();
        assert!(r.trials.is_empty());
    }
}
