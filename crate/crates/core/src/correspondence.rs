//! Kirchhoff solutions assembled from the NLS family: `u_eps = omega_{delta_eps}`
//! and the limit profile `U = W(x / C*)`, with residual, norm and decay checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::PeakFamily;
use crate::grid::{Grid, GridFunction};
use crate::kirchhoff_map::{solve_delta_epsilon, CorrespondenceResult, DeltaOptions, KirchhoffFunction};
use crate::numerics::linear_fit;
use crate::profiles::GroundState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub max: f64,
    pub l2: f64,
    /// `eps^{2-N} |grad u|^2` from the gridded profile.
    pub t: f64,
    /// `eps^2 M(t)`.
    pub coefficient: f64,
    /// `eps / h < 20`.
    pub coarse_grid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted `c` in `u <= A exp(-c |x - x_eps| / eps)`.
    pub rate: f64,
    pub intercept: f64,
    pub amplitude: f64,
    /// `max (u - A exp(-c s))` over the fit range.
    pub max_violation: f64,
    pub fit_range: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakSolution {
    pub dim: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `delta_eps / eps`.
    pub c_star_estimate: f64,
    pub profile: GridFunction,
    pub center: f64,
    pub correspondence: CorrespondenceResult,
    pub residual: Option<ResidualNorms>,
    pub decay: Option<DecayFit>,
}

impl PeakSolution {
    /// Relative defect of `eps^2 M(eps^{2-N} |grad omega_delta|^2) = delta^2` at `delta_eps`.
    pub fn identity_error(&self) -> f64 {
        self.correspondence.g_at_delta.abs() / (self.delta * self.delta)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W, potential: &[f64], m: &KirchhoffFunction, p: f64) -> std::io::Result<()> {
        let res = pointwise_residual(&self.profile, potential, m, p, self.epsilon);
        writeln!(out, "# N={}", self.dim)?;
        writeln!(out, "# eps={:.16e}", self.epsilon)?;
        writeln!(out, "# delta_eps={:.16e}", self.delta)?;
        writeln!(out, "x,u,residual")?;
        for ((x, u), r) in self.profile.grid.nodes().iter().zip(&self.profile.values).zip(res) {
            writeln!(out, "{x:.16e},{u:.16e},{r:.16e}")?;
        }
        Ok(())
    }
}

/// `U(r) = W(r / C*)`.
pub fn rescale_ground_state(w: &GroundState, c_star: f64) -> Result<GroundState> {
    w.rescaled(c_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitResidual {
    pub max_residual: f64,
    /// `max_residual / max U`.
    pub relative: f64,
    /// `M(A_U)`.
    pub coefficient: f64,
    /// `|M(A_U) - C*^2|`.
    pub root_mismatch: f64,
}

/// Residual of `-M(|grad U|^2) Delta U + m U = U^{p-1}` on the radial grid of `U`.
pub fn limit_equation_residual(u: &GroundState, m: &KirchhoffFunction) -> LimitResidual {
    let coefficient = m.eval(u.gradient_norm_sq);
    let max_residual = u.equation_residual(coefficient);
    LimitResidual {
        max_residual,
        relative: max_residual / u.peak(),
        coefficient,
        root_mismatch: (coefficient - u.scale * u.scale).abs(),
    }
}

/// Solve for `delta_eps` and take `u_eps = omega_{delta_eps}` on the family's grid.
pub fn build_single_peak(family: &dyn PeakFamily, m: &KirchhoffFunction, eps: f64, opts: &DeltaOptions) -> Result<PeakSolution> {
    let correspondence = solve_delta_epsilon(m, family, eps, opts)?;
    let delta = correspondence.delta;
    let profile = family.profile(delta)?;
    Ok(assemble(family, eps, correspondence, profile))
}

/// Same as [`build_single_peak`] but on a caller-supplied grid.
pub fn build_single_peak_on(
    family: &dyn PeakFamily,
    m: &KirchhoffFunction,
    eps: f64,
    opts: &DeltaOptions,
    grid: &Grid,
) -> Result<PeakSolution> {
    let correspondence = solve_delta_epsilon(m, family, eps, opts)?;
    let profile = family.profile_on(correspondence.delta, grid)?;
    Ok(assemble(family, eps, correspondence, profile))
}

fn assemble(family: &dyn PeakFamily, eps: f64, correspondence: CorrespondenceResult, profile: GridFunction) -> PeakSolution {
    let center = match profile.grid {
        Grid::Line(_) => profile.peak_location(),
        Grid::Radial(_) => 0.0,
    };
    PeakSolution {
        dim: family.dim(),
        epsilon: eps,
        delta: correspondence.delta,
        c_star_estimate: correspondence.ratio,
        profile,
        center,
        correspondence,
        residual: None,
        decay: None,
    }
}

fn pointwise_residual(u: &GridFunction, v: &[f64], m: &KirchhoffFunction, p: f64, eps: f64) -> Vec<f64> {
    let grid = &u.grid;
    let t = eps.powi(2 - grid.dim() as i32) * grid.dirichlet_energy(&u.values);
    let a = eps * eps * m.eval(t);
    crate::semilinear::residual(grid, a, v, p, &u.values)
}

/// `-eps^2 M(eps^{2-N} |grad u|^2) Delta_h u + V u - u^{p-1}` with the
/// second-order stencil and `T` from the gridded gradient.
pub fn kirchhoff_residual(u: &GridFunction, v: &[f64], m: &KirchhoffFunction, p: f64, eps: f64) -> ResidualNorms {
    let grid = &u.grid;
    let h = grid.step();
    let coarse_grid = eps / h < 20.0;
    if coarse_grid {
        log::warn!("grid too coarse for eps = {eps}: eps/h = {:.2}", eps / h);
    }
    let t = eps.powi(2 - grid.dim() as i32) * grid.dirichlet_energy(&u.values);
    let coefficient = eps * eps * m.eval(t);
    let r = crate::semilinear::residual(grid, coefficient, v, p, &u.values);
    let max = r.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let sq: Vec<f64> = r.iter().map(|x| x * x).collect();
    ResidualNorms {
        max,
        l2: grid.integrate(&sq).sqrt(),
        t,
        coefficient,
        coarse_grid,
    }
}

/// `(int eps^2 |grad u|^2 + V u^2)^{1/2}`.
pub fn weighted_norm(u: &GridFunction, v: &[f64], eps: f64) -> f64 {
    let grid = &u.grid;
    let vu2: Vec<f64> = u.values.iter().zip(v).map(|(u, v)| v * u * u).collect();
    (eps * eps * grid.dirichlet_energy(&u.values) + grid.integrate(&vu2)).max(0.0).sqrt()
}

/// Least-squares fit of `log u` against `s = |x - x_eps| / eps` where `u > 1e-10 max u`.
///
/// On radial grids the slope is fitted to `log(u s^{(N-1)/2})` over the tail
/// `u < 1e-2 max u`, removing the algebraic prefactor of radial decay.
/// `A` is `1.5` times the larger of `max u` and `max u_i exp(c s_i)`, so the
/// envelope dominates every fitted sample.
pub fn verify_decay(u: &GridFunction, center: f64, eps: f64) -> Result<DecayFit> {
    let umax = u.max();
    let nodes = u.grid.nodes();
    let radial_power = match u.grid {
        Grid::Line(_) => None,
        Grid::Radial(g) => Some(0.5 * (g.dim as f64 - 1.0)),
    };
    let (mut s, mut y) = (Vec::new(), Vec::new());
    let (mut fs, mut fy) = (Vec::new(), Vec::new());
    for (x, v) in nodes.iter().zip(&u.values) {
        if *v > 1e-10 * umax {
            let si = (x - center).abs() / eps;
            s.push(si);
            y.push(v.ln());
            match radial_power {
                None => {
                    fs.push(si);
                    fy.push(v.ln());
                }
                Some(k) if *v < 1e-2 * umax => {
                    fs.push(si);
                    fy.push(v.ln() + k * si.ln());
                }
                Some(_) => {}
            }
        }
    }
    if fs.len() < 3 {
        return Err(Error::FitRangeEmpty);
    }
    let (intercept, slope) = linear_fit(&fs, &fy).ok_or(Error::FitRangeEmpty)?;
    let rate = -slope;
    let scaled = s.iter().zip(&y).map(|(s, y)| (y + rate * s).exp()).fold(0.0f64, f64::max);
    let amplitude = 1.5 * umax.max(scaled);
    let max_violation = s
        .iter()
        .zip(&y)
        .map(|(s, y)| y.exp() - amplitude * (-rate * s).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(0.0, f64::max);
    Ok(DecayFit {
        rate,
        intercept,
        amplitude,
        max_violation,
        fit_range: (lo, hi),
        points: s.len(),
    })
}

/// `max |u_eps(eps x + x_eps) - U(x)|` over `|x| <= window`.
pub fn profile_distance(u: &GridFunction, center: f64, eps: f64, limit: &GroundState, window: f64) -> f64 {
    u.grid
        .nodes()
        .iter()
        .zip(&u.values)
        .filter_map(|(x, v)| {
            let s = (x - center) / eps;
            (s.abs() <= window).then(|| (v - limit.eval(s)).abs())
        })
        .fold(0.0, f64::max)
}

/// Residual checks, decay fit and everything else a sweep row reports.
pub fn analyse(sol: &mut PeakSolution, family: &dyn PeakFamily, m: &KirchhoffFunction) -> Result<()> {
    let v = family.potential_on(&sol.profile.grid);
    sol.residual = Some(kirchhoff_residual(&sol.profile, &v, m, family.power(), sol.epsilon));
    sol.decay = Some(verify_decay(&sol.profile, sol.center, sol.epsilon)?);
    Ok(())
}

/// Max Kirchhoff residual of `u_eps` on `levels` nested grids starting from
/// the family's default grid; returns `(h, max residual)` pairs.
pub fn residual_refinement(
    family: &dyn PeakFamily,
    m: &KirchhoffFunction,
    eps: f64,
    delta: f64,
    levels: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut grid = family.default_grid(delta);
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        let u = family.profile_on(delta, &grid)?;
        let v = family.potential_on(&grid);
        let r = kirchhoff_residual(&u, &v, m, family.power(), eps);
        out.push((grid.step(), r.max));
        grid = grid.refined();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ExactFamily;
    use crate::grid::LineGrid;
    use crate::profiles::solve_ground_state_1d;

    #[test]
    fn zero_function_has_zero_residual() {
        let g = Grid::Line(LineGrid::new(-1.0, 1.0, 101));
        let u = GridFunction::new(g, vec![0.0; 101]);
        let r = kirchhoff_residual(&u, &[1.0; 101], &KirchhoffFunction::affine(1.0, 1.0), 4.0, 0.1);
        assert_eq!(r.max, 0.0);
        assert_eq!(weighted_norm(&u, &[1.0; 101], 0.1), 0.0);
    }

    #[test]
    fn weighted_norm_of_ground_state() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        let g = Grid::Line(LineGrid::with_spacing(-30.0, 30.0, 1e-3));
        let u = GridFunction::from_fn(g, |x| w.eval(x));
        let v = vec![1.0; g.len()];
        assert!((weighted_norm(&u, &v, 1.0) - (16.0f64 / 3.0).sqrt()).abs() < 1e-6);
        let scaled = GridFunction::new(g, u.values.iter().map(|x| 3.0 * x).collect());
        assert!((weighted_norm(&scaled, &v, 1.0) - 3.0 * weighted_norm(&u, &v, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_correspondence_is_the_nls_profile() {
        let fam = ExactFamily::new(solve_ground_state_1d(1.0, 4.0).unwrap());
        let m = KirchhoffFunction::constant(1.0);
        let sol = build_single_peak(&fam, &m, 0.1, &DeltaOptions::default()).unwrap();
        assert_eq!(sol.delta, 0.1);
        assert_eq!(sol.profile, fam.profile(0.1).unwrap());
    }

    #[test]
    fn wrong_scale_is_caught() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        let fam = ExactFamily::new(w.clone());
        let m = KirchhoffFunction::constant(1.0);
        let grid = fam.default_grid(0.2);
        let u = GridFunction::from_fn(grid, |x| w.eval(x / 0.2));
        let v = vec![1.0; grid.len()];
        let r = kirchhoff_residual(&u, &v, &m, 4.0, 0.1);
        assert!(r.max > 1e-2 * u.max());
    }

    #[test]
    fn decay_of_constant_potential_peak() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        let fam = ExactFamily::new(w);
        let m = KirchhoffFunction::constant(1.0);
        let sol = build_single_peak(&fam, &m, 0.05, &DeltaOptions::default()).unwrap();
        let fit = verify_decay(&sol.profile, sol.center, sol.epsilon).unwrap();
        assert!((fit.rate - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.max_violation <= 0.0);
    }
}
