//! Limiting NLS ground states `-Delta W + m W = W^{p-1}` and the 1D peaked
//! family `-delta^2 u'' + V u = u^{p-1}`.
//!
//! In 1D the ground state has a closed form; in higher dimensions it comes
//! from radial shooting on `w(0)`. Both store `(w, w')` on a uniform radial
//! grid and evaluate in between by quintic Hermite interpolation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sphere_area, Grid, GridFunction, LineGrid};
use crate::numerics::{argmax, simpson_weights};
use crate::semilinear::{self, Coefficient, NewtonOptions};

/// Behaviour of a shooting trajectory started at `w(0) = s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// `w` reaches a negative value: `s` is above the ground state value.
    CrossesZero,
    /// `w' > 0` while `w > 0`: `s` is below the ground state value.
    TurnsBack,
    Blowup,
    /// Neither event before `r_max`.
    Undecided,
}

/// Largest admissible power: `2N/(N-2)` for `N >= 3`, unbounded otherwise.
pub fn critical_exponent(dim: usize) -> f64 {
    if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    }
}

pub(crate) fn check_exponent(dim: usize, p: f64) -> Result<()> {
    let upper = critical_exponent(dim);
    if !(p > 2.0 && p < upper) {
        return Err(Error::ExponentOutOfRange { dim, p, upper });
    }
    if p < 2.05 {
        log::warn!("p = {p} is close to 2: decay and scale constants degenerate");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundState {
    pub dim: usize,
    pub m: f64,
    pub p: f64,
    pub step: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub decay_rate: f64,
    /// `|grad W|_2^2`
    pub gradient_norm_sq: f64,
    pub mass: f64,
    pub p_norm: f64,
    /// Profile is `W(r / scale)` of the unscaled ground state.
    pub scale: f64,
}

impl GroundState {
    fn from_samples(dim: usize, m: f64, p: f64, step: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        let radii: Vec<f64> = (0..values.len()).map(|j| j as f64 * step).collect();
        let mut gs = Self {
            dim,
            m,
            p,
            step,
            radii,
            values,
            slopes,
            decay_rate: m.sqrt(),
            gradient_norm_sq: 0.0,
            mass: 0.0,
            p_norm: 0.0,
            scale: 1.0,
        };
        gs.integrate();
        gs
    }

    fn integrate(&mut self) {
        let n = self.values.len();
        let w = simpson_weights(n, self.step);
        let area = sphere_area(self.dim);
        let k = self.dim as i32 - 1;
        let (mut a, mut mass, mut pn) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let vol = w[j] * area * self.radii[j].powi(k);
            a += vol * self.slopes[j] * self.slopes[j];
            mass += vol * self.values[j] * self.values[j];
            pn += vol * self.values[j].abs().powf(self.p);
        }
        // exponential tail beyond r_max
        let r = self.radii[n - 1];
        let wr = self.values[n - 1];
        let kappa = self.decay_rate;
        let surface = area * r.powi(k);
        let tail_mass = surface * wr * wr / (2.0 * kappa);
        mass += tail_mass;
        a += kappa * kappa * tail_mass;
        pn += surface * wr.abs().powf(self.p) / (self.p * kappa);
        self.gradient_norm_sq = a;
        self.mass = mass;
        self.p_norm = pn;
    }

    pub fn peak(&self) -> f64 {
        self.values[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// `W(r)` for any `r`, using `|r|` (1D profiles are even).
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.values.len();
        let h = self.step;
        let r_end = self.radii[n - 1];
        if r >= r_end {
            let geometric = if self.dim > 1 {
                (r_end / r).powf(0.5 * (self.dim as f64 - 1.0))
            } else {
                1.0
            };
            return self.values[n - 1] * geometric * (-self.decay_rate * (r - r_end)).exp();
        }
        // quintic Hermite; second derivatives come from the equation itself
        let j = ((r / h) as usize).min(n - 2);
        let t = (r - self.radii[j]) / h;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.slopes[j] * h, self.slopes[j + 1] * h);
        let (s0, s1) = (self.curvature(j) * h * h, self.curvature(j + 1) * h * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) * y0
            + (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) * d0
            + 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5) * s0
            + 0.5 * (t3 - 2.0 * t4 + t5) * s1
            + (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) * d1
            + (10.0 * t3 - 15.0 * t4 + 6.0 * t5) * y1
    }

    /// `W''` at node `j` from `scale^2 (W'' + (N-1)/r W') = m W - W^{p-1}`.
    fn curvature(&self, j: usize) -> f64 {
        let w = self.values[j];
        let source = (self.m * w - w.abs().powf(self.p - 2.0) * w) / (self.scale * self.scale);
        if j == 0 {
            source / self.dim as f64
        } else {
            source - (self.dim as f64 - 1.0) / self.radii[j] * self.slopes[j]
        }
    }

    /// `A + m |W|^2 - |W|_p^p`, relative to `|W|_p^p`.
    pub fn nehari_residual(&self) -> f64 {
        (self.gradient_norm_sq + self.m * self.mass - self.p_norm).abs() / self.p_norm
    }

    /// `(N-2)/2 A + N m/2 |W|^2 - N/p |W|_p^p`, relative to the largest term.
    pub fn pohozaev_residual(&self) -> f64 {
        let n = self.dim as f64;
        let terms = [
            0.5 * (n - 2.0) * self.gradient_norm_sq,
            0.5 * n * self.m * self.mass,
            -n / self.p * self.p_norm,
        ];
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        terms.iter().sum::<f64>().abs() / scale
    }

    /// `U(r) = W(r / c)`: stretch the stored grid and rescale the integrals.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("rescale factor must be positive, got {c}")));
        }
        let n = self.dim as i32;
        Ok(Self {
            dim: self.dim,
            m: self.m,
            p: self.p,
            step: self.step * c,
            radii: self.radii.iter().map(|r| r * c).collect(),
            values: self.values.clone(),
            slopes: self.slopes.iter().map(|s| s / c).collect(),
            decay_rate: self.decay_rate / c,
            gradient_norm_sq: c.powi(n - 2) * self.gradient_norm_sq,
            mass: c.powi(n) * self.mass,
            p_norm: c.powi(n) * self.p_norm,
            scale: self.scale * c,
        })
    }

    /// Max of `|-coef Delta U + m U - U^{p-1}|` over the stored grid using a
    /// sixth-order radial stencil (even reflection at `r = 0`, exponential
    /// tail for the last nodes).
    pub fn equation_residual(&self, coefficient: f64) -> f64 {
        let n = self.values.len();
        let h = self.step;
        let dim = self.dim as f64;
        let sample = |j: isize| -> f64 {
            let idx = j.unsigned_abs();
            if idx < n {
                self.values[idx]
            } else {
                self.eval(idx as f64 * h)
            }
        };
        const D2: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
        const D1: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0];
        let mut worst = 0.0f64;
        for j in 0..n {
            let (mut u2, mut u1) = (0.0, 0.0);
            for (k, (c2, c1)) in D2.iter().zip(D1).enumerate() {
                let v = sample(j as isize + k as isize - 3);
                u2 += c2 * v;
                u1 += c1 * v;
            }
            u2 /= h * h;
            u1 /= h;
            let lap = if j == 0 { dim * u2 } else { u2 + (dim - 1.0) / self.radii[j] * u1 };
            let u = self.values[j];
            let r = -coefficient * lap + self.m * u - u.abs().powf(self.p - 2.0) * u;
            worst = worst.max(r.abs());
        }
        worst
    }

    /// CSV with `r,W` columns and `#` metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# N={}", self.dim)?;
        writeln!(out, "# m={:.16e}", self.m)?;
        writeln!(out, "# p={:.16e}", self.p)?;
        writeln!(out, "# A={:.16e}", self.gradient_norm_sq)?;
        writeln!(out, "# mass={:.16e}", self.mass)?;
        writeln!(out, "r,W")?;
        for (r, w) in self.radii.iter().zip(&self.values) {
            writeln!(out, "{r:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

/// Radial grid parameters; unset fields follow the `sqrt(m)` length scale.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ShootingOptions {
    pub r_max: Option<f64>,
    pub step: Option<f64>,
    /// Relative width at which bisection on `w(0)` stops.
    pub tol: Option<f64>,
    pub bracket: Option<(f64, f64)>,
}

fn resolve_grid(m: f64, opts: &ShootingOptions) -> (f64, usize) {
    let h = opts.step.unwrap_or_else(|| 0.01f64.min(1.0 / (100.0 * m.sqrt())));
    let r_max = opts.r_max.unwrap_or(40.0 / m.sqrt());
    let mut cells = (r_max / h).round() as usize;
    if cells % 2 == 1 {
        cells += 1;
    }
    (h, cells.max(4) + 1)
}

/// Closed-form 1D ground state `(pm/2)^{1/(p-2)} sech^{2/(p-2)}((p-2)/2 sqrt(m) x)`.
pub fn solve_ground_state_1d(m: f64, p: f64) -> Result<GroundState> {
    solve_ground_state_1d_with(m, p, &ShootingOptions::default())
}

pub fn solve_ground_state_1d_with(m: f64, p: f64, opts: &ShootingOptions) -> Result<GroundState> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    check_exponent(1, p)?;
    let (h, points) = resolve_grid(m, opts);
    let amp = (0.5 * p * m).powf(1.0 / (p - 2.0));
    let k = 0.5 * (p - 2.0) * m.sqrt();
    let e = 2.0 / (p - 2.0);
    let mut values = Vec::with_capacity(points);
    let mut slopes = Vec::with_capacity(points);
    for j in 0..points {
        let x = j as f64 * h;
        let s = 1.0 / (k * x).cosh();
        let w = amp * s.powf(e);
        values.push(w);
        slopes.push(-e * k * (k * x).tanh() * w);
    }
    Ok(GroundState::from_samples(1, m, p, h, values, slopes))
}

/// RK4 substeps per grid cell when `N > 1`.
const SUBSTEPS: usize = 16;

struct Radial {
    dim: f64,
    m: f64,
    p: f64,
}

impl Radial {
    fn rhs(&self, r: f64, w: f64, dw: f64) -> (f64, f64) {
        let nonlinear = self.m * w - w.abs().powf(self.p - 2.0) * w;
        if r == 0.0 {
            (dw, nonlinear / self.dim)
        } else {
            (dw, -(self.dim - 1.0) / r * dw + nonlinear)
        }
    }

    fn rk4(&self, r: f64, w: f64, dw: f64, h: f64) -> (f64, f64) {
        let (k1, l1) = self.rhs(r, w, dw);
        let (k2, l2) = self.rhs(r + 0.5 * h, w + 0.5 * h * k1, dw + 0.5 * h * l1);
        let (k3, l3) = self.rhs(r + 0.5 * h, w + 0.5 * h * k2, dw + 0.5 * h * l2);
        let (k4, l4) = self.rhs(r + h, w + h * k3, dw + h * l3);
        (
            w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            dw + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
        )
    }

    /// Series `s + a r^2 + b r^4 + c r^6` about the origin, with its derivative.
    fn series(&self, s: f64, r: f64) -> (f64, f64) {
        let (n, p) = (self.dim, self.p);
        let f = self.m * s - s.abs().powf(p - 2.0) * s;
        let df = self.m - (p - 1.0) * s.abs().powf(p - 2.0);
        let ddf = -(p - 1.0) * (p - 2.0) * s.abs().powf(p - 3.0);
        let a = f / (2.0 * n);
        let b = df * a / (4.0 * (n + 2.0));
        let c = (df * b + 0.5 * ddf * a * a) / (6.0 * (n + 4.0));
        let r2 = r * r;
        (
            s + r2 * (a + r2 * (b + r2 * c)),
            r * (2.0 * a + r2 * (4.0 * b + 6.0 * c * r2)),
        )
    }

    /// Integrate from `w(0) = s` until an event or `points` nodes. The first
    /// node comes from the series; the singular `(N-1)/r` term is resolved by
    /// substeps close to the origin.
    fn shoot(&self, s: f64, h: f64, points: usize) -> (Trajectory, Vec<f64>, Vec<f64>) {
        let mut w = Vec::with_capacity(points);
        let mut dw = Vec::with_capacity(points);
        w.push(s);
        dw.push(0.0);
        for j in 0..points - 1 {
            let r = j as f64 * h;
            let (wn, dn) = if j == 0 {
                self.series(s, h)
            } else {
                let sub = if self.dim > 1.0 { SUBSTEPS } else { 1 };
                let hs = h / sub as f64;
                let (mut y, mut z) = (w[j], dw[j]);
                for k in 0..sub {
                    (y, z) = self.rk4(r + k as f64 * hs, y, z, hs);
                }
                (y, z)
            };
            if !(wn.is_finite() && dn.is_finite()) || wn.abs() > 1e6 * s.abs().max(1.0) {
                return (Trajectory::Blowup, w, dw);
            }
            w.push(wn);
            dw.push(dn);
            if wn < 0.0 {
                return (Trajectory::CrossesZero, w, dw);
            }
            if dn > 0.0 {
                return (Trajectory::TurnsBack, w, dw);
            }
        }
        (Trajectory::Undecided, w, dw)
    }

    fn classify(&self, s: f64, h: f64, points: usize) -> Trajectory {
        self.shoot(s, h, points).0
    }
}

/// Radial ground state in dimension `dim` by shooting on `w(0)`.
pub fn solve_ground_state_radial(dim: usize, m: f64, p: f64, opts: &ShootingOptions) -> Result<GroundState> {
    if dim == 0 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    check_exponent(dim, p)?;
    let (h, points) = resolve_grid(m, opts);
    let sys = Radial { dim: dim as f64, m, p };
    let overshoot = |t: Trajectory| matches!(t, Trajectory::CrossesZero | Trajectory::Blowup);

    let (mut lo, mut hi) = match opts.bracket {
        Some((lo, hi)) => {
            let (cl, ch) = (sys.classify(lo, h, points), sys.classify(hi, h, points));
            if cl != Trajectory::TurnsBack || !overshoot(ch) {
                return Err(Error::BracketNotFound {
                    low: lo,
                    high: hi,
                    low_class: cl,
                    high_class: ch,
                });
            }
            (lo, hi)
        }
        None => {
            // below the constant equilibrium every trajectory turns back
            let lo = m.powf(1.0 / (p - 2.0)) * (1.0 + 1e-6);
            let mut hi = 2.0 * lo;
            let mut ch = sys.classify(hi, h, points);
            let mut doublings = 0;
            while !overshoot(ch) {
                hi *= 2.0;
                doublings += 1;
                ch = sys.classify(hi, h, points);
                if doublings > 60 {
                    return Err(Error::BracketNotFound {
                        low: lo,
                        high: hi,
                        low_class: sys.classify(lo, h, points),
                        high_class: ch,
                    });
                }
            }
            let cl = sys.classify(lo, h, points);
            if cl != Trajectory::TurnsBack {
                return Err(Error::BracketNotFound {
                    low: lo,
                    high: hi,
                    low_class: cl,
                    high_class: ch,
                });
            }
            (lo, hi)
        }
    };

    let tol = opts.tol.unwrap_or(1e-14);
    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match sys.classify(mid, h, points) {
            Trajectory::TurnsBack => lo = mid,
            Trajectory::CrossesZero | Trajectory::Blowup => hi = mid,
            Trajectory::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }

    let (_, w_lo, d_lo) = sys.shoot(lo, h, points);
    let (_, w_hi, d_hi) = sys.shoot(hi, h, points);
    let s = 0.5 * (lo + hi);
    let usable = w_lo.len().min(w_hi.len());
    let mut values = Vec::with_capacity(points);
    let mut slopes = Vec::with_capacity(points);
    let mut cut = usable;
    for j in 0..usable {
        let w = 0.5 * (w_lo[j] + w_hi[j]);
        if (w_hi[j] - w_lo[j]).abs() > 1e-8 * w.abs() || w < 1e-6 * s {
            cut = j;
            break;
        }
        values.push(w);
        slopes.push(0.5 * (d_lo[j] + d_hi[j]));
    }
    if cut < 2 {
        return Err(Error::BracketNotFound {
            low: lo,
            high: hi,
            low_class: Trajectory::TurnsBack,
            high_class: Trajectory::CrossesZero,
        });
    }
    splice_tail(&sys, &mut values, &mut slopes, h, points);
    Ok(GroundState::from_samples(dim, m, p, h, values, slopes))
}

/// Continue `values` beyond the last trusted node with the decaying solution,
/// integrated inward from `r_max` (where the decaying mode dominates) with
/// its amplitude adjusted until it meets the shooting value at the cut.
fn splice_tail(sys: &Radial, values: &mut Vec<f64>, slopes: &mut Vec<f64>, h: f64, points: usize) {
    let cut = values.len() - 1;
    let r_end = (points - 1) as f64 * h;
    let k = sys.m.sqrt();
    let target = values[cut];
    let inward = |amp: f64| -> (Vec<f64>, Vec<f64>) {
        let mut t = vec![0.0; points];
        let mut dt = vec![0.0; points];
        t[points - 1] = amp;
        dt[points - 1] = -(k + (sys.dim - 1.0) / (2.0 * r_end)) * amp;
        for j in (cut..points - 1).rev() {
            let r = (j + 1) as f64 * h;
            (t[j], dt[j]) = sys.rk4(r, t[j + 1], dt[j + 1], -h);
        }
        (t, dt)
    };
    // fixed point on the amplitude: the nonlinearity is weak out here
    let mut amp = 1e-30;
    let (mut t, mut dt) = inward(amp);
    for _ in 0..50 {
        let ratio = target / t[cut];
        amp *= ratio;
        (t, dt) = inward(amp);
        if (ratio - 1.0).abs() < 1e-15 {
            break;
        }
    }
    for j in cut + 1..points {
        values.push(t[j]);
        slopes.push(dt[j]);
    }
}

/// Ground state for any supported dimension: closed form in 1D.
pub fn ground_state(dim: usize, m: f64, p: f64) -> Result<GroundState> {
    if dim == 1 {
        solve_ground_state_1d(m, p)
    } else {
        solve_ground_state_radial(dim, m, p, &ShootingOptions::default())
    }
}

/// One member `omega_delta` of the 1D peaked family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakProfile1D {
    pub delta: f64,
    pub grid: LineGrid,
    pub values: Vec<f64>,
    pub peak: f64,
    pub gradient_norm_sq: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl PeakProfile1D {
    pub fn grid_function(&self) -> GridFunction {
        GridFunction::new(Grid::Line(self.grid), self.values.clone())
    }
}

/// Discretisation for the 1D peak solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Computational interval; defaults to `center +- 30 delta / sqrt(V(center))`.
    pub interval: Option<(f64, f64)>,
    /// Grid cells per unit of `delta`.
    pub cells_per_delta: f64,
    pub newton: NewtonSettings,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100 }
    }
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            interval: None,
            cells_per_delta: 1000.0,
            newton: NewtonSettings::default(),
        }
    }
}

impl PeakOptions {
    pub fn grid(&self, v_center: f64, delta: f64, center: f64) -> LineGrid {
        let (lo, hi) = self.interval.unwrap_or_else(|| {
            let half = 30.0 * delta / v_center.sqrt();
            (center - half, center + half)
        });
        LineGrid::with_spacing(lo, hi, delta / self.cells_per_delta)
    }
}

/// Solve on a given grid from a given start.
pub fn solve_nls_peak_on(
    v: &dyn Fn(f64) -> f64,
    p: f64,
    delta: f64,
    grid: LineGrid,
    initial: &[f64],
    newton: &NewtonSettings,
) -> Result<PeakProfile1D> {
    let g = Grid::Line(grid);
    let samples: Vec<f64> = grid.nodes().into_iter().map(v).collect();
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::InvalidParameter(format!("V must be positive on the interval, found {bad}")));
    }
    let mut opts = NewtonOptions {
        tol: newton.tol,
        max_iter: newton.max_iter,
        ..NewtonOptions::default()
    };
    let sol = match semilinear::solve(&g, Coefficient::Fixed(delta * delta), &samples, p, initial, &opts) {
        Ok(sol) => sol,
        Err(Error::NegativeDip { .. }) => {
            // restart with a finer damping ladder
            opts.min_damping = 1e-8;
            semilinear::solve(&g, Coefficient::Fixed(delta * delta), &samples, p, initial, &opts)?
        }
        Err(e) => return Err(e),
    };
    let nodes = grid.nodes();
    let peak = crate::numerics::parabolic_peak(&nodes, &sol.values, argmax(&sol.values));
    Ok(PeakProfile1D {
        delta,
        grid,
        gradient_norm_sq: g.dirichlet_energy(&sol.values),
        peak,
        residual: sol.residual,
        iterations: sol.iterations,
        values: sol.values,
    })
}

/// Damped Newton for `-delta^2 u'' + V u - u^{p-1} = 0` from `W((x-c)/delta)`
/// with `m = V(c)`.
pub fn solve_nls_peak_1d(
    v: &dyn Fn(f64) -> f64,
    p: f64,
    delta: f64,
    center: f64,
    opts: &PeakOptions,
) -> Result<PeakProfile1D> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let m = v(center);
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("V(center) must be positive, got {m}")));
    }
    let w = solve_ground_state_1d(m, p)?;
    let grid = opts.grid(m, delta, center);
    if center - grid.lo < 20.0 * delta || grid.hi - center < 20.0 * delta {
        return Err(Error::InvalidParameter(format!(
            "interval [{}, {}] does not contain center +- 20 delta",
            grid.lo, grid.hi
        )));
    }
    let initial: Vec<f64> = grid.nodes().iter().map(|x| w.eval((x - center) / delta)).collect();
    solve_nls_peak_on(v, p, delta, grid, &initial, &opts.newton)
}

/// Linear interpolation of line-grid samples, zero outside.
pub(crate) fn interpolate_line(grid: &LineGrid, values: &[f64], x: f64) -> f64 {
    if x <= grid.lo || x >= grid.hi {
        return 0.0;
    }
    let h = grid.step();
    let s = (x - grid.lo) / h;
    let j = (s as usize).min(grid.points - 2);
    let t = s - j as f64;
    (1.0 - t) * values[j] + t * values[j + 1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientTable {
    pub dim: usize,
    pub rows: Vec<(f64, f64)>,
    /// Last value of `|grad omega_delta|^2 / delta^{N-2}`.
    pub limit_estimate: f64,
}

impl GradientTable {
    pub fn ratios(&self) -> Vec<f64> {
        let k = self.dim as i32 - 2;
        self.rows.iter().map(|(d, g)| g / d.powi(k)).collect()
    }
}

/// `delta -> |omega_delta'|^2` by continuation along a descending delta list,
/// each solve warm-started from the previous profile rescaled about its peak.
pub fn gradient_norm_map(
    v: &dyn Fn(f64) -> f64,
    p: f64,
    deltas: &[f64],
    center: f64,
    opts: &PeakOptions,
) -> Result<GradientTable> {
    if deltas.is_empty() {
        return Err(Error::Empty("delta list"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("delta list must be strictly descending".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    let mut previous: Option<PeakProfile1D> = None;
    for &delta in deltas {
        let profile = match &previous {
            None => solve_nls_peak_1d(v, p, delta, center, opts),
            Some(prev) => {
                let grid = opts.grid(v(prev.peak), delta, prev.peak);
                let ratio = prev.delta / delta;
                let initial: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|x| interpolate_line(&prev.grid, &prev.values, prev.peak + (x - prev.peak) * ratio))
                    .collect();
                solve_nls_peak_on(v, p, delta, grid, &initial, &opts.newton)
            }
        }
        .map_err(|e| Error::at_delta(delta, e))?;
        rows.push((delta, profile.gradient_norm_sq));
        previous = Some(profile);
    }
    let (d, g) = *rows.last().unwrap();
    Ok(GradientTable {
        dim: 1,
        limit_estimate: g * d,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_quantities() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        assert!((w.peak() - 2f64.sqrt()).abs() < 1e-15);
        assert!((w.gradient_norm_sq - 4.0 / 3.0).abs() < 1e-9);
        assert!((w.mass - 4.0).abs() < 1e-9);
        assert!((w.p_norm - 16.0 / 3.0).abs() < 1e-9);
        assert!(w.equation_residual(1.0) < 1e-8);
    }

    #[test]
    fn shooting_reproduces_sech() {
        let w = solve_ground_state_radial(1, 1.0, 4.0, &ShootingOptions::default()).unwrap();
        let err = w
            .radii
            .iter()
            .zip(&w.values)
            .map(|(r, v)| (v - 2f64.sqrt() / r.cosh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn radial_identities() {
        for dim in 2..=3 {
            let w = solve_ground_state_radial(dim, 1.0, 4.0, &ShootingOptions::default()).unwrap();
            assert!(w.nehari_residual() < 1e-6, "N={dim}: {}", w.nehari_residual());
            assert!(w.pohozaev_residual() < 1e-6, "N={dim}: {}", w.pohozaev_residual());
            assert!(w.values.windows(2).all(|p| p[1] < p[0]));
        }
    }

    #[test]
    fn exponent_range() {
        assert!(matches!(
            solve_ground_state_radial(3, 1.0, 6.5, &ShootingOptions::default()),
            Err(Error::ExponentOutOfRange { .. })
        ));
        assert!(solve_ground_state_1d(1.0, 2.0).is_err());
        assert!(solve_ground_state_1d(0.0, 4.0).is_err());
    }

    #[test]
    fn bad_bracket_is_reported() {
        let opts = ShootingOptions {
            bracket: Some((3.0, 4.0)),
            ..Default::default()
        };
        let err = solve_ground_state_radial(3, 1.0, 4.0, &opts).unwrap_err();
        // W(0) is about 4.34 for this case, so both ends undershoot
        assert!(matches!(err, Error::BracketNotFound { high_class: Trajectory::TurnsBack, .. }));
    }

    #[test]
    fn hermite_between_nodes() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        for x in [0.003, 0.5557, 3.21, -2.0] {
            assert!((w.eval(x) - 2f64.sqrt() / x.cosh()).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaled_integrals() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        let u = w.rescaled(2.0).unwrap();
        assert!((u.gradient_norm_sq - 2.0 / 3.0).abs() < 1e-9);
        assert!((u.eval(2.0) - w.eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn csv_header() {
        let w = solve_ground_state_1d(1.0, 4.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# N=1\n# m="));
        assert!(text.contains("\nr,W\n"));
    }
}
