//! Admissible potentials, the concentration vector field
//! `L_P(y) = (int h_i(x + y + P) W_P(x)^2 dx)_i` and its stable zeros.
//!
//! A zero is counted as stable when the Jacobian determinant of `L_P` is
//! nonzero to tolerance; the number of stable zeros `#Z` bounds the number of
//! distinct single-peak solutions from below.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::grid::sphere_area;
use crate::kirchhoff_map::Verdict;
use crate::numerics::gauss_legendre;
use crate::profiles::GroundState;

pub type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Homogeneous leading part `h_i` of `dV/dx_i` near `P`.
#[derive(Clone)]
pub struct LeadingPart {
    pub h: Field,
    /// Homogeneity degree with respect to `P`.
    pub alpha: f64,
    /// Remainder exponent: `|dV/dx_i - h_i| <= C |x - P|^beta`.
    pub beta: f64,
    pub label: String,
}

#[derive(Clone)]
pub struct AdmissiblePotential {
    pub dim: usize,
    pub v: Field,
    pub grad: VectorField,
    pub point: Vec<f64>,
    pub leading: Vec<LeadingPart>,
    /// Radius of the ball around `P` where the decomposition holds.
    pub radius: f64,
    /// Declared `(V0, V1)`; inferred from samples when absent.
    pub bounds: Option<(f64, f64)>,
    /// Growth rate in `|grad V| <= C exp(gamma |x|)`.
    pub gamma: f64,
    pub label: String,
}

impl std::fmt::Debug for AdmissiblePotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdmissiblePotential")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("point", &self.point)
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

impl AdmissiblePotential {
    /// Build from expression strings. `grad V` is taken symbolically; each
    /// leading part is `(h_i, alpha_i, beta_i)` written in absolute coordinates.
    pub fn from_expressions(v: &str, point: Vec<f64>, leading: &[(&str, f64, f64)], radius: f64) -> Result<Self> {
        let dim = point.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if leading.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "need {dim} leading parts, got {}",
                leading.len()
            )));
        }
        let ve = Expression::parse(v)?;
        if ve.dim() > dim {
            return Err(Error::InvalidParameter(format!("V uses x{} but P has dimension {dim}", ve.dim())));
        }
        let grad = ve.gradient(dim);
        let mut parts = Vec::with_capacity(dim);
        for (src, alpha, beta) in leading {
            let e = Expression::parse(src)?;
            if e.dim() > dim {
                return Err(Error::InvalidParameter(format!("leading part '{src}' exceeds dimension {dim}")));
            }
            parts.push(LeadingPart {
                h: Arc::new(move |x: &[f64]| e.eval(x)),
                alpha: *alpha,
                beta: *beta,
                label: src.to_string(),
            });
        }
        Ok(Self {
            dim,
            label: v.to_string(),
            v: Arc::new(move |x: &[f64]| ve.eval(x)),
            grad: Arc::new(move |x: &[f64]| grad.iter().map(|g| g.eval(x)).collect()),
            point,
            leading: parts,
            radius,
            bounds: None,
            gamma: 1.0,
        })
    }

    pub fn with_bounds(mut self, v0: f64, v1: f64) -> Self {
        self.bounds = Some((v0, v1));
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// `V(P)`, the mass of the limit profile `W_P`.
    pub fn value_at_point(&self) -> f64 {
        (self.v)(&self.point)
    }

    /// Same potential with every leading part and `V` translated: `x -> x + c`.
    /// `P` is kept, so zeros of `L_P` move by `-c`.
    pub fn shifted(&self, c: &[f64]) -> Self {
        let c: Vec<f64> = c.to_vec();
        let shift = move |f: Field, c: Vec<f64>| -> Field {
            Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
                f(&y)
            })
        };
        let grad = self.grad.clone();
        let cg = c.clone();
        Self {
            v: shift(self.v.clone(), c.clone()),
            grad: Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().zip(&cg).map(|(a, b)| a + b).collect();
                grad(&y)
            }),
            leading: self
                .leading
                .iter()
                .map(|l| LeadingPart {
                    h: shift(l.h.clone(), c.clone()),
                    ..l.clone()
                })
                .collect(),
            label: format!("{} shifted by {:?}", self.label, c),
            ..self.clone()
        }
    }

    fn h(&self, x: &[f64]) -> Vec<f64> {
        self.leading.iter().map(|l| (l.h)(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityItem {
    pub name: String,
    pub verdict: Verdict,
    /// Measured quantity (largest defect, fitted constant, ...).
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub label: String,
    pub samples: usize,
    pub items: Vec<AdmissibilityItem>,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.verdict == Verdict::Pass)
    }

    pub fn item(&self, name: &str) -> Option<&AdmissibilityItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdmissibleOptions {
    pub samples: usize,
    pub seed: u64,
    /// Half-width of the box (around `P`) used for the global bounds.
    pub bounds_box: f64,
    /// Largest `V1/V0` accepted when the bounds are inferred.
    pub max_bound_ratio: f64,
}

impl Default for AdmissibleOptions {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            bounds_box: 5.0,
            max_bound_ratio: 1e6,
        }
    }
}

fn item(name: &str, pass: bool, value: Option<f64>, detail: String) -> AdmissibilityItem {
    AdmissibilityItem {
        name: name.to_string(),
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        value,
        detail,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniform sample in the ball of radius `r` around `p`.
fn sample_ball(rng: &mut ChaCha8Rng, p: &[f64], r: f64) -> Vec<f64> {
    let n = p.len();
    loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm(&d);
        if len <= 1.0 && len > 0.0 {
            return d.iter().zip(p).map(|(a, b)| b + r * a).collect();
        }
    }
}

/// Sample-based check of the admissibility items. Report-only.
pub fn check_admissible(pot: &AdmissiblePotential, opts: &AdmissibleOptions) -> AdmissibilityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.samples.max(16);
    let p = &pot.point;
    let r = pot.radius;
    let mut items = Vec::new();

    let g = norm(&(pot.grad)(p));
    items.push(item(
        "critical_point",
        g <= 1e-8,
        Some(g),
        format!("|grad V(P)| = {g:.3e}"),
    ));

    // gradient callback against central differences of V
    let mut worst = 0.0f64;
    for _ in 0..n / 4 {
        let x = sample_ball(&mut rng, p, r);
        let grad = (pot.grad)(&x);
        for (i, gi) in grad.iter().enumerate() {
            let s = 1e-5 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += s;
            xm[i] -= s;
            let fd = ((pot.v)(&xp) - (pot.v)(&xm)) / (2.0 * s);
            worst = worst.max((gi - fd).abs() / (1.0 + gi.abs()));
        }
    }
    items.push(item(
        "gradient",
        worst <= 1e-6,
        Some(worst),
        format!("largest relative mismatch with finite differences {worst:.3e}"),
    ));

    let degrees_ok = pot.leading.iter().all(|l| l.alpha >= 1.0 && l.beta > l.alpha);
    items.push(item(
        "degrees",
        degrees_ok,
        None,
        pot.leading
            .iter()
            .map(|l| format!("alpha={} beta={}", l.alpha, l.beta))
            .collect::<Vec<_>>()
            .join(", "),
    ));

    let hp = norm(&pot.h(p));
    items.push(item("vanishes_at_point", hp <= 1e-12, Some(hp), format!("|h(P)| = {hp:.3e}")));

    // h_i(t(x-P)+P) = t^alpha h_i(x)
    let mut worst = 0.0f64;
    for _ in 0..n / 4 {
        let x = sample_ball(&mut rng, p, r);
        let t: f64 = rng.gen_range(0.1..2.0);
        let tx: Vec<f64> = x.iter().zip(p).map(|(a, b)| t * (a - b) + b).collect();
        for l in &pot.leading {
            let lhs = (l.h)(&tx);
            let rhs = t.powf(l.alpha) * (l.h)(&x);
            let scale = lhs.abs().max(rhs.abs());
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    items.push(item(
        "homogeneity",
        worst <= 1e-8,
        Some(worst),
        format!("largest relative defect {worst:.3e}"),
    ));

    // |R_i| <= C |x-P|^beta on shells shrinking towards P; C must not blow up
    let shells = 12;
    let per_shell = (n / 4 / shells).max(4);
    let mut shell_c = Vec::with_capacity(shells);
    for k in 0..shells {
        let rho = r * 0.5f64.powi(k as i32);
        let mut c = 0.0f64;
        for _ in 0..per_shell {
            let x = sample_ball(&mut rng, p, rho);
            let d = norm(&x.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
            if d == 0.0 {
                continue;
            }
            let grad = (pot.grad)(&x);
            for (l, gi) in pot.leading.iter().zip(&grad) {
                c = c.max((gi - (l.h)(&x)).abs() / d.powf(l.beta));
            }
        }
        shell_c.push(c);
    }
    let c_max = shell_c.iter().cloned().fold(0.0, f64::max);
    let outer = shell_c[0];
    let inner = shell_c[shells - 1];
    let bounded = c_max.is_finite() && inner <= 10.0 * outer + 1e-9;
    items.push(item(
        "remainder",
        bounded && degrees_ok,
        Some(c_max),
        format!("fitted C = {c_max:.3e} (outer shell {outer:.3e}, inner shell {inner:.3e})"),
    ));

    // the leading vector h vanishes only at P
    let mut smallest = f64::INFINITY;
    for k in 0..shells {
        let rho = r * 0.1f64.powi(k as i32 / 2);
        for _ in 0..per_shell {
            let x = sample_ball(&mut rng, p, rho);
            if x == *p {
                continue;
            }
            smallest = smallest.min(norm(&pot.h(&x)));
        }
    }
    items.push(item(
        "isolated_zero",
        smallest > 0.0,
        Some(smallest),
        format!("smallest |h(x)| over samples x != P: {smallest:.3e}"),
    ));

    // global bounds and gradient growth on a box around P
    let half = opts.bounds_box * r.max(1.0);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut growth = 0.0f64;
    let mut corners: Vec<Vec<f64>> = vec![p.clone()];
    for mask in 0..(1usize << pot.dim) {
        corners.push(
            (0..pot.dim)
                .map(|i| p[i] + if mask >> i & 1 == 1 { half } else { -half })
                .collect(),
        );
    }
    let random: Vec<Vec<f64>> = (0..n / 4)
        .map(|_| p.iter().map(|c| c + rng.gen_range(-half..half)).collect())
        .collect();
    for x in corners.iter().chain(&random) {
        let v = (pot.v)(x);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
        growth = growth.max(norm(&(pot.grad)(x)) * (-pot.gamma * norm(x)).exp());
    }
    let (bounds_ok, detail) = match pot.bounds {
        Some((v0, v1)) => (
            v0 > 0.0 && vmin >= v0 && vmax <= v1,
            format!("declared [{v0}, {v1}], sampled [{vmin:.6e}, {vmax:.6e}]"),
        ),
        None => (
            vmin > 0.0 && vmax.is_finite() && vmax / vmin <= opts.max_bound_ratio,
            format!(
                "inferred on |x-P|_inf <= {half}: [{vmin:.6e}, {vmax:.6e}], ratio cap {:e}",
                opts.max_bound_ratio
            ),
        ),
    };
    items.push(item("bounds", bounds_ok, Some(vmax / vmin), detail));
    items.push(item(
        "growth",
        growth.is_finite(),
        Some(growth),
        format!("sup |grad V| exp(-{} |x|) = {growth:.3e}", pot.gamma),
    ));

    AdmissibilityReport {
        label: pot.label.clone(),
        samples: n,
        items,
    }
}

/// Antipodal product quadrature for `int f(x) W(|x|)^2 dx` over a ball.
/// Each entry carries a node `x` whose mirror `-x` shares the weight, so
/// odd integrands vanish exactly.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub dim: usize,
    pub window: f64,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `int W^2`, as integrated by this rule.
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Radius of the integration ball; `40/sqrt(m)` by default.
    pub window: Option<f64>,
    /// Gauss points per radial panel of width `1/sqrt(m)`.
    pub points_per_panel: usize,
    /// Number of azimuthal angles (`N >= 2`).
    pub angles: usize,
    /// Number of polar Gauss points (`N = 3`).
    pub polar: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            window: None,
            points_per_panel: 10,
            angles: 32,
            polar: 12,
        }
    }
}

impl QuadratureOptions {
    /// Coarser rule used only for the sign scan.
    pub fn halved(&self) -> Self {
        Self {
            window: self.window,
            points_per_panel: (self.points_per_panel / 2).max(4),
            angles: (self.angles / 2).max(8),
            polar: (self.polar / 2).max(4),
        }
    }

    pub fn doubled(&self) -> Self {
        Self {
            window: self.window,
            points_per_panel: self.points_per_panel * 2,
            angles: self.angles * 2,
            polar: self.polar * 2,
        }
    }
}

impl Quadrature {
    pub fn new(w: &GroundState, opts: &QuadratureOptions) -> Result<Self> {
        let dim = w.dim;
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let sm = w.m.sqrt();
        let window = opts.window.unwrap_or(40.0 / sm);
        // tail beyond the window from the exponential decay of W
        let wr = w.eval(window);
        let tail = sphere_area(dim) * window.powi(dim as i32 - 1) * wr * wr / (2.0 * w.decay_rate) / w.mass;
        if !(tail <= 1e-8) {
            return Err(Error::QuadratureWindow { tail });
        }
        let panels = (window * sm).ceil().max(1.0) as usize;
        let width = window / panels as f64;
        let (gx, gw) = gauss_legendre(opts.points_per_panel.max(2));
        let mut radial = Vec::with_capacity(panels * gx.len());
        for k in 0..panels {
            let a = k as f64 * width;
            for (x, wt) in gx.iter().zip(&gw) {
                let r = a + 0.5 * width * (x + 1.0);
                let wr = w.eval(r);
                radial.push((r, 0.5 * width * wt * wr * wr * r.powi(dim as i32 - 1)));
            }
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for (r, wt) in radial {
                    nodes.push(vec![r]);
                    weights.push(wt);
                }
            }
            2 => {
                // half of the circle; the mirror supplies the other half
                let k = opts.angles.max(4) & !1;
                let dphi = 2.0 * std::f64::consts::PI / k as f64;
                for j in 0..k / 2 {
                    let (s, c) = (j as f64 * dphi).sin_cos();
                    for &(r, wt) in &radial {
                        nodes.push(vec![r * c, r * s]);
                        weights.push(wt * dphi);
                    }
                }
            }
            _ => {
                let k = opts.angles.max(4) & !1;
                let dphi = 2.0 * std::f64::consts::PI / k as f64;
                let np = opts.polar.max(2) & !1;
                let (mu, mw) = gauss_legendre(np);
                // mu > 0 nodes with every azimuth; the mirror is (-mu, phi + pi)
                for (a, b) in mu.iter().zip(&mw).filter(|(a, _)| **a > 0.0) {
                    let st = (1.0 - a * a).sqrt();
                    for j in 0..k {
                        let (s, c) = (j as f64 * dphi).sin_cos();
                        for &(r, wt) in &radial {
                            nodes.push(vec![r * st * c, r * st * s, r * a]);
                            weights.push(wt * dphi * b);
                        }
                    }
                }
            }
        }
        let mass = 2.0 * weights.iter().sum::<f64>();
        Ok(Self {
            dim,
            window,
            nodes,
            weights,
            mass,
        })
    }

    /// `int f(x) W^2 dx` for a vector-valued `f` writing into its second argument.
    pub fn integrate(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Vec<f64> {
        let n = self.dim;
        let mut acc = vec![0.0; n];
        let mut xm = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            for i in 0..n {
                xm[i] = -x[i];
            }
            f(x, &mut a);
            f(&xm, &mut b);
            for i in 0..n {
                acc[i] += w * (a[i] + b[i]);
            }
        }
        acc
    }
}

/// `L_P(y)` on a prepared quadrature.
pub fn vector_field_l(pot: &AdmissiblePotential, quad: &Quadrature, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != pot.dim || quad.dim != pot.dim {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: potential {}, quadrature {}, y {}",
            pot.dim,
            quad.dim,
            y.len()
        )));
    }
    let shift: Vec<f64> = y.iter().zip(&pot.point).map(|(a, b)| a + b).collect();
    let mut z = vec![0.0; pot.dim];
    Ok(quad.integrate(|x, out| {
        for i in 0..x.len() {
            z[i] = x[i] + shift[i];
        }
        for (o, l) in out.iter_mut().zip(&pot.leading) {
            *o = (l.h)(&z);
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianL {
    pub matrix: Vec<Vec<f64>>,
    pub determinant: f64,
    pub singular: bool,
}

fn jacobian_raw(pot: &AdmissiblePotential, quad: &Quadrature, y: &[f64], step: f64) -> Result<DMatrix<f64>> {
    let n = pot.dim;
    let mut j = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[col] += step;
        ym[col] -= step;
        let lp = vector_field_l(pot, quad, &yp)?;
        let lm = vector_field_l(pot, quad, &ym)?;
        for row in 0..n {
            j[(row, col)] = (lp[row] - lm[row]) / (2.0 * step);
        }
    }
    Ok(j)
}

/// Determinants at or below `tol * mass^N` count as singular.
pub fn degeneracy_threshold(quad: &Quadrature, tol: f64) -> f64 {
    tol * quad.mass.powi(quad.dim as i32)
}

/// Central-difference Jacobian of `L_P` and its determinant.
pub fn jacobian_l(pot: &AdmissiblePotential, quad: &Quadrature, y: &[f64], step: f64) -> Result<JacobianL> {
    let j = jacobian_raw(pot, quad, y, step)?;
    let det = j.determinant();
    Ok(JacobianL {
        matrix: (0..pot.dim).map(|r| j.row(r).iter().cloned().collect()).collect(),
        determinant: det,
        singular: det.abs() <= degeneracy_threshold(quad, 1e-8),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableZero {
    pub location: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
    pub determinant: f64,
    pub residual: f64,
    /// Half the distance to the nearest other zero or to the box boundary.
    pub basin_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub stable: Vec<StableZero>,
    /// Zeros whose Jacobian is singular to tolerance; not counted.
    pub degenerate: Vec<StableZero>,
    /// Converged points that failed re-verification on the doubled rule.
    pub rejected: Vec<Vec<f64>>,
    pub cells_scanned: usize,
    pub starts: usize,
}

impl ZeroSet {
    /// `#Z`.
    pub fn count(&self) -> usize {
        self.stable.len()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroSearch {
    /// Cells per axis of the scan (at least 32).
    pub resolution: usize,
    pub step: f64,
    pub zero_tol: f64,
    pub dedup: f64,
    /// Relative degeneracy tolerance, scaled by the product over components
    /// of (range of `L_i` on the scan) / (box width).
    pub degeneracy: f64,
    pub max_newton: usize,
}

impl Default for ZeroSearch {
    fn default() -> Self {
        Self {
            resolution: 32,
            step: 1e-4,
            zero_tol: 1e-10,
            dedup: 1e-6,
            degeneracy: 1e-6,
            max_newton: 100,
        }
    }
}

fn newton_zero(pot: &AdmissiblePotential, quad: &Quadrature, start: &[f64], search: &ZeroSearch) -> Option<Vec<f64>> {
    let mut y = start.to_vec();
    let target = 1e-4 * search.zero_tol;
    for _ in 0..search.max_newton {
        let l = vector_field_l(pot, quad, &y).ok()?;
        if norm(&l) <= target {
            return Some(y);
        }
        let j = jacobian_raw(pot, quad, &y, search.step).ok()?;
        let dy = j.lu().solve(&DVector::from_vec(l))?;
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for (a, b) in y.iter_mut().zip(dy.iter()) {
            *a -= b;
        }
        if dy.norm() <= 1e-15 * (1.0 + norm(&y)) {
            break;
        }
    }
    let l = vector_field_l(pot, quad, &y).ok()?;
    (norm(&l) < search.zero_tol).then_some(y)
}

/// Scan `L_P` on a tensor grid over `bounds`, start Newton in every cell
/// where all components change sign, deduplicate and classify the zeros.
pub fn find_stable_zeros(
    pot: &AdmissiblePotential,
    w: &GroundState,
    bounds: &[(f64, f64)],
    quad_opts: &QuadratureOptions,
    search: &ZeroSearch,
) -> Result<ZeroSet> {
    let n = pot.dim;
    if bounds.len() != n {
        return Err(Error::InvalidParameter(format!("search box has {} axes, need {n}", bounds.len())));
    }
    if bounds.iter().any(|(a, b)| !(b > a)) {
        return Err(Error::InvalidParameter("search box must have lo < hi on every axis".into()));
    }
    if search.resolution < 32 {
        return Err(Error::InvalidParameter(format!(
            "scan resolution {} is below 32 cells per axis",
            search.resolution
        )));
    }
    let quad = Quadrature::new(w, quad_opts)?;
    let coarse = Quadrature::new(w, &quad_opts.halved())?;
    let fine = Quadrature::new(w, &quad_opts.doubled())?;
    let cells = search.resolution;
    let pts = cells + 1;
    let total = pts.pow(n as u32);
    let coord = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        (0..n)
            .map(|ax| {
                let k = rem % pts;
                rem /= pts;
                let (a, b) = bounds[ax];
                a + (b - a) * k as f64 / cells as f64
            })
            .collect()
    };
    let values: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|k| vector_field_l(pot, &coarse, &coord(k)))
        .collect::<Result<_>>()?;

    let ncells = cells.pow(n as u32);
    let mut starts = Vec::new();
    for c in 0..ncells {
        let mut rem = c;
        let base: Vec<usize> = (0..n)
            .map(|_| {
                let k = rem % cells;
                rem /= cells;
                k
            })
            .collect();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for corner in 0..(1usize << n) {
            let mut flat = 0;
            let mut stride = 1;
            for ax in 0..n {
                flat += (base[ax] + (corner >> ax & 1)) * stride;
                stride *= pts;
            }
            for i in 0..n {
                lo[i] = lo[i].min(values[flat][i]);
                hi[i] = hi[i].max(values[flat][i]);
            }
        }
        if (0..n).all(|i| lo[i] <= 0.0 && hi[i] >= 0.0) {
            starts.push(
                (0..n)
                    .map(|ax| {
                        let (a, b) = bounds[ax];
                        a + (b - a) * (base[ax] as f64 + 0.5) / cells as f64
                    })
                    .collect::<Vec<f64>>(),
            );
        }
    }

    let found: Vec<Vec<f64>> = starts
        .par_iter()
        .filter_map(|s| newton_zero(pot, &quad, s, search))
        .collect();
    let slack: Vec<f64> = bounds.iter().map(|(a, b)| (b - a) / cells as f64).collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for y in found {
        let inside = y
            .iter()
            .zip(bounds)
            .zip(&slack)
            .all(|((v, (a, b)), s)| *v >= a - s && *v <= b + s);
        if inside && unique.iter().all(|u| norm(&sub(u, &y)) > search.dedup) {
            unique.push(y);
        }
    }

    // Jacobian scale seen by the scan: range of each component over the box width
    let scale: f64 = (0..n)
        .map(|i| {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[i]), b.max(v[i])));
            (hi - lo) / (bounds[i].1 - bounds[i].0)
        })
        .product();
    let threshold = search.degeneracy * scale;
    let mut stable = Vec::new();
    let mut degenerate = Vec::new();
    let mut rejected = Vec::new();
    for y in &unique {
        // the zero must persist on the doubled rule
        let on_fine = norm(&vector_field_l(pot, &fine, y)?);
        let verified = on_fine < search.zero_tol
            || newton_zero(pot, &fine, y, search).is_some_and(|z| norm(&sub(&z, y)) < search.dedup);
        if !verified {
            rejected.push(y.clone());
            continue;
        }
        let jac = jacobian_l(pot, &quad, y, search.step)?;
        let nearest = unique
            .iter()
            .filter(|u| *u != y)
            .map(|u| norm(&sub(u, y)))
            .fold(f64::INFINITY, f64::min);
        let wall = y
            .iter()
            .zip(bounds)
            .map(|(v, (a, b))| (v - a).min(b - v).max(0.0))
            .fold(f64::INFINITY, f64::min);
        let z = StableZero {
            location: y.clone(),
            residual: norm(&vector_field_l(pot, &quad, y)?),
            jacobian: jac.matrix,
            determinant: jac.determinant,
            basin_radius: (0.5 * nearest).min(wall),
        };
        if jac.determinant.abs() > threshold {
            stable.push(z);
        } else if degenerate.iter().all(|d: &StableZero| norm(&sub(&d.location, y)) > norm(&slack)) {
            // Newton converges only linearly here, so starts on either side
            // stop at distinct points; one scan cell apart counts as the same zero
            degenerate.push(z);
        }
    }
    let order = |a: &StableZero, b: &StableZero| a.location.partial_cmp(&b.location).unwrap_or(std::cmp::Ordering::Equal);
    stable.sort_by(order);
    degenerate.sort_by(order);
    Ok(ZeroSet {
        stable,
        degenerate,
        rejected,
        cells_scanned: ncells,
        starts: starts.len(),
    })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ground_state;

    fn harmonic() -> AdmissiblePotential {
        AdmissiblePotential::from_expressions("1 + x^2", vec![0.0], &[("2*x", 1.0, 2.0)], 1.0).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        let opts = AdmissibleOptions::default();
        let r = check_admissible(&harmonic(), &opts);
        assert!(r.all_pass(), "{r:#?}");
        let quartic =
            AdmissiblePotential::from_expressions("1 + x^4", vec![0.0], &[("4*x^3", 3.0, 4.0)], 1.0).unwrap();
        assert!(check_admissible(&quartic, &opts).all_pass());
        let unbounded =
            AdmissiblePotential::from_expressions("exp(x^2)", vec![0.0], &[("2*x", 1.0, 3.0)], 0.5).unwrap();
        let r = check_admissible(&unbounded, &opts);
        assert_eq!(r.item("bounds").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.item("remainder").unwrap().verdict, Verdict::Pass);
        // a wrong degree is caught by the homogeneity item
        let wrong = AdmissiblePotential::from_expressions("1 + x^2", vec![0.0], &[("2*x", 2.0, 3.0)], 1.0).unwrap();
        assert_eq!(check_admissible(&wrong, &opts).item("homogeneity").unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn harmonic_field_is_linear() {
        let w = ground_state(1, 1.0, 4.0).unwrap();
        let q = Quadrature::new(&w, &QuadratureOptions::default()).unwrap();
        assert!((q.mass - 4.0).abs() < 1e-10, "{}", q.mass);
        let pot = harmonic();
        assert_eq!(vector_field_l(&pot, &q, &[0.0]).unwrap()[0], 0.0);
        let l1 = vector_field_l(&pot, &q, &[1.0]).unwrap()[0];
        assert!((l1 - 8.0).abs() < 1e-9, "{l1}");
    }

    #[test]
    fn small_window_is_rejected() {
        let w = ground_state(1, 1.0, 4.0).unwrap();
        let opts = QuadratureOptions {
            window: Some(3.0),
            ..Default::default()
        };
        assert!(matches!(Quadrature::new(&w, &opts), Err(Error::QuadratureWindow { .. })));
    }

    #[test]
    fn two_dim_separable_zero() {
        let w = ground_state(2, 1.0, 4.0).unwrap();
        let pot = AdmissiblePotential::from_expressions(
            "1 + x1^2 + x2^4",
            vec![0.0, 0.0],
            &[("2*x1", 1.0, 2.0), ("4*x2^3", 3.0, 4.0)],
            1.0,
        )
        .unwrap();
        assert!(check_admissible(&pot, &AdmissibleOptions::default()).all_pass());
        let zs = find_stable_zeros(
            &pot,
            &w,
            &[(-1.0, 1.0), (-1.0, 1.0)],
            &QuadratureOptions::default(),
            &ZeroSearch::default(),
        )
        .unwrap();
        assert_eq!(zs.count(), 1, "{zs:#?}");
        let z = &zs.stable[0];
        assert!(norm(&z.location) < 1e-10);
        assert!(z.jacobian[0][1].abs() < 1e-8 && z.jacobian[1][0].abs() < 1e-8);
        // component oracles: 2 |W|^2 and 12 int x1^2 W^2
        let q = Quadrature::new(&w, &QuadratureOptions::default()).unwrap();
        let m2 = q.integrate(|x, o| o.copy_from_slice(&[x[1] * x[1], 0.0]))[0];
        assert!((z.jacobian[0][0] - 2.0 * q.mass).abs() < 1e-6 * q.mass);
        assert!((z.jacobian[1][1] - 12.0 * m2).abs() < 1e-6 * m2);
    }

    #[test]
    fn degenerate_zero_is_not_counted() {
        // h = x^3 with a zero of L at y where y^2 |W|^2 + 3 int x^2 W^2 = 0 has no
        // real root besides 0; shifting by the mean makes it cubic-degenerate
        let w = ground_state(1, 1.0, 4.0).unwrap();
        let q = Quadrature::new(&w, &QuadratureOptions::default()).unwrap();
        let s2 = q.integrate(|x, o| o[0] = x[0] * x[0])[0] / q.mass;
        // h(x) = x^3 - 3 s2 x gives L(y) = |W|^2 y^3 exactly
        let src = format!("x^3 - {} * x", 3.0 * s2);
        let pot = AdmissiblePotential::from_expressions("1", vec![0.0], &[(src.as_str(), 3.0, 4.0)], 1.0).unwrap();
        let zs = find_stable_zeros(
            &pot,
            &w,
            &[(-1.0, 1.0)],
            &QuadratureOptions::default(),
            &ZeroSearch::default(),
        )
        .unwrap();
        assert_eq!(zs.count(), 0, "{zs:#?}");
        assert_eq!(zs.degenerate.len(), 1);
    }
}
