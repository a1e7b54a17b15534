//! The Kirchhoff function `M`, its structural conditions, the root function
//! `G(t) = M(t^{N-2} A) - t^2` and the scalar matching equation
//! `g_eps(delta) = eps^2 M(eps^{2-N} |grad omega_delta|^2) - delta^2`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::GradientMap;
use crate::numerics::{bisect, linear_fit, log_space};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Parametric forms accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KirchhoffSpec {
    Constant { c: f64 },
    Affine { a: f64, b: f64 },
    /// `a + b t^q`
    Power { a: f64, b: f64, q: f64 },
}

#[derive(Clone)]
pub struct KirchhoffFunction {
    label: String,
    spec: Option<KirchhoffSpec>,
    eval: Scalar,
    antiderivative: Option<Scalar>,
    m0: Option<f64>,
}

impl fmt::Debug for KirchhoffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KirchhoffFunction")
            .field("label", &self.label)
            .field("m0", &self.m0)
            .field("has_antiderivative", &self.antiderivative.is_some())
            .finish()
    }
}

impl KirchhoffFunction {
    pub fn from_spec(spec: KirchhoffSpec) -> Result<Self> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("Kirchhoff parameter {name} = {x}")))
            }
        };
        let positive_or_none = |x: f64| if x > 0.0 { Some(x) } else { None };
        Ok(match spec {
            KirchhoffSpec::Constant { c } => {
                finite(c, "c")?;
                Self {
                    label: format!("constant c={c}"),
                    spec: Some(spec),
                    eval: Arc::new(move |_| c),
                    antiderivative: Some(Arc::new(move |t| c * t)),
                    m0: positive_or_none(c),
                }
            }
            KirchhoffSpec::Affine { a, b } => {
                finite(a, "a")?;
                finite(b, "b")?;
                Self {
                    label: format!("affine a={a}, b={b}"),
                    spec: Some(spec),
                    eval: Arc::new(move |t| a + b * t),
                    antiderivative: Some(Arc::new(move |t| a * t + 0.5 * b * t * t)),
                    m0: if b >= 0.0 { positive_or_none(a) } else { None },
                }
            }
            KirchhoffSpec::Power { a, b, q } => {
                finite(a, "a")?;
                finite(b, "b")?;
                if !(q > 0.0 && q.is_finite()) {
                    return Err(Error::InvalidParameter(format!("power exponent q must be positive, got {q}")));
                }
                Self {
                    label: format!("power a={a}, b={b}, q={q}"),
                    spec: Some(spec),
                    eval: Arc::new(move |t| a + b * t.powf(q)),
                    antiderivative: Some(Arc::new(move |t| a * t + b * t.powf(q + 1.0) / (q + 1.0))),
                    m0: if b >= 0.0 { positive_or_none(a) } else { None },
                }
            }
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::from_spec(KirchhoffSpec::Constant { c }).expect("finite constant")
    }

    pub fn affine(a: f64, b: f64) -> Self {
        Self::from_spec(KirchhoffSpec::Affine { a, b }).expect("finite coefficients")
    }

    pub fn power(a: f64, b: f64, q: f64) -> Self {
        Self::from_spec(KirchhoffSpec::Power { a, b, q }).expect("valid power form")
    }

    /// Arbitrary `M` with an optional antiderivative and declared lower bound.
    pub fn custom(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        antiderivative: Option<Scalar>,
        m0: Option<f64>,
    ) -> Self {
        Self {
            label: label.into(),
            spec: None,
            eval: Arc::new(eval),
            antiderivative,
            m0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn antiderivative(&self, t: f64) -> Option<f64> {
        self.antiderivative.as_ref().map(|f| f(t))
    }

    pub fn m0(&self) -> Option<f64> {
        self.m0
    }

    pub fn with_m0(mut self, m0: Option<f64>) -> Self {
        self.m0 = m0;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn spec(&self) -> Option<KirchhoffSpec> {
        self.spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub verdict: Verdict,
    /// A sampled `t` where the condition fails.
    pub witness: Option<f64>,
    pub detail: String,
}

impl ConditionVerdict {
    fn new(verdict: Verdict, witness: Option<f64>, detail: impl Into<String>) -> Self {
        Self {
            verdict,
            witness,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub dim: usize,
    pub label: String,
    pub lower_bound: ConditionVerdict,
    pub growth: ConditionVerdict,
    pub ratio_decay: ConditionVerdict,
    pub monotone: ConditionVerdict,
    pub ratio_monotone: ConditionVerdict,
    pub continuity: ConditionVerdict,
    /// Smallest sampled value of `M` (the `m0` candidate).
    pub m0_candidate: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    /// Verdicts only describe the sampled grid.
    pub grid_relative: bool,
}

impl ConditionReport {
    pub fn verdicts(&self) -> [(&'static str, &ConditionVerdict); 5] {
        [("lower_bound", &self.lower_bound), ("growth", &self.growth), ("ratio_decay", &self.ratio_decay), ("monotone", &self.monotone), ("ratio_monotone", &self.ratio_monotone)]
    }

    /// No condition failed (not-applicable and unknown count as not failing).
    pub fn all_pass(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| v.verdict != Verdict::Fail)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConditionOptions {
    /// Value `M^(t) - (1-2/N) M(t) t` must exceed at the grid end.
    pub growth_threshold: f64,
    /// Required decay of `log(M/t^{2/(N-2)})` per decade over the last decade.
    pub decay_slope: f64,
    /// Largest allowed jump of `M` between neighbouring samples.
    pub modulus: Option<f64>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            growth_threshold: 1e3,
            decay_slope: -0.01,
            modulus: None,
        }
    }
}

/// Default sampling grid: 2000 log-spaced points on `[1e-3, 1e6]`.
pub fn default_condition_grid() -> Vec<f64> {
    log_space(1e-3, 1e6, 2000)
}

fn nonincreasing(values: &[f64]) -> Option<usize> {
    values
        .windows(2)
        .position(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(w[1].abs()))
        .map(|i| i + 1)
}

fn nondecreasing(values: &[f64]) -> Option<usize> {
    values
        .windows(2)
        .position(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(w[1].abs()))
        .map(|i| i + 1)
}

/// Check the structural conditions on M over a finite grid of `t` samples.
pub fn verify_m_conditions(m: &KirchhoffFunction, dim: usize, grid: &[f64], opts: &ConditionOptions) -> Result<ConditionReport> {
    if grid.len() < 4 {
        return Err(Error::Empty("condition grid"));
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("condition grid must be positive and increasing".into()));
    }
    if grid[0] > 1e-3 || *grid.last().unwrap() < 1e6 {
        log::warn!("condition grid [{}, {}] is narrower than [1e-3, 1e6]", grid[0], grid.last().unwrap());
    }
    let n = grid.len();
    let half = n / 2;
    let values: Vec<f64> = grid.iter().map(|&t| m.eval(t)).collect();
    let m_at_zero = m.eval(0.0);
    let (imin, vmin) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let m0_candidate = vmin.min(m_at_zero);

    let lower_bound = match m.m0() {
        Some(m0) if m0 > 0.0 => {
            if m0_candidate >= m0 {
                ConditionVerdict::new(Verdict::Pass, None, format!("min M = {m0_candidate} >= m0 = {m0}"))
            } else {
                let witness = if m_at_zero < m0 { 0.0 } else { grid[imin] };
                ConditionVerdict::new(Verdict::Fail, Some(witness), format!("min M = {m0_candidate} < m0 = {m0}"))
            }
        }
        _ => {
            if m0_candidate > 0.0 {
                ConditionVerdict::new(Verdict::Pass, None, format!("m0 undeclared; sampled min M = {m0_candidate}"))
            } else {
                ConditionVerdict::new(Verdict::Fail, Some(grid[imin]), format!("sampled min M = {m0_candidate} <= 0"))
            }
        }
    };

    let weight = 1.0 - 2.0 / dim as f64;
    let growth = match m.antiderivative(1.0) {
        None => ConditionVerdict::new(Verdict::Unknown, None, "no antiderivative supplied"),
        Some(_) => {
            let f: Vec<f64> = grid[half..]
                .iter()
                .zip(&values[half..])
                .map(|(&t, &v)| m.antiderivative(t).unwrap() - weight * v * t)
                .collect();
            let end = *f.last().unwrap();
            match f.windows(2).position(|w| w[1] <= w[0]) {
                Some(i) => ConditionVerdict::new(Verdict::Fail, Some(grid[half + i + 1]), "not increasing on upper half of grid"),
                None if end > opts.growth_threshold => {
                    ConditionVerdict::new(Verdict::Pass, None, format!("increasing, end value {end:e}"))
                }
                None => ConditionVerdict::new(
                    Verdict::Fail,
                    Some(*grid.last().unwrap()),
                    format!("end value {end:e} below threshold {:e}", opts.growth_threshold),
                ),
            }
        }
    };

    let (ratio_decay, ratio_monotone) = if dim <= 2 {
        (
            ConditionVerdict::new(Verdict::NotApplicable, None, "N <= 2"),
            ConditionVerdict::new(Verdict::NotApplicable, None, "N <= 2"),
        )
    } else {
        let e = 2.0 / (dim as f64 - 2.0);
        let ratio: Vec<f64> = grid.iter().zip(&values).map(|(&t, &v)| v / t.powf(e)).collect();
        let t_end = *grid.last().unwrap();
        let tail: Vec<usize> = (0..n).filter(|&i| grid[i] >= t_end / 10.0).collect();
        let xs: Vec<f64> = tail.iter().map(|&i| grid[i].log10()).collect();
        let ys: Vec<f64> = tail.iter().map(|&i| ratio[i].abs().max(f64::MIN_POSITIVE).log10()).collect();
        let slope = linear_fit(&xs, &ys).map(|(_, s)| s).unwrap_or(0.0);
        let ratio_decay = if let Some(i) = nonincreasing(&ratio[half..]) {
            ConditionVerdict::new(Verdict::Fail, Some(grid[half + i]), "ratio increases on upper half of grid")
        } else if slope < opts.decay_slope {
            ConditionVerdict::new(Verdict::Pass, None, format!("log-log slope {slope:.4} over last decade"))
        } else {
            ConditionVerdict::new(Verdict::Fail, Some(t_end), format!("ratio levels off: log-log slope {slope:.4}"))
        };
        let ratio_monotone = match nonincreasing(&ratio) {
            Some(i) => ConditionVerdict::new(Verdict::Fail, Some(grid[i]), "ratio increases"),
            None => ConditionVerdict::new(Verdict::Pass, None, "ratio nonincreasing on grid"),
        };
        (ratio_decay, ratio_monotone)
    };

    let mut with_zero = Vec::with_capacity(n + 1);
    with_zero.push(m_at_zero);
    with_zero.extend_from_slice(&values);
    let monotone = match nondecreasing(&with_zero) {
        Some(i) => ConditionVerdict::new(Verdict::Fail, Some(grid[i - 1]), "M decreases"),
        None => ConditionVerdict::new(Verdict::Pass, None, "nondecreasing on grid"),
    };

    let max_jump = with_zero.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let continuity = match opts.modulus {
        None => ConditionVerdict::new(Verdict::Unknown, None, format!("no modulus bound; max jump {max_jump:e}")),
        Some(bound) => match with_zero.windows(2).position(|w| (w[1] - w[0]).abs() > bound) {
            Some(i) => ConditionVerdict::new(Verdict::Fail, Some(grid[i]), format!("jump exceeds {bound:e}")),
            None => ConditionVerdict::new(Verdict::Pass, None, format!("max jump {max_jump:e}")),
        },
    };

    Ok(ConditionReport {
        dim,
        label: m.label().to_string(),
        lower_bound,
        growth,
        ratio_decay,
        monotone,
        ratio_monotone,
        continuity,
        m0_candidate,
        grid_min: grid[0],
        grid_max: grid[n - 1],
        grid_points: n,
        grid_relative: true,
    })
}

/// `G(t) = M(t^{N-2} A) - t^2`.
pub fn big_g(m: &KirchhoffFunction, a: f64, dim: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("G needs t > 0 and A > 0, got t = {t}, A = {a}")));
    }
    Ok(m.eval(t.powi(dim as i32 - 2) * a) - t * t)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RootScan {
    /// Number of log-spaced scan points.
    pub resolution: usize,
    /// Lipschitz constant used to flag intervals that may hide a root pair.
    /// Estimated from the scan (twice the steepest secant) when absent.
    pub lipschitz: Option<f64>,
    pub tol: f64,
}

impl Default for RootScan {
    fn default() -> Self {
        Self {
            resolution: 4000,
            lipschitz: None,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GRoots {
    pub roots: Vec<f64>,
    pub c_star: f64,
    pub possibly_missed: bool,
    pub bracket: (f64, f64),
    pub resolution: usize,
}

/// Every sign change of `G` on a log-spaced scan of `bracket`, refined by bisection.
pub fn find_g_roots(m: &KirchhoffFunction, a: f64, dim: usize, bracket: (f64, f64), scan: &RootScan) -> Result<GRoots> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("root bracket must satisfy 0 < t_min < t_max, got {bracket:?}")));
    }
    if scan.resolution < 1000 {
        return Err(Error::InvalidParameter(format!("scan resolution {} below 1000", scan.resolution)));
    }
    let ts = log_space(lo, hi, scan.resolution);
    let gs = ts.iter().map(|&t| big_g(m, a, dim, t)).collect::<Result<Vec<f64>>>()?;
    let lipschitz = scan.lipschitz.unwrap_or_else(|| {
        2.0 * ts
            .windows(2)
            .zip(gs.windows(2))
            .map(|(t, g)| ((g[1] - g[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    });
    let mut roots = Vec::new();
    let mut possibly_missed = false;
    for i in 0..ts.len() - 1 {
        let (t0, t1, g0, g1) = (ts[i], ts[i + 1], gs[i], gs[i + 1]);
        if g0 == 0.0 {
            roots.push(t0);
            continue;
        }
        if (g0 > 0.0) != (g1 > 0.0) && g1 != 0.0 {
            let r = bisect(t0, t1, g0, scan.tol, 200, |t| big_g(m, a, dim, t))?;
            roots.push(r);
        } else if g1 != 0.0 && g0.abs().min(g1.abs()) < 0.5 * lipschitz * (t1 - t0) {
            possibly_missed = true;
        }
    }
    if *gs.last().unwrap() == 0.0 {
        roots.push(hi);
    }
    if roots.is_empty() {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    Ok(GRoots {
        c_star: roots[0],
        roots,
        possibly_missed,
        bracket,
        resolution: scan.resolution,
    })
}

/// `g_eps(delta) = eps^2 M(eps^{2-N} |grad omega_delta|^2) - delta^2`.
pub fn g_epsilon(m: &KirchhoffFunction, map: &dyn GradientMap, eps: f64, delta: f64) -> Result<f64> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("g_eps needs eps, delta > 0, got {eps}, {delta}")));
    }
    let grad = map.grad_norm_sq(delta).map_err(|e| Error::at_delta(delta, e))?;
    let t = eps.powi(2 - map.dim() as i32) * grad;
    Ok(eps * eps * m.eval(t) - delta * delta)
}

/// Smallest `K` in `{2, 4, 8, ...}` with `M(K^{N-2} A) / K^2 < 1`.
pub fn derive_scan_cap(m: &KirchhoffFunction, a: f64, dim: usize) -> Result<f64> {
    let mut k = 2.0f64;
    for _ in 0..40 {
        if m.eval(k.powi(dim as i32 - 2) * a) / (k * k) < 1.0 {
            return Ok(k);
        }
        k *= 2.0;
    }
    Err(Error::NoScanCap { k_max: k / 2.0 })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeltaOptions {
    /// Overrides the lower bound declared on `M`.
    pub m0: Option<f64>,
    /// Scan cap `K`; derived from `M` and `A` when absent.
    pub k: Option<f64>,
    /// Scan step in units of `eps`.
    pub scan_step: f64,
    /// Keep scanning to `K eps` and record every sign change.
    pub all_sign_changes: bool,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        Self {
            m0: None,
            k: None,
            scan_step: 1e-2,
            all_sign_changes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceResult {
    pub epsilon: f64,
    pub delta: f64,
    pub ratio: f64,
    pub c_star: Option<f64>,
    pub roots: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub g_at_delta: f64,
    /// Further sign changes of `g_eps` below `K eps` (diagnostics).
    pub sign_changes: Vec<f64>,
}

impl CorrespondenceResult {
    pub fn within_bounds(&self) -> bool {
        self.lower * self.epsilon <= self.delta * (1.0 + 1e-12) && self.delta <= self.upper * self.epsilon * (1.0 + 1e-12)
    }
}

/// `delta_eps = sup{s : g_eps > 0 on (0, s)}` by an upward scan from
/// `sqrt(m0) eps` and bisection of the first sign change.
pub fn solve_delta_epsilon(m: &KirchhoffFunction, map: &dyn GradientMap, eps: f64, opts: &DeltaOptions) -> Result<CorrespondenceResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let m0 = opts
        .m0
        .or(m.m0())
        .filter(|x| *x > 0.0)
        .ok_or_else(|| Error::InvalidParameter("a positive lower bound m0 must be declared".into()))?;
    if !(opts.scan_step > 0.0) {
        return Err(Error::InvalidParameter("scan step must be positive".into()));
    }
    let dim = map.dim();
    let a = map.limit_constant();
    let k = match opts.k {
        Some(k) => k,
        None => derive_scan_cap(m, a, dim)?,
    };
    let g = |delta: f64| g_epsilon(m, map, eps, delta);
    let lower = m0.sqrt();
    let cap = k * eps;
    let start = lower * eps;
    let g0 = g(start)?;
    // M == m0 makes g vanish at the start up to rounding
    let floor = 8.0 * f64::EPSILON * start * start;
    if g0 < -floor {
        return Err(Error::LowerBoundViolated { delta: start, value: g0 });
    }

    let mut delta = None;
    let mut sign_changes = Vec::new();
    if g0.abs() <= floor {
        delta = Some(start);
    }
    let step = opts.scan_step * eps;
    let (mut prev, mut g_prev) = (start, g0);
    let mut i = 1u64;
    while delta.is_none() || opts.all_sign_changes {
        let d = start + i as f64 * step;
        if d > cap {
            break;
        }
        i += 1;
        let gd = g(d)?;
        if (gd > 0.0) != (g_prev > 0.0) || gd == 0.0 {
            let root = if gd == 0.0 {
                d
            } else {
                bisect(prev, d, g_prev, 1e-12 * eps, 200, g)?
            };
            if delta.is_none() {
                delta = Some(root);
            } else {
                sign_changes.push(root);
            }
        }
        prev = d;
        g_prev = gd;
    }
    let delta = delta.ok_or(Error::NoSignChange { epsilon: eps, delta_cap: cap })?;
    let g_at_delta = g(delta)?;
    let (c_star, roots) = match find_g_roots(m, a, dim, (0.5 * lower, 2.0 * k), &RootScan::default()) {
        Ok(r) => (Some(r.c_star), r.roots),
        Err(_) => (None, Vec::new()),
    };
    Ok(CorrespondenceResult {
        epsilon: eps,
        delta,
        ratio: delta / eps,
        c_star,
        roots,
        lower,
        upper: k,
        g_at_delta,
        sign_changes,
    })
}

/// `(inf, sup)` of `delta_eps / eps` over a sweep.
pub fn ratio_window(results: &[Option<CorrespondenceResult>]) -> Result<(f64, f64)> {
    if results.is_empty() {
        return Err(Error::Empty("correspondence results"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (index, r) in results.iter().enumerate() {
        let r = r.as_ref().ok_or(Error::MissingDelta { index })?;
        lo = lo.min(r.ratio);
        hi = hi.max(r.ratio);
    }
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("ratio window ({lo}, {hi}) is degenerate")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ScalingMap;

    #[test]
    fn g_examples() {
        assert_eq!(big_g(&KirchhoffFunction::constant(1.0), 7.0, 3, 1.0).unwrap(), 0.0);
        let t = 1.0 + 2f64.sqrt();
        assert!(big_g(&KirchhoffFunction::affine(1.0, 1.0), 2.0, 3, t).unwrap().abs() < 1e-14);
        let v = big_g(&KirchhoffFunction::affine(0.05, 1.0), 1.0, 5, 0.5).unwrap();
        assert!((v + 0.075).abs() < 1e-15);
        assert!(big_g(&KirchhoffFunction::constant(1.0), 1.0, 3, 0.0).is_err());
    }

    #[test]
    fn roots_of_affine_three_dim() {
        let r = find_g_roots(&KirchhoffFunction::affine(1.0, 1.0), 2.0, 3, (0.01, 100.0), &RootScan::default()).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!((r.c_star - (1.0 + 2f64.sqrt())).abs() < 1e-11);
    }

    #[test]
    fn two_roots_in_five_dim() {
        let r = find_g_roots(&KirchhoffFunction::affine(0.05, 1.0), 1.0, 5, (0.01, 10.0), &RootScan::default()).unwrap();
        assert_eq!(r.roots.len(), 2);
        assert!(r.roots.iter().all(|t| *t > 0.2 && *t < 1.0));
    }

    #[test]
    fn no_root_is_an_error() {
        let err = find_g_roots(&KirchhoffFunction::affine(1.0, 1.0), 1.0, 4, (0.01, 100.0), &RootScan::default());
        assert!(matches!(err, Err(Error::NoRootInBracket { .. })));
    }

    #[test]
    fn conditions_affine() {
        let grid = default_condition_grid();
        let r3 = verify_m_conditions(&KirchhoffFunction::affine(1.0, 1.0), 3, &grid, &Default::default()).unwrap();
        for (name, v) in r3.verdicts() {
            assert!(v.passed(), "{name}: {v:?}");
        }
        let r4 = verify_m_conditions(&KirchhoffFunction::affine(1.0, 1.0), 4, &grid, &Default::default()).unwrap();
        assert_eq!(r4.ratio_decay.verdict, Verdict::Fail);
        let r1 = verify_m_conditions(&KirchhoffFunction::constant(1.0), 3, &grid, &Default::default()).unwrap();
        assert!(r1.verdicts().iter().all(|(_, v)| v.passed()));
        let r2 = verify_m_conditions(&KirchhoffFunction::constant(1.0), 2, &grid, &Default::default()).unwrap();
        assert_eq!(r2.ratio_decay.verdict, Verdict::NotApplicable);
        assert_eq!(r2.ratio_monotone.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn missing_antiderivative_is_unknown() {
        let m = KirchhoffFunction::custom("custom", |t| 1.0 + t, None, Some(1.0));
        let r = verify_m_conditions(&m, 3, &default_condition_grid(), &Default::default()).unwrap();
        assert_eq!(r.growth.verdict, Verdict::Unknown);
    }

    #[test]
    fn delta_for_identity_m() {
        let map = ScalingMap::new(1, 4.0 / 3.0);
        let r = solve_delta_epsilon(&KirchhoffFunction::constant(1.0), &map, 0.05, &Default::default()).unwrap();
        assert_eq!(r.delta, 0.05);
        assert!((r.c_star.unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn affine_four_dim_has_no_sign_change() {
        let map = ScalingMap::new(4, 1.0);
        let opts = DeltaOptions {
            k: Some(1e3),
            scan_step: 0.05,
            ..Default::default()
        };
        let err = solve_delta_epsilon(&KirchhoffFunction::affine(1.0, 1.0), &map, 0.1, &opts).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn bad_lower_bound_detected() {
        let m = KirchhoffFunction::constant(1.0).with_m0(Some(4.0));
        let map = ScalingMap::new(1, 1.0);
        let err = solve_delta_epsilon(&m, &map, 0.1, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::LowerBoundViolated { .. }));
    }

    #[test]
    fn ratio_window_rules() {
        assert!(ratio_window(&[]).is_err());
        let map = ScalingMap::new(1, 1.0);
        let m = KirchhoffFunction::constant(1.0);
        let r = solve_delta_epsilon(&m, &map, 0.1, &Default::default()).unwrap();
        assert_eq!(ratio_window(&[Some(r.clone()), Some(r.clone())]).unwrap(), (1.0, 1.0));
        assert!(matches!(ratio_window(&[Some(r), None]), Err(Error::MissingDelta { index: 1 })));
    }
}
