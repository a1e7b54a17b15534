//! Executes an [`ExperimentConfig`]: writes the data files, validates each
//! one against its schema and finishes with `manifest.json`.
//!
//! Exit status is 0 when the run completed and every check passed, 1
//! otherwise. Configuration errors (status 2) are caught before a run starts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::{
    check_admissible, find_stable_zeros, vector_field_l, AdmissibleOptions, AdmissiblePotential, Field, Quadrature,
    QuadratureOptions, StableZero, ZeroSearch,
};
use crate::config::{ExperimentConfig, ExperimentKind, FamilyKind};
use crate::correspondence::{
    analyse, build_single_peak, limit_equation_residual, profile_distance, rescale_ground_state, LimitResidual,
    PeakSolution,
};
use crate::error::Error;
use crate::family::{ExactFamily, NumericalFamily1D, PeakFamily};
use crate::kirchhoff_map::{
    big_g, default_condition_grid, find_g_roots, solve_delta_epsilon, verify_m_conditions, ConditionOptions,
    CorrespondenceResult, DeltaOptions, KirchhoffFunction, RootScan, Verdict,
};
use crate::multipeak::{build_multi_peak, build_multi_peak_spec, correction_norm, system_residual, MultiPeakOptions};
use crate::nonexistence::{
    probe_nonexistence, probe_seeded, v0_threshold, ProbeOptions, ProbeOutcome, SigmaOptions, ThresholdReport,
};
use crate::numerics::log_space;
use crate::output::{
    fmt_f, validate_csv, validate_json, write_json, Cell, Check, ColumnKind, ErrorRecord, Manifest, SchemaError,
    Table, MANIFEST_KEYS,
};
use crate::profiles::{ground_state, GroundState, PeakOptions};

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Module(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl RunError {
    fn record(&self) -> ErrorRecord {
        let kind = match self {
            RunError::Module(e) => e.kind(),
            RunError::Io(_) => "io",
            RunError::Schema(_) => "schema",
            RunError::Pool(_) => "thread_pool",
        };
        ErrorRecord {
            kind: kind.to_string(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub exit_code: u8,
    pub dir: PathBuf,
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<String>,
    checks: Vec<Check>,
}

impl Artifacts<'_> {
    fn table(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.dir.join(name);
        table.write(&path)?;
        validate_csv(&path, &table.columns)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T, required: &[&str]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_json(&path, value)?;
        validate_json(&path, required)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn check(&mut self, c: Check) {
        if !c.pass {
            log::warn!("check {} failed: {}", c.name, c.detail);
        }
        self.checks.push(c);
    }
}

/// Run the experiment with at most `jobs` worker threads (all cores when absent).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> RunOutcome {
    let start = Instant::now();
    let dir = cfg.out.clone();
    let mut art = Artifacts {
        dir: &dir,
        files: Vec::new(),
        checks: Vec::new(),
    };
    let result = std::fs::create_dir_all(&dir)
        .map_err(RunError::from)
        .and_then(|_| {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                builder = builder.num_threads(j.max(1));
            }
            builder.build().map_err(|e| RunError::Pool(e.to_string()))
        })
        .and_then(|pool| pool.install(|| dispatch(cfg, &mut art)));
    let error = result.err().map(|e| {
        log::error!("{e}");
        e.record()
    });
    let ok = error.is_none() && art.checks.iter().all(|c| c.pass);
    let exit_code = if ok { 0 } else { 1 };
    let mut versions = BTreeMap::new();
    versions.insert("kirchhoff".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let mut manifest = Manifest {
        experiment: cfg.experiment.name().to_string(),
        status: match (&error, ok) {
            (Some(_), _) => "error",
            (None, true) => "ok",
            (None, false) => "checks_failed",
        }
        .to_string(),
        exit_code,
        seed: cfg.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        versions,
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        checks: art.checks,
        files: art.files,
        error,
    };
    let path = dir.join("manifest.json");
    let written = write_json(&path, &manifest)
        .map_err(RunError::from)
        .and_then(|_| validate_json(&path, &MANIFEST_KEYS).map_err(RunError::from));
    if let Err(e) = written {
        log::error!("manifest: {e}");
        manifest.exit_code = 1;
        manifest.status = "error".into();
        manifest.error.get_or_insert(e.record());
    }
    RunOutcome {
        exit_code: manifest.exit_code,
        manifest,
        dir,
    }
}

fn dispatch(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    match cfg.experiment {
        ExperimentKind::GroundState => run_ground_state(cfg, art),
        ExperimentKind::Conditions => run_conditions(cfg, art),
        ExperimentKind::Roots => run_roots(cfg, art),
        ExperimentKind::DeltaEps => run_delta_eps(cfg, art),
        ExperimentKind::SinglePeak => run_single_peak(cfg, art, true),
        ExperimentKind::SinglePeakSweep => run_single_peak(cfg, art, false),
        ExperimentKind::Zeros => run_zeros(cfg, art),
        ExperimentKind::MultipeakSweep => run_multipeak(cfg, art),
        ExperimentKind::Threshold => run_threshold(cfg, art),
        ExperimentKind::Probe => run_probe(cfg, art),
    }
}

fn point_mass(cfg: &ExperimentConfig) -> f64 {
    cfg.potential().eval(&cfg.point())
}

fn point_ground_state(cfg: &ExperimentConfig) -> Result<GroundState, Error> {
    ground_state(cfg.dim, point_mass(cfg), cfg.p)
}

fn base_table(table: Table, cfg: &ExperimentConfig) -> Table {
    table
        .meta("experiment", cfg.experiment.name())
        .meta("seed", cfg.seed)
        .meta("N", cfg.dim)
        .meta("p", fmt_f(cfg.p))
        .meta("V", &cfg.v)
        .meta("M", cfg.kirchhoff().label())
}

/// 1D closed form `((p/2) m sech^2((p-2) sqrt(m) x / 2))^{1/(p-2)}`.
fn closed_form_1d(m: f64, p: f64, x: f64) -> f64 {
    let s = 1.0 / (0.5 * (p - 2.0) * m.sqrt() * x).cosh();
    (0.5 * p * m * s * s).powf(1.0 / (p - 2.0))
}

#[derive(Serialize)]
struct GroundSummary {
    dim: usize,
    m: f64,
    p: f64,
    a: f64,
    mass: f64,
    p_norm: f64,
    peak: f64,
    decay_rate: f64,
    r_max: f64,
    step: f64,
    nehari_residual: f64,
    pohozaev_residual: f64,
}

fn run_ground_state(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let w = point_ground_state(cfg)?;
    let mut t = base_table(Table::floats(&["r", "W"]), cfg)
        .meta("m", fmt_f(w.m))
        .meta("A", fmt_f(w.gradient_norm_sq))
        .meta("mass", fmt_f(w.mass));
    for (r, v) in w.radii.iter().zip(&w.values) {
        t.push(vec![(*r).into(), (*v).into()]);
    }
    art.table("ground_state.csv", &t)?;
    let summary = GroundSummary {
        dim: w.dim,
        m: w.m,
        p: w.p,
        a: w.gradient_norm_sq,
        mass: w.mass,
        p_norm: w.p_norm,
        peak: w.peak(),
        decay_rate: w.decay_rate,
        r_max: w.r_max(),
        step: w.step,
        nehari_residual: w.nehari_residual(),
        pohozaev_residual: w.pohozaev_residual(),
    };
    art.json("ground_state.json", &summary, &["a", "mass", "nehari_residual", "pohozaev_residual"])?;
    art.check(Check::at_most("nehari", summary.nehari_residual.abs(), 1e-6));
    art.check(Check::at_most("pohozaev", summary.pohozaev_residual.abs(), 1e-6));
    if w.dim == 1 {
        let err = w
            .radii
            .iter()
            .zip(&w.values)
            .map(|(r, v)| (v - closed_form_1d(w.m, w.p, *r)).abs())
            .fold(0.0, f64::max);
        art.check(Check::at_most("closed_form_1d", err, 1e-6));
    }
    Ok(())
}

fn run_conditions(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let grid = default_condition_grid();
    let report = verify_m_conditions(&m, cfg.dim, &grid, &ConditionOptions::default())?;
    art.json("conditions.json", &report, &["lower_bound", "growth", "ratio_decay", "monotone", "ratio_monotone", "continuity", "grid_relative"])?;
    let n = cfg.dim as f64;
    let mut t = base_table(Table::floats(&["t", "M", "M_over_power", "growth_quantity"]), cfg);
    for &s in &grid {
        let mv = m.eval(s);
        let ratio = if cfg.dim > 2 { mv / s.powf(2.0 / (n - 2.0)) } else { f64::NAN };
        let q = m.antiderivative(s).map_or(f64::NAN, |hat| hat - (1.0 - 2.0 / n) * mv * s);
        t.push(vec![s.into(), mv.into(), ratio.into(), q.into()]);
    }
    art.table("conditions.csv", &t)?;
    art.check(Check::new(
        "continuity",
        report.continuity.verdict != Verdict::Fail,
        None,
        report.continuity.detail.clone(),
    ));
    if let Some(m0) = m.m0() {
        art.check(Check::new(
            "declared_m0_is_lower_bound",
            m0 <= report.m0_candidate * (1.0 + 1e-12),
            Some(report.m0_candidate),
            format!("m0 = {}, sampled min = {}", fmt_f(m0), fmt_f(report.m0_candidate)),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct RootsSummary {
    a: f64,
    dim: usize,
    roots: Vec<f64>,
    c_star: f64,
    possibly_missed: bool,
    bracket: (f64, f64),
    resolution: usize,
    oracle_roots: usize,
}

/// Sign changes of `G` on a log scan, counted independently of `find_g_roots`.
fn dense_sign_changes(m: &KirchhoffFunction, a: f64, dim: usize, bracket: (f64, f64), points: usize) -> Result<usize, Error> {
    let ts = log_space(bracket.0, bracket.1, points);
    let mut count = 0;
    let mut prev = big_g(m, a, dim, ts[0])?;
    for &t in &ts[1..] {
        let g = big_g(m, a, dim, t)?;
        if (g > 0.0) != (prev > 0.0) {
            count += 1;
        }
        prev = g;
    }
    Ok(count)
}

fn run_roots(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let a = match cfg.roots.a {
        Some(a) => a,
        None => point_ground_state(cfg)?.gradient_norm_sq,
    };
    let bracket = (cfg.roots.bracket[0], cfg.roots.bracket[1]);
    let scan = RootScan {
        resolution: cfg.roots.resolution,
        ..RootScan::default()
    };
    let roots = find_g_roots(&m, a, cfg.dim, bracket, &scan)?;
    let mut t = base_table(
        Table::new(&[("index", ColumnKind::Int), ("t", ColumnKind::Float), ("G", ColumnKind::Float)]),
        cfg,
    )
    .meta("A", fmt_f(a));
    let mut worst = 0.0f64;
    for (i, r) in roots.roots.iter().enumerate() {
        let g = big_g(&m, a, cfg.dim, *r)?;
        worst = worst.max(g.abs() / (1.0 + r * r));
        t.push(vec![i.into(), (*r).into(), g.into()]);
    }
    art.table("roots.csv", &t)?;
    let mut scan_table = base_table(Table::floats(&["t", "G"]), cfg).meta("A", fmt_f(a));
    for s in log_space(bracket.0, bracket.1, scan.resolution) {
        scan_table.push(vec![s.into(), big_g(&m, a, cfg.dim, s)?.into()]);
    }
    art.table("g_scan.csv", &scan_table)?;
    let oracle = dense_sign_changes(&m, a, cfg.dim, bracket, 10 * scan.resolution)?;
    let summary = RootsSummary {
        a,
        dim: cfg.dim,
        c_star: roots.c_star,
        possibly_missed: roots.possibly_missed,
        bracket,
        resolution: roots.resolution,
        oracle_roots: oracle,
        roots: roots.roots.clone(),
    };
    art.json("roots.json", &summary, &["roots", "c_star", "oracle_roots"])?;
    art.check(Check::at_most("root_residual", worst, 1e-9));
    art.check(Check::new(
        "dense_oracle",
        oracle == roots.roots.len(),
        Some(oracle as f64),
        format!("{} roots, oracle at 10x resolution finds {oracle}", roots.roots.len()),
    ));
    Ok(())
}

/// Family source shared by the single-peak experiments. Numerical families
/// carry a warm-start cache, so each row builds its own.
enum FamilySource {
    Exact(ExactFamily),
    Numerical { v: crate::family::Potential1D, p: f64, center: f64, opts: PeakOptions },
}

impl FamilySource {
    fn new(cfg: &ExperimentConfig) -> Result<Self, Error> {
        let v = cfg.potential();
        let exact = match cfg.grid.family {
            FamilyKind::Auto => v.is_constant(),
            FamilyKind::Exact => true,
            FamilyKind::Numerical => false,
        };
        let point = cfg.point();
        if exact {
            let w = point_ground_state(cfg)?;
            let mut fam = ExactFamily::new(w).with_resolution(cfg.grid.cells_per_delta);
            if cfg.dim == 1 {
                fam = fam.with_center(point[0]);
            }
            return Ok(Self::Exact(fam));
        }
        if cfg.dim != 1 {
            return Err(Error::UnsupportedDimension(cfg.dim));
        }
        Ok(Self::Numerical {
            v: Arc::new(move |x: f64| v.eval1(x)),
            p: cfg.p,
            center: point[0],
            opts: PeakOptions {
                cells_per_delta: cfg.grid.cells_per_delta,
                ..PeakOptions::default()
            },
        })
    }

    fn is_exact(&self) -> bool {
        matches!(self, Self::Exact(_))
    }

    fn build(&self) -> Result<Box<dyn PeakFamily>, Error> {
        Ok(match self {
            Self::Exact(f) => Box::new(f.clone()),
            Self::Numerical { v, p, center, opts } => Box::new(NumericalFamily1D::new(v.clone(), *p, *center, *opts)?),
        })
    }
}

fn text_status<T>(r: &Result<T, Error>) -> (Cell, Cell) {
    match r {
        Ok(_) => ("ok".into(), "".into()),
        Err(e) => ("failed".into(), e.to_string().into()),
    }
}

fn run_delta_eps(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let source = FamilySource::new(cfg)?;
    let eps = cfg.eps_list();
    let rows: Vec<Result<CorrespondenceResult, Error>> = eps
        .par_iter()
        .map(|&e| {
            let fam = source.build()?;
            solve_delta_epsilon(&m, &*fam, e, &DeltaOptions::default())
        })
        .collect();
    let mut t = base_table(
        Table::new(&[
            ("eps", ColumnKind::Float),
            ("delta", ColumnKind::Float),
            ("ratio", ColumnKind::Float),
            ("c_star", ColumnKind::Float),
            ("lower", ColumnKind::Float),
            ("upper", ColumnKind::Float),
            ("g_at_delta", ColumnKind::Float),
            ("status", ColumnKind::Text),
            ("error", ColumnKind::Text),
        ]),
        cfg,
    );
    let mut identity = 0.0f64;
    let mut in_bounds = true;
    for (e, r) in eps.iter().zip(&rows) {
        let (status, error) = text_status(r);
        let c = r.as_ref().ok();
        if let Some(c) = c {
            identity = identity.max(c.g_at_delta.abs() / (c.delta * c.delta));
            in_bounds &= c.within_bounds();
        }
        t.push(vec![
            (*e).into(),
            c.map(|c| c.delta).into(),
            c.map(|c| c.ratio).into(),
            c.and_then(|c| c.c_star).into(),
            c.map(|c| c.lower).into(),
            c.map(|c| c.upper).into(),
            c.map(|c| c.g_at_delta).into(),
            status,
            error,
        ]);
    }
    art.table("delta_eps.csv", &t)?;
    let failed = rows.iter().filter(|r| r.is_err()).count();
    art.check(Check::new("rows_ok", failed == 0, Some(failed as f64), format!("{failed} of {} rows failed", rows.len())));
    art.check(Check::at_most("identity", identity, 1e-9));
    art.check(Check::new("bounds", in_bounds, None, "sqrt(m0) eps <= delta_eps <= K eps"));
    Ok(())
}

struct PeakRow {
    sol: PeakSolution,
    distance: f64,
    potential: Vec<f64>,
}

fn peak_row(source: &FamilySource, m: &KirchhoffFunction, w: &GroundState, eps: f64) -> Result<PeakRow, Error> {
    let fam = source.build()?;
    let mut sol = build_single_peak(&*fam, m, eps, &DeltaOptions::default())?;
    analyse(&mut sol, &*fam, m)?;
    let distance = match sol.correspondence.c_star {
        Some(c) => profile_distance(&sol.profile, sol.center, eps, &rescale_ground_state(w, c)?, 5.0),
        None => f64::NAN,
    };
    let potential = fam.potential_on(&sol.profile.grid);
    Ok(PeakRow { sol, distance, potential })
}

/// Empirical order of `err` against `eps` between consecutive rows.
fn order(prev: Option<(f64, f64)>, cur: Option<(f64, f64)>) -> f64 {
    match (prev, cur) {
        (Some((e0, r0)), Some((e1, r1))) if r0 > 0.0 && r1 > 0.0 => (r1 / r0).ln() / (e1 / e0).ln(),
        _ => f64::NAN,
    }
}

#[derive(Serialize)]
struct SweepSummary {
    c_star: Option<f64>,
    ratio_window: Option<(f64, f64)>,
    rows: usize,
    failed: usize,
    exact_family: bool,
    limit: Option<LimitResidual>,
}

fn run_single_peak(cfg: &ExperimentConfig, art: &mut Artifacts, profiles: bool) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let source = FamilySource::new(cfg)?;
    let w = point_ground_state(cfg)?;
    let eps = cfg.eps_list();
    let point = cfg.point()[0];
    let rows: Vec<Result<PeakRow, Error>> = eps.par_iter().map(|&e| peak_row(&source, &m, &w, e)).collect();

    let mut t = base_table(
        Table::new(&[
            ("eps", ColumnKind::Float),
            ("delta", ColumnKind::Float),
            ("ratio", ColumnKind::Float),
            ("c_star", ColumnKind::Float),
            ("x_eps", ColumnKind::Float),
            ("residual_max", ColumnKind::Float),
            ("residual_l2", ColumnKind::Float),
            ("decay_rate", ColumnKind::Float),
            ("decay_violation", ColumnKind::Float),
            ("identity_error", ColumnKind::Float),
            ("profile_distance", ColumnKind::Float),
            ("order_ratio", ColumnKind::Float),
            ("order_center", ColumnKind::Float),
            ("status", ColumnKind::Text),
            ("error", ColumnKind::Text),
        ]),
        cfg,
    )
    .meta("family", if source.is_exact() { "exact" } else { "numerical" });
    let mut prev_ratio = None;
    let mut prev_center = None;
    let mut identity = 0.0f64;
    let mut violation = f64::NEG_INFINITY;
    let mut in_bounds = true;
    let mut ratios = Vec::new();
    let mut c_star = None;
    for (i, (e, r)) in eps.iter().zip(&rows).enumerate() {
        let (status, error) = text_status(r);
        let Ok(row) = r else {
            t.push(
                std::iter::once(Cell::from(*e))
                    .chain((0..12).map(|_| Cell::from(f64::NAN)))
                    .chain([status, error])
                    .collect(),
            );
            prev_ratio = None;
            prev_center = None;
            continue;
        };
        let sol = &row.sol;
        let c = sol.correspondence.c_star;
        c_star = c_star.or(c);
        let res = sol.residual.expect("analysed");
        let decay = sol.decay.expect("analysed");
        identity = identity.max(sol.identity_error());
        violation = violation.max(decay.max_violation);
        in_bounds &= sol.correspondence.within_bounds();
        ratios.push(sol.c_star_estimate);
        let ratio_err = c.map(|c| (*e, (sol.c_star_estimate - c).abs()));
        let center_err = Some((*e, (sol.center - point).abs()));
        t.push(vec![
            (*e).into(),
            sol.delta.into(),
            sol.c_star_estimate.into(),
            c.into(),
            sol.center.into(),
            res.max.into(),
            res.l2.into(),
            decay.rate.into(),
            decay.max_violation.into(),
            sol.identity_error().into(),
            row.distance.into(),
            order(prev_ratio, ratio_err).into(),
            order(prev_center, center_err).into(),
            status,
            error,
        ]);
        prev_ratio = ratio_err;
        prev_center = center_err;
        if profiles {
            let path = art.dir.join(format!("profile_{i}.csv"));
            let file = std::fs::File::create(&path)?;
            sol.write_csv(std::io::BufWriter::new(file), &row.potential, &m, cfg.p)?;
            validate_csv(&path, &Table::floats(&["x", "u", "residual"]).columns)?;
            art.files.push(format!("profile_{i}.csv"));
        }
    }
    art.table(if profiles { "single_peak.csv" } else { "sweep.csv" }, &t)?;

    let failed = rows.iter().filter(|r| r.is_err()).count();
    let window = (!ratios.is_empty()).then(|| {
        (
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    let limit = match c_star {
        Some(c) => Some(limit_equation_residual(&rescale_ground_state(&w, c)?, &m)),
        None => None,
    };
    let summary = SweepSummary {
        c_star,
        ratio_window: window,
        rows: rows.len(),
        failed,
        exact_family: source.is_exact(),
        limit,
    };
    art.json(
        if profiles { "single_peak.json" } else { "sweep.json" },
        &summary,
        &["c_star", "ratio_window", "rows", "failed"],
    )?;
    art.check(Check::new("rows_ok", failed == 0, Some(failed as f64), format!("{failed} of {} rows failed", rows.len())));
    if !ratios.is_empty() {
        art.check(Check::at_most("identity", identity, 1e-9));
        art.check(Check::new("bounds", in_bounds, None, "sqrt(m0) eps <= delta_eps <= K eps"));
        art.check(Check::at_most("decay_envelope", violation, 0.0));
    }
    if let Some(l) = limit {
        art.check(Check::at_most("limit_root_mismatch", l.root_mismatch, 1e-10));
        art.check(Check::at_most("limit_residual", l.relative, 1e-5));
    }
    if let (true, Some((lo, hi)), Some(c)) = (source.is_exact(), window, c_star) {
        art.check(Check::at_most("ratio_constant", (hi - lo) / c, 1e-9));
    }
    Ok(())
}

#[derive(Serialize)]
struct ZeroSummary {
    dim: usize,
    point: Vec<f64>,
    mass: f64,
    count: usize,
    stable: Vec<StableZero>,
    degenerate: Vec<StableZero>,
    rejected: Vec<Vec<f64>>,
    cells_scanned: usize,
    starts: usize,
}

fn run_zeros(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let z = &cfg.zeros;
    let leading: Vec<(&str, f64, f64)> = z
        .leading
        .iter()
        .zip(z.alpha.iter().zip(&z.beta))
        .map(|(h, (a, b))| (h.as_str(), *a, *b))
        .collect();
    let mut pot = AdmissiblePotential::from_expressions(&cfg.v, cfg.point(), &leading, z.radius)?.with_gamma(z.gamma);
    if let Some([v0, v1]) = z.v_bounds {
        pot = pot.with_bounds(v0, v1);
    }
    let report = check_admissible(
        &pot,
        &AdmissibleOptions {
            seed: cfg.seed,
            ..AdmissibleOptions::default()
        },
    );
    art.json("admissibility.json", &report, &["label", "items"])?;
    for item in &report.items {
        art.check(Check::new(
            format!("admissible_{}", item.name),
            item.verdict != Verdict::Fail,
            item.value,
            item.detail.clone(),
        ));
    }

    let w = ground_state(cfg.dim, pot.value_at_point(), cfg.p)?;
    let bounds: Vec<(f64, f64)> = if z.bounds.is_empty() {
        vec![(-2.0, 2.0); cfg.dim]
    } else {
        z.bounds.iter().map(|[a, b]| (*a, *b)).collect()
    };
    let search = ZeroSearch {
        resolution: z.resolution,
        ..ZeroSearch::default()
    };
    let quad_opts = QuadratureOptions::default();
    let zeros = find_stable_zeros(&pot, &w, &bounds, &quad_opts, &search)?;

    let mut cols: Vec<(String, ColumnKind)> = vec![("kind".into(), ColumnKind::Text)];
    cols.extend((1..=cfg.dim).map(|i| (format!("y{i}"), ColumnKind::Float)));
    for c in ["determinant", "residual", "basin_radius"] {
        cols.push((c.into(), ColumnKind::Float));
    }
    let col_refs: Vec<(&str, ColumnKind)> = cols.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let mut t = base_table(Table::new(&col_refs), cfg);
    for (kind, list) in [("stable", &zeros.stable), ("degenerate", &zeros.degenerate)] {
        for s in list {
            let mut row: Vec<Cell> = vec![kind.into()];
            row.extend(s.location.iter().map(|x| Cell::from(*x)));
            row.extend([s.determinant.into(), s.residual.into(), s.basin_radius.into()]);
            t.push(row);
        }
    }
    art.table("zeros.csv", &t)?;
    let summary = ZeroSummary {
        dim: cfg.dim,
        point: cfg.point(),
        mass: pot.value_at_point(),
        count: zeros.count(),
        stable: zeros.stable.clone(),
        degenerate: zeros.degenerate.clone(),
        rejected: zeros.rejected.clone(),
        cells_scanned: zeros.cells_scanned,
        starts: zeros.starts,
    };
    art.json("zeros.json", &summary, &["count", "stable", "degenerate"])?;

    if cfg.dim <= 2 {
        let quad = Quadrature::new(&w, &quad_opts)?;
        let axis = |k: usize| -> Vec<f64> {
            let (a, b) = bounds[k];
            (0..=z.resolution).map(|i| a + (b - a) * i as f64 / z.resolution as f64).collect()
        };
        let points: Vec<Vec<f64>> = if cfg.dim == 1 {
            axis(0).into_iter().map(|y| vec![y]).collect()
        } else {
            let (ax, ay) = (axis(0), axis(1));
            ax.iter().flat_map(|x| ay.iter().map(move |y| vec![*x, *y])).collect()
        };
        let values = points
            .par_iter()
            .map(|y| vector_field_l(&pot, &quad, y))
            .collect::<Result<Vec<_>, Error>>()?;
        let names: Vec<String> = (1..=cfg.dim)
            .map(|i| format!("y{i}"))
            .chain((1..=cfg.dim).map(|i| format!("L{i}")))
            .collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut field = base_table(Table::floats(&name_refs), cfg);
        for (y, l) in points.iter().zip(&values) {
            field.push(y.iter().chain(l).map(|v| Cell::from(*v)).collect());
        }
        art.table("field.csv", &field)?;
    }
    let worst = zeros.stable.iter().map(|s| s.residual).fold(0.0, f64::max);
    art.check(Check::at_most("zero_residual", worst, search.zero_tol));
    Ok(())
}

#[derive(Serialize)]
struct MultiPeakSummary {
    c_star: f64,
    a_total: f64,
    masses: Vec<f64>,
    b: Vec<Vec<f64>>,
    root_mismatch: f64,
    eps: Vec<f64>,
    phi_ratio: Vec<Option<f64>>,
    drift: Vec<Option<Vec<f64>>>,
    failed: usize,
}

fn run_multipeak(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let ve = cfg.potential();
    let grad = ve.gradient(cfg.dim);
    let v: Field = Arc::new(move |x: &[f64]| ve.eval(x));
    let mp = &cfg.multipeak;
    let spec = build_multi_peak_spec(
        v.clone(),
        Arc::new(move |x: &[f64]| grad.iter().map(|g| g.eval(x)).collect()),
        cfg.p,
        mp.peaks.clone(),
        &m,
        mp.alpha,
    )?;
    let opts = MultiPeakOptions {
        polish: mp.polish,
        cells_per_delta: mp.cells_per_delta,
        margin: mp.margin,
        ..MultiPeakOptions::default()
    };
    let eps = cfg.eps_list();
    let rows: Vec<_> = eps.par_iter().map(|&e| build_multi_peak(&spec, e, None, &opts)).collect();
    let k = spec.k();

    let mut cols: Vec<(String, ColumnKind)> = ["eps", "c_star", "phi_norm", "phi_ratio", "residual_max"]
        .iter()
        .map(|n| (n.to_string(), ColumnKind::Float))
        .collect();
    cols.push(("iterations".into(), ColumnKind::Int));
    cols.extend((1..=k).map(|j| (format!("center_{j}"), ColumnKind::Float)));
    cols.extend((1..=k).map(|j| (format!("drift_{j}"), ColumnKind::Float)));
    cols.push(("status".into(), ColumnKind::Text));
    cols.push(("error".into(), ColumnKind::Text));
    let col_refs: Vec<(&str, ColumnKind)> = cols.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let mut t = base_table(Table::new(&col_refs), cfg).meta("peaks", format!("{:?}", mp.peaks));

    let mut phi_ratio = Vec::new();
    let mut drift = Vec::new();
    for (i, (e, r)) in eps.iter().zip(&rows).enumerate() {
        let (status, error) = text_status(r);
        let Ok(sol) = r else {
            let mut row: Vec<Cell> = vec![(*e).into()];
            row.extend((0..4).map(|_| Cell::from(f64::NAN)));
            row.push(Cell::Int(-1));
            row.extend((0..2 * k).map(|_| Cell::from(f64::NAN)));
            row.extend([status, error]);
            t.push(row);
            phi_ratio.push(None);
            drift.push(None);
            continue;
        };
        let corr = correction_norm(sol, &spec.v).ok();
        let d: Vec<f64> = sol
            .centers
            .iter()
            .zip(&spec.peaks)
            .map(|(c, q)| (c - q[0]).abs() / e)
            .collect();
        let mut row: Vec<Cell> = vec![
            (*e).into(),
            sol.c_star.into(),
            corr.map(|c| c.norm).into(),
            corr.map(|c| c.ratio).into(),
            sol.residual.max.into(),
            sol.iterations.into(),
        ];
        row.extend(sol.centers.iter().map(|c| Cell::from(*c)));
        row.extend(d.iter().map(|c| Cell::from(*c)));
        row.extend([status, error]);
        t.push(row);
        phi_ratio.push(corr.map(|c| c.ratio));
        drift.push(Some(d));

        let mut prof = base_table(Table::floats(&["x", "u", "ansatz", "correction"]), cfg).meta("eps", fmt_f(*e));
        let nodes = sol.profile.grid.nodes();
        for (j, x) in nodes.iter().enumerate() {
            let phi = sol.correction.as_ref().map(|c| c[j]);
            prof.push(vec![(*x).into(), sol.profile.values[j].into(), sol.ansatz[j].into(), phi.into()]);
        }
        art.table(&format!("multipeak_profile_{i}.csv"), &prof)?;
    }
    art.table("multipeak.csv", &t)?;
    let sys = system_residual(&spec, None)?;
    let failed = rows.iter().filter(|r| r.is_err()).count();
    let summary = MultiPeakSummary {
        c_star: spec.c_star,
        a_total: spec.a_total,
        masses: spec.masses.clone(),
        b: spec.b.clone(),
        root_mismatch: sys.root_mismatch,
        eps: eps.clone(),
        phi_ratio,
        drift,
        failed,
    };
    art.json("multipeak.json", &summary, &["c_star", "a_total", "eps", "phi_ratio", "drift"])?;
    art.check(Check::at_most("root_mismatch", sys.root_mismatch, 1e-10));
    art.check(Check::new("rows_ok", failed == 0, Some(failed as f64), format!("{failed} of {} rows failed", rows.len())));
    Ok(())
}

fn threshold(cfg: &ExperimentConfig) -> Result<ThresholdReport, Error> {
    let ne = &cfg.nonexistence;
    v0_threshold(&cfg.kirchhoff(), cfg.dim, cfg.p, ne.eta, ne.c_eta, &SigmaOptions::default(), cfg.seed)
}

fn run_threshold(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let r = threshold(cfg)?;
    art.json("threshold.json", &r, &["sigma", "c_ell", "v0_bound", "q_y"])?;
    let mut t = base_table(
        Table::new(&[("index", ColumnKind::Int), ("ratio", ColumnKind::Float)]),
        cfg,
    )
    .meta("C_l", fmt_f(r.c_ell));
    for (i, x) in r.gn.battery.iter().enumerate() {
        t.push(vec![i.into(), (*x).into()]);
    }
    art.table("battery.csv", &t)?;
    let m = cfg.kirchhoff();
    let power = 2.0 / (cfg.dim as f64 - 2.0);
    let mut s = base_table(Table::floats(&["t", "M_over_power"]), cfg).meta("sigma", fmt_f(r.sigma));
    for x in log_space(1e-4, 1e4, 400) {
        s.push(vec![x.into(), (m.eval(x) / x.powf(power)).into()]);
    }
    art.table("sigma_profile.csv", &s)?;
    art.check(Check::new("sigma_positive", r.sigma_report.hypothesis_holds, Some(r.sigma), r.sigma_report.detail.clone()));
    art.check(Check::at_most("battery", r.gn.max_ratio / r.c_ell, 1.0 + 1e-6));
    art.check(Check::at_most("scaling_invariance", r.gn.scaling_defect, 1e-8));
    Ok(())
}

#[derive(Serialize)]
struct ProbeSummary {
    v0_bound: Option<f64>,
    sigma: Option<f64>,
    c_ell: Option<f64>,
    potentials: Vec<f64>,
    collapsed: Vec<usize>,
    nontrivial: Vec<usize>,
    trials: usize,
    seeded: Vec<f64>,
    seeded_nontrivial: Vec<bool>,
}

fn outcome_name(o: ProbeOutcome) -> &'static str {
    match o {
        ProbeOutcome::Collapsed => "collapsed",
        ProbeOutcome::Nontrivial => "nontrivial",
        ProbeOutcome::Stalled => "stalled",
    }
}

fn run_probe(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let m = cfg.kirchhoff();
    let ne = &cfg.nonexistence;
    let report = match threshold(cfg) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("no threshold available: {e}");
            None
        }
    };
    let bound = report.as_ref().map(|r| r.v0_bound);
    let potentials = if ne.v.is_empty() {
        match bound {
            Some(b) if ne.trials > 0 => vec![2.0 * b],
            _ => Vec::new(),
        }
    } else {
        ne.v.clone()
    };
    let opts = ProbeOptions {
        dim: cfg.dim,
        chain: report.as_ref().map(|r| (r.sigma, r.c_ell, r.eta)),
        ..ProbeOptions::default()
    };
    let mut t = base_table(
        Table::new(&[
            ("v", ColumnKind::Float),
            ("trial", ColumnKind::Int),
            ("seed", ColumnKind::Int),
            ("amplitude", ColumnKind::Float),
            ("width", ColumnKind::Float),
            ("final_norm", ColumnKind::Float),
            ("residual", ColumnKind::Float),
            ("iterations", ColumnKind::Int),
            ("outcome", ColumnKind::Text),
            ("chain_lhs", ColumnKind::Float),
            ("chain_rhs", ColumnKind::Float),
        ]),
        cfg,
    );
    if let Some(b) = bound {
        t = t.meta("v0_bound", fmt_f(b));
    }
    let mut collapsed = Vec::new();
    let mut nontrivial = Vec::new();
    let mut chain_ok = true;
    for &v in &potentials {
        let p = probe_nonexistence(&m, v, cfg.p, ne.trials, cfg.seed, &opts)?;
        for tr in &p.trials {
            chain_ok &= tr.chain.map_or(true, |c| c.holds);
            t.push(vec![
                v.into(),
                tr.trial.into(),
                tr.seed.into(),
                tr.amplitude.into(),
                tr.width.into(),
                tr.final_norm.into(),
                tr.residual.into(),
                tr.iterations.into(),
                outcome_name(tr.outcome).into(),
                tr.chain.map(|c| c.lhs).into(),
                tr.chain.map(|c| c.rhs).into(),
            ]);
        }
        if let Some(b) = bound {
            if v > b {
                art.check(Check::new(
                    format!("collapse_above_threshold_v={}", fmt_f(v)),
                    p.collapsed() == p.trials.len(),
                    Some(p.collapsed() as f64),
                    format!("{} of {} trials collapsed", p.collapsed(), p.trials.len()),
                ));
            }
        }
        collapsed.push(p.collapsed());
        nontrivial.push(p.nontrivial());
    }
    art.table("probe.csv", &t)?;
    if !potentials.is_empty() {
        art.check(Check::new("energy_chain", chain_ok, None, "inequality chain on every nontrivial find"));
    }

    let mut s = base_table(
        Table::new(&[
            ("v", ColumnKind::Float),
            ("delta", ColumnKind::Float),
            ("final_norm", ColumnKind::Float),
            ("residual", ColumnKind::Float),
            ("outcome", ColumnKind::Text),
            ("error", ColumnKind::Text),
        ]),
        cfg,
    );
    let mut seeded_nontrivial = Vec::new();
    for &v in &ne.seeded {
        let sp = probe_seeded(&m, v, cfg.p, &opts)?;
        let tr = sp.trial.as_ref();
        let outcome = tr.map_or("no_seed", |t| outcome_name(t.outcome));
        s.push(vec![
            v.into(),
            sp.delta.into(),
            tr.map(|t| t.final_norm).into(),
            tr.map(|t| t.residual).into(),
            outcome.into(),
            sp.seed_error.clone().unwrap_or_default().into(),
        ]);
        art.check(Check::new(
            format!("seeded_nontrivial_v={}", fmt_f(v)),
            sp.found_nontrivial(),
            tr.map(|t| t.final_norm),
            sp.seed_error.clone().unwrap_or_else(|| format!("outcome {outcome}")),
        ));
        seeded_nontrivial.push(sp.found_nontrivial());
    }
    if !ne.seeded.is_empty() {
        art.table("seeded.csv", &s)?;
    }
    let summary = ProbeSummary {
        v0_bound: bound,
        sigma: report.as_ref().map(|r| r.sigma),
        c_ell: report.as_ref().map(|r| r.c_ell),
        potentials,
        collapsed,
        nontrivial,
        trials: ne.trials,
        seeded: ne.seeded.clone(),
        seeded_nontrivial,
    };
    art.json("probe.json", &summary, &["v0_bound", "potentials", "collapsed"])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (RunOutcome, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::from_toml_str(text).unwrap();
        cfg.out = dir.path().join("out");
        (run_experiment(&cfg, Some(2)), dir)
    }

    #[test]
    fn identity_sweep_exits_zero() {
        let (out, _d) = run("experiment = \"single_peak_sweep\"\n");
        assert_eq!(out.exit_code, 0, "{:?}", out.manifest);
        let text = std::fs::read_to_string(out.dir.join("sweep.csv")).unwrap();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec.unwrap();
            assert_eq!(rec[1].parse::<f64>().unwrap(), rec[0].parse::<f64>().unwrap());
        }
    }

    #[test]
    fn roots_with_two_positive_roots() {
        let (out, _d) = run("experiment = \"roots\"\ndim = 5\n[m]\nkind = \"affine\"\na = 0.05\nb = 1.0\n[roots]\na = 1.0\n");
        assert_eq!(out.exit_code, 0, "{:?}", out.manifest);
        let rows = validate_csv(&out.dir.join("roots.csv"), &Table::new(&[("index", ColumnKind::Int), ("t", ColumnKind::Float), ("G", ColumnKind::Float)]).columns).unwrap();
        assert_eq!(rows, 2);
    }

    #[test]
    fn module_error_is_recorded() {
        let (out, _d) = run("experiment = \"multipeak_sweep\"\nv = \"1 + x^2\"\n[multipeak]\npeaks = [[0.5]]\n");
        assert_eq!(out.exit_code, 1);
        let e = out.manifest.error.unwrap();
        assert_eq!(e.kind, "not_critical");
        assert!(out.dir.join("manifest.json").exists());
    }

    #[test]
    fn failed_rows_are_marked() {
        let (out, _d) = run("experiment = \"delta_eps\"\ndim = 3\n[m]\nkind = \"constant\"\nc = -1.0\n");
        assert_eq!(out.exit_code, 1);
        assert!(out.manifest.error.is_none());
        let text = std::fs::read_to_string(out.dir.join("delta_eps.csv")).unwrap();
        assert_eq!(text.matches(",failed,").count(), 3, "{text}");
    }

    #[test]
    fn closed_form_matches_sech() {
        assert!((closed_form_1d(1.0, 4.0, 0.3) - 2f64.sqrt() / 0.3f64.cosh()).abs() < 1e-15);
    }
}
