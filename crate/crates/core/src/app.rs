//! Command orchestration: configuration, artifacts and exit statuses.
//!
//! A run is described by a plain-text `key=value` file with sections:
//!
//! ```text
//! [map]
//! family = henon
//! a = 6.0
//! b = 0.8
//!
//! [orbits]
//! period_max = 10
//!
//! [render]
//! window = -4,-4,4,4
//! out = fig.svg
//! ```
//!
//! Keys outside any section belong to `[map]`. Command-line options take
//! precedence over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::greens::{classify_grid, filtration_radius, GridOptions, Rect};
use crate::manifold::{local_chart, normalize, one_sided_test, trace, traces_csv, zero_tolerance, ManifoldKind, OneSidedResult, StepControl, DEFAULT_ORDER, SADDLE_EXCLUSION};
use crate::map::{parse_key_values, Point2, PolyDiffeo};
use crate::periodic::{orbits_csv, select_by_code, select_fixed_point, SymbolCode};
use crate::render::{render_scene, SceneWarning};
use crate::tangency::{events_jsonl, hunt_boundary, scan_window, HuntOptions, SaddleSelector, TangencyError};
use crate::verify::{bounds_check, maxent_check, verify, Status, VerifyOptions, NEAR_GAP};
use crate::greens::GreenSolver;

/// Exit code for usage and configuration errors.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("{0}")]
    Map(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Orbits,
    Manifolds,
    Render,
    TangencyHunt,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Orbits => "orbits",
            Command::Manifolds => "manifolds",
            Command::Render => "render",
            Command::TangencyHunt => "tangency-hunt",
            Command::Verify => "verify",
        }
    }

    fn section(self) -> &'static str {
        match self {
            Command::TangencyHunt => "tangency",
            c => c.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SaddleChoice {
    Plus,
    Minus,
    Code(String),
}

impl SaddleChoice {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "plus" | "p+" => Ok(SaddleChoice::Plus),
            "minus" | "p-" => Ok(SaddleChoice::Minus),
            c if !c.is_empty() && c.chars().all(|ch| ch == '+' || ch == '-' || ch.is_ascii_digit()) => Ok(SaddleChoice::Code(c.to_string())),
            other => Err(ConfigError::Value {
                key: "saddle".into(),
                value: other.into(),
            }),
        }
    }
}

/// Everything a command needs; built from a config file and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Absent only for `tangency-hunt`, which builds its own maps.
    pub map: Option<PolyDiffeo>,
    pub period_max: usize,
    pub saddle: SaddleChoice,
    pub budget: f64,
    pub extent_domains: i32,
    pub max_step: f64,
    pub window: Option<Rect>,
    pub resolution: usize,
    pub b: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub out_dir: PathBuf,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub cantor_resolutions: Vec<usize>,
    pub eta: f64,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            map: None,
            period_max: if command == Command::Analyze { 6 } else { 10 },
            saddle: SaddleChoice::Plus,
            budget: 200.0,
            extent_domains: 7,
            max_step: 1e-2,
            window: None,
            resolution: 256,
            b: 0.8,
            a_lo: 4.0,
            a_hi: 6.0,
            out_dir: PathBuf::from("."),
            out: None,
            report: None,
            cantor_resolutions: vec![64, 128, 256, 512],
            eta: 1e-9,
        }
    }

    /// Parse a config file's text for `command`, then apply `overrides`
    /// (`key=value` pairs as given on the command line).
    pub fn from_text(command: Command, text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let kv = parse_key_values(text).map_err(ConfigError::Parse)?;
        let mut cfg = RunConfig::defaults(command);
        let has_map = kv.iter().any(|(k, _)| k == "family");
        if has_map {
            cfg.map = Some(PolyDiffeo::from_key_values(&kv).map_err(|e| ConfigError::Map(e.to_string()))?);
        }
        let section = command.section();
        let mut settings: Vec<(String, String)> = Vec::new();
        for (k, v) in &kv {
            if let Some(rest) = k.strip_prefix(&format!("{section}.")) {
                settings.push((rest.to_string(), v.clone()));
            } else if let Some(rest) = k.strip_prefix("output.") {
                settings.push((rest.to_string(), v.clone()));
            }
        }
        settings.extend(overrides.iter().cloned());
        for (k, v) in &settings {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(command: Command, path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| ConfigError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?,
            None => String::new(),
        };
        Self::from_text(command, &text, overrides)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
        };
        let float = || value.trim().parse::<f64>().map_err(|_| bad());
        let int = || value.trim().parse::<usize>().map_err(|_| bad());
        match key.replace('-', "_").as_str() {
            "period_max" | "n_max" => self.period_max = int()?,
            "saddle" => self.saddle = SaddleChoice::parse(value)?,
            "budget" => self.budget = float()?,
            "domains" => self.extent_domains = int()? as i32,
            "max_step" => self.max_step = float()?,
            "window" => {
                let v: Vec<f64> = value.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
                if v.len() != 4 {
                    return Err(bad());
                }
                self.window = Some(Rect::new(v[0], v[1], v[2], v[3]));
            }
            "resolution" => self.resolution = int()?,
            "b" => self.b = float()?,
            "a_lo" => self.a_lo = float()?,
            "a_hi" => self.a_hi = float()?,
            "dir" | "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "report" => self.report = Some(PathBuf::from(value.trim())),
            "eta" => self.eta = float()?,
            "resolutions" => {
                self.cantor_resolutions = value.split(',').map(|s| s.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad())?;
            }
            _ => {
                return Err(ConfigError::Parse(format!("unknown setting `{key}` for {}", self.command.name())));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |k: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Value {
                    key: k.into(),
                    value: v.to_string(),
                })
            }
        };
        positive("budget", self.budget)?;
        positive("max_step", self.max_step)?;
        positive("eta", self.eta)?;
        if self.period_max == 0 {
            return Err(ConfigError::Value {
                key: "period_max".into(),
                value: "0".into(),
            });
        }
        if self.resolution == 0 || self.cantor_resolutions.is_empty() || self.cantor_resolutions.contains(&0) {
            return Err(ConfigError::Value {
                key: "resolution".into(),
                value: "0".into(),
            });
        }
        if self.command == Command::TangencyHunt {
            if !(self.a_lo < self.a_hi) {
                return Err(ConfigError::Value {
                    key: "a_lo".into(),
                    value: format!("{} (not below a_hi = {})", self.a_lo, self.a_hi),
                });
            }
        } else {
            let f = self.map.as_ref().ok_or_else(|| ConfigError::Map("no map specified (use --map)".into()))?;
            if let Some(w) = &self.window {
                if !(w.x0 < w.x1 && w.y0 < w.y1) {
                    return Err(ConfigError::Value {
                        key: "window".into(),
                        value: format!("{w:?}"),
                    });
                }
                let v = filtration_radius(f).map_err(|e| ConfigError::Map(e.to_string()))?.rect();
                if !v.contains_rect(w) {
                    return Err(ConfigError::Value {
                        key: "window".into(),
                        value: format!("[{}, {}]x[{}, {}] is not inside V = [{}, {}]^2", w.x0, w.x1, w.y0, w.y1, v.x0, v.x1),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Result of a command: exit code, artifacts written and a summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Compute(_) => Status::Inconclusive.exit_code(),
        }
    }
}

fn compute<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Compute(e.to_string())
}

fn progress(msg: &str) {
    eprintln!("[saddlescope] {msg}");
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &Path, contents: &str) -> Result<(), RunError> {
        let path = if name.is_absolute() { name.to_path_buf() } else { self.dir.join(name) };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn io_err(p: &Path, e: std::io::Error) -> RunError {
    RunError::Config(ConfigError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

/// Execute the configured command.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut w = Writer {
        dir: &cfg.out_dir,
        written: Vec::new(),
    };
    let (status, summary) = match cfg.command {
        Command::Analyze => analyze(cfg, &mut w)?,
        Command::Orbits => orbits(cfg, &mut w)?,
        Command::Manifolds => manifolds(cfg, &mut w)?,
        Command::Render => render(cfg, &mut w)?,
        Command::TangencyHunt => hunt(cfg, &mut w)?,
        Command::Verify => run_verify(cfg, &mut w)?,
    };
    Ok(Outcome {
        status,
        artifacts: w.written,
        summary,
    })
}

fn the_map(cfg: &RunConfig) -> &PolyDiffeo {
    cfg.map.as_ref().expect("validated config carries a map")
}

fn selector(f: &PolyDiffeo, choice: &SaddleChoice) -> Result<SaddleSelector, RunError> {
    Ok(match choice {
        SaddleChoice::Plus => SaddleSelector::Plus,
        SaddleChoice::Minus => SaddleSelector::Minus,
        SaddleChoice::Code(c) => {
            let code = SymbolCode::parse(c, f.degree() as u16).ok_or_else(|| ConfigError::Value {
                key: "saddle".into(),
                value: c.clone(),
            })?;
            SaddleSelector::Codes(code.clone(), code)
        }
    })
}

#[derive(Serialize)]
struct Analysis {
    map: String,
    degree: usize,
    jacobian: f64,
    epsilon: i8,
    filtration_radius: f64,
    fixed_points: Vec<(String, Point2, f64, f64)>,
    counts: Vec<(usize, usize, u64)>,
    grid_resolution: usize,
    grid_counts: Vec<(String, usize)>,
}

fn analyze(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    let f = the_map(cfg);
    let filt = filtration_radius(f).map_err(compute)?;
    progress(&format!("census up to period {}", cfg.period_max));
    let (census, points) = maxent_check(f, cfg.period_max);
    progress(&format!("classifying {0}x{0} grid", cfg.resolution));
    let grid = classify_grid(
        f,
        filt.rect(),
        &GridOptions {
            resolution: cfg.resolution,
            ..Default::default()
        },
    )
    .map_err(compute)?;
    use crate::greens::CellClass::*;
    let analysis = Analysis {
        map: f.to_string(),
        degree: f.degree(),
        jacobian: f.det(),
        epsilon: f.epsilon().sign(),
        filtration_radius: filt.radius,
        fixed_points: points.iter().filter(|p| p.period_n == 1).map(|p| (p.code.to_string(), p.point, p.lambda_u, p.lambda_s)).collect(),
        counts: census.rows.iter().map(|r| (r.n, r.real, r.expected)).collect(),
        grid_resolution: cfg.resolution,
        grid_counts: [K, KPlus, KMinus, EscapesBoth, Undecided].iter().map(|c| (c.label().to_string(), grid.count(*c))).collect(),
    };
    w.write(Path::new("analysis.json"), &to_json(&analysis))?;
    w.write(Path::new("grid.rle"), &grid.to_rle())?;
    let summary = format!(
        "{}: degree {}, det {}, R = {}\nperiodic counts {:?}\nK cells {} of {}\ncensus: {}\n",
        f,
        f.degree(),
        f.det(),
        filt.radius,
        census.rows.iter().map(|r| r.real).collect::<Vec<_>>(),
        grid.count(K),
        grid.classes.len(),
        census.status.label()
    );
    Ok((census.status, summary))
}

fn orbits(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    let f = the_map(cfg);
    progress(&format!("census up to period {}", cfg.period_max));
    let (census, points) = maxent_check(f, cfg.period_max);
    let bounds = bounds_check(&points, f.degree());
    w.write(Path::new("orbits.csv"), &orbits_csv(&points))?;
    w.write(Path::new("bounds.json"), &to_json(&serde_json::json!({ "census": census, "bounds": bounds })))?;
    let mut summary = String::new();
    for r in &census.rows {
        summary.push_str(&format!("n={:<3} real={:<6} expected={}\n", r.n, r.real, r.expected));
    }
    summary.push_str(&format!("max residual {:e}\nbounds: {} (min margin {:.4})\n", census.max_residual, bounds.status.label(), bounds.min_margin));
    if let Some(wit) = census.witness.as_ref().or(bounds.witness.as_ref()) {
        summary.push_str(&format!("witness: {wit}\n"));
    }
    Ok((census.status.and(bounds.status), summary))
}

#[derive(Serialize)]
struct ManifoldReport {
    saddle: String,
    point: Point2,
    lambda_u: f64,
    lambda_s: f64,
    unstable: ChartInfo,
    stable: ChartInfo,
}

#[derive(Serialize)]
struct ChartInfo {
    scale: f64,
    rho: f64,
    residual: f64,
    one_sided: OneSidedResult,
}

fn manifolds(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    let f = the_map(cfg);
    let p = match &cfg.saddle {
        SaddleChoice::Plus => select_fixed_point(f, true),
        SaddleChoice::Minus => select_fixed_point(f, false),
        SaddleChoice::Code(c) => {
            let code = SymbolCode::parse(c, f.degree() as u16).ok_or_else(|| ConfigError::Value {
                key: "saddle".into(),
                value: c.clone(),
            })?;
            select_by_code(f, &code)
        }
    }
    .map_err(compute)?;
    let solver = GreenSolver::new(f).map_err(compute)?.with_n_max(300);
    let eta = zero_tolerance(f, &solver, cfg.eta);
    let window = cfg.window.unwrap_or(solver.filtration().rect());
    let ctl = StepControl {
        max_step: cfg.max_step,
        window: Some(window),
        ..Default::default()
    };
    let mut infos = Vec::new();
    let mut status = Status::Pass;
    for kind in [ManifoldKind::Unstable, ManifoldKind::Stable] {
        progress(&format!("{} manifold of {}", kind.label(), p.code));
        let raw = local_chart(f, &p, kind, DEFAULT_ORDER).map_err(compute)?;
        let chart = normalize(&raw, &solver).map_err(compute)?;
        let z0 = chart.radius_for_distance(1.0, SADDLE_EXCLUSION).map_err(compute)?;
        let extent = z0 * chart.mu.abs().powi(cfg.extent_domains);
        let arcs = trace(&chart, extent, cfg.budget, &ctl).map_err(compute)?;
        w.write(Path::new(&format!("{}.csv", kind.label())), &traces_csv(&arcs))?;
        let os = one_sided_test(&chart, &solver, 0.0, eta).map_err(compute)?;
        if os.verdict == crate::manifold::Sidedness::Inconclusive {
            status = Status::Inconclusive;
        }
        infos.push(ChartInfo {
            scale: chart.scale,
            rho: chart.rho,
            residual: chart.residual,
            one_sided: os,
        });
    }
    let stable = infos.pop().expect("two charts");
    let unstable = infos.pop().expect("two charts");
    let summary = format!(
        "saddle {} at ({}, {}), lambda_u = {}, lambda_s = {}\nunstable: {}\nstable: {}\n",
        p.code,
        p.point.x,
        p.point.y,
        p.lambda_u,
        p.lambda_s,
        unstable.one_sided.verdict.label(),
        stable.one_sided.verdict.label()
    );
    let report = ManifoldReport {
        saddle: p.code.to_string(),
        point: p.point,
        lambda_u: p.lambda_u,
        lambda_s: p.lambda_s,
        unstable,
        stable,
    };
    w.write(Path::new("manifolds.json"), &to_json(&report))?;
    Ok((status, summary))
}

fn render(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    let f = the_map(cfg);
    let v = filtration_radius(f).map_err(compute)?.rect();
    let window = cfg.window.unwrap_or(v);
    let sel = selector(f, &cfg.saddle)?;
    progress("tracing manifolds and locating contacts");
    let opts = HuntOptions {
        max_step: cfg.max_step.min(window.width() / 400.0),
        domains_u: cfg.extent_domains,
        domains_s: cfg.extent_domains - 1,
        ..Default::default()
    };
    let mut scan = scan_window(f, &sel, &v, NEAR_GAP, &opts).map_err(compute)?;
    scan.transverse.retain(|e| window.contains(&e.point));
    scan.tangencies.retain(|t| window.contains(&t.intersection.point));
    progress(&format!("classifying {0}x{0} grid", cfg.resolution));
    let grid = classify_grid(
        f,
        v,
        &GridOptions {
            resolution: cfg.resolution,
            ..Default::default()
        },
    )
    .map_err(compute)?;
    let mut saddles = vec![scan.unstable[0].chart.saddle.point];
    let sp = scan.stable[0].chart.saddle.point;
    if sp != saddles[0] {
        saddles.push(sp);
    }
    let arcs: Vec<_> = scan.unstable.iter().chain(&scan.stable).cloned().collect();
    let scene = render_scene(&arcs, &scan.tangencies, &saddles, Some(grid), window);
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("figure.svg"));
    w.write(&out, &scene.to_svg())?;
    w.write(Path::new("events.jsonl"), &events_jsonl(&scan.transverse, &scan.tangencies, f.henon_params()))?;
    let mut summary = format!(
        "{} polylines, {} transverse intersections, {} tangencies\n",
        scene.polylines.len(),
        scan.transverse.len(),
        scan.tangencies.len()
    );
    let mut status = Status::Pass;
    for warning in scene.warnings() {
        if warning == SceneWarning::EmptyScene {
            summary.push_str("warning: empty scene, nothing intersects the window\n");
            status = Status::Inconclusive;
        }
    }
    Ok((status, summary))
}

fn hunt(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    progress(&format!("scanning a in [{}, {}] at b = {}", cfg.a_lo, cfg.a_hi, cfg.b));
    let sel = match &cfg.saddle {
        SaddleChoice::Plus => SaddleSelector::Plus,
        SaddleChoice::Minus => SaddleSelector::Minus,
        SaddleChoice::Code(c) => {
            let code = SymbolCode::parse(c, 2).ok_or_else(|| ConfigError::Value {
                key: "saddle".into(),
                value: c.clone(),
            })?;
            SaddleSelector::Codes(code.clone(), code)
        }
    };
    match hunt_boundary(cfg.b, cfg.a_lo, cfg.a_hi, &sel, &HuntOptions::default()) {
        Ok(r) => {
            w.write(Path::new("events.jsonl"), &events_jsonl(&[], std::slice::from_ref(&r.event), None))?;
            w.write(Path::new("hunt.json"), &to_json(&r))?;
            let e = &r.event;
            Ok((
                Status::Pass,
                format!(
                    "a* = {:.10} (bracket {:.1e})\ntangency at ({}, {}), zeta_u = {}, zeta_s = {}\ncurvatures {} and {}\n",
                    r.a_star,
                    r.bracket_widths.last().copied().unwrap_or(f64::NAN),
                    e.intersection.point.x,
                    e.intersection.point.y,
                    e.intersection.zeta_u,
                    e.intersection.zeta_s,
                    e.curvature_u,
                    e.curvature_s
                ),
            ))
        }
        Err(e @ (TangencyError::BadBracket(_) | TangencyError::DegenerateContact { .. })) => Ok((Status::Fail, format!("{e}\n"))),
        Err(e) => Ok((Status::Inconclusive, format!("{e}\n"))),
    }
}

fn run_verify(cfg: &RunConfig, w: &mut Writer) -> Result<(Status, String), RunError> {
    let f = the_map(cfg);
    progress("running checks");
    let opts = VerifyOptions {
        period_max: cfg.period_max,
        cantor_resolutions: cfg.cantor_resolutions.clone(),
        ..Default::default()
    };
    let report = verify(f, &opts);
    let out = cfg.report.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    w.write(&out, &to_json(&report))?;
    Ok((report.status, report.summary()))
}
