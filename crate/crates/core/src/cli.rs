//! Scenario-file driven experiment runner.
//!
//! A scenario is a TOML file:
//!
//! ```toml
//! output_dir = "out"            # optional, `--out` wins
//!
//! [domain]
//! kind = "rectangle"            # or "interval"
//! lengths = [1.0, 1.0]
//! diffusivity = 1.0
//! grid_resolution = 33
//! mode_count = 4                # modes per axis
//!
//! [[sensors]]
//! kind = "pointwise"            # pointwise | zone | boundary_pointwise | boundary_zone
//! location = [0.31, 0.17]
//! # zone:          support = [[0.1, 0.3], [0.2, 0.4]]
//! # boundary_zone: edge = "top", interval = [0.25, 0.75]
//!
//! [[regions]]                   # innermost first; each contained in the next
//! label = "gamma1"
//! pieces = [{ edge = "bottom", interval = [0.0, 0.5] }]
//!
//! [[regions]]
//! label = "boundary"
//! full = true
//!
//! [time]
//! horizon = 0.1
//! steps = 100
//!
//! [observability]
//! threshold = 1e-8
//!
//! [observer]
//! method = "modal_shift"        # or "scaled_adjoint"
//! sigma_target = 1.0
//! horizon = 5.0
//! steps = 500
//! region = "gamma1"             # defaults to the first region
//!
//! [reconstruction]
//! regularization = 1e-10
//! trials = 50
//! seed = 1
//! sweep = [[0.1, 0.5], [0.2, 0.5]]   # optional sensor locations
//! ```
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation errors, 2 for command-line or configuration errors.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::csv;
use crate::observability::{
    forward_k, is_gamma_detectable, is_gamma_observable, omega_recoverability, ObservabilityProblem,
};
use crate::observer::{
    design_gain, error_trajectory, fit_exponential_decay, plant_output, simulate_observer,
    simulate_plant, verify_observer_identities, DesignMethod, ObserverSystem,
};
use crate::pde::{
    build_basis, semigroup_apply, BoundaryRegion, DomainSpec, Edge, PieceSpec, SpectralBasis,
};
use crate::reconstruction::{
    evaluate_reconstruction, monotonicity_experiment, random_initial_state, sensor_sweep,
    ReconstructionProblem,
};
use crate::sensing::SensorSpec;

#[derive(Debug, Parser)]
#[command(
    name = "regobs",
    version,
    about = "Regional boundary observation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a seeded initial state and record the sensor outputs.
    Simulate(Common),
    /// Gramian spectrum and region observability verdicts.
    Observability(Common),
    /// Design a gain, run the identity observer and fit the error decay.
    Observer(Common),
    /// Reconstruct a seeded initial state and evaluate the region errors.
    Reconstruct(Common),
    /// Repeat reconstructions and check the region-nesting order of the errors.
    Monotonicity(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides `reconstruction.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count (overrides `reconstruction.trials`).
    #[arg(long)]
    trials: Option<usize>,
    /// Do not echo the report.
    #[arg(long)]
    quiet: bool,
}

/// A configuration problem, located by its field path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(path: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: RawDomain,
    sensors: Vec<RawSensor>,
    #[serde(default)]
    regions: Vec<RawRegion>,
    time: RawTime,
    #[serde(default)]
    observability: RawObservability,
    #[serde(default)]
    observer: RawObserver,
    #[serde(default)]
    reconstruction: RawReconstruction,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    kind: String,
    lengths: Vec<f64>,
    #[serde(default = "one")]
    diffusivity: f64,
    grid_resolution: usize,
    mode_count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    kind: String,
    location: Option<Vec<f64>>,
    support: Option<Vec<[f64; 2]>>,
    edge: Option<String>,
    interval: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    label: String,
    #[serde(default)]
    full: bool,
    #[serde(default)]
    pieces: Vec<RawPiece>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    edge: String,
    interval: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    horizon: f64,
    steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservability {
    #[serde(default = "default_threshold")]
    threshold: f64,
}

impl Default for RawObservability {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    #[serde(default = "default_method")]
    method: String,
    #[serde(default = "one")]
    sigma_target: f64,
    horizon: Option<f64>,
    steps: Option<usize>,
    region: Option<String>,
}

impl Default for RawObserver {
    fn default() -> Self {
        Self {
            method: default_method(),
            sigma_target: 1.0,
            horizon: None,
            steps: None,
            region: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReconstruction {
    #[serde(default = "default_regularization")]
    regularization: f64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    sweep: Vec<Vec<f64>>,
}

impl Default for RawReconstruction {
    fn default() -> Self {
        Self {
            regularization: default_regularization(),
            trials: default_trials(),
            seed: 0,
            sweep: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    crate::observability::DEFAULT_THRESHOLD
}

fn default_method() -> String {
    "modal_shift".into()
}

fn default_regularization() -> f64 {
    crate::reconstruction::DEFAULT_REGULARIZATION
}

fn default_trials() -> usize {
    50
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub basis: Arc<SpectralBasis>,
    pub sensors: Vec<SensorSpec>,
    /// Nested regions, innermost first.
    pub regions: Vec<Arc<BoundaryRegion>>,
    pub horizon: f64,
    pub steps: usize,
    pub threshold: f64,
    pub observer_method: DesignMethod,
    pub sigma_target: f64,
    pub observer_horizon: f64,
    pub observer_steps: usize,
    /// Index into `regions`.
    pub observer_region: usize,
    pub regularization: f64,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Vec<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
}

fn parse_edge(s: &str) -> Option<Edge> {
    match s {
        "left" => Some(Edge::Left),
        "right" => Some(Edge::Right),
        "bottom" => Some(Edge::Bottom),
        "top" => Some(Edge::Top),
        _ => None,
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(path, format!("must be positive, got {v}")))
    }
}

/// Parses and validates a scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err("", e.message()))?;

    let d = &raw.domain;
    let domain = match d.kind.as_str() {
        "interval" => {
            if d.lengths.len() != 1 {
                return Err(cfg_err("domain.lengths", "an interval takes one length"));
            }
            DomainSpec::interval(d.lengths[0], d.diffusivity, d.grid_resolution)
        }
        "rectangle" => {
            if d.lengths.len() != 2 {
                return Err(cfg_err("domain.lengths", "a rectangle takes two lengths"));
            }
            DomainSpec::rectangle(d.lengths[0], d.lengths[1], d.diffusivity, d.grid_resolution)
        }
        other => {
            return Err(cfg_err(
                "domain.kind",
                format!("unknown kind `{other}` (expected interval or rectangle)"),
            ))
        }
    }
    .map_err(|e| cfg_err("domain", e))?;
    let basis = Arc::new(
        build_basis(domain.clone(), d.mode_count).map_err(|e| cfg_err("domain.mode_count", e))?,
    );

    if raw.sensors.is_empty() {
        return Err(cfg_err("sensors", "at least one sensor is required"));
    }
    let sensors = raw
        .sensors
        .iter()
        .enumerate()
        .map(|(i, s)| parse_sensor(&format!("sensors[{i}]"), s, &domain))
        .collect::<Result<Vec<_>, _>>()?;

    let mut regions = Vec::new();
    for (i, r) in raw.regions.iter().enumerate() {
        regions.push(Arc::new(parse_region(
            &format!("regions[{i}]"),
            r,
            &domain,
        )?));
    }
    if regions.is_empty() {
        regions.push(Arc::new(BoundaryRegion::full(&domain)));
    }
    for i in 0..regions.len() {
        for j in 0..i {
            if regions[i].label() == regions[j].label() {
                return Err(cfg_err(format!("regions[{i}].label"), "duplicate label"));
            }
        }
    }
    for i in 0..regions.len().saturating_sub(1) {
        if !regions[i].subset_of(&regions[i + 1]) {
            return Err(cfg_err(
                format!("regions[{i}]"),
                format!(
                    "`{}` is not contained in regions[{}] `{}`",
                    regions[i].label(),
                    i + 1,
                    regions[i + 1].label()
                ),
            ));
        }
    }

    let horizon = positive("time.horizon", raw.time.horizon)?;
    if raw.time.steps == 0 {
        return Err(cfg_err("time.steps", "must be at least 1"));
    }
    let threshold = positive("observability.threshold", raw.observability.threshold)?;

    let o = &raw.observer;
    let observer_method = match o.method.as_str() {
        "modal_shift" => DesignMethod::ModalShift,
        "scaled_adjoint" => DesignMethod::ScaledAdjoint,
        other => {
            return Err(cfg_err(
                "observer.method",
                format!("unknown method `{other}` (expected modal_shift or scaled_adjoint)"),
            ))
        }
    };
    let sigma_target = positive("observer.sigma_target", o.sigma_target)?;
    let observer_horizon = positive("observer.horizon", o.horizon.unwrap_or(horizon))?;
    let observer_steps = o.steps.unwrap_or(raw.time.steps);
    if observer_steps == 0 {
        return Err(cfg_err("observer.steps", "must be at least 1"));
    }
    let observer_region = match &o.region {
        None => 0,
        Some(label) => regions
            .iter()
            .position(|r| r.label() == label)
            .ok_or_else(|| cfg_err("observer.region", format!("no region labelled `{label}`")))?,
    };

    let rc = &raw.reconstruction;
    if !(rc.regularization.is_finite() && rc.regularization >= 0.0) {
        return Err(cfg_err(
            "reconstruction.regularization",
            format!("must be non-negative, got {}", rc.regularization),
        ));
    }
    if rc.trials == 0 {
        return Err(cfg_err("reconstruction.trials", "must be at least 1"));
    }
    for (i, b) in rc.sweep.iter().enumerate() {
        SensorSpec::pointwise(b)
            .validate(&domain)
            .map_err(|e| cfg_err(format!("reconstruction.sweep[{i}]"), e))?;
    }

    Ok(ScenarioConfig {
        basis,
        sensors,
        regions,
        horizon,
        steps: raw.time.steps,
        threshold,
        observer_method,
        sigma_target,
        observer_horizon,
        observer_steps,
        observer_region,
        regularization: rc.regularization,
        trials: rc.trials,
        seed: rc.seed,
        sweep: rc.sweep.clone(),
        output_dir: raw.output_dir,
    })
}

fn parse_sensor(path: &str, s: &RawSensor, domain: &DomainSpec) -> Result<SensorSpec, ConfigError> {
    let need_location = || {
        s.location
            .clone()
            .ok_or_else(|| cfg_err(format!("{path}.location"), "missing"))
    };
    let spec = match s.kind.as_str() {
        "pointwise" => SensorSpec::pointwise(&need_location()?),
        "boundary_pointwise" => SensorSpec::boundary_pointwise(&need_location()?),
        "zone" => {
            let support = s
                .support
                .as_ref()
                .ok_or_else(|| cfg_err(format!("{path}.support"), "missing"))?;
            SensorSpec::zone(&support.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
        }
        "boundary_zone" => {
            let edge = s
                .edge
                .as_deref()
                .ok_or_else(|| cfg_err(format!("{path}.edge"), "missing"))?;
            let edge = parse_edge(edge)
                .ok_or_else(|| cfg_err(format!("{path}.edge"), format!("unknown edge `{edge}`")))?;
            let iv = s
                .interval
                .ok_or_else(|| cfg_err(format!("{path}.interval"), "missing"))?;
            SensorSpec::boundary_zone(edge, iv[0], iv[1])
        }
        other => {
            return Err(cfg_err(
                format!("{path}.kind"),
                format!("unknown sensor kind `{other}`"),
            ))
        }
    };
    spec.validate(domain).map_err(|e| cfg_err(path, e))?;
    Ok(spec)
}

fn parse_region(
    path: &str,
    r: &RawRegion,
    domain: &DomainSpec,
) -> Result<BoundaryRegion, ConfigError> {
    if r.label.is_empty() {
        return Err(cfg_err(format!("{path}.label"), "must not be empty"));
    }
    if r.full {
        if !r.pieces.is_empty() {
            return Err(cfg_err(
                format!("{path}.pieces"),
                "a full region takes no pieces",
            ));
        }
        return Ok(BoundaryRegion::full(domain).with_label(r.label.clone()));
    }
    if r.pieces.is_empty() {
        return Err(cfg_err(
            format!("{path}.pieces"),
            "give at least one piece or set full = true",
        ));
    }
    let mut specs = Vec::new();
    for (p, piece) in r.pieces.iter().enumerate() {
        let ppath = format!("{path}.pieces[{p}]");
        let edge = parse_edge(&piece.edge).ok_or_else(|| {
            cfg_err(
                format!("{ppath}.edge"),
                format!("unknown edge `{}`", piece.edge),
            )
        })?;
        let spec = PieceSpec {
            edge,
            interval: piece.interval.map(|iv| (iv[0], iv[1])),
        };
        BoundaryRegion::new(domain, std::slice::from_ref(&spec)).map_err(|e| cfg_err(&ppath, e))?;
        specs.push(spec);
    }
    BoundaryRegion::new(domain, &specs)
        .map(|g| g.with_label(r.label.clone()))
        .map_err(|e| cfg_err(format!("{path}.pieces"), e))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cfg_err("", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Result of one pipeline: report text, files to write and failed checks.
struct Outcome {
    report: String,
    files: Vec<(&'static str, String)>,
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            report: String::new(),
            files: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.report.push_str(s.as_ref());
        self.report.push('\n');
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.line(format!(
            "check {name}: {}",
            if ok { "pass" } else { "FAIL" }
        ));
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}

fn e(x: f64) -> String {
    format!("{x:.6e}")
}

fn observability_problem(
    cfg: &ScenarioConfig,
    region: usize,
) -> crate::Result<ObservabilityProblem> {
    ObservabilityProblem::new(
        cfg.basis.clone(),
        cfg.sensors.clone(),
        cfg.regions[region].clone(),
        cfg.horizon,
        cfg.steps,
    )
}

fn run_simulate(cfg: &ScenarioConfig, seed: u64) -> crate::Result<Outcome> {
    let mut out = Outcome::new();
    let z0 = random_initial_state(&cfg.basis, seed);
    let problem = observability_problem(cfg, 0)?;
    let y = forward_k(&problem, &z0)?;
    let zt = semigroup_apply(cfg.horizon, &z0)?;
    out.line(format!("horizon: {}", e(cfg.horizon)));
    out.line(format!("initial L2 norm: {}", e(z0.l2_norm())));
    out.line(format!("final L2 norm: {}", e(zt.l2_norm())));
    out.line(format!("output norm: {}", e(y.norm())));
    out.check(
        "energy does not grow",
        zt.l2_norm() <= z0.l2_norm() * (1.0 + 1e-12),
    );
    out.files.push(("trajectory.csv", y.to_csv()));
    Ok(out)
}

fn run_observability(cfg: &ScenarioConfig) -> crate::Result<Outcome> {
    let mut out = Outcome::new();
    let problem = observability_problem(cfg, 0)?;
    let omega = omega_recoverability(&problem, cfg.threshold)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, region) in cfg.regions.iter().enumerate() {
        let rep = is_gamma_observable(&problem.with_region(region.clone())?, cfg.threshold)?;
        out.line(format!(
            "region {}: observable={} sigma_min={} threshold={}",
            region.label(),
            rep.observable,
            e(rep.sigma_min()),
            e(rep.threshold)
        ));
        if i == 0 {
            for (k, v) in rep.gramian_eigenvalues().iter().enumerate() {
                rows.push(vec!["gramian".into(), k.to_string(), csv::num(*v)]);
            }
            for (k, v) in omega.singular_values.iter().enumerate() {
                rows.push(vec!["domain".into(), k.to_string(), csv::num(*v)]);
            }
        }
        for (k, v) in rep.singular_values.iter().enumerate() {
            rows.push(vec![
                format!("region:{}", region.label()),
                k.to_string(),
                csv::num(*v),
            ]);
        }
        reports.push(rep);
    }
    out.line(format!(
        "domain: observable={} sigma_min={}",
        omega.observable,
        e(omega.singular_values.min())
    ));
    let eig = reports[0].gramian_eigenvalues();
    let (max, min) = (eig[0], eig[eig.len() - 1]);
    out.check("gramian positive semidefinite", min >= -1e-10 * max.abs());
    out.check(
        "domain observability implies region observability",
        !omega.observable || reports.iter().all(|r| r.observable),
    );
    let mono = reports
        .windows(2)
        .all(|w| !w[1].observable || w[0].observable);
    out.check("observability inherited by sub-regions", mono);
    out.files.push((
        "gramian_spectrum.csv",
        csv::table(&["kind", "index", "value"], rows),
    ));
    Ok(out)
}

fn run_observer(cfg: &ScenarioConfig, seed: u64) -> crate::Result<Outcome> {
    let mut out = Outcome::new();
    let gain = design_gain(
        &cfg.basis,
        &cfg.sensors,
        cfg.observer_method,
        cfg.sigma_target,
    )?;
    let det = is_gamma_detectable(&cfg.basis, &cfg.sensors, &gain)?;
    let region = cfg.regions[cfg.observer_region].clone();
    out.line(format!("region: {}", region.label()));
    out.line(format!("method: {:?}", cfg.observer_method));
    out.line(format!("target rate: {}", e(cfg.sigma_target)));
    out.line(format!("spectral abscissa: {}", e(det.spectral_abscissa)));
    let sys = ObserverSystem::new(cfg.basis.clone(), cfg.sensors.clone(), gain, &[], region)?;
    let ids = verify_observer_identities(&sys);
    out.line(format!(
        "identity residual M C + N alpha - I: {}",
        e(ids.injection)
    ));
    out.line(format!(
        "identity residual alpha A + L alpha - H C: {}",
        e(ids.sylvester_plus)
    ));
    out.line(format!(
        "identity residual alpha A - L alpha - H C: {}",
        e(ids.sylvester_minus)
    ));
    out.line(format!("identity residual G - B: {}", e(ids.input)));

    let z0 = random_initial_state(&cfg.basis, seed);
    let z = simulate_plant(&sys, &z0, None, cfg.observer_horizon, cfg.observer_steps)?;
    let y = plant_output(&sys, &z)?;
    let w = simulate_observer(&sys, &y, None, None)?;
    let err = error_trajectory(&sys, &z, &w)?;
    let times = z.time_grid();
    let fit = fit_exponential_decay(times, &err)?;
    out.line(format!("fitted F: {}", e(fit.prefactor)));
    out.line(format!("fitted sigma: {}", e(fit.sigma)));
    out.line(format!("fit residual: {}", e(fit.residual)));
    out.line(format!(
        "fit window: [{}, {}]",
        e(fit.window.0),
        e(fit.window.1)
    ));
    let t_end = cfg.observer_horizon;
    let last = err[err.len() - 1];
    out.line(format!("final error: {}", e(last)));
    out.check("detectable", det.detectable);
    out.check(
        "fitted rate at least 0.9 target",
        fit.sigma >= 0.9 * cfg.sigma_target,
    );
    out.check(
        "final error within fitted envelope",
        last <= fit.predict(t_end) * 1.1 || last <= 1e-14,
    );
    let rows = times
        .iter()
        .zip(&err)
        .map(|(&t, &v)| vec![csv::num(t), csv::num(v), csv::num(fit.predict(t))]);
    out.files
        .push(("decay.csv", csv::table(&["time", "error", "fit"], rows)));
    Ok(out)
}

fn run_reconstruct(cfg: &ScenarioConfig, seed: u64) -> crate::Result<Outcome> {
    let mut out = Outcome::new();
    let problem = observability_problem(cfg, 0)?;
    let z0 = random_initial_state(&cfg.basis, seed);
    let y = forward_k(&problem, &z0)?;
    let rp =
        ReconstructionProblem::new(problem.clone(), y, cfg.regularization, cfg.regions.clone())?;
    let rep = evaluate_reconstruction(&rp, &z0)?;
    out.line(format!("regularization: {}", e(cfg.regularization)));
    out.line(format!("output residual: {}", e(rep.residual)));
    out.line(format!(
        "objective at minimizer: {}",
        e(rep.minimizer_value)
    ));
    for (label, er) in &rep.per_region_errors {
        out.line(format!("Er[{label}]: {}", e(*er)));
    }
    out.line(format!("Er[domain]: {}", e(rep.omega_error)));
    out.check("errors non-decreasing along the nest", rep.nested_ok());
    out.check(
        "region errors bounded by the domain error",
        rep.domain_bound_ok(),
    );
    if !cfg.sweep.is_empty() {
        let sweep = sensor_sweep(&problem, &z0, &cfg.sweep, cfg.regularization)?;
        let worst = sweep.moduli.iter().copied().fold(0.0, f64::max);
        out.line(format!("sweep locations: {}", cfg.sweep.len()));
        out.line(format!("sweep largest modulus: {}", e(worst)));
        out.files.push(("sweep.csv", sweep.to_csv()));
    }
    Ok(out)
}

fn run_monotonicity(cfg: &ScenarioConfig, seed: u64, trials: usize) -> crate::Result<Outcome> {
    let mut out = Outcome::new();
    let problem = observability_problem(cfg, 0)?;
    let rep = monotonicity_experiment(&problem, &cfg.regions, cfg.regularization, trials, seed)?;
    out.line(format!("trials: {trials}"));
    out.line(format!("seed: {seed}"));
    out.line(format!("regularization: {}", e(cfg.regularization)));
    for (label, mean, max) in rep.region_stats() {
        out.line(format!("Er[{label}]: mean={} max={}", e(mean), e(max)));
    }
    out.line(format!(
        "nesting order held: {}/{trials}",
        rep.nested_passes()
    ));
    out.line(format!(
        "domain bound held: {}/{trials}",
        rep.domain_bound_passes()
    ));
    out.check(
        "errors non-decreasing along the nest",
        rep.nested_passes() == trials,
    );
    out.check(
        "region errors bounded by the domain error",
        rep.domain_bound_passes() == trials,
    );
    out.files.push(("monotonicity.csv", rep.to_csv()));
    Ok(out)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Observability(c) => ("observability", c),
        Command::Observer(c) => ("observer", c),
        Command::Reconstruct(c) => ("reconstruct", c),
        Command::Monotonicity(c) => ("monotonicity", c),
    };
    let cfg = match load_config(&common.config) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("config error: {err}");
            return 2;
        }
    };
    if common.trials == Some(0) {
        eprintln!("config error: --trials: must be at least 1");
        return 2;
    }
    let seed = common.seed.unwrap_or(cfg.seed);
    let trials = common.trials.unwrap_or(cfg.trials);
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("regobs-out"));

    let result = match &cli.command {
        Command::Simulate(_) => run_simulate(&cfg, seed),
        Command::Observability(_) => run_observability(&cfg),
        Command::Observer(_) => run_observer(&cfg, seed),
        Command::Reconstruct(_) => run_reconstruct(&cfg, seed),
        Command::Monotonicity(_) => run_monotonicity(&cfg, seed, trials),
    };
    let mut outcome = match result {
        Ok(o) => o,
        Err(err) => {
            eprintln!("{name} failed: {err}");
            return 1;
        }
    };
    let mut header = String::new();
    let _ = writeln!(header, "command: {name}");
    let _ = writeln!(header, "modes: {}", cfg.basis.len());
    let _ = writeln!(header, "sensors: {}", cfg.sensors.len());
    let status = if outcome.failures.is_empty() {
        "status: pass".to_string()
    } else {
        format!("status: FAIL ({})", outcome.failures.join("; "))
    };
    outcome.report = format!("{header}{}{status}\n", outcome.report);

    if let Err(err) = write_outputs(&out_dir, &outcome) {
        eprintln!("cannot write outputs to {}: {err}", out_dir.display());
        return 1;
    }
    if !common.quiet {
        print!("{}", outcome.report);
    }
    if outcome.failures.is_empty() {
        0
    } else {
        1
    }
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), &outcome.report)?;
    for (name, contents) in &outcome.files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
