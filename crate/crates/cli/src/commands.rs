//! One function per subcommand. Each writes its outputs plus a manifest
//! into the output directory and returns what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use htq::bounds::{self, BoundQuery};
use htq::busyperiod::{self, BusyDist, GridSpec};
use htq::control::{self, TandemOptions};
use htq::model::Violations;
use htq::rng;
use htq::sim::{self, SimOptions, SimOutcome, ThroughputQuery};
use htq::stats::{self, MeanEstimate};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ManifestInfo, PlotSpec, SeriesSpec};
use crate::error::{CliError, Result};
use crate::plot::{self, Figure};
use crate::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    BusyDist,
    Bounds,
    Tandem,
    Throughput,
    Validate,
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::BusyDist => "busy-dist",
            Command::Bounds => "bounds",
            Command::Tandem => "tandem",
            Command::Throughput => "throughput",
            Command::Validate => "validate",
            Command::Plot => "plot",
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// Lines for the terminal.
    pub lines: Vec<String>,
    /// A hard invariant failed; the files are still written.
    pub invariant_failure: Option<String>,
}

pub struct Run {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

fn missing(block: &str) -> CliError {
    CliError::Config(format!("missing `{block}` block"))
}

/// CSV writer with an explicit header row, so empty tables still have one.
struct CsvOut {
    writer: csv::Writer<fs::File>,
    path: PathBuf,
}

impl CsvOut {
    fn create(path: PathBuf, headers: &[&str]) -> Result<Self> {
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(headers)?;
        Ok(CsvOut { writer, path })
    }

    fn row<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        Ok(())
    }

    fn finish(mut self, report: &mut Report) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        report.files.push(self.path);
        Ok(())
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T, report: &mut Report) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    report.files.push(path);
    Ok(())
}

fn write_manifest(run: &Run, command: Command, report: &mut Report) -> Result<()> {
    let mut cfg = run.cfg.clone();
    cfg.out_dir = Some(run.out.clone());
    cfg.manifest = Some(ManifestInfo {
        tool: "htq".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
    });
    write_json(run.out.join("manifest.json"), &cfg, report)
}

/// Run `command` and write its manifest.
pub fn execute(command: Command, run: &Run) -> Result<Report> {
    fs::create_dir_all(&run.out).map_err(|e| CliError::io(&run.out, e))?;
    let mut report = match command {
        Command::Simulate => simulate(run)?,
        Command::BusyDist => busy_dist(run)?,
        Command::Bounds => bounds_cmd(run)?,
        Command::Tandem => tandem(run)?,
        Command::Throughput => throughput(run)?,
        Command::Validate => validate_cmd(run)?,
        Command::Plot => plot_cmd(run)?,
    };
    write_manifest(run, command, &mut report)?;
    Ok(report)
}

#[derive(Serialize)]
struct BusySummary {
    completed: usize,
    mean_duration: Option<MeanEstimate>,
    mean_arrivals: Option<f64>,
}

#[derive(Serialize)]
struct LinearOracle {
    mean_busy_period: f64,
    idle_fraction: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    seed: u64,
    reps: u64,
    horizon: f64,
    arrivals: u64,
    departures: u64,
    max_queue: usize,
    exceeded_cap: u64,
    idle_fraction: f64,
    mean_queue_length: f64,
    busy_periods: BusySummary,
    linear_oracle: Option<LinearOracle>,
    violations: Option<Violations>,
}

fn simulate(run: &Run) -> Result<Report> {
    let c = run.cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    if c.reps == 0 {
        return Err(CliError::Config("at `simulate.reps`: need at least one replication".into()));
    }
    let full = SimOptions {
        horizon: c.horizon,
        cap: c.cap,
        sample_interval: c.sample_interval,
        record: true,
        monitor: c.monitor,
        ..SimOptions::new(c.horizon)
    };
    let lean = SimOptions {
        record: false,
        sample_interval: None,
        ..full
    };
    let seed = run.cfg.seed;
    let outcomes: Vec<SimOutcome> = (0..c.reps)
        .into_par_iter()
        .map(|k| sim::run(&c.params, if k == 0 { &full } else { &lean }, rng::replication_seed(seed, k)))
        .collect::<std::result::Result<_, _>>()?;

    let mut report = Report::default();
    let mut trace = CsvOut::create(
        run.out.join("trace.csv"),
        &[
            "time", "kind", "id", "location", "n", "workload", "service_rate", "y_min", "y_max", "arrived_work",
            "idle_time",
        ],
    )?;
    for r in &outcomes[0].trace.records {
        trace.row(r)?;
    }
    trace.finish(&mut report)?;

    let durations: Vec<f64> = outcomes
        .iter()
        .flat_map(|o| o.trace.busy_periods.iter().filter_map(|b| b.duration()))
        .collect();
    let arrivals_in: Vec<f64> = outcomes
        .iter()
        .flat_map(|o| o.trace.busy_periods.iter().filter(|b| b.end.is_some()).map(|b| b.n_bn as f64))
        .collect();
    let total_time: f64 = outcomes.iter().map(|o| o.horizon).sum();
    let violations = c.monitor.then(|| {
        let mut all = Violations::default();
        for o in &outcomes {
            if let Some(v) = &o.violations {
                all.merge(v);
            }
        }
        all
    });
    let p = &c.params;
    let linear_oracle = if p.exponent == 1.0 && p.arrival_rate > 0.0 {
        busyperiod::linear_moments(p.length, p.arrival_rate, &p.psi)
            .ok()
            .map(|(mean_busy_period, idle_fraction)| LinearOracle {
                mean_busy_period,
                idle_fraction,
            })
    } else {
        None
    };
    let summary = SimulateSummary {
        seed,
        reps: c.reps,
        horizon: c.horizon,
        arrivals: outcomes.iter().map(|o| o.arrivals).sum(),
        departures: outcomes.iter().map(|o| o.departures).sum(),
        max_queue: outcomes.iter().map(|o| o.max_queue).max().unwrap_or(0),
        exceeded_cap: outcomes.iter().filter(|o| o.exceeded_cap).count() as u64,
        idle_fraction: outcomes.iter().map(|o| o.idle_time).sum::<f64>() / total_time,
        mean_queue_length: outcomes.iter().map(|o| o.queue_area).sum::<f64>() / total_time,
        busy_periods: BusySummary {
            completed: durations.len(),
            mean_duration: stats::mean_ci(&durations).ok(),
            mean_arrivals: (!arrivals_in.is_empty())
                .then(|| arrivals_in.iter().sum::<f64>() / arrivals_in.len() as f64),
        },
        linear_oracle,
        violations,
    };
    report.lines.push(format!(
        "{} replication(s): {} arrivals, {} departures, idle fraction {:.4}",
        summary.reps, summary.arrivals, summary.departures, summary.idle_fraction
    ));
    let failed = summary.violations.as_ref().map_or(0, Violations::total);
    if failed > 0 {
        report.invariant_failure = Some(format!("{failed} dynamics invariant violations"));
    }
    write_json(run.out.join("summary.json"), &summary, &mut report)?;
    Ok(report)
}

#[derive(Serialize)]
struct DensityRow {
    n: usize,
    time: f64,
    density: f64,
}

#[derive(Serialize)]
struct MassRow {
    n: usize,
    mass: f64,
    atom_time: Option<f64>,
    atom_mass: Option<f64>,
}

fn busy_dist(run: &Run) -> Result<Report> {
    let c = run.cfg.busy_dist.as_ref().ok_or_else(|| missing("busy_dist"))?;
    let grid = c.grid.unwrap_or_else(|| GridSpec::default_for(&c.psi, c.n_max));
    let bd = BusyDist::build(c.service_rate, c.lambda, &c.psi, c.theta, c.n_max, grid)?;
    let mut report = Report::default();
    let mut dens = CsvOut::create(run.out.join("busy_dist.csv"), &["n", "time", "density"])?;
    let mut masses = CsvOut::create(run.out.join("masses.csv"), &["n", "mass", "atom_time", "atom_mass"])?;
    for n in 1..=c.n_max {
        let g = bd.per_n(n);
        let h = g.step();
        for (k, v) in g.values().iter().enumerate() {
            dens.row(&DensityRow {
                n,
                time: k as f64 * h,
                density: *v,
            })?;
        }
        masses.row(&MassRow {
            n,
            mass: g.mass(),
            atom_time: g.atom().map(|a| a.position),
            atom_mass: g.atom().map(|a| a.mass),
        })?;
    }
    dens.finish(&mut report)?;
    masses.finish(&mut report)?;
    #[derive(Serialize)]
    struct Summary {
        total_mass: f64,
        truncation: busyperiod::TruncationReport,
        grid: GridSpec,
    }
    let summary = Summary {
        total_mass: bd.total_mass(),
        truncation: bd.truncation(),
        grid,
    };
    report
        .lines
        .push(format!("mass over n <= {}: {:.6}", c.n_max, summary.total_mass));
    write_json(run.out.join("summary.json"), &summary, &mut report)?;
    Ok(report)
}

#[derive(Serialize)]
struct SuperlinearRow {
    m: f64,
    lambda_lower: f64,
    #[serde(rename = "M_star")]
    m_star: Option<usize>,
    r_star: Option<usize>,
    certified_probability: f64,
}

#[derive(Serialize)]
struct PerturbedRow {
    m: f64,
    eta: f64,
    lambda_lower: f64,
    w_at_bound: f64,
    delta: Option<f64>,
    fallback: bool,
}

fn bounds_cmd(run: &Run) -> Result<Report> {
    let c = run.cfg.bounds.as_ref().ok_or_else(|| missing("bounds"))?;
    if c.superlinear.is_none()
        && c.sublinear_perturbed.is_none()
        && c.superlinear_perturbed.is_none()
        && c.lambda_star.is_none()
        && c.linear.is_none()
    {
        return Err(CliError::Config("at `bounds`: no bound requested".into()));
    }
    let mut report = Report::default();
    let mut diagnostics = Vec::new();
    if let Some(s) = &c.superlinear {
        let results: Vec<bounds::BoundResult> = s
            .m_values
            .par_iter()
            .map(|&m| {
                bounds::superlinear_bound(&BoundQuery {
                    length: s.length,
                    m,
                    delta: s.delta,
                    horizon: s.horizon,
                    psi: s.psi.clone(),
                    phi: s.phi.clone(),
                    init: s.init,
                    search: s.search,
                    grid_step: s.grid_step,
                })
            })
            .collect::<std::result::Result<_, _>>()?;
        let mut out = CsvOut::create(
            run.out.join("superlinear.csv"),
            &["m", "lambda_lower", "M_star", "r_star", "certified_probability"],
        )?;
        for (m, r) in s.m_values.iter().zip(&results) {
            out.row(&SuperlinearRow {
                m: *m,
                lambda_lower: r.lambda_lower,
                m_star: r.m_star,
                r_star: r.r_star,
                certified_probability: r.certified_probability,
            })?;
            report.lines.push(format!("superlinear m={m}: lambda >= {:.6}", r.lambda_lower));
            diagnostics.push(serde_json::json!({"m": m, "diagnostics": r.diagnostics}));
        }
        out.finish(&mut report)?;
    }
    let perturbed_headers = ["m", "eta", "lambda_lower", "w_at_bound", "delta", "fallback"];
    if let Some(s) = &c.sublinear_perturbed {
        let mut out = CsvOut::create(run.out.join("sublinear_perturbed.csv"), &perturbed_headers)?;
        for &eta in &s.eta_values {
            for &m in &s.m_values {
                let b = bounds::sublinear_perturbed_bound(s.length, m, &s.psi, &s.phi, eta)?;
                out.row(&PerturbedRow {
                    m,
                    eta,
                    lambda_lower: b.lambda_lower,
                    w_at_bound: b.w_at_bound,
                    delta: b.delta,
                    fallback: b.fallback,
                })?;
            }
        }
        out.finish(&mut report)?;
    }
    if let Some(s) = &c.superlinear_perturbed {
        let mut out = CsvOut::create(run.out.join("superlinear_perturbed.csv"), &perturbed_headers)?;
        for &eta in &s.eta_values {
            for &m in &s.m_values {
                let b = bounds::superlinear_perturbed_bound(m, &s.psi, &s.phi, eta)?;
                out.row(&PerturbedRow {
                    m,
                    eta,
                    lambda_lower: b.lambda_lower,
                    w_at_bound: b.w_at_bound,
                    delta: b.delta,
                    fallback: b.fallback,
                })?;
            }
        }
        out.finish(&mut report)?;
    }
    if let Some(s) = &c.lambda_star {
        let value = bounds::lambda_star(s.ell, s.m, s.r, s.f)?;
        let mut out = CsvOut::create(run.out.join("lambda_star.csv"), &["ell", "m", "R", "F", "lambda_star"])?;
        out.row(&(s.ell, s.m, s.r, s.f, value))?;
        out.finish(&mut report)?;
        report.lines.push(format!("lambda_star = {value}"));
    }
    if let Some(s) = &c.linear {
        let value = bounds::linear_throughput(s.length, &s.psi)?;
        let mut out = CsvOut::create(run.out.join("linear.csv"), &["L", "mean_psi", "lambda"])?;
        out.row(&(s.length, s.psi.mean(), value))?;
        out.finish(&mut report)?;
        report.lines.push(format!("linear throughput = {value}"));
    }
    write_json(
        run.out.join("summary.json"),
        &serde_json::json!({ "superlinear_diagnostics": diagnostics }),
        &mut report,
    )?;
    Ok(report)
}

#[derive(Serialize)]
struct WaitRow {
    rep: u64,
    id: u64,
    sub_interval: usize,
    arrival_time: f64,
    release_time: f64,
    wait: f64,
}

#[derive(Serialize)]
struct BatchRow {
    rep: u64,
    index: usize,
    time: f64,
    parity: &'static str,
    count: usize,
    cleared_at: Option<f64>,
}

#[derive(Serialize)]
struct OccupancyRow {
    rep: u64,
    time: f64,
    sub_interval: usize,
    count: usize,
}

#[derive(Serialize)]
struct TandemSummary {
    seed: u64,
    reps: u64,
    delta: f64,
    sub_intervals: usize,
    perturbation: Option<control::Perturbation>,
    /// Waiting-time bound for this configuration, when the policy's
    /// assumptions hold (bounded density, load factor below one).
    waiting_bound: Option<f64>,
    t1: Vec<Option<f64>>,
    y_min_after_t1: Option<f64>,
    max_clear_time: Option<f64>,
    flagged_runs: usize,
    max_load_factor: f64,
    checks: Violations,
}

fn tandem(run: &Run) -> Result<Report> {
    let c = run.cfg.tandem.as_ref().ok_or_else(|| missing("tandem"))?;
    let opts = TandemOptions {
        sample_interval: None,
        ..TandemOptions::new(c.delta, c.horizon)
    };
    let runs = control::replicate_tandem(&c.params, &opts, c.reps, run.cfg.seed)?;
    let mut report = Report::default();
    let mut waits = CsvOut::create(
        run.out.join("waits.csv"),
        &["rep", "id", "sub_interval", "arrival_time", "release_time", "wait"],
    )?;
    let mut batches = CsvOut::create(
        run.out.join("batches.csv"),
        &["rep", "index", "time", "parity", "count", "cleared_at"],
    )?;
    let mut occupancy = CsvOut::create(run.out.join("occupancy.csv"), &["rep", "time", "sub_interval", "count"])?;
    let mut checks = Violations::default();
    for (k, out) in runs.iter().enumerate() {
        let rep = k as u64;
        for r in &out.releases {
            waits.row(&WaitRow {
                rep,
                id: r.id,
                sub_interval: r.sub_interval,
                arrival_time: r.arrival_time,
                release_time: r.release_time,
                wait: r.wait(),
            })?;
        }
        for (i, b) in out.batches.iter().enumerate() {
            batches.row(&BatchRow {
                rep,
                index: i + 1,
                time: b.time,
                parity: b.parity.as_str(),
                count: b.count,
                cleared_at: b.cleared_at,
            })?;
        }
        for s in &out.occupancy {
            for (j, count) in s.counts.iter().enumerate() {
                occupancy.row(&OccupancyRow {
                    rep,
                    time: s.time,
                    sub_interval: j + 1,
                    count: *count,
                })?;
            }
        }
        checks.merge(&out.checks);
    }
    waits.finish(&mut report)?;
    batches.finish(&mut report)?;
    occupancy.finish(&mut report)?;

    let p = &c.params;
    let waiting_bound = p.phi.density_bound().and_then(|f| {
        let w = bounds::waiting_time_bound(c.delta, p.arrival_rate, p.psi.support_hi(), f, p.exponent);
        w.is_finite().then_some(w)
    });
    let reports: Vec<control::Htq1Report> = runs.iter().map(control::htq1_boundedness).collect();
    let summary = TandemSummary {
        seed: run.cfg.seed,
        reps: c.reps,
        delta: c.delta,
        sub_intervals: runs.first().map_or(0, |r| r.sub_intervals),
        perturbation: control::measure_perturbation(&runs).ok(),
        waiting_bound,
        t1: runs.iter().map(|r| r.t1).collect(),
        y_min_after_t1: runs.iter().filter_map(|r| r.y_min_after_t1).reduce(f64::min),
        max_clear_time: runs.iter().flat_map(|r| r.clear_times()).reduce(f64::max),
        flagged_runs: reports.iter().filter(|r| r.any_flagged).count(),
        max_load_factor: reports
            .iter()
            .flat_map(|r| r.sub_queues.iter().map(|s| s.load_factor))
            .fold(0.0, f64::max),
        checks,
    };
    match &summary.perturbation {
        Some(w) => report.lines.push(format!(
            "mean wait {:.6} (95% CI {:.6}..{:.6}), bound {}",
            w.estimate.mean,
            w.estimate.ci95.lo,
            w.estimate.ci95.hi,
            waiting_bound.map_or("n/a".into(), |b| format!("{b:.6}"))
        )),
        None => report.lines.push("no vehicle was released".into()),
    }
    let failed = summary.checks.total();
    if failed > 0 {
        report.invariant_failure = Some(format!("{failed} policy guarantee violations"));
    }
    write_json(run.out.join("summary.json"), &summary, &mut report)?;
    Ok(report)
}

#[derive(Serialize)]
struct EvalRow {
    lambda: f64,
    probability: f64,
    ci_lo: f64,
    ci_hi: f64,
    bounded: u64,
    reps: u64,
}

fn throughput(run: &Run) -> Result<Report> {
    let c = run.cfg.throughput.as_ref().ok_or_else(|| missing("throughput"))?;
    let q = ThroughputQuery {
        delta: c.delta,
        horizon: c.horizon,
        cap: c.cap,
        reps: c.reps,
        seed: run.cfg.seed,
        lambda_lo: c.lambda_lo,
        lambda_hi: c.lambda_hi,
        rel_width: c.rel_width,
    };
    let est = sim::estimate_throughput(&c.params, &q)?;
    let mut report = Report::default();
    let mut out = CsvOut::create(
        run.out.join("throughput.csv"),
        &["lambda", "probability", "ci_lo", "ci_hi", "bounded", "reps"],
    )?;
    for (lambda, b) in &est.evaluations {
        out.row(&EvalRow {
            lambda: *lambda,
            probability: b.probability,
            ci_lo: b.ci95.lo,
            ci_hi: b.ci95.hi,
            bounded: b.bounded,
            reps: b.reps,
        })?;
    }
    out.finish(&mut report)?;
    report
        .lines
        .push(format!("throughput estimate {:.6} (first failing rate {:.6})", est.lambda, est.lambda_fail));
    write_json(
        run.out.join("summary.json"),
        &serde_json::json!({
            "lambda": est.lambda,
            "lambda_fail": est.lambda_fail,
            "delta": c.delta,
            "horizon": c.horizon,
            "cap": c.cap,
            "reps": c.reps,
            "evaluations": est.evaluations.len(),
        }),
        &mut report,
    )?;
    Ok(report)
}

fn validate_cmd(run: &Run) -> Result<Report> {
    let cfg = run.cfg.validate.clone().unwrap_or_default();
    let suite = validate::run_suite(&cfg, run.cfg.seed)?;
    let mut report = Report::default();
    report.lines.extend(suite.checks.iter().map(|c| c.render()));
    let failed: Vec<&str> = suite
        .checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        report.invariant_failure = Some(format!("failed: {}", failed.join(", ")));
    }
    write_json(run.out.join("validate.json"), &suite, &mut report)?;
    Ok(report)
}

/// Render one SVG.
pub fn render_plot(spec: &PlotSpec, base: &Path) -> Result<String> {
    let mut series = Vec::new();
    for s in &spec.series {
        let path = if s.csv.is_absolute() { s.csv.clone() } else { base.join(&s.csv) };
        let data = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        let table = plot::parse_plot_csv(&data).map_err(|e| match e {
            CliError::Plot(m) => CliError::Plot(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let label = s.label.clone().unwrap_or_else(|| {
            if s.group_by.is_some() {
                String::new()
            } else {
                s.y.clone()
            }
        });
        series.extend(table.series(&s.x, &s.y, s.group_by.as_deref(), &label)?);
    }
    let first = spec.series.first().ok_or_else(|| CliError::Plot("plot has no series".into()))?;
    plot::render_svg(&Figure {
        title: spec.title.clone(),
        x_label: spec.x_label.clone().unwrap_or_else(|| first.x.clone()),
        y_label: spec.y_label.clone().unwrap_or_else(|| first.y.clone()),
        log_y: spec.log_y,
        series,
    })
}

fn plot_cmd(run: &Run) -> Result<Report> {
    let c = run.cfg.plot.as_ref().ok_or_else(|| missing("plot"))?;
    let base = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
    let mut report = Report::default();
    for spec in &c.plots {
        let svg = render_plot(spec, &base)?;
        let path = run.out.join(&spec.output);
        fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        report.files.push(path);
    }
    Ok(report)
}

/// Plot specs for CSV files given on the command line: one SVG per file, or
/// a single overlay.
pub fn plot_specs_for(
    files: &[PathBuf],
    x: &str,
    y: &str,
    group_by: Option<&str>,
    log_y: bool,
    overlay: bool,
) -> Vec<PlotSpec> {
    let series = |f: &PathBuf| SeriesSpec {
        csv: f.clone(),
        x: x.into(),
        y: y.into(),
        label: if group_by.is_some() && !overlay {
            None
        } else {
            Some(f.file_stem().map_or_else(|| y.to_owned(), |s| s.to_string_lossy().into_owned()))
        },
        group_by: group_by.map(str::to_owned),
    };
    if overlay {
        vec![PlotSpec {
            output: "overlay.svg".into(),
            title: String::new(),
            x_label: None,
            y_label: None,
            log_y,
            series: files.iter().map(series).collect(),
        }]
    } else {
        files
            .iter()
            .map(|f| PlotSpec {
                output: format!(
                    "{}.svg",
                    f.file_stem().map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned())
                ),
                title: f.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
                x_label: None,
                y_label: None,
                log_y,
                series: vec![series(f)],
            })
            .collect()
    }
}
