//! Event-driven Monte Carlo of the full queue.
//!
//! Arrival times, arrival locations and travel distances come from three
//! separate random streams of one seed, so changing the dynamics (say, the
//! exponent `m`) leaves the input sequence untouched. That is what makes the
//! pathwise comparisons between exponents possible.

use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Advance, HtqParams, Integrator, IntegratorConfig, Monitor, QueueState, Violations};
use crate::rng::{self, Streams};
use crate::stats::{self, Interval, MeanEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Arrival,
    Departure,
    Sample,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Arrival => "arrival",
            RecordKind::Departure => "departure",
            RecordKind::Sample => "sample",
        }
    }
}

/// One trace row: a jump (with the state right after it) or a periodic
/// sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub time: f64,
    pub kind: RecordKind,
    /// Vehicle id for jumps.
    pub id: Option<u64>,
    /// Arrival location (arrivals only).
    pub location: Option<f64>,
    pub n: usize,
    pub workload: f64,
    pub service_rate: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Total travel quota brought in by arrivals so far.
    pub arrived_work: f64,
    /// Total idle time so far.
    pub idle_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BusyPeriod {
    pub start: f64,
    /// `None` if still open at the end of the run.
    pub end: Option<f64>,
    /// Arrivals during the period, not counting the one that started it.
    pub n_bn: u64,
}

impl BusyPeriod {
    pub fn duration(&self) -> Option<f64> {
        self.end.map(|e| e - self.start)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub records: Vec<Record>,
    pub busy_periods: Vec<BusyPeriod>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    /// Stop as soon as the queue length exceeds this.
    pub cap: Option<usize>,
    /// Time between periodic samples; `None` records jumps only.
    pub sample_interval: Option<f64>,
    /// Keep jump and sample records (busy periods are always kept).
    pub record: bool,
    /// Check the dynamics' invariants along the run.
    pub monitor: bool,
    pub integrator: IntegratorConfig,
}

impl SimOptions {
    pub fn new(horizon: f64) -> Self {
        SimOptions {
            horizon,
            cap: None,
            sample_interval: Some(0.01),
            record: true,
            monitor: false,
            integrator: IntegratorConfig::default(),
        }
    }

    /// Counters and busy periods only; for estimators.
    pub fn lean(horizon: f64) -> Self {
        SimOptions {
            sample_interval: None,
            record: false,
            ..SimOptions::new(horizon)
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    pub trace: Trace,
    pub seed: u64,
    /// Time the run stopped: the horizon, or the cap crossing.
    pub horizon: f64,
    pub max_queue: usize,
    pub bounded_at: Option<usize>,
    /// The queue length went above the cap.
    pub exceeded_cap: bool,
    pub arrivals: u64,
    pub departures: u64,
    pub idle_time: f64,
    /// Integral of the queue length over time.
    pub queue_area: f64,
    pub initial_workload: f64,
    pub violations: Option<Violations>,
}

impl SimOutcome {
    pub fn idle_fraction(&self) -> f64 {
        if self.horizon > 0.0 {
            self.idle_time / self.horizon
        } else {
            1.0
        }
    }

    pub fn mean_queue_length(&self) -> f64 {
        if self.horizon > 0.0 {
            self.queue_area / self.horizon
        } else {
            0.0
        }
    }

    /// Queue length right after each jump, as `(time, N)`.
    pub fn queue_path(&self) -> Vec<(f64, usize)> {
        self.trace
            .records
            .iter()
            .filter(|r| r.kind != RecordKind::Sample)
            .map(|r| (r.time, r.n))
            .collect()
    }
}

/// Queue length at time `t` from a jump path (right-continuous).
pub fn queue_length_at(path: &[(f64, usize)], initial: usize, t: f64) -> usize {
    let k = path.partition_point(|(s, _)| *s <= t);
    if k == 0 {
        initial
    } else {
        path[k - 1].1
    }
}

struct Runner {
    opts: SimOptions,
    m: f64,
    state: QueueState,
    integrator: Integrator,
    monitor: Option<Monitor>,
    trace: Trace,
    arrived_work: f64,
    idle_time: f64,
    queue_area: f64,
    last_time: f64,
    max_queue: usize,
    arrivals: u64,
    departures: u64,
}

impl Runner {
    fn record(&mut self, kind: RecordKind, id: Option<u64>, location: Option<f64>) {
        if !self.opts.record {
            return;
        }
        let r = self.state.report(self.m);
        self.trace.records.push(Record {
            time: self.state.time,
            kind,
            id,
            location,
            n: self.state.len(),
            workload: r.workload,
            service_rate: r.service_rate,
            y_min: r.y_min,
            y_max: r.y_max,
            arrived_work: self.arrived_work,
            idle_time: self.idle_time,
        });
    }

    /// Account time from `last_time` to the current state time.
    fn account(&mut self, n_during: usize) {
        let dt = self.state.time - self.last_time;
        if n_during == 0 {
            self.idle_time += dt;
        }
        self.queue_area += n_during as f64 * dt;
        self.last_time = self.state.time;
    }

    fn advance(&mut self, target: f64) -> Result<Advance> {
        let n = self.state.len();
        let out = match self.monitor.as_mut() {
            Some(mon) => self
                .integrator
                .integrate_to(&mut self.state, target, |s| mon.on_step(s))?,
            None => self.integrator.integrate_to(&mut self.state, target, |_| {})?,
        };
        self.account(n);
        Ok(out)
    }

    fn depart(&mut self, ids: Vec<u64>) -> Result<()> {
        if self.opts.sample_interval.is_some() {
            self.record(RecordKind::Sample, None, None);
        }
        for id in ids {
            let before = self.state.report(self.m).service_rate;
            let d = self.state.apply_departure(id)?;
            self.departures += 1;
            if let Some(mon) = self.monitor.as_mut() {
                mon.on_departure(before, &self.state, &d);
            }
            self.record(RecordKind::Departure, Some(id), None);
            if self.state.is_empty() {
                if let Some(b) = self.trace.busy_periods.last_mut() {
                    b.end = Some(self.state.time);
                }
            }
        }
        Ok(())
    }

    fn arrive(&mut self, location: f64, quota: f64, id: u64) {
        if self.opts.sample_interval.is_some() {
            self.record(RecordKind::Sample, None, None);
        }
        let was_empty = self.state.is_empty();
        let before = self.state.report(self.m).service_rate;
        let a = self.state.apply_arrival(location, quota, id);
        self.arrivals += 1;
        self.arrived_work += quota;
        if let Some(mon) = self.monitor.as_mut() {
            mon.on_arrival(before, &self.state, &a);
        }
        if was_empty {
            self.trace.busy_periods.push(BusyPeriod {
                start: self.state.time,
                end: None,
                n_bn: 0,
            });
        } else if let Some(b) = self.trace.busy_periods.last_mut() {
            b.n_bn += 1;
        }
        self.max_queue = self.max_queue.max(self.state.len());
        self.record(RecordKind::Arrival, Some(id), Some(location));
    }
}

/// Simulate the queue up to `opts.horizon` (or the first cap crossing).
pub fn run(params: &HtqParams, opts: &SimOptions, seed: u64) -> Result<SimOutcome> {
    params.validate()?;
    if !(opts.horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {}", opts.horizon)));
    }
    if let Some(dt) = opts.sample_interval {
        if !(dt > 0.0) {
            return Err(Error::invalid("sample interval must be positive"));
        }
    }
    let l = params.length;
    let m = params.exponent;
    let mut streams = Streams::new(seed);
    let quotas: Vec<f64> = match &params.q0 {
        Some(q) => q.clone(),
        None => params.x0.iter().map(|_| params.psi.sample(&mut streams.distances)).collect(),
    };
    let state = QueueState::with_vehicles(l, &params.x0, &quotas)?;
    let initial_workload = state.workload();
    let mut runner = Runner {
        opts: *opts,
        m,
        integrator: Integrator::new(l, m, opts.integrator),
        monitor: opts.monitor.then(|| Monitor::new(l, m, 1e-8)),
        trace: Trace::default(),
        arrived_work: 0.0,
        idle_time: 0.0,
        queue_area: 0.0,
        last_time: 0.0,
        max_queue: state.len(),
        arrivals: 0,
        departures: 0,
        state,
    };
    if !runner.state.is_empty() {
        runner.trace.busy_periods.push(BusyPeriod {
            start: 0.0,
            end: None,
            n_bn: 0,
        });
    }
    let interarrival = if params.arrival_rate > 0.0 {
        Some(Exp::new(params.arrival_rate).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let mut next_arrival = match &interarrival {
        Some(e) => e.sample(&mut streams.arrivals),
        None => f64::INFINITY,
    };
    let mut next_id = params.x0.len() as u64;
    let mut next_sample = opts.sample_interval.map_or(f64::INFINITY, |_| 0.0);
    let mut exceeded = runner.opts.cap.is_some_and(|c| runner.state.len() > c);
    runner.record(RecordKind::Sample, None, None);
    if next_sample == 0.0 {
        next_sample = opts.sample_interval.unwrap();
    }
    while !exceeded {
        let target = opts.horizon.min(next_arrival).min(next_sample);
        match runner.advance(target)? {
            Advance::Departures(ids) => runner.depart(ids)?,
            Advance::Reached => {
                if target == next_arrival && next_arrival <= opts.horizon {
                    let location = params.phi.sample(&mut streams.locations);
                    let quota = params.psi.sample(&mut streams.distances);
                    runner.arrive(location, quota, next_id);
                    next_id += 1;
                    next_arrival += interarrival.as_ref().unwrap().sample(&mut streams.arrivals);
                    if runner.opts.cap.is_some_and(|c| runner.state.len() > c) {
                        exceeded = true;
                    }
                } else if target == next_sample && next_sample < opts.horizon {
                    runner.record(RecordKind::Sample, None, None);
                    next_sample += opts.sample_interval.unwrap();
                    // avoid drift from repeated addition
                    let k = (next_sample / opts.sample_interval.unwrap()).round();
                    next_sample = k * opts.sample_interval.unwrap();
                } else if target >= opts.horizon {
                    break;
                }
            }
        }
    }
    if !exceeded {
        runner.record(RecordKind::Sample, None, None);
    }
    let max_queue = runner.max_queue;
    Ok(SimOutcome {
        seed,
        horizon: runner.state.time,
        max_queue,
        bounded_at: opts.cap,
        exceeded_cap: exceeded,
        arrivals: runner.arrivals,
        departures: runner.departures,
        idle_time: runner.idle_time,
        queue_area: runner.queue_area,
        initial_workload,
        violations: runner.monitor.map(|m| m.violations),
        trace: runner.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusyStats {
    pub completed: usize,
    pub mean_duration: f64,
    pub mean_arrivals: f64,
    /// `(duration, n_bn)` of every completed period.
    pub joint: Vec<(f64, u64)>,
}

/// Statistics over the completed busy periods of a trace.
pub fn busy_period_stats(trace: &Trace) -> Result<BusyStats> {
    let joint: Vec<(f64, u64)> = trace
        .busy_periods
        .iter()
        .filter_map(|b| b.duration().map(|d| (d, b.n_bn)))
        .collect();
    if joint.is_empty() {
        return Err(Error::InsufficientData("no completed busy period".into()));
    }
    let n = joint.len() as f64;
    Ok(BusyStats {
        completed: joint.len(),
        mean_duration: joint.iter().map(|(d, _)| d).sum::<f64>() / n,
        mean_arrivals: joint.iter().map(|(_, k)| *k as f64).sum::<f64>() / n,
        joint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundedness {
    pub probability: f64,
    pub ci95: Interval,
    pub bounded: u64,
    pub reps: u64,
}

/// Fraction of replications whose queue length stays within `cap` on
/// `[0, horizon]`. Replication `k` uses seed `replication_seed(seed, k)`.
pub fn estimate_boundedness(params: &HtqParams, horizon: f64, cap: usize, reps: u64, seed: u64) -> Result<Boundedness> {
    estimate_boundedness_with(params, &SimOptions::lean(horizon).with_cap(cap), reps, seed)
}

pub fn estimate_boundedness_with(params: &HtqParams, opts: &SimOptions, reps: u64, seed: u64) -> Result<Boundedness> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let outcomes: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|k| run(params, opts, rng::replication_seed(seed, k)).map(|o| !o.exceeded_cap))
        .collect::<Result<_>>()?;
    let bounded = outcomes.iter().filter(|b| **b).count() as u64;
    Ok(Boundedness {
        probability: bounded as f64 / reps as f64,
        ci95: stats::wilson(bounded, reps),
        bounded,
        reps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputEstimate {
    /// Largest tested rate whose boundedness estimate reached `1 - delta`.
    pub lambda: f64,
    /// First tested rate above `lambda` that failed.
    pub lambda_fail: f64,
    /// Every tested `(lambda, boundedness)`.
    pub evaluations: Vec<(f64, Boundedness)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputQuery {
    pub delta: f64,
    pub horizon: f64,
    pub cap: usize,
    pub reps: u64,
    pub seed: u64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Stop when `(hi - lo) / hi` drops to this.
    pub rel_width: f64,
}

/// Bisection on the arrival rate for the finite-horizon throughput. All
/// rates share the same replication seeds.
pub fn estimate_throughput(params: &HtqParams, q: &ThroughputQuery) -> Result<ThroughputEstimate> {
    if !(q.delta > 0.0 && q.delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", q.delta)));
    }
    if !(q.lambda_lo >= 0.0 && q.lambda_hi > q.lambda_lo) {
        return Err(Error::invalid("need 0 <= lambda_lo < lambda_hi"));
    }
    let target = 1.0 - q.delta;
    let mut evals = Vec::new();
    let mut eval = |lambda: f64| -> Result<Boundedness> {
        let mut p = params.clone();
        p.arrival_rate = lambda;
        let b = estimate_boundedness(&p, q.horizon, q.cap, q.reps, q.seed)?;
        evals.push((lambda, b));
        Ok(b)
    };
    let (mut lo, mut hi) = (q.lambda_lo, q.lambda_hi);
    let b_lo = eval(lo)?;
    let b_hi = eval(hi)?;
    if b_lo.probability < target || b_hi.probability >= target {
        return Err(Error::InvalidBracket {
            lambda_lo: lo,
            p_lo: b_lo.probability,
            lambda_hi: hi,
            p_hi: b_hi.probability,
        });
    }
    while (hi - lo) / hi > q.rel_width {
        let mid = 0.5 * (lo + hi);
        if eval(mid)?.probability >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThroughputEstimate {
        lambda: lo,
        lambda_fail: hi,
        evaluations: evals,
    })
}

/// Replicated mean of a per-run statistic, e.g. the idle fraction.
pub fn replicate_mean(
    params: &HtqParams,
    opts: &SimOptions,
    reps: u64,
    seed: u64,
    stat: impl Fn(&SimOutcome) -> f64 + Sync,
) -> Result<MeanEstimate> {
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|k| run(params, opts, rng::replication_seed(seed, k)).map(|o| stat(&o)))
        .collect::<Result<_>>()?;
    stats::mean_ci(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SpatialDistribution as D;

    fn linear(lambda: f64) -> HtqParams {
        HtqParams::new(1.0, 1.0, lambda, D::uniform(0.0, 1.0).unwrap(), D::dirac(1.0).unwrap())
    }

    #[test]
    fn lone_vehicle_without_arrivals() {
        let p = linear(0.0).with_initial(vec![0.3], Some(vec![0.5]));
        let out = run(&p, &SimOptions::new(2.0), 1).unwrap();
        assert_eq!(out.departures, 1);
        let dep = out.trace.records.iter().find(|r| r.kind == RecordKind::Departure).unwrap();
        assert!((dep.time - 0.5).abs() < 1e-9);
        assert!((out.idle_time - 1.5).abs() < 1e-9);
        let stats = busy_period_stats(&out.trace).unwrap();
        assert_eq!(stats.completed, 1);
        assert_eq!(stats.joint[0].1, 0);
        assert!((stats.mean_duration - 0.5).abs() < 1e-9);
    }

    #[test]
    fn no_completed_period_is_an_error() {
        let p = linear(0.0);
        let out = run(&p, &SimOptions::new(1.0), 1).unwrap();
        assert!(matches!(busy_period_stats(&out.trace), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn zero_quota_arrival_leaves_at_once() {
        let p = HtqParams::new(1.0, 1.0, 0.0, D::uniform(0.0, 1.0).unwrap(), D::dirac(0.0).unwrap())
            .with_initial(vec![0.1], None);
        let out = run(&p, &SimOptions::new(1.0), 1).unwrap();
        assert_eq!(out.departures, 1);
        assert_eq!(out.trace.busy_periods[0].end, Some(0.0));
    }

    #[test]
    fn same_seed_same_trace() {
        let p = linear(0.7);
        let a = run(&p, &SimOptions::new(30.0), 9).unwrap();
        let b = run(&p, &SimOptions::new(30.0), 9).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = run(&p, &SimOptions::new(30.0), 10).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn cap_stops_early() {
        let p = linear(3.0);
        let out = run(&p, &SimOptions::lean(100.0).with_cap(10), 4).unwrap();
        assert!(out.exceeded_cap);
        assert!(out.horizon < 100.0);
        assert_eq!(out.max_queue, 11);
    }

    #[test]
    fn zero_rate_is_always_bounded() {
        let p = linear(0.0).with_initial(vec![0.0, 0.5], None);
        let b = estimate_boundedness(&p, 10.0, 2, 5, 1).unwrap();
        assert_eq!(b.probability, 1.0);
    }

    #[test]
    fn queue_length_lookup() {
        let path = [(1.0, 1), (2.0, 2), (3.0, 1)];
        assert_eq!(queue_length_at(&path, 0, 0.5), 0);
        assert_eq!(queue_length_at(&path, 0, 2.0), 2);
        assert_eq!(queue_length_at(&path, 0, 9.0), 1);
    }
}
