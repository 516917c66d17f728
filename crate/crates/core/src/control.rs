//! Batch release policy on the tandem decomposition.
//!
//! Arrivals wait at their locations in a holding queue (HTQ1) that is split
//! into sub-intervals of length `delta` over `[0, ell]`. Whenever the moving
//! queue (HTQ2) is empty, the head-of-line vehicle of every sub-interval of
//! the current parity is released into it and the parity toggles; odd
//! sub-intervals (1-based) go first.
//!
//! The definition leaves open what happens when the current parity has
//! nobody waiting. Here the empty batch is recorded and the other parity is
//! tried at the same instant. If the holding queue is empty altogether, the
//! next arrival is released on the spot (HTQ2 has been empty since), with a
//! recorded empty batch first if its parity is not the current one.

use std::collections::VecDeque;

use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Advance, HtqParams, Integrator, IntegratorConfig, QueueState, Violations};
use crate::rng::{self, Streams};
use crate::sim::{Record, RecordKind, Trace};
use crate::stats::{self, MeanEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn toggled(self) -> Parity {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    /// Parity of the 0-based sub-interval `j` (which is number `j + 1`).
    pub fn of_index(j: usize) -> Parity {
        if j % 2 == 0 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TandemOptions {
    pub delta: f64,
    pub horizon: f64,
    /// Periodic HTQ2 samples in the trace; `None` records jumps only.
    pub sample_interval: Option<f64>,
    /// Keep the HTQ2 trace and the occupancy series.
    pub record: bool,
    pub integrator: IntegratorConfig,
}

impl TandemOptions {
    pub fn new(delta: f64, horizon: f64) -> Self {
        TandemOptions {
            delta,
            horizon,
            sample_interval: Some(0.01),
            record: true,
            integrator: IntegratorConfig::default(),
        }
    }

    /// Summaries only.
    pub fn lean(delta: f64, horizon: f64) -> Self {
        TandemOptions {
            sample_interval: None,
            record: false,
            ..TandemOptions::new(delta, horizon)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Waiting {
    id: u64,
    arrival: f64,
    location: f64,
    quota: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Release {
    pub id: u64,
    /// 1-based sub-interval number.
    pub sub_interval: usize,
    pub arrival_time: f64,
    pub release_time: f64,
}

impl Release {
    pub fn wait(&self) -> f64 {
        self.release_time - self.arrival_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Batch {
    pub time: f64,
    pub parity: Parity,
    pub count: usize,
    /// When HTQ2 emptied again; `None` for empty batches and at the horizon.
    pub cleared_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancySample {
    pub time: f64,
    pub counts: Vec<usize>,
}

/// Per sub-queue counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SubQueueStats {
    pub arrivals: u64,
    pub releases: u64,
    /// Sum over releases of the time spent at the head of the line.
    pub service_time: f64,
    pub max_occupancy: usize,
    /// Time-averaged occupancy over the four quarters of the horizon.
    pub quarter_means: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TandemOutcome {
    pub seed: u64,
    pub horizon: f64,
    pub delta: f64,
    pub ell: f64,
    pub sub_intervals: usize,
    /// HTQ2 trace; releases appear as arrivals.
    pub trace: Trace,
    pub releases: Vec<Release>,
    /// Vehicles still in HTQ1 at the horizon.
    pub pending: usize,
    pub batches: Vec<Batch>,
    /// First time HTQ2 is empty.
    pub t1: Option<f64>,
    pub initial_vehicles: usize,
    pub occupancy: Vec<OccupancySample>,
    pub sub_queues: Vec<SubQueueStats>,
    /// Smallest HTQ2 headway seen after `t1`.
    pub y_min_after_t1: Option<f64>,
    /// Policy guarantees checked along the run: release legality, release
    /// after arrival, and the release-time lemma.
    pub checks: Violations,
}

impl TandemOutcome {
    pub fn waits(&self) -> Vec<f64> {
        self.releases.iter().map(Release::wait).collect()
    }

    /// Batch clearing times `cleared_at - time` of nonempty batches.
    pub fn clear_times(&self) -> Vec<f64> {
        self.batches
            .iter()
            .filter_map(|b| b.cleared_at.map(|c| c - b.time))
            .collect()
    }

    /// `T_{i+1} - T_i` over consecutive nonempty batches.
    pub fn batch_gaps(&self) -> Vec<f64> {
        let times: Vec<f64> = self.batches.iter().filter(|b| b.count > 0).map(|b| b.time).collect();
        times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

struct Tandem<'a> {
    params: &'a HtqParams,
    opts: TandemOptions,
    ell: f64,
    htq1: Vec<VecDeque<Waiting>>,
    /// When each sub-queue's current head reached the head of the line.
    head_since: Vec<f64>,
    /// Last batch instant of each parity.
    last_opportunity: [f64; 2],
    htq2: QueueState,
    integrator: Integrator,
    next_parity: Parity,
    idle: bool,
    trace: Trace,
    releases: Vec<Release>,
    batches: Vec<Batch>,
    open_batch: Option<usize>,
    t1: Option<f64>,
    occupancy: Vec<OccupancySample>,
    stats: Vec<SubQueueStats>,
    occupancy_since: f64,
    released_work: f64,
    htq2_idle: f64,
    last_time: f64,
    y_min_after_t1: Option<f64>,
    checks: Violations,
}

fn parity_slot(p: Parity) -> usize {
    match p {
        Parity::Odd => 0,
        Parity::Even => 1,
    }
}

impl Tandem<'_> {
    fn sub_interval(&self, location: f64) -> usize {
        let k = self.htq1.len();
        ((location / self.opts.delta).floor().max(0.0) as usize).min(k - 1)
    }

    fn record(&mut self, kind: RecordKind, id: Option<u64>, location: Option<f64>) {
        if !self.opts.record {
            return;
        }
        let r = self.htq2.report(self.params.exponent);
        self.trace.records.push(Record {
            time: self.htq2.time,
            kind,
            id,
            location,
            n: self.htq2.len(),
            workload: r.workload,
            service_rate: r.service_rate,
            y_min: r.y_min,
            y_max: r.y_max,
            arrived_work: self.released_work,
            idle_time: self.htq2_idle,
        });
    }

    /// Integrate the HTQ1 occupancy over the quarters of the horizon up to
    /// `t`. Call before every occupancy change.
    fn account_occupancy(&mut self, t: f64) {
        let q = self.opts.horizon / 4.0;
        let from = self.occupancy_since;
        let to = t.min(self.opts.horizon);
        if to > from {
            for (j, queue) in self.htq1.iter().enumerate() {
                let n = queue.len() as f64;
                if n == 0.0 {
                    continue;
                }
                for k in 0..4 {
                    let lo = from.max(k as f64 * q);
                    let hi = to.min((k + 1) as f64 * q);
                    if hi > lo {
                        self.stats[j].quarter_means[k] += n * (hi - lo);
                    }
                }
            }
        }
        self.occupancy_since = to.max(from);
    }

    fn snapshot_occupancy(&mut self) {
        for (j, queue) in self.htq1.iter().enumerate() {
            self.stats[j].max_occupancy = self.stats[j].max_occupancy.max(queue.len());
        }
        if self.opts.record {
            self.occupancy.push(OccupancySample {
                time: self.htq2.time,
                counts: self.htq1.iter().map(VecDeque::len).collect(),
            });
        }
    }

    fn enqueue(&mut self, w: Waiting) {
        self.account_occupancy(w.arrival);
        let j = self.sub_interval(w.location);
        if self.htq1[j].is_empty() {
            self.head_since[j] = w.arrival;
        }
        self.htq1[j].push_back(w);
        self.stats[j].arrivals += 1;
        self.snapshot_occupancy();
    }

    /// One batch of the given parity at the current time; returns its size.
    fn batch(&mut self, parity: Parity) -> Result<usize> {
        let t = self.htq2.time;
        self.account_occupancy(t);
        let mut released = Vec::new();
        for j in (0..self.htq1.len()).filter(|j| Parity::of_index(*j) == parity) {
            if let Some(w) = self.htq1[j].pop_front() {
                let started = self.head_since[j].max(self.last_opportunity[parity_slot(parity)]);
                self.stats[j].releases += 1;
                self.stats[j].service_time += t - started.min(t);
                self.head_since[j] = t;
                self.checks.record("release_after_arrival", w.arrival - t);
                self.releases.push(Release {
                    id: w.id,
                    sub_interval: j + 1,
                    arrival_time: w.arrival,
                    release_time: t,
                });
                released.push(w);
            }
        }
        self.last_opportunity[parity_slot(parity)] = t;
        for w in &released {
            self.htq2.apply_arrival(w.location, w.quota, w.id);
            self.released_work += w.quota;
        }
        if !released.is_empty() {
            self.check_legality(&released)?;
            self.trace.busy_periods.push(crate::sim::BusyPeriod {
                start: t,
                end: None,
                n_bn: 0,
            });
            for w in &released {
                self.record(RecordKind::Arrival, Some(w.id), Some(w.location));
            }
        }
        self.batches.push(Batch {
            time: t,
            parity,
            count: released.len(),
            cleared_at: None,
        });
        if !released.is_empty() {
            self.open_batch = Some(self.batches.len() - 1);
        }
        self.next_parity = parity.toggled();
        self.snapshot_occupancy();
        Ok(released.len())
    }

    /// Released vehicles must have at least `delta` in front and behind.
    fn check_legality(&mut self, released: &[Waiting]) -> Result<()> {
        let y = self.htq2.headways()?;
        let n = y.len();
        let need = self.opts.delta * (1.0 - 1e-12);
        for w in released {
            let i = self.htq2.index_of(w.id).ok_or(Error::UnknownVehicle(w.id))?;
            let front = y[i];
            let rear = y[(i + n - 1) % n];
            self.checks.record("release_legality", need - front.min(rear));
        }
        Ok(())
    }

    /// HTQ2 is empty at the current time: run the policy.
    fn on_empty(&mut self) -> Result<()> {
        if self.batch(self.next_parity)? > 0 {
            return Ok(());
        }
        if self.batch(self.next_parity)? > 0 {
            return Ok(());
        }
        self.idle = true;
        Ok(())
    }

    fn on_arrival(&mut self, w: Waiting) -> Result<()> {
        self.enqueue(w);
        if self.idle {
            self.idle = false;
            let parity = Parity::of_index(self.sub_interval(w.location));
            if parity != self.next_parity {
                self.batch(self.next_parity)?;
            }
            self.batch(parity)?;
        }
        Ok(())
    }

    fn advance(&mut self, target: f64) -> Result<Advance> {
        let n = self.htq2.len();
        let after_t1 = self.t1.is_some();
        let mut lowest = f64::INFINITY;
        let out = self.integrator.integrate_to(&mut self.htq2, target, |s| {
            if after_t1 {
                if let Ok(y) = s.headways() {
                    lowest = lowest.min(y.iter().copied().fold(f64::INFINITY, f64::min));
                }
            }
        })?;
        if lowest.is_finite() {
            self.note_y_min(lowest);
        }
        let dt = self.htq2.time - self.last_time;
        if n == 0 {
            self.htq2_idle += dt;
        }
        self.last_time = self.htq2.time;
        Ok(out)
    }

    fn note_y_min(&mut self, y: f64) {
        let need = self.opts.delta * (1.0 - 1e-9) - 1e-12;
        self.checks.record("y_min_after_t1", need - y);
        self.y_min_after_t1 = Some(self.y_min_after_t1.map_or(y, |v| v.min(y)));
    }

    fn depart(&mut self, ids: Vec<u64>) -> Result<()> {
        for id in ids {
            self.htq2.apply_departure(id)?;
            self.record(RecordKind::Departure, Some(id), None);
        }
        if self.htq2.is_empty() {
            let t = self.htq2.time;
            if let Some(b) = self.trace.busy_periods.last_mut() {
                b.end = Some(t);
            }
            if let Some(k) = self.open_batch.take() {
                self.batches[k].cleared_at = Some(t);
                let bound = self.params.psi.support_hi() / self.opts.delta.powf(self.params.exponent);
                let clear = t - self.batches[k].time;
                self.checks.record("batch_clear_time", clear - bound * (1.0 + 1e-6));
            }
            if self.t1.is_none() {
                self.set_t1(t);
            }
            self.on_empty()?;
        } else if self.t1.is_some() {
            let y = self.htq2.report(self.params.exponent).y_min;
            self.note_y_min(y);
        }
        Ok(())
    }

    fn set_t1(&mut self, t: f64) {
        self.t1 = Some(t);
        let n0 = self.params.x0.len() as f64;
        let m = self.params.exponent;
        let r = self.params.psi.support_hi();
        let bound = n0.powf(m.max(1.0)) * r / self.params.length.powf(m);
        self.checks.record("t1_bound", t - bound * (1.0 + 1e-6) - 1e-9);
    }
}

/// Run the batch release policy with sub-interval length `delta`.
///
/// Uses the same three random streams as `sim::run`, so the arrival input
/// matches an uncontrolled run with the same seed.
pub fn run_tandem(params: &HtqParams, opts: &TandemOptions, seed: u64) -> Result<TandemOutcome> {
    params.validate()?;
    let ell = params.phi.support_hi();
    if !(opts.delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {}", opts.delta)));
    }
    if !(opts.horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {}", opts.horizon)));
    }
    if let Some(dt) = opts.sample_interval {
        if !(dt > 0.0) {
            return Err(Error::invalid("sample interval must be positive"));
        }
    }
    let k = ((ell / opts.delta) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let l = params.length;
    let m = params.exponent;
    let mut streams = Streams::new(seed);
    let quotas: Vec<f64> = match &params.q0 {
        Some(q) => q.clone(),
        None => params.x0.iter().map(|_| params.psi.sample(&mut streams.distances)).collect(),
    };
    let htq2 = QueueState::with_vehicles(l, &params.x0, &quotas)?;
    let mut tandem = Tandem {
        params,
        opts: *opts,
        ell,
        htq1: vec![VecDeque::new(); k],
        head_since: vec![0.0; k],
        last_opportunity: [0.0; 2],
        htq2,
        integrator: Integrator::new(l, m, opts.integrator),
        next_parity: Parity::Odd,
        idle: false,
        trace: Trace::default(),
        releases: Vec::new(),
        batches: Vec::new(),
        open_batch: None,
        t1: None,
        occupancy: Vec::new(),
        stats: vec![SubQueueStats::default(); k],
        occupancy_since: 0.0,
        released_work: 0.0,
        htq2_idle: 0.0,
        last_time: 0.0,
        y_min_after_t1: None,
        checks: Violations::default(),
    };
    tandem.record(RecordKind::Sample, None, None);
    if tandem.htq2.is_empty() {
        tandem.set_t1(0.0);
        tandem.on_empty()?;
    } else {
        tandem.trace.busy_periods.push(crate::sim::BusyPeriod {
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
    let mut next_sample = opts.sample_interval.unwrap_or(f64::INFINITY);
    loop {
        let target = opts.horizon.min(next_arrival).min(next_sample);
        match tandem.advance(target)? {
            Advance::Departures(ids) => tandem.depart(ids)?,
            Advance::Reached => {
                if target == next_arrival && next_arrival <= opts.horizon {
                    let w = Waiting {
                        id: next_id,
                        arrival: next_arrival,
                        location: params.phi.sample(&mut streams.locations),
                        quota: params.psi.sample(&mut streams.distances),
                    };
                    next_id += 1;
                    next_arrival += interarrival.as_ref().unwrap().sample(&mut streams.arrivals);
                    tandem.on_arrival(w)?;
                } else if target == next_sample && next_sample < opts.horizon {
                    tandem.record(RecordKind::Sample, None, None);
                    let dt = opts.sample_interval.unwrap();
                    next_sample = ((next_sample + dt) / dt).round() * dt;
                } else if target >= opts.horizon {
                    break;
                }
            }
        }
    }
    tandem.account_occupancy(opts.horizon);
    tandem.record(RecordKind::Sample, None, None);
    let q = opts.horizon / 4.0;
    for s in &mut tandem.stats {
        for v in &mut s.quarter_means {
            *v /= q;
        }
    }
    Ok(TandemOutcome {
        seed,
        horizon: opts.horizon,
        delta: opts.delta,
        ell: tandem.ell,
        sub_intervals: k,
        pending: tandem.htq1.iter().map(VecDeque::len).sum(),
        trace: tandem.trace,
        releases: tandem.releases,
        batches: tandem.batches,
        t1: tandem.t1,
        initial_vehicles: params.x0.len(),
        occupancy: tandem.occupancy,
        sub_queues: tandem.stats,
        y_min_after_t1: tandem.y_min_after_t1,
        checks: tandem.checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbation {
    pub estimate: MeanEstimate,
    /// Vehicles excluded because they were still waiting.
    pub pending: usize,
}

/// Mean waiting time of released vehicles over one or more runs.
pub fn measure_perturbation(runs: &[TandemOutcome]) -> Result<Perturbation> {
    let waits: Vec<f64> = runs.iter().flat_map(TandemOutcome::waits).collect();
    if waits.is_empty() {
        return Err(Error::InsufficientData("no vehicle was released".into()));
    }
    Ok(Perturbation {
        estimate: stats::mean_ci(&waits)?,
        pending: runs.iter().map(|r| r.pending).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubQueueReport {
    /// 1-based.
    pub sub_interval: usize,
    pub max_occupancy: usize,
    pub arrival_rate: f64,
    /// Releases per unit of head-of-line time; infinite when nothing left
    /// a sub-queue that had arrivals.
    pub service_rate: f64,
    pub load_factor: f64,
    /// Mean occupancy grew noticeably from the third to the last quarter.
    pub growing: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Htq1Report {
    pub sub_queues: Vec<SubQueueReport>,
    pub any_flagged: bool,
}

/// Empirical stability of the holding sub-queues: load factor
/// `lambda_j / mu_j` from arrivals per unit time and releases per unit of
/// head-of-line time; flagged when it reaches one.
pub fn htq1_boundedness(run: &TandemOutcome) -> Htq1Report {
    let sub_queues: Vec<SubQueueReport> = run
        .sub_queues
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let arrival_rate = s.arrivals as f64 / run.horizon;
            let service_rate = if s.service_time > 0.0 {
                s.releases as f64 / s.service_time
            } else {
                f64::INFINITY
            };
            let load_factor = if s.arrivals == 0 {
                0.0
            } else if s.releases == 0 {
                f64::INFINITY
            } else {
                arrival_rate / service_rate
            };
            let [_, _, q3, q4] = s.quarter_means;
            let growing = q4 - q3 > 3.0 * (q3 + 1.0).sqrt();
            SubQueueReport {
                sub_interval: j + 1,
                max_occupancy: s.max_occupancy,
                arrival_rate,
                service_rate,
                load_factor,
                growing,
                flagged: load_factor >= 1.0,
            }
        })
        .collect();
    let any_flagged = sub_queues.iter().any(|s| s.flagged);
    Htq1Report { sub_queues, any_flagged }
}

/// Independent replications; replication `k` uses `replication_seed(seed, k)`.
pub fn replicate_tandem(params: &HtqParams, opts: &TandemOptions, reps: u64, seed: u64) -> Result<Vec<TandemOutcome>> {
    (0..reps)
        .into_par_iter()
        .map(|k| run_tandem(params, opts, rng::replication_seed(seed, k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SpatialDistribution as D;

    fn params(l: f64, m: f64, lambda: f64, ell: f64) -> HtqParams {
        HtqParams::new(l, m, lambda, D::uniform(0.0, ell).unwrap(), D::uniform(0.0, 1.0).unwrap())
    }

    #[test]
    fn rejects_bad_delta() {
        let p = params(1.0, 0.5, 0.5, 1.0);
        assert!(run_tandem(&p, &TandemOptions::lean(0.0, 1.0), 1).is_err());
        assert!(run_tandem(&p, &TandemOptions::lean(-1.0, 1.0), 1).is_err());
    }

    #[test]
    fn sub_interval_count_uses_ceiling() {
        let p = params(1.0, 0.5, 0.0, 1.0);
        assert_eq!(run_tandem(&p, &TandemOptions::lean(0.25, 1.0), 1).unwrap().sub_intervals, 4);
        assert_eq!(run_tandem(&p, &TandemOptions::lean(0.3, 1.0), 1).unwrap().sub_intervals, 4);
        assert_eq!(run_tandem(&p, &TandemOptions::lean(2.0, 1.0), 1).unwrap().sub_intervals, 1);
    }

    #[test]
    fn lone_arrival_into_empty_tandem_waits_zero() {
        let mut p = params(1.0, 0.5, 0.0, 1.0);
        p.arrival_rate = 0.3;
        let out = run_tandem(&p, &TandemOptions::lean(0.25, 50.0), 4).unwrap();
        let first = out.releases.first().expect("one arrival within the horizon");
        assert_eq!(first.wait(), 0.0);
    }

    #[test]
    fn lemma_and_policy_invariants_hold() {
        let p = params(1.0, 0.5, 0.5, 1.0).with_initial(vec![0.1, 0.4, 0.8], None);
        for seed in 0..5 {
            let out = run_tandem(&p, &TandemOptions::new(0.25, 200.0), seed).unwrap();
            assert_eq!(out.checks.total(), 0, "{:?}", out.checks);
            let t1 = out.t1.unwrap();
            assert!(t1 <= 3.0 + 1e-9);
            assert!(out.y_min_after_t1.unwrap() >= 0.25 - 1e-9);
            // strict alternation
            for w in out.batches.windows(2) {
                assert_ne!(w[0].parity, w[1].parity);
            }
            assert_eq!(out.batches[0].parity, Parity::Odd);
            // at most one vehicle per sub-interval per batch, from the right parity
            let mut seen = std::collections::HashSet::new();
            for r in &out.releases {
                assert!(seen.insert((r.release_time.to_bits(), r.sub_interval)));
            }
            for r in &out.releases {
                let b = out
                    .batches
                    .iter()
                    .rev()
                    .find(|b| b.time == r.release_time && b.count > 0)
                    .unwrap();
                assert_eq!(Parity::of_index(r.sub_interval - 1), b.parity);
            }
        }
    }

    #[test]
    fn reordering_is_allowed_but_counts_match() {
        let p = params(1.0, 0.5, 2.0, 1.0);
        let out = run_tandem(&p, &TandemOptions::lean(0.25, 100.0), 9).unwrap();
        let arrived: u64 = out.sub_queues.iter().map(|s| s.arrivals).sum();
        assert_eq!(arrived as usize, out.releases.len() + out.pending);
        let mut ids: Vec<u64> = out.releases.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), out.releases.len());
    }

    #[test]
    fn perturbation_needs_releases() {
        let p = params(1.0, 0.5, 0.0, 1.0);
        let out = run_tandem(&p, &TandemOptions::lean(0.25, 1.0), 1).unwrap();
        assert!(measure_perturbation(&[out]).is_err());
    }

    #[test]
    fn supercritical_is_flagged() {
        let p = HtqParams::new(2.0, 2.0, 20.0, D::uniform(0.0, 2.0).unwrap(), D::uniform(0.0, 1.0).unwrap());
        let out = run_tandem(&p, &TandemOptions::lean(0.1, 200.0), 3).unwrap();
        assert!(htq1_boundedness(&out).any_flagged);
    }

    #[test]
    fn subcritical_is_not_flagged() {
        let p = params(1.0, 0.5, 0.5, 1.0);
        let out = run_tandem(&p, &TandemOptions::lean(0.25, 2000.0), 3).unwrap();
        let rep = htq1_boundedness(&out);
        assert!(!rep.any_flagged, "{rep:?}");
        assert!(rep.sub_queues.iter().all(|s| !s.growing));
    }

    #[test]
    fn deterministic() {
        let p = params(1.0, 0.5, 1.0, 1.0);
        let a = run_tandem(&p, &TandemOptions::new(0.25, 20.0), 5).unwrap();
        let b = run_tandem(&p, &TandemOptions::new(0.25, 20.0), 5).unwrap();
        assert_eq!(a, b);
    }
}
