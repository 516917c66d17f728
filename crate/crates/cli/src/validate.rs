//! Invariant and oracle suite behind `htq validate`.

use htq::dist::{GriddedPdf, SpatialDistribution};
use htq::model::{self, HtqParams, IntegratorConfig, Violations};
use htq::rng;
use htq::sim::{self, SimOptions};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ValidateConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub evaluated: u64,
    pub violated: u64,
    pub worst_excess: f64,
    /// Report-only checks never fail the suite.
    pub hard: bool,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        !self.hard || self.violated == 0
    }

    pub fn render(&self) -> String {
        let status = if !self.hard {
            "REPORT"
        } else if self.violated == 0 {
            "PASS"
        } else {
            "FAIL"
        };
        let mut s = format!(
            "{status:<6} {}: {} checked, {} violations",
            self.name, self.evaluated, self.violated
        );
        if self.violated > 0 {
            s.push_str(&format!(" (worst excess {:.3e})", self.worst_excess));
        }
        if !self.hard {
            s.push_str(" [report-only]");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckLine>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckLine::passed)
    }
}

/// Hard check lines for every tally in `v`.
pub fn lines_of(v: &Violations, prefix: &str) -> Vec<CheckLine> {
    lines(v, prefix, true)
}

fn lines(v: &Violations, prefix: &str, hard: bool) -> Vec<CheckLine> {
    v.checks
        .iter()
        .map(|(name, t)| CheckLine {
            name: format!("{prefix}{name}"),
            evaluated: t.evaluated,
            violated: t.violated,
            worst_excess: t.worst_excess,
            hard,
        })
        .collect()
}

/// Headways of `n` vehicles spread over a ring of length `length`.
pub fn random_headways<R: Rng>(rng: &mut R, n: usize, length: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total * length).collect()
}

fn rate_terms_scale(y: &[f64], m: f64) -> f64 {
    let n = y.len();
    (0..n)
        .filter(|i| y[*i] > 0.0)
        .map(|i| m * y[i].powf(m - 1.0) * (y[(i + 1) % n].powf(m) + y[i].powf(m)))
        .sum()
}

/// The service-rate lemmas on random states.
pub fn lemma_suite(states: usize, exponents: &[f64], n_max: usize, seed: u64) -> Violations {
    let mut v = Violations::default();
    for (s, &m) in exponents.iter().enumerate() {
        let mut rng = rng::stream(seed, 100 + s as u64);
        for _ in 0..states {
            let length = rng.random_range(0.1..3.0);
            let n = rng.random_range(1..=n_max);
            let y = random_headways(&mut rng, n, length);
            let s_y = model::service_rate(&y, m);
            let (lo, hi) = model::service_rate_bounds(length, m, n);
            let tol = 1e-12 * hi;
            v.record("rate_bounds", (lo - s_y).max(s_y - hi) - tol);

            let ds = model::service_rate_derivative(&y, m);
            let dtol = 1e-10 * rate_terms_scale(&y, m);
            let wrong_way = if m > 1.0 { ds } else { -ds };
            v.record("rate_derivative_sign", wrong_way - dtol);

            if n >= 2 {
                // departure: two adjacent headways merge
                let i = rng.random_range(0..n);
                let (y1, y2) = (y[i], y[(i + 1) % n]);
                let mut merged: Vec<f64> = y.clone();
                merged[i] = y1 + y2;
                merged.remove((i + 1) % n);
                let gain = model::service_rate(&merged, m) - s_y;
                let change = if m > 1.0 { gain } else { -gain };
                let bound = model::jump_delta_bound(y1, y2, m);
                let jtol = 1e-12 * s_y.max(1.0);
                v.record("departure_jump", (-change).max(change - bound) - jtol);
            }
            // arrival: one headway splits
            let j = rng.random_range(0..n);
            let a = y[j] * rng.random_range(0.0..1.0);
            let mut split = y.clone();
            split[j] = y[j] - a;
            split.insert(j, a);
            let gain = model::service_rate(&split, m) - s_y;
            let change = if m > 1.0 { -gain } else { gain };
            let bound = model::jump_delta_bound(a, y[j] - a, m);
            let jtol = 1e-12 * s_y.max(1.0);
            v.record("arrival_jump", (-change).max(change - bound) - jtol);
        }
    }
    v
}

/// The KL form of `d/dm` of the service-rate derivative at `m = 1` against
/// a central difference, on interior states.
pub fn kl_suite(states: usize, seed: u64) -> Result<Violations> {
    let mut v = Violations::default();
    let mut rng = rng::stream(seed, 200);
    for _ in 0..states {
        let n = rng.random_range(2..=12);
        let length = rng.random_range(0.05..2.0);
        let floor = 0.1 * length / n as f64;
        let y: Vec<f64> = random_headways(&mut rng, n, length - floor * n as f64)
            .into_iter()
            .map(|x| x + floor)
            .collect();
        let (analytic, numeric) = model::kl_derivative_check(&y, length)?;
        v.record("kl_identity", (analytic - numeric).abs() - 1e-6);
        v.record("kl_nonpositive", analytic - 1e-15);
    }
    Ok(v)
}

/// Growth bound near `m = 1` on rings shorter than `e^-2`; reported only.
pub fn pinsker_report(states: usize, seed: u64) -> Violations {
    let mut v = Violations::default();
    let mut rng = rng::stream(seed, 300);
    for _ in 0..states {
        let n = rng.random_range(2..=12);
        let length = rng.random_range(0.01..(-2f64).exp());
        let y = random_headways(&mut rng, n, length);
        v.record("pinsker_m0.99", -model::pinsker_slack(&y, length, 0.99));
        v.record("pinsker_m0.9", -model::pinsker_slack(&y, length, 0.9));
    }
    v
}

fn triangular(h: f64) -> Result<GriddedPdf> {
    let k = (2.0 / h).round() as usize;
    let samples: Vec<f64> = (0..=k)
        .map(|i| {
            let t = i as f64 * h;
            if t <= 1.0 {
                t
            } else {
                2.0 - t
            }
        })
        .collect();
    Ok(GriddedPdf::from_density_samples(h, &samples)?)
}

/// `int z psi(z) psi_{n-1}(t - z) dz = (t / n) psi_n(t)` on the grid, for
/// uniform and triangular `psi` and `n = 2..=6`.
pub fn convolution_suite() -> Result<Violations> {
    let mut v = Violations::default();
    let h = 2e-3;
    let cases = [
        SpatialDistribution::uniform(0.0, 1.0)?.to_grid(h, 6.0)?,
        triangular(h)?.with_t_max(12.0)?,
    ];
    for psi in &cases {
        for n in 2..=6 {
            let lhs = psi.weighted(|z| z).convolve(&psi.n_fold(n - 1)?)?;
            let psi_n = psi.n_fold(n)?;
            for k in 0..=psi_n.last_node() {
                let d = psi_n.density(k);
                if d > 1e-3 {
                    let rhs = k as f64 * h / n as f64 * d;
                    v.record("convolution_identity", ((lhs.density(k) - rhs) / rhs).abs() - 1e-4);
                }
            }
        }
    }
    Ok(v)
}

/// Monitored simulations; every dynamics invariant is checked at each
/// accepted step and jump.
pub fn monitored_runs(cfg: &ValidateConfig, seed: u64) -> Result<Violations> {
    let phi = SpatialDistribution::uniform(0.0, 1.0)?;
    let psi = SpatialDistribution::uniform(0.0, 1.0)?;
    let integrator = IntegratorConfig {
        rtol: cfg.rtol,
        ..IntegratorConfig::default()
    };
    let opts = SimOptions {
        monitor: true,
        integrator,
        ..SimOptions::lean(cfg.sim_horizon)
    };
    let runs: Vec<Violations> = [(0.5, 3.0), (2.0, 1.5)]
        .par_iter()
        .flat_map(|&(m, lambda)| {
            let params = HtqParams::new(1.0, m, lambda, phi.clone(), psi.clone());
            let opts = &opts;
            (0..cfg.sim_reps).into_par_iter().map(move |k| {
                sim::run(&params, opts, rng::replication_seed(seed, k)).map(|o| o.violations.unwrap_or_default())
            })
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut all = Violations::default();
    for r in runs.iter().chain(&relaxation_runs(cfg, &integrator, seed)?) {
        all.merge(r);
    }
    Ok(all)
}

/// Ten vehicles at random positions relaxing with no arrivals or
/// departures. Long uninterrupted stretches let the step size grow, so a
/// loose tolerance shows up here first.
fn relaxation_runs(cfg: &ValidateConfig, integrator: &IntegratorConfig, seed: u64) -> Result<Vec<Violations>> {
    let n = 10;
    let opts = SimOptions {
        monitor: true,
        integrator: *integrator,
        ..SimOptions::lean(cfg.sim_horizon.max(50.0))
    };
    (0..cfg.sim_reps)
        .into_par_iter()
        .flat_map(|k| [0.5, 2.0].into_par_iter().map(move |m| (k, m)))
        .map(|(k, m)| {
            let mut rng = rng::stream(seed, 400 + k);
            let mut x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            x0.sort_by(f64::total_cmp);
            let params = HtqParams::new(1.0, m, 0.0, SpatialDistribution::dirac(0.0)?, SpatialDistribution::dirac(1.0)?)
                .with_initial(x0, Some(vec![1e6; n]));
            let out = sim::run(&params, &opts, rng::replication_seed(seed, k))?;
            Ok(out.violations.unwrap_or_default())
        })
        .collect()
}

pub fn run_suite(cfg: &ValidateConfig, seed: u64) -> Result<SuiteReport> {
    let mut checks = lines(&lemma_suite(cfg.states, &[0.3, 0.5, 2.0, 4.0], 50, seed), "", true);
    checks.extend(lines(&kl_suite(cfg.kl_states, seed)?, "", true));
    checks.extend(lines(&convolution_suite()?, "", true));
    checks.extend(lines(&monitored_runs(cfg, seed)?, "sim.", true));
    checks.extend(lines(&pinsker_report(cfg.kl_states, seed), "", false));
    Ok(SuiteReport { checks })
}
