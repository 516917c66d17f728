//! Ring state, car-following dynamics between jumps, and the jumps themselves.
//!
//! Vehicles are stored in cyclic order: vehicle `i + 1` is directly in front
//! of vehicle `i`, and the last vehicle is behind the first. Positions are
//! kept unwrapped (`u_0 <= u_1 <= .. <= u_{N-1} <= u_0 + L`), so the headway
//! of vehicle `i` is `u_{i+1} - u_i` and the last one wraps to `u_0 + L`.
//! Travel is the unwrapped displacement since arrival, so quotas longer than
//! a lap need no special handling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::SpatialDistribution;
use crate::{Error, Result};

/// The tuple `(L, m, lambda, phi, psi, x0)` describing one queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtqParams {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "m")]
    pub exponent: f64,
    #[serde(rename = "lambda")]
    pub arrival_rate: f64,
    /// Arrival location law.
    pub phi: SpatialDistribution,
    /// Travel distance law.
    pub psi: SpatialDistribution,
    /// Initial ring positions.
    #[serde(default)]
    pub x0: Vec<f64>,
    /// Travel quotas of the initial vehicles; drawn from `psi` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
}

impl HtqParams {
    pub fn new(length: f64, exponent: f64, arrival_rate: f64, phi: SpatialDistribution, psi: SpatialDistribution) -> Self {
        HtqParams {
            length,
            exponent,
            arrival_rate,
            phi,
            psi,
            x0: Vec::new(),
            q0: None,
        }
    }

    pub fn with_initial(mut self, x0: Vec<f64>, q0: Option<Vec<f64>>) -> Self {
        self.x0 = x0;
        self.q0 = q0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::invalid(format!("L must be positive, got {}", self.length)));
        }
        if !(self.exponent > 0.0) || !self.exponent.is_finite() {
            return Err(Error::invalid(format!("m must be positive, got {}", self.exponent)));
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.arrival_rate)));
        }
        if self.phi.support_hi() > self.length * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "phi support [0, {}] exceeds the ring length {}",
                self.phi.support_hi(),
                self.length
            )));
        }
        if let Some(x) = self.x0.iter().find(|x| !(**x >= 0.0 && **x <= self.length)) {
            return Err(Error::invalid(format!("initial position {x} outside [0, {}]", self.length)));
        }
        if let Some(q) = &self.q0 {
            if q.len() != self.x0.len() {
                return Err(Error::invalid(format!(
                    "q0 has {} entries but x0 has {}",
                    q.len(),
                    self.x0.len()
                )));
            }
            if let Some(d) = q.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
                return Err(Error::invalid(format!("initial quota {d} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// `y^m` with `0^m = 0` and cheap paths for common exponents.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Power {
    m: f64,
    kind: PowerKind,
}

#[derive(Debug, Clone, Copy)]
enum PowerKind {
    One,
    Two,
    Half,
    General,
}

impl Power {
    pub(crate) fn new(m: f64) -> Self {
        let kind = if m == 1.0 {
            PowerKind::One
        } else if m == 2.0 {
            PowerKind::Two
        } else if m == 0.5 {
            PowerKind::Half
        } else {
            PowerKind::General
        };
        Power { m, kind }
    }

    #[inline]
    pub(crate) fn of(self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self.kind {
            PowerKind::One => y,
            PowerKind::Two => y * y,
            PowerKind::Half => y.sqrt(),
            PowerKind::General => y.powf(self.m),
        }
    }
}

/// Service rate `s(y) = sum y_i^m`.
pub fn service_rate(y: &[f64], m: f64) -> f64 {
    let p = Power::new(m);
    y.iter().map(|v| p.of(*v)).sum()
}

/// Headway velocities `y_{i+1}^m - y_i^m` (cyclic).
pub fn flow_field(y: &[f64], m: f64) -> Vec<f64> {
    let p = Power::new(m);
    let n = y.len();
    (0..n).map(|i| p.of(y[(i + 1) % n]) - p.of(y[i])).collect()
}

/// Time derivative of the service rate between jumps,
/// `m sum y_i^(m-1) (y_{i+1}^m - y_i^m)`.
pub fn service_rate_derivative(y: &[f64], m: f64) -> f64 {
    let n = y.len();
    (0..n)
        .map(|i| {
            let yi = y[i];
            if yi <= 0.0 {
                return 0.0;
            }
            m * yi.powf(m - 1.0) * (y[(i + 1) % n].max(0.0).powf(m) - yi.powf(m))
        })
        .sum()
}

/// Headways of ring positions taken in cyclic (counter-clockwise to
/// clockwise) order.
pub fn headways_of(positions: &[f64], length: f64) -> Result<Vec<f64>> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::NoVehicles);
    }
    if n == 1 {
        return Ok(vec![length]);
    }
    Ok((0..n)
        .map(|i| (positions[(i + 1) % n] - positions[i]).rem_euclid(length))
        .collect())
}

/// The derivative of the service rate derivative with respect to `m` at
/// `m = 1`, analytically (as `-L` times a KL divergence) and by a central
/// finite difference with step `1e-5`.
pub fn kl_derivative_check(y: &[f64], length: f64) -> Result<(f64, f64)> {
    if let Some(i) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::KlUndefined(i));
    }
    let n = y.len();
    let analytic = -length
        * (0..n)
            .map(|i| {
                let p = y[i] / length;
                let q = y[(i + n - 1) % n] / length;
                p * (p / q).ln()
            })
            .sum::<f64>();
    let h = 1e-5;
    let numeric = (service_rate_derivative(y, 1.0 + h) - service_rate_derivative(y, 1.0 - h)) / (2.0 * h);
    Ok((analytic, numeric))
}

/// Slack in the Pinsker-type growth bound near `m = 1`:
/// `ds/dt - 2 ((1 - m) / L) (y_max - y_min)^2`. Negative means the bound
/// fails at this state; it is only claimed for `m` close enough to one.
pub fn pinsker_slack(y: &[f64], length: f64, m: f64) -> f64 {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    service_rate_derivative(y, m) - 2.0 * ((1.0 - m) / length) * (hi - lo).powi(2)
}

/// Bounds on the service rate with `n` vehicles on a ring of length `length`.
pub fn service_rate_bounds(length: f64, m: f64, n: usize) -> (f64, f64) {
    let a = length.powf(m);
    let b = a * (n as f64).powf(1.0 - m);
    if m >= 1.0 {
        (b, a)
    } else {
        (a, b)
    }
}

/// Largest possible size of the service-rate change when a headway
/// `y1 + y2` is split into `y1, y2` (arrival) or merged (departure).
pub fn jump_delta_bound(y1: f64, y2: f64, m: f64) -> f64 {
    if m >= 1.0 {
        (y1 + y2).powf(m) * (1.0 - 2f64.powf(1.0 - m))
    } else {
        let p = Power::new(m);
        p.of(y1).min(p.of(y2))
    }
}

/// Service rate, workload and headway extremes at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub service_rate: f64,
    pub workload: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Vehicles on the ring. See the module docs for the coordinate convention.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub time: f64,
    length: f64,
    ids: Vec<u64>,
    u: Vec<f64>,
    start: Vec<f64>,
    quota: Vec<f64>,
}

/// What a departure removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Departure {
    pub id: u64,
    /// Headway behind the departing vehicle (of its rear neighbor).
    pub rear_headway: f64,
    /// Headway of the departing vehicle.
    pub front_headway: f64,
}

/// Where an arrival was placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub index: usize,
    /// Headway of the rear neighbor after the insertion.
    pub rear_headway: f64,
    /// Headway of the new vehicle.
    pub front_headway: f64,
}

impl QueueState {
    pub fn empty(length: f64) -> Self {
        QueueState {
            time: 0.0,
            length,
            ids: Vec::new(),
            u: Vec::new(),
            start: Vec::new(),
            quota: Vec::new(),
        }
    }

    /// Initial state: vehicle `k` sits at `positions[k]` with quota
    /// `quotas[k]` and id `k`.
    pub fn with_vehicles(length: f64, positions: &[f64], quotas: &[f64]) -> Result<Self> {
        if positions.len() != quotas.len() {
            return Err(Error::invalid("positions and quotas differ in length"));
        }
        let mut s = QueueState::empty(length);
        for (k, (x, d)) in positions.iter().zip(quotas).enumerate() {
            s.apply_arrival(x.rem_euclid(length), *d, k as u64);
        }
        Ok(s)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Vehicle ids in cyclic order.
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Ring positions in `[0, L)`, cyclic order.
    pub fn positions(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.rem_euclid(self.length)).collect()
    }

    pub fn traveled(&self, i: usize) -> f64 {
        self.u[i] - self.start[i]
    }

    pub fn quota(&self, i: usize) -> f64 {
        self.quota[i]
    }

    pub fn remaining(&self, i: usize) -> f64 {
        (self.quota[i] - self.traveled(i)).max(0.0)
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|x| *x == id)
    }

    /// Unwrapped position of vehicle `i`. Useful for pathwise comparisons.
    pub fn unwrapped(&self, i: usize) -> f64 {
        self.u[i]
    }

    #[inline]
    fn headway_at(&self, i: usize) -> f64 {
        let n = self.u.len();
        let y = if i + 1 < n {
            self.u[i + 1] - self.u[i]
        } else {
            self.u[0] + self.length - self.u[i]
        };
        y.max(0.0)
    }

    /// Headway of every vehicle (distance to the vehicle in front).
    pub fn headways(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::NoVehicles);
        }
        Ok((0..self.len()).map(|i| self.headway_at(i)).collect())
    }

    pub fn workload(&self) -> f64 {
        (0..self.len()).map(|i| self.remaining(i)).sum()
    }

    /// Rate report; the empty ring reports zero rate and workload and
    /// `y_min = y_max = L`.
    pub fn report(&self, m: f64) -> RateReport {
        if self.is_empty() {
            return RateReport {
                service_rate: 0.0,
                workload: 0.0,
                y_min: self.length,
                y_max: self.length,
            };
        }
        let p = Power::new(m);
        let mut s = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.len() {
            let y = self.headway_at(i);
            s += p.of(y);
            lo = lo.min(y);
            hi = hi.max(y);
        }
        RateReport {
            service_rate: s,
            workload: self.workload(),
            y_min: lo,
            y_max: hi,
        }
    }

    /// Insert a vehicle at ring location `location`. A vehicle landing on an
    /// occupied spot goes directly behind the incumbent.
    pub fn apply_arrival(&mut self, location: f64, quota: f64, id: u64) -> Arrival {
        let l = self.length;
        if self.is_empty() {
            let z = location.rem_euclid(l);
            self.ids.push(id);
            self.u.push(z);
            self.start.push(z);
            self.quota.push(quota);
            return Arrival {
                index: 0,
                rear_headway: l,
                front_headway: l,
            };
        }
        let u0 = self.u[0];
        let mut d = (location - u0).rem_euclid(l);
        if d >= l {
            d = 0.0;
        }
        let n = self.len();
        let index = if d == 0.0 {
            0
        } else {
            (1..n).find(|&i| self.u[i] - u0 >= d).unwrap_or(n)
        };
        let z = u0 + d;
        self.ids.insert(index, id);
        self.u.insert(index, z);
        self.start.insert(index, z);
        self.quota.insert(index, quota);
        let n = self.len();
        Arrival {
            index,
            rear_headway: self.headway_at((index + n - 1) % n),
            front_headway: self.headway_at(index),
        }
    }

    pub fn apply_departure(&mut self, id: u64) -> Result<Departure> {
        let i = self.index_of(id).ok_or(Error::UnknownVehicle(id))?;
        let n = self.len();
        let front = self.headway_at(i);
        let rear = self.headway_at((i + n - 1) % n);
        self.ids.remove(i);
        self.u.remove(i);
        self.start.remove(i);
        self.quota.remove(i);
        if i == 0 && !self.u.is_empty() {
            self.rebase();
        }
        Ok(Departure {
            id,
            rear_headway: rear,
            front_headway: front,
        })
    }

    /// Shift all unwrapped coordinates by whole laps so that `u_0 in [0, L)`.
    fn rebase(&mut self) {
        if self.u.is_empty() {
            return;
        }
        let laps = (self.u[0] / self.length).floor();
        if laps != 0.0 {
            let shift = laps * self.length;
            self.u.iter_mut().for_each(|v| *v -= shift);
            self.start.iter_mut().for_each(|v| *v -= shift);
        }
    }
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Relative tolerance, applied to the ring length.
    pub rtol: f64,
    /// Absolute time tolerance of departure instants, in units of the ring
    /// time scale `L^(1-m)`.
    pub event_tol: f64,
    /// Smallest admissible step, in units of the ring time scale.
    pub min_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-8,
            event_tol: 1e-10,
            min_step: 1e-14,
        }
    }
}

/// How a call to [`Integrator::integrate_to`] ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Reached,
    /// Vehicles whose quota is used up at the current time, in increasing id.
    /// They are still on the ring.
    Departures(Vec<u64>),
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince stepper for the ring dynamics `x_i' = y_i^m`,
/// with departure localization.
#[derive(Debug, Clone)]
pub struct Integrator {
    m: f64,
    power: Power,
    config: IntegratorConfig,
    length: f64,
    time_scale: f64,
    step: f64,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    trial: Vec<f64>,
    /// Total accepted steps, for diagnostics.
    pub accepted_steps: u64,
}

impl Integrator {
    pub fn new(length: f64, m: f64, config: IntegratorConfig) -> Self {
        let time_scale = length.powf(1.0 - m);
        Integrator {
            m,
            power: Power::new(m),
            config,
            length,
            time_scale,
            step: 0.01 * time_scale,
            k: Default::default(),
            stage: Vec::new(),
            trial: Vec::new(),
            accepted_steps: 0,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }

    pub fn config(&self) -> IntegratorConfig {
        self.config
    }

    /// Absolute departure-time tolerance.
    pub fn event_tolerance(&self) -> f64 {
        self.config.event_tol * self.time_scale
    }

    fn velocities(power: Power, length: f64, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n - 1 {
            out[i] = power.of(u[i + 1] - u[i]);
        }
        out[n - 1] = power.of(u[0] + length - u[n - 1]);
    }

    fn resize(&mut self, n: usize) {
        for k in self.k.iter_mut() {
            k.resize(n, 0.0);
        }
        self.stage.resize(n, 0.0);
        self.trial.resize(n, 0.0);
    }

    /// One RK step of size `h` from `u` (with `k[0] = f(u)` already set);
    /// writes the new point to `self.trial`, the stage slopes to `k[1..]`,
    /// and returns the scaled error estimate.
    fn try_step(&mut self, u: &[f64], h: f64) -> f64 {
        let n = u.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += a * self.k[j][i];
                    }
                }
                self.stage[i] = u[i] + h * acc;
            }
            Self::velocities(self.power, self.length, &self.stage, &mut self.k[s]);
            if s == 6 {
                self.trial.copy_from_slice(&self.stage);
            }
        }
        let scale = self.config.rtol * self.length + 1e-15 * self.length;
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                if *ej != 0.0 {
                    e += ej * self.k[j][i];
                }
            }
            err = err.max((h * e).abs() / scale);
        }
        err
    }

    /// Largest `traveled - quota` over the vehicles at point `u`.
    fn overshoot(state: &QueueState, u: &[f64]) -> f64 {
        let mut g = f64::NEG_INFINITY;
        for i in 0..u.len() {
            g = g.max(u[i] - state.start[i] - state.quota[i]);
        }
        g
    }

    fn due(&self, state: &QueueState) -> Vec<u64> {
        let eps = self.event_tolerance();
        let mut ids: Vec<u64> = (0..state.len())
            .filter(|&i| {
                let v = self.power.of(state.headway_at(i));
                let slack = 2.0 * v * eps + 1e-13 * self.length.max(state.quota[i]);
                state.quota[i] - state.traveled(i) <= slack
            })
            .map(|i| state.ids[i])
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Evolve `state` until `t_end` or the first departure, whichever comes
    /// first. `observe` sees the state after every accepted step.
    pub fn integrate_to(
        &mut self,
        state: &mut QueueState,
        t_end: f64,
        mut observe: impl FnMut(&QueueState),
    ) -> Result<Advance> {
        if state.is_empty() {
            state.time = state.time.max(t_end);
            return Ok(Advance::Reached);
        }
        let due = self.due(state);
        if !due.is_empty() {
            return Ok(Advance::Departures(due));
        }
        let n = state.len();
        self.resize(n);
        let min_step = self.config.min_step * self.time_scale;
        Self::velocities(self.power, self.length, &state.u, &mut self.k[0]);
        while state.time < t_end {
            let left = t_end - state.time;
            let clipped = self.step >= left;
            let h = if clipped { left } else { self.step };
            let u = std::mem::take(&mut state.u);
            let err = self.try_step(&u, h);
            state.u = u;
            if !(err <= 1.0) {
                if h <= min_step {
                    return Err(Error::IntegratorStalled {
                        time: state.time,
                        step: h,
                        vehicles: n,
                        headways: state.headways().unwrap_or_default(),
                    });
                }
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                self.step = h * factor;
                continue;
            }
            let grow = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            if !clipped || h * grow < self.step {
                self.step = h * grow;
            }
            if Self::overshoot(state, &self.trial) >= 0.0 {
                self.locate_departure(state, h)?;
                observe(state);
                self.accepted_steps += 1;
                let due = self.due(state);
                debug_assert!(!due.is_empty());
                return Ok(Advance::Departures(due));
            }
            state.u.copy_from_slice(&self.trial);
            state.time = if clipped { t_end } else { state.time + h };
            self.k.swap(0, 6);
            self.accepted_steps += 1;
            let before = state.u[0];
            state.rebase();
            if state.u[0] != before {
                Self::velocities(self.power, self.length, &state.u, &mut self.k[0]);
            }
            observe(state);
        }
        Ok(Advance::Reached)
    }

    /// The step of size `h` from `state` crosses a quota; land on the first
    /// crossing to within the event tolerance. `k[0]` holds `f(state)`.
    fn locate_departure(&mut self, state: &mut QueueState, h: f64) -> Result<()> {
        let eps = self.event_tolerance();
        let u0 = std::mem::take(&mut state.u);
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut g_lo = Self::overshoot(state, &u0);
        let mut g_hi = Self::overshoot(state, &self.trial);
        let mut hi_point = self.trial.clone();
        let mut side = 0i8;
        let mut iterations = 0;
        while (hi - lo) * h > eps && iterations < 200 {
            iterations += 1;
            // Illinois false position, falling back to bisection every third try
            let mut theta = if iterations % 3 == 0 {
                0.5 * (lo + hi)
            } else {
                (lo - g_lo * (hi - lo) / (g_hi - g_lo)).clamp(lo, hi)
            };
            if !(theta > lo && theta < hi) {
                theta = 0.5 * (lo + hi);
            }
            self.try_step(&u0, theta * h);
            let g = Self::overshoot(state, &self.trial);
            if g >= 0.0 {
                hi = theta;
                g_hi = g;
                hi_point.copy_from_slice(&self.trial);
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = theta;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            }
        }
        state.u = hi_point;
        state.time += hi * h;
        state.rebase();
        Ok(())
    }
}

/// Counts of invariant violations, keyed by check name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Violations {
    pub checks: BTreeMap<&'static str, CheckTally>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CheckTally {
    pub evaluated: u64,
    pub violated: u64,
    pub worst_excess: f64,
}

impl Violations {
    pub fn record(&mut self, name: &'static str, excess: f64) {
        let t = self.checks.entry(name).or_default();
        t.evaluated += 1;
        if excess > 0.0 {
            t.violated += 1;
            t.worst_excess = t.worst_excess.max(excess);
        }
    }

    pub fn total(&self) -> u64 {
        self.checks.values().map(|t| t.violated).sum()
    }

    pub fn merge(&mut self, other: &Violations) {
        for (k, v) in &other.checks {
            let t = self.checks.entry(k).or_default();
            t.evaluated += v.evaluated;
            t.violated += v.violated;
            t.worst_excess = t.worst_excess.max(v.worst_excess);
        }
    }
}

/// Checks the between-jump and jump properties of the dynamics on a running
/// trajectory: headway sum, service-rate bounds, monotonicity of `y_min`,
/// `y_max` and `s` between jumps, and the size of service-rate jumps.
#[derive(Debug, Clone)]
pub struct Monitor {
    m: f64,
    length: f64,
    /// Allowed slack per check, relative to `L` (headways) or `L^m` (rates).
    pub tolerance: f64,
    prev: Option<RateReport>,
    pub violations: Violations,
}

impl Monitor {
    pub fn new(length: f64, m: f64, tolerance: f64) -> Self {
        Monitor {
            m,
            length,
            tolerance,
            prev: None,
            violations: Violations::default(),
        }
    }

    fn rate_scale(&self) -> f64 {
        self.length.powf(self.m)
    }

    fn check_state(&mut self, state: &QueueState) -> Option<RateReport> {
        if state.is_empty() {
            return None;
        }
        let r = state.report(self.m);
        let sum: f64 = (0..state.len()).map(|i| state.headway_at(i)).sum();
        self.violations
            .record("headway_sum", (sum - self.length).abs() - 1e-10 * self.length);
        let (lo, hi) = service_rate_bounds(self.length, self.m, state.len());
        let slack = self.tolerance * self.rate_scale();
        self.violations
            .record("rate_bounds", (lo - r.service_rate).max(r.service_rate - hi) - slack);
        Some(r)
    }

    /// Call after each accepted integration step.
    pub fn on_step(&mut self, state: &QueueState) {
        let Some(r) = self.check_state(state) else {
            return;
        };
        if let Some(p) = self.prev {
            let tol = self.tolerance * self.length;
            self.violations.record("y_min_nondecreasing", p.y_min - r.y_min - tol);
            self.violations.record("y_max_nonincreasing", r.y_max - p.y_max - tol);
            let stol = self.tolerance * self.rate_scale();
            let drift = r.service_rate - p.service_rate;
            if self.m > 1.0 {
                self.violations.record("rate_monotone", drift - stol);
            } else if self.m < 1.0 {
                self.violations.record("rate_monotone", -drift - stol);
            }
        }
        self.prev = Some(r);
    }

    /// Call after an arrival has been applied.
    pub fn on_arrival(&mut self, before: f64, state: &QueueState, a: &Arrival) {
        let after = self.check_state(state);
        if let (Some(r), true) = (after, state.len() >= 2) {
            let delta = r.service_rate - before;
            let bound = jump_delta_bound(a.rear_headway, a.front_headway, self.m);
            let slack = self.tolerance * self.rate_scale();
            if self.m > 1.0 {
                self.violations.record("arrival_delta", (-delta - bound).max(delta) - slack);
            } else if self.m < 1.0 {
                self.violations.record("arrival_delta", (delta - bound).max(-delta) - slack);
            }
        }
        self.prev = after;
    }

    /// Call after a departure has been applied; `before` is the service
    /// rate just before it.
    pub fn on_departure(&mut self, before: f64, state: &QueueState, d: &Departure) {
        let after = self.check_state(state);
        if let Some(r) = after {
            let delta = r.service_rate - before;
            let bound = jump_delta_bound(d.rear_headway, d.front_headway, self.m);
            let slack = self.tolerance * self.rate_scale();
            if self.m > 1.0 {
                self.violations.record("departure_delta", (delta - bound).max(-delta) - slack);
            } else if self.m < 1.0 {
                self.violations.record("departure_delta", (-delta - bound).max(delta) - slack);
            }
        }
        self.prev = after;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn headway_examples() {
        assert_eq!(headways_of(&[0.3], 1.0).unwrap(), vec![1.0]);
        assert_eq!(
            headways_of(&[0.0, 0.25, 0.5, 0.75], 1.0).unwrap(),
            vec![0.25, 0.25, 0.25, 0.25]
        );
        let y = headways_of(&[0.9, 0.1], 1.0).unwrap();
        assert!(close(y[0], 0.2, 1e-12) && close(y[1], 0.8, 1e-12));
        assert!(matches!(headways_of(&[], 1.0), Err(Error::NoVehicles)));
        assert!(matches!(QueueState::empty(1.0).headways(), Err(Error::NoVehicles)));
    }

    #[test]
    fn service_rate_examples() {
        let y = [0.25; 4];
        assert_eq!(service_rate(&[0.1, 0.2, 0.7], 1.0), 1.0);
        assert!(close(service_rate(&y, 2.0), 0.25, 1e-15));
        assert!(close(service_rate(&y, 0.5), 2.0, 1e-15));
        assert_eq!(service_rate_bounds(1.0, 2.0, 4).0, 0.25);
        assert_eq!(service_rate_bounds(1.0, 0.5, 4).1, 2.0);
    }

    #[test]
    fn flow_field_examples() {
        assert!(flow_field(&[0.25; 4], 3.0).iter().all(|v| *v == 0.0));
        let f = flow_field(&[0.2, 0.8], 1.0);
        assert!(close(f[0], 0.6, 1e-15) && close(f[1], -0.6, 1e-15));
    }

    #[test]
    fn kl_examples() {
        let (a, n) = kl_derivative_check(&[0.25; 4], 1.0).unwrap();
        assert!(a.abs() < 1e-15 && n.abs() < 1e-9);
        assert!(matches!(kl_derivative_check(&[0.5, 0.0, 0.5], 1.0), Err(Error::KlUndefined(1))));
    }

    #[test]
    fn arrival_placement() {
        let mut s = QueueState::empty(1.0);
        s.apply_arrival(0.3, 1.0, 0);
        assert_eq!(s.positions(), vec![0.3]);
        let mut s = QueueState::with_vehicles(1.0, &[0.0, 0.5], &[1.0, 1.0]).unwrap();
        s.apply_arrival(0.25, 1.0, 7);
        assert_eq!(s.ids(), &[0, 7, 1]);
        assert_eq!(s.positions(), vec![0.0, 0.25, 0.5]);
        // coincident: behind the incumbent
        s.apply_arrival(0.5, 1.0, 8);
        assert_eq!(s.ids(), &[0, 7, 8, 1]);
        let y = s.headways().unwrap();
        assert_eq!(y[2], 0.0);
        assert_eq!(y[3], 0.5);
        s.apply_arrival(0.0, 1.0, 9);
        assert_eq!(s.ids()[0], 9);
        assert_eq!(s.headways().unwrap()[0], 0.0);
        let a = s.apply_arrival(0.9, 1.0, 10);
        assert_eq!(a.index, 5);
        assert!(close(a.front_headway, 0.1, 1e-12));
    }

    #[test]
    fn departure_merges_headways() {
        let mut s = QueueState::with_vehicles(1.0, &[0.0, 0.5], &[1.0, 1.0]).unwrap();
        let before = s.report(2.0).service_rate;
        s.apply_departure(1).unwrap();
        let after = s.report(2.0).service_rate;
        assert!(close(before, 0.5, 1e-15) && close(after, 1.0, 1e-15));
        assert!(close(after - before, jump_delta_bound(0.5, 0.5, 2.0), 1e-15));
        s.apply_departure(0).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.workload(), 0.0);
        assert!(matches!(s.apply_departure(3), Err(Error::UnknownVehicle(3))));

        let mut s = QueueState::with_vehicles(1.0, &[0.0, 0.25, 0.5], &[1.0; 3]).unwrap();
        let before = s.report(0.5).service_rate;
        s.apply_departure(1).unwrap();
        let drop = before - s.report(0.5).service_rate;
        assert!(close(drop, 1.0 - 0.5f64.sqrt(), 1e-12));
        assert!(drop <= jump_delta_bound(0.25, 0.25, 0.5));
    }

    #[test]
    fn solitary_vehicle_departs_on_time() {
        for (l, m, quota, t) in [(1.0, 2.0, 0.5, 0.5), (2.0, 3.0, 4.0, 0.5)] {
            let mut s = QueueState::with_vehicles(l, &[0.0], &[quota]).unwrap();
            let mut int = Integrator::new(l, m, IntegratorConfig::default());
            let out = int.integrate_to(&mut s, 10.0, |_| {}).unwrap();
            assert_eq!(out, Advance::Departures(vec![0]));
            assert!(close(s.time, t, 1e-9), "{} vs {t}", s.time);
        }
    }

    #[test]
    fn equal_spacing_is_a_fixed_point() {
        let mut s = QueueState::with_vehicles(1.0, &[0.0, 0.25, 0.5, 0.75], &[10.0; 4]).unwrap();
        let mut int = Integrator::new(1.0, 2.0, IntegratorConfig::default());
        let mut rates = Vec::new();
        int.integrate_to(&mut s, 1.0, |st| rates.push(st.report(2.0).service_rate))
            .unwrap();
        assert!(rates.iter().all(|r| close(*r, 0.25, 1e-12)));
        for i in 0..4 {
            assert!(close(s.traveled(i), 0.0625, 1e-12));
        }
    }

    #[test]
    fn matches_small_step_euler() {
        let x = [0.0, 0.1, 0.45, 0.7];
        let m = 1.5;
        let mut s = QueueState::with_vehicles(1.0, &x, &[10.0; 4]).unwrap();
        let mut int = Integrator::new(1.0, m, IntegratorConfig::default());
        int.integrate_to(&mut s, 0.5, |_| {}).unwrap();
        // Euler oracle on unwrapped coordinates
        let mut u = x.to_vec();
        let dt = 1e-6;
        for _ in 0..500_000 {
            let v: Vec<f64> = (0..4)
                .map(|i| {
                    let y = if i < 3 { u[i + 1] - u[i] } else { u[0] + 1.0 - u[3] };
                    y.powf(m)
                })
                .collect();
            for i in 0..4 {
                u[i] += dt * v[i];
            }
        }
        for i in 0..4 {
            assert!(close(s.traveled(i), u[i] - x[i], 1e-5), "vehicle {i}");
        }
    }

    #[test]
    fn zero_quota_departs_immediately() {
        let mut s = QueueState::with_vehicles(1.0, &[0.2, 0.4], &[0.0, 1.0]).unwrap();
        let mut int = Integrator::new(1.0, 1.0, IntegratorConfig::default());
        let out = int.integrate_to(&mut s, 1.0, |_| {}).unwrap();
        assert_eq!(out, Advance::Departures(vec![0]));
        assert_eq!(s.time, 0.0);
    }

    #[test]
    fn simultaneous_departures_in_id_order() {
        let mut s = QueueState::with_vehicles(1.0, &[0.5, 0.0], &[0.25, 0.25]).unwrap();
        let mut int = Integrator::new(1.0, 1.0, IntegratorConfig::default());
        let out = int.integrate_to(&mut s, 1.0, |_| {}).unwrap();
        assert_eq!(out, Advance::Departures(vec![0, 1]));
        assert!(close(s.time, 0.5, 1e-9));
    }

    #[test]
    fn multi_lap_quota() {
        let mut s = QueueState::with_vehicles(1.0, &[0.7], &[3.5]).unwrap();
        let mut int = Integrator::new(1.0, 1.0, IntegratorConfig::default());
        let out = int.integrate_to(&mut s, 10.0, |_| {}).unwrap();
        assert_eq!(out, Advance::Departures(vec![0]));
        assert!(close(s.time, 3.5, 1e-9));
        assert!(close(s.positions()[0], 0.2, 1e-9));
    }

    #[test]
    fn monitor_is_quiet_on_a_clean_run() {
        let m = 2.0;
        let mut s = QueueState::with_vehicles(1.0, &[0.0, 0.05, 0.1, 0.6], &[10.0; 4]).unwrap();
        let mut int = Integrator::new(1.0, m, IntegratorConfig::default());
        let mut mon = Monitor::new(1.0, m, 1e-8);
        int.integrate_to(&mut s, 3.0, |st| mon.on_step(st)).unwrap();
        assert_eq!(mon.violations.total(), 0, "{:?}", mon.violations);
        assert!(mon.violations.checks["y_min_nondecreasing"].evaluated > 10);
    }
}
