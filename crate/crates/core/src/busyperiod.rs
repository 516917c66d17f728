//! Busy periods of a queue served at a constant rate `p`.
//!
//! With Poisson(`lambda`) arrivals each bringing work drawn from `psi`, the
//! joint density of the busy-period length `B` and the number `n` of
//! services in it is
//!
//! ```text
//! G_p(t, n, psi) = e^{-lambda t} (lambda t)^{n-1} / n! * psi~_n(t)
//! ```
//!
//! where `psi~` is `psi` scaled by `1/p` and `psi~_n` its `n`-fold
//! convolution. When the period starts from a given workload `w0` instead,
//!
//! ```text
//! G_p(t, n, w0) = e^{-lambda t} (lambda t)^{n-1} w0 / (t (n-1)! p) * psi~_{n-1}(t - w0/p).
//! ```
//!
//! Everything is computed in work units `u = p t` on a lattice of step `h`,
//! where `psi` itself lives; this way one table of convolution powers of
//! `psi` serves every rate `p`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist::{GriddedPdf, SpatialDistribution};
use crate::{Error, Result};

/// Relative slack for comparing event times with a threshold.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Theta {
    /// The period starts with one fresh arrival.
    FromPsi,
    /// The period starts with this much work already present.
    InitialWorkload { w0: f64 },
}

/// Lattice in work (distance) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    pub t_max: f64,
}

impl GridSpec {
    /// Step `mean(psi) / 200` and room for `n_max` services.
    pub fn default_for(psi: &SpatialDistribution, n_max: usize) -> GridSpec {
        let mean = psi.mean();
        let step = if mean > 0.0 { mean / 200.0 } else { 1e-3 };
        GridSpec {
            step,
            t_max: (n_max as f64 * psi.support_hi()).max(step),
        }
    }
}

/// Convolution powers `psi_0 .. psi_n` on one lattice.
#[derive(Debug, Clone)]
pub struct PsiPowers {
    grid: GridSpec,
    powers: Vec<GriddedPdf>,
}

impl PsiPowers {
    pub fn new(psi: &SpatialDistribution, grid: GridSpec) -> Result<Self> {
        let base = psi.to_grid(grid.step, grid.t_max)?;
        Ok(PsiPowers {
            grid,
            powers: vec![GriddedPdf::unit(grid.step, grid.t_max), base],
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Make sure `psi_0 ..= psi_n` are available.
    pub fn extend_to(&mut self, n: usize) -> Result<()> {
        while self.powers.len() <= n {
            let next = self.powers.last().unwrap().convolve(&self.powers[1])?;
            self.powers.push(next);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `psi_n`; panics unless [`PsiPowers::extend_to`] covered `n`.
    pub fn power(&self, n: usize) -> &GriddedPdf {
        &self.powers[n]
    }
}

/// Mass of the busy-period law not represented in a [`BusyDist`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Mass lost to the end of the grid.
    pub grid_loss: f64,
    /// Mass of `n > n_max` (only meaningful for a stable queue).
    pub n_tail: f64,
}

/// The joint law of busy-period duration and service count, one lattice
/// sub-density per `n`.
#[derive(Debug, Clone)]
pub struct BusyDist {
    pub p_rate: f64,
    pub lambda: f64,
    pub theta: Theta,
    pub n_max: usize,
    grid: GridSpec,
    /// Index `n - 1`, in work units.
    work: Vec<GriddedPdf>,
}

fn poisson_weight(mu: f64, u: f64, k: usize, log_norm: f64) -> f64 {
    // e^{-mu u} (mu u)^k / exp(log_norm)
    if k == 0 {
        return (-mu * u - log_norm).exp();
    }
    if mu == 0.0 || u <= 0.0 {
        return 0.0;
    }
    (-mu * u + k as f64 * (mu * u).ln() - log_norm).exp()
}

impl BusyDist {
    pub fn build(
        p_rate: f64,
        lambda: f64,
        psi: &SpatialDistribution,
        theta: Theta,
        n_max: usize,
        grid: GridSpec,
    ) -> Result<Self> {
        let mut powers = PsiPowers::new(psi, grid)?;
        powers.extend_to(n_max)?;
        BusyDist::from_powers(&powers, p_rate, lambda, theta, n_max)
    }

    /// Build from a precomputed table; it must reach `psi_{n_max}`.
    pub fn from_powers(powers: &PsiPowers, p_rate: f64, lambda: f64, theta: Theta, n_max: usize) -> Result<Self> {
        if !(p_rate > 0.0) || !p_rate.is_finite() {
            return Err(Error::invalid(format!("service rate must be positive, got {p_rate}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        if powers.len() <= n_max {
            return Err(Error::invalid(format!(
                "convolution table reaches n = {}, need {n_max}",
                powers.len() - 1
            )));
        }
        let mu = lambda / p_rate;
        let mut work = Vec::with_capacity(n_max);
        match theta {
            Theta::FromPsi => {
                for n in 1..=n_max {
                    let norm = ln_gamma(n as f64 + 1.0);
                    work.push(powers.power(n).weighted(|u| poisson_weight(mu, u, n - 1, norm)));
                }
            }
            Theta::InitialWorkload { w0 } => {
                if !(w0 > 0.0) || !w0.is_finite() {
                    return Err(Error::invalid(format!("initial workload must be positive, got {w0}")));
                }
                for n in 1..=n_max {
                    let norm = ln_gamma(n as f64);
                    let shifted = powers.power(n - 1).shifted(w0)?;
                    work.push(shifted.weighted(|u| {
                        if u <= 0.0 {
                            0.0
                        } else {
                            w0 / u * poisson_weight(mu, u, n - 1, norm)
                        }
                    }));
                }
            }
        }
        Ok(BusyDist {
            p_rate,
            lambda,
            theta,
            n_max,
            grid: powers.grid(),
            work,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `G_p(., n)` in time units.
    pub fn per_n(&self, n: usize) -> GriddedPdf {
        self.work[n - 1].time_scaled(self.p_rate)
    }

    /// `G_p(., n)` in work units `u = p t`.
    pub fn work_per_n(&self, n: usize) -> &GriddedPdf {
        &self.work[n - 1]
    }

    pub fn mass(&self, n: usize) -> f64 {
        self.work[n - 1].mass()
    }

    pub fn total_mass(&self) -> f64 {
        self.work.iter().map(|g| g.mass()).sum()
    }

    pub fn truncation(&self) -> TruncationReport {
        let grid_loss: f64 = self.work.iter().map(|g| g.truncation_loss()).sum();
        TruncationReport {
            grid_loss,
            n_tail: (1.0 - self.total_mass() - grid_loss).max(0.0),
        }
    }
}

fn check_n(bd: &BusyDist, n: usize) -> Result<()> {
    if n == 0 || n > bd.n_max {
        return Err(Error::invalid(format!("n = {n} outside 1..={}", bd.n_max)));
    }
    Ok(())
}

/// `r`-fold time convolution of `G_p(., n)` (time units).
pub fn r_fold(bd: &BusyDist, r: usize, n: usize) -> Result<GriddedPdf> {
    check_n(bd, n)?;
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let g = bd.work_per_n(n);
    let mut acc = g.clone();
    for _ in 1..r {
        acc = acc.convolve(g)?;
    }
    Ok(acc.time_scaled(bd.p_rate))
}

/// First period of `bd1`, then `r - 1` periods of `bd2`, all with `n`
/// services (time units, on the time grid of `bd2`).
pub fn mixed_first_period(bd1: &BusyDist, bd2: &BusyDist, r: usize, n: usize) -> Result<GriddedPdf> {
    check_n(bd1, n)?;
    check_n(bd2, n)?;
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let first = first_on_grid_of(bd1, bd2, n)?;
    if r == 1 {
        return Ok(first.time_scaled(bd2.p_rate));
    }
    let g = bd2.work_per_n(n);
    let mut acc = first;
    for _ in 1..r {
        acc = acc.convolve(g)?;
    }
    Ok(acc.time_scaled(bd2.p_rate))
}

/// `bd1`'s period `n` expressed in `bd2`'s work units.
fn first_on_grid_of(bd1: &BusyDist, bd2: &BusyDist, n: usize) -> Result<GriddedPdf> {
    let h = bd1.grid.step;
    if ((h - bd2.grid.step) / h).abs() > 1e-12 {
        return Err(Error::GridMismatch {
            left: h,
            right: bd2.grid.step,
        });
    }
    let g = bd1.work_per_n(n);
    if bd1.p_rate == bd2.p_rate {
        return Ok(g.clone());
    }
    let ratio = bd1.p_rate / bd2.p_rate;
    let moved = g.time_scaled(ratio);
    moved.regrid(h, bd2.grid.t_max.max(moved.t_max()))
}

/// `sum_n` of the mass at or beyond `t` (atoms exactly at `t` count).
pub fn tail_sum(g: &[GriddedPdf], t: f64) -> f64 {
    g.iter().map(|x| x.tail_mass(t)).sum()
}

/// Mass at or beyond `threshold` of `first * rest^{*copies}`, computed from
/// the head of the convolution so only nodes below the threshold are ever
/// formed. All arguments share one lattice.
pub fn fold_tail(first: &GriddedPdf, rest: &GriddedPdf, copies: usize, threshold: f64) -> f64 {
    let total = first.mass() * rest.mass().powi(copies as i32);
    if total == 0.0 {
        return 0.0;
    }
    let cut = threshold * (1.0 - TIME_EPS);
    // the pure point-mass term, exactly
    let mut atom_mass = first.atom().map_or(0.0, |a| a.mass);
    let mut atom_pos = first.atom().map_or(0.0, |a| a.position);
    let ra = rest.atom();
    for _ in 0..copies {
        match ra {
            Some(a) => {
                atom_mass *= a.mass;
                atom_pos += a.position;
            }
            None => atom_mass = 0.0,
        }
    }
    let atom_head = if atom_mass > 0.0 && atom_pos < cut { atom_mass } else { 0.0 };
    let has_cont = !first.values().is_empty() || !rest.values().is_empty();
    let cont_head = if has_cont && cut > 0.0 {
        let h = first.step();
        let k_max = (cut / h).ceil() as usize + 1;
        let mut acc = first.convolve_truncated(&GriddedPdf::unit(h, first.t_max()), k_max);
        for _ in 0..copies {
            acc = acc.convolve_truncated(rest, k_max);
        }
        acc.values()
            .iter()
            .enumerate()
            .take_while(|(k, _)| (*k as f64) * h < cut)
            .map(|(_, v)| v * h)
            .sum::<f64>()
    } else {
        0.0
    };
    (total - atom_head - cont_head).max(0.0)
}

/// Mass of `G_{r,p}(., n)` at or beyond time `t`.
pub fn r_fold_tail(bd: &BusyDist, r: usize, n: usize, t: f64) -> Result<f64> {
    check_n(bd, n)?;
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let g = bd.work_per_n(n);
    Ok(fold_tail(g, g, r - 1, t * bd.p_rate))
}

/// Mass at or beyond time `t` of the mixed first-period convolution.
pub fn mixed_tail(bd1: &BusyDist, bd2: &BusyDist, r: usize, n: usize, t: f64) -> Result<f64> {
    check_n(bd1, n)?;
    check_n(bd2, n)?;
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    let first = first_on_grid_of(bd1, bd2, n)?;
    Ok(fold_tail(&first, bd2.work_per_n(n), r - 1, t * bd2.p_rate))
}

/// Mean busy period and long-run idle fraction of the linear queue
/// (constant service rate `L`).
pub fn linear_moments(length: f64, lambda: f64, psi: &SpatialDistribution) -> Result<(f64, f64)> {
    let mean = psi.mean();
    let load = lambda * mean / length;
    if load >= 1.0 {
        return Err(Error::Unstable { load });
    }
    Ok((mean / (length - lambda * mean), 1.0 - load))
}
