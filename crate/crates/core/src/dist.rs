//! Spatial laws on a bounded interval and their lattice discretization.
//!
//! A [`SpatialDistribution`] is used in three roles: the arrival location law,
//! the travel distance law, and (as a Dirac) an initial workload. The
//! busy-period engine works on [`GriddedPdf`]s: lattice measures on
//! `{0, h, 2h, ...}` where node `k` carries the mass of the cell
//! `[(k - 1/2) h, (k + 1/2) h]`. A point mass is kept apart from the
//! continuous part as an [`Atom`] so deterministic laws convolve exactly.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative slack used when comparing grid positions.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Grid node the atom is attached to.
    pub index: usize,
    /// Exact (pre-rounding) location.
    pub position: f64,
    pub mass: f64,
}

/// A lattice (sub-)probability measure on `[0, t_max]`.
#[derive(Debug, Clone)]
pub struct GriddedPdf {
    step: f64,
    /// Density of the continuous part at the nodes; node `k` carries mass `step * values[k]`.
    values: Vec<f64>,
    atom: Option<Atom>,
    t_max: f64,
    truncation_loss: f64,
    cumulative: OnceLock<Vec<f64>>,
}

impl PartialEq for GriddedPdf {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step
            && self.values == other.values
            && self.atom == other.atom
            && self.t_max == other.t_max
    }
}

fn nearest_node(x: f64, step: f64) -> usize {
    // ties go to the lower index
    let k = (x / step - 0.5).ceil();
    if k <= 0.0 {
        0
    } else {
        k as usize
    }
}

fn capacity(t_max: f64, step: f64) -> usize {
    (t_max / step + 0.5 + GRID_EPS).floor() as usize
}

impl GriddedPdf {
    pub fn new(step: f64, values: Vec<f64>, atom: Option<Atom>, t_max: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite and nonnegative"));
        }
        if let Some(a) = atom {
            if !(a.mass >= 0.0) {
                return Err(Error::invalid("atom mass must be nonnegative"));
            }
        }
        let mut pdf = GriddedPdf {
            step,
            values,
            atom,
            t_max,
            truncation_loss: 0.0,
            cumulative: OnceLock::new(),
        };
        pdf.trim();
        let cap = capacity(t_max, step);
        let last = pdf.last_node();
        if last > cap {
            return Err(Error::GridOverflow {
                required: last as f64 * step,
                t_max,
            });
        }
        Ok(pdf)
    }

    /// Density samples at nodes `0, h, 2h, ...` as read from a config file.
    ///
    /// The samples are integrated with the trapezoidal rule (half weight on
    /// the two end nodes), which must give 1 up to `1e-6`; the resulting
    /// lattice law is renormalized exactly.
    pub fn from_density_samples(step: f64, samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a gridded density needs at least two samples"));
        }
        let last = samples.len() - 1;
        let mut values: Vec<f64> = samples.to_vec();
        values[0] *= 0.5;
        values[last] *= 0.5;
        let integral: f64 = step * values.iter().sum::<f64>();
        if (integral - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "gridded density integrates to {integral}, expected 1"
            )));
        }
        values.iter_mut().for_each(|v| *v /= integral);
        GriddedPdf::new(step, values, None, last as f64 * step)
    }

    /// Unit point mass at zero: the identity of convolution.
    pub fn unit(step: f64, t_max: f64) -> Self {
        GriddedPdf {
            step,
            values: Vec::new(),
            atom: Some(Atom {
                index: 0,
                position: 0.0,
                mass: 1.0,
            }),
            t_max,
            truncation_loss: 0.0,
            cumulative: OnceLock::new(),
        }
    }

    pub fn zero(step: f64, t_max: f64) -> Self {
        GriddedPdf {
            step,
            values: Vec::new(),
            atom: None,
            t_max,
            truncation_loss: 0.0,
            cumulative: OnceLock::new(),
        }
    }

    fn trim(&mut self) {
        while self.values.last() == Some(&0.0) {
            self.values.pop();
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn atom(&self) -> Option<Atom> {
        self.atom
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Mass dropped by truncating convolutions at `t_max`.
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    /// Density of the continuous part at node `k`.
    pub fn density(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn continuous_mass(&self) -> f64 {
        self.step * self.values.iter().sum::<f64>()
    }

    pub fn mass(&self) -> f64 {
        self.continuous_mass() + self.atom.map_or(0.0, |a| a.mass)
    }

    pub fn mean(&self) -> f64 {
        let h = self.step;
        let cont: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * h * h * v)
            .sum();
        let atom = self.atom.map_or(0.0, |a| a.position * a.mass);
        let m = self.mass();
        if m > 0.0 {
            (cont + atom) / m
        } else {
            0.0
        }
    }

    /// Largest node index carrying mass.
    pub fn last_node(&self) -> usize {
        let cont = self.values.len().saturating_sub(1);
        match self.atom {
            Some(a) if a.mass > 0.0 => cont.max(a.index),
            _ => cont,
        }
    }

    pub fn support_hi(&self) -> f64 {
        match self.atom {
            Some(a) if a.mass > 0.0 && (self.values.is_empty() || a.index >= self.values.len()) => {
                a.position.max(self.values.len().saturating_sub(1) as f64 * self.step)
            }
            _ => self.values.len().saturating_sub(1) as f64 * self.step,
        }
    }

    /// Same measure on a grid that ends at `t_max`.
    pub fn with_t_max(mut self, t_max: f64) -> Result<Self> {
        if self.last_node() > capacity(t_max, self.step) {
            return Err(Error::GridOverflow {
                required: self.support_hi(),
                t_max,
            });
        }
        self.t_max = t_max;
        Ok(self)
    }

    /// The same measure in units stretched by `1 / rate`: the law of
    /// `X / rate`.
    pub fn time_scaled(&self, rate: f64) -> GriddedPdf {
        GriddedPdf {
            step: self.step / rate,
            values: self.values.iter().map(|v| v * rate).collect(),
            atom: self.atom.map(|a| Atom {
                position: a.position / rate,
                ..a
            }),
            t_max: self.t_max / rate,
            truncation_loss: self.truncation_loss,
            cumulative: OnceLock::new(),
        }
    }

    /// Move the measure onto a grid of step `step`: the continuous part is
    /// redistributed through its cell CDF, the atom keeps its position and is
    /// attached to the nearest new node.
    pub fn regrid(&self, step: f64, t_max: f64) -> Result<GriddedPdf> {
        if ((self.step - step) / step).abs() <= GRID_EPS {
            return self.clone().with_t_max(t_max);
        }
        let cont = GriddedPdf {
            atom: None,
            cumulative: OnceLock::new(),
            ..self.clone()
        };
        let mass = cont.mass();
        let mut values = Vec::new();
        if mass > 0.0 {
            let top = cont.support_hi();
            let mut k = 0usize;
            loop {
                let lo = (k as f64 - 0.5) * step;
                if lo >= top {
                    break;
                }
                let m = cont.cdf((k as f64 + 0.5) * step) - cont.cdf(lo);
                values.push(mass * m.max(0.0) / step);
                k += 1;
            }
        }
        let atom = self.atom.map(|a| Atom {
            index: nearest_node(a.position, step),
            ..a
        });
        let mut out = GriddedPdf::new(step, values, atom, t_max)?;
        out.truncation_loss = self.truncation_loss;
        Ok(out)
    }

    /// Multiply every node mass by `factor(t)` (the atom by `factor` at its
    /// exact position).
    pub fn weighted(&self, factor: impl Fn(f64) -> f64) -> GriddedPdf {
        let h = self.step;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| if *v == 0.0 { 0.0 } else { v * factor(k as f64 * h) })
            .collect();
        let atom = self.atom.map(|a| Atom {
            mass: a.mass * factor(a.position),
            ..a
        });
        let mut out = GriddedPdf {
            step: h,
            values,
            atom,
            t_max: self.t_max,
            truncation_loss: self.truncation_loss,
            cumulative: OnceLock::new(),
        };
        out.trim();
        out
    }

    /// Shift the measure right by `shift` (rounded to the nearest node for
    /// the continuous part; the atom keeps its exact position).
    pub fn shifted(&self, shift: f64) -> Result<GriddedPdf> {
        let h = self.step;
        let by = nearest_node(shift, h);
        let mut values = vec![0.0; if self.values.is_empty() { 0 } else { by }];
        values.extend_from_slice(&self.values);
        let atom = self.atom.map(|a| Atom {
            index: a.index + by,
            position: a.position + shift,
            mass: a.mass,
        });
        let mut out = GriddedPdf::new(h, values, atom, self.t_max)?;
        out.truncation_loss = self.truncation_loss;
        Ok(out)
    }

    fn check_step(&self, other: &GriddedPdf) -> Result<()> {
        if ((self.step - other.step) / self.step).abs() > GRID_EPS {
            return Err(Error::GridMismatch {
                left: self.step,
                right: other.step,
            });
        }
        Ok(())
    }

    /// Convolution on the shared grid. Fails if the result does not fit in
    /// `[0, t_max]` of `self`.
    pub fn convolve(&self, other: &GriddedPdf) -> Result<GriddedPdf> {
        self.check_step(other)?;
        let cap = capacity(self.t_max, self.step);
        let needed = self.last_node() + other.last_node();
        if needed > cap && self.mass() > 0.0 && other.mass() > 0.0 {
            return Err(Error::GridOverflow {
                required: self.support_hi() + other.support_hi(),
                t_max: self.t_max,
            });
        }
        Ok(self.convolve_truncated(other, cap))
    }

    /// Convolution restricted to nodes `0..=max_index`; mass that lands
    /// beyond is added to the truncation loss.
    pub fn convolve_truncated(&self, other: &GriddedPdf, max_index: usize) -> GriddedPdf {
        let h = self.step;
        let a = &self.values;
        let b = &other.values;
        let len = if a.is_empty() && b.is_empty() {
            0
        } else {
            (self.last_node() + other.last_node() + 1).min(max_index + 1)
        };
        let mut c = vec![0.0; len];
        if !a.is_empty() && !b.is_empty() {
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 || i >= len {
                    continue;
                }
                let w = ai * h;
                for (cj, &bj) in c[i..].iter_mut().zip(b.iter()) {
                    *cj += w * bj;
                }
            }
        }
        if let Some(at) = other.atom {
            for (i, &ai) in a.iter().enumerate() {
                let k = i + at.index;
                if k >= len {
                    break;
                }
                c[k] += ai * at.mass;
            }
        }
        if let Some(at) = self.atom {
            for (i, &bi) in b.iter().enumerate() {
                let k = i + at.index;
                if k >= len {
                    break;
                }
                c[k] += bi * at.mass;
            }
        }
        let atom = match (self.atom, other.atom) {
            (Some(x), Some(y)) if x.index + y.index <= max_index => Some(Atom {
                index: x.index + y.index,
                position: x.position + y.position,
                mass: x.mass * y.mass,
            }),
            _ => None,
        };
        let mut out = GriddedPdf {
            step: h,
            values: c,
            atom,
            t_max: self.t_max.min(max_index as f64 * h),
            truncation_loss: 0.0,
            cumulative: OnceLock::new(),
        };
        out.trim();
        let full = self.mass() * other.mass();
        out.truncation_loss = (full - out.mass()).max(0.0)
            + self.truncation_loss * other.mass()
            + other.truncation_loss * self.mass();
        out.t_max = self.t_max;
        out
    }

    /// `n`-fold convolution power. `n = 0` gives the unit atom at zero.
    pub fn n_fold(&self, n: usize) -> Result<GriddedPdf> {
        if n == 0 {
            return Ok(GriddedPdf::unit(self.step, self.t_max));
        }
        let cap = capacity(self.t_max, self.step);
        if self.last_node() * n > cap && self.mass() > 0.0 {
            return Err(Error::GridOverflow {
                required: self.support_hi() * n as f64,
                t_max: self.t_max,
            });
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }

    /// Mass at nodes with `t >= from`; an atom located exactly at `from`
    /// is included.
    pub fn tail_mass(&self, from: f64) -> f64 {
        let h = self.step;
        let first = (from / h - GRID_EPS).ceil().max(0.0) as usize;
        let cont: f64 = self.values.iter().skip(first).sum::<f64>() * h;
        let atom = match self.atom {
            Some(a) if a.position >= from - GRID_EPS * from.abs().max(h) => a.mass,
            _ => 0.0,
        };
        cont + atom
    }

    /// Mass carried by nodes with `lo <= t < hi`, atom by exact position.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let h = self.step;
        let cont: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let t = *k as f64 * h;
                t >= lo && t < hi
            })
            .map(|(_, v)| v * h)
            .sum();
        let atom = match self.atom {
            Some(a) if a.position >= lo && a.position < hi => a.mass,
            _ => 0.0,
        };
        cont + atom
    }

    /// Cumulative node masses, atom folded into its node.
    fn node_cumulative(&self) -> &[f64] {
        self.cumulative.get_or_init(|| {
            let n = self.last_node() + 1;
            let mut acc = 0.0;
            (0..n)
                .map(|k| {
                    acc += self.density(k) * self.step;
                    if let Some(a) = self.atom {
                        if a.index == k {
                            acc += a.mass;
                        }
                    }
                    acc
                })
                .collect()
        })
    }

    /// CDF of the cell law: node masses spread uniformly over their cells
    /// (clipped to `[0, last node]`), atoms kept as jumps at their position.
    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.step;
        let total = self.mass();
        if total <= 0.0 || x < 0.0 {
            return 0.0;
        }
        let top = self.last_node() as f64 * h;
        let cum = self.node_cumulative();
        let mut acc = 0.0;
        for k in 0..cum.len() {
            let lo = ((k as f64 - 0.5) * h).max(0.0);
            let hi = ((k as f64 + 0.5) * h).min(top);
            let cell = self.density(k) * h;
            if x >= hi {
                acc += cell;
            } else if x > lo {
                acc += cell * (x - lo) / (hi - lo);
            }
            if let Some(a) = self.atom {
                if a.index == k && x >= a.position {
                    acc += a.mass;
                }
            }
            if x < lo {
                break;
            }
        }
        (acc / total).min(1.0)
    }

    /// Inverse-CDF draw from the cell law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let cum = self.node_cumulative();
        let total = *cum.last().unwrap_or(&0.0);
        if total <= 0.0 {
            return 0.0;
        }
        let u = rng.random::<f64>() * total;
        let k = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
        if let Some(a) = self.atom {
            if a.index == k {
                let before = if k == 0 { 0.0 } else { cum[k - 1] };
                let cont = self.density(k) * self.step;
                if u >= before + cont {
                    return a.position;
                }
            }
        }
        let h = self.step;
        let top = self.last_node() as f64 * h;
        let lo = ((k as f64 - 0.5) * h).max(0.0);
        let hi = ((k as f64 + 0.5) * h).min(top);
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// A probability law on `[0, support_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub enum SpatialDistribution {
    Dirac { point: f64 },
    Uniform { lo: f64, hi: f64 },
    Grid(GriddedPdf),
}

/// Wire form of [`SpatialDistribution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Dirac { point: f64 },
    Uniform { lo: f64, hi: f64 },
    Grid { h: f64, values: Vec<f64> },
}

impl TryFrom<DistributionSpec> for SpatialDistribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Dirac { point } => SpatialDistribution::dirac(point),
            DistributionSpec::Uniform { lo, hi } => SpatialDistribution::uniform(lo, hi),
            DistributionSpec::Grid { h, values } => {
                Ok(SpatialDistribution::Grid(GriddedPdf::from_density_samples(h, &values)?))
            }
        }
    }
}

impl From<SpatialDistribution> for DistributionSpec {
    fn from(d: SpatialDistribution) -> Self {
        match d {
            SpatialDistribution::Dirac { point } => DistributionSpec::Dirac { point },
            SpatialDistribution::Uniform { lo, hi } => DistributionSpec::Uniform { lo, hi },
            SpatialDistribution::Grid(g) => {
                let n = capacity(g.t_max(), g.step()).max(g.last_node()) + 1;
                let mut values: Vec<f64> = (0..n).map(|k| g.density(k)).collect();
                // undo the trapezoidal end weights
                if n >= 2 {
                    values[0] *= 2.0;
                    values[n - 1] *= 2.0;
                }
                DistributionSpec::Grid { h: g.step(), values }
            }
        }
    }
}

impl SpatialDistribution {
    pub fn dirac(point: f64) -> Result<Self> {
        if !(point >= 0.0) || !point.is_finite() {
            return Err(Error::invalid(format!("dirac point must be finite and >= 0, got {point}")));
        }
        Ok(SpatialDistribution::Dirac { point })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0) || !(hi > lo) || !hi.is_finite() {
            return Err(Error::invalid(format!("uniform needs 0 <= lo < hi < inf, got [{lo}, {hi}]")));
        }
        Ok(SpatialDistribution::Uniform { lo, hi })
    }

    pub fn support_hi(&self) -> f64 {
        match self {
            SpatialDistribution::Dirac { point } => *point,
            SpatialDistribution::Uniform { hi, .. } => *hi,
            SpatialDistribution::Grid(g) => g.support_hi(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            SpatialDistribution::Dirac { point } => *point,
            SpatialDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            SpatialDistribution::Grid(g) => g.mean(),
        }
    }

    /// Upper bound on the density; `None` for a point mass.
    pub fn density_bound(&self) -> Option<f64> {
        match self {
            SpatialDistribution::Dirac { .. } => None,
            SpatialDistribution::Uniform { lo, hi } => Some(1.0 / (hi - lo)),
            SpatialDistribution::Grid(g) => Some(g.values().iter().cloned().fold(0.0, f64::max)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SpatialDistribution::Dirac { point } => *point,
            SpatialDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            SpatialDistribution::Grid(g) => g.sample(rng),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            SpatialDistribution::Dirac { point } => {
                if x >= *point {
                    1.0
                } else {
                    0.0
                }
            }
            SpatialDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            SpatialDistribution::Grid(g) => g.cdf(x),
        }
    }

    /// Discretize onto `{0, h, ..}` up to `t_max`: a point mass becomes an
    /// atom at the nearest node (ties to the lower one), continuous laws
    /// give each node the mass of its cell.
    pub fn to_grid(&self, h: f64, t_max: f64) -> Result<GriddedPdf> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("grid step must be positive, got {h}")));
        }
        let support = self.support_hi();
        if t_max < support * (1.0 - GRID_EPS) {
            return Err(Error::SupportTruncated { t_max, support });
        }
        match self {
            SpatialDistribution::Dirac { point } => Ok(GriddedPdf {
                step: h,
                values: Vec::new(),
                atom: Some(Atom {
                    index: nearest_node(*point, h),
                    position: *point,
                    mass: 1.0,
                }),
                t_max,
                truncation_loss: 0.0,
                cumulative: OnceLock::new(),
            }),
            SpatialDistribution::Grid(g) if ((g.step() - h) / h).abs() <= GRID_EPS => {
                g.clone().with_t_max(t_max)
            }
            _ => {
                let cap = capacity(t_max, h);
                let mut values = Vec::new();
                for k in 0..=cap {
                    let lo = (k as f64 - 0.5) * h;
                    if lo >= support {
                        break;
                    }
                    let m = self.cdf((k as f64 + 0.5) * h) - self.cdf(lo);
                    values.push(m.max(0.0) / h);
                }
                let total: f64 = values.iter().sum::<f64>() * h;
                values.iter_mut().for_each(|v| *v /= total);
                GriddedPdf::new(h, values, None, t_max)
            }
        }
    }

    /// Law of `X / rate` for `X` with this law.
    pub fn scaled(&self, rate: f64) -> Result<SpatialDistribution> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("scaling rate must be positive, got {rate}")));
        }
        Ok(match self {
            SpatialDistribution::Dirac { point } => SpatialDistribution::Dirac { point: point / rate },
            SpatialDistribution::Uniform { lo, hi } => SpatialDistribution::Uniform {
                lo: lo / rate,
                hi: hi / rate,
            },
            SpatialDistribution::Grid(g) => {
                let values = g.values().iter().map(|v| v * rate).collect();
                let step = g.step() / rate;
                SpatialDistribution::Grid(GriddedPdf::new(step, values, None, g.t_max() / rate)?)
            }
        })
    }
}
