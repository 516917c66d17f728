//! Throughput bounds.
//!
//! * Exact linear throughput `L / mean(psi)` and the trivial sub-linear bound
//!   `L^m / mean(psi)`.
//! * Finite-horizon probabilistic lower bounds for `m > 1`, obtained by
//!   comparing the queue with a slower one served at the constant rate
//!   `L^m M^{1-m}` and asking that its busy periods hold at most `M`
//!   vehicles until `T`.
//! * Bounds under the batch release policy, trading throughput for a mean
//!   waiting time (perturbation) of at most `eta`.

use serde::{Deserialize, Serialize};

use crate::busyperiod::{mixed_tail, r_fold_tail, BusyDist, GridSpec, PsiPowers, Theta};
use crate::dist::SpatialDistribution;
use crate::{Error, Result};

/// Throughput of the linear queue.
pub fn linear_throughput(length: f64, psi: &SpatialDistribution) -> Result<f64> {
    let mean = psi.mean();
    if !(mean > 0.0) {
        return Err(Error::invalid("mean travel distance must be positive"));
    }
    Ok(length / mean)
}

/// `L^m / mean(psi)`, valid for `m in (0, 1)`.
pub fn sublinear_trivial(length: f64, m: f64, psi: &SpatialDistribution) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::invalid(format!("the trivial sub-linear bound needs m in (0, 1), got {m}")));
    }
    let mean = psi.mean();
    if !(mean > 0.0) {
        return Err(Error::invalid("mean travel distance must be positive"));
    }
    Ok(length.powf(m) / mean)
}

/// Headway below which (for `m < 1`) or above which (for `m > 1`) the
/// sub-queue load factor drops under one: `(2 R lambda F)^{-1/(1-m)}`.
pub fn delta_star(lambda: f64, r: f64, f: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::invalid(format!("delta_star is for m in (0, 1), got {m}; use lambda_star")));
    }
    positive(&[("lambda", lambda), ("R", r), ("F", f)])?;
    Ok((2.0 * r * lambda * f).powf(-1.0 / (1.0 - m)))
}

/// Largest admissible rate with two sub-intervals of length `ell / 2`:
/// `(ell/2)^{m-1} / (2 R F)`.
pub fn lambda_star(ell: f64, m: f64, r: f64, f: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::invalid("policy needs two sub-intervals: ell must be positive"));
    }
    positive(&[("R", r), ("F", f)])?;
    Ok((ell / 2.0).powf(m - 1.0) / (2.0 * r * f))
}

/// Load factor bound `2 R lambda F Delta^{1-m}` of one sub-queue.
pub fn load_factor(delta: f64, lambda: f64, r: f64, f: f64, m: f64) -> f64 {
    2.0 * r * lambda * f * delta.powf(1.0 - m)
}

/// Mean waiting-time bound for sub-intervals of length `delta`:
/// `2R/Delta^m + R/Delta^m * rho/(1-rho)`; infinite when `rho >= 1`.
pub fn waiting_time_bound(delta: f64, lambda: f64, r: f64, f: f64, m: f64) -> f64 {
    let rho = load_factor(delta, lambda, r, f, m);
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    let dm = delta.powf(m);
    2.0 * r / dm + r / dm * rho / (1.0 - rho)
}

/// Sub-interval length for `m < 1` that sets the load factor to `m`:
/// `(m / (2 R lambda F))^{1/(1-m)}`. Close to, not exactly, the minimizer.
pub fn sublinear_delta(lambda: f64, r: f64, f: f64, m: f64) -> f64 {
    (m / (2.0 * r * lambda * f)).powf(1.0 / (1.0 - m))
}

/// The sub-linear waiting-time bound at [`sublinear_delta`]:
/// `R (2 R lambda F)^{m/(1-m)} (2 / m^{m/(1-m)} + m / (m^{m/(1-m)} - m^{1/(1-m)}))`.
pub fn sublinear_waiting_bound(m: f64, r: f64, f: f64, lambda: f64) -> f64 {
    r * (2.0 * r * lambda * f).powf(m / (1.0 - m)) * sublinear_constant(m)
}

fn sublinear_constant(m: f64) -> f64 {
    let a = m.powf(m / (1.0 - m));
    let b = m.powf(1.0 / (1.0 - m));
    2.0 / a + m / (a - b)
}

/// The super-linear waiting-time bound with `Delta = ell / 2`.
pub fn superlinear_waiting_bound(ell: f64, m: f64, r: f64, f: f64, lambda: f64) -> f64 {
    waiting_time_bound(ell / 2.0, lambda, r, f, m)
}

fn positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Result of a perturbation-based bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedBound {
    pub lambda_lower: f64,
    /// Waiting-time bound at `lambda_lower` under the policy; zero when the
    /// policy is not needed (fallback to the trivial bound).
    pub w_at_bound: f64,
    /// Sub-interval length to run the policy with.
    pub delta: Option<f64>,
    /// The trivial bound won.
    pub fallback: bool,
}

/// Largest `x` in `[lo, hi]` with `f(x) <= target` for nondecreasing `f`, by
/// bisection until the bracket is `rel_tol` wide relative to `hi`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    for _ in 0..400 {
        if (hi - lo).abs() <= rel_tol * hi.abs().max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Throughput lower bound for `m in (0, 1)` under the batch release policy
/// with mean waiting time at most `eta`.
pub fn sublinear_perturbed_bound(
    length: f64,
    m: f64,
    psi: &SpatialDistribution,
    phi: &SpatialDistribution,
    eta: f64,
) -> Result<PerturbedBound> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::invalid(format!("sub-linear bound needs m in (0, 1), got {m}")));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!("eta must be >= 0, got {eta}")));
    }
    let r = psi.support_hi();
    let f = phi
        .density_bound()
        .ok_or_else(|| Error::invalid("phi needs a bounded density"))?;
    positive(&[("R", r), ("F", f)])?;
    let trivial = sublinear_trivial(length, m, psi)?;
    // RHS(lambda) is increasing from 0 to infinity; solve in log(lambda)
    let rhs = |log_lambda: f64| sublinear_waiting_bound(m, r, f, log_lambda.exp());
    let root = if eta > 0.0 {
        let (lo, hi) = (-745.0, 709.0);
        if rhs(hi) <= eta {
            f64::INFINITY
        } else {
            bisect_increasing(rhs, eta, lo, hi, 1e-15).exp()
        }
    } else {
        0.0
    };
    if root >= trivial {
        Ok(PerturbedBound {
            lambda_lower: root,
            w_at_bound: if root.is_finite() { sublinear_waiting_bound(m, r, f, root) } else { 2.0 * r },
            delta: root.is_finite().then(|| sublinear_delta(root, r, f, m)),
            fallback: false,
        })
    } else {
        Ok(PerturbedBound {
            lambda_lower: trivial,
            w_at_bound: 0.0,
            delta: None,
            fallback: true,
        })
    }
}

/// Throughput lower bound for `m > 1` under the batch release policy with
/// two sub-intervals (`Delta = ell / 2`) and mean waiting time at most `eta`.
///
/// When `eta` is below the bound's value at vanishing load, no rate
/// satisfies the constraint and the result is zero.
pub fn superlinear_perturbed_bound(
    m: f64,
    psi: &SpatialDistribution,
    phi: &SpatialDistribution,
    eta: f64,
) -> Result<PerturbedBound> {
    if !(m > 1.0) {
        return Err(Error::invalid(format!("super-linear bound needs m > 1, got {m}")));
    }
    if !(eta >= 0.0) {
        return Err(Error::invalid(format!("eta must be >= 0, got {eta}")));
    }
    let ell = phi.support_hi();
    let r = psi.support_hi();
    let f = phi
        .density_bound()
        .ok_or_else(|| Error::invalid("phi needs a bounded density"))?;
    let star = lambda_star(ell, m, r, f)?;
    let floor = 2.0 * r / (ell / 2.0).powf(m);
    let delta = Some(ell / 2.0);
    if eta.is_infinite() {
        return Ok(PerturbedBound {
            lambda_lower: star,
            w_at_bound: f64::INFINITY,
            delta,
            fallback: false,
        });
    }
    if eta <= floor {
        return Ok(PerturbedBound {
            lambda_lower: 0.0,
            w_at_bound: floor,
            delta,
            fallback: true,
        });
    }
    let rhs = |lambda: f64| superlinear_waiting_bound(ell, m, r, f, lambda);
    let root = bisect_increasing(rhs, eta, 0.0, star, 1e-14);
    Ok(PerturbedBound {
        lambda_lower: root,
        w_at_bound: rhs(root),
        delta,
        fallback: false,
    })
}

/// Initial condition for the finite-horizon bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Empty,
    NonEmpty { n0: usize, w0: f64 },
}

/// Search ranges for the suprema over `M`, `r` and `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Search {
    pub m_max: usize,
    pub r_max: usize,
    /// Relative width at which the bisection on `lambda` stops.
    pub lambda_rel_tol: f64,
    /// Stop scanning `M` after this many consecutive decreases.
    pub patience: usize,
}

impl Default for Search {
    fn default() -> Self {
        Search {
            m_max: 128,
            r_max: 32,
            lambda_rel_tol: 1e-3,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    #[serde(rename = "L")]
    pub length: f64,
    pub m: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub psi: SpatialDistribution,
    pub phi: SpatialDistribution,
    #[serde(default = "empty_init")]
    pub init: InitialCondition,
    #[serde(default)]
    pub search: Search,
    /// Lattice for `psi`; defaults to step `mean(psi)/200`.
    #[serde(default)]
    pub grid_step: Option<f64>,
}

fn empty_init() -> InitialCondition {
    InitialCondition::Empty
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub lambda_lower: f64,
    pub m_star: Option<usize>,
    pub r_star: Option<usize>,
    /// Value of the bound expression at `lambda_lower`.
    pub certified_probability: f64,
    pub diagnostics: Vec<String>,
}

/// Evaluates the finite-horizon bound for one query; keeps the table of
/// convolution powers of `psi` across `M` and `lambda`.
pub struct SuperlinearBound {
    q: BoundQuery,
    powers: PsiPowers,
}

impl SuperlinearBound {
    pub fn new(q: BoundQuery) -> Result<Self> {
        if !(q.m > 1.0) {
            return Err(Error::invalid(format!("super-linear bound needs m > 1, got {}", q.m)));
        }
        if !(q.delta > 0.0 && q.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", q.delta)));
        }
        positive(&[("L", q.length), ("T", q.horizon)])?;
        if q.search.m_max == 0 || q.search.r_max == 0 {
            return Err(Error::invalid("search ranges must be nonempty"));
        }
        let r = q.psi.support_hi();
        let mean = q.psi.mean();
        let step = q.grid_step.unwrap_or(if mean > 0.0 { mean / 200.0 } else { 1e-3 });
        let w0 = match q.init {
            InitialCondition::Empty => 0.0,
            InitialCondition::NonEmpty { w0, .. } => {
                if !(w0 > 0.0) {
                    return Err(Error::invalid("initial workload must be positive"));
                }
                w0
            }
        };
        let grid = GridSpec {
            step,
            t_max: (q.search.m_max as f64 * r + w0).max(step),
        };
        let mut powers = PsiPowers::new(&q.psi, grid)?;
        powers.extend_to(q.search.m_max)?;
        Ok(SuperlinearBound { q, powers })
    }

    pub fn query(&self) -> &BoundQuery {
        &self.q
    }

    /// Constant service rate of the slower comparison queue with `k` vehicles.
    fn rate(&self, k: usize) -> f64 {
        self.q.length.powf(self.q.m) * (k as f64).powf(1.0 - self.q.m)
    }

    /// `max_r sum_{n<=M} P(r periods with n services last at least T)`, and
    /// the maximizing `r`.
    pub fn value(&self, big_m: usize, lambda: f64) -> Result<(f64, usize)> {
        let p = self.rate(big_m);
        let later = BusyDist::from_powers(&self.powers, p, lambda, Theta::FromPsi, big_m)?;
        let first = match self.q.init {
            InitialCondition::Empty => None,
            InitialCondition::NonEmpty { n0, w0 } => {
                let p1 = self.rate(big_m + n0);
                Some(BusyDist::from_powers(&self.powers, p1, lambda, Theta::InitialWorkload { w0 }, big_m)?)
            }
        };
        let masses: Vec<f64> = (1..=big_m).map(|n| later.mass(n)).collect();
        let first_masses: Option<Vec<f64>> = first.as_ref().map(|b| (1..=big_m).map(|n| b.mass(n)).collect());
        let mut best = (0.0, 1);
        for r in 1..=self.q.search.r_max {
            // upper bound on this r's value: no mass below T at all
            let ceiling: f64 = (0..big_m)
                .map(|i| {
                    let rest = masses[i].powi(r as i32 - 1);
                    first_masses.as_ref().map_or(masses[i], |f| f[i]) * rest
                })
                .sum();
            if ceiling <= best.0 {
                break;
            }
            let mut total = 0.0;
            for n in 1..=big_m {
                let i = n - 1;
                let head = first_masses.as_ref().map_or(masses[i], |f| f[i]);
                if head * masses[i].powi(r as i32 - 1) < 1e-17 {
                    continue;
                }
                    total += match &first {
                    None => r_fold_tail(&later, r, n, self.q.horizon)?,
                    Some(b) => mixed_tail(b, &later, r, n, self.q.horizon)?,
                };
            }
            if total > best.0 {
                best = (total, r);
            }
        }
        Ok(best)
    }

    /// Largest `lambda` (to the search tolerance) whose bound value reaches
    /// `1 - delta` for this `M`, with its `r` and value.
    pub fn lambda_for(&self, big_m: usize) -> Result<Option<(f64, usize, f64)>> {
        let target = 1.0 - self.q.delta;
        let scale = self.rate(big_m) / self.q.psi.mean().max(1e-12);
        let tiny = 1e-9 * scale;
        let (v0, r0) = self.value(big_m, tiny)?;
        if v0 < target {
            return Ok(None);
        }
        let mut lo = (tiny, r0, v0);
        let mut hi = 2.0 * scale;
        let mut doublings = 0;
        loop {
            let (v, r) = self.value(big_m, hi)?;
            if v < target {
                break;
            }
            lo = (hi, r, v);
            hi *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return Err(Error::invalid("bound value does not fall below 1 - delta"));
            }
        }
        while hi - lo.0 > self.q.search.lambda_rel_tol * hi {
            let mid = 0.5 * (lo.0 + hi);
            let (v, r) = self.value(big_m, mid)?;
            if v >= target {
                lo = (mid, r, v);
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }

    /// Supremum over `M` (empty supremum is zero).
    pub fn evaluate(&self) -> Result<BoundResult> {
        let mut best: Option<(f64, usize, usize, f64)> = None;
        let mut previous = 0.0;
        let mut decreases = 0;
        let mut scanned = 0;
        for big_m in 1..=self.q.search.m_max {
            scanned = big_m;
            let lam = self.lambda_for(big_m)?;
            let value = lam.map_or(0.0, |x| x.0);
            if let Some((l, r, v)) = lam {
                if best.is_none_or(|b| l > b.0) {
                    best = Some((l, big_m, r, v));
                }
            }
            if value < previous {
                decreases += 1;
                if decreases >= self.q.search.patience {
                    break;
                }
            } else {
                decreases = 0;
            }
            previous = value;
        }
        let mut diagnostics = vec![format!("scanned M = 1..={scanned}")];
        if scanned == self.q.search.m_max {
            diagnostics.push("search reached m_max; the supremum may lie beyond".into());
        }
        Ok(match best {
            Some((l, big_m, r, v)) => {
                if r == self.q.search.r_max {
                    diagnostics.push("best r is at r_max".into());
                }
                BoundResult {
                    lambda_lower: l,
                    m_star: Some(big_m),
                    r_star: Some(r),
                    certified_probability: v,
                    diagnostics,
                }
            }
            None => {
                diagnostics.push("no (M, r) reaches 1 - delta; supremum over the empty set".into());
                BoundResult {
                    lambda_lower: 0.0,
                    m_star: None,
                    r_star: None,
                    certified_probability: 0.0,
                    diagnostics,
                }
            }
        })
    }
}

/// Finite-horizon lower bound on the throughput for `m > 1`.
pub fn superlinear_bound(q: &BoundQuery) -> Result<BoundResult> {
    SuperlinearBound::new(q.clone())?.evaluate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::SpatialDistribution as D;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_forms() {
        let d1 = D::dirac(1.0).unwrap();
        let u1 = D::uniform(0.0, 1.0).unwrap();
        assert_eq!(linear_throughput(1.0, &d1).unwrap(), 1.0);
        assert_eq!(linear_throughput(1.0, &u1).unwrap(), 2.0);
        assert_eq!(linear_throughput(2.0, &d1).unwrap(), 2.0);
        assert!(linear_throughput(1.0, &D::dirac(0.0).unwrap()).is_err());
        assert_eq!(sublinear_trivial(1.0, 0.5, &d1).unwrap(), 1.0);
        assert_eq!(sublinear_trivial(4.0, 0.5, &d1).unwrap(), 2.0);
        assert!(rel(sublinear_trivial(1.7, 1.0 - 1e-9, &d1).unwrap(), 1.7) < 1e-8);
        assert!(sublinear_trivial(1.0, 1.5, &d1).is_err());
        assert!(rel(delta_star(0.125, 1.0, 1.0, 0.5).unwrap(), 16.0) < 1e-12);
        assert!(rel(delta_star(0.5, 1.0, 1.0, 0.5).unwrap(), 1.0) < 1e-12);
        assert!(delta_star(0.5, 1.0, 1.0, 2.0).is_err());
        assert!(rel(lambda_star(2.0, 2.0, 1.0, 1.0).unwrap(), 0.5) < 1e-12);
        assert!(lambda_star(0.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn half_delta_star_is_stable() {
        for (lambda, m) in [(0.3, 0.5), (2.0, 0.2), (0.05, 0.9)] {
            let d = delta_star(lambda, 1.0, 1.0, m).unwrap() / 2.0;
            assert!(load_factor(d, lambda, 1.0, 1.0, m) < 1.0);
        }
    }

    #[test]
    fn sublinear_delta_makes_load_equal_m() {
        let (lambda, r, f, m) = (0.7, 1.3, 0.8, 0.4);
        let d = sublinear_delta(lambda, r, f, m);
        assert!(rel(load_factor(d, lambda, r, f, m), m) < 1e-12);
        // the closed form is the general bound at that spacing
        assert!(rel(sublinear_waiting_bound(m, r, f, lambda), waiting_time_bound(d, lambda, r, f, m)) < 1e-12);
    }

    #[test]
    fn waiting_bound_tends_to_2r() {
        for r in [0.5, 1.0, 2.0] {
            for lambda in [0.1, 0.5, 1.0] {
                assert!(rel(sublinear_waiting_bound(1e-3, r, 1.0, lambda), 2.0 * r) < 0.01);
            }
        }
    }

    #[test]
    fn sublinear_root_matches_closed_form() {
        let psi = D::uniform(0.0, 1.0).unwrap();
        let phi = D::uniform(0.0, 1.0).unwrap();
        for (m, eta) in [(0.5, 10.0), (0.3, 4.0), (0.1, 3.0)] {
            let b = sublinear_perturbed_bound(1.0, m, &psi, &phi, eta).unwrap();
            let c = sublinear_constant(m);
            let oracle = (eta / c).powf((1.0 - m) / m) / 2.0;
            let expected = oracle.max(2.0);
            assert!(rel(b.lambda_lower, expected) < 1e-9, "m={m}: {} vs {expected}", b.lambda_lower);
        }
    }

    #[test]
    fn sublinear_small_eta_falls_back() {
        let psi = D::uniform(0.0, 1.0).unwrap();
        let phi = D::uniform(0.0, 1.0).unwrap();
        let b = sublinear_perturbed_bound(1.0, 0.01, &psi, &phi, 1.5).unwrap();
        assert!(b.fallback);
        assert_eq!(b.lambda_lower, 2.0);
        let b = sublinear_perturbed_bound(1.0, 0.5, &psi, &phi, 0.0).unwrap();
        assert!(b.fallback);
    }

    #[test]
    fn sublinear_grows_as_m_vanishes_when_eta_exceeds_2r() {
        let psi = D::uniform(0.0, 1.0).unwrap();
        let phi = D::uniform(0.0, 1.0).unwrap();
        let b = sublinear_perturbed_bound(1.0, 1e-3, &psi, &phi, 3.0).unwrap();
        assert!(b.lambda_lower > 1e3 * 2.0);
    }

    #[test]
    fn sublinear_monotone_in_eta() {
        let psi = D::uniform(0.0, 1.0).unwrap();
        let phi = D::uniform(0.0, 1.0).unwrap();
        let mut last = 0.0;
        for eta in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let b = sublinear_perturbed_bound(1.0, 0.4, &psi, &phi, eta).unwrap().lambda_lower;
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn superlinear_perturbed_cases() {
        let psi = D::uniform(0.0, 1.0).unwrap();
        let phi = D::uniform(0.0, 2.0).unwrap(); // F = 1/2
        let star = lambda_star(2.0, 2.0, 1.0, 0.5).unwrap();
        assert_eq!(star, 1.0);
        let b = superlinear_perturbed_bound(2.0, &psi, &phi, f64::INFINITY).unwrap();
        assert_eq!(b.lambda_lower, star);
        let b = superlinear_perturbed_bound(2.0, &psi, &phi, 1.9).unwrap();
        assert_eq!(b.lambda_lower, 0.0);
        // RHS(lambda) = 2 + rho/(1-rho), rho = lambda: eta = 3 -> lambda = 1/2
        let b = superlinear_perturbed_bound(2.0, &psi, &phi, 3.0).unwrap();
        assert!(rel(b.lambda_lower, 0.5) < 1e-9);
        assert!(b.lambda_lower < star);
        let big = superlinear_perturbed_bound(2.0, &psi, &phi, 1e6).unwrap();
        assert!(big.lambda_lower < star && big.lambda_lower > 0.999 * star);
    }

    fn fig4a(m: f64, horizon: f64) -> BoundQuery {
        BoundQuery {
            length: 1.0,
            m,
            delta: 0.1,
            horizon,
            psi: D::dirac(1.0).unwrap(),
            phi: D::dirac(0.0).unwrap(),
            init: InitialCondition::Empty,
            search: Search::default(),
            grid_step: None,
        }
    }

    #[test]
    fn deterministic_bound_matches_borel_oracle() {
        // independent evaluation with Borel masses
        fn borel(mu: f64, n: usize) -> f64 {
            let n = n as f64;
            (-mu * n + (n - 1.0) * (mu * n).ln() - statrs::function::gamma::ln_gamma(n + 1.0)).exp()
        }
        let q = fig4a(2.0, 1.0);
        let b = SuperlinearBound::new(q).unwrap();
        for big_m in [1usize, 3, 10] {
            for lambda in [0.05, 0.3] {
                let p = (big_m as f64).powf(-1.0);
                let mu = lambda / p;
                let oracle = (1..=32)
                    .map(|r| {
                        (1..=big_m)
                            .filter(|n| (r * n) as f64 / p >= 1.0 - 1e-12)
                            .map(|n| borel(mu, n).powi(r as i32))
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max);
                let (v, _) = b.value(big_m, lambda).unwrap();
                assert!((v - oracle).abs() < 1e-12, "M={big_m} lambda={lambda}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn fig4a_curve_is_positive_and_decreasing() {
        let mut last = f64::INFINITY;
        for m in [1.1, 1.5, 2.0, 2.5, 3.0] {
            let r = superlinear_bound(&fig4a(m, 1.0)).unwrap();
            assert!(r.lambda_lower > 0.0);
            assert!(r.certified_probability >= 0.9);
            assert!(r.lambda_lower < last, "m={m}");
            last = r.lambda_lower;
        }
    }

    #[test]
    fn monotone_in_delta_and_horizon() {
        let base = fig4a(2.0, 2.0);
        let at = |delta: f64, horizon: f64| {
            superlinear_bound(&BoundQuery { delta, horizon, ..base.clone() }).unwrap().lambda_lower
        };
        for horizon in [1.0, 2.0, 4.0] {
            let v: Vec<f64> = [0.05, 0.1, 0.3].iter().map(|d| at(*d, horizon)).collect();
            assert!(v[0] <= v[1] && v[1] <= v[2], "T={horizon}: {v:?}");
        }
        for delta in [0.05, 0.1, 0.3] {
            let v: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|t| at(delta, *t)).collect();
            assert!(v[0] >= v[1] && v[1] >= v[2], "delta={delta}: {v:?}");
        }
    }

    #[test]
    fn empty_supremum_is_zero() {
        let q = BoundQuery {
            search: Search { m_max: 2, r_max: 1, ..Search::default() },
            ..fig4a(2.0, 100.0)
        };
        let r = superlinear_bound(&q).unwrap();
        assert_eq!(r.lambda_lower, 0.0);
        assert_eq!(r.m_star, None);
    }

    #[test]
    fn nonempty_bound_runs() {
        let q = BoundQuery {
            init: InitialCondition::NonEmpty { n0: 4, w0: 1.0 },
            search: Search { m_max: 16, ..Search::default() },
            ..fig4a(2.0, 1.0)
        };
        let r = superlinear_bound(&q).unwrap();
        assert!(r.lambda_lower >= 0.0);
        assert!(r.lambda_lower == 0.0 || r.certified_probability >= 0.9);
    }
}
