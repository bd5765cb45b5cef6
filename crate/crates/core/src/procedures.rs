//! Capacity-constrained admission procedures.
//!
//! Each solver turns a population plus seat count `g` into per-cell
//! thresholds on the log score. Four rules are covered:
//!
//! * **default** — one open threshold `q_o` for everybody, the root of
//!   `Σ_r n_r F^(r)(q_o) = g`;
//! * **quota** — a share `η · (n_urm/n)` of seats reserved for the URM
//!   group, remaining seats scaled by `η'` so the books balance; every cell
//!   is admitted at its region's quantile of the group's target rate;
//! * **plus-factor** — URM applicants are scored against the scale-inflated
//!   distribution `(k, η†θ)` with `η† < 1` (equivalently, their log scores
//!   are divided by `η†` before comparison), one common cut `q†` clears the
//!   market;
//! * **top-percentage** — each region admits its own top `g/n` fraction,
//!   `q^(r) = F^(r)⁻¹(g/n)`, any number of regions.
//!
//! All solvers check `g < n` up front and report per-cell admit
//! probabilities/counts evaluated from the final thresholds, so
//! `Σ admit_count = g` holds to solver tolerance rather than by fiat.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gamma::GammaParams;
use crate::population::{Capacity, GroupId, Population, RegionId};
use crate::scalar::Real;
use crate::score::LogScore;

/// Which rule to run, with its knob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcedureSpec<T> {
    Default,
    Quota { eta: T },
    PlusFactor { eta_dagger: T },
    TopPercentage,
}

impl<T> ProcedureSpec<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            ProcedureSpec::Default => "default",
            ProcedureSpec::Quota { .. } => "quota",
            ProcedureSpec::PlusFactor { .. } => "plus-factor",
            ProcedureSpec::TopPercentage => "top-percentage",
        }
    }
}

/// Solved thresholds and the admission pattern they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureOutcome<T> {
    /// `ProcedureSpec::kind()` of the rule that produced this.
    pub procedure: &'static str,
    pub thresholds: BTreeMap<(GroupId, RegionId), LogScore<T>>,
    /// Per cell, `F^region(threshold)` — evaluated, not the solver target.
    pub admit_prob: BTreeMap<(GroupId, RegionId), T>,
    /// Per cell, `n(cell) · admit_prob(cell)`.
    pub admit_count: BTreeMap<(GroupId, RegionId), T>,
    /// Scalar by-products: `q_o`, `eta_quota_prime`, `q_dagger`,
    /// per-region `q:<region>` cuts, … whichever the rule defines.
    pub derived: BTreeMap<String, T>,
}

impl<T: Real> ProcedureOutcome<T> {
    pub fn total_admits(&self) -> T {
        self.admit_count.values().fold(T::zero(), |a, &b| a + b)
    }

    fn from_thresholds(
        pop: &Population<T>,
        procedure: &'static str,
        thresholds: BTreeMap<(GroupId, RegionId), LogScore<T>>,
        derived: BTreeMap<String, T>,
    ) -> Self {
        let mut admit_prob = BTreeMap::new();
        let mut admit_count = BTreeMap::new();
        for (cell, n) in pop.table().cells() {
            let dist = pop
                .region_dist(&cell.1)
                .expect("population invariant: region has a distribution");
            let p = dist.cdf(thresholds[cell]);
            admit_prob.insert(cell.clone(), p);
            admit_count.insert(cell.clone(), n * p);
        }
        ProcedureOutcome {
            procedure,
            thresholds,
            admit_prob,
            admit_count,
            derived,
        }
    }
}

/// Dispatcher over [`ProcedureSpec`].
pub fn solve<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
    spec: &ProcedureSpec<T>,
) -> Result<ProcedureOutcome<T>> {
    match *spec {
        ProcedureSpec::Default => solve_default(pop, capacity),
        ProcedureSpec::Quota { eta } => solve_quota(pop, capacity, eta),
        ProcedureSpec::PlusFactor { eta_dagger } => solve_plus_factor(pop, capacity, eta_dagger),
        ProcedureSpec::TopPercentage => solve_top_percentage(pop, capacity),
    }
}

fn check_capacity<T: Real>(pop: &Population<T>, capacity: &Capacity<T>) -> Result<T> {
    let n = pop.total_applicants();
    if !(capacity.g() < n) {
        return Err(Error::Capacity(format!(
            "g = {} does not fall short of the applicant total n = {n}",
            capacity.g()
        )));
    }
    Ok(n)
}

/// Root of an increasing function with a sign change on `[0, ∞)`: doubles
/// `hi` until `f(hi) >= 0`, then bisects to an interval of width 1e-12
/// (or 2ε·hi if that is coarser).
fn bisect_increasing<T: Real>(mut f: impl FnMut(T) -> T, hi_start: T, what: &str) -> Result<T> {
    let two = T::of(2.0);
    let mut hi = hi_start;
    let mut guard = 0;
    while f(hi) < T::zero() {
        hi *= two;
        guard += 1;
        if guard > 300 {
            return Err(Error::Convergence(format!("no upper bracket for {what}")));
        }
    }
    let mut lo = T::zero();
    let tol = T::of(1e-12);
    for _ in 0..500 {
        if hi - lo <= tol.max(hi * two * T::epsilon()) {
            break;
        }
        let mid = (lo + hi) / two;
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Quantile that admits the closed boundaries: target 0 means "admit
/// nobody" (threshold 0) and target 1 means "admit the whole cell"
/// (threshold +inf).
fn quantile_or_boundary<T: Real>(dist: &GammaParams<T>, target: T) -> Result<LogScore<T>> {
    if target == T::zero() {
        Ok(LogScore::zero())
    } else if target == T::one() {
        Ok(LogScore::infinity())
    } else {
        dist.quantile(target)
    }
}

/// Open competition: everyone faces the single cut `q_o` solving
/// `Σ_r n_r F^(r)(q_o) = g`. Works for any group/region structure.
///
/// Derived: `q_o`.
pub fn solve_default<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
) -> Result<ProcedureOutcome<T>> {
    check_capacity(pop, capacity)?;
    let g = capacity.g();
    let hi0 = pop
        .region_dists()
        .values()
        .map(|d| d.mean())
        .fold(T::zero(), T::max);
    let q_o = bisect_increasing(
        |q| {
            pop.region_dists()
                .iter()
                .map(|(r, d)| pop.table().region_total(r) * d.cdf_value(q))
                .fold(T::zero(), |a, b| a + b)
                - g
        },
        hi0,
        "the open threshold",
    )?;

    let threshold = LogScore::new(q_o)?;
    let thresholds = pop
        .table()
        .cells()
        .map(|(cell, _)| (cell.clone(), threshold))
        .collect();
    let mut derived = BTreeMap::new();
    derived.insert("q_o".into(), q_o);
    Ok(ProcedureOutcome::from_thresholds(
        pop,
        "default",
        thresholds,
        derived,
    ))
}

fn require_urm_groups<T: Real>(pop: &Population<T>) -> Result<()> {
    let want: std::collections::BTreeSet<GroupId> =
        [GroupId::urm(), GroupId::non_urm()].into();
    if pop.table().groups() != want {
        return Err(Error::UnsupportedSetting(
            "quota and plus-factor rules need exactly the groups {urm, non-urm}".into(),
        ));
    }
    Ok(())
}

/// Group quota: a fraction `η · (n_urm/n)` of the `g` seats is reserved for
/// URM applicants, `η ∈ [1, n/n_urm]`; the rest go to non-URM applicants at
/// the induced multiplier `η' = (n - η·n_urm) / n_non`. Every cell admits
/// its region's top `g·η/n` (URM) or `g·η'/n` (non-URM) fraction.
///
/// Boundaries are honored: a target of 0 yields threshold 0, a target of 1
/// yields +inf (that whole group is admitted). Targets beyond 1 — the pool
/// cannot fill the reservation — are an `InfeasibleQuota` error.
///
/// Derived: `eta_quota`, `eta_quota_prime`.
pub fn solve_quota<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
    eta: T,
) -> Result<ProcedureOutcome<T>> {
    require_urm_groups(pop)?;
    let n = check_capacity(pop, capacity)?;
    let g = capacity.g();
    let n_urm = pop.table().group_total(&GroupId::urm());
    let n_non = pop.table().group_total(&GroupId::non_urm());
    if !(n_urm > T::zero()) || !(n_non > T::zero()) {
        return Err(Error::UnsupportedSetting(
            "quota rule needs applicants in both groups".into(),
        ));
    }
    if eta.is_nan() || eta < T::one() {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("quota multiplier must be >= 1, got {eta}"),
        });
    }
    if eta * n_urm > n {
        return Err(Error::InfeasibleQuota(format!(
            "eta = {eta} exceeds n/n_urm = {}",
            n / n_urm
        )));
    }
    let eta_prime = (n - eta * n_urm) / n_non;
    let target_urm = g * eta / n;
    let target_non = g * eta_prime / n;
    if target_urm > T::one() {
        return Err(Error::InfeasibleQuota(format!(
            "reservation g·η/n = {target_urm} exceeds the whole URM pool share"
        )));
    }
    debug_assert!(target_non <= T::one(), "η' shrinks the non-URM target");

    let mut thresholds = BTreeMap::new();
    for (cell, _) in pop.table().cells() {
        let dist = pop.region_dist(&cell.1).expect("population invariant");
        let target = if cell.0 == GroupId::urm() {
            target_urm
        } else {
            target_non
        };
        thresholds.insert(cell.clone(), quantile_or_boundary(dist, target)?);
    }
    let mut derived = BTreeMap::new();
    derived.insert("eta_quota".into(), eta);
    derived.insert("eta_quota_prime".into(), eta_prime);
    Ok(ProcedureOutcome::from_thresholds(
        pop,
        "quota",
        thresholds,
        derived,
    ))
}

/// Plus-factor scoring: URM applicants are evaluated on the scale-inflated
/// family `(k, η†θ)`, `η† ∈ (0, 1]`, i.e. their effective log score is
/// `q/η†`. One market-clearing cut `q†` solves
///
/// ```text
/// Σ_urm cells n · F^(r)(q†/η†)  +  Σ_non cells n · F^(r)(q†)  =  g
/// ```
///
/// URM cells then face the equivalent original-scale threshold `q†/η†`
/// (weaker than the open cut), non-URM cells face `q†`.
///
/// Derived: `q_dagger`, `eta_dagger`, `urm_equivalent_threshold`.
pub fn solve_plus_factor<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
    eta_dagger: T,
) -> Result<ProcedureOutcome<T>> {
    require_urm_groups(pop)?;
    check_capacity(pop, capacity)?;
    let g = capacity.g();
    if eta_dagger.is_nan() || !(eta_dagger > T::zero() && eta_dagger <= T::one()) {
        return Err(Error::InvalidParameter {
            name: "eta_dagger",
            reason: format!("plus-factor multiplier must lie in (0, 1], got {eta_dagger}"),
        });
    }

    let urm = GroupId::urm();
    let cells: Vec<(GroupId, RegionId, T, GammaParams<T>)> = pop
        .table()
        .cells()
        .map(|(cell, n)| {
            let dist = *pop.region_dist(&cell.1).expect("population invariant");
            (cell.0.clone(), cell.1.clone(), n, dist)
        })
        .collect();
    let hi0 = cells.iter().map(|c| c.3.mean()).fold(T::zero(), T::max);
    let q_dagger = bisect_increasing(
        |q| {
            cells
                .iter()
                .map(|(group, _, n, dist)| {
                    let eff = if *group == urm { q / eta_dagger } else { q };
                    *n * dist.cdf_value(eff)
                })
                .fold(T::zero(), |a, b| a + b)
                - g
        },
        hi0,
        "the plus-factor threshold",
    )?;

    let urm_threshold = LogScore::new(q_dagger / eta_dagger)?;
    let open_threshold = LogScore::new(q_dagger)?;
    let thresholds = pop
        .table()
        .cells()
        .map(|(cell, _)| {
            let t = if cell.0 == urm {
                urm_threshold
            } else {
                open_threshold
            };
            (cell.clone(), t)
        })
        .collect();
    let mut derived = BTreeMap::new();
    derived.insert("q_dagger".into(), q_dagger);
    derived.insert("eta_dagger".into(), eta_dagger);
    derived.insert("urm_equivalent_threshold".into(), q_dagger / eta_dagger);
    Ok(ProcedureOutcome::from_thresholds(
        pop,
        "plus-factor",
        thresholds,
        derived,
    ))
}

/// Per-region top share: every region admits its own top `g/n` fraction,
/// `q^(r) = F^(r)⁻¹(g/n)`, groups within a region treated identically.
/// Defined for any number of regions.
///
/// Derived: one `q:<region>` entry per region.
pub fn solve_top_percentage<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
) -> Result<ProcedureOutcome<T>> {
    let n = check_capacity(pop, capacity)?;
    let share = capacity.g() / n;
    let mut per_region = BTreeMap::new();
    for (region, dist) in pop.region_dists() {
        per_region.insert(region.clone(), dist.quantile(share)?);
    }
    let thresholds = pop
        .table()
        .cells()
        .map(|(cell, _)| (cell.clone(), per_region[&cell.1]))
        .collect();
    let derived = per_region
        .iter()
        .map(|(r, q)| (format!("q:{r}"), q.value()))
        .collect();
    Ok(ProcedureOutcome::from_thresholds(
        pop,
        "top-percentage",
        thresholds,
        derived,
    ))
}

/// Crossing point of two equal-shape densities,
/// `q̃ = k·ln(θ_a/θ_b) / (1/θ_b − 1/θ_a)`.
///
/// Symmetric in its arguments. Unequal shapes have no single closed-form
/// crossing and are rejected as unsupported; equal scales never cross.
pub fn pdf_intersection<T: Real>(
    a: &GammaParams<T>,
    b: &GammaParams<T>,
) -> Result<LogScore<T>> {
    if a.shape() != b.shape() {
        return Err(Error::UnsupportedSetting(format!(
            "density crossing needs a shared shape, got {} and {}",
            a.shape(),
            b.shape()
        )));
    }
    if a.scale() == b.scale() {
        return Err(Error::Domain(
            "identical scales: densities coincide, no crossing point".into(),
        ));
    }
    let q = a.shape() * (a.scale() / b.scale()).ln()
        / (T::one() / b.scale() - T::one() / a.scale());
    LogScore::new(q)
}
