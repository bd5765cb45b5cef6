//! Numeric checkers for three comparative-statics results on the canonical
//! two-region / two-group setting.
//!
//! Each checker evaluates its result's preconditions one by one, then
//! evaluates the conclusion *independently* on the solved thresholds. A
//! report therefore distinguishes "the result covers this instance and the
//! conclusion holds" from "the conclusion happens to hold anyway": `covered`
//! is the conjunction of the preconditions, `conclusion_holds` is just the
//! measured predicate. When `covered` is true the conclusion must hold —
//! that implication is what the property tests hammer on.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gamma::{cdf_ratio_sup, default_ratio_q_max, RATIO_GRID_SIZE};
use crate::population::{
    validate_theorem_setting, AssumptionViolation, Capacity, Population, TheoremView,
};
use crate::procedures::{pdf_intersection, solve_default, solve_plus_factor, solve_quota,
    solve_top_percentage};
use crate::scalar::Real;

/// Margin used for strict inequalities: "a > b" is certified only when
/// `a - b > 1e-10` (at f64 scale).
pub const STRICT_MARGIN: f64 = 1e-10;

/// Relative tolerance on the equal-shape threshold-ratio identity.
pub const RATIO_RTOL: f64 = 1e-10;

/// Conservation residual allowance, per applicant: `|residual| <= 1e-8 · n`.
pub const CONSERVATION_PER_APPLICANT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Precondition {
    pub name: String,
    pub holds: bool,
}

/// Outcome of checking one result on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport<T> {
    /// 1, 2, or 3.
    pub theorem: u8,
    /// Every precondition with its measured truth value, fixed order.
    pub preconditions: Vec<Precondition>,
    /// All preconditions hold — the result actually speaks to this instance.
    pub covered: bool,
    /// The conclusion predicate, measured regardless of coverage.
    pub conclusion_holds: bool,
    /// Named scalars behind the verdict (thresholds, bounds, margins).
    pub witness: BTreeMap<String, T>,
}

fn pre(name: &str, holds: bool) -> Precondition {
    Precondition {
        name: name.into(),
        holds,
    }
}

fn assumption_preconditions<T: Real>(
    pop: &Population<T>,
    cap: &Capacity<T>,
) -> Result<Vec<Precondition>> {
    let violations = validate_theorem_setting(pop, cap)?;
    Ok([
        AssumptionViolation::GeographicDisproportion,
        AssumptionViolation::UrmMinority,
        AssumptionViolation::RichDominance,
        AssumptionViolation::CapacityBound,
    ]
    .iter()
    .map(|a| pre(&format!("assumption:{a}"), !violations.contains(a)))
    .collect())
}

fn finish<T: Real>(
    theorem: u8,
    preconditions: Vec<Precondition>,
    conclusion_holds: bool,
    witness: BTreeMap<String, T>,
) -> TheoremReport<T> {
    let covered = preconditions.iter().all(|p| p.holds);
    TheoremReport {
        theorem,
        preconditions,
        covered,
        conclusion_holds,
        witness,
    }
}

/// Result 1 — quota displacement ordering.
///
/// With quota multiplier `η ∈ [1, n/n_urm]` and induced `η'`, if the
/// separation `sup_q F_rich/F_poor < η/η'` holds strictly, then the quota
/// thresholds order as `q'^(poor) < q^(rich)`: the strongest *rejected*
/// non-URM applicant from the poor region outscores the weakest *admitted*
/// URM applicant from the rich region.
pub fn check_theorem1<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
    eta: T,
) -> Result<TheoremReport<T>> {
    let v = TheoremView::new(pop, capacity)?;
    let mut preconditions = assumption_preconditions(pop, capacity)?;
    let mut witness = BTreeMap::new();

    let eta_in_range = eta >= T::one() && eta * v.n_urm() <= v.n_total;
    preconditions.push(pre("eta-in-range", eta_in_range));
    witness.insert("eta".into(), eta);

    let eta_prime = (v.n_total - eta * v.n_urm()) / v.n_non();
    witness.insert("eta_prime".into(), eta_prime);
    let feasible = eta_in_range && v.g * eta <= v.n_total;
    preconditions.push(pre("quota-feasible", feasible));

    let lhs = cdf_ratio_sup(
        &v.rich,
        &v.poor,
        default_ratio_q_max(&v.rich, &v.poor),
        RATIO_GRID_SIZE,
    )?;
    // η/η' — +inf at the η' = 0 boundary, which any finite lhs clears.
    let rhs = eta / eta_prime;
    witness.insert("lhs_ratio_sup".into(), lhs);
    witness.insert("rhs_eta_ratio".into(), rhs);
    preconditions.push(pre(
        "strict-separation",
        eta_prime >= T::zero() && lhs < rhs,
    ));

    let conclusion_holds = match solve_quota(pop, capacity, eta) {
        Ok(out) => {
            let q_non_poor = out.thresholds
                [&(crate::population::GroupId::non_urm(), crate::population::RegionId::poor())]
                .value();
            let q_urm_rich = out.thresholds
                [&(crate::population::GroupId::urm(), crate::population::RegionId::rich())]
                .value();
            witness.insert("q_quota_non_poor".into(), q_non_poor);
            witness.insert("q_quota_urm_rich".into(), q_urm_rich);
            q_non_poor < q_urm_rich
        }
        // Unsolvable quota: nothing to order.
        Err(_) => false,
    };

    Ok(finish(1, preconditions, conclusion_holds, witness))
}

/// Result 2 — who the plus factor helps more.
///
/// Equal-shape regions only (shared k, θ_poor > θ_rich is the dominance
/// case). If the open cut sits below the density crossing, `q_o < q̃`, and
/// the multiplier is mild enough, `η† ∈ [q_o/q̃, 1)`, then among URM
/// applicants the *rich* region's admit share grows strictly more than the
/// poor region's:
///
/// ```text
/// F_rich(q†/η†) − F_rich(q_o)  >  F_poor(q†/η†) − F_poor(q_o)
/// ```
pub fn check_theorem2<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
    eta_dagger: T,
) -> Result<TheoremReport<T>> {
    let v = TheoremView::new(pop, capacity)?;
    if v.poor.shape() != v.rich.shape() {
        return Err(Error::UnsupportedSetting(format!(
            "result 2 is stated for a shared shape; got k_poor = {}, k_rich = {}",
            v.poor.shape(),
            v.rich.shape()
        )));
    }
    if v.poor.scale() == v.rich.scale() {
        return Err(Error::UnsupportedSetting(
            "identical region distributions: no density crossing to compare against".into(),
        ));
    }
    let mut preconditions = assumption_preconditions(pop, capacity)?;
    let mut witness = BTreeMap::new();
    witness.insert("eta_dagger".into(), eta_dagger);

    let q_tilde = pdf_intersection(&v.poor, &v.rich)?.value();
    witness.insert("q_tilde".into(), q_tilde);

    if !(v.g < v.n_total) {
        // Cannot solve any threshold; the capacity precondition is already
        // marked false above.
        preconditions.push(pre("open-cut-below-crossing", false));
        preconditions.push(pre("eta-dagger-in-interval", false));
        return Ok(finish(2, preconditions, false, witness));
    }

    let q_o = solve_default(pop, capacity)?.derived["q_o"];
    witness.insert("q_o".into(), q_o);
    preconditions.push(pre("open-cut-below-crossing", q_o < q_tilde));

    // Lower edge of the admissible multiplier interval; equals q_o/q̃.
    let eta_lower = q_o * (T::one() / v.rich.scale() - T::one() / v.poor.scale())
        / (v.poor.shape() * (v.poor.scale() / v.rich.scale()).ln());
    witness.insert("eta_dagger_lower".into(), eta_lower);
    preconditions.push(pre(
        "eta-dagger-in-interval",
        eta_dagger >= eta_lower && eta_dagger < T::one(),
    ));

    let conclusion_holds = match solve_plus_factor(pop, capacity, eta_dagger) {
        Ok(out) => {
            let q_dagger = out.derived["q_dagger"];
            let equiv = out.derived["urm_equivalent_threshold"];
            let rich_gain = v.rich.cdf_value(equiv) - v.rich.cdf_value(q_o);
            let poor_gain = v.poor.cdf_value(equiv) - v.poor.cdf_value(q_o);
            witness.insert("q_dagger".into(), q_dagger);
            witness.insert("urm_equivalent_threshold".into(), equiv);
            witness.insert("rich_gain".into(), rich_gain);
            witness.insert("poor_gain".into(), poor_gain);
            witness.insert("margin".into(), rich_gain - poor_gain);
            rich_gain - poor_gain > T::of(STRICT_MARGIN)
        }
        Err(_) => false,
    };

    Ok(finish(2, preconditions, conclusion_holds, witness))
}

/// Result 3 — top-percentage flow conservation.
///
/// Moving from the open rule to per-region top shares, the poor region's
/// admit inflow equals the rich region's outflow:
///
/// ```text
/// n_poor · (F_poor(q_poor) − F_poor(q_o)) = n_rich · (F_rich(q_o) − F_rich(q_rich))
/// ```
///
/// and with a shared shape the new cuts sit at the scale ratio,
/// `q_poor / q_rich = θ_poor / θ_rich`.
pub fn check_theorem3<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
) -> Result<TheoremReport<T>> {
    let v = TheoremView::new(pop, capacity)?;
    let preconditions = assumption_preconditions(pop, capacity)?;
    let mut witness = BTreeMap::new();

    if !(v.g < v.n_total) {
        return Ok(finish(3, preconditions, false, witness));
    }

    let q_o = solve_default(pop, capacity)?.derived["q_o"];
    let top = solve_top_percentage(pop, capacity)?;
    let q_poor = top.derived["q:poor"];
    let q_rich = top.derived["q:rich"];
    witness.insert("q_o".into(), q_o);
    witness.insert("q_poor".into(), q_poor);
    witness.insert("q_rich".into(), q_rich);

    let n_poor = v.n_urm_poor + v.n_non_poor;
    let n_rich = v.n_urm_rich + v.n_non_rich;
    let inflow = n_poor * (v.poor.cdf_value(q_poor) - v.poor.cdf_value(q_o));
    let outflow = n_rich * (v.rich.cdf_value(q_o) - v.rich.cdf_value(q_rich));
    let residual = inflow - outflow;
    witness.insert("poor_inflow".into(), inflow);
    witness.insert("rich_outflow".into(), outflow);
    witness.insert("residual".into(), residual);

    let mut conclusion_holds =
        residual.abs() <= T::of(CONSERVATION_PER_APPLICANT) * v.n_total;

    if v.poor.shape() == v.rich.shape() {
        let ratio = q_poor / q_rich;
        let scale_ratio = v.poor.scale() / v.rich.scale();
        witness.insert("threshold_ratio".into(), ratio);
        witness.insert("scale_ratio".into(), scale_ratio);
        conclusion_holds = conclusion_holds
            && (ratio / scale_ratio - T::one()).abs() <= T::of(RATIO_RTOL);
    }

    Ok(finish(3, preconditions, conclusion_holds, witness))
}
