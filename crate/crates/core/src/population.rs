//! Applicant populations: who applies from where, under which score
//! distribution, and how many seats exist.
//!
//! A population is a demographic table of nonnegative real counts over
//! (group, region) cells, one Gamma distribution **per region** — groups
//! within a region share it by construction, there is deliberately no way
//! to attach a distribution to a group — and the raw-score scale.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::gamma::{cdf_dominates, default_grid, GammaParams};
use crate::scalar::Real;
use crate::score::{LogScore, ScoreScale};

/// Demographic group label (e.g. `urm` / `non-urm`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(String);

/// Geographic region label (e.g. `poor` / `rich`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionId(String);

impl GroupId {
    pub fn new(s: impl Into<String>) -> Self {
        GroupId(s.into())
    }

    /// Canonical protected-group label used by quota/plus-factor scoring
    /// and the two-by-two comparative statics.
    pub fn urm() -> Self {
        GroupId::new("urm")
    }

    pub fn non_urm() -> Self {
        GroupId::new("non-urm")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl RegionId {
    pub fn new(s: impl Into<String>) -> Self {
        RegionId(s.into())
    }

    /// Canonical labels for the two-region setting: `poor` is the region
    /// with the weaker score distribution.
    pub fn poor() -> Self {
        RegionId::new("poor")
    }

    pub fn rich() -> Self {
        RegionId::new("rich")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Applicant counts per (group, region) cell. Counts are nonnegative reals
/// — they come from published statistics, not headcounts.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicTable<T> {
    counts: BTreeMap<(GroupId, RegionId), T>,
}

impl<T: Real> DemographicTable<T> {
    pub fn new(counts: BTreeMap<(GroupId, RegionId), T>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Structure("demographic table has no cells".into()));
        }
        let mut total = T::zero();
        for ((g, r), &n) in &counts {
            if !n.is_finite() || n < T::zero() {
                return Err(Error::InvalidParameter {
                    name: "count",
                    reason: format!("cell ({g}, {r}) has count {n}; need a finite value >= 0"),
                });
            }
            total += n;
        }
        if !(total > T::zero()) {
            return Err(Error::Structure("demographic table is all zeros".into()));
        }
        Ok(DemographicTable { counts })
    }

    pub fn total(&self) -> T {
        self.counts.values().fold(T::zero(), |a, &b| a + b)
    }

    pub fn get(&self, group: &GroupId, region: &RegionId) -> Option<T> {
        self.counts.get(&(group.clone(), region.clone())).copied()
    }

    pub fn group_total(&self, group: &GroupId) -> T {
        self.counts
            .iter()
            .filter(|((g, _), _)| g == group)
            .fold(T::zero(), |a, (_, &b)| a + b)
    }

    pub fn region_total(&self, region: &RegionId) -> T {
        self.counts
            .iter()
            .filter(|((_, r), _)| r == region)
            .fold(T::zero(), |a, (_, &b)| a + b)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(GroupId, RegionId), T)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn groups(&self) -> BTreeSet<GroupId> {
        self.counts.keys().map(|(g, _)| g.clone()).collect()
    }

    pub fn regions(&self) -> BTreeSet<RegionId> {
        self.counts.keys().map(|(_, r)| r.clone()).collect()
    }
}

/// Number of seats `g`. Positivity is checked here; `g` strictly below the
/// applicant total is an assumption of the *setting* and is checked by
/// [`validate_theorem_setting`] and by every solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity<T> {
    g: T,
}

impl<T: Real> Capacity<T> {
    pub fn new(g: T) -> Result<Self> {
        if !g.is_finite() || !(g > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("capacity must be positive and finite, got {g}"),
            });
        }
        Ok(Capacity { g })
    }

    pub fn g(&self) -> T {
        self.g
    }
}

/// A full applicant population: table + one distribution per region + scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    table: DemographicTable<T>,
    region_dists: BTreeMap<RegionId, GammaParams<T>>,
    scale: ScoreScale<T>,
}

impl<T: Real> Population<T> {
    /// The regions keyed in `region_dists` must be exactly the regions the
    /// table mentions — no spare or missing distributions.
    pub fn new(
        table: DemographicTable<T>,
        region_dists: BTreeMap<RegionId, GammaParams<T>>,
        scale: ScoreScale<T>,
    ) -> Result<Self> {
        let table_regions = table.regions();
        let dist_regions: BTreeSet<RegionId> = region_dists.keys().cloned().collect();
        if table_regions != dist_regions {
            return Err(Error::Structure(format!(
                "table regions {:?} != distribution regions {:?}",
                table_regions.iter().map(RegionId::as_str).collect::<Vec<_>>(),
                dist_regions.iter().map(RegionId::as_str).collect::<Vec<_>>(),
            )));
        }
        Ok(Population {
            table,
            region_dists,
            scale,
        })
    }

    pub fn table(&self) -> &DemographicTable<T> {
        &self.table
    }

    pub fn region_dist(&self, region: &RegionId) -> Option<&GammaParams<T>> {
        self.region_dists.get(region)
    }

    pub fn region_dists(&self) -> &BTreeMap<RegionId, GammaParams<T>> {
        &self.region_dists
    }

    pub fn scale(&self) -> &ScoreScale<T> {
        &self.scale
    }

    pub fn total_applicants(&self) -> T {
        self.table.total()
    }
}

/// One failed assumption of the two-region/two-group setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionViolation {
    /// URM applicants are not disproportionately from the poor region
    /// (needs `n_urm_poor * n_non_rich > n_urm_rich * n_non_poor`, strictly).
    GeographicDisproportion,
    /// URM applicants are not a strict minority of the pool.
    UrmMinority,
    /// The rich region's CDF does not dominate the poor region's.
    RichDominance,
    /// Seats do not fall short of applicants (`g < n` fails).
    CapacityBound,
}

impl AssumptionViolation {
    /// Every assumption, in the order [`validate_theorem_setting`] reports
    /// violations.
    pub const ALL: [AssumptionViolation; 4] = [
        AssumptionViolation::GeographicDisproportion,
        AssumptionViolation::UrmMinority,
        AssumptionViolation::RichDominance,
        AssumptionViolation::CapacityBound,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            AssumptionViolation::GeographicDisproportion => "geographic-disproportion",
            AssumptionViolation::UrmMinority => "urm-minority",
            AssumptionViolation::RichDominance => "rich-dominance",
            AssumptionViolation::CapacityBound => "capacity-bound",
        }
    }
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Grid density used for the dominance scan inside
/// [`validate_theorem_setting`].
const DOMINANCE_GRID: usize = 512;

/// Checks the four assumptions of the two-region comparative statics and
/// returns the violated ones (empty = setting is valid, deterministic
/// order).
///
/// The population must be *structurally* a `{urm, non-urm} x {poor, rich}`
/// table with all four cells present; anything else is a `Structure` error,
/// not a violation.
pub fn validate_theorem_setting<T: Real>(
    pop: &Population<T>,
    capacity: &Capacity<T>,
) -> Result<Vec<AssumptionViolation>> {
    let v = TheoremView::new(pop, capacity)?;
    let mut out = Vec::new();
    // Cross-multiplied form of n_a^poor / n_a'^poor > n_a^rich / n_a'^rich,
    // safe when a denominator cell is empty.
    if !(v.n_urm_poor * v.n_non_rich > v.n_urm_rich * v.n_non_poor) {
        out.push(AssumptionViolation::GeographicDisproportion);
    }
    if !(v.n_urm_poor + v.n_urm_rich < v.n_non_poor + v.n_non_rich) {
        out.push(AssumptionViolation::UrmMinority);
    }
    let grid = default_grid(&v.rich, &v.poor, DOMINANCE_GRID);
    if !cdf_dominates(&v.rich, &v.poor, &grid)? {
        out.push(AssumptionViolation::RichDominance);
    }
    if !(v.g < v.n_total) {
        out.push(AssumptionViolation::CapacityBound);
    }
    Ok(out)
}

/// Expected number of admits under per-cell thresholds:
/// `Σ_cells n(cell) · F^region(threshold(cell))`. Every table cell must
/// have a threshold.
pub fn expected_admits<T: Real>(
    pop: &Population<T>,
    thresholds: &BTreeMap<(GroupId, RegionId), LogScore<T>>,
) -> Result<T> {
    let mut acc = T::zero();
    for ((group, region), n) in pop.table.cells() {
        let q = thresholds
            .get(&(group.clone(), region.clone()))
            .ok_or_else(|| Error::MissingCell {
                group: group.as_str().into(),
                region: region.as_str().into(),
            })?;
        let dist = pop
            .region_dists
            .get(region)
            .expect("population invariant: every table region has a distribution");
        acc += n * dist.cdf(*q);
    }
    Ok(acc)
}

/// Flattened view of the canonical two-by-two setting, used by the quota /
/// plus-factor solvers and the theorem checkers.
pub(crate) struct TheoremView<T> {
    pub n_urm_poor: T,
    pub n_urm_rich: T,
    pub n_non_poor: T,
    pub n_non_rich: T,
    pub n_total: T,
    pub g: T,
    pub poor: GammaParams<T>,
    pub rich: GammaParams<T>,
}

impl<T: Real> TheoremView<T> {
    pub fn new(pop: &Population<T>, capacity: &Capacity<T>) -> Result<Self> {
        let want_groups: BTreeSet<GroupId> = [GroupId::urm(), GroupId::non_urm()].into();
        let want_regions: BTreeSet<RegionId> = [RegionId::poor(), RegionId::rich()].into();
        if pop.table.groups() != want_groups || pop.table.regions() != want_regions {
            return Err(Error::Structure(
                "need exactly groups {urm, non-urm} and regions {poor, rich}".into(),
            ));
        }
        let cell = |g: GroupId, r: RegionId| {
            pop.table.get(&g, &r).ok_or_else(|| Error::MissingCell {
                group: g.as_str().into(),
                region: r.as_str().into(),
            })
        };
        let view = TheoremView {
            n_urm_poor: cell(GroupId::urm(), RegionId::poor())?,
            n_urm_rich: cell(GroupId::urm(), RegionId::rich())?,
            n_non_poor: cell(GroupId::non_urm(), RegionId::poor())?,
            n_non_rich: cell(GroupId::non_urm(), RegionId::rich())?,
            n_total: pop.table.total(),
            g: capacity.g(),
            poor: *pop
                .region_dists
                .get(&RegionId::poor())
                .expect("region checked above"),
            rich: *pop
                .region_dists
                .get(&RegionId::rich())
                .expect("region checked above"),
        };
        Ok(view)
    }

    pub fn n_urm(&self) -> T {
        self.n_urm_poor + self.n_urm_rich
    }

    pub fn n_non(&self) -> T {
        self.n_non_poor + self.n_non_rich
    }
}

/// Convenience constructor for the canonical two-by-two population used all
/// over the tests and the worked examples.
pub fn two_by_two<T: Real>(
    counts: [T; 4], // [urm_poor, urm_rich, non_poor, non_rich]
    poor: GammaParams<T>,
    rich: GammaParams<T>,
    scale: ScoreScale<T>,
) -> Result<Population<T>> {
    let mut table = BTreeMap::new();
    table.insert((GroupId::urm(), RegionId::poor()), counts[0]);
    table.insert((GroupId::urm(), RegionId::rich()), counts[1]);
    table.insert((GroupId::non_urm(), RegionId::poor()), counts[2]);
    table.insert((GroupId::non_urm(), RegionId::rich()), counts[3]);
    let mut dists = BTreeMap::new();
    dists.insert(RegionId::poor(), poor);
    dists.insert(RegionId::rich(), rich);
    Population::new(DemographicTable::new(table)?, dists, scale)
}
