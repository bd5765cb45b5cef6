//! Recovering a region model from aggregate admissions statistics.
//!
//! The observable side is [`SummaryStats`]: per-group applicant and admit
//! totals plus "fraction at or above raw score s*" quantile points. The
//! latent side is a candidate — per-region Gamma parameters `(k, θ)`,
//! per-region thresholds `q` (region-specific but group-independent by
//! construction of the type), and group-by-region applicant counts. Four
//! constraint families tie them together, each scored as mean squared
//! relative mismatch:
//!
//! 1. `applicant_mix` — Σ_r n_a^(r) against per-group applicant totals;
//! 2. `admit_mix` — Σ_r n_a^(r)·F^(r)(q^(r)) against per-group admits;
//! 3. `applicant_quantiles` — Σ_r n^(r)·F^(r)(q*) over n against the
//!    applicant fraction at each cut;
//! 4. `admit_quantiles` — Σ_r n^(r)·F^(r)(min(q*, q^(r))) over n against
//!    the admit fraction at each cut (the `min` because an individual
//!    counted at-or-above s* is admitted only if also past the region cut).
//!
//! The search runs over an unconstrained vector — `ln k`, `ln θ`, `ln q`
//! per region and per-group softmax logits over regions scaled by the
//! group's applicant total — so positivity and row sums hold exactly and
//! only the four families remain as soft penalties, minimized by
//! multi-start Nelder–Mead. The data can leave the problem
//! under-constrained; what the fit promises is statistic reproduction
//! (small residuals), not parameter identification.

mod nelder_mead;

pub use nelder_mead::{minimize, NmOptions, NmResult};

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::GammaParams;
use crate::montecarlo::splitmix64;
use crate::population::{GroupId, RegionId};
use crate::score::{LogScore, RawScore, ScoreScale};

/// One "fraction at or above raw cut" observation pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantilePoint {
    pub raw_cut: f64,
    pub applicant_frac: f64,
    pub admit_frac: f64,
}

/// Aggregate admissions statistics: everything the fit is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub scale: ScoreScale<f64>,
    pub applicants_by_group: BTreeMap<GroupId, f64>,
    pub admits_by_group: BTreeMap<GroupId, f64>,
    pub quantile_points: Vec<QuantilePoint>,
}

impl SummaryStats {
    pub fn total_applicants(&self) -> f64 {
        self.applicants_by_group.values().sum()
    }

    /// Internal-consistency checks; every fit starts by running these.
    pub fn validate(&self) -> Result<()> {
        if self.applicants_by_group.is_empty() {
            return Err(Error::Validation("no groups in summary stats".into()));
        }
        if self.applicants_by_group.keys().ne(self.admits_by_group.keys()) {
            return Err(Error::Validation(
                "applicant and admit tables list different groups".into(),
            ));
        }
        for (g, &apps) in &self.applicants_by_group {
            let adm = self.admits_by_group[g];
            if !apps.is_finite() || apps < 0.0 || !adm.is_finite() || adm < 0.0 {
                return Err(Error::Validation(format!(
                    "group {g}: counts must be finite and nonnegative"
                )));
            }
            if adm > apps * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Validation(format!(
                    "group {g}: {adm} admits exceed {apps} applicants"
                )));
            }
        }
        if self.total_applicants() <= 0.0 {
            return Err(Error::Validation("zero applicants in total".into()));
        }
        for pt in &self.quantile_points {
            self.scale.to_log_score(RawScore(pt.raw_cut))?;
            let ok = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
            if !ok(pt.applicant_frac) || !ok(pt.admit_frac) {
                return Err(Error::Validation(format!(
                    "cut {}: fractions must lie in [0,1]",
                    pt.raw_cut
                )));
            }
            if pt.admit_frac > pt.applicant_frac + 1e-12 {
                return Err(Error::Validation(format!(
                    "cut {}: admit fraction {} exceeds applicant fraction {}",
                    pt.raw_cut, pt.admit_frac, pt.applicant_frac
                )));
            }
        }
        Ok(())
    }
}

/// Raw quantile cuts as log scores, in the stats' point order. The
/// at-or-above raw-score fraction equals the at-or-below-q CDF value:
/// score order reverses under the negative log.
pub fn convert_quantile_points(stats: &SummaryStats) -> Result<Vec<LogScore<f64>>> {
    stats
        .quantile_points
        .iter()
        .map(|pt| stats.scale.to_log_score(RawScore(pt.raw_cut)))
        .collect()
}

/// A point in the search space, decoded to model terms. `counts[g][r]`
/// is the applicant count of group `g` living in region `r`; rows line up
/// with `regions` and `thresholds` by index.
#[derive(Debug, Clone, PartialEq)]
pub struct FitCandidate {
    pub regions: Vec<GammaParams<f64>>,
    pub thresholds: Vec<LogScore<f64>>,
    pub counts: BTreeMap<GroupId, Vec<f64>>,
}

impl FitCandidate {
    fn check(&self) -> Result<()> {
        let r = self.regions.len();
        if r == 0 {
            return Err(Error::Validation("candidate has no regions".into()));
        }
        if self.thresholds.len() != r {
            return Err(Error::Validation(format!(
                "{} thresholds for {r} regions",
                self.thresholds.len()
            )));
        }
        if self.counts.is_empty() {
            return Err(Error::Validation("candidate has no groups".into()));
        }
        let mut total = 0.0;
        for (g, row) in &self.counts {
            if row.len() != r {
                return Err(Error::Validation(format!(
                    "group {g}: {} counts for {r} regions",
                    row.len()
                )));
            }
            for &n in row {
                if !n.is_finite() || n < 0.0 {
                    return Err(Error::Validation(format!(
                        "group {g}: counts must be finite and nonnegative"
                    )));
                }
                total += n;
            }
        }
        if total <= 0.0 {
            return Err(Error::Validation("candidate has zero applicants".into()));
        }
        Ok(())
    }
}

pub const FAMILY_NAMES: [&str; 4] = [
    "applicant_mix",
    "admit_mix",
    "applicant_quantiles",
    "admit_quantiles",
];

/// Per-family weights on the loss. Zero switches a family off entirely;
/// within a family, terms are averaged, so family sizes don't skew the mix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyWeights {
    pub applicant_mix: f64,
    pub admit_mix: f64,
    pub applicant_quantiles: f64,
    pub admit_quantiles: f64,
}

impl Default for FamilyWeights {
    fn default() -> Self {
        Self {
            applicant_mix: 1.0,
            admit_mix: 1.0,
            applicant_quantiles: 1.0,
            admit_quantiles: 1.0,
        }
    }
}

impl FamilyWeights {
    fn as_array(&self) -> [f64; 4] {
        [
            self.applicant_mix,
            self.admit_mix,
            self.applicant_quantiles,
            self.admit_quantiles,
        ]
    }

    fn check(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "family weights must be finite and nonnegative".into(),
            });
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "at least one family weight must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Loss and its per-family decomposition. Residuals are the unweighted
/// mean squared relative mismatches, keyed by [`FAMILY_NAMES`];
/// `loss = Σ weight_f · residual_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown {
    pub loss: f64,
    pub residuals: BTreeMap<String, f64>,
}

fn rel(pred: f64, obs: f64, floor: f64) -> f64 {
    (pred - obs) / obs.abs().max(floor)
}

/// The four family residuals for `cand` against `stats`, given the cuts
/// already converted to log scores (index-aligned with
/// `stats.quantile_points`).
fn family_residuals(
    stats: &SummaryStats,
    cuts: &[LogScore<f64>],
    cand: &FitCandidate,
) -> Result<[f64; 4]> {
    cand.check()?;
    if cand.counts.keys().ne(stats.applicants_by_group.keys()) {
        return Err(Error::Validation(
            "candidate and stats list different groups".into(),
        ));
    }
    let nr = cand.regions.len();
    let count_floor = 1e-9 * stats.total_applicants();

    // (i) applicant mix: row sums against observed applicant totals.
    let mut f1 = 0.0;
    for (g, row) in &cand.counts {
        let pred: f64 = row.iter().sum();
        f1 += rel(pred, stats.applicants_by_group[g], count_floor).powi(2);
    }
    f1 /= cand.counts.len() as f64;

    // (ii) admit mix: thresholded row sums against observed admits.
    let admit_p: Vec<f64> = (0..nr)
        .map(|r| cand.regions[r].cdf(cand.thresholds[r]))
        .collect();
    let mut f2 = 0.0;
    for (g, row) in &cand.counts {
        let pred: f64 = row.iter().zip(&admit_p).map(|(n, p)| n * p).sum();
        f2 += rel(pred, stats.admits_by_group[g], count_floor).powi(2);
    }
    f2 /= cand.counts.len() as f64;

    // (iii)+(iv) quantile families, fractions of the candidate's total.
    let region_totals: Vec<f64> = (0..nr)
        .map(|r| cand.counts.values().map(|row| row[r]).sum())
        .collect();
    let total: f64 = region_totals.iter().sum();
    let mut f3 = 0.0;
    let mut f4 = 0.0;
    for (pt, &q) in stats.quantile_points.iter().zip(cuts) {
        let mut apps = 0.0;
        let mut adms = 0.0;
        for r in 0..nr {
            let q_adm = if q.value() <= cand.thresholds[r].value() {
                q
            } else {
                cand.thresholds[r]
            };
            apps += region_totals[r] * cand.regions[r].cdf(q);
            adms += region_totals[r] * cand.regions[r].cdf(q_adm);
        }
        f3 += rel(apps / total, pt.applicant_frac, 1e-9).powi(2);
        f4 += rel(adms / total, pt.admit_frac, 1e-9).powi(2);
    }
    if !stats.quantile_points.is_empty() {
        f3 /= stats.quantile_points.len() as f64;
        f4 /= stats.quantile_points.len() as f64;
    }

    Ok([f1, f2, f3, f4])
}

/// Scores one candidate. Parameter positivity is already enforced by the
/// `GammaParams`/`LogScore` types; this checks the shape of `counts`
/// against the stats and evaluates the four families.
pub fn objective(
    stats: &SummaryStats,
    cand: &FitCandidate,
    weights: &FamilyWeights,
) -> Result<ObjectiveBreakdown> {
    weights.check()?;
    let cuts = convert_quantile_points(stats)?;
    let fams = family_residuals(stats, &cuts, cand)?;
    let loss = fams
        .iter()
        .zip(weights.as_array())
        .map(|(f, w)| f * w)
        .sum();
    Ok(ObjectiveBreakdown {
        loss,
        residuals: FAMILY_NAMES
            .iter()
            .map(|n| n.to_string())
            .zip(fams)
            .collect(),
    })
}

/// The exact statistics a candidate implies — the forward model. Fitting
/// stats produced here is the round-trip oracle: the ground truth attains
/// loss 0, so every residual of a fitted solution is honest error.
pub fn forward_stats(
    cand: &FitCandidate,
    raw_cuts: &[f64],
    scale: ScoreScale<f64>,
) -> Result<SummaryStats> {
    cand.check()?;
    let nr = cand.regions.len();
    let admit_p: Vec<f64> = (0..nr)
        .map(|r| cand.regions[r].cdf(cand.thresholds[r]))
        .collect();
    let applicants_by_group: BTreeMap<GroupId, f64> = cand
        .counts
        .iter()
        .map(|(g, row)| (g.clone(), row.iter().sum()))
        .collect();
    let admits_by_group: BTreeMap<GroupId, f64> = cand
        .counts
        .iter()
        .map(|(g, row)| {
            let adm = row.iter().zip(&admit_p).map(|(n, p)| n * p).sum();
            (g.clone(), adm)
        })
        .collect();

    let region_totals: Vec<f64> = (0..nr)
        .map(|r| cand.counts.values().map(|row| row[r]).sum())
        .collect();
    let total: f64 = region_totals.iter().sum();
    let mut quantile_points = Vec::with_capacity(raw_cuts.len());
    for &s in raw_cuts {
        let q = scale.to_log_score(RawScore(s))?;
        let mut apps = 0.0;
        let mut adms = 0.0;
        for r in 0..nr {
            let q_adm = if q.value() <= cand.thresholds[r].value() {
                q
            } else {
                cand.thresholds[r]
            };
            apps += region_totals[r] * cand.regions[r].cdf(q);
            adms += region_totals[r] * cand.regions[r].cdf(q_adm);
        }
        quantile_points.push(QuantilePoint {
            raw_cut: s,
            applicant_frac: apps / total,
            admit_frac: adms / total,
        });
    }
    Ok(SummaryStats {
        scale,
        applicants_by_group,
        admits_by_group,
        quantile_points,
    })
}

/// Everything a fit run needs. `num_regions` defaults small (3) — more
/// regions than the statistics can pin down just overfits.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub stats: SummaryStats,
    pub num_regions: usize,
    pub weights: FamilyWeights,
    pub restarts: usize,
    pub rng_seed: u64,
    pub nm: NmOptions,
}

impl FitProblem {
    pub fn new(stats: SummaryStats, num_regions: usize) -> Self {
        Self {
            stats,
            num_regions,
            weights: FamilyWeights::default(),
            restarts: 32,
            rng_seed: 0,
            nm: NmOptions::default(),
        }
    }
}

/// Best-of-restarts local optimum, in canonical form: regions labeled
/// "0".."R−1" by ascending mean k·θ, thresholds region-specific and
/// group-independent, counts per (group, region) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSolution {
    pub region_dists: BTreeMap<RegionId, GammaParams<f64>>,
    pub thresholds: BTreeMap<RegionId, LogScore<f64>>,
    pub counts: BTreeMap<(GroupId, RegionId), f64>,
    pub loss: f64,
    pub residuals: BTreeMap<String, f64>,
    /// True when the winning polish run ended by stagnation rather than
    /// by exhausting its evaluation budget. Residuals are reported either
    /// way — an unconverged solution is still a solution.
    pub converged: bool,
    pub evals: usize,
}

impl FitSolution {
    /// Per-group admit rate implied by the solution; always in [0, 1].
    pub fn group_admit_rate(&self, group: &GroupId) -> Option<f64> {
        let mut apps = 0.0;
        let mut adms = 0.0;
        for ((g, r), &n) in &self.counts {
            if g == group {
                apps += n;
                adms += n * self.region_dists[r].cdf(self.thresholds[r]);
            }
        }
        (apps > 0.0).then(|| adms / apps)
    }
}

// Clamps on the unconstrained coordinates. Shape stays within
// `GammaParams`' cap, the rest just keep exp() finite and the simplex out
// of flat overflow territory.
const LN_SHAPE: (f64, f64) = (-7.0, 9.2);
const LN_SCALE: (f64, f64) = (-12.0, 6.0);
const LN_CUT: (f64, f64) = (-14.0, 5.0);
const LOGIT: (f64, f64) = (-30.0, 30.0);

fn clamp(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.clamp(lo, hi)
}

/// Layout: `[ln k; R][ln θ; R][ln q; R][logits; G·R]`, groups in map order.
fn decode(x: &[f64], num_regions: usize, groups: &[(GroupId, f64)]) -> FitCandidate {
    let nr = num_regions;
    let regions: Vec<GammaParams<f64>> = (0..nr)
        .map(|r| {
            GammaParams::new(
                clamp(x[r], LN_SHAPE).exp(),
                clamp(x[nr + r], LN_SCALE).exp(),
            )
            .expect("clamped coordinates are in range")
        })
        .collect();
    let thresholds: Vec<LogScore<f64>> = (0..nr)
        .map(|r| LogScore::new(clamp(x[2 * nr + r], LN_CUT).exp()).expect("positive finite"))
        .collect();
    let mut counts = BTreeMap::new();
    for (gi, (g, apps)) in groups.iter().enumerate() {
        let z = &x[3 * nr + gi * nr..3 * nr + (gi + 1) * nr];
        let zmax = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(clamp(b, LOGIT)));
        let w: Vec<f64> = z.iter().map(|&v| (clamp(v, LOGIT) - zmax).exp()).collect();
        let wsum: f64 = w.iter().sum();
        counts.insert(g.clone(), w.iter().map(|v| apps * v / wsum).collect());
    }
    FitCandidate {
        regions,
        thresholds,
        counts,
    }
}

fn initial_point(rng: &mut ChaCha8Rng, num_regions: usize, num_groups: usize) -> Vec<f64> {
    let nr = num_regions;
    let mut x = Vec::with_capacity(3 * nr + num_groups * nr);
    for _ in 0..nr {
        x.push(rng.gen_range(-0.7..3.0)); // k in about [0.5, 20]
    }
    for _ in 0..nr {
        x.push(rng.gen_range(-5.0..0.0)); // θ in about [0.007, 1]
    }
    for _ in 0..nr {
        x.push(rng.gen_range(-5.0..0.0)); // q in about [0.007, 1]
    }
    for _ in 0..num_groups * nr {
        x.push(rng.gen_range(-1.0..1.0));
    }
    x
}

/// Relabels a candidate's regions "0".."R−1" by ascending mean k·θ and
/// flattens it into the output maps. Output labels are arbitrary anyway;
/// a canonical order keeps reports reproducible.
pub(crate) fn canonical_solution(
    cand: &FitCandidate,
    residuals: BTreeMap<String, f64>,
    loss: f64,
    converged: bool,
    evals: usize,
) -> FitSolution {
    let mut order: Vec<usize> = (0..cand.regions.len()).collect();
    order.sort_by(|&a, &b| cand.regions[a].mean().total_cmp(&cand.regions[b].mean()));
    let mut region_dists = BTreeMap::new();
    let mut thresholds = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (label, &orig) in order.iter().enumerate() {
        let id = RegionId::new(label.to_string());
        region_dists.insert(id.clone(), cand.regions[orig]);
        thresholds.insert(id.clone(), cand.thresholds[orig]);
        for (g, row) in &cand.counts {
            counts.insert((g.clone(), id.clone()), row[orig]);
        }
    }
    FitSolution {
        region_dists,
        thresholds,
        counts,
        loss,
        residuals,
        converged,
        evals,
    }
}

/// Multi-start fit: `restarts` independent Nelder–Mead runs from seeded
/// random initial points (in parallel, merged by minimum loss with ties
/// broken by restart index), then one polishing run from the winner.
/// Deterministic given the problem and `rng_seed`, whatever the thread
/// count.
pub fn fit(problem: &FitProblem) -> Result<FitSolution> {
    problem.stats.validate()?;
    problem.weights.check()?;
    if problem.num_regions == 0 {
        return Err(Error::InvalidParameter {
            name: "num_regions",
            reason: "need at least one region".into(),
        });
    }
    if problem.restarts == 0 {
        return Err(Error::InvalidParameter {
            name: "restarts",
            reason: "need at least one restart".into(),
        });
    }

    let cuts = convert_quantile_points(&problem.stats)?;
    let groups: Vec<(GroupId, f64)> = problem
        .stats
        .applicants_by_group
        .iter()
        .map(|(g, &n)| (g.clone(), n))
        .collect();
    let nr = problem.num_regions;
    let dims = 3 * nr + groups.len() * nr;
    let w = problem.weights.as_array();

    let eval = |x: &[f64]| -> f64 {
        let cand = decode(x, nr, &groups);
        match family_residuals(&problem.stats, &cuts, &cand) {
            Ok(fams) => fams.iter().zip(w).map(|(f, wi)| f * wi).sum(),
            Err(_) => f64::INFINITY,
        }
    };

    let runs: Vec<NmResult> = (0..problem.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                problem.rng_seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            ));
            let x0 = initial_point(&mut rng, nr, groups.len());
            minimize(|x| eval(x), &x0, &vec![0.5; dims], &problem.nm)
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.fx.total_cmp(&b.fx).then(ia.cmp(ib)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    let scattered: usize = runs.iter().map(|r| r.evals).sum();

    let polish = minimize(|x| eval(x), &best.x, &vec![0.05; dims], &problem.nm);
    let (final_x, converged) = if polish.fx <= best.fx {
        (&polish.x, polish.stalled)
    } else {
        (&best.x, best.stalled)
    };

    let cand = decode(final_x, nr, &groups);
    let fams = family_residuals(&problem.stats, &cuts, &cand)?;
    let loss = fams.iter().zip(w).map(|(f, wi)| f * wi).sum();
    let residuals = FAMILY_NAMES
        .iter()
        .map(|n| n.to_string())
        .zip(fams)
        .collect();
    Ok(canonical_solution(
        &cand,
        residuals,
        loss,
        converged,
        scattered + polish.evals,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale04() -> ScoreScale<f64> {
        ScoreScale::new(0.0, 4.0).unwrap()
    }

    /// Three regions, five groups; the synthetic instance used across the
    /// test suite. All reference numbers below were frozen from a
    /// 50-digit arbitrary-precision evaluation of the same formulas.
    fn truth() -> FitCandidate {
        let counts = [
            ("a", [500.0, 200.0, 100.0]),
            ("b", [300.0, 400.0, 50.0]),
            ("c", [150.0, 250.0, 600.0]),
            ("d", [80.0, 120.0, 300.0]),
            ("e", [220.0, 60.0, 180.0]),
        ];
        FitCandidate {
            regions: vec![
                GammaParams::new(6.0, 0.03).unwrap(),
                GammaParams::new(4.0, 0.05).unwrap(),
                GammaParams::new(7.0, 0.02).unwrap(),
            ],
            thresholds: vec![
                LogScore::new(0.12).unwrap(),
                LogScore::new(0.10).unwrap(),
                LogScore::new(0.15).unwrap(),
            ],
            counts: counts
                .iter()
                .map(|(g, row)| (GroupId::new(*g), row.to_vec()))
                .collect(),
        }
    }

    const CUTS: [f64; 6] = [4.0, 3.7, 3.6, 3.52, 3.3, 3.0];

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn forward_stats_match_reference_values() {
        let stats = forward_stats(&truth(), &CUTS, scale04()).unwrap();
        let apps = [800.0, 750.0, 1000.0, 500.0, 460.0];
        let adms = [
            198.1946449527410611,
            152.7037649752861562,
            441.0567602267208695,
            220.8883454807011440,
            167.7760622451735574,
        ];
        for (i, g) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            let g = GroupId::new(*g);
            assert_eq!(stats.applicants_by_group[&g], apps[i]);
            assert!(rel_err(stats.admits_by_group[&g], adms[i]) < 1e-12);
        }
        let expect = [
            (0.0, 0.0),
            (0.07409536455008799, 0.07409536455008799),
            (0.19643090272297377, 0.19060728169844216),
            (0.32611651484381798, 0.27836461578260811),
            (0.67318971060508521, 0.33635885409704353),
            (0.91481209405466153, 0.33635885409704353),
        ];
        for (pt, (af, mf)) in stats.quantile_points.iter().zip(expect) {
            if af == 0.0 {
                assert_eq!(pt.applicant_frac, 0.0);
                assert_eq!(pt.admit_frac, 0.0);
            } else {
                assert!(rel_err(pt.applicant_frac, af) < 1e-12, "cut {}", pt.raw_cut);
                assert!(rel_err(pt.admit_frac, mf) < 1e-12, "cut {}", pt.raw_cut);
            }
        }
        // Above every threshold the admit fraction saturates at the
        // overall admit share.
        let share = stats.admits_by_group.values().sum::<f64>() / stats.total_applicants();
        assert!(rel_err(stats.quantile_points[4].admit_frac, share) < 1e-15);
        assert_eq!(
            stats.quantile_points[4].admit_frac,
            stats.quantile_points[5].admit_frac
        );
        stats.validate().unwrap();
    }

    #[test]
    fn objective_vanishes_at_ground_truth() {
        let cand = truth();
        let stats = forward_stats(&cand, &CUTS, scale04()).unwrap();
        let b = objective(&stats, &cand, &FamilyWeights::default()).unwrap();
        assert!(b.loss <= 1e-24, "loss = {}", b.loss);
        for (name, r) in &b.residuals {
            assert!(*r <= 1e-24, "{name} = {r}");
        }
    }

    #[test]
    fn count_perturbation_raises_applicant_mix() {
        let cand = truth();
        let stats = forward_stats(&cand, &CUTS, scale04()).unwrap();
        let mut bent = cand.clone();
        bent.counts.get_mut(&GroupId::new("a")).unwrap()[0] *= 1.1;
        let b = objective(&stats, &bent, &FamilyWeights::default()).unwrap();
        assert!(b.residuals["applicant_mix"] > 1e-5);
        assert!(b.loss > 0.0);
    }

    #[test]
    fn threshold_perturbation_touches_only_admit_families() {
        let cand = truth();
        let stats = forward_stats(&cand, &CUTS, scale04()).unwrap();
        let mut bent = cand.clone();
        bent.thresholds[0] = LogScore::new(0.13).unwrap();
        let b = objective(&stats, &bent, &FamilyWeights::default()).unwrap();
        assert!(b.residuals["applicant_mix"] <= 1e-28);
        assert!(b.residuals["applicant_quantiles"] <= 1e-28);
        assert!(b.residuals["admit_mix"] > 1e-8);
        assert!(b.residuals["admit_quantiles"] > 1e-8);
    }

    #[test]
    fn zero_weight_excludes_a_family() {
        let cand = truth();
        let stats = forward_stats(&cand, &CUTS, scale04()).unwrap();
        let mut bent = cand.clone();
        bent.thresholds[0] = LogScore::new(0.13).unwrap();
        let full = objective(&stats, &bent, &FamilyWeights::default()).unwrap();
        let masked = objective(
            &stats,
            &bent,
            &FamilyWeights {
                admit_mix: 0.0,
                ..FamilyWeights::default()
            },
        )
        .unwrap();
        assert!(masked.loss < full.loss);
        let reconstructed = masked.residuals["applicant_mix"]
            + masked.residuals["applicant_quantiles"]
            + masked.residuals["admit_quantiles"];
        assert!((masked.loss - reconstructed).abs() <= 1e-18 * reconstructed.abs().max(1.0));
    }

    #[test]
    fn single_region_single_group_collapses_to_plain_cdf() {
        let cand = FitCandidate {
            regions: vec![GammaParams::new(3.0, 0.2).unwrap()],
            thresholds: vec![LogScore::new(0.35).unwrap()],
            counts: [(GroupId::new("only"), vec![125.0])].into(),
        };
        let stats = forward_stats(&cand, &[3.2], scale04()).unwrap();
        let q = scale04().to_log_score(RawScore(3.2)).unwrap();
        assert_eq!(
            stats.quantile_points[0].applicant_frac,
            cand.regions[0].cdf(q)
        );
    }

    #[test]
    fn group_admit_rates_stay_in_unit_interval() {
        let cand = truth();
        let stats = forward_stats(&cand, &CUTS, scale04()).unwrap();
        let sol = canonical_solution(&cand, BTreeMap::new(), 0.0, true, 0);
        for g in stats.applicants_by_group.keys() {
            let rate = sol.group_admit_rate(g).unwrap();
            assert!((0.0..=1.0).contains(&rate), "{g}: {rate}");
        }
    }

    #[test]
    fn canonical_labels_sort_regions_by_mean() {
        // Means 0.18, 0.20, 0.14 → canonical order is original 2, 0, 1.
        let sol = canonical_solution(&truth(), BTreeMap::new(), 0.0, true, 0);
        let labels: Vec<&str> = sol.region_dists.keys().map(|r| r.as_str()).collect();
        assert_eq!(labels, ["0", "1", "2"]);
        assert_eq!(sol.region_dists[&RegionId::new("0")].shape(), 7.0);
        assert_eq!(sol.region_dists[&RegionId::new("1")].shape(), 6.0);
        assert_eq!(sol.region_dists[&RegionId::new("2")].shape(), 4.0);
        assert_eq!(sol.thresholds[&RegionId::new("0")].value(), 0.15);
        assert_eq!(sol.counts[&(GroupId::new("a"), RegionId::new("0"))], 100.0);
        assert_eq!(sol.counts[&(GroupId::new("a"), RegionId::new("1"))], 500.0);
        let mean0 = sol.region_dists[&RegionId::new("0")].mean();
        let mean2 = sol.region_dists[&RegionId::new("2")].mean();
        assert!(mean0 < mean2);
    }

    #[test]
    fn single_region_fit_reproduces_statistics() {
        let cand = FitCandidate {
            regions: vec![GammaParams::new(3.0, 0.2).unwrap()],
            thresholds: vec![LogScore::new(0.35).unwrap()],
            counts: [
                (GroupId::new("x"), vec![60.0]),
                (GroupId::new("y"), vec![40.0]),
            ]
            .into(),
        };
        let stats = forward_stats(&cand, &[3.8, 3.4, 3.0, 2.5], scale04()).unwrap();
        let mut problem = FitProblem::new(stats.clone(), 1);
        problem.restarts = 4;
        problem.rng_seed = 7;
        let sol = fit(&problem).unwrap();
        // One region: the softmax rows are constant 1, so the mix
        // families are exactly zero by construction.
        assert_eq!(sol.residuals["applicant_mix"], 0.0);
        assert!(sol.loss < 1e-8, "loss = {}", sol.loss);
        let r0 = RegionId::new("0");
        let implied = sol.region_dists[&r0].cdf(sol.thresholds[&r0]);
        let observed = stats.admits_by_group.values().sum::<f64>() / 100.0;
        assert!(rel_err(implied, observed) < 1e-3);
    }

    #[test]
    fn fit_is_deterministic_given_seed() {
        let cand = FitCandidate {
            regions: vec![GammaParams::new(3.0, 0.2).unwrap()],
            thresholds: vec![LogScore::new(0.35).unwrap()],
            counts: [
                (GroupId::new("x"), vec![60.0]),
                (GroupId::new("y"), vec![40.0]),
            ]
            .into(),
        };
        let stats = forward_stats(&cand, &[3.8, 3.4, 3.0], scale04()).unwrap();
        let mut problem = FitProblem::new(stats, 1);
        problem.restarts = 2;
        problem.rng_seed = 11;
        problem.nm.max_evals = 2_000;
        let a = fit(&problem).unwrap();
        let b = fit(&problem).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inconsistent_stats_are_rejected_before_optimizing() {
        let mut stats = forward_stats(&truth(), &CUTS, scale04()).unwrap();
        *stats
            .admits_by_group
            .get_mut(&GroupId::new("a"))
            .unwrap() = 1e9;
        assert!(matches!(
            fit(&FitProblem::new(stats, 3)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn quantile_cut_at_scale_floor_is_rejected() {
        let mut stats = forward_stats(&truth(), &CUTS, scale04()).unwrap();
        stats.quantile_points.push(QuantilePoint {
            raw_cut: 0.0,
            applicant_frac: 1.0,
            admit_frac: 0.3,
        });
        assert!(stats.validate().is_err());
        assert!(convert_quantile_points(&stats).is_err());
    }

    #[test]
    fn degenerate_problem_parameters_are_rejected() {
        let stats = forward_stats(&truth(), &CUTS, scale04()).unwrap();
        let mut p = FitProblem::new(stats.clone(), 0);
        assert!(fit(&p).is_err());
        p.num_regions = 3;
        p.restarts = 0;
        assert!(fit(&p).is_err());
        p.restarts = 1;
        p.weights.applicant_mix = -1.0;
        assert!(fit(&p).is_err());
        p.weights = FamilyWeights {
            applicant_mix: 0.0,
            admit_mix: 0.0,
            applicant_quantiles: 0.0,
            admit_quantiles: 0.0,
        };
        assert!(fit(&p).is_err());
    }

    #[test]
    fn convert_quantile_points_matches_conversion_anchors() {
        let cand = truth();
        let mut stats = forward_stats(&cand, &[2.0, 3.34], scale04()).unwrap();
        stats.quantile_points[0].raw_cut = 2.0;
        let qs = convert_quantile_points(&stats).unwrap();
        assert!((qs[0].value() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((qs[1].value() - 0.18032355413128157).abs() < 1e-15);
    }
}
