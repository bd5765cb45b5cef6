//! Plot-ready report bundles: region densities on a shared grid, the
//! thresholds that were solved or fitted, and whatever theorem checks
//! apply to the instance.
//!
//! The density grid is fixed at [`DENSITY_GRID_POINTS`] log-spaced
//! points from [`GRID_FLOOR`] to the 99.9th percentile of the widest
//! region, with a back-converted raw-score column for plotting against
//! the original scale. A bundle is only considered well-formed if every
//! region's trapezoid integral over that grid lands in
//! [`INTEGRAL_RANGE`] — the check runs both when emitting and when
//! parsing, so a bundle that survives I/O is guaranteed plottable. Very
//! spiky distributions (enormous shapes far from the grid floor) can
//! genuinely fail this: the grid cannot resolve them, and the error says
//! so rather than shipping a density that lies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaParams;
use crate::io::{cells_doc, CellValueDoc, ExtReal, ScaleDoc, TheoremDoc, REPORT_BUNDLE_KIND};
use crate::fit::FitSolution;
use crate::population::{Capacity, Population, RegionId};
use crate::procedures::ProcedureOutcome;
use crate::score::{LogScore, ScoreScale};
use crate::theorems::{check_theorem1, check_theorem2, check_theorem3};

pub const DENSITY_GRID_POINTS: usize = 512;
pub const GRID_FLOOR: f64 = 1e-4;
pub const INTEGRAL_RANGE: (f64, f64) = (0.99, 1.0001);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDensity {
    pub region: String,
    pub shape: f64,
    pub scale_param: f64,
    /// Applicant share of this region; the mixture weight of `pdf` in
    /// `overall_pdf`.
    pub weight: f64,
    pub pdf: Vec<f64>,
    /// Trapezoid integral of `pdf` over the bundle grid.
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionThresholdDoc {
    pub region: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBundle {
    pub kind: String,
    /// What produced the thresholds: "solve", "simulate", or "fit".
    pub source: String,
    pub procedure: Option<String>,
    pub scale: ScaleDoc,
    /// Ascending log scores.
    pub grid: Vec<f64>,
    /// The same points back-converted to raw scores (descending).
    pub raw_grid: Vec<f64>,
    pub densities: Vec<RegionDensity>,
    /// Count-weighted mixture of the region densities, pointwise.
    pub overall_pdf: Vec<f64>,
    /// Per-cell thresholds for solve/simulate sources.
    pub cell_thresholds: Option<Vec<CellValueDoc>>,
    pub cell_admit_prob: Option<Vec<CellValueDoc>>,
    pub cell_admit_count: Option<Vec<CellValueDoc>>,
    /// Per-region thresholds for fit sources (group-independent).
    pub region_thresholds: Option<Vec<RegionThresholdDoc>>,
    pub derived: BTreeMap<String, ExtReal>,
    pub fit_residuals: Option<BTreeMap<String, f64>>,
    pub theorems: Vec<TheoremDoc>,
}

fn trapezoid(grid: &[f64], pdf: &[f64]) -> f64 {
    grid.windows(2)
        .zip(pdf.windows(2))
        .map(|(q, f)| 0.5 * (f[0] + f[1]) * (q[1] - q[0]))
        .sum()
}

/// The shared grid for a set of region distributions.
fn build_grid<'a>(dists: impl Iterator<Item = &'a GammaParams<f64>>) -> Result<Vec<f64>> {
    let mut hi = f64::NEG_INFINITY;
    for d in dists {
        hi = hi.max(d.quantile(0.999)?.value());
    }
    if !hi.is_finite() || hi <= GRID_FLOOR {
        return Err(Error::Validation(format!(
            "density grid collapsed: the widest region's 99.9th percentile \
             {hi} does not clear the grid floor {GRID_FLOOR}"
        )));
    }
    Ok(crate::gamma::log_grid(GRID_FLOOR, hi, DENSITY_GRID_POINTS))
}

fn densities_on(
    grid: &[f64],
    regions: impl Iterator<Item = (String, GammaParams<f64>, f64)>,
) -> (Vec<RegionDensity>, Vec<f64>) {
    let mut densities = Vec::new();
    let mut overall = vec![0.0; grid.len()];
    for (region, dist, weight) in regions {
        let pdf: Vec<f64> = grid
            .iter()
            .map(|&q| dist.pdf(LogScore::new(q).expect("grid points are positive")))
            .collect();
        for (o, f) in overall.iter_mut().zip(&pdf) {
            *o += weight * f;
        }
        let integral = trapezoid(grid, &pdf);
        densities.push(RegionDensity {
            region,
            shape: dist.shape(),
            scale_param: dist.scale(),
            weight,
            pdf,
            integral,
        });
    }
    (densities, overall)
}

fn raw_grid_for(scale: &ScoreScale<f64>, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&q| {
            scale
                .from_log_score(LogScore::new(q).expect("grid points are positive"))
                .0
        })
        .collect()
}

/// Theorem reports that apply to this instance: conservation always, the
/// quota separation for quota outcomes, the plus-factor comparison for
/// plus-factor outcomes. An instance outside a theorem's setting (wrong
/// structure, unequal shapes, …) simply contributes no report.
fn attach_theorems(
    pop: &Population<f64>,
    capacity: &Capacity<f64>,
    outcome: &ProcedureOutcome<f64>,
) -> Vec<TheoremDoc> {
    let mut docs = Vec::new();
    if let Ok(r) = check_theorem3(pop, capacity) {
        docs.push(TheoremDoc::from_report(&r));
    }
    if outcome.procedure == "quota" {
        if let Some(&eta) = outcome.derived.get("eta_quota") {
            if let Ok(r) = check_theorem1(pop, capacity, eta) {
                docs.push(TheoremDoc::from_report(&r));
            }
        }
    }
    if outcome.procedure == "plus-factor" {
        if let Some(&eta_dagger) = outcome.derived.get("eta_dagger") {
            if let Ok(r) = check_theorem2(pop, capacity, eta_dagger) {
                docs.push(TheoremDoc::from_report(&r));
            }
        }
    }
    docs
}

/// Bundles a solved (or simulated) outcome with the population's
/// densities. `source` names the producer: "solve" or "simulate".
pub fn bundle_from_outcome(
    pop: &Population<f64>,
    capacity: &Capacity<f64>,
    outcome: &ProcedureOutcome<f64>,
    source: &str,
) -> Result<ReportBundle> {
    let grid = build_grid(pop.region_dists().values())?;
    let total = pop.total_applicants();
    let regions = pop.region_dists().iter().map(|(id, d)| {
        (
            id.as_str().to_string(),
            *d,
            pop.table().region_total(id) / total,
        )
    });
    let (densities, overall_pdf) = densities_on(&grid, regions);
    let bundle = ReportBundle {
        kind: REPORT_BUNDLE_KIND.into(),
        source: source.into(),
        procedure: Some(outcome.procedure.into()),
        scale: ScaleDoc {
            s_min: pop.scale().s_min(),
            s_max: pop.scale().s_max(),
        },
        raw_grid: raw_grid_for(pop.scale(), &grid),
        grid,
        densities,
        overall_pdf,
        cell_thresholds: Some(
            outcome
                .thresholds
                .iter()
                .map(|((g, r), q)| CellValueDoc {
                    group: g.as_str().into(),
                    region: r.as_str().into(),
                    value: ExtReal(q.value()),
                })
                .collect(),
        ),
        cell_admit_prob: Some(cells_doc(&outcome.admit_prob)),
        cell_admit_count: Some(cells_doc(&outcome.admit_count)),
        region_thresholds: None,
        derived: outcome
            .derived
            .iter()
            .map(|(k, &v)| (k.clone(), ExtReal(v)))
            .collect(),
        fit_residuals: None,
        theorems: attach_theorems(pop, capacity, outcome),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Bundles a fitted solution: densities of the fitted regions weighted by
/// the fitted applicant counts, region-level thresholds, fit residuals.
pub fn bundle_from_fit(solution: &FitSolution, scale: ScoreScale<f64>) -> Result<ReportBundle> {
    let grid = build_grid(solution.region_dists.values())?;
    let total: f64 = solution.counts.values().sum();
    if total <= 0.0 {
        return Err(Error::Validation(
            "fit solution has no applicants to weight densities by".into(),
        ));
    }
    let region_weight = |id: &RegionId| -> f64 {
        solution
            .counts
            .iter()
            .filter(|((_, r), _)| r == id)
            .map(|(_, &n)| n)
            .sum::<f64>()
            / total
    };
    let regions = solution
        .region_dists
        .iter()
        .map(|(id, d)| (id.as_str().to_string(), *d, region_weight(id)));
    let (densities, overall_pdf) = densities_on(&grid, regions);
    let bundle = ReportBundle {
        kind: REPORT_BUNDLE_KIND.into(),
        source: "fit".into(),
        procedure: None,
        scale: ScaleDoc {
            s_min: scale.s_min(),
            s_max: scale.s_max(),
        },
        raw_grid: raw_grid_for(&scale, &grid),
        grid,
        densities,
        overall_pdf,
        cell_thresholds: None,
        cell_admit_prob: None,
        cell_admit_count: None,
        region_thresholds: Some(
            solution
                .thresholds
                .iter()
                .map(|(r, q)| RegionThresholdDoc {
                    region: r.as_str().into(),
                    threshold: q.value(),
                })
                .collect(),
        ),
        derived: BTreeMap::new(),
        fit_residuals: Some(solution.residuals.clone()),
        theorems: Vec::new(),
    };
    bundle.validate()?;
    Ok(bundle)
}

impl ReportBundle {
    /// Structural and numeric well-formedness; run on emit and on parse.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("report bundle: {msg}")));
        if self.kind != REPORT_BUNDLE_KIND {
            return fail(format!("kind {:?}", self.kind));
        }
        if !matches!(self.source.as_str(), "solve" | "simulate" | "fit") {
            return fail(format!("unknown source {:?}", self.source));
        }
        let scale = ScoreScale::new(self.scale.s_min, self.scale.s_max)?;
        let n = self.grid.len();
        if n != DENSITY_GRID_POINTS {
            return fail(format!("{n} grid points, expected {DENSITY_GRID_POINTS}"));
        }
        if !self
            .grid
            .windows(2)
            .all(|w| w[0] > 0.0 && w[0] < w[1] && w[1].is_finite())
        {
            return fail("grid is not positive strictly-ascending".into());
        }
        if self.raw_grid.len() != n {
            return fail("raw grid length differs from grid".into());
        }
        for (&q, &raw) in self.grid.iter().zip(&self.raw_grid) {
            let expect = scale.from_log_score(LogScore::new(q)?).0;
            if (raw - expect).abs() > 1e-12 * expect.abs().max(1.0) {
                return fail(format!("raw grid mismatch at q = {q}"));
            }
        }
        if self.densities.is_empty() {
            return fail("no region densities".into());
        }
        let mut weight_sum = 0.0;
        for d in &self.densities {
            GammaParams::new(d.shape, d.scale_param)?;
            if !(d.weight.is_finite() && d.weight >= 0.0) {
                return fail(format!("region {}: weight {}", d.region, d.weight));
            }
            weight_sum += d.weight;
            if d.pdf.len() != n {
                return fail(format!("region {}: pdf length {}", d.region, d.pdf.len()));
            }
            if !d.pdf.iter().all(|v| v.is_finite() && *v >= 0.0) {
                return fail(format!("region {}: pdf has invalid values", d.region));
            }
            let integral = trapezoid(&self.grid, &d.pdf);
            if (integral - d.integral).abs() > 1e-9 * d.integral.abs().max(1.0) {
                return fail(format!(
                    "region {}: stored integral {} but grid gives {integral}",
                    d.region, d.integral
                ));
            }
            if !(INTEGRAL_RANGE.0..=INTEGRAL_RANGE.1).contains(&integral) {
                return fail(format!(
                    "region {}: density integral {integral} outside [{}, {}] — \
                     the grid does not resolve this distribution",
                    d.region, INTEGRAL_RANGE.0, INTEGRAL_RANGE.1
                ));
            }
        }
        if (weight_sum - 1.0).abs() > 1e-9 {
            return fail(format!("region weights sum to {weight_sum}"));
        }
        if self.overall_pdf.len() != n {
            return fail("overall pdf length differs from grid".into());
        }
        for i in 0..n {
            let mix: f64 = self.densities.iter().map(|d| d.weight * d.pdf[i]).sum();
            if (self.overall_pdf[i] - mix).abs() > 1e-9 * mix.abs().max(1e-12) {
                return fail(format!(
                    "overall density is not the weighted mixture at q = {}",
                    self.grid[i]
                ));
            }
        }
        match self.source.as_str() {
            "fit" => {
                if self.region_thresholds.is_none() || self.fit_residuals.is_none() {
                    return fail("fit bundle lacks region thresholds or residuals".into());
                }
                if self.cell_thresholds.is_some() {
                    return fail("fit bundle carries per-cell thresholds".into());
                }
            }
            _ => {
                if self.cell_thresholds.is_none()
                    || self.cell_admit_prob.is_none()
                    || self.cell_admit_count.is_none()
                {
                    return fail(format!("{} bundle lacks per-cell outcome data", self.source));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::canonical_solution;
    use crate::fit::FitCandidate;
    use crate::io::{emit_report, parse_report_bundle};
    use crate::population::{two_by_two, GroupId};
    use crate::procedures::{solve, ProcedureSpec};

    fn fixture() -> (Population<f64>, Capacity<f64>) {
        let pop = two_by_two(
            [30.0, 10.0, 20.0, 40.0],
            GammaParams::new(2.0, 0.3).unwrap(),
            GammaParams::new(2.0, 0.15).unwrap(),
            ScoreScale::new(0.0, 4.0).unwrap(),
        )
        .unwrap();
        (pop, Capacity::new(50.0).unwrap())
    }

    #[test]
    fn solve_bundle_is_well_formed_and_round_trips() {
        let (pop, cap) = fixture();
        let outcome = solve(&pop, &cap, &ProcedureSpec::Default).unwrap();
        let bundle = bundle_from_outcome(&pop, &cap, &outcome, "solve").unwrap();

        assert_eq!(bundle.grid.len(), DENSITY_GRID_POINTS);
        assert!(bundle.grid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bundle.grid[0], GRID_FLOOR);
        // Raw back-conversion reverses order: small q is a high score.
        assert!(bundle.raw_grid.windows(2).all(|w| w[0] > w[1]));
        for d in &bundle.densities {
            assert!(d.integral > 0.99 && d.integral < 1.0001, "{}", d.integral);
        }
        // The overall density is exactly the weighted mixture.
        for (i, &o) in bundle.overall_pdf.iter().enumerate() {
            let mix: f64 = bundle.densities.iter().map(|d| d.weight * d.pdf[i]).sum();
            assert_eq!(o, mix);
        }
        // Default procedure on the canonical fixture: conservation report
        // attaches, the quota/plus-factor theorems don't.
        let ids: Vec<u8> = bundle.theorems.iter().map(|t| t.theorem).collect();
        assert_eq!(ids, [3]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.json");
        emit_report(&path, &bundle).unwrap();
        let first = std::fs::read(&path).unwrap();
        let parsed = parse_report_bundle(&path).unwrap();
        assert_eq!(parsed, bundle);
        emit_report(&path, &parsed).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn tight_distribution_integrates_to_one_within_a_thousandth() {
        let pop = two_by_two(
            [30.0, 10.0, 20.0, 40.0],
            GammaParams::new(6.0, 0.03).unwrap(),
            GammaParams::new(6.0, 0.03).unwrap(),
            ScoreScale::new(0.0, 4.0).unwrap(),
        )
        .unwrap();
        let cap = Capacity::new(50.0).unwrap();
        let outcome = solve(&pop, &cap, &ProcedureSpec::Default).unwrap();
        let bundle = bundle_from_outcome(&pop, &cap, &outcome, "solve").unwrap();
        for d in &bundle.densities {
            assert!((d.integral - 1.0).abs() <= 1e-3, "{}", d.integral);
        }
    }

    #[test]
    fn quota_and_plus_factor_bundles_attach_their_theorems() {
        let (pop, cap) = fixture();
        let quota = solve(&pop, &cap, &ProcedureSpec::Quota { eta: 1.9 }).unwrap();
        let bundle = bundle_from_outcome(&pop, &cap, &quota, "solve").unwrap();
        let ids: Vec<u8> = bundle.theorems.iter().map(|t| t.theorem).collect();
        assert_eq!(ids, [3, 1]);

        let cap20 = Capacity::new(20.0).unwrap();
        let plus = solve(&pop, &cap20, &ProcedureSpec::PlusFactor { eta_dagger: 0.9 }).unwrap();
        let bundle = bundle_from_outcome(&pop, &cap20, &plus, "simulate").unwrap();
        let ids: Vec<u8> = bundle.theorems.iter().map(|t| t.theorem).collect();
        assert_eq!(ids, [3, 2]);
        assert_eq!(bundle.source, "simulate");
    }

    #[test]
    fn fit_bundle_weights_follow_fitted_counts() {
        let counts = [
            ("a", [500.0, 200.0, 100.0]),
            ("b", [300.0, 400.0, 50.0]),
            ("c", [150.0, 250.0, 600.0]),
            ("d", [80.0, 120.0, 300.0]),
            ("e", [220.0, 60.0, 180.0]),
        ];
        let cand = FitCandidate {
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
        };
        let sol = canonical_solution(&cand, BTreeMap::new(), 1e-12, true, 4242);
        let bundle = bundle_from_fit(&sol, ScoreScale::new(0.0, 4.0).unwrap()).unwrap();
        assert_eq!(bundle.source, "fit");
        assert!(bundle.cell_thresholds.is_none());
        assert!(bundle.region_thresholds.is_some());
        assert!(bundle.theorems.is_empty());
        // Canonical region "0" is the (7, 0.02) one; its weight is the
        // third column share.
        let d0 = &bundle.densities[0];
        assert_eq!(d0.region, "0");
        assert_eq!(d0.shape, 7.0);
        assert!((d0.weight - 1230.0 / 3510.0).abs() < 1e-15);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit_bundle.json");
        emit_report(&path, &bundle).unwrap();
        assert_eq!(parse_report_bundle(&path).unwrap(), bundle);
    }

    #[test]
    fn tampered_bundles_fail_validation() {
        let (pop, cap) = fixture();
        let outcome = solve(&pop, &cap, &ProcedureSpec::Default).unwrap();
        let good = bundle_from_outcome(&pop, &cap, &outcome, "solve").unwrap();

        let mut b = good.clone();
        b.densities[0].pdf[100] *= 2.0;
        assert!(b.validate().is_err());

        let mut b = good.clone();
        b.densities[0].integral = 0.5;
        assert!(b.validate().is_err());

        let mut b = good.clone();
        b.overall_pdf[0] += 1.0;
        assert!(b.validate().is_err());

        let mut b = good.clone();
        b.grid.truncate(100);
        assert!(b.validate().is_err());

        let mut b = good.clone();
        b.densities[0].weight += 0.5;
        assert!(b.validate().is_err());

        let mut b = good.clone();
        b.cell_thresholds = None;
        assert!(b.validate().is_err());

        let mut b = good;
        b.raw_grid[3] += 0.25;
        assert!(b.validate().is_err());
    }

    #[test]
    fn unresolvable_grid_is_an_error() {
        // 99.9th percentile far below the grid floor: nothing to plot.
        let pop = two_by_two(
            [30.0, 10.0, 20.0, 40.0],
            GammaParams::new(2.0, 1e-7).unwrap(),
            GammaParams::new(2.0, 5e-8).unwrap(),
            ScoreScale::new(0.0, 4.0).unwrap(),
        )
        .unwrap();
        let cap = Capacity::new(50.0).unwrap();
        let outcome = solve(&pop, &cap, &ProcedureSpec::Default).unwrap();
        assert!(matches!(
            bundle_from_outcome(&pop, &cap, &outcome, "solve"),
            Err(Error::Validation(_))
        ));
    }
}
