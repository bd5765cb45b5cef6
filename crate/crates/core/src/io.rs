//! File formats: population documents, summary-statistics CSVs, and the
//! JSON reports every command emits.
//!
//! All JSON documents are self-describing — population files carry a
//! `version`, everything else a `"kind"` tag — and all numbers serialize
//! in shortest round-trip form, so emit → parse → emit is byte-identical.
//! Thresholds can be `+∞` (a closed quota boundary admits a cell
//! entirely); JSON has no infinity literal, so [`ExtReal`] writes finite
//! values as numbers and infinity as the string `"inf"`.
//!
//! Everything is validated on the way in: a parsed document either
//! satisfies the owning type's invariants or names the offending
//! row/field in the error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Error as _;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fit::{FitSolution, QuantilePoint, SummaryStats};
use crate::gamma::GammaParams;
use crate::montecarlo::Cohort;
use crate::population::{Capacity, DemographicTable, GroupId, Population, RegionId};
use crate::procedures::ProcedureOutcome;
use crate::report::ReportBundle;
use crate::score::{LogScore, ScoreScale};
use crate::theorems::{Precondition, TheoremReport};

pub const POPULATION_VERSION: u32 = 1;

/// A real number extended with `+∞`, JSON-encodable. Finite values are
/// plain numbers; infinity is the string `"inf"`. NaN and `-∞` have no
/// meaning in any of the file formats and refuse to serialize.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            Err(S::Error::custom("only finite values and +inf are encodable"))
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a finite number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
                if v.is_finite() {
                    Ok(ExtReal(v))
                } else {
                    Err(E::custom("non-finite JSON number"))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
                if v == "inf" {
                    Ok(ExtReal(f64::INFINITY))
                } else {
                    Err(E::custom(format!("unknown extended-real token {v:?}")))
                }
            }
        }
        d.deserialize_any(V)
    }
}

// ---------------------------------------------------------------------
// Population documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDoc {
    pub s_min: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityDoc {
    pub g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDoc {
    pub id: String,
    pub shape: f64,
    pub scale_param: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountDoc {
    pub group: String,
    pub region: String,
    pub n: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationDoc {
    pub version: u32,
    pub scale: ScaleDoc,
    pub capacity: CapacityDoc,
    pub regions: Vec<RegionDoc>,
    pub counts: Vec<CountDoc>,
}

impl PopulationDoc {
    pub fn from_parts(pop: &Population<f64>, capacity: &Capacity<f64>) -> Self {
        PopulationDoc {
            version: POPULATION_VERSION,
            scale: ScaleDoc {
                s_min: pop.scale().s_min(),
                s_max: pop.scale().s_max(),
            },
            capacity: CapacityDoc { g: capacity.g() },
            regions: pop
                .region_dists()
                .iter()
                .map(|(id, d)| RegionDoc {
                    id: id.as_str().into(),
                    shape: d.shape(),
                    scale_param: d.scale(),
                })
                .collect(),
            counts: pop
                .table()
                .cells()
                .map(|((g, r), n)| CountDoc {
                    group: g.as_str().into(),
                    region: r.as_str().into(),
                    n,
                })
                .collect(),
        }
    }

    pub fn into_parts(self) -> Result<(Population<f64>, Capacity<f64>)> {
        if self.version != POPULATION_VERSION {
            return Err(Error::Parse(format!(
                "population version {} not supported (expected {POPULATION_VERSION})",
                self.version
            )));
        }
        let scale = ScoreScale::new(self.scale.s_min, self.scale.s_max)?;
        let capacity = Capacity::new(self.capacity.g)?;
        let mut dists = BTreeMap::new();
        for (i, r) in self.regions.iter().enumerate() {
            let dist = GammaParams::new(r.shape, r.scale_param)?;
            if dists.insert(RegionId::new(r.id.clone()), dist).is_some() {
                return Err(Error::Parse(format!(
                    "regions[{i}]: duplicate region id {:?}",
                    r.id
                )));
            }
        }
        let mut counts = BTreeMap::new();
        for (i, c) in self.counts.iter().enumerate() {
            let cell = (GroupId::new(c.group.clone()), RegionId::new(c.region.clone()));
            if counts.insert(cell, c.n).is_some() {
                return Err(Error::Parse(format!(
                    "counts[{i}]: duplicate cell ({:?}, {:?})",
                    c.group, c.region
                )));
            }
        }
        let table = DemographicTable::new(counts)?;
        Ok((Population::new(table, dists, scale)?, capacity))
    }
}

/// Reads and fully validates a population file; the capacity rides along
/// in the document because every consumer needs both.
pub fn parse_population(path: impl AsRef<Path>) -> Result<(Population<f64>, Capacity<f64>)> {
    read_json::<PopulationDoc>(path)?.into_parts()
}

pub fn emit_population(
    path: impl AsRef<Path>,
    pop: &Population<f64>,
    capacity: &Capacity<f64>,
) -> Result<()> {
    write_json(path, &PopulationDoc::from_parts(pop, capacity))
}

// ---------------------------------------------------------------------
// Summary-statistics CSVs

const GROUPS_HEADER: [&str; 3] = ["group", "applicants", "admits"];
const QUANTILES_HEADER: [&str; 3] = [
    "gpa_cut",
    "applicant_frac_at_or_above",
    "admit_frac_at_or_above",
];

fn check_header(path: &Path, got: &csv::StringRecord, want: [&str; 3]) -> Result<()> {
    if got.iter().ne(want) {
        return Err(Error::Parse(format!(
            "{}: expected header {}, got {:?}",
            path.display(),
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn parse_field(path: &Path, row: usize, name: &str, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "{} row {row}: field {name} is not a number: {s:?}",
            path.display()
        ))
    })
}

/// Reads the two-CSV summary-statistics schema: per-group totals from
/// `groups_path`, "fraction at or above GPA cut" points from
/// `quantiles_path`. Quantile points come back sorted by descending raw
/// cut, and the whole bundle is validated against `scale`.
pub fn parse_summary_stats(
    groups_path: impl AsRef<Path>,
    quantiles_path: impl AsRef<Path>,
    scale: ScoreScale<f64>,
) -> Result<SummaryStats> {
    let gp = groups_path.as_ref();
    let mut rdr = csv_reader(gp)?;
    check_header(gp, rdr.headers().map_err(csv_err(gp))?, GROUPS_HEADER)?;
    let mut applicants_by_group = BTreeMap::new();
    let mut admits_by_group = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(gp))?;
        let row = i + 2; // 1-based, after the header
        if rec.len() != 3 {
            return Err(Error::Parse(format!(
                "{} row {row}: expected 3 fields, got {}",
                gp.display(),
                rec.len()
            )));
        }
        let group = GroupId::new(rec[0].trim());
        let apps = parse_field(gp, row, "applicants", &rec[1])?;
        let adms = parse_field(gp, row, "admits", &rec[2])?;
        if applicants_by_group.insert(group.clone(), apps).is_some() {
            return Err(Error::Parse(format!(
                "{} row {row}: duplicate group {group}",
                gp.display()
            )));
        }
        admits_by_group.insert(group, adms);
    }
    if applicants_by_group.is_empty() {
        return Err(Error::Parse(format!(
            "{}: no data rows",
            gp.display()
        )));
    }

    let qp = quantiles_path.as_ref();
    let mut rdr = csv_reader(qp)?;
    check_header(qp, rdr.headers().map_err(csv_err(qp))?, QUANTILES_HEADER)?;
    let mut quantile_points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(qp))?;
        let row = i + 2;
        if rec.len() != 3 {
            return Err(Error::Parse(format!(
                "{} row {row}: expected 3 fields, got {}",
                qp.display(),
                rec.len()
            )));
        }
        quantile_points.push(QuantilePoint {
            raw_cut: parse_field(qp, row, "gpa_cut", &rec[0])?,
            applicant_frac: parse_field(qp, row, "applicant_frac_at_or_above", &rec[1])?,
            admit_frac: parse_field(qp, row, "admit_frac_at_or_above", &rec[2])?,
        });
    }
    if quantile_points.is_empty() {
        return Err(Error::Parse(format!(
            "{}: no data rows",
            qp.display()
        )));
    }
    quantile_points.sort_by(|a, b| b.raw_cut.total_cmp(&a.raw_cut));

    let stats = SummaryStats {
        scale,
        applicants_by_group,
        admits_by_group,
        quantile_points,
    };
    stats.validate()?;
    Ok(stats)
}

/// Writes the two summary CSVs; the exact inverse of
/// [`parse_summary_stats`] for valid stats.
pub fn emit_summary_stats(
    groups_path: impl AsRef<Path>,
    quantiles_path: impl AsRef<Path>,
    stats: &SummaryStats,
) -> Result<()> {
    let gp = groups_path.as_ref();
    let mut w = csv::Writer::from_path(gp).map_err(csv_err(gp))?;
    w.write_record(GROUPS_HEADER).map_err(csv_err(gp))?;
    for (g, apps) in &stats.applicants_by_group {
        w.serialize((g.as_str(), apps, stats.admits_by_group[g]))
            .map_err(csv_err(gp))?;
    }
    w.flush()?;

    let qp = quantiles_path.as_ref();
    let mut w = csv::Writer::from_path(qp).map_err(csv_err(qp))?;
    w.write_record(QUANTILES_HEADER).map_err(csv_err(qp))?;
    for pt in &stats.quantile_points {
        w.serialize((pt.raw_cut, pt.applicant_frac, pt.admit_frac))
            .map_err(csv_err(qp))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err(path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------
// Outcome and report documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellValueDoc {
    pub group: String,
    pub region: String,
    pub value: ExtReal,
}

pub(crate) fn cells_doc(map: &BTreeMap<(GroupId, RegionId), f64>) -> Vec<CellValueDoc> {
    map.iter()
        .map(|((g, r), &v)| CellValueDoc {
            group: g.as_str().into(),
            region: r.as_str().into(),
            value: ExtReal(v),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub procedure: String,
    pub thresholds: Vec<CellValueDoc>,
    pub admit_prob: Vec<CellValueDoc>,
    pub admit_count: Vec<CellValueDoc>,
    pub derived: BTreeMap<String, ExtReal>,
    pub total_admits: f64,
}

impl OutcomeDoc {
    pub fn from_outcome(o: &ProcedureOutcome<f64>) -> Self {
        OutcomeDoc {
            procedure: o.procedure.into(),
            thresholds: o
                .thresholds
                .iter()
                .map(|((g, r), q)| CellValueDoc {
                    group: g.as_str().into(),
                    region: r.as_str().into(),
                    value: ExtReal(q.value()),
                })
                .collect(),
            admit_prob: cells_doc(&o.admit_prob),
            admit_count: cells_doc(&o.admit_count),
            derived: o
                .derived
                .iter()
                .map(|(k, &v)| (k.clone(), ExtReal(v)))
                .collect(),
            total_admits: o.total_admits(),
        }
    }

    pub fn to_outcome(&self) -> Result<ProcedureOutcome<f64>> {
        let procedure = match self.procedure.as_str() {
            "default" => "default",
            "quota" => "quota",
            "plus-factor" => "plus-factor",
            "top-percentage" => "top-percentage",
            other => {
                return Err(Error::Parse(format!("unknown procedure kind {other:?}")));
            }
        };
        let mut thresholds = BTreeMap::new();
        for c in &self.thresholds {
            thresholds.insert(
                (GroupId::new(c.group.clone()), RegionId::new(c.region.clone())),
                LogScore::new(c.value.0)?,
            );
        }
        let cell_map = |docs: &[CellValueDoc]| -> BTreeMap<(GroupId, RegionId), f64> {
            docs.iter()
                .map(|c| {
                    (
                        (GroupId::new(c.group.clone()), RegionId::new(c.region.clone())),
                        c.value.0,
                    )
                })
                .collect()
        };
        Ok(ProcedureOutcome {
            procedure,
            thresholds,
            admit_prob: cell_map(&self.admit_prob),
            admit_count: cell_map(&self.admit_count),
            derived: self.derived.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreconditionDoc {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremDoc {
    pub theorem: u8,
    pub preconditions: Vec<PreconditionDoc>,
    pub covered: bool,
    pub conclusion_holds: bool,
    pub witness: BTreeMap<String, ExtReal>,
}

impl TheoremDoc {
    pub fn from_report(r: &TheoremReport<f64>) -> Self {
        TheoremDoc {
            theorem: r.theorem,
            preconditions: r
                .preconditions
                .iter()
                .map(|Precondition { name, holds }| PreconditionDoc {
                    name: name.clone(),
                    holds: *holds,
                })
                .collect(),
            covered: r.covered,
            conclusion_holds: r.conclusion_holds,
            witness: r
                .witness
                .iter()
                .map(|(k, &v)| (k.clone(), ExtReal(v)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReportDoc {
    pub kind: String,
    pub population: PopulationDoc,
    pub outcome: OutcomeDoc,
}

pub const SOLVE_REPORT_KIND: &str = "solve_report";

impl SolveReportDoc {
    pub fn new(
        pop: &Population<f64>,
        capacity: &Capacity<f64>,
        outcome: &ProcedureOutcome<f64>,
    ) -> Self {
        SolveReportDoc {
            kind: SOLVE_REPORT_KIND.into(),
            population: PopulationDoc::from_parts(pop, capacity),
            outcome: OutcomeDoc::from_outcome(outcome),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReportDoc {
    pub kind: String,
    pub theorem: TheoremDoc,
}

pub const CHECK_REPORT_KIND: &str = "check_report";

impl CheckReportDoc {
    pub fn new(report: &TheoremReport<f64>) -> Self {
        CheckReportDoc {
            kind: CHECK_REPORT_KIND.into(),
            theorem: TheoremDoc::from_report(report),
        }
    }
}

/// One cell's analytic-versus-empirical comparison in a simulate report.
/// `tolerance` is the binomial four-sigma band `4·sqrt(p(1−p)/m)`; a cell
/// with no samples carries no evidence and counts as within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCellDoc {
    pub group: String,
    pub region: String,
    pub samples: u64,
    pub admitted: u64,
    pub empirical_rate: f64,
    pub analytic_prob: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateReportDoc {
    pub kind: String,
    pub population: PopulationDoc,
    pub seed: u64,
    pub replication: u32,
    pub outcome: OutcomeDoc,
    pub cells: Vec<SimCellDoc>,
    pub total_admitted: u64,
    pub admits_per_cohort: f64,
    pub all_within_tolerance: bool,
}

pub const SIMULATE_REPORT_KIND: &str = "simulate_report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRegionDoc {
    pub id: String,
    pub shape: f64,
    pub scale_param: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSolutionDoc {
    pub kind: String,
    pub scale: ScaleDoc,
    pub regions: Vec<FitRegionDoc>,
    pub counts: Vec<CountDoc>,
    pub loss: f64,
    pub residuals: BTreeMap<String, f64>,
    pub converged: bool,
    pub evals: u64,
    pub restarts: u64,
    pub rng_seed: u64,
}

pub const FIT_SOLUTION_KIND: &str = "fit_solution";

impl FitSolutionDoc {
    pub fn new(
        solution: &FitSolution,
        scale: ScoreScale<f64>,
        restarts: usize,
        rng_seed: u64,
    ) -> Self {
        FitSolutionDoc {
            kind: FIT_SOLUTION_KIND.into(),
            scale: ScaleDoc {
                s_min: scale.s_min(),
                s_max: scale.s_max(),
            },
            regions: solution
                .region_dists
                .iter()
                .map(|(id, d)| FitRegionDoc {
                    id: id.as_str().into(),
                    shape: d.shape(),
                    scale_param: d.scale(),
                    threshold: solution.thresholds[id].value(),
                })
                .collect(),
            counts: solution
                .counts
                .iter()
                .map(|((g, r), &n)| CountDoc {
                    group: g.as_str().into(),
                    region: r.as_str().into(),
                    n,
                })
                .collect(),
            loss: solution.loss,
            residuals: solution.residuals.clone(),
            converged: solution.converged,
            evals: solution.evals as u64,
            restarts: restarts as u64,
            rng_seed,
        }
    }

    /// Rebuilds the in-memory solution (and the scale it was fitted
    /// against), revalidating every numeric field.
    pub fn to_solution(&self) -> Result<(FitSolution, ScoreScale<f64>)> {
        let scale = ScoreScale::new(self.scale.s_min, self.scale.s_max)?;
        let mut region_dists = BTreeMap::new();
        let mut thresholds = BTreeMap::new();
        for (i, r) in self.regions.iter().enumerate() {
            let id = RegionId::new(r.id.clone());
            let dist = GammaParams::new(r.shape, r.scale_param)?;
            thresholds.insert(id.clone(), LogScore::new(r.threshold)?);
            if region_dists.insert(id, dist).is_some() {
                return Err(Error::Parse(format!(
                    "regions[{i}]: duplicate region id {:?}",
                    r.id
                )));
            }
        }
        let region_ids: BTreeSet<&String> = self.regions.iter().map(|r| &r.id).collect();
        let mut counts = BTreeMap::new();
        for (i, c) in self.counts.iter().enumerate() {
            if !region_ids.contains(&c.region) {
                return Err(Error::Parse(format!(
                    "counts[{i}]: unknown region {:?}",
                    c.region
                )));
            }
            if !c.n.is_finite() || c.n < 0.0 {
                return Err(Error::Validation(format!(
                    "counts[{i}]: count must be finite and nonnegative"
                )));
            }
            let cell = (GroupId::new(c.group.clone()), RegionId::new(c.region.clone()));
            if counts.insert(cell, c.n).is_some() {
                return Err(Error::Parse(format!(
                    "counts[{i}]: duplicate cell ({:?}, {:?})",
                    c.group, c.region
                )));
            }
        }
        Ok((
            FitSolution {
                region_dists,
                thresholds,
                counts,
                loss: self.loss,
                residuals: self.residuals.clone(),
                converged: self.converged,
                evals: self.evals as usize,
            },
            scale,
        ))
    }
}

pub const REPORT_BUNDLE_KIND: &str = "report_bundle";
pub const VALIDATION_REPORT_KIND: &str = "validation_report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionDoc {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationReportDoc {
    pub kind: String,
    pub assumptions: Vec<AssumptionDoc>,
    pub all_hold: bool,
}

// ---------------------------------------------------------------------
// Generic JSON plumbing

/// Serializes any document as pretty JSON with a trailing newline.
/// Identical values produce byte-identical files: maps are ordered,
/// floats print in shortest round-trip form.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut buf = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    buf.push(b'\n');
    std::fs::write(path, buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Peeks at a JSON document and names its kind: the `"kind"` tag when
/// present, `"population"` for versioned population files.
pub fn detect_kind(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let value: serde_json::Value = read_json(path)?;
    if let Some(kind) = value.get("kind").and_then(|k| k.as_str()) {
        return Ok(kind.to_string());
    }
    if value.get("version").is_some() && value.get("regions").is_some() {
        return Ok("population".to_string());
    }
    Err(Error::Parse(format!(
        "{}: no \"kind\" tag and not a population file",
        path.display()
    )))
}

/// Validates and writes a report bundle. The dual validation (here and in
/// [`parse_report_bundle`]) is deliberate: a bundle whose densities don't
/// integrate to ≈1 is malformed wherever it appears, emit or ingest.
pub fn emit_report(path: impl AsRef<Path>, bundle: &ReportBundle) -> Result<()> {
    bundle.validate()?;
    write_json(path, bundle)
}

pub fn parse_report_bundle(path: impl AsRef<Path>) -> Result<ReportBundle> {
    let bundle: ReportBundle = read_json(path)?;
    bundle.validate()?;
    Ok(bundle)
}

/// Dumps a cohort for external inspection: one row per sampled
/// individual, with both the log score and its raw back-conversion.
pub fn write_cohort_csv(
    path: impl AsRef<Path>,
    cohort: &Cohort,
    scale: &ScoreScale<f64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["group", "region", "q", "raw_score"])
        .map_err(csv_err(path))?;
    for cell in &cohort.cells {
        for &q in &cell.scores {
            let raw = scale
                .from_log_score(LogScore::new(q).expect("sampled scores are nonnegative"))
                .0;
            w.serialize((cell.group.as_str(), cell.region.as_str(), q, raw))
                .map_err(csv_err(path))?;
        }
    }
    w.flush()?;
    Ok(())
}
