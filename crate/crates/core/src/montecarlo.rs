//! Seeded Monte Carlo cross-check of the analytic machinery.
//!
//! [`sample_cohort`] draws synthetic applicants per (group, region) cell
//! from the population's region distributions and [`replay_procedure`]
//! pushes them through solved thresholds, giving empirical admit rates to
//! hold against the analytic `admit_prob` values. The sampler is
//! `rand_distr::Gamma` (Marsaglia–Tsang), which never touches this crate's
//! incomplete-gamma code — the two routes share nothing but the parameters.
//!
//! Determinism: every cell gets its own stream,
//! `ChaCha8Rng(splitmix64(seed ^ fnv1a(group) ^ rotl(fnv1a(region), 17)))`,
//! so sampling is reproducible cell-by-cell and safe to parallelize.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::population::{GroupId, Population, RegionId};
use crate::procedures::ProcedureOutcome;

/// Hard ceiling on drawn scores per cohort, to catch runaway
/// `replication` values before they allocate the machine away.
const MAX_TOTAL_SAMPLES: f64 = 2e8;

/// Synthetic applicant scores, grouped by cell in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub seed: u64,
    pub replication: u32,
    pub cells: Vec<CohortCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortCell {
    pub group: GroupId,
    pub region: RegionId,
    pub scores: Vec<f64>,
}

impl Cohort {
    pub fn total_samples(&self) -> u64 {
        self.cells.iter().map(|c| c.scores.len() as u64).sum()
    }
}

/// Per-cell tallies from replaying one procedure over a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub cells: BTreeMap<(GroupId, RegionId), CellReplay>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellReplay {
    pub samples: u64,
    pub admitted: u64,
}

impl CellReplay {
    /// Empirical admit share; 0 for an unsampled (zero-count) cell.
    pub fn empirical_rate(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.admitted as f64 / self.samples as f64
        }
    }
}

impl ReplaySummary {
    pub fn total_admitted(&self) -> u64 {
        self.cells.values().map(|c| c.admitted).sum()
    }

    /// Total admits rescaled back to one cohort's worth.
    pub fn admits_per_cohort(&self, replication: u32) -> f64 {
        self.total_admitted() as f64 / replication as f64
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_seed(seed: u64, group: &GroupId, region: &RegionId) -> u64 {
    splitmix64(
        seed ^ fnv1a(group.as_str().as_bytes())
            ^ fnv1a(region.as_str().as_bytes()).rotate_left(17),
    )
}

/// Draws `round(n_cell) · replication` log scores for every cell of the
/// population, in parallel, reproducibly for a given `seed`. Fractional
/// cell counts are rounded to the nearest integer before replication:
/// sampling needs whole individuals even where the analytic side does not.
pub fn sample_cohort(pop: &Population<f64>, seed: u64, replication: u32) -> Result<Cohort> {
    if replication == 0 {
        return Err(Error::InvalidParameter {
            name: "replication",
            reason: "need at least one cohort replication".into(),
        });
    }
    let total = pop.total_applicants() * replication as f64;
    if total > MAX_TOTAL_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "replication",
            reason: format!(
                "{total:.0} samples requested; the cohort cap is {MAX_TOTAL_SAMPLES:.0}"
            ),
        });
    }

    let plan: Vec<(GroupId, RegionId, u64)> = pop
        .table()
        .cells()
        .map(|((g, r), n)| (g.clone(), r.clone(), n.round() as u64 * replication as u64))
        .collect();

    let cells = plan
        .into_par_iter()
        .map(|(group, region, count)| {
            let dist = pop.region_dist(&region).expect("population invariant");
            let sampler = rand_distr::Gamma::new(dist.shape(), dist.scale())
                .expect("params validated at construction");
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, &group, &region));
            let scores = (0..count).map(|_| sampler.sample(&mut rng)).collect();
            CohortCell {
                group,
                region,
                scores,
            }
        })
        .collect();

    Ok(Cohort {
        seed,
        replication,
        cells,
    })
}

/// Counts, per cell, how many sampled scores clear the outcome's threshold
/// (`q <= q_cut`). Every cohort cell must have a threshold in the outcome.
pub fn replay_procedure(
    cohort: &Cohort,
    outcome: &ProcedureOutcome<f64>,
) -> Result<ReplaySummary> {
    let mut cells = BTreeMap::new();
    for cell in &cohort.cells {
        let key = (cell.group.clone(), cell.region.clone());
        let threshold = outcome
            .thresholds
            .get(&key)
            .ok_or_else(|| Error::MissingCell {
                group: cell.group.as_str().into(),
                region: cell.region.as_str().into(),
            })?
            .value();
        let admitted = cell.scores.iter().filter(|&&q| q <= threshold).count() as u64;
        cells.insert(
            key,
            CellReplay {
                samples: cell.scores.len() as u64,
                admitted,
            },
        );
    }
    Ok(ReplaySummary { cells })
}
