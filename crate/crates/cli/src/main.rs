//! `admit` — the command-line front end.
//!
//! Exit codes: 0 success (and, for `validate`/`check`/`simulate`, the
//! thing being checked actually holds), 1 domain failure with a one-line
//! JSON diagnostic on stderr, 2 usage error (clap's default).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use admit_core::error::Error;
use admit_core::fit::{fit, FitProblem};
use admit_core::io::{
    self, AssumptionDoc, CheckReportDoc, FitSolutionDoc, SimCellDoc, SimulateReportDoc,
    SolveReportDoc, ValidationReportDoc, SIMULATE_REPORT_KIND, VALIDATION_REPORT_KIND,
};
use admit_core::montecarlo::{replay_procedure, sample_cohort};
use admit_core::population::{validate_theorem_setting, AssumptionViolation};
use admit_core::procedures::{solve, ProcedureSpec};
use admit_core::report::{bundle_from_fit, bundle_from_outcome};
use admit_core::score::ScoreScale;
use admit_core::theorems::{check_theorem1, check_theorem2, check_theorem3};

#[derive(Parser)]
#[command(name = "admit", version, about = "Threshold admissions over Gamma score models")]
struct Cli {
    /// Worker-thread cap for parallel work (fit restarts, sampling);
    /// defaults to all logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProcArg {
    Default,
    Quota,
    PlusFactor,
    TopPercentage,
}

#[derive(Subcommand)]
enum Command {
    /// Report which structural assumptions a population satisfies;
    /// exit 0 iff all hold.
    Validate {
        #[arg(long)]
        population: PathBuf,
    },
    /// Solve a procedure's thresholds and write a solve report.
    Solve {
        #[arg(long)]
        population: PathBuf,
        #[arg(long, value_enum)]
        procedure: ProcArg,
        /// Group multiplier: required for quota (≥ 1) and plus-factor
        /// (in (0, 1]), rejected for the other procedures.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check one numbered result against a population;
    /// exit 0 iff its preconditions are met and the conclusion holds.
    Check {
        #[arg(long)]
        population: PathBuf,
        #[arg(long)]
        theorem: u8,
        /// Quota multiplier for theorem 1, plus-factor multiplier for
        /// theorem 2; rejected for theorem 3.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a cohort, replay a solved procedure on it, and compare
    /// empirical admit rates against the analytic probabilities;
    /// exit 0 iff every cell stays within its binomial 4σ band.
    Simulate {
        #[arg(long)]
        population: PathBuf,
        #[arg(long, value_enum)]
        procedure: ProcArg,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        replication: u32,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every sampled individual to this CSV.
        #[arg(long)]
        dump_cohort: Option<PathBuf>,
    },
    /// Fit region mixtures to summary statistics.
    Fit {
        #[arg(long)]
        stats_groups: PathBuf,
        #[arg(long)]
        stats_quantiles: PathBuf,
        #[arg(long, default_value_t = 3)]
        regions: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Raw-score scale the GPA cuts live on.
        #[arg(long, default_value_t = 0.0)]
        s_min: f64,
        #[arg(long, default_value_t = 4.0)]
        s_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a solve report, simulate report, or fit solution into a
    /// plot-ready density bundle.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { .. } => "invalid-parameter",
        Error::Domain(_) => "domain",
        Error::EmptyGrid => "empty-grid",
        Error::Structure(_) => "structure",
        Error::MissingCell { .. } => "missing-cell",
        Error::Capacity(_) => "capacity",
        Error::InfeasibleQuota(_) => "infeasible-quota",
        Error::UnsupportedSetting(_) => "unsupported-setting",
        Error::Convergence(_) => "convergence",
        Error::Validation(_) => "validation",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    }
}

fn diagnostic(kind: &str, message: &str) {
    let doc = serde_json::json!({ "kind": kind, "error": message });
    eprintln!("{doc}");
}

fn procedure_spec(procedure: ProcArg, eta: Option<f64>) -> Result<ProcedureSpec<f64>, Error> {
    let needs = |name: &'static str| {
        eta.ok_or(Error::InvalidParameter {
            name: "eta",
            reason: format!("--eta is required for the {name} procedure"),
        })
    };
    let rejects = |name: &'static str, spec: ProcedureSpec<f64>| {
        if eta.is_some() {
            Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("--eta is not a parameter of the {name} procedure"),
            })
        } else {
            Ok(spec)
        }
    };
    match procedure {
        ProcArg::Default => rejects("default", ProcedureSpec::Default),
        ProcArg::TopPercentage => rejects("top-percentage", ProcedureSpec::TopPercentage),
        ProcArg::Quota => Ok(ProcedureSpec::Quota { eta: needs("quota")? }),
        ProcArg::PlusFactor => Ok(ProcedureSpec::PlusFactor {
            eta_dagger: needs("plus-factor")?,
        }),
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Validate { population } => {
            let (pop, cap) = io::parse_population(&population)?;
            let violations = validate_theorem_setting(&pop, &cap)?;
            let assumptions: Vec<AssumptionDoc> = AssumptionViolation::ALL
                .iter()
                .map(|v| AssumptionDoc {
                    name: v.code().to_string(),
                    holds: !violations.contains(v),
                })
                .collect();
            let all_hold = assumptions.iter().all(|a| a.holds);
            let doc = ValidationReportDoc {
                kind: VALIDATION_REPORT_KIND.into(),
                assumptions,
                all_hold,
            };
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            if all_hold {
                Ok(ExitCode::SUCCESS)
            } else {
                diagnostic("assumptions-violated", "population violates listed assumptions");
                Ok(ExitCode::from(1))
            }
        }

        Command::Solve {
            population,
            procedure,
            eta,
            out,
        } => {
            let (pop, cap) = io::parse_population(&population)?;
            let spec = procedure_spec(procedure, eta)?;
            let outcome = solve(&pop, &cap, &spec)?;
            io::write_json(&out, &SolveReportDoc::new(&pop, &cap, &outcome))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Check {
            population,
            theorem,
            eta,
            out,
        } => {
            let (pop, cap) = io::parse_population(&population)?;
            let report = match theorem {
                1 => check_theorem1(
                    &pop,
                    &cap,
                    eta.ok_or(Error::InvalidParameter {
                        name: "eta",
                        reason: "--eta (quota multiplier) is required for theorem 1".into(),
                    })?,
                )?,
                2 => check_theorem2(
                    &pop,
                    &cap,
                    eta.ok_or(Error::InvalidParameter {
                        name: "eta",
                        reason: "--eta (plus-factor multiplier) is required for theorem 2".into(),
                    })?,
                )?,
                3 => {
                    if eta.is_some() {
                        return Err(Error::InvalidParameter {
                            name: "eta",
                            reason: "theorem 3 takes no --eta".into(),
                        });
                    }
                    check_theorem3(&pop, &cap)?
                }
                other => {
                    return Err(Error::InvalidParameter {
                        name: "theorem",
                        reason: format!("no theorem {other}; pick 1, 2, or 3"),
                    });
                }
            };
            io::write_json(&out, &CheckReportDoc::new(&report))?;
            let verdict = match (report.covered, report.conclusion_holds) {
                (true, true) => "covered, conclusion holds",
                (true, false) => "covered, conclusion FAILS",
                (false, _) => "not covered",
            };
            println!("theorem {theorem}: {verdict}");
            if report.covered && report.conclusion_holds {
                Ok(ExitCode::SUCCESS)
            } else {
                diagnostic(
                    "check-failed",
                    &format!("theorem {theorem}: {verdict}"),
                );
                Ok(ExitCode::from(1))
            }
        }

        Command::Simulate {
            population,
            procedure,
            eta,
            seed,
            replication,
            out,
            dump_cohort,
        } => {
            let (pop, cap) = io::parse_population(&population)?;
            let spec = procedure_spec(procedure, eta)?;
            let outcome = solve(&pop, &cap, &spec)?;
            let cohort = sample_cohort(&pop, seed, replication)?;
            if let Some(path) = &dump_cohort {
                io::write_cohort_csv(path, &cohort, pop.scale())?;
            }
            let replay = replay_procedure(&cohort, &outcome)?;

            let mut cells = Vec::new();
            let mut all_within = true;
            for (key, cell) in &replay.cells {
                let p = outcome.admit_prob[key];
                let within = if cell.samples == 0 {
                    true // no evidence either way
                } else {
                    let sigma = (p * (1.0 - p) / cell.samples as f64).sqrt();
                    (cell.empirical_rate() - p).abs() <= 4.0 * sigma
                };
                all_within &= within;
                cells.push(SimCellDoc {
                    group: key.0.as_str().into(),
                    region: key.1.as_str().into(),
                    samples: cell.samples,
                    admitted: cell.admitted,
                    empirical_rate: cell.empirical_rate(),
                    analytic_prob: p,
                    tolerance: if cell.samples == 0 {
                        0.0
                    } else {
                        4.0 * (p * (1.0 - p) / cell.samples as f64).sqrt()
                    },
                    within_tolerance: within,
                });
            }
            let doc = SimulateReportDoc {
                kind: SIMULATE_REPORT_KIND.into(),
                population: io::PopulationDoc::from_parts(&pop, &cap),
                seed,
                replication,
                outcome: io::OutcomeDoc::from_outcome(&outcome),
                cells,
                total_admitted: replay.total_admitted(),
                admits_per_cohort: replay.admits_per_cohort(replication),
                all_within_tolerance: all_within,
            };
            io::write_json(&out, &doc)?;
            if all_within {
                Ok(ExitCode::SUCCESS)
            } else {
                diagnostic(
                    "tolerance-exceeded",
                    "empirical admit rates left the binomial 4-sigma band; see the report cells",
                );
                Ok(ExitCode::from(1))
            }
        }

        Command::Fit {
            stats_groups,
            stats_quantiles,
            regions,
            restarts,
            seed,
            s_min,
            s_max,
            out,
        } => {
            let scale = ScoreScale::new(s_min, s_max)?;
            let stats = io::parse_summary_stats(&stats_groups, &stats_quantiles, scale)?;
            let mut problem = FitProblem::new(stats, regions);
            problem.restarts = restarts;
            problem.rng_seed = seed;
            let solution = fit(&problem)?;
            io::write_json(&out, &FitSolutionDoc::new(&solution, scale, restarts, seed))?;
            println!(
                "fit loss {:e} ({})",
                solution.loss,
                if solution.converged {
                    "converged"
                } else {
                    "evaluation budget exhausted"
                }
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Report { input, out } => {
            let bundle = match io::detect_kind(&input)?.as_str() {
                io::SOLVE_REPORT_KIND => {
                    let doc: SolveReportDoc = io::read_json(&input)?;
                    let (pop, cap) = doc.population.into_parts()?;
                    bundle_from_outcome(&pop, &cap, &doc.outcome.to_outcome()?, "solve")?
                }
                io::SIMULATE_REPORT_KIND => {
                    let doc: SimulateReportDoc = io::read_json(&input)?;
                    let (pop, cap) = doc.population.into_parts()?;
                    bundle_from_outcome(&pop, &cap, &doc.outcome.to_outcome()?, "simulate")?
                }
                io::FIT_SOLUTION_KIND => {
                    let doc: FitSolutionDoc = io::read_json(&input)?;
                    let (solution, scale) = doc.to_solution()?;
                    bundle_from_fit(&solution, scale)?
                }
                other => {
                    return Err(Error::Parse(format!(
                        "report reads a solve report, simulate report, or fit solution; \
                         {} is a {other:?} document",
                        input.display()
                    )));
                }
            };
            io::emit_report(&out, &bundle)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            diagnostic("invalid-parameter", "--threads must be at least 1");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once, before any parallel work");
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            diagnostic(error_kind(&e), &e.to_string());
            ExitCode::from(1)
        }
    }
}
