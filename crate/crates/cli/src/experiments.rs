//! Seeded batch experiments. Trial `i` draws from stream `i` of one ChaCha8 generator seeded by
//! the experiment seed, so results do not depend on the thread count.

use std::collections::BTreeMap;

use kwidth::algebra::{determined_by_projections, Algebra};
use kwidth::consistency::{enforce_kl, Status};
use kwidth::constructions::seeded_subpower;
use kwidth::instance::{random_instance, Instance, RandomConfig};
use kwidth::patterns::least_sufficient_quality;
use kwidth::solver::{has_extension_property_with, is_sensitive_with, SolverLimits};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::io::{relation_file, RelationFile};
use crate::CliError;

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Property checked on enforced instances over the square of an algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SquareProperty {
    /// Every constraint tuple extends to a solution.
    Sensitivity,
    /// Every partial solution extends to a solution.
    Extension,
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareConfig {
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_generators: usize,
    /// Plant a solution in every random instance.
    pub plant: bool,
    pub solver: SolverLimits,
}

impl SquareConfig {
    pub fn new(k: usize, trials: usize, seed: u64, max_vars: usize) -> Self {
        SquareConfig {
            k,
            trials,
            seed,
            min_vars: k + 1,
            max_vars,
            max_generators: 4,
            plant: true,
            solver: SolverLimits::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub instance_seed: u64,
    pub instance: Instance,
    pub witness: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareReport {
    pub property: SquareProperty,
    pub config: SquareConfig,
    pub enforced: usize,
    pub rejected: usize,
    pub holds: usize,
    pub counterexamples: Vec<Counterexample>,
}

enum Outcome {
    Rejected,
    Holds,
    Fails(Counterexample),
}

/// Random `k`-uniform instances over `alg²`, enforced to `(k, k+1)` and checked for `property`.
pub fn square_experiment(alg: &Algebra, property: SquareProperty, cfg: &SquareConfig) -> Result<SquareReport, CliError> {
    if cfg.min_vars > cfg.max_vars || cfg.min_vars < cfg.k {
        return Err(CliError::usage("need k <= min_vars <= max_vars"));
    }
    let square = alg.square()?;
    let rcfg = RandomConfig { max_generators: cfg.max_generators, allowed: None, plant_solution: cfg.plant };
    let outcomes: Vec<Result<Outcome, CliError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial);
            let instance_seed = rng.next_u64();
            let n = rng.gen_range(cfg.min_vars..=cfg.max_vars);
            let inst = random_instance(&square, &rcfg, n, cfg.k, instance_seed)?;
            let res = enforce_kl(&inst, cfg.k, cfg.k + 1)?;
            let Some(enforced) = res.instance else { return Ok(Outcome::Rejected) };
            let witness = match property {
                SquareProperty::Sensitivity => {
                    let r = is_sensitive_with(&enforced, cfg.solver)?;
                    (!r.holds).then(|| serde_json::to_value(&r.witness).expect("serializable"))
                }
                SquareProperty::Extension => {
                    // partial solutions must respect the projections below arity k
                    let r = has_extension_property_with(&enforced.small_arity_closure(cfg.k)?, cfg.solver)?;
                    (!r.holds).then(|| serde_json::to_value(&r.witness).expect("serializable"))
                }
            };
            Ok(match witness {
                None => Outcome::Holds,
                Some(witness) => Outcome::Fails(Counterexample { trial, instance_seed, instance: enforced, witness }),
            })
        })
        .collect();
    let mut report =
        SquareReport { property, config: cfg.clone(), enforced: 0, rejected: 0, holds: 0, counterexamples: Vec::new() };
    for o in outcomes {
        match o? {
            Outcome::Rejected => report.rejected += 1,
            Outcome::Holds => {
                report.enforced += 1;
                report.holds += 1;
            }
            Outcome::Fails(c) => {
                report.enforced += 1;
                report.counterexamples.push(c);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminationConfig {
    pub arity: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_generators: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Undetermined {
    pub trial: usize,
    pub relation_seed: u64,
    pub relation: RelationFile,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterminationReport {
    pub config: DeterminationConfig,
    pub determined: usize,
    pub undetermined: usize,
    /// The first undetermined relation by trial index.
    pub example: Option<Undetermined>,
}

/// Whether randomly generated subpowers of `alg^arity` are determined by their `k`-ary
/// projections.
pub fn determination_experiment(alg: &Algebra, cfg: &DeterminationConfig) -> Result<DeterminationReport, CliError> {
    if cfg.arity == 0 {
        return Err(CliError::usage("arity must be positive"));
    }
    let results: Vec<Result<Option<Undetermined>, CliError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let relation_seed = trial_rng(cfg.seed, trial).next_u64();
            let r = seeded_subpower(alg, cfg.arity, cfg.max_generators, relation_seed)?;
            Ok((!determined_by_projections(&r, cfg.k))
                .then(|| Undetermined { trial, relation_seed, relation: relation_file(&r) }))
        })
        .collect();
    let mut report = DeterminationReport { config: cfg.clone(), determined: 0, undetermined: 0, example: None };
    for r in results {
        match r? {
            None => report.determined += 1,
            Some(u) => {
                report.undetermined += 1;
                report.example.get_or_insert(u);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct QualityConfig {
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_d: usize,
    pub plant: bool,
    /// Enforce `(k, k+1)` first and add projections below arity `k`; otherwise pad with full
    /// relations.
    pub enforce: bool,
    pub solver: SolverLimits,
}

#[derive(Clone, Debug, Serialize)]
pub struct QualityReport {
    pub config: QualityConfig,
    /// Least sufficient quality (`"none"` past `max_d`) → number of instances.
    pub least_d: BTreeMap<String, usize>,
    pub rejected: usize,
    pub worst: Option<usize>,
}

/// The least quality that guarantees extension to a solution, over random instances.
pub fn quality_experiment(alg: &Algebra, cfg: &QualityConfig) -> Result<QualityReport, CliError> {
    if cfg.min_vars > cfg.max_vars || cfg.min_vars < cfg.k {
        return Err(CliError::usage("need k <= min_vars <= max_vars"));
    }
    let rcfg = RandomConfig { plant_solution: cfg.plant, ..RandomConfig::default() };
    let results: Vec<Result<Option<Option<usize>>, CliError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(cfg.seed, trial);
            let instance_seed = rng.next_u64();
            let n = rng.gen_range(cfg.min_vars..=cfg.max_vars);
            let inst = random_instance(alg, &rcfg, n, cfg.k, instance_seed)?;
            let weak = if cfg.enforce {
                match enforce_kl(&inst, cfg.k, cfg.k + 1)? {
                    r if r.status == Status::Enforced => r.instance.expect("enforced").small_arity_closure(cfg.k)?,
                    _ => return Ok(None),
                }
            } else {
                inst.with_full_small_constraints(cfg.k)?
            };
            Ok(Some(least_sufficient_quality(&weak, cfg.k, cfg.max_d, cfg.solver)?.least_d))
        })
        .collect();
    let mut report = QualityReport { config: cfg.clone(), least_d: BTreeMap::new(), rejected: 0, worst: None };
    for r in results {
        match r? {
            None => report.rejected += 1,
            Some(d) => {
                let key = d.map_or_else(|| "none".to_string(), |d| d.to_string());
                *report.least_d.entry(key).or_default() += 1;
                if let Some(d) = d {
                    report.worst = Some(report.worst.map_or(d, |w| w.max(d)));
                }
            }
        }
    }
    Ok(report)
}
