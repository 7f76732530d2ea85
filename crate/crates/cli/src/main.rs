use std::io::IsTerminal;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kwidth::absorption::{verify_loop_theorems, RelationFamily};
use kwidth::algebra::{find_nu_term_bounded, is_nu, ClosureLimits, NuSearch};
use kwidth::consistency::{enforce_kl_with, is_kl_instance, KlCheck, Schedule, Status};
use kwidth::constructions::{build_prop_sens, build_prop_sw};
use kwidth::corpus;
use kwidth::instance::{Instance, PartialAssignment};
use kwidth::patterns::{quality, quality_by_tree};
use kwidth::solver::{has_extension_property_with, is_sensitive_with, Solver, SolverLimits};
use kwidth_cli::experiments::{
    determination_experiment, quality_experiment, square_experiment, DeterminationConfig, QualityConfig, SquareConfig,
    SquareProperty,
};
use kwidth_cli::io::{load_algebra, load_instance, load_relation, write_json};
use kwidth_cli::{CliError, BUILD_TAG};
use serde_json::{json, Value};

/// Workbench for finite-domain CSP consistency, near-unanimity terms and absorption.
///
/// Exit status: 0 the property holds or the task succeeded, 1 the property fails (a witness is
/// reported), 2 usage or input error, 3 a resource guard stopped the run.
#[derive(Parser)]
#[command(name = "kwidth", version, about, long_about)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    report: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (k,l)-consistency; exit 1 on REJECT.
    Enforce(EnforceArgs),
    /// Decide a property of an instance.
    Check(CheckArgs),
    /// Search the clone for an m-ary near-unanimity term.
    FindNu(FindNuArgs),
    /// Build a gadget instance from a relation.
    Gadget(GadgetArgs),
    /// Loop lemma verification.
    #[command(subcommand)]
    Loop(LoopCommand),
    /// Decide whether a partial evaluation has quality d.
    Quality(QualityArgs),
    /// Seeded batch experiments.
    Experiment(ExperimentArgs),
    /// Bundled algebras and instances.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Args)]
struct SolverGuards {
    /// Search-node guard for the exhaustive solver.
    #[arg(long, default_value_t = SolverLimits::default().max_nodes)]
    max_nodes: u64,
    /// Guard on partial solutions enumerated by the extension check.
    #[arg(long, default_value_t = SolverLimits::default().max_partials)]
    max_partials: u64,
}

impl SolverGuards {
    fn limits(&self) -> SolverLimits {
        SolverLimits { max_nodes: self.max_nodes, max_partials: self.max_partials }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Jacobi,
    GaussSeidel,
}

#[derive(Args)]
struct EnforceArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
    /// Instance file or bundled instance name.
    #[arg(long = "in")]
    input: String,
    /// Where to write the enforced instance.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum, default_value = "jacobi")]
    schedule: ScheduleArg,
    /// Include tuple counts before and after.
    #[arg(long)]
    stats: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    /// Every constraint tuple extends to a solution.
    Sensitive,
    /// Every partial solution extends to a solution.
    Extension,
    /// The instance has a solution; lists up to --limit of them.
    Solve,
    /// The instance is a (k,l)-instance.
    Kl,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(value_enum)]
    property: Property,
    #[arg(long = "in")]
    input: String,
    /// Solutions to list for `solve`.
    #[arg(long, default_value_t = 10)]
    limit: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    l: usize,
    /// For `extension` on a k-uniform instance: add the projections onto fewer than k variables
    /// first, so partial solutions must respect them.
    #[arg(long)]
    project: bool,
    #[command(flatten)]
    guards: SolverGuards,
}

#[derive(Args)]
struct FindNuArgs {
    /// Algebra file or bundled algebra name.
    #[arg(long)]
    alg: String,
    #[arg(long)]
    arity: usize,
    /// Closure guard: maximum subpower size.
    #[arg(long, default_value_t = ClosureLimits::default().max_tuples)]
    max_tuples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetKind {
    /// Strict-width gadget from a (k+1)-ary relation.
    Sw,
    /// Sensitivity gadget from a (k+2)-ary relation.
    Sens,
}

#[derive(Args)]
struct GadgetArgs {
    #[arg(value_enum)]
    kind: GadgetKind,
    #[arg(long)]
    k: usize,
    /// Relation file `{"domains": [...], "tuples": [[...], ...]}`.
    #[arg(long)]
    relation: String,
    #[arg(long)]
    out: String,
}

#[derive(Subcommand)]
enum LoopCommand {
    /// Check the loop theorems over a family of invariant binary relations.
    Verify(LoopArgs),
}

#[derive(Args)]
struct LoopArgs {
    #[arg(long)]
    alg: String,
    /// Absorption arity.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Enumerate every binary relation when the carrier is at most this large; sample otherwise.
    #[arg(long, default_value_t = 3)]
    max_domain: usize,
    /// Sample even on small carriers.
    #[arg(long)]
    sample: bool,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 4)]
    max_generators: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ClosureLimits::default().max_tuples)]
    max_tuples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expand {
    /// Input must already be a weak k-instance.
    None,
    /// Add projections of the k-ary constraints (for (k,k+1)-instances).
    Projections,
    /// Add full relations on unconstrained small scopes.
    Full,
}

#[derive(Args)]
struct QualityArgs {
    #[arg(long = "in")]
    input: String,
    /// Comma-separated variable names.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    /// Comma-separated values, one per variable.
    #[arg(long, value_delimiter = ',')]
    values: Vec<u16>,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value = "none")]
    expand: Expand,
    /// Also decide through the explicit complete tree and compare.
    #[arg(long)]
    tree: bool,
    /// Vertex guard for --tree.
    #[arg(long, default_value_t = 1 << 22)]
    max_vertices: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    /// Enforced random instances over alg² are sensitive.
    Sensitivity,
    /// Enforced random instances over alg² have the extension property.
    Extension,
    /// Random subpowers are determined by their k-ary projections.
    Determination,
    /// Least quality that guarantees extension, over random instances.
    Quality,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long)]
    alg: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest instance size (default k+1).
    #[arg(long)]
    min_vars: Option<usize>,
    #[arg(long, default_value_t = 6)]
    max_vars: usize,
    /// Do not plant a solution in random instances.
    #[arg(long)]
    no_plant: bool,
    #[arg(long, default_value_t = 4)]
    max_generators: usize,
    /// Relation arity for `determination` (default k+1).
    #[arg(long)]
    arity: Option<usize>,
    /// Largest quality tried by `quality`.
    #[arg(long, default_value_t = 4)]
    max_d: usize,
    /// `quality`: enforce (k,k+1) before measuring.
    #[arg(long)]
    enforce: bool,
    #[command(flatten)]
    guards: SolverGuards,
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// List bundled entries.
    List,
    /// Print one entry.
    Show { name: String },
    /// Write every entry as `<dir>/<name>.json`.
    Export { dir: String },
}

/// A finished command: its report and whether the checked property held.
struct Outcome {
    report: Value,
    holds: bool,
}

fn done(report: Value, holds: bool) -> Result<Outcome, CliError> {
    Ok(Outcome { report, holds })
}

fn enforce(a: &EnforceArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(&a.input)?;
    let schedule = match a.schedule {
        ScheduleArg::Jacobi => Schedule::Jacobi,
        ScheduleArg::GaussSeidel => Schedule::GaussSeidel,
    };
    let res = enforce_kl_with(&inst, a.k, a.l, schedule)?;
    let mut report = json!({
        "status": res.status,
        "k": a.k,
        "l": a.l,
        "rounds": res.rounds,
        "removed": res.removed,
    });
    if a.stats {
        let tuples = |i: &Instance| i.constraints().map(|(_, r)| r.len()).sum::<usize>();
        report["stats"] = json!({
            "variables": inst.num_vars(),
            "constraints_before": inst.num_constraints(),
            "tuples_before": tuples(&inst),
            "constraints_after": res.instance.as_ref().map(Instance::num_constraints),
            "tuples_after": res.instance.as_ref().map(tuples),
        });
    }
    if let (Some(out), Some(e)) = (&a.out, &res.instance) {
        write_json(out, e)?;
        report["out"] = json!(out);
    }
    done(report, res.status == Status::Enforced)
}

fn check(a: &CheckArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(&a.input)?;
    let limits = a.guards.limits();
    let guards = json!({ "max_nodes": limits.max_nodes, "max_partials": limits.max_partials });
    match a.property {
        Property::Sensitive => {
            let r = is_sensitive_with(&inst, limits)?;
            let witness = r.witness.as_ref().map(|w| {
                json!({
                    "scope": w.scope.iter().map(|&v| inst.name(v)).collect::<Vec<_>>(),
                    "tuple": w.tuple,
                })
            });
            let report = json!({
                "property": "sensitive", "holds": r.holds, "witness": witness,
                "nodes_explored": r.nodes_explored, "guards": guards,
            });
            done(report, r.holds)
        }
        Property::Extension => {
            let inst = if a.project { inst.small_arity_closure(a.k)? } else { inst };
            let r = has_extension_property_with(&inst, limits)?;
            let witness = r
                .witness
                .as_ref()
                .map(|w| w.iter().map(|&(v, x)| (inst.name(v).to_string(), json!(x))).collect::<serde_json::Map<_, _>>());
            let report = json!({
                "property": "extension", "holds": r.holds, "witness": witness,
                "partials_checked": r.partials_checked, "nodes_explored": r.nodes_explored, "guards": guards,
            });
            done(report, r.holds)
        }
        Property::Solve => {
            let solver = Solver::new(&inst, limits);
            let sols = solver.solutions(Some(a.limit.max(1)))?;
            let names: Vec<&str> = (0..inst.num_vars()).map(|v| inst.name(v)).collect();
            let shown: Vec<_> = sols.iter().take(a.limit).collect();
            let report = json!({
                "property": "solvable", "holds": !sols.is_empty(), "variables": names,
                "solutions": shown, "nodes_explored": solver.nodes_explored(), "guards": guards,
            });
            done(report, !sols.is_empty())
        }
        Property::Kl => {
            let r = is_kl_instance(&inst, a.k, a.l)?;
            let witness = match &r {
                KlCheck::Holds => Value::Null,
                KlCheck::Violated { window, scope, tuple } => json!({
                    "window": window.iter().map(|&v| inst.name(v)).collect::<Vec<_>>(),
                    "scope": scope.iter().map(|&v| inst.name(v)).collect::<Vec<_>>(),
                    "tuple": tuple,
                }),
            };
            let report = json!({ "property": "kl", "k": a.k, "l": a.l, "holds": r.holds(), "witness": witness });
            done(report, r.holds())
        }
    }
}

fn find_nu(a: &FindNuArgs) -> Result<Outcome, CliError> {
    let alg = load_algebra(&a.alg)?;
    if a.arity < 3 {
        return Err(CliError::usage("near-unanimity arity must be at least 3"));
    }
    let guards = json!({ "max_tuples": a.max_tuples });
    match find_nu_term_bounded(&alg, a.arity, ClosureLimits { max_tuples: a.max_tuples })? {
        NuSearch::Found(t) => {
            let verified = is_nu(&alg, &t, a.arity);
            let report = json!({
                "arity": a.arity, "result": "FOUND", "term": t, "pretty": t.to_string(),
                "verified": verified, "guards": guards,
            });
            done(report, verified)
        }
        NuSearch::Absent => done(json!({ "arity": a.arity, "result": "NONE", "guards": guards }), false),
        NuSearch::Unknown => Err(CliError::Guard(format!("closure stopped at {} tuples", a.max_tuples))),
    }
}

fn gadget(a: &GadgetArgs) -> Result<Outcome, CliError> {
    let r = load_relation(&a.relation)?;
    let inst = match a.kind {
        GadgetKind::Sw => build_prop_sw(&r, a.k)?,
        GadgetKind::Sens => build_prop_sens(&r, a.k)?,
    };
    write_json(&a.out, &inst)?;
    let kind = match a.kind {
        GadgetKind::Sw => "sw",
        GadgetKind::Sens => "sens",
    };
    let report = json!({
        "gadget": kind, "k": a.k, "variables": inst.num_vars(),
        "constraints": inst.num_constraints(), "out": a.out,
    });
    done(report, true)
}

fn loop_verify(a: &LoopArgs) -> Result<Outcome, CliError> {
    let alg = load_algebra(&a.alg)?;
    let sampled = a.sample || alg.domain() > a.max_domain;
    let family = if sampled {
        RelationFamily::Sampled { draws: a.draws, max_generators: a.max_generators, seed: a.seed }
    } else {
        RelationFamily::Exhaustive
    };
    let r = verify_loop_theorems(&alg, &family, a.n, ClosureLimits { max_tuples: a.max_tuples })?;
    let unknown = r.symmetric.unknown + r.closed_walk.unknown + r.inverse_walk.unknown;
    let holds = r.total_violations() == 0;
    let mut report = serde_json::to_value(&r).expect("serializable");
    report["family"] = json!(if sampled { "sampled" } else { "exhaustive" });
    report["seed"] = json!(a.seed);
    report["guards"] = json!({ "max_tuples": a.max_tuples });
    if holds && unknown > 0 {
        return Err(CliError::Guard(format!("{unknown} absorption queries were undecided")));
    }
    done(report, holds)
}

fn quality_cmd(a: &QualityArgs) -> Result<Outcome, CliError> {
    let raw = load_instance(&a.input)?;
    let inst = match a.expand {
        Expand::None => raw,
        Expand::Projections => raw.small_arity_closure(a.k)?,
        Expand::Full => raw.with_full_small_constraints(a.k)?,
    };
    if a.vars.len() != a.values.len() {
        return Err(CliError::usage("--vars and --values must have the same length"));
    }
    let names: Vec<&str> = a.vars.iter().map(String::as_str).collect();
    let phi = PartialAssignment::from_names(&inst, &names, &a.values)?;
    let holds = quality(&inst, a.k, &phi, a.d)?;
    let mut report = json!({ "k": a.k, "d": a.d, "vars": a.vars, "values": a.values, "holds": holds });
    if a.tree {
        let by_tree = quality_by_tree(&inst, a.k, &phi, a.d, a.max_vertices)?;
        report["tree"] = json!(by_tree);
        report["guards"] = json!({ "max_vertices": a.max_vertices });
        if by_tree != holds {
            return Err(CliError::usage(format!("internal disagreement: propagation {holds}, tree {by_tree}")));
        }
    }
    done(report, holds)
}

fn experiment(a: &ExperimentArgs) -> Result<Outcome, CliError> {
    let alg = load_algebra(&a.alg)?;
    let min_vars = a.min_vars.unwrap_or(a.k + 1);
    match a.kind {
        ExperimentKind::Sensitivity | ExperimentKind::Extension => {
            let property = match a.kind {
                ExperimentKind::Sensitivity => SquareProperty::Sensitivity,
                _ => SquareProperty::Extension,
            };
            let cfg = SquareConfig {
                min_vars,
                max_generators: a.max_generators,
                plant: !a.no_plant,
                solver: a.guards.limits(),
                ..SquareConfig::new(a.k, a.trials, a.seed, a.max_vars)
            };
            let r = square_experiment(&alg, property, &cfg)?;
            let holds = r.counterexamples.is_empty();
            done(serde_json::to_value(&r).expect("serializable"), holds)
        }
        ExperimentKind::Determination => {
            let cfg = DeterminationConfig {
                arity: a.arity.unwrap_or(a.k + 1),
                k: a.k,
                trials: a.trials,
                seed: a.seed,
                max_generators: a.max_generators,
            };
            let r = determination_experiment(&alg, &cfg)?;
            let holds = r.undetermined == 0;
            done(serde_json::to_value(&r).expect("serializable"), holds)
        }
        ExperimentKind::Quality => {
            let cfg = QualityConfig {
                k: a.k,
                trials: a.trials,
                seed: a.seed,
                min_vars,
                max_vars: a.max_vars,
                max_d: a.max_d,
                plant: !a.no_plant,
                enforce: a.enforce,
                solver: a.guards.limits(),
            };
            let r = quality_experiment(&alg, &cfg)?;
            let holds = !r.least_d.contains_key("none");
            done(serde_json::to_value(&r).expect("serializable"), holds)
        }
    }
}

fn corpus_cmd(c: &CorpusCommand) -> Result<Outcome, CliError> {
    match c {
        CorpusCommand::List => {
            let entries: Vec<Value> = corpus::ENTRIES
                .iter()
                .map(|e| {
                    let kind = match e.kind {
                        corpus::Kind::Algebra => "algebra",
                        corpus::Kind::Instance => "instance",
                    };
                    json!({ "name": e.name, "kind": kind })
                })
                .collect();
            done(json!({ "entries": entries }), true)
        }
        CorpusCommand::Show { name } => {
            let e = corpus::entry(name).ok_or_else(|| CliError::usage(format!("no bundled entry `{name}`")))?;
            let v: Value = serde_json::from_str(e.text).expect("bundled entries parse");
            done(v, true)
        }
        CorpusCommand::Export { dir } => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{dir}: {e}")))?;
            let mut written = Vec::new();
            for e in corpus::ENTRIES {
                let path = format!("{dir}/{}.json", e.name);
                std::fs::write(&path, e.text).map_err(|err| CliError::usage(format!("{path}: {err}")))?;
                written.push(path);
            }
            done(json!({ "written": written }), true)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Enforce(_) => "enforce",
        Command::Check(_) => "check",
        Command::FindNu(_) => "find-nu",
        Command::Gadget(_) => "gadget",
        Command::Loop(_) => "loop verify",
        Command::Quality(_) => "quality",
        Command::Experiment(_) => "experiment",
        Command::Corpus(_) => "corpus",
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    let mut out = match &cli.command {
        Command::Enforce(a) => enforce(a),
        Command::Check(a) => check(a),
        Command::FindNu(a) => find_nu(a),
        Command::Gadget(a) => gadget(a),
        Command::Loop(LoopCommand::Verify(a)) => loop_verify(a),
        Command::Quality(a) => quality_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Corpus(c) => corpus_cmd(c),
    }?;
    if !matches!(cli.command, Command::Corpus(CorpusCommand::Show { .. })) {
        if let Value::Object(map) = &mut out.report {
            map.insert("build".into(), json!(BUILD_TAG));
            map.insert("command".into(), json!(command_name(&cli.command)));
        }
    }
    Ok(out)
}

fn report_error(e: &CliError) {
    let color = std::io::stderr().is_terminal() && std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty());
    if color {
        eprintln!("\x1b[1;31merror:\x1b[0m {e}");
    } else {
        eprintln!("error: {e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let text = corpus::to_canonical_json(&out.report);
            print!("{text}");
            if let Some(path) = &cli.report {
                if let Err(e) = std::fs::write(path, &text) {
                    report_error(&CliError::usage(format!("{path}: {e}")));
                    return ExitCode::from(2);
                }
            }
            ExitCode::from(if out.holds { 0 } else { 1 })
        }
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
