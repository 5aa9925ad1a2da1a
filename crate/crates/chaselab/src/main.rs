//! Command-line frontend: classification, chase runs, graph export,
//! terminating orders, and data-dependent analysis.
//!
//! Exit codes are a stable contract:
//! - `classify`: 0 when any termination class holds, 1 when all verdicts are
//!   negative, 2 on input errors;
//! - `chase`: 0 terminated, 3 failed, 4 budget exhausted, 5 aborted by the
//!   monitor, 2 on input errors;
//! - `order`: 1 when the set is not stratified;
//! - `irrelevant`, `graphs`: 0 on success, 2 on input errors.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chaselab::chase::{chase, chase_oblivious, ChaseStatus, SchedulingPolicy};
use chaselab::datadep::{
    data_dependent_verdict, irrelevant_constraints, monitored_chase, MonitorConfig, Verdict,
};
use chaselab::firing::{chase_graph, FiringMode};
use chaselab::graphs::{dependency_graph, propagation_graph};
use chaselab::hierarchy::{
    classify, minimal_restriction_system, terminating_order, AnalysisCache,
};
use chaselab::model::{ConstraintSet, Instance};
use chaselab::parser::{parse_constraints, parse_instance, serialize_instance};

#[derive(Parser)]
#[command(
    name = "chaselab",
    about = "Chase execution and chase-termination analysis for TGDs and EGDs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide every termination condition for a constraint set.
    Classify {
        constraints: PathBuf,
        /// Highest hierarchy level to try.
        #[arg(long = "max-k", default_value_t = 3)]
        max_k: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Chase an instance with a constraint set.
    Chase {
        constraints: PathBuf,
        instance: PathBuf,
        /// Scheduling policy: round-robin, fifo-violations, or scc-order.
        #[arg(long, default_value = "round-robin")]
        policy: String,
        /// Maximum number of chase steps.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Abort once the null-provenance monitor reaches this cycle order.
        #[arg(long = "monitor-k")]
        monitor_k: Option<usize>,
        /// Fire every matched grounding once, satisfied or not.
        #[arg(long)]
        oblivious: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Emit analysis graphs in DOT form.
    Graphs {
        constraints: PathBuf,
        /// Which graph: dep, prop, chase, c-chase, or restriction:K.
        #[arg(long)]
        which: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Print the class order a terminating sequence can follow.
    Order {
        constraints: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Constraints that can never fire on the given instance, plus the
    /// data-dependent termination verdict.
    Irrelevant {
        constraints: PathBuf,
        instance: PathBuf,
        #[arg(long = "max-k", default_value_t = 3)]
        max_k: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn read_constraints(path: &PathBuf) -> Result<ConstraintSet, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
    parse_constraints(&text).map_err(|e| format!("{}: {}", path.display(), e))
}

fn read_instance(path: &PathBuf, sigma: &ConstraintSet) -> Result<Instance, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
    parse_instance(&text, Some(&sigma.schema)).map_err(|e| format!("{}: {}", path.display(), e))
}

fn emit(out: &OutputArgs, content: &str) -> Result<(), String> {
    match &out.output {
        Some(path) => fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {}", path.display(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| e.to_string())
        }
    }
}

fn yes_no(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

fn run_classify(constraints: &PathBuf, max_k: usize, out: &OutputArgs) -> Result<u8, String> {
    if max_k < 2 {
        return Err("--max-k must be at least 2".into());
    }
    let sigma = read_constraints(constraints)?;
    let report = classify(&sigma, max_k);
    let content = match out.format {
        Format::Json => serde_json::to_string_pretty(&report).unwrap() + "\n",
        Format::Text => {
            let mut s = String::new();
            s.push_str(&format!("weakly acyclic:         {}\n", yes_no(report.weakly_acyclic)));
            s.push_str(&format!("safe:                   {}\n", yes_no(report.safe)));
            s.push_str(&format!("stratified:             {}\n", yes_no(report.stratified)));
            s.push_str(&format!("c-stratified:           {}\n", yes_no(report.c_stratified)));
            s.push_str(&format!(
                "inductively restricted: {}\n",
                yes_no(report.inductively_restricted)
            ));
            match report.t_level {
                Some(k) => s.push_str(&format!("hierarchy level:        T[{}]\n", k)),
                None => s.push_str(&format!(
                    "hierarchy level:        none up to T[{}]\n",
                    max_k
                )),
            }
            if let Some(w) = report.wgtgd {
                s.push_str(&format!("weakly guarded:         {}\n", yes_no(w)));
            }
            if let Some(r) = report.rgtgd {
                s.push_str(&format!("restrictedly guarded:   {}\n", yes_no(r)));
            }
            if report.stratified && !report.every_sequence_terminates() {
                s.push_str(
                    "warning: only some chase sequence is guaranteed to terminate, \
                     not every one; run `order` for a terminating schedule and chase \
                     with --policy scc-order\n",
                );
            }
            s
        }
    };
    emit(out, &content)?;
    Ok(if report.any_positive() { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn run_chase(
    constraints: &PathBuf,
    instance: &PathBuf,
    policy: &str,
    budget: usize,
    monitor_k: Option<usize>,
    oblivious: bool,
    out: &OutputArgs,
) -> Result<u8, String> {
    let sigma = read_constraints(constraints)?;
    let inst = read_instance(instance, &sigma)?;
    let policy = SchedulingPolicy::parse(policy)
        .ok_or_else(|| format!("unknown policy {policy}; use round-robin, fifo-violations, or scc-order"))?;

    let (outcome, monitor) = match (oblivious, monitor_k) {
        (true, _) => (chase_oblivious(&inst, &sigma, budget), None),
        (false, None) => (chase(&inst, &sigma, policy, budget), None),
        (false, Some(k)) => {
            if k == 0 {
                return Err("--monitor-k must be at least 1".into());
            }
            let (o, m) = monitored_chase(&inst, &sigma, policy, MonitorConfig { k }, budget);
            (o, Some(m))
        }
    };

    let content = match out.format {
        Format::Json => {
            let mut v = serde_json::json!({
                "status": outcome.status,
                "steps": outcome.log,
                "result": outcome.result.as_ref().map(|r| {
                    r.iter().map(|a| a.to_string()).collect::<Vec<_>>()
                }),
            });
            if let Some(m) = &monitor {
                v["monitor"] = m.to_json();
            }
            serde_json::to_string_pretty(&v).unwrap() + "\n"
        }
        Format::Text => {
            let mut s = String::new();
            for rec in &outcome.log {
                let args: Vec<String> = rec.args.iter().map(|t| t.to_string()).collect();
                s.push_str(&format!(
                    "step {}: {}({})\n",
                    rec.ordinal,
                    rec.constraint,
                    args.join(", ")
                ));
            }
            s.push_str(&format!("status: {:?}\n", outcome.status));
            if let Some(result) = &outcome.result {
                s.push_str("result:\n");
                s.push_str(&serialize_instance(result));
            }
            s
        }
    };
    emit(out, &content)?;
    Ok(match outcome.status {
        ChaseStatus::Terminated => 0,
        ChaseStatus::Failed => 3,
        ChaseStatus::BudgetExhausted => 4,
        ChaseStatus::AbortedByMonitor => 5,
    })
}

fn run_graphs(constraints: &PathBuf, which: &str, out: &OutputArgs) -> Result<u8, String> {
    let sigma = read_constraints(constraints)?;
    let dot = match which {
        "dep" => dependency_graph(&sigma).to_dot("dependency"),
        "prop" => propagation_graph(&sigma).to_dot("propagation"),
        "chase" => chase_graph(&sigma, FiringMode::Standard).to_dot("chase"),
        "c-chase" => chase_graph(&sigma, FiringMode::Oblivious).to_dot("c_chase"),
        other => match other.strip_prefix("restriction:") {
            Some(k) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| format!("bad restriction level in {other}"))?;
                if k < 2 {
                    return Err("restriction level must be at least 2".into());
                }
                let mut cache = AnalysisCache::default();
                minimal_restriction_system(&sigma, k, &mut cache).to_dot("restriction")
            }
            None => {
                return Err(format!(
                    "unknown graph kind {which}; use dep, prop, chase, c-chase, or restriction:K"
                ))
            }
        },
    };
    emit(out, &dot)?;
    Ok(0)
}

fn run_order(constraints: &PathBuf, out: &OutputArgs) -> Result<u8, String> {
    let sigma = read_constraints(constraints)?;
    match terminating_order(&sigma) {
        Some(classes) => {
            let content = match out.format {
                Format::Json => {
                    serde_json::to_string_pretty(&serde_json::json!({ "classes": classes }))
                        .unwrap()
                        + "\n"
                }
                Format::Text => {
                    let mut s = String::new();
                    for (i, class) in classes.iter().enumerate() {
                        s.push_str(&format!("{}: {}\n", i + 1, class.join(", ")));
                    }
                    s
                }
            };
            emit(out, &content)?;
            Ok(0)
        }
        None => {
            emit(out, "not stratified: no terminating order is guaranteed\n")?;
            Ok(1)
        }
    }
}

fn run_irrelevant(
    constraints: &PathBuf,
    instance: &PathBuf,
    max_k: usize,
    out: &OutputArgs,
) -> Result<u8, String> {
    let sigma = read_constraints(constraints)?;
    let inst = read_instance(instance, &sigma)?;
    let irrelevant: BTreeSet<String> =
        irrelevant_constraints(&inst, &sigma, FiringMode::Oblivious)
            .map_err(|e| e.to_string())?;
    let verdict = data_dependent_verdict(&inst, &sigma, max_k).map_err(|e| e.to_string())?;
    let content = match out.format {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "irrelevant": irrelevant,
            "verdict": verdict,
        }))
        .unwrap()
            + "\n",
        Format::Text => {
            let list: Vec<&str> = irrelevant.iter().map(|s| s.as_str()).collect();
            format!(
                "irrelevant: {}\nverdict: {}\n",
                if list.is_empty() {
                    "(none)".to_string()
                } else {
                    list.join(", ")
                },
                match verdict {
                    Verdict::Terminates => "TERMINATES",
                    Verdict::Unknown => "UNKNOWN",
                }
            )
        }
    };
    emit(out, &content)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify {
            constraints,
            max_k,
            out,
        } => run_classify(constraints, *max_k, out),
        Command::Chase {
            constraints,
            instance,
            policy,
            budget,
            monitor_k,
            oblivious,
            out,
        } => run_chase(
            constraints,
            instance,
            policy,
            *budget,
            *monitor_k,
            *oblivious,
            out,
        ),
        Command::Graphs {
            constraints,
            which,
            out,
        } => run_graphs(constraints, which, out),
        Command::Order { constraints, out } => run_order(constraints, out),
        Command::Irrelevant {
            constraints,
            instance,
            max_k,
            out,
        } => run_irrelevant(constraints, instance, *max_k, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {}", msg);
            ExitCode::from(2)
        }
    }
}
