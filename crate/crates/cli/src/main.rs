use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use manna_core::fairness::{check_allocation, Direction, EnvyReport, Side, Witness};
use manna_core::gen::{GenConfig, Mix};
use manna_core::io::{
    allocation_to_file, instance_hash, instance_to_json, market_to_file, parse_allocation_json,
    parse_instance_json, parse_market_json,
};
use manna_core::market::{solve_two_agent, solve_two_agent_from, FisherMarket, SolveError};
use manna_core::scalar::{parse_rational, Rational};
use manna_core::search::{
    self, cap_from_env, verify_ordinal_impossibility, verify_two_phase_examples, SearchError,
    SearchOptions, CAP_ENV,
};
use manna_core::sequences::{compose_wef1t, SequenceError};
use manna_core::{Allocation, ExactInstance, Notion};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "manna",
    version,
    about = "Weighted fair division of goods and chores"
)]
struct Cli {
    /// Print machine-readable JSON reports (and JSON errors on stderr)
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an allocation against WEF, WEF1 or WEF1T
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_value = "wef1")]
        notion: Notion,
    },
    /// Compute an allocation
    #[command(subcommand)]
    Solve(Solve),
    /// Exhaustively search all allocations of an instance
    Search {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "wef1")]
        notion: Notion,
        /// Report every satisfying allocation (default)
        #[arg(long, conflicts_with = "first")]
        all: bool,
        /// Stop at the first satisfying allocation in enumeration order
        #[arg(long)]
        first: bool,
        /// Also require Pareto optimality among integral allocations
        #[arg(long)]
        po: bool,
        /// Maximum number of allocations to enumerate
        #[arg(long, env = CAP_ENV)]
        cap: Option<u64>,
    },
    /// Reproduce the impossibility examples
    #[command(subcommand)]
    Repro(Repro),
    /// Generate a seeded random instance
    Gen(GenArgs),
}

#[derive(Subcommand)]
enum Solve {
    /// WEF1T allocation from a WEF1 goods part and a WEF1 chores part
    Wef1t {
        #[arg(long)]
        instance: PathBuf,
    },
    /// WEF1 and fPO allocation for two agents via market local search
    Market2 {
        #[arg(long)]
        instance: PathBuf,
        /// Starting equilibrium `{"bundles": .., "prices": ..}`
        #[arg(long)]
        start: Option<PathBuf>,
        /// Write the iteration trace as JSON to this file
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Repro {
    /// Four ordinally compatible instances with no common WEF1 allocation
    Thm3 {
        #[arg(long, default_value = "1/8")]
        eps: String,
    },
    /// Two-phase (chores first / goods first) counterexamples
    Twophase {
        #[arg(long, default_value = "1/10")]
        eps: String,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    agents: usize,
    #[arg(long)]
    items: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = -10, allow_negative_numbers = true)]
    value_lo: i64,
    #[arg(long, default_value_t = 10, allow_negative_numbers = true)]
    value_hi: i64,
    /// Values are multiples of 1/denominator
    #[arg(long, default_value_t = 1)]
    denominator: u64,
    #[arg(long, default_value_t = 1)]
    weight_lo: u64,
    #[arg(long, default_value_t = 5)]
    weight_hi: u64,
    /// Item sign mix as `goods,chores,neutral` probabilities, e.g. `0.5,0.4,0.1`
    #[arg(long)]
    mix: Option<String>,
    /// Write the instance here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A finished command: exit status 0 (pass) or 1 (violation / negative result).
struct Outcome {
    pass: bool,
    report: Value,
    text: String,
}

enum Failure {
    Input(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome { pass, report, text }) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("serializable")
                );
            } else {
                print!("{text}");
            }
            ExitCode::from(if pass { 0 } else { 1 })
        }
        Err(failure) => {
            let (kind, message) = match &failure {
                Failure::Input(m) => ("input_error", m),
                Failure::Invariant(m) => ("internal_invariant_violation", m),
            };
            if cli.json {
                eprintln!(
                    "{}",
                    json!({ "version": VERSION, "error": kind, "message": message })
                );
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::Check {
            instance,
            allocation,
            notion,
        } => check(&instance, &allocation, notion),
        Command::Solve(Solve::Wef1t { instance }) => solve_wef1t(&instance),
        Command::Solve(Solve::Market2 {
            instance,
            start,
            trace,
        }) => solve_market2(&instance, start.as_deref(), trace.as_deref()),
        Command::Search {
            instance,
            notion,
            all: _,
            first,
            po,
            cap,
        } => search_cmd(
            &instance,
            notion,
            first,
            po,
            cap.unwrap_or_else(cap_from_env),
        ),
        Command::Repro(Repro::Thm3 { eps }) => repro_thm3(&eps),
        Command::Repro(Repro::Twophase { eps }) => repro_twophase(&eps),
        Command::Gen(args) => gen(args),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<ExactInstance, Failure> {
    parse_instance_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn header(inst: Option<&ExactInstance>) -> Value {
    let mut h = json!({ "version": VERSION });
    if let Some(inst) = inst {
        h["instance_hash"] = json!(instance_hash(inst));
    }
    h
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn to_value<S: serde::Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Bundles with 1-based agent and item names.
fn describe_allocation(inst: &ExactInstance, a: &Allocation) -> String {
    let mut out = String::new();
    for (i, bundle) in a.bundles().iter().enumerate() {
        let names: Vec<String> = bundle.iter().map(|&j| inst.item_name(j)).collect();
        out.push_str(&format!("  agent {}: {{{}}}\n", i + 1, names.join(", ")));
    }
    out
}

fn describe_report(inst: &ExactInstance, report: &EnvyReport<Rational>) -> String {
    let mut out = String::new();
    for row in &report.verdicts {
        for v in row.iter().filter(|v| v.envier != v.envied) {
            if v.envies {
                out.push_str(&format!(
                    "  agent {} {}-envies agent {}\n",
                    v.envier + 1,
                    report.notion,
                    v.envied + 1
                ));
            } else if let Some(w) = v.witness {
                let how = match w {
                    Witness::Removal {
                        item,
                        from: Side::Own,
                    } => {
                        format!("removing {} from own bundle", inst.item_name(item))
                    }
                    Witness::Removal {
                        item,
                        from: Side::Other,
                    } => {
                        format!("removing {} from the other bundle", inst.item_name(item))
                    }
                    Witness::Transfer {
                        item,
                        direction: Direction::FromEnvier,
                    } => {
                        format!("giving away {}", inst.item_name(item))
                    }
                    Witness::Transfer {
                        item,
                        direction: Direction::ToEnvier,
                    } => {
                        format!("taking {}", inst.item_name(item))
                    }
                };
                out.push_str(&format!(
                    "  agent {} envies agent {}, rescued by {how}\n",
                    v.envier + 1,
                    v.envied + 1
                ));
            }
        }
    }
    out.push_str(&format!(
        "{}: {}\n",
        report.notion,
        if report.overall { "pass" } else { "fail" }
    ));
    out
}

fn check(instance: &Path, allocation: &Path, notion: Notion) -> Result<Outcome, Failure> {
    let inst = load_instance(instance)?;
    let a = parse_allocation_json(&read(allocation)?, &inst).map_err(input)?;
    let report = check_allocation(&inst, &a, notion);
    let text = describe_allocation(&inst, &a) + &describe_report(&inst, &report);
    Ok(Outcome {
        pass: report.overall,
        report: merge(header(Some(&inst)), json!({ "report": to_value(&report) })),
        text,
    })
}

fn solve_wef1t(instance: &Path) -> Result<Outcome, Failure> {
    let inst = load_instance(instance)?;
    let comp = compose_wef1t(&inst).map_err(|e| match e {
        SequenceError::Repair(SearchError::CapExceeded { .. }) => input(e),
        other => Failure::Invariant(other.to_string()),
    })?;
    let goods_inst = comp.goods.sub_instance(&inst);
    let chores_inst = comp.chores.sub_instance(&inst);
    let goods_report = check_allocation(&goods_inst, &comp.goods.allocation, Notion::Wef1);
    let chores_report = check_allocation(&chores_inst, &comp.chores.allocation, Notion::Wef1);
    let report = check_allocation(&inst, &comp.allocation, Notion::Wef1t);
    let pass = report.overall && goods_report.overall && chores_report.overall;
    let mut text = String::from("allocation:\n") + &describe_allocation(&inst, &comp.allocation);
    text.push_str(&format!(
        "goods part WEF1: {}\nchores part WEF1: {}\n",
        goods_report.overall, chores_report.overall
    ));
    text.push_str(&describe_report(&inst, &report));
    Ok(Outcome {
        pass,
        report: merge(
            header(Some(&inst)),
            json!({
                "allocation": allocation_to_file(&comp.allocation),
                "goods": to_value(&comp.goods),
                "chores": to_value(&comp.chores),
                "reports": {
                    "wef1t": to_value(&report),
                    "goods_wef1": to_value(&goods_report),
                    "chores_wef1": to_value(&chores_report),
                },
            }),
        ),
        text,
    })
}

fn solve_market2(
    instance: &Path,
    start: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<Outcome, Failure> {
    let inst = load_instance(instance)?;
    let result = match start {
        None => solve_two_agent(&inst),
        Some(path) => {
            let (a, prices) = parse_market_json(&read(path)?, &inst).map_err(input)?;
            solve_two_agent_from(&inst, FisherMarket::integral(a, prices))
        }
    };
    let (market, trace) = result.map_err(|e| match e {
        SolveError::InternalInvariantViolation { .. } => Failure::Invariant(e.to_string()),
        other => input(other),
    })?;
    if let Some(path) = trace_out {
        let body = merge(header(Some(&inst)), json!({ "trace": to_value(&trace) }));
        write(
            path,
            &(serde_json::to_string_pretty(&body).expect("serializable") + "\n"),
        )?;
    }
    let a = market.allocation().expect("solver output is integral");
    let certificate = manna_core::market::check_equilibrium(&inst, &market)
        .map_err(|_| Failure::Invariant("solver output is not an equilibrium".into()))?;
    let report = check_allocation(&inst, a, Notion::Wef1);
    let mut text = String::from("allocation:\n") + &describe_allocation(&inst, a);
    let prices: Vec<String> = market.prices.iter().map(ToString::to_string).collect();
    text.push_str(&format!("prices: {}\n", prices.join(", ")));
    text.push_str(&format!("iterations: {}\n", trace.iterations.len()));
    text.push_str(&describe_report(&inst, &report));
    Ok(Outcome {
        pass: report.overall,
        report: merge(
            header(Some(&inst)),
            json!({
                "market": market_to_file(a, &market.prices),
                "certificate": to_value(&certificate),
                "iterations": trace.iterations.len(),
                "report": to_value(&report),
            }),
        ),
        text,
    })
}

fn search_cmd(
    instance: &Path,
    notion: Notion,
    first: bool,
    po: bool,
    cap: u64,
) -> Result<Outcome, Failure> {
    let inst = load_instance(instance)?;
    let opts = SearchOptions {
        cap,
        first_only: first,
        require_po: po,
        record_rejections: false,
    };
    let report = search::search(&inst, notion, &opts).map_err(input)?;
    let mut text = format!(
        "{} of {} allocations satisfy {}{}\n",
        report.count,
        report.total,
        notion,
        if po { " + PO" } else { "" }
    );
    if first {
        text = format!(
            "{}{}\n",
            if report.count > 0 {
                "found an allocation satisfying "
            } else {
                "no allocation satisfies "
            },
            notion
        );
    }
    for owners in report.satisfying.iter().take(20) {
        let a = Allocation::from_owners(inst.n(), owners.clone()).expect("enumerated");
        text.push_str(&describe_allocation(&inst, &a));
    }
    if report.satisfying.len() > 20 {
        text.push_str(&format!("  ... {} more\n", report.satisfying.len() - 20));
    }
    Ok(Outcome {
        pass: report.count > 0,
        report: merge(header(Some(&inst)), json!({ "search": to_value(&report) })),
        text,
    })
}

fn parse_eps(eps: &str) -> Result<Rational, Failure> {
    parse_rational(eps).map_err(input)
}

fn repro_thm3(eps: &str) -> Result<Outcome, Failure> {
    let report = verify_ordinal_impossibility(&parse_eps(eps)?).map_err(input)?;
    let empty = report.satisfying.is_empty();
    let mut text = format!(
        "{} allocations enumerated, {} ruled out\nintersection {}\n",
        report.total,
        report.rejections.len(),
        if empty { "empty" } else { "non-empty" }
    );
    for r in &report.rejections {
        text.push_str(&format!(
            "  {:?}: agent {} WEF1-envies agent {} in {}\n",
            r.owners.iter().map(|o| o + 1).collect::<Vec<_>>(),
            r.envier + 1,
            r.envied + 1,
            report.instances[r.instance]
        ));
    }
    for owners in &report.satisfying {
        text.push_str(&format!(
            "  {:?}: WEF1 in all four\n",
            owners.iter().map(|o| o + 1).collect::<Vec<_>>()
        ));
    }
    Ok(Outcome {
        pass: empty,
        report: merge(
            header(None),
            json!({ "eps": eps, "intersection_empty": empty, "search": to_value(&report) }),
        ),
        text,
    })
}

fn repro_twophase(eps: &str) -> Result<Outcome, Failure> {
    let report = verify_two_phase_examples(&parse_eps(eps)?).map_err(input)?;
    let mut text = String::new();
    for ex in &report.examples {
        let failing = ex.completions.iter().filter(|c| !c.wef1).count();
        text.push_str(&format!(
            "{}: {} to agent {} is WEF1 alone: {}; {}/{} completions fail WEF1; {}\n",
            ex.name,
            ex.items[ex.fixed_item],
            ex.fixed_owner + 1,
            ex.first_phase_wef1,
            failing,
            ex.completions.len(),
            if ex.confirmed {
                "confirmed"
            } else {
                "not confirmed"
            }
        ));
    }
    Ok(Outcome {
        pass: report.confirmed,
        report: merge(header(None), json!({ "twophase": to_value(&report) })),
        text,
    })
}

fn parse_mix(text: &str) -> Result<Mix, Failure> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Input(format!("--mix: {e}")))?;
    match parts[..] {
        [goods, chores, neutral] => Ok(Mix {
            goods,
            chores,
            neutral,
        }),
        [goods, chores] => Ok(Mix {
            goods,
            chores,
            neutral: 0.0,
        }),
        _ => Err(Failure::Input(
            "--mix expects `goods,chores[,neutral]`".into(),
        )),
    }
}

fn gen(args: GenArgs) -> Result<Outcome, Failure> {
    let cfg = GenConfig {
        agents: args.agents,
        items: args.items,
        seed: args.seed,
        value_lo: args.value_lo,
        value_hi: args.value_hi,
        denominator: args.denominator,
        weight_lo: args.weight_lo,
        weight_hi: args.weight_hi,
        mix: args.mix.as_deref().map(parse_mix).transpose()?,
    };
    let inst = cfg.generate().map_err(input)?;
    let body = instance_to_json(&inst);
    match args.out {
        Some(path) => {
            write(&path, &body)?;
            Ok(Outcome {
                pass: true,
                report: merge(
                    header(Some(&inst)),
                    json!({ "written": path.display().to_string() }),
                ),
                text: format!("wrote {} ({})\n", path.display(), instance_hash(&inst)),
            })
        }
        None => Ok(Outcome {
            pass: true,
            report: merge(
                header(Some(&inst)),
                json!({ "instance": to_value(&manna_core::io::instance_to_file(&inst)) }),
            ),
            text: body,
        }),
    }
}
