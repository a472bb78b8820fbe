//! `bn2o`: inference, anytime approximation, generation, and partition
//! statistics for two-level noisy-or networks.
//!
//! Exit codes: 0 success, 1 parse/validation failure, 2 zero-probability
//! evidence, 3 engine cap exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bn2o_core::approx::{self, ApproxError, OrderPolicy, PriorMode};
use bn2o_core::engine::{self, CostCounters, EngineError, FindingSelection};
use bn2o_core::gen::{random_network, RandomNetParams};
use bn2o_core::model::{format_significant, parse_case, parse_network, serialize_network};
use bn2o_core::oracle::{self, OracleError};
use bn2o_core::quickscore::{self, QuickscoreError, DEFAULT_POSITIVE_CAP};
use bn2o_core::{CaseEvidence, Network};
use clap::{Parser, Subcommand, ValueEnum};

const SIG_DIGITS: usize = 12;

#[derive(Parser)]
#[command(
    name = "bn2o",
    version,
    about = "Inference in two-level noisy-or belief networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Recursive,
    Quickscore,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PriorModeArg {
    Exact,
    Marginal,
}

#[derive(Subcommand)]
enum Command {
    /// Compute disease posteriors for a case.
    Infer {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineKind::Recursive)]
        engine: EngineKind,
        /// Report only this disease.
        #[arg(long)]
        target: Option<String>,
        /// Append arithmetic cost counters to the report.
        #[arg(long)]
        costs: bool,
        /// Emit a JSON object instead of TSV.
        #[arg(long)]
        json: bool,
        /// Report per-phase wall-clock on standard error.
        #[arg(long)]
        time: bool,
    },
    /// Process positive findings incrementally and emit the trace.
    Approx {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        case: PathBuf,
        /// heuristic | ascending | descending | given:FILE
        #[arg(long, default_value = "heuristic")]
        order: String,
        /// Phase-one length for the heuristic order.
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_enum, default_value_t = PriorModeArg::Marginal)]
        prior_mode: PriorModeArg,
        /// Append the settling-metrics block.
        #[arg(long)]
        metrics: bool,
    },
    /// Generate a random network and write it to standard output.
    Gen {
        #[arg(long)]
        diseases: usize,
        #[arg(long)]
        findings: usize,
        /// Parent count bounds, MIN:MAX.
        #[arg(long)]
        parents: String,
        #[arg(long)]
        seed: u64,
        /// Disease prior range, LO:HI.
        #[arg(long, default_value = "0.05:0.95")]
        priors: String,
        /// Activation range, LO:HI.
        #[arg(long, default_value = "0.05:0.95")]
        activations: String,
        /// Leak range, LO:HI (0:0 disables leaks).
        #[arg(long, default_value = "0:0")]
        leak: String,
    },
    /// Print the partition trace and total savings for a case.
    PartitionStats {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        case: PathBuf,
    },
}

struct AppError {
    code: u8,
    message: String,
}

impl AppError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        AppError {
            code,
            message: message.into(),
        }
    }
}

impl From<EngineError> for AppError {
    fn from(e: EngineError) -> Self {
        AppError::new(2, e.to_string())
    }
}

impl From<QuickscoreError> for AppError {
    fn from(e: QuickscoreError) -> Self {
        let code = match e {
            QuickscoreError::TooManyPositiveFindings { .. } => 3,
            QuickscoreError::ZeroEvidence => 2,
        };
        AppError::new(code, e.to_string())
    }
}

impl From<OracleError> for AppError {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::TooManyDiseases { .. } => 3,
            OracleError::ZeroEvidence => 2,
        };
        AppError::new(code, e.to_string())
    }
}

impl From<ApproxError> for AppError {
    fn from(e: ApproxError) -> Self {
        let code = match e {
            ApproxError::ZeroEvidence => 2,
            _ => 1,
        };
        AppError::new(code, e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::new(1, format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, AppError> {
    let text = read_file(path)?;
    parse_network(&text).map_err(|e| AppError::new(1, format!("{}: {e}", path.display())))
}

fn load_case(path: &Path, net: &Network) -> Result<CaseEvidence, AppError> {
    let text = read_file(path)?;
    parse_case(&text, net).map_err(|e| AppError::new(1, format!("{}: {e}", path.display())))
}

fn sig(x: f64) -> String {
    format_significant(x, SIG_DIGITS)
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T), AppError> {
    let err = || AppError::new(1, format!("invalid {what} `{s}`: expected LO:HI"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    Ok((a.parse().map_err(|_| err())?, b.parse().map_err(|_| err())?))
}

/// Posterior rows sorted by posterior descending, ties by id ascending.
fn sorted_rows(net: &Network, marginals: &[f64]) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = net
        .diseases()
        .iter()
        .zip(marginals)
        .map(|(d, &m)| (d.id.clone(), m))
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

fn print_costs_tsv(out: &mut String, cost: &CostCounters) {
    let _ = writeln!(out, "# multiplications\t{}", cost.multiplications);
    let _ = writeln!(out, "# additions\t{}", cost.additions);
    let _ = writeln!(out, "# distributions\t{}", cost.distributions);
    let _ = writeln!(out, "# partition_calls\t{}", cost.partition_calls);
    let _ = writeln!(out, "# savings\t{}", cost.savings);
}

fn json_escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            c => vec![c],
        })
        .collect()
}

/// Hand-rolled JSON so the numbers match the TSV report digit for digit.
fn json_report(p_evidence: f64, rows: &[(String, f64)], cost: &CostCounters) -> String {
    let mut out = String::from("{");
    let _ = write!(out, "\"p_evidence\":{}", sig(p_evidence));
    out.push_str(",\"marginals\":{");
    let mut sorted: Vec<&(String, f64)> = rows.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (i, (id, m)) in sorted.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "\"{}\":{}", json_escape(id), sig(*m));
    }
    out.push_str("},\"costs\":{");
    let _ = write!(
        out,
        "\"multiplications\":{},\"additions\":{},\"distributions\":{},\"partition_calls\":{},\"savings\":{}",
        cost.multiplications, cost.additions, cost.distributions, cost.partition_calls, cost.savings
    );
    out.push_str("}}");
    out
}

#[allow(clippy::too_many_arguments)]
fn run_infer(
    net_path: &Path,
    case_path: &Path,
    engine_kind: EngineKind,
    target: Option<&str>,
    costs: bool,
    json: bool,
    time: bool,
) -> Result<(), AppError> {
    let t_parse = Instant::now();
    let net = load_network(net_path)?;
    let case = load_case(case_path, &net)?;
    let parse_seconds = t_parse.elapsed().as_secs_f64();

    let target_idx = match target {
        None => None,
        Some(id) => Some(
            net.disease_index(id)
                .ok_or_else(|| AppError::new(1, format!("unknown disease {id}")))?,
        ),
    };

    let t_eval = Instant::now();
    let (p_evidence, rows, cost, phases) = match (engine_kind, target_idx) {
        (EngineKind::Recursive, None) => {
            let (p, phases) = engine::posteriors_timed(&net, &case, FindingSelection::MaxParents)?;
            (
                p.p_evidence,
                sorted_rows(&net, &p.marginals),
                p.cost,
                Some(phases),
            )
        }
        (EngineKind::Recursive, Some(t)) => {
            let r = engine::posterior_single(&net, &case, t)?;
            (
                r.p_evidence,
                vec![(net.diseases()[t].id.clone(), r.posterior)],
                r.cost,
                None,
            )
        }
        (EngineKind::Quickscore, t) => {
            let p = quickscore::quickscore_posteriors(&net, &case, DEFAULT_POSITIVE_CAP)?;
            let rows = match t {
                None => sorted_rows(&net, &p.marginals),
                Some(t) => vec![(net.diseases()[t].id.clone(), p.marginals[t])],
            };
            (p.p_evidence, rows, p.cost, None)
        }
        (EngineKind::Oracle, t) => {
            let (z, marginals) = oracle::enumerate_posteriors(&net, &case)?;
            let rows = match t {
                None => sorted_rows(&net, &marginals),
                Some(t) => vec![(net.diseases()[t].id.clone(), marginals[t])],
            };
            // The oracle does not account its arithmetic.
            (z, rows, CostCounters::default(), None)
        }
    };
    let eval_seconds = t_eval.elapsed().as_secs_f64();

    let mut out = String::new();
    if json {
        out.push_str(&json_report(p_evidence, &rows, &cost));
        out.push('\n');
    } else {
        for (id, m) in &rows {
            let _ = writeln!(out, "{id}\t{}", sig(*m));
        }
        if costs {
            print_costs_tsv(&mut out, &cost);
        }
    }
    print!("{out}");
    if time {
        eprintln!("# time parse {parse_seconds:.6}s");
        if let Some(ph) = phases {
            eprintln!("# time absorb {:.6}s", ph.absorb_seconds);
            eprintln!("# time partition {:.6}s", ph.partition_seconds);
            eprintln!("# time evaluate {:.6}s", ph.evaluate_seconds);
        }
        eprintln!("# time infer {eval_seconds:.6}s");
    }
    Ok(())
}

fn run_approx(
    net_path: &Path,
    case_path: &Path,
    order: &str,
    k: usize,
    prior_mode: PriorModeArg,
    metrics: bool,
) -> Result<(), AppError> {
    let net = load_network(net_path)?;
    let case = load_case(case_path, &net)?;
    let policy = match order {
        "heuristic" => OrderPolicy::Heuristic { phase_one: k },
        "ascending" => OrderPolicy::AscendingParents,
        "descending" => OrderPolicy::DescendingParents,
        other => {
            let path = other.strip_prefix("given:").ok_or_else(|| {
                AppError::new(
                    1,
                    format!(
                        "invalid order `{other}`: expected heuristic, ascending, descending, or given:FILE"
                    ),
                )
            })?;
            let text = read_file(Path::new(path))?;
            let mut list = Vec::new();
            for tok in text.split_whitespace() {
                let j = net
                    .finding_index(tok)
                    .ok_or_else(|| AppError::new(1, format!("unknown finding {tok}")))?;
                list.push(j);
            }
            OrderPolicy::Given(list)
        }
    };
    let mode = match prior_mode {
        PriorModeArg::Exact => PriorMode::Exact,
        PriorModeArg::Marginal => PriorMode::Marginal,
    };
    let trace = approx::run_incremental(&net, &case, &policy, mode)?;
    let mut out = approx::trace_to_tsv(&trace, &net);
    if metrics {
        let m = approx::settling_metrics(&trace);
        let _ = writeln!(out, "# one_ip\t{}", m.one_ip);
        let _ = writeln!(out, "# four_is\t{}", m.four_is);
        let _ = writeln!(out, "# four_ip\t{}", m.four_ip);
        let _ = writeln!(out, "# error_top\t{}", sig(m.error_top));
        let _ = writeln!(out, "# lep\t{}", sig(m.lep));
        let _ = writeln!(out, "# flep\t{}", sig(m.flep));
    }
    print!("{out}");
    Ok(())
}

fn run_gen(
    diseases: usize,
    findings: usize,
    parents: &str,
    seed: u64,
    priors: &str,
    activations: &str,
    leak: &str,
) -> Result<(), AppError> {
    let (parents_min, parents_max) = parse_pair::<usize>(parents, "parent bounds")?;
    let params = RandomNetParams {
        n_diseases: diseases,
        n_findings: findings,
        parents_min,
        parents_max,
        prior_range: parse_pair(priors, "prior range")?,
        activation_range: parse_pair(activations, "activation range")?,
        leak_range: parse_pair(leak, "leak range")?,
    };
    let net = random_network(&params, seed).map_err(|e| AppError::new(1, e.to_string()))?;
    print!("{}", serialize_network(&net));
    Ok(())
}

fn run_partition_stats(net_path: &Path, case_path: &Path) -> Result<(), AppError> {
    let net = load_network(net_path)?;
    let case = load_case(case_path, &net)?;
    let (events, cost) = engine::partition_trace(&net, &case);
    let mut out = String::new();
    for (remaining, sizes) in &events {
        let sizes: Vec<String> = sizes.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{remaining}\t{}", sizes.join(","));
    }
    let _ = writeln!(out, "savings\t{}", cost.savings);
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Infer {
            net,
            case,
            engine,
            target,
            costs,
            json,
            time,
        } => run_infer(&net, &case, engine, target.as_deref(), costs, json, time),
        Command::Approx {
            net,
            case,
            order,
            k,
            prior_mode,
            metrics,
        } => run_approx(&net, &case, &order, k, prior_mode, metrics),
        Command::Gen {
            diseases,
            findings,
            parents,
            seed,
            priors,
            activations,
            leak,
        } => run_gen(
            diseases,
            findings,
            &parents,
            seed,
            &priors,
            &activations,
            &leak,
        ),
        Command::PartitionStats { net, case } => run_partition_stats(&net, &case),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bn2o: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
