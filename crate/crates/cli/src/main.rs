use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use prophet_core::calibration::{calibrate, statistic_value, target_for};
use prophet_core::evaluation::{
    exact_performance, guarantee_report_with, simulate_performance, DEFAULT_MC_TRIALS,
};
use prophet_core::instances::{eligibility, example_hard_iid, load_instance, ThresholdPolicy};
use prophet_core::probcore::{
    gamma, poisson_binomial, poisson_stockout_target, w_constant, DemandStatistic, StatisticKind,
};
use prophet_core::verify::{
    ar_curve, default_ut_grid, demand_bad_sweep, hard_instance_sweep, run_all, ut_guarantee_curve,
    write_csv, write_varphi_csv,
};
use prophet_core::{Error, Result};

#[derive(Parser)]
#[command(name = "prophet", version, about = "Static threshold policies for the k-unit prophet secretary problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find (t, p) so that a demand statistic hits a target
    Calibrate(CalibrateArgs),
    /// Exact performance of a policy, optionally with prophet and LP benchmarks
    Evaluate(EvaluateArgs),
    /// Monte Carlo estimate of a policy's performance
    Simulate(SimulateArgs),
    /// gamma_k, W_k and P(Pois(k) >= k)
    #[command(alias = "constants")]
    Gamma {
        #[arg(long)]
        k: usize,
    },
    /// Write the numeric series behind the guarantee figures and tables as CSV
    Reproduce {
        #[command(subcommand)]
        target: Reproduce,
    },
    /// Run the verification suite
    Verify {
        #[command(subcommand)]
        target: Verify,
    },
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// expected_demand, expected_utilization or stockout_probability
    #[arg(long)]
    statistic: StatisticKind,
    #[arg(long, conflicts_with = "paper_target", required_unless_present = "paper_target")]
    target: Option<f64>,
    /// Use the designated target for the statistic
    #[arg(long)]
    paper_target: bool,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    p: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Include the prophet and LP benchmarks and the ratios against them
    #[arg(long)]
    benchmarks: bool,
    /// Monte Carlo trials when the prophet is too large to enumerate
    #[arg(long, default_value_t = DEFAULT_MC_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = DEFAULT_MC_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutArg {
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Reproduce {
    /// E[AR_k(Bin(n, k/n))] for n = k..=n_max
    Figure2 {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Guaranteed fraction against the expected utilization level
    Figure3 {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// varphi_k(k + l) for k = 9..=30 and l = 1..=11
    TableVarphi {
        #[command(flatten)]
        out: OutArg,
    },
    /// Tie-break sweep on the hard IID instance
    Example1 {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_MC_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Demand-calibrated policy on the rare-high-value instance
    Example2 {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum Verify {
    /// Every check; nonzero exit on any failure
    All {
        /// Smaller corpora and Monte Carlo budgets
        #[arg(long)]
        fast: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PROPHET_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("PROPHET_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn open_out(out: &OutArg) -> Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Calibrate(args) => {
            let inst = load_instance(&args.instance)?;
            let k = inst.k();
            let target = match args.target {
                Some(t) => t,
                None => target_for(args.statistic, k)?,
            };
            let stat = DemandStatistic::new(args.statistic, k)?;
            let pol = calibrate(&inst, &stat, target)?;
            print_json(&json!({
                "t": pol.t,
                "p": pol.p,
                "statistic": args.statistic,
                "target": target,
                "achieved": statistic_value(&inst, &pol, &stat),
            }));
        }
        Command::Evaluate(args) => {
            let inst = load_instance(&args.policy.instance)?;
            let pol = ThresholdPolicy::new(args.policy.t, args.policy.p)?;
            let value = if args.benchmarks {
                serde_json::to_value(guarantee_report_with(&inst, &pol, args.trials, args.seed)?)
                    .expect("serializable")
            } else {
                let k = inst.k();
                let law = poisson_binomial(&eligibility(&inst, &pol).q)?;
                let stat = |kind| DemandStatistic { kind, k };
                let expected_ut = law.expect(|d| stat(StatisticKind::ExpectedUtilization).g(d));
                let expected_ar = law.expect(|d| stat(StatisticKind::AcceptanceRate).g(d));
                json!({
                    "performance": exact_performance(&inst, &pol),
                    "expected_ut": expected_ut,
                    "expected_ar": expected_ar,
                    "expected_demand": law.mean(),
                    "lb_bound": expected_ut.min(expected_ar),
                })
            };
            print_json(&value);
        }
        Command::Simulate(args) => {
            let inst = load_instance(&args.policy.instance)?;
            let pol = ThresholdPolicy::new(args.policy.t, args.policy.p)?;
            let est = simulate_performance(&inst, &pol, args.trials, args.seed)?;
            print_json(&json!({
                "estimate": est.estimate,
                "std_error": est.std_error,
                "trials": args.trials,
                "seed": args.seed,
            }));
        }
        Command::Gamma { k } => {
            print_json(&json!({
                "k": k,
                "gamma": gamma(k)?,
                "w": w_constant(k)?,
                "stockout_target": poisson_stockout_target(k)?,
            }));
        }
        Command::Reproduce { target } => reproduce(target)?,
        Command::Verify { target: Verify::All { fast } } => {
            let summary = run_all(fast);
            print_json(&serde_json::to_value(&summary).expect("serializable"));
            if !summary.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn reproduce(target: Reproduce) -> Result<()> {
    match target {
        Reproduce::Figure2 { k, n_max, out } => {
            let curve = ar_curve(k, n_max)?;
            let g = gamma(k)?;
            let rows: Vec<Vec<f64>> = curve.points.iter().map(|&(n, v)| vec![n as f64, v, g]).collect();
            let mut w = open_out(&out)?;
            write_csv(&mut w, &["n", "expected_ar", "gamma"], &rows)?;
            w.flush()?;
        }
        Reproduce::Figure3 { k, out } => {
            let curve = ut_guarantee_curve(k, &default_ut_grid(k)?)?;
            let rows: Vec<Vec<f64>> = curve.iter().map(|&(a, b)| vec![a, b]).collect();
            let mut w = open_out(&out)?;
            write_csv(&mut w, &["utilization", "guarantee"], &rows)?;
            w.flush()?;
        }
        Reproduce::TableVarphi { out } => {
            let mut w = open_out(&out)?;
            write_varphi_csv(&mut w)?;
            w.flush()?;
        }
        Reproduce::Example1 { k, n, trials, seed, out } => {
            let sweep = hard_instance_sweep(k, n, trials, seed)?;
            let inst = example_hard_iid(k, n)?;
            let grid: Vec<f64> = (0..=200).map(|i| 10f64.powf(-8.0 + 8.0 * i as f64 / 200.0)).collect();
            let rows: Vec<Vec<f64>> = grid
                .iter()
                .map(|&p| {
                    let perf = exact_performance(&inst, &ThresholdPolicy { t: 1.0, p });
                    vec![p, perf, perf / sweep.prophet.value]
                })
                .collect();
            let mut w = open_out(&out)?;
            write_csv(&mut w, &["accept_prob", "performance", "ratio"], &rows)?;
            w.flush()?;
            eprintln!("{}", serde_json::to_string(&sweep).expect("serializable"));
        }
        Reproduce::Example2 { k, eps, out } => {
            let r = demand_bad_sweep(k, eps)?;
            let rows = vec![vec![k as f64, eps, r.policy.t, r.policy.p, r.performance, r.prophet, r.ratio]];
            let mut w = open_out(&out)?;
            write_csv(&mut w, &["k", "eps", "t", "p", "performance", "prophet", "ratio"], &rows)?;
            w.flush()?;
        }
    }
    Ok(())
}
