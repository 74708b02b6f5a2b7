use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use bipartite_sandpile::bigraph::BipartiteGraph;
use bipartite_sandpile::harness::{self, verify, ExperimentConfig, ExperimentKind, HarnessError};
use bipartite_sandpile::sandpile::{sandpile_group, spanning_tree_count};
use bipartite_sandpile::theory::{expected_excess_exact, expected_rank_asymptotic, rank_pmf_theoretical};

#[derive(Parser)]
#[command(version, about = "Sandpile groups and p-ranks of random bipartite graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Prank,
    Cyclicity,
    MCorank,
    QSweep,
    BalancedScaling,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Prank => ExperimentKind::Prank,
            Kind::Cyclicity => ExperimentKind::Cyclicity,
            Kind::MCorank => ExperimentKind::MCorank,
            Kind::QSweep => ExperimentKind::QSweep,
            Kind::BalancedScaling => ExperimentKind::BalancedScaling,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded Monte Carlo experiment and print its JSON summary.
    Simulate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-trial observations as CSV (trial, seed, observation).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the predicted regime, means and p-rank law.
    Predict {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        p: u64,
    },
    /// Compute the sandpile group of a graph given as JSON.
    Group {
        #[arg(long)]
        edges: PathBuf,
    },
    /// Run the property and oracle suite.
    Verify,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(msg) => Failure::Config(msg),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn write_json(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n")).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn simulate(cfg: ExperimentConfig, csv: Option<PathBuf>) -> Result<(), Failure> {
    let out = cfg.output_path.clone();
    let result = match cfg.kind {
        ExperimentKind::QSweep | ExperimentKind::BalancedScaling => {
            if csv.is_some() {
                return Err(Failure::Config("--csv applies only to per-trial experiments".into()));
            }
            let text = if cfg.kind == ExperimentKind::QSweep {
                serde_json::to_string(&harness::run_qsweep(&cfg)?)
            } else {
                serde_json::to_string(&harness::run_balanced_scaling(&cfg)?)
            };
            return write_json(&text.expect("tables serialize"), out.as_ref());
        }
        ExperimentKind::Prank => harness::run_prank_experiment(&cfg)?,
        ExperimentKind::Cyclicity => harness::run_cyclicity_experiment(&cfg)?,
        ExperimentKind::MCorank => harness::run_mcorank_experiment(&cfg)?,
    };
    write_json(&result.to_json_string(), out.as_ref())?;
    if let Some(path) = csv {
        result.write_csv(&path)?;
    }
    if result.pipeline_consistent == Some(false) {
        return Err(Failure::Run("direct and Schur coranks disagreed".into()));
    }
    Ok(())
}

fn predict(n: u64, alpha: f64, p: u64) -> Result<(), Failure> {
    let config = |e: bipartite_sandpile::theory::TheoryError| Failure::Config(e.to_string());
    let (asymptotic, regime) = expected_rank_asymptotic(n, alpha, p).map_err(config)?;
    let excess = expected_excess_exact(n, alpha, p).map_err(config)?;
    let dist = rank_pmf_theoretical(n, alpha, p).map_err(config)?;
    let law: serde_json::Value = serde_json::from_str(&dist.to_json_string()).expect("valid JSON");
    let report = json!({
        "schema": 1,
        "regime": regime,
        "asymptotic_mean": asymptotic,
        "expected_excess": excess,
        "mean": dist.mean(),
        "distribution": law,
    });
    println!("{report}");
    Ok(())
}

fn group(path: &PathBuf) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let g = BipartiteGraph::from_json_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let group = sandpile_group(&g);
    // a disconnected graph has no spanning tree
    let trees = spanning_tree_count(&g).map(|t| t.to_string()).unwrap_or_else(|_| "0".into());
    let report = json!({
        "schema": 1,
        "factors": group.factors.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "order": group.order.to_string(),
        "free_rank": group.free_rank,
        "cyclic": group.is_cyclic(),
        "spanning_trees": trees,
    });
    println!("{report}");
    Ok(())
}

fn run_verify() -> Result<(), Failure> {
    let outcomes = verify::run_all();
    for outcome in &outcomes {
        println!("{outcome}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { kind, n, alpha, q, p, trials, seed, out, csv } => {
            let mut cfg = ExperimentConfig::new(kind.into(), n, alpha, q, p, trials, seed);
            cfg.output_path = out;
            simulate(cfg, csv)
        }
        Command::Predict { n, alpha, p } => predict(n, alpha, p),
        Command::Group { edges } => group(&edges),
        Command::Verify => run_verify(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("invalid configuration: {msg}");
            ExitCode::from(2)
        }
    }
}
