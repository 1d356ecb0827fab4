use clap::{Args, Parser, Subcommand};
use congestlab::cluster::Fidelity;
use congestlab::config;
use congestlab::graph::{generate, store};
use congestlab::labeling::{parse_labels, query};
use congestlab::sssp::AlgorithmConstants;
use congestlab_cli::{
    compare, parse_graph_spec, run_experiment, Algo, ExperimentSpec, ResultRecord,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "congestlab",
    about = "Run shortcut-based shortest-path experiments and emit machine-readable records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write record.json + trials.csv.
    Run(RunArgs),
    /// Structurally diff two result records.
    Compare { a: PathBuf, b: PathBuf },
    /// Generate a graph and store it in edge-list format.
    Gen {
        #[arg(long)]
        graph: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distance estimate from two labels alone (no graph access).
    LabelQuery {
        /// Label file written by the labels experiment.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// line:N | grid:RxC | er:N:P | rgg:N:R | star:N | file:PATH, with an
    /// optional :unit or :uniform:LO:HI weight suffix.
    #[arg(long)]
    graph: String,
    /// ldd | sssp | labels | transshipment | partwise | heads-tails
    #[arg(long)]
    algo: Algo,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 50)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// c1,c2,c,gamma
    #[arg(long, default_value = "4,2,4,2")]
    constants: String,
    #[arg(long, default_value_t = config::DEFAULT_KAPPA_BITS)]
    kappa_bits: u32,
    /// message | rounds
    #[arg(long, default_value = "rounds")]
    fidelity: String,
    /// Output directory for record.json and trials.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_constants(s: &str) -> Result<AlgorithmConstants, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("constants want c1,c2,c,gamma".into());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(AlgorithmConstants {
        c1: nums[0],
        c2: nums[1],
        termination_exponent: nums[2],
        gamma: nums[3],
    })
}

fn parse_fidelity(s: &str) -> Result<Fidelity, String> {
    match s {
        "message" => Ok(Fidelity::MessageFaithful),
        "rounds" => Ok(Fidelity::RoundAccounted),
        other => Err(format!("fidelity must be message or rounds, got {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run(args) => {
            let spec = ExperimentSpec {
                graph: parse_graph_spec(&args.graph)?,
                algo: args.algo,
                beta: args.beta,
                trials: args.trials,
                seed: args.seed,
                constants: parse_constants(&args.constants)?,
                kappa_bits: args.kappa_bits,
                fidelity: parse_fidelity(&args.fidelity)?,
            };
            let record = run_experiment(&spec)?;
            for v in &record.verdicts {
                println!(
                    "{} {}: {}",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.name,
                    v.detail
                );
            }
            if let Some(dir) = args.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("record.json"), record.to_json())?;
                std::fs::write(dir.join("trials.csv"), record.to_csv())?;
                let artifacts = congestlab_cli::write_artifacts(&spec, &dir)?;
                println!(
                    "wrote record.json, trials.csv{}{} in {}",
                    if artifacts.is_empty() { "" } else { ", " },
                    artifacts.join(", "),
                    dir.display()
                );
            } else {
                print!("{}", record.to_json());
            }
            Ok(if record.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Compare { a, b } => {
            let ra = ResultRecord::from_json(&std::fs::read_to_string(a)?)?;
            let rb = ResultRecord::from_json(&std::fs::read_to_string(b)?)?;
            let diff = compare(&ra, &rb)?;
            if diff.is_empty() {
                println!("records are identical");
            } else {
                for d in &diff {
                    println!("{}: {} -> {}", d.field, d.a, d.b);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { graph, seed, out } => {
            let spec = parse_graph_spec(&graph)?;
            let g = generate(&spec, seed)?;
            store(&g, &out)?;
            println!("wrote {} ({} vertices, {} edges)", out.display(), g.n(), g.m());
            Ok(ExitCode::SUCCESS)
        }
        Command::LabelQuery { labels, x, y } => {
            let all = parse_labels(&std::fs::read_to_string(labels)?)?;
            let get = |v: usize| {
                all.get(v)
                    .ok_or_else(|| format!("vertex {v} not in the label file"))
            };
            let result = query(get(x)?, get(y)?)?;
            println!("{}", result.estimate.to_decimal_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}
