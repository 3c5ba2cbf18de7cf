//! Command-line front end for the droop-prediction pipeline.
//!
//! Typical flow:
//!
//! ```text
//! droopnet gen-design   --spec grid.json --out design.pdn.json
//! droopnet gen-vectors  --design design.pdn.json --spec vectors.json \
//!                       --count 500 --out vectors/
//! droopnet simulate     --design design.pdn.json --vectors vectors/ \
//!                       --tiles 24x24 --out truth/
//! droopnet build-dataset --design design.pdn.json --vector-spec vectors.json \
//!                       --tiles 24x24 --count 300 --r 0.3 --out dataset/
//! droopnet train        --dataset dataset/ --out ckpt/
//! droopnet predict      --ckpt ckpt/ --design design.pdn.json \
//!                       --vectors vectors/ --r 0.3 --out pred/
//! droopnet evaluate     --pred pred/ --truth truth/ --report report.json
//! droopnet sweep-compression --ckpt ckpt/ --design design.pdn.json \
//!                       --vectors vectors/ --truth truth/ --out sweep.csv
//! ```
//!
//! Commands exit 0 on success; on failure they print a single JSON object
//! `{"error": <code>, "message": <text>}` to stderr and exit 1. Given the
//! same inputs and seeds, every command rewrites its outputs byte for byte
//! (only the `*.run.json` manifests, which record wall time, differ).

mod artifacts;
mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "droopnet", version, about = "Worst-case power-grid noise prediction pipeline")]
struct Cli {
    /// Worker threads for per-vector stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    GenDesign(commands::GenDesign),
    GenVectors(commands::GenVectors),
    Simulate(commands::Simulate),
    BuildDataset(commands::BuildDataset),
    Train(commands::Train),
    Predict(commands::Predict),
    Evaluate(commands::Evaluate),
    SweepCompression(commands::SweepCompression),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let threads = commands::init_threads(cli.threads);
    let result = match &cli.command {
        Command::GenDesign(c) => c.run(threads),
        Command::GenVectors(c) => c.run(threads),
        Command::Simulate(c) => c.run(threads),
        Command::BuildDataset(c) => c.run(threads),
        Command::Train(c) => c.run(threads),
        Command::Predict(c) => c.run(threads),
        Command::Evaluate(c) => c.run(threads),
        Command::SweepCompression(c) => c.run(threads),
    };
    if let Err(e) = result {
        let payload = serde_json::json!({ "error": e.code(), "message": e.to_string() });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
