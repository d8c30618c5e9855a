use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use chaosamp_bench::{run, BenchError, ExperimentConfig, ExperimentKind};

/// Runs one experiment and writes its results as CSV.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    /// recovery, duffing or battery
    experiment: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides the config file).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; results go to stdout when neither this nor `output` is set.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, BenchError> {
    let kind: ExperimentKind = cli.experiment.parse()?;
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse(kind, &text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(BenchError::Config("--workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> Result<usize, BenchError> {
    let output = run(cfg)?;
    let name = cfg.experiment.name();
    let target = match (&cli.out, &cfg.output) {
        (Some(dir), _) => {
            fs::create_dir_all(dir)?;
            Some(dir.join(format!("{name}.csv")))
        }
        (None, Some(path)) => Some(path.clone()),
        (None, None) => None,
    };
    match &target {
        Some(path) => {
            output.table.write_csv(io::BufWriter::new(fs::File::create(path)?))?;
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            if cfg.aggregate {
                let agg = dir.join(format!("{name}_aggregate.dat"));
                output.table.write_aggregate(io::BufWriter::new(fs::File::create(agg)?))?;
            }
            if let Some(pdf) = &output.pdf {
                pdf.write_csv(io::BufWriter::new(fs::File::create(dir.join(format!("{name}_pdf.csv")))?))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            output.table.write_csv(&mut lock)?;
            if let Some(pdf) = &output.pdf {
                writeln!(lock)?;
                pdf.write_csv(&mut lock)?;
            }
        }
    }
    let total: f64 = output.table.rows.iter().map(|r| r.wall_time).sum();
    eprintln!(
        "{name}: {} rows, {} failed, {:.1} s of replicate time",
        output.table.rows.len(),
        output.table.failures(),
        total
    );
    Ok(output.table.failures())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(&cli, &cfg) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
