use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coevo_prune::harness::plot::{line_chart, Series};
use coevo_prune::harness::report::{render, summarize_files};
use coevo_prune::harness::{
    epoch_summary, read_csv, run_experiment, sweep_configs, write_outputs, ExperimentConfig, Profile, Trainer,
    TrialProblem,
};
use coevo_prune::nn::write_checkpoint;
use coevo_prune::Error;

#[derive(Parser)]
#[command(name = "coevo-prune", version, about = "Coevolutionary autoencoder training with pruning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the datasets of one trial as text files.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Train one configuration over all trials.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Save the best autoencoder of every trial here.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Train the no-pruning baseline and every pruner × schedule pair.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated trainers to sweep.
        #[arg(long, default_value = "lipi,canonical")]
        trainers: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Compare the final epoch of metrics files (or every `.csv` in a directory).
    Report {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Base preset: desk or full.
    #[arg(long, default_value = "desk")]
    profile: String,
    /// `key = value` file applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trainer: Option<String>,
    #[arg(long)]
    pruner: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any key, e.g. `--set learning_rate=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let profile: Profile = self.profile.parse()?;
        let mut cfg = ExperimentConfig::profile(profile);
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        let flags = [
            ("trainer", self.trainer.clone()),
            ("pruner", self.pruner.clone()),
            ("schedule", self.schedule.clone()),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn train(cfg: &ExperimentConfig, workers: Option<usize>, out: &Path, ckpt: Option<&Path>) -> Result<(), Error> {
    let results = run_experiment(cfg, workers)?;
    let path = write_outputs(out, cfg, &results)?;
    if let Some(dir) = ckpt {
        std::fs::create_dir_all(dir)?;
        for r in &results {
            let f = std::fs::File::create(dir.join(format!("{}_trial{}.ckpt", cfg.label(), r.trial)))?;
            write_checkpoint(&r.run.best, std::io::BufWriter::new(f))?;
        }
    }
    let last = epoch_summary(&coevo_prune::harness::metrics_rows(&results)).pop();
    if let Some(s) = last {
        println!(
            "{}: epoch {} median test loss {:.5} (IQR {:.5}..{:.5}), preserved {:.2}% -> {}",
            cfg.label(),
            s.epoch,
            s.median_test,
            s.q1_test,
            s.q3_test,
            s.median_preserved,
            path.display()
        );
    }
    Ok(())
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for e in std::fs::read_dir(p)? {
                let path = e?.path();
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
                if path.extension().is_some_and(|x| x == "csv") && !stem.contains('.') {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument("no metrics files given".into()));
    }
    Ok(files)
}

fn plots(files: &[PathBuf], dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut test = Vec::new();
    let mut kept = Vec::new();
    for f in files {
        let name = f.file_stem().unwrap().to_string_lossy().into_owned();
        let s = epoch_summary(&read_csv(&std::fs::read_to_string(f)?)?);
        test.push(Series { name: name.clone(), points: s.iter().map(|e| (e.epoch as f64, e.median_test)).collect() });
        kept.push(Series { name, points: s.iter().map(|e| (e.epoch as f64, e.median_preserved)).collect() });
    }
    for chunk in 0..test.len().div_ceil(8) {
        let range = chunk * 8..((chunk + 1) * 8).min(test.len());
        std::fs::write(
            dir.join(format!("test_loss_{chunk}.svg")),
            line_chart("median test loss", "epoch", "loss", &test[range.clone()]),
        )?;
        std::fs::write(
            dir.join(format!("preserved_{chunk}.svg")),
            line_chart("median preserved weights", "epoch", "%", &kept[range]),
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate { cfg, trial, out } => {
            let cfg = cfg.resolve()?;
            let p = TrialProblem::build(&cfg, coevo_prune::harness::trial_seed(cfg.seed, trial))?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("train.txt"), p.train.to_text())?;
            std::fs::write(out.join("test.txt"), p.test.to_text())?;
            std::fs::write(out.join("heldout.txt"), p.heldout.to_text())?;
            println!("oracle test loss per bit: {:.5}", p.oracle_test_loss()?);
        }
        Command::Train { cfg, workers, out, checkpoint_dir } => {
            train(&cfg.resolve()?, workers, &out, checkpoint_dir.as_deref())?;
        }
        Command::Sweep { cfg, trainers, workers, out } => {
            let base = cfg.resolve()?;
            for t in trainers.split(',') {
                let trainer: Trainer = t.trim().parse()?;
                for c in sweep_configs(&base, trainer) {
                    train(&c, workers, &out, None)?;
                }
            }
        }
        Command::Report { inputs, plot_dir } => {
            let files = collect_inputs(&inputs)?;
            print!("{}", render(&summarize_files(&files)?));
            if let Some(dir) = plot_dir {
                plots(&files, &dir)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
