use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fedmia::attack::{evaluate_attack, AttackMode, TargetModel};
use fedmia::experiment::{
    attach_advantages, carve_data, fl_config, model_spec, query_accuracy, read_results, run_experiment,
    summarize, train_attack_for_mode, train_shadow_ensemble, write_results, write_summary, ExperimentConfig,
    GroupKey, ResultRow, TrainingMode,
};
use fedmia::federated::{train_centralized, train_federated_with};
use fedmia::numerics::checkpoint;
use fedmia::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fedmia",
    version,
    about = "Membership inference against centrally and federally trained models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a target model and write its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also write the global model after every federated round into this directory.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Attack a checkpointed target trained from the same config and seed.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run the full sweep described by the config.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate a results CSV into mean and standard deviation per group.
    Summarize {
        input: PathBuf,
        /// Comma-separated group columns.
        #[arg(
            long,
            default_value = "dataset,training_mode,n_clients,attack_mode,batch_size"
        )]
        by: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Federated,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    clients: Option<usize>,
    /// Batch-wise attack with this batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Sample-wise attack.
    #[arg(long)]
    samplewise: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        match (self.mode, self.clients) {
            (Some(ModeArg::Centralized), None) => cfg.training_modes = vec![TrainingMode::Centralized],
            (Some(ModeArg::Centralized), Some(_)) => {
                return Err(Error::Config("--clients only applies to --mode federated".into()))
            }
            (Some(ModeArg::Federated), Some(n)) | (None, Some(n)) => {
                cfg.training_modes = vec![TrainingMode::Federated(n)]
            }
            (Some(ModeArg::Federated), None) => {
                return Err(Error::Config("--mode federated needs --clients".into()))
            }
            (None, None) => {}
        }
        if self.samplewise || self.batch_size.is_some() {
            cfg.attack_modes.clear();
            if self.samplewise {
                cfg.attack_modes.push(AttackMode::SampleWise);
            }
            if let Some(b) = self.batch_size {
                cfg.attack_modes.push(AttackMode::BatchWise(b));
            }
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn single_mode(cfg: &ExperimentConfig) -> Result<TrainingMode> {
    match cfg.training_modes.as_slice() {
        [mode] => Ok(*mode),
        _ => Err(Error::Config(
            "config lists several training modes; pick one with --mode/--clients".into(),
        )),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_train(common: &Common, checkpoint_dir: Option<&Path>) -> Result<()> {
    let cfg = common.load()?;
    let out = cfg
        .output_path
        .clone()
        .ok_or_else(|| Error::Config("train needs --out <checkpoint path>".into()))?;
    let seed = first_seed(&cfg);
    let mode = single_mode(&cfg)?;
    let source = cfg.dataset.load()?;
    let data = carve_data(&cfg, source.as_ref(), seed)?;
    let spec = model_spec(&cfg, &data.target_train)?;
    let fl = fl_config(&cfg, mode, &spec, seed);
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let params = match mode {
        TrainingMode::Centralized => train_centralized(&data.target_train, &fl)?,
        TrainingMode::Federated(_) => {
            train_federated_with(&data.target_train, &fl, |round, global| match checkpoint_dir {
                Some(dir) => checkpoint::save(global, dir.join(format!("round_{:04}.ckpt", round + 1))),
                None => Ok(()),
            })?
        }
    };
    checkpoint::save(&params, &out)?;
    let target = TargetModel::new(params)?;
    eprintln!(
        "{mode}: train accuracy {:.4}, held-out accuracy {:.4} -> {}",
        query_accuracy(&target, &data.target_train)?,
        query_accuracy(&target, &data.nonmember)?,
        out.display()
    );
    Ok(())
}

fn cmd_attack(common: &Common, ckpt: &Path) -> Result<()> {
    let cfg = common.load()?;
    let seed = first_seed(&cfg);
    let mode = single_mode(&cfg)?;
    let target = TargetModel::from_checkpoint(ckpt)?;
    let source = cfg.dataset.load()?;
    let data = carve_data(&cfg, source.as_ref(), seed)?;
    let ensemble = train_shadow_ensemble(&cfg, &data, seed)?;
    let train_acc = query_accuracy(&target, &data.target_train)?;
    let test_acc = query_accuracy(&target, &data.nonmember)?;
    let mut rows = Vec::new();
    for &attack_mode in &cfg.attack_modes {
        let model = train_attack_for_mode(&cfg, &ensemble, attack_mode, seed)?;
        let acc = evaluate_attack(&model, &target, &data.target_train, &data.nonmember, attack_mode)?;
        rows.push(ResultRow {
            dataset: cfg.dataset_name.clone(),
            training_mode: mode,
            attack_mode,
            seed,
            target_train_acc: train_acc,
            target_test_acc: test_acc,
            attack_accuracy: acc,
            advantage: None,
        });
    }
    rows.sort_by_key(|r| r.attack_mode);
    attach_advantages(&mut rows);
    write_results(&rows, open_output(cfg.output_path.as_deref())?)
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let rows = run_experiment(&cfg)?;
    write_results(&rows, open_output(cfg.output_path.as_deref())?)
}

fn cmd_summarize(input: &Path, by: &str, out: Option<&Path>) -> Result<()> {
    let keys = by
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<GroupKey>>>()?;
    let rows = read_results(File::open(input)?)?;
    let summary = summarize(&rows, &keys)?;
    write_summary(&keys, &summary, open_output(out)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train {
            common,
            checkpoint_dir,
        } => cmd_train(common, checkpoint_dir.as_deref()),
        Command::Attack { common, checkpoint } => cmd_attack(common, checkpoint),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Summarize { input, by, out } => cmd_summarize(input, by, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
