use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsacl::data::{generate_synthetic, write_dataset, SyntheticSpec};
use tsacl::encoder::Normalization;
use tsacl::runner::checkpoint::load_checkpoint;
use tsacl::runner::{
    execute_experiment, joint_comparison, EncoderDescriptor, ExperimentConfig, ORACLE_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "tsacl",
    about = "Gradient-free class-incremental learning for multivariate time series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory from a spec file.
    Synth {
        /// JSON file holding the synthetic data spec.
        #[arg(long)]
        spec: PathBuf,
        /// Directory to write the dataset into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write report, summary, and checkpoints.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the metadata of a checkpoint file.
    Inspect {
        /// Checkpoint file to read.
        checkpoint: PathBuf,
    },
    /// Verify that the incremental solution matches a joint ridge solve
    /// over the same data, for every configured seed and member.
    Oracle {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok((text, success)) => {
            let printed = write_stdout(&text);
            if success && printed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Write verb output in one shot. A consumer that closed the pipe early
/// (`tsacl inspect ... | head`) is not an error; anything else is.
fn write_stdout(text: &str) -> bool {
    use std::io::{ErrorKind, Write};
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => true,
        Err(e) if e.kind() == ErrorKind::BrokenPipe => true,
        Err(e) => {
            eprintln!("error: {e}");
            false
        }
    }
}

fn line(text: &mut String, content: String) {
    text.push_str(&content);
    text.push('\n');
}

fn dispatch(command: Command) -> tsacl::Result<(String, bool)> {
    match command {
        Command::Synth { spec, out } => synth(&spec, &out),
        Command::Run { config, out } => run(&config, out),
        Command::Inspect { checkpoint } => inspect(&checkpoint),
        Command::Oracle { config } => oracle(&config),
    }
}

fn synth(spec_path: &Path, out: &Path) -> tsacl::Result<(String, bool)> {
    let spec = SyntheticSpec::load(spec_path)?;
    let (train, test) = generate_synthetic(&spec)?;
    write_dataset(out, &train, &test)?;
    let mut text = String::new();
    line(&mut text, format!("dataset: {}", out.display()));
    line(
        &mut text,
        format!(
            "classes: {}  channels: {}  length: {}",
            train.num_classes(),
            train.channels(),
            train.length()
        ),
    );
    line(
        &mut text,
        format!(
            "train samples: {}  test samples: {}",
            train.num_samples(),
            test.num_samples()
        ),
    );
    Ok((text, true))
}

fn run(config_path: &Path, out: Option<PathBuf>) -> tsacl::Result<(String, bool)> {
    let config = ExperimentConfig::load(config_path)?;
    let out_dir = out
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            tsacl::Error::InvalidConfig(
                "no output directory: pass --out or set output_dir in the config".into(),
            )
        })?;
    let outcome = execute_experiment(&config, &out_dir)?;
    let report = &outcome.report;
    let mut text = String::new();
    line(&mut text, format!("report: {}", out_dir.join("report.json").display()));
    line(&mut text, format!("summary: {}", out_dir.join("summary.csv").display()));
    line(
        &mut text,
        format!("checkpoints: {}", out_dir.join("checkpoints").display()),
    );
    let mut stats = format!(
        "runs: {}  mean_average_accuracy: {:.6}",
        report.runs.len(),
        report.aggregate.mean_average_accuracy
    );
    if let Some(f) = report.aggregate.mean_forgetting {
        stats.push_str(&format!("  mean_forgetting: {f:.6}"));
    }
    line(&mut text, stats);
    Ok((text, true))
}

fn normalization_name(normalization: Normalization) -> &'static str {
    match normalization {
        Normalization::None => "none",
        Normalization::PerSample => "per_sample",
        Normalization::PerChannel => "per_channel",
    }
}

fn inspect(path: &Path) -> tsacl::Result<(String, bool)> {
    let contents = load_checkpoint(path)?;
    let meta = &contents.meta;
    let mut text = String::new();
    line(&mut text, format!("checkpoint: {}", path.display()));
    line(&mut text, format!("run_seed: {}", meta.run_seed));
    line(&mut text, format!("gamma: {}", meta.gamma));
    line(&mut text, format!("tasks_seen: {}", meta.tasks_seen));
    line(&mut text, format!("classes: {}", meta.registry.len()));
    line(
        &mut text,
        format!(
            "registry: {}",
            meta.registry
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    line(
        &mut text,
        format!("normalization: {}", normalization_name(meta.normalization)),
    );
    line(
        &mut text,
        format!("standardize_pre_expansion: {}", meta.standardize_pre_expansion),
    );
    match &meta.encoder {
        EncoderDescriptor::Random { spec, in_channels } => line(
            &mut text,
            format!(
                "encoder: random seed={} blocks={} in_channels={in_channels}",
                spec.seed,
                spec.blocks.len()
            ),
        ),
        EncoderDescriptor::Precomputed { feature_dim } => line(
            &mut text,
            format!("encoder: precomputed feature_dim={feature_dim}"),
        ),
    }
    line(
        &mut text,
        format!(
            "expansion: d_stack={} d_e={} sigma={} member_seeds={}",
            meta.expansion.d_stack,
            meta.expansion.d_e,
            meta.expansion.sigma,
            meta.expansion
                .member_seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    for info in &meta.matrices {
        line(
            &mut text,
            format!("matrix: {} {}x{}", info.name, info.rows, info.cols),
        );
    }
    Ok((text, true))
}

fn oracle(config_path: &Path) -> tsacl::Result<(String, bool)> {
    let config = ExperimentConfig::load(config_path)?;
    let checks = joint_comparison(&config)?;
    let mut text = String::new();
    let mut failures = 0usize;
    for check in &checks {
        let pass = check.passes(ORACLE_TOLERANCE);
        if !pass {
            failures += 1;
        }
        line(
            &mut text,
            format!(
                "oracle seed={} member_seed={} gamma={} weight_diff={:.3e} agreement={} status={}",
                check.run_seed,
                check.member_seed,
                check.gamma,
                check.weight_difference,
                check.prediction_agreement,
                if pass { "pass" } else { "fail" }
            ),
        );
    }
    line(&mut text, format!("oracle checks={} failures={failures}", checks.len()));
    if failures > 0 {
        eprintln!(
            "error: incremental solution diverged from the joint solve in {failures} of {} checks",
            checks.len()
        );
    }
    Ok((text, failures == 0))
}
