//! End-to-end experiment execution: load or synthesize data, encode once
//! with the frozen encoder, then per run seed build the task stream,
//! select γ on the validation stream, learn the experiment stream
//! incrementally, and collect metrics, timings, and checkpoints.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};

use crate::classifier::{block_diagonal_labels, joint_fit, AnalyticClassifier, LabelBlock};
use crate::data::{
    build_task_stream_from_labels, generate_synthetic, load_dataset, load_labels, Manifest, Split,
    TaskStream,
};
use crate::encoder::{build_random_encoder, load_precomputed_features, standardize_rows};
use crate::error::{Error, Result};
use crate::eval::{task_accuracy, variance_ratio, AccuracyMatrix, VarianceRatio};
use crate::expansion::RandomProjection;
use crate::runner::checkpoint::{
    save_checkpoint, CheckpointContents, CheckpointMeta, EncoderDescriptor, ExpansionDescriptor,
    MemberMatrices,
};
use crate::runner::config::{DatasetSource, EncoderSource, ExperimentConfig};
use crate::runner::ensemble::{predict_from_probabilities, softmax, EnsembleMember};
use crate::runner::report::{
    aggregate_runs, emit_report, RunReport, RunResult, RunTiming, TimingReport, ValidationScore,
    REPORT_FORMAT_VERSION,
};

/// Recursive and joint solutions must agree to this relative Frobenius
/// distance for the oracle comparison to pass.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// Everything shared across run seeds: labels and the encoded feature
/// stacks. Encoding happens exactly once per experiment.
pub struct Prepared {
    pub train_labels: Vec<u32>,
    pub test_labels: Vec<u32>,
    pub num_classes: u32,
    pub train_stack: Array2<f32>,
    pub test_stack: Array2<f32>,
    pub encoder: EncoderDescriptor,
}

impl Prepared {
    pub fn d_stack(&self) -> usize {
        self.train_stack.ncols()
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let mut prepared = match (&config.dataset, &config.encoder) {
        (DatasetSource::Path(root), EncoderSource::Precomputed) => {
            let manifest = Manifest::load(root)?;
            let train = load_precomputed_features(root, Split::Train)?;
            let test = load_precomputed_features(root, Split::Test)?;
            Prepared {
                train_labels: load_labels(root, Split::Train)?,
                test_labels: load_labels(root, Split::Test)?,
                num_classes: manifest.num_classes,
                encoder: EncoderDescriptor::Precomputed {
                    feature_dim: train.d_stack(),
                },
                train_stack: train.features,
                test_stack: test.features,
            }
        }
        (source, EncoderSource::Random(spec)) => {
            let (train, test) = match source {
                DatasetSource::Synthetic(spec) => generate_synthetic(spec)?,
                DatasetSource::Path(root) => (
                    load_dataset(root, Split::Train)?,
                    load_dataset(root, Split::Test)?,
                ),
            };
            let encoder = build_random_encoder(spec, train.channels())?;
            let train_stack = encoder
                .encode(train.samples().view(), config.normalization)?
                .features;
            let test_stack = encoder
                .encode(test.samples().view(), config.normalization)?
                .features;
            Prepared {
                train_labels: train.labels().to_vec(),
                test_labels: test.labels().to_vec(),
                num_classes: train.num_classes(),
                train_stack,
                test_stack,
                encoder: EncoderDescriptor::Random {
                    spec: spec.clone(),
                    in_channels: train.channels(),
                },
            }
        }
        (DatasetSource::Synthetic(_), EncoderSource::Precomputed) => {
            return Err(Error::InvalidConfig(
                "precomputed features require a dataset path".into(),
            ));
        }
    };
    if prepared.train_labels.len() != prepared.train_stack.nrows() {
        return Err(Error::LengthMismatch {
            context: "train labels vs feature rows".into(),
            left: prepared.train_labels.len(),
            right: prepared.train_stack.nrows(),
        });
    }
    if prepared.test_labels.len() != prepared.test_stack.nrows() {
        return Err(Error::LengthMismatch {
            context: "test labels vs feature rows".into(),
            left: prepared.test_labels.len(),
            right: prepared.test_stack.nrows(),
        });
    }
    if config.standardize_pre_expansion {
        standardize_rows(&mut prepared.train_stack);
        standardize_rows(&mut prepared.test_stack);
    }
    Ok(prepared)
}

/// Per-seed working set: streams, member projections, and the full
/// train/test embeddings of every member.
struct RunInputs {
    validation: TaskStream,
    experiment: TaskStream,
    member_seeds: Vec<u64>,
    sigma: f64,
    train_embeddings: Vec<Array2<f64>>,
    test_embeddings: Vec<Array2<f64>>,
}

fn split_streams(stream: &TaskStream, validation_tasks: usize) -> Result<(TaskStream, TaskStream)> {
    if validation_tasks == 0 {
        // The whole stream serves as both validation and experiment
        // stream; the experiment repeats the winning γ's validation run.
        return Ok((stream.clone(), stream.clone()));
    }
    if validation_tasks >= stream.num_tasks() {
        return Err(Error::InvalidConfig(format!(
            "validation_tasks ({validation_tasks}) must leave at least one of {} tasks for the experiment",
            stream.num_tasks()
        )));
    }
    Ok((stream.prefix(validation_tasks), stream.suffix(validation_tasks)))
}

fn build_run_inputs(
    config: &ExperimentConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<RunInputs> {
    let stream = build_task_stream_from_labels(
        &prepared.train_labels,
        &prepared.test_labels,
        prepared.num_classes,
        config.classes_per_task,
        run_seed,
    )?;
    let (validation, experiment) = split_streams(&stream, config.validation_tasks)?;
    let sigma = config
        .sigma_e
        .unwrap_or_else(|| RandomProjection::default_sigma(prepared.d_stack()));
    let member_seeds: Vec<u64> = (0..config.ensemble_size as u64)
        .map(|i| run_seed.wrapping_add(i))
        .collect();
    let projections: Vec<RandomProjection> = member_seeds
        .iter()
        .map(|&s| RandomProjection::new(prepared.d_stack(), config.d_e, s, sigma))
        .collect::<Result<_>>()?;
    let train_embeddings: Vec<Array2<f64>> = projections
        .iter()
        .map(|p| p.expand(prepared.train_stack.view()))
        .collect::<Result<_>>()?;
    let test_embeddings: Vec<Array2<f64>> = projections
        .iter()
        .map(|p| p.expand(prepared.test_stack.view()))
        .collect::<Result<_>>()?;
    Ok(RunInputs {
        validation,
        experiment,
        member_seeds,
        sigma,
        train_embeddings,
        test_embeddings,
    })
}

struct StreamOutcome {
    matrix: AccuracyMatrix,
    classifiers: Vec<AnalyticClassifier>,
    task_seconds: Vec<f64>,
}

/// Learn a stream task by task. After each task the current ensemble is
/// evaluated on every task seen so far, yielding one accuracy-matrix
/// row. Timing covers only the classifier fitting, not evaluation.
fn run_stream(
    stream: &TaskStream,
    prepared: &Prepared,
    inputs: &RunInputs,
    gamma: f64,
    chunk_size: usize,
) -> Result<StreamOutcome> {
    if stream.num_tasks() == 0 {
        return Err(Error::InvalidConfig("task stream is empty".into()));
    }
    let mut classifiers: Vec<AnalyticClassifier> = Vec::new();
    let mut matrix = AccuracyMatrix::new();
    let mut task_seconds = Vec::with_capacity(stream.num_tasks());
    for (t, task) in stream.tasks.iter().enumerate() {
        let labels: Vec<u32> = task
            .train_indices
            .iter()
            .map(|&i| prepared.train_labels[i])
            .collect();
        let block = LabelBlock::from_labels(&labels, &task.class_set)?;
        let slices: Vec<Array2<f64>> = inputs
            .train_embeddings
            .iter()
            .map(|e| e.select(Axis(0), &task.train_indices))
            .collect();
        let start = Instant::now();
        if t == 0 {
            classifiers = slices
                .iter()
                .map(|s| AnalyticClassifier::fit_initial(s.view(), &block, gamma))
                .collect::<Result<_>>()?;
        } else {
            for (classifier, slice) in classifiers.iter_mut().zip(&slices) {
                classifier.update(slice.view(), &block, chunk_size)?;
            }
        }
        task_seconds.push(start.elapsed().as_secs_f64());

        let registry = classifiers[0].registry().to_vec();
        let mut row = Vec::with_capacity(t + 1);
        for past in &stream.tasks[..=t] {
            let truth: Vec<u32> = past
                .test_indices
                .iter()
                .map(|&i| prepared.test_labels[i])
                .collect();
            let probabilities: Vec<Array2<f64>> = classifiers
                .iter()
                .zip(&inputs.test_embeddings)
                .map(|(classifier, embeddings)| {
                    let slice = embeddings.select(Axis(0), &past.test_indices);
                    let scores = classifier.predict_scores(slice.view())?;
                    softmax(scores.view())
                })
                .collect::<Result<_>>()?;
            let predictions = predict_from_probabilities(&probabilities, &registry)?;
            row.push(task_accuracy(&predictions, &truth)?);
        }
        matrix.push_row(row)?;
    }
    Ok(StreamOutcome {
        matrix,
        classifiers,
        task_seconds,
    })
}

/// Run every grid value over the validation stream and keep the γ with
/// the highest final average accuracy; ties keep the earliest grid
/// entry.
fn select_gamma(
    config: &ExperimentConfig,
    prepared: &Prepared,
    inputs: &RunInputs,
) -> Result<(f64, Vec<ValidationScore>)> {
    let mut scores = Vec::with_capacity(config.gamma_grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &gamma in &config.gamma_grid {
        let outcome = run_stream(&inputs.validation, prepared, inputs, gamma, config.chunk_size)?;
        let last = outcome.matrix.num_tasks() - 1;
        let score = outcome.matrix.average_accuracy(last)?;
        scores.push(ValidationScore {
            gamma,
            final_average_accuracy: score,
        });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((gamma, score));
        }
    }
    let (selected, _) = best.expect("gamma_grid validated non-empty");
    Ok((selected, scores))
}

fn checkpoint_contents(
    config: &ExperimentConfig,
    prepared: &Prepared,
    inputs: &RunInputs,
    run_seed: u64,
    gamma: f64,
    classifiers: &[AnalyticClassifier],
) -> CheckpointContents {
    let members: Vec<MemberMatrices> = classifiers
        .iter()
        .map(|c| MemberMatrices {
            inverse_correlation: c.inverse_correlation().clone(),
            weights: c.weights().clone(),
        })
        .collect();
    CheckpointContents {
        meta: CheckpointMeta {
            run_seed,
            gamma,
            registry: classifiers[0].registry().to_vec(),
            tasks_seen: classifiers[0].tasks_seen(),
            normalization: config.normalization,
            standardize_pre_expansion: config.standardize_pre_expansion,
            encoder: prepared.encoder.clone(),
            expansion: ExpansionDescriptor {
                d_stack: prepared.d_stack(),
                d_e: config.d_e,
                sigma: inputs.sigma,
                member_seeds: inputs.member_seeds.clone(),
            },
            matrices: crate::runner::checkpoint::member_matrix_infos(&members),
        },
        members,
    }
}

fn run_single(
    config: &ExperimentConfig,
    prepared: &Prepared,
    run_seed: u64,
) -> Result<(RunResult, RunTiming, CheckpointContents)> {
    let run_start = Instant::now();
    let inputs = build_run_inputs(config, prepared, run_seed)?;
    let (selected_gamma, validation_scores) = select_gamma(config, prepared, &inputs)?;
    let outcome = run_stream(
        &inputs.experiment,
        prepared,
        &inputs,
        selected_gamma,
        config.chunk_size,
    )?;

    let last = outcome.matrix.num_tasks() - 1;
    let average_accuracy = outcome.matrix.average_accuracy(last)?;
    let forgetting = if last == 0 {
        None
    } else {
        Some(outcome.matrix.forgetting(last)?)
    };
    let (variance_ratio_stack, variance_ratio_embedding) =
        representation_ratios(prepared, &inputs)?;

    let contents = checkpoint_contents(
        config,
        prepared,
        &inputs,
        run_seed,
        selected_gamma,
        &outcome.classifiers,
    );
    let result = RunResult {
        seed: run_seed,
        selected_gamma,
        validation_scores,
        accuracy_matrix: outcome.matrix.rows().to_vec(),
        average_accuracy,
        forgetting,
        variance_ratio_stack,
        variance_ratio_embedding,
    };
    let timing = RunTiming {
        seed: run_seed,
        task_update_seconds: outcome.task_seconds,
        total_seconds: run_start.elapsed().as_secs_f64(),
    };
    Ok((result, timing, contents))
}

/// Class-separation ratios of the experiment stream's test data, in the
/// fused feature space and in member 0's embedding space.
fn representation_ratios(
    prepared: &Prepared,
    inputs: &RunInputs,
) -> Result<(VarianceRatio, VarianceRatio)> {
    let rows: Vec<usize> = inputs
        .experiment
        .tasks
        .iter()
        .flat_map(|t| t.test_indices.iter().copied())
        .collect();
    let labels: Vec<u32> = rows.iter().map(|&i| prepared.test_labels[i]).collect();
    let stack = prepared
        .test_stack
        .select(Axis(0), &rows)
        .mapv(|v| v as f64);
    let embedding = inputs.test_embeddings[0].select(Axis(0), &rows);
    Ok((
        variance_ratio(stack.view(), &labels)?,
        variance_ratio(embedding.view(), &labels)?,
    ))
}

pub struct ExperimentOutcome {
    pub report: RunReport,
    /// One checkpoint per run, in run_seeds order.
    pub checkpoints: Vec<CheckpointContents>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let prepared = prepare(config)?;
    let mut runs = Vec::with_capacity(config.run_seeds.len());
    let mut timings = Vec::with_capacity(config.run_seeds.len());
    let mut checkpoints = Vec::with_capacity(config.run_seeds.len());
    for &seed in &config.run_seeds {
        let (result, timing, contents) = run_single(config, &prepared, seed)?;
        runs.push(result);
        timings.push(timing);
        checkpoints.push(contents);
    }
    let aggregate = aggregate_runs(&runs)?;
    Ok(ExperimentOutcome {
        report: RunReport {
            format_version: REPORT_FORMAT_VERSION,
            config: config.clone(),
            runs,
            aggregate,
            timing: TimingReport { runs: timings },
        },
        checkpoints,
    })
}

/// Run the experiment and write report.json, summary.csv, and
/// checkpoints/<run_seed>.ckpt under `out_dir`.
pub fn execute_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let outcome = run_experiment(config)?;
    emit_report(&outcome.report, out_dir)?;
    let checkpoint_dir = out_dir.join("checkpoints");
    for contents in &outcome.checkpoints {
        let path = checkpoint_dir.join(format!("{}.ckpt", contents.meta.run_seed));
        save_checkpoint(contents, &path)?;
    }
    Ok(outcome)
}

/// Rebuild ensemble members from a loaded checkpoint; projections are
/// regenerated from their seeds and must match the persisted shapes.
pub fn restore_members(contents: &CheckpointContents) -> Result<Vec<EnsembleMember>> {
    let meta = &contents.meta;
    if contents.members.len() != meta.expansion.member_seeds.len() {
        return Err(Error::LengthMismatch {
            context: "checkpoint members vs member seeds".into(),
            left: contents.members.len(),
            right: meta.expansion.member_seeds.len(),
        });
    }
    meta.expansion
        .member_seeds
        .iter()
        .zip(&contents.members)
        .map(|(&seed, matrices)| {
            let projection = RandomProjection::new(
                meta.expansion.d_stack,
                meta.expansion.d_e,
                seed,
                meta.expansion.sigma,
            )?;
            let classifier = AnalyticClassifier::from_parts(
                matrices.weights.clone(),
                matrices.inverse_correlation.clone(),
                meta.gamma,
                meta.registry.clone(),
                meta.tasks_seen,
            )?;
            Ok(EnsembleMember {
                projection,
                classifier,
            })
        })
        .collect()
}

/// One recursive-vs-joint comparison: the incrementally learned weights
/// against a single ridge solve over the stacked experiment stream.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub run_seed: u64,
    pub member_seed: u64,
    pub gamma: f64,
    /// Relative Frobenius distance between the two weight matrices.
    pub weight_difference: f64,
    /// Fraction of experiment test samples where both models predict the
    /// same class.
    pub prediction_agreement: f64,
}

impl OracleCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.weight_difference <= tolerance && self.prediction_agreement == 1.0
    }
}

fn argmax_labels(scores: ArrayView2<'_, f64>, registry: &[u32]) -> Vec<u32> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            registry[best]
        })
        .collect()
}

/// Re-run each configured seed and compare every member's incremental
/// solution against the joint ridge solve over the same data.
pub fn joint_comparison(config: &ExperimentConfig) -> Result<Vec<OracleCheck>> {
    let prepared = prepare(config)?;
    let mut checks = Vec::new();
    for &run_seed in &config.run_seeds {
        let inputs = build_run_inputs(config, &prepared, run_seed)?;
        let (gamma, _) = select_gamma(config, &prepared, &inputs)?;
        let outcome = run_stream(
            &inputs.experiment,
            &prepared,
            &inputs,
            gamma,
            config.chunk_size,
        )?;

        let blocks: Vec<LabelBlock> = inputs
            .experiment
            .tasks
            .iter()
            .map(|task| {
                let labels: Vec<u32> = task
                    .train_indices
                    .iter()
                    .map(|&i| prepared.train_labels[i])
                    .collect();
                LabelBlock::from_labels(&labels, &task.class_set)
            })
            .collect::<Result<_>>()?;
        let (stacked_labels, classes) = block_diagonal_labels(&blocks)?;
        let train_order: Vec<usize> = inputs
            .experiment
            .tasks
            .iter()
            .flat_map(|t| t.train_indices.iter().copied())
            .collect();
        let test_order: Vec<usize> = inputs
            .experiment
            .tasks
            .iter()
            .flat_map(|t| t.test_indices.iter().copied())
            .collect();

        for (member, classifier) in outcome.classifiers.iter().enumerate() {
            if classifier.registry() != classes {
                return Err(Error::RegistryMismatch);
            }
            let train_embeddings =
                inputs.train_embeddings[member].select(Axis(0), &train_order);
            let joint_weights =
                joint_fit(train_embeddings.view(), stacked_labels.view(), gamma)?;
            let weight_difference = crate::linalg::relative_frobenius_diff(
                classifier.weights().view(),
                joint_weights.view(),
            );

            let test_embeddings = inputs.test_embeddings[member].select(Axis(0), &test_order);
            let recursive_predictions = classifier.predict_labels(test_embeddings.view())?;
            let joint_scores = test_embeddings.dot(&joint_weights);
            let joint_predictions = argmax_labels(joint_scores.view(), classes.as_slice());
            let agreeing = recursive_predictions
                .iter()
                .zip(&joint_predictions)
                .filter(|(a, b)| a == b)
                .count();
            checks.push(OracleCheck {
                run_seed,
                member_seed: inputs.member_seeds[member],
                gamma,
                weight_difference,
                prediction_agreement: agreeing as f64 / recursive_predictions.len() as f64,
            });
        }
    }
    Ok(checks)
}
