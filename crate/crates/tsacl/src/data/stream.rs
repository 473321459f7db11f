//! Class-incremental task streams: a seeded shuffle of the class list,
//! partitioned into fixed-width tasks with pairwise-disjoint class sets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub task_index: usize,
    /// Global class ids in shuffled order; columns of the task's label
    /// block follow this order.
    pub class_set: Vec<u32>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskStream {
    pub tasks: Vec<TaskSpec>,
}

impl TaskStream {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Tasks `from..` as a stream of their own, re-indexed from zero.
    pub fn suffix(&self, from: usize) -> TaskStream {
        TaskStream {
            tasks: self.tasks[from..]
                .iter()
                .enumerate()
                .map(|(i, t)| TaskSpec {
                    task_index: i,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// Tasks `..upto` as a stream of their own.
    pub fn prefix(&self, upto: usize) -> TaskStream {
        TaskStream {
            tasks: self.tasks[..upto].to_vec(),
        }
    }
}

/// Shuffle all classes with `shuffle_seed`, split them into consecutive
/// groups of `classes_per_task`, and collect each group's sample indices
/// from both splits.
pub fn build_task_stream(
    train: &TimeSeriesDataset,
    test: &TimeSeriesDataset,
    classes_per_task: usize,
    shuffle_seed: u64,
) -> Result<TaskStream> {
    if train.num_classes() != test.num_classes() {
        return Err(Error::InvalidSpec(
            "train and test splits disagree on num_classes".into(),
        ));
    }
    build_task_stream_from_labels(
        train.labels(),
        test.labels(),
        train.num_classes(),
        classes_per_task,
        shuffle_seed,
    )
}

/// Label-level variant for feature-only datasets where no raw tensors
/// exist.
pub fn build_task_stream_from_labels(
    train_labels: &[u32],
    test_labels: &[u32],
    num_classes: u32,
    classes_per_task: usize,
    shuffle_seed: u64,
) -> Result<TaskStream> {
    let num_classes = num_classes as usize;
    if classes_per_task == 0 {
        return Err(Error::InvalidSpec("classes_per_task must be positive".into()));
    }
    for (index, &label) in train_labels.iter().chain(test_labels).enumerate() {
        if label as usize >= num_classes {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                num_classes: num_classes as u32,
            });
        }
    }
    if !num_classes.is_multiple_of(classes_per_task) {
        return Err(Error::IndivisibleClasses {
            num_classes,
            classes_per_task,
        });
    }

    let mut classes: Vec<u32> = (0..num_classes as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    classes.shuffle(&mut rng);

    // class id -> task position
    let mut task_of = vec![0usize; num_classes];
    for (pos, &class) in classes.iter().enumerate() {
        task_of[class as usize] = pos / classes_per_task;
    }

    let num_tasks = num_classes / classes_per_task;
    let mut tasks: Vec<TaskSpec> = (0..num_tasks)
        .map(|t| TaskSpec {
            task_index: t,
            class_set: classes[t * classes_per_task..(t + 1) * classes_per_task].to_vec(),
            train_indices: Vec::new(),
            test_indices: Vec::new(),
        })
        .collect();
    for (i, &label) in train_labels.iter().enumerate() {
        tasks[task_of[label as usize]].train_indices.push(i);
    }
    for (i, &label) in test_labels.iter().enumerate() {
        tasks[task_of[label as usize]].test_indices.push(i);
    }
    Ok(TaskStream { tasks })
}
