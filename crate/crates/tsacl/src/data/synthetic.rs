//! Seeded synthetic generator producing classes with per-subject
//! sub-clusters: every sample is a smooth class template plus a scaled
//! per-(class, subject) offset signal plus i.i.d. noise.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Split, TimeSeriesDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: u32,
    pub subjects_per_class: usize,
    pub train_samples_per_subject: usize,
    pub test_samples_per_subject: usize,
    pub channels: usize,
    pub length: usize,
    /// Seeds the class templates only, so class identities survive a
    /// change of `seed`.
    pub template_seed: u64,
    /// σ applied to the per-(class, subject) offset signal.
    pub subject_scale: f64,
    /// σ applied to the per-sample i.i.d. noise.
    pub noise_scale: f64,
    /// Seeds subject offsets and sample noise.
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn load(path: &std::path::Path) -> Result<SyntheticSpec> {
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let spec: SyntheticSpec = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_classes", self.num_classes as usize),
            ("subjects_per_class", self.subjects_per_class),
            ("train_samples_per_subject", self.train_samples_per_subject),
            ("test_samples_per_subject", self.test_samples_per_subject),
            ("channels", self.channels),
            ("length", self.length),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidSpec(format!("{name} must be positive")));
            }
        }
        for (name, value) in [
            ("subject_scale", self.subject_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// One channel's worth of summed sinusoids.
struct Sinusoids {
    /// (amplitude, frequency in cycles over the full length, phase)
    terms: Vec<(f64, f64, f64)>,
}

impl Sinusoids {
    fn eval(&self, l: usize, length: usize) -> f64 {
        let x = l as f64 / length as f64;
        self.terms
            .iter()
            .map(|(a, f, p)| a * (std::f64::consts::TAU * f * x + p).sin())
            .sum()
    }
}

fn draw_template(rng: &mut ChaCha8Rng) -> Sinusoids {
    let terms = (0..3)
        .map(|_| {
            let amp = rng.random_range(0.5..1.5);
            let freq = rng.random_range(1.0..8.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (amp, freq, phase)
        })
        .collect();
    Sinusoids { terms }
}

fn draw_offset(rng: &mut ChaCha8Rng) -> Sinusoids {
    let terms = (0..2)
        .map(|_| {
            let coeff: f64 = StandardNormal.sample(rng);
            let freq = rng.random_range(0.5..2.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (coeff, freq, phase)
        })
        .collect();
    Sinusoids { terms }
}

fn render(signals: &[Sinusoids], channels: usize, length: usize) -> Array2<f64> {
    Array2::from_shape_fn((channels, length), |(c, l)| signals[c].eval(l, length))
}

/// Generate (train, test). Deterministic in the spec: the template stream
/// and the offset/noise stream are drawn in a fixed order, and every draw
/// happens even at zero scale so the scales never shift the streams.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    spec.validate()?;
    let classes = spec.num_classes as usize;
    let (c, l) = (spec.channels, spec.length);

    let mut template_rng = ChaCha8Rng::seed_from_u64(spec.template_seed);
    let templates: Vec<Array2<f64>> = (0..classes)
        .map(|_| {
            let per_channel: Vec<Sinusoids> =
                (0..c).map(|_| draw_template(&mut template_rng)).collect();
            render(&per_channel, c, l)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offsets: Vec<Vec<Array2<f64>>> = (0..classes)
        .map(|_| {
            (0..spec.subjects_per_class)
                .map(|_| {
                    let per_channel: Vec<Sinusoids> =
                        (0..c).map(|_| draw_offset(&mut rng)).collect();
                    render(&per_channel, c, l)
                })
                .collect()
        })
        .collect();

    let mut build_split = |per_subject: usize, split: Split| -> Result<TimeSeriesDataset> {
        let n = classes * spec.subjects_per_class * per_subject;
        let mut samples = Array3::<f32>::zeros((n, c, l));
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for class in 0..classes {
            for offset in &offsets[class] {
                for _ in 0..per_subject {
                    let template = &templates[class];
                    for ch in 0..c {
                        for t in 0..l {
                            let noise: f64 = StandardNormal.sample(&mut rng);
                            let value = template[(ch, t)]
                                + spec.subject_scale * offset[(ch, t)]
                                + spec.noise_scale * noise;
                            samples[(row, ch, t)] = value as f32;
                        }
                    }
                    labels.push(class as u32);
                    row += 1;
                }
            }
        }
        TimeSeriesDataset::new(samples, labels, spec.num_classes, split)
    };

    let train = build_split(spec.train_samples_per_subject, Split::Train)?;
    let test = build_split(spec.test_samples_per_subject, Split::Test)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            num_classes: 4,
            subjects_per_class: 3,
            train_samples_per_subject: 5,
            test_samples_per_subject: 2,
            channels: 2,
            length: 32,
            template_seed: 11,
            subject_scale: 1.0,
            noise_scale: 0.1,
            seed: 17,
        }
    }

    #[test]
    fn same_spec_yields_identical_datasets() {
        let spec = base_spec();
        let (train_a, test_a) = generate_synthetic(&spec).unwrap();
        let (train_b, test_b) = generate_synthetic(&spec).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
    }

    #[test]
    fn shapes_and_labels_follow_the_spec() {
        let spec = base_spec();
        let (train, test) = generate_synthetic(&spec).unwrap();
        assert_eq!(train.num_samples(), 4 * 3 * 5);
        assert_eq!(test.num_samples(), 4 * 3 * 2);
        assert_eq!(train.channels(), 2);
        assert_eq!(train.length(), 32);
        for split in [&train, &test] {
            for class in 0..4u32 {
                assert!(split.labels().contains(&class));
            }
        }
        // Class-major layout: labels are non-decreasing.
        assert!(train.labels().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_scales_collapse_each_class_to_its_template() {
        let spec = SyntheticSpec {
            subject_scale: 0.0,
            noise_scale: 0.0,
            ..base_spec()
        };
        let (train, _) = generate_synthetic(&spec).unwrap();
        let per_class = 3 * 5;
        for class in 0..4 {
            let first = train.samples().index_axis(ndarray::Axis(0), class * per_class);
            for k in 1..per_class {
                let other = train
                    .samples()
                    .index_axis(ndarray::Axis(0), class * per_class + k);
                assert_eq!(first, other, "class {class} sample {k} differs");
            }
        }
    }

    fn distance(a: ndarray::ArrayView2<'_, f32>, b: ndarray::ArrayView2<'_, f32>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn subject_offsets_create_sub_clusters() {
        let spec = SyntheticSpec {
            num_classes: 8,
            subjects_per_class: 4,
            train_samples_per_subject: 6,
            test_samples_per_subject: 2,
            channels: 3,
            length: 32,
            template_seed: 5,
            subject_scale: 1.0,
            noise_scale: 0.1,
            seed: 6,
        };
        let (train, _) = generate_synthetic(&spec).unwrap();
        let per_subject = 6;
        let per_class = 4 * per_subject;
        for class in 0..8 {
            let sample = |subject: usize, k: usize| {
                train.samples().index_axis(
                    ndarray::Axis(0),
                    class * per_class + subject * per_subject + k,
                )
            };
            let mut within = (0.0, 0usize);
            let mut cross = (0.0, 0usize);
            for s1 in 0..4 {
                for s2 in 0..4 {
                    for k1 in 0..per_subject {
                        for k2 in 0..per_subject {
                            if s1 == s2 && k1 >= k2 {
                                continue;
                            }
                            let d = distance(sample(s1, k1), sample(s2, k2));
                            if s1 == s2 {
                                within = (within.0 + d, within.1 + 1);
                            } else {
                                cross = (cross.0 + d, cross.1 + 1);
                            }
                        }
                    }
                }
            }
            let mean_within = within.0 / within.1 as f64;
            let mean_cross = cross.0 / cross.1 as f64;
            assert!(
                mean_within < mean_cross,
                "class {class}: within {mean_within} !< cross {mean_cross}"
            );
        }
    }

    #[test]
    fn test_split_shares_the_train_subject_populations() {
        let spec = base_spec();
        let (train, test) = generate_synthetic(&spec).unwrap();
        // Test samples of (class 0, subject 0) sit nearer to that subject's
        // train samples than to other subjects' train samples.
        let test_sample = test.samples().index_axis(ndarray::Axis(0), 0);
        let per_subject = 5;
        let mut own = f64::MAX;
        let mut other = f64::MAX;
        for subject in 0..3 {
            for k in 0..per_subject {
                let d = distance(
                    test_sample,
                    train
                        .samples()
                        .index_axis(ndarray::Axis(0), subject * per_subject + k),
                );
                if subject == 0 {
                    own = own.min(d);
                } else {
                    other = other.min(d);
                }
            }
        }
        assert!(own < other, "own-subject distance {own} !< {other}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = base_spec();
        spec.length = 0;
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = base_spec();
        spec.noise_scale = -0.5;
        assert!(generate_synthetic(&spec).is_err());
        let mut spec = base_spec();
        spec.subject_scale = f64::NAN;
        assert!(generate_synthetic(&spec).is_err());
    }
}
