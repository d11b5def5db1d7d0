//! Synthetic multi-domain benchmark generator: Gaussian category blobs
//! for the source, and target domains drawing from category subsets with
//! their own orthogonal transform, translation, and noise. Source and
//! target distributions differ whenever a shift is configured, and
//! distinct targets get distinct shifts.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::linalg;

/// How a target domain's samples are rotated relative to the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RotationSpec {
    /// No rotation.
    #[default]
    Identity,
    /// Givens rotations by these angles (radians) on coordinate pairs
    /// (0,1), (2,3), ...
    Angles(Vec<f64>),
    /// A seeded random orthogonal matrix.
    Random,
}

/// Domain shift applied to one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    pub rotation: RotationSpec,
    /// Magnitude of a seeded random translation vector.
    pub translation: f64,
    /// Per-coordinate Gaussian noise std for the target's samples.
    pub noise_std: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            rotation: RotationSpec::Identity,
            translation: 0.0,
            noise_std: 1.0,
        }
    }
}

/// One target domain of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTarget {
    /// Source category ids this target draws from (subset of
    /// 0..source_categories).
    pub categories: Vec<usize>,
    pub samples_per_category: usize,
    #[serde(default)]
    pub shift: ShiftSpec,
}

/// Full benchmark description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Ambient feature dimension.
    pub dim: usize,
    pub source_categories: usize,
    pub source_samples_per_category: usize,
    /// Source per-coordinate noise std; category mean separation is at
    /// least 6x this value.
    #[serde(default = "default_noise")]
    pub source_noise_std: f64,
    pub targets: Vec<SyntheticTarget>,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}

/// Generated benchmark: labeled source plus targets whose ground-truth
/// labels are for scoring only.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub source: Dataset,
    pub targets: Vec<Dataset>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if self.source_categories < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 source categories".into(),
            ));
        }
        if self.source_samples_per_category == 0 {
            return Err(Error::InvalidArgument(
                "source_samples_per_category must be >= 1".into(),
            ));
        }
        if !(self.source_noise_std > 0.0) {
            return Err(Error::InvalidArgument("source noise std must be > 0".into()));
        }
        for (j, t) in self.targets.iter().enumerate() {
            if t.categories.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "target {j} has an empty category subset"
                )));
            }
            if t.samples_per_category == 0 {
                return Err(Error::InvalidArgument(format!(
                    "target {j} has zero samples per category"
                )));
            }
            let mut seen = vec![false; self.source_categories];
            for &c in &t.categories {
                if c >= self.source_categories {
                    return Err(Error::InvalidArgument(format!(
                        "target {j} references category {c}, source has {}",
                        self.source_categories
                    )));
                }
                if seen[c] {
                    return Err(Error::InvalidArgument(format!(
                        "target {j} lists category {c} twice"
                    )));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }
}

fn randn_vec(rng: &mut impl Rng, d: usize) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal))
}

/// Category means with pairwise separation >= 6x the source noise std:
/// sampled on a sphere and grown until the gap holds.
fn category_means(rng: &mut impl Rng, spec: &SyntheticSpec) -> Vec<Array1<f64>> {
    let min_sep = 6.0 * spec.source_noise_std;
    let mut radius = min_sep * (spec.source_categories as f64).sqrt();
    loop {
        let means: Vec<Array1<f64>> = (0..spec.source_categories)
            .map(|_| {
                let v = randn_vec(rng, spec.dim);
                let norm = v.dot(&v).sqrt().max(1e-12);
                v * (radius / norm)
            })
            .collect();
        let ok = (0..means.len()).all(|a| {
            ((a + 1)..means.len()).all(|b| {
                let diff = &means[a] - &means[b];
                diff.dot(&diff).sqrt() >= min_sep
            })
        });
        if ok {
            return means;
        }
        radius *= 1.5;
    }
}

fn rotation_matrix(rng: &mut impl Rng, spec: &RotationSpec, dim: usize) -> Result<Array2<f64>> {
    match spec {
        RotationSpec::Identity => Ok(Array2::eye(dim)),
        RotationSpec::Angles(angles) => {
            let mut q = Array2::eye(dim);
            for (pair, &angle) in angles.iter().enumerate() {
                let (i, j) = (2 * pair, 2 * pair + 1);
                if j >= dim {
                    return Err(Error::InvalidArgument(format!(
                        "rotation pair ({i},{j}) exceeds dimension {dim}"
                    )));
                }
                let (c, s) = (angle.cos(), angle.sin());
                let mut g = Array2::eye(dim);
                g[[i, i]] = c;
                g[[j, j]] = c;
                g[[i, j]] = -s;
                g[[j, i]] = s;
                q = g.dot(&q);
            }
            Ok(q)
        }
        RotationSpec::Random => {
            let mut m = Array2::from_shape_fn((dim, dim), |_| {
                rng.sample::<f64, _>(StandardNormal)
            });
            linalg::orthonormalize_columns(&mut m)?;
            Ok(m)
        }
    }
}

/// Generate the benchmark. Target ground-truth labels are re-indexed to
/// the position of each category in the target's subset list.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = category_means(&mut rng, spec);

    let n_source = spec.source_categories * spec.source_samples_per_category;
    let mut source_x = Array2::zeros((spec.dim, n_source));
    let mut source_y = Vec::with_capacity(n_source);
    let mut col = 0;
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..spec.source_samples_per_category {
            let sample = mean + &(randn_vec(&mut rng, spec.dim) * spec.source_noise_std);
            source_x.column_mut(col).assign(&sample);
            source_y.push(c);
            col += 1;
        }
    }

    let mut targets = Vec::with_capacity(spec.targets.len());
    for target in &spec.targets {
        let q = rotation_matrix(&mut rng, &target.shift.rotation, spec.dim)?;
        let translation = if target.shift.translation > 0.0 {
            let dir = randn_vec(&mut rng, spec.dim);
            let norm = dir.dot(&dir).sqrt().max(1e-12);
            dir * (target.shift.translation / norm)
        } else {
            Array1::zeros(spec.dim)
        };
        let n = target.categories.len() * target.samples_per_category;
        let mut x = Array2::zeros((spec.dim, n));
        let mut y = Vec::with_capacity(n);
        let mut col = 0;
        for (local, &c) in target.categories.iter().enumerate() {
            for _ in 0..target.samples_per_category {
                let clean = &means[c] + &(randn_vec(&mut rng, spec.dim) * target.shift.noise_std);
                let shifted = q.dot(&clean) + &translation;
                x.column_mut(col).assign(&shifted);
                y.push(local);
                col += 1;
            }
        }
        targets.push(Dataset {
            features: x,
            labels: Some(y),
        });
    }

    Ok(SyntheticData {
        source: Dataset {
            features: source_x,
            labels: Some(source_y),
        },
        targets,
    })
}
