use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::fit;
use super::{extract_descriptors, DescriptorSet, PipelineError, RunConfig};
use crate::bof::CODEBOOK_SIZES;
use crate::tensorio::{DatasetManifest, Label};

/// One test-sample outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub sample_id: String,
    pub truth: Label,
    pub predicted: Label,
}

/// Outcome of one fold. `confusion[t][p]` counts samples of class
/// `classes[t]` predicted as `classes[p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub classes: Vec<Label>,
    pub test_subjects: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

impl FoldReport {
    /// Builds the confusion matrix from `predictions`.
    pub fn new(fold: usize, classes: Vec<Label>, test_subjects: Vec<String>, predictions: Vec<Prediction>) -> Self {
        let k = classes.len();
        let mut confusion = vec![vec![0; k]; k];
        let pos = |l: Label| classes.iter().position(|&c| c == l).expect("label in class list");
        for p in &predictions {
            confusion[pos(p.truth)][pos(p.predicted)] += 1;
        }
        Self {
            fold,
            classes,
            test_subjects,
            confusion,
            predictions,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// Trace over total; 0 for an empty fold.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Recall per class, for classes with at least one test sample.
    pub fn per_class_accuracy(&self) -> BTreeMap<Label, f64> {
        per_class(&self.classes, &self.confusion)
    }
}

fn per_class(classes: &[Label], confusion: &[Vec<usize>]) -> BTreeMap<Label, f64> {
    classes
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| {
            let n: usize = confusion[i].iter().sum();
            (n > 0).then(|| (l, confusion[i][i] as f64 / n as f64))
        })
        .collect()
}

/// All folds of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub folds: Vec<FoldReport>,
}

impl CvResult {
    /// Unweighted mean of the fold accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        if self.folds.is_empty() {
            return 0.0;
        }
        self.folds.iter().map(FoldReport::accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn classes(&self) -> Vec<Label> {
        self.folds.first().map(|f| f.classes.clone()).unwrap_or_default()
    }

    /// Sum of the fold confusion matrices.
    pub fn pooled_confusion(&self) -> Vec<Vec<usize>> {
        let k = self.classes().len();
        let mut out = vec![vec![0; k]; k];
        for f in &self.folds {
            for (row, frow) in out.iter_mut().zip(&f.confusion) {
                for (v, fv) in row.iter_mut().zip(frow) {
                    *v += fv;
                }
            }
        }
        out
    }

    /// Per-class recall over all folds together.
    pub fn per_class_accuracy(&self) -> BTreeMap<Label, f64> {
        per_class(&self.classes(), &self.pooled_confusion())
    }
}

/// Test subjects per fold: subjects are sorted, shuffled with `seed` and
/// dealt round-robin.
pub fn assign_folds(subjects: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut unique: Vec<String> = subjects.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if folds < 2 || unique.len() < folds {
        return Err(PipelineError::TooFewSubjects {
            subjects: unique.len(),
            folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF01D_5EED);
    unique.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, s) in unique.into_iter().enumerate() {
        out[i % folds].push(s);
    }
    for f in &mut out {
        f.sort();
    }
    Ok(out)
}

/// Subject-disjoint k-fold cross-validation from raw artifacts.
pub fn run_cv(manifest: &DatasetManifest, config: &RunConfig) -> Result<CvResult, PipelineError> {
    let descriptors = extract_descriptors(manifest, config)?;
    run_cv_on(manifest, &descriptors, config)
}

/// Cross-validation over precomputed descriptors. Codebooks and the SVM
/// are trained per fold on training subjects only.
pub fn run_cv_on(
    manifest: &DatasetManifest,
    descriptors: &DescriptorSet,
    config: &RunConfig,
) -> Result<CvResult, PipelineError> {
    config.validate()?;
    if descriptors.streams != config.streams || descriptors.per_sample.len() != manifest.len() {
        return Err(PipelineError::BadConfig(
            "descriptor set does not match the manifest and stream list".into(),
        ));
    }
    let subjects: Vec<String> = manifest.entries.iter().map(|e| e.subject_id.clone()).collect();
    let fold_subjects = assign_folds(&subjects, config.folds, config.seed)?;
    let classes = manifest.classes();
    let folds = fold_subjects
        .par_iter()
        .enumerate()
        .map(|(fold, test_subjects)| {
            let test_set: BTreeSet<&String> = test_subjects.iter().collect();
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..manifest.len()).partition(|&i| test_set.contains(&manifest.entries[i].subject_id));
            let train_subjects: BTreeSet<&String> = train.iter().map(|&i| &manifest.entries[i].subject_id).collect();
            assert!(
                train_subjects.is_disjoint(&test_set),
                "fold {fold}: a subject appears in both train and test"
            );
            let model = fit(manifest, descriptors, &train, config)?;
            let predictions = test
                .iter()
                .map(|&i| {
                    let e = &manifest.entries[i];
                    Ok(Prediction {
                        sample_id: e.sample_id.clone(),
                        truth: e.label,
                        predicted: model.predict(&descriptors.per_sample[i])?,
                    })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            Ok(FoldReport::new(
                fold,
                classes.clone(),
                test_subjects.clone(),
                predictions,
            ))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(CvResult { folds })
}

/// One cross-validation per codebook size, everything else fixed.
pub fn sweep_codebooks(
    manifest: &DatasetManifest,
    config: &RunConfig,
    sizes: &[usize],
) -> Result<Vec<(usize, f64)>, PipelineError> {
    let descriptors = extract_descriptors(manifest, config)?;
    sweep_codebooks_on(manifest, &descriptors, config, sizes)
}

pub fn sweep_codebooks_on(
    manifest: &DatasetManifest,
    descriptors: &DescriptorSet,
    config: &RunConfig,
    sizes: &[usize],
) -> Result<Vec<(usize, f64)>, PipelineError> {
    if sizes.is_empty() {
        return Err(PipelineError::BadConfig("no codebook sizes to sweep".into()));
    }
    if let Some(s) = sizes.iter().find(|s| !CODEBOOK_SIZES.contains(s)) {
        return Err(PipelineError::BadConfig(format!(
            "codebook size {s} is not one of {CODEBOOK_SIZES:?}"
        )));
    }
    sizes
        .iter()
        .map(|&size| {
            let cfg = RunConfig {
                codebook_size: size,
                ..config.clone()
            };
            Ok((size, run_cv_on(manifest, descriptors, &cfg)?.mean_accuracy()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_subjects_ten_folds() {
        let subjects: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let folds = assign_folds(&subjects, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        let all: BTreeSet<_> = folds.iter().flatten().collect();
        assert_eq!(all.len(), 10);
        assert!(matches!(
            assign_folds(&subjects, 11, 1),
            Err(PipelineError::TooFewSubjects {
                subjects: 10,
                folds: 11
            })
        ));
    }

    #[test]
    fn folds_deterministic_and_balanced() {
        let subjects: Vec<String> = (0..30).flat_map(|i| vec![format!("p{i:02}"); 6]).collect();
        let a = assign_folds(&subjects, 10, 42).unwrap();
        assert_eq!(a, assign_folds(&subjects, 10, 42).unwrap());
        assert!(a.iter().all(|f| f.len() == 3));
    }

    #[test]
    fn report_counts() {
        let classes = vec![Label::Happy, Label::Sad];
        let preds = vec![
            Prediction {
                sample_id: "a".into(),
                truth: Label::Happy,
                predicted: Label::Happy,
            },
            Prediction {
                sample_id: "b".into(),
                truth: Label::Sad,
                predicted: Label::Happy,
            },
            Prediction {
                sample_id: "c".into(),
                truth: Label::Sad,
                predicted: Label::Sad,
            },
        ];
        let r = FoldReport::new(0, classes, vec!["p".into()], preds);
        assert_eq!(r.confusion, vec![vec![1, 0], vec![1, 1]]);
        assert!((r.accuracy() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class_accuracy()[&Label::Sad], 0.5);
    }
}
