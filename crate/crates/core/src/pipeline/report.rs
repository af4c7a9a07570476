use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CvResult, FoldReport, PipelineError, Prediction};
use crate::tensorio::Label;

/// Machine-readable, tab-separated summary of a cross-validation run
/// (tabs shown as spaces below).
///
/// ```text
/// classes  HA  SA  ...
/// fold  0  p03,p17,p22
/// prediction  0  s0001  HA  HA
/// confusion  0  2,0,1,...
/// mean_accuracy  0.9166666666666666
/// per_class  HA  0.95
/// ```
///
/// Floats use Rust's shortest round-trip formatting, so identical runs
/// produce byte-identical files.
pub fn summary_text(result: &CvResult) -> String {
    let mut out = String::from("# facecov cross-validation summary\n");
    let classes: Vec<&str> = result.classes().iter().map(|l| l.code()).collect();
    let _ = writeln!(out, "classes\t{}", classes.join("\t"));
    for f in &result.folds {
        let _ = writeln!(out, "fold\t{}\t{}", f.fold, f.test_subjects.join(","));
        for p in &f.predictions {
            let _ = writeln!(
                out,
                "prediction\t{}\t{}\t{}\t{}",
                f.fold, p.sample_id, p.truth, p.predicted
            );
        }
        for row in &f.confusion {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "confusion\t{}\t{}", f.fold, cells.join(","));
        }
    }
    let _ = writeln!(out, "mean_accuracy\t{:?}", result.mean_accuracy());
    for (label, acc) in result.per_class_accuracy() {
        let _ = writeln!(out, "per_class\t{label}\t{acc:?}");
    }
    out
}

pub fn write_summary(result: &CvResult, path: &Path) -> Result<(), PipelineError> {
    fs::write(path, summary_text(result)).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct PendingFold {
    fold: usize,
    subjects: Vec<String>,
    predictions: Vec<Prediction>,
    confusion: Vec<Vec<usize>>,
}

/// Inverse of [`summary_text`]. Confusion matrices and the derived
/// accuracies are recomputed from the predictions and must match the
/// recorded values exactly.
pub fn parse_summary(text: &str) -> Result<CvResult, PipelineError> {
    let mut classes: Option<Vec<Label>> = None;
    let mut pending: Vec<PendingFold> = Vec::new();
    let mut mean: Option<(usize, f64)> = None;
    let mut per_class: Vec<(usize, Label, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |message: String| PipelineError::BadSummary { line, message };
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        let label = |s: &str| s.parse::<Label>().map_err(|s| bad(format!("unknown label {s:?}")));
        let index = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer {s:?}")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let current = |pending: &mut Vec<PendingFold>, fold: usize| -> Result<usize, PipelineError> {
            match pending.last() {
                Some(p) if p.fold == fold => Ok(pending.len() - 1),
                _ => Err(bad(format!("fold {fold} record outside its fold block"))),
            }
        };
        match fields[0] {
            "classes" => {
                if classes.is_some() {
                    return Err(bad("second classes line".into()));
                }
                classes = Some(fields[1..].iter().map(|s| label(s)).collect::<Result<_, _>>()?);
            }
            "fold" if fields.len() == 3 => {
                let fold = index(fields[1])?;
                if fold != pending.len() {
                    return Err(bad(format!("expected fold {}, found {fold}", pending.len())));
                }
                let subjects = if fields[2].is_empty() {
                    Vec::new()
                } else {
                    fields[2].split(',').map(str::to_string).collect()
                };
                pending.push(PendingFold {
                    fold,
                    subjects,
                    predictions: Vec::new(),
                    confusion: Vec::new(),
                });
            }
            "prediction" if fields.len() == 5 => {
                let at = current(&mut pending, index(fields[1])?)?;
                pending[at].predictions.push(Prediction {
                    sample_id: fields[2].to_string(),
                    truth: label(fields[3])?,
                    predicted: label(fields[4])?,
                });
            }
            "confusion" if fields.len() == 3 => {
                let at = current(&mut pending, index(fields[1])?)?;
                let row = fields[2].split(',').map(index).collect::<Result<_, _>>()?;
                pending[at].confusion.push(row);
            }
            "mean_accuracy" if fields.len() == 2 => mean = Some((line, float(fields[1])?)),
            "per_class" if fields.len() == 3 => per_class.push((line, label(fields[1])?, float(fields[2])?)),
            other => {
                return Err(bad(format!(
                    "unrecognized record `{other}` with {} fields",
                    fields.len()
                )))
            }
        }
    }

    let classes = classes.ok_or(PipelineError::BadSummary {
        line: 0,
        message: "missing classes line".into(),
    })?;
    let mut folds = Vec::with_capacity(pending.len());
    for p in pending {
        if let Some(pr) = p
            .predictions
            .iter()
            .find(|pr| !classes.contains(&pr.truth) || !classes.contains(&pr.predicted))
        {
            return Err(PipelineError::BadSummary {
                line: 0,
                message: format!("prediction for {} uses a label outside the class list", pr.sample_id),
            });
        }
        let report = FoldReport::new(p.fold, classes.clone(), p.subjects, p.predictions);
        if report.confusion != p.confusion {
            return Err(PipelineError::BadSummary {
                line: 0,
                message: format!("fold {}: confusion matrix disagrees with its predictions", p.fold),
            });
        }
        folds.push(report);
    }
    let result = CvResult { folds };
    let (line, recorded) = mean.ok_or(PipelineError::BadSummary {
        line: 0,
        message: "missing mean_accuracy line".into(),
    })?;
    if recorded.to_bits() != result.mean_accuracy().to_bits() {
        return Err(PipelineError::BadSummary {
            line,
            message: format!("mean accuracy {recorded} disagrees with the folds"),
        });
    }
    let expected = result.per_class_accuracy();
    if per_class.len() != expected.len() {
        return Err(PipelineError::BadSummary {
            line: 0,
            message: "per-class lines do not match the folds".into(),
        });
    }
    for (line, l, v) in per_class {
        if expected.get(&l).map(|e| e.to_bits()) != Some(v.to_bits()) {
            return Err(PipelineError::BadSummary {
                line,
                message: format!("per-class accuracy for {l} disagrees with the folds"),
            });
        }
    }
    Ok(result)
}

fn confusion_table(out: &mut String, classes: &[Label], confusion: &[Vec<usize>]) {
    out.push_str("truth\\pred");
    for c in classes {
        let _ = write!(out, "{:>6}", c.code());
    }
    out.push('\n');
    for (c, row) in classes.iter().zip(confusion) {
        let _ = write!(out, "{:<10}", c.code());
        for v in row {
            let _ = write!(out, "{v:>6}");
        }
        out.push('\n');
    }
}

/// Human-readable report: per-expression recognition rate, the pooled
/// confusion matrix, fold accuracies and the overall mean.
pub fn format_report(result: &CvResult) -> String {
    let mut out = String::new();
    let classes = result.classes();
    let per_class = result.per_class_accuracy();
    out.push_str("Recognition rate per expression\n");
    for c in &classes {
        match per_class.get(c) {
            Some(a) => {
                let _ = writeln!(out, "  {:<4}{:>7.2}%", c.code(), 100.0 * a);
            }
            None => {
                let _ = writeln!(out, "  {:<4}{:>8}", c.code(), "n/a");
            }
        }
    }
    out.push_str("\nConfusion matrix (rows: truth)\n");
    confusion_table(&mut out, &classes, &result.pooled_confusion());
    out.push_str("\nFold accuracy\n");
    for f in &result.folds {
        let _ = writeln!(
            out,
            "  fold {:>2}: {:>7.2}%  ({}/{})",
            f.fold,
            100.0 * f.accuracy(),
            f.correct(),
            f.total()
        );
    }
    let _ = writeln!(out, "\nMean accuracy: {:.2}%", 100.0 * result.mean_accuracy());
    out
}

/// Same layout for a single held-out evaluation.
pub fn format_fold(report: &FoldReport) -> String {
    format_report(&CvResult {
        folds: vec![report.clone()],
    })
}

/// Codebook size against mean accuracy.
pub fn format_sweep(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("codebook_size\tmean_accuracy\n");
    for (k, acc) in rows {
        let _ = writeln!(out, "{k}\t{acc:?}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CvResult {
        let classes = vec![Label::Happy, Label::Sad, Label::Fear];
        let p = |id: &str, t, q| Prediction {
            sample_id: id.into(),
            truth: t,
            predicted: q,
        };
        CvResult {
            folds: vec![
                FoldReport::new(
                    0,
                    classes.clone(),
                    vec!["a".into(), "b".into()],
                    vec![p("1", Label::Happy, Label::Happy), p("2", Label::Sad, Label::Fear)],
                ),
                FoldReport::new(
                    1,
                    classes,
                    vec!["c".into()],
                    vec![
                        p("3", Label::Fear, Label::Fear),
                        p("4", Label::Sad, Label::Sad),
                        p("5", Label::Happy, Label::Sad),
                    ],
                ),
            ],
        }
    }

    #[test]
    fn summary_roundtrip() {
        let r = sample();
        let text = summary_text(&r);
        assert_eq!(parse_summary(&text).unwrap(), r);
        assert_eq!(summary_text(&parse_summary(&text).unwrap()), text);
    }

    #[test]
    fn tampered_summary_rejected() {
        let text = summary_text(&sample());
        let tampered = text.replace("mean_accuracy\t", "mean_accuracy\t1");
        assert!(matches!(
            parse_summary(&tampered),
            Err(PipelineError::BadSummary { .. })
        ));
        let tampered = text.replacen("confusion\t0\t1,0,0", "confusion\t0\t0,1,0", 1);
        assert!(parse_summary(&tampered).is_err());
        assert!(parse_summary("classes\tHA\nbogus\t1\n").is_err());
    }

    #[test]
    fn report_mentions_every_class() {
        let text = format_report(&sample());
        for code in ["HA", "SA", "FE"] {
            assert!(text.contains(code));
        }
        assert!(text.contains("Mean accuracy"));
        assert!(format_sweep(&[(16, 0.5), (32, 0.75)]).contains("32\t0.75"));
    }
}
