//! Running the detector over a labeled corpus, and the ground-truth
//! simulator used to label generated loops.

mod oracle;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{analyze, Config, Verdict};

pub use oracle::{oracle_simulate, oracle_simulate_with_budget, Collision, OracleError, OracleVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expected {
    Race,
    NoRace,
}

/// One manifest record. `path` is relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub path: PathBuf,
    pub expected: Expected,
    #[serde(default)]
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub base: PathBuf,
    pub cases: Vec<CorpusCase>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Manifest {
    /// Reads a JSON array of `{path, expected, tag}` records.
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let shown = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: shown.clone(),
            source,
        })?;
        let cases = serde_json::from_str(&text).map_err(|source| ManifestError::Json { path: shown, source })?;
        Ok(Manifest {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            cases,
        })
    }

    pub fn resolve(&self, case: &CorpusCase) -> PathBuf {
        self.base.join(&case.path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        ConfusionCounts { tp, fn_, tn, fp }
    }

    pub fn record(&mut self, expected: Expected, predicted_race: bool) {
        match (expected, predicted_race) {
            (Expected::Race, true) => self.tp += 1,
            (Expected::Race, false) => self.fn_ += 1,
            (Expected::NoRace, false) => self.tn += 1,
            (Expected::NoRace, true) => self.fp += 1,
        }
    }

    pub fn merge(self, other: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

/// Scores in [0, 1]; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Metrics {
        precision,
        recall,
        accuracy: ratio(c.tp + c.tn, c.total()),
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CaseOutcome {
    Race,
    NoRace,
    Unsupported { reason: String },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub path: PathBuf,
    pub tag: String,
    pub expected: Expected,
    #[serde(flatten)]
    pub outcome: CaseOutcome,
    pub elapsed_ms: u64,
}

impl CaseResult {
    pub fn correct(&self) -> Option<bool> {
        match (&self.outcome, self.expected) {
            (CaseOutcome::Race, e) => Some(e == Expected::Race),
            (CaseOutcome::NoRace, e) => Some(e == Expected::NoRace),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub counts: ConfusionCounts,
    pub unsupported: u64,
    pub errored: u64,
    pub metrics: Metrics,
    pub cases: Vec<CaseResult>,
}

fn run_case(manifest: &Manifest, case: &CorpusCase, config: &Config) -> CaseResult {
    let started = Instant::now();
    let outcome = match analyze(&manifest.resolve(case), config) {
        Ok(report) => match report.verdict {
            Verdict::Race { .. } => CaseOutcome::Race,
            Verdict::NoRace { .. } => CaseOutcome::NoRace,
            Verdict::Unsupported { reason } => CaseOutcome::Unsupported { reason },
        },
        Err(e) => CaseOutcome::Error { message: e.to_string() },
    };
    CaseResult {
        path: case.path.clone(),
        tag: case.tag.clone(),
        expected: case.expected,
        outcome,
        elapsed_ms: started.elapsed().as_millis() as u64,
    }
}

/// Analyzes every case, in parallel, and tallies the verdicts. Unsupported
/// and errored cases are excluded from the confusion counts.
pub fn run_corpus(manifest: &Manifest, config: &Config) -> CorpusSummary {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(manifest.cases.len().max(1));
    let chunk = manifest.cases.len().div_ceil(workers).max(1);
    let cases: Vec<CaseResult> = std::thread::scope(|s| {
        let handles: Vec<_> = manifest
            .cases
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|c| run_case(manifest, c, config)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("corpus worker panicked"))
            .collect()
    });
    let mut summary = CorpusSummary::default();
    for r in &cases {
        match &r.outcome {
            CaseOutcome::Race => summary.counts.record(r.expected, true),
            CaseOutcome::NoRace => summary.counts.record(r.expected, false),
            CaseOutcome::Unsupported { .. } => summary.unsupported += 1,
            CaseOutcome::Error { .. } => summary.errored += 1,
        }
    }
    summary.metrics = metrics(&summary.counts);
    summary.cases = cases;
    summary
}

fn score(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

impl CorpusSummary {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .cases
            .iter()
            .map(|c| c.path.display().to_string().len())
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(out, "{:<width$}  {:<12} {:<8} {:<12} {:>8}", "case", "tag", "expected", "got", "ms");
        for c in &self.cases {
            let expected = match c.expected {
                Expected::Race => "race",
                Expected::NoRace => "no-race",
            };
            let got = match &c.outcome {
                CaseOutcome::Race => "race",
                CaseOutcome::NoRace => "no-race",
                CaseOutcome::Unsupported { .. } => "unsupported",
                CaseOutcome::Error { .. } => "error",
            };
            let mark = match c.correct() {
                Some(true) => "",
                Some(false) => "  MISS",
                None => "",
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:<12} {:<8} {:<12} {:>8}{mark}",
                c.path.display(),
                c.tag,
                expected,
                got,
                c.elapsed_ms
            );
        }
        let k = &self.counts;
        let _ = writeln!(
            out,
            "\nTP {}  FN {}  TN {}  FP {}  unsupported {}  errored {}",
            k.tp, k.fn_, k.tn, k.fp, self.unsupported, self.errored
        );
        let m = &self.metrics;
        let _ = writeln!(
            out,
            "precision {}  recall {}  accuracy {}  F1 {}",
            score(m.precision),
            score(m.recall),
            score(m.accuracy),
            score(m.f1)
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() <= 1e-3)
    }

    #[test]
    fn metric_values() {
        let m = metrics(&ConfusionCounts::new(29, 1, 20, 2));
        assert!(close(m.precision, 0.935) && close(m.recall, 0.967));
        assert!(close(m.accuracy, 0.942) && close(m.f1, 0.951));
        let m = metrics(&ConfusionCounts::new(26, 4, 24, 0));
        assert!(close(m.precision, 1.0) && close(m.recall, 0.867));
        assert!(close(m.accuracy, 0.926) && close(m.f1, 0.929));
    }

    #[test]
    fn undefined_metrics() {
        assert_eq!(metrics(&ConfusionCounts::default()), Metrics::default());
        let m = metrics(&ConfusionCounts::new(0, 0, 5, 0));
        assert_eq!((m.precision, m.recall, m.f1), (None, None, None));
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(metrics(&ConfusionCounts::new(0, 3, 0, 2)).f1, None);
    }

    #[test]
    fn merge_is_componentwise() {
        let a = ConfusionCounts::new(1, 2, 3, 4);
        let b = ConfusionCounts::new(10, 20, 30, 40);
        assert_eq!(a.merge(b), ConfusionCounts::new(11, 22, 33, 44));
        assert_eq!(a.merge(b), b.merge(a));
    }

    #[test]
    fn empty_manifest() {
        let s = run_corpus(&Manifest::default(), &Config::default());
        assert_eq!(s.counts, ConfusionCounts::default());
        assert_eq!((s.unsupported, s.errored), (0, 0));
        assert!(s.to_table().contains("TP 0  FN 0  TN 0  FP 0"));
    }

    #[test]
    fn missing_file_is_errored() {
        let m = Manifest {
            base: PathBuf::from("/nonexistent"),
            cases: vec![CorpusCase {
                path: "x.c".into(),
                expected: Expected::Race,
                tag: String::new(),
            }],
        };
        let s = run_corpus(&m, &Config::default());
        assert_eq!((s.errored, s.counts.total()), (1, 0));
    }

    #[test]
    fn manifest_records() {
        let cases: Vec<CorpusCase> =
            serde_json::from_str(r#"[{"path": "a.c", "expected": "no-race", "tag": "fp"}]"#).unwrap();
        assert_eq!(cases[0].expected, Expected::NoRace);
        let json = serde_json::to_string(&ConfusionCounts::new(1, 2, 3, 4)).unwrap();
        assert_eq!(json, r#"{"tp":1,"fn":2,"tn":3,"fp":4}"#);
    }
}
