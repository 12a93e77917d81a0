//! Accuracy scoring and Relative Degrade over train × test grids.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec_det::Answer;
use crate::io::FileInfo;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("incomplete grid: missing A[{train}][{test}]")]
    IncompleteGrid { train: String, test: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// One executor output; `answer` is `None` when execution failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_index: u64,
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub info: FileInfo,
    pub predictions: Vec<Prediction>,
}

/// Reference answer with the family it is reported under.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldAnswer {
    pub question_index: u64,
    pub family: String,
    pub answer: Answer,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub overall: Tally,
    pub per_family: BTreeMap<String, Tally>,
}

pub fn score(predictions: &[Prediction], gold: &[GoldAnswer]) -> Result<Score, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Alignment("no predictions".into()));
    }
    let mut by_id: HashMap<u64, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.question_index, p).is_some() {
            return Err(EvalError::Alignment(format!("duplicate prediction for question {}", p.question_index)));
        }
    }
    if by_id.len() != gold.len() {
        return Err(EvalError::Alignment(format!("{} predictions for {} questions", by_id.len(), gold.len())));
    }
    let mut out = Score::default();
    for g in gold {
        let p = by_id
            .get(&g.question_index)
            .ok_or_else(|| EvalError::Alignment(format!("no prediction for question {}", g.question_index)))?;
        let ok = p.answer.as_ref().is_some_and(|a| a.normalized() == g.answer.normalized());
        out.overall.add(ok);
        out.per_family.entry(g.family.clone()).or_default().add(ok);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Visual,
    Redundancy,
    Distribution,
    Compositionality,
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::Visual => "visual",
            Factor::Redundancy => "redundancy",
            Factor::Distribution => "distribution",
            Factor::Compositionality => "compositionality",
        }
    }

    pub fn train_variants(self) -> &'static [&'static str] {
        match self {
            Factor::Visual => &["easy", "mid", "hard"],
            Factor::Redundancy => &["rd-", "rd", "rd+"],
            Factor::Distribution => &["bal", "slt", "long"],
            Factor::Compositionality => &["co-0", "co-1", "co-2"],
        }
    }

    pub fn test_variants(self) -> &'static [&'static str] {
        match self {
            Factor::Distribution => &["bal", "slt", "long", "head", "tail", "oppo"],
            f => f.train_variants(),
        }
    }
}

/// Accuracy of a model trained on `train` and tested on `test`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub factor: Factor,
    cells: BTreeMap<String, BTreeMap<String, f64>>,
}

impl AccuracyGrid {
    pub fn new(factor: Factor) -> Self {
        AccuracyGrid { factor, cells: BTreeMap::new() }
    }

    pub fn set(&mut self, train: &str, test: &str, accuracy: f64) -> Result<(), EvalError> {
        if !self.factor.train_variants().contains(&train) || !self.factor.test_variants().contains(&test) {
            return Err(EvalError::InvalidGrid(format!(
                "cell ({train}, {test}) is not part of the {} grid",
                self.factor.name()
            )));
        }
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(EvalError::InvalidGrid(format!("accuracy {accuracy} outside [0, 1]")));
        }
        self.cells.entry(train.to_string()).or_default().insert(test.to_string(), accuracy);
        Ok(())
    }

    /// Fills every cell from `f(train, test)`.
    pub fn from_fn(factor: Factor, mut f: impl FnMut(&str, &str) -> f64) -> Result<Self, EvalError> {
        let mut g = AccuracyGrid::new(factor);
        for &train in factor.train_variants() {
            for &test in factor.test_variants() {
                g.set(train, test, f(train, test))?;
            }
        }
        Ok(g)
    }

    pub fn get(&self, train: &str, test: &str) -> Option<f64> {
        self.cells.get(train).and_then(|row| row.get(test)).copied()
    }

    fn need(&self, train: &str, test: &str) -> Result<f64, EvalError> {
        self.get(train, test).ok_or_else(|| EvalError::IncompleteGrid { train: train.into(), test: test.into() })
    }

    pub fn scaled(&self, c: f64) -> AccuracyGrid {
        let mut g = self.clone();
        for row in g.cells.values_mut() {
            for v in row.values_mut() {
                *v *= c;
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdReport {
    pub factor: Factor,
    /// Signed fraction; multiply by 100 for percent.
    pub rd: f64,
    pub rd_percent: f64,
}

/// Superscript is the training variant, subscript the testing variant.
pub fn relative_degrade(grid: &AccuracyGrid) -> Result<RdReport, EvalError> {
    let factor = grid.factor;
    let variants = factor.train_variants();
    let rd = if factor == Factor::Distribution {
        let mut sum = 0.0;
        for &k in variants {
            let diag = grid.need(k, k)?;
            let drop = (grid.need(k, "head")? - grid.need(k, "tail")?) + (grid.need(k, "long")? - grid.need(k, "oppo")?);
            sum += drop / (2.0 * diag);
        }
        sum / variants.len() as f64
    } else {
        let mut terms = Vec::new();
        for &t in variants {
            let diag = grid.need(t, t)?;
            for &s in variants.iter().filter(|&&s| s != t) {
                terms.push((diag - grid.need(t, s)?) / diag);
            }
        }
        terms.iter().sum::<f64>() / terms.len() as f64
    };
    Ok(RdReport { factor, rd, rd_percent: rd * 100.0 })
}

pub const RD_DISCREPANCY_NOTE: &str = "Note: RD follows the per-factor averaging formula with superscript = training \
variant and subscript = testing variant. Recomputing published RD figures from their published accuracy tables with \
this formula does not reproduce them under either index convention (for example a visual-factor row computes to about \
1.7% where 4.03% is printed), so published RD values should not be compared digit for digit with these.";

/// Grid laid out with training variants as columns and test variants as rows.
pub fn render_grid(grid: &AccuracyGrid, rd: &RdReport) -> String {
    let trains = grid.factor.train_variants();
    let mut s = String::new();
    let _ = writeln!(s, "factor: {}", grid.factor.name());
    let _ = write!(s, "{:<10}", "test\\train");
    for t in trains {
        let _ = write!(s, "{t:>10}");
    }
    s.push('\n');
    for &test in grid.factor.test_variants() {
        let _ = write!(s, "{test:<10}");
        for &train in trains {
            match grid.get(train, test) {
                Some(a) => {
                    let _ = write!(s, "{:>10.2}", a * 100.0);
                }
                None => {
                    let _ = write!(s, "{:>10}", "-");
                }
            }
        }
        s.push('\n');
    }
    let _ = writeln!(s, "RD: {:.3}%", rd.rd_percent);
    s.push_str(RD_DISCREPANCY_NOTE);
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(n: u64) -> Vec<GoldAnswer> {
        (0..n).map(|i| GoldAnswer { question_index: i, family: "count".into(), answer: Answer::Integer(i as i64) }).collect()
    }

    fn pred(i: u64, a: i64) -> Prediction {
        Prediction { question_index: i, answer: Some(Answer::Integer(a)), error: None }
    }

    #[test]
    fn scoring() {
        let g = gold(4);
        let all: Vec<_> = (0..4).map(|i| pred(i, i as i64)).collect();
        assert_eq!(score(&all, &g).unwrap().overall.accuracy, 1.0);
        let mut three = all.clone();
        three[2] = pred(2, 9);
        let s = score(&three, &g).unwrap();
        assert_eq!(s.overall.accuracy, 0.75);
        assert_eq!(s.per_family["count"].correct, 3);
        assert!(matches!(score(&[], &g), Err(EvalError::Alignment(_))));
        assert!(matches!(score(&all[..3], &g), Err(EvalError::Alignment(_))));
    }

    #[test]
    fn attribute_case_folding() {
        let g = vec![GoldAnswer { question_index: 0, family: "query".into(), answer: Answer::Attribute("red".into()) }];
        let p = vec![Prediction { question_index: 0, answer: Some(Answer::Attribute("Red".into())), error: None }];
        assert_eq!(score(&p, &g).unwrap().overall.correct, 1);
    }

    #[test]
    fn rd_examples() {
        for f in [Factor::Visual, Factor::Redundancy, Factor::Distribution, Factor::Compositionality] {
            let g = AccuracyGrid::from_fn(f, |_, _| 0.9).unwrap();
            assert!(relative_degrade(&g).unwrap().rd.abs() < 1e-12);
        }
        let g = AccuracyGrid::from_fn(Factor::Visual, |a, b| if a == b { 1.0 } else { 0.9 }).unwrap();
        assert!((relative_degrade(&g).unwrap().rd_percent - 10.0).abs() < 1e-9);
        let g = AccuracyGrid::from_fn(Factor::Distribution, |_, test| match test {
            "tail" | "oppo" => 0.0,
            _ => 0.8,
        })
        .unwrap();
        assert!((relative_degrade(&g).unwrap().rd_percent - 100.0).abs() < 1e-9);
    }

    #[test]
    fn incomplete_grid() {
        let mut g = AccuracyGrid::new(Factor::Visual);
        g.set("easy", "easy", 1.0).unwrap();
        assert!(matches!(relative_degrade(&g), Err(EvalError::IncompleteGrid { .. })));
        assert!(g.set("bal", "easy", 1.0).is_err());
    }

    #[test]
    fn report_carries_note() {
        let g = AccuracyGrid::from_fn(Factor::Redundancy, |_, _| 0.5).unwrap();
        let text = render_grid(&g, &relative_degrade(&g).unwrap());
        assert!(text.contains(RD_DISCREPANCY_NOTE));
        assert!(text.contains("rd+"));
    }
}
