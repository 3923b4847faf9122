//! Estimates against predictions.

use serde::{Deserialize, Serialize};

use crate::models::PredictionKind;
use crate::run::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotRun,
    NoPrediction,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotRun => "not run",
            Self::NoPrediction => "no prediction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub estimator: String,
    pub estimate: Option<f64>,
    pub prediction: Option<f64>,
    pub kind: Option<PredictionKind>,
    /// `estimate - prediction`.
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: Status,
}

/// One row per estimator that was run or has a prediction. Exact
/// predictions pass when `|gap| <= tol`, lower bounds when `gap >= -tol`.
pub fn compare(record: &RunRecord) -> Vec<Verdict> {
    let mut rows = Vec::new();
    for e in &record.estimates {
        let p = record.predictions.iter().find(|p| p.estimator == e.estimator);
        let est = e.estimate.slope;
        let (status, gap) = match p {
            None => (Status::NoPrediction, None),
            Some(p) => {
                let gap = est - p.value;
                let ok = match p.kind {
                    PredictionKind::Exact => gap.abs() <= e.tolerance,
                    PredictionKind::LowerBound => gap >= -e.tolerance,
                };
                (if ok { Status::Pass } else { Status::Fail }, Some(gap))
            }
        };
        rows.push(Verdict {
            estimator: e.estimator.clone(),
            estimate: Some(est),
            prediction: p.map(|p| p.value),
            kind: p.map(|p| p.kind),
            gap,
            tolerance: Some(e.tolerance),
            status,
        });
    }
    for p in &record.predictions {
        if !rows.iter().any(|r| r.estimator == p.estimator) {
            rows.push(Verdict {
                estimator: p.estimator.clone(),
                estimate: None,
                prediction: Some(p.value),
                kind: Some(p.kind),
                gap: None,
                tolerance: None,
                status: Status::NotRun,
            });
        }
    }
    rows
}

pub fn any_failed(rows: &[Verdict]) -> bool {
    rows.iter().any(|r| r.status == Status::Fail)
}

fn cell(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

pub fn table(rows: &[Verdict]) -> String {
    let mut out = format!(
        "{:<18} {:>9} {:>10} {:>12} {:>9} {:>9}  {}\n",
        "estimator", "estimate", "prediction", "kind", "gap", "tolerance", "status"
    );
    for r in rows {
        let kind = match r.kind {
            Some(PredictionKind::Exact) => "exact",
            Some(PredictionKind::LowerBound) => "lower-bound",
            None => "-",
        };
        out.push_str(&format!(
            "{:<18} {:>9} {:>10} {:>12} {:>9} {:>9}  {}\n",
            r.estimator,
            cell(r.estimate),
            cell(r.prediction),
            kind,
            cell(r.gap),
            cell(r.tolerance),
            r.status.label()
        ));
    }
    out
}
