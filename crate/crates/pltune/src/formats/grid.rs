//! Grid-search reports.

use serde::{Deserialize, Serialize};

use pltune_core::harness::GridReport;
use pltune_core::threshold::Thresholds;

use super::policy::PolicyDocument;

/// A number for a single threshold, `[tau_h, tau_l]` for a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Candidate {
    Single(f64),
    Dual([f64; 2]),
}

impl From<Thresholds> for Candidate {
    fn from(t: Thresholds) -> Self {
        match t {
            Thresholds::Single { tau } => Candidate::Single(tau),
            Thresholds::Dual { tau_h, tau_l } => Candidate::Dual([tau_h, tau_l]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub evaluator: String,
    pub candidates: Vec<Candidate>,
    pub scores: Vec<f64>,
    pub best: Candidate,
    pub best_score: f64,
    pub policy: PolicyDocument,
}

impl GridDocument {
    pub fn new(evaluator: &str, report: &GridReport) -> Self {
        Self {
            evaluator: evaluator.to_string(),
            candidates: report.table.iter().map(|(t, _)| (*t).into()).collect(),
            scores: report.table.iter().map(|(_, s)| *s).collect(),
            best: report.best.into(),
            best_score: report.best_score,
            policy: PolicyDocument::from_policy(&report.policy),
        }
    }
}

/// One row per candidate, best row marked with `*`.
pub fn grid_tsv(report: &GridReport) -> String {
    let dual = matches!(report.best, Thresholds::Dual { .. });
    let mut out = String::from(if dual {
        "tau_h\ttau_l\tscore\tbest\n"
    } else {
        "tau\tscore\tbest\n"
    });
    for (t, s) in &report.table {
        let mark = if *t == report.best && *s == report.best_score {
            "*"
        } else {
            ""
        };
        match t {
            Thresholds::Single { tau } => out.push_str(&format!("{tau}\t{s}\t{mark}\n")),
            Thresholds::Dual { tau_h, tau_l } => {
                out.push_str(&format!("{tau_h}\t{tau_l}\t{s}\t{mark}\n"))
            }
        }
    }
    out
}
