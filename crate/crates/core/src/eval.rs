//! Ground-truth test-set generation by random walk on an independently
//! reseeded world clone, and precision/recall reporting for the trained
//! classifiers.

use crate::learn::TypePropertyPair;
use crate::perception::{classifier_predict, ClassifierModel, PerceptionError};
use crate::sim::World;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub features: Vec<f64>,
    /// Ground-truth property value of the rendered object.
    pub label: bool,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub type_name: String,
    pub prop_name: String,
    pub entries: Vec<TestEntry>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("no model for pair ({0}, {1})")]
    MissingModel(String, String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Sample labeled test sets by random-walking a reseeded clone of the
/// world. Each step renders one noisy view of every visible object whose
/// type carries the pair's property; labels come from ground truth. Pairs
/// whose type or property never occurs yield empty sets.
pub fn generate_testsets(
    world: &World,
    pairs: &[TypePropertyPair],
    seed: u64,
    walk_steps: usize,
    per_pair: usize,
) -> BTreeMap<(String, String), TestSet> {
    let mut w = world.reseeded(seed);
    let mut sets: BTreeMap<(String, String), TestSet> = BTreeMap::new();
    for pair in pairs {
        sets.insert(
            (pair.type_name(), pair.prop_name()),
            TestSet {
                type_name: pair.type_name(),
                prop_name: pair.prop_name(),
                entries: Vec::new(),
            },
        );
    }
    for _ in 0..walk_steps {
        // fresh coin flips each step so every object contributes examples
        // of both polarities regardless of run history
        w.resample_props(0.5);
        let op = w.random_walk_op();
        w.step(&op, crate::sim::DetectMode::Gtd);
        for pair in pairs {
            let key = (pair.type_name(), pair.prop_name());
            if sets[&key].entries.len() >= per_pair {
                continue;
            }
            let candidates: Vec<(String, bool)> = w
                .visible_objects()
                .iter()
                .filter(|o| o.ty == pair.type_pred)
                .filter_map(|o| {
                    o.props.get(&pair.prop_pred).map(|&v| (o.id.clone(), v))
                })
                .collect();
            for (id, label) in candidates {
                if sets[&key].entries.len() >= per_pair {
                    break;
                }
                if let Ok(views) = w.render_views(&id, 1) {
                    sets.get_mut(&key).unwrap().entries.push(TestEntry {
                        features: views.into_iter().next().unwrap(),
                        label,
                        object: id,
                    });
                }
            }
        }
        if sets.values().all(|s| s.entries.len() >= per_pair) {
            break;
        }
    }
    sets
}

/// Precision with the convention that an empty positive-prediction set
/// (TP + FP = 0) scores 0, and symmetrically for recall.
pub fn precision_recall(tp: u64, fp: u64, fn_: u64) -> (f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (precision, recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(rename = "property")]
    pub prop_name: String,
    pub n: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    /// `None` when the test set is empty.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<MetricsRow>,
    /// Averages over nonempty sets, weighted by set size.
    pub weighted_precision: f64,
    pub weighted_recall: f64,
}

/// Score every (model, test set) pair and aggregate.
pub fn evaluate(
    models: &BTreeMap<(String, String), ClassifierModel>,
    testsets: &BTreeMap<(String, String), TestSet>,
) -> Result<EvalReport, EvalError> {
    let mut rows = Vec::new();
    let mut wp = 0.0;
    let mut wr = 0.0;
    let mut total = 0usize;
    for (key, set) in testsets {
        let model = models
            .get(key)
            .ok_or_else(|| EvalError::MissingModel(key.0.clone(), key.1.clone()))?;
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for entry in &set.entries {
            let (_, decision) = classifier_predict(model, &entry.features)?;
            match (decision, entry.label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let n = set.entries.len();
        let (precision, recall) = if n == 0 {
            (None, None)
        } else {
            let (p, r) = precision_recall(tp, fp, fn_);
            wp += p * n as f64;
            wr += r * n as f64;
            total += n;
            (Some(p), Some(r))
        };
        rows.push(MetricsRow {
            type_name: key.0.clone(),
            prop_name: key.1.clone(),
            n,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
        });
    }
    let denom = total.max(1) as f64;
    Ok(EvalReport {
        rows,
        weighted_precision: wp / denom,
        weighted_recall: wr / denom,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "".into(), |x| format!("{x:.4}"))
}

/// Byte-deterministic CSV: fixed column order, 4 decimal places.
pub fn write_metrics_csv(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["type", "property", "n", "tp", "fp", "fn", "tn", "precision", "recall"])?;
    for r in &report.rows {
        w.write_record([
            r.type_name.clone(),
            r.prop_name.clone(),
            r.n.to_string(),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            r.tn.to_string(),
            fmt_opt(r.precision),
            fmt_opt(r.recall),
        ])?;
    }
    w.write_record([
        "weighted".into(),
        "".into(),
        report.rows.iter().map(|r| r.n).sum::<usize>().to_string(),
        "".to_string(),
        "".to_string(),
        "".to_string(),
        "".to_string(),
        format!("{:.4}", report.weighted_precision),
        format!("{:.4}", report.weighted_recall),
    ])?;
    w.flush()?;
    Ok(())
}

/// Byte-deterministic JSON via serde_json's pretty printer over the
/// already-ordered rows.
pub fn write_metrics_json(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, report)
        .map_err(|e| EvalError::Io(e.into()))?;
    writeln!(f)?;
    Ok(())
}
