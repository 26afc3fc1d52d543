//! Perceptual anchoring of detections to planning constants, online
//! training sets, and logistic-regression property classifiers.

use crate::sim::Detection;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub constant: String,
    pub ty: String,
    /// Incrementally updated feature centroid.
    pub centroid: Vec<f64>,
    pub last_pos: (i32, i32),
    pub observations: u64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// One anchor per constant; matching requires same reported type, position
/// strictly closer than `delta_pos` (so the default of one grid cell never
/// conflates objects in adjacent cells), and features within `delta_feat`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AnchorStore {
    pub anchors: BTreeMap<String, Anchor>,
    counters: BTreeMap<String, usize>,
    pub delta_pos: f64,
    pub delta_feat: f64,
}

impl AnchorStore {
    pub fn new(delta_pos: f64, delta_feat: f64) -> Self {
        AnchorStore { delta_pos, delta_feat, ..Default::default() }
    }

    /// Match a detection to an existing constant or mint a new one.
    /// Returns the constant id and whether it is new.
    pub fn match_or_insert(&mut self, det: &Detection) -> (String, bool) {
        let mut best: Option<(f64, String)> = None;
        for anchor in self.anchors.values() {
            if anchor.ty != det.reported_type {
                continue;
            }
            let dp = (((anchor.last_pos.0 - det.pos.0).pow(2)
                + (anchor.last_pos.1 - det.pos.1).pow(2)) as f64)
                .sqrt();
            if dp >= self.delta_pos {
                continue;
            }
            let df = euclid(&anchor.centroid, &det.features);
            if df > self.delta_feat {
                continue;
            }
            if best.as_ref().map_or(true, |(d, _)| df < *d) {
                best = Some((df, anchor.constant.clone()));
            }
        }
        if let Some((_, constant)) = best {
            let anchor = self.anchors.get_mut(&constant).unwrap();
            anchor.observations += 1;
            let n = anchor.observations as f64;
            for (c, f) in anchor.centroid.iter_mut().zip(&det.features) {
                *c += (f - *c) / n;
            }
            anchor.last_pos = det.pos;
            return (constant, false);
        }
        let counter = self.counters.entry(det.reported_type.clone()).or_insert(0);
        let constant = format!("{}{}", det.reported_type.to_lowercase(), *counter);
        *counter += 1;
        self.anchors.insert(
            constant.clone(),
            Anchor {
                constant: constant.clone(),
                ty: det.reported_type.clone(),
                centroid: det.features.clone(),
                last_pos: det.pos,
                observations: 1,
            },
        );
        (constant, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Label assigned at collection time from the agent's Known atoms,
    /// never from ground truth.
    pub positive: bool,
    pub source: String,
    pub step: u64,
}

/// The online-collected training set for one (type-name, property-name).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub type_name: String,
    pub prop_name: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("sample belongs to pair ({0},{1}), set holds ({2},{3})")]
    PairMismatch(String, String, String, String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature dimension mismatch: model {model}, input {input}")]
    DimensionMismatch { model: usize, input: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl TrainingSet {
    pub fn new(type_name: impl Into<String>, prop_name: impl Into<String>) -> Self {
        TrainingSet {
            type_name: type_name.into(),
            prop_name: prop_name.into(),
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn add(&mut self, sample: Sample) {
        self.samples.push(sample);
    }

    /// CSV layout: one feature column per dimension, then label, constant, step.
    pub fn write_csv(&self, path: &Path) -> Result<(), PerceptionError> {
        let mut w = csv::Writer::from_path(path)?;
        let dim = self.samples.first().map_or(0, |s| s.features.len());
        let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
        header.extend(["label".into(), "constant".into(), "step".into()]);
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.features.iter().map(|f| format!("{f}")).collect();
            row.push(if s.positive { "1".into() } else { "0".into() });
            row.push(s.source.clone());
            row.push(s.step.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub type_name: String,
    pub prop_name: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Decision threshold in (0,1).
    pub threshold: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl ClassifierModel {
    /// Small random initialization, deterministic in the seed.
    pub fn init(
        type_name: impl Into<String>,
        prop_name: impl Into<String>,
        dim: usize,
        threshold: f64,
        epochs: usize,
        learning_rate: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
        ClassifierModel {
            type_name: type_name.into(),
            prop_name: prop_name.into(),
            weights,
            bias: 0.0,
            threshold,
            epochs,
            learning_rate,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss over (features, y in {-1,+1}) pairs.
pub fn logistic_loss(weights: &[f64], bias: f64, data: &[(Vec<f64>, f64)]) -> f64 {
    let n = data.len().max(1) as f64;
    data.iter()
        .map(|(x, y)| {
            let z = y * (dot(weights, x) + bias);
            // ln(1 + e^-z), stable for large |z|
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / n
}

/// Analytic gradient of `logistic_loss` in (weights, bias).
pub fn logistic_gradient(
    weights: &[f64],
    bias: f64,
    data: &[(Vec<f64>, f64)],
) -> (Vec<f64>, f64) {
    let n = data.len().max(1) as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, y) in data {
        let z = y * (dot(weights, x) + bias);
        let s = sigmoid(-z); // d/dz ln(1+e^-z) = -sigmoid(-z)
        for (g, xi) in gw.iter_mut().zip(x) {
            *g -= y * s * xi;
        }
        gb -= y * s;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (gw, gb / n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full-batch gradient descent on the logistic loss for the configured
/// number of epochs, warm-starting from the current weights. Deterministic
/// in the sample order.
pub fn classifier_train(
    model: &ClassifierModel,
    positives: &TrainingSet,
    negatives: &TrainingSet,
) -> Result<ClassifierModel, PerceptionError> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(PerceptionError::EmptyTrainingSet);
    }
    let mut data: Vec<(Vec<f64>, f64)> = Vec::with_capacity(positives.len() + negatives.len());
    for s in &positives.samples {
        if s.features.len() != model.dim() {
            return Err(PerceptionError::DimensionMismatch {
                model: model.dim(),
                input: s.features.len(),
            });
        }
        data.push((s.features.clone(), 1.0));
    }
    for s in &negatives.samples {
        if s.features.len() != model.dim() {
            return Err(PerceptionError::DimensionMismatch {
                model: model.dim(),
                input: s.features.len(),
            });
        }
        data.push((s.features.clone(), -1.0));
    }
    let mut out = model.clone();
    for _ in 0..model.epochs {
        let (gw, gb) = logistic_gradient(&out.weights, out.bias, &data);
        for (w, g) in out.weights.iter_mut().zip(&gw) {
            *w -= model.learning_rate * g;
        }
        out.bias -= model.learning_rate * gb;
    }
    Ok(out)
}

/// Probability of the property being true, and the thresholded decision.
pub fn classifier_predict(
    model: &ClassifierModel,
    features: &[f64],
) -> Result<(f64, bool), PerceptionError> {
    if features.len() != model.dim() {
        return Err(PerceptionError::DimensionMismatch {
            model: model.dim(),
            input: features.len(),
        });
    }
    let p = sigmoid(dot(&model.weights, features) + model.bias);
    Ok((p, p > model.threshold))
}

/// Append a sample, rejecting pair mismatches.
pub fn dataset_add(set: &mut TrainingSet, sample: Sample, type_name: &str, prop_name: &str) -> Result<(), PerceptionError> {
    if set.type_name != type_name || set.prop_name != prop_name {
        return Err(PerceptionError::PairMismatch(
            type_name.into(),
            prop_name.into(),
            set.type_name.clone(),
            set.prop_name.clone(),
        ));
    }
    set.add(sample);
    Ok(())
}
