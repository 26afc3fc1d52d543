//! Deterministic synthetic household environment: a grid room populated
//! with objects carrying hidden boolean properties. "Images" are feature
//! vectors: a per-object prototype plus one signal direction per true
//! property plus Gaussian view noise.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorNoise {
    pub miss_rate: f64,
    pub misclass_rate: f64,
    pub feature_jitter: f64,
    pub spurious_rate: f64,
}

fn default_signal() -> f64 {
    1.0
}
fn default_failure() -> f64 {
    0.05
}
fn default_max_steps() -> u64 {
    2000
}
fn default_interaction_range() -> f64 {
    1.5
}
fn default_sensing_range() -> f64 {
    6.0
}
fn default_fov() -> f64 {
    60.0
}
fn default_spread() -> f64 {
    0.3
}

/// Maps a base-domain operator to the ground-truth property it flips.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorEffect {
    pub property: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Object population: type-predicate name -> count.
    pub objects: BTreeMap<String, usize>,
    /// Applicability table: type -> properties that apply to it.
    pub applicable: BTreeMap<String, Vec<String>>,
    /// Probability each applicable property is initially true; missing
    /// entries default to 0.5.
    #[serde(default)]
    pub priors: BTreeMap<String, BTreeMap<String, f64>>,
    pub feature_dim: usize,
    /// Per-(type, property) signal strength; missing entries fall back to
    /// `default_signal`.
    #[serde(default)]
    pub signal: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default = "default_signal")]
    pub default_signal: f64,
    /// Per-view Gaussian noise sigma.
    #[serde(default)]
    pub view_sigma: f64,
    #[serde(default)]
    pub detector: DetectorNoise,
    #[serde(default = "default_failure")]
    pub act_failure_rate: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_interaction_range")]
    pub interaction_range: f64,
    #[serde(default = "default_sensing_range")]
    pub sensing_range: f64,
    #[serde(default = "default_fov")]
    pub fov_half_deg: f64,
    /// Per-object deviation from the shared type prototype.
    #[serde(default = "default_spread")]
    pub prototype_spread: f64,
    /// Base operator name -> ground-truth effect, e.g. Turn_On -> (Is_Turned_On, true).
    #[serde(default)]
    pub operator_effects: BTreeMap<String, OperatorEffect>,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let rates = [
            self.detector.miss_rate,
            self.detector.misclass_rate,
            self.detector.spurious_rate,
            self.act_failure_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(WorldError::BadConfig("rates must be in [0,1]".into()));
        }
        if self.view_sigma < 0.0 || self.detector.feature_jitter < 0.0 {
            return Err(WorldError::BadConfig("noise sigma must be >= 0".into()));
        }
        if self.feature_dim < 2 {
            return Err(WorldError::BadConfig("feature_dim must be >= 2".into()));
        }
        for (ty, props) in &self.priors {
            for (p, v) in props {
                if !(0.0..=1.0).contains(v) {
                    return Err(WorldError::BadConfig(format!(
                        "prior for {ty}/{p} out of [0,1]"
                    )));
                }
            }
        }
        let total: usize = self.objects.values().sum();
        let cells = (self.width as usize) * (self.height as usize);
        if total > cells {
            return Err(WorldError::InfeasiblePopulation { objects: total, cells });
        }
        Ok(())
    }

    pub fn prior(&self, ty: &str, prop: &str) -> f64 {
        self.priors
            .get(ty)
            .and_then(|m| m.get(prop))
            .copied()
            .unwrap_or(0.5)
    }

    pub fn signal_strength(&self, ty: &str, prop: &str) -> f64 {
        self.signal
            .get(ty)
            .and_then(|m| m.get(prop))
            .copied()
            .unwrap_or(self.default_signal)
    }
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    BadConfig(String),
    #[error("cannot place {objects} objects in {cells} cells")]
    InfeasiblePopulation { objects: usize, cells: usize },
    #[error("object {0} not visible from the current pose")]
    NotVisible(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn from_index(i: u8) -> Direction {
        match i % 4 {
            0 => Direction::East,
            1 => Direction::North,
            2 => Direction::West,
            _ => Direction::South,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
    /// Quarter turns counterclockwise from east.
    pub heading: u8,
}

impl Pose {
    pub fn heading_vec(&self) -> (f64, f64) {
        let (dx, dy) = Direction::from_index(self.heading).delta();
        (dx as f64, dy as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    pub ty: String,
    pub pos: (i32, i32),
    /// Hidden ground-truth valuation; only applicable properties present.
    pub props: BTreeMap<String, bool>,
    pub prototype: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub reported_type: String,
    pub features: Vec<f64>,
    pub pos: (i32, i32),
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    pub pose: Pose,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LowLevelOp {
    Move(Direction),
    Rotate { quarter_turns: i8 },
    Act { object: String, operator: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectMode {
    /// Noisy detections.
    Nd,
    /// Ground-truth detections.
    Gtd,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub percept: Percept,
    /// Visible failure: out-of-range act or unknown operator.
    pub failed: bool,
    pub out_of_bounds: bool,
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    pub objects: Vec<WorldObject>,
    /// Fixed per-(type, property) unit signal directions.
    directions: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    pub pose: Pose,
    pub steps: u64,
    rng: ChaCha8Rng,
}

pub fn generate_world(cfg: &WorldConfig) -> Result<World, WorldError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.feature_dim;
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut type_protos: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut directions: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for ty in cfg.objects.keys() {
        let proto: Vec<f64> = (0..d).map(|_| std_normal.sample(&mut rng)).collect();
        type_protos.insert(ty.clone(), proto);
        let mut dirs = BTreeMap::new();
        for prop in cfg.applicable.get(ty).cloned().unwrap_or_default() {
            let mut v: Vec<f64> = (0..d).map(|_| std_normal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.iter_mut().for_each(|x| *x /= norm);
            dirs.insert(prop, v);
        }
        directions.insert(ty.clone(), dirs);
    }

    let mut cells: Vec<(i32, i32)> = (0..cfg.width as i32)
        .flat_map(|x| (0..cfg.height as i32).map(move |y| (x, y)))
        .collect();
    cells.shuffle(&mut rng);
    let mut next_cell = 0usize;

    let mut objects = Vec::new();
    for (ty, &count) in &cfg.objects {
        for i in 0..count {
            let pos = cells[next_cell];
            next_cell += 1;
            let mut props = BTreeMap::new();
            for prop in cfg.applicable.get(ty).cloned().unwrap_or_default() {
                let p = cfg.prior(ty, &prop);
                props.insert(prop, rng.gen_bool(p));
            }
            let spread = Normal::new(0.0, cfg.prototype_spread.max(1e-12)).unwrap();
            let prototype: Vec<f64> = type_protos[ty]
                .iter()
                .map(|x| x + spread.sample(&mut rng))
                .collect();
            objects.push(WorldObject {
                id: format!("{}{}", ty.to_lowercase(), i),
                ty: ty.clone(),
                pos,
                props,
                prototype,
            });
        }
    }

    let pose = Pose {
        x: rng.gen_range(0..cfg.width as i32),
        y: rng.gen_range(0..cfg.height as i32),
        heading: rng.gen_range(0..4u8),
    };
    Ok(World { cfg: cfg.clone(), objects, directions, pose, steps: 0, rng })
}

impl World {
    /// Clone with a fresh RNG stream, for sampling that must not perturb
    /// the owning run (e.g. test-set generation).
    pub fn reseeded(&self, seed: u64) -> World {
        let mut w = self.clone();
        w.rng = ChaCha8Rng::seed_from_u64(seed);
        w
    }

    /// Re-draw every applicable property as an independent coin flip, so a
    /// sampled population covers both polarities regardless of run history.
    pub fn resample_props(&mut self, prob: f64) {
        for i in 0..self.objects.len() {
            let keys: Vec<String> = self.objects[i].props.keys().cloned().collect();
            for k in keys {
                let v = self.rng.gen_bool(prob);
                self.objects[i].props.insert(k, v);
            }
        }
    }

    pub fn object(&self, id: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn object_mut(&mut self, id: &str) -> Option<&mut WorldObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn distance_to(&self, pos: (i32, i32)) -> f64 {
        let dx = (pos.0 - self.pose.x) as f64;
        let dy = (pos.1 - self.pose.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// A cell is visible when it is within sensing range and inside the
    /// view cone around the agent heading. The agent's own cell always is.
    pub fn cell_visible(&self, pos: (i32, i32)) -> bool {
        let dx = (pos.0 - self.pose.x) as f64;
        let dy = (pos.1 - self.pose.y) as f64;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist > self.cfg.sensing_range {
            return false;
        }
        if dist == 0.0 {
            return true;
        }
        let (hx, hy) = self.pose.heading_vec();
        let cos = (dx * hx + dy * hy) / dist;
        cos >= self.cfg.fov_half_deg.to_radians().cos() - 1e-12
    }

    pub fn visible_objects(&self) -> Vec<&WorldObject> {
        self.objects.iter().filter(|o| self.cell_visible(o.pos)).collect()
    }

    pub fn visible_cells(&self) -> Vec<(i32, i32)> {
        (0..self.cfg.width as i32)
            .flat_map(|x| (0..self.cfg.height as i32).map(move |y| (x, y)))
            .filter(|&c| self.cell_visible(c))
            .collect()
    }

    /// Noise-free feature vector: prototype plus the signal direction of
    /// every currently-true property.
    pub fn noiseless_view(&self, obj: &WorldObject) -> Vec<f64> {
        let mut v = obj.prototype.clone();
        for (prop, &val) in &obj.props {
            if !val {
                continue;
            }
            let s = self.cfg.signal_strength(&obj.ty, prop);
            if let Some(dir) = self.directions.get(&obj.ty).and_then(|m| m.get(prop)) {
                for (vi, di) in v.iter_mut().zip(dir) {
                    *vi += s * di;
                }
            }
        }
        v
    }

    /// `k` views of a visible object, each with fresh Gaussian view noise.
    pub fn render_views(&mut self, object_id: &str, k: usize) -> Result<Vec<Vec<f64>>, WorldError> {
        let obj = self
            .object(object_id)
            .ok_or_else(|| WorldError::UnknownObject(object_id.into()))?;
        if !self.cell_visible(obj.pos) {
            return Err(WorldError::NotVisible(object_id.into()));
        }
        let base = self.noiseless_view(obj);
        let mut views = Vec::with_capacity(k);
        for _ in 0..k {
            views.push(self.jitter(&base, self.cfg.view_sigma));
        }
        Ok(views)
    }

    /// World object occupying the given cell, if any.
    pub fn object_id_at(&self, pos: (i32, i32)) -> Option<String> {
        self.objects.iter().find(|o| o.pos == pos).map(|o| o.id.clone())
    }

    /// Views of whatever object actually occupies the cell; an anchor can
    /// point at a cell holding nothing, which is a failed observation.
    pub fn render_views_at(
        &mut self,
        pos: (i32, i32),
        k: usize,
    ) -> Result<Vec<Vec<f64>>, WorldError> {
        let id = self
            .object_id_at(pos)
            .ok_or_else(|| WorldError::UnknownObject(format!("cell ({},{})", pos.0, pos.1)))?;
        self.render_views(&id, k)
    }

    fn jitter(&mut self, base: &[f64], sigma: f64) -> Vec<f64> {
        if sigma <= 0.0 {
            return base.to_vec();
        }
        let n = Normal::new(0.0, sigma).unwrap();
        base.iter().map(|x| x + n.sample(&mut self.rng)).collect()
    }

    /// Execute a low-level operation and return the percept from the new
    /// pose. Ground truth is mutated only by `Act`.
    pub fn step(&mut self, op: &LowLevelOp, mode: DetectMode) -> StepResult {
        self.steps += 1;
        let mut failed = false;
        let mut out_of_bounds = false;
        match op {
            LowLevelOp::Move(dir) => {
                let (dx, dy) = dir.delta();
                let nx = self.pose.x + dx;
                let ny = self.pose.y + dy;
                if nx < 0 || ny < 0 || nx >= self.cfg.width as i32 || ny >= self.cfg.height as i32 {
                    out_of_bounds = true;
                } else {
                    self.pose.x = nx;
                    self.pose.y = ny;
                }
            }
            LowLevelOp::Rotate { quarter_turns } => {
                self.pose.heading =
                    ((self.pose.heading as i32 + *quarter_turns as i32).rem_euclid(4)) as u8;
            }
            LowLevelOp::Act { object, operator } => {
                failed = !self.do_act(object, operator);
            }
        }
        StepResult { percept: self.detect(mode), failed, out_of_bounds }
    }

    fn do_act(&mut self, object: &str, operator: &str) -> bool {
        let effect = match self.cfg.operator_effects.get(operator) {
            Some(e) => e.clone(),
            None => return false,
        };
        let range = self.cfg.interaction_range;
        let fail_p = self.cfg.act_failure_rate;
        let silent_fail = fail_p > 0.0 && self.rng.gen_bool(fail_p);
        let pos = match self.object(object) {
            Some(o) => o.pos,
            None => return false,
        };
        if self.distance_to(pos) > range {
            return false;
        }
        let obj = self.object_mut(object).unwrap();
        if !obj.props.contains_key(&effect.property) {
            // property not applicable to this type
            return false;
        }
        if !silent_fail {
            obj.props.insert(effect.property.clone(), effect.value);
        }
        true
    }

    /// Run the object detector from the current pose.
    pub fn detect(&mut self, mode: DetectMode) -> Percept {
        let visible: Vec<usize> = (0..self.objects.len())
            .filter(|&i| self.cell_visible(self.objects[i].pos))
            .collect();
        let mut detections = Vec::new();
        match mode {
            DetectMode::Gtd => {
                for i in visible {
                    let obj = &self.objects[i];
                    detections.push(Detection {
                        reported_type: obj.ty.clone(),
                        features: self.noiseless_view(obj),
                        pos: obj.pos,
                        confidence: 1.0,
                    });
                }
            }
            DetectMode::Nd => {
                let noise = self.cfg.detector;
                let types: Vec<String> = self.cfg.objects.keys().cloned().collect();
                for i in visible {
                    if noise.miss_rate > 0.0 && self.rng.gen_bool(noise.miss_rate) {
                        continue;
                    }
                    let obj = &self.objects[i];
                    let mut ty = obj.ty.clone();
                    if noise.misclass_rate > 0.0
                        && types.len() > 1
                        && self.rng.gen_bool(noise.misclass_rate)
                    {
                        let others: Vec<&String> =
                            types.iter().filter(|t| **t != obj.ty).collect();
                        ty = (*others[self.rng.gen_range(0..others.len())]).clone();
                    }
                    let base = self.noiseless_view(obj);
                    let pos = obj.pos;
                    let features = self.jitter(&base, noise.feature_jitter);
                    detections.push(Detection {
                        reported_type: ty,
                        features,
                        pos,
                        confidence: 0.9,
                    });
                }
                if noise.spurious_rate > 0.0 && self.rng.gen_bool(noise.spurious_rate) {
                    let cells = self.visible_cells();
                    if !cells.is_empty() && !types.is_empty() {
                        let pos = cells[self.rng.gen_range(0..cells.len())];
                        let ty = types[self.rng.gen_range(0..types.len())].clone();
                        let n = Normal::new(0.0, 1.0).unwrap();
                        let features: Vec<f64> = (0..self.cfg.feature_dim)
                            .map(|_| n.sample(&mut self.rng))
                            .collect();
                        detections.push(Detection {
                            reported_type: ty,
                            features,
                            pos,
                            confidence: 0.5,
                        });
                    }
                }
            }
        }
        Percept { pose: self.pose, detections }
    }

    /// Uniformly random low-level motion op, for random-walk sampling.
    pub fn random_walk_op(&mut self) -> LowLevelOp {
        let u = Uniform::new(0u8, 6).sample(&mut self.rng);
        match u {
            0..=3 => LowLevelOp::Move(Direction::from_index(u)),
            4 => LowLevelOp::Rotate { quarter_turns: 1 },
            _ => LowLevelOp::Rotate { quarter_turns: -1 },
        }
    }

    /// Debug dump: everything except the RNG state.
    pub fn dump_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.cfg,
            "objects": self.objects,
            "pose": self.pose,
            "steps": self.steps,
        })
    }
}
