//! The plan-execute-observe-replan control loop: symbolic actions are
//! compiled to low-level grid operations, observations are labeled from
//! the agent's `Known` atoms, and the symbolic state is rebuilt from
//! perception plus execution monitors after every action.

use crate::learn::{
    build_goal, extend, ExtensionReport, LearnError, TypePropertyPair, EXPLORED_FOR,
    EXPLORE_FOR, KNOWN, LEARNED, OBSERVE, SUFFICIENT_OBS, TRAIN, VIEWED,
};
use crate::pddl::{
    apply, eval_formula, Domain, Formula, GroundAction, GroundAtom, PddlError,
    PredicateKind, State,
};
use crate::perception::{
    classifier_train, AnchorStore, ClassifierModel, PerceptionError, Sample, TrainingSet,
};
use crate::planner::{
    plan as plan_search, PlanOutcome, PlannerError, PlanningProblem, SearchLimits,
};
use crate::sim::{
    generate_world, DetectMode, Direction, LowLevelOp, Percept, World, WorldConfig,
    WorldError,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub pairs: Vec<TypePropertyPair>,
    pub mode: DetectMode,
    /// Observations per polarity before Sufficient_Obs is judged true.
    pub n_min: usize,
    /// Views collected per Observe action.
    pub views_per_observe: usize,
    /// Low-level step cap per Explore_for call.
    pub explore_step_cap: usize,
    /// Total exploration step budget per run.
    pub explore_budget: usize,
    pub max_iterations: u64,
    pub delta_pos: f64,
    /// Feature-matching threshold; `None` derives it from the noise model.
    pub delta_feat: Option<f64>,
    pub threshold: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Retrain from current weights; `false` re-initializes first.
    pub warm_start: bool,
    pub closeness_pred: String,
    pub close_op: String,
    pub planner_expansions: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            pairs: Vec::new(),
            mode: DetectMode::Gtd,
            n_min: 50,
            views_per_observe: 8,
            explore_step_cap: 50,
            explore_budget: 600,
            max_iterations: 2000,
            delta_pos: 1.0,
            delta_feat: None,
            threshold: 0.5,
            epochs: 10,
            learning_rate: 1e-4,
            warm_start: true,
            closeness_pred: "Close_To".into(),
            close_op: "Go_Close_To".into(),
            planner_expansions: 200_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GoalLearned,
    ExploredExhausted,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAction {
    pub action: String,
    pub success: bool,
    /// Dataset sizes after the action, keyed "type/prop".
    pub datasets_after: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub termination: Termination,
    pub iterations: u64,
    pub replans: u64,
    pub executed: Vec<ExecutedAction>,
    pub dataset_sizes: BTreeMap<String, usize>,
    pub discovered_constants: Vec<String>,
}

pub struct RunOutput {
    pub report: RunReport,
    pub extended: Domain,
    pub extension: ExtensionReport,
    /// Trained (or initialized) model per pair, keyed (type_name, prop_name).
    pub models: BTreeMap<(String, String), ClassifierModel>,
    /// Collected sets per (type_name, prop_name) including not_* polarities.
    pub datasets: BTreeMap<(String, String), TrainingSet>,
    pub world: World,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Pddl(#[from] PddlError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("goal became unsolvable at iteration {0}")]
    Unsolvable(u64),
    #[error("world object type {0} is not a declared type-predicate of the base domain")]
    UndeclaredWorldType(String),
    #[error("trace write failed: {0}")]
    Trace(#[from] std::io::Error),
}

struct Agent<'a> {
    cfg: &'a AgentConfig,
    domain: Domain,
    goal: Formula,
    world: World,
    anchors: AnchorStore,
    state: State,
    datasets: BTreeMap<(String, String), TrainingSet>,
    models: BTreeMap<(String, String), ClassifierModel>,
    viewed: BTreeSet<(String, String, String)>,
    trained: BTreeSet<(String, String, String)>,
    seen_cells: BTreeSet<(i32, i32)>,
    explore_used: usize,
    iterations: u64,
    type_preds: BTreeSet<String>,
}

/// Run the full control loop on a fresh world. The trace sink receives one
/// JSON record per executed symbolic action.
pub fn run(
    base: &Domain,
    cfg: &AgentConfig,
    world_cfg: &WorldConfig,
    mut trace: Option<&mut dyn Write>,
) -> Result<RunOutput, AgentError> {
    for ty in world_cfg.objects.keys() {
        match base.predicates.get(ty) {
            Some(p) if p.kind == PredicateKind::Type => {}
            _ => return Err(AgentError::UndeclaredWorldType(ty.clone())),
        }
    }
    let (extended, extension) = extend(base, &cfg.pairs, cfg.n_min, &cfg.closeness_pred)?;
    let goal = build_goal(&cfg.pairs)?;
    let world = generate_world(world_cfg)?;

    let delta_feat = cfg.delta_feat.unwrap_or_else(|| {
        let sigma = world_cfg
            .view_sigma
            .max(world_cfg.detector.feature_jitter)
            * (2.0 * world_cfg.feature_dim as f64).sqrt();
        (3.0 * sigma).max(0.5)
    });

    let mut datasets = BTreeMap::new();
    let mut models = BTreeMap::new();
    for (i, pair) in cfg.pairs.iter().enumerate() {
        let t = pair.type_name();
        for p in [pair.prop_name(), pair.neg_prop_name()] {
            datasets.insert((t.clone(), p.clone()), TrainingSet::new(t.clone(), p));
        }
        models.insert(
            (t.clone(), pair.prop_name()),
            ClassifierModel::init(
                t.clone(),
                pair.prop_name(),
                world_cfg.feature_dim,
                cfg.threshold,
                cfg.epochs,
                cfg.learning_rate,
                cfg.seed.wrapping_add(i as u64),
            ),
        );
    }

    let type_preds = base.type_predicates().map(|p| p.name.clone()).collect();
    let mut agent = Agent {
        cfg,
        domain: extended.clone(),
        goal,
        world,
        anchors: AnchorStore::new(cfg.delta_pos, delta_feat),
        state: State::new(),
        datasets,
        models,
        viewed: BTreeSet::new(),
        trained: BTreeSet::new(),
        seen_cells: BTreeSet::new(),
        explore_used: 0,
        iterations: 0,
        type_preds,
    };

    let mut executed = Vec::new();
    let mut replans = 0u64;
    let mut plan = agent.replan()?;
    while !plan.is_empty() && agent.iterations < cfg.max_iterations {
        let action = plan.steps.remove(0);
        // update the symbolic state by the action schema effects
        match apply(&agent.state, &action) {
            Ok(next) => agent.state = next,
            Err(_) => {
                // a fresh plan whose first precondition fails should not
                // happen; consume an iteration and replan
                agent.iterations += 1;
                plan = agent.replan()?;
                replans += 1;
                continue;
            }
        }
        let before = agent.iterations;
        let success = agent.execute(&action)?;
        if agent.iterations == before {
            agent.iterations += 1;
        }
        let record = ExecutedAction {
            action: action.id(),
            success,
            datasets_after: agent.dataset_sizes(),
        };
        if let Some(w) = trace.as_deref_mut() {
            serde_json::to_writer(&mut *w, &serde_json::json!({
                "action": record.action,
                "success": record.success,
                "iteration": agent.iterations,
                "datasets": record.datasets_after,
                "constants": agent.domain.constants.len(),
            }))
            .map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        executed.push(record);
        agent.observe_state();
        plan = agent.replan()?;
        replans += 1;
    }

    let goal_holds = eval_formula(&agent.state, &agent.domain, &agent.goal)?;
    let all_learned = cfg.pairs.iter().all(|pair| {
        agent.state.contains(&GroundAtom {
            pred: LEARNED.into(),
            args: vec![pair.type_name(), pair.prop_name(), pair.neg_prop_name()],
        })
    });
    let termination = if goal_holds && all_learned {
        Termination::GoalLearned
    } else if goal_holds {
        Termination::ExploredExhausted
    } else {
        Termination::Budget
    };
    let report = RunReport {
        termination,
        iterations: agent.iterations,
        replans,
        executed,
        dataset_sizes: agent.dataset_sizes(),
        discovered_constants: agent.anchors.anchors.keys().cloned().collect(),
    };
    Ok(RunOutput {
        report,
        extended,
        extension,
        models: agent.models,
        datasets: agent.datasets,
        world: agent.world,
    })
}

impl<'a> Agent<'a> {
    fn dataset_sizes(&self) -> BTreeMap<String, usize> {
        self.datasets
            .iter()
            .map(|((t, p), set)| (format!("{t}/{p}"), set.len()))
            .collect()
    }

    /// Learning-first replanning. The disjunctive goal is trivially
    /// satisfiable by a one-step Explore_for plan, so a satisficing planner
    /// handed the raw goal would explore forever and never collect data.
    /// Instead the agent first plans for the Learned atoms themselves in a
    /// domain without Explore_for (jointly, then pair by pair), and only
    /// when no learning plan exists does it plan for the full goal, where
    /// exploration is the natural escape.
    fn replan(&mut self) -> Result<crate::pddl::Plan, AgentError> {
        let limits = SearchLimits { max_expansions: self.cfg.planner_expansions };
        let mut strict = self.domain.clone();
        strict.schemas.remove(EXPLORE_FOR);
        let unlearned: Vec<Formula> = self
            .cfg
            .pairs
            .iter()
            .filter(|pair| {
                !self.state.contains(&GroundAtom {
                    pred: LEARNED.into(),
                    args: vec![pair.type_name(), pair.prop_name(), pair.neg_prop_name()],
                })
            })
            .map(|pair| learned_lit(pair))
            .collect();
        let mut attempts: Vec<Formula> = Vec::new();
        if unlearned.len() > 1 {
            attempts.push(Formula::And(unlearned.clone()));
        }
        attempts.extend(unlearned);
        for goal in attempts {
            let problem = PlanningProblem {
                domain: strict.clone(),
                init: self.state.clone(),
                goal,
            };
            if let Ok(result) = plan_search(&problem, limits) {
                if let PlanOutcome::Plan(p) = result.outcome {
                    if !p.is_empty() || self.goal_holds()? {
                        return Ok(p);
                    }
                }
            }
        }
        let problem = PlanningProblem {
            domain: self.domain.clone(),
            init: self.state.clone(),
            goal: self.goal.clone(),
        };
        match plan_search(&problem, limits)?.outcome {
            PlanOutcome::Plan(p) => Ok(p),
            PlanOutcome::Unsolvable => Err(AgentError::Unsolvable(self.iterations)),
        }
    }

    fn goal_holds(&self) -> Result<bool, AgentError> {
        Ok(eval_formula(&self.state, &self.domain, &self.goal)?)
    }

    /// Process one percept: anchors, discovered constants, coverage.
    fn ingest(&mut self, percept: &Percept) {
        for cell in self.world.visible_cells() {
            self.seen_cells.insert(cell);
        }
        for det in &percept.detections {
            let (constant, _new) = self.anchors.match_or_insert(det);
            self.domain
                .constants
                .entry(constant)
                .or_insert_with(|| det.reported_type.clone());
        }
    }

    fn sense(&mut self) {
        let percept = self.world.detect(self.cfg.mode);
        self.ingest(&percept);
    }

    /// One low-level world step, accounted against the iteration budget.
    fn low_level(&mut self, op: LowLevelOp) -> crate::sim::StepResult {
        let res = self.world.step(&op, self.cfg.mode);
        self.iterations += 1;
        self.ingest(&res.percept.clone());
        res
    }

    /// Rebuild the symbolic state: persistent belief atoms (Known and base
    /// property atoms), perceptual atoms from anchors and distances, and
    /// monitor-evaluated atoms.
    fn observe_state(&mut self) {
        self.sense();
        let monitor: BTreeSet<&str> =
            [SUFFICIENT_OBS, EXPLORED_FOR, LEARNED, VIEWED].into_iter().collect();
        let mut atoms: BTreeSet<GroundAtom> = self
            .state
            .atoms
            .iter()
            .filter(|a| {
                a.pred != self.cfg.closeness_pred
                    && a.pred != "Discovered"
                    && !self.type_preds.contains(&a.pred)
                    && !monitor.contains(a.pred.as_str())
            })
            .cloned()
            .collect();
        // reified-name type atoms
        for (c, ty) in &self.domain.constants {
            if self.anchors.anchors.contains_key(c) {
                continue;
            }
            atoms.insert(GroundAtom { pred: ty.clone(), args: vec![c.clone()] });
        }
        let has_discovered = self.domain.predicates.contains_key("Discovered");
        for anchor in self.anchors.anchors.values() {
            atoms.insert(GroundAtom {
                pred: anchor.ty.clone(),
                args: vec![anchor.constant.clone()],
            });
            if has_discovered {
                atoms.insert(GroundAtom {
                    pred: "Discovered".into(),
                    args: vec![anchor.constant.clone()],
                });
            }
            if self.world.distance_to(anchor.last_pos) <= self.world.cfg.interaction_range {
                atoms.insert(GroundAtom {
                    pred: self.cfg.closeness_pred.clone(),
                    args: vec![anchor.constant.clone()],
                });
            }
        }
        // Closed-world discovery belief: a newly anchored object of an
        // interesting type is believed to not have the property until some
        // action effect says otherwise.
        for pair in self.cfg.pairs.clone() {
            for anchor in self.anchors.anchors.values() {
                if anchor.ty != pair.type_pred {
                    continue;
                }
                let known = |prop: String| GroundAtom {
                    pred: KNOWN.into(),
                    args: vec![anchor.constant.clone(), pair.type_name(), prop],
                };
                if !atoms.contains(&known(pair.prop_name()))
                    && !atoms.contains(&known(pair.neg_prop_name()))
                {
                    atoms.insert(known(pair.neg_prop_name()));
                }
            }
        }
        for (o, t, p) in &self.viewed {
            atoms.insert(GroundAtom {
                pred: VIEWED.into(),
                args: vec![o.clone(), t.clone(), p.clone()],
            });
        }
        for (t, p, q) in &self.trained {
            atoms.insert(GroundAtom {
                pred: LEARNED.into(),
                args: vec![t.clone(), p.clone(), q.clone()],
            });
        }
        for ((t, p), set) in &self.datasets {
            if set.len() >= self.cfg.n_min {
                atoms.insert(GroundAtom {
                    pred: SUFFICIENT_OBS.into(),
                    args: vec![t.clone(), p.clone()],
                });
            }
        }
        let total_cells =
            (self.world.cfg.width as usize) * (self.world.cfg.height as usize);
        if self.seen_cells.len() >= total_cells || self.explore_used >= self.cfg.explore_budget
        {
            for pair in &self.cfg.pairs {
                atoms.insert(GroundAtom {
                    pred: EXPLORED_FOR.into(),
                    args: vec![pair.type_name()],
                });
            }
        }
        self.state = State { atoms };
    }

    /// Compile and execute one symbolic action. Returns whether execution
    /// visibly succeeded.
    fn execute(&mut self, action: &GroundAction) -> Result<bool, AgentError> {
        let op = action.operator.clone();
        if op == self.cfg.close_op {
            Ok(self.exec_go_close(&action.args[0]))
        } else if op == OBSERVE {
            self.exec_observe(&action.args[0], &action.args[1], &action.args[2])
        } else if op == EXPLORE_FOR {
            self.exec_explore();
            Ok(true)
        } else if op == TRAIN {
            Ok(self.exec_train(&action.args[0], &action.args[1], &action.args[2]))
        } else {
            Ok(self.exec_act(&op, &action.args))
        }
    }

    fn exec_go_close(&mut self, constant: &str) -> bool {
        let target = match self.anchors.anchors.get(constant) {
            Some(a) => a.last_pos,
            None => return false,
        };
        let mut guard = 0;
        while self.world.distance_to(target) > self.world.cfg.interaction_range {
            if self.iterations >= self.cfg.max_iterations || guard > 4 * (self.world.cfg.width + self.world.cfg.height) {
                return false;
            }
            guard += 1;
            let dir = step_toward(self.world.pose.x, self.world.pose.y, target);
            self.low_level(LowLevelOp::Move(dir));
        }
        self.face(target);
        true
    }

    /// Rotate until the target cell is inside the view cone.
    fn face(&mut self, target: (i32, i32)) {
        for _ in 0..3 {
            if self.world.cell_visible(target) {
                return;
            }
            self.low_level(LowLevelOp::Rotate { quarter_turns: 1 });
        }
    }

    fn exec_observe(&mut self, o: &str, t: &str, p: &str) -> Result<bool, AgentError> {
        let key = (o.to_string(), t.to_string(), p.to_string());
        // one Observe per (object, property) per run, even on failure
        self.viewed.insert(key);
        let pos = match self.anchors.anchors.get(o) {
            Some(a) => a.last_pos,
            None => return Ok(false),
        };
        self.face(pos);
        let k = self.cfg.views_per_observe;
        let views = match self.world.render_views_at(pos, k) {
            Ok(v) => v,
            Err(_) => return Ok(false),
        };
        self.iterations += k as u64;
        // label from the agent's Known valuation, never from ground truth
        let positive = !p.starts_with("\"not_");
        if let Some(set) = self.datasets.get_mut(&(t.to_string(), p.to_string())) {
            for features in views {
                set.add(Sample {
                    features,
                    positive,
                    source: o.to_string(),
                    step: self.iterations,
                });
            }
            Ok(true)
        } else {
            // pair not of interest; the views are discarded
            Ok(false)
        }
    }

    fn exec_explore(&mut self) {
        let mut steps = 0;
        while steps < self.cfg.explore_step_cap
            && self.explore_used < self.cfg.explore_budget
            && self.iterations < self.cfg.max_iterations
        {
            let total =
                (self.world.cfg.width as usize) * (self.world.cfg.height as usize);
            if self.seen_cells.len() >= total {
                break;
            }
            // sweep the current cell, then walk toward the nearest unseen cell
            for _ in 0..3 {
                self.low_level(LowLevelOp::Rotate { quarter_turns: 1 });
                steps += 1;
                self.explore_used += 1;
            }
            if let Some(target) = self.nearest_unseen() {
                for _ in 0..4 {
                    if (self.world.pose.x, self.world.pose.y) == target
                        || steps >= self.cfg.explore_step_cap
                    {
                        break;
                    }
                    let dir = step_toward(self.world.pose.x, self.world.pose.y, target);
                    self.low_level(LowLevelOp::Move(dir));
                    steps += 1;
                    self.explore_used += 1;
                }
            }
        }
    }

    fn nearest_unseen(&self) -> Option<(i32, i32)> {
        let (w, h) = (self.world.cfg.width as i32, self.world.cfg.height as i32);
        let start = (self.world.pose.x, self.world.pose.y);
        let mut queue = VecDeque::new();
        let mut visited = BTreeSet::new();
        queue.push_back(start);
        visited.insert(start);
        while let Some(cell) = queue.pop_front() {
            if !self.seen_cells.contains(&cell) {
                return Some(cell);
            }
            for d in [(1, 0), (0, 1), (-1, 0), (0, -1)] {
                let n = (cell.0 + d.0, cell.1 + d.1);
                if n.0 >= 0 && n.1 >= 0 && n.0 < w && n.1 < h && visited.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        None
    }

    fn exec_train(&mut self, t: &str, p: &str, q: &str) -> bool {
        let pos_key = (t.to_string(), p.to_string());
        let neg_key = (t.to_string(), q.to_string());
        let model_key = if p.starts_with("\"not_") { neg_key.clone() } else { pos_key.clone() };
        self.iterations += 1;
        let (positives, negatives) = match (self.datasets.get(&pos_key), self.datasets.get(&neg_key)) {
            (Some(a), Some(b)) => (a, b),
            _ => return false,
        };
        let model = match self.models.get(&model_key) {
            Some(m) => m,
            None => return false,
        };
        let base = if self.cfg.warm_start {
            model.clone()
        } else {
            ClassifierModel::init(
                model.type_name.clone(),
                model.prop_name.clone(),
                model.dim(),
                model.threshold,
                model.epochs,
                model.learning_rate,
                self.cfg.seed,
            )
        };
        match classifier_train(&base, positives, negatives) {
            Ok(trained) => {
                self.models.insert(model_key, trained);
                self.trained
                    .insert((t.to_string(), p.to_string(), q.to_string()));
                true
            }
            Err(_) => false,
        }
    }

    /// Base-domain operator: resolve the world object under the anchor and
    /// act on it.
    fn exec_act(&mut self, operator: &str, args: &[String]) -> bool {
        let constant = match args.first() {
            Some(c) => c,
            None => return false,
        };
        let pos = match self.anchors.anchors.get(constant) {
            Some(a) => a.last_pos,
            None => return false,
        };
        let object = match self.world.object_id_at(pos) {
            Some(id) => id,
            None => return false,
        };
        let res = self.low_level(LowLevelOp::Act { object, operator: operator.into() });
        !res.failed
    }
}

fn learned_lit(pair: &TypePropertyPair) -> Formula {
    Formula::pos(crate::pddl::Atom::new(
        LEARNED,
        vec![
            crate::pddl::Term::Const(pair.type_name()),
            crate::pddl::Term::Const(pair.prop_name()),
            crate::pddl::Term::Const(pair.neg_prop_name()),
        ],
    ))
}

fn step_toward(x: i32, y: i32, target: (i32, i32)) -> Direction {
    let dx = target.0 - x;
    let dy = target.1 - y;
    if dx.abs() >= dy.abs() {
        if dx > 0 {
            Direction::East
        } else {
            Direction::West
        }
    } else if dy > 0 {
        Direction::North
    } else {
        Direction::South
    }
}
