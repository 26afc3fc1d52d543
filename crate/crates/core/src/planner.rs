//! Forward state-space planner: greedy best-first search on a
//! delete-relaxation heuristic with an A* fallback, plus an exhaustive
//! breadth-first oracle for testing.

use crate::pddl::{
    ground, ground_formula, holds, Domain, Formula, GroundAction, GroundAtom,
    GroundFormula, PddlError, Plan, State,
};
use serde::Serialize;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::cmp::Reverse;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningProblem {
    pub domain: Domain,
    pub init: State,
    pub goal: Formula,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub heuristic_evals: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Plan(Plan),
    Unsolvable,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub outcome: PlanOutcome,
    pub stats: SearchStats,
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("node budget of {budget} exceeded")]
    NodeBudgetExceeded { budget: usize },
    #[error(transparent)]
    Pddl(#[from] PddlError),
}

#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    pub max_expansions: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_expansions: 1 << 20 }
    }
}

const INF: u64 = u64::MAX / 4;

/// Additive delete-relaxation heuristic. Disjunctions evaluate as the
/// minimum over disjuncts. A negative literal is free when the atom is
/// currently false, costs one step when some action can delete it, and is
/// infinite when the atom is true and no action deletes it; the last case
/// is exact, because such an atom stays true in every reachable state.
/// Returns `None` for infinity (goal unreachable in the relaxation).
pub fn h_relaxed(
    state: &State,
    goal: &GroundFormula,
    actions: &[GroundAction],
) -> Option<u64> {
    if holds(state, goal) {
        return Some(0);
    }
    let mut cost: HashMap<&GroundAtom, u64> = HashMap::new();
    for atom in &state.atoms {
        cost.insert(atom, 0);
    }
    let deletable: HashSet<&GroundAtom> =
        actions.iter().flat_map(|a| a.eff_del.iter()).collect();
    fn relaxed_cost(
        f: &GroundFormula,
        cost: &HashMap<&GroundAtom, u64>,
        state: &State,
        deletable: &HashSet<&GroundAtom>,
    ) -> u64 {
        match f {
            GroundFormula::Lit { positive: false, atom } => {
                if !state.contains(atom) {
                    0
                } else if deletable.contains(atom) {
                    1
                } else {
                    INF
                }
            }
            GroundFormula::Lit { positive: true, atom } => {
                *cost.get(atom).unwrap_or(&INF)
            }
            GroundFormula::And(fs) => {
                let mut sum = 0u64;
                for f in fs {
                    sum = sum.saturating_add(relaxed_cost(f, cost, state, deletable));
                }
                sum.min(INF)
            }
            GroundFormula::Or(fs) => {
                if fs.is_empty() {
                    INF
                } else {
                    fs.iter()
                        .map(|f| relaxed_cost(f, cost, state, deletable))
                        .min()
                        .unwrap()
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for a in actions {
            let c = relaxed_cost(&a.pre, &cost, state, &deletable);
            if c >= INF {
                continue;
            }
            for add in &a.eff_add {
                let new = c.saturating_add(1);
                let entry = cost.entry(add).or_insert(INF);
                if new < *entry {
                    *entry = new;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let h = relaxed_cost(goal, &cost, state, &deletable);
    if h >= INF {
        None
    } else {
        // The goal does not hold in `state`, so at least one action is needed.
        Some(h.max(1))
    }
}

enum Strategy {
    Greedy,
    AStar,
}

/// Plan for the problem: greedy best-first first, A* on the same heuristic
/// if the node budget is hit. The returned plan validates against the
/// domain; `Unsolvable` means the reachable space was exhausted.
pub fn plan(
    problem: &PlanningProblem,
    limits: SearchLimits,
) -> Result<PlanResult, PlannerError> {
    let start = Instant::now();
    let actions = {
        let mut a = ground(&problem.domain)?;
        a.sort();
        a
    };
    let goal = ground_formula(&problem.domain, &problem.goal)?;
    let mut stats = SearchStats::default();
    match search(problem, &actions, &goal, Strategy::Greedy, limits, &mut stats) {
        Ok(outcome) => {
            stats.wall_time = start.elapsed();
            Ok(PlanResult { outcome, stats })
        }
        Err(_) => {
            let outcome =
                search(problem, &actions, &goal, Strategy::AStar, limits, &mut stats)?;
            stats.wall_time = start.elapsed();
            Ok(PlanResult { outcome, stats })
        }
    }
}

fn search(
    problem: &PlanningProblem,
    actions: &[GroundAction],
    goal: &GroundFormula,
    strategy: Strategy,
    limits: SearchLimits,
    stats: &mut SearchStats,
) -> Result<PlanOutcome, PlannerError> {
    struct Node {
        state: State,
        parent: Option<(usize, usize)>, // (node index, action index)
        depth: u64,
    }
    let mut nodes: Vec<Node> = vec![Node { state: problem.init.clone(), parent: None, depth: 0 }];
    // Priority, then FIFO sequence number for tie-breaking.
    let mut open: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(problem.init.clone());
    stats.heuristic_evals += 1;
    let h0 = match h_relaxed(&problem.init, goal, actions) {
        Some(h) => h,
        None => return Ok(PlanOutcome::Unsolvable),
    };
    let mut seq = 0u64;
    open.push(Reverse((h0, seq, 0)));
    let mut expansions = 0usize;
    while let Some(Reverse((_, _, idx))) = open.pop() {
        if holds(&nodes[idx].state, goal) {
            let mut steps = Vec::new();
            let mut cur = idx;
            while let Some((p, ai)) = nodes[cur].parent {
                steps.push(actions[ai].clone());
                cur = p;
            }
            steps.reverse();
            return Ok(PlanOutcome::Plan(Plan { steps }));
        }
        if expansions >= limits.max_expansions {
            return Err(PlannerError::NodeBudgetExceeded { budget: limits.max_expansions });
        }
        expansions += 1;
        stats.expanded += 1;
        for (ai, action) in actions.iter().enumerate() {
            if !holds(&nodes[idx].state, &action.pre) {
                continue;
            }
            let mut atoms = nodes[idx].state.atoms.clone();
            for d in &action.eff_del {
                atoms.remove(d);
            }
            for a in &action.eff_add {
                atoms.insert(a.clone());
            }
            let next = State { atoms };
            if !seen.insert(next.clone()) {
                continue;
            }
            stats.generated += 1;
            stats.heuristic_evals += 1;
            let h = match h_relaxed(&next, goal, actions) {
                Some(h) => h,
                None => continue, // a relaxation dead end is a real dead end
            };
            let depth = nodes[idx].depth + 1;
            let priority = match strategy {
                Strategy::Greedy => h,
                Strategy::AStar => depth + h,
            };
            seq += 1;
            nodes.push(Node { state: next, parent: Some((idx, ai)), depth });
            open.push(Reverse((priority, seq, nodes.len() - 1)));
        }
    }
    Ok(PlanOutcome::Unsolvable)
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("state bound of {bound} exceeded")]
    BoundExceeded { bound: usize },
    #[error(transparent)]
    Pddl(#[from] PddlError),
}

/// Uniform breadth-first search: returns a shortest plan or proves
/// unsolvability by exhausting the reachable space within the bound.
pub fn bfs_oracle(
    problem: &PlanningProblem,
    max_states: usize,
) -> Result<PlanOutcome, OracleError> {
    let actions = {
        let mut a = ground(&problem.domain)?;
        a.sort();
        a
    };
    let goal = ground_formula(&problem.domain, &problem.goal)?;
    let mut parents: Vec<Option<(usize, usize)>> = vec![None];
    let mut states: Vec<State> = vec![problem.init.clone()];
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(problem.init.clone());
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.push_back(0);
    while let Some(idx) = queue.pop_front() {
        if holds(&states[idx], &goal) {
            let mut steps = Vec::new();
            let mut cur = idx;
            while let Some((p, ai)) = parents[cur] {
                steps.push(actions[ai].clone());
                cur = p;
            }
            steps.reverse();
            return Ok(PlanOutcome::Plan(Plan { steps }));
        }
        for (ai, action) in actions.iter().enumerate() {
            if !holds(&states[idx], &action.pre) {
                continue;
            }
            let mut atoms = states[idx].atoms.clone();
            for d in &action.eff_del {
                atoms.remove(d);
            }
            for a in &action.eff_add {
                atoms.insert(a.clone());
            }
            let next = State { atoms };
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= max_states {
                return Err(OracleError::BoundExceeded { bound: max_states });
            }
            seen.insert(next.clone());
            parents.push(Some((idx, ai)));
            states.push(next);
            queue.push_back(states.len() - 1);
        }
    }
    Ok(PlanOutcome::Unsolvable)
}

/// Convenience used by tests: plan and keep only the outcome.
pub fn plan_outcome(
    problem: &PlanningProblem,
    limits: SearchLimits,
) -> Result<PlanOutcome, PlannerError> {
    plan(problem, limits).map(|r| r.outcome)
}

pub use crate::pddl::validate as validate_plan;
