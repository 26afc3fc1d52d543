use propplan_core::pddl::{
    validate, ActionSchema, Atom, Domain, Formula, GroundAtom, GroundFormula, Plan,
    Predicate, PredicateKind, State, Term,
};
use propplan_core::planner::{
    bfs_oracle, h_relaxed, plan, plan_outcome, PlanOutcome, PlanningProblem, SearchLimits,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn atom(p: &str, c: &str) -> GroundAtom {
    GroundAtom::new(p, &[c])
}

fn lit(positive: bool, p: &str, c: &str) -> GroundFormula {
    GroundFormula::Lit { positive, atom: atom(p, c) }
}

/// Domain of parameterless ground schemas over unary predicates P0..Pn-1
/// applied to a single dummy constant.
fn ground_domain(
    n_preds: usize,
    actions: Vec<(Vec<(bool, usize)>, Vec<usize>, Vec<usize>)>,
) -> Domain {
    let mut d = Domain::new("g");
    d.predicates.insert(
        "T".into(),
        Predicate { name: "T".into(), arity: 1, kind: PredicateKind::Type },
    );
    for i in 0..n_preds {
        d.predicates.insert(
            format!("P{i}"),
            Predicate { name: format!("P{i}"), arity: 1, kind: PredicateKind::Plain },
        );
    }
    d.constants.insert("a".into(), "T".into());
    let arg = || vec![Term::Const("a".into())];
    for (i, (pre, add, del)) in actions.into_iter().enumerate() {
        let pre = Formula::And(
            pre.into_iter()
                .map(|(pos, p)| {
                    let a = Atom::new(format!("P{p}"), arg());
                    if pos {
                        Formula::pos(a)
                    } else {
                        Formula::neg(a)
                    }
                })
                .collect(),
        );
        let eff_add: BTreeSet<Atom> =
            add.iter().map(|p| Atom::new(format!("P{p}"), arg())).collect();
        let eff_del: BTreeSet<Atom> = del
            .iter()
            .filter(|p| !add.contains(p))
            .map(|p| Atom::new(format!("P{p}"), arg()))
            .collect();
        let name = format!("A{i}");
        d.schemas.insert(
            name.clone(),
            ActionSchema { name, params: vec![], pre, eff_add, eff_del },
        );
    }
    d.check().unwrap();
    d
}

fn goal_formula(conjuncts: &[(bool, usize)]) -> Formula {
    Formula::And(
        conjuncts
            .iter()
            .map(|&(pos, p)| {
                let a = Atom::new(format!("P{p}"), vec![Term::Const("a".into())]);
                if pos {
                    Formula::pos(a)
                } else {
                    Formula::neg(a)
                }
            })
            .collect(),
    )
}

#[test]
fn heuristic_is_zero_iff_goal_holds() {
    let d = ground_domain(2, vec![(vec![], vec![0], vec![]), (vec![(true, 0)], vec![1], vec![])]);
    let actions = propplan_core::pddl::ground(&d).unwrap();
    let goal = GroundFormula::And(vec![lit(true, "P1", "a")]);
    let s_goal = State::from_atoms([atom("P1", "a")]);
    assert_eq!(h_relaxed(&s_goal, &goal, &actions), Some(0));
    // P1 needs A0 then A1 in the relaxation: h_add = 1 (for P0) + 1 = 2
    assert_eq!(h_relaxed(&State::new(), &goal, &actions), Some(2));
}

#[test]
fn negative_literal_costs_follow_deletability() {
    // A0 deletes P0; nothing deletes P1
    let d = ground_domain(
        2,
        vec![(vec![], vec![], vec![0])],
    );
    let actions = propplan_core::pddl::ground(&d).unwrap();
    // atom absent: free
    assert_eq!(
        h_relaxed(&State::new(), &GroundFormula::And(vec![lit(false, "P0", "a")]), &actions),
        Some(0),
    );
    // atom present and deletable: one step
    let s = State::from_atoms([atom("P0", "a")]);
    assert_eq!(
        h_relaxed(&s, &GroundFormula::And(vec![lit(false, "P0", "a")]), &actions),
        Some(1),
    );
    // atom present and undeletable: infinite, i.e. provably unreachable
    let s = State::from_atoms([atom("P1", "a")]);
    assert_eq!(
        h_relaxed(&s, &GroundFormula::And(vec![lit(false, "P1", "a")]), &actions),
        None,
    );
}

#[test]
fn disjunction_takes_the_cheapest_branch() {
    let d = ground_domain(3, vec![(vec![], vec![0], vec![]), (vec![(true, 0)], vec![1], vec![])]);
    let actions = propplan_core::pddl::ground(&d).unwrap();
    let goal = GroundFormula::Or(vec![lit(true, "P1", "a"), lit(true, "P0", "a")]);
    // P0 costs 1, P1 costs 2; the disjunction costs min = 1
    assert_eq!(h_relaxed(&State::new(), &goal, &actions), Some(1));
}

#[test]
fn infinite_heuristic_implies_unsolvable() {
    // goal P1 but no action ever adds P1
    let d = ground_domain(2, vec![(vec![], vec![0], vec![])]);
    let actions = propplan_core::pddl::ground(&d).unwrap();
    let goal = GroundFormula::And(vec![lit(true, "P1", "a")]);
    assert_eq!(h_relaxed(&State::new(), &goal, &actions), None);
    let problem = PlanningProblem {
        domain: d,
        init: State::new(),
        goal: goal_formula(&[(true, 1)]),
    };
    assert_eq!(plan_outcome(&problem, SearchLimits::default()).unwrap(), PlanOutcome::Unsolvable);
    assert_eq!(bfs_oracle(&problem, 10_000).unwrap(), PlanOutcome::Unsolvable);
}

fn random_problem(seed: u64) -> PlanningProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_preds = rng.gen_range(3..6);
    let n_actions = rng.gen_range(2..7);
    let mut actions = Vec::new();
    for _ in 0..n_actions {
        let pre: Vec<(bool, usize)> = (0..rng.gen_range(0..3))
            .map(|_| (rng.gen_bool(0.7), rng.gen_range(0..n_preds)))
            .collect();
        let add: Vec<usize> =
            (0..rng.gen_range(1..3)).map(|_| rng.gen_range(0..n_preds)).collect();
        let del: Vec<usize> =
            (0..rng.gen_range(0..2)).map(|_| rng.gen_range(0..n_preds)).collect();
        actions.push((pre, add, del));
    }
    let domain = ground_domain(n_preds, actions);
    let init: BTreeSet<GroundAtom> = (0..n_preds)
        .filter(|_| rng.gen_bool(0.3))
        .map(|p| atom(&format!("P{p}"), "a"))
        .collect();
    let goal: Vec<(bool, usize)> = (0..rng.gen_range(1..4))
        .map(|_| (rng.gen_bool(0.8), rng.gen_range(0..n_preds)))
        .collect();
    PlanningProblem { domain, init: State { atoms: init }, goal: goal_formula(&goal) }
}

#[test]
fn planner_agrees_with_bfs_oracle_on_100_random_problems() {
    let mut solvable = 0;
    for seed in 0..100u64 {
        let problem = random_problem(seed);
        let oracle = bfs_oracle(&problem, 1 << 20).unwrap();
        let result = plan_outcome(&problem, SearchLimits::default()).unwrap();
        match (&oracle, &result) {
            (PlanOutcome::Plan(shortest), PlanOutcome::Plan(found)) => {
                solvable += 1;
                let report =
                    validate(found, &problem.domain, &problem.init, &problem.goal).unwrap();
                assert!(report.valid, "seed {seed}: {:?}", report.reason);
                assert!(
                    shortest.len() <= found.len(),
                    "seed {seed}: oracle found a shorter plan than itself?"
                );
            }
            (PlanOutcome::Unsolvable, PlanOutcome::Unsolvable) => {}
            other => panic!("seed {seed}: disagreement {other:?}"),
        }
    }
    // the generator must actually exercise both outcomes
    assert!(solvable >= 20, "only {solvable} solvable problems");
    assert!(solvable <= 95, "only {} unsolvable problems", 100 - solvable);
}

#[test]
fn planning_is_deterministic() {
    for seed in [3u64, 17, 59] {
        let problem = random_problem(seed);
        let a = plan(&problem, SearchLimits::default()).unwrap();
        let b = plan(&problem, SearchLimits::default()).unwrap();
        assert_eq!(a.outcome, b.outcome);
        if let (PlanOutcome::Plan(pa), PlanOutcome::Plan(pb)) = (a.outcome, b.outcome) {
            let ids = |p: &Plan| p.steps.iter().map(|s| s.id()).collect::<Vec<_>>();
            assert_eq!(ids(&pa), ids(&pb));
        }
    }
}

#[test]
fn search_stats_are_populated() {
    let problem = random_problem(1);
    let result = plan(&problem, SearchLimits::default()).unwrap();
    if let PlanOutcome::Plan(p) = &result.outcome {
        if !p.is_empty() {
            assert!(result.stats.heuristic_evals > 0);
        }
    }
}
