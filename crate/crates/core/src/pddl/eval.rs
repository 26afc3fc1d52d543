use super::ground::{ground_action_for, ground_formula};
use super::{Domain, Formula, GroundAction, GroundFormula, PddlError, Plan, State};

/// Standard truth evaluation of a ground formula against a state.
pub fn holds(state: &State, f: &GroundFormula) -> bool {
    match f {
        GroundFormula::Lit { positive, atom } => state.contains(atom) == *positive,
        GroundFormula::And(fs) => fs.iter().all(|f| holds(state, f)),
        GroundFormula::Or(fs) => fs.iter().any(|f| holds(state, f)),
    }
}

/// Evaluate a formula that is ground or closed under `forall` over the
/// domain constants. Free variables are an error.
pub fn eval_formula(state: &State, domain: &Domain, f: &Formula) -> Result<bool, PddlError> {
    if let Some(v) = f.free_vars().into_iter().next() {
        return Err(PddlError::UnboundFormulaVariable { var: v });
    }
    Ok(holds(state, &ground_formula(domain, f)?))
}

/// First failing literal of a formula, as a human-readable string.
fn first_failure(state: &State, f: &GroundFormula) -> Option<String> {
    match f {
        GroundFormula::Lit { positive, atom } => {
            if state.contains(atom) == *positive {
                None
            } else if *positive {
                Some(atom.to_string())
            } else {
                Some(format!("not {atom}"))
            }
        }
        GroundFormula::And(fs) => fs.iter().find_map(|f| first_failure(state, f)),
        GroundFormula::Or(fs) => {
            if holds(state, f) {
                None
            } else {
                fs.first().and_then(|f| first_failure(state, f))
            }
        }
    }
}

/// Apply `a` to `s`: returns exactly `s ∪ eff_add ∖ eff_del`. Errors if the
/// precondition does not hold, naming the first failing literal.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, PddlError> {
    if !holds(state, &action.pre) {
        return Err(PddlError::PreconditionViolated {
            action: action.id(),
            literal: first_failure(state, &action.pre).unwrap_or_else(|| "?".into()),
        });
    }
    let mut atoms = state.atoms.clone();
    for d in &action.eff_del {
        atoms.remove(d);
    }
    for a in &action.eff_add {
        atoms.insert(a.clone());
    }
    Ok(State { atoms })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub valid: bool,
    /// Index of the first offending step, if any.
    pub failed_step: Option<usize>,
    pub reason: Option<String>,
    pub goal_satisfied: bool,
    pub final_state: State,
}

/// Replay a plan from `s0`, regrounding each step against the domain, and
/// check the goal in the final state. Failures are report contents, not
/// errors.
pub fn validate(
    plan: &Plan,
    domain: &Domain,
    s0: &State,
    goal: &Formula,
) -> Result<ValidationReport, PddlError> {
    let goal = ground_formula(domain, goal)?;
    let mut state = s0.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let schema = match domain.schemas.get(&step.operator) {
            Some(s) => s,
            None => {
                return Ok(ValidationReport {
                    valid: false,
                    failed_step: Some(i),
                    reason: Some(format!("unknown operator {}", step.operator)),
                    goal_satisfied: false,
                    final_state: state,
                });
            }
        };
        if schema.params.len() != step.args.len() {
            return Ok(ValidationReport {
                valid: false,
                failed_step: Some(i),
                reason: Some(format!("arity mismatch in {}", step.id())),
                goal_satisfied: false,
                final_state: state,
            });
        }
        let ga = ground_action_for(domain, schema, &step.args)?;
        match apply(&state, &ga) {
            Ok(next) => state = next,
            Err(e) => {
                return Ok(ValidationReport {
                    valid: false,
                    failed_step: Some(i),
                    reason: Some(e.to_string()),
                    goal_satisfied: false,
                    final_state: state,
                });
            }
        }
    }
    let goal_satisfied = holds(&state, &goal);
    Ok(ValidationReport {
        valid: goal_satisfied,
        failed_step: None,
        reason: if goal_satisfied {
            None
        } else {
            Some("goal not satisfied in final state".into())
        },
        goal_satisfied,
        final_state: state,
    })
}
