use super::{
    ActionSchema, Atom, Domain, Formula, GroundAction, GroundAtom, GroundFormula,
    PddlError, Term,
};
use std::collections::BTreeMap;

/// Ground every schema with all type-compatible constant tuples. Typed
/// parameters range over constants of that type, untyped parameters over
/// all constants. Universal implications are expanded over the constants.
pub fn ground(domain: &Domain) -> Result<Vec<GroundAction>, PddlError> {
    let mut out = Vec::new();
    for schema in domain.schemas.values() {
        ground_schema(domain, schema, &mut out)?;
    }
    Ok(out)
}

pub fn ground_schema(
    domain: &Domain,
    schema: &ActionSchema,
    out: &mut Vec<GroundAction>,
) -> Result<(), PddlError> {
    let candidates: Vec<Vec<&str>> = schema
        .params
        .iter()
        .map(|p| match &p.ty {
            Some(ty) => domain.constants_of(ty),
            None => domain.constants.keys().map(|s| s.as_str()).collect(),
        })
        .collect();
    if candidates.iter().any(|c| c.is_empty()) && !schema.params.is_empty() {
        return Ok(());
    }
    let mut tuple: Vec<&str> = Vec::with_capacity(schema.params.len());
    ground_rec(domain, schema, &candidates, &mut tuple, out)
}

fn ground_rec<'a>(
    domain: &Domain,
    schema: &ActionSchema,
    candidates: &[Vec<&'a str>],
    tuple: &mut Vec<&'a str>,
    out: &mut Vec<GroundAction>,
) -> Result<(), PddlError> {
    if tuple.len() == candidates.len() {
        let subst: BTreeMap<String, String> = schema
            .params
            .iter()
            .zip(tuple.iter())
            .map(|(p, c)| (p.name.clone(), c.to_string()))
            .collect();
        out.push(instantiate(domain, schema, &subst)?);
        return Ok(());
    }
    for &c in &candidates[tuple.len()] {
        tuple.push(c);
        ground_rec(domain, schema, candidates, tuple, out)?;
        tuple.pop();
    }
    Ok(())
}

/// Instantiate a single schema with the given argument tuple.
pub fn ground_action_for(
    domain: &Domain,
    schema: &ActionSchema,
    args: &[String],
) -> Result<GroundAction, PddlError> {
    assert_eq!(args.len(), schema.params.len(), "arity mismatch for {}", schema.name);
    let subst: BTreeMap<String, String> = schema
        .params
        .iter()
        .zip(args.iter())
        .map(|(p, c)| (p.name.clone(), c.clone()))
        .collect();
    instantiate(domain, schema, &subst)
}

fn instantiate(
    domain: &Domain,
    schema: &ActionSchema,
    subst: &BTreeMap<String, String>,
) -> Result<GroundAction, PddlError> {
    // Typing is enforced at instantiation time (typed parameters only range
    // over constants of their type), so the precondition carries only the
    // schema's own formula.
    let pre = ground_formula_with(domain, &schema.pre, subst)?;
    let eff_add = schema
        .eff_add
        .iter()
        .map(|a| ground_atom(a, subst))
        .collect::<Result<_, _>>()?;
    let eff_del = schema
        .eff_del
        .iter()
        .map(|a| ground_atom(a, subst))
        .collect::<Result<_, _>>()?;
    Ok(GroundAction {
        operator: schema.name.clone(),
        args: schema.params.iter().map(|p| subst[&p.name].clone()).collect(),
        pre,
        eff_add,
        eff_del,
    })
}

fn ground_atom(atom: &Atom, subst: &BTreeMap<String, String>) -> Result<GroundAtom, PddlError> {
    let mut args = Vec::with_capacity(atom.args.len());
    for t in &atom.args {
        match t {
            Term::Const(c) => args.push(c.clone()),
            Term::Var(v) => match subst.get(v) {
                Some(c) => args.push(c.clone()),
                None => return Err(PddlError::UnboundFormulaVariable { var: v.clone() }),
            },
        }
    }
    Ok(GroundAtom { pred: atom.pred.clone(), args })
}

/// Ground a closed formula (no free variables) over the domain constants.
pub fn ground_formula(domain: &Domain, f: &Formula) -> Result<GroundFormula, PddlError> {
    ground_formula_with(domain, f, &BTreeMap::new())
}

pub fn ground_formula_with(
    domain: &Domain,
    f: &Formula,
    subst: &BTreeMap<String, String>,
) -> Result<GroundFormula, PddlError> {
    match f {
        Formula::Lit(l) => Ok(GroundFormula::Lit {
            positive: l.positive,
            atom: ground_atom(&l.atom, subst)?,
        }),
        Formula::And(fs) => Ok(GroundFormula::And(
            fs.iter()
                .map(|f| ground_formula_with(domain, f, subst))
                .collect::<Result<_, _>>()?,
        )),
        Formula::Or(fs) => Ok(GroundFormula::Or(
            fs.iter()
                .map(|f| ground_formula_with(domain, f, subst))
                .collect::<Result<_, _>>()?,
        )),
        Formula::ForallImplies { var, antecedent, consequent } => {
            // Expand to a finite conjunction of implications over C.
            let mut parts = Vec::new();
            for c in domain.constants.keys() {
                let mut inner = subst.clone();
                inner.insert(var.clone(), c.clone());
                parts.push(GroundFormula::Or(vec![
                    GroundFormula::Lit {
                        positive: false,
                        atom: ground_atom(antecedent, &inner)?,
                    },
                    GroundFormula::Lit {
                        positive: true,
                        atom: ground_atom(consequent, &inner)?,
                    },
                ]));
            }
            Ok(GroundFormula::And(parts))
        }
    }
}
