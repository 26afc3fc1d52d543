//! Transform a base planning domain into the extended learning domain:
//! reified names for types and properties, `Known` effect augmentation,
//! and the `Observe` / `Explore_for` / `Train` meta-operators.

use crate::pddl::{
    ActionSchema, Atom, Domain, DomainError, Formula, Param, Predicate, PredicateKind,
    Term,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const META_TYPE: &str = "Type";
pub const META_PROPERTY: &str = "Property";
pub const KNOWN: &str = "Known";
pub const VIEWED: &str = "Viewed";
pub const SUFFICIENT_OBS: &str = "Sufficient_Obs";
pub const EXPLORED_FOR: &str = "Explored_for";
pub const LEARNED: &str = "Learned";
pub const OBSERVE: &str = "Observe";
pub const EXPLORE_FOR: &str = "Explore_for";
pub const TRAIN: &str = "Train";

/// Reified constant for a predicate name: `Is_Open` -> `"is_open"`.
/// Quotes are part of the constant name.
pub fn reified(pred: &str) -> String {
    format!("\"{}\"", pred.to_lowercase())
}

pub fn reified_neg(pred: &str) -> String {
    format!("\"not_{}\"", pred.to_lowercase())
}

/// A learnable (type, property) pair, referenced by base-domain predicate
/// names. Reified constant names are derived from them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypePropertyPair {
    /// Type-predicate name, e.g. `Tv`.
    #[serde(rename = "type")]
    pub type_pred: String,
    /// Property-predicate name, e.g. `Is_Turned_On`.
    #[serde(rename = "property")]
    pub prop_pred: String,
}

impl TypePropertyPair {
    pub fn new(type_pred: impl Into<String>, prop_pred: impl Into<String>) -> Self {
        TypePropertyPair { type_pred: type_pred.into(), prop_pred: prop_pred.into() }
    }

    pub fn type_name(&self) -> String {
        reified(&self.type_pred)
    }

    pub fn prop_name(&self) -> String {
        reified(&self.prop_pred)
    }

    pub fn neg_prop_name(&self) -> String {
        reified_neg(&self.prop_pred)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModifiedSchema {
    pub schema: String,
    /// Known literals added to the positive effects.
    pub added_pos: Vec<String>,
    /// Known literals added to the negative effects.
    pub added_neg: Vec<String>,
}

/// What the extension did, rule by rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// Observations per polarity required before `Sufficient_Obs` is judged
    /// true at execution time.
    pub n_min: usize,
    /// (constant, type) pairs added by name reification.
    pub added_constants: Vec<(String, String)>,
    pub added_predicates: Vec<String>,
    pub added_schemas: Vec<String>,
    pub modified_schemas: Vec<ModifiedSchema>,
    pub pairs: Vec<TypePropertyPair>,
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("domain is already extended (predicate {0} present)")]
    AlreadyExtended(String),
    #[error("reified constant {0} collides with an existing constant")]
    NameCollision(String),
    #[error("base domain lacks closeness predicate {0}")]
    MissingClosenessPredicate(String),
    #[error("pair references unknown type-predicate {0}")]
    UnknownTypePredicate(String),
    #[error("pair references unknown property-predicate {0}")]
    UnknownPropertyPredicate(String),
    #[error("no schema {dir} property {prop} for type {ty}")]
    MissingFlipAction { prop: String, ty: String, dir: &'static str },
    #[error("schema {schema}: property effect on untyped parameter ?{var}, cannot derive the Known type argument")]
    UntypedPropertyEffect { schema: String, var: String },
    #[error("empty pair set")]
    EmptyPairs,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// For each type-predicate `T` add a constant `"t"` of meta-type `Type`;
/// for each property-predicate `P` add `"p"` and `"not_p"` of meta-type
/// `Property`.
pub fn reify_names(d: &Domain) -> Result<(Domain, Vec<(String, String)>), LearnError> {
    let mut out = d.clone();
    let mut added = Vec::new();
    let type_preds: Vec<String> = d.type_predicates().map(|p| p.name.clone()).collect();
    let prop_preds: Vec<String> =
        d.property_predicates().map(|p| p.name.clone()).collect();
    for meta in [META_TYPE, META_PROPERTY] {
        out.predicates.entry(meta.to_string()).or_insert(Predicate {
            name: meta.to_string(),
            arity: 1,
            kind: PredicateKind::Type,
        });
    }
    let mut add = |out: &mut Domain, name: String, ty: &str| -> Result<(), LearnError> {
        if out.constants.contains_key(&name) {
            return Err(LearnError::NameCollision(name));
        }
        out.constants.insert(name.clone(), ty.to_string());
        added.push((name, ty.to_string()));
        Ok(())
    };
    for t in &type_preds {
        add(&mut out, reified(t), META_TYPE)?;
    }
    for p in &prop_preds {
        add(&mut out, reified(p), META_PROPERTY)?;
        add(&mut out, reified_neg(p), META_PROPERTY)?;
    }
    Ok((out, added))
}

/// For every schema and property `p` with `p(x)` in the positive effects,
/// add `Known(x,"t","p")` to the positive and `Known(x,"t","not_p")` to the
/// negative effects; symmetrically for `p(x)` in the negative effects. The
/// type argument comes from the declared type of `x`.
pub fn augment_known_effects(
    d: &Domain,
) -> Result<(Domain, Vec<ModifiedSchema>), LearnError> {
    let mut out = d.clone();
    out.predicates.entry(KNOWN.to_string()).or_insert(Predicate {
        name: KNOWN.to_string(),
        arity: 3,
        kind: PredicateKind::Plain,
    });
    let props: BTreeSet<String> = d.property_predicates().map(|p| p.name.clone()).collect();
    let mut modified = Vec::new();
    for schema in out.schemas.values_mut() {
        let mut record = ModifiedSchema { schema: schema.name.clone(), ..Default::default() };
        let adds: Vec<Atom> = schema.eff_add.iter().cloned().collect();
        let dels: Vec<Atom> = schema.eff_del.iter().cloned().collect();
        for (atoms, positive_effect) in [(adds, true), (dels, false)] {
            for atom in atoms {
                if !props.contains(&atom.pred) {
                    continue;
                }
                let arg = atom.args[0].clone();
                let ty = match &arg {
                    Term::Var(v) => {
                        let param = schema
                            .params
                            .iter()
                            .find(|p| &p.name == v)
                            .expect("checked by Domain::check");
                        param.ty.clone().ok_or_else(|| {
                            LearnError::UntypedPropertyEffect {
                                schema: schema.name.clone(),
                                var: v.clone(),
                            }
                        })?
                    }
                    Term::Const(c) => d
                        .constants
                        .get(c)
                        .cloned()
                        .expect("constants carry a type"),
                };
                let known = |prop_const: String| {
                    Atom::new(
                        KNOWN,
                        vec![
                            arg.clone(),
                            Term::Const(reified(&ty)),
                            Term::Const(prop_const),
                        ],
                    )
                };
                let (pos_atom, neg_atom) = if positive_effect {
                    (known(reified(&atom.pred)), known(reified_neg(&atom.pred)))
                } else {
                    (known(reified_neg(&atom.pred)), known(reified(&atom.pred)))
                };
                record.added_pos.push(pos_atom.to_string());
                record.added_neg.push(neg_atom.to_string());
                schema.eff_add.insert(pos_atom);
                schema.eff_del.insert(neg_atom);
            }
        }
        if !record.added_pos.is_empty() || !record.added_neg.is_empty() {
            modified.push(record);
        }
    }
    Ok((out, modified))
}

/// Add the three pair-generic meta-operators and their predicates.
pub fn add_learning_schemas(
    d: &Domain,
    closeness_pred: &str,
) -> Result<(Domain, Vec<String>, Vec<String>), LearnError> {
    match d.predicates.get(closeness_pred) {
        Some(p) if p.arity == 1 => {}
        _ => return Err(LearnError::MissingClosenessPredicate(closeness_pred.into())),
    }
    let mut out = d.clone();
    let mut added_preds = Vec::new();
    for (name, arity) in [
        (KNOWN, 3),
        (VIEWED, 3),
        (SUFFICIENT_OBS, 2),
        (EXPLORED_FOR, 1),
        (LEARNED, 3),
    ] {
        if !out.predicates.contains_key(name) {
            out.predicates.insert(
                name.to_string(),
                Predicate { name: name.to_string(), arity, kind: PredicateKind::Plain },
            );
            added_preds.push(name.to_string());
        }
    }

    let var = |v: &str| Term::Var(v.to_string());
    let observe = ActionSchema {
        name: OBSERVE.into(),
        params: vec![
            Param { name: "o".into(), ty: None },
            Param { name: "t".into(), ty: Some(META_TYPE.into()) },
            Param { name: "p".into(), ty: Some(META_PROPERTY.into()) },
        ],
        pre: Formula::And(vec![
            Formula::neg(Atom::new(VIEWED, vec![var("o"), var("t"), var("p")])),
            Formula::pos(Atom::new(closeness_pred, vec![var("o")])),
            Formula::pos(Atom::new(KNOWN, vec![var("o"), var("t"), var("p")])),
        ]),
        eff_add: [
            Atom::new(SUFFICIENT_OBS, vec![var("t"), var("p")]),
            Atom::new(VIEWED, vec![var("o"), var("t"), var("p")]),
        ]
        .into_iter()
        .collect(),
        eff_del: BTreeSet::new(),
    };
    let explore = ActionSchema {
        name: EXPLORE_FOR.into(),
        params: vec![
            Param { name: "t".into(), ty: Some(META_TYPE.into()) },
            Param { name: "p".into(), ty: Some(META_PROPERTY.into()) },
        ],
        pre: Formula::And(vec![
            Formula::ForallImplies {
                var: "x".into(),
                antecedent: Atom::new(KNOWN, vec![var("x"), var("t"), var("p")]),
                consequent: Atom::new(VIEWED, vec![var("x"), var("t"), var("p")]),
            },
            Formula::neg(Atom::new(SUFFICIENT_OBS, vec![var("t"), var("p")])),
        ]),
        eff_add: [Atom::new(EXPLORED_FOR, vec![var("t")])].into_iter().collect(),
        eff_del: BTreeSet::new(),
    };
    let train = ActionSchema {
        name: TRAIN.into(),
        params: vec![
            Param { name: "t".into(), ty: Some(META_TYPE.into()) },
            Param { name: "p".into(), ty: Some(META_PROPERTY.into()) },
            Param { name: "q".into(), ty: Some(META_PROPERTY.into()) },
        ],
        pre: Formula::And(vec![
            Formula::pos(Atom::new(SUFFICIENT_OBS, vec![var("t"), var("p")])),
            Formula::pos(Atom::new(SUFFICIENT_OBS, vec![var("t"), var("q")])),
        ]),
        eff_add: [Atom::new(LEARNED, vec![var("t"), var("p"), var("q")])]
            .into_iter()
            .collect(),
        eff_del: BTreeSet::new(),
    };
    let mut added_schemas = Vec::new();
    for schema in [observe, explore, train] {
        added_schemas.push(schema.name.clone());
        out.schemas.insert(schema.name.clone(), schema);
    }
    Ok((out, added_preds, added_schemas))
}

/// Goal of learning every pair: conjunction over pairs of
/// `Learned("t","p","not_p") ∨ Explored_for("t")`.
pub fn build_goal(pairs: &[TypePropertyPair]) -> Result<Formula, LearnError> {
    if pairs.is_empty() {
        return Err(LearnError::EmptyPairs);
    }
    let conjuncts = pairs
        .iter()
        .map(|pair| {
            Formula::Or(vec![
                Formula::pos(Atom::new(
                    LEARNED,
                    vec![
                        Term::Const(pair.type_name()),
                        Term::Const(pair.prop_name()),
                        Term::Const(pair.neg_prop_name()),
                    ],
                )),
                Formula::pos(Atom::new(
                    EXPLORED_FOR,
                    vec![Term::Const(pair.type_name())],
                )),
            ])
        })
        .collect();
    Ok(Formula::And(conjuncts))
}

/// Full extension: reify names, augment Known effects, add the learning
/// schemas; validates the pairs and produces a complete report.
pub fn extend(
    d: &Domain,
    pairs: &[TypePropertyPair],
    n_min: usize,
    closeness_pred: &str,
) -> Result<(Domain, ExtensionReport), LearnError> {
    for guard in [KNOWN, META_TYPE, META_PROPERTY, OBSERVE] {
        if d.predicates.contains_key(guard) || d.schemas.contains_key(guard) {
            return Err(LearnError::AlreadyExtended(guard.into()));
        }
    }
    for pair in pairs {
        match d.predicates.get(&pair.type_pred) {
            Some(p) if p.kind == PredicateKind::Type => {}
            _ => return Err(LearnError::UnknownTypePredicate(pair.type_pred.clone())),
        }
        match d.predicates.get(&pair.prop_pred) {
            Some(p) if p.kind == PredicateKind::Property => {}
            _ => return Err(LearnError::UnknownPropertyPredicate(pair.prop_pred.clone())),
        }
        // At least one schema making p true and one making it false for
        // objects of type t.
        let flips = |positive: bool| {
            d.schemas.values().any(|s| {
                let effs = if positive { &s.eff_add } else { &s.eff_del };
                effs.iter().any(|a| {
                    a.pred == pair.prop_pred
                        && match &a.args[0] {
                            Term::Var(v) => s
                                .params
                                .iter()
                                .any(|p| &p.name == v && p.ty.as_deref() == Some(&pair.type_pred)),
                            Term::Const(c) => {
                                d.constants.get(c) == Some(&pair.type_pred)
                            }
                        }
                })
            })
        };
        if !flips(true) {
            return Err(LearnError::MissingFlipAction {
                prop: pair.prop_pred.clone(),
                ty: pair.type_pred.clone(),
                dir: "making true",
            });
        }
        if !flips(false) {
            return Err(LearnError::MissingFlipAction {
                prop: pair.prop_pred.clone(),
                ty: pair.type_pred.clone(),
                dir: "making false",
            });
        }
    }

    let (d1, added_constants) = reify_names(d)?;
    let (d2, modified_schemas) = augment_known_effects(&d1)?;
    let (d3, _, added_schemas) = add_learning_schemas(&d2, closeness_pred)?;
    d3.check()?;
    let added_predicates: Vec<String> = d3
        .predicates
        .keys()
        .filter(|k| !d.predicates.contains_key(*k))
        .cloned()
        .collect();
    let report = ExtensionReport {
        n_min,
        added_constants,
        added_predicates,
        added_schemas,
        modified_schemas,
        pairs: pairs.to_vec(),
    };
    Ok((d3, report))
}
