//! A STRIPS-style PDDL subset: typing via unary type-predicates, negative
//! preconditions, and universally quantified implications in preconditions.
//! The grammar is documented in `docs/pddl-subset.md` at the repo root.

mod eval;
mod ground;
mod lexer;
mod parser;
mod printer;

pub use eval::{apply, eval_formula, holds, validate, ValidationReport};
pub use ground::{ground, ground_action_for, ground_formula, ground_schema};
pub use parser::{parse_domain, parse_problem};
pub use printer::{print_domain, print_formula, print_problem};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// How a unary predicate participates in the type/property split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredicateKind {
    /// Unary object-type predicate, e.g. `Tv(x)`.
    Type,
    /// Unary learnable-property predicate, e.g. `Is_Turned_On(x)`.
    Property,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

/// A term is either a schema variable (`?x`) or a constant name.
/// Reified names keep their surrounding double quotes in the string,
/// so `"tv"` and a plain object `tv` never collide.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    pub fn substitute(&self, subst: &BTreeMap<String, String>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => match subst.get(v) {
                        Some(c) => Term::Const(c.clone()),
                        None => Term::Var(v.clone()),
                    },
                    Term::Const(c) => Term::Const(c.clone()),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.pred)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

/// Precondition / goal formulas. Conjunctions, disjunctions, literals, and
/// universally quantified implications over the current constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formula {
    Lit(Literal),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    ForallImplies {
        var: String,
        antecedent: Atom,
        consequent: Atom,
    },
}

impl Formula {
    pub fn top() -> Formula {
        Formula::And(Vec::new())
    }

    pub fn pos(atom: Atom) -> Formula {
        Formula::Lit(Literal { positive: true, atom })
    }

    pub fn neg(atom: Atom) -> Formula {
        Formula::Lit(Literal { positive: false, atom })
    }

    /// Free variables of the formula (quantified variables are bound).
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Formula::Lit(l) => {
                    for t in &l.atom.args {
                        if let Term::Var(v) = t {
                            if !bound.contains(v) {
                                out.insert(v.clone());
                            }
                        }
                    }
                }
                Formula::And(fs) | Formula::Or(fs) => {
                    for f in fs {
                        go(f, bound, out);
                    }
                }
                Formula::ForallImplies { var, antecedent, consequent } => {
                    bound.push(var.clone());
                    for a in [antecedent, consequent] {
                        for t in &a.args {
                            if let Term::Var(v) = t {
                                if !bound.contains(v) {
                                    out.insert(v.clone());
                                }
                            }
                        }
                    }
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All atoms mentioned anywhere in the formula.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        match self {
            Formula::Lit(l) => out.push(&l.atom),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    out.extend(f.atoms());
                }
            }
            Formula::ForallImplies { antecedent, consequent, .. } => {
                out.push(antecedent);
                out.push(consequent);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    /// Declared type-predicate, if any. Untyped parameters range over all
    /// constants at grounding time.
    pub ty: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub pre: Formula,
    pub eff_add: BTreeSet<Atom>,
    pub eff_del: BTreeSet<Atom>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    /// Predicate name -> declaration. BTreeMap keeps printing canonical.
    pub predicates: BTreeMap<String, Predicate>,
    pub schemas: BTreeMap<String, ActionSchema>,
    /// Constant name -> its type-predicate.
    pub constants: BTreeMap<String, String>,
}

impl Domain {
    pub fn new(name: impl Into<String>) -> Self {
        Domain { name: name.into(), ..Default::default() }
    }

    pub fn type_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values().filter(|p| p.kind == PredicateKind::Type)
    }

    pub fn property_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values().filter(|p| p.kind == PredicateKind::Property)
    }

    /// Constants declared with the given type-predicate.
    pub fn constants_of(&self, ty: &str) -> Vec<&str> {
        self.constants
            .iter()
            .filter(|(_, t)| t.as_str() == ty)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    /// Structural well-formedness: declared predicates, matching arities,
    /// distinct bound parameters, no add/delete conflicts.
    pub fn check(&self) -> Result<(), DomainError> {
        for p in self.predicates.values() {
            if matches!(p.kind, PredicateKind::Type | PredicateKind::Property) && p.arity != 1 {
                return Err(DomainError::BadUnaryPredicate { name: p.name.clone() });
            }
        }
        for (c, ty) in &self.constants {
            match self.predicates.get(ty) {
                Some(p) if p.kind == PredicateKind::Type => {}
                _ => {
                    return Err(DomainError::UnknownType {
                        constant: c.clone(),
                        ty: ty.clone(),
                    })
                }
            }
        }
        for schema in self.schemas.values() {
            let mut seen = BTreeSet::new();
            for p in &schema.params {
                if !seen.insert(p.name.clone()) {
                    return Err(DomainError::DuplicateParam {
                        schema: schema.name.clone(),
                        param: p.name.clone(),
                    });
                }
                if let Some(ty) = &p.ty {
                    match self.predicates.get(ty) {
                        Some(d) if d.kind == PredicateKind::Type => {}
                        _ => {
                            return Err(DomainError::UnknownType {
                                constant: format!("?{} in {}", p.name, schema.name),
                                ty: ty.clone(),
                            })
                        }
                    }
                }
            }
            let check_atom = |atom: &Atom| -> Result<(), DomainError> {
                let decl = self.predicates.get(&atom.pred).ok_or_else(|| {
                    DomainError::UndeclaredPredicate {
                        schema: schema.name.clone(),
                        pred: atom.pred.clone(),
                    }
                })?;
                if decl.arity != atom.args.len() {
                    return Err(DomainError::ArityMismatch {
                        schema: schema.name.clone(),
                        pred: atom.pred.clone(),
                        expected: decl.arity,
                        found: atom.args.len(),
                    });
                }
                Ok(())
            };
            for atom in schema.pre.atoms() {
                check_atom(atom)?;
            }
            for atom in schema.eff_add.iter().chain(schema.eff_del.iter()) {
                check_atom(atom)?;
            }
            // Variables in pre/eff must be bound by the parameters.
            let bound: BTreeSet<String> =
                schema.params.iter().map(|p| p.name.clone()).collect();
            for v in schema.pre.free_vars() {
                if !bound.contains(&v) {
                    return Err(DomainError::UnboundVariable {
                        schema: schema.name.clone(),
                        var: v,
                    });
                }
            }
            for atom in schema.eff_add.iter().chain(schema.eff_del.iter()) {
                for t in &atom.args {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            return Err(DomainError::UnboundVariable {
                                schema: schema.name.clone(),
                                var: v.clone(),
                            });
                        }
                    }
                }
            }
            // Reject add/delete pairs that could collide under some grounding.
            for add in &schema.eff_add {
                for del in &schema.eff_del {
                    if atoms_unifiable(add, del) {
                        return Err(DomainError::EffectConflict {
                            schema: schema.name.clone(),
                            atom: add.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// True when two effect atoms could denote the same ground atom under some
/// instantiation of the schema parameters.
fn atoms_unifiable(a: &Atom, b: &Atom) -> bool {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return false;
    }
    a.args.iter().zip(&b.args).all(|(x, y)| match (x, y) {
        (Term::Const(c), Term::Const(d)) => c == d,
        // Any pair involving a variable can coincide for some substitution.
        _ => true,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("type- and property-predicates must have arity 1: {name}")]
    BadUnaryPredicate { name: String },
    #[error("constant {constant} has unknown type-predicate {ty}")]
    UnknownType { constant: String, ty: String },
    #[error("schema {schema} declares parameter ?{param} twice")]
    DuplicateParam { schema: String, param: String },
    #[error("schema {schema} uses undeclared predicate {pred}")]
    UndeclaredPredicate { schema: String, pred: String },
    #[error("schema {schema}: predicate {pred} expects {expected} args, found {found}")]
    ArityMismatch { schema: String, pred: String, expected: usize, found: usize },
    #[error("schema {schema} uses unbound variable ?{var}")]
    UnboundVariable { schema: String, var: String },
    #[error("schema {schema}: atom {atom} appears in both add and delete effects")]
    EffectConflict { schema: String, atom: String },
}

/// A fully instantiated atom over constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(pred: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            pred: pred.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.pred, self.args.join(","))
    }
}

/// Quantifier-free ground formula; universal implications are expanded over
/// the constants at grounding time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundFormula {
    Lit { positive: bool, atom: GroundAtom },
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

impl GroundFormula {
    pub fn top() -> GroundFormula {
        GroundFormula::And(Vec::new())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct State {
    pub atoms: BTreeSet<GroundAtom>,
}

impl State {
    pub fn new() -> State {
        State::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = GroundAtom>) -> State {
        State { atoms: atoms.into_iter().collect() }
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn insert(&mut self, atom: GroundAtom) {
        self.atoms.insert(atom);
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub operator: String,
    pub args: Vec<String>,
    pub pre: GroundFormula,
    pub eff_add: BTreeSet<GroundAtom>,
    pub eff_del: BTreeSet<GroundAtom>,
}

impl GroundAction {
    pub fn id(&self) -> String {
        format!("{}({})", self.operator, self.args.join(","))
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Action multiset as sorted ids, for order-insensitive comparison.
    pub fn action_multiset(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.steps.iter().map(|a| a.id()).collect();
        ids.sort();
        ids
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

/// A problem file: objects extend the domain constants, plus init and goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    /// Objects declared by the problem, name -> type-predicate.
    pub objects: BTreeMap<String, String>,
    pub init: State,
    pub goal: Formula,
}

#[derive(Debug, Error)]
pub enum PddlError {
    #[error("{line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("unbound variable ?{var} in formula")]
    UnboundFormulaVariable { var: String },
    #[error("precondition of {action} violated: first failing literal {literal}")]
    PreconditionViolated { action: String, literal: String },
}
