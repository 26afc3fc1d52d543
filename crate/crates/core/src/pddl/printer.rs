use super::{ActionSchema, Domain, Formula, PredicateKind, Problem};
use std::fmt::Write;

/// Canonical domain text: types, properties, predicates, constants, then
/// schemas, each alphabetically ordered. `parse_domain(print_domain(d))`
/// is structurally equal to `d`.
pub fn print_domain(d: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);

    let types: Vec<&str> = d.type_predicates().map(|p| p.name.as_str()).collect();
    if !types.is_empty() {
        let _ = writeln!(out, "  (:types {})", types.join(" "));
    }
    let props: Vec<&str> = d.property_predicates().map(|p| p.name.as_str()).collect();
    if !props.is_empty() {
        let _ = writeln!(out, "  (:properties {})", props.join(" "));
    }
    let plain: Vec<_> = d
        .predicates
        .values()
        .filter(|p| p.kind == PredicateKind::Plain)
        .collect();
    if !plain.is_empty() {
        let _ = writeln!(out, "  (:predicates");
        for p in plain {
            let vars: String =
                (0..p.arity).map(|i| format!(" ?x{i}")).collect::<Vec<_>>().join("");
            let _ = writeln!(out, "    ({}{vars})", p.name);
        }
        let _ = writeln!(out, "  )");
    }
    if !d.constants.is_empty() {
        let _ = writeln!(out, "  (:constants");
        for (c, ty) in &d.constants {
            let _ = writeln!(out, "    {c} - {ty}");
        }
        let _ = writeln!(out, "  )");
    }
    for schema in d.schemas.values() {
        print_schema(&mut out, schema);
    }
    out.push_str(")\n");
    out
}

fn print_schema(out: &mut String, schema: &ActionSchema) {
    let _ = writeln!(out, "  (:action {}", schema.name);
    let params: Vec<String> = schema
        .params
        .iter()
        .map(|p| match &p.ty {
            Some(ty) => format!("?{} - {ty}", p.name),
            None => format!("?{}", p.name),
        })
        .collect();
    let _ = writeln!(out, "    :parameters ({})", params.join(" "));
    let _ = writeln!(out, "    :precondition {}", print_formula(&schema.pre));
    let mut effs: Vec<String> = schema.eff_add.iter().map(|a| a.to_string()).collect();
    effs.extend(schema.eff_del.iter().map(|a| format!("(not {a})")));
    let _ = writeln!(out, "    :effect (and {})", effs.join(" "));
    let _ = writeln!(out, "  )");
}

pub fn print_formula(f: &Formula) -> String {
    match f {
        Formula::Lit(l) => {
            if l.positive {
                l.atom.to_string()
            } else {
                format!("(not {})", l.atom)
            }
        }
        Formula::And(fs) => {
            let parts: Vec<String> = fs.iter().map(print_formula).collect();
            if parts.is_empty() {
                "(and)".into()
            } else {
                format!("(and {})", parts.join(" "))
            }
        }
        Formula::Or(fs) => {
            let parts: Vec<String> = fs.iter().map(print_formula).collect();
            if parts.is_empty() {
                "(or)".into()
            } else {
                format!("(or {})", parts.join(" "))
            }
        }
        Formula::ForallImplies { var, antecedent, consequent } => {
            format!("(forall (?{var}) (imply {antecedent} {consequent}))")
        }
    }
}

pub fn print_problem(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    if !p.objects.is_empty() {
        let _ = writeln!(out, "  (:objects");
        for (o, ty) in &p.objects {
            let _ = writeln!(out, "    {o} - {ty}");
        }
        let _ = writeln!(out, "  )");
    }
    let _ = writeln!(out, "  (:init");
    for atom in &p.init.atoms {
        let args = if atom.args.is_empty() {
            String::new()
        } else {
            format!(" {}", atom.args.join(" "))
        };
        let _ = writeln!(out, "    ({}{args})", atom.pred);
    }
    let _ = writeln!(out, "  )");
    let _ = writeln!(out, "  (:goal {})", print_formula(&p.goal));
    out.push_str(")\n");
    out
}
