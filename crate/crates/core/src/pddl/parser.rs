use super::lexer::{lex, Tok, Token};
use super::{
    ActionSchema, Atom, Domain, Formula, GroundAtom, Param, PddlError, Predicate,
    PredicateKind, Problem, State, Term,
};
use std::collections::BTreeSet;

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn loc(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col))
                .unwrap_or((1, 1)),
        }
    }

    fn err(&self, message: impl Into<String>) -> PddlError {
        let (line, col) = self.loc();
        PddlError::Parse { line, col, message: message.into() }
    }

    fn next(&mut self) -> Result<Token, PddlError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_lparen(&mut self) -> Result<(), PddlError> {
        match self.next()?.tok {
            Tok::LParen => Ok(()),
            t => Err(self.err(format!("expected '(', found {t:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), PddlError> {
        match self.next()?.tok {
            Tok::RParen => Ok(()),
            t => Err(self.err(format!("expected ')', found {t:?}"))),
        }
    }

    fn expect_sym(&mut self) -> Result<(String, usize, usize), PddlError> {
        let t = self.next()?;
        match t.tok {
            Tok::Sym(s) => Ok((s, t.line, t.col)),
            other => Err(self.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), PddlError> {
        let (s, line, col) = self.expect_sym()?;
        if s == kw {
            Ok(())
        } else {
            Err(PddlError::Parse {
                line,
                col,
                message: format!("expected '{kw}', found '{s}'"),
            })
        }
    }

    fn at_rparen(&self) -> bool {
        matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen))
    }

    fn peek_sym(&self) -> Option<&str> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Sym(s)) => Some(s.as_str()),
            _ => None,
        }
    }
}

fn is_var(s: &str) -> bool {
    s.starts_with('?')
}

/// Parse a domain file. Declarations (`:types`, `:properties`,
/// `:predicates`, `:constants`) must precede `:action` sections so that
/// atoms can be checked against them with a source location.
pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let mut cur = Cursor { toks: lex(text)?, pos: 0 };
    cur.expect_lparen()?;
    cur.expect_keyword("define")?;
    cur.expect_lparen()?;
    cur.expect_keyword("domain")?;
    let (name, ..) = cur.expect_sym()?;
    cur.expect_rparen()?;

    let mut domain = Domain::new(name);
    while !cur.at_rparen() {
        cur.expect_lparen()?;
        let (section, sline, scol) = cur.expect_sym()?;
        match section.as_str() {
            ":types" | ":properties" => {
                let kind = if section == ":types" {
                    PredicateKind::Type
                } else {
                    PredicateKind::Property
                };
                while !cur.at_rparen() {
                    let (n, line, col) = cur.expect_sym()?;
                    if domain.predicates.contains_key(&n) {
                        return Err(PddlError::Parse {
                            line,
                            col,
                            message: format!("predicate {n} declared twice"),
                        });
                    }
                    domain
                        .predicates
                        .insert(n.clone(), Predicate { name: n, arity: 1, kind });
                }
                cur.expect_rparen()?;
            }
            ":predicates" => {
                while !cur.at_rparen() {
                    cur.expect_lparen()?;
                    let (n, line, col) = cur.expect_sym()?;
                    let mut arity = 0;
                    while !cur.at_rparen() {
                        let (v, vline, vcol) = cur.expect_sym()?;
                        if !is_var(&v) {
                            return Err(PddlError::Parse {
                                line: vline,
                                col: vcol,
                                message: format!(
                                    "predicate declaration expects variables, found '{v}'"
                                ),
                            });
                        }
                        arity += 1;
                    }
                    cur.expect_rparen()?;
                    if domain.predicates.contains_key(&n) {
                        return Err(PddlError::Parse {
                            line,
                            col,
                            message: format!("predicate {n} declared twice"),
                        });
                    }
                    domain.predicates.insert(
                        n.clone(),
                        Predicate { name: n, arity, kind: PredicateKind::Plain },
                    );
                }
                cur.expect_rparen()?;
            }
            ":constants" => {
                parse_typed_list(&mut cur, |name, ty, line, col| {
                    let ty = ty.ok_or(PddlError::Parse {
                        line,
                        col,
                        message: format!("constant {name} needs a type"),
                    })?;
                    if domain.constants.contains_key(&name) {
                        return Err(PddlError::Parse {
                            line,
                            col,
                            message: format!("constant {name} declared twice"),
                        });
                    }
                    domain.constants.insert(name, ty);
                    Ok(())
                })?;
                cur.expect_rparen()?;
            }
            ":action" => {
                let (aname, aline, acol) = cur.expect_sym()?;
                if domain.schemas.contains_key(&aname) {
                    return Err(PddlError::Parse {
                        line: aline,
                        col: acol,
                        message: format!("duplicate operator name {aname}"),
                    });
                }
                cur.expect_keyword(":parameters")?;
                cur.expect_lparen()?;
                let mut params = Vec::new();
                parse_typed_param_list(&mut cur, &mut params)?;
                cur.expect_rparen()?;
                let mut pre = Formula::top();
                if cur.peek_sym() == Some(":precondition") {
                    cur.next()?;
                    pre = parse_formula(&mut cur, &domain)?;
                }
                cur.expect_keyword(":effect")?;
                let mut eff_add = BTreeSet::new();
                let mut eff_del = BTreeSet::new();
                parse_effect(&mut cur, &domain, &mut eff_add, &mut eff_del)?;
                cur.expect_rparen()?;
                domain.schemas.insert(
                    aname.clone(),
                    ActionSchema { name: aname, params, pre, eff_add, eff_del },
                );
            }
            other => {
                return Err(PddlError::Parse {
                    line: sline,
                    col: scol,
                    message: format!("unknown section '{other}'"),
                });
            }
        }
    }
    cur.expect_rparen()?;
    if let Some(t) = cur.peek() {
        return Err(PddlError::Parse {
            line: t.line,
            col: t.col,
            message: "trailing input after domain".into(),
        });
    }
    domain.check()?;
    Ok(domain)
}

fn parse_typed_list(
    cur: &mut Cursor,
    mut sink: impl FnMut(String, Option<String>, usize, usize) -> Result<(), PddlError>,
) -> Result<(), PddlError> {
    // A `- Type` annotation binds only the immediately preceding name, so
    // untyped and typed entries mix freely and printing round-trips exactly.
    let mut pending: Option<(String, usize, usize)> = None;
    while !cur.at_rparen() {
        let (s, line, col) = cur.expect_sym()?;
        if s == "-" {
            let (ty, tl, tc) = cur.expect_sym()?;
            match pending.take() {
                Some((name, l, c)) => sink(name, Some(ty), l, c)?,
                None => {
                    return Err(PddlError::Parse {
                        line: tl,
                        col: tc,
                        message: "type annotation without a preceding name".into(),
                    })
                }
            }
        } else {
            if let Some((name, l, c)) = pending.take() {
                sink(name, None, l, c)?;
            }
            pending = Some((s, line, col));
        }
    }
    if let Some((name, l, c)) = pending {
        sink(name, None, l, c)?;
    }
    Ok(())
}

fn parse_typed_param_list(cur: &mut Cursor, out: &mut Vec<Param>) -> Result<(), PddlError> {
    parse_typed_list(cur, |name, ty, line, col| {
        if !is_var(&name) {
            return Err(PddlError::Parse {
                line,
                col,
                message: format!("parameter must be a variable, found '{name}'"),
            });
        }
        out.push(Param { name: name[1..].to_string(), ty });
        Ok(())
    })
}

/// Parse `( Pred t1 t2 ... )`, checking declaration and arity.
fn parse_atom(cur: &mut Cursor, domain: &Domain) -> Result<Atom, PddlError> {
    cur.expect_lparen()?;
    let (pred, line, col) = cur.expect_sym()?;
    let mut args = Vec::new();
    while !cur.at_rparen() {
        let (s, ..) = cur.expect_sym()?;
        if let Some(v) = s.strip_prefix('?') {
            args.push(Term::Var(v.to_string()));
        } else {
            args.push(Term::Const(s));
        }
    }
    cur.expect_rparen()?;
    let decl = domain.predicates.get(&pred).ok_or(PddlError::Parse {
        line,
        col,
        message: format!("undeclared predicate {pred}"),
    })?;
    if decl.arity != args.len() {
        return Err(PddlError::Parse {
            line,
            col,
            message: format!(
                "predicate {pred} expects {} args, found {}",
                decl.arity,
                args.len()
            ),
        });
    }
    Ok(Atom { pred, args })
}

fn parse_formula(cur: &mut Cursor, domain: &Domain) -> Result<Formula, PddlError> {
    // Look ahead past the '(' to see whether this is a connective or an atom.
    let save = cur.pos;
    cur.expect_lparen()?;
    let head = cur.peek_sym().map(|s| s.to_string());
    match head.as_deref() {
        Some("and") | Some("or") => {
            let is_and = head.as_deref() == Some("and");
            cur.next()?;
            let mut parts = Vec::new();
            while !cur.at_rparen() {
                parts.push(parse_formula(cur, domain)?);
            }
            cur.expect_rparen()?;
            Ok(if is_and { Formula::And(parts) } else { Formula::Or(parts) })
        }
        Some("not") => {
            cur.next()?;
            let atom = parse_atom(cur, domain)?;
            cur.expect_rparen()?;
            Ok(Formula::neg(atom))
        }
        Some("forall") => {
            cur.next()?;
            cur.expect_lparen()?;
            let (v, vline, vcol) = cur.expect_sym()?;
            let var = v.strip_prefix('?').ok_or(PddlError::Parse {
                line: vline,
                col: vcol,
                message: "forall expects a variable".into(),
            })?;
            let var = var.to_string();
            cur.expect_rparen()?;
            cur.expect_lparen()?;
            cur.expect_keyword("imply")?;
            let antecedent = parse_atom(cur, domain)?;
            let consequent = parse_atom(cur, domain)?;
            cur.expect_rparen()?;
            cur.expect_rparen()?;
            Ok(Formula::ForallImplies { var, antecedent, consequent })
        }
        _ => {
            cur.pos = save;
            let atom = parse_atom(cur, domain)?;
            Ok(Formula::pos(atom))
        }
    }
}

fn parse_effect(
    cur: &mut Cursor,
    domain: &Domain,
    add: &mut BTreeSet<Atom>,
    del: &mut BTreeSet<Atom>,
) -> Result<(), PddlError> {
    let save = cur.pos;
    cur.expect_lparen()?;
    match cur.peek_sym() {
        Some("and") => {
            cur.next()?;
            while !cur.at_rparen() {
                parse_effect(cur, domain, add, del)?;
            }
            cur.expect_rparen()?;
        }
        Some("not") => {
            cur.next()?;
            let atom = parse_atom(cur, domain)?;
            cur.expect_rparen()?;
            del.insert(atom);
        }
        _ => {
            cur.pos = save;
            let atom = parse_atom(cur, domain)?;
            add.insert(atom);
        }
    }
    Ok(())
}

/// Parse a problem file against an already parsed domain. Problem objects
/// are added to the returned `Problem`, not to the domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let mut cur = Cursor { toks: lex(text)?, pos: 0 };
    cur.expect_lparen()?;
    cur.expect_keyword("define")?;
    cur.expect_lparen()?;
    cur.expect_keyword("problem")?;
    let (name, ..) = cur.expect_sym()?;
    cur.expect_rparen()?;

    cur.expect_lparen()?;
    cur.expect_keyword(":domain")?;
    let (domain_name, dline, dcol) = cur.expect_sym()?;
    cur.expect_rparen()?;
    if domain_name != domain.name {
        return Err(PddlError::Parse {
            line: dline,
            col: dcol,
            message: format!(
                "problem references domain '{domain_name}', expected '{}'",
                domain.name
            ),
        });
    }

    let mut problem = Problem {
        name,
        domain_name,
        objects: Default::default(),
        init: State::new(),
        goal: Formula::top(),
    };
    // Atoms must resolve against domain + problem objects.
    let mut extended = domain.clone();
    let mut saw_goal = false;
    while !cur.at_rparen() {
        cur.expect_lparen()?;
        let (section, sline, scol) = cur.expect_sym()?;
        match section.as_str() {
            ":objects" => {
                parse_typed_list(&mut cur, |name, ty, line, col| {
                    let ty = ty.ok_or(PddlError::Parse {
                        line,
                        col,
                        message: format!("object {name} needs a type"),
                    })?;
                    match extended.predicates.get(&ty) {
                        Some(p) if p.kind == PredicateKind::Type => {}
                        _ => {
                            return Err(PddlError::Parse {
                                line,
                                col,
                                message: format!("object {name} has unknown type {ty}"),
                            })
                        }
                    }
                    if extended.constants.contains_key(&name) {
                        return Err(PddlError::Parse {
                            line,
                            col,
                            message: format!("object {name} already declared"),
                        });
                    }
                    extended.constants.insert(name.clone(), ty.clone());
                    problem.objects.insert(name, ty);
                    Ok(())
                })?;
                cur.expect_rparen()?;
            }
            ":init" => {
                while !cur.at_rparen() {
                    let (line, col) = cur.loc();
                    let atom = parse_atom(&mut cur, &extended)?;
                    let mut args = Vec::with_capacity(atom.args.len());
                    for t in &atom.args {
                        match t {
                            Term::Const(c) => args.push(c.clone()),
                            Term::Var(v) => {
                                return Err(PddlError::Parse {
                                    line,
                                    col,
                                    message: format!(
                                        "init atoms must be ground, found ?{v}"
                                    ),
                                })
                            }
                        }
                    }
                    problem.init.insert(GroundAtom { pred: atom.pred, args });
                }
                cur.expect_rparen()?;
            }
            ":goal" => {
                problem.goal = parse_formula(&mut cur, &extended)?;
                saw_goal = true;
                cur.expect_rparen()?;
            }
            other => {
                return Err(PddlError::Parse {
                    line: sline,
                    col: scol,
                    message: format!("unknown section '{other}'"),
                });
            }
        }
    }
    cur.expect_rparen()?;
    if !saw_goal {
        return Err(cur.err("problem has no :goal"));
    }
    Ok(problem)
}
