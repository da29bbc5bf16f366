use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// An untyped lambda term with named variables. Free variables are allowed.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(String),
    Abs(String, Box<Term>),
    App(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn abs(binder: impl Into<String>, body: Term) -> Term {
        Term::Abs(binder.into(), Box::new(body))
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    /// Left-nested application of `head` to every element of `args`.
    pub fn apply_all(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    /// Number of abstraction and application nodes; variables are not counted.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::Abs(_, body) => 1 + body.size(),
            Term::App(fun, arg) => 1 + fun.size() + arg.size(),
        }
    }

    /// True when some subterm has the shape `(\x.M) N`.
    pub fn has_redex(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Abs(_, body) => body.has_redex(),
            Term::App(fun, arg) => {
                matches!(**fun, Term::Abs(..)) || fun.has_redex() || arg.has_redex()
            }
        }
    }

    pub fn is_normal(&self) -> bool {
        !self.has_redex()
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // prec 0: anything, 1: function position, 2: argument position
        match self {
            Term::Var(name) => f.write_str(name),
            Term::Abs(binder, body) => {
                if prec > 0 {
                    f.write_str("(")?;
                }
                write!(f, "\\{binder}.")?;
                body.fmt_prec(f, 0)?;
                if prec > 0 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Term::App(fun, arg) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                fun.fmt_prec(f, 1)?;
                f.write_str(" ")?;
                arg.fmt_prec(f, 2)?;
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Prints with minimal parentheses; `parse` reads the output back.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

pub fn free_vars(term: &Term) -> BTreeSet<String> {
    fn go(term: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match term {
            Term::Var(name) => {
                if !bound.iter().any(|b| b == name) {
                    out.insert(name.clone());
                }
            }
            Term::Abs(binder, body) => {
                bound.push(binder.clone());
                go(body, bound, out);
                bound.pop();
            }
            Term::App(fun, arg) => {
                go(fun, bound, out);
                go(arg, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(term, &mut Vec::new(), &mut out);
    out
}

/// Appends apostrophes to `base` until it avoids every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Equality up to consistent renaming of bound variables.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn go<'t>(
        a: &'t Term,
        b: &'t Term,
        env_a: &mut HashMap<&'t str, Vec<usize>>,
        env_b: &mut HashMap<&'t str, Vec<usize>>,
        depth: usize,
    ) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let bx = env_a.get(x.as_str()).and_then(|s| s.last());
                let by = env_b.get(y.as_str()).and_then(|s| s.last());
                match (bx, by) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Abs(x, body_a), Term::Abs(y, body_b)) => {
                env_a.entry(x.as_str()).or_default().push(depth);
                env_b.entry(y.as_str()).or_default().push(depth);
                let eq = go(body_a, body_b, env_a, env_b, depth + 1);
                env_a.get_mut(x.as_str()).map(Vec::pop);
                env_b.get_mut(y.as_str()).map(Vec::pop);
                eq
            }
            (Term::App(fa, xa), Term::App(fb, xb)) => {
                go(fa, fb, env_a, env_b, depth) && go(xa, xb, env_a, env_b, depth)
            }
            _ => false,
        }
    }
    go(a, b, &mut HashMap::new(), &mut HashMap::new(), 0)
}

/// Capture-avoiding substitution `body[name := value]`.
pub fn substitute(body: &Term, name: &str, value: &Term) -> Term {
    let value_fv = free_vars(value);
    subst(body, name, value, &value_fv)
}

fn subst(body: &Term, name: &str, value: &Term, value_fv: &BTreeSet<String>) -> Term {
    match body {
        Term::Var(x) if x == name => value.clone(),
        Term::Var(_) => body.clone(),
        Term::App(fun, arg) => Term::app(
            subst(fun, name, value, value_fv),
            subst(arg, name, value, value_fv),
        ),
        Term::Abs(binder, _) if binder == name => body.clone(),
        Term::Abs(binder, inner) => {
            let inner_fv = free_vars(inner);
            if !inner_fv.contains(name) {
                return body.clone();
            }
            if value_fv.contains(binder) {
                let mut avoid = inner_fv;
                avoid.extend(value_fv.iter().cloned());
                avoid.insert(name.to_string());
                let renamed = fresh_name(binder, &avoid);
                let inner = substitute(inner, binder, &Term::Var(renamed.clone()));
                Term::abs(renamed, subst(&inner, name, value, value_fv))
            } else {
                Term::abs(binder.clone(), subst(inner, name, value, value_fv))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::parse;

    fn t(s: &str) -> Term {
        parse(s).unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn prints_minimal_parentheses() {
        assert_eq!(Term::abs("x", Term::var("x")).to_string(), "\\x.x");
        let right = Term::app(Term::var("x"), Term::app(Term::var("y"), Term::var("z")));
        assert_eq!(right.to_string(), "x (y z)");
        let redex = Term::app(Term::abs("x", Term::var("x")), Term::var("y"));
        assert_eq!(redex.to_string(), "(\\x.x) y");
        assert_eq!(t("x y z").to_string(), "x y z");
        assert_eq!(t("x (\\y.y)").to_string(), "x (\\y.y)");
    }

    #[test]
    fn free_variables() {
        assert_eq!(free_vars(&t("x")), set(&["x"]));
        assert_eq!(free_vars(&t("\\x.x")), set(&[]));
        assert_eq!(free_vars(&t("(\\x.y) x")), set(&["x", "y"]));
    }

    #[test]
    fn alpha_equivalence() {
        assert!(alpha_eq(&t("\\x.x"), &t("\\y.y")));
        assert!(!alpha_eq(&t("\\x.\\y.x"), &t("\\x.\\y.y")));
        assert!(!alpha_eq(&t("x"), &t("y")));
        assert!(alpha_eq(&t("\\x.\\x.x"), &t("\\a.\\b.b")));
        assert!(!alpha_eq(&t("\\x.y"), &t("\\y.y")));
    }

    #[test]
    fn substitution_avoids_capture() {
        assert_eq!(substitute(&t("x"), "x", &t("y")), t("y"));
        assert_eq!(substitute(&t("\\y.x"), "x", &t("y")), t("\\y'.y"));
        assert_eq!(substitute(&t("\\x.x"), "x", &t("y")), t("\\x.x"));
        let nested = substitute(&t("\\y.\\y'.x y y'"), "x", &t("y"));
        assert!(alpha_eq(&nested, &t("\\a.\\b.y a b")));
    }

    #[test]
    fn identifier_class() {
        assert!(is_identifier("x'"));
        assert!(is_identifier("_a1"));
        assert!(!is_identifier("1a"));
        assert!(!is_identifier(""));
    }
}
