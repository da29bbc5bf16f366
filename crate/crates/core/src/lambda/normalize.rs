use std::collections::BTreeSet;
use std::rc::Rc;

use super::term::{free_vars, fresh_name, substitute, Term};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NormalizeOutcome {
    Normal { term: Term, beta_steps: u64 },
    FuelExhausted { steps_used: u64 },
}

impl NormalizeOutcome {
    pub fn normal_form(&self) -> Option<&Term> {
        match self {
            NormalizeOutcome::Normal { term, .. } => Some(term),
            NormalizeOutcome::FuelExhausted { .. } => None,
        }
    }
}

/// Contracts the leftmost-outermost redex, if there is one.
pub fn reduce_step(term: &Term) -> Option<Term> {
    match term {
        Term::Var(_) => None,
        Term::Abs(binder, body) => reduce_step(body).map(|b| Term::abs(binder.clone(), b)),
        Term::App(fun, arg) => {
            if let Term::Abs(binder, body) = &**fun {
                return Some(substitute(body, binder, arg));
            }
            if let Some(f) = reduce_step(fun) {
                return Some(Term::App(Box::new(f), arg.clone()));
            }
            reduce_step(arg).map(|a| Term::App(fun.clone(), Box::new(a)))
        }
    }
}

// The normalizer below runs a call-by-name environment machine for head
// reduction and recurses into abstraction bodies and neutral arguments from
// left to right. That visits redexes in exactly leftmost-outermost order, and
// each machine beta step contracts one term-level redex, so the step count is
// the normal-order count without paying for repeated substitution.

enum Code {
    Bound(usize),
    Free(String),
    Abs(String, Rc<Code>),
    App(Rc<Code>, Rc<Code>),
}

fn compile(term: &Term, scope: &mut Vec<String>) -> Rc<Code> {
    Rc::new(match term {
        Term::Var(name) => match scope.iter().rev().position(|b| b == name) {
            Some(index) => Code::Bound(index),
            None => Code::Free(name.clone()),
        },
        Term::Abs(binder, body) => {
            scope.push(binder.clone());
            let body = compile(body, scope);
            scope.pop();
            Code::Abs(binder.clone(), body)
        }
        Term::App(fun, arg) => Code::App(compile(fun, scope), compile(arg, scope)),
    })
}

#[derive(Clone)]
enum Entry {
    Closure(Rc<Code>, Env),
    /// A variable bound by an abstraction already being read back.
    Neutral(Rc<str>),
}

type Env = Option<Rc<EnvNode>>;

struct EnvNode {
    entry: Entry,
    next: Env,
}

// Long environment chains would overflow the stack if dropped recursively.
impl Drop for EnvNode {
    fn drop(&mut self) {
        let mut pending = vec![self.next.take()];
        if let Entry::Closure(_, env) = &mut self.entry {
            pending.push(env.take());
        }
        while let Some(env) = pending.pop() {
            let Some(rc) = env else { continue };
            if let Ok(mut node) = Rc::try_unwrap(rc) {
                pending.push(node.next.take());
                if let Entry::Closure(_, env) = &mut node.entry {
                    pending.push(env.take());
                }
            }
        }
    }
}

fn lookup(env: &Env, index: usize) -> &Entry {
    let mut node = env.as_ref().expect("bound variable outside environment");
    for _ in 0..index {
        node = node
            .next
            .as_ref()
            .expect("bound variable outside environment");
    }
    &node.entry
}

fn extend(env: &Env, entry: Entry) -> Env {
    Some(Rc::new(EnvNode {
        entry,
        next: env.clone(),
    }))
}

struct Exhausted;

struct Machine {
    fuel: u64,
    steps: u64,
    avoid: BTreeSet<String>,
}

impl Machine {
    fn normal_form(&mut self, code: Rc<Code>, env: Env) -> Result<Term, Exhausted> {
        let mut code = code;
        let mut env = env;
        let mut stack: Vec<(Rc<Code>, Env)> = Vec::new();
        loop {
            match &*code {
                Code::App(fun, arg) => {
                    stack.push((arg.clone(), env.clone()));
                    code = fun.clone();
                }
                Code::Abs(binder, body) => match stack.pop() {
                    Some((arg, arg_env)) => {
                        if self.steps == self.fuel {
                            return Err(Exhausted);
                        }
                        self.steps += 1;
                        env = extend(&env, Entry::Closure(arg, arg_env));
                        code = body.clone();
                    }
                    None => {
                        let name = fresh_name(binder, &self.avoid);
                        self.avoid.insert(name.clone());
                        let inner = extend(&env, Entry::Neutral(name.as_str().into()));
                        let body = self.normal_form(body.clone(), inner);
                        self.avoid.remove(&name);
                        return Ok(Term::abs(name, body?));
                    }
                },
                Code::Bound(index) => match lookup(&env, *index).clone() {
                    Entry::Closure(c, e) => {
                        code = c;
                        env = e;
                    }
                    Entry::Neutral(name) => return self.spine(Term::Var(name.to_string()), stack),
                },
                Code::Free(name) => return self.spine(Term::Var(name.clone()), stack),
            }
        }
    }

    fn spine(&mut self, head: Term, mut stack: Vec<(Rc<Code>, Env)>) -> Result<Term, Exhausted> {
        let mut acc = head;
        while let Some((arg, env)) = stack.pop() {
            acc = Term::app(acc, self.normal_form(arg, env)?);
        }
        Ok(acc)
    }
}

/// Normal-order (leftmost-outermost) normalization, bounded by `fuel` beta
/// steps. Binders in the result are renamed with apostrophes where needed so
/// that no binder shadows another or a free variable.
pub fn normalize(term: &Term, fuel: u64) -> NormalizeOutcome {
    let code = compile(term, &mut Vec::new());
    let mut machine = Machine {
        fuel,
        steps: 0,
        avoid: free_vars(term),
    };
    match machine.normal_form(code, None) {
        Ok(term) => NormalizeOutcome::Normal {
            term,
            beta_steps: machine.steps,
        },
        Err(Exhausted) => NormalizeOutcome::FuelExhausted {
            steps_used: machine.steps,
        },
    }
}
