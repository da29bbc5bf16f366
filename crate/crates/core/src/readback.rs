//! In-net read-back: reader agents walk the normalized net and assemble the
//! normal form as an atom that ends up alone on the interface.

use thiserror::Error;

use crate::inet::{
    AgentTerm, Bindings, Configuration, Equation, Guard, KindDescriptor, KindId, Payload,
    PayloadSort, Registry, RegistryError, Rule,
};
use crate::lambda::{ctx_apply_left, ctx_under_lambda, free_vars, plug, Context, Term};
use crate::optimal::{encode, CoreSignature, Marked, Sharing};
use crate::token::WaitSignature;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReadSignature {
    pub top: KindId,
    pub read: KindId,
}

impl ReadSignature {
    pub fn register(registry: &mut Registry) -> Result<ReadSignature, RegistryError> {
        Ok(ReadSignature {
            top: registry.register_kind(KindDescriptor::new("Top", 1))?,
            read: registry
                .register_kind(KindDescriptor::new("Read", 1).with_payload(PayloadSort::Context))?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// `Read{C}[Fan_i(x, y)] ~ Fan_i[Read{C}(x), Read{C}(y)]`.
    pub read_passes_fans: bool,
}

/// Marks every free occurrence as an atom; bound occurrences are untouched.
pub fn mark_free(term: &Term) -> Marked {
    fn go(term: &Term, bound: &mut Vec<String>) -> Marked {
        match term {
            Term::Var(x) if bound.contains(x) => Marked::Var(x.clone()),
            Term::Var(x) => Marked::Atom(x.clone()),
            Term::Abs(x, body) => {
                bound.push(x.clone());
                let body = go(body, bound);
                bound.pop();
                Marked::Abs(x.clone(), Box::new(body))
            }
            Term::App(fun, arg) => Marked::App(Box::new(go(fun, bound)), Box::new(go(arg, bound))),
        }
    }
    go(term, &mut Vec::new())
}

/// `<x | Eval(Read{[]}(Top(x))) = root, encoding of the marked term>`.
pub fn initial_config(
    term: &Term,
    core: &CoreSignature,
    wait: &WaitSignature,
    read: &ReadSignature,
    sharing: Sharing,
) -> Configuration {
    let mut config = Configuration::new();
    let x = config.fresh();
    config.interface.push(x.into());
    let encoding = encode(&mark_free(term), 0, sharing, core, &mut config);
    let reader = AgentTerm::with_payload(
        read.read,
        Payload::Context(Context::hole()),
        vec![AgentTerm::agent(read.top, vec![x.into()])],
    );
    config.equations.push(Equation::new(
        AgentTerm::agent(wait.eval, vec![reader]),
        encoding.root,
    ));
    config.equations.extend(encoding.equations);
    config
}

/// Names fresh read-back binders must avoid: the input's free variables.
pub fn reserved_binders(term: &Term) -> Vec<String> {
    free_vars(term).into_iter().collect()
}

fn atom(core: &CoreSignature, term: Term) -> AgentTerm {
    AgentTerm::with_payload(core.atom, Payload::Term(term), vec![])
}

fn payload_term(payload: &Payload) -> Term {
    payload.as_term().expect("atom carries a term").clone()
}

fn payload_context(payload: &Payload) -> &Context {
    payload.as_context().expect("reader carries a context")
}

pub fn install_readback_rules(
    registry: &mut Registry,
    core: &CoreSignature,
    wait: &WaitSignature,
    r: &ReadSignature,
    options: ReadOptions,
) -> Result<(), RegistryError> {
    let c = *core;
    let r = *r;
    let eval = wait.eval;
    let wait_kind = wait.wait;

    // Read{C}[x] ~ Lam_i[Atom{y}, Read{C[\y.[]]}(x)], y fresh
    registry.register_rule(Rule::new(
        r.read,
        c.lam,
        Guard::ALWAYS,
        move |read, _, f| {
            let x = f.name();
            let y = f.binder();
            let ctx = ctx_under_lambda(payload_context(&read.payload), &y);
            Bindings {
                left: vec![x.into()],
                right: vec![
                    atom(&c, Term::Var(y)),
                    AgentTerm::with_payload(r.read, Payload::Context(ctx), vec![x.into()]),
                ],
            }
        },
    ))?;

    // App_i[Read{M []}(x), x] ~ Atom{M}
    registry.register_rule(Rule::new(c.app, c.atom, Guard::ALWAYS, move |_, a, f| {
        let x = f.name();
        let ctx = ctx_apply_left(payload_term(&a.payload));
        Bindings {
            left: vec![
                AgentTerm::with_payload(r.read, Payload::Context(ctx), vec![x.into()]),
                x.into(),
            ],
            right: vec![],
        }
    }))?;

    // Read{C}[Atom{C[M]}] ~ Atom{M}
    registry.register_rule(Rule::new(
        r.read,
        c.atom,
        Guard::ALWAYS,
        move |read, a, _| {
            let filled = plug(payload_context(&read.payload), payload_term(&a.payload));
            Bindings {
                left: vec![atom(&c, filled)],
                right: vec![],
            }
        },
    ))?;

    for control in [c.bracket, c.croissant] {
        // Read{C}[α(x)] ~ α[Read{C}(x)]
        registry.register_rule(Rule::new(
            r.read,
            control,
            Guard::ALWAYS,
            move |read, a, f| {
                let x = f.name();
                Bindings {
                    left: vec![AgentTerm::indexed(
                        control,
                        a.index.unwrap(),
                        vec![x.into()],
                    )],
                    right: vec![AgentTerm::with_payload(
                        r.read,
                        read.payload.clone(),
                        vec![x.into()],
                    )],
                }
            },
        ))?;
        // Top[x] ~ α[Top(x)]
        registry.register_rule(Rule::new(r.top, control, Guard::ALWAYS, move |_, _, f| {
            let x = f.name();
            Bindings {
                left: vec![x.into()],
                right: vec![AgentTerm::agent(r.top, vec![x.into()])],
            }
        }))?;
    }

    // Read{C}[Wait(x, y)] ~ Wait[Read{C}(x), y]
    registry.register_rule(Rule::new(
        r.read,
        wait_kind,
        Guard::ALWAYS,
        move |read, _, f| {
            let (x, y) = (f.name(), f.name());
            Bindings {
                left: vec![AgentTerm::agent(wait_kind, vec![x.into(), y.into()])],
                right: vec![
                    AgentTerm::with_payload(r.read, read.payload.clone(), vec![x.into()]),
                    y.into(),
                ],
            }
        },
    ))?;

    // Eval[Atom{M}] ~ Atom{M} and Top[Atom{M}] ~ Atom{M}
    for kind in [eval, r.top] {
        registry.register_rule(Rule::new(kind, c.atom, Guard::ALWAYS, move |_, a, _| {
            Bindings {
                left: vec![atom(&c, payload_term(&a.payload))],
                right: vec![],
            }
        }))?;
    }

    if options.read_passes_fans {
        registry.register_rule(Rule::new(
            r.read,
            c.fan,
            Guard::ALWAYS,
            move |read, fan, f| {
                let (x, y) = (f.name(), f.name());
                Bindings {
                    left: vec![AgentTerm::indexed(
                        c.fan,
                        fan.index.unwrap(),
                        vec![x.into(), y.into()],
                    )],
                    right: vec![
                        AgentTerm::with_payload(r.read, read.payload.clone(), vec![x.into()]),
                        AgentTerm::with_payload(r.read, read.payload.clone(), vec![y.into()]),
                    ],
                }
            },
        ))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadbackError {
    #[error("net is not a single atom: {0}")]
    NotNormalForm(String),
}

/// The term of a final `<Atom{N} | >` configuration.
pub fn extract_result(config: &Configuration, registry: &Registry) -> Result<Term, ReadbackError> {
    if config.equations.is_empty() && config.interface.len() == 1 {
        if let Some(agent) = config.interface[0].as_agent() {
            if registry.kind(agent.kind).name == "Atom" {
                if let Some(term) = agent.payload.as_term() {
                    return Ok(term.clone());
                }
            }
        }
    }
    Err(ReadbackError::NotNormalForm(config.dump(registry)))
}
