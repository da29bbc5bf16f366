//! The waiting construct: evaluation tokens that block a beta redex's
//! argument until one of its occurrences asks for it.

use std::collections::HashMap;

use crate::inet::{
    AgentTerm, Bindings, Configuration, Guard, KindDescriptor, KindId, Name, Registry,
    RegistryError, Rule,
};
use crate::optimal::CoreSignature;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaitSignature {
    pub call: KindId,
    pub eval: KindId,
    pub wait: KindId,
    pub hold: KindId,
    pub decide: KindId,
    /// Slots: second principal, first auxiliary, second auxiliary.
    pub amb: KindId,
}

impl WaitSignature {
    pub fn register(registry: &mut Registry) -> Result<WaitSignature, RegistryError> {
        Ok(WaitSignature {
            call: registry.register_kind(KindDescriptor::new("Call", 0))?,
            eval: registry.register_kind(KindDescriptor::new("Eval", 1))?,
            wait: registry.register_kind(KindDescriptor::new("Wait", 2))?,
            hold: registry.register_kind(KindDescriptor::new("Hold", 2))?,
            decide: registry.register_kind(KindDescriptor::new("Decide", 2))?,
            amb: registry.register_kind(KindDescriptor::new("Amb", 3).with_extra_principal())?,
        })
    }
}

fn n(name: Name) -> AgentTerm {
    name.into()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TokenOptions {
    /// Lets Eval cross brackets and croissants: `Eval[α(x)] ~ α[Eval(x)]`.
    pub eval_passes_controls: bool,
}

pub fn install_wait_rules(
    registry: &mut Registry,
    core: &CoreSignature,
    w: &WaitSignature,
    options: TokenOptions,
) -> Result<(), RegistryError> {
    let c = *core;
    let w = *w;

    // App_i[x, y] ~ Lam_i[Wait(z, Hold(z, x)), y]
    registry.register_rule(
        Rule::new(c.app, c.lam, Guard::EQUAL, move |_, _, f| {
            let (x, y, z) = (f.name(), f.name(), f.name());
            Bindings {
                left: vec![n(x), n(y)],
                right: vec![
                    AgentTerm::agent(
                        w.wait,
                        vec![n(z), AgentTerm::agent(w.hold, vec![n(z), n(x)])],
                    ),
                    n(y),
                ],
            }
        })
        .counting_beta(),
    )?;

    // Eval[Lam_i(x, y)] ~ Lam_i[x, Eval(y)]
    registry.register_rule(Rule::new(w.eval, c.lam, Guard::ALWAYS, move |_, lam, f| {
        let (x, y) = (f.name(), f.name());
        Bindings {
            left: vec![AgentTerm::indexed(
                c.lam,
                lam.index.unwrap(),
                vec![n(x), n(y)],
            )],
            right: vec![n(x), AgentTerm::agent(w.eval, vec![n(y)])],
        }
    }))?;

    // Eval[Fan_i(x, y)] ~ Fan_i[x, y]
    registry.register_rule(Rule::new(w.eval, c.fan, Guard::ALWAYS, move |_, fan, f| {
        let (x, y) = (f.name(), f.name());
        Bindings {
            left: vec![AgentTerm::indexed(
                c.fan,
                fan.index.unwrap(),
                vec![n(x), n(y)],
            )],
            right: vec![n(x), n(y)],
        }
    }))?;

    // Eval[x] ~ Wait[Eval(x), Call]
    registry.register_rule(Rule::new(w.eval, w.wait, Guard::ALWAYS, move |_, _, f| {
        let x = f.name();
        Bindings {
            left: vec![n(x)],
            right: vec![
                AgentTerm::agent(w.eval, vec![n(x)]),
                AgentTerm::agent(w.call, vec![]),
            ],
        }
    }))?;

    // Call ~ Hold[x, Eval(x)]
    registry.register_rule(Rule::new(w.call, w.hold, Guard::ALWAYS, move |_, _, f| {
        let x = f.name();
        Bindings {
            left: vec![],
            right: vec![n(x), AgentTerm::agent(w.eval, vec![n(x)])],
        }
    }))?;

    // Fan_i[Wait(x, Amb(y, Decide(z, v), v)), Wait(w, y)] ~ Wait[Fan_i(x, w), z]
    registry.register_rule(Rule::new(c.fan, w.wait, Guard::ALWAYS, move |fan, _, f| {
        let (x, y, z, v, u) = (f.name(), f.name(), f.name(), f.name(), f.name());
        let i = fan.index.unwrap();
        let amb = AgentTerm::agent(
            w.amb,
            vec![n(y), AgentTerm::agent(w.decide, vec![n(z), n(v)]), n(v)],
        );
        Bindings {
            left: vec![
                AgentTerm::agent(w.wait, vec![n(x), amb]),
                AgentTerm::agent(w.wait, vec![n(u), n(y)]),
            ],
            right: vec![AgentTerm::indexed(c.fan, i, vec![n(x), n(u)]), n(z)],
        }
    }))?;

    // Call ~ Decide[Call, Eps]
    registry.register_rule(Rule::new(
        w.call,
        w.decide,
        Guard::ALWAYS,
        move |_, _, _| Bindings {
            left: vec![],
            right: vec![
                AgentTerm::agent(w.call, vec![]),
                AgentTerm::agent(c.eps, vec![]),
            ],
        },
    ))?;

    // Eps ~ Decide[x, x]
    registry.register_rule(Rule::new(c.eps, w.decide, Guard::ALWAYS, move |_, _, f| {
        let x = f.name();
        Bindings {
            left: vec![],
            right: vec![n(x), n(x)],
        }
    }))?;

    // App_i[x, Wait(y, Hold(App_i(x, y), Wait(v, u)))] ~ Wait[v, u]
    registry.register_rule(Rule::new(c.app, w.wait, Guard::ALWAYS, move |app, _, f| {
        let (x, y, v, u) = (f.name(), f.name(), f.name(), f.name());
        let i = app.index.unwrap();
        let hold = AgentTerm::agent(
            w.hold,
            vec![
                AgentTerm::indexed(c.app, i, vec![n(x), n(y)]),
                AgentTerm::agent(w.wait, vec![n(v), n(u)]),
            ],
        );
        Bindings {
            left: vec![n(x), AgentTerm::agent(w.wait, vec![n(y), hold])],
            right: vec![n(v), n(u)],
        }
    }))?;

    // α_i[Wait(x, y)] ~ Wait[α_i(x), y] for brackets and croissants
    for control in [c.bracket, c.croissant] {
        registry.register_rule(Rule::new(control, w.wait, Guard::ALWAYS, move |a, _, f| {
            let (x, y) = (f.name(), f.name());
            Bindings {
                left: vec![AgentTerm::agent(w.wait, vec![n(x), n(y)])],
                right: vec![
                    AgentTerm::indexed(control, a.index.unwrap(), vec![n(x)]),
                    n(y),
                ],
            }
        }))?;
    }

    if options.eval_passes_controls {
        for control in [c.bracket, c.croissant] {
            registry.register_rule(Rule::new(w.eval, control, Guard::ALWAYS, move |_, a, f| {
                let x = f.name();
                Bindings {
                    left: vec![AgentTerm::indexed(control, a.index.unwrap(), vec![n(x)])],
                    right: vec![AgentTerm::agent(w.eval, vec![n(x)])],
                }
            }))?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Occurrence {
    /// An auxiliary slot of an agent of this kind.
    Aux(KindId, usize),
    /// A whole side of equation `.0`; `.1` is true for the left side.
    Side(usize, bool),
    Interface,
}

/// Token conservation: the second auxiliary of every `Wait` must lead to a
/// `Hold`, `Call`, `Decide`, `Eps` or `Amb`, possibly through name-only
/// equations. Returns one message per offending `Wait`.
pub fn check_token_chains(
    config: &Configuration,
    core: &CoreSignature,
    w: &WaitSignature,
) -> Vec<String> {
    let allowed = [w.hold, w.call, w.decide, core.eps, w.amb];
    let mut occurrences: HashMap<Name, Vec<Occurrence>> = HashMap::new();
    for t in &config.interface {
        if let Some(n) = t.as_name() {
            occurrences
                .entry(n)
                .or_default()
                .push(Occurrence::Interface);
        }
    }
    for (i, e) in config.equations.iter().enumerate() {
        for (side, left) in [(&e.left, true), (&e.right, false)] {
            if let Some(n) = side.as_name() {
                occurrences
                    .entry(n)
                    .or_default()
                    .push(Occurrence::Side(i, left));
            }
        }
    }
    let mut waits = Vec::new();
    for t in config.terms() {
        t.for_each_agent(&mut |a| {
            for (slot, child) in a.aux.iter().enumerate() {
                if let Some(n) = child.as_name() {
                    occurrences
                        .entry(n)
                        .or_default()
                        .push(Occurrence::Aux(a.kind, slot));
                }
            }
            if a.kind == w.wait {
                waits.push(match &a.aux[1] {
                    AgentTerm::Agent(held) => Err(held.kind),
                    AgentTerm::Name(n) => Ok(*n),
                });
            }
        });
    }

    let mut problems = Vec::new();
    for start in waits {
        let mut name = match start {
            Err(kind) if allowed.contains(&kind) => continue,
            Err(kind) => {
                problems.push(format!("a Wait holds {kind:?} where a token agent belongs"));
                continue;
            }
            Ok(name) => name,
        };
        let mut from = Occurrence::Aux(w.wait, 1);
        let mut hops = 0;
        let ok = loop {
            let mut others = occurrences.get(&name).cloned().unwrap_or_default();
            if let Some(i) = others.iter().position(|o| *o == from) {
                others.remove(i);
            }
            hops += 1;
            match others.as_slice() {
                [Occurrence::Aux(kind, _)] => break allowed.contains(kind),
                [Occurrence::Side(i, left)] if hops <= config.equations.len() => {
                    let e = &config.equations[*i];
                    match if *left { &e.right } else { &e.left } {
                        AgentTerm::Agent(a) => break allowed.contains(&a.kind),
                        AgentTerm::Name(n) => name = *n,
                    }
                    from = Occurrence::Side(*i, !*left);
                }
                _ => break false,
            }
        };
        if !ok {
            problems.push(format!(
                "the token chain of a Wait through {name} ends outside the token agents"
            ));
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::harness::{parse_corpus, DEFAULT_CORPUS};
    use crate::inet::{Equation, Net, Status, Strategy};
    use crate::system::{RunOptions, System};

    fn with_iface(n: usize) -> (Configuration, Vec<Name>) {
        let mut c = Configuration::new();
        let names: Vec<Name> = (0..n).map(|_| c.fresh()).collect();
        c.interface
            .extend(names.iter().map(|&x| AgentTerm::Name(x)));
        (c, names)
    }

    fn run(sys: &System, c: &Configuration, strategy: Strategy) -> Net {
        let mut net = Net::load(Arc::clone(&sys.registry), c).unwrap();
        net.set_debug(true);
        assert_eq!(
            net.run(strategy, 10_000, &mut |_| {}).unwrap(),
            Status::Done
        );
        net
    }

    #[test]
    fn arities() {
        let sys = System::standard();
        let arity = |k| sys.registry.kind(k).arity;
        let w = sys.wait;
        assert_eq!(
            [
                arity(w.call),
                arity(w.eval),
                arity(w.wait),
                arity(w.hold),
                arity(w.decide)
            ],
            [0, 1, 2, 2, 2]
        );
        assert!(sys.registry.kind(w.amb).extra_principal);
    }

    #[test]
    fn beta_puts_the_argument_behind_a_hold() {
        let sys = System::standard();
        let (mut c, n) = with_iface(4);
        c.equations.push(Equation::new(
            AgentTerm::indexed(sys.core.app, 0, vec![n[0].into(), n[1].into()]),
            AgentTerm::indexed(sys.core.lam, 0, vec![n[2].into(), n[3].into()]),
        ));
        let net = run(&sys, &c, Strategy::Fifo);
        assert_eq!(
            net.to_config().dump(&sys.registry),
            "<x0, x1, Wait(x2, Hold(x2, x0)), x1 | >"
        );
        assert_eq!(net.stats().beta, 1);
    }

    #[test]
    fn eval_releases_a_held_argument() {
        let sys = System::standard();
        let (mut c, n) = with_iface(2);
        let z = c.fresh();
        c.equations.push(Equation::new(
            AgentTerm::agent(sys.wait.eval, vec![n[0].into()]),
            AgentTerm::agent(
                sys.wait.wait,
                vec![
                    z.into(),
                    AgentTerm::agent(sys.wait.hold, vec![z.into(), n[1].into()]),
                ],
            ),
        ));
        let net = run(&sys, &c, Strategy::Fifo);
        let stats = net.stats();
        assert_eq!((stats.count("Eval~Wait"), stats.count("Call~Hold")), (1, 1));
        assert_eq!(
            net.to_config().dump(&sys.registry),
            "<x0, Eval(Eval(x0)) | >"
        );
    }

    #[test]
    fn decide_forwards_exactly_one_call() {
        let sys = System::standard();
        let (mut c, n) = with_iface(5);
        let eval = |x: Name| AgentTerm::agent(sys.wait.eval, vec![x.into()]);
        c.equations.push(Equation::new(
            AgentTerm::indexed(sys.core.fan, 0, vec![eval(n[0]), eval(n[1])]),
            AgentTerm::agent(
                sys.wait.wait,
                vec![
                    n[2].into(),
                    AgentTerm::agent(sys.wait.hold, vec![n[3].into(), n[4].into()]),
                ],
            ),
        ));
        let mut dumps = Vec::new();
        for strategy in [
            Strategy::Fifo,
            Strategy::Lifo,
            Strategy::Random(1),
            Strategy::Random(2),
            Strategy::Random(3),
        ] {
            let net = run(&sys, &c, strategy);
            let stats = net.stats();
            assert_eq!(stats.count("Fan~Wait"), 1);
            assert_eq!(stats.count("Call~Decide"), 1);
            assert_eq!(stats.count("Eps~Call"), 1);
            assert_eq!(stats.count("Call~Hold"), 1);
            dumps.push(net.to_config().dump(&sys.registry));
        }
        assert!(dumps.windows(2).all(|w| w[0] == w[1]), "{dumps:?}");
    }

    #[test]
    fn amb_and_decide_only_come_from_fan_wait() {
        let sys = System::standard();
        for term in parse_corpus(DEFAULT_CORPUS).unwrap() {
            let r = sys.reduce(&term, RunOptions::default()).unwrap();
            let s = &r.stats;
            let ambs: u64 = s
                .per_rule
                .iter()
                .filter(|(k, _)| k.starts_with("Amb~"))
                .map(|(_, v)| v)
                .sum();
            let decides = s.count("Call~Decide") + s.count("Eps~Decide");
            assert_eq!(ambs, s.count("Fan~Wait"), "{term}");
            assert_eq!(decides, s.count("Fan~Wait"), "{term}");
        }
    }

    #[test]
    fn token_chain_validator() {
        let sys = System::standard();
        let (mut good, n) = with_iface(2);
        good.equations.push(Equation::new(
            n[0],
            AgentTerm::agent(
                sys.wait.wait,
                vec![n[1].into(), AgentTerm::agent(sys.wait.call, vec![])],
            ),
        ));
        assert!(check_token_chains(&good, &sys.core, &sys.wait).is_empty());

        let (mut through_names, n) = with_iface(2);
        let (a, b) = (through_names.fresh(), through_names.fresh());
        through_names.equations.push(Equation::new(
            n[0],
            AgentTerm::agent(sys.wait.wait, vec![n[1].into(), a.into()]),
        ));
        through_names.equations.push(Equation::new(a, b));
        through_names
            .equations
            .push(Equation::new(b, AgentTerm::agent(sys.core.eps, vec![])));
        assert!(check_token_chains(&through_names, &sys.core, &sys.wait).is_empty());

        let (mut bad, n) = with_iface(3);
        bad.equations.push(Equation::new(
            n[0],
            AgentTerm::agent(sys.wait.wait, vec![n[1].into(), n[2].into()]),
        ));
        assert_eq!(check_token_chains(&bad, &sys.core, &sys.wait).len(), 1);
    }
}
