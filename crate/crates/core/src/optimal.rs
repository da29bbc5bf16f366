//! Sharing-graph core: abstraction, application, fans, brackets, croissants
//! and the eraser, with the initial encoding of lambda terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::inet::{
    AgentTerm, Bindings, Configuration, Equation, Fresh, Guard, Head, KindDescriptor, KindId,
    Payload, PayloadSort, Registry, RegistryError, Rule,
};
use crate::lambda::Term;

/// Kinds of the core signature. Aux order: `Lam(variable, body)`,
/// `App(argument, root)`, `Fan(left, right)`, `Bracket(inner)`,
/// `Croissant(inner)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoreSignature {
    pub lam: KindId,
    pub app: KindId,
    pub fan: KindId,
    pub bracket: KindId,
    pub croissant: KindId,
    pub eps: KindId,
    /// Zero-ary agent carrying a term; free variables are encoded as atoms.
    pub atom: KindId,
}

impl CoreSignature {
    pub fn register(registry: &mut Registry) -> Result<CoreSignature, RegistryError> {
        Ok(CoreSignature {
            lam: registry.register_kind(KindDescriptor::new("Lam", 2).indexed())?,
            app: registry.register_kind(KindDescriptor::new("App", 2).indexed())?,
            fan: registry.register_kind(KindDescriptor::new("Fan", 2).indexed())?,
            bracket: registry.register_kind(KindDescriptor::new("Bracket", 1).indexed())?,
            croissant: registry.register_kind(KindDescriptor::new("Croissant", 1).indexed())?,
            eps: registry.register_kind(KindDescriptor::new("Eps", 0))?,
            atom: registry
                .register_kind(KindDescriptor::new("Atom", 0).with_payload(PayloadSort::Term))?,
        })
    }

    pub fn controls(&self) -> [KindId; 3] {
        [self.fan, self.bracket, self.croissant]
    }

    /// Index shift a control agent applies to an agent of higher index that
    /// it crosses.
    pub fn control_effect(&self, kind: KindId) -> Option<i32> {
        match kind {
            k if k == self.fan => Some(0),
            k if k == self.bracket => Some(1),
            k if k == self.croissant => Some(-1),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoreOptions {
    /// `Fan ~ Atom` duplicates the atom.
    pub fan_atom: bool,
}

impl Default for CoreOptions {
    fn default() -> Self {
        CoreOptions { fan_atom: true }
    }
}

/// Crosses `lower` over `higher`: every aux of `lower` receives a copy of
/// `higher` (reindexed to `new_index`), every aux of `higher` a copy of
/// `lower`, and the copies are cross-wired.
pub(crate) fn commute(
    lower: &Head,
    lower_arity: usize,
    higher: &Head,
    higher_arity: usize,
    new_index: Option<i32>,
    fresh: &mut Fresh<'_>,
) -> (Vec<AgentTerm>, Vec<AgentTerm>) {
    let grid: Vec<Vec<_>> = (0..lower_arity)
        .map(|_| (0..higher_arity).map(|_| fresh.name()).collect())
        .collect();
    let copy = |head: &Head, index: Option<i32>, aux: Vec<AgentTerm>| {
        AgentTerm::Agent(crate::inet::Agent {
            kind: head.kind,
            index,
            payload: head.payload.clone(),
            aux,
        })
    };
    let lower_side = (0..lower_arity)
        .map(|k| {
            copy(
                higher,
                new_index,
                grid[k].iter().map(|&n| n.into()).collect(),
            )
        })
        .collect();
    let higher_side = (0..higher_arity)
        .map(|m| {
            copy(
                lower,
                lower.index,
                grid.iter().map(|row| row[m].into()).collect(),
            )
        })
        .collect();
    (lower_side, higher_side)
}

fn names(fresh: &mut Fresh<'_>, n: usize) -> Vec<AgentTerm> {
    (0..n).map(|_| fresh.name().into()).collect()
}

/// Installs control and erasure rules of the core signature. `erasable`
/// lists every registered kind that the eraser may meet; Decide and other
/// kinds with their own eraser rule are left out by the caller.
pub fn install_core_rules(
    registry: &mut Registry,
    sig: &CoreSignature,
    options: CoreOptions,
    erasable: &[KindId],
) -> Result<(), RegistryError> {
    let controls = sig.controls();
    let arity_of = |reg: &Registry, k: KindId| reg.kind(k).arity;

    for (i, &a) in controls.iter().enumerate() {
        let a_arity = arity_of(registry, a);
        // Equal index, same kind: the two agents cancel.
        registry.register_rule(Rule::new(a, a, Guard::EQUAL, move |_, _, fresh| {
            let wires = names(fresh, a_arity);
            Bindings {
                left: wires.clone(),
                right: wires,
            }
        }))?;
        for &b in &controls[i..] {
            let b_arity = arity_of(registry, b);
            let effect_a = sig.control_effect(a).expect("control");
            let effect_b = sig.control_effect(b).expect("control");
            let guard = if a == b {
                Guard::LESS
            } else {
                Guard::DIFFERENT
            };
            registry.register_rule(Rule::new(a, b, guard, move |l, r, fresh| {
                let (li, ri) = (l.index.unwrap(), r.index.unwrap());
                if li < ri {
                    let (left, right) = commute(l, a_arity, r, b_arity, Some(ri + effect_a), fresh);
                    Bindings { left, right }
                } else {
                    let (right, left) = commute(r, b_arity, l, a_arity, Some(li + effect_b), fresh);
                    Bindings { left, right }
                }
            }))?;
        }
        for target in [sig.lam, sig.app] {
            let effect = sig.control_effect(a).expect("control");
            registry.register_rule(Rule::new(a, target, Guard::LESS, move |l, r, fresh| {
                let (left, right) =
                    commute(l, a_arity, r, 2, Some(r.index.unwrap() + effect), fresh);
                Bindings { left, right }
            }))?;
        }
    }

    // Atoms absorb brackets and croissants.
    for control in [sig.bracket, sig.croissant] {
        registry.register_rule(Rule::new(control, sig.atom, Guard::ALWAYS, |_, atom, _| {
            Bindings {
                left: vec![AgentTerm::with_payload(
                    atom.kind,
                    atom.payload.clone(),
                    vec![],
                )],
                right: vec![],
            }
        }))?;
    }
    if options.fan_atom {
        registry.register_rule(Rule::new(sig.fan, sig.atom, Guard::ALWAYS, |_, atom, _| {
            let copy = || AgentTerm::with_payload(atom.kind, atom.payload.clone(), vec![]);
            Bindings {
                left: vec![copy(), copy()],
                right: vec![],
            }
        }))?;
    }

    let mut seen = BTreeSet::new();
    for &kind in erasable {
        if !seen.insert(kind) {
            continue;
        }
        let arity = arity_of(registry, kind);
        let eps = sig.eps;
        registry.register_rule(Rule::new(sig.eps, kind, Guard::ALWAYS, move |_, _, _| {
            Bindings {
                left: vec![],
                right: (0..arity).map(|_| AgentTerm::agent(eps, vec![])).collect(),
            }
        }))?;
    }
    Ok(())
}

/// A term whose free variable occurrences are marked as atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Marked {
    Var(String),
    Atom(String),
    Abs(String, Box<Marked>),
    App(Box<Marked>, Box<Marked>),
}

/// Result of encoding: the root term and any extra equations.
#[derive(Clone, Debug)]
pub struct Encoding {
    pub root: AgentTerm,
    pub equations: Vec<Equation>,
}

struct Binder {
    name: String,
    level: i32,
    occurrences: Vec<AgentTerm>,
}

/// Where the fans joining several occurrences of one variable are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sharing {
    /// A fan at each application whose two sides both use the variable,
    /// with one bracket per variable at each argument box.
    #[default]
    Application,
    /// A balanced fan tree at the binder, with a bracket chain per
    /// occurrence.
    Binder,
}

/// Encodes `term` at `level`. Every bound occurrence gets a croissant at its
/// own level and every argument box a bracket on the wires that leave it.
/// Free variables become atoms.
pub fn encode(
    term: &Marked,
    level: i32,
    sharing: Sharing,
    sig: &CoreSignature,
    config: &mut Configuration,
) -> Encoding {
    let mut equations = Vec::new();
    let root = match sharing {
        Sharing::Binder => encode_at(term, level, sig, config, &mut Vec::new(), &mut equations),
        Sharing::Application => {
            let (root, open) = encode_shared(term, level, sig, config, &mut equations);
            debug_assert!(open.is_empty(), "bound variables escaped their binder");
            root
        }
    };
    Encoding { root, equations }
}

/// Returns the root and, for each bound variable used inside `term` but
/// bound outside it, the single wire tree leading to its occurrences.
fn encode_shared(
    term: &Marked,
    level: i32,
    sig: &CoreSignature,
    config: &mut Configuration,
    equations: &mut Vec<Equation>,
) -> (AgentTerm, BTreeMap<String, AgentTerm>) {
    match term {
        Marked::Atom(x) => (
            AgentTerm::with_payload(sig.atom, Payload::Term(Term::var(x)), vec![]),
            BTreeMap::new(),
        ),
        Marked::Var(x) => {
            let wire = config.fresh();
            let occurrence = AgentTerm::indexed(sig.croissant, level, vec![wire.into()]);
            (wire.into(), BTreeMap::from([(x.clone(), occurrence)]))
        }
        Marked::Abs(x, body) => {
            let (body, mut open) = encode_shared(body, level, sig, config, equations);
            let variable = open
                .remove(x)
                .unwrap_or_else(|| AgentTerm::agent(sig.eps, vec![]));
            (
                AgentTerm::indexed(sig.lam, level, vec![variable, body]),
                open,
            )
        }
        Marked::App(fun, arg) => {
            let (fun, mut open) = encode_shared(fun, level, sig, config, equations);
            let (arg, arg_open) = encode_shared(arg, level + 1, sig, config, equations);
            for (x, inner) in arg_open {
                let boxed = AgentTerm::indexed(sig.bracket, level, vec![inner]);
                let joined = match open.remove(&x) {
                    Some(left) => AgentTerm::indexed(sig.fan, level, vec![boxed, left]),
                    None => boxed,
                };
                open.insert(x, joined);
            }
            let root = config.fresh();
            equations.push(Equation::new(
                fun,
                AgentTerm::indexed(sig.app, level, vec![arg, root.into()]),
            ));
            (root.into(), open)
        }
    }
}

fn encode_at(
    term: &Marked,
    level: i32,
    sig: &CoreSignature,
    config: &mut Configuration,
    scope: &mut Vec<Binder>,
    equations: &mut Vec<Equation>,
) -> AgentTerm {
    match term {
        Marked::Atom(x) => AgentTerm::with_payload(sig.atom, Payload::Term(Term::var(x)), vec![]),
        Marked::Var(x) => match scope.iter_mut().rev().find(|b| b.name == *x) {
            None => panic!("unmarked free variable {x}"),
            Some(binder) => {
                let wire = config.fresh();
                let mut chain = AgentTerm::indexed(sig.croissant, level, vec![wire.into()]);
                for box_level in (binder.level..level).rev() {
                    chain = AgentTerm::indexed(sig.bracket, box_level, vec![chain]);
                }
                binder.occurrences.push(chain);
                wire.into()
            }
        },
        Marked::Abs(x, body) => {
            scope.push(Binder {
                name: x.clone(),
                level,
                occurrences: Vec::new(),
            });
            let body = encode_at(body, level, sig, config, scope, equations);
            let binder = scope.pop().expect("pushed above");
            let variable = fan_tree(binder.occurrences, level, sig);
            AgentTerm::indexed(sig.lam, level, vec![variable, body])
        }
        Marked::App(fun, arg) => {
            let fun = encode_at(fun, level, sig, config, scope, equations);
            let arg = encode_at(arg, level + 1, sig, config, scope, equations);
            let root = config.fresh();
            equations.push(Equation::new(
                fun,
                AgentTerm::indexed(sig.app, level, vec![arg, root.into()]),
            ));
            root.into()
        }
    }
}

fn fan_tree(mut leaves: Vec<AgentTerm>, level: i32, sig: &CoreSignature) -> AgentTerm {
    match leaves.len() {
        0 => AgentTerm::agent(sig.eps, vec![]),
        1 => leaves.pop().expect("one leaf"),
        n => {
            let right = leaves.split_off(n / 2);
            AgentTerm::indexed(
                sig.fan,
                level,
                vec![fan_tree(leaves, level, sig), fan_tree(right, level, sig)],
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::harness::{parse_corpus, DEFAULT_CORPUS};
    use crate::inet::{Name, Net, Status, Strategy};
    use crate::lambda::{parse, Term};
    use crate::readback::mark_free;
    use crate::system::System;

    fn encoded(sys: &System, term: &str, sharing: Sharing) -> Configuration {
        let mut c = Configuration::new();
        let x = c.fresh();
        c.interface.push(x.into());
        let e = encode(
            &mark_free(&parse(term).unwrap()),
            0,
            sharing,
            &sys.core,
            &mut c,
        );
        c.equations.push(Equation::new(x, e.root));
        c.equations.extend(e.equations);
        c
    }

    #[test]
    fn encoder_examples() {
        let sys = System::standard();
        let dump = |t| encoded(&sys, t, Sharing::Application).dump(&sys.registry);
        assert_eq!(dump("y"), "<x0 | x0 = Atom{y}>");
        assert_eq!(dump("\\x.x"), "<x0 | x0 = Lam_0(Croissant_0(x1), x1)>");
        assert_eq!(dump("\\x.z"), "<x0 | x0 = Lam_0(Eps, Atom{z})>");
        assert_eq!(dump("\\x.x").matches("Lam_0").count(), 1);
    }

    #[test]
    fn application_argument_is_one_level_deeper() {
        let sys = System::standard();
        let dump = encoded(&sys, "(\\x.x) (\\y.y)", Sharing::Application).dump(&sys.registry);
        assert!(dump.contains("App_0(Lam_1("), "{dump}");
    }

    #[test]
    fn encodings_are_linear_and_deterministic() {
        let sys = System::standard();
        for term in parse_corpus(DEFAULT_CORPUS).unwrap() {
            for sharing in [Sharing::Application, Sharing::Binder] {
                let text = term.to_string();
                let c = encoded(&sys, &text, sharing);
                assert!(c.check_linearity(&sys.registry).is_empty(), "{text}");
                assert_eq!(c, encoded(&sys, &text, sharing));
            }
        }
    }

    #[test]
    fn control_effects() {
        let sys = System::standard();
        let c = sys.core;
        assert_eq!(c.control_effect(c.fan), Some(0));
        assert_eq!(c.control_effect(c.bracket), Some(1));
        assert_eq!(c.control_effect(c.croissant), Some(-1));
        assert_eq!(c.control_effect(c.lam), None);
    }

    fn reduce(sys: &System, c: &Configuration) -> Net {
        let mut net = Net::load(Arc::clone(&sys.registry), c).unwrap();
        net.set_debug(true);
        assert_eq!(
            net.run(Strategy::Fifo, 10_000, &mut |_| {}).unwrap(),
            Status::Done
        );
        net
    }

    fn pair_with_iface(sys: &System, n: usize, build: impl Fn(&[Name]) -> Equation) -> String {
        let mut c = Configuration::new();
        let names: Vec<Name> = (0..n).map(|_| c.fresh()).collect();
        c.interface
            .extend(names.iter().map(|&x| AgentTerm::Name(x)));
        c.equations.push(build(&names));
        reduce(sys, &c).to_config().dump(&sys.registry)
    }

    #[test]
    fn fans_annihilate_and_commute() {
        let sys = System::standard();
        let fan =
            |i, a: Name, b: Name| AgentTerm::indexed(sys.core.fan, i, vec![a.into(), b.into()]);
        let same = pair_with_iface(&sys, 4, |n| {
            Equation::new(fan(2, n[0], n[1]), fan(2, n[2], n[3]))
        });
        assert_eq!(same, "<x0, x1, x0, x1 | >");
        let different = pair_with_iface(&sys, 4, |n| {
            Equation::new(fan(1, n[0], n[1]), fan(2, n[2], n[3]))
        });
        assert_eq!(different.matches("Fan_1").count(), 2);
        assert_eq!(different.matches("Fan_2").count(), 2);
    }

    #[test]
    fn controls_annihilate_to_a_wire() {
        let sys = System::standard();
        for kind in [sys.core.bracket, sys.core.croissant] {
            let dump = pair_with_iface(&sys, 2, |n| {
                Equation::new(
                    AgentTerm::indexed(kind, 3, vec![n[0].into()]),
                    AgentTerm::indexed(kind, 3, vec![n[1].into()]),
                )
            });
            assert_eq!(dump, "<x0, x0 | >");
        }
    }

    #[test]
    fn controls_shift_higher_indices() {
        let sys = System::standard();
        let cross = |kind| {
            pair_with_iface(&sys, 3, |n| {
                Equation::new(
                    AgentTerm::indexed(kind, 0, vec![n[0].into()]),
                    AgentTerm::indexed(sys.core.lam, 2, vec![n[1].into(), n[2].into()]),
                )
            })
        };
        assert!(cross(sys.core.bracket).contains("Lam_3"));
        assert!(cross(sys.core.croissant).contains("Lam_1"));
        let fan_dump = pair_with_iface(&sys, 4, |n| {
            Equation::new(
                AgentTerm::indexed(sys.core.fan, 1, vec![n[0].into(), n[1].into()]),
                AgentTerm::indexed(sys.core.lam, 3, vec![n[2].into(), n[3].into()]),
            )
        });
        assert_eq!(fan_dump.matches("Lam_3").count(), 2, "{fan_dump}");
    }

    #[test]
    fn eps_erases_generically() {
        let sys = System::standard();
        let dump = pair_with_iface(&sys, 2, |n| {
            Equation::new(
                AgentTerm::agent(sys.core.eps, vec![]),
                AgentTerm::agent(sys.wait.wait, vec![n[0].into(), n[1].into()]),
            )
        });
        assert_eq!(dump, "<Eps, Eps | >");
    }

    #[test]
    fn eps_erases_whole_normal_encodings() {
        let sys = System::standard();
        for term in parse_corpus(DEFAULT_CORPUS)
            .unwrap()
            .into_iter()
            .filter(Term::is_normal)
        {
            let mut c = Configuration::new();
            let e = encode(
                &mark_free(&term),
                0,
                Sharing::Application,
                &sys.core,
                &mut c,
            );
            c.equations.push(Equation::new(
                AgentTerm::agent(sys.core.eps, vec![]),
                e.root,
            ));
            c.equations.extend(e.equations);
            assert_eq!(reduce(&sys, &c).live_agents(), 0, "{term}");
        }
    }
}
