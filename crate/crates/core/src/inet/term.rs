use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::lambda::{Context, Term};

use super::registry::{KindId, PayloadSort, Registry};

/// A wire name. Rendered as `x<n>`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Name(pub u32);

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub enum Payload {
    #[default]
    None,
    Term(Term),
    Context(Context),
}

impl Payload {
    pub fn sort(&self) -> PayloadSort {
        match self {
            Payload::None => PayloadSort::None,
            Payload::Term(_) => PayloadSort::Term,
            Payload::Context(_) => PayloadSort::Context,
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            Payload::Term(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_context(&self) -> Option<&Context> {
        match self {
            Payload::Context(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Agent {
    pub kind: KindId,
    pub index: Option<i32>,
    pub payload: Payload,
    pub aux: Vec<AgentTerm>,
}

/// A tree whose inner nodes are agents and whose leaves are names.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AgentTerm {
    Name(Name),
    Agent(Agent),
}

impl AgentTerm {
    pub fn agent(kind: KindId, aux: Vec<AgentTerm>) -> AgentTerm {
        AgentTerm::Agent(Agent {
            kind,
            index: None,
            payload: Payload::None,
            aux,
        })
    }

    pub fn indexed(kind: KindId, index: i32, aux: Vec<AgentTerm>) -> AgentTerm {
        AgentTerm::Agent(Agent {
            kind,
            index: Some(index),
            payload: Payload::None,
            aux,
        })
    }

    pub fn with_payload(kind: KindId, payload: Payload, aux: Vec<AgentTerm>) -> AgentTerm {
        AgentTerm::Agent(Agent {
            kind,
            index: None,
            payload,
            aux,
        })
    }

    pub fn as_agent(&self) -> Option<&Agent> {
        match self {
            AgentTerm::Agent(a) => Some(a),
            AgentTerm::Name(_) => None,
        }
    }

    pub fn as_name(&self) -> Option<Name> {
        match self {
            AgentTerm::Name(n) => Some(*n),
            AgentTerm::Agent(_) => None,
        }
    }

    /// Calls `f` on every name leaf, left to right.
    pub fn for_each_name(&self, f: &mut impl FnMut(Name)) {
        match self {
            AgentTerm::Name(n) => f(*n),
            AgentTerm::Agent(a) => a.aux.iter().for_each(|t| t.for_each_name(f)),
        }
    }

    /// Calls `f` on every agent in the tree, parents before children.
    pub fn for_each_agent(&self, f: &mut impl FnMut(&Agent)) {
        if let AgentTerm::Agent(a) = self {
            f(a);
            a.aux.iter().for_each(|t| t.for_each_agent(f));
        }
    }
}

impl From<Name> for AgentTerm {
    fn from(name: Name) -> AgentTerm {
        AgentTerm::Name(name)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Equation {
    pub left: AgentTerm,
    pub right: AgentTerm,
}

impl Equation {
    pub fn new(left: impl Into<AgentTerm>, right: impl Into<AgentTerm>) -> Equation {
        Equation {
            left: left.into(),
            right: right.into(),
        }
    }
}

/// Interaction-calculus configuration `<interface | equations>`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Configuration {
    pub interface: Vec<AgentTerm>,
    pub equations: Vec<Equation>,
    /// Every name in use is below this value.
    pub name_supply: u32,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Violation {
    /// A name occurring some number of times other than two.
    NameCount {
        name: Name,
        occurrences: usize,
    },
    ArityMismatch {
        kind: String,
        expected: usize,
        found: usize,
    },
    IndexMismatch {
        kind: String,
    },
    PayloadMismatch {
        kind: String,
    },
    /// `name_supply` does not exceed a name in use.
    StaleSupply {
        name: Name,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NameCount { name, occurrences } => {
                write!(f, "name {name} occurs {occurrences} times")
            }
            Violation::ArityMismatch {
                kind,
                expected,
                found,
            } => write!(
                f,
                "{kind} expects {expected} auxiliary terms, found {found}"
            ),
            Violation::IndexMismatch { kind } => write!(f, "{kind} index presence is wrong"),
            Violation::PayloadMismatch { kind } => write!(f, "{kind} payload sort is wrong"),
            Violation::StaleSupply { name } => write!(f, "name supply does not exceed {name}"),
        }
    }
}

impl Configuration {
    pub fn new() -> Configuration {
        Configuration::default()
    }

    pub fn fresh(&mut self) -> Name {
        let name = Name(self.name_supply);
        self.name_supply += 1;
        name
    }

    pub fn terms(&self) -> impl Iterator<Item = &AgentTerm> {
        self.interface
            .iter()
            .chain(self.equations.iter().flat_map(|e| [&e.left, &e.right]))
    }

    pub fn agent_count(&self) -> usize {
        let mut count = 0;
        for t in self.terms() {
            t.for_each_agent(&mut |_| count += 1);
        }
        count
    }

    /// Every violation of name linearity and agent well-formedness.
    pub fn check_linearity(&self, registry: &Registry) -> Vec<Violation> {
        let mut counts: BTreeMap<Name, usize> = BTreeMap::new();
        let mut violations = Vec::new();
        for term in self.terms() {
            term.for_each_name(&mut |n| *counts.entry(n).or_default() += 1);
            term.for_each_agent(&mut |a| {
                let kind = registry.kind(a.kind);
                if kind.arity != a.aux.len() {
                    violations.push(Violation::ArityMismatch {
                        kind: kind.name.clone(),
                        expected: kind.arity,
                        found: a.aux.len(),
                    });
                }
                if kind.indexed != a.index.is_some() {
                    violations.push(Violation::IndexMismatch {
                        kind: kind.name.clone(),
                    });
                }
                if kind.payload != a.payload.sort() {
                    violations.push(Violation::PayloadMismatch {
                        kind: kind.name.clone(),
                    });
                }
            });
        }
        for (&name, &occurrences) in &counts {
            if occurrences != 2 {
                violations.push(Violation::NameCount { name, occurrences });
            }
            if name.0 >= self.name_supply {
                violations.push(Violation::StaleSupply { name });
            }
        }
        violations
    }

    /// Indices of equations that are active pairs: both sides agents, or an
    /// agent facing a name whose other occurrence is an Amb's second
    /// principal slot.
    pub fn find_active_pairs(&self, registry: &Registry) -> Vec<usize> {
        let mut amb_slots = Vec::new();
        for term in self.terms() {
            term.for_each_agent(&mut |a| {
                if registry.kind(a.kind).extra_principal {
                    if let Some(AgentTerm::Name(n)) = a.aux.first() {
                        amb_slots.push(*n);
                    }
                }
            });
        }
        self.equations
            .iter()
            .enumerate()
            .filter(|(_, eq)| match (&eq.left, &eq.right) {
                (AgentTerm::Agent(_), AgentTerm::Agent(_)) => true,
                (AgentTerm::Name(n), AgentTerm::Agent(_))
                | (AgentTerm::Agent(_), AgentTerm::Name(n)) => amb_slots.contains(n),
                _ => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Deterministic text `<iface, ... | left = right, ...>`.
    pub fn dump(&self, registry: &Registry) -> String {
        let mut out = String::from("<");
        for (i, t) in self.interface.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_term(&mut out, t, registry);
        }
        out.push_str(" | ");
        for (i, eq) in self.equations.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_term(&mut out, &eq.left, registry);
            out.push_str(" = ");
            write_term(&mut out, &eq.right, registry);
        }
        out.push('>');
        out
    }
}

pub fn render_term(term: &AgentTerm, registry: &Registry) -> String {
    let mut out = String::new();
    write_term(&mut out, term, registry);
    out
}

fn write_term(out: &mut String, term: &AgentTerm, registry: &Registry) {
    match term {
        AgentTerm::Name(n) => {
            let _ = write!(out, "{n}");
        }
        AgentTerm::Agent(a) => {
            out.push_str(&registry.kind(a.kind).name);
            if let Some(i) = a.index {
                let _ = write!(out, "_{i}");
            }
            match &a.payload {
                Payload::None => {}
                Payload::Term(t) => {
                    let _ = write!(out, "{{{t}}}");
                }
                Payload::Context(c) => {
                    let _ = write!(out, "{{{c}}}");
                }
            }
            if !a.aux.is_empty() {
                out.push('(');
                for (i, t) in a.aux.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_term(out, t, registry);
                }
                out.push(')');
            }
        }
    }
}
