use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::term::{AgentTerm, Name, Payload};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct KindId(pub(crate) u16);

impl KindId {
    pub fn as_usize(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PayloadSort {
    None,
    Term,
    Context,
}

/// Static description of an agent kind.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KindDescriptor {
    pub name: String,
    pub arity: usize,
    pub indexed: bool,
    pub payload: PayloadSort,
    /// The first auxiliary slot is a second principal port (Amb only).
    pub extra_principal: bool,
}

impl KindDescriptor {
    pub fn new(name: &str, arity: usize) -> KindDescriptor {
        KindDescriptor {
            name: name.to_string(),
            arity,
            indexed: false,
            payload: PayloadSort::None,
            extra_principal: false,
        }
    }

    pub fn indexed(mut self) -> KindDescriptor {
        self.indexed = true;
        self
    }

    pub fn with_payload(mut self, sort: PayloadSort) -> KindDescriptor {
        self.payload = sort;
        self
    }

    pub fn with_extra_principal(mut self) -> KindDescriptor {
        self.extra_principal = true;
        self
    }
}

/// How the left agent's index compares with the right agent's. Agents
/// without an index compare as `Equal`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    Less,
    Equal,
    Greater,
}

impl Relation {
    pub fn of(left: Option<i32>, right: Option<i32>) -> Relation {
        match (left, right) {
            (Some(a), Some(b)) if a < b => Relation::Less,
            (Some(a), Some(b)) if a > b => Relation::Greater,
            _ => Relation::Equal,
        }
    }
}

/// The set of index relations under which a rule fires.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Guard {
    less: bool,
    equal: bool,
    greater: bool,
}

impl Guard {
    pub const ALWAYS: Guard = Guard {
        less: true,
        equal: true,
        greater: true,
    };
    pub const EQUAL: Guard = Guard {
        less: false,
        equal: true,
        greater: false,
    };
    pub const DIFFERENT: Guard = Guard {
        less: true,
        equal: false,
        greater: true,
    };
    pub const LESS: Guard = Guard {
        less: true,
        equal: false,
        greater: false,
    };
    pub const GREATER: Guard = Guard {
        less: false,
        equal: false,
        greater: true,
    };

    pub fn admits(self, relation: Relation) -> bool {
        match relation {
            Relation::Less => self.less,
            Relation::Equal => self.equal,
            Relation::Greater => self.greater,
        }
    }

    fn mirror(self) -> Guard {
        Guard {
            less: self.greater,
            equal: self.equal,
            greater: self.less,
        }
    }

    fn union(self, other: Guard) -> Guard {
        Guard {
            less: self.less || other.less,
            equal: self.equal || other.equal,
            greater: self.greater || other.greater,
        }
    }

    fn overlaps(self, other: Guard) -> bool {
        (self.less && other.less) || (self.equal && other.equal) || (self.greater && other.greater)
    }
}

/// The head of an agent taking part in an interaction: everything except its
/// auxiliary wiring.
#[derive(Clone, Debug)]
pub struct Head {
    pub kind: KindId,
    pub index: Option<i32>,
    pub payload: Payload,
}

/// Source of fresh wire names and fresh read-back binder names.
pub struct Fresh<'a> {
    pub(crate) next_name: &'a mut u32,
    pub(crate) next_binder: &'a mut u32,
    pub(crate) reserved: &'a [String],
}

impl Fresh<'_> {
    pub fn name(&mut self) -> Name {
        let name = Name(*self.next_name);
        *self.next_name += 1;
        name
    }

    /// `v0`, `v1`, ... skipping anything in the reserved list.
    pub fn binder(&mut self) -> String {
        loop {
            let candidate = format!("v{}", *self.next_binder);
            *self.next_binder += 1;
            if !self.reserved.contains(&candidate) {
                return candidate;
            }
        }
    }
}

/// What a rule puts in place of the two interacting agents: one term per
/// auxiliary port of each, in port order.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub left: Vec<AgentTerm>,
    pub right: Vec<AgentTerm>,
}

pub type Builder = Arc<dyn Fn(&Head, &Head, &mut Fresh<'_>) -> Bindings + Send + Sync>;

#[derive(Clone)]
pub struct Rule {
    pub left: KindId,
    pub right: KindId,
    pub guard: Guard,
    /// Counted as a beta interaction in statistics.
    pub beta: bool,
    pub builder: Builder,
}

impl Rule {
    pub fn new(
        left: KindId,
        right: KindId,
        guard: Guard,
        builder: impl Fn(&Head, &Head, &mut Fresh<'_>) -> Bindings + Send + Sync + 'static,
    ) -> Rule {
        Rule {
            left,
            right,
            guard,
            beta: false,
            builder: Arc::new(builder),
        }
    }

    pub fn counting_beta(mut self) -> Rule {
        self.beta = true;
        self
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule")
            .field("left", &self.left)
            .field("right", &self.right)
            .field("guard", &self.guard)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("agent kind {0} is already registered")]
    DuplicateKind(String),
    #[error("agent kind {0} declares an extra principal port but has no auxiliary slot")]
    ExtraPrincipalWithoutSlot(String),
    #[error("rule {0}~{1} overlaps an existing rule for the same pair")]
    OverlappingRule(String, String),
    #[error("unknown agent kind {0}")]
    UnknownKind(String),
}

/// A rule matched against a concrete pair, with the operands possibly swapped
/// into the rule's orientation.
#[derive(Clone, Copy, Debug)]
pub struct Match {
    pub rule: usize,
    pub swapped: bool,
}

/// Agent kinds and interaction rules. Immutable once a net starts running.
#[derive(Clone, Default, Debug)]
pub struct Registry {
    kinds: Vec<KindDescriptor>,
    by_name: HashMap<String, KindId>,
    rules: Vec<Option<Rule>>,
    labels: Vec<String>,
    by_pair: HashMap<(KindId, KindId), Vec<usize>>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn register_kind(&mut self, descriptor: KindDescriptor) -> Result<KindId, RegistryError> {
        if self.by_name.contains_key(&descriptor.name) {
            return Err(RegistryError::DuplicateKind(descriptor.name));
        }
        if descriptor.extra_principal && descriptor.arity == 0 {
            return Err(RegistryError::ExtraPrincipalWithoutSlot(descriptor.name));
        }
        let id = KindId(self.kinds.len() as u16);
        self.by_name.insert(descriptor.name.clone(), id);
        self.kinds.push(descriptor);
        Ok(id)
    }

    pub fn kind(&self, id: KindId) -> &KindDescriptor {
        &self.kinds[id.as_usize()]
    }

    pub fn kind_named(&self, name: &str) -> Result<KindId, RegistryError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| RegistryError::UnknownKind(name.to_string()))
    }

    pub fn kinds(&self) -> impl Iterator<Item = (KindId, &KindDescriptor)> {
        self.kinds
            .iter()
            .enumerate()
            .map(|(i, k)| (KindId(i as u16), k))
    }

    pub fn kind_count(&self) -> usize {
        self.kinds.len()
    }

    /// Guards registered for one unordered pair must be mutually exclusive.
    pub fn register_rule(&mut self, rule: Rule) -> Result<(), RegistryError> {
        let effective = |r: &Rule| {
            if r.left == r.right {
                r.guard.union(r.guard.mirror())
            } else {
                r.guard
            }
        };
        for &existing in self
            .by_pair
            .get(&(rule.left, rule.right))
            .into_iter()
            .flatten()
        {
            let other = self.rules[existing].as_ref().expect("indexed rule is live");
            let other_guard = if other.left == rule.left {
                effective(other)
            } else {
                effective(other).mirror()
            };
            if other_guard.overlaps(effective(&rule)) {
                return Err(RegistryError::OverlappingRule(
                    self.kind(rule.left).name.clone(),
                    self.kind(rule.right).name.clone(),
                ));
            }
        }
        let id = self.rules.len();
        let label = format!(
            "{}~{}",
            self.kind(rule.left).name,
            self.kind(rule.right).name
        );
        self.by_pair
            .entry((rule.left, rule.right))
            .or_default()
            .push(id);
        if rule.left != rule.right {
            self.by_pair
                .entry((rule.right, rule.left))
                .or_default()
                .push(id);
        }
        self.rules.push(Some(rule));
        self.labels.push(label);
        Ok(())
    }

    /// Drops every rule for the unordered pair; returns how many were removed.
    pub fn remove_rules(&mut self, a: KindId, b: KindId) -> usize {
        let ids = self.by_pair.remove(&(a, b)).unwrap_or_default();
        self.by_pair.remove(&(b, a));
        for &id in &ids {
            self.rules[id] = None;
        }
        ids.len()
    }

    pub fn has_rule(&self, a: KindId, b: KindId) -> bool {
        self.by_pair.get(&(a, b)).is_some_and(|ids| !ids.is_empty())
    }

    pub fn rule(&self, id: usize) -> &Rule {
        self.rules[id].as_ref().expect("rule was removed")
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Finds the rule whose guard admits the pair `(a, ia) ~ (b, ib)`.
    pub fn find(&self, a: KindId, ia: Option<i32>, b: KindId, ib: Option<i32>) -> Option<Match> {
        let ids = self.by_pair.get(&(a, b))?;
        for &id in ids {
            let rule = self.rules[id].as_ref()?;
            if rule.left == a && rule.right == b && rule.guard.admits(Relation::of(ia, ib)) {
                return Some(Match {
                    rule: id,
                    swapped: false,
                });
            }
            if rule.left == b && rule.right == a && rule.guard.admits(Relation::of(ib, ia)) {
                return Some(Match {
                    rule: id,
                    swapped: true,
                });
            }
        }
        None
    }
}
