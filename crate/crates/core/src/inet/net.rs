use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::mem;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::registry::{Fresh, Head, KindId, Registry};
use super::term::{AgentTerm, Configuration, Equation, Name, Payload, Violation};

/// One end of a wire.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub(crate) enum Link {
    /// Slot 0 is the principal port, slot k > 0 the k-th auxiliary port.
    Port(u32, u8),
    /// A position in the interface.
    Iface(u32),
    Nil,
}

struct Node {
    kind: KindId,
    index: i32,
    payload: Payload,
    ports: [Link; 4],
    generation: u32,
    alive: bool,
}

#[derive(Clone, Copy, Debug)]
struct Pair {
    a: u32,
    a_gen: u32,
    a_slot: u8,
    b: u32,
    b_gen: u32,
    b_slot: u8,
}

/// Selection order over the currently active pairs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Strategy {
    /// Oldest active pair first.
    Fifo,
    /// Newest active pair first.
    Lifo,
    /// Uniformly random among active pairs, reproducible from the seed.
    Random(u64),
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Fifo => f.write_str("fifo"),
            Strategy::Lifo => f.write_str("lifo"),
            Strategy::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        match s {
            "fifo" => Ok(Strategy::Fifo),
            "lifo" => Ok(Strategy::Lifo),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(Strategy::Random)
                .ok_or_else(|| format!("unknown strategy `{s}`")),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Status {
    /// No active pair remains.
    Done,
    FuelExhausted,
    /// An active pair without a matching rule.
    Stuck {
        left: String,
        right: String,
    },
}

/// One interaction, as reported to trace observers.
#[derive(Clone, Debug, Serialize)]
pub struct StepEvent<'a> {
    pub step: u64,
    pub rule: &'a str,
    #[serde(rename = "li")]
    pub left_index: Option<i32>,
    #[serde(rename = "ri")]
    pub right_index: Option<i32>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize)]
pub struct Stats {
    pub total: u64,
    pub beta: u64,
    #[serde(rename = "perRule")]
    pub per_rule: BTreeMap<String, u64>,
    /// Agents created by interactions (not counting the initial net).
    #[serde(skip)]
    pub created: u64,
    /// Agents consumed by interactions.
    #[serde(skip)]
    pub consumed: u64,
}

impl Stats {
    pub fn count(&self, rule: &str) -> u64 {
        self.per_rule.get(rule).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("configuration is not well formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Malformed(Vec<Violation>),
    #[error("rule {rule} produced ill-formed bindings: {detail}")]
    IllFormedRule { rule: String, detail: String },
    #[error("invariant broken after step {step}: {detail}")]
    InvariantBroken { step: u64, detail: String },
}

enum Occ {
    Port(Link),
    Dying(usize),
}

#[derive(Clone, Copy)]
enum Attach {
    Unset,
    Real(Link),
    Dying(usize),
}

struct DyingPort {
    port: Link,
    nbr: Link,
    nbr_dying: Option<usize>,
    attach: Attach,
}

/// A running interaction net.
///
/// The net is a port graph; [`Configuration`] is its textual form. Name-only
/// equations never exist at run time: wires are joined directly, which is the
/// same as eliminating indirections eagerly after every interaction.
pub struct Net {
    registry: Arc<Registry>,
    arity: Vec<u8>,
    extra_principal: Vec<bool>,
    indexed: Vec<bool>,
    nodes: Vec<Node>,
    free: Vec<u32>,
    iface: Vec<Link>,
    pending: VecDeque<Pair>,
    next_name: u32,
    next_binder: u32,
    reserved: Vec<String>,
    rule_counts: Vec<u64>,
    amb_counts: Vec<u64>,
    total: u64,
    beta: u64,
    created: u64,
    consumed: u64,
    live: usize,
    initial: u64,
    debug: bool,
    validator: Option<Validator>,
    scratch_occs: Vec<(u32, Occ)>,
}

/// An extra debug check over the configuration; returns the problems found.
pub type Validator = Arc<dyn Fn(&Configuration) -> Vec<String> + Send + Sync>;

impl Net {
    fn empty(registry: Arc<Registry>, iface_len: usize) -> Net {
        let arity = registry.kinds().map(|(_, k)| k.arity as u8).collect();
        let extra_principal = registry.kinds().map(|(_, k)| k.extra_principal).collect();
        let indexed = registry.kinds().map(|(_, k)| k.indexed).collect();
        let kinds = registry.kind_count();
        let rules = registry.rule_count();
        Net {
            registry,
            arity,
            extra_principal,
            indexed,
            nodes: Vec::new(),
            free: Vec::new(),
            iface: vec![Link::Nil; iface_len],
            pending: VecDeque::new(),
            next_name: 0,
            next_binder: 0,
            reserved: Vec::new(),
            rule_counts: vec![0; rules],
            amb_counts: vec![0; kinds],
            total: 0,
            beta: 0,
            created: 0,
            consumed: 0,
            live: 0,
            initial: 0,
            debug: false,
            validator: None,
            scratch_occs: Vec::new(),
        }
    }

    /// Builds the port graph of a well-formed configuration.
    pub fn load(registry: Arc<Registry>, config: &Configuration) -> Result<Net, EngineError> {
        let violations = config.check_linearity(&registry);
        if !violations.is_empty() {
            return Err(EngineError::Malformed(violations));
        }
        let mut net = Net::empty(registry, config.interface.len());
        net.next_name = config.name_supply;

        enum LoadOcc {
            Port(Link),
            Side(usize, usize),
        }
        let mut occs: HashMap<u32, Vec<LoadOcc>> = HashMap::new();
        let mut tree_occs = Vec::new();
        let mut side_roots: Vec<[Option<u32>; 2]> = Vec::with_capacity(config.equations.len());

        for (i, term) in config.interface.iter().enumerate() {
            match term {
                AgentTerm::Name(n) => occs
                    .entry(n.0)
                    .or_default()
                    .push(LoadOcc::Port(Link::Iface(i as u32))),
                AgentTerm::Agent(_) => {
                    let id = net.instantiate(term.clone(), &mut tree_occs);
                    net.link(Link::Iface(i as u32), Link::Port(id, 0));
                }
            }
        }
        for (e, eq) in config.equations.iter().enumerate() {
            let mut roots = [None, None];
            for (side, term) in [&eq.left, &eq.right].into_iter().enumerate() {
                match term {
                    AgentTerm::Name(n) => occs.entry(n.0).or_default().push(LoadOcc::Side(e, side)),
                    AgentTerm::Agent(_) => {
                        roots[side] = Some(net.instantiate(term.clone(), &mut tree_occs));
                    }
                }
            }
            if let [Some(a), Some(b)] = roots {
                net.link(Link::Port(a, 0), Link::Port(b, 0));
            }
            side_roots.push(roots);
        }
        for (name, occ) in tree_occs.drain(..) {
            if let Occ::Port(link) = occ {
                occs.entry(name).or_default().push(LoadOcc::Port(link));
            }
        }

        let name_at_side = |e: usize, side: usize| -> Option<Name> {
            let eq = &config.equations[e];
            if side == 0 { &eq.left } else { &eq.right }.as_name()
        };
        let other =
            |occs: &HashMap<u32, Vec<LoadOcc>>, name: u32, at_side: Option<(usize, usize)>| {
                let list = &occs[&name];
                let idx = list
                    .iter()
                    .position(|o| match (o, at_side) {
                        (LoadOcc::Side(e, s), Some(at)) => (*e, *s) == at,
                        _ => false,
                    })
                    .map(|i| 1 - i)
                    .unwrap_or(1);
                idx
            };

        let mut done: Vec<u32> = Vec::new();
        let mut names: Vec<u32> = occs.keys().copied().collect();
        names.sort_unstable();
        for name in names {
            if done.contains(&name) {
                continue;
            }
            let list = &occs[&name];
            let start = match list.iter().position(|o| matches!(o, LoadOcc::Port(_))) {
                Some(i) => i,
                None => continue,
            };
            let LoadOcc::Port(from) = list[start] else {
                unreachable!()
            };
            done.push(name);
            // Follow the wire through name-only equation sides.
            let mut cur_name = name;
            let mut cur = &occs[&cur_name][1 - start];
            let target = loop {
                match cur {
                    LoadOcc::Port(link) => break Some(*link),
                    LoadOcc::Side(e, s) => {
                        let opposite = 1 - *s;
                        if let Some(root) = side_roots[*e][opposite] {
                            break Some(Link::Port(root, 0));
                        }
                        let next =
                            name_at_side(*e, opposite).expect("side without agent is a name");
                        if next.0 == cur_name && occs[&next.0].len() == 2 {
                            // `x = x` closes a loop on itself.
                            break None;
                        }
                        let idx = other(&occs, next.0, Some((*e, opposite)));
                        cur_name = next.0;
                        done.push(cur_name);
                        cur = &occs[&cur_name][idx];
                    }
                }
            };
            if let Some(target) = target {
                net.link(from, target);
            }
        }
        net.initial = net.live as u64;
        Ok(net)
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    /// Enables per-step linearity, wiring, and interface checks.
    pub fn set_debug(&mut self, debug: bool) {
        self.debug = debug;
    }

    /// Names that fresh read-back binders must avoid.
    /// Runs `validator` wherever the debug checks run.
    pub fn set_validator(&mut self, validator: Validator) {
        self.validator = Some(validator);
    }

    pub fn set_reserved_binders(&mut self, names: Vec<String>) {
        self.reserved = names;
    }

    pub fn live_agents(&self) -> usize {
        self.live
    }

    pub fn interface_len(&self) -> usize {
        self.iface.len()
    }

    pub fn stats(&self) -> Stats {
        let mut per_rule = BTreeMap::new();
        for (id, &count) in self.rule_counts.iter().enumerate() {
            if count > 0 {
                *per_rule
                    .entry(self.registry.label(id).to_string())
                    .or_default() += count;
            }
        }
        for (kind, &count) in self.amb_counts.iter().enumerate() {
            if count > 0 {
                let name = &self.registry.kind(KindId(kind as u16)).name;
                per_rule.insert(format!("Amb~{name}"), count);
            }
        }
        Stats {
            total: self.total,
            beta: self.beta,
            per_rule,
            created: self.created,
            consumed: self.consumed,
        }
    }

    /// Number of currently active pairs (stale worklist entries excluded).
    pub fn active_pair_count(&self) -> usize {
        self.pending.iter().filter(|p| self.valid(p)).count()
    }

    fn alloc(&mut self, kind: KindId, index: i32, payload: Payload) -> u32 {
        self.live += 1;
        if let Some(id) = self.free.pop() {
            let node = &mut self.nodes[id as usize];
            node.kind = kind;
            node.index = index;
            node.payload = payload;
            node.ports = [Link::Nil; 4];
            node.alive = true;
            id
        } else {
            self.nodes.push(Node {
                kind,
                index,
                payload,
                ports: [Link::Nil; 4],
                generation: 0,
                alive: true,
            });
            (self.nodes.len() - 1) as u32
        }
    }

    fn release(&mut self, id: u32) {
        let node = &mut self.nodes[id as usize];
        node.alive = false;
        node.generation = node.generation.wrapping_add(1);
        node.payload = Payload::None;
        node.ports = [Link::Nil; 4];
        self.free.push(id);
        self.live -= 1;
    }

    fn is_principal(&self, link: Link) -> bool {
        match link {
            Link::Port(_, 0) => true,
            Link::Port(n, 1) => self.extra_principal[self.nodes[n as usize].kind.as_usize()],
            _ => false,
        }
    }

    fn get(&self, at: Link) -> Link {
        match at {
            Link::Port(n, s) => self.nodes[n as usize].ports[s as usize],
            Link::Iface(i) => self.iface[i as usize],
            Link::Nil => Link::Nil,
        }
    }

    fn set(&mut self, at: Link, to: Link) {
        match at {
            Link::Port(n, s) => self.nodes[n as usize].ports[s as usize] = to,
            Link::Iface(i) => self.iface[i as usize] = to,
            Link::Nil => {}
        }
    }

    fn link(&mut self, a: Link, b: Link) {
        self.set(a, b);
        self.set(b, a);
        if self.is_principal(a) && self.is_principal(b) {
            let (Link::Port(na, sa), Link::Port(nb, sb)) = (a, b) else {
                unreachable!()
            };
            self.pending.push_back(Pair {
                a: na,
                a_gen: self.nodes[na as usize].generation,
                a_slot: sa,
                b: nb,
                b_gen: self.nodes[nb as usize].generation,
                b_slot: sb,
            });
        }
    }

    fn valid(&self, p: &Pair) -> bool {
        let a = &self.nodes[p.a as usize];
        let b = &self.nodes[p.b as usize];
        a.alive
            && b.alive
            && a.generation == p.a_gen
            && b.generation == p.b_gen
            && a.ports[p.a_slot as usize] == Link::Port(p.b, p.b_slot)
    }

    /// Creates the agents of `term` (which must be agent-headed) and returns
    /// the root. Name leaves are reported through `occs`.
    fn instantiate(&mut self, term: AgentTerm, occs: &mut Vec<(u32, Occ)>) -> u32 {
        let AgentTerm::Agent(agent) = term else {
            unreachable!("instantiate expects an agent")
        };
        let id = self.alloc(agent.kind, agent.index.unwrap_or(0), agent.payload);
        for (k, child) in agent.aux.into_iter().enumerate() {
            let port = Link::Port(id, k as u8 + 1);
            match child {
                AgentTerm::Name(n) => occs.push((n.0, Occ::Port(port))),
                child => {
                    let c = self.instantiate(child, occs);
                    self.link(port, Link::Port(c, 0));
                }
            }
        }
        id
    }

    fn head_index(&self, id: u32) -> Option<i32> {
        let node = &self.nodes[id as usize];
        self.indexed[node.kind.as_usize()].then_some(node.index)
    }

    /// Joins the outer neighbours of the removed agents according to the
    /// attachments chosen by a rule.
    fn resolve(&mut self, dying: &mut [DyingPort]) {
        for i in 0..dying.len() {
            let nbr = dying[i].nbr;
            dying[i].nbr_dying = dying.iter().position(|d| d.port == nbr);
        }
        let mut visited = vec![false; dying.len()];
        for i in 0..dying.len() {
            if visited[i] {
                continue;
            }
            // Start only at chain ends: a side that leaves the dying set.
            let (start_link, leave_via_attach) = if dying[i].nbr_dying.is_none() {
                (dying[i].nbr, true)
            } else if let Attach::Real(l) = dying[i].attach {
                (l, false)
            } else {
                continue;
            };
            visited[i] = true;
            let mut cur = i;
            let mut via_attach = leave_via_attach;
            let end = loop {
                if via_attach {
                    match dying[cur].attach {
                        Attach::Real(l) => break l,
                        Attach::Dying(j) => {
                            cur = j;
                            visited[cur] = true;
                            via_attach = false;
                        }
                        Attach::Unset => unreachable!("unbound auxiliary port"),
                    }
                } else {
                    match dying[cur].nbr_dying {
                        None => break dying[cur].nbr,
                        Some(j) => {
                            cur = j;
                            visited[cur] = true;
                            via_attach = true;
                        }
                    }
                }
            };
            self.link(start_link, end);
        }
    }

    /// Applies the rule for an active pair, or reports the unmatched kinds.
    fn interact(&mut self, pair: Pair) -> Result<Option<(String, String)>, EngineError> {
        let ka = self.nodes[pair.a as usize].kind;
        let kb = self.nodes[pair.b as usize].kind;
        if self.extra_principal[ka.as_usize()] {
            self.amb_activate(pair.a, pair.a_slot, Link::Port(pair.b, pair.b_slot));
            return Ok(None);
        }
        if self.extra_principal[kb.as_usize()] {
            self.amb_activate(pair.b, pair.b_slot, Link::Port(pair.a, pair.a_slot));
            return Ok(None);
        }
        let (ia, ib) = (self.head_index(pair.a), self.head_index(pair.b));
        let Some(m) = self.registry.find(ka, ia, kb, ib) else {
            return Ok(Some((
                self.registry.kind(ka).name.clone(),
                self.registry.kind(kb).name.clone(),
            )));
        };
        let (l, r) = if m.swapped {
            (pair.b, pair.a)
        } else {
            (pair.a, pair.b)
        };
        let head = |net: &mut Net, id: u32| Head {
            kind: net.nodes[id as usize].kind,
            index: net.head_index(id),
            payload: mem::take(&mut net.nodes[id as usize].payload),
        };
        let left = head(self, l);
        let right = head(self, r);
        let registry = Arc::clone(&self.registry);
        let rule = registry.rule(m.rule);
        let bindings = {
            let mut fresh = Fresh {
                next_name: &mut self.next_name,
                next_binder: &mut self.next_binder,
                reserved: &self.reserved,
            };
            (rule.builder)(&left, &right, &mut fresh)
        };
        let (la, ra) = (
            self.arity[left.kind.as_usize()] as usize,
            self.arity[right.kind.as_usize()] as usize,
        );
        if bindings.left.len() != la || bindings.right.len() != ra {
            return Err(EngineError::IllFormedRule {
                rule: registry.label(m.rule).to_string(),
                detail: "binding count differs from arity".into(),
            });
        }

        let mut dying: Vec<DyingPort> = Vec::with_capacity(la + ra);
        for (id, arity) in [(l, la), (r, ra)] {
            for k in 0..arity {
                let port = Link::Port(id, k as u8 + 1);
                dying.push(DyingPort {
                    port,
                    nbr: self.get(port),
                    nbr_dying: None,
                    attach: Attach::Unset,
                });
            }
        }
        let mut occs = mem::take(&mut self.scratch_occs);
        occs.clear();
        let before = self.live;
        for (slot, term) in bindings.left.into_iter().chain(bindings.right).enumerate() {
            match term {
                AgentTerm::Name(n) => occs.push((n.0, Occ::Dying(slot))),
                term => {
                    let id = self.instantiate(term, &mut occs);
                    dying[slot].attach = Attach::Real(Link::Port(id, 0));
                }
            }
        }
        self.created += (self.live - before) as u64;
        occs.sort_by_key(|(n, _)| *n);
        let mut i = 0;
        while i < occs.len() {
            if i + 1 >= occs.len()
                || occs[i + 1].0 != occs[i].0
                || (i + 2 < occs.len() && occs[i + 2].0 == occs[i].0)
            {
                return Err(EngineError::IllFormedRule {
                    rule: registry.label(m.rule).to_string(),
                    detail: format!("name {} does not occur exactly twice", Name(occs[i].0)),
                });
            }
            match (&occs[i].1, &occs[i + 1].1) {
                (Occ::Port(p), Occ::Port(q)) => self.link(*p, *q),
                (Occ::Port(p), Occ::Dying(d)) | (Occ::Dying(d), Occ::Port(p)) => {
                    dying[*d].attach = Attach::Real(*p)
                }
                (Occ::Dying(d), Occ::Dying(e)) => {
                    dying[*d].attach = Attach::Dying(*e);
                    dying[*e].attach = Attach::Dying(*d);
                }
            }
            i += 2;
        }
        self.scratch_occs = occs;
        self.resolve(&mut dying);
        self.release(l);
        self.release(r);
        self.consumed += 2;
        self.rule_counts[m.rule] += 1;
        if rule.beta {
            self.beta += 1;
        }
        self.total += 1;
        Ok(None)
    }

    /// Fires an Amb whose principal slot `slot` faces `arriving`: the arriving
    /// agent moves to the first auxiliary, and the other principal wire is
    /// joined to the second auxiliary.
    fn amb_activate(&mut self, amb: u32, slot: u8, arriving: Link) {
        let other = 1 - slot;
        let mut dying: Vec<DyingPort> = [other, 2, 3]
            .into_iter()
            .map(|s| {
                let port = Link::Port(amb, s);
                DyingPort {
                    port,
                    nbr: self.get(port),
                    nbr_dying: None,
                    attach: Attach::Unset,
                }
            })
            .collect();
        dying[1].attach = Attach::Real(arriving);
        dying[0].attach = Attach::Dying(2);
        dying[2].attach = Attach::Dying(0);
        // Detach the arriving port first so resolve sees it as free.
        self.set(arriving, Link::Nil);
        self.resolve(&mut dying);
        let arriving_kind = match arriving {
            Link::Port(n, _) => self.nodes[n as usize].kind,
            _ => unreachable!(),
        };
        self.release(amb);
        self.consumed += 1;
        self.amb_counts[arriving_kind.as_usize()] += 1;
        self.total += 1;
    }

    fn take_pair(&mut self, strategy: Strategy, rng: &mut Option<ChaCha8Rng>) -> Option<Pair> {
        loop {
            let pair = match strategy {
                Strategy::Fifo => self.pending.pop_front()?,
                Strategy::Lifo => self.pending.pop_back()?,
                Strategy::Random(_) => {
                    if self.pending.is_empty() {
                        return None;
                    }
                    let rng = rng.as_mut().expect("random strategy has a generator");
                    let i = rng.gen_range(0..self.pending.len());
                    self.pending.swap_remove_back(i)?
                }
            };
            if self.valid(&pair) {
                return Some(pair);
            }
        }
    }

    /// Reduces until no active pair remains, `fuel` interactions have been
    /// performed, or an active pair has no rule.
    pub fn run(
        &mut self,
        strategy: Strategy,
        fuel: u64,
        observer: &mut dyn FnMut(&StepEvent<'_>),
    ) -> Result<Status, EngineError> {
        let mut rng = match strategy {
            Strategy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        let mut steps = 0u64;
        let iface_len = self.iface.len();
        let registry = Arc::clone(&self.registry);
        if self.debug {
            self.check_invariants(0)?;
        }
        loop {
            let Some(pair) = self.take_pair(strategy, &mut rng) else {
                return Ok(Status::Done);
            };
            if steps == fuel {
                self.pending.push_front(pair);
                return Ok(Status::FuelExhausted);
            }
            let (l_index, r_index) = (self.head_index(pair.a), self.head_index(pair.b));
            let (ka, kb) = (
                self.nodes[pair.a as usize].kind,
                self.nodes[pair.b as usize].kind,
            );
            let rule_before = self.registry.find(ka, l_index, kb, r_index);
            if let Some((left, right)) = self.interact(pair)? {
                self.pending.push_front(pair);
                return Ok(Status::Stuck { left, right });
            }
            steps += 1;
            let (label, li, ri) = match rule_before {
                Some(m)
                    if !self.extra_principal[ka.as_usize()]
                        && !self.extra_principal[kb.as_usize()] =>
                {
                    let (li, ri) = if m.swapped {
                        (r_index, l_index)
                    } else {
                        (l_index, r_index)
                    };
                    (Cow::Borrowed(registry.label(m.rule)), li, ri)
                }
                _ => {
                    let other = if self.extra_principal[ka.as_usize()] {
                        kb
                    } else {
                        ka
                    };
                    (
                        Cow::Owned(format!("Amb~{}", registry.kind(other).name)),
                        None,
                        None,
                    )
                }
            };
            observer(&StepEvent {
                step: self.total,
                rule: &label,
                left_index: li,
                right_index: ri,
            });
            if self.debug {
                if self.iface.len() != iface_len {
                    return Err(EngineError::InvariantBroken {
                        step: self.total,
                        detail: "interface size changed".into(),
                    });
                }
                self.check_invariants(self.total)?;
            }
        }
    }

    fn check_invariants(&self, step: u64) -> Result<(), EngineError> {
        let wiring = self.check_wiring();
        if !wiring.is_empty() {
            return Err(EngineError::InvariantBroken {
                step,
                detail: wiring.join("; "),
            });
        }
        let config = self.to_config();
        let violations = config.check_linearity(&self.registry);
        if !violations.is_empty() {
            return Err(EngineError::InvariantBroken {
                step,
                detail: violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        if let Some(validator) = &self.validator {
            let problems = validator(&config);
            if !problems.is_empty() {
                return Err(EngineError::InvariantBroken {
                    step,
                    detail: problems.join("; "),
                });
            }
        }
        if self.created + self.initial_agents() != self.consumed + self.live as u64 {
            return Err(EngineError::InvariantBroken {
                step,
                detail: "agent conservation audit failed".into(),
            });
        }
        Ok(())
    }

    fn initial_agents(&self) -> u64 {
        self.initial
    }

    /// Every port must point at a port that points back.
    pub fn check_wiring(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if !node.alive {
                continue;
            }
            let ports = 1 + self.arity[node.kind.as_usize()] as usize;
            for s in 0..ports {
                let here = Link::Port(id as u32, s as u8);
                let there = node.ports[s];
                let alive = match there {
                    Link::Port(n, _) => self.nodes[n as usize].alive,
                    Link::Iface(_) => true,
                    Link::Nil => false,
                };
                if !alive || self.get(there) != here {
                    problems.push(format!("port {here:?} -> {there:?} is not symmetric"));
                }
            }
        }
        for (i, &there) in self.iface.iter().enumerate() {
            if self.get(there) != Link::Iface(i as u32) {
                problems.push(format!("interface {i} -> {there:?} is not symmetric"));
            }
        }
        problems
    }

    /// The textual configuration of the current net, with names assigned in
    /// traversal order.
    pub fn to_config(&self) -> Configuration {
        let mut reader = Reader {
            net: self,
            names: HashMap::new(),
            next: 0,
            visited: vec![false; self.nodes.len()],
            deferred: Vec::new(),
        };
        let mut config = Configuration::new();
        for i in 0..self.iface.len() {
            let here = Link::Iface(i as u32);
            let term = reader.read_from(here, self.iface[i], 0);
            config.interface.push(term);
        }
        reader.drain(&mut config);
        for id in 0..self.nodes.len() {
            let node = &self.nodes[id];
            if !node.alive || reader.visited[id] {
                continue;
            }
            if let Link::Port(other, 0) = node.ports[0] {
                if !reader.visited[other as usize] {
                    let left = reader.tree(id as u32, 0);
                    let right = reader.tree(other, 0);
                    config.equations.push(Equation::new(left, right));
                    reader.drain(&mut config);
                }
            }
        }
        for id in 0..self.nodes.len() {
            let node = &self.nodes[id];
            if !node.alive || reader.visited[id] {
                continue;
            }
            if self.is_principal(node.ports[0]) {
                // Faces an Amb's second principal slot; emitted with the Amb.
                continue;
            }
            let name = reader.wire(Link::Port(id as u32, 0), node.ports[0]);
            let tree = reader.tree(id as u32, 0);
            config.equations.push(Equation::new(name, tree));
            reader.drain(&mut config);
        }
        config.name_supply = reader.next;
        config
    }
}

/// Subtrees deeper than this are split off into their own equations, so
/// that long control chains never nest deeply.
const MAX_TREE_DEPTH: usize = 64;

struct Reader<'a> {
    net: &'a Net,
    names: HashMap<(Link, Link), Name>,
    next: u32,
    visited: Vec<bool>,
    deferred: Vec<(Name, u32)>,
}

impl Reader<'_> {
    fn wire(&mut self, a: Link, b: Link) -> Name {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(&n) = self.names.get(&key) {
            return n;
        }
        let n = Name(self.next);
        self.next += 1;
        self.names.insert(key, n);
        n
    }

    /// The term seen from `here`, whose wire leads to `there`.
    fn read_from(&mut self, here: Link, there: Link, depth: usize) -> AgentTerm {
        match there {
            Link::Port(n, 0)
                if !self.visited[n as usize]
                    && !self.net.is_principal(here)
                    && depth < MAX_TREE_DEPTH =>
            {
                self.tree(n, depth + 1)
            }
            Link::Port(n, 0) if !self.visited[n as usize] => {
                let name = self.wire(here, there);
                self.deferred.push((name, n));
                AgentTerm::Name(name)
            }
            _ => AgentTerm::Name(self.wire(here, there)),
        }
    }

    fn tree(&mut self, id: u32, depth: usize) -> AgentTerm {
        self.visited[id as usize] = true;
        let node = &self.net.nodes[id as usize];
        let kind = node.kind.as_usize();
        let arity = self.net.arity[kind] as usize;
        let mut aux = Vec::with_capacity(arity);
        for s in 1..=arity {
            let here = Link::Port(id, s as u8);
            aux.push(self.read_from(here, node.ports[s], depth));
        }
        AgentTerm::Agent(super::term::Agent {
            kind: node.kind,
            index: self.net.indexed[kind].then_some(node.index),
            payload: node.payload.clone(),
            aux,
        })
    }

    fn drain(&mut self, config: &mut Configuration) {
        while let Some((name, id)) = self.deferred.pop() {
            if !self.visited[id as usize] {
                let tree = self.tree(id, 0);
                config.equations.push(Equation::new(name, tree));
            }
        }
    }
}
