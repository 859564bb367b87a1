//! Concurrent game structures with propositional control.
//!
//! A structure fixes a set of agents, an atom universe, one controlled atom
//! set per agent, a protocol and a transition rule. States and actions are
//! bit sets over the universe; bit `i` is the `i`-th atom in lexicographic
//! order, so numeric order on states is the canonical state order.
//!
//! Exclusive control is the special case where the controlled sets
//! partition the universe and the transition is the union of the chosen
//! assignments.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the size of the atom universe.
pub const DEFAULT_ATOM_CAP: usize = 20;

/// Hard representation limit: states are `u64` bit sets.
pub const MAX_ATOMS: usize = 63;

/// Name of the fresh aggregation-phase atom introduced by the reduction.
pub const TURN_ATOM: &str = "__turn";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AgentId(pub u32);

impl AgentId {
    /// The dummy aggregator agent of the reduced structure.
    pub const STAR: AgentId = AgentId(u32::MAX);

    pub fn is_star(self) -> bool {
        self == Self::STAR
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_star() {
            f.write_str("*")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for AgentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "*" {
            return Ok(AgentId::STAR);
        }
        match s.parse::<u32>() {
            Ok(0) | Err(_) => Err(Error::InvalidGame(format!("invalid agent id `{s}`"))),
            Ok(v) if v == u32::MAX => Err(Error::InvalidGame(format!("invalid agent id `{s}`"))),
            Ok(v) => Ok(AgentId(v)),
        }
    }
}

/// True for tokens of the form `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// The atom universe of a structure, sorted by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for a in atoms {
            let a = a.into();
            if !is_identifier(&a) {
                return Err(Error::InvalidAtomName(a));
            }
            if !seen.insert(a.clone()) {
                return Err(Error::Duplicate {
                    what: "atom",
                    name: a,
                });
            }
            names.push(a);
        }
        if names.len() > MAX_ATOMS {
            return Err(Error::CapExceeded {
                what: "atom universe",
                needed: names.len() as u128,
                limit: MAX_ATOMS as u128,
            });
        }
        names.sort();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(Vocabulary { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    pub fn full_mask(&self) -> u64 {
        mask_of_len(self.names.len())
    }

    pub fn mask_of<'a, I>(&self, atoms: I) -> Result<u64>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut m = 0u64;
        for a in atoms {
            m |= 1 << self.require(a)?;
        }
        Ok(m)
    }

    pub fn state<'a, I>(&self, atoms: I) -> Result<State>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.mask_of(atoms).map(State)
    }

    pub fn action<'a, I>(&self, atoms: I) -> Result<Action>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.mask_of(atoms).map(Action)
    }

    /// Names of the atoms set in `bits`, in canonical order.
    pub fn atoms_of(&self, bits: u64) -> Vec<&str> {
        (0..self.names.len())
            .filter(|i| bits >> i & 1 == 1)
            .map(|i| self.names[i].as_str())
            .collect()
    }

    /// Renders a bit set as a `{p,q}` literal.
    pub fn render(&self, bits: u64) -> String {
        format!("{{{}}}", self.atoms_of(bits).join(","))
    }

    /// Parses a `{p,q}` literal.
    pub fn parse_set(&self, text: &str) -> Result<u64> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::MalformedState(format!("expected `{{...}}`, got `{t}`")))?;
        let mut m = 0u64;
        for tok in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            m |= 1 << self.require(tok)?;
        }
        Ok(m)
    }

    pub fn parse_state(&self, text: &str) -> Result<State> {
        self.parse_set(text).map(State)
    }

    pub fn parse_action(&self, text: &str) -> Result<Action> {
        self.parse_set(text).map(Action)
    }
}

pub(crate) fn mask_of_len(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Submasks of `mask` in ascending numeric order.
pub fn submasks(mask: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(1 << mask.count_ones().min(20));
    let mut sub = 0u64;
    loop {
        out.push(sub);
        if sub == mask {
            break;
        }
        sub = sub.wrapping_sub(mask) & mask;
    }
    out
}

/// A valuation of the universe: the set of true atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State(pub u64);

impl State {
    pub const EMPTY: State = State(0);

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn holds(self, atom: usize) -> bool {
        self.0 >> atom & 1 == 1
    }
}

/// An individual assignment: the controlled atoms set to true.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Action(pub u64);

impl Action {
    pub const EMPTY: Action = Action(0);

    pub fn bits(self) -> u64 {
        self.0
    }
}

/// One action per agent, parallel to the structure's agent list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct JointAction(pub Vec<Action>);

impl JointAction {
    pub fn render(&self, vocab: &Vocabulary) -> String {
        self.0
            .iter()
            .map(|a| vocab.render(a.0))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub type HostedProtocolFn = dyn Fn(usize, State) -> Result<Vec<Action>> + Send + Sync;
pub type HostedTransitionFn = dyn Fn(State, &[Action]) -> State + Send + Sync;

/// A protocol computed by a rule instead of a table.
#[derive(Clone)]
pub struct HostedProtocol {
    pub name: String,
    rule: Arc<HostedProtocolFn>,
}

impl HostedProtocol {
    /// `rule(agent_index, state)` returns the enabled actions.
    pub fn new(
        name: impl Into<String>,
        rule: impl Fn(usize, State) -> Result<Vec<Action>> + Send + Sync + 'static,
    ) -> Self {
        HostedProtocol {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }
}

impl fmt::Debug for HostedProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HostedProtocol({})", self.name)
    }
}

/// A deterministic, total transition rule supplied by an encoder.
#[derive(Clone)]
pub struct HostedTransition {
    pub name: String,
    rule: Arc<HostedTransitionFn>,
}

impl HostedTransition {
    pub fn new(
        name: impl Into<String>,
        rule: impl Fn(State, &[Action]) -> State + Send + Sync + 'static,
    ) -> Self {
        HostedTransition {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }
}

impl fmt::Debug for HostedTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HostedTransition({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Protocol {
    /// Every subset of the controlled atoms is enabled everywhere.
    Full,
    /// `(agent, state) -> actions`; may omit unreachable states.
    Explicit(BTreeMap<(AgentId, State), Vec<Action>>),
    Hosted(HostedProtocol),
}

#[derive(Debug, Clone)]
pub enum Transition {
    /// The successor is the union of the chosen assignments.
    ExclusiveUnion,
    /// `p` holds next iff strictly more than `m_p` agents set it; indexed by
    /// atom. Uncontrolled atoms keep their value.
    Threshold(Vec<Option<u32>>),
    Table(HashMap<(State, JointAction), State>),
    Hosted(HostedTransition),
}

impl Transition {
    pub fn kind(&self) -> &'static str {
        match self {
            Transition::ExclusiveUnion => "epc",
            Transition::Threshold(_) => "threshold",
            Transition::Table(_) => "table",
            Transition::Hosted(_) => "hosted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DiagnosticCode {
    NoAgents,
    DuplicateAgent,
    NonDenseAgents,
    NonDisjointControl,
    IncompleteControl,
    EmptyProtocol,
    MissingProtocolEntry,
    ActionOutsideControl,
    UnknownAgent,
    MissingThreshold,
    IncompleteTable,
    SuccessorOutOfRange,
    ReservedName,
    InvalidAtomName,
    Format,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// Per-agent memoryless strategies; the covered agents form the coalition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrategyProfile {
    assignments: BTreeMap<AgentId, BTreeMap<State, Action>>,
}

impl StrategyProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, agent: AgentId, state: State, action: Action) {
        self.assignments
            .entry(agent)
            .or_default()
            .insert(state, action);
    }

    /// Registers `agent` in the coalition even if it has no entries yet.
    pub fn add_agent(&mut self, agent: AgentId) {
        self.assignments.entry(agent).or_default();
    }

    pub fn action(&self, agent: AgentId, state: State) -> Option<Action> {
        self.assignments.get(&agent)?.get(&state).copied()
    }

    pub fn agents(&self) -> BTreeSet<AgentId> {
        self.assignments.keys().copied().collect()
    }

    pub fn strategy(&self, agent: AgentId) -> Option<&BTreeMap<State, Action>> {
        self.assignments.get(&agent)
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &BTreeMap<State, Action>)> {
        self.assignments.iter().map(|(a, m)| (*a, m))
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// An eventually periodic path `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoPath {
    pub prefix: Vec<State>,
    pub cycle: Vec<State>,
    /// Actions taken at each prefix position; empty when unknown.
    pub prefix_actions: Vec<JointAction>,
    /// Actions taken at each cycle position; empty when unknown.
    pub cycle_actions: Vec<JointAction>,
}

impl LassoPath {
    pub fn new(prefix: Vec<State>, cycle: Vec<State>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::MalformedPath("empty cycle".into()));
        }
        Ok(LassoPath {
            prefix,
            cycle,
            prefix_actions: Vec::new(),
            cycle_actions: Vec::new(),
        })
    }

    /// Number of distinct positions (`prefix + cycle`).
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The state at position `k` of the infinite path.
    pub fn at(&self, k: usize) -> State {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.cycle[(k - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Position following `k` within `0..len()`.
    pub fn next_position(&self, k: usize) -> usize {
        if k + 1 < self.len() {
            k + 1
        } else {
            self.prefix.len()
        }
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        let p: Vec<_> = self.prefix.iter().map(|s| vocab.render(s.0)).collect();
        let c: Vec<_> = self.cycle.iter().map(|s| vocab.render(s.0)).collect();
        format!("{} ({})^w", p.join(" "), c.join(" "))
            .trim_start()
            .to_string()
    }
}

/// Builder for [`GameStructure`]; fixes the vocabulary first so that states
/// and tables can be written against it.
#[derive(Debug, Clone)]
pub struct StructureBuilder {
    agents: Vec<AgentId>,
    vocab: Arc<Vocabulary>,
    control: Vec<u64>,
    protocol: Protocol,
    transition: Transition,
    atom_cap: usize,
}

impl StructureBuilder {
    pub fn new<A, I, S>(agents: A, atoms: I) -> Result<Self>
    where
        A: IntoIterator<Item = AgentId>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocab = Vocabulary::new(atoms)?;
        let agents: Vec<AgentId> = agents.into_iter().collect();
        let mut seen = BTreeSet::new();
        for a in &agents {
            if !seen.insert(*a) {
                return Err(Error::Duplicate {
                    what: "agent",
                    name: a.to_string(),
                });
            }
        }
        let n = agents.len();
        Ok(StructureBuilder {
            agents,
            vocab: Arc::new(vocab),
            control: vec![0; n],
            protocol: Protocol::Full,
            transition: Transition::ExclusiveUnion,
            atom_cap: DEFAULT_ATOM_CAP,
        })
    }

    /// Agents `1..=n`.
    pub fn numbered<I, S>(n: u32, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new((1..=n).map(AgentId), atoms)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn state(&self, atoms: &[&str]) -> Result<State> {
        self.vocab.state(atoms.iter().copied())
    }

    pub fn action(&self, atoms: &[&str]) -> Result<Action> {
        self.vocab.action(atoms.iter().copied())
    }

    pub fn control(mut self, agent: AgentId, atoms: &[&str]) -> Result<Self> {
        let idx = self
            .agents
            .iter()
            .position(|a| *a == agent)
            .ok_or(Error::UnknownAgent(agent))?;
        self.control[idx] = self.vocab.mask_of(atoms.iter().copied())?;
        Ok(self)
    }

    pub fn control_mask(mut self, agent: AgentId, mask: u64) -> Result<Self> {
        let idx = self
            .agents
            .iter()
            .position(|a| *a == agent)
            .ok_or(Error::UnknownAgent(agent))?;
        if mask & !self.vocab.full_mask() != 0 {
            return Err(Error::MalformedState(format!(
                "control mask {mask:#x} outside universe"
            )));
        }
        self.control[idx] = mask;
        Ok(self)
    }

    pub fn protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn transition(mut self, transition: Transition) -> Self {
        self.transition = transition;
        self
    }

    /// Threshold transition from `(atom, m_p)` pairs.
    pub fn thresholds(mut self, values: &[(&str, u32)]) -> Result<Self> {
        let mut t = vec![None; self.vocab.len()];
        for (a, m) in values {
            t[self.vocab.require(a)?] = Some(*m);
        }
        self.transition = Transition::Threshold(t);
        Ok(self)
    }

    pub fn atom_cap(mut self, cap: usize) -> Self {
        self.atom_cap = cap;
        self
    }

    pub fn build(self) -> Result<GameStructure> {
        if self.vocab.len() > self.atom_cap {
            return Err(Error::CapExceeded {
                what: "atom universe",
                needed: self.vocab.len() as u128,
                limit: self.atom_cap as u128,
            });
        }
        if let Transition::Threshold(t) = &self.transition {
            if t.len() != self.vocab.len() {
                return Err(Error::InvalidGame(
                    "threshold vector does not match the universe".into(),
                ));
            }
        }
        Ok(GameStructure {
            agents: self.agents,
            vocab: self.vocab,
            control: self.control,
            protocol: self.protocol,
            transition: self.transition,
        })
    }
}

/// A concurrent game structure with (possibly shared) propositional control.
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct GameStructure {
    agents: Vec<AgentId>,
    vocab: Arc<Vocabulary>,
    control: Vec<u64>,
    protocol: Protocol,
    transition: Transition,
}

impl GameStructure {
    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn transition(&self) -> &Transition {
        &self.transition
    }

    pub fn agent_index(&self, agent: AgentId) -> Result<usize> {
        self.agents
            .iter()
            .position(|a| *a == agent)
            .ok_or(Error::UnknownAgent(agent))
    }

    /// Controlled atoms of the agent at `idx`.
    pub fn control_at(&self, idx: usize) -> u64 {
        self.control[idx]
    }

    pub fn controlled(&self, agent: AgentId) -> Result<u64> {
        Ok(self.control[self.agent_index(agent)?])
    }

    /// Atoms nobody controls.
    pub fn uncontrolled(&self) -> u64 {
        let ctl = self.control.iter().fold(0, |acc, m| acc | m);
        self.vocab.full_mask() & !ctl
    }

    /// Control sets pairwise disjoint and covering the universe.
    pub fn is_exclusive(&self) -> bool {
        let mut seen = 0u64;
        for m in &self.control {
            if seen & m != 0 {
                return false;
            }
            seen |= m;
        }
        seen == self.vocab.full_mask()
    }

    pub fn state_count(&self) -> u128 {
        1u128 << self.vocab.len()
    }

    /// All states in canonical order.
    pub fn all_states(&self) -> impl Iterator<Item = State> {
        (0..=self.vocab.full_mask()).map(State)
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        if s.0 & !self.vocab.full_mask() != 0 {
            return Err(Error::MalformedState(format!(
                "state {:#x} outside universe of {} atoms",
                s.0,
                self.vocab.len()
            )));
        }
        Ok(())
    }

    /// `d(i, s)` for the agent at index `idx`, in canonical order.
    pub fn enabled_at(&self, idx: usize, s: State) -> Result<Vec<Action>> {
        match &self.protocol {
            Protocol::Full => Ok(submasks(self.control[idx])
                .into_iter()
                .map(Action)
                .collect()),
            Protocol::Explicit(table) => {
                table.get(&(self.agents[idx], s)).cloned().ok_or_else(|| {
                    Error::MissingProtocolEntry {
                        agent: self.agents[idx],
                        state: self.vocab.render(s.0),
                    }
                })
            }
            Protocol::Hosted(h) => (h.rule)(idx, s),
        }
    }

    /// `d(i, s)`.
    pub fn enabled(&self, agent: AgentId, s: State) -> Result<Vec<Action>> {
        let idx = self.agent_index(agent)?;
        self.check_state(s)?;
        self.enabled_at(idx, s)
    }

    /// Evaluates the transition rule without checking enabledness.
    pub fn transition_raw(&self, s: State, actions: &[Action]) -> Result<State> {
        match &self.transition {
            Transition::ExclusiveUnion => Ok(State(actions.iter().fold(0, |acc, a| acc | a.0))),
            Transition::Threshold(thresholds) => {
                let free = self.uncontrolled();
                let mut next = s.0 & free;
                for (atom, m) in thresholds.iter().enumerate() {
                    let bit = 1u64 << atom;
                    if free & bit != 0 {
                        continue;
                    }
                    let votes = actions.iter().filter(|a| a.0 & bit != 0).count() as u64;
                    if votes > u64::from(m.unwrap_or(0)) {
                        next |= bit;
                    }
                }
                Ok(State(next))
            }
            Transition::Table(rows) => rows
                .get(&(s, JointAction(actions.to_vec())))
                .copied()
                .ok_or_else(|| Error::TableMiss {
                    state: self.vocab.render(s.0),
                    action: JointAction(actions.to_vec()).render(&self.vocab),
                }),
            Transition::Hosted(h) => Ok((h.rule)(s, actions)),
        }
    }

    /// `τ(s, α)` for an enabled joint action.
    pub fn apply(&self, s: State, action: &JointAction) -> Result<State> {
        self.check_state(s)?;
        if action.0.len() != self.agents.len() {
            return Err(Error::Contract(format!(
                "joint action has {} components for {} agents",
                action.0.len(),
                self.agents.len()
            )));
        }
        for (idx, a) in action.0.iter().enumerate() {
            let enabled = self.enabled_at(idx, s)?;
            if a.0 & !self.control[idx] != 0 || !enabled.contains(a) {
                return Err(Error::NotEnabled {
                    agent: self.agents[idx],
                    action: self.vocab.render(a.0),
                    state: self.vocab.render(s.0),
                });
            }
        }
        self.transition_raw(s, &action.0)
    }

    /// Enabled actions of every agent at `s`.
    pub fn enabled_profile(&self, s: State) -> Result<Vec<Vec<Action>>> {
        (0..self.agents.len())
            .map(|i| self.enabled_at(i, s))
            .collect()
    }

    /// `Act(s)` in canonical order (first agent most significant).
    pub fn joint_actions(&self, s: State) -> Result<Vec<JointAction>> {
        let options = self.enabled_profile(s)?;
        Ok(product(&options).into_iter().map(JointAction).collect())
    }

    /// `Succ(s)`.
    pub fn successors(&self, s: State) -> Result<BTreeSet<State>> {
        self.check_state(s)?;
        let options = self.enabled_profile(s)?;
        let mut out = BTreeSet::new();
        for_each_product(&options, |acts| {
            out.insert(self.transition_raw(s, acts)?);
            Ok(())
        })?;
        Ok(out)
    }

    /// States reachable from `s` (including `s`), in canonical order.
    pub fn reachable(&self, s: State) -> Result<Vec<State>> {
        self.check_state(s)?;
        let mut seen = BTreeSet::from([s]);
        let mut queue = VecDeque::from([s]);
        while let Some(cur) = queue.pop_front() {
            for next in self.successors(cur)? {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        Ok(seen.into_iter().collect())
    }

    /// The unique computation from `s` under a profile covering every agent.
    pub fn run(&self, s: State, profile: &StrategyProfile) -> Result<LassoPath> {
        self.check_state(s)?;
        let mut states = Vec::new();
        let mut actions = Vec::new();
        let mut seen: HashMap<State, usize> = HashMap::new();
        let mut cur = s;
        loop {
            if let Some(&start) = seen.get(&cur) {
                let cycle = states.split_off(start);
                let cycle_actions = actions.split_off(start);
                return Ok(LassoPath {
                    prefix: states,
                    cycle,
                    prefix_actions: actions,
                    cycle_actions,
                });
            }
            seen.insert(cur, states.len());
            let mut joint = Vec::with_capacity(self.agents.len());
            for agent in &self.agents {
                let a = profile.action(*agent, cur).ok_or_else(|| {
                    Error::Strategy(format!(
                        "no action for agent {agent} at {}",
                        self.vocab.render(cur.0)
                    ))
                })?;
                joint.push(a);
            }
            let joint = JointAction(joint);
            let next = self.apply(cur, &joint)?;
            states.push(cur);
            actions.push(joint);
            cur = next;
        }
    }

    /// True iff `next` is a successor of `s`.
    pub fn is_step(&self, s: State, next: State) -> Result<bool> {
        Ok(self.successors(s)?.contains(&next))
    }
}

/// Cartesian product, first list most significant.
pub(crate) fn product<T: Copy>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let _ = for_each_product(options, |xs| {
        out.push(xs.to_vec());
        Ok(())
    });
    out
}

pub(crate) fn for_each_product<T: Copy>(
    options: &[Vec<T>],
    mut f: impl FnMut(&[T]) -> Result<()>,
) -> Result<()> {
    if options.iter().any(|o| o.is_empty()) {
        return Ok(());
    }
    let mut digits = vec![0usize; options.len()];
    let mut buf: Vec<T> = options.iter().map(|o| o[0]).collect();
    loop {
        f(&buf)?;
        let mut pos = options.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                buf[pos] = options[pos][digits[pos]];
                break;
            }
            digits[pos] = 0;
            buf[pos] = options[pos][0];
        }
    }
}

/// Checks the structural invariants. When `initial` is given, protocol and
/// table totality are checked on the states reachable from it only.
pub fn validate(g: &GameStructure, initial: Option<State>) -> Vec<Diagnostic> {
    match initial {
        Some(s0) => validate_from(g, Some(&[s0])),
        None => validate_from(g, None),
    }
}

/// As [`validate`], with totality checked on the states reachable from
/// any of `roots` (all states when `None`).
pub fn validate_from(g: &GameStructure, roots: Option<&[State]>) -> Vec<Diagnostic> {
    use DiagnosticCode as D;
    let mut out = Vec::new();
    let vocab = g.vocab();

    if g.agents.is_empty() {
        out.push(Diagnostic::new(D::NoAgents, "structure has no agents"));
    }
    let numbered: Vec<u32> = g
        .agents
        .iter()
        .filter(|a| !a.is_star())
        .map(|a| a.0)
        .collect();
    let mut sorted = numbered.clone();
    sorted.sort_unstable();
    if sorted
        .iter()
        .enumerate()
        .any(|(k, id)| *id as usize != k + 1)
    {
        out.push(Diagnostic::new(
            D::NonDenseAgents,
            format!(
                "agent ids {numbered:?} are not exactly 1..{}",
                numbered.len()
            ),
        ));
    }

    if matches!(g.transition, Transition::ExclusiveUnion) {
        for i in 0..g.agents.len() {
            for j in i + 1..g.agents.len() {
                let common = g.control[i] & g.control[j];
                if common != 0 {
                    out.push(Diagnostic::new(
                        D::NonDisjointControl,
                        format!(
                            "agents {} and {} both control {}",
                            g.agents[i],
                            g.agents[j],
                            vocab.render(common)
                        ),
                    ));
                }
            }
        }
        let free = g.uncontrolled();
        if free != 0 {
            out.push(Diagnostic::new(
                D::IncompleteControl,
                format!(
                    "exclusive structure leaves {} uncontrolled",
                    vocab.render(free)
                ),
            ));
        }
    }

    if let Transition::Threshold(t) = &g.transition {
        for (atom, m) in t.iter().enumerate() {
            if m.is_none() && g.uncontrolled() >> atom & 1 == 0 {
                out.push(Diagnostic::new(
                    D::MissingThreshold,
                    format!("no threshold for controlled atom {}", vocab.name(atom)),
                ));
            }
        }
    }

    if let Protocol::Explicit(table) = &g.protocol {
        for (agent, _) in table.keys() {
            if !g.agents.contains(agent) {
                out.push(Diagnostic::new(
                    D::UnknownAgent,
                    format!("protocol entry for unknown agent {agent}"),
                ));
                break;
            }
        }
    }

    let states: Vec<State> = match roots {
        Some(roots) => reachable_lenient(g, roots),
        None => g.all_states().collect(),
    };
    for &s in &states {
        let mut profile = Vec::with_capacity(g.agents.len());
        for (idx, agent) in g.agents.iter().enumerate() {
            match g.enabled_at(idx, s) {
                Ok(acts) => {
                    if acts.is_empty() {
                        out.push(Diagnostic::new(
                            D::EmptyProtocol,
                            format!("d({agent}, {}) is empty", vocab.render(s.0)),
                        ));
                    }
                    for a in &acts {
                        if a.0 & !g.control[idx] != 0 {
                            out.push(Diagnostic::new(
                                D::ActionOutsideControl,
                                format!(
                                    "d({agent}, {}) contains {} outside the controlled atoms",
                                    vocab.render(s.0),
                                    vocab.render(a.0)
                                ),
                            ));
                        }
                    }
                    profile.push(acts);
                }
                Err(e) => {
                    out.push(Diagnostic::new(D::MissingProtocolEntry, e.to_string()));
                    profile.push(Vec::new());
                }
            }
        }
        if matches!(g.transition, Transition::Table(_) | Transition::Hosted(_)) {
            let _ = for_each_product(&profile, |acts| {
                match g.transition_raw(s, acts) {
                    Ok(next) if next.0 & !vocab.full_mask() != 0 => out.push(Diagnostic::new(
                        D::SuccessorOutOfRange,
                        format!("successor of {} leaves the universe", vocab.render(s.0)),
                    )),
                    Ok(_) => {}
                    Err(e) => out.push(Diagnostic::new(D::IncompleteTable, e.to_string())),
                }
                Ok(())
            });
        }
    }
    out
}

/// Reachability that skips states whose successors cannot be computed.
fn reachable_lenient(g: &GameStructure, roots: &[State]) -> Vec<State> {
    let mut seen: BTreeSet<State> = roots
        .iter()
        .copied()
        .filter(|s| g.check_state(*s).is_ok())
        .collect();
    let mut queue: VecDeque<State> = seen.iter().copied().collect();
    while let Some(cur) = queue.pop_front() {
        let Ok(profile) = g.enabled_profile(cur) else {
            continue;
        };
        let mut next_states = Vec::new();
        let _ = for_each_product(&profile, |acts| {
            if let Ok(n) = g.transition_raw(cur, acts) {
                next_states.push(n);
            }
            Ok(())
        });
        for n in next_states {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().collect()
}

/// Which reserved atom families a document may use.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReservedPolicy {
    /// `c_...` copy atoms and `__...` atoms (reduced structures).
    pub allow_reduction: bool,
    /// `op_...` and `vis_...` atoms (influence encodings).
    pub allow_influence: bool,
}

pub fn reserved_name_diagnostics(vocab: &Vocabulary, policy: ReservedPolicy) -> Vec<Diagnostic> {
    vocab
        .names()
        .iter()
        .filter_map(|name| {
            let reduction = name.starts_with("c_") || name.starts_with("__");
            let influence = name.starts_with("op_") || name.starts_with("vis_");
            if (reduction && !policy.allow_reduction) || (influence && !policy.allow_influence) {
                Some(Diagnostic::new(
                    DiagnosticCode::ReservedName,
                    format!("atom name `{name}` uses a reserved prefix"),
                ))
            } else {
                None
            }
        })
        .collect()
}
