//! Encoders for iterated boolean games, influence games and iterated
//! aggregation games as shared-control structures with LTL goals.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::checker::{ewin, WinOutcome};
use crate::error::{Error, Result};
use crate::formulas::{self, Formula, PathFormula};
use crate::structures::{
    validate, Action, AgentId, GameStructure, HostedTransition, JointAction, State,
    StructureBuilder, Transition, Vocabulary,
};

/// An LTL goal per agent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoalTable {
    goals: BTreeMap<AgentId, PathFormula>,
}

impl GoalTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, agent: AgentId, goal: PathFormula) {
        self.goals.insert(agent, goal);
    }

    pub fn goal(&self, agent: AgentId) -> Result<&PathFormula> {
        self.goals.get(&agent).ok_or(Error::MissingGoal(agent))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &PathFormula)> {
        self.goals.iter().map(|(a, g)| (*a, g))
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    /// Every goal is LTL over the vocabulary and belongs to a known agent.
    pub fn check(&self, agents: &[AgentId], vocab: &Vocabulary) -> Result<()> {
        for (agent, goal) in &self.goals {
            if !agents.contains(agent) {
                return Err(Error::UnknownAgent(*agent));
            }
            if goal.has_coalition() {
                return Err(Error::InvalidGame(format!(
                    "goal of agent {agent} is not an LTL formula"
                )));
            }
            for a in formulas::atoms(&Formula::Path(goal.clone())) {
                vocab.require(&a)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum GameClass {
    #[default]
    Raw,
    Ibg,
    Influence,
    Aggregation,
    /// Output of the shared-to-exclusive reduction.
    Reduced,
}

impl GameClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GameClass::Raw => "raw",
            GameClass::Ibg => "ibg",
            GameClass::Influence => "influence",
            GameClass::Aggregation => "aggregation",
            GameClass::Reduced => "reduced",
        }
    }
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "raw" => GameClass::Raw,
            "ibg" => GameClass::Ibg,
            "influence" => GameClass::Influence,
            "aggregation" => GameClass::Aggregation,
            "reduced" => GameClass::Reduced,
            _ => return Err(Error::InvalidGame(format!("unknown game class `{s}`"))),
        })
    }
}

/// A structure with goals and an optional designated state.
#[derive(Debug, Clone)]
pub struct EncodedGame {
    pub structure: GameStructure,
    pub goals: GoalTable,
    pub initial: Option<State>,
    pub class: GameClass,
}

/// Transition of an iterated boolean game, written against atom names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TransitionSpec {
    /// Union of the chosen assignments (exclusive control).
    Union,
    /// `p` holds next iff more than `m_p` agents set it.
    Threshold(BTreeMap<String, u32>),
    /// Explicit rows; need only cover the reachable pairs.
    Table(Vec<TableRow>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TableRow {
    pub state: BTreeSet<String>,
    /// One assignment per agent, in agent order.
    pub actions: Vec<BTreeSet<String>>,
    pub next: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IbgSpec {
    pub agents: Vec<AgentId>,
    pub atoms: Vec<String>,
    pub control: BTreeMap<AgentId, BTreeSet<String>>,
    pub transition: TransitionSpec,
    pub goals: GoalTable,
    pub initial: Option<BTreeSet<String>>,
}

fn names_state(vocab: &Vocabulary, names: &BTreeSet<String>) -> Result<State> {
    vocab.state(names.iter().map(String::as_str))
}

fn reject_diagnostics(g: &GameStructure, initial: Option<State>) -> Result<()> {
    let diags = validate(g, initial);
    if diags.is_empty() {
        return Ok(());
    }
    let text: Vec<String> = diags.iter().map(ToString::to_string).collect();
    Err(Error::InvalidGame(text.join("; ")))
}

/// Resolves atom names of a transition description against `vocab`.
pub fn transition_from_spec(
    vocab: &Vocabulary,
    agents: usize,
    spec: &TransitionSpec,
) -> Result<Transition> {
    Ok(match spec {
        TransitionSpec::Union => Transition::ExclusiveUnion,
        TransitionSpec::Threshold(m) => {
            let mut t = vec![None; vocab.len()];
            for (atom, v) in m {
                t[vocab.require(atom)?] = Some(*v);
            }
            Transition::Threshold(t)
        }
        TransitionSpec::Table(rows) => {
            let mut table = HashMap::new();
            for row in rows {
                if row.actions.len() != agents {
                    return Err(Error::InvalidGame(format!(
                        "table row has {} actions for {} agents",
                        row.actions.len(),
                        agents
                    )));
                }
                let actions = row
                    .actions
                    .iter()
                    .map(|a| Ok(Action(names_state(vocab, a)?.0)))
                    .collect::<Result<Vec<_>>>()?;
                let key = (names_state(vocab, &row.state)?, JointAction(actions));
                if table.insert(key, names_state(vocab, &row.next)?).is_some() {
                    return Err(Error::Duplicate {
                        what: "table row",
                        name: vocab.render(names_state(vocab, &row.state)?.0),
                    });
                }
            }
            Transition::Table(table)
        }
    })
}

/// An iterated boolean game with (possibly shared) control and the full
/// protocol.
pub fn build_ibg(spec: &IbgSpec) -> Result<EncodedGame> {
    let mut b = StructureBuilder::new(spec.agents.iter().copied(), spec.atoms.iter().cloned())?;
    let vocab = b.vocab().clone();
    for (agent, atoms) in &spec.control {
        let names: Vec<&str> = atoms.iter().map(String::as_str).collect();
        b = b.control(*agent, &names)?;
    }
    b = b.transition(transition_from_spec(
        &vocab,
        spec.agents.len(),
        &spec.transition,
    )?);
    let g = b.build()?;
    let initial = spec
        .initial
        .as_ref()
        .map(|s| names_state(&vocab, s))
        .transpose()?;
    reject_diagnostics(&g, initial)?;
    spec.goals.check(g.agents(), g.vocab())?;
    Ok(EncodedGame {
        structure: g,
        goals: spec.goals.clone(),
        initial,
        class: GameClass::Ibg,
    })
}

pub fn opinion_atom(agent: AgentId, issue: &str) -> String {
    format!("op_{agent}_{issue}")
}

pub fn visibility_atom(agent: AgentId, issue: &str) -> String {
    format!("vis_{agent}_{issue}")
}

/// Influence game over agents `1..=agents`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceSpec {
    pub agents: u32,
    pub issues: Vec<String>,
    /// `(k, i)`: `k` influences `i`.
    pub edges: BTreeSet<(AgentId, AgentId)>,
    /// Issues each agent initially holds true; absent agents hold none.
    pub opinions: BTreeMap<AgentId, BTreeSet<String>>,
    /// Issues each agent initially reveals.
    pub visible: BTreeMap<AgentId, BTreeSet<String>>,
    pub goals: GoalTable,
}

/// The unanimous update: if some influencers reveal their opinion on an
/// issue and all of them agree, adopt it; otherwise keep the own opinion.
pub fn unanimous_update(own: bool, revealed: &[bool]) -> bool {
    match revealed.split_first() {
        Some((first, rest)) if rest.iter().all(|b| b == first) => *first,
        _ => own,
    }
}

pub fn build_influence(spec: &InfluenceSpec) -> Result<EncodedGame> {
    let agents: Vec<AgentId> = (1..=spec.agents).map(AgentId).collect();
    for (k, i) in &spec.edges {
        if k == i {
            return Err(Error::InvalidGame(format!(
                "self-influence edge at agent {k}"
            )));
        }
        for x in [k, i] {
            if !agents.contains(x) {
                return Err(Error::UnknownAgent(*x));
            }
        }
    }
    let mut names = Vec::new();
    for a in &agents {
        for p in &spec.issues {
            names.push(opinion_atom(*a, p));
            names.push(visibility_atom(*a, p));
        }
    }
    let mut b = StructureBuilder::new(agents.iter().copied(), names)?;
    let vocab = b.vocab().clone();
    let n = agents.len();
    let m = spec.issues.len();
    // op[i][p], vis[i][p] bit positions
    let pos = |f: fn(AgentId, &str) -> String| -> Vec<Vec<u32>> {
        agents
            .iter()
            .map(|a| {
                spec.issues
                    .iter()
                    .map(|p| vocab.index_of(&f(*a, p)).expect("encoded atom") as u32)
                    .collect()
            })
            .collect()
    };
    let op = pos(opinion_atom);
    let vis = pos(visibility_atom);
    for (i, a) in agents.iter().enumerate() {
        let mask = vis[i].iter().fold(0u64, |acc, q| acc | 1 << q);
        b = b.control_mask(*a, mask)?;
    }
    let influencers: Vec<Vec<usize>> = agents
        .iter()
        .map(|i| {
            spec.edges
                .iter()
                .filter(|(_, t)| t == i)
                .map(|(k, _)| (k.0 - 1) as usize)
                .collect()
        })
        .collect();
    let rule = HostedTransition::new("influence", move |s, actions| {
        let mut next = 0u64;
        for i in 0..n {
            for p in 0..m {
                let vbit = 1u64 << vis[i][p];
                if actions[i].0 & vbit != 0 {
                    next |= vbit;
                }
                let revealed: Vec<bool> = influencers[i]
                    .iter()
                    .filter(|&&k| actions[k].0 & (1u64 << vis[k][p]) != 0)
                    .map(|&k| s.0 >> op[k][p] & 1 == 1)
                    .collect();
                if unanimous_update(s.0 >> op[i][p] & 1 == 1, &revealed) {
                    next |= 1u64 << op[i][p];
                }
            }
        }
        State(next)
    });
    let g = b.transition(Transition::Hosted(rule)).build()?;

    let mut init = Vec::new();
    for (table, f) in [
        (&spec.opinions, opinion_atom as fn(AgentId, &str) -> String),
        (&spec.visible, visibility_atom),
    ] {
        for (a, issues) in table {
            if !agents.contains(a) {
                return Err(Error::UnknownAgent(*a));
            }
            for p in issues {
                init.push(f(*a, p));
            }
        }
    }
    let initial = g.vocab().state(init.iter().map(String::as_str))?;
    reject_diagnostics(&g, Some(initial))?;
    spec.goals.check(g.agents(), g.vocab())?;
    Ok(EncodedGame {
        structure: g,
        goals: spec.goals.clone(),
        initial: Some(initial),
        class: GameClass::Influence,
    })
}

/// Issue-wise aggregation function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggregationRule {
    /// An issue is accepted iff at least `quota` agents support it; the
    /// default quota is a strict majority, so ties reject.
    Majority { quota: Option<u32> },
    /// `table[mask]` is the outcome when exactly the agents in `mask`
    /// (bit `i-1` for agent `i`) support the issue.
    Table(Vec<bool>),
}

impl AggregationRule {
    pub fn strict_majority(n: u32) -> u32 {
        n / 2 + 1
    }

    /// Outcome for a support set given as a bitmask over agents.
    pub fn decide(&self, n: u32, support: u64) -> bool {
        match self {
            AggregationRule::Majority { quota } => {
                support.count_ones() >= quota.unwrap_or_else(|| Self::strict_majority(n))
            }
            AggregationRule::Table(t) => t[support as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationSpec {
    pub agents: u32,
    pub issues: Vec<String>,
    pub rule: AggregationRule,
    pub goals: GoalTable,
    pub initial: Option<BTreeSet<String>>,
}

pub fn build_aggregation(spec: &AggregationSpec) -> Result<EncodedGame> {
    let n = spec.agents;
    if let AggregationRule::Table(t) = &spec.rule {
        if n >= 32 || t.len() != 1usize << n {
            return Err(Error::InvalidGame(format!(
                "aggregation table needs {} entries",
                1u64.checked_shl(n).unwrap_or(0)
            )));
        }
    }
    if let AggregationRule::Majority { quota: Some(0) } = spec.rule {
        return Err(Error::InvalidGame("quota must be positive".into()));
    }
    let agents: Vec<AgentId> = (1..=n).map(AgentId).collect();
    let mut b = StructureBuilder::new(agents.iter().copied(), spec.issues.iter().cloned())?;
    let full = b.vocab().full_mask();
    for a in &agents {
        b = b.control_mask(*a, full)?;
    }
    let atoms = b.vocab().len();
    let rule = spec.rule.clone();
    let tau = HostedTransition::new("aggregation", move |_s, actions| {
        let mut next = 0u64;
        for p in 0..atoms {
            let support = actions
                .iter()
                .enumerate()
                .filter(|(_, a)| a.0 >> p & 1 == 1)
                .fold(0u64, |acc, (i, _)| acc | 1 << i);
            if rule.decide(n, support) {
                next |= 1 << p;
            }
        }
        State(next)
    });
    let g = b.transition(Transition::Hosted(tau)).build()?;
    let initial = spec
        .initial
        .as_ref()
        .map(|s| names_state(g.vocab(), s))
        .transpose()?;
    reject_diagnostics(&g, initial)?;
    spec.goals.check(g.agents(), g.vocab())?;
    Ok(EncodedGame {
        structure: g,
        goals: spec.goals.clone(),
        initial,
        class: GameClass::Aggregation,
    })
}

/// Whether agent `i` has a memoryless winning strategy from `s`, or from
/// the game's designated state when `s` is `None`.
pub fn winning_strategy_query(
    game: &EncodedGame,
    i: AgentId,
    s: Option<State>,
) -> Result<WinOutcome> {
    let s = s.or(game.initial).ok_or_else(|| {
        Error::InvalidGame("no state given and the game has no initial state".into())
    })?;
    ewin(&game.structure, &game.goals, i, s)
}
