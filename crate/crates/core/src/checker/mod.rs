//! Model checking of ATL* state formulas under memoryless coalition
//! strategies.
//!
//! Coalition subformulas are resolved innermost first. A coalition whose
//! path argument is `X φ` or `φ U φ` over state formulas is labelled by the
//! force-predecessor fixpoint; any other shape, or every shape under
//! [`Engine::Enumeration`], enumerates memoryless coalition strategies and
//! checks the induced structure against a tableau for the negated goal.
//! Opponents are unrestricted: they may pick any enabled action at every
//! step, independently of history.

mod arena;
mod enumerate;
mod lasso;
mod ltl;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::rc::Rc;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulas::{self, atl_shape, AtlShape, Coalition, Formula, PathFormula, StateFormula};
use crate::games::GoalTable;
use crate::structures::{for_each_product, AgentId, GameStructure, State, Vocabulary};
use crate::Limits;

use arena::{Arena, ChoiceGroups};
use enumerate::{strategy_count, Counters, Space};
use ltl::{accepting_roots, LtlDag, Node, ProductScratch, Tableau};

pub use crate::structures::StrategyProfile;
pub use lasso::eval_ltl_on_lasso;

/// How coalition subformulas are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Fixpoint for ATL shapes, enumeration otherwise.
    #[default]
    Auto,
    /// Strategy enumeration for every coalition subformula.
    Enumeration,
}

/// Work counters of one query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub arena_states: usize,
    pub by_fixpoint: u64,
    pub by_enumeration: u64,
    pub fixpoint_iterations: u64,
    pub strategies_examined: u64,
    pub product_nodes: u64,
    pub tableau_states: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinOutcome {
    pub holds: bool,
    /// Defined on the states reachable from the queried state.
    pub witness: Option<StrategyProfile>,
    pub stats: Stats,
}

#[derive(Debug, Clone, Copy)]
pub struct Checker<'g> {
    g: &'g GameStructure,
    limits: Limits,
    engine: Engine,
}

impl<'g> Checker<'g> {
    pub fn new(g: &'g GameStructure) -> Self {
        Checker {
            g,
            limits: Limits::default(),
            engine: Engine::Auto,
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    /// Whether `(G, s) ⊨ φ`.
    pub fn check(&self, s: State, phi: &StateFormula) -> Result<Verdict> {
        self.admit(phi)?;
        let mut ev = Eval::new(self, Arena::reachable(self.g, &[s])?);
        let root = ev.arena.index[&s];
        let holds = ev.holds_at(phi, root)?;
        Ok(Verdict {
            holds,
            stats: ev.stats,
        })
    }

    /// All states of the structure satisfying `φ`.
    pub fn satisfying_states(&self, phi: &StateFormula) -> Result<(BTreeSet<State>, Stats)> {
        self.admit(phi)?;
        let mut ev = Eval::new(self, Arena::full(self.g)?);
        let sat = ev.sat(phi)?;
        let states = ev
            .arena
            .states
            .iter()
            .zip(sat.iter())
            .filter(|(_, v)| **v)
            .map(|(s, _)| *s)
            .collect();
        Ok((states, ev.stats))
    }

    /// `⟨⟨{agent}⟩⟩ goal` at `s`, with the first witness in enumeration
    /// order when it holds.
    pub fn winning_strategy(
        &self,
        agent: AgentId,
        goal: &PathFormula,
        s: State,
    ) -> Result<WinOutcome> {
        let c = Coalition::new([agent]);
        self.admit(&StateFormula::coalition(c.clone(), goal.clone()))?;
        let mut ev = Eval::new(self, Arena::reachable(self.g, &[s])?);
        let root = ev.arena.index[&s];
        let members = ev.members(&c)?;
        let choice = ev.enumerate(&members, goal, Some(root), true)?.witness;
        let witness = choice.map(|ch| ev.profile(&members, &ch));
        Ok(WinOutcome {
            holds: witness.is_some(),
            witness,
            stats: ev.stats,
        })
    }

    fn admit(&self, phi: &StateFormula) -> Result<()> {
        let f = Formula::State(phi.clone());
        for a in formulas::atoms(&f) {
            self.g.vocab().require(&a)?;
        }
        for agent in formulas::agents(&f) {
            self.g.agent_index(agent)?;
        }
        Ok(())
    }
}

/// `(G, s) ⊨ φ` with default limits.
pub fn check_state(g: &GameStructure, s: State, phi: &StateFormula) -> Result<bool> {
    Ok(Checker::new(g).check(s, phi)?.holds)
}

/// States satisfying an ATL formula, by fixpoint labelling only.
pub fn check_atl_fixpoint(g: &GameStructure, phi: &StateFormula) -> Result<BTreeSet<State>> {
    if !formulas::is_atl_state(phi) {
        return Err(Error::Contract(format!("`{phi}` is not an ATL formula")));
    }
    Ok(Checker::new(g).satisfying_states(phi)?.0)
}

/// Whether agent `i` has a memoryless strategy winning its goal from `s`.
pub fn ewin(g: &GameStructure, goals: &GoalTable, i: AgentId, s: State) -> Result<WinOutcome> {
    let goal = goals.goal(i)?;
    Checker::new(g).winning_strategy(i, goal, s)
}

struct EnumOutcome {
    good: Vec<bool>,
    witness: Option<Vec<u32>>,
}

struct Eval<'c> {
    g: &'c GameStructure,
    limits: Limits,
    engine: Engine,
    arena: Arena,
    memo: HashMap<StateFormula, Rc<Vec<bool>>>,
    groups: HashMap<Vec<usize>, Rc<ChoiceGroups>>,
    stats: Stats,
}

impl<'c> Eval<'c> {
    fn new(checker: &Checker<'c>, arena: Arena) -> Self {
        let stats = Stats {
            arena_states: arena.len(),
            ..Stats::default()
        };
        Eval {
            g: checker.g,
            limits: checker.limits,
            engine: checker.engine,
            arena,
            memo: HashMap::new(),
            groups: HashMap::new(),
            stats,
        }
    }

    fn holds_at(&mut self, f: &StateFormula, root: u32) -> Result<bool> {
        if let Some(v) = self.memo.get(f) {
            return Ok(v[root as usize]);
        }
        Ok(match f {
            StateFormula::True => true,
            StateFormula::Atom(a) => {
                self.arena.states[root as usize].holds(self.g.vocab().require(a)?)
            }
            StateFormula::Not(a) => !self.holds_at(a, root)?,
            StateFormula::Or(a, b) => self.holds_at(a, root)? || self.holds_at(b, root)?,
            StateFormula::Coalition(c, psi) => self.coalition(c, psi, Some(root))?[0],
        })
    }

    fn sat(&mut self, f: &StateFormula) -> Result<Rc<Vec<bool>>> {
        if let Some(v) = self.memo.get(f) {
            return Ok(Rc::clone(v));
        }
        let v = match f {
            StateFormula::True => vec![true; self.arena.len()],
            StateFormula::Atom(a) => {
                let i = self.g.vocab().require(a)?;
                self.arena.states.iter().map(|s| s.holds(i)).collect()
            }
            StateFormula::Not(a) => self.sat(a)?.iter().map(|x| !x).collect(),
            StateFormula::Or(a, b) => {
                let (x, y) = (self.sat(a)?, self.sat(b)?);
                x.iter().zip(y.iter()).map(|(p, q)| *p || *q).collect()
            }
            StateFormula::Coalition(c, psi) => self.coalition(c, psi, None)?,
        };
        let v = Rc::new(v);
        self.memo.insert(f.clone(), Rc::clone(&v));
        Ok(v)
    }

    fn members(&self, c: &Coalition) -> Result<Vec<usize>> {
        let mut m = c
            .members()
            .iter()
            .map(|a| self.g.agent_index(*a))
            .collect::<Result<Vec<_>>>()?;
        m.sort_unstable();
        Ok(m)
    }

    fn choice_groups(&mut self, members: &[usize]) -> Rc<ChoiceGroups> {
        if let Some(g) = self.groups.get(members) {
            return Rc::clone(g);
        }
        let g = Rc::new(ChoiceGroups::new(&self.arena, members));
        self.groups.insert(members.to_vec(), Rc::clone(&g));
        g
    }

    /// Truth of `⟨⟨c⟩⟩ψ` at `root`, or at every arena state.
    fn coalition(
        &mut self,
        c: &Coalition,
        psi: &PathFormula,
        root: Option<u32>,
    ) -> Result<Vec<bool>> {
        let members = self.members(c)?;
        let all = match (self.engine, atl_shape(psi)) {
            (Engine::Auto, Some(shape)) => self.fixpoint(&members, shape)?,
            _ => return Ok(self.enumerate(&members, psi, root, false)?.good),
        };
        Ok(match root {
            Some(r) => vec![all[r as usize]],
            None => all,
        })
    }

    fn fixpoint(&mut self, members: &[usize], shape: AtlShape<'_>) -> Result<Vec<bool>> {
        self.stats.by_fixpoint += 1;
        let groups = self.choice_groups(members);
        match shape {
            AtlShape::Next(a) => {
                let target = self.sat(a)?;
                self.stats.fixpoint_iterations += 1;
                Ok(groups.force(&target))
            }
            AtlShape::Until(a, b) => {
                let (sa, sb) = (self.sat(a)?, self.sat(b)?);
                let mut z: Vec<bool> = sb.to_vec();
                loop {
                    self.stats.fixpoint_iterations += 1;
                    let f = groups.force(&z);
                    let next: Vec<bool> = (0..z.len()).map(|k| sb[k] || (sa[k] && f[k])).collect();
                    if next == z {
                        return Ok(z);
                    }
                    z = next;
                }
            }
        }
    }

    fn enumerate(
        &mut self,
        members: &[usize],
        psi: &PathFormula,
        root: Option<u32>,
        witness: bool,
    ) -> Result<EnumOutcome> {
        self.stats.by_enumeration += 1;
        for sub in maximal_coalitions(psi) {
            self.sat(sub)?;
        }
        let mut dag = LtlDag::default();
        let mut labels = Labels::default();
        let body = compile_path(psi, self.g.vocab(), &mut dag, &mut labels, true)?;
        let neg = dag.intern(Node::Not(body));
        let tableau = Tableau::build(&dag, neg, labels.keys.len())?;
        self.stats.tableau_states += tableau.state_count() as u64;
        let letters = labels.letters(&self.arena.states, &self.memo);

        let needed = strategy_count(&self.arena, members);
        if needed > self.limits.max_strategies {
            return Err(Error::CapExceeded {
                what: "memoryless strategy count",
                needed,
                limit: self.limits.max_strategies,
            });
        }
        let groups = self.choice_groups(members);
        let counters = Counters::default();
        let space = Space::new(&self.arena, &groups, &tableau, &letters, &counters);
        let out = if witness {
            let r = root.expect("witness search needs a root");
            let w = space.first_witness(r);
            EnumOutcome {
                good: vec![w.is_some()],
                witness: w,
            }
        } else {
            let roots: Vec<u32> = match root {
                Some(r) => vec![r],
                None => (0..self.arena.len() as u32).collect(),
            };
            EnumOutcome {
                good: space.winning(&roots),
                witness: None,
            }
        };
        self.stats.strategies_examined += counters.strategies.load(Ordering::Relaxed);
        self.stats.product_nodes += counters.product_nodes.load(Ordering::Relaxed);
        Ok(out)
    }

    /// Decodes per-state coalition choices into a profile.
    fn profile(&self, members: &[usize], choice: &[u32]) -> StrategyProfile {
        let mut p = StrategyProfile::new();
        for (slot, &m) in members.iter().enumerate() {
            let agent = self.g.agents()[m];
            p.add_agent(agent);
            for (k, s) in self.arena.states.iter().enumerate() {
                let stride: usize = members[slot + 1..]
                    .iter()
                    .map(|&later| self.arena.enabled[k][later].len())
                    .product();
                let acts = &self.arena.enabled[k][m];
                let d = (choice[k] as usize / stride) % acts.len();
                p.insert(agent, *s, acts[d]);
            }
        }
        p
    }
}

/// Coalition subformulas of `psi` not nested inside another coalition.
fn maximal_coalitions(psi: &PathFormula) -> Vec<&StateFormula> {
    fn state<'a>(f: &'a StateFormula, out: &mut Vec<&'a StateFormula>) {
        match f {
            StateFormula::True | StateFormula::Atom(_) => {}
            StateFormula::Not(a) => state(a, out),
            StateFormula::Or(a, b) => {
                state(a, out);
                state(b, out);
            }
            StateFormula::Coalition(..) => out.push(f),
        }
    }
    fn path<'a>(f: &'a PathFormula, out: &mut Vec<&'a StateFormula>) {
        match f {
            PathFormula::State(s) => state(s, out),
            PathFormula::Not(a) | PathFormula::Next(a) => path(a, out),
            PathFormula::Or(a, b) | PathFormula::Until(a, b) => {
                path(a, out);
                path(b, out);
            }
        }
    }
    let mut out = Vec::new();
    path(psi, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum LabelKey {
    Atom(usize),
    Sub(StateFormula),
}

#[derive(Debug, Default)]
struct Labels {
    keys: Vec<LabelKey>,
    ids: HashMap<LabelKey, u32>,
}

impl Labels {
    fn id(&mut self, key: LabelKey) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.clone());
        self.ids.insert(key, id);
        id
    }

    fn letters(&self, states: &[State], memo: &HashMap<StateFormula, Rc<Vec<bool>>>) -> Vec<u32> {
        (0..states.len())
            .map(|k| {
                let mut bits = 0u32;
                for (l, key) in self.keys.iter().enumerate() {
                    let v = match key {
                        LabelKey::Atom(i) => states[k].holds(*i),
                        LabelKey::Sub(f) => memo[f][k],
                    };
                    if v {
                        bits |= 1 << l;
                    }
                }
                bits
            })
            .collect()
    }
}

fn compile_state(
    f: &StateFormula,
    vocab: &Vocabulary,
    dag: &mut LtlDag,
    labels: &mut Labels,
    allow_sub: bool,
) -> Result<u32> {
    Ok(match f {
        StateFormula::True => dag.intern(Node::True),
        StateFormula::Atom(a) => {
            let l = labels.id(LabelKey::Atom(vocab.require(a)?));
            dag.intern(Node::Label(l))
        }
        StateFormula::Not(a) => {
            let x = compile_state(a, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Not(x))
        }
        StateFormula::Or(a, b) => {
            let x = compile_state(a, vocab, dag, labels, allow_sub)?;
            let y = compile_state(b, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Or(x, y))
        }
        StateFormula::Coalition(..) => {
            if !allow_sub {
                return Err(Error::Contract(format!(
                    "coalition operator in LTL input: `{f}`"
                )));
            }
            let l = labels.id(LabelKey::Sub(f.clone()));
            dag.intern(Node::Label(l))
        }
    })
}

fn compile_path(
    f: &PathFormula,
    vocab: &Vocabulary,
    dag: &mut LtlDag,
    labels: &mut Labels,
    allow_sub: bool,
) -> Result<u32> {
    Ok(match f {
        PathFormula::State(s) => compile_state(s, vocab, dag, labels, allow_sub)?,
        PathFormula::Not(a) => {
            let x = compile_path(a, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Not(x))
        }
        PathFormula::Or(a, b) => {
            let x = compile_path(a, vocab, dag, labels, allow_sub)?;
            let y = compile_path(b, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Or(x, y))
        }
        PathFormula::Next(a) => {
            let x = compile_path(a, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Next(x))
        }
        PathFormula::Until(a, b) => {
            let x = compile_path(a, vocab, dag, labels, allow_sub)?;
            let y = compile_path(b, vocab, dag, labels, allow_sub)?;
            dag.intern(Node::Until(x, y))
        }
    })
}

/// The paths compatible with a fixed coalition strategy: the coalition
/// follows its profile and every other agent may pick any enabled action.
#[derive(Debug, Clone)]
pub struct InducedStructure {
    vocab: Arc<Vocabulary>,
    states: Vec<State>,
    index: HashMap<State, u32>,
    steps: Vec<Vec<u32>>,
}

impl InducedStructure {
    /// Builds a structure from explicit successor sets. Every state needs
    /// at least one successor, and successors must be listed states.
    pub fn from_steps(
        vocab: Arc<Vocabulary>,
        steps: BTreeMap<State, BTreeSet<State>>,
    ) -> Result<Self> {
        let states: Vec<State> = steps.keys().copied().collect();
        let index: HashMap<State, u32> = states
            .iter()
            .enumerate()
            .map(|(k, s)| (*s, k as u32))
            .collect();
        let mut out = Vec::with_capacity(states.len());
        for (s, succ) in &steps {
            if succ.is_empty() {
                return Err(Error::Contract(format!(
                    "state {} has no successor",
                    vocab.render(s.0)
                )));
            }
            let mut row = Vec::with_capacity(succ.len());
            for t in succ {
                row.push(*index.get(t).ok_or_else(|| {
                    Error::MalformedState(format!("successor {} is not a state", vocab.render(t.0)))
                })?);
            }
            out.push(row);
        }
        Ok(InducedStructure {
            vocab,
            states,
            index,
            steps: out,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// States in canonical order.
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: State) -> bool {
        self.index.contains_key(&s)
    }

    pub fn steps(&self, s: State) -> Option<BTreeSet<State>> {
        let k = *self.index.get(&s)?;
        Some(
            self.steps[k as usize]
                .iter()
                .map(|&t| self.states[t as usize])
                .collect(),
        )
    }
}

/// The structure of `out(s, σ_C)` for every `s` reachable from `roots`.
/// `profile` must cover exactly the members of `coalition`.
pub fn induced(
    g: &GameStructure,
    profile: &StrategyProfile,
    coalition: &Coalition,
    roots: &[State],
) -> Result<InducedStructure> {
    if profile.agents() != *coalition.members() {
        return Err(Error::Strategy(format!(
            "profile covers agents {:?}, coalition is {coalition}",
            profile
                .agents()
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
        )));
    }
    for a in coalition.members() {
        g.agent_index(*a)?;
    }
    let mut steps: BTreeMap<State, BTreeSet<State>> = BTreeMap::new();
    let mut queue: VecDeque<State> = VecDeque::new();
    for &r in roots {
        g.check_state(r)?;
        if let std::collections::btree_map::Entry::Vacant(e) = steps.entry(r) {
            e.insert(BTreeSet::new());
            queue.push_back(r);
        }
    }
    while let Some(s) = queue.pop_front() {
        let mut options = g.enabled_profile(s)?;
        for (idx, agent) in g.agents().iter().enumerate() {
            if !coalition.contains(*agent) {
                continue;
            }
            let a = profile.action(*agent, s).ok_or_else(|| {
                Error::Strategy(format!(
                    "no action for agent {agent} at {}",
                    g.vocab().render(s.0)
                ))
            })?;
            if !options[idx].contains(&a) {
                return Err(Error::NotEnabled {
                    agent: *agent,
                    action: g.vocab().render(a.0),
                    state: g.vocab().render(s.0),
                });
            }
            options[idx] = vec![a];
        }
        let mut succ = BTreeSet::new();
        for_each_product(&options, |acts| {
            succ.insert(g.transition_raw(s, acts)?);
            Ok(())
        })?;
        for t in &succ {
            if !steps.contains_key(t) {
                steps.insert(*t, BTreeSet::new());
                queue.push_back(*t);
            }
        }
        steps.insert(s, succ);
    }
    InducedStructure::from_steps(g.shared_vocab(), steps)
}

/// Whether every infinite path of `k` from `s` satisfies the LTL formula.
pub fn check_universal_ltl(k: &InducedStructure, s: State, psi: &PathFormula) -> Result<bool> {
    let root = *k.index.get(&s).ok_or_else(|| {
        Error::MalformedState(format!(
            "{} is not a state of the structure",
            k.vocab.render(s.0)
        ))
    })?;
    let mut dag = LtlDag::default();
    let mut labels = Labels::default();
    let body = compile_path(psi, &k.vocab, &mut dag, &mut labels, false)?;
    let neg = dag.intern(Node::Not(body));
    let tableau = Tableau::build(&dag, neg, labels.keys.len())?;
    let letters = labels.letters(&k.states, &HashMap::new());
    let mut scratch = ProductScratch::default();
    let bad = accepting_roots(
        &tableau,
        &letters,
        |x| k.steps[x as usize].as_slice(),
        &[root],
        &mut scratch,
    );
    Ok(!bad[0])
}

#[cfg(test)]
mod tests;
