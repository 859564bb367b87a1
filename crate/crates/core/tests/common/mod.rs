//! Independent oracles for the integration tests.
//!
//! LTL: the classical tableau over maximal consistent subsets of the
//! closure, producted with the Kripke structure and checked for a fair
//! strongly connected component with petgraph. E-WIN: enumerate every
//! memoryless strategy of the agent over the whole state space.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use propctl::formulas::{PathFormula, StateFormula};
use propctl::structures::{Action, AgentId, GameStructure, State, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Ltl {
    True,
    Atom(usize),
    Not(Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
}

fn from_state(v: &Vocabulary, f: &StateFormula) -> Ltl {
    match f {
        StateFormula::True => Ltl::True,
        StateFormula::Atom(a) => Ltl::Atom(v.require(a).expect("atom in vocabulary")),
        StateFormula::Not(a) => Ltl::Not(Box::new(from_state(v, a))),
        StateFormula::Or(a, b) => Ltl::Or(Box::new(from_state(v, a)), Box::new(from_state(v, b))),
        StateFormula::Coalition(..) => panic!("oracle handles LTL only"),
    }
}

fn from_path(v: &Vocabulary, f: &PathFormula) -> Ltl {
    match f {
        PathFormula::State(s) => from_state(v, s),
        PathFormula::Not(a) => Ltl::Not(Box::new(from_path(v, a))),
        PathFormula::Or(a, b) => Ltl::Or(Box::new(from_path(v, a)), Box::new(from_path(v, b))),
        PathFormula::Next(a) => Ltl::Next(Box::new(from_path(v, a))),
        PathFormula::Until(a, b) => {
            Ltl::Until(Box::new(from_path(v, a)), Box::new(from_path(v, b)))
        }
    }
}

/// Positive subformulas (no top-level negation), children first.
fn closure(f: &Ltl, out: &mut Vec<Ltl>) {
    match f {
        Ltl::True | Ltl::Atom(_) => {}
        Ltl::Not(a) | Ltl::Next(a) => closure(a, out),
        Ltl::Or(a, b) | Ltl::Until(a, b) => {
            closure(a, out);
            closure(b, out);
        }
    }
    if !matches!(f, Ltl::Not(_)) && !out.contains(f) {
        out.push(f.clone());
    }
}

struct Tableau {
    cl: Vec<Ltl>,
    index: HashMap<Ltl, usize>,
    /// Locally consistent atoms as bitmasks over `cl`.
    atoms: Vec<u64>,
}

impl Tableau {
    fn new(f: &Ltl) -> Self {
        let mut cl = Vec::new();
        closure(f, &mut cl);
        assert!(cl.len() <= 22, "formula too large for the oracle");
        let index: HashMap<Ltl, usize> = cl
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, g)| (g, i))
            .collect();
        let mut t = Tableau {
            cl,
            index,
            atoms: Vec::new(),
        };
        t.atoms = (0..1u64 << t.cl.len())
            .filter(|&m| t.consistent(m))
            .collect();
        t
    }

    fn holds(&self, m: u64, f: &Ltl) -> bool {
        match f {
            Ltl::Not(a) => !self.holds(m, a),
            _ => m >> self.index[f] & 1 == 1,
        }
    }

    fn consistent(&self, m: u64) -> bool {
        self.cl.iter().enumerate().all(|(i, f)| {
            let v = m >> i & 1 == 1;
            match f {
                Ltl::True => v,
                Ltl::Or(a, b) => v == (self.holds(m, a) || self.holds(m, b)),
                // a until with its right side true must hold; one with both
                // sides false must not
                Ltl::Until(a, b) => {
                    (!self.holds(m, b) || v) && (self.holds(m, a) || self.holds(m, b) || !v)
                }
                _ => true,
            }
        })
    }

    fn label_ok(&self, m: u64, s: State) -> bool {
        self.cl.iter().enumerate().all(|(i, f)| match f {
            Ltl::Atom(p) => (m >> i & 1 == 1) == s.holds(*p),
            _ => true,
        })
    }

    fn step_ok(&self, a: u64, b: u64) -> bool {
        self.cl.iter().enumerate().all(|(i, f)| {
            let v = a >> i & 1 == 1;
            match f {
                Ltl::Next(x) => v == self.holds(b, x),
                Ltl::Until(x, y) => {
                    v == (self.holds(a, y) || (self.holds(a, x) && b >> i & 1 == 1))
                }
                _ => true,
            }
        })
    }

    fn fulfilled(&self, m: u64, u: usize) -> bool {
        match &self.cl[u] {
            Ltl::Until(_, y) => m >> u & 1 == 0 || self.holds(m, y),
            _ => true,
        }
    }
}

/// Successor relation of a finite Kripke structure.
pub type Steps = BTreeMap<State, BTreeSet<State>>;

/// Some infinite path of `steps` from `s` satisfies `f`.
fn exists_path(vocab: &Vocabulary, steps: &Steps, s: State, f: &PathFormula) -> bool {
    let f = from_path(vocab, f);
    let t = Tableau::new(&f);
    let mut graph: DiGraph<(State, u64), ()> = DiGraph::new();
    let mut nodes: HashMap<(State, u64), NodeIndex> = HashMap::new();
    for &st in steps.keys() {
        for &m in &t.atoms {
            if t.label_ok(m, st) {
                nodes.insert((st, m), graph.add_node((st, m)));
            }
        }
    }
    for (&(st, a), &from) in &nodes {
        for next in &steps[&st] {
            for &b in &t.atoms {
                if let Some(&to) = nodes.get(&(*next, b)) {
                    if t.step_ok(a, b) {
                        graph.add_edge(from, to, ());
                    }
                }
            }
        }
    }
    let untils: Vec<usize> = (0..t.cl.len())
        .filter(|&i| matches!(t.cl[i], Ltl::Until(..)))
        .collect();
    let mut fair = vec![false; graph.node_count()];
    for scc in tarjan_scc(&graph) {
        let nontrivial = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        if nontrivial
            && untils
                .iter()
                .all(|&u| scc.iter().any(|&n| t.fulfilled(graph[n].1, u)))
        {
            for n in scc {
                fair[n.index()] = true;
            }
        }
    }
    // backwards reachability to fair nodes
    let mut good = fair.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for n in graph.node_indices() {
            if !good[n.index()] && graph.neighbors(n).any(|m| good[m.index()]) {
                good[n.index()] = true;
                changed = true;
            }
        }
    }
    t.atoms
        .iter()
        .filter(|&&m| t.holds(m, &f))
        .filter_map(|&m| nodes.get(&(s, m)))
        .any(|n| good[n.index()])
}

/// Every infinite path of `steps` from `s` satisfies `f`.
pub fn all_paths(vocab: &Vocabulary, steps: &Steps, s: State, f: &PathFormula) -> bool {
    !exists_path(vocab, steps, s, &PathFormula::not(f.clone()))
}

/// Successors with `agent` fixed to its table where the table is defined,
/// everyone else playing freely.
pub fn steps_under(g: &GameStructure, agent: Option<(AgentId, &BTreeMap<State, Action>)>) -> Steps {
    let mut out = Steps::new();
    for s in g.all_states() {
        let mut options: Vec<Vec<Action>> = g
            .agents()
            .iter()
            .map(|a| g.enabled(*a, s).unwrap())
            .collect();
        if let Some((i, table)) = agent {
            if let Some(a) = table.get(&s) {
                let idx = g.agents().iter().position(|a| *a == i).unwrap();
                options[idx] = vec![*a];
            }
        }
        let mut next = BTreeSet::new();
        let mut combo = vec![0usize; options.len()];
        'outer: loop {
            let acts: Vec<Action> = combo.iter().zip(&options).map(|(k, o)| o[*k]).collect();
            next.insert(g.transition_raw(s, &acts).unwrap());
            for d in (0..combo.len()).rev() {
                combo[d] += 1;
                if combo[d] < options[d].len() {
                    continue 'outer;
                }
                combo[d] = 0;
            }
            break;
        }
        out.insert(s, next);
    }
    out
}

/// Whether some memoryless strategy of `agent` makes `goal` hold on every
/// path from `s`. Only states reachable from `s` under free play can matter,
/// so strategies are enumerated over those.
pub fn brute_force_ewin(g: &GameStructure, agent: AgentId, goal: &PathFormula, s: State) -> bool {
    let states: Vec<State> = g.reachable(s).unwrap();
    let options: Vec<Vec<Action>> = states
        .iter()
        .map(|st| g.enabled(agent, *st).unwrap())
        .collect();
    let total: u128 = options.iter().map(|o| o.len() as u128).product();
    assert!(total <= 1 << 16, "strategy space too large for brute force");
    let mut combo = vec![0usize; states.len()];
    loop {
        let table: BTreeMap<State, Action> = states
            .iter()
            .zip(combo.iter().zip(&options))
            .map(|(st, (k, o))| (*st, o[*k]))
            .collect();
        let steps = steps_under(g, Some((agent, &table)));
        if all_paths(g.vocab(), &steps, s, goal) {
            return true;
        }
        let mut d = 0;
        loop {
            if d == combo.len() {
                return false;
            }
            combo[d] += 1;
            if combo[d] < options[d].len() {
                break;
            }
            combo[d] = 0;
            d += 1;
        }
    }
}
