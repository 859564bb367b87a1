//! LTL over abstract labels, the closure tableau automaton and the product
//! emptiness check used for universal path quantification.
//!
//! A tableau state is a pair `(letter, obligations)`: `letter` fixes the
//! labels, `obligations` fixes the truth of every `X χ` and of `X u` for
//! each until subformula `u`. Every closure formula can then be evaluated
//! locally, using `u ≡ ψ₂ ∨ (ψ₁ ∧ X u)`. A step `q → q'` is allowed when the
//! obligations of `q` match what `q'` makes true. There is one acceptance
//! set per until formula, visited when `u` is false or `ψ₂` holds.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Hash-consed LTL node; children always have smaller ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    True,
    Label(u32),
    Not(u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LtlDag {
    nodes: Vec<Node>,
    ids: HashMap<Node, u32>,
}

impl LtlDag {
    pub fn intern(&mut self, n: Node) -> u32 {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.ids.insert(n, id);
        id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

/// Upper bound on `labels + obligations` for an explicit tableau.
pub(crate) const MAX_TABLEAU_BITS: usize = 22;

/// Explicit tableau automaton for one formula.
#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    label_bits: usize,
    obligation_bits: usize,
    /// `initial[letter]` lists obligation masks of initial states.
    initial: Vec<Vec<u32>>,
    /// `buckets[(required << label_bits) | letter]` lists obligation masks
    /// `m'` such that `(letter, m')` discharges the obligations `required`.
    buckets: Vec<Vec<u32>>,
    /// Acceptance sets visited by each state.
    acc: Vec<u32>,
    full_acc: u32,
}

impl Tableau {
    /// Builds the automaton accepting the words satisfying `root`, where
    /// labels are numbered `0..label_count`.
    pub fn build(dag: &LtlDag, root: u32, label_count: usize) -> Result<Self> {
        let nodes = dag.nodes();
        let mut obligation_of = vec![u32::MAX; nodes.len()];
        let mut until_of = vec![u32::MAX; nodes.len()];
        let (mut n_obl, mut n_until) = (0u32, 0u32);
        for (id, n) in nodes.iter().enumerate().take(root as usize + 1) {
            match n {
                Node::Next(_) => {
                    obligation_of[id] = n_obl;
                    n_obl += 1;
                }
                Node::Until(..) => {
                    obligation_of[id] = n_obl;
                    n_obl += 1;
                    until_of[id] = n_until;
                    n_until += 1;
                }
                _ => {}
            }
        }
        let bits = label_count + n_obl as usize;
        if bits > MAX_TABLEAU_BITS || n_until > 31 {
            return Err(Error::CapExceeded {
                what: "tableau size (labels + temporal obligations)",
                needed: bits as u128,
                limit: MAX_TABLEAU_BITS as u128,
            });
        }
        let letters = 1usize << label_count;
        let masks = 1usize << n_obl;
        let mut initial = vec![Vec::new(); letters];
        let mut buckets = vec![Vec::new(); masks * letters];
        let mut acc = vec![0u32; letters * masks];
        let mut val = vec![false; root as usize + 1];
        for letter in 0..letters {
            for m in 0..masks {
                let mut required = 0u32;
                let mut acc_bits = 0u32;
                for id in 0..=root as usize {
                    let v = match nodes[id] {
                        Node::True => true,
                        Node::Label(l) => letter >> l & 1 == 1,
                        Node::Not(a) => !val[a as usize],
                        Node::Or(a, b) => val[a as usize] || val[b as usize],
                        Node::Next(a) => {
                            if val[a as usize] {
                                required |= 1 << obligation_of[id];
                            }
                            m >> obligation_of[id] & 1 == 1
                        }
                        Node::Until(a, b) => {
                            let v = val[b as usize]
                                || (val[a as usize] && m >> obligation_of[id] & 1 == 1);
                            if v {
                                required |= 1 << obligation_of[id];
                            }
                            if !v || val[b as usize] {
                                acc_bits |= 1 << until_of[id];
                            }
                            v
                        }
                    };
                    val[id] = v;
                }
                if val[root as usize] {
                    initial[letter].push(m as u32);
                }
                buckets[((required as usize) << label_count) | letter].push(m as u32);
                acc[(letter << n_obl) | m] = acc_bits;
            }
        }
        Ok(Tableau {
            label_bits: label_count,
            obligation_bits: n_obl as usize,
            initial,
            buckets,
            acc,
            full_acc: if n_until == 0 {
                0
            } else {
                (1u32 << n_until) - 1
            },
        })
    }

    fn state(&self, letter: u32, m: u32) -> u32 {
        (letter << self.obligation_bits) | m
    }

    fn obligations(&self, q: u32) -> u32 {
        q & ((1u32 << self.obligation_bits) - 1)
    }

    fn initial(&self, letter: u32) -> impl Iterator<Item = u32> + '_ {
        self.initial[letter as usize]
            .iter()
            .map(move |&m| self.state(letter, m))
    }

    fn successors(&self, q: u32, letter: u32) -> impl Iterator<Item = u32> + '_ {
        let key = ((self.obligations(q) as usize) << self.label_bits) | letter as usize;
        self.buckets[key]
            .iter()
            .map(move |&m| self.state(letter, m))
    }

    pub fn state_count(&self) -> usize {
        self.acc.len()
    }
}

const UNVISITED: u32 = u32::MAX;

/// Reusable buffers for [`accepting_roots`].
#[derive(Debug, Default)]
pub(crate) struct ProductScratch {
    ids: HashMap<(u32, u32), u32>,
    nodes: Vec<(u32, u32)>,
    succ: Vec<Vec<u32>>,
    index: Vec<u32>,
    low: Vec<u32>,
    on_stack: Vec<bool>,
    reach: Vec<bool>,
    pub explored: u64,
}

impl ProductScratch {
    fn clear(&mut self) {
        self.ids.clear();
        self.nodes.clear();
        for s in &mut self.succ {
            s.clear();
        }
        self.index.clear();
        self.low.clear();
        self.on_stack.clear();
        self.reach.clear();
    }

    fn node(&mut self, k: u32, q: u32) -> u32 {
        if let Some(&id) = self.ids.get(&(k, q)) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.ids.insert((k, q), id);
        self.nodes.push((k, q));
        if self.succ.len() <= id as usize {
            self.succ.push(Vec::new());
        }
        self.index.push(UNVISITED);
        self.low.push(0);
        self.on_stack.push(false);
        self.reach.push(false);
        id
    }
}

/// For each root, whether some infinite path of the Kripke structure from
/// it is accepted by the tableau (i.e. satisfies the tableau's formula).
///
/// `letters[k]` is the label valuation of structure state `k` and
/// `steps(k)` its successors. Nontrivial SCCs meeting every acceptance set
/// are fair; a root is accepting iff one of its initial product nodes
/// reaches a fair SCC.
pub(crate) fn accepting_roots<'s>(
    tableau: &Tableau,
    letters: &[u32],
    steps: impl Fn(u32) -> &'s [u32],
    roots: &[u32],
    scratch: &mut ProductScratch,
) -> Vec<bool> {
    scratch.clear();
    let mut counter = 0u32;
    let mut tarjan_stack: Vec<u32> = Vec::new();
    // (node, next successor position)
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut out = Vec::with_capacity(roots.len());

    for &root in roots {
        let letter = letters[root as usize];
        let starts: Vec<u32> = tableau.initial(letter).collect();
        let mut hit = false;
        for q in starts {
            let start = scratch.node(root, q);
            if scratch.index[start as usize] == UNVISITED {
                call.push((start, 0));
                visit(
                    scratch,
                    tableau,
                    letters,
                    &steps,
                    start,
                    &mut counter,
                    &mut tarjan_stack,
                );
                while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                    let vi = v as usize;
                    if *pos < scratch.succ[vi].len() {
                        let w = scratch.succ[vi][*pos];
                        *pos += 1;
                        let wi = w as usize;
                        if scratch.index[wi] == UNVISITED {
                            call.push((w, 0));
                            visit(
                                scratch,
                                tableau,
                                letters,
                                &steps,
                                w,
                                &mut counter,
                                &mut tarjan_stack,
                            );
                        } else if scratch.on_stack[wi] {
                            scratch.low[vi] = scratch.low[vi].min(scratch.index[wi]);
                        }
                        continue;
                    }
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        let pi = parent as usize;
                        scratch.low[pi] = scratch.low[pi].min(scratch.low[vi]);
                    }
                    if scratch.low[vi] == scratch.index[vi] {
                        close_scc(scratch, tableau, v, &mut tarjan_stack);
                    }
                }
            }
            hit |= scratch.reach[start as usize];
        }
        out.push(hit);
    }
    scratch.explored += scratch.nodes.len() as u64;
    out
}

fn visit<'s>(
    scratch: &mut ProductScratch,
    tableau: &Tableau,
    letters: &[u32],
    steps: &impl Fn(u32) -> &'s [u32],
    v: u32,
    counter: &mut u32,
    stack: &mut Vec<u32>,
) {
    let vi = v as usize;
    scratch.index[vi] = *counter;
    scratch.low[vi] = *counter;
    *counter += 1;
    scratch.on_stack[vi] = true;
    stack.push(v);
    let (k, q) = scratch.nodes[vi];
    let mut succ = std::mem::take(&mut scratch.succ[vi]);
    for &k2 in steps(k) {
        for q2 in tableau.successors(q, letters[k2 as usize]) {
            succ.push(scratch.node(k2, q2));
        }
    }
    scratch.succ[vi] = succ;
}

fn close_scc(scratch: &mut ProductScratch, tableau: &Tableau, root: u32, stack: &mut Vec<u32>) {
    let mut members = Vec::new();
    loop {
        let w = stack.pop().expect("tarjan stack underflow");
        scratch.on_stack[w as usize] = false;
        members.push(w);
        if w == root {
            break;
        }
    }
    let single = members.len() == 1;
    let nontrivial = !single || scratch.succ[root as usize].contains(&root);
    let mut acc = 0u32;
    let mut reach = false;
    for &m in &members {
        let (_, q) = scratch.nodes[m as usize];
        acc |= tableau.acc[q as usize];
        for &w in &scratch.succ[m as usize] {
            // successors outside this SCC are already closed
            if scratch.reach[w as usize] {
                reach = true;
            }
        }
    }
    let fair = nontrivial && acc & tableau.full_acc == tableau.full_acc;
    if fair || reach {
        for &m in &members {
            scratch.reach[m as usize] = true;
        }
    }
}
