//! Explicit state space: the states reachable from a set of roots, with
//! the successor of every joint action precomputed.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::structures::{Action, GameStructure, State};

#[derive(Debug, Clone)]
pub(crate) struct Arena {
    /// States in canonical order.
    pub states: Vec<State>,
    pub index: HashMap<State, u32>,
    /// `enabled[k][i]`: enabled actions of agent index `i` at state `k`,
    /// canonical order.
    pub enabled: Vec<Vec<Vec<Action>>>,
    /// `succ[k][j]`: successor under joint action number `j` (mixed radix
    /// over `enabled[k]`, first agent most significant).
    pub succ: Vec<Vec<u32>>,
}

impl Arena {
    pub fn reachable(g: &GameStructure, roots: &[State]) -> Result<Self> {
        let mut seen: BTreeSet<State> = BTreeSet::new();
        let mut stack = Vec::new();
        let mut raw: HashMap<State, (Vec<Vec<Action>>, Vec<State>)> = HashMap::new();
        for &r in roots {
            g.check_state(r)?;
            if seen.insert(r) {
                stack.push(r);
            }
        }
        while let Some(s) = stack.pop() {
            let (enabled, succ) = expand(g, s)?;
            for &t in &succ {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
            raw.insert(s, (enabled, succ));
        }
        let states: Vec<State> = seen.into_iter().collect();
        let index: HashMap<State, u32> = states
            .iter()
            .enumerate()
            .map(|(k, s)| (*s, k as u32))
            .collect();
        let mut enabled = Vec::with_capacity(states.len());
        let mut succ = Vec::with_capacity(states.len());
        for s in &states {
            let (e, t) = raw.remove(s).expect("expanded state");
            enabled.push(e);
            succ.push(t.iter().map(|x| index[x]).collect());
        }
        Ok(Arena {
            states,
            index,
            enabled,
            succ,
        })
    }

    pub fn full(g: &GameStructure) -> Result<Self> {
        let all: Vec<State> = g.all_states().collect();
        Self::reachable(g, &all)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn radices(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.enabled[k].iter().map(Vec::len)
    }
}

fn expand(g: &GameStructure, s: State) -> Result<(Vec<Vec<Action>>, Vec<State>)> {
    let mut enabled = g.enabled_profile(s)?;
    for (idx, acts) in enabled.iter_mut().enumerate() {
        acts.sort();
        acts.dedup();
        if acts.is_empty() {
            return Err(Error::Contract(format!(
                "agent {} has no enabled action at {}",
                g.agents()[idx],
                g.vocab().render(s.0)
            )));
        }
    }
    let mut succ = Vec::new();
    crate::structures::for_each_product(&enabled, |acts| {
        succ.push(g.transition_raw(s, acts)?);
        Ok(())
    })?;
    Ok((enabled, succ))
}

/// Successor sets grouped by the choice of a coalition.
#[derive(Debug, Clone)]
pub(crate) struct ChoiceGroups {
    /// Agent indices of the coalition, ascending.
    pub members: Vec<usize>,
    /// `groups[k][c]`: successors of state `k` when the coalition makes
    /// choice `c` (mixed radix over members, first most significant).
    pub groups: Vec<Vec<Vec<u32>>>,
}

impl ChoiceGroups {
    pub fn new(arena: &Arena, members: &[usize]) -> Self {
        let mut groups = Vec::with_capacity(arena.len());
        for k in 0..arena.len() {
            let radix: Vec<usize> = arena.radices(k).collect();
            let n = radix.len();
            let mut strides = vec![0usize; n];
            let mut acc = 1usize;
            for &m in members.iter().rev() {
                strides[m] = acc;
                acc *= radix[m];
            }
            let mut g: Vec<Vec<u32>> = vec![Vec::new(); acc];
            let mut digits = vec![0usize; n];
            for &t in &arena.succ[k] {
                let c: usize = members.iter().map(|&m| digits[m] * strides[m]).sum();
                g[c].push(t);
                // advance the joint-action odometer, last agent fastest
                for pos in (0..n).rev() {
                    digits[pos] += 1;
                    if digits[pos] < radix[pos] {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
            for v in &mut g {
                v.sort_unstable();
                v.dedup();
            }
            groups.push(g);
        }
        ChoiceGroups {
            members: members.to_vec(),
            groups,
        }
    }

    /// States where some coalition choice keeps every successor in `target`.
    pub fn force(&self, target: &[bool]) -> Vec<bool> {
        self.groups
            .iter()
            .map(|gs| {
                gs.iter()
                    .any(|succ| succ.iter().all(|&t| target[t as usize]))
            })
            .collect()
    }
}
