//! Enumeration of memoryless coalition strategies.
//!
//! A strategy is a digit vector indexed by (member, state), members in
//! agent order and states in canonical order, each digit selecting an
//! enabled action. Digits with a single option are fixed. The space is cut
//! into slabs by the most significant free digits; slabs are searched in
//! parallel and results are reduced in slab order, so the first witness is
//! the one a sequential odometer would find.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use super::arena::{Arena, ChoiceGroups};
use super::ltl::{accepting_roots, ProductScratch, Tableau};

const SLAB_TARGET: u128 = 1024;

#[derive(Debug, Clone, Copy)]
struct Digit {
    state: u32,
    stride: u32,
    radix: u32,
}

/// Number of memoryless strategies of the coalition over the arena.
pub(crate) fn strategy_count(arena: &Arena, members: &[usize]) -> u128 {
    let mut total: u128 = 1;
    for k in 0..arena.len() {
        for &m in members {
            total = total.saturating_mul(arena.enabled[k][m].len() as u128);
        }
    }
    total
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub strategies: AtomicU64,
    pub product_nodes: AtomicU64,
}

pub(crate) struct Space<'a> {
    groups: &'a ChoiceGroups,
    tableau: &'a Tableau,
    letters: &'a [u32],
    digits: Vec<Digit>,
    split: usize,
    slabs: u64,
    counters: &'a Counters,
}

impl<'a> Space<'a> {
    /// `tableau` must accept the paths that violate the coalition's goal.
    pub fn new(
        arena: &Arena,
        groups: &'a ChoiceGroups,
        tableau: &'a Tableau,
        letters: &'a [u32],
        counters: &'a Counters,
    ) -> Self {
        let mut digits = Vec::new();
        for (slot, &m) in groups.members.iter().enumerate() {
            for k in 0..arena.len() {
                let radix = arena.enabled[k][m].len() as u32;
                if radix < 2 {
                    continue;
                }
                let stride: usize = groups.members[slot + 1..]
                    .iter()
                    .map(|&later| arena.enabled[k][later].len())
                    .product();
                digits.push(Digit {
                    state: k as u32,
                    stride: stride as u32,
                    radix,
                });
            }
        }
        let mut split = 0;
        let mut slabs: u128 = 1;
        while split < digits.len() && slabs < SLAB_TARGET {
            slabs *= digits[split].radix as u128;
            split += 1;
        }
        Space {
            groups,
            tableau,
            letters,
            digits,
            split,
            slabs: slabs as u64,
            counters,
        }
    }

    fn start(&self, slab: u64, choice: &mut Vec<u32>, digits: &mut Vec<u32>) {
        choice.clear();
        choice.resize(self.groups.groups.len(), 0);
        digits.clear();
        digits.resize(self.digits.len(), 0);
        let mut rest = slab;
        for i in (0..self.split).rev() {
            let d = &self.digits[i];
            let v = (rest % d.radix as u64) as u32;
            rest /= d.radix as u64;
            digits[i] = v;
            choice[d.state as usize] += v * d.stride;
        }
    }

    /// Advances the digits below the split; false once the slab is done.
    fn advance(&self, choice: &mut [u32], digits: &mut [u32]) -> bool {
        for i in (self.split..self.digits.len()).rev() {
            let d = &self.digits[i];
            let k = d.state as usize;
            if digits[i] + 1 < d.radix {
                digits[i] += 1;
                choice[k] += d.stride;
                return true;
            }
            choice[k] -= digits[i] * d.stride;
            digits[i] = 0;
        }
        false
    }

    fn violations(&self, choice: &[u32], roots: &[u32], scratch: &mut ProductScratch) -> Vec<bool> {
        let groups = &self.groups.groups;
        let before = scratch.explored;
        let out = accepting_roots(
            self.tableau,
            self.letters,
            |k| groups[k as usize][choice[k as usize] as usize].as_slice(),
            roots,
            scratch,
        );
        self.counters.strategies.fetch_add(1, Ordering::Relaxed);
        self.counters
            .product_nodes
            .fetch_add(scratch.explored - before, Ordering::Relaxed);
        out
    }

    /// Per-state coalition choice of the first strategy that is good for
    /// `root`, if any.
    pub fn first_witness(&self, root: u32) -> Option<Vec<u32>> {
        (0..self.slabs)
            .into_par_iter()
            .map_init(
                || (ProductScratch::default(), Vec::new(), Vec::new()),
                |(scratch, choice, digits), slab| {
                    self.start(slab, choice, digits);
                    loop {
                        if !self.violations(choice, &[root], scratch)[0] {
                            return Some(choice.clone());
                        }
                        if !self.advance(choice, digits) {
                            return None;
                        }
                    }
                },
            )
            .find_map_first(|w| w)
    }

    /// For each root, whether some strategy is good for it.
    pub fn winning(&self, roots: &[u32]) -> Vec<bool> {
        let good: Vec<AtomicBool> = roots.iter().map(|_| AtomicBool::new(false)).collect();
        let remaining = AtomicUsize::new(roots.len());
        (0..self.slabs).into_par_iter().for_each_init(
            || (ProductScratch::default(), Vec::new(), Vec::new()),
            |(scratch, choice, digits), slab| {
                if remaining.load(Ordering::Relaxed) == 0 {
                    return;
                }
                self.start(slab, choice, digits);
                loop {
                    let (slots, pending): (Vec<usize>, Vec<u32>) = roots
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !good[*i].load(Ordering::Relaxed))
                        .map(|(i, &r)| (i, r))
                        .unzip();
                    if pending.is_empty() {
                        return;
                    }
                    let bad = self.violations(choice, &pending, scratch);
                    for (slot, b) in slots.into_iter().zip(bad) {
                        if !b && !good[slot].swap(true, Ordering::Relaxed) {
                            remaining.fetch_sub(1, Ordering::Relaxed);
                        }
                    }
                    if !self.advance(choice, digits) {
                        return;
                    }
                }
            },
        );
        good.into_iter().map(AtomicBool::into_inner).collect()
    }
}
