//! Seeded generators for structures, formulas and strategies, used by the
//! sweep command and the test suites.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::checker::StrategyProfile;
use crate::error::Result;
use crate::formulas::{Coalition, PathFormula, StateFormula};
use crate::structures::{
    for_each_product, product, AgentId, GameStructure, JointAction, State, StructureBuilder,
    Transition,
};

pub const ATOM_NAMES: [&str; 8] = ["p", "q", "r", "s", "t", "u", "v", "w"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// Exclusive control with the union rule.
    Union,
    Threshold,
    Table,
    /// Threshold or table, chosen per structure.
    Shared,
}

#[derive(Debug, Clone, Copy)]
pub struct StructureParams {
    pub min_agents: u32,
    pub max_agents: u32,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub transition: TransitionKind,
}

impl Default for StructureParams {
    fn default() -> Self {
        StructureParams {
            min_agents: 1,
            max_agents: 2,
            min_atoms: 1,
            max_atoms: 3,
            transition: TransitionKind::Shared,
        }
    }
}

/// A random structure with the full protocol.
pub fn structure<R: Rng>(rng: &mut R, params: &StructureParams) -> Result<GameStructure> {
    let n = rng.gen_range(params.min_agents..=params.max_agents);
    let m = rng.gen_range(params.min_atoms..=params.max_atoms);
    let mut b = StructureBuilder::numbered(n, ATOM_NAMES[..m].iter().copied())?;
    let full = b.vocab().full_mask();
    let kind = match params.transition {
        TransitionKind::Shared => {
            if rng.gen_bool(0.5) {
                TransitionKind::Threshold
            } else {
                TransitionKind::Table
            }
        }
        k => k,
    };
    let mut control = vec![0u64; n as usize];
    if kind == TransitionKind::Union {
        for p in 0..m {
            control[rng.gen_range(0..n as usize)] |= 1 << p;
        }
    } else {
        for c in control.iter_mut() {
            *c = rng.gen_range(0..=full);
        }
    }
    for (i, c) in control.iter().enumerate() {
        b = b.control_mask(AgentId(i as u32 + 1), *c)?;
    }
    b = match kind {
        TransitionKind::Union | TransitionKind::Shared => b,
        TransitionKind::Threshold => {
            let t = (0..m).map(|_| Some(rng.gen_range(0..=n))).collect();
            b.transition(Transition::Threshold(t))
        }
        TransitionKind::Table => {
            let options: Vec<Vec<crate::structures::Action>> = control
                .iter()
                .map(|c| {
                    crate::structures::submasks(*c)
                        .into_iter()
                        .map(crate::structures::Action)
                        .collect()
                })
                .collect();
            let joints = product(&options);
            let mut rows = HashMap::new();
            for s in 0..=full {
                for j in &joints {
                    rows.insert(
                        (State(s), JointAction(j.clone())),
                        State(rng.gen_range(0..=full)),
                    );
                }
            }
            b.transition(Transition::Table(rows))
        }
    };
    b.build()
}

#[derive(Debug, Clone)]
pub struct FormulaParams {
    pub atoms: Vec<String>,
    pub agents: Vec<AgentId>,
}

impl FormulaParams {
    pub fn for_structure(g: &GameStructure) -> Self {
        FormulaParams {
            atoms: g.vocab().names().to_vec(),
            agents: g.agents().to_vec(),
        }
    }
}

pub fn coalition<R: Rng>(rng: &mut R, agents: &[AgentId]) -> Coalition {
    Coalition::new(agents.iter().copied().filter(|_| rng.gen_bool(0.5)))
}

fn leaf<R: Rng>(rng: &mut R, atoms: &[String]) -> StateFormula {
    if atoms.is_empty() || rng.gen_ratio(1, 8) {
        StateFormula::True
    } else {
        StateFormula::atom(atoms.choose(rng).expect("nonempty").clone())
    }
}

/// ATL* state formula of depth at most `depth`.
pub fn state_formula<R: Rng>(rng: &mut R, p: &FormulaParams, depth: usize) -> StateFormula {
    if depth == 0 || rng.gen_ratio(1, 5) {
        return leaf(rng, &p.atoms);
    }
    match rng.gen_range(0..4) {
        0 => StateFormula::not(state_formula(rng, p, depth - 1)),
        1 => StateFormula::or(
            state_formula(rng, p, depth - 1),
            state_formula(rng, p, depth - 1),
        ),
        _ => StateFormula::coalition(coalition(rng, &p.agents), path_formula(rng, p, depth - 1)),
    }
}

/// ATL* path formula of depth at most `depth`, in canonical form.
pub fn path_formula<R: Rng>(rng: &mut R, p: &FormulaParams, depth: usize) -> PathFormula {
    if depth == 0 || rng.gen_ratio(1, 6) {
        return PathFormula::State(if depth == 0 {
            leaf(rng, &p.atoms)
        } else {
            state_formula(rng, p, depth)
        });
    }
    match rng.gen_range(0..5) {
        0 => PathFormula::not(path_formula(rng, p, depth - 1)),
        1 => PathFormula::or(
            path_formula(rng, p, depth - 1),
            path_formula(rng, p, depth - 1),
        ),
        2 | 3 => PathFormula::next(path_formula(rng, p, depth - 1)),
        _ => PathFormula::until(
            path_formula(rng, p, depth - 1),
            path_formula(rng, p, depth - 1),
        ),
    }
}

/// LTL formula (no coalition operator) of depth at most `depth`.
pub fn ltl_formula<R: Rng>(rng: &mut R, atoms: &[String], depth: usize) -> PathFormula {
    if depth == 0 || rng.gen_ratio(1, 6) {
        return PathFormula::State(leaf(rng, atoms));
    }
    match rng.gen_range(0..5) {
        0 => PathFormula::not(ltl_formula(rng, atoms, depth - 1)),
        1 => PathFormula::or(
            ltl_formula(rng, atoms, depth - 1),
            ltl_formula(rng, atoms, depth - 1),
        ),
        2 => PathFormula::next(ltl_formula(rng, atoms, depth - 1)),
        _ => PathFormula::until(
            ltl_formula(rng, atoms, depth - 1),
            ltl_formula(rng, atoms, depth - 1),
        ),
    }
}

/// ATL formula of depth at most `depth`.
pub fn atl_formula<R: Rng>(rng: &mut R, p: &FormulaParams, depth: usize) -> StateFormula {
    if depth == 0 || rng.gen_ratio(1, 5) {
        return leaf(rng, &p.atoms);
    }
    let choice = if depth >= 2 {
        rng.gen_range(0..4)
    } else {
        rng.gen_range(0..2)
    };
    match choice {
        0 => StateFormula::not(atl_formula(rng, p, depth - 1)),
        1 => StateFormula::or(
            atl_formula(rng, p, depth - 1),
            atl_formula(rng, p, depth - 1),
        ),
        2 => StateFormula::coalition(
            coalition(rng, &p.agents),
            PathFormula::next(PathFormula::State(atl_formula(rng, p, depth - 2))),
        ),
        _ => StateFormula::coalition(
            coalition(rng, &p.agents),
            PathFormula::until(
                PathFormula::State(atl_formula(rng, p, depth - 2)),
                PathFormula::State(atl_formula(rng, p, depth - 2)),
            ),
        ),
    }
}

/// Every ATL formula of depth at most `depth` over the given atoms and
/// agents, with every coalition over those agents.
pub fn all_atl_formulas(p: &FormulaParams, depth: usize) -> Vec<StateFormula> {
    let coalitions: Vec<Coalition> = (0u32..1 << p.agents.len())
        .map(|mask| {
            Coalition::new(
                p.agents
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, a)| *a),
            )
        })
        .collect();
    // by_depth[d]: formulas of depth exactly d
    let mut by_depth: Vec<Vec<StateFormula>> = Vec::new();
    let mut leaves = vec![StateFormula::True];
    leaves.extend(p.atoms.iter().map(|a| StateFormula::atom(a.clone())));
    by_depth.push(leaves);
    for d in 1..=depth {
        let mut level = Vec::new();
        let below: Vec<&StateFormula> = by_depth.iter().flatten().collect();
        for f in &by_depth[d - 1] {
            level.push(StateFormula::not(f.clone()));
        }
        for x in &below {
            for y in &below {
                let dx = crate::formulas::state_depth(x);
                let dy = crate::formulas::state_depth(y);
                if dx.max(dy) == d - 1 {
                    level.push(StateFormula::or((*x).clone(), (*y).clone()));
                }
            }
        }
        if d >= 2 {
            let inner: Vec<&StateFormula> = by_depth[..=d - 2].iter().flatten().collect();
            for c in &coalitions {
                for x in &by_depth[d - 2] {
                    level.push(StateFormula::coalition(
                        c.clone(),
                        PathFormula::next(PathFormula::State((*x).clone())),
                    ));
                }
                for x in &inner {
                    for y in &inner {
                        let top =
                            crate::formulas::state_depth(x).max(crate::formulas::state_depth(y));
                        if top == d - 2 {
                            level.push(StateFormula::coalition(
                                c.clone(),
                                PathFormula::until(
                                    PathFormula::State((*x).clone()),
                                    PathFormula::State((*y).clone()),
                                ),
                            ));
                        }
                    }
                }
            }
        }
        by_depth.push(level);
    }
    by_depth.into_iter().flatten().collect()
}

/// A uniformly random memoryless strategy for each coalition member over
/// `states`.
pub fn profile<R: Rng>(
    rng: &mut R,
    g: &GameStructure,
    coalition: &Coalition,
    states: &[State],
) -> Result<StrategyProfile> {
    let mut out = StrategyProfile::new();
    for agent in coalition.members() {
        out.add_agent(*agent);
        for s in states {
            let acts = g.enabled(*agent, *s)?;
            out.insert(*agent, *s, *acts.choose(rng).expect("nonempty protocol"));
        }
    }
    Ok(out)
}

/// Every memoryless strategy profile of the coalition over `states`, in
/// enumeration order (members in agent order, then states, then actions).
pub fn all_profiles(
    g: &GameStructure,
    coalition: &Coalition,
    states: &[State],
) -> Result<Vec<StrategyProfile>> {
    let mut slots = Vec::new();
    let mut options = Vec::new();
    for agent in g.agents() {
        if !coalition.contains(*agent) {
            continue;
        }
        for s in states {
            slots.push((*agent, *s));
            options.push(g.enabled(*agent, *s)?);
        }
    }
    let mut out = Vec::new();
    for_each_product(&options, |choice| {
        let mut p = StrategyProfile::new();
        for a in coalition.members() {
            p.add_agent(*a);
        }
        for ((agent, s), act) in slots.iter().zip(choice) {
            p.insert(*agent, *s, *act);
        }
        out.push(p);
        Ok(())
    })?;
    Ok(out)
}
