//! From shared to exclusive control.
//!
//! Every agent `i` of the shared structure gets private copies `c_i_p` of
//! the atoms it influences, and a new agent `*` owns the original atoms and
//! a `__turn` flag. One step of the shared structure becomes two: first the
//! agents write their copies while `*` raises the flag and keeps the
//! original atoms, then `*` applies the shared transition to the copies and
//! everyone else plays the empty action, which clears the copies again.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::checker::{Checker, Stats, StrategyProfile};
use crate::error::{Error, Result};
use crate::formulas::{tr_state, StateFormula};
use crate::structures::{
    Action, AgentId, GameStructure, HostedProtocol, LassoPath, Protocol, State, StructureBuilder,
    Transition, Vocabulary, TURN_ATOM,
};
use crate::Limits;

/// Name of the copy of `atom` owned by `agent`.
pub fn copy_atom_name(agent: AgentId, atom: &str) -> String {
    format!("c_{agent}_{atom}")
}

/// Bit positions of the original, copy and turn atoms inside the reduced
/// universe.
#[derive(Debug)]
struct Layout {
    /// `phi[p]`: position of source atom `p`.
    phi: Vec<u32>,
    /// `copies[i][p]`: position of `c_i_p`, if agent `i` controls `p`.
    copies: Vec<Vec<Option<u32>>>,
    turn: u32,
    phi_mask: u64,
}

impl Layout {
    fn embed(&self, s: u64) -> u64 {
        self.phi
            .iter()
            .enumerate()
            .filter(|(p, _)| s >> p & 1 == 1)
            .fold(0, |acc, (_, &q)| acc | 1 << q)
    }

    fn restrict(&self, s: u64) -> u64 {
        self.phi
            .iter()
            .enumerate()
            .filter(|(_, &q)| s >> q & 1 == 1)
            .fold(0, |acc, (p, _)| acc | 1 << p)
    }

    fn write_copies(&self, i: usize, a: u64) -> u64 {
        self.copies[i]
            .iter()
            .enumerate()
            .filter_map(|(p, c)| c.filter(|_| a >> p & 1 == 1))
            .fold(0, |acc, q| acc | 1 << q)
    }

    fn read_copies(&self, i: usize, s: u64) -> u64 {
        self.copies[i]
            .iter()
            .enumerate()
            .filter_map(|(p, c)| c.filter(|q| s >> q & 1 == 1).map(|_| p))
            .fold(0, |acc, p| acc | 1 << p)
    }

    fn turn_bit(&self) -> u64 {
        1 << self.turn
    }
}

/// The exclusive-control structure built from a shared-control one.
#[derive(Debug, Clone)]
pub struct EpcImage {
    pub epc: GameStructure,
    origin: Arc<GameStructure>,
    layout: Arc<Layout>,
    copy_atoms: BTreeMap<(AgentId, String), String>,
}

impl EpcImage {
    pub fn origin(&self) -> &GameStructure {
        &self.origin
    }

    /// `(agent, atom) -> copy atom name`.
    pub fn copy_atoms(&self) -> &BTreeMap<(AgentId, String), String> {
        &self.copy_atoms
    }

    pub fn turn_atom(&self) -> &'static str {
        TURN_ATOM
    }

    pub fn star_agent(&self) -> AgentId {
        AgentId::STAR
    }

    /// `s′ ∩ Φ`.
    pub fn restrict(&self, s: State) -> State {
        State(self.layout.restrict(s.0))
    }

    pub fn turn_holds(&self, s: State) -> bool {
        s.0 & self.layout.turn_bit() != 0
    }

    /// Lifts an action of source agent `i` to the corresponding copies.
    pub fn copy_action(&self, agent: AgentId, a: Action) -> Result<Action> {
        let i = self.origin.agent_index(agent)?;
        Ok(Action(self.layout.write_copies(i, a.0)))
    }

    /// Reads the action of source agent `i` off the copies in `s′`.
    pub fn read_action(&self, agent: AgentId, s: State) -> Result<Action> {
        let i = self.origin.agent_index(agent)?;
        Ok(Action(self.layout.read_copies(i, s.0)))
    }
}

/// Builds the exclusive-control image of `g`.
pub fn build_epc(g: &GameStructure, limits: &Limits) -> Result<EpcImage> {
    let vocab = g.vocab();
    let mut names: Vec<String> = vocab.names().to_vec();
    names.push(TURN_ATOM.to_string());
    let mut copy_atoms = BTreeMap::new();
    for (i, agent) in g.agents().iter().enumerate() {
        for p in vocab.atoms_of(g.control_at(i)) {
            let c = copy_atom_name(*agent, p);
            copy_atoms.insert((*agent, p.to_string()), c.clone());
            names.push(c);
        }
    }
    if names.len() > limits.max_atoms {
        return Err(Error::CapExceeded {
            what: "reduced atom universe",
            needed: names.len() as u128,
            limit: limits.max_atoms as u128,
        });
    }
    let mut agents: Vec<AgentId> = g.agents().to_vec();
    agents.push(AgentId::STAR);
    let mut builder =
        StructureBuilder::new(agents.iter().copied(), names)?.atom_cap(limits.max_atoms);
    let reduced = builder.vocab().clone();

    let phi: Vec<u32> = vocab
        .names()
        .iter()
        .map(|n| reduced.index_of(n).expect("original atom") as u32)
        .collect();
    let copies: Vec<Vec<Option<u32>>> = g
        .agents()
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            (0..vocab.len())
                .map(|p| {
                    if g.control_at(i) >> p & 1 == 1 {
                        reduced
                            .index_of(&copy_atom_name(*agent, vocab.name(p)))
                            .map(|q| q as u32)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    let turn = reduced.index_of(TURN_ATOM).expect("turn atom") as u32;
    let phi_mask = phi.iter().fold(0, |acc, q| acc | 1u64 << q);
    let layout = Arc::new(Layout {
        phi,
        copies,
        turn,
        phi_mask,
    });

    for (i, agent) in g.agents().iter().enumerate() {
        let mask = layout.write_copies(i, g.control_at(i));
        builder = builder.control_mask(*agent, mask)?;
    }
    builder = builder.control_mask(AgentId::STAR, layout.phi_mask | layout.turn_bit())?;

    let origin = Arc::new(g.clone());
    let n = g.agents().len();
    let (lay, src) = (Arc::clone(&layout), Arc::clone(&origin));
    let protocol = HostedProtocol::new("reduced", move |idx, s| {
        let turn = s.0 & lay.turn_bit() != 0;
        let base = State(lay.restrict(s.0));
        if idx < n {
            if turn {
                return Ok(vec![Action::EMPTY]);
            }
            let mut acts: Vec<Action> = src
                .enabled_at(idx, base)?
                .into_iter()
                .map(|a| Action(lay.write_copies(idx, a.0)))
                .collect();
            acts.sort();
            acts.dedup();
            return Ok(acts);
        }
        if !turn {
            return Ok(vec![Action((s.0 & lay.phi_mask) | lay.turn_bit())]);
        }
        let alpha: Vec<Action> = (0..n).map(|i| Action(lay.read_copies(i, s.0))).collect();
        // Copies outside the source protocol only arise off the canonical
        // paths; a missing table row then leaves the original atoms as they are.
        let next = src.transition_raw(base, &alpha).unwrap_or(base);
        Ok(vec![Action(lay.embed(next.0))])
    });
    let epc = builder
        .protocol(Protocol::Hosted(protocol))
        .transition(Transition::ExclusiveUnion)
        .build()?;
    Ok(EpcImage {
        epc,
        origin,
        layout,
        copy_atoms,
    })
}

/// The state of the reduced structure agreeing with `s` on the original
/// atoms and false elsewhere.
pub fn canonical_state(img: &EpcImage, s: State) -> State {
    State(img.layout.embed(s.0))
}

pub fn is_canonical(img: &EpcImage, s: State) -> bool {
    s.0 & !img.layout.phi_mask == 0
}

/// Puts a lasso into a form with an even prefix and an even cycle.
fn even_form(l: &LassoPath) -> LassoPath {
    let mut prefix = l.prefix.clone();
    let mut cycle = l.cycle.clone();
    if prefix.len() % 2 == 1 {
        prefix.push(cycle[0]);
        cycle.rotate_left(1);
    }
    if cycle.len() % 2 == 1 {
        cycle.extend_from_within(..);
    }
    LassoPath::new(prefix, cycle).expect("nonempty cycle")
}

/// The source path `λ[k] = λ′[2k]∣Φ` of a path of the reduced structure.
pub fn project_path(img: &EpcImage, lambda: &LassoPath) -> Result<LassoPath> {
    if lambda.cycle.is_empty() {
        return Err(Error::MalformedPath("empty cycle".into()));
    }
    let even = even_form(lambda);
    for k in 0..even.len() {
        if img.turn_holds(even.at(k)) != (k % 2 == 1) {
            return Err(Error::MalformedPath(format!(
                "turn must hold exactly at odd positions; position {k} violates this"
            )));
        }
    }
    let half =
        |xs: &[State]| -> Vec<State> { xs.iter().step_by(2).map(|s| img.restrict(*s)).collect() };
    LassoPath::new(half(&even.prefix), half(&even.cycle))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether `λ[k] = λ′[2k]∣Φ = λ′[2k+1]∣Φ` for every `k`.
pub fn check_dagger(img: &EpcImage, lambda: &LassoPath, reduced: &LassoPath) -> bool {
    // Past both prefixes the pair is periodic in k with period dividing
    // lcm(|cycle λ|, |cycle λ′|).
    let (c, c2) = (lambda.cycle.len(), reduced.cycle.len());
    let bound = lambda.prefix.len() + reduced.prefix.len().div_ceil(2) + c / gcd(c, c2) * c2;
    (0..bound).all(|k| {
        let s = lambda.at(k);
        img.restrict(reduced.at(2 * k)) == s && img.restrict(reduced.at(2 * k + 1)) == s
    })
}

/// Whether every step of the lasso is a transition of the reduced structure.
pub fn is_path_of_epc(img: &EpcImage, reduced: &LassoPath) -> Result<bool> {
    for k in 0..reduced.len() {
        let (s, t) = (reduced.at(k), reduced.at(reduced.next_position(k)));
        if !img.epc.is_step(s, t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A path of the reduced structure that satisfies (†) for `λ` and starts in
/// the canonical image of `λ[0]`.
pub fn is_canonical_path(img: &EpcImage, lambda: &LassoPath, reduced: &LassoPath) -> Result<bool> {
    Ok(reduced.at(0) == canonical_state(img, lambda.at(0))
        && check_dagger(img, lambda, reduced)
        && is_path_of_epc(img, reduced)?)
}

/// `σ′ᵢ(s′) = copies of σᵢ(s′∣Φ)` when the turn flag is down, `∅` otherwise.
/// Defined on the reduced states reachable from the canonical images of the
/// states the profile covers.
pub fn lift_strategy(img: &EpcImage, profile: &StrategyProfile) -> Result<StrategyProfile> {
    let mut roots = BTreeSet::new();
    for (_, strategy) in profile.iter() {
        roots.extend(strategy.keys().map(|s| canonical_state(img, *s)));
    }
    let mut domain = BTreeSet::new();
    for r in roots {
        if !domain.contains(&r) {
            domain.extend(img.epc.reachable(r)?);
        }
    }
    let mut out = StrategyProfile::new();
    for (agent, strategy) in profile.iter() {
        out.add_agent(agent);
        for &s in &domain {
            let a = if img.turn_holds(s) {
                Action::EMPTY
            } else {
                match strategy.get(&img.restrict(s)) {
                    Some(a) => img.copy_action(agent, *a)?,
                    None => continue,
                }
            };
            out.insert(agent, s, a);
        }
    }
    Ok(out)
}

/// `σᵢ(s) = {p | c_i_p ∈ σ′ᵢ(s′⋆)}` for every `s` whose canonical image the
/// reduced profile covers.
pub fn lower_strategy(img: &EpcImage, profile: &StrategyProfile) -> Result<StrategyProfile> {
    let mut out = StrategyProfile::new();
    for (agent, strategy) in profile.iter() {
        out.add_agent(agent);
        for (s, a) in strategy {
            if is_canonical(img, *s) {
                out.insert(agent, img.restrict(*s), img.read_action(agent, State(a.0))?);
            }
        }
    }
    Ok(out)
}

/// Both sides of the equivalence for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub formula: String,
    pub translated: String,
    pub state: String,
    pub shared_verdict: bool,
    pub exclusive_verdict: bool,
    pub agree: bool,
    #[serde(skip)]
    pub shared_time: Duration,
    #[serde(skip)]
    pub exclusive_time: Duration,
    pub shared_stats: Stats,
    pub exclusive_stats: Stats,
}

/// Checks `φ` at `s` on `g` and `tr(φ)` at the canonical image of `s` on
/// the reduced structure.
pub fn verify_theorem(
    g: &GameStructure,
    s: State,
    phi: &StateFormula,
    limits: &Limits,
) -> Result<TheoremReport> {
    let img = build_epc(g, limits)?;
    verify_on_image(&img, s, phi, limits)
}

/// As [`verify_theorem`], reusing a prebuilt image.
pub fn verify_on_image(
    img: &EpcImage,
    s: State,
    phi: &StateFormula,
    limits: &Limits,
) -> Result<TheoremReport> {
    let g = img.origin();
    let t0 = Instant::now();
    let left = Checker::new(g).with_limits(*limits).check(s, phi)?;
    let shared_time = t0.elapsed();
    let translated = tr_state(phi);
    let t1 = Instant::now();
    let right = Checker::new(&img.epc)
        .with_limits(*limits)
        .check(canonical_state(img, s), &translated)?;
    let exclusive_time = t1.elapsed();
    Ok(TheoremReport {
        formula: phi.to_string(),
        translated: translated.to_string(),
        state: g.vocab().render(s.0),
        shared_verdict: left.holds,
        exclusive_verdict: right.holds,
        agree: left.holds == right.holds,
        shared_time,
        exclusive_time,
        shared_stats: left.stats,
        exclusive_stats: right.stats,
    })
}

/// Reduced vocabulary rendering helper.
pub fn reduced_vocab(img: &EpcImage) -> &Vocabulary {
    img.epc.vocab()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::parse_state;

    fn a(i: u32) -> AgentId {
        AgentId(i)
    }

    /// Two agents over `p, q`; agent 1 controls `p`, agent 2 both; `p` needs
    /// more than `mp` votes and `q` more than zero.
    fn shared(mp: u32) -> GameStructure {
        StructureBuilder::numbered(2, ["p", "q"])
            .unwrap()
            .control(a(1), &["p"])
            .unwrap()
            .control(a(2), &["p", "q"])
            .unwrap()
            .thresholds(&[("p", mp), ("q", 0)])
            .unwrap()
            .build()
            .unwrap()
    }

    fn st(img: &EpcImage, atoms: &[&str]) -> State {
        img.epc.vocab().state(atoms.iter().copied()).unwrap()
    }

    fn src(g: &GameStructure, atoms: &[&str]) -> State {
        g.vocab().state(atoms.iter().copied()).unwrap()
    }

    #[test]
    fn universe_and_partition() {
        let g = shared(0);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let names: Vec<&str> = img.epc.vocab().names().iter().map(String::as_str).collect();
        assert_eq!(names, ["__turn", "c_1_p", "c_2_p", "c_2_q", "p", "q"]);
        assert!(img.epc.is_exclusive());
        assert_eq!(img.epc.agents().len(), 3);
        assert_eq!(
            img.epc.controlled(AgentId::STAR).unwrap(),
            img.epc.vocab().mask_of(["p", "q", "__turn"]).unwrap()
        );
        assert_eq!(
            img.epc.controlled(a(2)).unwrap(),
            img.epc.vocab().mask_of(["c_2_p", "c_2_q"]).unwrap()
        );
    }

    #[test]
    fn turn_one_protocol_is_pinned() {
        let img = build_epc(&shared(0), &Limits::default()).unwrap();
        let s = st(&img, &["c_1_p", "c_2_q", "p", "__turn"]);
        assert_eq!(img.epc.enabled(a(1), s).unwrap(), vec![Action::EMPTY]);
        assert_eq!(img.epc.enabled(a(2), s).unwrap(), vec![Action::EMPTY]);
        let star = img.epc.enabled(AgentId::STAR, s).unwrap();
        assert_eq!(star, vec![Action(st(&img, &["p", "q"]).0)]);
        let s0 = st(&img, &["p"]);
        assert_eq!(
            img.epc.enabled(AgentId::STAR, s0).unwrap(),
            vec![Action(st(&img, &["p", "__turn"]).0)]
        );
        assert_eq!(img.epc.enabled(a(2), s0).unwrap().len(), 4);
    }

    #[test]
    fn canonical_states() {
        let g = shared(0);
        let img = build_epc(&g, &Limits::default()).unwrap();
        assert_eq!(canonical_state(&img, src(&g, &["p"])), st(&img, &["p"]));
        assert_eq!(canonical_state(&img, State::EMPTY), State::EMPTY);
        for s in g.all_states() {
            assert!(!img.turn_holds(canonical_state(&img, s)));
            assert_eq!(img.restrict(canonical_state(&img, s)), s);
        }
        assert!(!is_canonical(&img, st(&img, &["p", "c_1_p"])));
    }

    fn lasso(img: &EpcImage, prefix: &[&[&str]], cycle: &[&[&str]]) -> LassoPath {
        LassoPath::new(
            prefix.iter().map(|s| st(img, s)).collect(),
            cycle.iter().map(|s| st(img, s)).collect(),
        )
        .unwrap()
    }

    const TAIL: [&[&str]; 2] = [
        &["p", "q"],
        &["c_1_p", "c_2_p", "c_2_q", "p", "q", "__turn"],
    ];

    #[test]
    fn worked_sequences() {
        let g = shared(0);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let lambda = LassoPath::new(vec![src(&g, &["p"])], vec![src(&g, &["p", "q"])]).unwrap();
        let seq_a = lasso(
            &img,
            &[&["p"], &["c_1_p", "c_2_p", "c_2_q", "p", "__turn"]],
            &TAIL,
        );
        let seq_b = lasso(&img, &[&["p"], &["c_1_p", "c_2_q", "p", "__turn"]], &TAIL);
        let seq_c = lasso(
            &img,
            &[&["p", "c_1_p"], &["c_1_p", "c_2_q", "p", "__turn"]],
            &TAIL,
        );
        let seq_d = lasso(&img, &[&["p"], &["c_2_q", "p", "__turn"]], &TAIL);

        for l in [&seq_a, &seq_b] {
            assert_eq!(project_path(&img, l).unwrap(), lambda);
            assert!(check_dagger(&img, &lambda, l));
            assert!(is_path_of_epc(&img, l).unwrap());
            assert!(is_canonical_path(&img, &lambda, l).unwrap());
        }
        assert!(check_dagger(&img, &lambda, &seq_c));
        assert!(is_path_of_epc(&img, &seq_c).unwrap());
        assert!(!is_canonical_path(&img, &lambda, &seq_c).unwrap());
        assert!(check_dagger(&img, &lambda, &seq_d));
        assert!(!is_path_of_epc(&img, &seq_d).unwrap());
    }

    #[test]
    fn projection_rejects_broken_turn_discipline() {
        let img = build_epc(&shared(0), &Limits::default()).unwrap();
        let bad = lasso(&img, &[], &[&["p"]]);
        assert!(matches!(
            project_path(&img, &bad),
            Err(Error::MalformedPath(_))
        ));
        let odd = lasso(
            &img,
            &[&["p"]],
            &[&["p", "__turn"], &["p"], &["p", "__turn"]],
        );
        assert!(project_path(&img, &odd).is_err());
    }

    #[test]
    fn idle_run_projects_to_constant_path() {
        let g = shared(0);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let s = canonical_state(&img, src(&g, &["q"]));
        let mut idle = StrategyProfile::new();
        for t in img.epc.reachable(s).unwrap() {
            for agent in img.epc.agents() {
                let acts = img.epc.enabled(*agent, t).unwrap();
                // every source agent re-asserts the current values it controls
                let pick = if agent.is_star() || img.turn_holds(t) {
                    acts[0]
                } else {
                    let own = g.controlled(*agent).unwrap() & img.restrict(t).0;
                    img.copy_action(*agent, Action(own)).unwrap()
                };
                idle.insert(*agent, t, pick);
            }
        }
        let run = img.epc.run(s, &idle).unwrap();
        let lambda = project_path(&img, &run).unwrap();
        for k in 0..lambda.len() {
            assert_eq!(lambda.at(k), src(&g, &["q"]));
        }
    }

    #[test]
    fn lift_and_lower() {
        let g = shared(0);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let mut sigma = StrategyProfile::new();
        for s in g.all_states() {
            sigma.insert(a(1), s, Action(src(&g, &["p"]).0));
        }
        let lifted = lift_strategy(&img, &sigma).unwrap();
        for (s, act) in lifted.strategy(a(1)).unwrap() {
            let expect = if img.turn_holds(*s) {
                State::EMPTY
            } else {
                st(&img, &["c_1_p"])
            };
            assert_eq!(act.0, expect.0);
        }
        assert_eq!(lower_strategy(&img, &lifted).unwrap(), sigma);
        assert!(lift_strategy(&img, &StrategyProfile::new())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn reduction_agrees_on_simple_formulas() {
        let g = shared(1);
        for s in g.all_states() {
            for f in ["<<1,2>> X p", "<<1>> X q", "<<2>> G F q", "<<>> (true U p)"] {
                let r =
                    verify_theorem(&g, s, &parse_state(f).unwrap(), &Limits::default()).unwrap();
                assert!(r.agree, "{f} at {s:?}: {r:?}");
            }
        }
    }

    #[test]
    fn coalition_nested_under_until_is_not_preserved() {
        // Halfway through a doubled step the opponent's copy already fixes the
        // next p, so `<<>> X X p` can hold there although `<<>> X p` fails in
        // the source state.
        let g = StructureBuilder::numbered(2, ["p", "q"])
            .unwrap()
            .control(a(1), &["p"])
            .unwrap()
            .control(a(2), &["q"])
            .unwrap()
            .build()
            .unwrap();
        let phi = parse_state("<<2>> (~<<>> X p U q)").unwrap();
        let r = verify_theorem(&g, State::EMPTY, &phi, &Limits::default()).unwrap();
        assert!(r.shared_verdict);
        assert!(!r.exclusive_verdict);
    }

    #[test]
    fn atom_cap_applies_to_reduced_universe() {
        let limits = Limits {
            max_atoms: 5,
            ..Limits::default()
        };
        assert!(build_epc(&shared(0), &limits).unwrap_err().is_resource());
    }
}
