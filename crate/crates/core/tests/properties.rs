mod common;

use std::collections::BTreeSet;

use propctl::checker::{
    check_atl_fixpoint, check_universal_ltl, eval_ltl_on_lasso, ewin, induced, Checker, Engine,
};
use propctl::formulas::{
    parse_path, parse_state, tr_path, tr_state, Coalition, Formula, NodeCounts, PathFormula,
    StateFormula,
};
use propctl::games::GoalTable;
use propctl::random::{self, FormulaParams, StructureParams, TransitionKind};
use propctl::reduction::{
    build_epc, canonical_state, is_canonical, lift_strategy, lower_strategy, verify_on_image,
};
use propctl::structures::{AgentId, GameStructure, JointAction, State, Transition};
use propctl::Limits;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn params() -> FormulaParams {
    FormulaParams {
        atoms: vec!["p".into(), "q".into(), "r".into()],
        agents: vec![AgentId(1), AgentId(2)],
    }
}

fn structure(r: &mut ChaCha8Rng, kind: TransitionKind, max_atoms: usize) -> GameStructure {
    random::structure(
        r,
        &StructureParams {
            max_atoms,
            transition: kind,
            ..StructureParams::default()
        },
    )
    .unwrap()
}

fn random_state(r: &mut ChaCha8Rng, g: &GameStructure) -> State {
    State(r.gen_range(0..=g.vocab().full_mask()))
}

fn random_joint(r: &mut ChaCha8Rng, g: &GameStructure, s: State) -> JointAction {
    JointAction(
        g.agents()
            .iter()
            .map(|a| *g.enabled(*a, s).unwrap().choose(r).unwrap())
            .collect(),
    )
}

fn all_agents(g: &GameStructure) -> Coalition {
    Coalition::new(g.agents().iter().copied())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>(), depth in 0usize..6) {
        let mut r = rng(seed);
        let f = random::state_formula(&mut r, &params(), depth);
        prop_assert_eq!(parse_state(&f.to_string()).unwrap(), f.clone());
        let p = random::path_formula(&mut r, &params(), depth);
        prop_assert_eq!(parse_path(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn translation_doubles_next_only(seed in any::<u64>(), depth in 0usize..6) {
        let mut r = rng(seed);
        let f = random::state_formula(&mut r, &params(), depth);
        let before = NodeCounts::of(&Formula::State(f.clone()));
        let after = NodeCounts::of(&Formula::State(tr_state(&f)));
        prop_assert_eq!(after.nexts, 2 * before.nexts);
        prop_assert_eq!(NodeCounts { nexts: 0, ..after }, NodeCounts { nexts: 0, ..before });
    }

    #[test]
    fn threshold_counts_votes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Threshold, 3);
        let Transition::Threshold(m) = g.transition() else { unreachable!() };
        let s = random_state(&mut r, &g);
        let joint = random_joint(&mut r, &g, s);
        let next = g.apply(s, &joint).unwrap();
        for p in 0..g.vocab().len() {
            let controllers = (0..g.agents().len()).filter(|&i| g.control_at(i) >> p & 1 == 1).count();
            let votes = joint.0.iter().filter(|a| a.0 >> p & 1 == 1).count() as u32;
            let expected = if controllers == 0 {
                s.holds(p)
            } else {
                votes > m[p].unwrap()
            };
            prop_assert_eq!(next.holds(p), expected, "atom {}", p);
        }
    }

    #[test]
    fn union_keeps_uncontrolled_and_unions_actions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Union, 3);
        prop_assert!(g.is_exclusive());
        let s = random_state(&mut r, &g);
        let joint = random_joint(&mut r, &g, s);
        let union = joint.0.iter().fold(0u64, |acc, a| acc | a.0);
        prop_assert_eq!(g.apply(s, &joint).unwrap().0, union | (s.0 & g.uncontrolled()));
    }

    #[test]
    fn lasso_agrees_with_universal_ltl(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let states: Vec<State> = g.all_states().collect();
        let profile = random::profile(&mut r, &g, &all_agents(&g), &states).unwrap();
        let s = random_state(&mut r, &g);
        let psi = random::ltl_formula(&mut r, g.vocab().names(), depth);
        let lasso = g.run(s, &profile).unwrap();
        let on_lasso = eval_ltl_on_lasso(g.vocab(), &lasso, &psi).unwrap();
        let k = induced(&g, &profile, &all_agents(&g), &[s]).unwrap();
        prop_assert!(k.states().iter().all(|t| k.steps(*t).unwrap().len() == 1));
        prop_assert_eq!(check_universal_ltl(&k, s, &psi).unwrap(), on_lasso);
    }

    #[test]
    fn universal_ltl_matches_closure_tableau(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let c = random::coalition(&mut r, g.agents());
        let states: Vec<State> = g.all_states().collect();
        let profile = random::profile(&mut r, &g, &c, &states).unwrap();
        let s = random_state(&mut r, &g);
        let psi = random::ltl_formula(&mut r, g.vocab().names(), depth);
        let k = induced(&g, &profile, &c, &[s]).unwrap();
        let steps = k.states().iter().map(|t| (*t, k.steps(*t).unwrap())).collect();
        prop_assert_eq!(
            check_universal_ltl(&k, s, &psi).unwrap(),
            common::all_paths(g.vocab(), &steps, s, &psi)
        );
    }

    #[test]
    fn empty_coalition_is_universal_quantification(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let s = random_state(&mut r, &g);
        let psi = random::ltl_formula(&mut r, g.vocab().names(), depth);
        let phi = StateFormula::coalition(Coalition::empty(), psi.clone());
        let steps = common::steps_under(&g, None);
        prop_assert_eq!(
            Checker::new(&g).check(s, &phi).unwrap().holds,
            common::all_paths(g.vocab(), &steps, s, &psi)
        );
    }

    #[test]
    fn larger_coalitions_can_do_more(seed in any::<u64>(), depth in 0usize..3) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 2);
        let s = random_state(&mut r, &g);
        let psi = random::ltl_formula(&mut r, g.vocab().names(), depth);
        let c = random::coalition(&mut r, g.agents());
        let bigger = Coalition::new(c.members().iter().copied().chain([AgentId(1)]));
        let small = Checker::new(&g).check(s, &StateFormula::coalition(c, psi.clone())).unwrap().holds;
        let large = Checker::new(&g).check(s, &StateFormula::coalition(bigger, psi)).unwrap().holds;
        prop_assert!(!small || large);
    }

    #[test]
    fn force_is_monotone_in_the_target(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let c = random::coalition(&mut r, g.agents());
        let fp = FormulaParams::for_structure(&g);
        let a = random::atl_formula(&mut r, &fp, 2);
        let b = random::atl_formula(&mut r, &fp, 2);
        let narrow = StateFormula::coalition(c.clone(), PathFormula::next(PathFormula::State(a.clone())));
        let wide = StateFormula::coalition(c, PathFormula::next(PathFormula::State(StateFormula::or(a, b))));
        let narrow = check_atl_fixpoint(&g, &narrow).unwrap();
        let wide = check_atl_fixpoint(&g, &wide).unwrap();
        prop_assert!(narrow.is_subset(&wide));
    }

    #[test]
    fn fixpoint_agrees_with_enumeration(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 2);
        let phi = random::atl_formula(&mut r, &FormulaParams::for_structure(&g), depth);
        let fix = Checker::new(&g).satisfying_states(&phi).unwrap().0;
        let en = Checker::new(&g).with_engine(Engine::Enumeration).satisfying_states(&phi).unwrap().0;
        prop_assert_eq!(fix, en);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ewin_matches_brute_force(seed in any::<u64>(), depth in 0usize..3) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 2);
        let goal = random::ltl_formula(&mut r, g.vocab().names(), depth);
        let mut goals = GoalTable::new();
        goals.insert(AgentId(1), goal.clone());
        let s = random_state(&mut r, &g);
        let out = ewin(&g, &goals, AgentId(1), s).unwrap();
        prop_assert_eq!(out.holds, common::brute_force_ewin(&g, AgentId(1), &goal, s));
        if let Some(w) = out.witness {
            // the witness itself wins
            let k = induced(&g, &w, &Coalition::new([AgentId(1)]), &[s]).unwrap();
            prop_assert!(check_universal_ltl(&k, s, &goal).unwrap());
        }
    }

    #[test]
    fn reduced_steps_alternate_and_agree_on_phi(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let img = build_epc(&g, &Limits::default()).unwrap();
        for s in g.all_states() {
            let c = canonical_state(&img, s);
            let mut two_steps = BTreeSet::new();
            for mid in img.epc.successors(c).unwrap() {
                prop_assert!(img.turn_holds(mid));
                prop_assert_eq!(img.restrict(mid), s);
                for end in img.epc.successors(mid).unwrap() {
                    prop_assert!(is_canonical(&img, end));
                    two_steps.insert(img.restrict(end));
                }
            }
            prop_assert_eq!(two_steps, g.successors(s).unwrap());
        }
    }

    #[test]
    fn lowering_undoes_lifting(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let c = random::coalition(&mut r, g.agents());
        let states: Vec<State> = g.all_states().collect();
        let sigma = random::profile(&mut r, &g, &c, &states).unwrap();
        let lifted = lift_strategy(&img, &sigma).unwrap();
        prop_assert_eq!(lower_strategy(&img, &lifted).unwrap(), sigma);
    }

    #[test]
    fn translated_formula_agrees_on_the_reduction(seed in any::<u64>(), depth in 0usize..4) {
        let mut r = rng(seed);
        let g = structure(&mut r, TransitionKind::Shared, 3);
        let img = build_epc(&g, &Limits::default()).unwrap();
        let phi = random::state_formula(&mut r, &FormulaParams::for_structure(&g), depth);
        let s = random_state(&mut r, &g);
        let report = verify_on_image(&img, s, &phi, &Limits::default()).unwrap();
        prop_assert!(report.agree, "{} at {}", report.formula, report.state);
    }

    #[test]
    fn translating_paths_doubles_next_only(seed in any::<u64>(), depth in 0usize..5) {
        let mut r = rng(seed);
        let p = random::path_formula(&mut r, &params(), depth);
        let before = NodeCounts::of(&Formula::Path(p.clone()));
        let after = NodeCounts::of(&Formula::Path(tr_path(&p)));
        prop_assert_eq!(after.nexts, 2 * before.nexts);
        prop_assert_eq!(after.total() - after.nexts, before.total() - before.nexts);
    }
}
