use super::*;
use crate::formulas::{parse_path, parse_state};
use crate::structures::{Action, Protocol, StructureBuilder};

fn a(i: u32) -> AgentId {
    AgentId(i)
}

fn example1() -> GameStructure {
    StructureBuilder::numbered(2, ["p", "q"])
        .unwrap()
        .control(a(1), &["p"])
        .unwrap()
        .control(a(2), &["p", "q"])
        .unwrap()
        .thresholds(&[("p", 1), ("q", 0)])
        .unwrap()
        .build()
        .unwrap()
}

/// Agent 1 controls `p`, agent 2 controls `q`, union transition.
fn split_pq() -> GameStructure {
    StructureBuilder::numbered(2, ["p", "q"])
        .unwrap()
        .control(a(1), &["p"])
        .unwrap()
        .control(a(2), &["q"])
        .unwrap()
        .build()
        .unwrap()
}

fn both_engines(g: &GameStructure, s: State, f: &str) -> bool {
    let phi = parse_state(f).unwrap();
    let auto = Checker::new(g).check(s, &phi).unwrap().holds;
    let enumerated = Checker::new(g)
        .with_engine(Engine::Enumeration)
        .check(s, &phi)
        .unwrap()
        .holds;
    assert_eq!(auto, enumerated, "engines disagree on {f} at {s:?}");
    auto
}

#[test]
fn grand_coalition_forces_p_everywhere() {
    let g = example1();
    for s in g.all_states() {
        assert!(both_engines(&g, s, "<<1,2>> X p"));
    }
    let all: BTreeSet<State> = g.all_states().collect();
    assert_eq!(
        check_atl_fixpoint(&g, &parse_state("<<1,2>> X p").unwrap()).unwrap(),
        all
    );
}

#[test]
fn agent_one_cannot_force_q() {
    let g = example1();
    for s in g.all_states() {
        assert!(both_engines(&g, s, "~<<1>> X q"));
    }
    assert!(check_atl_fixpoint(&g, &parse_state("<<1>> X q").unwrap())
        .unwrap()
        .is_empty());
}

#[test]
fn atoms_are_self_dual() {
    let g = example1();
    for s in g.all_states() {
        let p = check_state(&g, s, &parse_state("p").unwrap()).unwrap();
        let np = check_state(&g, s, &parse_state("~p").unwrap()).unwrap();
        assert_eq!(p, s.holds(g.vocab().require("p").unwrap()));
        assert_ne!(p, np);
    }
}

#[test]
fn empty_coalition_eventually_when_p_is_forced() {
    // agent 1 may only ever set p
    let mut table = BTreeMap::new();
    for s in 0..4u64 {
        table.insert((a(1), State(s)), vec![Action(1)]);
        table.insert((a(2), State(s)), vec![Action(0), Action(2)]);
    }
    let g = StructureBuilder::numbered(2, ["p", "q"])
        .unwrap()
        .control(a(1), &["p"])
        .unwrap()
        .control(a(2), &["q"])
        .unwrap()
        .protocol(Protocol::Explicit(table))
        .build()
        .unwrap();
    let all: BTreeSet<State> = g.all_states().collect();
    let f = parse_state("<<>> (true U p)").unwrap();
    assert_eq!(check_atl_fixpoint(&g, &f).unwrap(), all);
    for s in g.all_states() {
        assert!(both_engines(&g, s, "<<>> (true U p)"));
        assert!(both_engines(&g, s, "<<>> X G p"));
        // agent 2 may keep q off forever
        assert_eq!(both_engines(&g, s, "<<>> F q"), s.0 & 2 != 0);
    }
}

#[test]
fn star_formulas_need_enumeration() {
    let g = split_pq();
    let s = State(0);
    // agent 1 alone keeps p on forever, but cannot make q recur
    assert!(both_engines(&g, s, "<<1>> X G p"));
    assert!(both_engines(&g, s, "<<1>> G F p"));
    assert!(!both_engines(&g, s, "<<1>> G F q"));
    assert!(both_engines(&g, s, "<<1,2>> G F (p & q)"));
    // revisiting the empty state would need a different move the second time
    assert!(!both_engines(&g, s, "<<1,2>> (X (~p & ~q) & X X (p & q))"));
    assert!(both_engines(&g, s, "<<1,2>> (X (p & ~q) & X X (p & q))"));
}

#[test]
fn nested_coalitions() {
    let g = split_pq();
    assert!(both_engines(&g, State(0), "<<2>> (~<<>> X p U q)"));
    assert!(both_engines(&g, State(0), "<<1>> X <<2>> X q"));
    assert!(!both_engines(&g, State(0), "<<>> X <<1>> X q"));
}

#[test]
fn checker_rejects_foreign_symbols() {
    let g = example1();
    assert!(matches!(
        check_state(&g, State(0), &parse_state("r").unwrap()),
        Err(Error::UnknownAtom(_))
    ));
    assert!(matches!(
        check_state(&g, State(0), &parse_state("<<3>> X p").unwrap()),
        Err(Error::UnknownAgent(_))
    ));
    assert!(matches!(
        check_atl_fixpoint(&g, &parse_state("<<1>> X X p").unwrap()),
        Err(Error::Contract(_))
    ));
}

#[test]
fn strategy_cap_is_enforced() {
    let g = example1();
    let limits = Limits {
        max_strategies: 3,
        ..Limits::default()
    };
    let err = Checker::new(&g)
        .with_limits(limits)
        .check(State(0), &parse_state("<<2>> G F q").unwrap())
        .unwrap_err();
    assert!(err.is_resource());
}

#[test]
fn ewin_examples() {
    let g = split_pq();
    let mut goals = GoalTable::new();
    goals.insert(a(1), parse_path("X p").unwrap());
    goals.insert(a(2), parse_path("X (q & ~q)").unwrap());
    let out = ewin(&g, &goals, a(1), State(0)).unwrap();
    assert!(out.holds);
    let w = out.witness.unwrap();
    assert!(w.action(a(1), State(0)).unwrap().0 & 1 == 1);
    let out = ewin(&g, &goals, a(2), State(0)).unwrap();
    assert!(!out.holds && out.witness.is_none());

    let e1 = example1();
    let mut goals = GoalTable::new();
    goals.insert(a(1), parse_path("X q").unwrap());
    for s in e1.all_states() {
        assert!(!ewin(&e1, &goals, a(1), s).unwrap().holds);
    }
    assert!(matches!(
        ewin(&e1, &goals, a(2), State(0)),
        Err(Error::MissingGoal(_))
    ));
}

#[test]
fn ewin_witness_is_first_in_order() {
    // X (p | q) for agent 1: the first strategy playing {p} at the root wins
    let g = split_pq();
    let out = Checker::new(&g)
        .winning_strategy(a(1), &parse_path("X (p | q)").unwrap(), State(0))
        .unwrap();
    let w = out.witness.unwrap();
    // reachable states are all four; every digit stays 0 except the root's
    assert_eq!(w.action(a(1), State(0)), Some(Action(1)));
    for s in [1, 2, 3] {
        assert_eq!(w.action(a(1), State(s)), Some(Action(0)));
    }
}

#[test]
fn induced_examples() {
    let g = example1();
    let mut sigma = StrategyProfile::new();
    for s in g.all_states() {
        sigma.insert(a(1), s, Action(1));
    }
    let k = induced(&g, &sigma, &Coalition::new([a(1)]), &[State(0)]).unwrap();
    let all: BTreeSet<State> = g.all_states().collect();
    assert_eq!(k.steps(State(0)).unwrap(), all);

    let k = induced(
        &g,
        &StrategyProfile::new(),
        &Coalition::empty(),
        &[State(0)],
    )
    .unwrap();
    for s in k.states() {
        assert_eq!(k.steps(*s).unwrap(), g.successors(*s).unwrap());
    }

    for s in g.all_states() {
        sigma.insert(a(2), s, Action(2));
    }
    let k = induced(&g, &sigma, &Coalition::new([a(1), a(2)]), &[State(0)]).unwrap();
    for s in k.states() {
        assert_eq!(k.steps(*s).unwrap().len(), 1);
    }

    let err = induced(&g, &sigma, &Coalition::new([a(1)]), &[State(0)]).unwrap_err();
    assert!(matches!(err, Error::Strategy(_)));
}

#[test]
fn universal_ltl_examples() {
    let vocab = Arc::new(Vocabulary::new(["p"]).unwrap());
    let p = State(1);
    let np = State(0);
    let steps = BTreeMap::from([(p, BTreeSet::from([p])), (np, BTreeSet::from([p, np]))]);
    let k = InducedStructure::from_steps(Arc::clone(&vocab), steps).unwrap();
    let f = |s: &str| parse_path(s).unwrap();
    assert!(check_universal_ltl(&k, p, &f("true U p")).unwrap());
    assert!(!check_universal_ltl(&k, np, &f("X p")).unwrap());
    assert!(!check_universal_ltl(&k, np, &f("F p")).unwrap());
    assert!(check_universal_ltl(&k, np, &f("F G p | G ~p")).unwrap());
    assert!(matches!(
        check_universal_ltl(&k, np, &f("<<>> X p")),
        Err(Error::Contract(_))
    ));
}
