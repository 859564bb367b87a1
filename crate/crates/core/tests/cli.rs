use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use propctl::cli::{parse, parse_strategy, print_strategy, sidecar_path};
use propctl::formulas::{parse_state, tr_state};
use propctl::reduction::{build_epc, canonical_state, lift_strategy};
use propctl::structures::{AgentId, State, StrategyProfile};
use propctl::Limits;

fn games() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("games")
}

fn game(name: &str) -> PathBuf {
    games().join(format!("{name}.game"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_propctl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn example_one_grand_coalition_and_single_agent() {
    let doc = game("example1");
    for s in ["{}", "{p}", "{q}", "{p,q}"] {
        let o = run(&["check", p(&doc), "<<1,2>> X p", "--state", s]);
        assert_eq!(o.status.code(), Some(0), "{s}");
        assert!(stdout(&o).contains("verdict: true"));
        let o = run(&["check", p(&doc), "<<1>> X q", "--state", s]);
        assert_eq!(o.status.code(), Some(1), "{s}");
        assert!(stdout(&o).contains("verdict: false"));
    }
}

#[test]
fn input_errors_exit_with_two() {
    let doc = game("example1");
    let o = run(&["check", p(&doc), "<<1>> X r", "--state", "{p}"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown atom `r`"));
    let o = run(&["check", p(&doc), "<<1>> X (p", "--state", "{p}"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["check", p(&doc), "p", "--state", "{z}"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["win", p(&game("example2")), "one"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["win", p(&game("example1")), "1", "--state", "{}"]);
    assert_eq!(o.status.code(), Some(2), "example 1 carries no goals");
    let o = run(&["check", "/nonexistent.game", "p"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resource_cap_exits_with_three() {
    let o = run(&[
        "--cap-strategies",
        "1",
        "check",
        p(&game("example1")),
        "<<2>> G F q",
        "--state",
        "{}",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&[
        "--cap-atoms",
        "1",
        "check",
        p(&game("example1")),
        "p",
        "--state",
        "{}",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn syntax_errors_carry_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write(
        dir.path(),
        "bad.game",
        "format: 1\nagents: 1\natoms: p\ncontrol 1: p\ngoal 1: F (p\n",
    );
    let o = run(&["validate", p(&doc)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("5:"), "{}", stdout(&o));
}

#[test]
fn reduce_example_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex2.reduced");
    let o = run(&["reduce", p(&game("example2")), p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let doc = parse(&text).unwrap();
    assert_eq!(doc.print(), text);
    let g = doc.build(&Limits::default()).unwrap();
    let names: BTreeSet<&str> = g
        .structure
        .vocab()
        .names()
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(
        names,
        BTreeSet::from(["p", "q", "c_1_p", "c_2_p", "c_2_q", "__turn"])
    );
    let map = std::fs::read_to_string(sidecar_path(&out)).unwrap();
    for line in [
        "turn: __turn",
        "copy 1 p: c_1_p",
        "copy 2 p: c_2_p",
        "copy 2 q: c_2_q",
    ] {
        assert!(map.contains(line), "{map}");
    }

    // the parsed document is the reduced structure on every state it lists
    let source = parse(&std::fs::read_to_string(game("example2")).unwrap())
        .unwrap()
        .build(&Limits::default())
        .unwrap();
    let img = build_epc(&source.structure, &Limits::default()).unwrap();
    let reduced = &g.structure;
    for s in source.structure.all_states() {
        let c = canonical_state(&img, s);
        for t in reduced.reachable(c).unwrap() {
            assert_eq!(
                reduced.successors(t).unwrap(),
                img.epc.successors(t).unwrap()
            );
            for a in img.epc.agents() {
                assert_eq!(
                    reduced.enabled(*a, t).unwrap(),
                    img.epc.enabled(*a, t).unwrap()
                );
            }
        }
    }
}

#[test]
fn reducing_an_exclusive_document_adds_turn_and_copies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("split.reduced");
    assert_eq!(
        run(&["reduce", p(&game("split_control")), p(&out)])
            .status
            .code(),
        Some(0)
    );
    let doc = parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let g = doc.build(&Limits::default()).unwrap();
    let names: BTreeSet<&str> = g
        .structure
        .vocab()
        .names()
        .iter()
        .map(String::as_str)
        .collect();
    assert_eq!(
        names,
        BTreeSet::from(["p", "q", "c_1_p", "c_2_q", "__turn"])
    );
}

#[test]
fn reduced_checks_agree_with_direct_checks() {
    let dir = tempfile::tempdir().unwrap();
    let formulas = [
        "<<1,2>> X p",
        "<<1>> X q",
        "<<2>> G q",
        "<<1>> F (p & ~q)",
        "<<>> X p | <<1,2>> (p U q)",
        "~<<2>> (X p & G F q)",
    ];
    for name in ["example1", "example2", "split_control"] {
        let out = dir.path().join(format!("{name}.reduced"));
        assert_eq!(
            run(&["reduce", p(&game(name)), p(&out)]).status.code(),
            Some(0)
        );
        let src = parse(&std::fs::read_to_string(game(name)).unwrap())
            .unwrap()
            .build(&Limits::default())
            .unwrap();
        let img = build_epc(&src.structure, &Limits::default()).unwrap();
        for f in formulas {
            let translated = tr_state(&parse_state(f).unwrap()).to_string();
            for s in src.structure.all_states() {
                let lit = src.structure.vocab().render(s.0);
                let lit_c = img.epc.vocab().render(canonical_state(&img, s).0);
                let direct = run(&["check", p(&game(name)), f, "--state", &lit]);
                let reduced = run(&["check", p(&out), &translated, "--state", &lit_c]);
                assert_eq!(
                    direct.status.code(),
                    reduced.status.code(),
                    "{name}: {f} at {lit}"
                );
            }
        }
    }
}

#[test]
fn win_single_controller_prints_witness() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.strategy");
    let o = run(&[
        "win",
        p(&game("single_controller")),
        "1",
        "--witness-out",
        p(&w),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("verdict: true"));
    // first witness in enumeration order: set p at once, then anything
    assert!(text.contains("{} : {p}"), "{text}");
    let doc = parse(&std::fs::read_to_string(game("single_controller")).unwrap())
        .unwrap()
        .build(&Limits::default())
        .unwrap();
    let profile =
        parse_strategy(doc.structure.vocab(), &std::fs::read_to_string(&w).unwrap()).unwrap();
    assert_eq!(
        profile.action(AgentId(1), State(0)),
        Some(propctl::structures::Action(1))
    );
    // and the witness is accepted by `paths`
    let o = run(&["paths", p(&game("single_controller")), "--strategy", p(&w)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("lasso: ({} {p})^w"), "{}", stdout(&o));
}

#[test]
fn win_against_a_majority_is_false() {
    let o = run(&["win", p(&game("majority")), "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stdout(&o).contains("witness"));
    let o = run(&["win", p(&game("majority")), "2"]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "agents 1 and 3 can outvote agent 2"
    );
    let o = run(&["win", p(&game("influence")), "1"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["win", p(&game("counter_table")), "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn paths_with_a_full_profile_prints_one_lasso() {
    let dir = tempfile::tempdir().unwrap();
    let strategy = write(
        dir.path(),
        "full.strategy",
        "agent 1\n{} : {p}\n{p} : {}\n{q} : {p}\n{p,q} : {p}\n\
         agent 2\n{} : {q}\n{p} : {q}\n{q} : {}\n{p,q} : {}\n",
    );
    let o = run(&[
        "paths",
        p(&game("example1")),
        "--strategy",
        p(&strategy),
        "--state",
        "{}",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("lasso: ({} {q})^w"), "{text}");
    assert!(text.contains("0 {}  <- cycle"), "{text}");
    assert!(text.contains("1 -> 0"), "{text}");
}

#[test]
fn paths_with_no_strategies_lists_the_reachable_states() {
    let dir = tempfile::tempdir().unwrap();
    let strategy = write(dir.path(), "none.strategy", "");
    for (name, state) in [
        ("example1", "{}"),
        ("counter_table", "{}"),
        ("influence", "{op_1_p}"),
    ] {
        let o = run(&[
            "paths",
            p(&game(name)),
            "--strategy",
            p(&strategy),
            "--state",
            state,
            "--bound",
            "64",
        ]);
        assert_eq!(o.status.code(), Some(0));
        let listed: BTreeSet<String> = stdout(&o)
            .lines()
            .filter_map(|l| l.strip_prefix("depth "))
            .map(|l| {
                l.split_once(": ")
                    .unwrap()
                    .1
                    .split(" -> ")
                    .next()
                    .unwrap()
                    .to_string()
            })
            .collect();
        let g = parse(&std::fs::read_to_string(game(name)).unwrap())
            .unwrap()
            .build(&Limits::default())
            .unwrap()
            .structure;
        let s = g.vocab().parse_state(state).unwrap();
        let closure: BTreeSet<String> = g
            .reachable(s)
            .unwrap()
            .into_iter()
            .map(|t| g.vocab().render(t.0))
            .collect();
        assert_eq!(listed, closure, "{name}");
    }
}

#[test]
fn lifted_strategy_alternates_turn_on_the_reduced_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex2.reduced");
    assert_eq!(
        run(&["reduce", p(&game("example2")), p(&out)])
            .status
            .code(),
        Some(0)
    );
    let src = parse(&std::fs::read_to_string(game("example2")).unwrap())
        .unwrap()
        .build(&Limits::default())
        .unwrap();
    let img = build_epc(&src.structure, &Limits::default()).unwrap();
    // both source agents vote for p and agent 2 sets q
    let mut sigma = StrategyProfile::new();
    for s in src.structure.all_states() {
        sigma.insert(AgentId(1), s, propctl::structures::Action(1));
        sigma.insert(AgentId(2), s, propctl::structures::Action(3));
    }
    let lifted = lift_strategy(&img, &sigma).unwrap();
    let file = write(
        dir.path(),
        "lifted.strategy",
        &print_strategy(img.epc.vocab(), &lifted),
    );
    let o = run(&[
        "paths",
        p(&out),
        "--strategy",
        p(&file),
        "--state",
        "{p}",
        "--bound",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = 0;
    for line in text.lines().filter_map(|l| l.strip_prefix("depth ")) {
        let (depth, rest) = line.split_once(": ").unwrap();
        let depth: usize = depth.parse().unwrap();
        let (from, to) = rest.split_once(" -> ").unwrap();
        let turn = |lit: &str| lit.contains("__turn");
        assert_eq!(turn(from), depth % 2 == 1, "{line}");
        for t in to.split_whitespace() {
            assert_ne!(turn(t), turn(from), "{line}");
        }
        rows += 1;
    }
    assert!(rows >= 2, "{text}");
}

#[test]
fn validate_reports_diagnostics() {
    let o = run(&["validate", p(&game("example1"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("diagnostic"));

    let dir = tempfile::tempdir().unwrap();
    let overlap = write(
        dir.path(),
        "overlap.game",
        "format: 1\nagents: 1 2\natoms: p\ncontrol 1: p\ncontrol 2: p\ntransition: epc\n",
    );
    let o = run(&["validate", p(&overlap)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("NonDisjointControl"), "{}", stdout(&o));

    let reserved = write(
        dir.path(),
        "reserved.game",
        "format: 1\nagents: 1\natoms: p __turn\ncontrol 1: p __turn\n",
    );
    let o = run(&["validate", p(&reserved)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("ReservedName"), "{}", stdout(&o));
    let o = run(&["check", p(&reserved), "p", "--state", "{}"]);
    assert_eq!(o.status.code(), Some(2));

    for name in ["c_1_p", "op_1_p", "vis_2_q"] {
        let doc = write(
            dir.path(),
            "r.game",
            &format!("format: 1\nagents: 1\natoms: {name}\ncontrol 1: {name}\n"),
        );
        assert!(
            stdout(&run(&["validate", p(&doc)])).contains("ReservedName"),
            "{name}"
        );
    }
}

#[test]
fn bundled_documents_round_trip() {
    for entry in std::fs::read_dir(games()).unwrap() {
        let path = entry.unwrap().path();
        let doc = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let printed = doc.print();
        assert_eq!(parse(&printed).unwrap(), doc, "{}", path.display());
        assert_eq!(parse(&printed).unwrap().print(), printed);
        assert!(doc.build(&Limits::default()).is_ok(), "{}", path.display());
    }
}

#[test]
fn reports_are_stable() {
    let doc = game("influence");
    let args = ["--format", "json", "win", p(&doc), "1"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    let text = stdout(&first);
    assert!(serde_json::from_str::<serde_json::Value>(&text).is_ok());
    let order: Vec<usize> = [
        "command", "document", "agent", "state", "verdict", "witness",
    ]
    .iter()
    .map(|k| text.find(&format!("\"{k}\"")).unwrap())
    .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
    let o = run(&[
        "--timing",
        "check",
        p(&game("example1")),
        "<<1>> X q",
        "--state",
        "{}",
    ]);
    assert!(stdout(&o).contains("elapsed_ms"));
}

#[test]
fn sweep_reports_agreement() {
    let o = run(&["--seed", "7", "sweep", "--count", "20", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    let skipped: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("skipped: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        text.contains(&format!("agreement: {0}/{0}", 20 - skipped)),
        "{text}"
    );
}
