//! The plain-text game document.
//!
//! One declaration per line, `#` starts a comment:
//!
//! ```text
//! format: 1
//! class: ibg
//! agents: 1 2
//! atoms: p q
//! control 1: p
//! control 2: p q
//! protocol: full
//! transition: threshold
//! threshold p: 1
//! threshold q: 0
//! goal 1: F p
//! init: p
//! ```
//!
//! Explicit protocols use `allow <agent> {state}: {a} {b}` lines and table
//! transitions use `row {state}, {a_1} {a_2} -> {next}`. Influence documents
//! declare `issues:`, `edge k -> i`, `opinion i:` and `visible i:`;
//! aggregation documents declare `issues:` and `rule: majority [quota]` or
//! `rule: table <bits>`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formulas::{parse_path, tr_path};
use crate::games::{
    build_aggregation, build_influence, transition_from_spec, AggregationRule, AggregationSpec,
    EncodedGame, GameClass, GoalTable, InfluenceSpec, TableRow, TransitionSpec,
};
use crate::reduction::{canonical_state, EpcImage};
use crate::structures::{
    is_identifier, reserved_name_diagnostics, validate, validate_from, Action, AgentId, Diagnostic,
    DiagnosticCode, GameStructure, Protocol, ReservedPolicy, State, StructureBuilder, Transition,
    Vocabulary,
};
use crate::Limits;

pub const FORMAT_VERSION: u32 = 1;

type Names = BTreeSet<String>;

/// Explicit protocol rows: `(agent, state) -> enabled actions`.
pub type AllowTable = BTreeMap<(AgentId, Names), BTreeSet<Names>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub class: GameClass,
    pub body: Body,
    pub goals: GoalTable,
    pub init: Option<Names>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Structure(StructureBody),
    Influence(InfluenceBody),
    Aggregation(AggregationBody),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureBody {
    /// Sorted, `*` last.
    pub agents: Vec<AgentId>,
    /// Sorted.
    pub atoms: Vec<String>,
    /// Agents controlling nothing are absent.
    pub control: BTreeMap<AgentId, Names>,
    /// `None` is the full protocol.
    pub protocol: Option<AllowTable>,
    /// Table rows are sorted.
    pub transition: TransitionSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceBody {
    pub agents: u32,
    pub issues: Vec<String>,
    pub edges: BTreeSet<(AgentId, AgentId)>,
    /// Agents holding no opinion are absent.
    pub opinions: BTreeMap<AgentId, Names>,
    pub visible: BTreeMap<AgentId, Names>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationBody {
    pub agents: u32,
    pub issues: Vec<String>,
    pub rule: AggregationRule,
}

// ---------------------------------------------------------------- parsing

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(l, _)| l)
}

/// A `{a,b}` literal at the start of `text`; returns the set and the rest.
fn take_set(text: &str, line: usize, col: usize) -> Result<(Names, &str)> {
    let t = text.trim_start();
    let col = col + text.len() - t.len();
    let body = t
        .strip_prefix('{')
        .ok_or_else(|| Error::syntax(line, col, "expected `{`"))?;
    let end = body
        .find('}')
        .ok_or_else(|| Error::syntax(line, col, "unclosed `{`"))?;
    let mut out = Names::new();
    for name in body[..end]
        .split(',')
        .map(str::trim)
        .filter(|n| !n.is_empty())
    {
        check_name(name, line, col)?;
        if !out.insert(name.to_string()) {
            return Err(Error::syntax(
                line,
                col,
                format!("atom `{name}` repeated in set"),
            ));
        }
    }
    Ok((out, &body[end + 1..]))
}

/// Whitespace-separated `{..}` literals filling all of `text`.
fn sets(text: &str, line: usize, col: usize) -> Result<Vec<Names>> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.trim().is_empty() {
        let offset = col + text.len() - rest.len();
        let (s, r) = take_set(rest, line, offset)?;
        out.push(s);
        rest = r;
    }
    Ok(out)
}

fn check_name(name: &str, line: usize, col: usize) -> Result<()> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(Error::syntax(
            line,
            col,
            format!("invalid atom name `{name}`"),
        ))
    }
}

fn names(text: &str, line: usize, col: usize) -> Result<Vec<String>> {
    text.split_whitespace()
        .map(|n| check_name(n, line, col).map(|()| n.to_string()))
        .collect()
}

fn agent(text: &str, line: usize, col: usize) -> Result<AgentId> {
    text.parse()
        .map_err(|_| Error::syntax(line, col, format!("invalid agent id `{}`", text.trim())))
}

/// `init:` accepts either `p q` or `{p,q}`.
fn state_names(text: &str, line: usize, col: usize) -> Result<Names> {
    if text.trim_start().starts_with('{') {
        let (s, rest) = take_set(text, line, col)?;
        if !rest.trim().is_empty() {
            return Err(Error::syntax(line, col, "trailing text after state"));
        }
        Ok(s)
    } else {
        let list = names(text, line, col)?;
        let set: Names = list.iter().cloned().collect();
        if set.len() != list.len() {
            return Err(Error::syntax(line, col, "atom repeated in state"));
        }
        Ok(set)
    }
}

fn duplicate(line: usize, what: &str) -> Error {
    Error::syntax(line, 1, format!("duplicate {what}"))
}

#[derive(Default)]
struct Pending {
    /// First line of every key seen.
    keys: BTreeMap<&'static str, usize>,
    format: Option<u32>,
    class: Option<GameClass>,
    agents: Option<Vec<AgentId>>,
    atoms: Option<Vec<String>>,
    control: BTreeMap<AgentId, Names>,
    protocol: Option<bool>,
    allow: AllowTable,
    transition: Option<&'static str>,
    thresholds: BTreeMap<String, u32>,
    rows: Vec<TableRow>,
    goals: GoalTable,
    init: Option<Names>,
    issues: Option<Vec<String>>,
    edges: BTreeSet<(AgentId, AgentId)>,
    opinions: BTreeMap<AgentId, Names>,
    visible: BTreeMap<AgentId, Names>,
    rule: Option<AggregationRule>,
}

impl Pending {
    fn key(&mut self, key: &'static str, line: usize) {
        self.keys.entry(key).or_insert(line);
    }

    fn line(&mut self, no: usize, indent: usize, text: &str) -> Result<()> {
        let first = text.split_whitespace().next().unwrap_or_default();
        let after_first = || {
            let rest = &text[first.len()..];
            (rest, indent + first.len() + 1)
        };
        match first {
            "row" => {
                self.key("row", no);
                let (rest, col) = after_first();
                let (left, right) = rest
                    .rsplit_once("->")
                    .ok_or_else(|| Error::syntax(no, col, "expected `->` in row"))?;
                let (state, actions) = take_set(left, no, col)?;
                let actions = actions.trim_start();
                let actions = actions.strip_prefix(',').unwrap_or(actions);
                let actions = sets(actions, no, col)?;
                let next = sets(right, no, col + left.len() + 2)?;
                let [next] = <[Names; 1]>::try_from(next)
                    .map_err(|_| Error::syntax(no, col, "row needs exactly one successor"))?;
                self.rows.push(TableRow {
                    state,
                    actions,
                    next,
                });
                return Ok(());
            }
            "allow" => {
                self.key("allow", no);
                let (rest, col) = after_first();
                let rest = rest.trim_start();
                let (who, rest) = rest.split_once(char::is_whitespace).ok_or_else(|| {
                    Error::syntax(no, col, "expected `allow <agent> {state}: ...`")
                })?;
                let who = agent(who, no, col)?;
                let (state, rest) = take_set(rest, no, col)?;
                let rest = rest
                    .trim_start()
                    .strip_prefix(':')
                    .ok_or_else(|| Error::syntax(no, col, "expected `:` after the state"))?;
                let acts: BTreeSet<Names> = sets(rest, no, col)?.into_iter().collect();
                if self.allow.insert((who, state), acts).is_some() {
                    return Err(duplicate(no, "allow line"));
                }
                return Ok(());
            }
            "edge" => {
                self.key("edge", no);
                let (rest, col) = after_first();
                let (k, i) = rest
                    .split_once("->")
                    .ok_or_else(|| Error::syntax(no, col, "expected `edge k -> i`"))?;
                let e = (agent(k, no, col)?, agent(i, no, col)?);
                if !self.edges.insert(e) {
                    return Err(duplicate(no, "edge"));
                }
                return Ok(());
            }
            _ => {}
        }

        let (head, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::syntax(no, indent + 1, "expected `key: value`"))?;
        let col = indent + head.len() + 2;
        let words: Vec<&str> = head.split_whitespace().collect();
        match words.as_slice() {
            ["format"] => {
                self.once("format", no)?;
                let v = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::syntax(no, col, "format version must be a number"))?;
                if v != FORMAT_VERSION {
                    return Err(Error::syntax(
                        no,
                        col,
                        format!("unsupported format version {v}"),
                    ));
                }
                self.format = Some(v);
            }
            ["class"] => {
                self.once("class", no)?;
                self.class = Some(
                    rest.trim()
                        .parse()
                        .map_err(|e: Error| Error::syntax(no, col, e.to_string()))?,
                );
            }
            ["agents"] => {
                self.once("agents", no)?;
                let mut list = rest
                    .split_whitespace()
                    .map(|w| agent(w, no, col))
                    .collect::<Result<Vec<_>>>()?;
                list.sort();
                if list.windows(2).any(|w| w[0] == w[1]) {
                    return Err(duplicate(no, "agent"));
                }
                self.agents = Some(list);
            }
            ["atoms"] => {
                self.once("atoms", no)?;
                self.atoms = Some(sorted_unique(names(rest, no, col)?, no, "atom")?);
            }
            ["issues"] => {
                self.once("issues", no)?;
                self.issues = Some(sorted_unique(names(rest, no, col)?, no, "issue")?);
            }
            ["control", who] => {
                self.key("control", no);
                let who = agent(who, no, indent + 1)?;
                let set = state_names(rest, no, col)?;
                if self.control.insert(who, set).is_some() {
                    return Err(duplicate(no, "control line"));
                }
            }
            ["opinion", who] => {
                self.key("opinion", no);
                let who = agent(who, no, indent + 1)?;
                if self
                    .opinions
                    .insert(who, state_names(rest, no, col)?)
                    .is_some()
                {
                    return Err(duplicate(no, "opinion line"));
                }
            }
            ["visible", who] => {
                self.key("visible", no);
                let who = agent(who, no, indent + 1)?;
                if self
                    .visible
                    .insert(who, state_names(rest, no, col)?)
                    .is_some()
                {
                    return Err(duplicate(no, "visible line"));
                }
            }
            ["protocol"] => {
                self.once("protocol", no)?;
                self.protocol = Some(match rest.trim() {
                    "full" => false,
                    "explicit" => true,
                    other => {
                        return Err(Error::syntax(
                            no,
                            col,
                            format!("unknown protocol `{other}`"),
                        ))
                    }
                });
            }
            ["transition"] => {
                self.once("transition", no)?;
                self.transition = Some(match rest.trim() {
                    "epc" => "epc",
                    "threshold" => "threshold",
                    "table" => "table",
                    other => {
                        return Err(Error::syntax(
                            no,
                            col,
                            format!("unknown transition kind `{other}`"),
                        ))
                    }
                });
            }
            ["threshold", atom] => {
                self.key("threshold", no);
                check_name(atom, no, indent + 1)?;
                let m = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::syntax(no, col, "threshold must be a number"))?;
                if self.thresholds.insert(atom.to_string(), m).is_some() {
                    return Err(duplicate(no, "threshold"));
                }
            }
            ["goal", who] => {
                self.key("goal", no);
                let who = agent(who, no, indent + 1)?;
                let goal = parse_path(rest).map_err(|e| match e {
                    Error::Syntax {
                        column, message, ..
                    } => Error::syntax(no, col + column - 1, message),
                    other => other,
                })?;
                if self.goals.goal(who).is_ok() {
                    return Err(duplicate(no, "goal"));
                }
                self.goals.insert(who, goal);
            }
            ["init"] => {
                self.once("init", no)?;
                self.init = Some(state_names(rest, no, col)?);
            }
            ["rule"] => {
                self.once("rule", no)?;
                self.rule = Some(parse_rule(rest, no, col)?);
            }
            _ => {
                return Err(Error::syntax(
                    no,
                    indent + 1,
                    format!("unknown declaration `{}`", head.trim()),
                ))
            }
        }
        Ok(())
    }

    fn once(&mut self, key: &'static str, line: usize) -> Result<()> {
        if self.keys.insert(key, line).is_some() {
            return Err(duplicate(line, &format!("`{key}` line")));
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Document> {
        if self.format.is_none() {
            return Err(Error::syntax(1, 1, "missing `format: 1` header"));
        }
        let class = self.class.unwrap_or_default();
        let allowed: &[&str] = match class {
            GameClass::Raw | GameClass::Ibg | GameClass::Reduced => &[
                "format",
                "class",
                "agents",
                "atoms",
                "control",
                "protocol",
                "allow",
                "transition",
                "threshold",
                "row",
                "goal",
                "init",
            ],
            GameClass::Influence => &[
                "format", "class", "agents", "issues", "edge", "opinion", "visible", "goal",
            ],
            GameClass::Aggregation => &[
                "format", "class", "agents", "issues", "rule", "goal", "init",
            ],
        };
        for (key, line) in &self.keys {
            if !allowed.contains(key) {
                return Err(Error::syntax(
                    *line,
                    1,
                    format!("`{key}` is not allowed in a {class} document"),
                ));
            }
        }
        let agents = self
            .agents
            .take()
            .ok_or_else(|| Error::syntax(1, 1, "missing `agents:` line"))?;
        let body = match class {
            GameClass::Influence | GameClass::Aggregation => {
                let n = dense_count(&agents, self.keys["agents"])?;
                let issues = self
                    .issues
                    .take()
                    .ok_or_else(|| Error::syntax(1, 1, "missing `issues:` line"))?;
                if class == GameClass::Influence {
                    self.opinions.retain(|_, s| !s.is_empty());
                    self.visible.retain(|_, s| !s.is_empty());
                    Body::Influence(InfluenceBody {
                        agents: n,
                        issues,
                        edges: self.edges,
                        opinions: self.opinions,
                        visible: self.visible,
                    })
                } else {
                    Body::Aggregation(AggregationBody {
                        agents: n,
                        issues,
                        rule: self
                            .rule
                            .take()
                            .ok_or_else(|| Error::syntax(1, 1, "missing `rule:` line"))?,
                    })
                }
            }
            _ => {
                let atoms = self
                    .atoms
                    .take()
                    .ok_or_else(|| Error::syntax(1, 1, "missing `atoms:` line"))?;
                let explicit = self.protocol.unwrap_or(false);
                if !explicit && !self.allow.is_empty() {
                    return Err(Error::syntax(
                        self.keys["allow"],
                        1,
                        "`allow` lines need `protocol: explicit`",
                    ));
                }
                let kind = self.transition.unwrap_or("epc");
                if kind != "threshold" && !self.thresholds.is_empty() {
                    return Err(Error::syntax(
                        self.keys["threshold"],
                        1,
                        "`threshold` lines need `transition: threshold`",
                    ));
                }
                if kind != "table" && !self.rows.is_empty() {
                    return Err(Error::syntax(
                        self.keys["row"],
                        1,
                        "`row` lines need `transition: table`",
                    ));
                }
                self.rows.sort();
                let transition = match kind {
                    "threshold" => TransitionSpec::Threshold(self.thresholds),
                    "table" => TransitionSpec::Table(self.rows),
                    _ => TransitionSpec::Union,
                };
                self.control.retain(|_, s| !s.is_empty());
                Body::Structure(StructureBody {
                    agents,
                    atoms,
                    control: self.control,
                    protocol: explicit.then_some(self.allow),
                    transition,
                })
            }
        };
        Ok(Document {
            class,
            body,
            goals: self.goals,
            init: self.init,
        })
    }
}

fn sorted_unique(mut list: Vec<String>, line: usize, what: &str) -> Result<Vec<String>> {
    list.sort();
    if list.windows(2).any(|w| w[0] == w[1]) {
        return Err(duplicate(line, what));
    }
    Ok(list)
}

fn dense_count(agents: &[AgentId], line: usize) -> Result<u32> {
    if agents
        .iter()
        .enumerate()
        .any(|(k, a)| a.0 as usize != k + 1)
    {
        return Err(Error::syntax(line, 1, "agents must be exactly 1..n"));
    }
    Ok(agents.len() as u32)
}

fn parse_rule(text: &str, line: usize, col: usize) -> Result<AggregationRule> {
    let mut words = text.split_whitespace();
    match words.next() {
        Some("majority") => {
            let quota = words
                .next()
                .map(|w| {
                    w.parse()
                        .map_err(|_| Error::syntax(line, col, "quota must be a number"))
                })
                .transpose()?;
            if words.next().is_some() {
                return Err(Error::syntax(line, col, "trailing text after quota"));
            }
            Ok(AggregationRule::Majority { quota })
        }
        Some("table") => {
            let bits = words
                .flat_map(str::chars)
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::syntax(line, col, "table entries must be 0 or 1")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AggregationRule::Table(bits))
        }
        _ => Err(Error::syntax(line, col, "expected `majority` or `table`")),
    }
}

pub fn parse(text: &str) -> Result<Document> {
    let mut p = Pending::default();
    for (k, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        p.line(k + 1, indent, trimmed)?;
    }
    p.finish()
}

// ---------------------------------------------------------------- printing

fn set(names: &Names) -> String {
    let v: Vec<&str> = names.iter().map(String::as_str).collect();
    format!("{{{}}}", v.join(","))
}

fn words<'a>(names: impl IntoIterator<Item = &'a String>) -> String {
    names
        .into_iter()
        .fold(String::new(), |acc, n| acc + " " + n)
}

fn list(agents: impl IntoIterator<Item = AgentId>) -> String {
    agents
        .into_iter()
        .fold(String::new(), |acc, a| format!("{acc} {a}"))
}

impl Document {
    /// Canonical text; `parse(print(d)) == d`.
    pub fn print(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "format: {FORMAT_VERSION}");
        let _ = writeln!(w, "class: {}", self.class);
        match &self.body {
            Body::Structure(b) => {
                let _ = writeln!(w, "agents:{}", list(b.agents.iter().copied()));
                let _ = writeln!(w, "atoms:{}", words(&b.atoms));
                for (a, atoms) in &b.control {
                    let _ = writeln!(w, "control {a}:{}", words(atoms));
                }
                match &b.protocol {
                    None => {
                        let _ = writeln!(w, "protocol: full");
                    }
                    Some(table) => {
                        let _ = writeln!(w, "protocol: explicit");
                        for ((a, s), acts) in table {
                            let acts: String =
                                acts.iter().map(|x| format!(" {}", set(x))).collect();
                            let _ = writeln!(w, "allow {a} {}:{acts}", set(s));
                        }
                    }
                }
                match &b.transition {
                    TransitionSpec::Union => {
                        let _ = writeln!(w, "transition: epc");
                    }
                    TransitionSpec::Threshold(m) => {
                        let _ = writeln!(w, "transition: threshold");
                        for (p, v) in m {
                            let _ = writeln!(w, "threshold {p}: {v}");
                        }
                    }
                    TransitionSpec::Table(rows) => {
                        let _ = writeln!(w, "transition: table");
                        for r in rows {
                            let acts: String =
                                r.actions.iter().map(|x| format!(" {}", set(x))).collect();
                            let _ = writeln!(w, "row {},{acts} -> {}", set(&r.state), set(&r.next));
                        }
                    }
                }
            }
            Body::Influence(b) => {
                let _ = writeln!(w, "agents:{}", list((1..=b.agents).map(AgentId)));
                let _ = writeln!(w, "issues:{}", words(&b.issues));
                for (k, i) in &b.edges {
                    let _ = writeln!(w, "edge {k} -> {i}");
                }
                for (a, s) in &b.opinions {
                    let _ = writeln!(w, "opinion {a}:{}", words(s));
                }
                for (a, s) in &b.visible {
                    let _ = writeln!(w, "visible {a}:{}", words(s));
                }
            }
            Body::Aggregation(b) => {
                let _ = writeln!(w, "agents:{}", list((1..=b.agents).map(AgentId)));
                let _ = writeln!(w, "issues:{}", words(&b.issues));
                match &b.rule {
                    AggregationRule::Majority { quota: None } => {
                        let _ = writeln!(w, "rule: majority");
                    }
                    AggregationRule::Majority { quota: Some(q) } => {
                        let _ = writeln!(w, "rule: majority {q}");
                    }
                    AggregationRule::Table(t) => {
                        let bits: String = t.iter().map(|b| if *b { " 1" } else { " 0" }).collect();
                        let _ = writeln!(w, "rule: table{bits}");
                    }
                }
            }
        }
        for (a, goal) in self.goals.iter() {
            let _ = writeln!(w, "goal {a}: {goal}");
        }
        match &self.init {
            Some(s) if s.is_empty() => {
                let _ = writeln!(w, "init: {{}}");
            }
            Some(s) => {
                let _ = writeln!(w, "init:{}", words(s));
            }
            None => {}
        }
        out
    }

    /// Builds the game, rejecting documents with any diagnostic.
    pub fn build(&self, limits: &Limits) -> Result<EncodedGame> {
        let names = self.name_diagnostics();
        if !names.is_empty() {
            return Err(reject(&names));
        }
        match &self.body {
            Body::Structure(b) => {
                let g = self.structure(b, limits)?;
                let initial = self.initial(g.vocab())?;
                let diags = self.structure_diagnostics(b, &g, initial);
                if !diags.is_empty() {
                    return Err(reject(&diags));
                }
                self.goals.check(g.agents(), g.vocab())?;
                Ok(EncodedGame {
                    structure: g,
                    goals: self.goals.clone(),
                    initial,
                    class: self.class,
                })
            }
            Body::Influence(b) => {
                let atoms = 2 * b.agents as usize * b.issues.len();
                cap_atoms(atoms, limits)?;
                build_influence(&InfluenceSpec {
                    agents: b.agents,
                    issues: b.issues.clone(),
                    edges: b.edges.clone(),
                    opinions: b.opinions.clone(),
                    visible: b.visible.clone(),
                    goals: self.goals.clone(),
                })
            }
            Body::Aggregation(b) => {
                cap_atoms(b.issues.len(), limits)?;
                build_aggregation(&AggregationSpec {
                    agents: b.agents,
                    issues: b.issues.clone(),
                    rule: b.rule.clone(),
                    goals: self.goals.clone(),
                    initial: self.init.clone(),
                })
            }
        }
    }

    /// Everything wrong with the document, without failing on the first.
    pub fn diagnostics(&self, limits: &Limits) -> Vec<Diagnostic> {
        let mut out = self.name_diagnostics();
        if !out.is_empty() {
            return out;
        }
        let format = |e: Error| Diagnostic::new(DiagnosticCode::Format, e.to_string());
        match &self.body {
            Body::Structure(b) => {
                let g = match self.structure(b, limits) {
                    Ok(g) => g,
                    Err(e) => return vec![format(e)],
                };
                let initial = match self.initial(g.vocab()) {
                    Ok(s) => s,
                    Err(e) => return vec![format(e)],
                };
                out.extend(self.structure_diagnostics(b, &g, initial));
                if let Err(e) = self.goals.check(g.agents(), g.vocab()) {
                    out.push(format(e));
                }
            }
            _ => {
                if let Err(e) = self.build(limits) {
                    out.push(format(e));
                }
            }
        }
        out
    }

    fn name_diagnostics(&self) -> Vec<Diagnostic> {
        let names: &[String] = match &self.body {
            Body::Structure(b) => &b.atoms,
            Body::Influence(b) => &b.issues,
            Body::Aggregation(b) => &b.issues,
        };
        let policy = ReservedPolicy {
            allow_reduction: self.class == GameClass::Reduced,
            allow_influence: false,
        };
        let mut out = Vec::new();
        match Vocabulary::new(names.iter().cloned()) {
            Ok(v) => out.extend(reserved_name_diagnostics(&v, policy)),
            Err(e) => out.push(Diagnostic::new(
                DiagnosticCode::InvalidAtomName,
                e.to_string(),
            )),
        }
        if self.class != GameClass::Reduced {
            for n in names {
                if n.starts_with('_') && !n.starts_with("__") {
                    out.push(Diagnostic::new(
                        DiagnosticCode::InvalidAtomName,
                        format!("atom name `{n}` must start with a letter"),
                    ));
                }
            }
        }
        out
    }

    fn structure(&self, b: &StructureBody, limits: &Limits) -> Result<GameStructure> {
        let mut builder = StructureBuilder::new(b.agents.iter().copied(), b.atoms.iter().cloned())?
            .atom_cap(limits.max_atoms);
        let vocab = builder.vocab().clone();
        for (a, atoms) in &b.control {
            let names: Vec<&str> = atoms.iter().map(String::as_str).collect();
            builder = builder.control(*a, &names)?;
        }
        if let Some(table) = &b.protocol {
            let mut rows = BTreeMap::new();
            for ((a, s), acts) in table {
                let mut acts = acts
                    .iter()
                    .map(|x| Ok(Action(vocab.mask_of(x.iter().map(String::as_str))?)))
                    .collect::<Result<Vec<_>>>()?;
                acts.sort();
                rows.insert((*a, state_of(&vocab, s)?), acts);
            }
            builder = builder.protocol(Protocol::Explicit(rows));
        }
        builder = builder.transition(transition_from_spec(&vocab, b.agents.len(), &b.transition)?);
        builder.build()
    }

    fn initial(&self, vocab: &Vocabulary) -> Result<Option<State>> {
        self.init.as_ref().map(|s| state_of(vocab, s)).transpose()
    }

    fn structure_diagnostics(
        &self,
        b: &StructureBody,
        g: &GameStructure,
        initial: Option<State>,
    ) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.class == GameClass::Ibg && b.protocol.is_some() {
            out.push(Diagnostic::new(
                DiagnosticCode::Format,
                "ibg documents use the full protocol",
            ));
        }
        if self.class == GameClass::Reduced {
            // a reduced structure is queried from canonical states only
            let aux = g
                .vocab()
                .names()
                .iter()
                .enumerate()
                .filter(|(_, n)| n.starts_with("c_") || n.starts_with("__"))
                .fold(0u64, |m, (i, _)| m | 1 << i);
            let roots: Vec<State> = match initial {
                Some(s) => vec![s],
                None => g.all_states().filter(|s| s.0 & aux == 0).collect(),
            };
            out.extend(validate_from(g, Some(&roots)));
        } else {
            out.extend(validate(g, initial));
        }
        out
    }
}

fn state_of(vocab: &Vocabulary, names: &Names) -> Result<State> {
    vocab.state(names.iter().map(String::as_str))
}

fn cap_atoms(n: usize, limits: &Limits) -> Result<()> {
    if n > limits.max_atoms {
        return Err(Error::CapExceeded {
            what: "atom universe",
            needed: n as u128,
            limit: limits.max_atoms as u128,
        });
    }
    Ok(())
}

fn reject(diags: &[Diagnostic]) -> Error {
    let text: Vec<String> = diags.iter().map(ToString::to_string).collect();
    Error::InvalidGame(text.join("; "))
}

fn to_names(vocab: &Vocabulary, bits: u64) -> Names {
    vocab
        .atoms_of(bits)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// The document of a reduced structure. Protocol rows cover the states
/// reachable from canonical states, which is where the reduced structure
/// is ever queried.
pub fn reduced_document(
    img: &EpcImage,
    goals: &GoalTable,
    init: Option<State>,
) -> Result<Document> {
    let g = &img.epc;
    let vocab = g.vocab();
    let mut seen: BTreeSet<State> = img
        .origin()
        .all_states()
        .map(|s| canonical_state(img, s))
        .collect();
    let mut queue: VecDeque<State> = seen.iter().copied().collect();
    while let Some(s) = queue.pop_front() {
        for t in g.successors(s)? {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    let mut allow = AllowTable::new();
    for &s in &seen {
        for &a in g.agents() {
            let acts = g
                .enabled(a, s)?
                .into_iter()
                .map(|x| to_names(vocab, x.0))
                .collect();
            allow.insert((a, to_names(vocab, s.0)), acts);
        }
    }
    let mut agents = g.agents().to_vec();
    agents.sort();
    let control = agents
        .iter()
        .map(|&a| Ok((a, to_names(vocab, g.controlled(a)?))))
        .filter(|r| !matches!(r, Ok((_, s)) if s.is_empty()))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut translated = GoalTable::new();
    for (a, goal) in goals.iter() {
        translated.insert(a, tr_path(goal));
    }
    Ok(Document {
        class: GameClass::Reduced,
        body: Body::Structure(StructureBody {
            agents,
            atoms: vocab.names().to_vec(),
            control,
            protocol: Some(allow),
            transition: TransitionSpec::Union,
        }),
        goals: translated,
        init: init.map(|s| to_names(vocab, canonical_state(img, s).0)),
    })
}

/// The document of an explicit structure. Hosted protocols and transitions
/// have no textual form.
pub fn structure_document(g: &GameStructure, class: GameClass) -> Result<Document> {
    let vocab = g.vocab();
    let names = |bits: u64| to_names(vocab, bits);
    let protocol = match g.protocol() {
        Protocol::Full => None,
        Protocol::Explicit(table) => Some(
            table
                .iter()
                .map(|((a, s), acts)| ((*a, names(s.0)), acts.iter().map(|x| names(x.0)).collect()))
                .collect(),
        ),
        Protocol::Hosted(_) => {
            return Err(Error::InvalidGame(
                "hosted protocols have no document form".into(),
            ))
        }
    };
    let transition = match g.transition() {
        Transition::ExclusiveUnion => TransitionSpec::Union,
        Transition::Threshold(t) => TransitionSpec::Threshold(
            t.iter()
                .enumerate()
                .filter_map(|(p, m)| m.map(|m| (vocab.name(p).to_string(), m)))
                .collect(),
        ),
        Transition::Table(rows) => {
            let mut rows: Vec<TableRow> = rows
                .iter()
                .map(|((s, joint), next)| TableRow {
                    state: names(s.0),
                    actions: joint.0.iter().map(|a| names(a.0)).collect(),
                    next: names(next.0),
                })
                .collect();
            rows.sort();
            TransitionSpec::Table(rows)
        }
        Transition::Hosted(_) => {
            return Err(Error::InvalidGame(
                "hosted transitions have no document form".into(),
            ))
        }
    };
    let mut agents = g.agents().to_vec();
    agents.sort();
    if agents != g.agents() {
        return Err(Error::InvalidGame("agents must be listed in order".into()));
    }
    let mut control = BTreeMap::new();
    for &a in &agents {
        let c = g.controlled(a)?;
        if c != 0 {
            control.insert(a, names(c));
        }
    }
    Ok(Document {
        class,
        body: Body::Structure(StructureBody {
            agents,
            atoms: vocab.names().to_vec(),
            control,
            protocol,
            transition,
        }),
        goals: GoalTable::new(),
        init: None,
    })
}

/// The sidecar listing the names the reduction introduced.
pub fn atom_map(img: &EpcImage) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "turn: {}", img.turn_atom());
    let _ = writeln!(out, "star: {}", img.star_agent());
    for ((a, p), c) in img.copy_atoms() {
        let _ = writeln!(out, "copy {a} {p}: {c}");
    }
    out
}
