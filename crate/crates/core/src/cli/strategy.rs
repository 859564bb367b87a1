//! Strategy files: one block per agent, one `{state} : {action}` row per
//! line.
//!
//! ```text
//! agent 1
//! {} : {p}
//! {p} : {p}
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::structures::{AgentId, StrategyProfile, Vocabulary};

pub fn parse_strategy(vocab: &Vocabulary, text: &str) -> Result<StrategyProfile> {
    let mut profile = StrategyProfile::new();
    let mut current: Option<AgentId> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        let no = k + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("agent") {
            let a: AgentId = rest
                .parse()
                .map_err(|_| Error::syntax(no, 1, format!("invalid agent id `{}`", rest.trim())))?;
            if profile.strategy(a).is_some() {
                return Err(Error::syntax(
                    no,
                    1,
                    format!("duplicate block for agent {a}"),
                ));
            }
            profile.add_agent(a);
            current = Some(a);
            continue;
        }
        let agent = current.ok_or_else(|| Error::syntax(no, 1, "row before any `agent` line"))?;
        let (s, a) = line
            .split_once(':')
            .ok_or_else(|| Error::syntax(no, 1, "expected `{state} : {action}`"))?;
        let located = |e: Error| Error::syntax(no, 1, e.to_string());
        let s = vocab.parse_state(s).map_err(located)?;
        let a = vocab.parse_action(a).map_err(located)?;
        if profile.action(agent, s).is_some() {
            return Err(Error::syntax(
                no,
                1,
                format!(
                    "agent {agent} already has an action at {}",
                    vocab.render(s.0)
                ),
            ));
        }
        profile.insert(agent, s, a);
    }
    Ok(profile)
}

pub fn print_strategy(vocab: &Vocabulary, profile: &StrategyProfile) -> String {
    let mut out = String::new();
    for (agent, table) in profile.iter() {
        let _ = writeln!(out, "agent {agent}");
        for (s, a) in table {
            let _ = writeln!(out, "{} : {}", vocab.render(s.0), vocab.render(a.0));
        }
    }
    out
}
