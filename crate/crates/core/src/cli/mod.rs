//! Command-line surface: game documents, strategy files and reports.

mod document;
mod strategy;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checker::{induced, Checker, Engine, Stats};
use crate::error::{Error, Result};
use crate::formulas::{parse_state, Coalition};
use crate::games::{winning_strategy_query, EncodedGame};
use crate::random::{self, FormulaParams, StructureParams};
use crate::reduction::{build_epc, verify_on_image};
use crate::structures::{AgentId, Diagnostic, GameStructure, State};
use crate::Limits;

pub use document::{
    atom_map, parse, reduced_document, structure_document, AggregationBody, AllowTable, Body,
    Document, InfluenceBody, StructureBody, FORMAT_VERSION,
};
pub use strategy::{parse_strategy, print_strategy};

/// Exit status for a false verdict or a non-empty diagnostics listing.
pub const EXIT_FALSE: i32 = 1;
/// Exit status for malformed input.
pub const EXIT_INPUT: i32 = 2;
/// Exit status for a resource cap.
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "propctl",
    version,
    about = "Model checking for games with propositional control"
)]
pub struct Cli {
    /// Largest atom universe to build explicitly.
    #[arg(long, global = true, default_value_t = crate::structures::DEFAULT_ATOM_CAP)]
    pub cap_atoms: usize,
    /// Largest strategy space enumerated for one coalition subformula.
    #[arg(long, global = true, default_value_t = 10_000_000)]
    pub cap_strategies: u128,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Add work counters and wall-clock time to the report.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Auto,
    Enumeration,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a state formula holds.
    Check {
        document: PathBuf,
        /// ATL* state formula, e.g. `<<1,2>> X p`.
        formula: String,
        /// State literal such as `{p,q}`; defaults to the document's `init`.
        #[arg(long)]
        state: Option<String>,
        /// Check every state of the universe.
        #[arg(long, conflicts_with = "state")]
        all_states: bool,
        /// `enumeration` bypasses the fixpoint engine for ATL shapes.
        #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
        engine: EngineArg,
    },
    /// Write the exclusive-control image of a document.
    Reduce {
        document: PathBuf,
        /// Target document; atom roles go to `<output>.map`.
        output: PathBuf,
    },
    /// Decide whether an agent has a memoryless winning strategy.
    Win {
        document: PathBuf,
        agent: String,
        /// State literal; defaults to the document's `init`.
        #[arg(long)]
        state: Option<String>,
        /// Also write the witness as a strategy file.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// List the computations compatible with a strategy file.
    Paths {
        document: PathBuf,
        /// Strategy file with `agent N` blocks of `{s} : {a}` rows.
        #[arg(long)]
        strategy: PathBuf,
        /// State literal; defaults to the document's `init`.
        #[arg(long)]
        state: Option<String>,
        /// Depth of the listing for partial profiles.
        #[arg(long, default_value_t = 8)]
        bound: usize,
    },
    /// List structural and format diagnostics.
    Validate { document: PathBuf },
    /// Compare verdicts on random shared structures and their reductions.
    Sweep {
        /// Number of random instances.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Largest formula depth.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct StateVerdict {
    pub state: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRow {
    pub agent: String,
    pub state: String,
    pub action: String,
}

/// Result of one command. Fields serialize in declaration order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<WitnessRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl Report {
    fn new(command: &'static str) -> Self {
        Report {
            command,
            ..Report::default()
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Text => self.render_text(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "command: {}", self.command);
        let fields = [
            ("document", &self.document),
            ("formula", &self.formula),
            ("agent", &self.agent),
            ("state", &self.state),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                let _ = writeln!(w, "{k}: {v}");
            }
        }
        for sv in &self.states {
            let _ = writeln!(w, "at {}: {}", sv.state, sv.holds);
        }
        if let Some(v) = self.verdict {
            let _ = writeln!(w, "verdict: {v}");
        }
        if !self.witness.is_empty() {
            let _ = writeln!(w, "witness:");
            let mut agent = None;
            for row in &self.witness {
                if agent != Some(&row.agent) {
                    let _ = writeln!(w, "  agent {}", row.agent);
                    agent = Some(&row.agent);
                }
                let _ = writeln!(w, "  {} : {}", row.state, row.action);
            }
        }
        for line in &self.lines {
            let _ = writeln!(w, "{line}");
        }
        for d in &self.diagnostics {
            let _ = writeln!(w, "diagnostic {d}");
        }
        if let Some(s) = &self.stats {
            let _ = writeln!(
                w,
                "stats: arena_states={} by_fixpoint={} by_enumeration={} fixpoint_iterations={} \
                 strategies_examined={} product_nodes={} tableau_states={}",
                s.arena_states,
                s.by_fixpoint,
                s.by_enumeration,
                s.fixpoint_iterations,
                s.strategies_examined,
                s.product_nodes,
                s.tableau_states
            );
        }
        if let Some(ms) = self.elapsed_ms {
            let _ = writeln!(w, "elapsed_ms: {ms:.3}");
        }
        out
    }

    /// 0 for true, 1 for false, 0 when there is no verdict.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Some(false) => EXIT_FALSE,
            _ => 0,
        }
    }
}

/// Exit status for a failed command.
pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_resource() {
        EXIT_RESOURCE
    } else {
        EXIT_INPUT
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_document(path: &Path) -> Result<Document> {
    let text = read(path)?;
    parse(&text).map_err(|e| match e {
        Error::Syntax {
            line,
            column,
            message,
        } => Error::Syntax {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn state_arg(g: &GameStructure, literal: Option<&str>, game: &EncodedGame) -> Result<State> {
    match literal {
        Some(text) => {
            let s = g.vocab().parse_state(text)?;
            g.check_state(s)?;
            Ok(s)
        }
        None => game.initial.ok_or_else(|| {
            Error::InvalidGame("no --state given and the document has no `init`".into())
        }),
    }
}

impl Cli {
    pub fn limits(&self) -> Limits {
        Limits {
            max_atoms: self.cap_atoms,
            max_strategies: self.cap_strategies,
        }
    }

    /// Runs the command; writes files for `reduce` and `win --witness-out`.
    pub fn run(&self) -> Result<Report> {
        let start = Instant::now();
        let mut report = match &self.command {
            Command::Check {
                document,
                formula,
                state,
                all_states,
                engine,
            } => self.check(document, formula, state.as_deref(), *all_states, *engine)?,
            Command::Reduce { document, output } => self.reduce(document, output)?,
            Command::Win {
                document,
                agent,
                state,
                witness_out,
            } => self.win(document, agent, state.as_deref(), witness_out.as_deref())?,
            Command::Paths {
                document,
                strategy,
                state,
                bound,
            } => self.paths(document, strategy, state.as_deref(), *bound)?,
            Command::Validate { document } => self.validate(document)?,
            Command::Sweep { count, depth } => self.sweep(*count, *depth)?,
        };
        if self.timing {
            report.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        } else {
            report.stats = None;
        }
        Ok(report)
    }

    fn check(
        &self,
        path: &Path,
        formula: &str,
        state: Option<&str>,
        all: bool,
        engine: EngineArg,
    ) -> Result<Report> {
        let game = load_document(path)?.build(&self.limits())?;
        let g = &game.structure;
        let phi = parse_state(formula)?;
        let checker = Checker::new(g)
            .with_limits(self.limits())
            .with_engine(match engine {
                EngineArg::Auto => Engine::Auto,
                EngineArg::Enumeration => Engine::Enumeration,
            });
        let mut r = Report::new("check");
        r.document = Some(path.display().to_string());
        r.formula = Some(phi.to_string());
        if all {
            let (sat, stats) = checker.satisfying_states(&phi)?;
            r.states = g
                .all_states()
                .map(|s| StateVerdict {
                    state: g.vocab().render(s.0),
                    holds: sat.contains(&s),
                })
                .collect();
            r.verdict = Some(r.states.iter().all(|v| v.holds));
            r.stats = Some(stats);
        } else {
            let s = state_arg(g, state, &game)?;
            let v = checker.check(s, &phi)?;
            r.state = Some(g.vocab().render(s.0));
            r.verdict = Some(v.holds);
            r.stats = Some(v.stats);
        }
        Ok(r)
    }

    fn reduce(&self, path: &Path, output: &Path) -> Result<Report> {
        let game = load_document(path)?.build(&self.limits())?;
        let img = build_epc(&game.structure, &self.limits())?;
        let doc = reduced_document(&img, &game.goals, game.initial)?;
        let map_path = sidecar_path(output);
        write(output, &doc.print())?;
        write(&map_path, &atom_map(&img))?;
        let mut r = Report::new("reduce");
        r.document = Some(path.display().to_string());
        let names = img.epc.vocab().names().join(" ");
        r.lines = vec![
            format!("atoms: {names}"),
            format!("written: {}", output.display()),
            format!("map: {}", map_path.display()),
        ];
        Ok(r)
    }

    fn win(
        &self,
        path: &Path,
        agent: &str,
        state: Option<&str>,
        witness_out: Option<&Path>,
    ) -> Result<Report> {
        let agent: AgentId = agent.parse()?;
        let game = load_document(path)?.build(&self.limits())?;
        let g = &game.structure;
        g.agent_index(agent)?;
        let s = state_arg(g, state, &game)?;
        let out = winning_strategy_query(&game, agent, Some(s))?;
        let mut r = Report::new("win");
        r.document = Some(path.display().to_string());
        r.agent = Some(agent.to_string());
        r.state = Some(g.vocab().render(s.0));
        r.verdict = Some(out.holds);
        r.stats = Some(out.stats);
        if let Some(w) = &out.witness {
            for (a, table) in w.iter() {
                for (st, act) in table {
                    r.witness.push(WitnessRow {
                        agent: a.to_string(),
                        state: g.vocab().render(st.0),
                        action: g.vocab().render(act.0),
                    });
                }
            }
            if let Some(file) = witness_out {
                write(file, &print_strategy(g.vocab(), w))?;
            }
        }
        Ok(r)
    }

    fn paths(
        &self,
        path: &Path,
        strategy: &Path,
        state: Option<&str>,
        bound: usize,
    ) -> Result<Report> {
        let game = load_document(path)?.build(&self.limits())?;
        let g = &game.structure;
        let s = state_arg(g, state, &game)?;
        let profile = parse_strategy(g.vocab(), &read(strategy)?)?;
        let mut r = Report::new("paths");
        r.document = Some(path.display().to_string());
        r.state = Some(g.vocab().render(s.0));
        let covered = profile.agents();
        if g.agents().iter().all(|a| covered.contains(a)) {
            let lasso = g.run(s, &profile)?;
            r.lines.push(format!("lasso: {}", lasso.render(g.vocab())));
            for k in 0..lasso.len() {
                let mark = if k == lasso.prefix.len() {
                    "  <- cycle"
                } else {
                    ""
                };
                r.lines
                    .push(format!("{k} {}{mark}", g.vocab().render(lasso.at(k).0)));
            }
            r.lines
                .push(format!("{} -> {}", lasso.len() - 1, lasso.prefix.len()));
            return Ok(r);
        }
        let coalition = Coalition::new(covered);
        let k = induced(g, &profile, &coalition, &[s])?;
        let mut depth = std::collections::BTreeMap::from([(s, 0usize)]);
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(cur) = queue.pop_front() {
            let d = depth[&cur];
            let steps = k.steps(cur).unwrap_or_default();
            let targets: Vec<String> = steps.iter().map(|t| g.vocab().render(t.0)).collect();
            r.lines.push(format!(
                "depth {d}: {} -> {}",
                g.vocab().render(cur.0),
                targets.join(" ")
            ));
            if d + 1 > bound {
                continue;
            }
            for t in steps {
                if let std::collections::btree_map::Entry::Vacant(e) = depth.entry(t) {
                    e.insert(d + 1);
                    queue.push_back(t);
                }
            }
        }
        Ok(r)
    }

    fn validate(&self, path: &Path) -> Result<Report> {
        let mut r = Report::new("validate");
        r.document = Some(path.display().to_string());
        r.diagnostics = match read(path).and_then(|t| parse(&t)) {
            Ok(doc) => doc.diagnostics(&self.limits()),
            Err(e) => vec![Diagnostic::new(
                crate::structures::DiagnosticCode::Format,
                e.to_string(),
            )],
        };
        r.verdict = Some(r.diagnostics.is_empty());
        Ok(r)
    }

    fn sweep(&self, count: usize, depth: usize) -> Result<Report> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let limits = self.limits();
        let mut r = Report::new("sweep");
        let mut agree = 0usize;
        let mut skipped = 0usize;
        let mut stats = Stats::default();
        for k in 0..count {
            let g = random::structure(&mut rng, &StructureParams::default())?;
            let img = build_epc(&g, &limits)?;
            let fp = FormulaParams::for_structure(&g);
            let phi = random::state_formula(&mut rng, &fp, depth);
            let s = State(rand::Rng::gen_range(&mut rng, 0..=g.vocab().full_mask()));
            let t = match verify_on_image(&img, s, &phi, &limits) {
                Ok(t) => t,
                Err(e) if e.is_resource() => {
                    skipped += 1;
                    r.lines.push(format!("instance {k}: skipped, {e}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            stats.strategies_examined +=
                t.shared_stats.strategies_examined + t.exclusive_stats.strategies_examined;
            if t.agree {
                agree += 1;
            } else {
                r.lines.push(format!(
                    "instance {k}: {} at {} gives {} but the reduction gives {}",
                    t.formula, t.state, t.shared_verdict, t.exclusive_verdict
                ));
            }
        }
        let decided = count - skipped;
        r.lines.push(format!("agreement: {agree}/{decided}"));
        r.lines.push(format!("skipped: {skipped}"));
        r.verdict = Some(agree == decided);
        r.stats = Some(stats);
        Ok(r)
    }
}

/// `out.txt` -> `out.txt.map`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".map");
    PathBuf::from(name)
}
