//! ATL* formulas: AST, concrete syntax, fragment classification and the
//! next-doubling translation used by the shared-to-exclusive reduction.
//!
//! Only the core connectives are represented (`~`, `|`, `X`, `U`, `<<C>>`
//! and the constant `true`). The parser desugars `&`, `->`, `F`, `G` and
//! `false` into them.
//!
//! ASTs are kept in a canonical form: a negation or disjunction whose
//! operands are all state formulas is itself a state formula. The smart
//! constructors on [`PathFormula`] maintain that form, which is what makes
//! `parse(render(f)) == f` hold.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::structures::AgentId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(BTreeSet<AgentId>);

impl Coalition {
    pub fn new(members: impl IntoIterator<Item = AgentId>) -> Self {
        Coalition(members.into_iter().collect())
    }

    pub fn empty() -> Self {
        Coalition::default()
    }

    pub fn members(&self) -> &BTreeSet<AgentId> {
        &self.0
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.0.contains(&agent)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "<<{}>>", ids.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateFormula {
    True,
    Atom(String),
    Not(Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
    Coalition(Coalition, Box<PathFormula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathFormula {
    State(StateFormula),
    Not(Box<PathFormula>),
    Or(Box<PathFormula>, Box<PathFormula>),
    Next(Box<PathFormula>),
    Until(Box<PathFormula>, Box<PathFormula>),
}

/// Either kind of formula, as produced by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    State(StateFormula),
    Path(PathFormula),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FragmentTag {
    #[serde(rename = "LTL")]
    Ltl,
    #[serde(rename = "ATL")]
    Atl,
    #[serde(rename = "ATL*")]
    AtlStar,
}

impl fmt::Display for FragmentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FragmentTag::Ltl => "LTL",
            FragmentTag::Atl => "ATL",
            FragmentTag::AtlStar => "ATL*",
        })
    }
}

impl StateFormula {
    pub fn atom(name: impl Into<String>) -> Self {
        StateFormula::Atom(name.into())
    }

    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn or(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn coalition(c: Coalition, path: PathFormula) -> Self {
        StateFormula::Coalition(c, Box::new(path))
    }

    pub fn has_coalition(&self) -> bool {
        match self {
            StateFormula::True | StateFormula::Atom(_) => false,
            StateFormula::Not(a) => a.has_coalition(),
            StateFormula::Or(a, b) => a.has_coalition() || b.has_coalition(),
            StateFormula::Coalition(..) => true,
        }
    }
}

impl PathFormula {
    pub fn state(f: StateFormula) -> Self {
        PathFormula::State(f)
    }

    pub fn atom(name: impl Into<String>) -> Self {
        PathFormula::State(StateFormula::atom(name))
    }

    pub fn truth() -> Self {
        PathFormula::State(StateFormula::True)
    }

    pub fn not(f: PathFormula) -> Self {
        match f {
            PathFormula::State(s) => PathFormula::State(StateFormula::not(s)),
            other => PathFormula::Not(Box::new(other)),
        }
    }

    pub fn or(a: PathFormula, b: PathFormula) -> Self {
        match (a, b) {
            (PathFormula::State(x), PathFormula::State(y)) => {
                PathFormula::State(StateFormula::or(x, y))
            }
            (a, b) => PathFormula::Or(Box::new(a), Box::new(b)),
        }
    }

    /// `a & b` as `~(~a | ~b)`.
    pub fn and(a: PathFormula, b: PathFormula) -> Self {
        Self::not(Self::or(Self::not(a), Self::not(b)))
    }

    /// `a -> b` as `~a | b`.
    pub fn implies(a: PathFormula, b: PathFormula) -> Self {
        Self::or(Self::not(a), b)
    }

    pub fn next(f: PathFormula) -> Self {
        PathFormula::Next(Box::new(f))
    }

    pub fn until(a: PathFormula, b: PathFormula) -> Self {
        PathFormula::Until(Box::new(a), Box::new(b))
    }

    /// `F f` as `true U f`.
    pub fn eventually(f: PathFormula) -> Self {
        Self::until(Self::truth(), f)
    }

    /// `G f` as `~F ~f`.
    pub fn always(f: PathFormula) -> Self {
        Self::not(Self::eventually(Self::not(f)))
    }

    pub fn has_coalition(&self) -> bool {
        match self {
            PathFormula::State(s) => s.has_coalition(),
            PathFormula::Not(a) | PathFormula::Next(a) => a.has_coalition(),
            PathFormula::Or(a, b) | PathFormula::Until(a, b) => {
                a.has_coalition() || b.has_coalition()
            }
        }
    }

    /// No `Not`/`Or` node with only state operands, recursively.
    pub fn is_canonical(&self) -> bool {
        match self {
            PathFormula::State(s) => state_is_canonical(s),
            PathFormula::Not(a) => !matches!(**a, PathFormula::State(_)) && a.is_canonical(),
            PathFormula::Or(a, b) => {
                !(matches!(**a, PathFormula::State(_)) && matches!(**b, PathFormula::State(_)))
                    && a.is_canonical()
                    && b.is_canonical()
            }
            PathFormula::Next(a) => a.is_canonical(),
            PathFormula::Until(a, b) => a.is_canonical() && b.is_canonical(),
        }
    }
}

fn state_is_canonical(s: &StateFormula) -> bool {
    match s {
        StateFormula::True | StateFormula::Atom(_) => true,
        StateFormula::Not(a) => state_is_canonical(a),
        StateFormula::Or(a, b) => state_is_canonical(a) && state_is_canonical(b),
        StateFormula::Coalition(_, p) => p.is_canonical(),
    }
}

impl Formula {
    /// Wraps a path formula, collapsing it to a state formula when possible.
    pub fn from_path(p: PathFormula) -> Self {
        match p {
            PathFormula::State(s) => Formula::State(s),
            other => Formula::Path(other),
        }
    }

    pub fn into_path(self) -> PathFormula {
        match self {
            Formula::State(s) => PathFormula::State(s),
            Formula::Path(p) => p,
        }
    }

    pub fn as_path(&self) -> PathFormula {
        self.clone().into_path()
    }

    pub fn into_state(self) -> Result<StateFormula> {
        match self {
            Formula::State(s) => Ok(s),
            Formula::Path(p) => Err(Error::Contract(format!(
                "`{}` is a path formula, a state formula is required",
                render_path(&p)
            ))),
        }
    }

    pub fn is_state(&self) -> bool {
        matches!(self, Formula::State(_))
    }
}

impl From<StateFormula> for Formula {
    fn from(s: StateFormula) -> Self {
        Formula::State(s)
    }
}

impl From<PathFormula> for Formula {
    fn from(p: PathFormula) -> Self {
        Formula::from_path(p)
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    LAngle,
    RAngle,
    Comma,
    LParen,
    RParen,
    Tilde,
    Bar,
    Amp,
    Arrow,
    Next,
    Until,
    Finally,
    Globally,
    True,
    False,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l, cl) = (line, col);
        let mut push = |tok: Tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: l,
                column: cl,
            });
            *i += width;
            *col += width;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '<' if chars.get(i + 1) == Some(&'<') => push(Tok::LAngle, 2, &mut i, &mut col),
            '>' if chars.get(i + 1) == Some(&'>') => push(Tok::RAngle, 2, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'>') => push(Tok::Arrow, 2, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '~' => push(Tok::Tilde, 1, &mut i, &mut col),
            '|' => push(Tok::Bar, 1, &mut i, &mut col),
            '&' => push(Tok::Amp, 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<u32>()
                    .map_err(|_| Error::syntax(l, cl, format!("integer `{s}` out of range")))?;
                col += i - start;
                out.push(Token {
                    tok: Tok::Int(v),
                    line: l,
                    column: cl,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let tok = match s.as_str() {
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "F" => Tok::Finally,
                    "G" => Tok::Globally,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(s),
                };
                out.push(Token {
                    tok,
                    line: l,
                    column: cl,
                });
            }
            other => {
                return Err(Error::syntax(
                    l,
                    cl,
                    format!("unexpected character `{other}`"),
                ))
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        Error::syntax(t.line, t.column, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    // until := implies ("U" until)?
    fn until(&mut self) -> Result<PathFormula> {
        let lhs = self.implies()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(PathFormula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    // implies := or ("->" implies)?
    fn implies(&mut self) -> Result<PathFormula> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(PathFormula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<PathFormula> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.and()?;
            lhs = PathFormula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<PathFormula> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = PathFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PathFormula> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(PathFormula::not(self.unary()?))
            }
            Tok::Next => {
                self.bump();
                Ok(PathFormula::next(self.unary()?))
            }
            Tok::Finally => {
                self.bump();
                Ok(PathFormula::eventually(self.unary()?))
            }
            Tok::Globally => {
                self.bump();
                Ok(PathFormula::always(self.unary()?))
            }
            Tok::LAngle => {
                self.bump();
                let coalition = self.agent_list()?;
                let body = self.unary()?;
                Ok(PathFormula::State(StateFormula::coalition(coalition, body)))
            }
            _ => self.primary(),
        }
    }

    fn agent_list(&mut self) -> Result<Coalition> {
        let mut members = BTreeSet::new();
        if *self.peek() == Tok::RAngle {
            self.bump();
            return Ok(Coalition(members));
        }
        loop {
            match self.peek().clone() {
                Tok::Int(0) => return Err(self.error("agent ids start at 1")),
                Tok::Int(v) => {
                    self.bump();
                    if !members.insert(AgentId(v)) {
                        return Err(self.error(format!("agent {v} listed twice")));
                    }
                }
                _ => return Err(self.error("expected agent id")),
            }
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RAngle => {
                    self.bump();
                    return Ok(Coalition(members));
                }
                _ => return Err(self.error("expected `,` or `>>`")),
            }
        }
    }

    fn primary(&mut self) -> Result<PathFormula> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(PathFormula::atom(name))
            }
            Tok::True => {
                self.bump();
                Ok(PathFormula::truth())
            }
            Tok::False => {
                self.bump();
                Ok(PathFormula::not(PathFormula::truth()))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.until()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Eof => Err(self.error("unexpected end of input")),
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses a formula; the result is a state formula whenever possible.
pub fn parse(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.until()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("trailing input"));
    }
    Ok(Formula::from_path(f))
}

pub fn parse_state(text: &str) -> Result<StateFormula> {
    parse(text)?.into_state()
}

pub fn parse_path(text: &str) -> Result<PathFormula> {
    parse(text).map(Formula::into_path)
}

// ---------------------------------------------------------------------------
// Rendering

const PREC_UNTIL: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_UNARY: u8 = 3;

fn wrap(own: u8, ctx: u8, body: String) -> String {
    if own < ctx {
        format!("({body})")
    } else {
        body
    }
}

/// An operand under a negation, at either level.
#[derive(Clone, Copy)]
enum Operand<'a> {
    State(&'a StateFormula),
    Path(&'a PathFormula),
}

impl Operand<'_> {
    fn render(self, ctx: u8) -> String {
        match self {
            Operand::State(s) => render_state_at(s, ctx),
            Operand::Path(p) => render_path_at(p, ctx),
        }
    }
}

/// `a` when `f` is the negation of `a`.
fn negated(f: &PathFormula) -> Option<Operand<'_>> {
    match f {
        PathFormula::Not(a) => Some(Operand::Path(a)),
        PathFormula::State(StateFormula::Not(a)) => Some(Operand::State(a)),
        _ => None,
    }
}

fn render_and(a: Operand<'_>, b: Operand<'_>, ctx: u8) -> String {
    wrap(
        PREC_AND,
        ctx,
        format!("{} & {}", a.render(PREC_AND), b.render(PREC_UNARY)),
    )
}

fn render_state_at(f: &StateFormula, ctx: u8) -> String {
    match f {
        StateFormula::True => "true".to_string(),
        StateFormula::Atom(a) => a.clone(),
        StateFormula::Not(inner) => match &**inner {
            StateFormula::Or(a, b) => match (&**a, &**b) {
                (StateFormula::Not(a), StateFormula::Not(b)) => {
                    render_and(Operand::State(a), Operand::State(b), ctx)
                }
                _ => format!("~{}", render_state_at(inner, PREC_UNARY)),
            },
            _ => format!("~{}", render_state_at(inner, PREC_UNARY)),
        },
        StateFormula::Or(a, b) => wrap(
            PREC_OR,
            ctx,
            format!(
                "{} | {}",
                render_state_at(a, PREC_OR),
                render_state_at(b, PREC_AND)
            ),
        ),
        StateFormula::Coalition(c, p) => wrap(
            PREC_UNARY,
            ctx,
            format!("{c} {}", render_path_at(p, PREC_UNARY)),
        ),
    }
}

fn render_path_at(f: &PathFormula, ctx: u8) -> String {
    match f {
        PathFormula::State(s) => render_state_at(s, ctx),
        PathFormula::Not(inner) => {
            match &**inner {
                PathFormula::Or(a, b) => {
                    if let (Some(a), Some(b)) = (negated(a), negated(b)) {
                        return render_and(a, b, ctx);
                    }
                }
                PathFormula::Until(t, b) if is_true(t) => {
                    if let Some(b) = negated(b) {
                        return format!("G {}", b.render(PREC_UNARY));
                    }
                }
                _ => {}
            }
            wrap(
                PREC_UNARY,
                ctx,
                format!("~{}", render_path_at(inner, PREC_UNARY)),
            )
        }
        PathFormula::Next(a) => wrap(
            PREC_UNARY,
            ctx,
            format!("X {}", render_path_at(a, PREC_UNARY)),
        ),
        PathFormula::Or(a, b) => wrap(
            PREC_OR,
            ctx,
            format!(
                "{} | {}",
                render_path_at(a, PREC_OR),
                render_path_at(b, PREC_AND)
            ),
        ),
        PathFormula::Until(a, b) if is_true(a) => {
            format!("F {}", render_path_at(b, PREC_UNARY))
        }
        PathFormula::Until(a, b) => wrap(
            PREC_UNTIL,
            ctx,
            format!(
                "{} U {}",
                render_path_at(a, PREC_OR),
                render_path_at(b, PREC_UNTIL)
            ),
        ),
    }
}

fn is_true(f: &PathFormula) -> bool {
    matches!(f, PathFormula::State(StateFormula::True))
}

pub fn render_state(f: &StateFormula) -> String {
    render_state_at(f, PREC_UNTIL)
}

pub fn render_path(f: &PathFormula) -> String {
    render_path_at(f, PREC_UNTIL)
}

pub fn render(f: &Formula) -> String {
    match f {
        Formula::State(s) => render_state(s),
        Formula::Path(p) => render_path(p),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_state(self))
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_path(self))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

// ---------------------------------------------------------------------------
// Classification

/// True when `f` is an ATL state formula: every coalition argument is
/// `X φ` or `φ U φ` over ATL state formulas.
pub fn is_atl_state(f: &StateFormula) -> bool {
    match f {
        StateFormula::True | StateFormula::Atom(_) => true,
        StateFormula::Not(a) => is_atl_state(a),
        StateFormula::Or(a, b) => is_atl_state(a) && is_atl_state(b),
        StateFormula::Coalition(_, p) => atl_shape(p).is_some(),
    }
}

/// The ATL shape of a coalition argument, if it has one.
pub(crate) fn atl_shape(p: &PathFormula) -> Option<AtlShape<'_>> {
    match p {
        PathFormula::Next(a) => match &**a {
            PathFormula::State(s) if is_atl_state(s) => Some(AtlShape::Next(s)),
            _ => None,
        },
        PathFormula::Until(a, b) => match (&**a, &**b) {
            (PathFormula::State(x), PathFormula::State(y))
                if is_atl_state(x) && is_atl_state(y) =>
            {
                Some(AtlShape::Until(x, y))
            }
            _ => None,
        },
        _ => None,
    }
}

pub(crate) enum AtlShape<'a> {
    Next(&'a StateFormula),
    Until(&'a StateFormula, &'a StateFormula),
}

pub fn classify(f: &Formula) -> FragmentTag {
    match f {
        Formula::State(s) if !s.has_coalition() => FragmentTag::Ltl,
        Formula::Path(p) if !p.has_coalition() => FragmentTag::Ltl,
        Formula::State(s) if is_atl_state(s) => FragmentTag::Atl,
        _ => FragmentTag::AtlStar,
    }
}

// ---------------------------------------------------------------------------
// Translation

/// Doubles every next operator; everything else is kept.
pub fn tr_state(f: &StateFormula) -> StateFormula {
    match f {
        StateFormula::True | StateFormula::Atom(_) => f.clone(),
        StateFormula::Not(a) => StateFormula::not(tr_state(a)),
        StateFormula::Or(a, b) => StateFormula::or(tr_state(a), tr_state(b)),
        StateFormula::Coalition(c, p) => StateFormula::coalition(c.clone(), tr_path(p)),
    }
}

pub fn tr_path(f: &PathFormula) -> PathFormula {
    match f {
        PathFormula::State(s) => PathFormula::State(tr_state(s)),
        PathFormula::Not(a) => PathFormula::Not(Box::new(tr_path(a))),
        PathFormula::Or(a, b) => PathFormula::Or(Box::new(tr_path(a)), Box::new(tr_path(b))),
        PathFormula::Next(a) => PathFormula::next(PathFormula::next(tr_path(a))),
        PathFormula::Until(a, b) => PathFormula::until(tr_path(a), tr_path(b)),
    }
}

pub fn translate_tr(f: &Formula) -> Formula {
    match f {
        Formula::State(s) => Formula::State(tr_state(s)),
        Formula::Path(p) => Formula::Path(tr_path(p)),
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Node counts per constructor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub trues: usize,
    pub atoms: usize,
    pub state_nots: usize,
    pub state_ors: usize,
    pub coalitions: usize,
    pub embeds: usize,
    pub path_nots: usize,
    pub path_ors: usize,
    pub nexts: usize,
    pub untils: usize,
}

impl NodeCounts {
    pub fn of(f: &Formula) -> Self {
        let mut c = NodeCounts::default();
        match f {
            Formula::State(s) => c.state(s),
            Formula::Path(p) => c.path(p),
        }
        c
    }

    pub fn total(&self) -> usize {
        self.trues
            + self.atoms
            + self.state_nots
            + self.state_ors
            + self.coalitions
            + self.embeds
            + self.path_nots
            + self.path_ors
            + self.nexts
            + self.untils
    }

    fn state(&mut self, f: &StateFormula) {
        match f {
            StateFormula::True => self.trues += 1,
            StateFormula::Atom(_) => self.atoms += 1,
            StateFormula::Not(a) => {
                self.state_nots += 1;
                self.state(a)
            }
            StateFormula::Or(a, b) => {
                self.state_ors += 1;
                self.state(a);
                self.state(b)
            }
            StateFormula::Coalition(_, p) => {
                self.coalitions += 1;
                self.path(p)
            }
        }
    }

    fn path(&mut self, f: &PathFormula) {
        match f {
            PathFormula::State(s) => {
                self.embeds += 1;
                self.state(s)
            }
            PathFormula::Not(a) => {
                self.path_nots += 1;
                self.path(a)
            }
            PathFormula::Or(a, b) => {
                self.path_ors += 1;
                self.path(a);
                self.path(b)
            }
            PathFormula::Next(a) => {
                self.nexts += 1;
                self.path(a)
            }
            PathFormula::Until(a, b) => {
                self.untils += 1;
                self.path(a);
                self.path(b)
            }
        }
    }
}

/// Operator nesting depth; atoms and `true` have depth 0 and the
/// state-in-path embedding is not counted.
pub fn state_depth(f: &StateFormula) -> usize {
    match f {
        StateFormula::True | StateFormula::Atom(_) => 0,
        StateFormula::Not(a) => 1 + state_depth(a),
        StateFormula::Or(a, b) => 1 + state_depth(a).max(state_depth(b)),
        StateFormula::Coalition(_, p) => 1 + path_depth(p),
    }
}

pub fn path_depth(f: &PathFormula) -> usize {
    match f {
        PathFormula::State(s) => state_depth(s),
        PathFormula::Not(a) | PathFormula::Next(a) => 1 + path_depth(a),
        PathFormula::Or(a, b) | PathFormula::Until(a, b) => 1 + path_depth(a).max(path_depth(b)),
    }
}

pub fn depth(f: &Formula) -> usize {
    match f {
        Formula::State(s) => state_depth(s),
        Formula::Path(p) => path_depth(p),
    }
}

/// Atom names occurring in the formula.
pub fn atoms(f: &Formula) -> BTreeSet<String> {
    fn st(f: &StateFormula, out: &mut BTreeSet<String>) {
        match f {
            StateFormula::True => {}
            StateFormula::Atom(a) => {
                out.insert(a.clone());
            }
            StateFormula::Not(a) => st(a, out),
            StateFormula::Or(a, b) => {
                st(a, out);
                st(b, out)
            }
            StateFormula::Coalition(_, p) => pa(p, out),
        }
    }
    fn pa(f: &PathFormula, out: &mut BTreeSet<String>) {
        match f {
            PathFormula::State(s) => st(s, out),
            PathFormula::Not(a) | PathFormula::Next(a) => pa(a, out),
            PathFormula::Or(a, b) | PathFormula::Until(a, b) => {
                pa(a, out);
                pa(b, out)
            }
        }
    }
    let mut out = BTreeSet::new();
    match f {
        Formula::State(s) => st(s, &mut out),
        Formula::Path(p) => pa(p, &mut out),
    }
    out
}

/// Agents named in any coalition operator.
pub fn agents(f: &Formula) -> BTreeSet<AgentId> {
    fn st(f: &StateFormula, out: &mut BTreeSet<AgentId>) {
        match f {
            StateFormula::True | StateFormula::Atom(_) => {}
            StateFormula::Not(a) => st(a, out),
            StateFormula::Or(a, b) => {
                st(a, out);
                st(b, out)
            }
            StateFormula::Coalition(c, p) => {
                out.extend(c.members().iter().copied());
                pa(p, out)
            }
        }
    }
    fn pa(f: &PathFormula, out: &mut BTreeSet<AgentId>) {
        match f {
            PathFormula::State(s) => st(s, out),
            PathFormula::Not(a) | PathFormula::Next(a) => pa(a, out),
            PathFormula::Or(a, b) | PathFormula::Until(a, b) => {
                pa(a, out);
                pa(b, out)
            }
        }
    }
    let mut out = BTreeSet::new();
    match f {
        Formula::State(s) => st(s, &mut out),
        Formula::Path(p) => pa(p, &mut out),
    }
    out
}
