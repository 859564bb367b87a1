//! Direct evaluation of LTL formulas on lasso-shaped paths. Shares no code
//! with the automaton-based checker, so each serves as the other's oracle.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::formulas::{PathFormula, StateFormula};
use crate::structures::{LassoPath, Vocabulary};

/// Truth of `psi` at position 0 of `prefix · cycle^ω`.
pub fn eval_ltl_on_lasso(vocab: &Vocabulary, lasso: &LassoPath, psi: &PathFormula) -> Result<bool> {
    if lasso.cycle.is_empty() {
        return Err(Error::MalformedPath("empty cycle".into()));
    }
    if psi.has_coalition() {
        return Err(Error::Contract(
            "lasso evaluation accepts LTL formulas only".into(),
        ));
    }
    let mut ev = LassoEval {
        vocab,
        lasso,
        memo: HashMap::new(),
    };
    ev.path(psi, 0)
}

struct LassoEval<'a> {
    vocab: &'a Vocabulary,
    lasso: &'a LassoPath,
    memo: HashMap<(*const PathFormula, usize), bool>,
}

impl LassoEval<'_> {
    fn state(&self, f: &StateFormula, pos: usize) -> Result<bool> {
        Ok(match f {
            StateFormula::True => true,
            StateFormula::Atom(name) => self.lasso.at(pos).holds(self.vocab.require(name)?),
            StateFormula::Not(a) => !self.state(a, pos)?,
            StateFormula::Or(a, b) => self.state(a, pos)? || self.state(b, pos)?,
            StateFormula::Coalition(..) => unreachable!("rejected up front"),
        })
    }

    fn path(&mut self, f: &PathFormula, pos: usize) -> Result<bool> {
        let key = (f as *const PathFormula, pos);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = match f {
            PathFormula::State(s) => self.state(s, pos)?,
            PathFormula::Not(a) => !self.path(a, pos)?,
            PathFormula::Or(a, b) => self.path(a, pos)? || self.path(b, pos)?,
            PathFormula::Next(a) => {
                let next = self.lasso.next_position(pos);
                self.path(a, next)?
            }
            PathFormula::Until(a, b) => {
                // Every position reachable from `pos` is met within len() steps.
                let mut p = pos;
                let mut found = false;
                for _ in 0..=self.lasso.len() {
                    if self.path(b, p)? {
                        found = true;
                        break;
                    }
                    if !self.path(a, p)? {
                        break;
                    }
                    p = self.lasso.next_position(p);
                }
                found
            }
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::parse_path;
    use crate::structures::State;

    fn vocab() -> Vocabulary {
        Vocabulary::new(["p", "q"]).unwrap()
    }

    fn eval(prefix: &[u64], cycle: &[u64], f: &str) -> bool {
        let l = LassoPath::new(
            prefix.iter().map(|&b| State(b)).collect(),
            cycle.iter().map(|&b| State(b)).collect(),
        )
        .unwrap();
        eval_ltl_on_lasso(&vocab(), &l, &parse_path(f).unwrap()).unwrap()
    }

    #[test]
    fn basic_examples() {
        assert!(eval(&[], &[1], "G p"));
        assert!(eval(&[0], &[1], "X p"));
        assert!(eval(&[], &[0, 1], "true U p"));
        assert!(!eval(&[], &[0, 1], "p"));
    }

    #[test]
    fn until_needs_left_operand() {
        // p holds at 0 only, q from 2 on
        assert!(!eval(&[1, 0], &[2], "p U q"));
        assert!(eval(&[1, 1], &[2], "p U q"));
        assert!(!eval(&[], &[1], "p U q"));
    }

    #[test]
    fn nested_temporal() {
        assert!(eval(&[0], &[0, 1], "G F p"));
        assert!(!eval(&[1], &[0], "G F p"));
        assert!(eval(&[1], &[0], "F G ~p"));
    }

    #[test]
    fn rejects_coalitions() {
        let l = LassoPath::new(vec![], vec![State(0)]).unwrap();
        let f = parse_path("<<1>> X p").unwrap();
        assert!(eval_ltl_on_lasso(&vocab(), &l, &f).is_err());
    }
}
