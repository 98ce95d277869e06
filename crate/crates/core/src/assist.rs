//! Code assist: the set of next tokens that keep a partial program free of
//! syntax, semantic and run-time errors.
//!
//! An expression whose denotation would be empty counts as a semantic error,
//! so every variable created while following [`DecodingState::valid_tokens`]
//! holds at least one value.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kb::{EntitySet, KnowledgeBase, PropertyId};
use crate::program::{Expression, Func, Machine, Program, Token, Var};

pub const DEFAULT_MAX_EXPRESSIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssistError {
    #[error("program already terminated")]
    Terminated,
    #[error("token {0:?} is not valid here")]
    InvalidToken(Token),
    #[error("unreachable decoding state: {0}")]
    Unreachable(String),
}

/// Per-variable facts the oracle needs, computed once at creation.
#[derive(Debug)]
struct VarFacts {
    reachable: Vec<PropertyId>,
    comparable: Vec<PropertyId>,
    /// `(connecting(self, b), connecting(b, self))` for every older variable b.
    links: Vec<(Vec<PropertyId>, Vec<PropertyId>)>,
}

#[derive(Debug, Clone)]
pub struct DecodingState<'kb> {
    machine: Machine<'kb>,
    facts: Vec<Arc<VarFacts>>,
    emitted: Vec<Token>,
    pending: Vec<Token>,
    n_expressions: usize,
    max_expressions: usize,
    terminated: bool,
}

impl<'kb> DecodingState<'kb> {
    pub fn new(kb: &'kb KnowledgeBase, initial: Vec<EntitySet>, max_expressions: usize) -> Self {
        let mut state = DecodingState {
            machine: Machine::new(kb, Vec::new()),
            facts: Vec::new(),
            emitted: Vec::new(),
            pending: Vec::new(),
            n_expressions: 0,
            max_expressions,
            terminated: false,
        };
        for set in initial {
            state.add_var(set);
        }
        state
    }

    fn add_var(&mut self, set: EntitySet) {
        let kb = self.machine.kb();
        let links = self
            .machine
            .vars()
            .iter()
            .map(|other| {
                (
                    kb.connecting_properties(&set, other).into_iter().collect(),
                    kb.connecting_properties(other, &set).into_iter().collect(),
                )
            })
            .collect();
        self.facts.push(Arc::new(VarFacts {
            reachable: kb.reachable_properties(&set).into_iter().collect(),
            comparable: kb.comparable_properties(&set).into_iter().collect(),
            links,
        }));
        self.machine.define(set);
    }

    pub fn kb(&self) -> &'kb KnowledgeBase {
        self.machine.kb()
    }

    pub fn machine(&self) -> &Machine<'kb> {
        &self.machine
    }

    pub fn n_vars(&self) -> usize {
        self.facts.len()
    }

    pub fn n_expressions(&self) -> usize {
        self.n_expressions
    }

    pub fn max_expressions(&self) -> usize {
        self.max_expressions
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn emitted(&self) -> &[Token] {
        &self.emitted
    }

    pub fn program(&self) -> Program {
        Program::from_tokens(&self.emitted).expect("assist only admits well-formed prefixes")
    }

    fn connecting(&self, a: usize, b: usize) -> &[PropertyId] {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Greater => &self.facts[a].links[b].0,
            Less => &self.facts[b].links[a].1,
            Equal => &[],
        }
    }

    fn slot_vars(&self, func: Func) -> Vec<usize> {
        (0..self.n_vars())
            .filter(|&i| match func {
                Func::Hop => !self.facts[i].reachable.is_empty(),
                Func::ArgMax | Func::ArgMin => !self.facts[i].comparable.is_empty(),
                Func::Equal => (0..self.n_vars()).any(|j| !self.connecting(i, j).is_empty()),
            })
            .collect()
    }

    fn var_of(&self, t: Token) -> Result<usize, AssistError> {
        match t {
            Token::Var(v) if v.index() < self.n_vars() => Ok(v.index()),
            _ => Err(AssistError::Unreachable(format!("expected a defined variable, found {t:?}"))),
        }
    }

    /// Sorted set of tokens that may follow the current prefix.
    pub fn valid_tokens(&self) -> Result<Vec<Token>, AssistError> {
        if self.terminated {
            return Err(AssistError::Terminated);
        }
        let vars = |ids: Vec<usize>| ids.into_iter().map(|i| Token::Var(Var(i as u32))).collect::<Vec<_>>();
        let props = |ps: &[PropertyId]| ps.iter().map(|p| Token::Prop(*p)).collect::<Vec<_>>();
        let out = match self.pending.as_slice() {
            [] => {
                let mut out = Vec::new();
                if self.n_expressions < self.max_expressions && Func::ALL.iter().any(|f| !self.slot_vars(*f).is_empty())
                {
                    out.push(Token::Open);
                }
                // RETURN needs a variable to answer with; with nothing else
                // left it is the only way out.
                if self.n_vars() > 0 || out.is_empty() {
                    out.push(Token::Return);
                }
                out
            }
            [Token::Open] => {
                Func::ALL.iter().filter(|f| !self.slot_vars(**f).is_empty()).map(|f| Token::Func(*f)).collect()
            }
            [Token::Open, Token::Func(f)] => vars(self.slot_vars(*f)),
            [Token::Open, Token::Func(Func::Hop), v] => props(&self.facts[self.var_of(*v)?].reachable),
            [Token::Open, Token::Func(Func::ArgMax | Func::ArgMin), v] => {
                props(&self.facts[self.var_of(*v)?].comparable)
            }
            [Token::Open, Token::Func(Func::Equal), v1] => {
                let a = self.var_of(*v1)?;
                vars((0..self.n_vars()).filter(|&b| !self.connecting(a, b).is_empty()).collect())
            }
            [Token::Open, Token::Func(Func::Equal), v1, v2] => {
                props(self.connecting(self.var_of(*v1)?, self.var_of(*v2)?))
            }
            [Token::Open, Token::Func(_), .., Token::Prop(_)] => vec![Token::Close],
            other => return Err(AssistError::Unreachable(format!("pending tokens {other:?}"))),
        };
        let mut out = out;
        out.sort();
        if out.is_empty() {
            return Err(AssistError::Unreachable("no valid continuation".into()));
        }
        Ok(out)
    }

    /// Appends a token, executing the expression it completes. Returns the
    /// new variable when `token` is `)`.
    pub fn push(&mut self, token: Token) -> Result<Option<Var>, AssistError> {
        let valid = self.valid_tokens()?;
        self.push_checked(token, &valid)
    }

    /// Like [`push`](Self::push) but reuses a `valid` list previously
    /// returned by [`valid_tokens`](Self::valid_tokens) for this state.
    pub fn push_checked(&mut self, token: Token, valid: &[Token]) -> Result<Option<Var>, AssistError> {
        if self.terminated {
            return Err(AssistError::Terminated);
        }
        if valid.binary_search(&token).is_err() {
            return Err(AssistError::InvalidToken(token));
        }
        self.emitted.push(token);
        match token {
            Token::Return => {
                self.terminated = true;
                Ok(None)
            }
            Token::Close => {
                let expr = match Program::from_tokens(&self.pending_with_close())
                    .ok()
                    .and_then(|p| p.expressions.first().copied())
                {
                    Some(e) => e,
                    None => return Err(AssistError::Unreachable("incomplete expression".into())),
                };
                let value = self
                    .machine
                    .eval(&expr)
                    .map_err(|e| AssistError::Unreachable(format!("oracle admitted a failing expression: {e}")))?;
                self.pending.clear();
                self.n_expressions += 1;
                self.add_var(value);
                Ok(Some(Var(self.n_vars() as u32 - 1)))
            }
            t => {
                self.pending.push(t);
                Ok(None)
            }
        }
    }

    fn pending_with_close(&self) -> Vec<Token> {
        let mut t = self.pending.clone();
        t.push(Token::Close);
        t
    }

    /// Expression currently being built, if complete enough to evaluate.
    pub fn pending_expression(&self) -> Option<Expression> {
        Program::from_tokens(&self.pending_with_close()).ok()?.expressions.first().copied()
    }
}

/// Free-standing form of [`DecodingState::valid_tokens`].
pub fn valid_tokens(state: &DecodingState<'_>) -> Result<Vec<Token>, AssistError> {
    state.valid_tokens()
}

/// Samples uniformly among valid tokens until RETURN.
pub fn random_rollout(kb: &KnowledgeBase, initial: Vec<EntitySet>, seed: u64, max_expressions: usize) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = DecodingState::new(kb, initial, max_expressions);
    while !state.is_terminated() {
        let valid = state.valid_tokens().expect("reachable state");
        let t = valid[rng.gen_range(0..valid.len())];
        state.push(t).expect("token drawn from valid set");
    }
    state.program()
}

/// All properties mentioned by a token list; handy for diagnostics.
pub fn mentioned_properties(tokens: &[Token]) -> BTreeSet<PropertyId> {
    tokens
        .iter()
        .filter_map(|t| match t {
            Token::Prop(p) => Some(*p),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{KnowledgeBaseBuilder, Value};
    use crate::program::execute_program;

    fn lincoln() -> KnowledgeBase {
        KnowledgeBase::parse("Hodgenville\tPlaceOfBirthOf\tAbeLincoln\tentity\n").unwrap()
    }

    fn one(kb: &KnowledgeBase, name: &str) -> EntitySet {
        EntitySet::singleton(Value::Entity(kb.entity(name).unwrap()))
    }

    #[test]
    fn after_open_only_functions() {
        let kb = lincoln();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "Hodgenville")], 3);
        s.push(Token::Open).unwrap();
        let valid = s.valid_tokens().unwrap();
        assert!(valid.iter().all(|t| matches!(t, Token::Func(_))));
        assert_eq!(valid, vec![Token::Func(Func::Hop)]);
    }

    #[test]
    fn hop_slot_offers_reachable_relations() {
        let kb = lincoln();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "Hodgenville")], 3);
        for t in [Token::Open, Token::Func(Func::Hop), Token::Var(Var(0))] {
            s.push(t).unwrap();
        }
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Prop(kb.property("PlaceOfBirthOf").unwrap())]);
    }

    #[test]
    fn no_variables_only_return() {
        let kb = lincoln();
        let s = DecodingState::new(&kb, vec![], 3);
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Return]);
    }

    #[test]
    fn closing_executes_and_defines_variable() {
        let kb = lincoln();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "Hodgenville")], 3);
        let p = kb.property("PlaceOfBirthOf").unwrap();
        for t in [Token::Open, Token::Func(Func::Hop), Token::Var(Var(0)), Token::Prop(p)] {
            assert_eq!(s.push(t).unwrap(), None);
        }
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Close]);
        assert_eq!(s.push(Token::Close).unwrap(), Some(Var(1)));
        assert_eq!(s.machine().vars()[1], one(&kb, "AbeLincoln"));
        // R0 -> R1 by PlaceOfBirthOf makes an Equal expression possible.
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Open, Token::Return]);
        s.push(Token::Open).unwrap();
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Func(Func::Hop), Token::Func(Func::Equal)]);
    }

    #[test]
    fn max_expressions_forces_return() {
        let kb = lincoln();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "Hodgenville")], 1);
        let p = kb.property("PlaceOfBirthOf").unwrap();
        for t in [Token::Open, Token::Func(Func::Hop), Token::Var(Var(0)), Token::Prop(p), Token::Close] {
            s.push(t).unwrap();
        }
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Return]);
    }

    #[test]
    fn invalid_tokens_are_rejected() {
        let kb = lincoln();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "Hodgenville")], 3);
        assert_eq!(s.push(Token::Close), Err(AssistError::InvalidToken(Token::Close)));
        s.push(Token::Return).unwrap();
        assert_eq!(s.valid_tokens(), Err(AssistError::Terminated));
    }

    #[test]
    fn argmax_needs_comparable_property() {
        let mut b = KnowledgeBaseBuilder::new();
        b.entity_triple("USA", "CityIn", "NYC")
            .entity_triple("USA", "CityIn", "LA")
            .number_triple("NYC", "Pop", 8.4e6)
            .number_triple("LA", "Pop", 3.9e6);
        let kb = b.build();
        let mut s = DecodingState::new(&kb, vec![one(&kb, "USA")], 3);
        s.push(Token::Open).unwrap();
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Func(Func::Hop)]);
        for t in [
            Token::Func(Func::Hop),
            Token::Var(Var(0)),
            Token::Prop(kb.property("CityIn").unwrap()),
            Token::Close,
            Token::Open,
        ] {
            s.push(t).unwrap();
        }
        let valid = s.valid_tokens().unwrap();
        assert!(valid.contains(&Token::Func(Func::ArgMax)) && valid.contains(&Token::Func(Func::ArgMin)));
        s.push(Token::Func(Func::ArgMax)).unwrap();
        assert_eq!(s.valid_tokens().unwrap(), vec![Token::Var(Var(1))]);
    }

    #[test]
    fn rollout_examples() {
        let kb = lincoln();
        let init = vec![one(&kb, "Hodgenville")];
        let p = random_rollout(&kb, init.clone(), 1, 3);
        assert!(p.terminated && p.expressions.len() <= 3);
        assert!(execute_program(&kb, &p, &init).is_ok());
        assert_eq!(p, random_rollout(&kb, init, 1, 3));

        let p = random_rollout(&kb, vec![one(&kb, "AbeLincoln")], 1, 3);
        assert_eq!(p, Program { expressions: vec![], terminated: true });
    }
}
