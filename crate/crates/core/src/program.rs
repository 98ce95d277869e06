//! Programs over the knowledge base and the interpreter that runs them.
//!
//! A program is a list of expressions `( F A0 .. AK )` followed by `RETURN`.
//! Every executed expression stores its denotation in a fresh variable;
//! variables are numbered in creation order after the initial (question)
//! entities, so the first expression of a question with two entities writes
//! `R2`.

use std::fmt;

use thiserror::Error;

use crate::kb::{EntitySet, KbError, KnowledgeBase, PropertyId, Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Hop,
    ArgMax,
    ArgMin,
    Equal,
}

impl Func {
    pub const ALL: [Func; 4] = [Func::Hop, Func::ArgMax, Func::ArgMin, Func::Equal];

    pub fn name(self) -> &'static str {
        match self {
            Func::Hop => "Hop",
            Func::ArgMax => "ArgMax",
            Func::ArgMin => "ArgMin",
            Func::Equal => "Equal",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Number of variable arguments before the trailing property.
    pub fn var_arity(self) -> usize {
        match self {
            Func::Equal => 2,
            _ => 1,
        }
    }
}

/// Variable `R<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn parse(s: &str) -> Option<Var> {
        let digits = s.strip_prefix('R')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return None;
        }
        digits.parse().ok().map(Var)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    Go,
    Open,
    Close,
    Func(Func),
    Return,
    Prop(PropertyId),
    Var(Var),
}

impl Token {
    pub fn text(&self, kb: &KnowledgeBase) -> String {
        match self {
            Token::Go => "GO".into(),
            Token::Open => "(".into(),
            Token::Close => ")".into(),
            Token::Func(f) => f.name().into(),
            Token::Return => "RETURN".into(),
            Token::Prop(p) if p.index() < kb.n_properties() => kb.property_name(*p).into(),
            Token::Prop(p) => format!("<property {}>", p.index()),
            Token::Var(v) => v.to_string(),
        }
    }
}

pub fn tokens_to_text(tokens: &[Token], kb: &KnowledgeBase) -> String {
    tokens.iter().map(|t| t.text(kb)).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expression {
    Hop { var: Var, prop: PropertyId },
    ArgMax { var: Var, prop: PropertyId },
    ArgMin { var: Var, prop: PropertyId },
    Equal { left: Var, right: Var, prop: PropertyId },
}

impl Expression {
    pub fn func(&self) -> Func {
        match self {
            Expression::Hop { .. } => Func::Hop,
            Expression::ArgMax { .. } => Func::ArgMax,
            Expression::ArgMin { .. } => Func::ArgMin,
            Expression::Equal { .. } => Func::Equal,
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        match *self {
            Expression::Hop { var, .. } | Expression::ArgMax { var, .. } | Expression::ArgMin { var, .. } => {
                vec![var]
            }
            Expression::Equal { left, right, .. } => vec![left, right],
        }
    }

    pub fn prop(&self) -> PropertyId {
        match *self {
            Expression::Hop { prop, .. }
            | Expression::ArgMax { prop, .. }
            | Expression::ArgMin { prop, .. }
            | Expression::Equal { prop, .. } => prop,
        }
    }

    pub fn new(func: Func, vars: &[Var], prop: PropertyId) -> Option<Expression> {
        Some(match (func, vars) {
            (Func::Hop, [var]) => Expression::Hop { var: *var, prop },
            (Func::ArgMax, [var]) => Expression::ArgMax { var: *var, prop },
            (Func::ArgMin, [var]) => Expression::ArgMin { var: *var, prop },
            (Func::Equal, [left, right]) => Expression::Equal { left: *left, right: *right, prop },
            _ => return None,
        })
    }

    pub fn tokens(&self) -> Vec<Token> {
        let mut t = vec![Token::Open, Token::Func(self.func())];
        t.extend(self.vars().into_iter().map(Token::Var));
        t.push(Token::Prop(self.prop()));
        t.push(Token::Close);
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Program {
    pub expressions: Vec<Expression>,
    pub terminated: bool,
}

impl Program {
    pub fn tokens(&self) -> Vec<Token> {
        let mut t: Vec<Token> = self.expressions.iter().flat_map(|e| e.tokens()).collect();
        if self.terminated {
            t.push(Token::Return);
        }
        t
    }

    pub fn to_text(&self, kb: &KnowledgeBase) -> String {
        tokens_to_text(&self.tokens(), kb)
    }

    /// Rebuilds a program from a decoded token sequence. Structural checks
    /// only; variable definedness is the decoder's business.
    pub fn from_tokens(tokens: &[Token]) -> Result<Program, ParseError> {
        let mut p = Program::default();
        let mut i = 0;
        while i < tokens.len() {
            match tokens[i] {
                Token::Return => {
                    if i + 1 != tokens.len() {
                        return Err(ParseError::new(i + 1, ParseErrorKind::TrailingTokens));
                    }
                    p.terminated = true;
                    return Ok(p);
                }
                Token::Open => {
                    let Some(Token::Func(func)) = tokens.get(i + 1).copied() else {
                        return Err(ParseError::new(i + 1, ParseErrorKind::Expected("function")));
                    };
                    let mut vars = Vec::new();
                    for k in 0..func.var_arity() {
                        match tokens.get(i + 2 + k) {
                            Some(Token::Var(v)) => vars.push(*v),
                            _ => return Err(ParseError::new(i + 2 + k, ParseErrorKind::Arity(func))),
                        }
                    }
                    let at = i + 2 + vars.len();
                    let Some(Token::Prop(prop)) = tokens.get(at).copied() else {
                        return Err(ParseError::new(at, ParseErrorKind::Arity(func)));
                    };
                    if tokens.get(at + 1) != Some(&Token::Close) {
                        return Err(ParseError::new(at + 1, ParseErrorKind::Expected(")")));
                    }
                    p.expressions.push(Expression::new(func, &vars, prop).expect("arity checked"));
                    i = at + 2;
                }
                _ => return Err(ParseError::new(i, ParseErrorKind::Expected("`(` or RETURN"))),
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Expected(&'static str),
    UnknownFunction(String),
    UnknownProperty(String),
    UndefinedVariable(Var),
    Arity(Func),
    MissingReturn,
    TrailingTokens,
}

/// Parse failure at a token position (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("token {position}: {kind:?}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(position: usize, kind: ParseErrorKind) -> Self {
        ParseError { position, kind }
    }
}

/// Parses whitespace-separated program text. `n_initial` is the number of
/// variables (question entities) defined before the first expression.
pub fn parse_program(text: &str, kb: &KnowledgeBase, n_initial: usize) -> Result<Program, ParseError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut tokens = Vec::with_capacity(words.len());
    let mut defined = n_initial;
    let mut depth_start: Option<usize> = None;
    for (i, w) in words.iter().enumerate() {
        let tok = match *w {
            "(" => {
                depth_start = Some(i);
                Token::Open
            }
            ")" => {
                if depth_start.take().is_some() {
                    defined += 1;
                }
                Token::Close
            }
            "RETURN" => Token::Return,
            "GO" => return Err(ParseError::new(i, ParseErrorKind::Expected("program token"))),
            _ => {
                let prev = i.checked_sub(1).map(|j| words[j]);
                if prev == Some("(") {
                    match Func::from_name(w) {
                        Some(f) => Token::Func(f),
                        None => return Err(ParseError::new(i, ParseErrorKind::UnknownFunction(w.to_string()))),
                    }
                } else if let Some(v) = Var::parse(w) {
                    if v.index() >= defined {
                        return Err(ParseError::new(i, ParseErrorKind::UndefinedVariable(v)));
                    }
                    Token::Var(v)
                } else if let Some(p) = kb.property(w) {
                    Token::Prop(p)
                } else {
                    return Err(ParseError::new(i, ParseErrorKind::UnknownProperty(w.to_string())));
                }
            }
        };
        tokens.push(tok);
    }
    let program = Program::from_tokens(&tokens)?;
    if !program.terminated {
        return Err(ParseError::new(tokens.len(), ParseErrorKind::MissingReturn));
    }
    Ok(program)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("undefined variable {0}")]
    UndefinedVariable(Var),
    #[error("{func:?} over incomparable values ({found} values reachable)")]
    Incomparable { func: Func, found: &'static str },
    #[error("Equal needs two distinct variables, got {0} twice")]
    IdenticalArguments(Var),
    #[error(transparent)]
    Kb(#[from] KbErrorMessage),
}

/// [`KbError`] is not `Clone`; execution errors carry its message instead.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct KbErrorMessage(pub String);

impl From<KbError> for ExecError {
    fn from(e: KbError) -> Self {
        ExecError::Kb(KbErrorMessage(e.to_string()))
    }
}

/// Interpreter state: write-once variables over a borrowed KB.
#[derive(Debug, Clone)]
pub struct Machine<'kb> {
    kb: &'kb KnowledgeBase,
    vars: Vec<EntitySet>,
}

impl<'kb> Machine<'kb> {
    pub fn new(kb: &'kb KnowledgeBase, initial: Vec<EntitySet>) -> Self {
        Machine { kb, vars: initial }
    }

    pub fn kb(&self) -> &'kb KnowledgeBase {
        self.kb
    }

    pub fn vars(&self) -> &[EntitySet] {
        &self.vars
    }

    pub fn get(&self, v: Var) -> Result<&EntitySet, ExecError> {
        self.vars.get(v.index()).ok_or(ExecError::UndefinedVariable(v))
    }

    pub fn exec_hop(&self, v: Var, p: PropertyId) -> Result<EntitySet, ExecError> {
        Ok(self.kb.forward(self.get(v)?, p)?)
    }

    pub fn exec_argmax(&self, v: Var, p: PropertyId) -> Result<EntitySet, ExecError> {
        self.extremum(Func::ArgMax, v, p)
    }

    pub fn exec_argmin(&self, v: Var, p: PropertyId) -> Result<EntitySet, ExecError> {
        self.extremum(Func::ArgMin, v, p)
    }

    /// Scores each entity by its own max (min) p-value and keeps every
    /// entity attaining the best score across the set.
    fn extremum(&self, func: Func, v: Var, p: PropertyId) -> Result<EntitySet, ExecError> {
        let set = self.get(v)?;
        if p.index() >= self.kb.n_properties() {
            return Err(KbError::UnknownProperty(p.index()).into());
        }
        let mut kind: Option<ValueKind> = None;
        let mut scored: Vec<(Value, Value)> = Vec::new();
        for e in set.entities() {
            let objects = self.kb.objects(e, p);
            for o in objects {
                match (kind, o.kind()) {
                    (_, ValueKind::Entity) => return Err(ExecError::Incomparable { func, found: "entity" }),
                    (None, k) => kind = Some(k),
                    (Some(k0), k) if k0 != k => return Err(ExecError::Incomparable { func, found: "mixed" }),
                    _ => {}
                }
            }
            let score = if func == Func::ArgMax { objects.iter().max() } else { objects.iter().min() };
            if let Some(s) = score {
                scored.push((Value::Entity(e), *s));
            }
        }
        let best = if func == Func::ArgMax {
            scored.iter().map(|(_, s)| *s).max()
        } else {
            scored.iter().map(|(_, s)| *s).min()
        };
        Ok(match best {
            Some(b) => scored.into_iter().filter(|(_, s)| *s == b).map(|(e, _)| e).collect(),
            None => EntitySet::empty(),
        })
    }

    pub fn exec_equal(&self, v1: Var, v2: Var, p: PropertyId) -> Result<EntitySet, ExecError> {
        if v1 == v2 {
            return Err(ExecError::IdenticalArguments(v1));
        }
        let (left, right) = (self.get(v1)?, self.get(v2)?);
        if p.index() >= self.kb.n_properties() {
            return Err(KbError::UnknownProperty(p.index()).into());
        }
        Ok(left
            .entities()
            .filter(|e| self.kb.objects(*e, p).iter().any(|o| right.contains(o)))
            .map(Value::Entity)
            .collect())
    }

    /// Stores a value in the next variable.
    pub fn define(&mut self, value: EntitySet) -> Var {
        self.vars.push(value);
        Var(self.vars.len() as u32 - 1)
    }

    /// Evaluates without storing the result.
    pub fn eval(&self, expr: &Expression) -> Result<EntitySet, ExecError> {
        match *expr {
            Expression::Hop { var, prop } => self.exec_hop(var, prop),
            Expression::ArgMax { var, prop } => self.exec_argmax(var, prop),
            Expression::ArgMin { var, prop } => self.exec_argmin(var, prop),
            Expression::Equal { left, right, prop } => self.exec_equal(left, right, prop),
        }
    }

    /// Evaluates and stores the result in the next variable.
    pub fn exec(&mut self, expr: &Expression) -> Result<Var, ExecError> {
        let value = self.eval(expr)?;
        Ok(self.define(value))
    }

    /// Runs every expression in order; returns the denotation of the last one
    /// (the empty set for an empty program).
    pub fn run(&mut self, program: &Program) -> Result<EntitySet, ExecError> {
        let mut last = EntitySet::empty();
        for expr in &program.expressions {
            let v = self.exec(expr)?;
            last = self.vars[v.index()].clone();
        }
        Ok(last)
    }
}

pub fn execute_program(kb: &KnowledgeBase, program: &Program, initial: &[EntitySet]) -> Result<EntitySet, ExecError> {
    Machine::new(kb, initial.to_vec()).run(program)
}

/// Denotation used for rewards: a failing program denotes the empty set.
pub fn denotation(kb: &KnowledgeBase, program: &Program, initial: &[EntitySet]) -> EntitySet {
    execute_program(kb, program, initial).unwrap_or_default()
}
