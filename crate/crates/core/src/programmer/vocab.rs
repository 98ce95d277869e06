use std::collections::{BTreeSet, HashMap};

use crate::kb::PropertyId;
use crate::program::{Func, Token, Var};

pub const UNK: &str = "<unk>";

/// Question-word vocabulary: `<unk>`, `ENT`, then the sorted training words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        WordVocab { words, index }
    }

    pub fn build<'a, I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut seen = BTreeSet::new();
        for s in sentences {
            for w in s {
                let w = w.as_ref();
                if w != UNK && w != super::ENT {
                    seen.insert(w.to_string());
                }
            }
        }
        let mut words = vec![UNK.to_string(), super::ENT.to_string()];
        words.extend(seen);
        Self::from_words(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, w: &str) -> usize {
        self.index.get(w).copied().unwrap_or(0)
    }

    pub fn ids<S: AsRef<str>>(&self, ws: &[S]) -> Vec<usize> {
        ws.iter().map(|w| self.id(w.as_ref())).collect()
    }
}

/// Decoder token ids. Static tokens come first, in the same order as
/// [`Token`]'s `Ord`; variable `R<k>` is `n_static + k`. Beam ties are broken
/// on these ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenVocab {
    n_props: usize,
}

const FIXED: usize = 8;

impl TokenVocab {
    pub fn new(n_props: usize) -> Self {
        TokenVocab { n_props }
    }

    pub fn n_static(&self) -> usize {
        FIXED + self.n_props
    }

    pub fn id(&self, t: Token) -> usize {
        match t {
            Token::Go => 0,
            Token::Open => 1,
            Token::Close => 2,
            Token::Func(Func::Hop) => 3,
            Token::Func(Func::ArgMax) => 4,
            Token::Func(Func::ArgMin) => 5,
            Token::Func(Func::Equal) => 6,
            Token::Return => 7,
            Token::Prop(p) => FIXED + p.index(),
            Token::Var(v) => self.n_static() + v.index(),
        }
    }

    pub fn token(&self, id: usize) -> Token {
        match id {
            0 => Token::Go,
            1 => Token::Open,
            2 => Token::Close,
            3 => Token::Func(Func::Hop),
            4 => Token::Func(Func::ArgMax),
            5 => Token::Func(Func::ArgMin),
            6 => Token::Func(Func::Equal),
            7 => Token::Return,
            i if i < self.n_static() => Token::Prop(PropertyId((i - FIXED) as u32)),
            i => Token::Var(Var((i - self.n_static()) as u32)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_ids_follow_token_order() {
        let v = TokenVocab::new(3);
        let ids: Vec<usize> = (0..14).collect();
        let toks: Vec<Token> = ids.iter().map(|i| v.token(*i)).collect();
        let mut sorted = toks.clone();
        sorted.sort();
        assert_eq!(toks, sorted);
        for (i, t) in toks.iter().enumerate() {
            assert_eq!(v.id(*t), i);
        }
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let s: Vec<&str> = vec!["what", "is", "ENT"];
        let v = WordVocab::build([s.as_slice()]);
        assert_eq!(v.words(), &["<unk>", "ENT", "is", "what"]);
        assert_eq!(v.ids(&["what", "nope", "ENT"]), vec![3, 0, 1]);
    }
}
