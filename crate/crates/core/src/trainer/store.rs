use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::program::Token;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardedProgram {
    pub tokens: Vec<Token>,
    pub reward: f64,
    /// Model log-probability when the program was found.
    pub log_prob: f64,
}

impl RewardedProgram {
    /// `Less` means `self` is preferred: higher reward, then fewer tokens,
    /// then lexicographically smaller.
    pub fn preference(&self, other: &Self) -> Ordering {
        other
            .reward
            .total_cmp(&self.reward)
            .then(self.tokens.len().cmp(&other.tokens.len()))
            .then_with(|| self.tokens.cmp(&other.tokens))
    }
}

/// Best program found so far per question id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoGoldStore {
    entries: BTreeMap<String, RewardedProgram>,
}

impl PseudoGoldStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps `candidate` if it is preferred over the current entry. Returns
    /// whether the store changed.
    pub fn offer(&mut self, id: &str, candidate: RewardedProgram) -> bool {
        match self.entries.get(id) {
            Some(cur) if candidate.preference(cur) != Ordering::Less => false,
            _ => {
                self.entries.insert(id.to_string(), candidate);
                true
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&RewardedProgram> {
        self.entries.get(id)
    }

    pub fn reward(&self, id: &str) -> f64 {
        self.get(id).map_or(0.0, |e| e.reward)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RewardedProgram)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Fraction of `ids` whose stored reward is 1.
    pub fn coverage<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> f64 {
        let (mut hit, mut n) = (0usize, 0usize);
        for id in ids {
            n += 1;
            hit += usize::from(self.reward(id) >= 1.0);
        }
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(tokens: Vec<Token>, reward: f64) -> RewardedProgram {
        RewardedProgram { tokens, reward, log_prob: 0.0 }
    }

    #[test]
    fn max_merge_with_tie_breaks() {
        let mut s = PseudoGoldStore::new();
        let long = vec![Token::Open, Token::Close, Token::Return];
        let short = vec![Token::Open, Token::Return];
        assert!(s.offer("q", rp(long.clone(), 0.5)));
        assert!(!s.offer("q", rp(short.clone(), 0.4)));
        assert!(s.offer("q", rp(short.clone(), 0.5)));
        assert!(!s.offer("q", rp(long, 0.5)));
        assert!(!s.offer("q", rp(vec![Token::Close, Token::Return], 0.5)));
        assert!(s.offer("q", rp(vec![Token::Go, Token::Return], 0.5)));
        assert_eq!(s.reward("q"), 0.5);
        assert_eq!(s.reward("other"), 0.0);
    }
}
