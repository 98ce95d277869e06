use std::ops::Range;

use crate::kb::{EntityId, EntitySet, KnowledgeBase, Value};

use super::ProgrammerError;

/// Placeholder replacing every token of a resolved entity span.
pub const ENT: &str = "ENT";

#[derive(Debug, Clone, PartialEq)]
pub struct QAItem {
    pub id: String,
    /// Raw lowercase question tokens.
    pub tokens: Vec<String>,
    pub abstracted: Vec<String>,
    /// Resolved entities in question order.
    pub entities: Vec<(Range<usize>, EntityId)>,
    /// Gold answer set; empty when unknown (e.g. at inference time).
    pub answers: EntitySet,
}

impl QAItem {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        mut entities: Vec<(Range<usize>, EntityId)>,
        answers: EntitySet,
    ) -> Result<Self, ProgrammerError> {
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.to_lowercase()).collect();
        entities.sort_by_key(|(r, _)| r.start);
        let mut end = 0;
        for (r, _) in &entities {
            if r.start < end || r.start >= r.end || r.end > tokens.len() {
                return Err(ProgrammerError::BadSpan { start: r.start, end: r.end });
            }
            end = r.end;
        }
        let mut abstracted = tokens.clone();
        for (r, _) in &entities {
            for t in &mut abstracted[r.clone()] {
                *t = ENT.to_string();
            }
        }
        Ok(QAItem { id: id.into(), tokens, abstracted, entities, answers })
    }

    /// Tokenizes and resolves a free-text question against the KB aliases.
    pub fn from_question(kb: &KnowledgeBase, id: &str, question: &str) -> Result<Self, ProgrammerError> {
        let tokens: Vec<String> = question.split_whitespace().map(str::to_lowercase).collect();
        let entities = kb.resolve_entities(&tokens);
        Self::new(id, tokens, entities, EntitySet::empty())
    }

    /// One singleton variable per resolved entity, in question order.
    pub fn initial_vars(&self) -> Vec<EntitySet> {
        self.entities.iter().map(|(_, e)| EntitySet::singleton(Value::Entity(*e))).collect()
    }
}
