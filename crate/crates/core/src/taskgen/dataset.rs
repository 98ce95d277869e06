use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::TaskGenError;
use crate::kb::{EntitySet, KnowledgeBase, RawValue, Value};
use crate::programmer::QAItem;

/// Token span `[start, end)` of a resolved entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub id: String,
}

/// One JSON line of a dataset file. Answers are entity ids (strings),
/// numbers, or ISO dates (strings that are not entity ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub entities: Vec<EntitySpan>,
    pub answers: Vec<Json>,
}

fn answer_json(kb: &KnowledgeBase, v: &Value) -> Json {
    match kb.raw_value(v) {
        RawValue::Entity(e) => Json::String(e),
        RawValue::Number(x) => serde_json::json!(x),
        RawValue::Date(d) => Json::String(d.format("%Y-%m-%d").to_string()),
    }
}

impl DatasetRecord {
    pub fn new(
        kb: &KnowledgeBase,
        id: String,
        question: String,
        entities: Vec<EntitySpan>,
        answers: &EntitySet,
    ) -> Self {
        DatasetRecord { id, question, entities, answers: answers.iter().map(|v| answer_json(kb, v)).collect() }
    }

    pub fn from_item(kb: &KnowledgeBase, item: &QAItem) -> Self {
        let entities = item
            .entities
            .iter()
            .map(|(r, e)| EntitySpan { start: r.start, end: r.end, id: kb.entity_name(*e).to_string() })
            .collect();
        Self::new(kb, item.id.clone(), item.tokens.join(" "), entities, &item.answers)
    }

    /// `line` only labels errors.
    pub fn to_item(&self, kb: &KnowledgeBase, line: usize) -> Result<QAItem, TaskGenError> {
        let err = |msg: String| TaskGenError::Record { line, msg };
        let mut entities = Vec::with_capacity(self.entities.len());
        for s in &self.entities {
            let e = kb.entity(&s.id).ok_or_else(|| err(format!("unknown entity {:?}", s.id)))?;
            entities.push((s.start..s.end, e));
        }
        let mut answers = Vec::with_capacity(self.answers.len());
        for a in &self.answers {
            let v = match a {
                Json::Number(n) => n.as_f64().and_then(|x| kb.intern(&RawValue::Number(x))),
                Json::String(s) => kb
                    .entity(s)
                    .map(Value::Entity)
                    .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(Value::Date)),
                _ => None,
            };
            answers.push(v.ok_or_else(|| err(format!("bad answer {a}")))?);
        }
        if answers.is_empty() {
            return Err(err("empty answer set".into()));
        }
        let tokens = self.question.split_whitespace().map(str::to_string).collect();
        QAItem::new(self.id.clone(), tokens, entities, answers.into_iter().collect()).map_err(|e| err(e.to_string()))
    }
}

pub fn write_dataset<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn parse_dataset(text: &str, kb: &KnowledgeBase) -> Result<Vec<QAItem>, TaskGenError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: DatasetRecord =
                serde_json::from_str(l).map_err(|e| TaskGenError::Record { line: i + 1, msg: e.to_string() })?;
            rec.to_item(kb, i + 1)
        })
        .collect()
}

pub fn load_dataset(path: impl AsRef<Path>, kb: &KnowledgeBase) -> Result<Vec<QAItem>, TaskGenError> {
    parse_dataset(&std::fs::read_to_string(path)?, kb)
}
