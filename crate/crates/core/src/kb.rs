//! Immutable in-memory knowledge base.
//!
//! Entities and properties are interned into dense ids at build time. Ids are
//! assigned in lexicographic order of their names, so comparing two
//! [`EntityId`]s orders them exactly like their names do. This is what gives
//! [`EntitySet`] its canonical order for free.
//!
//! The on-disk format is one assertion per line:
//!
//! ```text
//! subject<TAB>property<TAB>object<TAB>entity|number|date
//! @alias<TAB>surface form<TAB>entity id
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unknown object kind `{kind}` (expected entity, number or date)")]
    UnknownKind { line: usize, kind: String },
    #[error("unknown property id {0}")]
    UnknownProperty(usize),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropertyId(pub u32);

impl PropertyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A finite 64-bit float with a total order. `-0.0` is folded into `0.0`.
#[derive(Debug, Clone, Copy)]
pub struct Number(f64);

impl Number {
    pub fn new(x: f64) -> Result<Self, KbError> {
        if !x.is_finite() {
            return Err(KbError::InvalidValue(format!("non-finite number {x}")));
        }
        Ok(Number(if x == 0.0 { 0.0 } else { x }))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Number {}
impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}
impl std::hash::Hash for Number {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

/// A KB value. Variant order is the canonical set order: entities first, then
/// numbers, then dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Entity(EntityId),
    Number(Number),
    Date(NaiveDate),
}

impl Value {
    pub fn as_entity(self) -> Option<EntityId> {
        match self {
            Value::Entity(e) => Some(e),
            _ => None,
        }
    }

    pub fn kind(self) -> ValueKind {
        match self {
            Value::Entity(_) => ValueKind::Entity,
            Value::Number(_) => ValueKind::Number,
            Value::Date(_) => ValueKind::Date,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueKind {
    Entity,
    Number,
    Date,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Entity => "entity",
            ValueKind::Number => "number",
            ValueKind::Date => "date",
        }
    }
}

/// A value before interning, as it appears in files and generators.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Entity(String),
    Number(f64),
    Date(NaiveDate),
}

impl RawValue {
    pub fn parse(text: &str, kind: &str) -> Result<Self, String> {
        match kind {
            "entity" => {
                if text.is_empty() {
                    Err("empty entity id".into())
                } else {
                    Ok(RawValue::Entity(text.to_string()))
                }
            }
            "number" => {
                let x: f64 = text.parse().map_err(|_| format!("bad number `{text}`"))?;
                if x.is_finite() {
                    Ok(RawValue::Number(x))
                } else {
                    Err(format!("non-finite number `{text}`"))
                }
            }
            "date" => NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map(RawValue::Date)
                .map_err(|_| format!("bad date `{text}`")),
            _ => Err(format!("unknown kind `{kind}`")),
        }
    }
}

/// Ordered, duplicate-free set of values.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySet(Vec<Value>);

impl EntitySet {
    pub fn empty() -> Self {
        EntitySet(Vec::new())
    }

    pub fn singleton(v: Value) -> Self {
        EntitySet(vec![v])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.0.binary_search(v).is_ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Value> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Value] {
        &self.0
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.0.iter().filter_map(|v| v.as_entity())
    }

    pub fn intersection_len(&self, other: &EntitySet) -> usize {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().filter(|v| large.contains(v)).count()
    }
}

impl FromIterator<Value> for EntitySet {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        let mut v: Vec<Value> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        EntitySet(v)
    }
}

impl<'a> IntoIterator for &'a EntitySet {
    type Item = &'a Value;
    type IntoIter = std::slice::Iter<'a, Value>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Interned assertion `(subject, property, object)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub property: PropertyId,
    pub object: Value,
}

#[derive(Debug, Default, Clone)]
pub struct KnowledgeBase {
    entity_names: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    property_names: Vec<String>,
    property_index: HashMap<String, PropertyId>,
    /// Per subject: outgoing edges grouped by property, both levels sorted.
    out: Vec<Vec<(PropertyId, Vec<Value>)>>,
    aliases: BTreeMap<String, EntityId>,
    max_alias_len: usize,
    n_triples: usize,
}

/// Collects string-keyed assertions and interns them into a [`KnowledgeBase`].
#[derive(Debug, Default, Clone)]
pub struct KnowledgeBaseBuilder {
    triples: BTreeSet<(String, String, RawKey)>,
    extra_entities: BTreeSet<String>,
    aliases: BTreeMap<String, String>,
}

// RawValue holds an f64, so it cannot go into an ordered set directly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum RawKey {
    Entity(String),
    Number(Number),
    Date(NaiveDate),
}

impl KnowledgeBaseBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn triple(&mut self, subject: &str, property: &str, object: RawValue) -> Result<&mut Self, KbError> {
        if subject.is_empty() || property.is_empty() {
            return Err(KbError::InvalidValue("empty subject or property".into()));
        }
        let key = match object {
            RawValue::Entity(e) if e.is_empty() => return Err(KbError::InvalidValue("empty object entity".into())),
            RawValue::Entity(e) => RawKey::Entity(e),
            RawValue::Number(x) => RawKey::Number(Number::new(x)?),
            RawValue::Date(d) => RawKey::Date(d),
        };
        self.triples.insert((subject.to_string(), property.to_string(), key));
        Ok(self)
    }

    pub fn entity_triple(&mut self, subject: &str, property: &str, object: &str) -> &mut Self {
        self.triple(subject, property, RawValue::Entity(object.to_string())).expect("non-empty names")
    }

    pub fn number_triple(&mut self, subject: &str, property: &str, x: f64) -> &mut Self {
        self.triple(subject, property, RawValue::Number(x)).expect("finite number")
    }

    pub fn date_triple(&mut self, subject: &str, property: &str, d: NaiveDate) -> &mut Self {
        self.triple(subject, property, RawValue::Date(d)).expect("valid date")
    }

    /// Declares an entity that may have no edges at all.
    pub fn entity(&mut self, id: &str) -> &mut Self {
        self.extra_entities.insert(id.to_string());
        self
    }

    pub fn alias(&mut self, surface: &str, entity: &str) -> &mut Self {
        let surface = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        self.aliases.insert(surface, entity.to_string());
        self.extra_entities.insert(entity.to_string());
        self
    }

    pub fn build(&self) -> KnowledgeBase {
        let mut entities: BTreeSet<&str> = self.extra_entities.iter().map(String::as_str).collect();
        let mut properties: BTreeSet<&str> = BTreeSet::new();
        for (s, p, o) in &self.triples {
            entities.insert(s);
            properties.insert(p);
            if let RawKey::Entity(e) = o {
                entities.insert(e);
            }
        }
        let entity_names: Vec<String> = entities.into_iter().map(str::to_string).collect();
        let property_names: Vec<String> = properties.into_iter().map(str::to_string).collect();
        let entity_index: HashMap<String, EntityId> =
            entity_names.iter().enumerate().map(|(i, n)| (n.clone(), EntityId(i as u32))).collect();
        let property_index: HashMap<String, PropertyId> =
            property_names.iter().enumerate().map(|(i, n)| (n.clone(), PropertyId(i as u32))).collect();

        let mut grouped: Vec<BTreeMap<PropertyId, Vec<Value>>> = vec![BTreeMap::new(); entity_names.len()];
        for (s, p, o) in &self.triples {
            let value = match o {
                RawKey::Entity(e) => Value::Entity(entity_index[e]),
                RawKey::Number(x) => Value::Number(*x),
                RawKey::Date(d) => Value::Date(*d),
            };
            grouped[entity_index[s].index()].entry(property_index[p]).or_default().push(value);
        }
        let out = grouped
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(p, mut vs)| {
                        vs.sort_unstable();
                        vs.dedup();
                        (p, vs)
                    })
                    .collect()
            })
            .collect();

        let aliases: BTreeMap<String, EntityId> =
            self.aliases.iter().map(|(s, e)| (s.clone(), entity_index[e])).collect();
        let max_alias_len = aliases.keys().map(|s| s.split(' ').count()).max().unwrap_or(0);

        KnowledgeBase {
            entity_names,
            entity_index,
            property_names,
            property_index,
            out,
            aliases,
            max_alias_len,
            n_triples: self.triples.len(),
        }
    }
}

impl KnowledgeBase {
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut builder = KnowledgeBaseBuilder::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "@alias" {
                if fields.len() != 3 || fields[1].trim().is_empty() || fields[2].is_empty() {
                    return Err(KbError::Malformed {
                        line: line_no,
                        msg: "alias lines need `@alias<TAB>surface<TAB>entity`".into(),
                    });
                }
                builder.alias(fields[1], fields[2]);
                continue;
            }
            if fields.len() != 4 {
                return Err(KbError::Malformed {
                    line: line_no,
                    msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
                });
            }
            let kind = fields[3];
            if !matches!(kind, "entity" | "number" | "date") {
                return Err(KbError::UnknownKind { line: line_no, kind: kind.to_string() });
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(KbError::Malformed { line: line_no, msg: "empty subject or property".into() });
            }
            let object = RawValue::parse(fields[2], kind).map_err(|msg| KbError::Malformed { line: line_no, msg })?;
            builder
                .triple(fields[0], fields[1], object)
                .map_err(|e| KbError::Malformed { line: line_no, msg: e.to_string() })?;
        }
        Ok(builder.build())
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_properties(&self) -> usize {
        self.property_names.len()
    }

    pub fn n_triples(&self) -> usize {
        self.n_triples
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id.index()]
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entity_names.len() as u32).map(EntityId)
    }

    pub fn property(&self, name: &str) -> Option<PropertyId> {
        self.property_index.get(name).copied()
    }

    pub fn property_name(&self, id: PropertyId) -> &str {
        &self.property_names[id.index()]
    }

    pub fn properties(&self) -> impl Iterator<Item = PropertyId> {
        (0..self.property_names.len() as u32).map(PropertyId)
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, EntityId)> {
        self.aliases.iter().map(|(s, e)| (s.as_str(), *e))
    }

    /// All triples in canonical order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.out.iter().enumerate().flat_map(|(s, edges)| {
            edges.iter().flat_map(move |(p, vs)| {
                vs.iter().map(move |&o| Triple { subject: EntityId(s as u32), property: *p, object: o })
            })
        })
    }

    /// Objects of `(subject, property)`, sorted.
    pub fn objects(&self, subject: EntityId, property: PropertyId) -> &[Value] {
        let edges = &self.out[subject.index()];
        match edges.binary_search_by_key(&property, |(p, _)| *p) {
            Ok(i) => &edges[i].1,
            Err(_) => &[],
        }
    }

    /// Properties with at least one edge out of `subject`, sorted.
    pub fn subject_properties(&self, subject: EntityId) -> impl Iterator<Item = PropertyId> + '_ {
        self.out[subject.index()].iter().map(|(p, _)| *p)
    }

    fn check_property(&self, p: PropertyId) -> Result<(), KbError> {
        if p.index() < self.property_names.len() {
            Ok(())
        } else {
            Err(KbError::UnknownProperty(p.index()))
        }
    }

    /// `{e2 | e1 ∈ v, (e1, p, e2) ∈ K}`.
    pub fn forward(&self, v: &EntitySet, p: PropertyId) -> Result<EntitySet, KbError> {
        self.check_property(p)?;
        Ok(v.entities().flat_map(|e| self.objects(e, p).iter().copied()).collect())
    }

    pub fn reachable_properties(&self, v: &EntitySet) -> BTreeSet<PropertyId> {
        v.entities().flat_map(|e| self.subject_properties(e)).collect()
    }

    /// Reachable properties whose objects (from `v`) are all numbers or all dates.
    pub fn comparable_properties(&self, v: &EntitySet) -> BTreeSet<PropertyId> {
        let mut kinds: BTreeMap<PropertyId, Option<ValueKind>> = BTreeMap::new();
        for e in v.entities() {
            for (p, objects) in &self.out[e.index()] {
                let slot = kinds.entry(*p).or_insert_with(|| Some(objects[0].kind()));
                for o in objects {
                    if *slot != Some(o.kind()) {
                        *slot = None;
                    }
                }
            }
        }
        kinds
            .into_iter()
            .filter(|(_, k)| matches!(k, Some(ValueKind::Number) | Some(ValueKind::Date)))
            .map(|(p, _)| p)
            .collect()
    }

    /// `{p | ∃e1 ∈ v1, ∃e2 ∈ v2: (e1, p, e2) ∈ K}`.
    pub fn connecting_properties(&self, v1: &EntitySet, v2: &EntitySet) -> BTreeSet<PropertyId> {
        let mut found = BTreeSet::new();
        if v2.is_empty() {
            return found;
        }
        for e in v1.entities() {
            for (p, objects) in &self.out[e.index()] {
                if !found.contains(p) && objects.iter().any(|o| v2.contains(o)) {
                    found.insert(*p);
                }
            }
        }
        found
    }

    /// Greedy longest-match of alias surface forms over lowercase tokens,
    /// left to right, non-overlapping.
    pub fn resolve_entities<S: AsRef<str>>(&self, words: &[S]) -> Vec<(Range<usize>, EntityId)> {
        let lowered: Vec<String> = words.iter().map(|w| w.as_ref().to_lowercase()).collect();
        let mut found = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            let longest = self.max_alias_len.min(lowered.len() - i);
            let hit = (1..=longest).rev().find_map(|len| {
                let surface = lowered[i..i + len].join(" ");
                self.aliases.get(&surface).map(|e| (len, *e))
            });
            match hit {
                Some((len, e)) => {
                    found.push((i..i + len, e));
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }

    pub fn display_value(&self, v: &Value) -> String {
        match v {
            Value::Entity(e) => self.entity_name(*e).to_string(),
            Value::Number(x) => format!("{}", x.get()),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    pub fn raw_value(&self, v: &Value) -> RawValue {
        match v {
            Value::Entity(e) => RawValue::Entity(self.entity_name(*e).to_string()),
            Value::Number(x) => RawValue::Number(x.get()),
            Value::Date(d) => RawValue::Date(*d),
        }
    }

    /// Interns a raw value. Literals always succeed; entities must exist.
    pub fn intern(&self, raw: &RawValue) -> Option<Value> {
        match raw {
            RawValue::Entity(name) => self.entity(name).map(Value::Entity),
            RawValue::Number(x) => Number::new(*x).ok().map(Value::Number),
            RawValue::Date(d) => Some(Value::Date(*d)),
        }
    }

    /// Serializes back to the tab-separated file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in self.triples() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                self.entity_name(t.subject),
                self.property_name(t.property),
                self.display_value(&t.object),
                t.object.kind().as_str()
            ));
        }
        for (surface, e) in &self.aliases {
            s.push_str(&format!("@alias\t{}\t{}\n", surface, self.entity_name(*e)));
        }
        s
    }
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path)?;
    KnowledgeBase::parse(&text)
}

/// Formats a value set one value per line.
pub struct SetDisplay<'a>(pub &'a KnowledgeBase, pub &'a EntitySet);

impl fmt::Display for SetDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.1 {
            writeln!(f, "{}", self.0.display_value(v))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lincoln() -> KnowledgeBase {
        KnowledgeBase::parse("Hodgenville\tPlaceOfBirthOf\tAbeLincoln\tentity\n").unwrap()
    }

    fn cities() -> KnowledgeBase {
        let mut b = KnowledgeBaseBuilder::new();
        b.number_triple("NYC", "PopulationOf", 8_400_000.0)
            .number_triple("LA", "PopulationOf", 3_900_000.0)
            .entity_triple("NYC", "LocatedIn", "USA")
            .entity_triple("LA", "LocatedIn", "USA");
        b.build()
    }

    fn set(kb: &KnowledgeBase, names: &[&str]) -> EntitySet {
        names.iter().map(|n| Value::Entity(kb.entity(n).unwrap())).collect()
    }

    fn num(x: f64) -> Value {
        Value::Number(Number::new(x).unwrap())
    }

    #[test]
    fn load_single_assertion() {
        let kb = lincoln();
        assert_eq!(kb.n_entities(), 2);
        assert_eq!(kb.n_properties(), 1);
        assert_eq!(kb.n_triples(), 1);
    }

    #[test]
    fn load_empty_and_duplicates() {
        let kb = KnowledgeBase::parse("").unwrap();
        assert_eq!((kb.n_entities(), kb.n_properties(), kb.n_triples()), (0, 0, 0));
        let kb = KnowledgeBase::parse("a\tp\tb\tentity\na\tp\tb\tentity\n").unwrap();
        assert_eq!(kb.n_triples(), 1);
    }

    #[test]
    fn load_errors_name_the_line() {
        let err = KnowledgeBase::parse("a\tp\tb\tentity\na\tp\n").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 2, .. }), "{err}");
        let err = KnowledgeBase::parse("a\tp\tb\tblob\n").unwrap_err();
        assert!(matches!(err, KbError::UnknownKind { line: 1, .. }), "{err}");
        let err = KnowledgeBase::parse("a\tp\tNaN\tnumber\n").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 1, .. }));
        let err = KnowledgeBase::parse("a\tp\t2001-02-30\tdate\n").unwrap_err();
        assert!(matches!(err, KbError::Malformed { line: 1, .. }));
    }

    #[test]
    fn line_order_is_irrelevant() {
        let a = KnowledgeBase::parse("x\tp\ty\tentity\ny\tq\t3\tnumber\n").unwrap();
        let b = KnowledgeBase::parse("y\tq\t3\tnumber\nx\tp\ty\tentity\n").unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn forward_examples() {
        let kb = lincoln();
        let p = kb.property("PlaceOfBirthOf").unwrap();
        assert_eq!(kb.forward(&set(&kb, &["Hodgenville"]), p).unwrap(), set(&kb, &["AbeLincoln"]));
        assert!(kb.forward(&EntitySet::empty(), p).unwrap().is_empty());
        assert!(matches!(kb.forward(&EntitySet::empty(), PropertyId(9)), Err(KbError::UnknownProperty(9))));

        let kb = cities();
        let pop = kb.property("PopulationOf").unwrap();
        let got = kb.forward(&set(&kb, &["NYC", "LA"]), pop).unwrap();
        assert_eq!(got.as_slice(), &[num(3_900_000.0), num(8_400_000.0)]);
    }

    #[test]
    fn property_queries() {
        let kb = lincoln();
        let p = kb.property("PlaceOfBirthOf").unwrap();
        assert_eq!(kb.reachable_properties(&set(&kb, &["Hodgenville"])), BTreeSet::from([p]));
        assert!(kb.reachable_properties(&EntitySet::empty()).is_empty());
        assert!(kb.reachable_properties(&set(&kb, &["AbeLincoln"])).is_empty());
        assert!(kb.comparable_properties(&set(&kb, &["Hodgenville"])).is_empty());

        let kb = cities();
        let pop = kb.property("PopulationOf").unwrap();
        assert_eq!(kb.comparable_properties(&set(&kb, &["NYC", "LA"])), BTreeSet::from([pop]));
        assert!(kb.comparable_properties(&EntitySet::empty()).is_empty());
    }

    #[test]
    fn comparable_excludes_mixed_kinds() {
        let mut b = KnowledgeBaseBuilder::new();
        b.number_triple("a", "p", 1.0).date_triple("b", "p", NaiveDate::from_ymd_opt(2000, 1, 1).unwrap());
        let kb = b.build();
        assert!(kb.comparable_properties(&set(&kb, &["a", "b"])).is_empty());
        assert_eq!(kb.comparable_properties(&set(&kb, &["a"])).len(), 1);
    }

    #[test]
    fn connecting_examples() {
        let mut b = KnowledgeBaseBuilder::new();
        b.entity_triple("AbeLincoln", "BornIn", "Hodgenville").entity("Paris").entity("Rome");
        let kb = b.build();
        let born = kb.property("BornIn").unwrap();
        let got = kb.connecting_properties(&set(&kb, &["AbeLincoln"]), &set(&kb, &["Hodgenville"]));
        assert_eq!(got, BTreeSet::from([born]));
        assert!(kb.connecting_properties(&EntitySet::empty(), &set(&kb, &["Hodgenville"])).is_empty());
        assert!(kb.connecting_properties(&set(&kb, &["Paris"]), &set(&kb, &["Rome"])).is_empty());
    }

    #[test]
    fn resolver_examples() {
        let mut b = KnowledgeBaseBuilder::new();
        b.alias("meg", "m.Meg").alias("family guy", "m.FamilyGuy");
        let kb = b.build();
        let words = ["who", "plays", "meg", "in", "family", "guy"];
        let got = kb.resolve_entities(&words);
        assert_eq!(got, vec![(2..3, kb.entity("m.Meg").unwrap()), (4..6, kb.entity("m.FamilyGuy").unwrap())]);
        assert!(kb.resolve_entities::<&str>(&[]).is_empty());

        let mut b = KnowledgeBaseBuilder::new();
        b.alias("new york", "m.NewYorkState").alias("new york city", "m.NYC");
        let kb = b.build();
        let got = kb.resolve_entities(&["New", "York", "City"]);
        assert_eq!(got, vec![(0..3, kb.entity("m.NYC").unwrap())]);
    }

    #[test]
    fn canonical_order_entities_then_numbers_then_dates() {
        let kb = cities();
        let d = Value::Date(NaiveDate::from_ymd_opt(1999, 1, 1).unwrap());
        let s: EntitySet = [d, num(2.0), Value::Entity(kb.entity("NYC").unwrap()), num(-1.0)].into_iter().collect();
        assert!(matches!(s.as_slice()[0], Value::Entity(_)));
        assert_eq!(s.as_slice()[1..3], [num(-1.0), num(2.0)]);
        assert_eq!(s.as_slice()[3], d);
    }

    #[test]
    fn text_round_trip_preserves_exact_floats() {
        let mut b = KnowledgeBaseBuilder::new();
        b.number_triple("a", "p", 0.1 + 0.2).number_triple("a", "p", 1e-300).alias("the a", "a");
        let kb = b.build();
        let again = KnowledgeBase::parse(&kb.to_text()).unwrap();
        assert_eq!(kb.to_text(), again.to_text());
        let vals = again.objects(again.entity("a").unwrap(), again.property("p").unwrap());
        assert!(vals.contains(&num(0.1 + 0.2)));
    }
}
