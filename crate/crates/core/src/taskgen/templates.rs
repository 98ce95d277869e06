use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetRecord, EntitySpan, TaskGenError};
use crate::assist::DecodingState;
use crate::kb::{EntityId, EntitySet, KnowledgeBase, PropertyId, Value};
use crate::program::{execute_program, Expression, Program, Token, Var};
use crate::programmer::QAItem;

/// Gold program shape of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skeleton {
    /// `( Hop R0 p1 )`
    OneHop,
    /// `( Hop R0 p1 ) ( Hop R1 p2 )`
    TwoHop,
    /// `( Hop R0 p1 ) ( ArgMax R1 p2 )`, or `ArgMin` for "smallest".
    Superlative,
    /// `( Hop R0 p1 ) ( Equal R2 R1 p2 )`
    Filter,
}

/// A question pattern. Slots: `{e1}`, `{e2}` (entity aliases), `{p1}`,
/// `{p2}` (property names) and `{sup}` (largest / smallest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub skeleton: Skeleton,
    pub pattern: String,
}

impl Template {
    pub fn new(name: &str, skeleton: Skeleton, pattern: &str) -> Self {
        Template { name: name.into(), skeleton, pattern: pattern.into() }
    }
}

pub fn default_templates() -> Vec<Template> {
    vec![
        Template::new("one_hop", Skeleton::OneHop, "what is the {p1} of {e1}"),
        Template::new("two_hop", Skeleton::TwoHop, "what is the {p2} of the {p1} of {e1}"),
        Template::new("superlative", Skeleton::Superlative, "which {p1} of {e1} has the {sup} {p2}"),
        Template::new("filter", Skeleton::Filter, "which {p1} of {e1} has {p2} {e2}"),
    ]
}

/// Literal words of the default templates; generated aliases avoid them.
pub(crate) fn template_words() -> Vec<String> {
    let mut w: Vec<String> = default_templates()
        .iter()
        .flat_map(|t| {
            t.pattern.split_whitespace().filter(|w| !w.starts_with('{')).map(str::to_string).collect::<Vec<_>>()
        })
        .collect();
    w.extend(["largest".to_string(), "smallest".to_string(), "ent".to_string()]);
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Slots {
    e1: EntityId,
    e2: Option<EntityId>,
    p1: PropertyId,
    p2: Option<PropertyId>,
    argmin: bool,
}

impl Slots {
    fn program(&self, skeleton: Skeleton) -> Program {
        let hop = Expression::Hop { var: Var(0), prop: self.p1 };
        let second = match skeleton {
            Skeleton::OneHop => None,
            Skeleton::TwoHop => Some(Expression::Hop { var: Var(1), prop: self.p2.expect("two_hop slot") }),
            Skeleton::Superlative => {
                let (var, prop) = (Var(1), self.p2.expect("superlative slot"));
                Some(if self.argmin { Expression::ArgMin { var, prop } } else { Expression::ArgMax { var, prop } })
            }
            Skeleton::Filter => {
                Some(Expression::Equal { left: Var(2), right: Var(1), prop: self.p2.expect("filter slot") })
            }
        };
        Program { expressions: std::iter::once(hop).chain(second).collect(), terminated: true }
    }

    fn initial(&self) -> Vec<EntitySet> {
        std::iter::once(self.e1).chain(self.e2).map(|e| EntitySet::singleton(Value::Entity(e))).collect()
    }
}

fn entity_set(v: &EntitySet) -> bool {
    !v.is_empty() && v.iter().all(|x| x.as_entity().is_some())
}

/// Every non-degenerate instantiation of `skeleton` on `kb`, in a fixed
/// order. Superlatives and filters must strictly shrink a set of at least
/// two entities.
fn instantiations(kb: &KnowledgeBase, skeleton: Skeleton) -> Vec<Slots> {
    let mut out = Vec::new();
    for e1 in kb.entities() {
        let start = EntitySet::singleton(Value::Entity(e1));
        for p1 in kb.reachable_properties(&start) {
            let base = Slots { e1, e2: None, p1, p2: None, argmin: false };
            let hop = kb.forward(&start, p1).unwrap_or_default();
            match skeleton {
                Skeleton::OneHop => out.push(base),
                Skeleton::TwoHop => {
                    if entity_set(&hop) {
                        for p2 in kb.reachable_properties(&hop) {
                            out.push(Slots { p2: Some(p2), ..base });
                        }
                    }
                }
                Skeleton::Superlative => {
                    if entity_set(&hop) && hop.len() >= 2 {
                        for p2 in kb.comparable_properties(&hop) {
                            for argmin in [false, true] {
                                out.push(Slots { p2: Some(p2), argmin, ..base });
                            }
                        }
                    }
                }
                Skeleton::Filter => {
                    if entity_set(&hop) && hop.len() >= 2 {
                        for p2 in kb.reachable_properties(&hop) {
                            let mut targets: Vec<EntityId> = hop
                                .entities()
                                .flat_map(|x| kb.objects(x, p2).iter().filter_map(|v| v.as_entity()))
                                .filter(|e2| *e2 != e1)
                                .collect();
                            targets.sort_unstable();
                            targets.dedup();
                            for e2 in targets {
                                out.push(Slots { e2: Some(e2), p2: Some(p2), ..base });
                            }
                        }
                    }
                }
            }
        }
    }
    out.retain(|s| {
        let answers = execute_program(kb, &s.program(skeleton), &s.initial()).unwrap_or_default();
        let hop = kb.forward(&EntitySet::singleton(Value::Entity(s.e1)), s.p1).unwrap_or_default();
        match skeleton {
            Skeleton::OneHop | Skeleton::TwoHop => !answers.is_empty(),
            Skeleton::Superlative | Skeleton::Filter => !answers.is_empty() && answers.len() < hop.len(),
        }
    });
    out
}

/// True when no other program with at most as many expressions as `gold`
/// reaches the same answers. Without this, weak supervision cannot tell the
/// gold program from a coincidental one.
fn identifiable(kb: &KnowledgeBase, initial: &[EntitySet], gold: &Program, answers: &EntitySet) -> bool {
    fn walk(state: &DecodingState<'_>, gold: &[Token], answers: &EntitySet) -> bool {
        let Ok(valid) = state.valid_tokens() else { return true };
        for t in valid {
            let mut next = state.clone();
            if next.push(t).is_err() {
                continue;
            }
            if next.is_terminated() {
                if next.emitted() != gold && next.n_expressions() > 0 && next.machine().vars().last() == Some(answers) {
                    return false;
                }
            } else if !walk(&next, gold, answers) {
                return false;
            }
        }
        true
    }
    let state = DecodingState::new(kb, initial.to_vec(), gold.expressions.len());
    walk(&state, &gold.tokens(), answers)
}

/// One generated question with the program that produced its answers.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedItem {
    pub record: DatasetRecord,
    pub template: String,
    pub gold: Program,
}

impl GeneratedItem {
    pub fn to_item(&self, kb: &KnowledgeBase) -> Result<QAItem, TaskGenError> {
        self.record.to_item(kb, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub train: Vec<GeneratedItem>,
    pub dev: Vec<GeneratedItem>,
    pub test: Vec<GeneratedItem>,
}

fn render(
    kb: &KnowledgeBase,
    aliases: &BTreeMap<EntityId, String>,
    t: &Template,
    s: &Slots,
) -> Option<(Vec<String>, Vec<EntitySpan>)> {
    let mut words = Vec::new();
    let mut spans = Vec::new();
    let prop_words = |p: Option<PropertyId>| -> Option<Vec<String>> {
        Some(kb.property_name(p?).split('_').map(str::to_string).collect())
    };
    for w in t.pattern.split_whitespace() {
        let filled: Vec<String> = match w {
            "{e1}" | "{e2}" => {
                let e = if w == "{e1}" { s.e1 } else { s.e2? };
                let alias = aliases.get(&e)?;
                let start = words.len();
                let n = alias.split_whitespace().count();
                spans.push(EntitySpan { start, end: start + n, id: kb.entity_name(e).to_string() });
                alias.split_whitespace().map(str::to_string).collect()
            }
            "{p1}" => prop_words(Some(s.p1))?,
            "{p2}" => prop_words(s.p2)?,
            "{sup}" => vec![if s.argmin { "smallest" } else { "largest" }.to_string()],
            lit => vec![lit.to_lowercase()],
        };
        words.extend(filled);
    }
    // The question must resolve back to exactly these entities.
    let resolved = kb.resolve_entities(&words);
    let same = resolved.len() == spans.len()
        && resolved
            .iter()
            .zip(&spans)
            .all(|((r, e), sp)| r.start == sp.start && r.end == sp.end && kb.entity_name(*e) == sp.id);
    same.then_some((words, spans))
}

/// Samples disjoint train/dev/test sets. Each item picks a template
/// uniformly among those with instantiations left, then an unused
/// instantiation of it whose gold program is identifiable from its answers.
pub fn gen_dataset(
    kb: &KnowledgeBase,
    templates: &[Template],
    seed: u64,
    n_train: usize,
    n_dev: usize,
    n_test: usize,
) -> Result<Splits, TaskGenError> {
    if templates.is_empty() {
        return Err(TaskGenError::Setting("no templates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aliases: BTreeMap<EntityId, String> = BTreeMap::new();
    for (surface, e) in kb.aliases() {
        aliases.entry(e).or_insert_with(|| surface.to_string());
    }
    let mut pools = Vec::with_capacity(templates.len());
    for t in templates {
        let mut pool = instantiations(kb, t.skeleton);
        pool.retain(|s| render(kb, &aliases, t, s).is_some());
        if pool.is_empty() {
            return Err(TaskGenError::NotInstantiable(t.name.clone()));
        }
        pool.shuffle(&mut rng);
        pools.push(pool);
    }
    let wanted = n_train + n_dev + n_test;
    let mut splits = Splits::default();
    let mut made = 0;
    for (name, n, out) in
        [("train", n_train, &mut splits.train), ("dev", n_dev, &mut splits.dev), ("test", n_test, &mut splits.test)]
    {
        for i in 0..n {
            let (ti, slots, gold, answers) = loop {
                let live: Vec<usize> = (0..pools.len()).filter(|&t| !pools[t].is_empty()).collect();
                if live.is_empty() {
                    return Err(TaskGenError::Exhausted { made, wanted });
                }
                let ti = live[rng.gen_range(0..live.len())];
                // Reject within the template so the mix stays balanced.
                let found = std::iter::from_fn(|| pools[ti].pop()).find_map(|slots| {
                    let gold = slots.program(templates[ti].skeleton);
                    let answers = execute_program(kb, &gold, &slots.initial()).expect("instantiation executes");
                    identifiable(kb, &slots.initial(), &gold, &answers).then_some((slots, gold, answers))
                });
                if let Some((slots, gold, answers)) = found {
                    break (ti, slots, gold, answers);
                }
            };
            let t = &templates[ti];
            let (words, entities) = render(kb, &aliases, t, &slots).expect("filtered above");
            out.push(GeneratedItem {
                record: DatasetRecord::new(kb, format!("{name}-{i:04}"), words.join(" "), entities, &answers),
                template: t.name.clone(),
                gold,
            });
            made += 1;
        }
    }
    Ok(splits)
}
