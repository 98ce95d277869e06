use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TaskGenError;
use crate::kb::{KnowledgeBase, KnowledgeBaseBuilder};

const ENTITY_PROPS: [&str; 15] = [
    "leader", "capital", "founder", "neighbor", "ally", "rival", "owner", "partner", "mentor", "sponsor", "supplier",
    "member", "parent", "sibling", "student",
];
const NUMBER_PROPS: [&str; 5] = ["population", "height", "revenue", "area", "age"];
const DATE_PROPS: [&str; 2] = ["founded", "opened"];
const SYLLABLES: [&str; 24] = [
    "ka", "lo", "ven", "dar", "mi", "sor", "tel", "ru", "bin", "ga", "nor", "pe", "li", "tan", "qu", "zo", "fen",
    "mar", "ost", "vi", "bel", "dru", "ska", "yun",
];
const PREFIXES: [&str; 3] = ["port", "mount", "saint"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbSpec {
    pub n_entities: usize,
    pub n_properties: usize,
    /// Chance that a given entity has any edge for a given entity-valued
    /// property.
    pub edge_density: f64,
}

impl Default for KbSpec {
    fn default() -> Self {
        KbSpec { n_entities: 100, n_properties: 10, edge_density: 0.2 }
    }
}

fn property_names(n: usize) -> (Vec<String>, Vec<String>, Vec<String>) {
    let n_num = (n / 5).max(1);
    let n_date = usize::from(n >= 6);
    let n_ent = n - n_num - n_date.min(n - n_num);
    let name = |list: &[&str], i: usize| {
        let base = list[i % list.len()];
        if i < list.len() {
            base.to_string()
        } else {
            format!("{base}{}", i / list.len() + 1)
        }
    };
    (
        (0..n_ent).map(|i| name(&ENTITY_PROPS, i)).collect(),
        (0..n_num).map(|i| name(&NUMBER_PROPS, i)).collect(),
        (0..n - n_ent - n_num).map(|i| name(&DATE_PROPS, i)).collect(),
    )
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Distinct entity names with their lowercase one- or two-word aliases.
fn entity_names(n: usize, rng: &mut ChaCha8Rng, reserved: &BTreeSet<String>) -> Vec<(String, String)> {
    let mut used = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let k = rng.gen_range(2..=3);
        let word: String = (0..k).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        if reserved.contains(&word) {
            continue;
        }
        let alias =
            if rng.gen_bool(0.2) { format!("{} {word}", PREFIXES.choose(rng).expect("non-empty")) } else { word };
        if used.insert(alias.clone()) {
            let id = alias.split(' ').map(capitalize).collect::<String>();
            out.push((id, alias));
        }
    }
    out
}

/// Reproducible random KB. Every entity gets an alias, every numeric and
/// date property a value for each entity, and each entity-valued property at
/// least one edge. A single entity yields no triples at all.
pub fn gen_kb(seed: u64, spec: &KbSpec) -> Result<KnowledgeBase, TaskGenError> {
    if spec.n_entities == 0 || spec.n_properties == 0 {
        return Err(TaskGenError::Setting("sizes must be at least 1".into()));
    }
    if spec.n_entities > 10_000 {
        return Err(TaskGenError::Setting("at most 10000 entities".into()));
    }
    if !(0.0..=1.0).contains(&spec.edge_density) {
        return Err(TaskGenError::Setting("edge density must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ent_props, num_props, date_props) = property_names(spec.n_properties);
    let reserved: BTreeSet<String> = super::templates::template_words()
        .into_iter()
        .chain(ent_props.iter().chain(&num_props).chain(&date_props).cloned())
        .collect();
    let names = entity_names(spec.n_entities, &mut rng, &reserved);
    let mut b = KnowledgeBaseBuilder::new();
    for (id, alias) in &names {
        b.alias(alias, id);
    }
    let n = names.len();
    if n >= 2 {
        for p in &ent_props {
            let mut any = false;
            for s in 0..n {
                if !rng.gen_bool(spec.edge_density) {
                    continue;
                }
                for _ in 0..rng.gen_range(1..=6) {
                    let o = (s + rng.gen_range(1..n)) % n;
                    b.entity_triple(&names[s].0, p, &names[o].0);
                    any = true;
                }
            }
            if !any {
                let s = rng.gen_range(0..n);
                let o = (s + rng.gen_range(1..n)) % n;
                b.entity_triple(&names[s].0, p, &names[o].0);
            }
        }
        for p in &num_props {
            for (id, _) in &names {
                b.number_triple(id, p, f64::from(rng.gen_range(1u32..=1000)));
            }
        }
        let epoch = NaiveDate::from_ymd_opt(1800, 1, 1).expect("valid date");
        for p in &date_props {
            for (id, _) in &names {
                let d = epoch.checked_add_days(Days::new(rng.gen_range(0..80_000))).expect("in range");
                b.date_triple(id, p, d);
            }
        }
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_mix() {
        let (e, n, d) = property_names(10);
        assert_eq!((e.len(), n.len(), d.len()), (7, 2, 1));
        let (e, n, d) = property_names(1);
        assert_eq!((e.len(), n.len(), d.len()), (0, 1, 0));
        let (e, _, _) = property_names(40);
        assert_eq!(e.len(), 31);
        assert_eq!(e.iter().collect::<BTreeSet<_>>().len(), 31);
    }

    #[test]
    fn seeded_and_round_trips() {
        let spec = KbSpec { n_entities: 30, n_properties: 6, edge_density: 0.3 };
        let a = gen_kb(0, &spec).unwrap();
        let b = gen_kb(0, &spec).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a.to_text(), gen_kb(1, &spec).unwrap().to_text());
        let back = KnowledgeBase::parse(&a.to_text()).unwrap();
        assert_eq!(back.to_text(), a.to_text());
        assert_eq!(a.n_entities(), 30);
        assert_eq!(a.n_properties(), 6);
        assert_eq!(a.aliases().count(), 30);
    }

    #[test]
    fn single_entity_has_no_triples() {
        let kb = gen_kb(0, &KbSpec { n_entities: 1, n_properties: 3, edge_density: 1.0 }).unwrap();
        assert_eq!(kb.n_entities(), 1);
        assert_eq!(kb.n_triples(), 0);
    }
}
