//! Random KBs and programs, plus a naive evaluator written straight from the
//! function table over the raw triple list.
#![allow(dead_code)]

use chrono::NaiveDate;
use rand::Rng;

use lispqa::kb::{EntitySet, KnowledgeBase, KnowledgeBaseBuilder, PropertyId, Value, ValueKind};
use lispqa::program::{Expression, Func, Program, Var};

/// Up to `max_e` entities and `max_p` properties. Some properties are
/// entity-valued, some numeric, some dates and some mixed.
pub fn random_kb<R: Rng>(rng: &mut R, max_e: usize, max_p: usize) -> KnowledgeBase {
    let n_e = rng.gen_range(2..=max_e.max(2));
    let n_p = rng.gen_range(1..=max_p.max(1));
    let mut b = KnowledgeBaseBuilder::new();
    let name = |i: usize| format!("E{i:02}");
    for i in 0..n_e {
        b.alias(&format!("ent {i}"), &name(i));
    }
    let n_triples = rng.gen_range(n_e..=n_e * (n_p + 2));
    for _ in 0..n_triples {
        let s = name(rng.gen_range(0..n_e));
        let pi = rng.gen_range(0..n_p);
        let p = format!("p{pi}");
        // The kind mix is a property of the property index so most
        // properties stay homogeneous.
        let kind = match pi % 4 {
            0 | 1 => 0,
            2 => 1,
            _ => rng.gen_range(0..3),
        };
        match kind {
            0 => {
                b.entity_triple(&s, &p, &name(rng.gen_range(0..n_e)));
            }
            1 => {
                b.number_triple(&s, &p, f64::from(rng.gen_range(0..6)));
            }
            _ => {
                let d = NaiveDate::from_ymd_opt(2000, 1, 1 + rng.gen_range(0..5)).unwrap();
                b.date_triple(&s, &p, d);
            }
        }
    }
    b.build()
}

pub fn random_initial<R: Rng>(rng: &mut R, kb: &KnowledgeBase) -> Vec<EntitySet> {
    let ents: Vec<_> = kb.entities().collect();
    (0..rng.gen_range(1..=2))
        .map(|_| {
            let k = rng.gen_range(1..=3);
            (0..k).map(|_| Value::Entity(ents[rng.gen_range(0..ents.len())])).collect()
        })
        .collect()
}

/// Structurally well-formed programs that may still fail at run time
/// (undefined variables, unknown properties, incomparable values, ...).
/// Properties are usually drawn from those the first argument actually has,
/// tracked with the oracle, so that most programs do something.
pub fn random_program<R: Rng>(rng: &mut R, kb: &KnowledgeBase, n_initial: usize, max_exprs: usize) -> Program {
    random_program_from(rng, kb, &vec![EntitySet::empty(); n_initial], max_exprs)
}

pub fn random_program_from<R: Rng>(
    rng: &mut R,
    kb: &KnowledgeBase,
    initial: &[EntitySet],
    max_exprs: usize,
) -> Program {
    let n = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=max_exprs.max(1)) };
    let mut vals = initial.to_vec();
    let mut expressions = Vec::with_capacity(n);
    for _ in 0..n {
        let defined = vals.len();
        let var = |rng: &mut R| {
            let extra = usize::from(rng.gen_bool(0.05));
            Var(rng.gen_range(0..defined + extra) as u32)
        };
        let func = Func::ALL[rng.gen_range(0..4)];
        let vars: Vec<Var> = (0..func.var_arity()).map(|_| var(rng)).collect();
        let comparable = matches!(func, Func::ArgMax | Func::ArgMin) && rng.gen_bool(0.9);
        let used: Vec<PropertyId> = match vals.get(vars[0].index()) {
            Some(set) => {
                let mut ps: Vec<_> = kb
                    .triples()
                    .filter(|t| set.contains(&Value::Entity(t.subject)))
                    .filter(|t| !comparable || t.object.kind() != ValueKind::Entity)
                    .map(|t| t.property)
                    .collect();
                ps.dedup();
                ps
            }
            None => vec![],
        };
        let prop = if !used.is_empty() && rng.gen_bool(0.8) {
            used[rng.gen_range(0..used.len())]
        } else {
            let extra = usize::from(rng.gen_bool(0.03));
            PropertyId(rng.gen_range(0..kb.n_properties() + extra) as u32)
        };
        let e = Expression::new(func, &vars, prop).unwrap();
        vals.push(oracle_eval(kb, &vals, &e).unwrap_or_default());
        expressions.push(e);
    }
    Program { expressions, terminated: true }
}

#[derive(Debug, PartialEq)]
pub struct OracleError;

fn objects(kb: &KnowledgeBase, s: Value, p: PropertyId) -> Vec<Value> {
    kb.triples().filter(|t| Value::Entity(t.subject) == s && t.property == p).map(|t| t.object).collect()
}

pub fn oracle_eval(kb: &KnowledgeBase, vars: &[EntitySet], e: &Expression) -> Result<EntitySet, OracleError> {
    let get = |v: Var| vars.get(v.index()).ok_or(OracleError);
    if e.prop().index() >= kb.n_properties() {
        return Err(OracleError);
    }
    match *e {
        Expression::Hop { var, prop } => {
            let set = get(var)?;
            Ok(set.iter().flat_map(|s| objects(kb, *s, prop)).collect())
        }
        Expression::ArgMax { var, prop } | Expression::ArgMin { var, prop } => {
            let max = matches!(e, Expression::ArgMax { .. });
            let set = get(var)?;
            let mut scored = Vec::new();
            let mut kinds = Vec::new();
            for s in set.iter().filter(|s| s.kind() == ValueKind::Entity) {
                let os = objects(kb, *s, prop);
                kinds.extend(os.iter().map(|o| o.kind()));
                let best = if max { os.iter().copied().max() } else { os.iter().copied().min() };
                if let Some(b) = best {
                    scored.push((*s, b));
                }
            }
            if kinds.contains(&ValueKind::Entity) || kinds.windows(2).any(|w| w[0] != w[1]) {
                return Err(OracleError);
            }
            let best = scored.iter().map(|x| x.1);
            let best = if max { best.max() } else { best.min() };
            Ok(scored.iter().filter(|x| Some(x.1) == best).map(|x| x.0).collect())
        }
        Expression::Equal { left, right, prop } => {
            if left == right {
                return Err(OracleError);
            }
            let (l, r) = (get(left)?, get(right)?);
            Ok(l.iter()
                .filter(|s| s.kind() == ValueKind::Entity && objects(kb, **s, prop).iter().any(|o| r.contains(o)))
                .copied()
                .collect())
        }
    }
}

pub fn oracle_run(kb: &KnowledgeBase, program: &Program, initial: &[EntitySet]) -> Result<EntitySet, OracleError> {
    let mut vars = initial.to_vec();
    let mut last = EntitySet::empty();
    for e in &program.expressions {
        last = oracle_eval(kb, &vars, e)?;
        vars.push(last.clone());
    }
    Ok(last)
}

/// Every structurally valid program with at most `max_exprs` expressions
/// over the KB's properties, ending in RETURN.
pub fn all_programs(kb: &KnowledgeBase, n_initial: usize, max_exprs: usize) -> Vec<Program> {
    let mut out = vec![Program { expressions: vec![], terminated: true }];
    let mut frontier = vec![Vec::<Expression>::new()];
    for depth in 0..max_exprs {
        let defined = n_initial + depth;
        let mut next = Vec::new();
        for prefix in &frontier {
            for func in Func::ALL {
                let var_lists: Vec<Vec<Var>> = if func.var_arity() == 1 {
                    (0..defined).map(|a| vec![Var(a as u32)]).collect()
                } else {
                    (0..defined).flat_map(|a| (0..defined).map(move |b| vec![Var(a as u32), Var(b as u32)])).collect()
                };
                for vars in &var_lists {
                    for p in kb.properties() {
                        let mut e = prefix.clone();
                        e.push(Expression::new(func, vars, p).unwrap());
                        out.push(Program { expressions: e.clone(), terminated: true });
                        next.push(e);
                    }
                }
            }
        }
        frontier = next;
    }
    out
}
