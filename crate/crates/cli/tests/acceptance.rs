//! Acceptance checks. Prints one PASS/FAIL line per check and exits
//! nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lispqa::assist::{random_rollout, DecodingState};
use lispqa::gradcheck::{grad_check, GradCheckConfig, Objective};
use lispqa::kb::{EntitySet, KnowledgeBase, Value};
use lispqa::nn::masked_softmax;
use lispqa::program::{execute_program, Program};
use lispqa::programmer::{extend, program_gradient, sample_program, Hypothesis, Model, ModelConfig, QAItem, WordVocab};
use lispqa::taskgen::{default_templates, gen_dataset, gen_kb, write_dataset, KbSpec};
use lispqa::trainer::{
    evaluate, evaluate_with, predict, reinforce_gradient, reward_f1, train, TrainConfig, TrainOutcome,
};
use support::{all_programs, oracle_eval, oracle_run, random_initial, random_kb, random_program_from};

type Check = Result<String, String>;

fn interpreter_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut n, mut ok, mut non_empty) = (0, 0, 0);
    for _ in 0..200 {
        let kb = random_kb(&mut rng, 50, 8);
        for _ in 0..50 {
            let initial = random_initial(&mut rng, &kb);
            let program = random_program_from(&mut rng, &kb, &initial, 3);
            let got = execute_program(&kb, &program, &initial).ok();
            let want = oracle_run(&kb, &program, &initial).ok();
            if got != want {
                return Err(format!("mismatch on {}: {got:?} vs {want:?}", program.to_text(&kb)));
            }
            n += 1;
            ok += usize::from(got.is_some());
            non_empty += usize::from(got.is_some_and(|s| !s.is_empty()));
        }
    }
    let t = start.elapsed();
    let msg = format!("{n} programs agree ({ok} succeed, {non_empty} non-empty) in {:.2}s", t.as_secs_f64());
    if t > Duration::from_secs(60) {
        return Err(msg + ", over 60s");
    }
    Ok(msg)
}

/// Executes each expression on the naive oracle and insists every value is
/// non-empty.
fn clean_under_oracle(kb: &KnowledgeBase, p: &Program, initial: &[EntitySet]) -> bool {
    let mut vars = initial.to_vec();
    p.expressions.iter().all(|e| match oracle_eval(kb, &vars, e) {
        Ok(v) if !v.is_empty() => {
            vars.push(v);
            true
        }
        _ => false,
    })
}

fn assist_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exprs = 0;
    for k in 0..20u64 {
        let kb = random_kb(&mut rng, 50, 8);
        for r in 0..1000u64 {
            let initial = random_initial(&mut rng, &kb);
            let p = catch_unwind(AssertUnwindSafe(|| random_rollout(&kb, initial.clone(), k * 1000 + r, 3)))
                .map_err(|_| format!("rollout {r} on kb {k} panicked"))?;
            if !p.terminated || !clean_under_oracle(&kb, &p, &initial) {
                return Err(format!("kb {k} rollout {r}: {}", p.to_text(&kb)));
            }
            exprs += p.expressions.len();
        }
    }
    Ok(format!("20000 rollouts clean ({exprs} expressions)"))
}

fn assist_completeness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for k in 0..5 {
        let kb = random_kb(&mut rng, 20, 5);
        for _ in 0..10 {
            let initial = random_initial(&mut rng, &kb);
            for p in all_programs(&kb, initial.len(), 2) {
                if p.expressions.is_empty() || !clean_under_oracle(&kb, &p, &initial) {
                    continue;
                }
                checked += 1;
                let mut state = DecodingState::new(&kb, initial.clone(), 2);
                for t in p.tokens() {
                    let valid = state.valid_tokens().map_err(|e| e.to_string())?;
                    if !valid.contains(&t) {
                        return Err(format!("kb {k}: {} blocked at {}", p.to_text(&kb), t.text(&kb)));
                    }
                    state.push(t).map_err(|e| e.to_string())?;
                }
            }
        }
    }
    Ok(format!("{checked} clean programs fully reachable (5 KBs x 10 bindings)"))
}

fn gradient_check() -> Check {
    let mut worst: f64 = 0.0;
    for objective in [Objective::Likelihood, Objective::PolicyGradient] {
        for seed in 0..3 {
            let r =
                grad_check(&GradCheckConfig { objective, ..Default::default() }, seed).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
        }
    }
    let msg = format!("max relative error {worst:.2e} over 2 objectives x 3 seeds");
    if worst <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn softmax_masking() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..100_000 {
        let n = rng.gen_range(1..=64);
        let scale = [1.0, 10.0, 100.0, 700.0][i % 4];
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let forced = rng.gen_range(0..n);
        mask[forced] = true;
        let p = masked_softmax(&logits, &mask).map_err(|e| e.to_string())?;
        if p.iter().zip(&mask).any(|(x, m)| !m && *x != 0.0) {
            return Err(format!("pair {i}: masked entry non-zero"));
        }
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let msg = format!("100000 pairs, max |sum - 1| = {worst:.1e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reinforce_estimator() -> Check {
    let kb = KnowledgeBase::parse("A\tp\tB\tentity\n@alias\ta\tA\n").map_err(|e| e.to_string())?;
    let item = QAItem::from_question(&kb, "q", "what is p of a").map_err(|e| e.to_string())?;
    let item = QAItem { answers: EntitySet::singleton(Value::Entity(kb.entity("B").unwrap())), ..item };
    let words = WordVocab::build([item.abstracted.as_slice()]);
    let cfg = ModelConfig { embed_dim: 4, hidden_dim: 6, init_scale: 0.3, max_expressions: 1 };
    let model = Model::new(words, &kb, &cfg, &mut ChaCha8Rng::seed_from_u64(6));

    let mut programs = Vec::new();
    let mut stack = vec![Hypothesis::initial(&model, &kb, &item).map_err(|e| e.to_string())?];
    while let Some(h) = stack.pop() {
        if h.is_terminated() {
            programs.push(h);
            continue;
        }
        for t in h.valid_tokens().to_vec() {
            stack.push(extend(&h, t, &model).map_err(|e| e.to_string())?);
        }
    }
    if programs.len() != 2 {
        return Err(format!("toy has {} programs, expected 2", programs.len()));
    }
    let reward = |h: &Hypothesis| reward_f1(&h.denotation(), &item.answers).unwrap();
    let weighted: Vec<_> = programs.iter().map(|h| (h.tokens(), h.log_prob().exp() * reward(h))).collect();
    let exact = program_gradient(&model, &kb, &item, &weighted).map_err(|e| e.to_string())?.0.flat();

    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sum = vec![0.0; exact.len()];
    let mut sq = vec![0.0; exact.len()];
    for _ in 0..n {
        let h = sample_program(&model, &kb, &item, &mut rng).map_err(|e| e.to_string())?;
        let g = reinforce_gradient(&model, &kb, &item, &[(h.tokens().to_vec(), reward(&h))], 0.0)
            .map_err(|e| e.to_string())?
            .flat();
        for (i, x) in g.iter().enumerate() {
            sum[i] += x;
            sq[i] += x * x;
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..exact.len() {
        let mean = sum[i] / n as f64;
        let var = (sq[i] / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let dev = (mean - exact[i]).abs();
        if dev > 3.0 * se + 1e-12 {
            return Err(format!("coordinate {i}: mean {mean:.3e}, exact {:.3e}, se {se:.1e}", exact[i]));
        }
        if se > 0.0 {
            worst = worst.max(dev / se);
        }
    }
    Ok(format!("{} coordinates within 3 SE (worst {worst:.2} SE)", exact.len()))
}

struct Benchmark {
    runs: Vec<(TrainOutcome, f64, Duration)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn run_benchmark() -> Result<Benchmark, String> {
    let kb = gen_kb(0, &KbSpec::default()).map_err(|e| e.to_string())?;
    let splits = gen_dataset(&kb, &default_templates(), 0, 300, 100, 100).map_err(|e| e.to_string())?;
    let items = |v: &[lispqa::taskgen::GeneratedItem]| -> Result<Vec<QAItem>, String> {
        v.iter().map(|g| g.to_item(&kb).map_err(|e| e.to_string())).collect()
    };
    let (tr, dev, test) = (items(&splits.train)?, items(&splits.dev)?, items(&splits.test)?);
    let mut runs = Vec::new();
    for seed in 0..3 {
        let start = Instant::now();
        let cfg = TrainConfig { seed, threads: 1, ..TrainConfig::default() };
        let outcome = train(&kb, &tr, &dev, &cfg, &mut |_| {}).map_err(|e| e.to_string())?;
        let test_f1 = evaluate(&outcome.model, &kb, &test).map_err(|e| e.to_string())?.f1;
        runs.push((outcome, test_f1, start.elapsed()));
    }
    Ok(Benchmark { runs })
}

fn end_to_end(b: &Benchmark) -> Check {
    let dev = median(b.runs.iter().map(|r| r.0.final_dev.f1).collect());
    let test = median(b.runs.iter().map(|r| r.1).collect());
    let coverage = median(b.runs.iter().map(|r| r.0.log.last().map_or(0.0, |l| l.store_coverage)).collect());
    let slowest = b.runs.iter().map(|r| r.2).max().unwrap_or_default();
    let msg = format!(
        "median dev F1 {dev:.3}, test F1 {test:.3}, coverage {coverage:.3}, slowest run {:.0}s",
        slowest.as_secs_f64()
    );
    if dev >= 0.90 && test >= 0.85 && coverage >= 0.95 && slowest <= Duration::from_secs(15 * 60) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn monotonic_store(b: &Benchmark) -> Check {
    let mut records = 0;
    for (seed, (outcome, ..)) in b.runs.iter().enumerate() {
        for w in outcome.log.windows(2) {
            if let Some(q) = w[0].store_rewards.iter().zip(&w[1].store_rewards).position(|(a, b)| b < a) {
                return Err(format!("seed {seed}: question {q} lost reward at {:?} {}", w[1].phase, w[1].iteration));
            }
        }
        records += outcome.log.len();
    }
    Ok(format!("{records} log records, no stored reward decreased"))
}

fn metric_fixture(b: &Benchmark) -> Check {
    let s = |ids: &[u32]| -> EntitySet { ids.iter().map(|i| Value::Entity(lispqa::kb::EntityId(*i))).collect() };
    let pairs = vec![
        (s(&[1]), s(&[1])),
        (s(&[1, 2]), s(&[1, 3])),
        (s(&[]), s(&[1])),
        (s(&[1, 2]), s(&[1])),
        (s(&[1]), s(&[1, 2, 3, 4])),
    ];
    let m = evaluate_with(&pairs).map_err(|e| e.to_string())?;
    let want = (0.6, 0.55, (1.0 + 0.5 + 0.0 + 2.0 / 3.0 + 0.4) / 5.0, 0.2);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    if !(close(m.precision, want.0) && close(m.recall, want.1) && close(m.f1, want.2) && close(m.accuracy, want.3)) {
        return Err(format!("got {m:?}"));
    }
    // evaluate() must be the same average over greedy predictions.
    let kb = gen_kb(0, &KbSpec::default()).map_err(|e| e.to_string())?;
    let splits = gen_dataset(&kb, &default_templates(), 0, 300, 100, 100).map_err(|e| e.to_string())?;
    let dev: Vec<QAItem> = splits.dev.iter().map(|g| g.to_item(&kb).unwrap()).collect();
    let model = &b.runs[0].0.model;
    let pairs: Vec<_> = dev.iter().map(|q| (predict(model, &kb, q).unwrap().denotation(), q.answers.clone())).collect();
    let direct = evaluate_with(&pairs).map_err(|e| e.to_string())?;
    let via = evaluate(model, &kb, &dev).map_err(|e| e.to_string())?;
    if direct != via {
        return Err(format!("evaluate {via:?} differs from per-question average {direct:?}"));
    }
    Ok(format!("P {:.2} R {:.2} F1 {:.4} acc {:.1}; evaluate() consistent", m.precision, m.recall, m.f1, m.accuracy))
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |f: &str| dir.path().join(f);
    let kb = gen_kb(1, &KbSpec { n_entities: 40, n_properties: 8, edge_density: 0.2 }).map_err(|e| e.to_string())?;
    let splits = gen_dataset(&kb, &default_templates(), 1, 40, 10, 0).map_err(|e| e.to_string())?;
    std::fs::write(p("kb.tsv"), kb.to_text()).map_err(|e| e.to_string())?;
    std::fs::write(p("train.jsonl"), write_dataset(splits.train.iter().map(|g| &g.record)))
        .map_err(|e| e.to_string())?;
    std::fs::write(p("dev.jsonl"), write_dataset(splits.dev.iter().map(|g| &g.record))).map_err(|e| e.to_string())?;
    std::fs::write(
        p("cfg.txt"),
        "beam_size = 8\nml_iterations = 2\nepochs_per_iteration = 2\nrl_epochs = 2\nhidden_dim = 16\nembed_dim = 8\n",
    )
    .map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let (ckpt, log) = (p(&format!("{tag}.json")), p(&format!("{tag}.log")));
        let out = Command::new(env!("CARGO_BIN_EXE_lispqa"))
            .arg("train")
            .args(["--kb".as_ref(), p("kb.tsv").as_os_str()])
            .args(["--train".as_ref(), p("train.jsonl").as_os_str()])
            .args(["--dev".as_ref(), p("dev.jsonl").as_os_str()])
            .args(["--config".as_ref(), p("cfg.txt").as_os_str()])
            .args(["--out-checkpoint".as_ref(), ckpt.as_os_str()])
            .args(["--log".as_ref(), log.as_os_str()])
            .args(["--seed", "3"])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok((std::fs::read(ckpt).map_err(|e| e.to_string())?, std::fs::read(log).map_err(|e| e.to_string())?))
    };
    let a = run("a")?;
    let b = run("b")?;
    if a != b {
        return Err("checkpoint or log differs between runs".into());
    }
    Ok(format!("checkpoint ({} bytes) and log ({} bytes) identical", a.0.len(), a.1.len()))
}

fn report(n: usize, name: &str, check: Check) -> bool {
    match check {
        Ok(msg) => {
            println!("[PASS] {n:>2} {name}: {msg}");
            true
        }
        Err(msg) => {
            println!("[FAIL] {n:>2} {name}: {msg}");
            false
        }
    }
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()))
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "interpreter oracle equivalence", guarded(interpreter_oracle));
    all &= report(2, "assist soundness", guarded(assist_soundness));
    all &= report(3, "assist completeness", guarded(assist_completeness));
    all &= report(4, "gradient check", guarded(gradient_check));
    all &= report(5, "masked softmax", guarded(softmax_masking));
    all &= report(6, "REINFORCE estimator", guarded(reinforce_estimator));
    let bench = catch_unwind(AssertUnwindSafe(run_benchmark)).unwrap_or_else(|_| Err("panicked".into()));
    match &bench {
        Ok(b) => {
            all &= report(7, "end-to-end weak supervision", guarded(|| end_to_end(b)));
            all &= report(8, "store monotonicity", guarded(|| monotonic_store(b)));
            all &= report(9, "metric fixtures", guarded(|| metric_fixture(b)));
            let ml = median(b.runs.iter().map(|r| r.0.ml_dev.f1).collect());
            let rl = median(b.runs.iter().map(|r| r.0.final_dev.f1).collect());
            println!("[INFO]    median dev F1 after iterative ML {ml:.3}, after augmented REINFORCE {rl:.3}");
        }
        Err(e) => {
            for (n, name) in [(7, "end-to-end weak supervision"), (8, "store monotonicity"), (9, "metric fixtures")] {
                all &= report(n, name, Err(format!("benchmark failed: {e}")));
            }
        }
    }
    all &= report(10, "CLI determinism", guarded(cli_determinism));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
