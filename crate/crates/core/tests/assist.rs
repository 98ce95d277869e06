mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lispqa::assist::{random_rollout, DecodingState};
use lispqa::program::{execute_program, Machine, Program, Token};
use support::{all_programs, random_initial, random_kb};

/// Every expression must succeed with a non-empty value.
fn clean(kb: &lispqa::kb::KnowledgeBase, program: &Program, initial: &[lispqa::kb::EntitySet]) -> bool {
    let mut m = Machine::new(kb, initial.to_vec());
    program.expressions.iter().all(|e| match m.exec(e) {
        Ok(v) => !m.vars()[v.index()].is_empty(),
        Err(_) => false,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rollouts_are_sound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, 15, 5);
        let initial = random_initial(&mut rng, &kb);
        for k in 0..25 {
            let p = random_rollout(&kb, initial.clone(), seed.wrapping_add(k), 3);
            prop_assert!(p.terminated);
            prop_assert!(p.expressions.len() <= 3);
            prop_assert!(clean(&kb, &p, &initial), "{}", p.to_text(&kb));
        }
    }

    #[test]
    fn clean_programs_are_reachable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = random_kb(&mut rng, 6, 3);
        let initial = random_initial(&mut rng, &kb);
        for p in all_programs(&kb, initial.len(), 2) {
            if p.expressions.is_empty() || !clean(&kb, &p, &initial) {
                continue;
            }
            let mut state = DecodingState::new(&kb, initial.clone(), 2);
            for t in p.tokens() {
                let valid = state.valid_tokens().unwrap();
                prop_assert!(valid.contains(&t), "{} missing at {:?}", p.to_text(&kb), t);
                state.push(t).unwrap();
            }
        }
    }
}

#[test]
fn return_is_forced_at_the_expression_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let kb = random_kb(&mut rng, 10, 4);
        let initial = random_initial(&mut rng, &kb);
        let mut state = DecodingState::new(&kb, initial.clone(), 1);
        let mut valid = state.valid_tokens().unwrap();
        while !state.is_terminated() {
            if state.n_expressions() == 1 && state.emitted().last() == Some(&Token::Close) {
                assert_eq!(valid, vec![Token::Return]);
            }
            let t = *valid.last().unwrap();
            state.push(t).unwrap();
            if !state.is_terminated() {
                valid = state.valid_tokens().unwrap();
            }
        }
        let p = state.program();
        let denot = execute_program(&kb, &p, &initial).unwrap();
        assert_eq!(denot.is_empty(), p.expressions.is_empty());
    }
}

#[test]
fn invalid_tokens_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kb = random_kb(&mut rng, 10, 4);
    let mut state = DecodingState::new(&kb, random_initial(&mut rng, &kb), 2);
    assert!(state.push(Token::Close).is_err());
    state.push(Token::Open).unwrap();
    assert!(state.push(Token::Return).is_err());
    assert!(state.valid_tokens().unwrap().iter().all(|t| matches!(t, Token::Func(_))));
}
