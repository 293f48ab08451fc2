mod common;

use std::collections::BTreeMap;

use common::{samples, Counting, Scripted};
use proptest::prelude::*;
use qads::provider::{batch_embed, batch_logprob, run_bounded};
use qads::scoring::{build_prompt_and_test_sets, embed_corpus, score_corpus};
use qads::Error;
use qads_core::corpus::{Corpus, Sample};
use qads_core::provider::{LanguageModel, LogProbRequest, MockProvider, ProviderError};
use qads_core::quality::{self, zero_shot_request, TestSet};

fn mock() -> MockProvider {
    MockProvider::new(11, 8).unwrap()
}

fn test_set(model: &impl LanguageModel, name: &str, n: usize) -> TestSet {
    TestSet::score(name, samples(name, n), model).unwrap()
}

#[test]
fn batch_results_do_not_depend_on_parallelism() {
    let m = mock();
    let reqs: Vec<(String, LogProbRequest)> = samples("t", 40)
        .iter()
        .map(|s| (s.id.clone(), zero_shot_request(s).unwrap()))
        .collect();
    let serial = batch_logprob(&m, &reqs, 1).unwrap();
    let parallel = batch_logprob(&m, &reqs, 8).unwrap();
    assert_eq!(serial, parallel);
    let texts: Vec<(String, String)> = samples("t", 40).into_iter().map(|s| (s.id, s.question)).collect();
    assert_eq!(batch_embed(&m, &texts, 1).unwrap(), batch_embed(&m, &texts, 8).unwrap());
}

#[test]
fn empty_batch_is_empty() {
    assert!(batch_logprob(&mock(), &[], 4).unwrap().is_empty());
    assert!(run_bounded::<u8, u8, _>(&[], 3, |x| *x).unwrap().is_empty());
}

#[test]
fn zero_parallelism_is_a_config_error() {
    assert!(matches!(run_bounded(&[1], 0, |x| *x), Err(Error::Config(_))));
}

#[test]
fn run_bounded_preserves_order() {
    let items: Vec<u64> = (0..500).collect();
    let out = run_bounded(&items, 7, |x| x * x).unwrap();
    assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
}

#[test]
fn failing_item_is_named() {
    let m = Scripted(|r: &LogProbRequest| {
        if r.context.contains("question 5") {
            Err(ProviderError::Remote {
                status: 500,
                message: "boom".into(),
            })
        } else {
            Ok(-1.0)
        }
    });
    let reqs: Vec<(String, LogProbRequest)> = samples("t", 10)
        .iter()
        .map(|s| (s.id.clone(), zero_shot_request(s).unwrap()))
        .collect();
    match batch_logprob(&m, &reqs, 4) {
        Err(Error::Batch { id, source }) => {
            assert_eq!(id, "t-5");
            assert!(matches!(source, ProviderError::Remote { status: 500, .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_batch_ids_are_rejected() {
    let s = &samples("t", 1)[0];
    let r = zero_shot_request(s).unwrap();
    let reqs = vec![("x".to_string(), r.clone()), ("x".to_string(), r)];
    assert!(batch_logprob(&mock(), &reqs, 2).is_err());
}

#[test]
fn parallel_scoring_matches_serial_and_call_count() {
    let m = Counting::new(mock());
    let prompts = samples("p", 12);
    let tests = vec![test_set(&m.inner, "a", 5), test_set(&m.inner, "b", 3)];
    let serial = quality::score_corpus(&prompts, &tests, &m.inner).unwrap();
    for p in [1, 3, 8] {
        let before = m.logprobs();
        let table = score_corpus(&prompts, &tests, &m, p).unwrap();
        assert_eq!(table, serial);
        assert_eq!(m.logprobs() - before, 12 * (5 + 3));
    }
}

#[test]
fn failing_pair_is_named() {
    let m = Scripted(|r: &LogProbRequest| {
        if r.context.starts_with("p question 2") && r.context.ends_with("t question 1: what is 7 plus 1?") {
            Err(ProviderError::Protocol("bad".into()))
        } else {
            Ok(-1.0)
        }
    });
    let tests = vec![test_set(&m, "t", 3)];
    match score_corpus(&samples("p", 4), &tests, &m, 4) {
        Err(Error::Batch { id, .. }) => assert_eq!(id, "p-2 -> t-1"),
        other => panic!("{other:?}"),
    }
}

/// One prompt, 100 test samples, zero-shot -1 everywhere. The prompt
/// strictly helps on 37 samples, ties on 40, and hurts on 23.
#[test]
fn thirty_seven_of_one_hundred() {
    let tests: Vec<Sample> = samples("t", 100);
    let outcome = |i: usize| match i {
        0..37 => -0.5,
        37..77 => -1.0,
        _ => -2.0,
    };
    let m = Scripted(move |r: &LogProbRequest| {
        if !r.context.contains('\n') {
            return Ok(-1.0);
        }
        let q = r.context.rsplit('\n').next().unwrap();
        let i: usize = q
            .strip_prefix("t question ")
            .unwrap()
            .split(':')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        Ok(outcome(i))
    });
    let ts = TestSet::score("t", tests, &m).unwrap();
    let table = score_corpus(&samples("p", 1), &[ts], &m, 4).unwrap();
    assert_eq!(table.score("p-0"), Some(0.37));
    assert_eq!(table.label("p-0"), Some(2));
}

#[test]
fn extreme_scores() {
    for (delta, want) in [(0.0, 0.0), (-0.1, 0.0), (0.1, 1.0)] {
        let m = Scripted(move |r: &LogProbRequest| Ok(if r.context.contains('\n') { -1.0 + delta } else { -1.0 }));
        let ts = TestSet::score("t", samples("t", 10), &m).unwrap();
        let table = score_corpus(&samples("p", 3), &[ts], &m, 2).unwrap();
        for k in 0..3 {
            assert_eq!(table.score(&format!("p-{k}")), Some(want));
        }
    }
}

#[test]
fn prompt_and_test_sets_match_core() {
    let m = mock();
    let mut corpus = Corpus::new();
    corpus.insert("a", samples("a", 30)).unwrap();
    corpus.insert("t", samples("t", 20)).unwrap();
    let emb = embed_corpus(&corpus, None, &m, 4, false).unwrap();
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let ours = build_prompt_and_test_sets(&corpus, &names(&["a", "t"]), &names(&["t"]), &emb, 10, 5, 3, &m, 4).unwrap();
    let core =
        quality::build_prompt_and_test_sets(&corpus, &names(&["a", "t"]), &names(&["t"]), &emb, 10, 5, 3, &m).unwrap();
    assert_eq!(ours, core);
    let test_ids: Vec<&str> = ours.1[0].samples().iter().map(|s| s.id.as_str()).collect();
    assert!(ours.0.iter().all(|p| !test_ids.contains(&p.id.as_str())));
    assert_eq!(ours.0.len(), 20);
}

#[test]
fn embeddings_follow_corpus_order() {
    let m = Counting::new(mock());
    let mut corpus = Corpus::new();
    corpus.insert("b", samples("b", 4)).unwrap();
    corpus.insert("a", samples("a", 3)).unwrap();
    let emb = embed_corpus(&corpus, Some(&["b".to_string()]), &m, 3, true).unwrap();
    assert_eq!(emb.ids(), ["b-0", "b-1", "b-2", "b-3"]);
    assert_eq!(m.embed_calls.load(std::sync::atomic::Ordering::SeqCst), 4);
    let all = embed_corpus(&corpus, None, &m, 3, false).unwrap();
    assert_eq!(all.ids()[0], "a-0");
    assert_eq!(
        all.get("b-2"),
        Some(
            m.inner
                .embed(&samples("b", 4)[2].embedding_text(false))
                .unwrap()
                .vector()
        )
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Parallel scoring against a naive loop over the mock provider.
    #[test]
    fn scoring_matches_naive_loop(n_prompts in 1usize..=10, n_tests in 1usize..=10, seed in any::<u64>(), p in 1usize..6) {
        let m = MockProvider::new(seed, 4).unwrap();
        let prompts = samples("p", n_prompts);
        let ts = TestSet::score("t", samples("t", n_tests), &m).unwrap();
        let table = score_corpus(&prompts, std::slice::from_ref(&ts), &m, p).unwrap();
        let mut naive = BTreeMap::new();
        for k in &prompts {
            let mut wins = 0;
            for t in ts.samples() {
                let zs = m.logprob(&zero_shot_request(t).unwrap()).unwrap().mean_logprob();
                let os = m.logprob(&quality::one_shot_request(k, t).unwrap()).unwrap().mean_logprob();
                if os > zs {
                    wins += 1;
                }
            }
            naive.insert(k.id.clone(), wins as f64 / n_tests as f64);
        }
        for (id, qs) in naive {
            prop_assert_eq!(table.score(&id), Some(qs));
        }
    }
}
