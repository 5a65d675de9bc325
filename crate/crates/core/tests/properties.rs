use std::collections::BTreeSet;

use proptest::prelude::*;
use toxspan::corpus::{balance_binary, ingest_semeval, read_canonical, write_canonical, Dataset, Sample, Split};
use toxspan::errsample::{categorize, reweight_prevalence, sample_sheet, ClassAggregate, ErrorClass, ErrorRecord, PrevalenceKey};
use toxspan::harness::{grid_search, GridSpec, Objective, Predictor, TuneOptions};
use toxspan::inferred::{gate, gold_binary, BinaryMap, BinaryPrediction};
use toxspan::lexicon::{build_lexicon, predict, InSpanRule, Lexicon, LexiconBuildConfig, MatchMode};
use toxspan::metrics::{evaluate, score_sample};
use toxspan::rationale::{threshold_to_spans, ScoredToken, ThresholdConfig, TokenScores};
use toxspan::spanops::{tokenize, MergeConfig, Span, SpanSet};
use toxspan::synthetic::{mini_domain, ALPHA};
use toxspan::Predictions;

fn spanset() -> impl Strategy<Value = SpanSet> {
    prop::collection::vec((0usize..100, 0usize..15), 0..8)
        .prop_map(|v| SpanSet::from_ranges(v.into_iter().map(|(s, l)| Span::new(s, s + l)).collect::<Vec<_>>()))
}

type RawSample = (String, bool, Vec<(usize, usize)>, u8);

fn sample_strategy() -> impl Strategy<Value = RawSample> {
    ("[a-zé' ]{1,40}", any::<bool>(), prop::collection::vec((0usize..40, 0usize..8), 0..4), 0u8..3)
}

fn build_dataset(name: &str, raw: Vec<RawSample>) -> Dataset {
    let samples = raw
        .into_iter()
        .enumerate()
        .map(|(i, (text, toxic, spans, split))| {
            let len = text.chars().count();
            let gold = if toxic {
                SpanSet::from_ranges(
                    spans
                        .into_iter()
                        .filter(|&(s, _)| s < len)
                        .map(|(s, l)| Span::new(s, (s + l).min(len)))
                        .collect::<Vec<_>>(),
                )
            } else {
                SpanSet::empty()
            };
            Sample {
                id: format!("{name}-{i}"),
                text,
                toxic,
                gold_spans: gold,
                split: [Split::Train, Split::Dev, Split::Test][usize::from(split)],
            }
        })
        .collect();
    Dataset::new(name, samples, "proptest").unwrap()
}

fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec(sample_strategy(), 0..25).prop_map(|raw| build_dataset("d", raw))
}

fn naive_occurrences(text: &str, words: &[String]) -> BTreeSet<usize> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut out = BTreeSet::new();
    for w in words {
        let pat: Vec<char> = w.chars().collect();
        if pat.is_empty() || pat.len() > chars.len() {
            continue;
        }
        for i in 0..=chars.len() - pat.len() {
            if chars[i..i + pat.len()] == pat[..] {
                out.extend(i..i + pat.len());
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn offsets_round_trip(s in spanset()) {
        prop_assert_eq!(SpanSet::from_offsets(s.to_offsets()), s);
    }

    #[test]
    fn merge_never_removes_and_is_monotone(s in spanset(), n in 0usize..20, extra in 0usize..20) {
        let a = s.merged(MergeConfig::new(n));
        let b = s.merged(MergeConfig::new(n + extra));
        prop_assert!(s.is_subset(&a));
        prop_assert!(a.is_subset(&b));
        prop_assert_eq!(a.merged(MergeConfig::new(n)), a.clone());
    }

    #[test]
    fn precision_recall_symmetry(a in spanset(), b in spanset()) {
        prop_assume!(!a.is_empty() && !b.is_empty());
        let ab = score_sample(&a, &b);
        let ba = score_sample(&b, &a);
        prop_assert_eq!(ab.precision, ba.recall);
        prop_assert_eq!(ab.f1_plus, ba.f1_plus);
    }

    #[test]
    fn self_score_is_one(a in spanset()) {
        prop_assert_eq!(score_sample(&a, &a).f1_plus, 1.0);
    }

    #[test]
    fn evaluate_ignores_sample_order(raw in prop::collection::vec(sample_strategy(), 1..20), seed in any::<u64>()) {
        let d = build_dataset("d", raw);
        let mut shuffled: Vec<Sample> = d.samples().to_vec();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let e = Dataset::new("d", shuffled, "").unwrap();
        let preds: Predictions = d.iter().map(|s| (s.id.clone(), SpanSet::from_ranges([Span::new(0, 2.min(s.char_len()))]))).collect();
        prop_assert_eq!(evaluate(&d, &preds).unwrap(), evaluate(&e, &preds).unwrap());
    }

    #[test]
    fn canonical_round_trip(d in dataset()) {
        let mut buf = Vec::new();
        write_canonical(&d, &mut buf).unwrap();
        let back = read_canonical(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back.samples(), d.samples());
        prop_assert!(back.iter().all(|s| s.toxic || s.gold_spans.is_empty()));
    }

    #[test]
    fn semeval_offsets_stay_in_text(text in "[a-z ]{0,30}", offs in prop::collection::vec(0usize..40, 0..6)) {
        let list = format!("{offs:?}");
        let csv = format!("spans,text\n\"{list}\",\"{text}\"\n");
        if let Ok(d) = ingest_semeval(csv.as_bytes(), Split::Train, "semeval") {
            for s in d.iter() {
                prop_assert!(s.gold_spans.end() <= s.char_len());
            }
        }
    }

    #[test]
    fn lexicon_monotone(d in dataset(), t1 in 0usize..=20, t2 in 0usize..=20, m1 in 1usize..6, m2 in 1usize..6) {
        let (lo_t, hi_t) = (t1.min(t2) as f64 / 20.0, t1.max(t2) as f64 / 20.0);
        let (lo_m, hi_m) = (m1.min(m2), m1.max(m2));
        let big = build_lexicon(&d, &LexiconBuildConfig::new(lo_t, lo_m).unwrap()).unwrap();
        let small = build_lexicon(&d, &LexiconBuildConfig::new(hi_t, hi_m).unwrap()).unwrap();
        prop_assert!(small.words().all(|w| big.contains(w)));
    }

    #[test]
    fn predictions_lie_on_entries(text in "[a-cA-C é]{0,60}", words in prop::collection::vec("[a-c]{1,3}", 1..10)) {
        let lex = Lexicon::from_words("w", words.iter().map(String::as_str));
        let rev = Lexicon::from_words("w", words.iter().rev().map(String::as_str));
        let sub = predict(&text, &lex, MatchMode::substring());
        prop_assert_eq!(&sub, &predict(&text, &rev, MatchMode::substring()));
        prop_assert_eq!(sub.to_offsets(), naive_occurrences(&text, &words));
        prop_assert!(predict(&text, &lex, MatchMode::word_boundary()).is_subset(&sub));
    }

    #[test]
    fn threshold_spans_are_whole_tokens(text in "[a-z]{1,5}( [a-z]{1,5}){0,8}", seed in any::<u64>(), tau in -0.1f64..0.6) {
        let tokens = tokenize(&text);
        let scored: Vec<ScoredToken> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| ScoredToken { start: t.start, end: t.end, score: ((seed >> (i % 60)) & 7) as f64 / 14.0 })
            .collect();
        let ts = TokenScores { sample_id: "x".into(), method_name: "m".into(), tokens: scored.clone() };
        let spans = threshold_to_spans(&ts, ThresholdConfig { tau });
        for t in &scored {
            let covered = spans.covered(t.start, t.end);
            prop_assert!(covered == 0 || covered == t.end - t.start);
            prop_assert_eq!(covered > 0, t.score > tau);
        }
        prop_assert!(spans.offsets().all(|o| scored.iter().any(|t| t.start <= o && o < t.end)));
    }

    #[test]
    fn gate_never_adds_and_oracle_gate_is_identity(d in dataset(), flags in prop::collection::vec(any::<bool>(), 25)) {
        let preds: Predictions = d.iter().map(|s| (s.id.clone(), s.gold_spans.clone())).collect();
        let binary: BinaryMap = d
            .iter()
            .zip(flags)
            .map(|(s, t)| (s.id.clone(), BinaryPrediction { sample_id: s.id.clone(), toxic: t }))
            .collect();
        let gated = gate(&preds, &binary).unwrap();
        for (id, s) in &gated {
            prop_assert!(s.is_subset(&preds[id]));
        }
        prop_assert_eq!(gate(&gated, &binary).unwrap(), gated);
        let toxic: Predictions = preds.iter().filter(|(id, _)| d.get(id).unwrap().toxic).map(|(k, v)| (k.clone(), v.clone())).collect();
        prop_assert_eq!(gate(&toxic, &gold_binary(&d)).unwrap(), toxic);
    }

    #[test]
    fn balance_is_deterministic_without_repeats(n_pool in 0usize..40, seed in any::<u64>()) {
        let base = mini_domain(&ALPHA, 5).unwrap();
        let pool: Vec<Sample> = (0..n_pool)
            .map(|i| Sample { id: format!("pool-{i}"), text: format!("calm text {i}"), toxic: false, gold_spans: SpanSet::empty(), split: Split::Train })
            .collect();
        let pool = Dataset::new("pool", pool, "").unwrap();
        match balance_binary(&base, &pool, seed) {
            Ok(a) => {
                let b = balance_binary(&base, &pool, seed).unwrap();
                prop_assert_eq!(a.samples(), b.samples());
                let ids: BTreeSet<&str> = a.iter().map(|s| s.id.as_str()).collect();
                prop_assert_eq!(ids.len(), a.len());
            }
            Err(e) => prop_assert!(e.to_string().contains("need")),
        }
    }

    #[test]
    fn categories_partition_and_prevalence_bounded(
        values in prop::collection::vec((0u8..=8, 0u8..=8, any::<bool>(), any::<u16>()), 1..60),
        seed in any::<u64>(),
    ) {
        let records: Vec<ErrorRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &(p, r, empty, _))| ErrorRecord {
                sample_id: format!("s{i}"),
                method: "m".into(),
                text: "abc def".into(),
                precision: f64::from(p) / 8.0,
                recall: f64::from(r) / 8.0,
                f1_plus: 0.0,
                pred: if empty { SpanSet::empty() } else { SpanSet::from_ranges([Span::new(0, 3)]) },
                gold: SpanSet::from_ranges([Span::new(4, 7)]),
                category: None,
            })
            .collect();
        let cat = categorize(records);
        prop_assert!(cat.records.iter().all(|r| r.category.is_some()));
        prop_assert_eq!(cat.counts.values().sum::<usize>(), cat.records.len());
        let mut sheet = sample_sheet(&cat, 3, seed).unwrap();
        let ids: BTreeSet<&str> = sheet.rows.iter().map(|r| r.record.sample_id.as_str()).collect();
        prop_assert_eq!(ids.len(), sheet.rows.len());
        prop_assert_eq!(sheet.rows.len(), cat.records.len().min(15));
        for (row, &(_, _, _, bits)) in sheet.rows.iter_mut().zip(&values) {
            row.annotated = true;
            row.classes = ErrorClass::ALL.iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &c)| c).collect();
        }
        let prev = reweight_prevalence(&sheet.rows, &cat.counts).unwrap();
        prop_assert!(prev.values().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        for agg in ClassAggregate::ALL {
            for m in agg.members() {
                prop_assert!(prev[&PrevalenceKey::Aggregate(agg)] + 1e-12 >= prev[&PrevalenceKey::Class(m)]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_search_ignores_enumeration_order(seed in any::<u64>()) {
        let d = mini_domain(&ALPHA, 3).unwrap();
        let train = d.split(Split::Train);
        let dev = d.split(Split::Dev);
        let p = Predictor::constructed(&train, InSpanRule::MajorityChars, MatchMode::substring());
        let grid = GridSpec { theta: vec![0.0, 0.5, 0.9], min_occ: vec![1, 5], ..GridSpec::default() };
        let mut shuffled = grid.clone();
        let k = seed as usize;
        shuffled.fill_chars.rotate_left(k % 3);
        shuffled.theta.rotate_left((k / 3) % 3);
        shuffled.min_occ.rotate_left((k / 9) % 2);
        if k % 2 == 1 {
            shuffled.theta.reverse();
        }
        let opts = TuneOptions { objective: Objective::ToxicF1p, binary: None };
        let a = grid_search(&p, &dev, &grid, &opts).unwrap();
        let b = grid_search(&p, &dev, &shuffled, &opts).unwrap();
        prop_assert_eq!(a, b);
    }
}
