//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Criteria 1-3 compare the production code against independent brute-force
//! oracles written here; criterion 4 replays the shipped mini12 fixture and
//! checks exact determinism; criteria 5-7 audit the run artifacts and the
//! transcript contents; criterion 8 is the optional live smoke (ignored by
//! default, enabled via INSIGHT_SMOKE_ENDPOINT).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use insight::backend::{BackendConfig, ChatRequest, Message, ReplayBackend};
use insight::cap::{self, ReasoningTrace};
use insight::config::{RunConfig, Toggles};
use insight::dataset::Split;
use insight::decision;
use insight::metrics;
use insight::pipeline;
use insight::types::{BinaryLabel, CategoryKind, GenerationCategory, Modality, VeracityLabel};

const TOLERANCE: f64 = 1e-12;

fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini12")
}

// ---------------------------------------------------------------------------
// independent metric oracle: per-class counts accumulated pair by pair,
// never through the production confusion matrix
// ---------------------------------------------------------------------------

struct OracleScores {
    f1: f64,
    precision: f64,
    recall: f64,
    accuracy: f64,
    per_class_f1: Vec<f64>,
}

fn oracle_scores(preds: &[usize], golds: &[usize], classes: usize) -> OracleScores {
    let mut tp = vec![0u64; classes];
    let mut fp = vec![0u64; classes];
    let mut fn_ = vec![0u64; classes];
    let mut correct = 0u64;
    for (&p, &g) in preds.iter().zip(golds) {
        if p == g {
            tp[p] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut per_class_f1 = Vec::with_capacity(classes);
    for c in 0..classes {
        let precision =
            if tp[c] + fp[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fp[c]) as f64 };
        let recall = if tp[c] + fn_[c] == 0 { 0.0 } else { tp[c] as f64 / (tp[c] + fn_[c]) as f64 };
        let f1 =
            if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
        per_class_f1.push(f1);
    }
    let n = classes as f64;
    OracleScores {
        f1: f1_sum / n,
        precision: precision_sum / n,
        recall: recall_sum / n,
        accuracy: correct as f64 / preds.len() as f64,
        per_class_f1,
    }
}

fn label_of(code: usize) -> VeracityLabel {
    VeracityLabel::from_code(code as i64).unwrap()
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for case in 0..1000 {
        let n = rng.gen_range(1..=12);
        let pred_codes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let gold_codes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let preds: Vec<VeracityLabel> = pred_codes.iter().map(|&c| label_of(c)).collect();
        let golds: Vec<VeracityLabel> = gold_codes.iter().map(|&c| label_of(c)).collect();

        // multiclass block
        let matrix = metrics::confusion(&preds, &golds).unwrap();
        let macros = metrics::macro_scores(&matrix);
        let oracle = oracle_scores(&pred_codes, &gold_codes, 4);
        assert!((macros.f1 - oracle.f1).abs() < TOLERANCE, "case {case}: macro f1");
        assert!((macros.precision - oracle.precision).abs() < TOLERANCE, "case {case}: macro pre");
        assert!((macros.recall - oracle.recall).abs() < TOLERANCE, "case {case}: macro rec");
        assert!(
            (metrics::accuracy(&matrix) - oracle.accuracy).abs() < TOLERANCE,
            "case {case}: accuracy"
        );

        // binary block through the independent projection
        let bin_preds: Vec<usize> = pred_codes.iter().map(|&c| usize::from(c != 0)).collect();
        let bin_golds: Vec<usize> = gold_codes.iter().map(|&c| usize::from(c != 0)).collect();
        let bin_oracle = oracle_scores(&bin_preds, &bin_golds, 2);
        let bin = metrics::binary_report(&preds, &golds).unwrap();
        assert!((bin.f1 - bin_oracle.f1).abs() < TOLERANCE, "case {case}: binary f1");
        assert!((bin.precision - bin_oracle.precision).abs() < TOLERANCE, "case {case}: binary pre");
        assert!((bin.recall - bin_oracle.recall).abs() < TOLERANCE, "case {case}: binary rec");
        assert!((bin.accuracy - bin_oracle.accuracy).abs() < TOLERANCE, "case {case}: binary acc");

        // per-source block
        let per_source = metrics::per_source_f1(&matrix);
        for label in VeracityLabel::ALL {
            let got = per_source.per_class[label.name()];
            let want = oracle.per_class_f1[label.code() as usize];
            assert!((got - want).abs() < TOLERANCE, "case {case}: per-source {label}");
        }
        assert!((per_source.overall - oracle.f1).abs() < TOLERANCE, "case {case}: overall");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "criterion 1 took {elapsed:?}, budget 5s");
    println!("criterion 1 PASS: 1000 random instances match the brute-force oracle within 1e-12 ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// selector oracle: exhaustive product-max with canonical tie-break
// ---------------------------------------------------------------------------

fn category(modality: Modality, rank: usize) -> GenerationCategory {
    GenerationCategory::categories_for(modality)[rank]
}

fn make_traces(modality: Modality, scores: &[(f64, f64)]) -> Vec<ReasoningTrace> {
    scores
        .iter()
        .enumerate()
        .map(|(rank, &(s_r, s_p))| {
            let mut t = ReasoningTrace::new(category(modality, rank), format!("1. Path {rank}."));
            t.s_r = Some(s_r);
            t.s_p = Some(s_p);
            t
        })
        .collect()
}

fn exhaustive_winner(scores: &[(f64, f64)]) -> usize {
    let mut best = 0usize;
    for i in 1..scores.len() {
        let product = scores[i].0 * scores[i].1;
        let best_product = scores[best].0 * scores[best].1;
        if product > best_product {
            best = i;
        }
    }
    best
}

#[test]
fn criterion_2_selector_matches_exhaustive_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut tied_instances = 0u32;

    for case in 0..10_000 {
        let modality = if rng.gen_bool(0.5) { Modality::Text } else { Modality::Image };
        let m = GenerationCategory::categories_for(modality).len();
        // quantized scores make exact product ties common
        let scores: Vec<(f64, f64)> = (0..m)
            .map(|_| (grid[rng.gen_range(0..grid.len())], grid[rng.gen_range(0..grid.len())]))
            .collect();

        let winner = exhaustive_winner(&scores);
        let mut traces = make_traces(modality, &scores);
        let selected = cap::select_attribution(&traces).unwrap();
        assert_eq!(
            selected.selected.canonical_rank(),
            winner,
            "case {case}: scores {scores:?}"
        );
        let winner_product = scores[winner].0 * scores[winner].1;
        assert_eq!(selected.selected_product, winner_product, "case {case}");

        // permutation invariance, checked on every instance and counted on ties
        let tie = scores
            .iter()
            .enumerate()
            .any(|(i, s)| i != winner && s.0 * s.1 == winner_product);
        if tie {
            tied_instances += 1;
        }
        traces.shuffle(&mut rng);
        let reshuffled = cap::select_attribution(&traces).unwrap();
        assert_eq!(reshuffled.selected.canonical_rank(), winner, "case {case} permuted");
    }
    assert!(tied_instances > 100, "tie coverage too thin: {tied_instances}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 2.0, "criterion 2 took {elapsed:?}, budget 2s");
    println!("criterion 2 PASS: 10000 selections match the exhaustive oracle, {tied_instances} tied instances permutation-invariant ({elapsed:?})");
}

#[test]
fn criterion_3_ablation_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

    for case in 0..1000 {
        let modality = if rng.gen_bool(0.5) { Modality::Text } else { Modality::Image };
        let m = GenerationCategory::categories_for(modality).len();
        let s_r: Vec<f64> = (0..m).map(|_| grid[rng.gen_range(0..grid.len())]).collect();
        let s_p: Vec<f64> = (0..m).map(|_| grid[rng.gen_range(0..grid.len())]).collect();

        // ARS off: s_r forced to 1, selection must equal argmax over s_p
        let scores: Vec<(f64, f64)> = s_p.iter().map(|&p| (1.0, p)).collect();
        let selected = cap::select_attribution(&make_traces(modality, &scores)).unwrap();
        assert_eq!(selected.selected.canonical_rank(), exhaustive_winner(&scores), "case {case} ars-off");
        let argmax_p = (0..m).fold(0, |best, i| if s_p[i] > s_p[best] { i } else { best });
        assert_eq!(selected.selected.canonical_rank(), argmax_p, "case {case} ars-off argmax");

        // PPS off: s_p forced to 1, selection must equal argmax over s_r
        let scores: Vec<(f64, f64)> = s_r.iter().map(|&r| (r, 1.0)).collect();
        let selected = cap::select_attribution(&make_traces(modality, &scores)).unwrap();
        let argmax_r = (0..m).fold(0, |best, i| if s_r[i] > s_r[best] { i } else { best });
        assert_eq!(selected.selected.canonical_rank(), argmax_r, "case {case} pps-off argmax");

        // both off: every product is 1, the first canonical category wins
        let scores: Vec<(f64, f64)> = (0..m).map(|_| (1.0, 1.0)).collect();
        let selected = cap::select_attribution(&make_traces(modality, &scores)).unwrap();
        assert_eq!(selected.selected.canonical_rank(), 0, "case {case} both-off");
    }
    println!("criterion 3 PASS: ARS/PPS ablation algebra exact on 1000 random instances");
}

// ---------------------------------------------------------------------------
// replay fixture
// ---------------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct DesignSheet {
    meta: DesignMeta,
    items: Vec<DesignItem>,
    confusion: [[u64; 4]; 4],
    success_rate: BTreeMap<String, f64>,
}

#[derive(serde::Deserialize)]
struct DesignMeta {
    model: String,
    calls_per_item_full: u64,
    calls_per_item_final_only: u64,
    adp_calls: u64,
}

#[derive(serde::Deserialize)]
struct DesignItem {
    id: String,
    gold: i64,
    predicted: i64,
    text_category: String,
    image_category: String,
}

fn design_sheet() -> DesignSheet {
    let raw = std::fs::read_to_string(fixture_root().join("design.json"))
        .expect("mini12 fixture missing; regenerate with: cargo run -p insight --example gen_mini12");
    serde_json::from_str(&raw).expect("design sheet parses")
}

fn fixture_config(out_dir: PathBuf, toggles: Toggles, model: &str) -> RunConfig {
    RunConfig {
        backend: BackendConfig::replay(fixture_root().join("transcript")),
        model: model.into(),
        adp_model: None,
        toggles,
        dataset_root: fixture_root(),
        split: Split::Validation,
        sample: None,
        out_dir,
        prompts_dir: None,
        prompts_lock: None,
        concurrency: 3,
        skip_failures: false,
    }
}

#[test]
fn criterion_4_replay_determinism() {
    let started = Instant::now();
    let design = design_sheet();
    let scratch = tempfile::tempdir().unwrap();

    // run 1: all pipeline toggles on
    let config_a = fixture_config(scratch.path().join("a"), Toggles::default(), &design.meta.model);
    let replay_a = ReplayBackend::load(fixture_root().join("transcript")).unwrap();
    let summary_a = pipeline::run(&config_a, &replay_a).unwrap();

    // verdict list equals the design sheet exactly
    let verdicts = pipeline::load_verdict_lines(&config_a.out_dir).unwrap();
    assert_eq!(verdicts.len(), design.items.len());
    for (line, want) in verdicts.iter().zip(&design.items) {
        assert_eq!(line.item_id, want.id);
        assert_eq!(line.gold.map(|g| g.code() as i64), Some(want.gold), "{}", want.id);
        assert_eq!(line.label.code() as i64, want.predicted, "{}", want.id);
        assert_eq!(line.text_category.as_deref(), Some(want.text_category.as_str()));
        assert_eq!(line.image_category.as_deref(), Some(want.image_category.as_str()));
    }

    // confusion matrix equals the design sheet exactly
    let confusion = summary_a.report.confusion.unwrap();
    assert_eq!(confusion.counts, design.confusion);

    // exactly 17 transcript lookups per item, plus the prompt rewrites
    for (item, calls) in &summary_a.per_item_calls {
        assert_eq!(*calls, design.meta.calls_per_item_full, "per-item lookups for {item}");
    }
    assert_eq!(
        replay_a.lookups(),
        design.meta.adp_calls + 12 * design.meta.calls_per_item_full,
        "total transcript lookups"
    );

    // cap=off/ic=off leaves exactly the final call per item
    let baseline_toggles = Toggles { cap: false, ic: false, ..Toggles::default() };
    let config_b =
        fixture_config(scratch.path().join("b"), baseline_toggles, &design.meta.model);
    let replay_b = ReplayBackend::load(fixture_root().join("transcript")).unwrap();
    let summary_b = pipeline::run(&config_b, &replay_b).unwrap();
    for (item, calls) in &summary_b.per_item_calls {
        assert_eq!(*calls, design.meta.calls_per_item_final_only, "baseline lookups for {item}");
    }

    // zero live network calls: the replay store served every completion
    assert_eq!(
        replay_b.lookups(),
        design.meta.adp_calls + 12 * design.meta.calls_per_item_final_only
    );

    // two consecutive runs produce byte-identical artifacts
    let config_c = fixture_config(scratch.path().join("c"), Toggles::default(), &design.meta.model);
    let replay_c = ReplayBackend::load(fixture_root().join("transcript")).unwrap();
    pipeline::run(&config_c, &replay_c).unwrap();
    let report_a = std::fs::read(config_a.out_dir.join("report.json")).unwrap();
    let report_c = std::fs::read(config_c.out_dir.join("report.json")).unwrap();
    assert_eq!(report_a, report_c, "report.json not byte-identical");
    let verdicts_a = std::fs::read(config_a.out_dir.join("verdicts.jsonl")).unwrap();
    let verdicts_c = std::fs::read(config_c.out_dir.join("verdicts.jsonl")).unwrap();
    assert_eq!(verdicts_a, verdicts_c, "verdicts.jsonl not byte-identical");

    // the design sheet's success rates hold
    for (tag, want) in &design.success_rate {
        let got = summary_a.report.success_rate[tag];
        assert!((got - want).abs() < TOLERANCE, "success rate for {tag}");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 4 took {elapsed:?}, budget 10s");
    println!("criterion 4 PASS: mini12 replay matches the design sheet with 17 lookups/item, byte-identical reruns, zero network ({elapsed:?})");
}

#[test]
fn criterion_5_binary_multiclass_consistency() {
    let design = design_sheet();
    let scratch = tempfile::tempdir().unwrap();
    let config = fixture_config(scratch.path().join("out"), Toggles::default(), &design.meta.model);
    let replay = ReplayBackend::load(fixture_root().join("transcript")).unwrap();
    let summary = pipeline::run(&config, &replay).unwrap();

    // item-by-item: the stored binary label is the projection of the verdict
    let verdicts = pipeline::load_verdict_lines(&config.out_dir).unwrap();
    for line in &verdicts {
        assert_eq!(line.binary, line.label.to_binary(), "{}", line.item_id);
    }

    // the per-source Overall equals the multiclass macro-F1 to full precision
    let report = summary.report;
    let per_source = report.per_source.unwrap();
    let multiclass = report.multiclass.unwrap();
    assert_eq!(per_source.overall, multiclass.f1);

    // and the whole report re-derives from the verdict artifact alone
    let preds: Vec<VeracityLabel> = verdicts.iter().map(|l| l.label).collect();
    let golds: Vec<VeracityLabel> = verdicts.iter().map(|l| l.gold.unwrap()).collect();
    let reprojected = metrics::binary_report(&preds, &golds).unwrap();
    assert_eq!(report.binary.unwrap(), reprojected);
    let matrix = metrics::confusion(&preds, &golds).unwrap();
    let macros = metrics::macro_scores(&matrix);
    assert_eq!(multiclass.f1, macros.f1);
    assert_eq!(multiclass.precision, macros.precision);
    assert_eq!(multiclass.recall, macros.recall);
    assert_eq!(multiclass.accuracy, metrics::accuracy(&matrix));
    assert_eq!(report.confusion.unwrap(), matrix);

    println!("criterion 5 PASS: binary labels are exact projections; Overall == macro-F1 at full precision");
}

// ---------------------------------------------------------------------------
// parser robustness
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_parser_robustness() {
    // 20-case score table
    let score_cases: [(&str, Option<(f64, bool)>); 20] = [
        ("SCORE: 37", Some((0.37, false))),
        ("SCORE: 0", Some((0.0, false))),
        ("SCORE: 100", Some((1.0, false))),
        ("score: 0.9", Some((0.9, false))),
        ("Score: 55.", Some((0.55, false))),
        ("I think SCORE: 100.", Some((1.0, false))),
        ("SCORE: 150", Some((1.0, true))),
        ("SCORE: -3", Some((0.0, true))),
        ("SCORE:88", Some((0.88, false))),
        ("SCORE : 12", Some((0.12, false))),
        ("The answer is 37", None),
        ("", None),
        ("score", None),
        ("SCORE: abc", None),
        ("SCORE: 0.5", Some((0.5, false))),
        ("SCORE: 1", Some((0.01, false))),
        ("SCORE: 1.0", Some((1.0, false))),
        ("SCORE: .75", Some((0.75, false))),
        ("SCORE: 2.5", Some((1.0, true))),
        ("first SCORE: 20 then SCORE: 80", Some((0.2, false))),
    ];
    for (input, want) in score_cases {
        match (cap::parse_score(input), want) {
            (Ok(got), Some((value, clamped))) => {
                assert!((got.value - value).abs() < TOLERANCE, "score {input:?}");
                assert_eq!(got.clamped, clamped, "clamp flag for {input:?}");
            }
            (Err(_), None) => {}
            (got, want) => panic!("score {input:?}: got {got:?}, want {want:?}"),
        }
    }

    // 15-case label table
    use VeracityLabel::{Ccd, Real, Tvd, Vvd};
    let label_cases: [(&str, Option<VeracityLabel>); 15] = [
        ("REAL", Some(Real)),
        ("real", Some(Real)),
        ("Real.", Some(Real)),
        ("vvd", Some(Vvd)),
        ("TVD", Some(Tvd)),
        ("The answer is: CCD because the pair mismatches", Some(Ccd)),
        ("real or fake, unclear", Some(Real)),
        ("Most likely TVD given the caption", Some(Tvd)),
        ("textual veracity distortion", Some(Tvd)),
        ("This shows visual veracity distortion.", Some(Vvd)),
        ("cross-modal consistency distortion", Some(Ccd)),
        ("CCD TVD", Some(Ccd)),
        ("unrealistic but plausible", None),
        ("The image is fake", None),
        ("", None),
    ];
    for (input, want) in label_cases {
        assert_eq!(decision::parse_label(input).ok(), want, "label {input:?}");
    }

    // fuzz: neither parser may panic on arbitrary UTF-8
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..200);
        let text: String = (0..len)
            .map(|_| loop {
                if let Some(c) = char::from_u32(rng.gen_range(0..0x11_0000)) {
                    break c;
                }
            })
            .collect();
        let _ = cap::parse_score(&text);
        let _ = decision::parse_label(&text);
    }

    println!("criterion 6 PASS: 20 score cases, 15 label cases, 20000 fuzz parses without panic");
}

// ---------------------------------------------------------------------------
// request-content contracts, audited on the shipped transcript
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_request_content_contracts() {
    let store = insight::backend::EntryStore::new(fixture_root().join("transcript"));
    let entries = store.scan().unwrap();
    assert!(!entries.is_empty(), "transcript is empty");

    // stage prompts identify entries without relying on tags (which are
    // deliberately absent from the canonical form)
    let assets = insight::adp::builtin_assets();
    let prompt_text = |id: &str| {
        assets.iter().find(|a| a.id == id).map(|a| a.raw.clone()).expect("asset exists")
    };
    let captioning_prompt = prompt_text("captioning.describe");
    let category_score_prompt = prompt_text("cap.score.category");
    let text_reason_prompt = prompt_text("cap.text.reason");
    let image_reason_prompt = prompt_text("cap.image.reason");

    let captions: Vec<String> = {
        let raw = std::fs::read_to_string(fixture_root().join("validation.jsonl")).unwrap();
        raw.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                v["text"].as_str().unwrap().to_string()
            })
            .collect()
    };
    assert_eq!(captions.len(), 12);

    // prompt-rewrite exchanges embed every raw asset text; exclude them
    // before identifying pipeline stages by their prompts
    let stage_entries: Vec<_> =
        entries.iter().filter(|e| !e.request_canonical.contains("Raw sentence:")).collect();

    let reasoning_outputs: Vec<&str> = stage_entries
        .iter()
        .filter(|e| {
            e.request_canonical.contains(&text_reason_prompt)
                || e.request_canonical.contains(&image_reason_prompt)
        })
        .map(|e| e.response_text.as_str())
        .collect();
    assert_eq!(reasoning_outputs.len(), 12 * 5, "one reasoning entry per item per category");

    let mut captioning_entries = 0;
    let mut category_score_entries = 0;
    for entry in &stage_entries {
        if entry.request_canonical.contains(&captioning_prompt) {
            captioning_entries += 1;
            for caption in &captions {
                assert!(
                    !entry.request_canonical.contains(caption.as_str()),
                    "captioning request leaks an item caption: {caption}"
                );
            }
        }
        if entry.request_canonical.contains(&category_score_prompt) {
            category_score_entries += 1;
            for reasoning in &reasoning_outputs {
                assert!(
                    !entry.request_canonical.contains(reasoning),
                    "category-likelihood request embeds a reasoning trace"
                );
            }
        }
    }
    assert_eq!(captioning_entries, 12);
    assert_eq!(category_score_entries, 12 * 5);

    // cache keys ignore the tag field
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for _ in 0..1000 {
        let body: String = (0..rng.gen_range(1..60))
            .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
            .collect();
        let mut a = ChatRequest::new("m", vec![Message::user(body)], "tag-one");
        let mut b = a.clone();
        b.tag = format!("tag-{}", rng.gen::<u64>());
        assert_eq!(a.cache_key(), b.cache_key());
        a.tag.clear();
        assert_eq!(a.cache_key(), b.cache_key());
    }

    println!("criterion 7 PASS: captioning requests are caption-blind, category scores never see traces, keys ignore tags");
}

// ---------------------------------------------------------------------------
// optional live smoke
// ---------------------------------------------------------------------------

/// Needs a reachable OpenAI-compatible endpoint:
///
/// ```bash
/// INSIGHT_SMOKE_ENDPOINT=http://host:port \
/// INSIGHT_SMOKE_MODEL=some-model \
/// cargo test -p insight --test acceptance -- --ignored criterion_8
/// ```
#[test]
#[ignore = "requires a live OpenAI-compatible endpoint"]
fn criterion_8_live_smoke() {
    let endpoint = std::env::var("INSIGHT_SMOKE_ENDPOINT")
        .expect("set INSIGHT_SMOKE_ENDPOINT to run the live smoke");
    let model =
        std::env::var("INSIGHT_SMOKE_MODEL").unwrap_or_else(|_| "default-model".to_string());

    let scratch = tempfile::tempdir().unwrap();
    let mut config = fixture_config(scratch.path().join("out"), Toggles::default(), &model);
    config.backend = BackendConfig::live(endpoint, scratch.path().join("cache"));
    config.sample = Some(insight::config::SampleSpec { per_class: 1, seed: 1 });
    let backend = config.backend.build().unwrap();
    let summary = pipeline::run(&config, &backend).unwrap();

    assert_eq!(summary.items, 4);
    assert!(summary.skipped.is_empty(), "live smoke had hard errors");
    let verdicts = pipeline::load_verdict_lines(&config.out_dir).unwrap();
    assert_eq!(verdicts.len(), 4);
    // labels are populated by construction; surface them for the operator
    for line in &verdicts {
        println!("  {} -> {}", line.item_id, line.label);
    }
    println!("criterion 8 PASS: 4-item live run completed with zero hard errors");
}

// sanity knot: the ablation-forced selections also hold through the full
// attribute_modality path, not just the pure selector
#[test]
fn ablation_toggles_hold_through_the_pipeline_path() {
    let scratch = tempfile::tempdir().unwrap();
    let img = scratch.path().join("img.png");
    image::RgbImage::from_pixel(2, 2, image::Rgb([4, 5, 6])).save(&img).unwrap();
    let item = insight::types::NewsItem::new(
        "x1",
        "A test caption.",
        insight::types::ImageRef::new(&img),
        None,
    )
    .unwrap();

    // s_r prefers artificiality, s_p prefers largemodel
    let backend = insight::backend::ScriptedBackend::with_fn(|req| {
        if req.tag.contains("reason") {
            return Some(format!("1. Reasoning for {}.", req.tag));
        }
        if req.tag.contains("score_r") {
            return Some(if req.tag.contains("artificiality") {
                "SCORE: 95".into()
            } else {
                "SCORE: 20".into()
            });
        }
        Some(if req.tag.contains("largemodel") { "SCORE: 90".into() } else { "SCORE: 15".into() })
    });
    let prompts = insight::adp::materialize_store(
        &insight::adp::builtin_assets(),
        &backend,
        "m",
        insight::adp::AdpMode::AdpOff,
        None,
    )
    .unwrap();

    let run = |ars: bool, pps: bool| {
        cap::attribute_modality(
            &item,
            Modality::Text,
            &prompts,
            &backend,
            "m",
            cap::ScoringMode { reasoning_score: ars, category_score: pps },
        )
        .unwrap()
        .selected
        .kind()
    };
    assert_eq!(run(false, true), CategoryKind::Largemodel); // driven by s_p
    assert_eq!(run(true, false), CategoryKind::Artificiality); // driven by s_r
    assert_eq!(run(false, false), CategoryKind::Largemodel); // first canonical

    // binary projection stays consistent with the label taxonomy
    for label in VeracityLabel::ALL {
        let expected =
            if label == VeracityLabel::Real { BinaryLabel::Real } else { BinaryLabel::Fake };
        assert_eq!(label.to_binary(), expected);
    }
}
