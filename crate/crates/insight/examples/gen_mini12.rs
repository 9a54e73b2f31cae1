//! Regenerates the mini12 offline fixture: a 12-item dataset (3 per class),
//! a design sheet with the intended verdicts, and a recorded transcript that
//! replays the whole pipeline deterministically.
//!
//! Run after changing any prompt asset or request layout:
//!
//! ```bash
//! cargo run -p insight --example gen_mini12
//! ```
//!
//! The fixture lands under `tests/fixtures/mini12/` and is committed; the
//! acceptance suite replays it without network access.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use insight::backend::{BackendConfig, BackendKind, RecordingBackend, ScriptedBackend};
use insight::config::{RunConfig, SampleSpec, Toggles};
use insight::dataset::Split;
use insight::pipeline;
use insight::types::VeracityLabel;

/// Integer percent scores per category, in canonical category order.
struct ItemDesign {
    id: &'static str,
    gold: VeracityLabel,
    caption: &'static str,
    /// (s_r, s_p) for text categories Largemodel, Smallmodel, Artificiality.
    text_scores: [(u32, u32); 3],
    /// (s_r, s_p) for image categories Largemodel, Artificiality.
    image_scores: [(u32, u32); 2],
    expected_text: &'static str,
    expected_image: &'static str,
    predicted: VeracityLabel,
    description: &'static str,
    generation_tag: Option<&'static str>,
    gold_text_category: Option<&'static str>,
    gold_image_category: Option<&'static str>,
}

const TEXT_KINDS: [&str; 3] = ["largemodel", "smallmodel", "artificiality"];
const IMAGE_KINDS: [&str; 2] = ["largemodel", "artificiality"];
const MODEL: &str = "fixture-model";

fn design() -> Vec<ItemDesign> {
    use VeracityLabel::{Ccd, Real, Tvd, Vvd};
    vec![
        ItemDesign {
            id: "real_01",
            gold: Real,
            caption: "A snowboarder celebrates a clean landing on a snowy mountain ridge.",
            text_scores: [(80, 10), (70, 10), (75, 12)],
            image_scores: [(82, 8), (78, 10)],
            expected_text: "text.artificiality",
            expected_image: "image.artificiality",
            predicted: Real,
            description: "A person on a snowboard rides down a snow-covered slope under a clear sky.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
        ItemDesign {
            id: "real_02",
            gold: Real,
            caption: "Volunteers plant oak saplings along the river embankment after the flood.",
            text_scores: [(81, 12), (66, 15), (70, 10)],
            image_scores: [(77, 9), (80, 8)],
            expected_text: "text.smallmodel",
            expected_image: "image.largemodel",
            predicted: Real,
            description: "Several people plant small trees along a muddy riverbank.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
        ItemDesign {
            id: "real_03",
            gold: Real,
            caption: "The city orchestra performs a free open-air concert in the central square.",
            text_scores: [(85, 20), (60, 10), (70, 12)],
            image_scores: [(75, 30), (70, 20)],
            expected_text: "text.largemodel",
            expected_image: "image.largemodel",
            predicted: Vvd,
            description: "An orchestra plays on an outdoor stage surrounded by a crowd.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
        ItemDesign {
            id: "tvd_01",
            gold: Tvd,
            caption: "Scientists confirm the moon will be visibly pink for three weeks this summer.",
            text_scores: [(90, 85), (60, 20), (55, 25)],
            image_scores: [(70, 10), (65, 12)],
            expected_text: "text.largemodel",
            expected_image: "image.artificiality",
            predicted: Tvd,
            description: "The moon over a city skyline at night.",
            generation_tag: Some("text.largemodel"),
            gold_text_category: Some("largemodel"),
            gold_image_category: None,
        },
        ItemDesign {
            id: "tvd_02",
            gold: Tvd,
            caption: "Mayor bridge new announce project winner lottery town hall meeting.",
            text_scores: [(62, 30), (88, 80), (58, 22)],
            image_scores: [(72, 11), (68, 9)],
            expected_text: "text.smallmodel",
            expected_image: "image.largemodel",
            predicted: Tvd,
            description: "A bridge under construction with cranes.",
            generation_tag: Some("text.smallmodel"),
            gold_text_category: Some("smallmodel"),
            gold_image_category: None,
        },
        ItemDesign {
            id: "tvd_03",
            gold: Tvd,
            caption: "Local hospital closes its pediatric ward after the 2019 storm damage.",
            text_scores: [(60, 25), (55, 20), (86, 75)],
            image_scores: [(66, 14), (71, 10)],
            expected_text: "text.artificiality",
            expected_image: "image.largemodel",
            predicted: Ccd,
            description: "A hospital building with an ambulance parked outside.",
            generation_tag: Some("text.artificiality"),
            gold_text_category: Some("artificiality"),
            gold_image_category: None,
        },
        ItemDesign {
            id: "vvd_01",
            gold: Vvd,
            caption: "A humpback whale breaches in front of the harbor lighthouse at dawn.",
            text_scores: [(70, 15), (65, 10), (60, 12)],
            image_scores: [(92, 88), (70, 30)],
            expected_text: "text.largemodel",
            expected_image: "image.largemodel",
            predicted: Vvd,
            description: "A whale leaping out of the water near a lighthouse.",
            generation_tag: Some("image.largemodel"),
            gold_text_category: None,
            gold_image_category: Some("largemodel"),
        },
        ItemDesign {
            id: "vvd_02",
            gold: Vvd,
            caption: "The antique clock tower shows the wrong time after the renovation.",
            text_scores: [(68, 12), (72, 14), (66, 10)],
            image_scores: [(75, 35), (85, 82)],
            expected_text: "text.smallmodel",
            expected_image: "image.artificiality",
            predicted: Vvd,
            description: "A clock tower with scaffolding on one side.",
            generation_tag: Some("image.artificiality"),
            gold_text_category: None,
            gold_image_category: Some("artificiality"),
        },
        ItemDesign {
            id: "vvd_03",
            gold: Vvd,
            caption: "Firefighters rescue a kitten from a drainage pipe downtown.",
            text_scores: [(71, 10), (63, 13), (69, 11)],
            image_scores: [(90, 80), (72, 25)],
            expected_text: "text.smallmodel",
            expected_image: "image.largemodel",
            predicted: Real,
            description: "A firefighter holds a small kitten next to a drainage pipe.",
            generation_tag: Some("image.largemodel"),
            gold_text_category: None,
            gold_image_category: Some("largemodel"),
        },
        ItemDesign {
            id: "ccd_01",
            gold: Ccd,
            caption: "Record heatwave forces schools to close across the northern province.",
            text_scores: [(78, 18), (72, 15), (74, 20)],
            image_scores: [(76, 22), (74, 18)],
            expected_text: "text.artificiality",
            expected_image: "image.largemodel",
            predicted: Ccd,
            description: "A snowplow clears a road between tall snowbanks.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
        ItemDesign {
            id: "ccd_02",
            gold: Ccd,
            caption: "The champion cyclist crosses the finish line at the national velodrome.",
            text_scores: [(80, 16), (70, 18), (76, 14)],
            image_scores: [(79, 20), (77, 24)],
            expected_text: "text.largemodel",
            expected_image: "image.artificiality",
            predicted: Ccd,
            description: "A library reading room with rows of desks.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
        ItemDesign {
            id: "ccd_03",
            gold: Ccd,
            caption: "Council members unveil the restored medieval fountain in the old town.",
            text_scores: [(75, 22), (68, 16), (72, 19)],
            image_scores: [(73, 21), (78, 17)],
            expected_text: "text.largemodel",
            expected_image: "image.largemodel",
            predicted: Ccd,
            description: "A group of people at a beach volleyball match.",
            generation_tag: None,
            gold_text_category: None,
            gold_image_category: None,
        },
    ]
}

fn reasoning_text(item_id: &str, modality: &str, kind: &str) -> String {
    format!(
        "1. The {modality} of case {item_id} is compared against the {kind} profile.\n\
         2. Stylistic and structural markers are weighed against the category definition.\n\
         3. The {kind} hypothesis for case {item_id} is summarized for scoring."
    )
}

fn final_text(predicted: VeracityLabel) -> String {
    match predicted {
        VeracityLabel::Real => "Verdict: REAL. The caption and the image are consistent.".into(),
        VeracityLabel::Tvd => "Verdict: TVD. The caption shows fabrication traces.".into(),
        VeracityLabel::Vvd => "Verdict: VVD. The image shows synthesis traces.".into(),
        VeracityLabel::Ccd => "Verdict: CCD. The caption does not match the image.".into(),
    }
}

/// Apply the design sheet rules to one request: resolve (stage, item) from
/// the tag the pipeline attaches.
fn scripted_response(designs: &[ItemDesign], tag: &str, body: &str) -> Option<String> {
    if let Some(rest) = tag.strip_prefix("adp#") {
        let _ = rest;
        // echo the raw sentence: debiased == raw, byte-equal output accepted
        let raw = body.split("Raw sentence: ").nth(1)?;
        return Some(raw.trim().to_string());
    }
    let (stage, item_id) = tag.split_once('#')?;
    let item = designs.iter().find(|d| d.id == item_id)?;

    if stage == "ic" {
        return Some(item.description.to_string());
    }
    if stage == "decision.final" {
        return Some(final_text(item.predicted));
    }
    let mut parts = stage.split('.');
    if parts.next()? != "cap" {
        return None;
    }
    let modality = parts.next()?;
    let op = parts.next()?;
    let kind = parts.next()?;
    let (index, scores) = match modality {
        "text" => (TEXT_KINDS.iter().position(|k| *k == kind)?, &item.text_scores[..]),
        "image" => (IMAGE_KINDS.iter().position(|k| *k == kind)?, &item.image_scores[..]),
        _ => return None,
    };
    match op {
        "reason" => Some(reasoning_text(item.id, modality, kind)),
        "score_r" => Some(format!("SCORE: {}", scores[index].0)),
        "score_p" => Some(format!("SCORE: {}", scores[index].1)),
        _ => None,
    }
}

fn write_images(designs: &[ItemDesign], images_dir: &Path) {
    std::fs::create_dir_all(images_dir).expect("create images dir");
    for (i, item) in designs.iter().enumerate() {
        // distinct solid colors so every image digest differs
        let shade = (i as u8 + 1) * 17;
        let pixel = image::Rgb([shade, 255 - shade, (i as u8 + 3) * 11]);
        image::RgbImage::from_pixel(4, 4, pixel)
            .save(images_dir.join(format!("{}.png", item.id)))
            .expect("write png");
    }
}

fn write_dataset(designs: &[ItemDesign], root: &Path) {
    let mut lines = Vec::new();
    for item in designs {
        let mut record = serde_json::json!({
            "id": item.id,
            "text": item.caption,
            "image_path": format!("images/{}.png", item.id),
            "label": item.gold.code(),
        });
        if let Some(tag) = item.generation_tag {
            record["generation_tag"] = tag.into();
        }
        if let Some(cat) = item.gold_text_category {
            record["gold_text_category"] = cat.into();
        }
        if let Some(cat) = item.gold_image_category {
            record["gold_image_category"] = cat.into();
        }
        lines.push(record.to_string());
    }
    std::fs::write(root.join("validation.jsonl"), lines.join("\n") + "\n")
        .expect("write dataset");
}

fn write_design_sheet(designs: &[ItemDesign], root: &Path) {
    let mut confusion = [[0u64; 4]; 4];
    for item in designs {
        confusion[item.gold.code() as usize][item.predicted.code() as usize] += 1;
    }
    let mut tag_totals: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for item in designs {
        if let Some(tag) = item.generation_tag {
            let entry = tag_totals.entry(tag).or_default();
            entry.1 += 1;
            if item.predicted != VeracityLabel::Real {
                entry.0 += 1;
            }
        }
    }
    let success_rate: BTreeMap<&str, f64> = tag_totals
        .into_iter()
        .map(|(tag, (fake, total))| (tag, fake as f64 / total as f64))
        .collect();

    let sheet = serde_json::json!({
        "meta": {
            "model": MODEL,
            "adp_model": MODEL,
            "calls_per_item_full": 17,
            "calls_per_item_final_only": 1,
            "adp_calls": 11,
        },
        "items": designs.iter().map(|d| serde_json::json!({
            "id": d.id,
            "gold": d.gold.code(),
            "predicted": d.predicted.code(),
            "text_category": d.expected_text,
            "image_category": d.expected_image,
            "generation_tag": d.generation_tag,
        })).collect::<Vec<_>>(),
        "confusion": confusion,
        "success_rate": success_rate,
    });
    std::fs::write(
        root.join("design.json"),
        serde_json::to_string_pretty(&sheet).expect("serialize design") + "\n",
    )
    .expect("write design sheet");
}

fn run_config(root: &Path, out_dir: PathBuf, toggles: Toggles) -> RunConfig {
    RunConfig {
        backend: BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            api_key_env: "INSIGHT_API_KEY".into(),
            cache_dir: None,
            transcript_dir: None,
            script_path: None,
            record_dir: None,
            retry: Default::default(),
            max_in_flight: 4,
        },
        model: MODEL.into(),
        adp_model: None,
        toggles,
        dataset_root: root.to_path_buf(),
        split: Split::Validation,
        sample: None::<SampleSpec>,
        out_dir,
        prompts_dir: None,
        prompts_lock: None,
        concurrency: 2,
        skip_failures: false,
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini12");
    let transcript = root.join("transcript");
    if transcript.exists() {
        std::fs::remove_dir_all(&transcript).expect("clear old transcript");
    }
    std::fs::create_dir_all(&root).expect("create fixture root");

    let designs = design();
    write_images(&designs, &root.join("images"));
    write_dataset(&designs, &root);
    write_design_sheet(&designs, &root);

    let designs_for_script = design();
    let scripted = ScriptedBackend::with_fn(move |req| {
        let body: String =
            req.messages.iter().map(|m| m.text.as_str()).collect::<Vec<_>>().join("\n");
        scripted_response(&designs_for_script, &req.tag, &body)
    });
    let recorder = RecordingBackend::new(&transcript, scripted);

    let scratch = tempfile::tempdir().expect("scratch dir");

    // full pipeline
    let config = run_config(&root, scratch.path().join("full"), Toggles::default());
    let summary = pipeline::run(&config, &recorder).expect("full run");
    for (item, design) in summary.per_item_calls.iter().zip(&designs) {
        assert_eq!(item.0, design.id, "verdict order mismatch");
        assert_eq!(item.1, 17, "unexpected call count for {}", design.id);
    }
    let verdicts = pipeline::load_verdict_lines(&config.out_dir).expect("verdicts");
    for (line, design) in verdicts.iter().zip(&designs) {
        assert_eq!(line.label, design.predicted, "verdict mismatch for {}", design.id);
        assert_eq!(
            line.text_category.as_deref(),
            Some(design.expected_text),
            "text attribution mismatch for {}",
            design.id
        );
        assert_eq!(
            line.image_category.as_deref(),
            Some(design.expected_image),
            "image attribution mismatch for {}",
            design.id
        );
        assert!(line.flags.is_empty(), "unexpected flags for {}: {:?}", design.id, line.flags);
    }

    // baseline configuration: final decision only
    let toggles = Toggles { cap: false, ic: false, ..Toggles::default() };
    let config = run_config(&root, scratch.path().join("baseline"), toggles);
    let summary = pipeline::run(&config, &recorder).expect("baseline run");
    for (_, calls) in &summary.per_item_calls {
        assert_eq!(*calls, 1, "baseline configuration should issue one call per item");
    }

    let entries = recorder.store().scan().expect("scan transcript").len();
    println!("mini12 fixture written to {}", root.display());
    println!("transcript entries: {entries}");
}
