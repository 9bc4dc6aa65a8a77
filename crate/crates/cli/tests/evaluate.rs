mod common;

use common::{p, small_config, teegen};
use std::collections::BTreeMap;
use std::path::Path;
use teegen_core::imageio::write_mask_png;
use teegen_core::view::{LabelMap, RasterSpec};

fn write_csv(path: &Path, rows: &[&[f64]]) {
    let mut text = String::new();
    for (i, r) in rows.iter().enumerate() {
        let vals: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("img{i},{}\n", vals.join(",")));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn score_closed_forms_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    // Means 0 and 1, equal variances: the distance is exactly 1.
    write_csv(&a, &[&[-1.0], &[1.0]]);
    write_csv(&b, &[&[0.0], &[2.0]]);
    write_csv(&c, &[&[0.0, 1.0], &[2.0, 3.0]]);

    let r = teegen(&["score", "--a", p(&a), "--b", p(&a)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["details"]["distance"].as_f64().unwrap().abs() < 1e-12);

    let report = dir.path().join("report.json");
    let r = teegen(&["score", "--a", p(&a), "--b", p(&b), "--out", p(&report)]);
    assert!((r.summary["details"]["distance"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(written["a"]["count"], 2);

    let r = teegen(&["score", "--a", p(&a), "--b", p(&c)]);
    assert_eq!(r.code, 2);
    assert!(r.summary["error"].as_str().unwrap().contains("dimension"));
}

/// Renders one palette variant and extracts its feature CSV.
fn palette_features(dir: &Path, tissue: f64) -> std::path::PathBuf {
    let cfg = small_config(dir, tissue);
    let out = dir.join(format!("gen_{tissue}"));
    let r = teegen(&["generate", "--count", "12", "--config", p(&cfg), "--out", p(&out), "--seed", "5"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = dir.join(format!("f_{tissue}.csv"));
    let r = teegen(&["features", "--images", p(&out.join("ME4CH/images")), "--config", p(&cfg), "--out", p(&csv)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["details"]["images"], 12);
    csv
}

#[test]
fn closer_palettes_score_lower() {
    let dir = tempfile::tempdir().unwrap();
    let base = palette_features(dir.path(), 0.6);
    let near = palette_features(dir.path(), 0.63);
    let far = palette_features(dir.path(), 0.95);
    let d = |x: &Path, y: &Path| {
        let r = teegen(&["score", "--a", p(x), "--b", p(y)]);
        r.summary["details"]["distance"].as_f64().unwrap()
    };
    let (dn, df) = (d(&base, &near), d(&base, &far));
    assert!(dn < df, "near {dn} vs far {df}");
}

fn mask(labels: impl Fn(usize, usize) -> u16) -> LabelMap {
    let spec = RasterSpec { width: 10, height: 10, spacing_mm: 1.0 };
    let names: BTreeMap<u16, String> = [(1, "a".to_string()), (2, "b".to_string())].into();
    let mut m = LabelMap::background(&spec, names);
    for y in 0..10 {
        for x in 0..10 {
            m.labels[y * 10 + x] = labels(x, y);
        }
    }
    m
}

#[test]
fn eval_seg_tables_and_missing_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth");
    let runs = dir.path().join("runs");
    for d in ["real_p20", "real_p40", "cut_p20", "cut_p40"] {
        std::fs::create_dir_all(runs.join(d)).unwrap();
    }
    std::fs::create_dir_all(&truth).unwrap();
    let gt = mask(|x, _| if x < 5 { 1 } else { 2 });
    for id in ["i0", "i1"] {
        write_mask_png(&truth.join(format!("{id}.png")), &gt).unwrap();
        write_mask_png(&runs.join("real_p20").join(format!("{id}.png")), &gt).unwrap();
        write_mask_png(&runs.join("real_p40").join(format!("{id}.png")), &gt).unwrap();
        // Empty predictions against nonempty truth.
        write_mask_png(&runs.join("cut_p20").join(format!("{id}.png")), &mask(|_, _| 0)).unwrap();
    }
    // Label 2 shifted by one column: Dice(1) = 8/9, Dice(2) = 10/11.
    let shifted = mask(|x, _| if x < 4 { 1 } else { 2 });
    write_mask_png(&runs.join("cut_p40").join("i0.png"), &shifted).unwrap();

    let out = dir.path().join("eval");
    let r = teegen(&["eval-seg", "--truth", p(&truth), "--runs", p(&runs), "--out", p(&out)]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.summary["error"].as_str().unwrap().contains("cut_p40"));
    let d = &r.summary["details"];
    let run = |name: &str| d["runs"].as_array().unwrap().iter().find(|x| x["run"] == name).unwrap().clone();
    assert_eq!(run("real_p20")["mean"], 100.0);
    assert_eq!(run("cut_p20")["mean"], 0.0);
    assert_eq!(run("cut_p40")["missing"], serde_json::json!(["i1"]));
    let expected = 100.0 * (8.0 / 9.0 + 10.0 / 11.0) / 2.0;
    assert!((run("cut_p40")["mean"].as_f64().unwrap() - expected).abs() < 1e-9);

    let table = &d["table"];
    assert_eq!(table["baseline"], "real");
    assert_eq!(table["columns"], serde_json::json!(["p20", "p40"]));
    let cut = table["rows"].as_array().unwrap().iter().find(|r| r["source"] == "cut").unwrap();
    assert_eq!(cut["deltas"][0], -100.0);
    assert_eq!(cut["deltas"][1], -10.1);
    let text = std::fs::read_to_string(out.join("table.txt")).unwrap();
    assert!(text.contains("-100.0") && text.contains("-10.1"));
    assert!(out.join("dice.json").is_file() && out.join("summary.json").is_file());

    // Restricting to one image makes every run complete.
    let manifest = dir.path().join("m.jsonl");
    let m = teegen_core::datasets::DatasetManifest::new(
        "test",
        vec![teegen_core::datasets::ManifestEntry::new("i0", Some("s"), teegen_core::datasets::Origin::Real)],
    );
    m.write(&manifest).unwrap();
    let r = teegen(&["eval-seg", "--truth", p(&truth), "--runs", p(&runs), "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // Scoring label 1 only.
    let r = teegen(&["eval-seg", "--truth", p(&truth), "--runs", p(&runs), "--manifest", p(&manifest), "--labels", "1", "--out", p(&out)]);
    let d = &r.summary["details"];
    let cut40 = d["runs"].as_array().unwrap().iter().find(|x| x["run"] == "cut_p40").unwrap();
    assert!((cut40["mean"].as_f64().unwrap() - 800.0 / 9.0).abs() < 1e-9);

    let r = teegen(&["eval-seg", "--truth", p(&truth), "--runs", p(&runs), "--baseline", "nope", "--out", p(&out)]);
    assert_eq!(r.code, 1);
}

#[test]
fn losses_eval_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fx.json");
    std::fs::write(
        &f,
        r#"[
            {"loss": "cyclegan_total", "adv_xy": 1.0, "adv_yx": 2.0, "cyc": 1.5, "idt": 0.4},
            {"loss": "cut_total", "adv": 1.0, "nce_x": 0.5, "nce_y": 1.0},
            {"loss": "patch_nce", "queries": [[1.0, 0.0]], "positives": [[1.0, 0.0]],
             "negatives": [[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]]},
            {"loss": "l1_consistency", "a": [0.0, 1.0], "b": [1.0, 1.0]}
        ]"#,
    )
    .unwrap();
    let r = teegen(&["losses-eval", "--fixture", p(&f)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: Vec<f64> = r.summary["details"].as_array().unwrap().iter().map(|x| x["value"].as_f64().unwrap()).collect();
    assert!((v[0] - 20.0).abs() < 1e-12);
    assert!((v[1] - 2.5).abs() < 1e-12);
    assert!((v[2] - 4f64.ln()).abs() < 1e-12);
    assert!((v[3] - 0.5).abs() < 1e-12);
    assert_eq!(r.summary["details"][2]["loss"], "patch_nce");

    std::fs::write(&f, r#"{"loss": "l1_consistency", "a": [0.0], "b": [1.0, 2.0]}"#).unwrap();
    assert_eq!(teegen(&["losses-eval", "--fixture", p(&f)]).code, 2);
    std::fs::write(&f, r#"{"loss": "mystery"}"#).unwrap();
    assert_eq!(teegen(&["losses-eval", "--fixture", p(&f)]).code, 2);
}
