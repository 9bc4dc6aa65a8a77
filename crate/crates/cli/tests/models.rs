mod common;

use common::{p, small_config, snapshot, teegen};

#[test]
fn phantom_fit_sample_generate() {
    let dir = tempfile::tempdir().unwrap();
    let phantoms = dir.path().join("phantoms");
    let r = teegen(&["models", "phantom", "--count", "4", "--out", p(&phantoms), "--seed", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["files"].as_array().unwrap().len(), 4);

    let model = dir.path().join("ssm.json");
    let r = teegen(&["models", "fit", "--models", p(&phantoms), "--out", p(&model)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["details"]["training_meshes"], 4);
    assert_eq!(r.summary["details"]["modes"], 3);

    let sampled = dir.path().join("sampled");
    let again = dir.path().join("again");
    for out in [&sampled, &again] {
        let r = teegen(&["models", "sample", "--model", p(&model), "--count", "3", "--out", p(out), "--seed", "8"]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(snapshot(&sampled), snapshot(&again));

    let cfg = small_config(dir.path(), 0.6);
    let out = dir.path().join("gen");
    let r = teegen(&["generate", "--models", p(&sampled), "--count", "3", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["details"]["models"], 3);
}

#[test]
fn model_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let out = dir.path().join("m.json");
    assert_eq!(teegen(&["models", "fit", "--models", p(&empty), "--out", p(&out)]).code, 2);
    std::fs::write(empty.join("junk.tmesh"), "not a mesh").unwrap();
    assert_eq!(teegen(&["models", "fit", "--models", p(&empty), "--out", p(&out)]).code, 2);
    assert_eq!(teegen(&["models", "sample", "--model", p(&out), "--out", p(dir.path())]).code, 1);
}
