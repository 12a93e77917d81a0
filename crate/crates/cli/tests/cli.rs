use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use shiftbench::exec_prob::PerceivedSceneFile;
use shiftbench::questions::QuestionFile;
use shiftbench::scene::{validate_scene, LayoutRules, SceneFile};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftbench")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn default_generate_hundred_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    ok(&["generate", "--num-scenes", "100", "--seed", "0", "--out", p(&out)]);
    let scenes: SceneFile = serde_json::from_str(&fs::read_to_string(out.join("scenes.json")).unwrap()).unwrap();
    let questions: QuestionFile = serde_json::from_str(&fs::read_to_string(out.join("questions.json")).unwrap()).unwrap();
    assert_eq!(scenes.scenes.len(), 100);
    assert_eq!(questions.questions.len(), 2000);
    let vocab = shiftbench::concepts::ConceptVocabulary::default();
    for s in scenes.to_scenes().unwrap() {
        assert!(validate_scene(&s, &vocab, &LayoutRules::default()).is_empty());
    }
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov["command"], "generate");
    assert_eq!(prov["settings"]["visual"], "mid");
    assert_eq!(prov["format_version"], 1);
    assert_eq!(json(&out.join("scenes.json"))["info"]["format_version"], 1);
}

#[test]
fn splits_use_distinct_streams() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("train"), dir.path().join("val"));
    ok(&["generate", "--num-scenes", "5", "--split", "train", "--out", p(&a)]);
    ok(&["generate", "--num-scenes", "5", "--split", "val", "--out", p(&b)]);
    let sa = json(&a.join("scenes.json"));
    let sb = json(&b.join("scenes.json"));
    assert_ne!(sa["scenes"], sb["scenes"]);
    assert_eq!(sb["info"]["split"], "val");
}

#[test]
fn conflicting_color_controls_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--dist", "long", "--comp", "co-2", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("conflicts"));
    let o = run(&["generate", "--num-scenes", "3", "--dist", "bal", "--comp", "co-2", "--out", p(dir.path())]);
    assert!(o.status.success());
}

#[test]
fn exit_codes_distinguish_config_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[generate]\nnum_scene = 3\n").unwrap();
    assert_eq!(run(&["generate", "--config", p(&cfg), "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["perturb", "--scenes", "missing.json", "--out", p(dir.path())]).status.code(), Some(3));
    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{}").unwrap();
    assert_eq!(run(&["perturb", "--scenes", p(&garbage), "--out", p(dir.path())]).status.code(), Some(3));
    assert_eq!(run(&["perturb", "--scenes", p(&garbage), "--epsilon", "1.5", "--out", p(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 4\n[generate]\nnum_scenes = 3\nvisual = \"hard\"\nredundancy = \"rd+\"\n").unwrap();
    let out = dir.path().join("o");
    ok(&["generate", "--config", p(&cfg), "--visual", "easy", "--out", p(&out)]);
    let prov = json(&out.join("provenance.json"));
    assert_eq!(prov["seed"], 4);
    assert_eq!(prov["settings"]["visual"], "easy");
    assert_eq!(prov["settings"]["redundancy"], "rd+");
    assert_eq!(prov["settings"]["num_scenes"], 3);
    assert_eq!(prov["inputs"][0]["path"], p(&cfg));
}

#[test]
fn perturb_examples() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["generate", "--num-scenes", "4", "--visual", "hard", "--out", p(&g)]);
    let scenes = p(&g.join("scenes.json")).to_string();
    let read = |d: &Path| -> PerceivedSceneFile { serde_json::from_str(&fs::read_to_string(d.join("perceived.json")).unwrap()).unwrap() };

    let clean = dir.path().join("clean");
    ok(&["perturb", "--scenes", &scenes, "--out", p(&clean)]);
    for s in read(&clean).scenes {
        for d in s.detections {
            for t in [&d.shape_probs, &d.color_probs, &d.material_probs, &d.size_probs] {
                assert_eq!(t.iter().filter(|&&x| x == 1.0).count(), 1);
                assert_eq!(t.iter().filter(|&&x| x == 0.0).count(), t.len() - 1);
            }
        }
    }
    let eps = dir.path().join("eps");
    ok(&["perturb", "--scenes", &scenes, "--epsilon", "0.1", "--out", p(&eps)]);
    for s in read(&eps).scenes {
        for d in s.detections {
            let k = d.color_probs.len() as f64;
            let hi = d.color_probs.iter().cloned().fold(0.0, f64::max);
            assert!((hi - (0.9 + 0.1 / k)).abs() < 1e-12);
            assert!(d.color_probs.iter().all(|&x| x == hi || (x - 0.1 / k).abs() < 1e-12));
        }
    }
    let miss = dir.path().join("miss");
    ok(&["perturb", "--scenes", &scenes, "--miss", "1", "--out", p(&miss)]);
    assert!(read(&miss).scenes.iter().all(|s| s.detections.is_empty()));
}

#[test]
fn execute_modes_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["generate", "--num-scenes", "10", "--out", p(&g)]);
    let (qs, sc) = (g.join("questions.json"), g.join("scenes.json"));
    let pz = dir.path().join("pz");
    ok(&["perturb", "--scenes", p(&sc), "--out", p(&pz)]);
    let det = dir.path().join("det");
    ok(&["execute", "--mode", "det", "--questions", p(&qs), "--scenes", p(&sc), "--out", p(&det)]);
    let prob = dir.path().join("prob");
    ok(&["execute", "--mode", "prob", "--relation-mode", "hard", "--questions", p(&qs), "--perceived", p(&pz.join("perceived.json")), "--out", p(&prob)]);
    let det_preds = json(&det.join("predictions.json"))["predictions"].clone();
    assert_eq!(det_preds, json(&prob.join("predictions.json"))["predictions"]);

    let ev = dir.path().join("ev");
    let o = ok(&["evaluate", "--pred", p(&det.join("predictions.json")), "--gold", p(&qs), "--out", p(&ev)]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("accuracy 1.0000 (200/200)"));
    assert_eq!(json(&ev.join("report.json"))["score"]["overall"]["accuracy"], 1.0);

    let o = run(&["execute", "--mode", "prob", "--questions", p(&qs), "--scenes", p(&sc), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["execute", "--mode", "prob", "--threshold", "1.5", "--questions", p(&qs), "--perceived", p(&pz.join("perceived.json")), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_manifest_report_and_incomplete_grid() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["generate", "--num-scenes", "4", "--out", p(&g)]);
    let qs = g.join("questions.json");
    let det = dir.path().join("det");
    ok(&["execute", "--questions", p(&qs), "--scenes", p(&g.join("scenes.json")), "--out", p(&det)]);
    let cells: Vec<Value> = ["easy", "mid", "hard"]
        .iter()
        .flat_map(|t| ["easy", "mid", "hard"].map(|s| serde_json::json!({"train": t, "test": s, "predictions": "det/predictions.json", "gold": "g/questions.json"})))
        .collect();
    let manifest = dir.path().join("grid.json");
    fs::write(&manifest, serde_json::json!({"factor": "visual", "cells": cells}).to_string()).unwrap();
    let ev = dir.path().join("ev");
    let o = ok(&["evaluate", "--grid", p(&manifest), "--out", p(&ev)]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("RD: 0.000%"), "{text}");
    assert!(text.contains(shiftbench::evaluation::RD_DISCREPANCY_NOTE));
    assert_eq!(fs::read_to_string(ev.join("report.txt")).unwrap(), text);

    fs::write(&manifest, serde_json::json!({"factor": "visual", "cells": &cells[..8]}).to_string()).unwrap();
    let o = run(&["evaluate", "--grid", p(&manifest), "--out", p(&ev)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incomplete"));
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--num-scenes", "30", "--visual", "hard", "--jobs", "1", "--out", p(&a)]);
    ok(&["generate", "--num-scenes", "30", "--visual", "hard", "--jobs", "4", "--out", p(&b)]);
    for f in ["scenes.json", "questions.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
