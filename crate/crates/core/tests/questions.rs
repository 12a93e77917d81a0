mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftbench::exec_det::execute;
use shiftbench::questions::{
    generate_for_scene, redundancy_audit, referents_saturated, saturate_redundancy, strip_redundancy, QuestionConfig,
    QuestionRecord, Redundancy, TemplateSet, DEFAULT_TEMPLATES,
};
use shiftbench::sampler::Visual;
use shiftbench::scene::Scene;

fn generate(visual: Visual, rd: Redundancy, n: u64) -> Vec<(Scene, Vec<QuestionRecord>)> {
    let vocab = common::vocab();
    let set = TemplateSet::default();
    let cfg = QuestionConfig { redundancy: rd, ..Default::default() };
    common::scenes(visual, 21, 0..n)
        .into_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.scene_id);
            let qs = generate_for_scene(&s, &set, &vocab, &cfg, &mut rng).unwrap();
            (s, qs)
        })
        .collect()
}

#[test]
fn records_valid_for_every_variant() {
    for visual in Visual::ALL {
        for rd in Redundancy::ALL {
            for (s, qs) in generate(visual, rd, 60) {
                assert_eq!(qs.len(), 20);
                for q in &qs {
                    assert_eq!(execute(&q.program, &s).as_ref(), Ok(&q.answer), "{}", q.text);
                    assert_eq!(q.redundancy_variant, rd);
                    q.program.check_literals(&common::vocab()).unwrap();
                    match rd {
                        Redundancy::Minus => assert!(redundancy_audit(&q.program, &s).is_empty(), "{}", q.text),
                        Redundancy::Plus => assert!(referents_saturated(&q.program, &s), "{}", q.text),
                        Redundancy::Random => {}
                    }
                }
            }
        }
    }
}

#[test]
fn strip_idempotent_and_answer_preserving() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for rd in [Redundancy::Random, Redundancy::Plus] {
        for (s, qs) in generate(Visual::Hard, rd, 40) {
            for q in qs {
                let once = strip_redundancy(&q.program, &s);
                assert_eq!(strip_redundancy(&once, &s), once);
                assert_eq!(execute(&once, &s).unwrap(), q.answer);
                assert!(redundancy_audit(&once, &s).is_empty());
                let sat = saturate_redundancy(&once, &s, &mut rng);
                assert!(referents_saturated(&sat, &s));
                assert_eq!(execute(&sat, &s).unwrap(), q.answer);
                let back = strip_redundancy(&sat, &s);
                assert!(redundancy_audit(&back, &s).is_empty());
                assert_eq!(execute(&back, &s).unwrap(), q.answer);
            }
        }
    }
}

#[test]
fn generation_deterministic() {
    assert_eq!(generate(Visual::Mid, Redundancy::Random, 15), generate(Visual::Mid, Redundancy::Random, 15));
}

#[test]
fn records_round_trip_through_json() {
    for (_, qs) in generate(Visual::Hard, Redundancy::Plus, 5) {
        let text = serde_json::to_string(&qs).unwrap();
        let back: Vec<QuestionRecord> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, qs);
    }
}

#[test]
fn default_templates_cover_every_family() {
    let set = TemplateSet::from_json(DEFAULT_TEMPLATES).unwrap();
    for f in shiftbench::questions::Family::ALL {
        assert!(set.templates.iter().any(|t| t.family == f), "{f:?}");
    }
}
