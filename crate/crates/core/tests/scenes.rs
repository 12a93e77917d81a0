mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use shiftbench::io::FileInfo;
use shiftbench::sampler::{sample_scene, GenConfig, Visual};
use shiftbench::scene::{derive_relations_tiebreak, validate_scene, LayoutRules, Relation, SceneFile};

fn positions() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(x, y)| [x, y]), 2..12)
}

proptest! {
    #[test]
    fn relations_antisymmetric(ps in positions()) {
        let rel = derive_relations_tiebreak(&ps);
        for i in 0..ps.len() {
            for j in 0..ps.len() {
                prop_assert_eq!(rel.related(Relation::Left, i).contains(&j), rel.related(Relation::Right, j).contains(&i));
                prop_assert_eq!(rel.related(Relation::Front, i).contains(&j), rel.related(Relation::Behind, j).contains(&i));
            }
            for r in Relation::ALL {
                prop_assert!(!rel.related(r, i).contains(&i));
            }
        }
    }

    #[test]
    fn relations_transitive(ps in positions()) {
        let rel = derive_relations_tiebreak(&ps);
        for r in Relation::ALL {
            for i in 0..ps.len() {
                for &j in rel.related(r, i) {
                    for &k in rel.related(r, j) {
                        prop_assert!(rel.related(r, i).contains(&k));
                    }
                }
            }
        }
    }
}

#[test]
fn sampled_scenes_validate() {
    let vocab = common::vocab();
    let rules = LayoutRules::default();
    for visual in Visual::ALL {
        let cfg = GenConfig::balanced(visual, &vocab, 11);
        for id in 0..1000 {
            let s = sample_scene(&cfg, &vocab, id).unwrap();
            let v = validate_scene(&s, &vocab, &rules);
            assert!(v.is_empty(), "{visual} scene {id}: {v:?}");
            assert!((3..=10).contains(&s.len()));
        }
    }
}

#[test]
fn visual_variants_share_layout() {
    let easy = common::scenes(Visual::Easy, 4, 0..200);
    for visual in [Visual::Mid, Visual::Hard] {
        for (a, b) in easy.iter().zip(common::scenes(visual, 4, 0..200)) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.objects.iter().zip(&b.objects) {
                assert_eq!((&x.shape, &x.size, x.position), (&y.shape, &y.size, y.position));
            }
        }
    }
}

#[test]
fn size_marginal_uniform() {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut n = 0;
    for s in common::scenes(Visual::Mid, 2, 0..3000) {
        for o in s.objects {
            *counts.entry(o.size).or_default() += 1;
            n += 1;
        }
    }
    for c in counts.values() {
        let f = *c as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn sampling_is_deterministic() {
    let a = common::scenes(Visual::Hard, 99, 0..50);
    let b = common::scenes(Visual::Hard, 99, 0..50);
    assert_eq!(a, b);
    let c = common::scenes(Visual::Hard, 100, 0..50);
    assert_ne!(a, c);
}

#[test]
fn scene_file_round_trip() {
    let scenes = common::scenes(Visual::Hard, 5, 0..40);
    let file = SceneFile::new(FileInfo::new(Some("test".into()), None), &scenes);
    let text = shiftbench::io::to_json_string(&file);
    let back: SceneFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_scenes().unwrap(), scenes);
    assert_eq!(shiftbench::io::to_json_string(&back), text);
}
