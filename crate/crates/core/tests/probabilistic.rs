mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftbench::concepts::Attribute;
use shiftbench::exec_det::execute;
use shiftbench::exec_prob::{
    execute_prob, execute_prob_trace, op_intersect, op_query, op_relate, op_union, op_unique_select, ProbExecConfig,
    ProbState, ProbValue, QueryRule, RelationMode,
};
use shiftbench::perception::{harden, perceive_seeded, smoothed, NoiseConfig};
use shiftbench::program::Function;
use shiftbench::questions::{generate_for_scene, QuestionConfig, TemplateSet};
use shiftbench::sampler::Visual;
use shiftbench::scene::{LayoutRules, Relation};

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

fn hard() -> ProbExecConfig {
    ProbExecConfig { relation_mode: RelationMode::Hard, ..Default::default() }
}

fn two_object_pscene(dx_px: f64) -> shiftbench::exec_prob::PerceivedScene {
    let s = &common::scenes(Visual::Easy, 0, 0..1)[0];
    let mut p = perceive_seeded(s, &NoiseConfig::default(), &common::vocab());
    p.detections.truncate(2);
    p.detections[0].center = [0.0, 0.0];
    p.detections[1].center = [dx_px, 0.0];
    p
}

proptest! {
    #[test]
    fn set_ops_commute_and_have_identities((a, b) in (1usize..12).prop_flat_map(|n| (state(n), state(n)))) {
        let (pa, pb) = (ProbState(a.clone()), ProbState(b));
        prop_assert_eq!(op_intersect(&pa, &pb).unwrap(), op_intersect(&pb, &pa).unwrap());
        prop_assert_eq!(op_union(&pa, &pb).unwrap(), op_union(&pb, &pa).unwrap());
        prop_assert_eq!(op_intersect(&pa, &ProbState(vec![1.0; a.len()])).unwrap(), pa.clone());
        let u = op_union(&pa, &ProbState(vec![0.0; a.len()])).unwrap();
        prop_assert!(u.0.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-12));
        for v in op_intersect(&pa, &pb).unwrap().0.into_iter().chain(op_union(&pa, &pb).unwrap().0) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn soft_relate_monotone_and_symmetric(u in -400.0f64..400.0, d in 0.5f64..100.0) {
        let cfg = ProbExecConfig::default();
        let at = |x: f64, r: Relation| op_relate(0, &two_object_pscene(x), r, &cfg).0[1];
        // other at -u is left of the anchor by offset u
        prop_assert!(at(-(u + d), Relation::Left) > at(-u, Relation::Left));
        prop_assert!((at(-u, Relation::Left) - at(u, Relation::Right)).abs() < 1e-12);
        prop_assert_eq!(op_relate(0, &two_object_pscene(u), Relation::Left, &cfg).0[0], 0.0);
    }

    #[test]
    fn selection_scale_invariant(seed in any::<u64>(), c in 0.01f64..=1.0) {
        let vocab = common::vocab();
        let scene = &common::scenes(Visual::Hard, seed % 7, 0..3)[(seed % 3) as usize];
        let noise = NoiseConfig { epsilon: 0.35, seed, ..Default::default() };
        let ps = perceive_seeded(scene, &noise, &vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<f64> = (0..ps.detections.len()).map(|_| rng.random::<f64>()).collect();
        let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
        let (a, _) = op_unique_select(&ProbState(p.clone())).unwrap();
        let (b, _) = op_unique_select(&ProbState(scaled.clone())).unwrap();
        prop_assert_eq!(a, b);
        for attr in [Attribute::Color, Attribute::Shape, Attribute::Material, Attribute::Size] {
            prop_assert_eq!(
                op_query(&ProbState(p.clone()), &ps, attr, &vocab, QueryRule::JointArgmax).unwrap(),
                op_query(&ProbState(scaled.clone()), &ps, attr, &vocab, QueryRule::JointArgmax).unwrap()
            );
        }
    }

    #[test]
    fn smoothing_sums_to_one(k in 1usize..40, eps in 0.0f64..1.0, pick in any::<prop::sample::Index>()) {
        let t = smoothed(k, pick.index(k), eps);
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(t.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn closure_on_noisy_scenes(seed in any::<u64>(), eps in 0.0f64..0.9, sigma in 0.0f64..0.5) {
        let vocab = common::vocab();
        let gen = common::ProgramGen::default();
        let scene = &common::scenes(Visual::Hard, 1, 0..5)[(seed % 5) as usize];
        let noise = NoiseConfig { epsilon: eps, position_sigma: sigma, miss_rate: 0.1, spurious_rate: 0.5, seed, ..Default::default() };
        let ps = perceive_seeded(scene, &noise, &vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = gen.program(&vocab, 6, &mut rng);
            let Ok(trace) = execute_prob_trace(&p, &ps, &vocab, &ProbExecConfig::default()) else { continue };
            for v in trace {
                let s = match v {
                    ProbValue::ObjectSet(s) | ProbValue::PartSet(s) => s,
                    ProbValue::Object { state, .. } | ProbValue::Part { state, .. } => state,
                    _ => continue,
                };
                prop_assert!(s.0.iter().all(|x| (0.0..=1.0).contains(x)), "{:?}", s);
            }
        }
    }
}

#[test]
fn perceive_reproducible_and_zero_noise_harden_identity() {
    let vocab = common::vocab();
    let rules = LayoutRules::default();
    for visual in Visual::ALL {
        for s in common::scenes(visual, 8, 0..100) {
            let noisy = NoiseConfig { epsilon: 0.2, position_sigma: 0.1, miss_rate: 0.1, spurious_rate: 1.0, seed: 4, ..Default::default() };
            assert_eq!(perceive_seeded(&s, &noisy, &vocab), perceive_seeded(&s, &noisy, &vocab));
            let clean = perceive_seeded(&s, &NoiseConfig::default(), &vocab);
            clean.validate(&vocab).unwrap();
            let h = harden(&clean, &vocab, &rules);
            assert_eq!(h.relationships, s.relationships);
            for (a, b) in h.objects.iter().zip(&s.objects) {
                assert_eq!(
                    (&a.shape, &a.category, &a.color, &a.material, &a.size, &a.texture, &a.parts),
                    (&b.shape, &b.category, &b.color, &b.material, &b.size, &b.texture, &b.parts)
                );
                assert!((a.position[0] - b.position[0]).abs() < 1e-9 && (a.position[1] - b.position[1]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn one_hot_equivalence() {
    let vocab = common::vocab();
    let set = TemplateSet::default();
    let gen = common::ProgramGen::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let soft = ProbExecConfig::default();
    for visual in Visual::ALL {
        for s in common::scenes(visual, 6, 0..60) {
            let ps = perceive_seeded(&s, &NoiseConfig::default(), &vocab);
            let mut programs: Vec<_> = generate_for_scene(&s, &set, &vocab, &QuestionConfig::default(), &mut rng)
                .unwrap()
                .into_iter()
                .map(|q| q.program)
                .collect();
            programs.extend((0..40).map(|_| gen.program(&vocab, 6, &mut rng)));
            for p in programs {
                let Ok(det) = execute(&p, &s) else { continue };
                assert_eq!(execute_prob(&p, &ps, &vocab, &hard()).unwrap(), det, "{p}");
                let involved = p.ops().iter().any(|o| matches!(o.function, Function::Relate | Function::Count | Function::Exist));
                if execute_prob(&p, &ps, &vocab, &soft).unwrap() != det {
                    assert!(involved, "relate-free disagreement: {p}");
                }
            }
        }
    }
}
