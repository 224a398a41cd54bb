use std::sync::Arc;

use proptest::prelude::*;
use replsynth::csg::{iou, render, Angle, BitGrid, CsgConfig, CsgDomain, CsgExpr};
use replsynth::datagen::{sample_csg_episode, sample_string_episode, StringGenConfig};
use replsynth::mdp::{replay, reward, rng_from_seed};
use replsynth::strings::{levenshtein, StringDomain};

fn coord() -> impl Strategy<Value = u8> {
    (0u8..8).prop_map(|v| v * 4)
}

fn shape() -> impl Strategy<Value = CsgExpr> {
    prop_oneof![
        (coord(), coord(), coord()).prop_map(|(r, x, y)| CsgExpr::Circle { r, x, y }),
        (coord(), coord(), coord(), coord(), any::<bool>()).prop_map(|(x, y, w, h, tilt)| {
            CsgExpr::Quadrilateral { x, y, w, h, angle: if tilt { Angle::Deg45 } else { Angle::Deg0 } }
        }),
    ]
}

fn tree() -> impl Strategy<Value = CsgExpr> {
    shape().prop_recursive(3, 8, 2, |inner| {
        (inner.clone(), inner, any::<bool>()).prop_map(|(a, b, union)| {
            if union {
                CsgExpr::union(a, b)
            } else {
                CsgExpr::difference(a, b)
            }
        })
    })
}

fn grid(e: &CsgExpr) -> BitGrid {
    render(e, 32).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn union_renders_as_union_of_renders(a in tree(), b in tree()) {
        let u = grid(&CsgExpr::union(a.clone(), b.clone()));
        prop_assert_eq!(&u, &grid(&a).union(&grid(&b)).unwrap());
        prop_assert_eq!(u, grid(&CsgExpr::union(b, a)));
    }

    #[test]
    fn difference_renders_as_set_difference(a in tree(), b in tree()) {
        let d = grid(&CsgExpr::difference(a.clone(), b.clone()));
        prop_assert_eq!(&d, &grid(&a).difference(&grid(&b)).unwrap());
        prop_assert!(d.is_subset(&grid(&a)));
        prop_assert!(!grid(&CsgExpr::difference(a.clone(), a)).any());
    }

    #[test]
    fn printed_programs_parse_back(e in tree()) {
        let parsed: CsgExpr = e.to_string().parse().unwrap();
        prop_assert_eq!(parsed, e);
    }

    #[test]
    fn run_length_text_round_trips(e in tree()) {
        let g = grid(&e);
        prop_assert_eq!(BitGrid::from_rle(&g.to_rle()).unwrap(), g);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in tree(), b in tree()) {
        let (ga, gb) = (grid(&a), grid(&b));
        let x = iou(&ga, &gb).unwrap();
        prop_assert_eq!(x, iou(&gb, &ga).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(iou(&ga, &ga).unwrap(), 1.0);
    }

    #[test]
    fn edit_distance_is_a_metric(a in "[a-c ]{0,8}", b in "[a-c ]{0,8}", c in "[a-c ]{0,8}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn sampled_csg_episodes_replay(seed in any::<u64>(), objects in 1usize..=4) {
        let d = CsgDomain::new(CsgConfig::micro_2d().with_max_objects(4)).unwrap();
        let s = sample_csg_episode(&d, objects, &mut rng_from_seed(seed));
        let states = replay(&d, Arc::new(s.spec), &s.actions).unwrap();
        prop_assert_eq!(reward(&d, states.last().unwrap()), 1);
    }

    #[test]
    fn sampled_string_episodes_replay(seed in any::<u64>()) {
        let d = StringDomain::default();
        let s = sample_string_episode(&StringGenConfig::default(), &mut rng_from_seed(seed));
        let states = replay(&d, Arc::new(s.spec), &s.actions).unwrap();
        prop_assert_eq!(reward(&d, states.last().unwrap()), 1);
    }
}
