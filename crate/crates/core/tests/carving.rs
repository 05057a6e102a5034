use mipcarve::agree::{cross_view_inconsistency, distance_match_curve, inconsistent_labels};
use mipcarve::carve::{build_hull, filter_labels, filter_labels_detailed};
use mipcarve::project::project_any;
use mipcarve::{Axis, BinaryVolume, Image, Label, LabelImage, MipAnnotationSet, Volume};
use proptest::prelude::*;

fn arb_dims() -> impl Strategy<Value = [usize; 3]> {
    [1usize..=8, 1usize..=8, 1usize..=8]
}

fn arb_axes() -> impl Strategy<Value = Vec<Axis>> {
    prop_oneof![
        Just(vec![Axis::Axis0, Axis::Axis1]),
        Just(vec![Axis::Axis0, Axis::Axis2]),
        Just(vec![Axis::Axis1, Axis::Axis2]),
        Just(Axis::ALL.to_vec()),
    ]
}

fn label_image(axis: Axis, dims: [usize; 2], codes: &[u8]) -> LabelImage {
    Image::new(Some(axis), dims, codes.iter().map(|&c| Label::from_u8(c % 3).unwrap()).collect()).unwrap()
}

/// Independent ternary images per axis, so most sets are inconsistent.
fn arb_set() -> impl Strategy<Value = MipAnnotationSet> {
    (arb_dims(), arb_axes()).prop_flat_map(|(dims, axes)| {
        let sizes: Vec<usize> = axes.iter().map(|a| a.image_dims(dims).iter().product()).collect();
        let codes = sizes.into_iter().map(|n| prop::collection::vec(0u8..3, n)).collect::<Vec<_>>();
        (Just(dims), Just(axes), codes).prop_map(|(dims, axes, codes)| {
            let entries = axes.iter().zip(&codes).map(|(&a, c)| label_image(a, a.image_dims(dims), c)).collect();
            MipAnnotationSet::new(dims, entries).unwrap()
        })
    })
}

fn arb_binary_volume() -> impl Strategy<Value = BinaryVolume> {
    arb_dims().prop_flat_map(|dims| {
        prop::collection::vec(prop::bool::weighted(0.2), dims.iter().product::<usize>())
            .prop_map(move |data| Volume::new(dims, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn background_rays_hold_no_hull_voxel(set in arb_set()) {
        let hull = build_hull(&set).unwrap();
        let dims = set.volume_dims();
        for e in set.entries() {
            let axis = e.axis().unwrap();
            let [da, db] = e.dims();
            for a in 0..da {
                for b in 0..db {
                    if e.get(a, b) == Label::Background {
                        prop_assert!((0..axis.ray_len(dims)).all(|t| !hull.get(axis.voxel(t, a, b))));
                    }
                }
            }
        }
    }

    #[test]
    fn hull_contains_every_consistent_volume(vol in arb_binary_volume(), axes in arb_axes()) {
        let entries = axes
            .iter()
            .map(|&a| project_any(&vol, a, |v| v).map(|p| if p { Label::Foreground } else { Label::Background }))
            .collect();
        let set = MipAnnotationSet::new(vol.dims(), entries).unwrap();
        let hull = build_hull(&set).unwrap();
        for (n, &v) in vol.data().iter().enumerate() {
            prop_assert!(!v || hull.data()[n]);
        }
        // projections of a real volume are already consistent
        prop_assert_eq!(filter_labels(&set).unwrap(), set);
    }

    #[test]
    fn filtering_is_idempotent_and_only_removes(set in arb_set()) {
        let once = filter_labels(&set).unwrap();
        prop_assert_eq!(&filter_labels(&once).unwrap(), &once);
        for (before, after) in set.entries().iter().zip(once.entries()) {
            prop_assert_eq!(before.dims(), after.dims());
            prop_assert_eq!(before.axis(), after.axis());
            for (&x, &y) in before.data().iter().zip(after.data()) {
                prop_assert!(x == y || (x.is_positive() && y == Label::Background));
            }
        }
    }

    #[test]
    fn zero_radius_estimator_flags_what_filtering_removes(set in arb_set()) {
        let removed = filter_labels_detailed(&set).unwrap().removed;
        prop_assert_eq!(inconsistent_labels(&set, 0).unwrap(), removed);
    }

    #[test]
    fn curves_are_monotone(set in arb_set(), d_max in 0u32..6) {
        let c = cross_view_inconsistency(&set, d_max).unwrap();
        prop_assert_eq!(c.distances.len(), d_max as usize + 1);
        prop_assert!(c.fraction.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.fraction.iter().all(|f| (0.0..=1.0).contains(f)));
        let a = set.entries()[0].map(|l| l == Label::Foreground);
        let b = set.entries()[1].map(|l| l == Label::Foreground);
        if a.dims() == b.dims() {
            let m = distance_match_curve(&a, &b, d_max).unwrap();
            prop_assert!(m.fraction.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn cropped_scene_loses_exactly_its_outside_labels() {
    // A 4x4x4 scene, cropped to i < 2: voxels with i >= 2 leave labels only in
    // the Axis0 view, at footprints no in-crop voxel shares.
    let dims = [4, 4, 4];
    let inside = [[0, 0, 0], [1, 1, 1]];
    let outside = [[2, 3, 2], [3, 2, 3]];
    let entries = Axis::ALL
        .iter()
        .map(|&a| {
            Image::from_fn(Some(a), a.image_dims(dims), |p, q| {
                let hit = inside.iter().chain(&outside).any(|&v| a.footprint(v) == (p, q));
                if hit { Label::Foreground } else { Label::Background }
            })
            .unwrap()
        })
        .collect();
    let scene = MipAnnotationSet::new(dims, entries).unwrap();
    let cropped = scene.crop([0, 0, 0], [2, 4, 4]).unwrap();
    let out = filter_labels_detailed(&cropped).unwrap();
    assert_eq!(out.removed_count(), 2);
    let f0 = out.filtered.get(Axis::Axis0).unwrap();
    for v in outside {
        let (a, b) = Axis::Axis0.footprint(v);
        assert_eq!(f0.get(a, b), Label::Background);
    }
    for v in inside {
        let (a, b) = Axis::Axis0.footprint(v);
        assert_eq!(f0.get(a, b), Label::Foreground);
    }
}
