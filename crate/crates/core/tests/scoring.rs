use mipcarve::rng::SeededRng;
use mipcarve::score::{max_f1, max_f1_exact, PrAccumulator, DEFAULT_THRESHOLDS};
use mipcarve::{Label, Volume};
use proptest::prelude::*;

/// A noisy detector: foreground voxels score higher on average.
fn detector(dims: [usize; 3], seed: u64, separation: f64) -> (Volume<f64>, Volume<Label>) {
    let mut rng = SeededRng::new(seed);
    let labels = Volume::from_fn(dims, |_| match rng.below(10) {
        0..=1 => Label::Foreground,
        2 => Label::Ignore,
        _ => Label::Background,
    })
    .unwrap();
    let pred = labels.map(|l| {
        let base = if l == Label::Foreground { separation } else { 0.0 };
        (base + rng.uniform() * (1.0 - separation)).clamp(0.0, 1.0)
    });
    (pred, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_sweep_tracks_the_exact_sweep(
        dims in [1usize..=21, 1usize..=21, 1usize..=21],
        seed in any::<u64>(),
        separation in 0.0f64..0.8,
    ) {
        let (pred, labels) = detector(dims, seed, separation);
        let grid = max_f1(&pred, &labels, DEFAULT_THRESHOLDS).unwrap().0.f1;
        let exact = max_f1_exact(pred.data(), labels.data()).unwrap().f1;
        // every grid threshold selects the same voxels as some distinct value
        prop_assert!(grid <= exact + 1e-12);
        if pred.len() >= 1000 {
            prop_assert!(exact - grid <= 0.01, "grid {grid} exact {exact}");
        }
    }

    #[test]
    fn ignore_voxels_never_change_the_score(dims in [1usize..=8, 1usize..=8, 1usize..=8], seed in any::<u64>()) {
        let (pred, labels) = detector(dims, seed, 0.3);
        let mut rng = SeededRng::new(!seed);
        let mut other = pred.clone();
        for (y, &l) in other.data_mut().iter_mut().zip(labels.data()) {
            if l == Label::Ignore {
                *y = rng.uniform();
            }
        }
        prop_assert_eq!(max_f1(&pred, &labels, 255).unwrap(), max_f1(&other, &labels, 255).unwrap());
        prop_assert_eq!(max_f1_exact(pred.data(), labels.data()).unwrap(), max_f1_exact(other.data(), labels.data()).unwrap());
    }

    #[test]
    fn pooling_equals_concatenation(seed in any::<u64>()) {
        let (p1, l1) = detector([4, 5, 6], seed, 0.2);
        let (p2, l2) = detector([3, 3, 3], seed ^ 1, 0.4);
        let mut acc = PrAccumulator::new(255).unwrap();
        acc.add_volume(&p1, &l1).unwrap();
        acc.add_volume(&p2, &l2).unwrap();
        let mut single = PrAccumulator::new(255).unwrap();
        let pred: Vec<f64> = p1.data().iter().chain(p2.data()).copied().collect();
        let labels: Vec<Label> = l1.data().iter().chain(l2.data()).copied().collect();
        single.add(&pred, &labels).unwrap();
        prop_assert_eq!(acc.finish(), single.finish());
    }
}

#[test]
fn worked_example_is_exact() {
    let pred = Volume::new([1, 1, 3], vec![0.9, 0.7, 0.2]).unwrap();
    let labels = Volume::new([1, 1, 3], vec![Label::Foreground, Label::Background, Label::Foreground]).unwrap();
    assert_eq!(max_f1(&pred, &labels, 255).unwrap().0.f1, 0.8);
    let exact = max_f1_exact(pred.data(), labels.data()).unwrap();
    assert_eq!(exact.f1, 0.8);
    assert_eq!(exact.threshold, 0.2);
}

#[test]
fn curve_recall_falls_as_threshold_rises() {
    let (pred, labels) = detector([10, 10, 10], 77, 0.3);
    let (_, curve) = max_f1(&pred, &labels, 255).unwrap();
    assert!(curve.windows(2).all(|w| w[1].recall <= w[0].recall && w[0].threshold < w[1].threshold));
}
