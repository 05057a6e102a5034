//! Seeded phantom benchmark: training and test volumes with dense labels and
//! projection annotations, training under a chosen supervision and pooled
//! max-F1 evaluation on the held-out volumes.

use crate::annotate::{mips_from_3d_labels, rasterize, LabelSource};
use crate::error::Result;
use crate::gradnet::{predict, train, NetConfig, NetState, Supervision, TrainConfig, TrainOutcome, TrainSample};
use crate::phantom::{generate, PhantomConfig};
use crate::score::{PrAccumulator, PrCurvePoint, DEFAULT_THRESHOLDS};
use crate::volume::{Axis, LabelVolume, ScalarVolume};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub phantom: PhantomConfig,
    pub train_volumes: usize,
    pub test_volumes: usize,
    pub margin_width: usize,
    /// Phantom `i` uses seed `seed_base + i`; test volumes follow the training ones.
    pub seed_base: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            phantom: PhantomConfig::default(),
            train_volumes: 8,
            test_volumes: 2,
            margin_width: 5,
            seed_base: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Suite {
    pub train: Vec<TrainSample>,
    pub test: Vec<(ScalarVolume, LabelVolume)>,
}

/// Volume, dense labels and all three projection annotations of one phantom.
pub fn annotated_phantom(cfg: &PhantomConfig, margin_width: usize) -> Result<TrainSample> {
    let p = generate(cfg)?;
    let labels = rasterize(&p.centerlines, cfg.dims, margin_width)?;
    let mips = mips_from_3d_labels(LabelSource::Labels(&labels), &Axis::ALL, margin_width)?;
    Ok(TrainSample { volume: p.volume, labels: Some(labels), mips: Some(mips) })
}

pub fn build_suite(cfg: &SuiteConfig) -> Result<Suite> {
    let sample = |i: usize| {
        let pc = PhantomConfig { rng_seed: cfg.seed_base + i as u64, ..cfg.phantom.clone() };
        annotated_phantom(&pc, cfg.margin_width)
    };
    let train = (0..cfg.train_volumes).map(sample).collect::<Result<Vec<_>>>()?;
    let test = (cfg.train_volumes..cfg.train_volumes + cfg.test_volumes)
        .map(|i| sample(i).map(|s| (s.volume, s.labels.expect("dense labels"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Suite { train, test })
}

/// Best point of the precision/recall curve pooled over all test volumes.
pub fn evaluate(state: &NetState, test: &[(ScalarVolume, LabelVolume)]) -> Result<PrCurvePoint> {
    let mut acc = PrAccumulator::new(DEFAULT_THRESHOLDS)?;
    for (vol, labels) in test {
        acc.add_volume(&predict(state, vol)?, labels)?;
    }
    Ok(acc.finish().0)
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub supervision: Supervision,
    pub best: PrCurvePoint,
    pub outcome: TrainOutcome,
}

pub fn run(suite: &Suite, supervision: Supervision, iterations: usize, seed: u64, net: NetConfig) -> Result<RunResult> {
    let tc = TrainConfig { iterations, ..TrainConfig::desk(supervision.clone(), seed) };
    let outcome = train(&suite.train, &tc, net, |_, _| {})?;
    let best = evaluate(&outcome.state, &suite.test)?;
    Ok(RunResult { supervision, best, outcome })
}
