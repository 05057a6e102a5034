//! Crop-sampling training loop over the three supervision modes.

use std::fmt;
use std::str::FromStr;

use crate::carve::filter_labels;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::supervise::{loss3d, loss_mip, loss_slices, Normalization, PredGradient, PredVolume};
use crate::volume::{Axis, Dims3, LabelVolume, MipAnnotationSet, ScalarVolume, Volume};

use super::kernels::FlushSubnormals;
use super::net::{NetConfig, Network};
use super::state::{AdamConfig, NetState};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Supervision {
    /// Dense 3D labels.
    Full3D,
    /// Projection annotations along the given axes.
    Mip(Vec<Axis>),
    /// `count` evenly spaced annotated slices orthogonal to `axis`.
    Slices { axis: Axis, count: usize },
}

impl fmt::Display for Supervision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Supervision::Full3D => write!(f, "3d"),
            Supervision::Mip(axes) => {
                write!(f, "mip:")?;
                axes.iter().try_for_each(|a| write!(f, "{}", a.index()))
            }
            Supervision::Slices { axis, count } => write!(f, "slices:{}:{}", axis.index(), count),
        }
    }
}

impl FromStr for Supervision {
    type Err = Error;

    /// `3d`, `mip:<axis digits>` (e.g. `mip:012`) or `slices:<axis>:<count>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("malformed supervision {s:?} (expected 3d, mip:012, or slices:A:N)"));
        let axis = |c: char| c.to_digit(10).and_then(|d| Axis::from_index(d as usize)).ok_or_else(bad);
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["3d"] => Ok(Supervision::Full3D),
            ["mip", digits] if !digits.is_empty() => {
                let axes = digits.chars().map(axis).collect::<Result<Vec<_>>>()?;
                let mut sorted = axes.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != axes.len() {
                    return Err(bad());
                }
                Ok(Supervision::Mip(sorted))
            }
            ["slices", a, n] if a.len() == 1 => {
                let count: usize = n.parse().map_err(|_| bad())?;
                if count == 0 {
                    return Err(bad());
                }
                Ok(Supervision::Slices { axis: axis(a.chars().next().unwrap())?, count })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub iterations: usize,
    pub crop_size: Dims3,
    pub rng_seed: u64,
    pub supervision: Supervision,
    pub normalization: Normalization,
}

impl Default for TrainConfig {
    /// Step size 1e-5, momentum 0.9 and weight decay 1e-4 with 2,000
    /// iterations on 16x32x32 crops.
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig { learning_rate: 1e-5, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-4 },
            iterations: 2000,
            crop_size: [16, 32, 32],
            rng_seed: 0,
            supervision: Supervision::Full3D,
            normalization: Normalization::MeanOverLabeled,
        }
    }
}

impl TrainConfig {
    /// Short-schedule preset: the default with a larger step size, so that a
    /// few thousand iterations make real progress.
    pub fn desk(supervision: Supervision, rng_seed: u64) -> Self {
        let mut tc = TrainConfig { supervision, rng_seed, ..Default::default() };
        tc.adam.learning_rate = DESK_LEARNING_RATE;
        tc
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        let positive = [a.learning_rate, a.epsilon].iter().all(|&v| v > 0.0 && v.is_finite());
        let betas = [a.beta1, a.beta2].iter().all(|&b| (0.0..1.0).contains(&b));
        if !positive || !betas || !(a.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad optimizer settings {a:?}")));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.crop_size.contains(&0) {
            return Err(Error::InvalidConfig(format!("crop size {:?} must be positive", self.crop_size)));
        }
        Ok(())
    }
}

pub const DESK_LEARNING_RATE: f64 = 1e-3;

/// One training volume with whatever annotations exist for it.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub volume: ScalarVolume,
    pub labels: Option<LabelVolume>,
    pub mips: Option<MipAnnotationSet>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: NetState,
    /// Loss of every iteration, in order.
    pub losses: Vec<f64>,
}

impl TrainOutcome {
    pub fn trace_csv(&self) -> String {
        loss_trace_csv(&self.losses)
    }
}

pub fn loss_trace_csv(losses: &[f64]) -> String {
    let mut out = String::from("iter,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, l));
    }
    out
}

/// Evenly spaced slice positions `floor((s + 1/2) n / count)` for `s < count`.
pub fn slice_plan(extent: usize, count: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..count).map(|s| ((2 * s + 1) * extent) / (2 * count)).filter(|&i| i < extent).collect();
    v.dedup();
    v
}

fn check_data(data: &[TrainSample], tc: &TrainConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training volumes".into()));
    }
    for (n, s) in data.iter().enumerate() {
        let dims = s.volume.dims();
        if (0..3).any(|i| dims[i] < tc.crop_size[i]) {
            return Err(Error::ShapeMismatch(format!("volume {n} {dims:?} smaller than crop {:?}", tc.crop_size)));
        }
        match &tc.supervision {
            Supervision::Full3D | Supervision::Slices { .. } => {
                let labels = s.labels.as_ref().ok_or_else(|| Error::InvalidConfig(format!("volume {n} has no 3D labels")))?;
                s.volume.same_dims(labels)?;
            }
            Supervision::Mip(axes) => {
                let mips = s.mips.as_ref().ok_or_else(|| Error::InvalidConfig(format!("volume {n} has no projection annotations")))?;
                if mips.volume_dims() != dims {
                    return Err(Error::ShapeMismatch(format!("volume {n} {dims:?} vs annotations {:?}", mips.volume_dims())));
                }
                mips.select(axes)?;
            }
        }
    }
    Ok(())
}

fn crop_loss(sample: &TrainSample, tc: &TrainConfig, origin: [usize; 3], pred: &PredVolume) -> Result<(f64, PredGradient)> {
    let size = tc.crop_size;
    let norm = tc.normalization;
    let (report, grad) = match &tc.supervision {
        Supervision::Full3D => {
            let labels = sample.labels.as_ref().expect("checked").crop(origin, size)?;
            loss3d(pred, &labels, norm)?
        }
        Supervision::Mip(axes) => {
            let mut mips = sample.mips.as_ref().expect("checked").select(axes)?.crop(origin, size)?;
            if mips.len() >= 2 {
                mips = filter_labels(&mips)?;
            }
            loss_mip(pred, &mips, norm)?
        }
        Supervision::Slices { axis, count } => {
            let labels = sample.labels.as_ref().expect("checked").crop(origin, size)?;
            let a = axis.index();
            let lo = origin[a];
            let local: Vec<usize> = slice_plan(sample.volume.dims()[a], *count)
                .into_iter()
                .filter(|&i| i >= lo && i < lo + size[a])
                .map(|i| i - lo)
                .collect();
            loss_slices(pred, &labels, *axis, &local, norm)?
        }
    };
    Ok((report.total, grad))
}

/// Trains from scratch. The seed drives parameter initialization first and
/// crop sampling afterwards; each iteration draws the volume index, then the
/// crop origin along axes 0, 1, 2.
pub fn train(data: &[TrainSample], tc: &TrainConfig, net_cfg: NetConfig, mut on_iter: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    tc.validate()?;
    net_cfg.check_input(tc.crop_size)?;
    check_data(data, tc)?;
    let net = Network::new(net_cfg)?;
    let _flush = FlushSubnormals::new();
    let mut rng = SeededRng::new(tc.rng_seed);
    let mut state = NetState::init(net_cfg, &mut rng)?;
    let mut losses = Vec::with_capacity(tc.iterations);
    for it in 0..tc.iterations {
        let sample = &data[rng.below(data.len())];
        let dims = sample.volume.dims();
        let origin: [usize; 3] = std::array::from_fn(|n| rng.below(dims[n] - tc.crop_size[n] + 1));
        let input = sample.volume.crop(origin, tc.crop_size)?;
        let pass = net.forward(&state.parameters, &input)?;
        let pred = pass.output()?.map(|y| y as f64);
        let (loss, grad) = crop_loss(sample, tc, origin, &pred)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let grad32 = grad.map(|g| g as f32);
        let pg = net.backward(&state.parameters, &pass, &grad32)?;
        let pg: Vec<f64> = pg.into_iter().map(f64::from).collect();
        state.adam_step(&pg, &tc.adam)?;
        losses.push(loss);
        on_iter(it + 1, loss);
    }
    Ok(TrainOutcome { state, losses })
}

/// Probabilities for a whole volume, whose extents must suit the network.
pub fn predict(state: &NetState, volume: &ScalarVolume) -> Result<Volume<f64>> {
    let net = state.network()?;
    let _flush = FlushSubnormals::new();
    Ok(net.infer(&state.parameters, volume)?.map(|y| y as f64))
}
