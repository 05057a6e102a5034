//! Seeded synthetic volumes of bright tubes with known centerlines.
//!
//! Each tube is a piecewise-linear random walk grown in both directions from
//! a random interior point until it leaves the volume, turning by at most
//! `max_turn_deg` per segment. Intensity is the maximum over tubes and blobs of
//! a Gaussian profile in the distance to the structure, followed by additive
//! Gaussian noise and clipping to `[0, 1]`.
//!
//! Stream order: per tube (start point, radius, initial direction, then the
//! forward turns, then the backward turns), then per blob (center, sigma,
//! amplitude), then one normal draw per voxel in storage order when noise is on.

use crate::annotate::{segment_dist2, CenterlineSet, Polyline};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::volume::{Dims3, ScalarVolume, Volume};

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub dims: Dims3,
    pub tube_count: usize,
    pub tube_radius_range: (f64, f64),
    pub intensity: f64,
    pub noise_sigma: f64,
    pub clutter_blob_count: usize,
    pub rng_seed: u64,
    pub segment_length: f64,
    pub max_turn_deg: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            dims: [32, 64, 64],
            tube_count: 6,
            tube_radius_range: (1.0, 1.8),
            intensity: 0.9,
            noise_sigma: 0.08,
            clutter_blob_count: 8,
            rng_seed: 1,
            segment_length: 8.0,
            max_turn_deg: 35.0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dims.iter().any(|&d| d == 0) {
            return bad(format!("dims must be positive: {:?}", self.dims));
        }
        if self.tube_count == 0 {
            return bad("tube_count must be at least 1".into());
        }
        let (lo, hi) = self.tube_radius_range;
        let limit = *self.dims.iter().min().unwrap() as f64 / 4.0;
        if !(lo > 0.0 && lo <= hi && hi <= limit) {
            return bad(format!("tube radius range ({lo}, {hi}) must satisfy 0 < min <= max <= {limit}"));
        }
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return bad(format!("intensity {} outside (0, 1]", self.intensity));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be non-negative", self.noise_sigma));
        }
        if !(self.segment_length > 0.0) || !(0.0..=180.0).contains(&self.max_turn_deg) {
            return bad("segment_length must be positive and max_turn_deg within [0, 180]".into());
        }
        Ok(())
    }

    /// Parses line-based `key=value` text; unknown keys are rejected and
    /// missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PhantomConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: n + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{v:?}: {e}")));
            let int = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{v:?}: {e}")));
            match key.trim() {
                "dims" => {
                    let parts: Vec<usize> = value
                        .split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| int(s).map(|v| v as usize))
                        .collect::<Result<_>>()?;
                    if parts.len() != 3 {
                        return Err(err(format!("dims needs three values, got {value:?}")));
                    }
                    cfg.dims = [parts[0], parts[1], parts[2]];
                }
                "tube_count" => cfg.tube_count = int(value)? as usize,
                "tube_radius_min" => cfg.tube_radius_range.0 = num(value)?,
                "tube_radius_max" => cfg.tube_radius_range.1 = num(value)?,
                "intensity" => cfg.intensity = num(value)?,
                "noise_sigma" => cfg.noise_sigma = num(value)?,
                "clutter_blob_count" => cfg.clutter_blob_count = int(value)? as usize,
                "rng_seed" | "seed" => cfg.rng_seed = int(value)?,
                "segment_length" => cfg.segment_length = num(value)?,
                "max_turn_deg" => cfg.max_turn_deg = num(value)?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct Phantom {
    /// Noisy, clipped intensities.
    pub volume: ScalarVolume,
    /// Intensities before noise and clipping.
    pub clean: ScalarVolume,
    pub centerlines: CenterlineSet,
}

fn add(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rotates `dir` by `angle` towards a random perpendicular direction.
fn turn(rng: &mut SeededRng, dir: [f64; 3], max_turn: f64) -> [f64; 3] {
    let angle = rng.range(0.0, max_turn);
    let mut other = rng.unit_vector();
    let dot = other[0] * dir[0] + other[1] * dir[1] + other[2] * dir[2];
    other = add(other, dir, -dot);
    let n = (other[0] * other[0] + other[1] * other[1] + other[2] * other[2]).sqrt();
    if n < 1e-9 {
        return dir;
    }
    let perp = [other[0] / n, other[1] / n, other[2] / n];
    normalize(add([dir[0] * angle.cos(), dir[1] * angle.cos(), dir[2] * angle.cos()], perp, angle.sin()))
}

fn inside(p: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> bool {
    (0..3).all(|n| p[n] >= lo[n] && p[n] <= hi[n])
}

/// Largest `t` in `[0, 1]` keeping `a + t (b - a)` inside the box, given `a` inside.
fn clip_to_box(a: [f64; 3], b: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    let mut t = 1.0f64;
    for n in 0..3 {
        let d = b[n] - a[n];
        if d > 0.0 && b[n] > hi[n] {
            t = t.min((hi[n] - a[n]) / d);
        } else if d < 0.0 && b[n] < lo[n] {
            t = t.min((lo[n] - a[n]) / d);
        }
    }
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn grow(rng: &mut SeededRng, start: [f64; 3], dir: [f64; 3], cfg: &PhantomConfig, lo: [f64; 3], hi: [f64; 3]) -> Vec<[f64; 3]> {
    let max_turn = cfg.max_turn_deg.to_radians();
    let max_steps = 4 * cfg.dims.iter().sum::<usize>() / cfg.segment_length.ceil().max(1.0) as usize + 4;
    let mut pts = Vec::new();
    let mut cur = start;
    let mut d = dir;
    for _ in 0..max_steps {
        let next = add(cur, d, cfg.segment_length);
        if !inside(next, lo, hi) {
            pts.push(clip_to_box(cur, next, lo, hi));
            break;
        }
        pts.push(next);
        cur = next;
        d = turn(rng, d, max_turn);
    }
    pts
}

/// Splats `amp * exp(-d^2 / (2 sigma^2))` by maximum, where `d` is the
/// distance to the segment `a..b`, truncated at `d > 4 sigma`.
fn splat_segment(vol: &mut Volume<f64>, a: [f64; 3], b: [f64; 3], sigma: f64, amp: f64) {
    let dims = vol.dims();
    let reach = 4.0 * sigma;
    let lo: [usize; 3] = std::array::from_fn(|n| (a[n].min(b[n]) - reach).ceil().max(0.0) as usize);
    let hi: [isize; 3] = std::array::from_fn(|n| (a[n].max(b[n]) + reach).floor().min(dims[n] as f64 - 1.0) as isize);
    if (0..3).any(|n| hi[n] < lo[n] as isize) {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let reach2 = reach * reach;
    for i in lo[0]..=hi[0] as usize {
        for j in lo[1]..=hi[1] as usize {
            for k in lo[2]..=hi[2] as usize {
                let d2 = segment_dist2([i as f64, j as f64, k as f64], a, b);
                if d2 > reach2 {
                    continue;
                }
                let v = amp * (-d2 * inv).exp();
                if v > vol.get([i, j, k]) {
                    vol.set([i, j, k], v);
                }
            }
        }
    }
}

pub fn generate(cfg: &PhantomConfig) -> Result<Phantom> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.rng_seed);
    let dims = cfg.dims;
    let lo = [-0.5; 3];
    let hi: [f64; 3] = std::array::from_fn(|n| dims[n] as f64 - 0.5);
    let mut clean = Volume::filled(dims, 0.0f64)?;
    let mut polylines = Vec::with_capacity(cfg.tube_count);

    for _ in 0..cfg.tube_count {
        let start: [f64; 3] = std::array::from_fn(|n| rng.range(0.0, dims[n] as f64 - 1.0));
        let radius = rng.range(cfg.tube_radius_range.0, cfg.tube_radius_range.1);
        let dir = rng.unit_vector();
        let forward = grow(&mut rng, start, dir, cfg, lo, hi);
        let backward = grow(&mut rng, start, [-dir[0], -dir[1], -dir[2]], cfg, lo, hi);
        let points: Vec<[f64; 3]> = backward.into_iter().rev().chain(std::iter::once(start)).chain(forward).collect();
        for w in points.windows(2) {
            splat_segment(&mut clean, w[0], w[1], radius, cfg.intensity);
        }
        let radii = vec![radius; points.len()];
        polylines.push(Polyline { points, radii: Some(radii) });
    }

    for _ in 0..cfg.clutter_blob_count {
        let center: [f64; 3] = std::array::from_fn(|n| rng.range(0.0, dims[n] as f64 - 1.0));
        let sigma = rng.range(cfg.tube_radius_range.0, 2.0 * cfg.tube_radius_range.1);
        let amp = rng.range(0.5, 1.0) * cfg.intensity;
        splat_segment(&mut clean, center, center, sigma, amp);
    }

    let clean32 = clean.map(|v| v as f32);
    let volume = if cfg.noise_sigma > 0.0 {
        clean.map(|v| (v + cfg.noise_sigma * rng.normal()).clamp(0.0, 1.0) as f32)
    } else {
        clean32.map(|v| v.clamp(0.0, 1.0))
    };
    Ok(Phantom { volume, clean: clean32, centerlines: CenterlineSet { polylines } })
}
