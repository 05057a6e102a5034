//! Network parameters with ADAM moments, and their `NET1` binary form.
//!
//! Layout (little endian): `NET1`, five `u32` config fields (in_channels,
//! base_channels, levels, kernel, residual_blocks), `u64` parameter count,
//! then parameters, first moments and second moments as `f32`, and a final
//! `u64` step count.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::net::{NetConfig, Network};

pub const NET_MAGIC: &[u8; 4] = b"NET1";

#[derive(Clone, Debug, PartialEq)]
pub struct NetState {
    pub config: NetConfig,
    pub parameters: Vec<f32>,
    pub adam_m: Vec<f32>,
    pub adam_v: Vec<f32>,
    pub step_count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl NetState {
    pub fn init(config: NetConfig, rng: &mut SeededRng) -> Result<Self> {
        let net = Network::new(config)?;
        let parameters = net.init_params(rng);
        let n = parameters.len();
        Ok(NetState { config, parameters, adam_m: vec![0.0; n], adam_v: vec![0.0; n], step_count: 0 })
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.config)
    }

    /// Bias-corrected ADAM with the weight decay added to the gradient.
    /// Arithmetic is carried out in `f64`; a non-finite gradient leaves the
    /// state untouched and is reported as an error.
    pub fn adam_step(&mut self, grads: &[f64], cfg: &AdamConfig) -> Result<()> {
        if grads.len() != self.parameters.len() {
            return Err(Error::ShapeMismatch(format!("{} gradients for {} parameters", grads.len(), self.parameters.len())));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("parameter gradient"));
        }
        let t = (self.step_count + 1) as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (((w, m), v), &g) in self.parameters.iter_mut().zip(&mut self.adam_m).zip(&mut self.adam_v).zip(grads) {
            let g = g + cfg.weight_decay * *w as f64;
            let m1 = cfg.beta1 * *m as f64 + (1.0 - cfg.beta1) * g;
            let v1 = cfg.beta2 * *v as f64 + (1.0 - cfg.beta2) * g * g;
            *w = (*w as f64 - cfg.learning_rate * (m1 / c1) / ((v1 / c2).sqrt() + cfg.epsilon)) as f32;
            *m = m1 as f32;
            *v = v1 as f32;
        }
        self.step_count += 1;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.parameters.len();
        let mut out = Vec::with_capacity(4 + 20 + 8 + 12 * n + 8);
        out.extend_from_slice(NET_MAGIC);
        let c = &self.config;
        for v in [c.in_channels, c.base_channels, c.levels, c.kernel, c.residual_blocks] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for buf in [&self.parameters, &self.adam_m, &self.adam_v] {
            for x in buf.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.step_count.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated { expected: 4, found: bytes.len() });
        }
        if &bytes[..4] != NET_MAGIC {
            return Err(Error::BadMagic { expected: "NET1", found: bytes[..4].try_into().unwrap() });
        }
        let header = 4 + 20 + 8;
        if bytes.len() < header {
            return Err(Error::Truncated { expected: header, found: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let config = NetConfig {
            in_channels: u32_at(4),
            base_channels: u32_at(8),
            levels: u32_at(12),
            kernel: u32_at(16),
            residual_blocks: u32_at(20),
        };
        config.validate().map_err(|e| Error::InvalidHeader(e.to_string()))?;
        let n = u64::from_le_bytes(bytes[24..32].try_into().unwrap()) as usize;
        let expected_n = Network::new(config)?.param_count();
        if n != expected_n {
            return Err(Error::InvalidHeader(format!("parameter count {n} does not match config ({expected_n})")));
        }
        let total = header + 12 * n + 8;
        if bytes.len() < total {
            return Err(Error::Truncated { expected: total, found: bytes.len() });
        }
        if bytes.len() > total {
            return Err(Error::InvalidHeader(format!("{} trailing bytes", bytes.len() - total)));
        }
        let floats = |k: usize| -> Vec<f32> {
            let start = header + 4 * n * k;
            bytes[start..start + 4 * n].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
        };
        let (parameters, adam_m, adam_v) = (floats(0), floats(1), floats(2));
        if parameters.iter().chain(&adam_m).chain(&adam_v).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("stored network state"));
        }
        let step_count = u64::from_le_bytes(bytes[total - 8..].try_into().unwrap());
        Ok(NetState { config, parameters, adam_m, adam_v, step_count })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
