//! Times forward + backward + ADAM on one 16x32x32 crop.
//!
//! `cargo run --release --example train_speed [base_channels]`

use std::time::Instant;

use mipcarve::gradnet::{AdamConfig, NetConfig, NetState, TrainConfig};
use mipcarve::rng::SeededRng;
use mipcarve::Volume;

fn main() {
    let base = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let cfg = NetConfig { base_channels: base, ..Default::default() };
    let mut rng = SeededRng::new(1);
    let mut state = NetState::init(cfg, &mut rng).unwrap();
    let net = state.network().unwrap();
    let adam: AdamConfig = TrainConfig::default().adam;
    let x = Volume::from_fn([16, 32, 32], |_| rng.uniform() as f32).unwrap();
    let g = Volume::from_fn([16, 32, 32], |_| rng.range(-1.0, 1.0) as f32 * 1e-4).unwrap();
    let reps = 20;
    let t0 = Instant::now();
    for _ in 0..reps {
        let pass = net.forward(&state.parameters, &x).unwrap();
        let pg = net.backward(&state.parameters, &pass, &g).unwrap();
        let pg: Vec<f64> = pg.into_iter().map(f64::from).collect();
        state.adam_step(&pg, &adam).unwrap();
    }
    let per = t0.elapsed().as_secs_f64() / reps as f64;
    println!("base_channels={base} params={} seconds_per_iteration={per:.4}", net.param_count());
}
