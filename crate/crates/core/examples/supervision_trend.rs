//! Trains one network per supervision mode on the phantom suite and prints
//! the pooled max F1 of each.
//!
//! `cargo run --release --example supervision_trend [iterations] [seed=N] [modes...]`

use std::time::Instant;

use mipcarve::gradnet::{NetConfig, Supervision};
use mipcarve::suite::{build_suite, run, SuiteConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut seed = 7;
    let mut modes: Vec<String> = Vec::new();
    for a in args {
        match a.strip_prefix("seed=") {
            Some(s) => seed = s.parse().expect("seed"),
            None => modes.push(a),
        }
    }
    if modes.is_empty() {
        modes = ["3d", "mip:012", "mip:01", "mip:0", "slices:0:3"].map(String::from).to_vec();
    }
    let suite = build_suite(&SuiteConfig::default()).expect("suite");
    for m in modes {
        let sup: Supervision = m.parse().expect("supervision");
        let t0 = Instant::now();
        let r = run(&suite, sup, iterations, seed, NetConfig::default()).expect("run");
        let tail = &r.outcome.losses[r.outcome.losses.len().saturating_sub(100)..];
        println!(
            "{m:<12} max_f1={:.4} threshold={:.3} p={:.3} r={:.3} final_loss={:.4} seconds={:.0}",
            r.best.f1,
            r.best.threshold,
            r.best.precision,
            r.best.recall,
            tail.iter().sum::<f64>() / tail.len() as f64,
            t0.elapsed().as_secs_f64()
        );
    }
}
