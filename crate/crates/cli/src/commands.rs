use std::path::Path;

use mipcarve::agree::cross_view_inconsistency;
use mipcarve::annotate::{mips_from_3d_labels, rasterize as rasterize_lines, read_swc, write_swc, LabelSource};
use mipcarve::carve::{build_hull, filter_labels_detailed};
use mipcarve::gradnet::{self, NetConfig, NetState, Supervision, TrainConfig};
use mipcarve::io::{read_container, write_vsg};
use mipcarve::phantom::{generate, PhantomConfig};
use mipcarve::project::mip as project_mip;
use mipcarve::score::{curve_to_csv, PrAccumulator};
use mipcarve::supervise::Normalization;
use mipcarve::{Axis, Error, MipAnnotationSet};

use crate::dataset::{file_name, load_dir, mip_name};
use crate::{pgm, ConsistencyArgs, EvalArgs, Failure, FilterArgs, HullArgs, MipArgs, MipSetArgs, RasterizeArgs, SynthArgs, TrainArgs};

type CmdResult = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Error::from(e).into())
}

fn parse_axes(spec: &str) -> Result<Vec<Axis>, Failure> {
    if spec == "all" {
        return Ok(Axis::ALL.to_vec());
    }
    spec.parse::<usize>()
        .ok()
        .and_then(Axis::from_index)
        .map(|a| vec![a])
        .ok_or_else(|| Failure::usage(format!("--axis must be 0, 1, 2 or all, got {spec:?}")))
}

fn dims3(v: &[usize]) -> [usize; 3] {
    [v[0], v[1], v[2]]
}

fn load_set(args: &MipSetArgs) -> Result<MipAnnotationSet, Failure> {
    let entries = args
        .mips
        .iter()
        .map(|p| read_container(p)?.into_label_image())
        .collect::<mipcarve::Result<Vec<_>>>()?;
    Ok(MipAnnotationSet::from_images(entries, args.ray_len)?)
}

pub fn mip(a: MipArgs) -> CmdResult {
    let axes = parse_axes(&a.axis)?;
    let vol = read_container(&a.input)?.into_scalar_volume()?;
    for axis in axes {
        let (img, _) = project_mip(&vol, axis);
        write_vsg(mip_name(&a.out, axis), &img)?;
        if a.preview {
            pgm::write(format!("{}_mip{}.pgm", a.out, axis.index()), &img).map_err(Error::from)?;
        }
    }
    Ok(())
}

pub fn hull(a: HullArgs) -> CmdResult {
    let set = load_set(&a.set)?;
    let hull = build_hull(&set)?;
    write_vsg(&a.out, &hull)?;
    println!("hull_voxels={}", hull.data().iter().filter(|&&v| v).count());
    Ok(())
}

pub fn filter(a: FilterArgs) -> CmdResult {
    let set = load_set(&a.set)?;
    let outcome = filter_labels_detailed(&set)?;
    for (entry, removed) in outcome.filtered.entries().iter().zip(&outcome.removed) {
        let axis = entry.axis().expect("tagged");
        write_vsg(mip_name(&a.out_prefix, axis), entry)?;
        println!("removed_axis{}={}", axis.index(), removed.count());
    }
    println!("removed_total={}", outcome.removed_count());
    Ok(())
}

pub fn rasterize(a: RasterizeArgs) -> CmdResult {
    let lines = read_swc(&a.swc)?;
    let dims = dims3(&a.dims);
    let labels = rasterize_lines(&lines, dims, a.width)?;
    write_vsg(&a.out, &labels)?;
    if let Some(prefix) = &a.mips_prefix {
        let set = mips_from_3d_labels(LabelSource::Labels(&labels), &Axis::ALL, a.width)?;
        for e in set.entries() {
            write_vsg(mip_name(prefix, e.axis().expect("tagged")), e)?;
        }
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> CmdResult {
    let base = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(Error::from)?;
            PhantomConfig::parse(&text)?
        }
        None => PhantomConfig::default(),
    };
    if a.count == 0 {
        return Err(Failure::usage("--count must be at least 1"));
    }
    for i in 0..a.count {
        let (cfg, prefix) = if a.count == 1 {
            (base.clone(), a.out_prefix.clone())
        } else {
            (PhantomConfig { rng_seed: base.rng_seed + i as u64, ..base.clone() }, format!("{}-{i:03}", a.out_prefix))
        };
        let p = generate(&cfg)?;
        write_vsg(file_name(&prefix, "volume"), &p.volume)?;
        write_swc(format!("{prefix}_centerlines.swc"), &p.centerlines)?;
        if a.labels {
            let labels = rasterize_lines(&p.centerlines, cfg.dims, a.width)?;
            write_vsg(file_name(&prefix, "labels"), &labels)?;
            let set = mips_from_3d_labels(LabelSource::Labels(&labels), &Axis::ALL, a.width)?;
            for e in set.entries() {
                write_vsg(mip_name(&prefix, e.axis().expect("tagged")), e)?;
            }
        }
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> CmdResult {
    let supervision: Supervision = a.supervision.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    if a.threads != 1 {
        return Err(Failure::usage("only --threads 1 is supported"));
    }
    let normalization = match a.normalization.as_str() {
        "mean" => Normalization::MeanOverLabeled,
        "sum" => Normalization::Sum,
        other => return Err(Failure::usage(format!("--normalization must be mean or sum, got {other:?}"))),
    };
    let mut tc = TrainConfig { iterations: a.iters, normalization, ..TrainConfig::desk(supervision, a.seed) };
    if let Some(lr) = a.lr {
        tc.adam.learning_rate = lr;
    }
    if let Some(c) = &a.crop {
        tc.crop_size = dims3(c);
    }
    let net = NetConfig { base_channels: a.base_channels, ..Default::default() };
    let data = load_dir(&a.data)?;
    let log_every = a.log_every;
    let mut window = 0.0;
    let outcome = gradnet::train(&data, &tc, net, |it, loss| {
        if log_every > 0 {
            window += loss;
            if it % log_every == 0 {
                eprintln!("iter={it} mean_loss={:.6}", window / log_every as f64);
                window = 0.0;
            }
        }
    })?;
    outcome.state.write(&a.out)?;
    if let Some(trace) = &a.trace {
        write_text(trace, &outcome.trace_csv())?;
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let state = NetState::read(&a.net)?;
    let vol = read_container(&a.input)?.into_scalar_volume()?;
    let labels = read_container(&a.labels)?.into_label_volume()?;
    vol.same_dims(&labels)?;
    let pred = gradnet::predict(&state, &vol)?;
    let mut acc = PrAccumulator::new(a.thresholds)?;
    acc.add_volume(&pred, &labels)?;
    let (best, curve) = acc.finish();
    write_text(&a.out, &curve_to_csv(&best, &curve))?;
    if let Some(p) = &a.pred_out {
        write_vsg(p, &pred.map(|v| v as f32))?;
    }
    println!("best_f1={} threshold={} precision={} recall={}", best.f1, best.threshold, best.precision, best.recall);
    Ok(())
}

pub fn consistency(a: ConsistencyArgs) -> CmdResult {
    let set = load_set(&a.set)?;
    let curve = cross_view_inconsistency(&set, a.dmax)?;
    write_text(&a.out, &curve.to_csv())
}
