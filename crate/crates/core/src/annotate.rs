//! Centerline annotations: SWC-subset parsing, rasterization into ternary
//! labels with an ignore margin, and projection annotations derived from 3D
//! ground truth.
//!
//! SWC coordinates map directly onto voxel indices: `x -> i`, `y -> j`,
//! `z -> k`, with voxel centers at integer positions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::project::{check_axes, project_labels_any};
use crate::volume::{Axis, BinaryImage, Dims3, Image, Label, LabelImage, LabelVolume, MipAnnotationSet, Volume};

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 3]>,
    /// Per-point radius, carried through I/O but not used for labeling.
    pub radii: Option<Vec<f64>>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Polyline { points, radii: None }
    }

    /// Consecutive point pairs; a single point yields one degenerate segment.
    pub fn segments(&self) -> impl Iterator<Item = ([f64; 3], [f64; 3])> + '_ {
        let single = (self.points.len() == 1).then(|| (self.points[0], self.points[0]));
        single.into_iter().chain(self.points.windows(2).map(|w| (w[0], w[1])))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CenterlineSet {
    pub polylines: Vec<Polyline>,
}

impl CenterlineSet {
    pub fn len(&self) -> usize {
        self.polylines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }
}

struct SwcNode {
    id: i64,
    point: [f64; 3],
    radius: f64,
    parent: i64,
}

fn parse_swc_line(line: &str, lineno: usize) -> Result<Option<SwcNode>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let fields: Vec<&str> = content.split_whitespace().collect();
    if fields.len() != 7 {
        return Err(Error::Parse { line: lineno, msg: format!("expected 7 fields, found {}", fields.len()) });
    }
    let int = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse { line: lineno, msg: format!("{s:?}: {e}") });
    let real = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse { line: lineno, msg: format!("invalid number {s:?}") })
    };
    int(fields[1])?;
    Ok(Some(SwcNode {
        id: int(fields[0])?,
        point: [real(fields[2])?, real(fields[3])?, real(fields[4])?],
        radius: real(fields[5])?,
        parent: int(fields[6])?,
    }))
}

/// Parses `id type x y z radius parent` lines. Parent chains become
/// polylines; each branch after the first starts a new polyline at its
/// branching point.
pub fn parse_swc(text: &str) -> Result<CenterlineSet> {
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(node) = parse_swc_line(line, n + 1)? {
            if index.insert(node.id, nodes.len()).is_some() {
                return Err(Error::Parse { line: n + 1, msg: format!("duplicate id {}", node.id) });
            }
            nodes.push((n + 1, node));
        }
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut roots = Vec::new();
    for (n, (lineno, node)) in nodes.iter().enumerate() {
        if node.parent < 0 {
            roots.push(n);
        } else {
            let &p = index.get(&node.parent).ok_or_else(|| Error::Parse {
                line: *lineno,
                msg: format!("parent {} of node {} does not exist", node.parent, node.id),
            })?;
            children[p].push(n);
        }
    }

    let mut polylines = Vec::new();
    let mut visited = vec![false; nodes.len()];
    // (start node of a polyline, optional node it branches from)
    let mut stack: Vec<(usize, Option<usize>)> = roots.iter().rev().map(|&r| (r, None)).collect();
    while let Some((start, from)) = stack.pop() {
        let mut pts = Vec::new();
        let mut radii = Vec::new();
        if let Some(f) = from {
            pts.push(nodes[f].1.point);
            radii.push(nodes[f].1.radius);
        }
        let mut cur = start;
        loop {
            visited[cur] = true;
            pts.push(nodes[cur].1.point);
            radii.push(nodes[cur].1.radius);
            let kids = &children[cur];
            for &extra in kids.iter().skip(1).rev() {
                stack.push((extra, Some(cur)));
            }
            match kids.first() {
                Some(&next) => cur = next,
                None => break,
            }
        }
        polylines.push(Polyline { points: pts, radii: Some(radii) });
    }
    if let Some(n) = visited.iter().position(|v| !v) {
        return Err(Error::Parse { line: nodes[n].0, msg: "node is part of a parent cycle".into() });
    }
    Ok(CenterlineSet { polylines })
}

pub fn read_swc(path: impl AsRef<Path>) -> Result<CenterlineSet> {
    parse_swc(&fs::read_to_string(path)?)
}

/// Serializes each polyline as its own parent chain (type 0).
pub fn format_swc(lines: &CenterlineSet) -> String {
    let mut out = String::from("# id type x y z radius parent\n");
    let mut id = 1i64;
    for pl in &lines.polylines {
        let mut parent = -1i64;
        for (n, p) in pl.points.iter().enumerate() {
            let r = pl.radii.as_ref().and_then(|r| r.get(n)).copied().unwrap_or(1.0);
            writeln!(out, "{id} 0 {} {} {} {r} {parent}", p[0], p[1], p[2]).unwrap();
            parent = id;
            id += 1;
        }
    }
    out
}

pub fn write_swc(path: impl AsRef<Path>, lines: &CenterlineSet) -> Result<()> {
    fs::write(path, format_swc(lines))?;
    Ok(())
}

/// Squared distance from `p` to the segment `a..b` in any dimension.
pub fn segment_dist2<const N: usize>(p: [f64; N], a: [f64; N], b: [f64; N]) -> f64 {
    let mut ab2 = 0.0;
    let mut dot = 0.0;
    for n in 0..N {
        let ab = b[n] - a[n];
        ab2 += ab * ab;
        dot += (p[n] - a[n]) * ab;
    }
    let t = if ab2 > 0.0 { (dot / ab2).clamp(0.0, 1.0) } else { 0.0 };
    (0..N).map(|n| (p[n] - (a[n] + t * (b[n] - a[n]))).powi(2)).sum()
}

/// Integer grid walk between the rounded endpoints (N-dimensional Bresenham).
pub fn bresenham<const N: usize>(a: [f64; N], b: [f64; N]) -> Vec<[i64; N]> {
    let start: [i64; N] = std::array::from_fn(|n| a[n].round() as i64);
    let end: [i64; N] = std::array::from_fn(|n| b[n].round() as i64);
    let delta: [i64; N] = std::array::from_fn(|n| (end[n] - start[n]).abs());
    let step: [i64; N] = std::array::from_fn(|n| (end[n] - start[n]).signum());
    let (major, &len) = delta.iter().enumerate().max_by_key(|&(n, d)| (*d, std::cmp::Reverse(n))).unwrap();
    let mut err: [i64; N] = [len / 2; N];
    let mut cur = start;
    let mut out = Vec::with_capacity(len as usize + 1);
    out.push(cur);
    for _ in 0..len {
        cur[major] += step[major];
        for n in 0..N {
            if n == major {
                continue;
            }
            err[n] -= delta[n];
            if err[n] < 0 {
                err[n] += len;
                cur[n] += step[n];
            }
        }
        out.push(cur);
    }
    out
}

fn check_width(margin_width: usize) -> Result<f64> {
    if margin_width == 0 || margin_width % 2 == 0 {
        return Err(Error::InvalidConfig(format!("margin width must be odd and positive, got {margin_width}")));
    }
    Ok(((margin_width - 1) / 2) as f64)
}

/// Shared N-dimensional rasterizer over a dense label buffer.
fn rasterize_segments<const N: usize>(
    dims: [usize; N],
    segments: impl Iterator<Item = ([f64; N], [f64; N])>,
    radius: f64,
    labels: &mut [Label],
) {
    let offset = |v: [usize; N]| v.iter().zip(dims.iter()).fold(0, |acc, (&x, &d)| acc * d + x);
    let reach = radius.max(0.5);
    for (a, b) in segments {
        for p in bresenham(a, b) {
            if p.iter().zip(dims.iter()).all(|(&x, &d)| x >= 0 && (x as usize) < d) {
                labels[offset(std::array::from_fn(|n| p[n] as usize))] = Label::Foreground;
            }
        }
        let lo: [i64; N] = std::array::from_fn(|n| (a[n].min(b[n]) - reach).ceil().max(0.0) as i64);
        let hi: [i64; N] = std::array::from_fn(|n| (a[n].max(b[n]) + reach).floor().min(dims[n] as f64 - 1.0) as i64);
        if (0..N).any(|n| lo[n] > hi[n]) {
            continue;
        }
        let mut cur = lo;
        'walk: loop {
            let p: [f64; N] = std::array::from_fn(|n| cur[n] as f64);
            let d2 = segment_dist2(p, a, b);
            let o = offset(std::array::from_fn(|n| cur[n] as usize));
            if d2 <= 0.25 {
                labels[o] = Label::Foreground;
            } else if d2 <= radius * radius && labels[o] == Label::Background {
                labels[o] = Label::Ignore;
            }
            let mut n = N;
            loop {
                if n == 0 {
                    break 'walk;
                }
                n -= 1;
                if cur[n] < hi[n] {
                    cur[n] += 1;
                    break;
                }
                cur[n] = lo[n];
            }
        }
    }
}

/// Foreground along each segment (grid walk plus every voxel within half a
/// voxel), ignore within `(margin_width - 1) / 2` voxels, background elsewhere.
pub fn rasterize(lines: &CenterlineSet, dims: Dims3, margin_width: usize) -> Result<LabelVolume> {
    let radius = check_width(margin_width)?;
    let mut vol = LabelVolume::filled(dims, Label::Background)?;
    let segs = lines.polylines.iter().flat_map(|pl| pl.segments().collect::<Vec<_>>());
    rasterize_segments(dims, segs, radius, vol.data_mut());
    Ok(vol)
}

pub type Polyline2 = Vec<[f64; 2]>;

/// Two-dimensional counterpart of [`rasterize`] for annotations drawn
/// directly on a projection.
pub fn rasterize_mip(lines: &[Polyline2], dims: [usize; 2], margin_width: usize, axis: Axis) -> Result<LabelImage> {
    let radius = check_width(margin_width)?;
    let mut img = Image::filled(Some(axis), dims, Label::Background)?;
    let segs = lines.iter().flat_map(|pl| {
        let single = (pl.len() == 1).then(|| (pl[0], pl[0]));
        single.into_iter().chain(pl.windows(2).map(|w| (w[0], w[1]))).collect::<Vec<_>>()
    });
    rasterize_segments(dims, segs, radius, img.data_mut());
    Ok(img)
}

/// Disk offsets `(da, db)` with `da^2 + db^2 <= r^2`.
pub fn disk_offsets(radius: f64) -> Vec<(i64, i64)> {
    let r = radius.floor() as i64;
    let mut out = Vec::new();
    for da in -r..=r {
        for db in -r..=r {
            if ((da * da + db * db) as f64) <= radius * radius {
                out.push((da, db));
            }
        }
    }
    out
}

/// Binary dilation by a Euclidean disk.
pub fn dilate_disk(img: &BinaryImage, radius: f64) -> BinaryImage {
    if radius <= 0.0 {
        return img.clone();
    }
    let offs = disk_offsets(radius);
    let [da, db] = img.dims();
    let mut out = img.map(|_| false);
    for a in 0..da {
        for b in 0..db {
            if !img.get(a, b) {
                continue;
            }
            for &(oa, ob) in &offs {
                let (x, y) = (a as i64 + oa, b as i64 + ob);
                if x >= 0 && y >= 0 && (x as usize) < da && (y as usize) < db {
                    out.set(x as usize, y as usize, true);
                }
            }
        }
    }
    out
}

/// Ternary annotation from a thin foreground mask: ignore within the margin
/// radius of any foreground pixel.
pub fn with_ignore_margin(fg: &BinaryImage, margin_width: usize) -> Result<LabelImage> {
    let radius = check_width(margin_width)?;
    let near = dilate_disk(fg, radius);
    let mut out = fg.map(|f| if f { Label::Foreground } else { Label::Background });
    for (l, &n) in out.data_mut().iter_mut().zip(near.data()) {
        if *l == Label::Background && n {
            *l = Label::Ignore;
        }
    }
    Ok(out)
}

pub enum LabelSource<'a> {
    Labels(&'a LabelVolume),
    Centerlines(&'a CenterlineSet, Dims3),
}

/// Projection annotations derived from 3D ground truth: the foreground is
/// projected existentially, then the ignore margin is drawn in 2D.
pub fn mips_from_3d_labels(source: LabelSource<'_>, axes: &[Axis], margin_width: usize) -> Result<MipAnnotationSet> {
    check_axes(axes)?;
    check_width(margin_width)?;
    let thin;
    let labels = match source {
        LabelSource::Labels(lv) => lv,
        LabelSource::Centerlines(lines, dims) => {
            thin = rasterize(lines, dims, 1)?;
            &thin
        }
    };
    let entries = axes
        .iter()
        .map(|&axis| with_ignore_margin(&project_labels_any(labels, axis, &[Label::Foreground]), margin_width))
        .collect::<Result<Vec<_>>>()?;
    MipAnnotationSet::new(labels.dims(), entries)
}

/// Foreground mask of a label volume.
pub fn foreground(lv: &LabelVolume) -> Volume<bool> {
    lv.map(|l| l == Label::Foreground)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_set(p: [f64; 3]) -> CenterlineSet {
        CenterlineSet { polylines: vec![Polyline::new(vec![p])] }
    }

    #[test]
    fn swc_chain_and_comments() {
        let set = parse_swc("1 0 0 0 0 1 -1\n2 0 3 0 0 1 1\n").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.polylines[0].points, vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        assert!(parse_swc("# only a comment\n\n   # another\n").unwrap().is_empty());
    }

    #[test]
    fn swc_errors() {
        assert!(matches!(parse_swc("1 0 0 0 0 1 -1\n2 0 1 1 1 1 5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_swc("1 0 0 0 1 -1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_swc("1 0 a 0 0 1 -1\n").is_err());
        assert!(parse_swc("1 0 0 0 0 1 2\n2 0 0 0 0 1 1\n").is_err());
    }

    #[test]
    fn swc_branches_and_orphans() {
        let text = "1 0 0 0 0 1 -1\n2 0 1 0 0 1 1\n3 0 2 0 0 1 2\n4 0 1 1 0 1 2\n5 0 9 9 9 1 -1\n";
        let set = parse_swc(text).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.polylines[0].points.len(), 3);
        assert_eq!(set.polylines[1].points, vec![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]);
        assert_eq!(set.polylines[2].points, vec![[9.0, 9.0, 9.0]]);
    }

    #[test]
    fn swc_format_roundtrip() {
        let set = CenterlineSet {
            polylines: vec![
                Polyline { points: vec![[0.5, 1.0, 2.0], [3.0, 4.0, 5.25]], radii: Some(vec![1.5, 2.0]) },
                Polyline { points: vec![[7.0, 7.0, 7.0]], radii: Some(vec![1.0]) },
            ],
        };
        assert_eq!(parse_swc(&format_swc(&set)).unwrap(), set);
    }

    #[test]
    fn point_with_width_11() {
        let dims = [6, 8, 5];
        let lv = rasterize(&point_set([2.0, 3.0, 1.0]), dims, 11).unwrap();
        for i in 0..6 {
            for j in 0..8 {
                for k in 0..5 {
                    let d2 = (i as f64 - 2.0).powi(2) + (j as f64 - 3.0).powi(2) + (k as f64 - 1.0).powi(2);
                    let want = if d2 == 0.0 {
                        Label::Foreground
                    } else if d2 <= 25.0 {
                        Label::Ignore
                    } else {
                        Label::Background
                    };
                    assert_eq!(lv.get([i, j, k]), want, "{:?}", [i, j, k]);
                }
            }
        }
    }

    #[test]
    fn width_one_has_no_margin() {
        let lv = rasterize(&point_set([1.0, 1.0, 1.0]), [3, 3, 3], 1).unwrap();
        assert_eq!(lv.count(Label::Foreground), 1);
        assert_eq!(lv.count(Label::Ignore), 0);
        assert!(rasterize(&point_set([1.0, 1.0, 1.0]), [3, 3, 3], 4).is_err());
    }

    #[test]
    fn axis_aligned_segment() {
        let set = CenterlineSet { polylines: vec![Polyline::new(vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]])] };
        let lv = rasterize(&set, [5, 2, 2], 1).unwrap();
        for i in 0..5 {
            assert_eq!(lv.get([i, 0, 0]) == Label::Foreground, i <= 3);
        }
        assert_eq!(lv.count(Label::Foreground), 4);
    }

    #[test]
    fn bresenham_is_connected() {
        let path = bresenham([0.0, 0.0, 0.0], [7.0, -3.0, 5.0]);
        assert_eq!(path.first(), Some(&[0, 0, 0]));
        assert_eq!(path.last(), Some(&[7, -3, 5]));
        for w in path.windows(2) {
            assert!((0..3).all(|n| (w[1][n] - w[0][n]).abs() <= 1));
        }
    }

    #[test]
    fn mip_point_width_7() {
        let img = rasterize_mip(&[vec![[4.0, 4.0]]], [9, 9], 7, Axis::Axis2).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                let d2 = (a as f64 - 4.0).powi(2) + (b as f64 - 4.0).powi(2);
                let want = if d2 == 0.0 {
                    Label::Foreground
                } else if d2 <= 9.0 {
                    Label::Ignore
                } else {
                    Label::Background
                };
                assert_eq!(img.get(a, b), want);
            }
        }
    }

    #[test]
    fn mip_empty_and_duplicates() {
        let empty = rasterize_mip(&[], [4, 5], 3, Axis::Axis0).unwrap();
        assert_eq!(empty.count(Label::Background), 20);
        let line = vec![[0.0, 0.0], [3.0, 4.0]];
        let once = rasterize_mip(&[line.clone()], [4, 5], 3, Axis::Axis0).unwrap();
        let twice = rasterize_mip(&[line.clone(), line], [4, 5], 3, Axis::Axis0).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn single_voxel_projections() {
        let mut lv = LabelVolume::filled([3, 4, 5], Label::Background).unwrap();
        lv.set([1, 2, 3], Label::Foreground);
        let set = mips_from_3d_labels(LabelSource::Labels(&lv), &Axis::ALL, 1).unwrap();
        let fg: Vec<Vec<(usize, usize)>> = set
            .entries()
            .iter()
            .map(|e| {
                let [da, db] = e.dims();
                (0..da).flat_map(|a| (0..db).map(move |b| (a, b))).filter(|&(a, b)| e.get(a, b) == Label::Foreground).collect()
            })
            .collect();
        assert_eq!(fg, vec![vec![(2, 3)], vec![(1, 3)], vec![(1, 2)]]);
    }

    #[test]
    fn empty_volume_projects_to_background() {
        let lv = LabelVolume::filled([3, 4, 5], Label::Background).unwrap();
        let set = mips_from_3d_labels(LabelSource::Labels(&lv), &Axis::ALL, 5).unwrap();
        assert!(set.entries().iter().all(|e| e.count(Label::Background) == e.data().len()));
    }

    #[test]
    fn straight_tube_projects_to_lines() {
        // Tube along axis 2 at (i, j) = (2, 3), k from 1 to 6.
        let set = CenterlineSet { polylines: vec![Polyline::new(vec![[2.0, 3.0, 1.0], [2.0, 3.0, 6.0]])] };
        let dims = [5, 6, 8];
        let mips = mips_from_3d_labels(LabelSource::Centerlines(&set, dims), &Axis::ALL, 3).unwrap();
        let e0 = mips.get(Axis::Axis0).unwrap();
        let e1 = mips.get(Axis::Axis1).unwrap();
        let e2 = mips.get(Axis::Axis2).unwrap();
        for k in 0..8 {
            assert_eq!(e0.get(3, k) == Label::Foreground, (1..=6).contains(&k));
            assert_eq!(e1.get(2, k) == Label::Foreground, (1..=6).contains(&k));
        }
        assert_eq!(e2.count(Label::Foreground), 1);
        assert_eq!(e2.get(2, 3), Label::Foreground);
        assert_eq!(e2.get(2, 4), Label::Ignore);
        assert_eq!(e2.get(3, 4), Label::Background);
    }
}
