//! Dense kernels on channel-major `(c, d0, d1, d2)` buffers.

use std::fmt::Debug;

use num_traits::Float;

/// Scalar type the network can run in: `f32` for training, `f64` for
/// gradient checks.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `C = alpha * A B + beta * C` with `A: m x k`, `B: k x n`, `C: m x n`
    /// given as (row stride, column stride).
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: (&[Self], isize, isize), b: (&[Self], isize, isize), beta: Self, c: (&mut [Self], isize, isize));
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
        assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: (&[Self], isize, isize), b: (&[Self], isize, isize), beta: Self, c: (&mut [Self], isize, isize)) {
                check_extent(a.0.len(), m, k, a.1, a.2);
                check_extent(b.0.len(), k, n, b.1, b.2);
                check_extent(c.0.len(), m, n, c.1, c.2);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every operand was bounds-checked for its shape and strides above.
                unsafe { $gemm(m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta, c.0.as_mut_ptr(), c.1, c.2) }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// While alive, treats subnormal floats as zero on x86-64 (MXCSR FTZ and
/// DAZ); a no-op elsewhere. Tiny gradients otherwise slow training several
/// fold. The previous mode is restored on drop.
pub struct FlushSubnormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushSubnormals {
    #[allow(deprecated)]
    pub fn new() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            use std::arch::x86_64::{_mm_getcsr, _mm_setcsr};
            // SAFETY: only the FTZ (bit 15) and DAZ (bit 6) flags change.
            let saved = unsafe { _mm_getcsr() };
            unsafe { _mm_setcsr(saved | 0x8040) };
            FlushSubnormals { saved }
        }
        #[cfg(not(target_arch = "x86_64"))]
        FlushSubnormals {}
    }
}

impl Default for FlushSubnormals {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for FlushSubnormals {
    #[allow(deprecated)]
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the control word read in `new`.
        unsafe {
            std::arch::x86_64::_mm_setcsr(self.saved)
        }
    }
}

pub type Shape = [usize; 3];

fn voxels(s: Shape) -> usize {
    s[0] * s[1] * s[2]
}

/// Unfolds a zero-padded `k^3` neighbourhood: row `(ci, oz, oy, ox)` of the
/// result holds the input shifted by `(oz, oy, ox) - k / 2` for every voxel.
pub fn im2col<R: Real>(x: &[R], c: usize, s: Shape, k: usize, col: &mut Vec<R>) {
    let n = voxels(s);
    let r = (k / 2) as isize;
    col.clear();
    col.resize(c * k * k * k * n, R::zero());
    let mut row = 0;
    for ci in 0..c {
        let src = &x[ci * n..(ci + 1) * n];
        for oz in -r..=r {
            for oy in -r..=r {
                for ox in -r..=r {
                    let dst = &mut col[row * n..(row + 1) * n];
                    shift_copy(src, dst, s, [oz, oy, ox]);
                    row += 1;
                }
            }
        }
    }
}

/// `dst[z, y, x] = src[z + o0, y + o1, x + o2]`, zero outside; `dst` must be zeroed.
fn shift_copy<R: Real>(src: &[R], dst: &mut [R], s: Shape, o: [isize; 3]) {
    let (x0, x1) = overlap(s[2], o[2]);
    if x0 >= x1 {
        return;
    }
    let (z0, z1) = overlap(s[0], o[0]);
    let (y0, y1) = overlap(s[1], o[1]);
    for z in z0..z1 {
        let sz = (z as isize + o[0]) as usize;
        for y in y0..y1 {
            let sy = (y as isize + o[1]) as usize;
            let d = (z * s[1] + y) * s[2];
            let sbase = (sz * s[1] + sy) * s[2];
            let sx0 = (x0 as isize + o[2]) as usize;
            dst[d + x0..d + x1].copy_from_slice(&src[sbase + sx0..sbase + sx0 + (x1 - x0)]);
        }
    }
}

/// Output index range whose shifted source index stays inside `0..len`.
fn overlap(len: usize, o: isize) -> (usize, usize) {
    let lo = (-o).max(0) as usize;
    let hi = (len as isize - o).min(len as isize).max(0) as usize;
    (lo.min(hi), hi)
}

/// Adjoint of `im2col`: accumulates the columns back onto `dx`.
pub fn col2im<R: Real>(col: &[R], c: usize, s: Shape, k: usize, dx: &mut [R]) {
    let n = voxels(s);
    let r = (k / 2) as isize;
    let mut row = 0;
    for ci in 0..c {
        let dst = &mut dx[ci * n..(ci + 1) * n];
        for oz in -r..=r {
            for oy in -r..=r {
                for ox in -r..=r {
                    let src = &col[row * n..(row + 1) * n];
                    shift_add_back(src, dst, s, [oz, oy, ox]);
                    row += 1;
                }
            }
        }
    }
}

fn shift_add_back<R: Real>(src: &[R], dst: &mut [R], s: Shape, o: [isize; 3]) {
    let (x0, x1) = overlap(s[2], o[2]);
    if x0 >= x1 {
        return;
    }
    let (z0, z1) = overlap(s[0], o[0]);
    let (y0, y1) = overlap(s[1], o[1]);
    for z in z0..z1 {
        let sz = (z as isize + o[0]) as usize;
        for y in y0..y1 {
            let sy = (y as isize + o[1]) as usize;
            let d = (z * s[1] + y) * s[2];
            let sbase = (sz * s[1] + sy) * s[2];
            let sx0 = (x0 as isize + o[2]) as usize;
            for (t, &v) in dst[sbase + sx0..sbase + sx0 + (x1 - x0)].iter_mut().zip(&src[d + x0..d + x1]) {
                *t = *t + v;
            }
        }
    }
}

/// 2x2x2 max pooling; ties keep the first element in `(z, y, x)` order.
/// Returns the pooled values and, per output, the flat input index chosen.
pub fn max_pool2<R: Real>(x: &[R], c: usize, s: Shape) -> (Vec<R>, Vec<u32>) {
    let o = [s[0] / 2, s[1] / 2, s[2] / 2];
    let n_in = voxels(s);
    let mut out = Vec::with_capacity(c * voxels(o));
    let mut arg = Vec::with_capacity(c * voxels(o));
    for ci in 0..c {
        let base = ci * n_in;
        for z in 0..o[0] {
            for y in 0..o[1] {
                for xx in 0..o[2] {
                    let mut best = usize::MAX;
                    let mut bv = R::neg_infinity();
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let idx = base + ((2 * z + dz) * s[1] + 2 * y + dy) * s[2] + 2 * xx + dx;
                                if best == usize::MAX || x[idx] > bv {
                                    best = idx;
                                    bv = x[idx];
                                }
                            }
                        }
                    }
                    out.push(bv);
                    arg.push(best as u32);
                }
            }
        }
    }
    (out, arg)
}

/// Nearest-neighbour 2x upsampling of a `(c, s)` buffer.
pub fn upsample2<R: Real>(x: &[R], c: usize, s: Shape) -> Vec<R> {
    let o = [2 * s[0], 2 * s[1], 2 * s[2]];
    let mut out = Vec::with_capacity(c * voxels(o));
    for ci in 0..c {
        for z in 0..o[0] {
            for y in 0..o[1] {
                let row = ci * voxels(s) + ((z / 2) * s[1] + y / 2) * s[2];
                for xx in 0..o[2] {
                    out.push(x[row + xx / 2]);
                }
            }
        }
    }
    out
}

/// Adjoint of `upsample2`: sums each 2x2x2 block; `s` is the coarse shape.
pub fn upsample2_back<R: Real>(g: &[R], c: usize, s: Shape) -> Vec<R> {
    let o = [2 * s[0], 2 * s[1], 2 * s[2]];
    let mut out = vec![R::zero(); c * voxels(s)];
    for ci in 0..c {
        for z in 0..o[0] {
            for y in 0..o[1] {
                let row = ci * voxels(s) + ((z / 2) * s[1] + y / 2) * s[2];
                let src = ci * voxels(o) + (z * o[1] + y) * o[2];
                for xx in 0..o[2] {
                    out[row + xx / 2] = out[row + xx / 2] + g[src + xx];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], c: usize, s: Shape, k: usize, w: &[f64], cout: usize) -> Vec<f64> {
        let r = (k / 2) as isize;
        let n = voxels(s);
        let mut out = vec![0.0; cout * n];
        for co in 0..cout {
            for z in 0..s[0] as isize {
                for y in 0..s[1] as isize {
                    for xx in 0..s[2] as isize {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for oz in -r..=r {
                                for oy in -r..=r {
                                    for ox in -r..=r {
                                        let (sz, sy, sx) = (z + oz, y + oy, xx + ox);
                                        if sz < 0 || sy < 0 || sx < 0 || sz >= s[0] as isize || sy >= s[1] as isize || sx >= s[2] as isize {
                                            continue;
                                        }
                                        let wi = (((co * c + ci) * k + (oz + r) as usize) * k + (oy + r) as usize) * k + (ox + r) as usize;
                                        acc += w[wi] * x[ci * n + ((sz as usize * s[1]) + sy as usize) * s[2] + sx as usize];
                                    }
                                }
                            }
                        }
                        out[co * n + ((z as usize * s[1]) + y as usize) * s[2] + xx as usize] = acc;
                    }
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut r = crate::rng::SeededRng::new(seed);
        (0..n).map(|_| r.range(-1.0, 1.0)).collect()
    }

    #[test]
    fn im2col_gemm_matches_direct_convolution() {
        let (c, cout, k, s) = (2, 3, 3, [3, 4, 5]);
        let n = voxels(s);
        let x = pseudo(c * n, 1);
        let w = pseudo(cout * c * 27, 2);
        let mut col = Vec::new();
        im2col(&x, c, s, k, &mut col);
        let mut out = vec![0.0; cout * n];
        let kk = c * 27;
        f64::gemm(cout, kk, n, 1.0, (&w, kk as isize, 1), (&col, n as isize, 1), 0.0, (&mut out, n as isize, 1));
        let want = naive_conv(&x, c, s, k, &w, cout);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let (c, k, s) = (2, 3, [2, 3, 4]);
        let n = voxels(s);
        let x = pseudo(c * n, 3);
        let g = pseudo(c * 27 * n, 4);
        let mut col = Vec::new();
        im2col(&x, c, s, k, &mut col);
        let lhs: f64 = col.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut dx = vec![0.0; c * n];
        col2im(&g, c, s, k, &mut dx);
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn pooling_and_upsampling() {
        let s = [2, 2, 4];
        let x: Vec<f64> = vec![1., 5., 0., 0., 2., 2., 0., 0., 3., 5., 0., 0., 4., 0., 0., 0.];
        let (p, arg) = max_pool2(&x, 1, s);
        assert_eq!(p, vec![5.0, 0.0]);
        // first maximum wins; all-zero block picks its first element
        assert_eq!(arg, vec![1, 2]);
        let up = upsample2(&[1.0, 2.0], 2, [1, 1, 1]);
        assert_eq!(up.len(), 16);
        assert!(up[..8].iter().all(|&v| v == 1.0) && up[8..].iter().all(|&v| v == 2.0));
        let g = pseudo(2 * 8, 5);
        let back = upsample2_back(&g, 2, [1, 1, 1]);
        assert!((back[0] - g[..8].iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn strided_gemm_transposes() {
        // A^T B with A stored row-major 2x3
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0];
        let mut c = [0.0; 6];
        f64::gemm(3, 2, 2, 1.0, (&a, 1, 3), (&b, 2, 1), 0.0, (&mut c, 2, 1));
        assert_eq!(c, [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
