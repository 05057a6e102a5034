//! Residual 3D U-Net on a recording tape with reverse-mode gradients.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::volume::{Dims3, Volume};

use super::kernels::{col2im, im2col, max_pool2, upsample2, upsample2_back, Real, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub in_channels: usize,
    pub base_channels: usize,
    /// Resolutions; `levels - 1` pooling steps.
    pub levels: usize,
    pub kernel: usize,
    pub residual_blocks: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { in_channels: 1, base_channels: 8, levels: 3, kernel: 3, residual_blocks: 1 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.in_channels == 0 || self.base_channels == 0 || self.residual_blocks == 0 {
            return bad("channel and block counts must be positive");
        }
        if !(1..=6).contains(&self.levels) {
            return bad("levels must lie in 1..=6");
        }
        if self.kernel % 2 == 0 {
            return bad("kernel size must be odd");
        }
        Ok(())
    }

    /// Every input extent must be a multiple of this.
    pub fn divisor(&self) -> usize {
        1 << (self.levels - 1)
    }

    pub fn check_input(&self, dims: Dims3) -> Result<()> {
        let f = self.divisor();
        if dims.iter().any(|&d| d % f != 0) {
            return Err(Error::NotDivisible { dims, factor: f });
        }
        Ok(())
    }
}

/// Location of one convolution's weights and bias in the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
    /// Followed directly by a ReLU.
    pub rectified: bool,
}

impl ConvLayer {
    pub fn fan_in(&self) -> usize {
        self.cin * self.k * self.k * self.k
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.fan_in()
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    config: NetConfig,
    layers: Vec<ConvLayer>,
    param_count: usize,
}

struct Builder {
    layers: Vec<ConvLayer>,
    next: usize,
}

impl Builder {
    fn conv(&mut self, name: String, cin: usize, cout: usize, k: usize, rectified: bool) -> usize {
        let weight_offset = self.next;
        let bias_offset = weight_offset + cout * cin * k * k * k;
        self.next = bias_offset + cout;
        self.layers.push(ConvLayer { name, cin, cout, k, weight_offset, bias_offset, rectified });
        self.layers.len() - 1
    }
}

impl Network {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let k = config.kernel;
        let width = |l: usize| config.base_channels << l;
        let mut b = Builder { layers: Vec::new(), next: 0 };
        // The layer order here is the order `forward` consumes them in.
        let mut cin = config.in_channels;
        for l in 0..config.levels {
            b.conv(format!("enc{l}.entry"), cin, width(l), k, true);
            for r in 0..config.residual_blocks {
                b.conv(format!("enc{l}.res{r}.a"), width(l), width(l), k, true);
                b.conv(format!("enc{l}.res{r}.b"), width(l), width(l), k, false);
            }
            cin = width(l);
        }
        for l in (0..config.levels - 1).rev() {
            b.conv(format!("dec{l}.up"), width(l + 1), width(l), 1, false);
            b.conv(format!("dec{l}.fuse"), 2 * width(l), width(l), k, true);
            for r in 0..config.residual_blocks {
                b.conv(format!("dec{l}.res{r}.a"), width(l), width(l), k, true);
                b.conv(format!("dec{l}.res{r}.b"), width(l), width(l), k, false);
            }
        }
        b.conv("head".into(), width(0), 1, 1, false);
        Ok(Network { config, layers: b.layers, param_count: b.next })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Uniform fan-in scaled weights (`sqrt(6 / fan_in)` bound before a ReLU,
    /// `sqrt(3 / fan_in)` otherwise) and zero biases, drawn layer by layer.
    pub fn init_params(&self, rng: &mut SeededRng) -> Vec<f32> {
        let mut p = vec![0.0f32; self.param_count];
        for layer in &self.layers {
            let gain = if layer.rectified { 6.0 } else { 3.0 };
            let bound = (gain / layer.fan_in() as f64).sqrt();
            for w in &mut p[layer.weight_offset..layer.weight_offset + layer.weight_len()] {
                *w = rng.range(-bound, bound) as f32;
            }
        }
        p
    }

    /// Runs the network on a single-channel volume, recording what the
    /// backward pass needs.
    pub fn forward<R: Real>(&self, params: &[R], input: &Volume<R>) -> Result<Pass<R>> {
        self.run(params, input, true)
    }

    /// Forward evaluation that keeps no unfolded inputs; much lighter on
    /// memory for whole volumes, but cannot be differentiated.
    pub fn infer<R: Real>(&self, params: &[R], input: &Volume<R>) -> Result<Volume<R>> {
        self.run(params, input, false)?.output()
    }

    fn run<R: Real>(&self, params: &[R], input: &Volume<R>, record: bool) -> Result<Pass<R>> {
        if params.len() != self.param_count {
            return Err(Error::ShapeMismatch(format!("{} parameters, network needs {}", params.len(), self.param_count)));
        }
        if self.config.in_channels != 1 {
            return Err(Error::InvalidConfig("volume input requires in_channels = 1".into()));
        }
        self.config.check_input(input.dims())?;
        let mut t = Tape { nodes: Vec::new(), params, layers: &self.layers, col: Vec::new(), record };
        let levels = self.config.levels;
        let mut layer = 0usize;
        let mut next_layer = || {
            layer += 1;
            layer - 1
        };

        let mut h = t.push(1, input.dims(), input.data().to_vec(), Op::Leaf);
        let mut skips = Vec::with_capacity(levels);
        for l in 0..levels {
            let e = t.conv(h, next_layer());
            h = t.relu(e);
            for _ in 0..self.config.residual_blocks {
                h = residual(&mut t, h, next_layer(), next_layer());
            }
            if l + 1 < levels {
                skips.push(h);
                h = t.pool(h);
            }
        }
        for _ in (0..levels - 1).rev() {
            let skip = skips.pop().expect("one skip per pooled level");
            let u = t.upsample(h);
            let u = t.conv(u, next_layer());
            let cat = t.concat(u, skip);
            let f = t.conv(cat, next_layer());
            h = t.relu(f);
            for _ in 0..self.config.residual_blocks {
                h = residual(&mut t, h, next_layer(), next_layer());
            }
        }
        let logits = t.conv(h, next_layer());
        let out = t.sigmoid(logits);
        Ok(Pass { nodes: t.nodes, cols: t.col, output: out, param_count: self.param_count, recorded: record })
    }

    /// Parameter gradient of a loss whose gradient with respect to the
    /// network output is `grad_out`.
    pub fn backward<R: Real>(&self, params: &[R], pass: &Pass<R>, grad_out: &Volume<R>) -> Result<Vec<R>> {
        pass.backward(&self.layers, params, grad_out)
    }

}

fn residual<R: Real>(t: &mut Tape<'_, R>, x: usize, a: usize, b: usize) -> usize {
    let h = t.conv(x, a);
    let h = t.relu(h);
    let h = t.conv(h, b);
    let s = t.add(h, x);
    t.relu(s)
}

enum Op {
    Leaf,
    /// `col` indexes the stored unfolded input; `None` for 1x1 kernels.
    Conv { x: usize, layer: usize, col: Option<usize> },
    Relu(usize),
    Add(usize, usize),
    Pool { x: usize, arg: Vec<u32> },
    Upsample(usize),
    Concat(usize, usize),
    Sigmoid(usize),
}

struct Node<R> {
    c: usize,
    dims: Shape,
    value: Vec<R>,
    op: Op,
}

struct Tape<'a, R> {
    nodes: Vec<Node<R>>,
    params: &'a [R],
    layers: &'a [ConvLayer],
    col: Vec<Vec<R>>,
    record: bool,
}

impl<R: Real> Tape<'_, R> {
    fn push(&mut self, c: usize, dims: Shape, value: Vec<R>, op: Op) -> usize {
        self.nodes.push(Node { c, dims, value, op });
        self.nodes.len() - 1
    }

    fn conv(&mut self, x: usize, layer: usize) -> usize {
        let l = &self.layers[layer];
        let node = &self.nodes[x];
        debug_assert_eq!(node.c, l.cin);
        let dims = node.dims;
        let n = dims.iter().product::<usize>();
        let kk = l.fan_in();
        let w = &self.params[l.weight_offset..l.weight_offset + l.weight_len()];
        let bias = &self.params[l.bias_offset..l.bias_offset + l.cout];
        let mut out = Vec::with_capacity(l.cout * n);
        for &b in bias {
            out.extend(std::iter::repeat(b).take(n));
        }
        let col = if l.k == 1 {
            R::gemm(l.cout, kk, n, R::one(), (w, kk as isize, 1), (&node.value, n as isize, 1), R::one(), (&mut out, n as isize, 1));
            None
        } else {
            let mut col = Vec::new();
            im2col(&node.value, l.cin, dims, l.k, &mut col);
            R::gemm(l.cout, kk, n, R::one(), (w, kk as isize, 1), (&col, n as isize, 1), R::one(), (&mut out, n as isize, 1));
            if self.record {
                self.col.push(col);
                Some(self.col.len() - 1)
            } else {
                None
            }
        };
        let cout = l.cout;
        self.push(cout, dims, out, Op::Conv { x, layer, col })
    }

    fn relu(&mut self, x: usize) -> usize {
        let n = &self.nodes[x];
        let v = n.value.iter().map(|&v| v.max(R::zero())).collect();
        let (c, d) = (n.c, n.dims);
        self.push(c, d, v, Op::Relu(x))
    }

    fn add(&mut self, a: usize, b: usize) -> usize {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        debug_assert_eq!((na.c, na.dims), (nb.c, nb.dims));
        let v = na.value.iter().zip(&nb.value).map(|(&x, &y)| x + y).collect();
        let (c, d) = (na.c, na.dims);
        self.push(c, d, v, Op::Add(a, b))
    }

    fn pool(&mut self, x: usize) -> usize {
        let n = &self.nodes[x];
        let (v, arg) = max_pool2(&n.value, n.c, n.dims);
        let (c, d) = (n.c, n.dims.map(|e| e / 2));
        self.push(c, d, v, Op::Pool { x, arg })
    }

    fn upsample(&mut self, x: usize) -> usize {
        let n = &self.nodes[x];
        let v = upsample2(&n.value, n.c, n.dims);
        let (c, d) = (n.c, n.dims.map(|e| e * 2));
        self.push(c, d, v, Op::Upsample(x))
    }

    fn concat(&mut self, a: usize, b: usize) -> usize {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        debug_assert_eq!(na.dims, nb.dims);
        let mut v = Vec::with_capacity(na.value.len() + nb.value.len());
        v.extend_from_slice(&na.value);
        v.extend_from_slice(&nb.value);
        let (c, d) = (na.c + nb.c, na.dims);
        self.push(c, d, v, Op::Concat(a, b))
    }

    fn sigmoid(&mut self, x: usize) -> usize {
        let n = &self.nodes[x];
        let one = R::one();
        let v = n.value.iter().map(|&z| one / (one + (-z).exp())).collect();
        let (c, d) = (n.c, n.dims);
        self.push(c, d, v, Op::Sigmoid(x))
    }
}

/// A recorded forward evaluation.
pub struct Pass<R> {
    nodes: Vec<Node<R>>,
    cols: Vec<Vec<R>>,
    output: usize,
    param_count: usize,
    recorded: bool,
}

fn slot<R: Real>(grads: &mut [Vec<R>], id: usize, len: usize) -> &mut Vec<R> {
    let g = &mut grads[id];
    if g.is_empty() {
        g.resize(len, R::zero());
    }
    g
}

fn accumulate<R: Real>(grads: &mut [Vec<R>], id: usize, src: impl ExactSizeIterator<Item = R>) {
    let g = slot(grads, id, src.len());
    for (t, v) in g.iter_mut().zip(src) {
        *t = *t + v;
    }
}

impl<R: Real> Pass<R> {
    pub fn output(&self) -> Result<Volume<R>> {
        let n = &self.nodes[self.output];
        Volume::new(n.dims, n.value.clone())
    }

    fn backward(&self, layers: &[ConvLayer], params: &[R], grad_out: &Volume<R>) -> Result<Vec<R>> {
        if !self.recorded {
            return Err(Error::InvalidConfig("pass was run without recording".into()));
        }
        let out = &self.nodes[self.output];
        if grad_out.dims() != out.dims {
            return Err(Error::ShapeMismatch(format!("gradient {:?} vs output {:?}", grad_out.dims(), out.dims)));
        }
        let mut grads: Vec<Vec<R>> = self.nodes.iter().map(|_| Vec::new()).collect();
        grads[self.output] = grad_out.data().to_vec();
        let mut pg = vec![R::zero(); self.param_count];
        for id in (0..=self.output).rev() {
            let g = std::mem::take(&mut grads[id]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                &Op::Conv { x, layer, col } => {
                    let l = &layers[layer];
                    let n: usize = node.dims.iter().product();
                    let kk = l.fan_in();
                    for co in 0..l.cout {
                        let s = g[co * n..(co + 1) * n].iter().fold(R::zero(), |a, &b| a + b);
                        pg[l.bias_offset + co] = pg[l.bias_offset + co] + s;
                    }
                    let input = &self.nodes[x];
                    let unfolded = match col {
                        Some(c) => &self.cols[c],
                        None => &input.value,
                    };
                    let dw = &mut pg[l.weight_offset..l.weight_offset + l.weight_len()];
                    R::gemm(l.cout, n, kk, R::one(), (&g, n as isize, 1), (unfolded, 1, n as isize), R::one(), (dw, kk as isize, 1));
                    if matches!(input.op, Op::Leaf) {
                        continue;
                    }
                    let w = &params[l.weight_offset..l.weight_offset + l.weight_len()];
                    if col.is_none() {
                        let dx = slot(&mut grads, x, input.value.len());
                        R::gemm(kk, l.cout, n, R::one(), (w, 1, kk as isize), (&g, n as isize, 1), R::one(), (dx, n as isize, 1));
                    } else {
                        let mut dcol = vec![R::zero(); kk * n];
                        R::gemm(kk, l.cout, n, R::one(), (w, 1, kk as isize), (&g, n as isize, 1), R::zero(), (&mut dcol, n as isize, 1));
                        let dx = slot(&mut grads, x, input.value.len());
                        col2im(&dcol, l.cin, input.dims, l.k, dx);
                    }
                }
                &Op::Relu(x) => {
                    let it = g.iter().zip(&node.value).map(|(&g, &y)| if y > R::zero() { g } else { R::zero() });
                    accumulate(&mut grads, x, it);
                }
                &Op::Add(a, b) => {
                    accumulate(&mut grads, a, g.iter().copied());
                    accumulate(&mut grads, b, g.iter().copied());
                }
                Op::Pool { x, arg } => {
                    let dx = slot(&mut grads, *x, self.nodes[*x].value.len());
                    for (&i, &v) in arg.iter().zip(&g) {
                        dx[i as usize] = dx[i as usize] + v;
                    }
                }
                &Op::Upsample(x) => {
                    let src = &self.nodes[x];
                    let back = upsample2_back(&g, src.c, src.dims);
                    accumulate(&mut grads, x, back.into_iter());
                }
                &Op::Concat(a, b) => {
                    let split = self.nodes[a].value.len();
                    accumulate(&mut grads, a, g[..split].iter().copied());
                    accumulate(&mut grads, b, g[split..].iter().copied());
                }
                &Op::Sigmoid(x) => {
                    let one = R::one();
                    // Confident outputs give subnormal logit gradients, which are
                    // both meaningless and very slow to push through the GEMMs.
                    let tiny = R::min_positive_value();
                    let it = g.iter().zip(&node.value).map(|(&g, &y)| {
                        let d = g * y * (one - y);
                        if d.abs() < tiny { R::zero() } else { d }
                    });
                    accumulate(&mut grads, x, it);
                }
            }
        }
        Ok(pg)
    }
}
