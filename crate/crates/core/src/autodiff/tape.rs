//! Define-by-run tape with the fixed primitive set the models use.
//!
//! Every primitive pushes one node holding its forward value. `backward`
//! walks the nodes in reverse push order, which is a reverse topological
//! order because a node can only reference earlier nodes. Loops run in a
//! fixed order so results are bit-identical across runs.

use super::{ParamId, ParamSet, Real, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Geometry of a square-kernel 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_len(&self, input: usize, kernel: usize) -> usize {
        (input + 2 * self.pad - kernel) / self.stride + 1
    }
}

#[derive(Debug, Clone)]
enum Op<F> {
    Input,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    Square(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Var),
    LogSumExp(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Reshape(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeom },
}

impl<F> Op<F> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Square(_) => "square",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Sum(_) => "sum",
            Op::LogSumExp(_) => "logsumexp",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Reshape(_) => "reshape",
            Op::Linear { .. } => "linear",
            Op::Conv2d { .. } => "conv2d",
        }
    }
}

#[derive(Debug, Clone)]
struct Node<F> {
    shape: Vec<usize>,
    value: Vec<F>,
    op: Op<F>,
}

/// Recorded forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> F {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<F>, op: Op<F>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    fn mismatch(&self, op: &'static str, detail: String) -> TensorError {
        TensorError::ShapeMismatch {
            index: self.nodes.len(),
            op,
            detail,
        }
    }

    /// Records a constant input tensor.
    pub fn input(&mut self, shape: &[usize], value: Vec<F>) -> Result<Var, TensorError> {
        let len: usize = shape.iter().product();
        if len != value.len() {
            return Err(self.mismatch(
                "input",
                format!("shape {shape:?} needs {len} values, got {}", value.len()),
            ));
        }
        Ok(self.push(shape.to_vec(), value, Op::Input))
    }

    pub fn constant(&mut self, v: F) -> Var {
        self.push(vec![1], vec![v], Op::Input)
    }

    /// Records a parameter leaf; `backward` accumulates into its gradient.
    pub fn param(&mut self, params: &ParamSet<F>, id: ParamId) -> Var {
        let p = params.get(id);
        self.push(p.shape.clone(), p.value.clone(), Op::Param(id))
    }

    /// Binds every parameter of `params` in registration order.
    pub fn bind_all(&mut self, params: &ParamSet<F>) -> Vec<Var> {
        (0..params.len()).map(|i| self.param(params, ParamId(i))).collect()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(self.mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_map(&mut self, op: Op<F>, a: Var, b: Var, f: impl Fn(F, F) -> F) -> Result<Var, TensorError> {
        self.same_shape(op.name(), a, b)?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, value, op))
    }

    fn map(&mut self, op: Op<F>, a: Var, f: impl Fn(F) -> F) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_map(Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_map(Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_map(Op::Mul(a, b), a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        self.map(Op::Scale(a, c), a, |x| x * c)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(Op::Square(a), a, |x| x * x)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(Op::Relu(a), a, |x| if x > F::zero() { x } else { F::zero() })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(Op::Tanh(a), a, |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(Op::Sigmoid(a), a, sigmoid)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let mut acc = F::zero();
        for &x in self.value(a) {
            acc = acc + x;
        }
        self.push(vec![1], vec![acc], Op::Sum(a))
    }

    /// `ln(sum(exp(a)))`, shifted by the maximum for stability.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var, TensorError> {
        let xs = self.value(a);
        if xs.is_empty() {
            return Err(self.mismatch("logsumexp", "empty input".into()));
        }
        let max = xs.iter().copied().fold(F::neg_infinity(), F::max);
        let mut acc = F::zero();
        for &x in xs {
            acc = acc + (x - max).exp();
        }
        let out = max + acc.ln();
        Ok(self.push(vec![1], vec![out], Op::LogSumExp(a)))
    }

    /// Concatenates flattened inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        if parts.is_empty() {
            return Err(self.mismatch("concat", "no inputs".into()));
        }
        let mut value = Vec::new();
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        let n = value.len();
        Ok(self.push(vec![n], value, Op::Concat(parts.to_vec())))
    }

    /// Contiguous slice `[start, start + len)` of the flattened input.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let n = self.value(src).len();
        if start + len > n || len == 0 {
            return Err(self.mismatch("slice", format!("[{start}, {}) of {n}", start + len)));
        }
        let value = self.value(src)[start..start + len].to_vec();
        Ok(self.push(vec![len], value, Op::Slice { src, start }))
    }

    pub fn reshape(&mut self, src: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let n = self.value(src).len();
        if shape.iter().product::<usize>() != n {
            return Err(self.mismatch("reshape", format!("{n} elements into {shape:?}")));
        }
        let value = self.value(src).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape(src)))
    }

    /// `w · x + b` for a vector `x` of length `in`, `w` of shape `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let ws = self.shape(w).to_vec();
        let n_in = self.value(x).len();
        if ws.len() != 2 || ws[1] != n_in {
            return Err(self.mismatch("linear", format!("weight {ws:?} with input of {n_in}")));
        }
        let n_out = ws[0];
        if let Some(b) = b {
            if self.value(b).len() != n_out {
                return Err(self.mismatch("linear", format!("bias of {} for {n_out} outputs", self.value(b).len())));
            }
        }
        let xs = self.value(x);
        let wv = self.value(w);
        let mut out = match b {
            Some(b) => self.value(b).to_vec(),
            None => vec![F::zero(); n_out],
        };
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &wv[o * n_in..(o + 1) * n_in];
            let mut s = F::zero();
            for (wi, xi) in row.iter().zip(xs) {
                s = s + *wi * *xi;
            }
            *acc = *acc + s;
        }
        Ok(self.push(vec![n_out], out, Op::Linear { x, w, b }))
    }

    /// 2-D convolution of `x: [C, H, W]` with `w: [O, C, k, k]` and `b: [O]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, geom: ConvGeom) -> Result<Var, TensorError> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] || ws[2] != ws[3] {
            return Err(self.mismatch("conv2d", format!("input {xs:?} with kernel {ws:?}")));
        }
        if self.value(b).len() != ws[0] {
            return Err(self.mismatch(
                "conv2d",
                format!("bias of {} for {} channels", self.value(b).len(), ws[0]),
            ));
        }
        if xs[1] + 2 * geom.pad < ws[2] || xs[2] + 2 * geom.pad < ws[2] || geom.stride == 0 {
            return Err(self.mismatch("conv2d", format!("kernel {} too large for {xs:?}", ws[2])));
        }
        let dims = ConvDims::new(&xs, &ws, geom);
        let mut out = vec![F::zero(); dims.out_ch * dims.oh * dims.ow];
        conv_forward(&dims, self.value(x), self.value(w), self.value(b), &mut out);
        Ok(self.push(vec![dims.out_ch, dims.oh, dims.ow], out, Op::Conv2d { x, w, b, geom }))
    }

    /// Reverse pass from a scalar `loss`. Parameter gradients are added to
    /// the gradient buffers in `params` (not overwritten).
    pub fn backward(&self, loss: Var, params: &mut ParamSet<F>) -> Result<(), TensorError> {
        let len = self.value(loss).len();
        if len != 1 {
            return Err(TensorError::NotScalar { len });
        }
        let mut grads: Vec<Vec<F>> = vec![Vec::new(); loss.0 + 1];
        grads[loss.0] = vec![F::one()];

        for i in (0..=loss.0).rev() {
            if grads[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let p = params.get_mut(*id);
                    for (acc, gi) in p.grad.iter_mut().zip(&g) {
                        *acc = *acc + *gi;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, self.value(*a).len(), |k| g[k]);
                    accumulate(&mut grads, *b, self.value(*b).len(), |k| g[k]);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, self.value(*a).len(), |k| g[k]);
                    accumulate(&mut grads, *b, self.value(*b).len(), |k| -g[k]);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads, *a, va.len(), |k| g[k] * vb[k]);
                    accumulate(&mut grads, *b, vb.len(), |k| g[k] * va[k]);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.len(), |k| g[k] * *c);
                }
                Op::Square(a) => {
                    let va = self.value(*a);
                    let two = F::of(2.0);
                    accumulate(&mut grads, *a, va.len(), |k| g[k] * two * va[k]);
                }
                Op::Relu(a) => {
                    let va = self.value(*a);
                    accumulate(&mut grads, *a, va.len(), |k| {
                        if va[k] > F::zero() {
                            g[k]
                        } else {
                            F::zero()
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    accumulate(&mut grads, *a, y.len(), |k| g[k] * (F::one() - y[k] * y[k]));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    accumulate(&mut grads, *a, y.len(), |k| g[k] * y[k] * (F::one() - y[k]));
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut grads, *a, n, |_| g[0]);
                }
                Op::LogSumExp(a) => {
                    let va = self.value(*a);
                    let out = node.value[0];
                    accumulate(&mut grads, *a, va.len(), |k| g[0] * (va[k] - out).exp());
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        accumulate(&mut grads, p, n, |k| g[offset + k]);
                        offset += n;
                    }
                }
                Op::Slice { src, start } => {
                    let n = self.value(*src).len();
                    let (start, end) = (*start, *start + g.len());
                    accumulate(&mut grads, *src, n, |k| {
                        if k >= start && k < end {
                            g[k - start]
                        } else {
                            F::zero()
                        }
                    });
                }
                Op::Reshape(src) => {
                    accumulate(&mut grads, *src, g.len(), |k| g[k]);
                }
                Op::Linear { x, w, b } => {
                    let (vx, vw) = (self.value(*x), self.value(*w));
                    let n_in = vx.len();
                    let n_out = g.len();
                    let mut gx = vec![F::zero(); n_in];
                    let mut gw = vec![F::zero(); n_out * n_in];
                    for o in 0..n_out {
                        let go = g[o];
                        let row = &vw[o * n_in..(o + 1) * n_in];
                        let grow = &mut gw[o * n_in..(o + 1) * n_in];
                        for k in 0..n_in {
                            gx[k] = gx[k] + go * row[k];
                            grow[k] = go * vx[k];
                        }
                    }
                    add_into(&mut grads, *x, gx);
                    add_into(&mut grads, *w, gw);
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, n_out, |k| g[k]);
                    }
                }
                Op::Conv2d { x, w, b, geom } => {
                    let dims = ConvDims::new(self.shape(*x), self.shape(*w), *geom);
                    let mut gx = vec![F::zero(); self.value(*x).len()];
                    let mut gw = vec![F::zero(); self.value(*w).len()];
                    let mut gb = vec![F::zero(); dims.out_ch];
                    conv_backward(&dims, self.value(*x), self.value(*w), &g, &mut gx, &mut gw, &mut gb);
                    add_into(&mut grads, *x, gx);
                    add_into(&mut grads, *w, gw);
                    add_into(&mut grads, *b, gb);
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn accumulate<F: Real>(grads: &mut [Vec<F>], v: Var, n: usize, f: impl Fn(usize) -> F) {
    let slot = &mut grads[v.0];
    if slot.is_empty() {
        *slot = (0..n).map(f).collect();
    } else {
        for (k, s) in slot.iter_mut().enumerate() {
            *s = *s + f(k);
        }
    }
}

fn add_into<F: Real>(grads: &mut [Vec<F>], v: Var, g: Vec<F>) {
    let slot = &mut grads[v.0];
    if slot.is_empty() {
        *slot = g;
    } else {
        for (s, gi) in slot.iter_mut().zip(g) {
            *s = *s + gi;
        }
    }
}

struct ConvDims {
    in_ch: usize,
    h: usize,
    w: usize,
    out_ch: usize,
    k: usize,
    oh: usize,
    ow: usize,
    geom: ConvGeom,
}

impl ConvDims {
    fn new(xs: &[usize], ws: &[usize], geom: ConvGeom) -> Self {
        let k = ws[2];
        Self {
            in_ch: xs[0],
            h: xs[1],
            w: xs[2],
            out_ch: ws[0],
            k,
            oh: geom.out_len(xs[1], k),
            ow: geom.out_len(xs[2], k),
            geom,
        }
    }

    /// Output index range `[lo, hi)` along one axis whose input coordinate
    /// `o * stride + kpos - pad` lies inside `[0, extent)`.
    fn valid_range(&self, kpos: usize, extent: usize, out: usize) -> (usize, usize) {
        let (s, p) = (self.geom.stride, self.geom.pad);
        let lo = if kpos >= p { 0 } else { (p - kpos).div_ceil(s) };
        // largest o with o*s + kpos - p <= extent - 1
        let limit = extent + p - 1;
        let hi = if limit < kpos {
            0
        } else {
            ((limit - kpos) / s + 1).min(out)
        };
        (lo.min(hi), hi)
    }
}

fn conv_forward<F: Real>(d: &ConvDims, x: &[F], w: &[F], b: &[F], out: &mut [F]) {
    let (s, p, k) = (d.geom.stride, d.geom.pad, d.k);
    let plane = d.oh * d.ow;
    for o in 0..d.out_ch {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..d.in_ch {
            let src = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
            for ky in 0..k {
                let (y0, y1) = d.valid_range(ky, d.h, d.oh);
                for kx in 0..k {
                    let wv = w[((o * d.in_ch + c) * k + ky) * k + kx];
                    let (x0, x1) = d.valid_range(kx, d.w, d.ow);
                    for oy in y0..y1 {
                        let iy = oy * s + ky - p;
                        let row = &src[iy * d.w..(iy + 1) * d.w];
                        let drow = &mut dst[oy * d.ow..(oy + 1) * d.ow];
                        for ox in x0..x1 {
                            drow[ox] = drow[ox] + wv * row[ox * s + kx - p];
                        }
                    }
                }
            }
        }
    }
}

fn conv_backward<F: Real>(d: &ConvDims, x: &[F], w: &[F], g: &[F], gx: &mut [F], gw: &mut [F], gb: &mut [F]) {
    let (s, p, k) = (d.geom.stride, d.geom.pad, d.k);
    let plane = d.oh * d.ow;
    for o in 0..d.out_ch {
        let go = &g[o * plane..(o + 1) * plane];
        let mut acc = F::zero();
        for &v in go {
            acc = acc + v;
        }
        gb[o] = gb[o] + acc;
        for c in 0..d.in_ch {
            let base = c * d.h * d.w;
            for ky in 0..k {
                let (y0, y1) = d.valid_range(ky, d.h, d.oh);
                for kx in 0..k {
                    let widx = ((o * d.in_ch + c) * k + ky) * k + kx;
                    let wv = w[widx];
                    let (x0, x1) = d.valid_range(kx, d.w, d.ow);
                    let mut gwv = F::zero();
                    for oy in y0..y1 {
                        let iy = oy * s + ky - p;
                        let row = base + iy * d.w;
                        let grow = &go[oy * d.ow..(oy + 1) * d.ow];
                        for (ox, &g) in grow.iter().enumerate().take(x1).skip(x0) {
                            let ix = row + ox * s + kx - p;
                            gwv = gwv + g * x[ix];
                            gx[ix] = gx[ix] + g * wv;
                        }
                    }
                    gw[widx] = gw[widx] + gwv;
                }
            }
        }
    }
}
