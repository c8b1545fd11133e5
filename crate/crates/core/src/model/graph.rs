//! A small reverse-mode tape over dense matrices.
//!
//! Operations are recorded in execution order; [`Graph::backward`] walks the
//! tape in reverse, accumulating gradients only along nodes that depend on a
//! parameter. The op set is exactly what the encoder needs.

use crate::linalg::{Matrix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Node id; positions in the vector returned by [`Graph::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    MatMulBt(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Film { x: usize, gamma: usize, beta: usize },
    Gelu(usize),
    LayerNorm { x: usize, gain: usize, bias: usize, xhat: Matrix<T>, rstd: Vec<T> },
    Softmax { x: usize, scale: T },
    SliceCols { x: usize, start: usize },
    ConcatCols(Vec<usize>),
    BceLogits { logits: usize, labels: Vec<T> },
}

pub struct Graph<T: Scalar> {
    values: Vec<Matrix<T>>,
    ops: Vec<Op<T>>,
    needs_grad: Vec<bool>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let u = T::from_f64_lossy(GELU_C) * (x + T::from_f64_lossy(GELU_K) * x * x * x);
    half * x * (T::one() + u.tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let c = T::from_f64_lossy(GELU_C);
    let k = T::from_f64_lossy(GELU_K);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::from_f64_lossy(3.0) * k * x * x)
}

/// Numerically stable `softplus(z) - y z`, the per-row BCE on logits.
pub fn bce_with_logit<T: Scalar>(z: T, y: T) -> T {
    z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { values: Vec::new(), ops: Vec::new(), needs_grad: Vec::new() }
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.needs_grad.push(needs_grad);
        Var(self.values.len() - 1)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.values[v.0]
    }

    pub fn take_value(&mut self, v: Var) -> Matrix<T> {
        std::mem::take(&mut self.values[v.0])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn ng(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.needs_grad[i])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.values[a.0].matmul(&self.values[b.0]);
        let ng = self.ng(&[a.0, b.0]);
        self.push(v, Op::MatMul(a.0, b.0), ng)
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let v = self.values[a.0].matmul_bt(&self.values[b.0]);
        let ng = self.ng(&[a.0, b.0]);
        self.push(v, Op::MatMulBt(a.0, b.0), ng)
    }

    /// `x W + b` with `b` a `1 × n` row broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_bias(xw, b)
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let mut v = self.values[a.0].clone();
        let b = &self.values[bias.0];
        assert_eq!(b.shape(), (1, v.cols()), "bias must be a 1 x cols row");
        for r in 0..v.rows() {
            for (o, &bb) in v.row_mut(r).iter_mut().zip(b.as_slice()) {
                *o = *o + bb;
            }
        }
        let ng = self.ng(&[a.0, bias.0]);
        self.push(v, Op::AddBias(a.0, bias.0), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.values[a.0].clone();
        v.add_assign(&self.values[b.0]);
        let ng = self.ng(&[a.0, b.0]);
        self.push(v, Op::Add(a.0, b.0), ng)
    }

    /// `x ⊙ (1 + gamma) + beta`.
    pub fn film(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let v = film_apply(&self.values[x.0], &self.values[gamma.0], &self.values[beta.0]);
        let ng = self.ng(&[x.0, gamma.0, beta.0]);
        self.push(v, Op::Film { x: x.0, gamma: gamma.0, beta: beta.0 }, ng)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.values[x.0].map(gelu);
        let ng = self.ng(&[x.0]);
        self.push(v, Op::Gelu(x.0), ng)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Var {
        let xv = &self.values[x.0];
        let (n, d) = xv.shape();
        let dn = T::from_usize(d).expect("width");
        let mut xhat = Matrix::zeros(n, d);
        let mut rstd = Vec::with_capacity(n);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let rs = T::one() / (var + eps).sqrt();
            for (o, &v) in xhat.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * rs;
            }
            rstd.push(rs);
        }
        let g = self.values[gain.0].as_slice();
        let b = self.values[bias.0].as_slice();
        let mut out = xhat.clone();
        for r in 0..n {
            for ((o, &gg), &bb) in out.row_mut(r).iter_mut().zip(g).zip(b) {
                *o = *o * gg + bb;
            }
        }
        let ng = self.ng(&[x.0, gain.0, bias.0]);
        self.push(out, Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0, xhat, rstd }, ng)
    }

    /// Row-wise `softmax(scale * x)`.
    pub fn softmax_rows(&mut self, x: Var, scale: T) -> Var {
        let v = softmax_rows(&self.values[x.0], scale);
        let ng = self.ng(&[x.0]);
        self.push(v, Op::Softmax { x: x.0, scale }, ng)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = &self.values[x.0];
        let v = Matrix::from_fn(xv.rows(), len, |r, c| xv.get(r, start + c));
        let ng = self.ng(&[x.0]);
        self.push(v, Op::SliceCols { x: x.0, start }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.values[parts[0].0].rows();
        let width: usize = parts.iter().map(|p| self.values[p.0].cols()).sum();
        let mut v = Matrix::zeros(rows, width);
        let mut off = 0;
        for p in parts {
            let pv = &self.values[p.0];
            assert_eq!(pv.rows(), rows);
            for r in 0..rows {
                v.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
            }
            off += pv.cols();
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let ng = self.ng(&ids);
        self.push(v, Op::ConcatCols(ids), ng)
    }

    /// Mean binary cross-entropy of an `n × 1` logit column against `labels`.
    pub fn bce_logits(&mut self, logits: Var, labels: &[T]) -> Var {
        let z = &self.values[logits.0];
        assert_eq!(z.len(), labels.len(), "one label per logit");
        let n = T::from_usize(labels.len().max(1)).expect("count");
        let loss = z.as_slice().iter().zip(labels).map(|(&z, &y)| bce_with_logit(z, y)).sum::<T>() / n;
        let ng = self.ng(&[logits.0]);
        self.push(Matrix::filled(1, 1, loss), Op::BceLogits { logits: logits.0, labels: labels.to_vec() }, ng)
    }

    /// Reverse pass from a scalar node; returns the gradient of every node
    /// that depends on a parameter (`None` elsewhere).
    pub fn backward(&self, root: Var) -> Vec<Option<Matrix<T>>> {
        assert_eq!(self.values[root.0].shape(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.values.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::filled(1, 1, T::one()));
        for i in (0..=root.0).rev() {
            if !self.needs_grad[i] {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Leaf => {
                    grads[i] = Some(dy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.needs_grad[*a] {
                        dy.matmul_bt_acc(&self.values[*b], self.slot(&mut grads, *a));
                    }
                    if self.needs_grad[*b] {
                        self.values[*a].matmul_at_acc(&dy, self.slot(&mut grads, *b));
                    }
                }
                Op::MatMulBt(a, b) => {
                    if self.needs_grad[*a] {
                        dy.matmul_acc(&self.values[*b], self.slot(&mut grads, *a));
                    }
                    if self.needs_grad[*b] {
                        dy.matmul_at_acc(&self.values[*a], self.slot(&mut grads, *b));
                    }
                }
                Op::AddBias(a, b) => {
                    if self.needs_grad[*b] {
                        let g = self.slot(&mut grads, *b);
                        for r in 0..dy.rows() {
                            for (o, &d) in g.as_mut_slice().iter_mut().zip(dy.row(r)) {
                                *o = *o + d;
                            }
                        }
                    }
                    if self.needs_grad[*a] {
                        self.slot(&mut grads, *a).add_assign(&dy);
                    }
                }
                Op::Add(a, b) => {
                    for k in [*a, *b] {
                        if self.needs_grad[k] {
                            self.slot(&mut grads, k).add_assign(&dy);
                        }
                    }
                }
                Op::Film { x, gamma, beta } => {
                    let (xv, gv) = (&self.values[*x], &self.values[*gamma]);
                    if self.needs_grad[*x] {
                        let g = self.slot(&mut grads, *x);
                        for ((o, &d), &gg) in g.as_mut_slice().iter_mut().zip(dy.as_slice()).zip(gv.as_slice()) {
                            *o = *o + d * (T::one() + gg);
                        }
                    }
                    if self.needs_grad[*gamma] {
                        let g = self.slot(&mut grads, *gamma);
                        for ((o, &d), &xx) in g.as_mut_slice().iter_mut().zip(dy.as_slice()).zip(xv.as_slice()) {
                            *o = *o + d * xx;
                        }
                    }
                    if self.needs_grad[*beta] {
                        self.slot(&mut grads, *beta).add_assign(&dy);
                    }
                }
                Op::Gelu(x) => {
                    let xv = &self.values[*x];
                    let g = self.slot(&mut grads, *x);
                    for ((o, &d), &xx) in g.as_mut_slice().iter_mut().zip(dy.as_slice()).zip(xv.as_slice()) {
                        *o = *o + d * gelu_grad(xx);
                    }
                }
                Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                    let (n, d) = dy.shape();
                    let gv = self.values[*gain].as_slice();
                    if self.needs_grad[*gain] {
                        let g = self.slot(&mut grads, *gain);
                        for r in 0..n {
                            for ((o, &dd), &xh) in g.as_mut_slice().iter_mut().zip(dy.row(r)).zip(xhat.row(r)) {
                                *o = *o + dd * xh;
                            }
                        }
                    }
                    if self.needs_grad[*bias] {
                        let g = self.slot(&mut grads, *bias);
                        for r in 0..n {
                            for (o, &dd) in g.as_mut_slice().iter_mut().zip(dy.row(r)) {
                                *o = *o + dd;
                            }
                        }
                    }
                    if self.needs_grad[*x] {
                        let dn = T::from_usize(d).expect("width");
                        let g = self.slot(&mut grads, *x);
                        let mut dxhat = vec![T::zero(); d];
                        for r in 0..n {
                            let (mut s1, mut s2) = (T::zero(), T::zero());
                            for c in 0..d {
                                dxhat[c] = dy.get(r, c) * gv[c];
                                s1 = s1 + dxhat[c];
                                s2 = s2 + dxhat[c] * xhat.get(r, c);
                            }
                            let k = rstd[r] / dn;
                            for (c, o) in g.row_mut(r).iter_mut().enumerate() {
                                *o = *o + k * (dn * dxhat[c] - s1 - xhat.get(r, c) * s2);
                            }
                        }
                    }
                }
                Op::Softmax { x, scale } => {
                    let y = &self.values[i];
                    let g = self.slot(&mut grads, *x);
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let dr = dy.row(r);
                        let dot = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum::<T>();
                        for ((o, &yy), &dd) in g.row_mut(r).iter_mut().zip(yr).zip(dr) {
                            *o = *o + *scale * yy * (dd - dot);
                        }
                    }
                }
                Op::SliceCols { x, start } => {
                    let g = self.slot(&mut grads, *x);
                    for r in 0..dy.rows() {
                        for (o, &d) in g.row_mut(r)[*start..*start + dy.cols()].iter_mut().zip(dy.row(r)) {
                            *o = *o + d;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.values[p].cols();
                        if self.needs_grad[p] {
                            let g = self.slot(&mut grads, p);
                            for r in 0..dy.rows() {
                                for (o, &d) in g.row_mut(r).iter_mut().zip(&dy.row(r)[off..off + w]) {
                                    *o = *o + d;
                                }
                            }
                        }
                        off += w;
                    }
                }
                Op::BceLogits { logits, labels } => {
                    let z = &self.values[*logits];
                    let n = T::from_usize(labels.len().max(1)).expect("count");
                    let scale = dy.get(0, 0) / n;
                    let g = self.slot(&mut grads, *logits);
                    for ((o, &zz), &y) in g.as_mut_slice().iter_mut().zip(z.as_slice()).zip(labels) {
                        *o = *o + scale * (sigmoid(zz) - y);
                    }
                }
            }
        }
        grads
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Matrix<T>>], i: usize) -> &'a mut Matrix<T> {
        let (r, c) = self.values[i].shape();
        grads[i].get_or_insert_with(|| Matrix::zeros(r, c))
    }
}

pub fn film_apply<T: Scalar>(x: &Matrix<T>, gamma: &Matrix<T>, beta: &Matrix<T>) -> Matrix<T> {
    assert_eq!(x.shape(), gamma.shape(), "FiLM scale must match the embedding");
    assert_eq!(x.shape(), beta.shape(), "FiLM shift must match the embedding");
    let mut out = x.clone();
    for ((o, &g), &b) in out.as_mut_slice().iter_mut().zip(gamma.as_slice()).zip(beta.as_slice()) {
        *o = *o * (T::one() + g) + b;
    }
    out
}

pub fn softmax_rows<T: Scalar>(x: &Matrix<T>, scale: T) -> Matrix<T> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b * scale));
        let mut s = T::zero();
        for v in row.iter_mut() {
            *v = (*v * scale - m).exp();
            s = s + *v;
        }
        for v in row.iter_mut() {
            *v = *v / s;
        }
    }
    out
}
