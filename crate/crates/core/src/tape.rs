//! Reverse-mode automatic differentiation over batched 2-D arrays.
//!
//! Every node holds a `B x m` matrix of `f64`. Scalars are `1 x 1`, row
//! vectors `1 x m`, and batches stack along the first axis. A training step
//! builds a fresh [`Tape`], binds parameters as leaves, composes the loss
//! graph, and calls [`Tape::backward`] on a scalar root. Gradients are then
//! read per leaf.
//!
//! The instruction set is intentionally small: dense matmul plus the
//! elementwise/broadcast/reduction ops the models need, and three fused ops
//! for the logic gates' Kronecker branch (`pairwise_outer`, `conv3x3`,
//! `row_block_mean`).

use ndarray::{Array2, Axis};

pub type Mat = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
#[allow(dead_code)] // payloads are read in backward only for some variants
enum Op {
    Leaf,
    Detach(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    MaxScalar(NodeId, f64),
    AddRow(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Sqrt(NodeId),
    Square(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    SumCols(NodeId),
    MeanCols(NodeId),
    ConcatCols(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatRows(NodeId, NodeId),
    TileRows(NodeId, usize),
    PairwiseOuter(NodeId, NodeId),
    Conv3x3 { grid: NodeId, kernel: NodeId, side: usize },
    RowBlockMean { grid: NodeId, side: usize },
}

pub struct Tape {
    values: Vec<Mat>,
    ops: Vec<Op>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.grads[id.0].as_ref()
    }

    /// Gradient of the root w.r.t. `id`, zeros if the node was never reached.
    pub fn wrt(&self, id: NodeId, shape: (usize, usize)) -> Mat {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => Mat::zeros(shape),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

/// Zero-padded 3x3 correlation of one `side x side` image:
/// `out[i][j] = sum_{p,q} img[i+p-1][j+q-1] * k[p*3+q]`.
fn conv3x3_rows(img: &[f64], out: &mut [f64], side: usize, k: &[f64; 9]) {
    for i in 0..side {
        let out_row = &mut out[i * side..(i + 1) * side];
        out_row.fill(0.0);
        let mid = &img[i * side..(i + 1) * side];
        band_madd(out_row, mid, k[3], k[4], k[5]);
        if i > 0 {
            let up = &img[(i - 1) * side..i * side];
            band_madd(out_row, up, k[0], k[1], k[2]);
        }
        if i + 1 < side {
            let down = &img[(i + 1) * side..(i + 2) * side];
            band_madd(out_row, down, k[6], k[7], k[8]);
        }
    }
}

/// `out[j] += band[j-1]*k0 + band[j]*k1 + band[j+1]*k2` with zero padding.
fn band_madd(out: &mut [f64], band: &[f64], k0: f64, k1: f64, k2: f64) {
    let n = out.len();
    if n == 1 {
        out[0] += band[0] * k1;
        return;
    }
    out[0] += band[0] * k1 + band[1] * k2;
    for j in 1..n - 1 {
        out[j] += band[j - 1] * k0 + band[j] * k1 + band[j + 1] * k2;
    }
    out[n - 1] += band[n - 2] * k0 + band[n - 1] * k1;
}

/// Index range of outputs whose input, shifted by `p - 1`, stays in bounds.
fn clip_range(p: usize, side: usize) -> (usize, usize) {
    match p {
        0 => (1, side),
        1 => (0, side),
        _ => (0, side - 1),
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape { values: Vec::new(), ops: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.values[id.0]
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        let v = &self.values[id.0];
        debug_assert_eq!(v.dim(), (1, 1));
        v[(0, 0)]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.values[id.0].dim()
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        let id = NodeId(self.values.len());
        self.values.push(value);
        self.ops.push(op);
        id
    }

    pub fn leaf(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.leaf(Mat::from_elem((1, 1), value))
    }

    /// Forward identity, backward barrier: no gradient flows past this node.
    pub fn detach(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].clone();
        self.push(v, Op::Detach(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] + &self.values[b.0];
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] - &self.values[b.0];
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] * &self.values[b.0];
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] / &self.values[b.0];
        self.push(v, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(|x| -x);
        self.push(v, Op::Neg(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.values[a.0].mapv(|x| c * x);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.values[a.0].mapv(|x| x + c);
        self.push(v, Op::AddScalar(a, c))
    }

    /// Elementwise `max(a, c)`. Gradient is zero where `a <= c`.
    pub fn max_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.values[a.0].mapv(|x| x.max(c));
        self.push(v, Op::MaxScalar(a, c))
    }

    /// Broadcast-add a `1 x m` row onto a `B x m` matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let r = &self.values[row.0];
        debug_assert_eq!(r.nrows(), 1);
        debug_assert_eq!(r.ncols(), self.values[a.0].ncols());
        let v = &self.values[a.0] + &r.broadcast(self.values[a.0].dim()).unwrap();
        self.push(v, Op::AddRow(a, row))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a.0].dot(&self.values[b.0]);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(f64::ln);
        self.push(v, Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Mat::from_elem((1, 1), self.values[a.0].sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.values[a.0].len() as f64;
        let v = Mat::from_elem((1, 1), self.values[a.0].sum() / n);
        self.push(v, Op::MeanAll(a))
    }

    /// `B x m -> B x 1`, summing each row.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let s = self.values[a.0].sum_axis(Axis(1));
        let b = s.len();
        let v = s.into_shape_with_order((b, 1)).unwrap();
        self.push(v, Op::SumCols(a))
    }

    /// `B x m -> B x 1`, averaging each row.
    pub fn mean_cols(&mut self, a: NodeId) -> NodeId {
        let m = self.values[a.0].ncols() as f64;
        let s = self.values[a.0].sum_axis(Axis(1)).mapv(|x| x / m);
        let b = s.len();
        let v = s.into_shape_with_order((b, 1)).unwrap();
        self.push(v, Op::MeanCols(a))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = &self.values[a.0];
        let vb = &self.values[b.0];
        debug_assert_eq!(va.nrows(), vb.nrows());
        let mut v = Mat::zeros((va.nrows(), va.ncols() + vb.ncols()));
        v.slice_mut(ndarray::s![.., ..va.ncols()]).assign(va);
        v.slice_mut(ndarray::s![.., va.ncols()..]).assign(vb);
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.values[a.0].slice(ndarray::s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = &self.values[a.0];
        let vb = &self.values[b.0];
        debug_assert_eq!(va.ncols(), vb.ncols());
        let mut v = Mat::zeros((va.nrows() + vb.nrows(), va.ncols()));
        v.slice_mut(ndarray::s![..va.nrows(), ..]).assign(va);
        v.slice_mut(ndarray::s![va.nrows().., ..]).assign(vb);
        self.push(v, Op::ConcatRows(a, b))
    }

    /// Repeat a `1 x m` row `n` times into an `n x m` matrix.
    pub fn tile_rows(&mut self, a: NodeId, n: usize) -> NodeId {
        let r = &self.values[a.0];
        debug_assert_eq!(r.nrows(), 1);
        let v = r.broadcast((n, r.ncols())).unwrap().to_owned();
        self.push(v, Op::TileRows(a, n))
    }

    /// Row-wise outer product: `(B x d, B x d) -> B x d^2` where row `b` is
    /// the flattened `d x d` grid `v[b]^T m[b]` in row-major order.
    pub fn pairwise_outer(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = &self.values[a.0];
        let vb = &self.values[b.0];
        debug_assert_eq!(va.dim(), vb.dim());
        let (bsz, d) = va.dim();
        let mut v = Mat::zeros((bsz, d * d));
        for r in 0..bsz {
            let x = va.row(r);
            let x = x.as_slice().unwrap();
            let y = vb.row(r);
            let y = y.as_slice().unwrap();
            let out = v.row_mut(r).into_slice().unwrap();
            for i in 0..d {
                let xi = x[i];
                let seg = &mut out[i * d..(i + 1) * d];
                for (o, yj) in seg.iter_mut().zip(y.iter()) {
                    *o = xi * yj;
                }
            }
        }
        self.push(v, Op::PairwiseOuter(a, b))
    }

    /// Single-channel 3x3 convolution (stride 1, zero padding 1) applied to
    /// each row of `grid` viewed as a `side x side` image. `kernel` is `3 x 3`.
    pub fn conv3x3(&mut self, grid: NodeId, kernel: NodeId, side: usize) -> NodeId {
        let g = &self.values[grid.0];
        let k = &self.values[kernel.0];
        debug_assert_eq!(g.ncols(), side * side);
        debug_assert_eq!(k.dim(), (3, 3));
        let kk: [f64; 9] = std::array::from_fn(|i| k[(i / 3, i % 3)]);
        let bsz = g.nrows();
        let mut out = Mat::zeros((bsz, side * side));
        for b in 0..bsz {
            let img = g.row(b);
            let img = img.as_slice().unwrap();
            let o = out.row_mut(b).into_slice().unwrap();
            conv3x3_rows(img, o, side, &kk);
        }
        self.push(out, Op::Conv3x3 { grid, kernel, side })
    }

    /// `B x side^2 -> B x side`: mean over each grid row.
    pub fn row_block_mean(&mut self, grid: NodeId, side: usize) -> NodeId {
        let g = &self.values[grid.0];
        debug_assert_eq!(g.ncols(), side * side);
        let bsz = g.nrows();
        let mut out = Mat::zeros((bsz, side));
        for b in 0..bsz {
            let img = g.row(b);
            for i in 0..side {
                let mut acc = 0.0;
                for j in 0..side {
                    acc += img[i * side + j];
                }
                out[(b, i)] = acc / side as f64;
            }
        }
        self.push(out, Op::RowBlockMean { grid, side })
    }

    /// Backpropagate from a `1 x 1` root.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert_eq!(self.values[root.0].dim(), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; self.values.len()];
        grads[root.0] = Some(Mat::from_elem((1, 1), 1.0));

        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let add_to = |grads: &mut [Option<Mat>], id: NodeId, delta: Mat| {
            match &mut grads[id.0] {
                Some(acc) => *acc += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.ops[i] {
            Op::Leaf | Op::Detach(_) => {}
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.mapv(|x| -x));
            }
            Op::Mul(a, b) => {
                add_to(grads, *a, g * &self.values[b.0]);
                add_to(grads, *b, g * &self.values[a.0]);
            }
            Op::Div(a, b) => {
                let vb = &self.values[b.0];
                add_to(grads, *a, g / vb);
                let d = -(g * &self.values[i]) / vb;
                add_to(grads, *b, d);
            }
            Op::Neg(a) => add_to(grads, *a, g.mapv(|x| -x)),
            Op::Scale(a, c) => add_to(grads, *a, g.mapv(|x| c * x)),
            Op::AddScalar(a, _) => add_to(grads, *a, g.clone()),
            Op::MaxScalar(a, c) => {
                let mask = self.values[a.0].mapv(|x| if x > *c { 1.0 } else { 0.0 });
                add_to(grads, *a, g * &mask);
            }
            Op::AddRow(a, row) => {
                add_to(grads, *a, g.clone());
                let s = g.sum_axis(Axis(0));
                let m = s.len();
                add_to(grads, *row, s.into_shape_with_order((1, m)).unwrap());
            }
            Op::MatMul(a, b) => {
                add_to(grads, *a, g.dot(&self.values[b.0].t()));
                add_to(grads, *b, self.values[a.0].t().dot(g));
            }
            Op::Transpose(a) => add_to(grads, *a, g.t().to_owned()),
            Op::Relu(a) => {
                let mask = self.values[a.0].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                add_to(grads, *a, g * &mask);
            }
            Op::Tanh(a) => {
                let d = self.values[i].mapv(|y| 1.0 - y * y);
                add_to(grads, *a, g * &d);
            }
            Op::Sigmoid(a) => {
                let d = self.values[i].mapv(|y| y * (1.0 - y));
                add_to(grads, *a, g * &d);
            }
            Op::Softplus(a) => {
                let d = self.values[a.0].mapv(sigmoid);
                add_to(grads, *a, g * &d);
            }
            Op::Exp(a) => add_to(grads, *a, g * &self.values[i]),
            Op::Ln(a) => add_to(grads, *a, g / &self.values[a.0]),
            Op::Sqrt(a) => {
                let d = self.values[i].mapv(|y| 0.5 / y);
                add_to(grads, *a, g * &d);
            }
            Op::Square(a) => {
                let d = self.values[a.0].mapv(|x| 2.0 * x);
                add_to(grads, *a, g * &d);
            }
            Op::SumAll(a) => {
                let v = Mat::from_elem(self.values[a.0].dim(), g[(0, 0)]);
                add_to(grads, *a, v);
            }
            Op::MeanAll(a) => {
                let n = self.values[a.0].len() as f64;
                let v = Mat::from_elem(self.values[a.0].dim(), g[(0, 0)] / n);
                add_to(grads, *a, v);
            }
            Op::SumCols(a) => {
                let dim = self.values[a.0].dim();
                let mut v = Mat::zeros(dim);
                for b in 0..dim.0 {
                    v.row_mut(b).fill(g[(b, 0)]);
                }
                add_to(grads, *a, v);
            }
            Op::MeanCols(a) => {
                let dim = self.values[a.0].dim();
                let m = dim.1 as f64;
                let mut v = Mat::zeros(dim);
                for b in 0..dim.0 {
                    v.row_mut(b).fill(g[(b, 0)] / m);
                }
                add_to(grads, *a, v);
            }
            Op::ConcatCols(a, b) => {
                let na = self.values[a.0].ncols();
                add_to(grads, *a, g.slice(ndarray::s![.., ..na]).to_owned());
                add_to(grads, *b, g.slice(ndarray::s![.., na..]).to_owned());
            }
            Op::SliceCols(a, start, end) => {
                let mut v = Mat::zeros(self.values[a.0].dim());
                v.slice_mut(ndarray::s![.., *start..*end]).assign(g);
                add_to(grads, *a, v);
            }
            Op::ConcatRows(a, b) => {
                let na = self.values[a.0].nrows();
                add_to(grads, *a, g.slice(ndarray::s![..na, ..]).to_owned());
                add_to(grads, *b, g.slice(ndarray::s![na.., ..]).to_owned());
            }
            Op::TileRows(a, _) => {
                let s = g.sum_axis(Axis(0));
                let m = s.len();
                add_to(grads, *a, s.into_shape_with_order((1, m)).unwrap());
            }
            Op::PairwiseOuter(a, b) => {
                let va = &self.values[a.0];
                let vb = &self.values[b.0];
                let (bsz, d) = va.dim();
                let mut ga = Mat::zeros((bsz, d));
                let mut gb = Mat::zeros((bsz, d));
                for r in 0..bsz {
                    let gr = g.row(r);
                    let gr = gr.as_slice().unwrap();
                    let x = va.row(r);
                    let x = x.as_slice().unwrap();
                    let y = vb.row(r);
                    let y = y.as_slice().unwrap();
                    let ga_row = ga.row_mut(r).into_slice().unwrap();
                    let gb_row = gb.row_mut(r).into_slice().unwrap();
                    for i in 0..d {
                        let seg = &gr[i * d..(i + 1) * d];
                        let xi = x[i];
                        let mut acc = 0.0;
                        for ((gij, yj), gbj) in seg.iter().zip(y.iter()).zip(gb_row.iter_mut()) {
                            acc += gij * yj;
                            *gbj += gij * xi;
                        }
                        ga_row[i] = acc;
                    }
                }
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::Conv3x3 { grid, kernel, side } => {
                let side = *side;
                let vg = &self.values[grid.0];
                let k = &self.values[kernel.0];
                let bsz = vg.nrows();
                // Gradient w.r.t. the input is the correlation of the output
                // gradient with the 180-degree-flipped kernel; w.r.t. the
                // kernel it is nine shifted dot products.
                let flipped: [f64; 9] = std::array::from_fn(|i| k[(2 - i / 3, 2 - i % 3)]);
                let mut dgrid = Mat::zeros((bsz, side * side));
                let mut dk = Mat::zeros((3, 3));
                for b in 0..bsz {
                    let img = vg.row(b);
                    let img = img.as_slice().unwrap();
                    let go = g.row(b);
                    let go = go.as_slice().unwrap();
                    let dst = dgrid.row_mut(b).into_slice().unwrap();
                    conv3x3_rows(go, dst, side, &flipped);
                    for p in 0..3usize {
                        for q in 0..3usize {
                            // dk[p][q] = sum over (i, j) with the input
                            // shifted by (p-1, q-1) inside the image.
                            let (i0, i1) = clip_range(p, side);
                            let (j0, j1) = clip_range(q, side);
                            let mut acc = 0.0;
                            for i in i0..i1 {
                                let y = (i + p - 1) * side;
                                let gr = &go[i * side + j0..i * side + j1];
                                let ir = &img[y + j0 + q - 1..y + j1 + q - 1];
                                for (a, b) in gr.iter().zip(ir.iter()) {
                                    acc += a * b;
                                }
                            }
                            dk[(p, q)] += acc;
                        }
                    }
                }
                add_to(grads, *grid, dgrid);
                add_to(grads, *kernel, dk);
            }
            Op::RowBlockMean { grid, side } => {
                let side = *side;
                let bsz = self.values[grid.0].nrows();
                let mut dgrid = Mat::zeros((bsz, side * side));
                for b in 0..bsz {
                    for i in 0..side {
                        let gv = g[(b, i)] / side as f64;
                        for j in 0..side {
                            dgrid[(b, i * side + j)] = gv;
                        }
                    }
                }
                add_to(grads, *grid, dgrid);
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}
