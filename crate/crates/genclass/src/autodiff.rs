//! Reverse-mode differentiation on a record-replay tape.
//!
//! Every primitive appends a node holding its forward value and parent ids.
//! `backward` walks the tape in reverse and *builds the adjoints out of the
//! same primitives*, so a gradient is itself a differentiable node chain.
//! Calling `backward` on a scalar assembled from gradient nodes therefore
//! yields exact second derivatives, which is what the critic's gradient
//! penalty needs to train.

use std::cell::RefCell;
use std::rc::Rc;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("backward requires a 1x1 output, got {0}x{1}")]
    NonScalarOutput(usize, usize),
    #[error("{0} requires a tape in higher-order mode")]
    NotHigherOrder(&'static str),
    #[error("{op}: invalid argument: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
}

pub type AdResult<T> = Result<T, AdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FirstOrder,
    HigherOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

// Payloads record the full forward op even where the vjp re-derives a value
// from node shapes.
#[allow(dead_code)]
#[derive(Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    RowNorm(NodeId),
    RowSum(NodeId),
    ColSum(NodeId),
    SumAll(NodeId),
    BroadcastRows(NodeId, usize),
    BroadcastCols(NodeId, usize),
    BroadcastAll(NodeId, usize, usize),
    ConcatCols(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    PadCols(NodeId, usize, usize),
    GatherRows(NodeId, Rc<Vec<usize>>),
    ScatterRows(NodeId, Rc<Vec<usize>>, usize),
}

struct Node {
    value: Matrix,
    op: Op,
}

pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    mode: Mode,
}

impl Tape {
    pub fn new(mode: Mode) -> Self {
        Tape { nodes: RefCell::new(Vec::new()), mode }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, id: NodeId) -> Matrix {
        self.nodes.borrow()[id.0].value.clone()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes.borrow()[id.0].value.shape()
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.nodes.borrow()[id.0].value.scalar_value()
    }

    /// True if the node was created by `leaf` (no parents).
    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes.borrow()[id.0].op, Op::Leaf)
    }

    fn push(&self, value: Matrix, op: Op) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        NodeId(nodes.len() - 1)
    }

    pub fn leaf(&self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn leaf_scalar(&self, v: f64) -> NodeId {
        self.leaf(Matrix::scalar(v))
    }

    pub fn matmul(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
            if va.cols() != vb.rows() {
                return Err(AdError::ShapeMismatch {
                    op: "matmul",
                    lhs: va.shape(),
                    rhs: vb.shape(),
                });
            }
            va.matmul(vb)
        };
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.transpose();
        self.push(value, Op::Transpose(a))
    }

    fn binary_elementwise(
        &self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
            if va.shape() != vb.shape() {
                return Err(AdError::ShapeMismatch {
                    op: op_name,
                    lhs: va.shape(),
                    rhs: vb.shape(),
                });
            }
            va.zip(vb, f)
        };
        Ok(self.push(value, op))
    }

    pub fn add(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        self.binary_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        self.binary_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        self.binary_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        self.binary_elementwise("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn add_scalar(&self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.map(|v| v + c);
        self.push(value, Op::AddScalar(a, c))
    }

    pub fn relu(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn leaky_relu(&self, a: NodeId, slope: f64) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.map(|v| if v > 0.0 { v } else { slope * v });
        self.push(value, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(value, Op::Sigmoid(a))
    }

    /// Per-row L2 norm, Bxd -> Bx1.
    pub fn row_norm(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.row_norms();
        self.push(value, Op::RowNorm(a))
    }

    pub fn row_sum(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.row_sums();
        self.push(value, Op::RowSum(a))
    }

    pub fn col_sum(&self, a: NodeId) -> NodeId {
        let value = self.nodes.borrow()[a.0].value.col_sums();
        self.push(value, Op::ColSum(a))
    }

    pub fn sum_all(&self, a: NodeId) -> NodeId {
        let value = Matrix::scalar(self.nodes.borrow()[a.0].value.sum_all());
        self.push(value, Op::SumAll(a))
    }

    /// Mean over all entries, -> 1x1.
    pub fn mean_all(&self, a: NodeId) -> NodeId {
        let n = self.nodes.borrow()[a.0].value.len();
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// 1xd -> rows x d (replicate the single row).
    pub fn broadcast_rows(&self, a: NodeId, rows: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if v.rows() != 1 {
                return Err(AdError::InvalidArgument {
                    op: "broadcast_rows",
                    msg: format!("expected a single-row matrix, got {:?}", v.shape()),
                });
            }
            let mut data = Vec::with_capacity(rows * v.cols());
            for _ in 0..rows {
                data.extend_from_slice(v.data());
            }
            Matrix::new(rows, v.cols(), data)
        };
        Ok(self.push(value, Op::BroadcastRows(a, rows)))
    }

    /// Bx1 -> B x cols (replicate the single column).
    pub fn broadcast_cols(&self, a: NodeId, cols: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if v.cols() != 1 {
                return Err(AdError::InvalidArgument {
                    op: "broadcast_cols",
                    msg: format!("expected a single-column matrix, got {:?}", v.shape()),
                });
            }
            let mut data = Vec::with_capacity(v.rows() * cols);
            for i in 0..v.rows() {
                let x = v.get(i, 0);
                data.extend(std::iter::repeat(x).take(cols));
            }
            Matrix::new(v.rows(), cols, data)
        };
        Ok(self.push(value, Op::BroadcastCols(a, cols)))
    }

    /// 1x1 -> rows x cols.
    pub fn broadcast_all(&self, a: NodeId, rows: usize, cols: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if !v.is_scalar() {
                return Err(AdError::InvalidArgument {
                    op: "broadcast_all",
                    msg: format!("expected 1x1, got {:?}", v.shape()),
                });
            }
            Matrix::new(rows, cols, vec![v.scalar_value(); rows * cols])
        };
        Ok(self.push(value, Op::BroadcastAll(a, rows, cols)))
    }

    pub fn concat_cols(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
            if va.rows() != vb.rows() {
                return Err(AdError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: va.shape(),
                    rhs: vb.shape(),
                });
            }
            va.concat_cols(vb)
        };
        Ok(self.push(value, Op::ConcatCols(a, b)))
    }

    pub fn slice_cols(&self, a: NodeId, lo: usize, hi: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if lo > hi || hi > v.cols() {
                return Err(AdError::InvalidArgument {
                    op: "slice_cols",
                    msg: format!("range {}..{} out of 0..{}", lo, hi, v.cols()),
                });
            }
            v.slice_cols(lo, hi)
        };
        Ok(self.push(value, Op::SliceCols(a, lo, hi)))
    }

    /// Embed into `total` columns starting at `lo`, zero elsewhere.
    pub fn pad_cols(&self, a: NodeId, lo: usize, total: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if lo + v.cols() > total {
                return Err(AdError::InvalidArgument {
                    op: "pad_cols",
                    msg: format!("{} cols at offset {} exceed total {}", v.cols(), lo, total),
                });
            }
            let mut out = Matrix::zeros(v.rows(), total);
            for i in 0..v.rows() {
                for j in 0..v.cols() {
                    out.set(i, lo + j, v.get(i, j));
                }
            }
            out
        };
        Ok(self.push(value, Op::PadCols(a, lo, total)))
    }

    pub fn gather_rows(&self, a: NodeId, idx: Rc<Vec<usize>>) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if let Some(&bad) = idx.iter().find(|&&i| i >= v.rows()) {
                return Err(AdError::InvalidArgument {
                    op: "gather_rows",
                    msg: format!("row index {} out of 0..{}", bad, v.rows()),
                });
            }
            v.gather_rows(&idx)
        };
        Ok(self.push(value, Op::GatherRows(a, idx)))
    }

    /// Inverse of gather: out[idx[i]] += in[i], result has `rows` rows.
    pub fn scatter_rows(&self, a: NodeId, idx: Rc<Vec<usize>>, rows: usize) -> AdResult<NodeId> {
        let value = {
            let nodes = self.nodes.borrow();
            let v = &nodes[a.0].value;
            if v.rows() != idx.len() {
                return Err(AdError::InvalidArgument {
                    op: "scatter_rows",
                    msg: format!("{} input rows but {} indices", v.rows(), idx.len()),
                });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
                return Err(AdError::InvalidArgument {
                    op: "scatter_rows",
                    msg: format!("row index {} out of 0..{}", bad, rows),
                });
            }
            let mut out = Matrix::zeros(rows, v.cols());
            for (i, &dst) in idx.iter().enumerate() {
                for j in 0..v.cols() {
                    out.set(dst, j, out.get(dst, j) + v.get(i, j));
                }
            }
            out
        };
        Ok(self.push(value, Op::ScatterRows(a, idx, rows)))
    }

    // ── composite helpers ──────────────────────────────────────────

    /// x W + b with b broadcast across rows.
    pub fn affine(&self, x: NodeId, w: NodeId, b: NodeId) -> AdResult<NodeId> {
        let xw = self.matmul(x, w)?;
        let rows = self.shape(xw).0;
        let bb = self.broadcast_rows(b, rows)?;
        self.add(xw, bb)
    }

    /// Mean of squared differences over all entries.
    pub fn mse(&self, a: NodeId, b: NodeId) -> AdResult<NodeId> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean_all(sq))
    }

    // ── reverse pass ───────────────────────────────────────────────

    /// Gradients of a scalar node with respect to each `wrt` node.
    ///
    /// The returned ids are live nodes on this tape; in higher-order mode
    /// they can be fed back into further tape ops and differentiated again.
    /// Nodes unreachable from `output` get a zero gradient of their shape.
    pub fn backward(&self, output: NodeId, wrt: &[NodeId]) -> AdResult<Vec<NodeId>> {
        let out_shape = self.shape(output);
        if out_shape != (1, 1) {
            return Err(AdError::NonScalarOutput(out_shape.0, out_shape.1));
        }
        let upper = output.0 + 1;
        let mut grads: Vec<Option<NodeId>> = vec![None; upper];
        grads[output.0] = Some(self.leaf(Matrix::scalar(1.0)));

        for i in (0..upper).rev() {
            let g = match grads[i] {
                Some(g) => g,
                None => continue,
            };
            let op = self.nodes.borrow()[i].op.clone();
            self.apply_vjp(NodeId(i), &op, g, &mut grads)?;
        }

        wrt.iter()
            .map(|&w| {
                Ok(match grads.get(w.0).copied().flatten() {
                    Some(g) => g,
                    None => {
                        let (r, c) = self.shape(w);
                        self.leaf(Matrix::zeros(r, c))
                    }
                })
            })
            .collect()
    }

    /// Differentiable gradient of a scalar output with respect to one input
    /// node. The result is a live node chain, so penalties built on it can be
    /// differentiated again (double backprop).
    pub fn grad_wrt_input(&self, output: NodeId, input: NodeId) -> AdResult<NodeId> {
        if self.mode != Mode::HigherOrder {
            return Err(AdError::NotHigherOrder("grad_wrt_input"));
        }
        Ok(self.backward(output, &[input])?[0])
    }

    fn accumulate(
        &self,
        grads: &mut [Option<NodeId>],
        target: NodeId,
        contrib: NodeId,
    ) -> AdResult<()> {
        grads[target.0] = Some(match grads[target.0] {
            Some(existing) => self.add(existing, contrib)?,
            None => contrib,
        });
        Ok(())
    }

    fn apply_vjp(
        &self,
        child: NodeId,
        op: &Op,
        g: NodeId,
        grads: &mut [Option<NodeId>],
    ) -> AdResult<()> {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let bt = self.transpose(b);
                let da = self.matmul(g, bt)?;
                self.accumulate(grads, a, da)?;
                let at = self.transpose(a);
                let db = self.matmul(at, g)?;
                self.accumulate(grads, b, db)?;
            }
            Op::Transpose(a) => {
                let da = self.transpose(g);
                self.accumulate(grads, a, da)?;
            }
            Op::Add(a, b) => {
                self.accumulate(grads, a, g)?;
                self.accumulate(grads, b, g)?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g)?;
                let neg = self.scale(g, -1.0);
                self.accumulate(grads, b, neg)?;
            }
            Op::Mul(a, b) => {
                let da = self.mul(g, b)?;
                self.accumulate(grads, a, da)?;
                let db = self.mul(g, a)?;
                self.accumulate(grads, b, db)?;
            }
            Op::Div(a, b) => {
                let da = self.div(g, b)?;
                self.accumulate(grads, a, da)?;
                // d/db (a/b) = -a / b^2
                let bb = self.mul(b, b)?;
                let ga = self.mul(g, a)?;
                let q = self.div(ga, bb)?;
                let db = self.scale(q, -1.0);
                self.accumulate(grads, b, db)?;
            }
            Op::Scale(a, c) => {
                let da = self.scale(g, c);
                self.accumulate(grads, a, da)?;
            }
            Op::AddScalar(a, _) => {
                self.accumulate(grads, a, g)?;
            }
            Op::Relu(a) => {
                // Piecewise-constant mask; zero derivative a.e.
                let mask = self.nodes.borrow()[a.0].value.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                let m = self.leaf(mask);
                let da = self.mul(g, m)?;
                self.accumulate(grads, a, da)?;
            }
            Op::LeakyRelu(a, slope) => {
                let mask =
                    self.nodes.borrow()[a.0].value.map(|v| if v > 0.0 { 1.0 } else { slope });
                let m = self.leaf(mask);
                let da = self.mul(g, m)?;
                self.accumulate(grads, a, da)?;
            }
            Op::Sigmoid(a) => {
                // s'(x) = s (1 - s), built from the sigmoid node itself so the
                // chain stays differentiable.
                let s = child;
                let neg_s = self.scale(s, -1.0);
                let one_minus = self.add_scalar(neg_s, 1.0);
                let ds = self.mul(s, one_minus)?;
                let da = self.mul(g, ds)?;
                self.accumulate(grads, a, da)?;
            }
            Op::RowNorm(a) => {
                // d r_i / d x_ij = x_ij / r_i
                let r = child;
                let ratio = self.div(g, r)?;
                let d = self.shape(a).1;
                let spread = self.broadcast_cols(ratio, d)?;
                let da = self.mul(spread, a)?;
                self.accumulate(grads, a, da)?;
            }
            Op::RowSum(a) => {
                let d = self.shape(a).1;
                let da = self.broadcast_cols(g, d)?;
                self.accumulate(grads, a, da)?;
            }
            Op::ColSum(a) => {
                let r = self.shape(a).0;
                let da = self.broadcast_rows(g, r)?;
                self.accumulate(grads, a, da)?;
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(a);
                let da = self.broadcast_all(g, r, c)?;
                self.accumulate(grads, a, da)?;
            }
            Op::BroadcastRows(a, _) => {
                let da = self.col_sum(g);
                self.accumulate(grads, a, da)?;
            }
            Op::BroadcastCols(a, _) => {
                let da = self.row_sum(g);
                self.accumulate(grads, a, da)?;
            }
            Op::BroadcastAll(a, _, _) => {
                let da = self.sum_all(g);
                self.accumulate(grads, a, da)?;
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(a).1;
                let cb = self.shape(b).1;
                let da = self.slice_cols(g, 0, ca)?;
                self.accumulate(grads, a, da)?;
                let db = self.slice_cols(g, ca, ca + cb)?;
                self.accumulate(grads, b, db)?;
            }
            Op::SliceCols(a, lo, _hi) => {
                let total = self.shape(a).1;
                let da = self.pad_cols(g, lo, total)?;
                self.accumulate(grads, a, da)?;
            }
            Op::PadCols(a, lo, _total) => {
                let w = self.shape(a).1;
                let da = self.slice_cols(g, lo, lo + w)?;
                self.accumulate(grads, a, da)?;
            }
            Op::GatherRows(a, ref idx) => {
                let rows = self.shape(a).0;
                let da = self.scatter_rows(g, idx.clone(), rows)?;
                self.accumulate(grads, a, da)?;
            }
            Op::ScatterRows(a, ref idx, _) => {
                let da = self.gather_rows(g, idx.clone())?;
                self.accumulate(grads, a, da)?;
            }
        }
        Ok(())
    }
}
