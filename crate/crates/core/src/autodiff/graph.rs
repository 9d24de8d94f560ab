use std::borrow::Cow;

use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc};
use super::{ParamId, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, Var),
    Affine(Var, f64),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Row(Var, usize),
    Slice(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Log(Var),
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Min(Var, Var),
    Normalize(Var, f64),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    ScatterAdd {
        src: Var,
        index: Vec<usize>,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so the tape order is already a
/// topological order and `backward` simply walks it in reverse. Parameter
/// leaves borrow their tensors from the [`ParamSet`] the graph was built on.
pub struct Graph<'p> {
    params: &'p ParamSet,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node<'p>>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            param_vars: vec![None; params.len()],
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the loss passed to the last `backward` call.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let params = self.params;
        self.nodes.push(Node {
            value: Cow::Borrowed(params.get(id)),
            op: Op::Param,
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var> {
        let id = self
            .params
            .id(name)
            .ok_or_else(|| Error::invalid("param", format!("unknown parameter `{name}`")))?;
        Ok(self.param(id))
    }

    // ---- forward operations ------------------------------------------------

    /// Matrix product. A rank-1 left operand acts as a row vector, a rank-1
    /// right operand as a column vector; rank-1 results stay rank-1.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = if ta.rank() == 1 {
            (1, ta.len())
        } else {
            (ta.shape()[0], ta.shape()[1])
        };
        let (k2, n) = if tb.rank() == 1 {
            (tb.len(), 1)
        } else {
            (tb.shape()[0], tb.shape()[1])
        };
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let out_shape = match (ta.rank(), tb.rank()) {
            (1, 1) => vec![1],
            (1, _) => vec![n],
            (_, 1) => vec![m],
            _ => vec![m, n],
        };
        let mut out = vec![0.0; m * n];
        gemm_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::MatMul { a, b, m, k, n }, &[a, b]))
    }

    fn zip_same(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    /// Elementwise minimum. The gradient flows to the smaller argument, and to
    /// `a` on exact ties.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("min", a, b, |x, y| if x <= y { x } else { y })?;
        Ok(self.push(value, Op::Min(a, b), &[a, b]))
    }

    /// Adds a rank-1 `row` to every row of `matrix`.
    pub fn add_row(&mut self, matrix: Var, row: Var) -> Result<Var> {
        let (tm, tr) = (self.value(matrix), self.value(row));
        if tm.rank() != 2 || tr.rank() != 1 || tm.cols() != tr.len() {
            return Err(shape_err("add_row", tm, tr));
        }
        let n = tr.len();
        let mut data = tm.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (x, &r) in chunk.iter_mut().zip(tr.data()) {
                *x += r;
            }
        }
        let value = Tensor::new(tm.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddRow(matrix, row), &[matrix, row]))
    }

    /// Multiplies every entry of `x` by the scalar node `s`.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let (tx, ts) = (self.value(x), self.value(s));
        if !ts.is_scalar() {
            return Err(shape_err("scale", tx, ts));
        }
        let k = ts.item();
        let data = tx.data().iter().map(|v| v * k).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Scale(x, s), &[x, s]))
    }

    /// `a * x + b` with constant coefficients.
    pub fn affine(&mut self, x: Var, a: f64, b: f64) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| a * v + b).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Affine(x, a), &[x])
    }

    /// Joins rank-1 nodes end to end, or matrices with equal row counts
    /// side by side.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid("concat", "no inputs"))?;
        let t0 = self.value(first);
        let (rank, rows) = (t0.rank(), t0.rows());
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rank() != rank || t.rows() != rows {
                return Err(shape_err("concat", t0, t));
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let shape = if rank == 1 {
            vec![cols]
        } else {
            vec![rows, cols]
        };
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), parts))
    }

    /// Stacks equal-length rank-1 nodes as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("stack", "no inputs"))?;
        let n = self.value(*first).len();
        let mut data = Vec::with_capacity(n * rows.len());
        for &r in rows {
            let t = self.value(r);
            if t.rank() != 1 || t.len() != n {
                return Err(shape_err("stack", self.value(*first), t));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), n], data)?;
        Ok(self.push(value, Op::Stack(rows.to_vec()), rows))
    }

    pub fn row(&mut self, matrix: Var, r: usize) -> Result<Var> {
        let t = self.value(matrix);
        if t.rank() != 2 || r >= t.rows() {
            return Err(Error::invalid(
                "row",
                format!("row {r} out of range for shape {:?}", t.shape()),
            ));
        }
        let value = Tensor::vector(t.row(r));
        Ok(self.push(value, Op::Row(matrix, r), &[matrix]))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 1 || len == 0 || start + len > t.len() {
            return Err(Error::invalid(
                "slice",
                format!(
                    "[{start}, {}) out of range for shape {:?}",
                    start + len,
                    t.shape()
                ),
            ));
        }
        let value = Tensor::vector(&t.data()[start..start + len]);
        Ok(self.push(value, Op::Slice(x, start), &[x]))
    }

    fn map_unary(&mut self, x: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        Tensor::new(t.shape().to_vec(), data).expect("same shape")
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.map_unary(x, f64::tanh);
        self.push(value, Op::Tanh(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.map_unary(x, sigmoid);
        self.push(value, Op::Sigmoid(x), &[x])
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let value = self.map_unary(x, softplus);
        self.push(value, Op::Softplus(x), &[x])
    }

    /// Natural log; non-positive inputs yield `-inf`/NaN like `f64::ln`.
    pub fn log(&mut self, x: Var) -> Var {
        let value = self.map_unary(x, f64::ln);
        self.push(value, Op::Log(x), &[x])
    }

    /// Softmax of a rank-1 node, computed after subtracting the max.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.softmax_impl(x, None)
    }

    /// Softmax restricted to positions where `mask` is true; masked positions
    /// get exactly zero probability.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var> {
        self.softmax_impl(x, Some(mask))
    }

    fn softmax_impl(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 1 {
            return Err(Error::invalid(
                "softmax",
                format!("expects rank-1 input, got {:?}", t.shape()),
            ));
        }
        let keep = |i: usize| mask.is_none_or(|m| m[i]);
        if let Some(m) = mask {
            if m.len() != t.len() {
                return Err(Error::Shape {
                    op: "softmax",
                    lhs: t.shape().to_vec(),
                    rhs: vec![m.len()],
                });
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::invalid("softmax", "mask hides every position"));
            }
        }
        let max = t
            .data()
            .iter()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut data: Vec<f64> = t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if keep(i) { (v - max).exp() } else { 0.0 })
            .collect();
        let z: f64 = data.iter().sum();
        for v in &mut data {
            *v /= z;
        }
        let value = Tensor::new(vec![data.len()], data)?;
        Ok(self.push(value, Op::Softmax(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(value, Op::Mean(x), &[x])
    }

    /// Column-wise mean of a matrix, i.e. the average row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::invalid(
                "mean_rows",
                format!("expects a matrix, got {:?}", t.shape()),
            ));
        }
        let (m, n) = (t.rows(), t.cols());
        let mut data = vec![0.0; n];
        for r in 0..m {
            for (d, v) in data.iter_mut().zip(t.row(r)) {
                *d += v;
            }
        }
        for d in &mut data {
            *d /= m as f64;
        }
        let value = Tensor::new(vec![n], data)?;
        Ok(self.push(value, Op::MeanRows(x), &[x]))
    }

    /// `x / sum(x)` for a rank-1 node with a strictly positive sum.
    pub fn normalize(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.sum();
        if s.is_nan() || s <= 0.0 || !s.is_finite() {
            return Err(Error::invalid(
                "normalize",
                format!("denominator must be positive and finite, got {s}"),
            ));
        }
        let data = t.data().iter().map(|v| v / s).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Normalize(x, s), &[x]))
    }

    /// Gathers rows of `table`; the result is `[ids.len(), dim]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.rank() != 2 || ids.is_empty() {
            return Err(Error::invalid(
                "embedding_lookup",
                format!("table {:?} with {} ids", t.shape(), ids.len()),
            ));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::invalid(
                "embedding_lookup",
                format!("index {bad} out of range for table with {} rows", t.rows()),
            ));
        }
        let mut data = Vec::with_capacity(ids.len() * t.cols());
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(vec![ids.len(), t.cols()], data)?;
        Ok(self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        ))
    }

    /// Single-row lookup returned as a rank-1 node.
    pub fn embedding_row(&mut self, table: Var, id: usize) -> Result<Var> {
        let m = self.embedding(table, &[id])?;
        self.row(m, 0)
    }

    /// `out[index[i]] += src[i]` into a zero vector of length `out_len`.
    pub fn scatter_add(&mut self, src: Var, index: &[usize], out_len: usize) -> Result<Var> {
        let t = self.value(src);
        if t.rank() != 1 || t.len() != index.len() {
            return Err(Error::Shape {
                op: "scatter_add",
                lhs: t.shape().to_vec(),
                rhs: vec![index.len()],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= out_len) {
            return Err(Error::invalid(
                "scatter_add",
                format!("target {bad} out of range for length {out_len}"),
            ));
        }
        let mut data = vec![0.0; out_len];
        for (&i, &v) in index.iter().zip(t.data()) {
            data[i] += v;
        }
        let value = Tensor::new(vec![out_len], data)?;
        Ok(self.push(
            value,
            Op::ScatterAdd {
                src,
                index: index.to_vec(),
            },
            &[src],
        ))
    }

    // ---- backward ----------------------------------------------------------

    /// Accumulates `d loss / d node` for every node reachable from `loss`.
    ///
    /// A second call on the same graph is rejected until
    /// [`Graph::clear_gradients`] is called.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if self.nodes[i].needs_grad {
                propagate(&self.nodes, &mut self.grads, i, &g);
            }
            self.grads[i] = Some(g);
        }
        self.backward_done = true;
        Ok(())
    }

    pub fn clear_gradients(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Dense gradient per parameter, in [`ParamSet`] order; parameters the
    /// loss does not depend on get zeros.
    pub fn param_grads(&self) -> Vec<Tensor> {
        self.params
            .ids()
            .map(|id| {
                self.param_vars[id.0]
                    .and_then(|v| self.grad(v).cloned())
                    .unwrap_or_else(|| Tensor::zeros(self.params.get(id).shape()))
            })
            .collect()
    }
}

fn slot<'a>(nodes: &[Node<'_>], grads: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut [f64]> {
    let node = &nodes[v.0];
    if !node.needs_grad {
        return None;
    }
    let g = grads[v.0].get_or_insert_with(|| Tensor::zeros(node.value.shape()));
    Some(g.data_mut())
}

fn propagate(nodes: &[Node<'_>], grads: &mut [Option<Tensor>], i: usize, g: &Tensor) {
    let gd = g.data();
    let out = nodes[i].value.data();
    let val = |v: Var| nodes[v.0].value.data();
    match &nodes[i].op {
        Op::Constant | Op::Param => {}
        Op::MatMul { a, b, m, k, n } => {
            let (a_val, b_val) = (val(*a), val(*b));
            if let Some(da) = slot(nodes, grads, *a) {
                gemm_nt_acc(gd, b_val, da, *m, *k, *n);
            }
            if let Some(db) = slot(nodes, grads, *b) {
                gemm_tn_acc(a_val, gd, db, *m, *k, *n);
            }
        }
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if let Some(d) = slot(nodes, grads, v) {
                    d.iter_mut().zip(gd).for_each(|(x, y)| *x += y);
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(d) = slot(nodes, grads, *a) {
                d.iter_mut().zip(gd).for_each(|(x, y)| *x += y);
            }
            if let Some(d) = slot(nodes, grads, *b) {
                d.iter_mut().zip(gd).for_each(|(x, y)| *x -= y);
            }
        }
        Op::AddRow(mtx, row) => {
            if let Some(d) = slot(nodes, grads, *mtx) {
                d.iter_mut().zip(gd).for_each(|(x, y)| *x += y);
            }
            if let Some(d) = slot(nodes, grads, *row) {
                let n = d.len();
                for chunk in gd.chunks(n) {
                    d.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                }
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if let Some(d) = slot(nodes, grads, *a) {
                for j in 0..d.len() {
                    d[j] += gd[j] * bv[j];
                }
            }
            if let Some(d) = slot(nodes, grads, *b) {
                for j in 0..d.len() {
                    d[j] += gd[j] * av[j];
                }
            }
        }
        Op::Scale(x, s) => {
            let (xv, k) = (val(*x), val(*s)[0]);
            if let Some(d) = slot(nodes, grads, *x) {
                d.iter_mut().zip(gd).for_each(|(a, b)| *a += b * k);
            }
            if let Some(d) = slot(nodes, grads, *s) {
                d[0] += gd.iter().zip(xv).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Op::Affine(x, a) => {
            if let Some(d) = slot(nodes, grads, *x) {
                d.iter_mut().zip(gd).for_each(|(p, q)| *p += a * q);
            }
        }
        Op::Concat(parts) => {
            let (rows, width) = (g.rows(), g.cols());
            let mut offset = 0;
            for &p in parts {
                let n = nodes[p.0].value.cols();
                if let Some(d) = slot(nodes, grads, p) {
                    for r in 0..rows {
                        let src = &gd[r * width + offset..r * width + offset + n];
                        d[r * n..(r + 1) * n]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(a, b)| *a += b);
                    }
                }
                offset += n;
            }
        }
        Op::Stack(rows) => {
            let n = g.cols();
            for (r, &p) in rows.iter().enumerate() {
                if let Some(d) = slot(nodes, grads, p) {
                    d.iter_mut()
                        .zip(&gd[r * n..(r + 1) * n])
                        .for_each(|(a, b)| *a += b);
                }
            }
        }
        Op::Row(mtx, r) => {
            if let Some(d) = slot(nodes, grads, *mtx) {
                let n = gd.len();
                d[r * n..(r + 1) * n]
                    .iter_mut()
                    .zip(gd)
                    .for_each(|(a, b)| *a += b);
            }
        }
        Op::Slice(x, start) => {
            if let Some(d) = slot(nodes, grads, *x) {
                d[*start..*start + gd.len()]
                    .iter_mut()
                    .zip(gd)
                    .for_each(|(a, b)| *a += b);
            }
        }
        Op::Tanh(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                for j in 0..d.len() {
                    d[j] += gd[j] * (1.0 - out[j] * out[j]);
                }
            }
        }
        Op::Sigmoid(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                for j in 0..d.len() {
                    d[j] += gd[j] * out[j] * (1.0 - out[j]);
                }
            }
        }
        Op::Softplus(x) => {
            let xv = val(*x);
            if let Some(d) = slot(nodes, grads, *x) {
                for j in 0..d.len() {
                    d[j] += gd[j] * sigmoid(xv[j]);
                }
            }
        }
        Op::Log(x) => {
            let xv = val(*x);
            if let Some(d) = slot(nodes, grads, *x) {
                for j in 0..d.len() {
                    d[j] += gd[j] / xv[j];
                }
            }
        }
        Op::Softmax(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                let dot: f64 = gd.iter().zip(out).map(|(a, b)| a * b).sum();
                for j in 0..d.len() {
                    d[j] += out[j] * (gd[j] - dot);
                }
            }
        }
        Op::Sum(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                d.iter_mut().for_each(|a| *a += gd[0]);
            }
        }
        Op::Mean(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                let s = gd[0] / d.len() as f64;
                d.iter_mut().for_each(|a| *a += s);
            }
        }
        Op::MeanRows(x) => {
            if let Some(d) = slot(nodes, grads, *x) {
                let n = gd.len();
                let m = (d.len() / n) as f64;
                for chunk in d.chunks_mut(n) {
                    chunk.iter_mut().zip(gd).for_each(|(a, b)| *a += b / m);
                }
            }
        }
        Op::Min(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if let Some(d) = slot(nodes, grads, *a) {
                for j in 0..d.len() {
                    if av[j] <= bv[j] {
                        d[j] += gd[j];
                    }
                }
            }
            if let Some(d) = slot(nodes, grads, *b) {
                for j in 0..d.len() {
                    if av[j] > bv[j] {
                        d[j] += gd[j];
                    }
                }
            }
        }
        Op::Normalize(x, s) => {
            if let Some(d) = slot(nodes, grads, *x) {
                let dot: f64 = gd.iter().zip(out).map(|(a, b)| a * b).sum();
                for j in 0..d.len() {
                    d[j] += (gd[j] - dot) / s;
                }
            }
        }
        Op::Embedding { table, ids } => {
            if let Some(d) = slot(nodes, grads, *table) {
                let n = g.cols();
                for (r, &id) in ids.iter().enumerate() {
                    d[id * n..(id + 1) * n]
                        .iter_mut()
                        .zip(&gd[r * n..(r + 1) * n])
                        .for_each(|(a, b)| *a += b);
                }
            }
        }
        Op::ScatterAdd { src, index } => {
            if let Some(d) = slot(nodes, grads, *src) {
                for (j, &t) in index.iter().enumerate() {
                    d[j] += gd[t];
                }
            }
        }
    }
}
