//! The computation tape: forward operations and reverse-mode backward.

use crate::{Error, Result};

use super::Tensor;

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef(pub(crate) usize);

const LN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    /// a[m,k] . b[k,n]
    Matmul { a: usize, b: usize },
    /// a[m,k] . b[n,k]^T
    MatmulNt { a: usize, b: usize },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    /// x[r,c] + bias[c] broadcast over rows
    AddRow { x: usize, bias: usize },
    Sigmoid { x: usize },
    Tanh { x: usize },
    Relu { x: usize },
    Gelu { x: usize },
    Scale { x: usize, factor: f64 },
    Sum { x: usize },
    ConcatCols { a: usize, b: usize },
    NarrowCols { x: usize, start: usize, len: usize },
    StackRows { parts: Vec<usize> },
    SelectRows { x: usize, rows: Vec<usize> },
    /// Row lookup into a table; `pad_id` rows come out zero and receive no
    /// gradient, which keeps the padding embedding frozen.
    GatherRows { table: usize, ids: Vec<u32>, pad_id: Option<u32> },
    /// Valid cross-correlation over time plus bias, max over window
    /// positions. Sequences shorter than the filter height are implicitly
    /// right-padded with zero vectors.
    Conv1dMaxPool { seq: usize, filters: usize, bias: usize },
    /// One LSTM cell step over a batch; output is `[h' | c']` of shape
    /// [b, 2k]. Gate order in the fused weight matrices is i, f, g, o.
    LstmStep { x: usize, h: usize, c: usize, wx: usize, wh: usize, b: usize },
    /// Row-wise softmax where masked columns are excluded entirely.
    MaskedSoftmaxRows { scores: usize, mask: Vec<bool> },
    LayerNorm { x: usize, gamma: usize, beta: usize },
    SoftmaxVec { logits: usize },
    XentLoss { logits: usize, label: usize },
    XentLossBatch { logits: usize, labels: Vec<u32> },
}

enum Cache {
    None,
    /// Winning window position per filter.
    Conv(Vec<usize>),
    /// Post-activation gates [b, 4k] and tanh of the new cell state [b, k].
    Lstm { gates: Vec<f64>, tanh_c: Vec<f64> },
    /// Softmax probabilities cached by the cross-entropy losses.
    Probs(Vec<f64>),
}

/// Node payload: computed values are owned, parameter leaves borrow their
/// tensor through an `Arc` so prediction never copies model weights.
enum Storage {
    Owned(Vec<f64>),
    Shared(std::sync::Arc<Tensor>),
}

impl Storage {
    fn as_slice(&self) -> &[f64] {
        match self {
            Storage::Owned(v) => v,
            Storage::Shared(t) => t.values(),
        }
    }
}

struct Node {
    op: Op,
    storage: Storage,
    shape: Vec<usize>,
    requires_grad: bool,
    cache: Cache,
}

impl Node {
    fn value(&self) -> &[f64] {
        self.storage.as_slice()
    }
}

/// Reverse-mode autodiff tape. Append-only during the forward pass;
/// [`Graph::backward`] fills gradients for every `requires_grad` node.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inserts a tensor as a leaf, inheriting its `requires_grad` flag.
    pub fn tensor(&mut self, t: &Tensor) -> NodeRef {
        self.push_leaf(
            Storage::Owned(t.values().to_vec()),
            t.shape().to_vec(),
            t.requires_grad(),
        )
    }

    /// Inserts a shared tensor without copying its values. Used for model
    /// parameters, which may be large and reused across many graphs.
    pub fn shared(&mut self, t: &std::sync::Arc<Tensor>) -> NodeRef {
        self.push_leaf(
            Storage::Shared(t.clone()),
            t.shape().to_vec(),
            t.requires_grad(),
        )
    }

    /// Inserts constant values (no gradient).
    pub fn constant(&mut self, values: Vec<f64>, shape: Vec<usize>) -> NodeRef {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        self.push_leaf(Storage::Owned(values), shape, false)
    }

    /// Inserts a differentiable leaf.
    pub fn variable(&mut self, values: Vec<f64>, shape: Vec<usize>) -> NodeRef {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        self.push_leaf(Storage::Owned(values), shape, true)
    }

    fn push_leaf(&mut self, storage: Storage, shape: Vec<usize>, requires_grad: bool) -> NodeRef {
        self.nodes.push(Node {
            op: Op::Leaf,
            storage,
            shape,
            requires_grad,
            cache: Cache::None,
        });
        self.grads.push(None);
        NodeRef(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        op: Op,
        value: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
        cache: Cache,
        name: &'static str,
    ) -> Result<NodeRef> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            op,
            storage: Storage::Owned(value),
            shape,
            requires_grad,
            cache,
        });
        self.grads.push(None);
        Ok(NodeRef(self.nodes.len() - 1))
    }

    pub fn value(&self, n: NodeRef) -> &[f64] {
        &self.nodes[n.0].value()
    }

    pub fn shape(&self, n: NodeRef) -> &[usize] {
        &self.nodes[n.0].shape
    }

    /// Gradient of the last `backward` root w.r.t. this node, if tracked.
    pub fn grad(&self, n: NodeRef) -> Option<&[f64]> {
        self.grads[n.0].as_deref()
    }

    fn rows_cols(&self, n: usize) -> (usize, usize) {
        let s = &self.nodes[n].shape;
        match s.len() {
            1 => (1, s[0]),
            2 => (s[0], s[1]),
            _ => (s[0], s[1..].iter().product()),
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    // ── Forward operations ──────────────────────────────────────────────

    /// Matrix product `a[m,k] . b[k,n]`.
    pub fn matmul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (m, ka) = self.rows_cols(a.0);
        let (kb, n) = self.rows_cols(b.0);
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let value = matmul_raw(&self.nodes[a.0].value(), &self.nodes[b.0].value(), m, ka, n);
        let rg = self.needs(&[a.0, b.0]);
        self.push(Op::Matmul { a: a.0, b: b.0 }, value, vec![m, n], rg, Cache::None, "matmul")
    }

    /// `a[m,k] . b[n,k]^T`, avoiding an explicit transpose node.
    pub fn matmul_nt(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (m, ka) = self.rows_cols(a.0);
        let (n, kb) = self.rows_cols(b.0);
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let value = matmul_nt_raw(&self.nodes[a.0].value(), &self.nodes[b.0].value(), m, ka, n);
        let rg = self.needs(&[a.0, b.0]);
        self.push(Op::MatmulNt { a: a.0, b: b.0 }, value, vec![m, n], rg, Cache::None, "matmul_nt")
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let value: Vec<f64> = self.nodes[a.0]
            .value()
            .iter()
            .zip(self.nodes[b.0].value())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.needs(&[a.0, b.0]);
        self.push(Op::Add { a: a.0, b: b.0 }, value, shape, rg, Cache::None, "add")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let value: Vec<f64> = self.nodes[a.0]
            .value()
            .iter()
            .zip(self.nodes[b.0].value())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.needs(&[a.0, b.0]);
        self.push(Op::Mul { a: a.0, b: b.0 }, value, shape, rg, Cache::None, "mul")
    }

    /// Adds a bias row to every row of `x`.
    pub fn add_row(&mut self, x: NodeRef, bias: NodeRef) -> Result<NodeRef> {
        let (r, c) = self.rows_cols(x.0);
        if self.nodes[bias.0].value().len() != c {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: self.nodes[bias.0].shape.clone(),
            });
        }
        let mut value = self.nodes[x.0].value().to_vec();
        for row in value.chunks_mut(c) {
            for (v, b) in row.iter_mut().zip(self.nodes[bias.0].value()) {
                *v += b;
            }
        }
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0, bias.0]);
        let _ = r;
        self.push(Op::AddRow { x: x.0, bias: bias.0 }, value, shape, rg, Cache::None, "add_row")
    }

    pub fn sigmoid(&mut self, x: NodeRef) -> Result<NodeRef> {
        let value: Vec<f64> = self.nodes[x.0].value().iter().map(|&v| sigmoid(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0]);
        self.push(Op::Sigmoid { x: x.0 }, value, shape, rg, Cache::None, "sigmoid")
    }

    pub fn tanh(&mut self, x: NodeRef) -> Result<NodeRef> {
        let value: Vec<f64> = self.nodes[x.0].value().iter().map(|v| v.tanh()).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0]);
        self.push(Op::Tanh { x: x.0 }, value, shape, rg, Cache::None, "tanh")
    }

    pub fn relu(&mut self, x: NodeRef) -> Result<NodeRef> {
        let value: Vec<f64> = self.nodes[x.0].value().iter().map(|v| v.max(0.0)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0]);
        self.push(Op::Relu { x: x.0 }, value, shape, rg, Cache::None, "relu")
    }

    pub fn gelu(&mut self, x: NodeRef) -> Result<NodeRef> {
        let value: Vec<f64> = self.nodes[x.0].value().iter().map(|&v| gelu(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0]);
        self.push(Op::Gelu { x: x.0 }, value, shape, rg, Cache::None, "gelu")
    }

    pub fn scale(&mut self, x: NodeRef, factor: f64) -> Result<NodeRef> {
        let value: Vec<f64> = self.nodes[x.0].value().iter().map(|v| v * factor).collect();
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0]);
        self.push(Op::Scale { x: x.0, factor }, value, shape, rg, Cache::None, "scale")
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: NodeRef) -> Result<NodeRef> {
        let s: f64 = self.nodes[x.0].value().iter().sum();
        let rg = self.needs(&[x.0]);
        self.push(Op::Sum { x: x.0 }, vec![s], vec![1], rg, Cache::None, "sum")
    }

    /// Concatenates two matrices column-wise: [r,ca] ++ [r,cb] -> [r,ca+cb].
    pub fn concat_cols(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (ra, ca) = self.rows_cols(a.0);
        let (rb, cb) = self.rows_cols(b.0);
        if ra != rb {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let mut value = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            value.extend_from_slice(&self.nodes[a.0].value()[i * ca..(i + 1) * ca]);
            value.extend_from_slice(&self.nodes[b.0].value()[i * cb..(i + 1) * cb]);
        }
        let shape = if self.nodes[a.0].shape.len() == 1 {
            vec![ca + cb]
        } else {
            vec![ra, ca + cb]
        };
        let rg = self.needs(&[a.0, b.0]);
        self.push(Op::ConcatCols { a: a.0, b: b.0 }, value, shape, rg, Cache::None, "concat_cols")
    }

    /// Copies columns [start, start+len) of every row.
    pub fn narrow_cols(&mut self, x: NodeRef, start: usize, len: usize) -> Result<NodeRef> {
        let (r, c) = self.rows_cols(x.0);
        if start + len > c {
            return Err(Error::DimMismatch {
                op: "narrow_cols",
                expected: format!("start+len <= {c}"),
                got: format!("{}", start + len),
            });
        }
        let mut value = Vec::with_capacity(r * len);
        for i in 0..r {
            value.extend_from_slice(&self.nodes[x.0].value()[i * c + start..i * c + start + len]);
        }
        let shape = if self.nodes[x.0].shape.len() == 1 {
            vec![len]
        } else {
            vec![r, len]
        };
        let rg = self.needs(&[x.0]);
        self.push(Op::NarrowCols { x: x.0, start, len }, value, shape, rg, Cache::None, "narrow_cols")
    }

    /// Stacks equally-shaped vector nodes into a matrix, one per row.
    pub fn stack_rows(&mut self, parts: &[NodeRef]) -> Result<NodeRef> {
        if parts.is_empty() {
            return Err(Error::EmptySequence("stack_rows"));
        }
        let c = self.nodes[parts[0].0].value().len();
        let mut value = Vec::with_capacity(parts.len() * c);
        for p in parts {
            if self.nodes[p.0].value().len() != c {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    lhs: vec![c],
                    rhs: self.nodes[p.0].shape.clone(),
                });
            }
            value.extend_from_slice(&self.nodes[p.0].value());
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.needs(&ids);
        self.push(Op::StackRows { parts: ids }, value, vec![parts.len(), c], rg, Cache::None, "stack_rows")
    }

    /// Copies the given rows of a matrix, in order.
    pub fn select_rows(&mut self, x: NodeRef, rows: &[usize]) -> Result<NodeRef> {
        let (r, c) = self.rows_cols(x.0);
        let mut value = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(Error::DimMismatch {
                    op: "select_rows",
                    expected: format!("row < {r}"),
                    got: format!("{i}"),
                });
            }
            value.extend_from_slice(&self.nodes[x.0].value()[i * c..(i + 1) * c]);
        }
        let rg = self.needs(&[x.0]);
        self.push(
            Op::SelectRows { x: x.0, rows: rows.to_vec() },
            value,
            vec![rows.len(), c],
            rg,
            Cache::None,
            "select_rows",
        )
    }

    /// Embedding lookup: row `ids[i]` of the table becomes output row `i`.
    /// Ids equal to `pad_id` produce a zero row and route no gradient, so
    /// the padding row stays frozen at its initial value.
    pub fn gather_rows(&mut self, table: NodeRef, ids: &[u32], pad_id: Option<u32>) -> Result<NodeRef> {
        let (v, d) = self.rows_cols(table.0);
        let mut value = vec![0.0; ids.len() * d];
        for (i, &id) in ids.iter().enumerate() {
            if Some(id) == pad_id {
                continue;
            }
            if id as usize >= v {
                return Err(Error::TokenIdOutOfRange { id, size: v });
            }
            let src = &self.nodes[table.0].value()[id as usize * d..(id as usize + 1) * d];
            value[i * d..(i + 1) * d].copy_from_slice(src);
        }
        let rg = self.needs(&[table.0]);
        self.push(
            Op::GatherRows { table: table.0, ids: ids.to_vec(), pad_id },
            value,
            vec![ids.len(), d],
            rg,
            Cache::None,
            "gather_rows",
        )
    }

    /// 1-d convolution over time with max-pooling, fused.
    ///
    /// `seq` is [l, d], `filters` is [f, h, d], `bias` is [f]. Only windows
    /// fully inside `valid_len` participate in the max; a sequence shorter
    /// than `h` is right-padded with zero vectors so one window always
    /// exists. Ties in the max resolve to the earliest window.
    pub fn conv1d_maxpool(
        &mut self,
        seq: NodeRef,
        filters: NodeRef,
        bias: NodeRef,
        valid_len: usize,
    ) -> Result<NodeRef> {
        let (l, d) = self.rows_cols(seq.0);
        let fshape = self.nodes[filters.0].shape.clone();
        if fshape.len() != 3 || fshape[2] != d {
            return Err(Error::ShapeMismatch {
                op: "conv1d_maxpool",
                lhs: self.nodes[seq.0].shape.clone(),
                rhs: fshape,
            });
        }
        let (f, h) = (fshape[0], fshape[1]);
        if self.nodes[bias.0].value().len() != f {
            return Err(Error::ShapeMismatch {
                op: "conv1d_maxpool",
                lhs: vec![f],
                rhs: self.nodes[bias.0].shape.clone(),
            });
        }
        let vl = valid_len.min(l).max(1);
        let windows = if vl >= h { vl - h + 1 } else { 1 };
        let seq_v = &self.nodes[seq.0].value();
        let filt_v = &self.nodes[filters.0].value();
        let bias_v = &self.nodes[bias.0].value();

        let mut out = vec![f64::NEG_INFINITY; f];
        let mut argmax = vec![0usize; f];
        for w in 0..windows {
            for j in 0..f {
                let mut acc = bias_v[j];
                let frow = &filt_v[j * h * d..(j + 1) * h * d];
                for i in 0..h {
                    let t = w + i;
                    if t >= l {
                        break; // implicit zero padding
                    }
                    let srow = &seq_v[t * d..(t + 1) * d];
                    let fr = &frow[i * d..(i + 1) * d];
                    for (s, fv) in srow.iter().zip(fr) {
                        acc += s * fv;
                    }
                }
                if acc > out[j] {
                    out[j] = acc;
                    argmax[j] = w;
                }
            }
        }
        let rg = self.needs(&[seq.0, filters.0, bias.0]);
        self.push(
            Op::Conv1dMaxPool { seq: seq.0, filters: filters.0, bias: bias.0 },
            out,
            vec![f],
            rg,
            Cache::Conv(argmax),
            "conv1d_maxpool",
        )
    }

    /// One LSTM cell step over a batch.
    ///
    /// `x` is [b, e], `h` and `c` are [b, k]; `wx` is [e, 4k], `wh` is
    /// [k, 4k], `bias` is [4k] with gate order input, forget, candidate,
    /// output. Returns `[h' | c']` of shape [b, 2k]; use [`Graph::narrow_cols`]
    /// to split.
    pub fn lstm_step(
        &mut self,
        x: NodeRef,
        h: NodeRef,
        c: NodeRef,
        wx: NodeRef,
        wh: NodeRef,
        bias: NodeRef,
    ) -> Result<NodeRef> {
        let (b, e) = self.rows_cols(x.0);
        let (bh, k) = self.rows_cols(h.0);
        let (bc, kc) = self.rows_cols(c.0);
        let (ewx, k4) = self.rows_cols(wx.0);
        let (kwh, k4h) = self.rows_cols(wh.0);
        if bh != b || bc != b || kc != k {
            return Err(Error::ShapeMismatch {
                op: "lstm_step",
                lhs: self.nodes[h.0].shape.clone(),
                rhs: self.nodes[c.0].shape.clone(),
            });
        }
        if ewx != e || k4 != 4 * k || kwh != k || k4h != 4 * k || self.nodes[bias.0].value().len() != 4 * k {
            return Err(Error::DimMismatch {
                op: "lstm_step",
                expected: format!("wx [{e},{}], wh [{k},{}], bias [{}]", 4 * k, 4 * k, 4 * k),
                got: format!(
                    "wx {:?}, wh {:?}, bias {:?}",
                    self.nodes[wx.0].shape, self.nodes[wh.0].shape, self.nodes[bias.0].shape
                ),
            });
        }

        // z = x.wx + h.wh + bias
        let mut z = matmul_raw(&self.nodes[x.0].value(), &self.nodes[wx.0].value(), b, e, 4 * k);
        let hw = matmul_raw(&self.nodes[h.0].value(), &self.nodes[wh.0].value(), b, k, 4 * k);
        for (zv, hv) in z.iter_mut().zip(&hw) {
            *zv += hv;
        }
        for row in z.chunks_mut(4 * k) {
            for (zv, bv) in row.iter_mut().zip(self.nodes[bias.0].value()) {
                *zv += bv;
            }
        }

        // gates in place: i, f, g, o
        let mut gates = z;
        let c_prev = &self.nodes[c.0].value();
        let mut out = vec![0.0; b * 2 * k];
        let mut tanh_c = vec![0.0; b * k];
        for bi in 0..b {
            let row = &mut gates[bi * 4 * k..(bi + 1) * 4 * k];
            for j in 0..k {
                row[j] = sigmoid(row[j]); // i
                row[k + j] = sigmoid(row[k + j]); // f
                row[2 * k + j] = row[2 * k + j].tanh(); // g
                row[3 * k + j] = sigmoid(row[3 * k + j]); // o
            }
            for j in 0..k {
                let c_new = row[k + j] * c_prev[bi * k + j] + row[j] * row[2 * k + j];
                let tc = c_new.tanh();
                tanh_c[bi * k + j] = tc;
                out[bi * 2 * k + j] = row[3 * k + j] * tc; // h'
                out[bi * 2 * k + k + j] = c_new; // c'
            }
        }
        let rg = self.needs(&[x.0, h.0, c.0, wx.0, wh.0, bias.0]);
        self.push(
            Op::LstmStep { x: x.0, h: h.0, c: c.0, wx: wx.0, wh: wh.0, b: bias.0 },
            out,
            vec![b, 2 * k],
            rg,
            Cache::Lstm { gates, tanh_c },
            "lstm_step",
        )
    }

    /// Row-wise softmax over unmasked columns; masked columns output zero.
    pub fn masked_softmax_rows(&mut self, scores: NodeRef, mask: &[bool]) -> Result<NodeRef> {
        let (r, c) = self.rows_cols(scores.0);
        if mask.len() != c {
            return Err(Error::DimMismatch {
                op: "masked_softmax_rows",
                expected: format!("mask of length {c}"),
                got: format!("{}", mask.len()),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptySequence("masked_softmax_rows: all positions masked"));
        }
        let sv = &self.nodes[scores.0].value();
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            let row = &sv[i * c..(i + 1) * c];
            let mut mx = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if mask[j] && v > mx {
                    mx = v;
                }
            }
            let mut denom = 0.0;
            for j in 0..c {
                if mask[j] {
                    let e = (row[j] - mx).exp();
                    value[i * c + j] = e;
                    denom += e;
                }
            }
            for j in 0..c {
                value[i * c + j] /= denom;
            }
        }
        let rg = self.needs(&[scores.0]);
        self.push(
            Op::MaskedSoftmaxRows { scores: scores.0, mask: mask.to_vec() },
            value,
            vec![r, c],
            rg,
            Cache::None,
            "masked_softmax_rows",
        )
    }

    /// Per-row layer normalization with learned scale and shift.
    pub fn layer_norm(&mut self, x: NodeRef, gamma: NodeRef, beta: NodeRef) -> Result<NodeRef> {
        let (r, c) = self.rows_cols(x.0);
        if self.nodes[gamma.0].value().len() != c || self.nodes[beta.0].value().len() != c {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: vec![c],
                rhs: self.nodes[gamma.0].shape.clone(),
            });
        }
        let xv = &self.nodes[x.0].value();
        let gv = &self.nodes[gamma.0].value();
        let bv = &self.nodes[beta.0].value();
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for j in 0..c {
                value[i * c + j] = (row[j] - mean) * inv * gv[j] + bv[j];
            }
        }
        let shape = self.nodes[x.0].shape.clone();
        let rg = self.needs(&[x.0, gamma.0, beta.0]);
        self.push(
            Op::LayerNorm { x: x.0, gamma: gamma.0, beta: beta.0 },
            value,
            shape,
            rg,
            Cache::None,
            "layer_norm",
        )
    }

    /// Numerically stable softmax over a vector.
    pub fn softmax_vec(&mut self, logits: NodeRef) -> Result<NodeRef> {
        let v = &self.nodes[logits.0].value();
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let value: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let shape = self.nodes[logits.0].shape.clone();
        let rg = self.needs(&[logits.0]);
        self.push(Op::SoftmaxVec { logits: logits.0 }, value, shape, rg, Cache::None, "softmax_vec")
    }

    /// Softmax probabilities plus cross-entropy loss against one label.
    ///
    /// Returns `(probs, loss)`; both are differentiable w.r.t. the logits.
    pub fn softmax_xent(&mut self, logits: NodeRef, label: usize) -> Result<(NodeRef, NodeRef)> {
        let n = self.nodes[logits.0].value().len();
        if n < 2 {
            return Err(Error::DimMismatch {
                op: "softmax_xent",
                expected: "at least 2 classes".into(),
                got: format!("{n}"),
            });
        }
        if label >= n {
            return Err(Error::LabelOutOfRange { label, classes: n });
        }
        let probs = self.softmax_vec(logits)?;
        let pv = self.nodes[probs.0].value().to_vec();
        let v = &self.nodes[logits.0].value();
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln() + mx;
        let loss = lse - v[label];
        let rg = self.needs(&[logits.0]);
        let loss_node = self.push(
            Op::XentLoss { logits: logits.0, label },
            vec![loss],
            vec![1],
            rg,
            Cache::Probs(pv),
            "softmax_xent",
        )?;
        Ok((probs, loss_node))
    }

    /// Mean cross-entropy over a batch of logit rows.
    pub fn softmax_xent_batch(&mut self, logits: NodeRef, labels: &[u32]) -> Result<NodeRef> {
        let (b, c) = self.rows_cols(logits.0);
        if labels.len() != b {
            return Err(Error::DimMismatch {
                op: "softmax_xent_batch",
                expected: format!("{b} labels"),
                got: format!("{}", labels.len()),
            });
        }
        let v = &self.nodes[logits.0].value();
        let mut probs = vec![0.0; b * c];
        let mut total = 0.0;
        for i in 0..b {
            let label = labels[i] as usize;
            if label >= c {
                return Err(Error::LabelOutOfRange { label, classes: c });
            }
            let row = &v[i * c..(i + 1) * c];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..c {
                let e = (row[j] - mx).exp();
                probs[i * c + j] = e;
                denom += e;
            }
            for j in 0..c {
                probs[i * c + j] /= denom;
            }
            total += denom.ln() + mx - row[label];
        }
        let rg = self.needs(&[logits.0]);
        self.push(
            Op::XentLossBatch { logits: logits.0, labels: labels.to_vec() },
            vec![total / b as f64],
            vec![1],
            rg,
            Cache::Probs(probs),
            "softmax_xent_batch",
        )
    }

    /// Multi-head self-attention block with residuals and post-layer-norm.
    ///
    /// `x` is [l, d]; `mask[j]` marks which positions may be attended to.
    /// Order: attention, add, norm, feed-forward (GELU), add, norm.
    pub fn attention_block(
        &mut self,
        x: NodeRef,
        params: &AttentionParams,
        heads: usize,
        mask: &[bool],
    ) -> Result<NodeRef> {
        let (l, d) = self.rows_cols(x.0);
        if heads == 0 || d % heads != 0 {
            return Err(Error::DimMismatch {
                op: "attention_block",
                expected: format!("model dim {d} divisible by heads"),
                got: format!("{heads} heads"),
            });
        }
        if mask.len() != l {
            return Err(Error::DimMismatch {
                op: "attention_block",
                expected: format!("mask of length {l}"),
                got: format!("{}", mask.len()),
            });
        }
        let dh = d / heads;
        let q0 = self.matmul(x, params.wq)?;
        let q = self.add_row(q0, params.bq)?;
        let k0 = self.matmul(x, params.wk)?;
        let k = self.add_row(k0, params.bk)?;
        let v0 = self.matmul(x, params.wv)?;
        let v = self.add_row(v0, params.bv)?;

        let mut heads_out: Option<NodeRef> = None;
        for hix in 0..heads {
            let qh = self.narrow_cols(q, hix * dh, dh)?;
            let kh = self.narrow_cols(k, hix * dh, dh)?;
            let vh = self.narrow_cols(v, hix * dh, dh)?;
            let scores0 = self.matmul_nt(qh, kh)?;
            let scores = self.scale(scores0, 1.0 / (dh as f64).sqrt())?;
            let attn = self.masked_softmax_rows(scores, mask)?;
            let oh = self.matmul(attn, vh)?;
            heads_out = Some(match heads_out {
                None => oh,
                Some(acc) => self.concat_cols(acc, oh)?,
            });
        }
        let concat = heads_out.expect("heads >= 1");
        let proj0 = self.matmul(concat, params.wo)?;
        let proj = self.add_row(proj0, params.bo)?;
        let res1 = self.add(x, proj)?;
        let n1 = self.layer_norm(res1, params.norm1_gamma, params.norm1_beta)?;

        let ff0 = self.matmul(n1, params.w1)?;
        let ff1 = self.add_row(ff0, params.b1)?;
        let act = self.gelu(ff1)?;
        let ff2 = self.matmul(act, params.w2)?;
        let ff = self.add_row(ff2, params.b2)?;
        let res2 = self.add(n1, ff)?;
        self.layer_norm(res2, params.norm2_gamma, params.norm2_beta)
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Reverse-topological gradient accumulation from a scalar root.
    /// Nodes used in several places receive the sum of their uses.
    pub fn backward(&mut self, root: NodeRef) -> Result<()> {
        if self.nodes[root.0].value().len() != 1 {
            return Err(Error::NonScalarRoot {
                shape: self.nodes[root.0].shape.clone(),
            });
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.apply_backward(idx, &g);
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accum(&mut self, node: usize, delta: &[f64]) {
        if !self.nodes[node].requires_grad {
            return;
        }
        let slot = &mut self.grads[node];
        match slot {
            Some(g) => {
                for (gv, dv) in g.iter_mut().zip(delta) {
                    *gv += dv;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    fn apply_backward(&mut self, idx: usize, g: &[f64]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k) = self.rows_cols(a);
                let (_, n) = self.rows_cols(b);
                if self.nodes[a].requires_grad {
                    let da = matmul_nt_raw(g, &self.nodes[b].value(), m, n, k);
                    self.accum(a, &da);
                }
                if self.nodes[b].requires_grad {
                    let db = matmul_tn_raw(&self.nodes[a].value(), g, m, k, n);
                    self.accum(b, &db);
                }
            }
            Op::MatmulNt { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k) = self.rows_cols(a);
                let (n, _) = self.rows_cols(b);
                if self.nodes[a].requires_grad {
                    let da = matmul_raw(g, &self.nodes[b].value(), m, n, k);
                    self.accum(a, &da);
                }
                if self.nodes[b].requires_grad {
                    let db = matmul_tn_raw(g, &self.nodes[a].value(), m, n, k);
                    self.accum(b, &db);
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.accum(a, g);
                self.accum(b, g);
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                if self.nodes[a].requires_grad {
                    let da: Vec<f64> = g.iter().zip(self.nodes[b].value()).map(|(gv, bv)| gv * bv).collect();
                    self.accum(a, &da);
                }
                if self.nodes[b].requires_grad {
                    let db: Vec<f64> = g.iter().zip(self.nodes[a].value()).map(|(gv, av)| gv * av).collect();
                    self.accum(b, &db);
                }
            }
            Op::AddRow { x, bias } => {
                let (x, bias) = (*x, *bias);
                let c = self.nodes[bias].value().len();
                self.accum(x, g);
                if self.nodes[bias].requires_grad {
                    let mut db = vec![0.0; c];
                    for row in g.chunks(c) {
                        for (d, gv) in db.iter_mut().zip(row) {
                            *d += gv;
                        }
                    }
                    self.accum(bias, &db);
                }
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let dx: Vec<f64> = g
                    .iter()
                    .zip(self.nodes[idx].value())
                    .map(|(gv, s)| gv * s * (1.0 - s))
                    .collect();
                self.accum(x, &dx);
            }
            Op::Tanh { x } => {
                let x = *x;
                let dx: Vec<f64> = g
                    .iter()
                    .zip(self.nodes[idx].value())
                    .map(|(gv, t)| gv * (1.0 - t * t))
                    .collect();
                self.accum(x, &dx);
            }
            Op::Relu { x } => {
                let x = *x;
                let dx: Vec<f64> = g
                    .iter()
                    .zip(self.nodes[x].value())
                    .map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.accum(x, &dx);
            }
            Op::Gelu { x } => {
                let x = *x;
                let dx: Vec<f64> = g
                    .iter()
                    .zip(self.nodes[x].value())
                    .map(|(gv, v)| gv * gelu_grad(*v))
                    .collect();
                self.accum(x, &dx);
            }
            Op::Scale { x, factor } => {
                let (x, factor) = (*x, *factor);
                let dx: Vec<f64> = g.iter().map(|gv| gv * factor).collect();
                self.accum(x, &dx);
            }
            Op::Sum { x } => {
                let x = *x;
                let dx = vec![g[0]; self.nodes[x].value().len()];
                self.accum(x, &dx);
            }
            Op::ConcatCols { a, b } => {
                let (a, b) = (*a, *b);
                let (r, ca) = self.rows_cols(a);
                let (_, cb) = self.rows_cols(b);
                if self.nodes[a].requires_grad {
                    let mut da = vec![0.0; r * ca];
                    for i in 0..r {
                        da[i * ca..(i + 1) * ca].copy_from_slice(&g[i * (ca + cb)..i * (ca + cb) + ca]);
                    }
                    self.accum(a, &da);
                }
                if self.nodes[b].requires_grad {
                    let mut db = vec![0.0; r * cb];
                    for i in 0..r {
                        db[i * cb..(i + 1) * cb]
                            .copy_from_slice(&g[i * (ca + cb) + ca..(i + 1) * (ca + cb)]);
                    }
                    self.accum(b, &db);
                }
            }
            Op::NarrowCols { x, start, len } => {
                let (x, start, len) = (*x, *start, *len);
                let (r, c) = self.rows_cols(x);
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    dx[i * c + start..i * c + start + len].copy_from_slice(&g[i * len..(i + 1) * len]);
                }
                self.accum(x, &dx);
            }
            Op::StackRows { parts } => {
                let parts = parts.clone();
                let c = self.nodes[parts[0]].value().len();
                for (i, p) in parts.iter().enumerate() {
                    self.accum(*p, &g[i * c..(i + 1) * c]);
                }
            }
            Op::SelectRows { x, rows } => {
                let x = *x;
                let rows = rows.clone();
                let (r, c) = self.rows_cols(x);
                let mut dx = vec![0.0; r * c];
                for (i, &src) in rows.iter().enumerate() {
                    for j in 0..c {
                        dx[src * c + j] += g[i * c + j];
                    }
                }
                self.accum(x, &dx);
            }
            Op::GatherRows { table, ids, pad_id } => {
                let table = *table;
                let ids = ids.clone();
                let pad_id = *pad_id;
                let (v, d) = self.rows_cols(table);
                let mut dt = vec![0.0; v * d];
                for (i, &id) in ids.iter().enumerate() {
                    if Some(id) == pad_id {
                        continue;
                    }
                    for j in 0..d {
                        dt[id as usize * d + j] += g[i * d + j];
                    }
                }
                self.accum(table, &dt);
            }
            Op::Conv1dMaxPool { seq, filters, bias } => {
                let (seq, filters, bias) = (*seq, *filters, *bias);
                let argmax = match &self.nodes[idx].cache {
                    Cache::Conv(a) => a.clone(),
                    _ => unreachable!("conv node without argmax cache"),
                };
                let (l, d) = self.rows_cols(seq);
                let fshape = self.nodes[filters].shape.clone();
                let (f, h) = (fshape[0], fshape[1]);
                let mut dseq = vec![0.0; l * d];
                let mut dfil = vec![0.0; f * h * d];
                let mut dbias = vec![0.0; f];
                for j in 0..f {
                    let gj = g[j];
                    dbias[j] += gj;
                    let w = argmax[j];
                    for i in 0..h {
                        let t = w + i;
                        if t >= l {
                            break;
                        }
                        for cx in 0..d {
                            dfil[j * h * d + i * d + cx] += gj * self.nodes[seq].value()[t * d + cx];
                            dseq[t * d + cx] += gj * self.nodes[filters].value()[j * h * d + i * d + cx];
                        }
                    }
                }
                self.accum(seq, &dseq);
                self.accum(filters, &dfil);
                self.accum(bias, &dbias);
            }
            Op::LstmStep { x, h, c, wx, wh, b } => {
                let (x, h, c, wx, wh, bias) = (*x, *h, *c, *wx, *wh, *b);
                let (bsz, e) = self.rows_cols(x);
                let (_, k) = self.rows_cols(h);
                let (gates, tanh_c) = match &self.nodes[idx].cache {
                    Cache::Lstm { gates, tanh_c } => (gates.clone(), tanh_c.clone()),
                    _ => unreachable!("lstm node without cache"),
                };
                let c_prev = &self.nodes[c].value();
                let mut dz = vec![0.0; bsz * 4 * k];
                let mut dc_prev = vec![0.0; bsz * k];
                for bi in 0..bsz {
                    let grow = &g[bi * 2 * k..(bi + 1) * 2 * k];
                    let gr = &gates[bi * 4 * k..(bi + 1) * 4 * k];
                    for j in 0..k {
                        let (gi, gf, gg, go) = (gr[j], gr[k + j], gr[2 * k + j], gr[3 * k + j]);
                        let tc = tanh_c[bi * k + j];
                        let dh_new = grow[j];
                        let dc_ext = grow[k + j];
                        let d_o = dh_new * tc;
                        let dc_new = dc_ext + dh_new * go * (1.0 - tc * tc);
                        let d_f = dc_new * c_prev[bi * k + j];
                        let d_i = dc_new * gg;
                        let d_g = dc_new * gi;
                        dc_prev[bi * k + j] = dc_new * gf;
                        dz[bi * 4 * k + j] = d_i * gi * (1.0 - gi);
                        dz[bi * 4 * k + k + j] = d_f * gf * (1.0 - gf);
                        dz[bi * 4 * k + 2 * k + j] = d_g * (1.0 - gg * gg);
                        dz[bi * 4 * k + 3 * k + j] = d_o * go * (1.0 - go);
                    }
                }
                if self.nodes[x].requires_grad {
                    let dx = matmul_nt_raw(&dz, &self.nodes[wx].value(), bsz, 4 * k, e);
                    self.accum(x, &dx);
                }
                if self.nodes[h].requires_grad {
                    let dh = matmul_nt_raw(&dz, &self.nodes[wh].value(), bsz, 4 * k, k);
                    self.accum(h, &dh);
                }
                self.accum(c, &dc_prev);
                if self.nodes[wx].requires_grad {
                    let dwx = matmul_tn_raw(&self.nodes[x].value(), &dz, bsz, e, 4 * k);
                    self.accum(wx, &dwx);
                }
                if self.nodes[wh].requires_grad {
                    let dwh = matmul_tn_raw(&self.nodes[h].value(), &dz, bsz, k, 4 * k);
                    self.accum(wh, &dwh);
                }
                if self.nodes[bias].requires_grad {
                    let mut db = vec![0.0; 4 * k];
                    for row in dz.chunks(4 * k) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accum(bias, &db);
                }
            }
            Op::MaskedSoftmaxRows { scores, mask } => {
                let scores = *scores;
                let mask = mask.clone();
                let (r, c) = self.rows_cols(scores);
                let out = &self.nodes[idx].value();
                let mut ds = vec![0.0; r * c];
                for i in 0..r {
                    let mut dot = 0.0;
                    for j in 0..c {
                        if mask[j] {
                            dot += g[i * c + j] * out[i * c + j];
                        }
                    }
                    for j in 0..c {
                        if mask[j] {
                            ds[i * c + j] = out[i * c + j] * (g[i * c + j] - dot);
                        }
                    }
                }
                self.accum(scores, &ds);
            }
            Op::LayerNorm { x, gamma, beta } => {
                let (x, gamma, beta) = (*x, *gamma, *beta);
                let (r, c) = self.rows_cols(x);
                let xv = &self.nodes[x].value();
                let gv = &self.nodes[gamma].value();
                let mut dx = vec![0.0; r * c];
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for i in 0..r {
                    let row = &xv[i * c..(i + 1) * c];
                    let grow = &g[i * c..(i + 1) * c];
                    let mean = row.iter().sum::<f64>() / c as f64;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                    let inv = 1.0 / (var + LN_EPS).sqrt();
                    let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                    let mut dxhat = vec![0.0; c];
                    for j in 0..c {
                        dgamma[j] += grow[j] * xhat[j];
                        dbeta[j] += grow[j];
                        dxhat[j] = grow[j] * gv[j];
                    }
                    let sum_dxhat: f64 = dxhat.iter().sum();
                    let sum_dxhat_xhat: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
                    let cf = c as f64;
                    for j in 0..c {
                        dx[i * c + j] =
                            inv / cf * (cf * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
                    }
                }
                self.accum(x, &dx);
                self.accum(gamma, &dgamma);
                self.accum(beta, &dbeta);
            }
            Op::SoftmaxVec { logits } => {
                let logits = *logits;
                let out = self.nodes[idx].value();
                let dot: f64 = g.iter().zip(out).map(|(gv, s)| gv * s).sum();
                let dl: Vec<f64> = g.iter().zip(out).map(|(gv, s)| s * (gv - dot)).collect();
                self.accum(logits, &dl);
            }
            Op::XentLoss { logits, label } => {
                let (logits, label) = (*logits, *label);
                let probs = match &self.nodes[idx].cache {
                    Cache::Probs(p) => p.clone(),
                    _ => unreachable!("xent node without probs cache"),
                };
                let mut dl: Vec<f64> = probs.iter().map(|p| g[0] * p).collect();
                dl[label] -= g[0];
                self.accum(logits, &dl);
            }
            Op::XentLossBatch { logits, labels } => {
                let logits = *logits;
                let labels = labels.clone();
                let probs = match &self.nodes[idx].cache {
                    Cache::Probs(p) => p.clone(),
                    _ => unreachable!("xent batch node without probs cache"),
                };
                let b = labels.len();
                let c = probs.len() / b;
                let scale = g[0] / b as f64;
                let mut dl: Vec<f64> = probs.iter().map(|p| scale * p).collect();
                for (i, &label) in labels.iter().enumerate() {
                    dl[i * c + label as usize] -= scale;
                }
                self.accum(logits, &dl);
            }
        }
    }
}

/// Node handles for one attention block's parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub wq: NodeRef,
    pub bq: NodeRef,
    pub wk: NodeRef,
    pub bk: NodeRef,
    pub wv: NodeRef,
    pub bv: NodeRef,
    pub wo: NodeRef,
    pub bo: NodeRef,
    pub w1: NodeRef,
    pub b1: NodeRef,
    pub w2: NodeRef,
    pub b2: NodeRef,
    pub norm1_gamma: NodeRef,
    pub norm1_beta: NodeRef,
    pub norm2_gamma: NodeRef,
    pub norm2_beta: NodeRef,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    let sech2 = 1.0 - t * t;
    let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * sech2 * dinner
}

/// `a[m,k] . b[k,n]`, row-major.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `a[m,k] . b[n,k]^T` -> [m,n].
pub(crate) fn matmul_nt_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `a[m,r]^T . b[m,n]` -> [r,n].
pub(crate) fn matmul_tn_raw(a: &[f64], b: &[f64], m: usize, r: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; r * n];
    for i in 0..m {
        let arow = &a[i * r..(i + 1) * r];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}
