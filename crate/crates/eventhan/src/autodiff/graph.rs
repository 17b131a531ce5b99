use super::{AutodiffError, Tensor};

/// Handle to a node in a [`Graph`]. Valid only for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: bool },
    Matmul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    Exp { x: Var },
    Concat { a: Var, b: Var, axis: usize },
    MaskedSoftmax { x: Var, mask: Vec<bool> },
    Row { table: Var, index: usize },
    Sum { x: Var },
    CrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Vec<f64>,
}

/// Define-by-run computation tape. Nodes are recorded in creation order,
/// which is already a topological order, and the backward pass walks the
/// tape once in reverse.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, values: Vec<f64>) -> Var {
        let n = values.len();
        debug_assert_eq!(n, shape.iter().product::<usize>());
        self.nodes.push(Node {
            op,
            shape,
            values,
            grad: vec![0.0; n],
        });
        Var(self.nodes.len() - 1)
    }

    /// Register a parameter leaf. Values are copied in; gradients are read
    /// back out after [`Graph::backward`].
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(
            Op::Leaf { param: true },
            t.shape().to_vec(),
            t.values().to_vec(),
        )
    }

    /// Register a non-parameter leaf (inputs, constants).
    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        let values = t.values().to_vec();
        self.push(Op::Leaf { param: false }, shape, values)
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> Var {
        let n = shape.iter().product();
        self.push(Op::Leaf { param: false }, shape, vec![0.0; n])
    }

    pub fn ones(&mut self, shape: Vec<usize>) -> Var {
        let n = shape.iter().product();
        self.push(Op::Leaf { param: false }, shape, vec![1.0; n])
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].values
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].values.clone())
            .expect("graph node holds a consistent shape")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        {
            let av = &self.nodes[a.0].values;
            let bv = &self.nodes[b.0].values;
            for i in 0..m {
                for p in 0..k {
                    let aip = av[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &bv[p * n..(p + 1) * n];
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (o, bpj) in orow.iter_mut().zip(brow) {
                        *o += aip * bpj;
                    }
                }
            }
        }
        Ok(self.push(Op::Matmul { a, b }, vec![m, n], out))
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Vec<usize>, Vec<f64>), AutodiffError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch {
                op: op_name,
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok((sa.clone(), values))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (shape, values) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add { a, b }, shape, values))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (shape, values) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(Op::Sub { a, b }, shape, values))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (shape, values) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul { a, b }, shape, values))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let values = self.nodes[x.0].values.iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid { x }, shape, values)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let values = self.nodes[x.0].values.iter().map(|&v| v.tanh()).collect();
        self.push(Op::Tanh { x }, shape, values)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let values = self.nodes[x.0].values.iter().map(|&v| v.exp()).collect();
        self.push(Op::Exp { x }, shape, values)
    }

    /// Concatenate along `axis`. All other extents must agree.
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var, AutodiffError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        let compatible = sa.len() == sb.len()
            && axis < sa.len()
            && sa
                .iter()
                .zip(sb.iter())
                .enumerate()
                .all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let mut shape = sa.clone();
        shape[axis] = sa[axis] + sb[axis];
        let inner: usize = sa[axis + 1..].iter().product();
        let outer: usize = sa[..axis].iter().product();
        let block_a = sa[axis] * inner;
        let block_b = sb[axis] * inner;
        let mut values = Vec::with_capacity(outer * (block_a + block_b));
        for o in 0..outer {
            values.extend_from_slice(&self.nodes[a.0].values[o * block_a..(o + 1) * block_a]);
            values.extend_from_slice(&self.nodes[b.0].values[o * block_b..(o + 1) * block_b]);
        }
        Ok(self.push(Op::Concat { a, b, axis }, shape, values))
    }

    /// Softmax over the flattened tensor, restricted to unmasked positions.
    /// Masked positions produce exactly zero. Stabilized by subtracting the
    /// unmasked maximum before exponentiation.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var, AutodiffError> {
        let xs = &self.nodes[x.0].values;
        if xs.len() != mask.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "masked_softmax",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: vec![mask.len()],
            });
        }
        let max = xs
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(AutodiffError::AllMasked);
        }
        let mut values: Vec<f64> = xs
            .iter()
            .zip(mask)
            .map(|(&v, &m)| if m { (v - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = values.iter().sum();
        for v in &mut values {
            *v /= total;
        }
        let shape = self.nodes[x.0].shape.clone();
        Ok(self.push(
            Op::MaskedSoftmax {
                x,
                mask: mask.to_vec(),
            },
            shape,
            values,
        ))
    }

    /// Slice one row of a `[rows, cols]` table as a `[cols, 1]` column.
    /// Backward accumulates into that row, so tables of trainable
    /// embeddings get per-row gradients.
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var, AutodiffError> {
        let shape = &self.nodes[table.0].shape;
        if shape.len() != 2 || index >= shape[0] {
            return Err(AutodiffError::RowOutOfRange {
                index,
                shape: shape.clone(),
            });
        }
        let cols = shape[1];
        let values = self.nodes[table.0].values[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(Op::Row { table, index }, vec![cols, 1], values))
    }

    /// Sum of all entries, as a `[1, 1]` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.nodes[x.0].values.iter().sum();
        self.push(Op::Sum { x }, vec![1, 1], vec![total])
    }

    /// Cross-entropy of a `[c, 1]` logit vector against an integer label:
    /// `-log softmax(logits)[label]`, stabilized by max subtraction.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, AutodiffError> {
        let xs = &self.nodes[logits.0].values;
        let classes = xs.len();
        if label >= classes {
            return Err(AutodiffError::LabelOutOfRange { label, classes });
        }
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|&e| e / total).collect();
        let loss = total.ln() - (xs[label] - max);
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                label,
                probs,
            },
            vec![1, 1],
            vec![loss],
        ))
    }

    /// Reverse-mode sweep from a scalar `loss`. Each call seeds a unit
    /// gradient at the loss and adds its contribution into every node's
    /// persistent gradient, so repeated calls accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.nodes[loss.0].values.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(
                self.nodes[loss.0].shape.clone(),
            ));
        }
        // Fresh buffers per sweep keep earlier accumulated gradients from
        // being re-propagated.
        let mut adj: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .take(loss.0 + 1)
            .map(|n| vec![0.0; n.values.len()])
            .collect();
        adj[loss.0][0] = 1.0;

        for i in (0..=loss.0).rev() {
            if adj[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let upstream = std::mem::take(&mut adj[i]);
            match &self.nodes[i].op {
                Op::Leaf { .. } => {
                    adj[i] = upstream;
                    continue;
                }
                Op::Matmul { a, b } => {
                    let (a, b) = (*a, *b);
                    let m = self.nodes[a.0].shape[0];
                    let k = self.nodes[a.0].shape[1];
                    let n = self.nodes[b.0].shape[1];
                    let av = &self.nodes[a.0].values;
                    let bv = &self.nodes[b.0].values;
                    // dA = dC * B^T
                    for i2 in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += upstream[i2 * n + j] * bv[p * n + j];
                            }
                            adj[a.0][i2 * k + p] += acc;
                        }
                    }
                    // dB = A^T * dC
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i2 in 0..m {
                                acc += av[i2 * k + p] * upstream[i2 * n + j];
                            }
                            adj[b.0][p * n + j] += acc;
                        }
                    }
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    for (j, &g) in upstream.iter().enumerate() {
                        adj[a.0][j] += g;
                        adj[b.0][j] += g;
                    }
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    for (j, &g) in upstream.iter().enumerate() {
                        adj[a.0][j] += g;
                        adj[b.0][j] -= g;
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    for j in 0..upstream.len() {
                        let g = upstream[j];
                        let av = self.nodes[a.0].values[j];
                        let bv = self.nodes[b.0].values[j];
                        adj[a.0][j] += g * bv;
                        adj[b.0][j] += g * av;
                    }
                }
                Op::Sigmoid { x } => {
                    let x = *x;
                    for j in 0..upstream.len() {
                        let y = self.nodes[i].values[j];
                        adj[x.0][j] += upstream[j] * y * (1.0 - y);
                    }
                }
                Op::Tanh { x } => {
                    let x = *x;
                    for j in 0..upstream.len() {
                        let y = self.nodes[i].values[j];
                        adj[x.0][j] += upstream[j] * (1.0 - y * y);
                    }
                }
                Op::Exp { x } => {
                    let x = *x;
                    for j in 0..upstream.len() {
                        adj[x.0][j] += upstream[j] * self.nodes[i].values[j];
                    }
                }
                Op::Concat { a, b, axis } => {
                    let (a, b, axis) = (*a, *b, *axis);
                    let sa = &self.nodes[a.0].shape;
                    let sb = &self.nodes[b.0].shape;
                    let inner: usize = sa[axis + 1..].iter().product();
                    let outer: usize = sa[..axis].iter().product();
                    let block_a = sa[axis] * inner;
                    let block_b = sb[axis] * inner;
                    for o in 0..outer {
                        let base = o * (block_a + block_b);
                        for j in 0..block_a {
                            adj[a.0][o * block_a + j] += upstream[base + j];
                        }
                        for j in 0..block_b {
                            adj[b.0][o * block_b + j] += upstream[base + block_a + j];
                        }
                    }
                }
                Op::MaskedSoftmax { x, mask } => {
                    let x = *x;
                    let y = &self.nodes[i].values;
                    let dot: f64 = upstream
                        .iter()
                        .zip(y)
                        .zip(mask)
                        .filter(|(_, &m)| m)
                        .map(|((&g, &yi), _)| g * yi)
                        .sum();
                    let mask = mask.clone();
                    for j in 0..upstream.len() {
                        if mask[j] {
                            adj[x.0][j] += y[j] * (upstream[j] - dot);
                        }
                    }
                }
                Op::Row { table, index } => {
                    let (table, index) = (*table, *index);
                    let cols = self.nodes[table.0].shape[1];
                    for (j, &g) in upstream.iter().enumerate() {
                        adj[table.0][index * cols + j] += g;
                    }
                }
                Op::Sum { x } => {
                    let x = *x;
                    let g = upstream[0];
                    for v in adj[x.0].iter_mut() {
                        *v += g;
                    }
                }
                Op::CrossEntropy {
                    logits,
                    label,
                    probs,
                } => {
                    let (logits, label) = (*logits, *label);
                    let g = upstream[0];
                    let probs = probs.clone();
                    for (j, &p) in probs.iter().enumerate() {
                        let onehot = if j == label { 1.0 } else { 0.0 };
                        adj[logits.0][j] += g * (p - onehot);
                    }
                }
            }
            adj[i] = upstream;
        }

        for (node, contribution) in self.nodes.iter_mut().zip(adj) {
            for (g, c) in node.grad.iter_mut().zip(contribution) {
                *g += c;
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
