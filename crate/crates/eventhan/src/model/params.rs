use std::collections::HashMap;

use rand::Rng;

use super::{EmbedderMode, HanConfig};
use crate::autodiff::{Graph, Tensor, Var};

/// One GRU direction: update gate, reset gate, candidate state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        GruParams {
            w_z: uniform_init(hidden, input, rng),
            u_z: uniform_init(hidden, hidden, rng),
            b_z: Tensor::zeros(vec![hidden, 1]),
            w_r: uniform_init(hidden, input, rng),
            u_r: uniform_init(hidden, hidden, rng),
            b_r: Tensor::zeros(vec![hidden, 1]),
            w_h: uniform_init(hidden, input, rng),
            u_h: uniform_init(hidden, hidden, rng),
            b_h: Tensor::zeros(vec![hidden, 1]),
        }
    }

    fn zeroed(input: usize, hidden: usize) -> Self {
        GruParams {
            w_z: Tensor::zeros(vec![hidden, input]),
            u_z: Tensor::zeros(vec![hidden, hidden]),
            b_z: Tensor::zeros(vec![hidden, 1]),
            w_r: Tensor::zeros(vec![hidden, input]),
            u_r: Tensor::zeros(vec![hidden, hidden]),
            b_r: Tensor::zeros(vec![hidden, 1]),
            w_h: Tensor::zeros(vec![hidden, input]),
            u_h: Tensor::zeros(vec![hidden, hidden]),
            b_h: Tensor::zeros(vec![hidden, 1]),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(format!("{prefix}.w_z"), &self.w_z);
        f(format!("{prefix}.u_z"), &self.u_z);
        f(format!("{prefix}.b_z"), &self.b_z);
        f(format!("{prefix}.w_r"), &self.w_r);
        f(format!("{prefix}.u_r"), &self.u_r);
        f(format!("{prefix}.b_r"), &self.b_r);
        f(format!("{prefix}.w_h"), &self.w_h);
        f(format!("{prefix}.u_h"), &self.u_h);
        f(format!("{prefix}.b_h"), &self.b_h);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(format!("{prefix}.w_z"), &mut self.w_z);
        f(format!("{prefix}.u_z"), &mut self.u_z);
        f(format!("{prefix}.b_z"), &mut self.b_z);
        f(format!("{prefix}.w_r"), &mut self.w_r);
        f(format!("{prefix}.u_r"), &mut self.u_r);
        f(format!("{prefix}.b_r"), &mut self.b_r);
        f(format!("{prefix}.w_h"), &mut self.w_h);
        f(format!("{prefix}.u_h"), &mut self.u_h);
        f(format!("{prefix}.b_h"), &mut self.b_h);
    }
}

/// Attention block: `u = σ(W h + b)`, score `= θ · u`, weights by masked
/// softmax over scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w: Tensor,
    pub b: Tensor,
    /// Context vector θ, stored as a `[1, d_a]` row so the score is a matmul.
    pub theta: Tensor,
}

impl AttentionParams {
    fn init(state: usize, attention: usize, rng: &mut impl Rng) -> Self {
        AttentionParams {
            w: uniform_init(attention, state, rng),
            b: Tensor::zeros(vec![attention, 1]),
            theta: uniform_init(1, attention, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(format!("{prefix}.w"), &self.w);
        f(format!("{prefix}.b"), &self.b);
        f(format!("{prefix}.theta"), &self.theta);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(format!("{prefix}.w"), &mut self.w);
        f(format!("{prefix}.b"), &mut self.b);
        f(format!("{prefix}.theta"), &mut self.theta);
    }
}

/// One hierarchy level: forward GRU, backward GRU, attention pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelParams {
    pub fwd: GruParams,
    pub bwd: GruParams,
    pub attention: AttentionParams,
}

impl LevelParams {
    fn init(input: usize, hidden: usize, attention: usize, rng: &mut impl Rng) -> Self {
        LevelParams {
            fwd: GruParams::init(input, hidden, rng),
            bwd: GruParams::init(input, hidden, rng),
            attention: AttentionParams::init(2 * hidden, attention, rng),
        }
    }

    /// All GRU weights zero (the σ(0)=0.5 mixing regime); attention intact.
    pub fn zero_gru(&mut self) {
        let hidden = self.fwd.b_z.shape()[0];
        let input = self.fwd.w_z.shape()[1];
        self.fwd = GruParams::zeroed(input, hidden);
        self.bwd = GruParams::zeroed(input, hidden);
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.fwd.visit(&format!("{prefix}.fwd"), f);
        self.bwd.visit(&format!("{prefix}.bwd"), f);
        self.attention.visit(&format!("{prefix}.attn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.fwd.visit_mut(&format!("{prefix}.fwd"), f);
        self.bwd.visit_mut(&format!("{prefix}.bwd"), f);
        self.attention.visit_mut(&format!("{prefix}.attn"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// Hidden layers followed by the output layer; hidden layers use tanh.
    pub layers: Vec<DenseParams>,
}

/// Trainable token table plus its vocabulary. Index 0 is the
/// out-of-vocabulary slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingParams {
    pub vocab: Vec<String>,
    pub index: HashMap<String, usize>,
    pub table: Tensor,
}

pub const UNK_TOKEN: &str = "<unk>";

impl EmbeddingParams {
    /// Fresh random table over `tokens` (deduplicated, order-preserving).
    pub fn fresh(tokens: &[String], dim: usize, rng: &mut impl Rng) -> Self {
        let mut vocab = vec![UNK_TOKEN.to_string()];
        let mut index = HashMap::from([(UNK_TOKEN.to_string(), 0)]);
        for t in tokens {
            if !index.contains_key(t) {
                index.insert(t.clone(), vocab.len());
                vocab.push(t.clone());
            }
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut values = vec![0.0; vocab.len() * dim];
        // Row 0 stays zero: unknown tokens start silent.
        for v in values.iter_mut().skip(dim) {
            *v = rng.random_range(-bound..bound);
        }
        let table = Tensor::matrix(vocab.len(), dim, values).expect("consistent table shape");
        EmbeddingParams {
            vocab,
            index,
            table,
        }
    }

    /// Table seeded from pretrained vectors (kept tunable).
    pub fn pretrained(entries: &[(String, Vec<f64>)], dim: usize) -> Self {
        let mut vocab = vec![UNK_TOKEN.to_string()];
        let mut index = HashMap::from([(UNK_TOKEN.to_string(), 0)]);
        let mut values = vec![0.0; dim];
        for (token, vector) in entries {
            if index.contains_key(token) {
                continue;
            }
            index.insert(token.clone(), vocab.len());
            vocab.push(token.clone());
            values.extend_from_slice(vector);
        }
        let table = Tensor::matrix(vocab.len(), dim, values).expect("consistent table shape");
        EmbeddingParams {
            vocab,
            index,
            table,
        }
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }
}

/// Every trainable weight in the network, visited in a fixed order so that
/// initialization, checkpoints, and optimizer state all agree.
#[derive(Debug, Clone, PartialEq)]
pub struct HanParams {
    pub config: HanConfig,
    pub embedding: Option<EmbeddingParams>,
    pub word_level: Option<LevelParams>,
    pub event_level: LevelParams,
    pub news_level: LevelParams,
    pub temporal_level: LevelParams,
    pub mlp: MlpParams,
}

impl HanParams {
    /// Initialize with embeddings built elsewhere (or absent, for
    /// precomputed mode). Weights are uniform in `±1/√fan_in`, biases zero.
    pub fn init(
        config: HanConfig,
        embedding: Option<EmbeddingParams>,
        rng: &mut impl Rng,
    ) -> Self {
        let word_level = match config.mode {
            EmbedderMode::WordCompose => Some(LevelParams::init(
                config.word_dim,
                config.hidden,
                config.attention_dim,
                rng,
            )),
            EmbedderMode::Precomputed => None,
        };
        let state = 2 * config.hidden;
        let event_level = LevelParams::init(config.event_dim, config.hidden, config.attention_dim, rng);
        let news_level = LevelParams::init(state, config.hidden, config.attention_dim, rng);
        let temporal_level = LevelParams::init(state, config.hidden, config.attention_dim, rng);

        let mut layers = Vec::new();
        let mut fan_in = state;
        for &width in &config.mlp_hidden {
            layers.push(DenseParams {
                w: uniform_init(width, fan_in, rng),
                b: Tensor::zeros(vec![width, 1]),
            });
            fan_in = width;
        }
        layers.push(DenseParams {
            w: uniform_init(config.classes, fan_in, rng),
            b: Tensor::zeros(vec![config.classes, 1]),
        });

        HanParams {
            config,
            embedding,
            word_level,
            event_level,
            news_level,
            temporal_level,
            mlp: MlpParams { layers },
        }
    }

    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Some(embedding) = &self.embedding {
            f("embedding.table".to_string(), &embedding.table);
        }
        if let Some(word) = &self.word_level {
            word.visit("word", f);
        }
        self.event_level.visit("event", f);
        self.news_level.visit("news", f);
        self.temporal_level.visit("temporal", f);
        for (i, layer) in self.mlp.layers.iter().enumerate() {
            f(format!("mlp.{i}.w"), &layer.w);
            f(format!("mlp.{i}.b"), &layer.b);
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut Tensor)) {
        if let Some(embedding) = &mut self.embedding {
            f("embedding.table".to_string(), &mut embedding.table);
        }
        if let Some(word) = &mut self.word_level {
            word.visit_mut("word", f);
        }
        self.event_level.visit_mut("event", f);
        self.news_level.visit_mut("news", f);
        self.temporal_level.visit_mut("temporal", f);
        for (i, layer) in self.mlp.layers.iter_mut().enumerate() {
            f(format!("mlp.{i}.w"), &mut layer.w);
            f(format!("mlp.{i}.b"), &mut layer.b);
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit(&mut |name, t| out.push((name, t)));
        out
    }

    pub fn param_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.visit_mut(&mut |_, t| t.zero_grad());
    }

    /// Values bit-for-bit equal (shapes, order, every coordinate).
    pub fn bits_eq(&self, other: &HanParams) -> bool {
        let a = self.named();
        let b = other.named();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|((na, ta), (nb, tb))| na == nb && ta.bits_eq(tb))
    }
}

fn uniform_init(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (cols as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::matrix(rows, cols, values).expect("consistent init shape")
}

/// Graph-side handles for one GRU direction.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct AttnVars {
    pub w: Var,
    pub b: Var,
    pub theta: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct LevelVars {
    pub fwd: GruVars,
    pub bwd: GruVars,
    pub attn: AttnVars,
}

/// All parameters registered as leaves of one graph, in visitation order.
#[derive(Debug)]
pub struct HanVars {
    pub embedding: Option<Var>,
    pub word: Option<LevelVars>,
    pub event: LevelVars,
    pub news: LevelVars,
    pub temporal: LevelVars,
    pub mlp: Vec<(Var, Var)>,
    order: Vec<(String, Var)>,
}

impl HanVars {
    pub fn load(graph: &mut Graph, params: &HanParams) -> Self {
        fn reg(
            graph: &mut Graph,
            order: &mut Vec<(String, Var)>,
            name: String,
            t: &Tensor,
        ) -> Var {
            let v = graph.param(t);
            order.push((name, v));
            v
        }
        fn load_gru(
            graph: &mut Graph,
            order: &mut Vec<(String, Var)>,
            prefix: &str,
            p: &GruParams,
        ) -> GruVars {
            GruVars {
                w_z: reg(graph, order, format!("{prefix}.w_z"), &p.w_z),
                u_z: reg(graph, order, format!("{prefix}.u_z"), &p.u_z),
                b_z: reg(graph, order, format!("{prefix}.b_z"), &p.b_z),
                w_r: reg(graph, order, format!("{prefix}.w_r"), &p.w_r),
                u_r: reg(graph, order, format!("{prefix}.u_r"), &p.u_r),
                b_r: reg(graph, order, format!("{prefix}.b_r"), &p.b_r),
                w_h: reg(graph, order, format!("{prefix}.w_h"), &p.w_h),
                u_h: reg(graph, order, format!("{prefix}.u_h"), &p.u_h),
                b_h: reg(graph, order, format!("{prefix}.b_h"), &p.b_h),
            }
        }
        fn load_level(
            graph: &mut Graph,
            order: &mut Vec<(String, Var)>,
            prefix: &str,
            p: &LevelParams,
        ) -> LevelVars {
            LevelVars {
                fwd: load_gru(graph, order, &format!("{prefix}.fwd"), &p.fwd),
                bwd: load_gru(graph, order, &format!("{prefix}.bwd"), &p.bwd),
                attn: AttnVars {
                    w: reg(graph, order, format!("{prefix}.attn.w"), &p.attention.w),
                    b: reg(graph, order, format!("{prefix}.attn.b"), &p.attention.b),
                    theta: reg(
                        graph,
                        order,
                        format!("{prefix}.attn.theta"),
                        &p.attention.theta,
                    ),
                },
            }
        }

        let mut order = Vec::new();
        let embedding = params
            .embedding
            .as_ref()
            .map(|e| reg(graph, &mut order, "embedding.table".into(), &e.table));
        let word = params
            .word_level
            .as_ref()
            .map(|w| load_level(graph, &mut order, "word", w));
        let event = load_level(graph, &mut order, "event", &params.event_level);
        let news = load_level(graph, &mut order, "news", &params.news_level);
        let temporal = load_level(graph, &mut order, "temporal", &params.temporal_level);
        let mlp = params
            .mlp
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                (
                    reg(graph, &mut order, format!("mlp.{i}.w"), &layer.w),
                    reg(graph, &mut order, format!("mlp.{i}.b"), &layer.b),
                )
            })
            .collect();

        HanVars {
            embedding,
            word,
            event,
            news,
            temporal,
            mlp,
            order,
        }
    }

    /// Pull gradients out of the graph into the parameter tensors,
    /// accumulating over calls.
    pub fn accumulate_grads(&self, graph: &Graph, params: &mut HanParams) {
        let mut i = 0;
        params.visit_mut(&mut |name, tensor| {
            let (vn, var) = &self.order[i];
            debug_assert_eq!(&name, vn, "parameter order drifted");
            tensor.accumulate_grad(graph.grad(*var));
            i += 1;
        });
        debug_assert_eq!(i, self.order.len());
    }
}
