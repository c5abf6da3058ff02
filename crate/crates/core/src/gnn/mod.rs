//! Message-passing networks for substructure prediction.
//!
//! Both predictors share one architecture. Layer `k` computes, for every node,
//!
//! ```text
//! x_v = [ h_v + Σ_{u ∈ N(v)} h_u ,  Σ_{e ∋ v} edge_emb[bond(e)] ]
//! h_v' = ReLU(W2 · ReLU(W1 · x_v + b1) + b2)
//! ```
//!
//! starting from `h_v = node_emb[token(v)]`, where the token is the vocabulary
//! id or the mask token `C1`. The edge embedding is shared by all layers.
//! The mGNN head maps `h_v` through a 50-unit ReLU layer to `C1` softmax
//! logits; the bGNN head maps it to one sigmoid output.
//!
//! Gradients are written out by hand and checked against finite differences
//! in the tests.

mod checkpoint;
pub mod synthetic;
mod train;

pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, CheckpointError, FORMAT_NAME, FORMAT_VERSION};
pub use train::{
    auc, bgnn_accuracy_split, evaluate_bgnn, evaluate_mgnn, make_bgnn_labels, pretrain, Adam,
    TrainConfig, TrainError, TrainReport,
};

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::MolGraph;
use crate::vocab::BondType;

/// Probability clamp used by the bGNN output and both losses.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Masked-substructure multinomial over the vocabulary.
    Mgnn,
    /// Probability that a node grows a leaf.
    Bgnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnShape {
    /// Message-passing layers (K).
    pub layers: usize,
    /// Node embedding width (d).
    pub hidden: usize,
    /// Vocabulary size (C1); the input has one extra mask token.
    pub vocab: usize,
    /// Width of the prediction head's hidden layer.
    pub head_hidden: usize,
}

impl GnnShape {
    /// Five layers of width 300 with a 50-unit head.
    pub fn paper(vocab: usize) -> Self {
        GnnShape {
            layers: 5,
            hidden: 300,
            vocab,
            head_hidden: 50,
        }
    }

    pub fn new(layers: usize, hidden: usize, vocab: usize) -> Self {
        GnnShape {
            layers,
            hidden,
            vocab,
            head_hidden: 50,
        }
    }

    pub fn outputs(&self, kind: HeadKind) -> usize {
        match kind {
            HeadKind::Mgnn => self.vocab,
            HeadKind::Bgnn => 1,
        }
    }

    pub fn mask_token(&self) -> usize {
        self.vocab
    }

    /// `(name, rows, cols)` of every trainable tensor, in storage order.
    pub fn tensor_specs(&self, kind: HeadKind) -> Vec<(String, usize, usize)> {
        let d = self.hidden;
        let mut v = vec![
            ("node_emb".to_string(), self.vocab + 1, d),
            ("edge_emb".to_string(), BondType::COUNT, d),
        ];
        for k in 0..self.layers {
            v.push((format!("layer{k}.w1"), 2 * d, 2 * d));
            v.push((format!("layer{k}.b1"), 1, 2 * d));
            v.push((format!("layer{k}.w2"), 2 * d, d));
            v.push((format!("layer{k}.b2"), 1, d));
        }
        v.push(("head.w1".into(), d, self.head_hidden));
        v.push(("head.b1".into(), 1, self.head_hidden));
        v.push(("head.w2".into(), self.head_hidden, self.outputs(kind)));
        v.push(("head.b2".into(), 1, self.outputs(kind)));
        v
    }
}

/// Graph as seen by the network: input tokens and typed edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphInput {
    pub tokens: Vec<usize>,
    pub edges: Vec<(usize, usize, BondType)>,
}

impl GraphInput {
    pub fn from_graph(g: &MolGraph) -> Self {
        GraphInput {
            tokens: g.nodes().to_vec(),
            edges: g.edges().iter().map(|e| (e.u, e.v, e.bond)).collect(),
        }
    }

    /// Replaces node `v`'s token with the mask token.
    pub fn masked(mut self, v: usize, mask_token: usize) -> Self {
        self.tokens[v] = mask_token;
        self
    }

    /// Appends a masked leaf bonded to `u`; returns the new node index too.
    pub fn with_masked_leaf(mut self, u: usize, bond: BondType, mask_token: usize) -> (Self, usize) {
        let v = self.tokens.len();
        self.tokens.push(mask_token);
        self.edges.push((u, v, bond));
        (self, v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Several graphs merged block-diagonally, with the rows to read out.
#[derive(Debug, Clone)]
pub struct Batch {
    tokens: Vec<usize>,
    adj: Vec<Vec<usize>>,
    edge_counts: Array2<f64>,
    rows: Vec<usize>,
}

impl Batch {
    /// One readout row per `(graph, node)` item.
    pub fn new(items: &[(&GraphInput, usize)]) -> Self {
        let total: usize = items.iter().map(|(g, _)| g.len()).sum();
        let mut tokens = Vec::with_capacity(total);
        let mut adj = vec![Vec::new(); total];
        let mut edge_counts = Array2::zeros((total, BondType::COUNT));
        let mut rows = Vec::with_capacity(items.len());
        let mut offset = 0;
        for (g, node) in items {
            tokens.extend_from_slice(&g.tokens);
            for &(a, b, t) in &g.edges {
                adj[offset + a].push(offset + b);
                adj[offset + b].push(offset + a);
                edge_counts[[offset + a, t.index()]] += 1.0;
                edge_counts[[offset + b, t.index()]] += 1.0;
            }
            rows.push(offset + node);
            offset += g.len();
        }
        Batch {
            tokens,
            adj,
            edge_counts,
            rows,
        }
    }

    /// Every node of `g` as a readout row.
    pub fn all_nodes(g: &GraphInput) -> Self {
        let mut b = Self::new(&[(g, 0)]);
        b.rows = (0..g.len()).collect();
        b
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// `H + A·H`: each node plus the sum of its neighbours.
    fn aggregate(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = h.clone();
        for (i, nbrs) in self.adj.iter().enumerate() {
            for &j in nbrs {
                let row = h.row(j).to_owned();
                out.row_mut(i).scaled_add(1.0, &row);
            }
        }
        out
    }
}

/// Supervision for [`Gnn::loss_and_grad`].
#[derive(Debug, Clone)]
pub enum Targets {
    /// Class index per readout row (mGNN).
    Classes(Vec<usize>),
    /// 0/1 label per readout row (bGNN).
    Binary(Vec<f64>),
}

struct LayerCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
}

struct Cache {
    eb: Array2<f64>,
    layers: Vec<LayerCache>,
    hsel: Array2<f64>,
    zh: Array2<f64>,
    ah: Array2<f64>,
}

/// One predictor: shared trunk plus an mGNN or bGNN head.
#[derive(Debug, Clone, PartialEq)]
pub struct Gnn {
    pub kind: HeadKind,
    pub shape: GnnShape,
    /// Trainable tensors in [`GnnShape::tensor_specs`] order; biases are `1×n`.
    pub tensors: Vec<Array2<f64>>,
}

impl Gnn {
    /// He-uniform weights, small uniform embeddings, zero biases.
    pub fn init<R: Rng + ?Sized>(kind: HeadKind, shape: GnnShape, rng: &mut R) -> Self {
        let tensors = shape
            .tensor_specs(kind)
            .into_iter()
            .map(|(name, r, c)| {
                if name.ends_with(".b1") || name.ends_with(".b2") {
                    Array2::zeros((r, c))
                } else {
                    let limit = if name.ends_with("_emb") {
                        1.0
                    } else {
                        (6.0 / r as f64).sqrt()
                    };
                    Array2::from_shape_fn((r, c), |_| rng.random_range(-limit..limit))
                }
            })
            .collect();
        Gnn {
            kind,
            shape,
            tensors,
        }
    }

    /// All tensors zero; every prediction is uniform (mGNN) or 0.5 (bGNN).
    pub fn zeros(kind: HeadKind, shape: GnnShape) -> Self {
        let tensors = shape
            .tensor_specs(kind)
            .into_iter()
            .map(|(_, r, c)| Array2::zeros((r, c)))
            .collect();
        Gnn {
            kind,
            shape,
            tensors,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    fn layer(&self, k: usize) -> [&Array2<f64>; 4] {
        let b = 2 + 4 * k;
        [
            &self.tensors[b],
            &self.tensors[b + 1],
            &self.tensors[b + 2],
            &self.tensors[b + 3],
        ]
    }

    fn head(&self) -> [&Array2<f64>; 4] {
        let b = 2 + 4 * self.shape.layers;
        [
            &self.tensors[b],
            &self.tensors[b + 1],
            &self.tensors[b + 2],
            &self.tensors[b + 3],
        ]
    }

    /// Final node embeddings `h^(K)` for every node of the batch.
    pub fn embed(&self, batch: &Batch) -> Array2<f64> {
        self.trunk(batch).0
    }

    fn trunk(&self, batch: &Batch) -> (Array2<f64>, Array2<f64>, Vec<LayerCache>) {
        let emb = &self.tensors[0];
        let d = self.shape.hidden;
        let mut h = Array2::zeros((batch.tokens.len(), d));
        for (i, &t) in batch.tokens.iter().enumerate() {
            h.row_mut(i).assign(&emb.row(t));
        }
        let eb = batch.edge_counts.dot(&self.tensors[1]);
        let mut caches = Vec::with_capacity(self.shape.layers);
        for k in 0..self.shape.layers {
            let [w1, b1, w2, b2] = self.layer(k);
            let m = batch.aggregate(&h);
            let x = concatenate![Axis(1), m, eb];
            let z1 = x.dot(w1) + b1;
            let a1 = z1.mapv(relu);
            let z2 = a1.dot(w2) + b2;
            h = z2.mapv(relu);
            caches.push(LayerCache { x, z1, a1, z2 });
        }
        (h, eb, caches)
    }

    fn forward(&self, batch: &Batch) -> (Array2<f64>, Cache) {
        let (h, eb, layers) = self.trunk(batch);
        let mut hsel = Array2::zeros((batch.rows.len(), self.shape.hidden));
        for (r, &i) in batch.rows.iter().enumerate() {
            hsel.row_mut(r).assign(&h.row(i));
        }
        let [w1, b1, w2, b2] = self.head();
        let zh = hsel.dot(w1) + b1;
        let ah = zh.mapv(relu);
        let logits = ah.dot(w2) + b2;
        (
            logits,
            Cache {
                eb,
                layers,
                hsel,
                zh,
                ah,
            },
        )
    }

    /// Head outputs per readout row: softmax rows (mGNN) or clamped sigmoid (bGNN).
    pub fn predict(&self, batch: &Batch) -> Array2<f64> {
        let (logits, _) = self.forward(batch);
        match self.kind {
            HeadKind::Mgnn => softmax_rows(&logits),
            HeadKind::Bgnn => logits.mapv(|l| sigmoid(l).clamp(PROB_EPS, 1.0 - PROB_EPS)),
        }
    }

    /// ŷ_v: distribution over substructures for masked node `v` of `g`.
    pub fn mgnn_predict(&self, g: &MolGraph, v: usize) -> Vec<f64> {
        let input = GraphInput::from_graph(g).masked(v, self.shape.mask_token());
        self.mgnn_predict_input(&input, v)
    }

    /// ŷ for an already masked input.
    pub fn mgnn_predict_input(&self, input: &GraphInput, v: usize) -> Vec<f64> {
        debug_assert_eq!(self.kind, HeadKind::Mgnn);
        self.predict(&Batch::new(&[(input, v)])).row(0).to_vec()
    }

    /// ẑ_v for node `v` of `g`.
    pub fn bgnn_predict(&self, g: &MolGraph, v: usize) -> f64 {
        debug_assert_eq!(self.kind, HeadKind::Bgnn);
        self.predict(&Batch::new(&[(&GraphInput::from_graph(g), v)]))[[0, 0]]
    }

    /// ẑ for every node of `g`.
    pub fn bgnn_predict_all(&self, g: &MolGraph) -> Vec<f64> {
        debug_assert_eq!(self.kind, HeadKind::Bgnn);
        self.predict(&Batch::all_nodes(&GraphInput::from_graph(g)))
            .column(0)
            .to_vec()
    }

    /// Mean loss over the readout rows.
    pub fn loss(&self, batch: &Batch, targets: &Targets) -> f64 {
        let (logits, _) = self.forward(batch);
        self.loss_from_logits(&logits, targets)
    }

    fn loss_from_logits(&self, logits: &Array2<f64>, targets: &Targets) -> f64 {
        let n = logits.nrows() as f64;
        match targets {
            Targets::Classes(ys) => {
                let p = softmax_rows(logits);
                ys.iter()
                    .enumerate()
                    .map(|(r, &y)| {
                        let mut onehot = vec![0.0; p.ncols()];
                        onehot[y] = 1.0;
                        mgnn_loss(&p.row(r).to_vec(), &onehot)
                    })
                    .sum::<f64>()
                    / n
            }
            Targets::Binary(zs) => {
                zs.iter()
                    .enumerate()
                    .map(|(r, &z)| bgnn_loss(sigmoid(logits[[r, 0]]), z))
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// Mean loss and its gradient with respect to every tensor.
    pub fn loss_and_grad(&self, batch: &Batch, targets: &Targets) -> (f64, Vec<Array2<f64>>) {
        let (logits, cache) = self.forward(batch);
        let loss = self.loss_from_logits(&logits, targets);
        let n = logits.nrows() as f64;
        let dlogits = match targets {
            Targets::Classes(ys) => {
                let mut d = softmax_rows(&logits);
                for (r, &y) in ys.iter().enumerate() {
                    d[[r, y]] -= 1.0;
                }
                d / n
            }
            Targets::Binary(zs) => {
                let mut d = logits.mapv(sigmoid);
                for (r, &z) in zs.iter().enumerate() {
                    d[[r, 0]] -= z;
                }
                d / n
            }
        };
        let mut grads: Vec<Array2<f64>> = self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        let hb = 2 + 4 * self.shape.layers;
        let [hw1, _, hw2, _] = self.head();
        grads[hb + 2] = cache.ah.t().dot(&dlogits);
        grads[hb + 3] = sum_rows(&dlogits);
        let dah = dlogits.dot(&hw2.t());
        let dzh = relu_back(&dah, &cache.zh);
        grads[hb] = cache.hsel.t().dot(&dzh);
        grads[hb + 1] = sum_rows(&dzh);
        let dhsel = dzh.dot(&hw1.t());

        let d = self.shape.hidden;
        let mut dh = Array2::zeros((batch.tokens.len(), d));
        for (r, &i) in batch.rows.iter().enumerate() {
            let row = dhsel.row(r).to_owned();
            dh.row_mut(i).scaled_add(1.0, &row);
        }
        let mut deb: Array2<f64> = Array2::zeros(cache.eb.raw_dim());
        for k in (0..self.shape.layers).rev() {
            let lc = &cache.layers[k];
            let [w1, _, w2, _] = self.layer(k);
            let b = 2 + 4 * k;
            let dz2 = relu_back(&dh, &lc.z2);
            grads[b + 2] = lc.a1.t().dot(&dz2);
            grads[b + 3] = sum_rows(&dz2);
            let da1 = dz2.dot(&w2.t());
            let dz1 = relu_back(&da1, &lc.z1);
            grads[b] = lc.x.t().dot(&dz1);
            grads[b + 1] = sum_rows(&dz1);
            let dx = dz1.dot(&w1.t());
            deb += &dx.slice(s![.., d..]);
            dh = batch.aggregate(&dx.slice(s![.., ..d]).to_owned());
        }
        grads[1] = batch.edge_counts.t().dot(&deb);
        for (i, &t) in batch.tokens.iter().enumerate() {
            let row = dh.row(i).to_owned();
            grads[0].row_mut(t).scaled_add(1.0, &row);
        }
        (loss, grads)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn relu_back(upstream: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(pre, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

fn sum_rows(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let z: f64 = row.sum();
        row.mapv_inplace(|x| x / z);
    }
    out
}

/// Multi-class cross entropy `−Σ y_i log ŷ_i`.
pub fn mgnn_loss(y_hat: &[f64], y: &[f64]) -> f64 {
    -y_hat
        .iter()
        .zip(y)
        .map(|(&p, &t)| t * p.clamp(PROB_EPS, 1.0).ln())
        .sum::<f64>()
}

/// Binary cross entropy `−z log ẑ − (1 − z) log(1 − ẑ)`.
pub fn bgnn_loss(z_hat: f64, z: f64) -> f64 {
    let p = z_hat.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -z * p.ln() - (1.0 - z) * (1.0 - p).ln()
}

/// The pair of pretrained predictors used by the proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnPair {
    pub mgnn: Gnn,
    pub bgnn: Gnn,
}

impl GnnPair {
    pub fn vocab_size(&self) -> usize {
        self.mgnn.shape.vocab
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;
    use crate::vocab::SubstructureVocab;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape() -> GnnShape {
        GnnShape {
            layers: 2,
            hidden: 6,
            vocab: 10,
            head_hidden: 5,
        }
    }

    #[test]
    fn zero_weights_give_zero_embeddings_and_uniform_heads() {
        let v = SubstructureVocab::desk();
        let g = parse_smiles("C", &v).unwrap();
        let m = Gnn::zeros(HeadKind::Mgnn, shape());
        let h = m.embed(&Batch::all_nodes(&GraphInput::from_graph(&g)));
        assert!(h.iter().all(|&x| x == 0.0));
        let p = m.mgnn_predict(&g, 0);
        assert!(p.iter().all(|&x| (x - 0.1).abs() < 1e-15));
        let b = Gnn::zeros(HeadKind::Bgnn, shape());
        assert_eq!(b.bgnn_predict(&g, 0), 0.5);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = SubstructureVocab::desk();
        let m = Gnn::init(HeadKind::Mgnn, shape(), &mut rng);
        let g = parse_smiles("CC(O)c1ccccc1", &v).unwrap();
        for node in 0..g.num_nodes() {
            let p = m.mgnn_predict(&g, node);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn mask_hides_true_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = SubstructureVocab::desk();
        let m = Gnn::init(HeadKind::Mgnn, shape(), &mut rng);
        let a = parse_smiles("CCO", &v).unwrap();
        let b = parse_smiles("CCN", &v).unwrap();
        assert_eq!(m.mgnn_predict(&a, 2), m.mgnn_predict(&b, 2));
    }

    #[test]
    fn losses_match_hand_values() {
        assert!((mgnn_loss(&[0.1; 10], &{
            let mut y = vec![0.0; 10];
            y[3] = 1.0;
            y
        }) - 10f64.ln())
        .abs()
            < 1e-12);
        assert!((bgnn_loss(0.5, 1.0) - 2f64.ln()).abs() < 1e-12);
        assert!(mgnn_loss(&[1.0, 0.0], &[1.0, 0.0]).abs() < 1e-12);
        assert!(bgnn_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Gnn::init(HeadKind::Mgnn, shape(), &mut rng);
        let a = GraphInput {
            tokens: vec![0, 1, 2, 0],
            edges: vec![
                (0, 1, BondType::Single),
                (1, 2, BondType::Double),
                (1, 3, BondType::Single),
            ],
        };
        // permutation: new index of old node i
        let perm = [2, 0, 3, 1];
        let mut tokens = vec![0; 4];
        for (i, &p) in perm.iter().enumerate() {
            tokens[p] = a.tokens[i];
        }
        let b = GraphInput {
            tokens,
            edges: a
                .edges
                .iter()
                .map(|&(x, y, t)| (perm[x], perm[y], t))
                .collect(),
        };
        let ha = m.embed(&Batch::all_nodes(&a));
        let hb = m.embed(&Batch::all_nodes(&b));
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..ha.ncols() {
                assert!((ha[[i, c]] - hb[[p, c]]).abs() < 1e-9);
            }
        }
    }

    fn check_gradients(kind: HeadKind, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Gnn::init(kind, shape(), &mut rng);
        let inputs = [
            GraphInput {
                tokens: vec![0, 1, 2],
                edges: vec![(0, 1, BondType::Single), (1, 2, BondType::Double)],
            },
            GraphInput {
                tokens: vec![3, 0, 0, 4],
                edges: vec![
                    (0, 1, BondType::Single),
                    (0, 2, BondType::Triple),
                    (0, 3, BondType::Aromatic),
                ],
            },
        ];
        let masked: Vec<GraphInput> = inputs
            .iter()
            .map(|g| match kind {
                HeadKind::Mgnn => g.clone().masked(1, m.shape.mask_token()),
                HeadKind::Bgnn => g.clone(),
            })
            .collect();
        let batch = Batch::new(&[(&masked[0], 1), (&masked[1], 1)]);
        let targets = match kind {
            HeadKind::Mgnn => Targets::Classes(vec![1, 0]),
            HeadKind::Bgnn => Targets::Binary(vec![1.0, 0.0]),
        };
        let (_, grads) = m.loss_and_grad(&batch, &targets);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for t in 0..m.tensors.len() {
            for idx in 0..m.tensors[t].len() {
                let (r, c) = (idx / m.tensors[t].ncols(), idx % m.tensors[t].ncols());
                let orig = m.tensors[t][[r, c]];
                m.tensors[t][[r, c]] = orig + h;
                let lp = m.loss(&batch, &targets);
                m.tensors[t][[r, c]] = orig - h;
                let lm = m.loss(&batch, &targets);
                m.tensors[t][[r, c]] = orig;
                let num = (lp - lm) / (2.0 * h);
                let ana = grads[t][[r, c]];
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-4, "{kind:?}: worst relative error {worst}");
    }

    #[test]
    fn mgnn_gradients_match_finite_differences() {
        check_gradients(HeadKind::Mgnn, 11);
    }

    #[test]
    fn bgnn_gradients_match_finite_differences() {
        check_gradients(HeadKind::Bgnn, 12);
    }
}
