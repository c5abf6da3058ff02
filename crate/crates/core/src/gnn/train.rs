//! Self-supervised pretraining of the two predictors.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Batch, Gnn, GnnPair, GnnShape, GraphInput, HeadKind, Targets};
use crate::graph::MolGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            epochs: 10,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("batch size must be at least 1")]
    BadBatch,
    #[error("learning rate must be positive and finite")]
    BadLearningRate,
    #[error("corpus graph uses label {label}, outside the model vocabulary of {vocab}")]
    LabelOutOfRange { label: usize, vocab: usize },
}

/// Mean training loss per epoch for each predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mgnn_loss: Vec<f64>,
    pub bgnn_loss: Vec<f64>,
}

/// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(lr: f64, like: &[Array2<f64>]) -> Self {
        Adam {
            lr,
            m: like.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
            v: like.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    let mh = *m / c1;
                    let vh = *v / c2;
                    *p -= self.lr * mh / (vh.sqrt() + Self::EPS);
                });
        }
    }
}

/// bGNN supervision: leaves get 0, non-leaves next to a leaf get 1, every
/// other node is left out.
pub fn make_bgnn_labels(g: &MolGraph) -> Vec<(usize, f64)> {
    let leaf: Vec<bool> = (0..g.num_nodes()).map(|v| g.degree(v) == 1).collect();
    (0..g.num_nodes())
        .filter_map(|v| {
            if leaf[v] {
                Some((v, 0.0))
            } else if g.neighbors(v).iter().any(|&(u, _)| leaf[u]) {
                Some((v, 1.0))
            } else {
                None
            }
        })
        .collect()
}

/// Trains an mGNN and a bGNN of the given shape on `corpus`.
///
/// Each epoch visits the corpus in a fresh random order; every molecule
/// contributes one randomly masked node to the mGNN and one randomly chosen
/// labelled node to the bGNN.
pub fn pretrain(
    corpus: &[MolGraph],
    shape: GnnShape,
    cfg: &TrainConfig,
) -> Result<(GnnPair, TrainReport), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::BadBatch);
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(TrainError::BadLearningRate);
    }
    if let Some(&label) = corpus
        .iter()
        .flat_map(|g| g.nodes())
        .find(|&&l| l >= shape.vocab)
    {
        return Err(TrainError::LabelOutOfRange {
            label,
            vocab: shape.vocab,
        });
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mgnn = Gnn::init(HeadKind::Mgnn, shape, &mut init_rng);
    let mut bgnn = Gnn::init(HeadKind::Bgnn, shape, &mut init_rng);
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut opt_m = Adam::new(cfg.lr, &mgnn.tensors);
    let mut opt_b = Adam::new(cfg.lr, &bgnn.tensors);
    let inputs: Vec<GraphInput> = corpus.iter().map(GraphInput::from_graph).collect();
    let labels: Vec<Vec<(usize, f64)>> = corpus.iter().map(make_bgnn_labels).collect();
    let mask = shape.mask_token();

    let mut report = TrainReport {
        mgnn_loss: Vec::with_capacity(cfg.epochs),
        bgnn_loss: Vec::with_capacity(cfg.epochs),
    };
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut data_rng);
        let mut m_examples: Vec<(GraphInput, usize, usize)> = Vec::with_capacity(order.len());
        let mut b_examples: Vec<(usize, usize, f64)> = Vec::with_capacity(order.len());
        for &i in &order {
            let n = inputs[i].len();
            let v = data_rng.random_range(0..n);
            m_examples.push((inputs[i].clone().masked(v, mask), v, inputs[i].tokens[v]));
            if !labels[i].is_empty() {
                let (node, z) = labels[i][data_rng.random_range(0..labels[i].len())];
                b_examples.push((i, node, z));
            }
        }

        let mut total = 0.0;
        for chunk in m_examples.chunks(cfg.batch_size) {
            let items: Vec<(&GraphInput, usize)> = chunk.iter().map(|(g, v, _)| (g, *v)).collect();
            let targets = Targets::Classes(chunk.iter().map(|x| x.2).collect());
            let (loss, grads) = mgnn.loss_and_grad(&Batch::new(&items), &targets);
            opt_m.step(&mut mgnn.tensors, &grads);
            total += loss * chunk.len() as f64;
        }
        report.mgnn_loss.push(total / m_examples.len() as f64);

        let mut total = 0.0;
        for chunk in b_examples.chunks(cfg.batch_size) {
            let items: Vec<(&GraphInput, usize)> = chunk.iter().map(|&(i, v, _)| (&inputs[i], v)).collect();
            let targets = Targets::Binary(chunk.iter().map(|x| x.2).collect());
            let (loss, grads) = bgnn.loss_and_grad(&Batch::new(&items), &targets);
            opt_b.step(&mut bgnn.tensors, &grads);
            total += loss * chunk.len() as f64;
        }
        report
            .bgnn_loss
            .push(if b_examples.is_empty() { 0.0 } else { total / b_examples.len() as f64 });
    }
    Ok((GnnPair { mgnn, bgnn }, report))
}

/// Fraction of nodes whose masked prediction's argmax is the true label,
/// masking every node of every graph in turn.
pub fn evaluate_mgnn(model: &Gnn, graphs: &[MolGraph]) -> f64 {
    let mask = model.shape.mask_token();
    let mut items: Vec<(GraphInput, usize, usize)> = Vec::new();
    for g in graphs {
        let input = GraphInput::from_graph(g);
        for v in 0..g.num_nodes() {
            items.push((input.clone().masked(v, mask), v, g.label(v)));
        }
    }
    if items.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for chunk in items.chunks(512) {
        let refs: Vec<(&GraphInput, usize)> = chunk.iter().map(|(g, v, _)| (g, *v)).collect();
        let p = model.predict(&Batch::new(&refs));
        for (r, (_, _, y)) in chunk.iter().enumerate() {
            let row = p.row(r);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            correct += usize::from(best == *y);
        }
    }
    correct as f64 / items.len() as f64
}

/// `(score, label)` for every labelled node of every graph.
pub fn evaluate_bgnn(model: &Gnn, graphs: &[MolGraph]) -> Vec<(f64, bool)> {
    let mut out = Vec::new();
    for g in graphs {
        let labels = make_bgnn_labels(g);
        if labels.is_empty() {
            continue;
        }
        let z = model.bgnn_predict_all(g);
        out.extend(labels.into_iter().map(|(v, y)| (z[v], y > 0.5)));
    }
    out
}

/// Mean prediction on negative (leaf) and positive (leaf-adjacent) nodes.
pub fn bgnn_accuracy_split(scored: &[(f64, bool)]) -> (f64, f64) {
    let mean = |want: bool| {
        let xs: Vec<f64> = scored.iter().filter(|x| x.1 == want).map(|x| x.0).collect();
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    (mean(false), mean(true))
}

/// Area under the ROC curve (Mann-Whitney, ties share ranks). Returns 0.5
/// when either class is absent.
pub fn auc(scored: &[(f64, bool)]) -> f64 {
    let pos = scored.iter().filter(|x| x.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scored[idx[j + 1]].0 == scored[idx[i]].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if scored[k].1 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;
    use crate::vocab::SubstructureVocab;

    #[test]
    fn bgnn_labels_follow_the_rule() {
        let v = SubstructureVocab::desk();
        let path = parse_smiles("CCO", &v).unwrap();
        assert_eq!(make_bgnn_labels(&path), vec![(0, 0.0), (1, 1.0), (2, 0.0)]);
        let tri = crate::graph::MolGraph::new(
            v.clone(),
            vec![0, 0, 0],
            vec![
                crate::graph::Edge::new(0, 1, crate::vocab::BondType::Single),
                crate::graph::Edge::new(1, 2, crate::vocab::BondType::Single),
                crate::graph::Edge::new(2, 0, crate::vocab::BondType::Single),
            ],
        )
        .unwrap();
        assert!(make_bgnn_labels(&tri).is_empty());
        let star = parse_smiles("C(F)(F)F", &v).unwrap();
        assert_eq!(
            make_bgnn_labels(&star),
            vec![(0, 1.0), (1, 0.0), (2, 0.0), (3, 0.0)]
        );
    }

    #[test]
    fn auc_hand_values() {
        assert_eq!(auc(&[(0.1, false), (0.9, true)]), 1.0);
        assert_eq!(auc(&[(0.9, false), (0.1, true)]), 0.0);
        assert_eq!(auc(&[(0.5, false), (0.5, true)]), 0.5);
        assert_eq!(auc(&[(0.2, false), (0.4, true), (0.6, false), (0.8, true)]), 0.75);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![Array2::from_elem((1, 2), 1.0)];
        let g = vec![Array2::from_shape_vec((1, 2), vec![0.5, -2.0]).unwrap()];
        let mut opt = Adam::new(0.1, &p);
        opt.step(&mut p, &g);
        assert!((p[0][[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p[0][[0, 1]] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn smoke_and_determinism() {
        let v = SubstructureVocab::desk();
        let corpus = vec![parse_smiles("CCO", &v).unwrap()];
        let shape = GnnShape::new(2, 8, v.len());
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (_, r1) = pretrain(&corpus, shape, &cfg).unwrap();
        let (_, r2) = pretrain(&corpus, shape, &cfg).unwrap();
        assert!(r1.mgnn_loss[0].is_finite());
        assert_eq!(r1, r2);
        assert_eq!(pretrain(&[], shape, &cfg).unwrap_err(), TrainError::EmptyCorpus);
    }

    #[test]
    fn loss_decreases_on_a_tiny_corpus() {
        let v = SubstructureVocab::desk();
        let corpus: Vec<MolGraph> = ["CCO", "CCN", "c1ccccc1C", "CC(F)(F)F", "OCCO"]
            .iter()
            .map(|s| parse_smiles(s, &v).unwrap())
            .collect();
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 5,
            lr: 1e-2,
            seed: 4,
        };
        let (_, r) = pretrain(&corpus, GnnShape::new(2, 16, v.len()), &cfg).unwrap();
        assert!(r.mgnn_loss.last().unwrap() < &r.mgnn_loss[0]);
        assert!(r.bgnn_loss.last().unwrap() < &r.bgnn_loss[0]);
    }
}
