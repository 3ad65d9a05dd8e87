//! Entity embeddings (θ3) and the frozen word-embedding table.
//!
//! Both live in a shared Q-dimensional space. Word vectors and the
//! non-emerging entities' vectors are trained jointly on the reference
//! corpus by max-margin alignment: for an entity, words co-occurring with
//! its mentions are positives and uniformly sampled vocabulary words are
//! negatives. An emerging entity's vector is later inferred against the
//! frozen word table with the same loss.

use std::collections::HashMap;

use rand::Rng;

use crate::kb::{Document, EntityId};
use crate::util::{child_seed, rng_from};

/// Dense entity-embedding matrix, one Q-dimensional row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    q: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, q: usize) -> Self {
        EmbeddingMatrix {
            q,
            data: vec![0.0; rows * q],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, q: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * q);
        for r in rows {
            assert_eq!(r.len(), q);
            data.extend(r);
        }
        EmbeddingMatrix { q, data }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn row(&self, e: EntityId) -> &[f64] {
        &self.data[e.0 * self.q..(e.0 + 1) * self.q]
    }

    pub fn row_mut(&mut self, e: EntityId) -> &mut [f64] {
        &mut self.data[e.0 * self.q..(e.0 + 1) * self.q]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Frozen word-embedding table. Out-of-vocabulary lookups read as the zero
/// vector (`vector` returns `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingTable {
    q: usize,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl WordEmbeddingTable {
    pub fn new(vocab: Vec<String>, data: Vec<f64>, q: usize) -> Self {
        assert_eq!(vocab.len() * q, data.len());
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordEmbeddingTable {
            q,
            vocab,
            index,
            data,
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn word_index(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn vector(&self, w: &str) -> Option<&[f64]> {
        self.word_index(w).map(|i| self.vector_at(i))
    }

    pub fn vector_at(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    fn vector_at_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }
}

/// Knobs for embedding training. `epochs`/`learning_rate` drive the
/// emerging-entity update; `align_epochs` drives the one-off joint
/// pre-training of words and non-emerging entities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub q: usize,
    pub margin: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub window: usize,
    pub align_epochs: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            q: 64,
            margin: 0.1,
            negatives: 5,
            epochs: 35,
            learning_rate: 1e-2,
            window: 50,
            align_epochs: 8,
        }
    }
}

/// Result of inferring one entity's embedding.
#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub vector: Vec<f64>,
    pub loss_trace: Vec<f64>,
    /// Set when the corpus held no labeled mention of the entity; the
    /// vector is then all zeros.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Context word indices around each mention of `target` in `docs`,
/// restricted to the word table's vocabulary. The mention's own tokens are
/// excluded; the window spans `window/2` tokens on each side.
fn positive_words<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    target: EntityId,
    words: &WordEmbeddingTable,
    window: usize,
) -> Vec<usize> {
    let half = (window / 2).max(1);
    let mut out = Vec::new();
    for doc in docs {
        for mention in &doc.mentions {
            if mention.label.entity() != Some(target) {
                continue;
            }
            let lo = mention.start.saturating_sub(half);
            let hi = (mention.end + half).min(doc.tokens.len());
            for pos in lo..hi {
                if pos >= mention.start && pos < mention.end {
                    continue;
                }
                if let Some(i) = words.word_index(&doc.tokens[pos]) {
                    out.push(i);
                }
            }
        }
    }
    out
}

/// Infers a single entity's embedding against a frozen word table by
/// stochastic gradient descent on the max-margin alignment loss, starting
/// from the zero vector.
pub fn train_entity_embedding<'a>(
    ee: EntityId,
    corpus: impl IntoIterator<Item = &'a Document>,
    words: &WordEmbeddingTable,
    cfg: &EmbedConfig,
    seed: u64,
) -> EmbedOutcome {
    let positives = positive_words(corpus, ee, words, cfg.window);
    if positives.is_empty() || words.is_empty() {
        return EmbedOutcome {
            vector: vec![0.0; cfg.q],
            loss_trace: Vec::new(),
            degenerate: true,
        };
    }
    let mut rng = rng_from(seed);
    let mut x = vec![0.0f64; cfg.q];
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for &pos in &positives {
            let u = words.vector_at(pos);
            let xu = dot(&x, u);
            for _ in 0..cfg.negatives {
                let neg = rng.gen_range(0..words.len());
                if neg == pos {
                    continue;
                }
                let v = words.vector_at(neg);
                let hinge = cfg.margin - xu + dot(&x, v);
                pairs += 1;
                if hinge > 0.0 {
                    loss += hinge;
                    for k in 0..cfg.q {
                        x[k] += cfg.learning_rate * (u[k] - v[k]);
                    }
                }
            }
        }
        trace.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
    }
    debug_assert!(x.iter().all(|v| v.is_finite()));
    EmbedOutcome {
        vector: x,
        loss_trace: trace,
        degenerate: false,
    }
}

/// Jointly trains word vectors and non-emerging entity vectors on the
/// reference corpus, then zeroes the rows of the given emerging entities.
///
/// The vocabulary is every token of the corpus, sorted for determinism.
pub fn train_aligned_embeddings<'a>(
    corpus: &[Document],
    n_entities: usize,
    emerging: impl IntoIterator<Item = EntityId> + Clone,
    cfg: &EmbedConfig,
    seed: u64,
) -> (EmbeddingMatrix, WordEmbeddingTable) {
    let mut vocab: Vec<String> = corpus
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    vocab.sort();
    vocab.dedup();

    let mut rng = rng_from(child_seed(seed, crate::util::salt::WORD_EMBED));
    let scale = 0.5 / (cfg.q as f64).sqrt();
    let mut words = WordEmbeddingTable::new(
        vocab.clone(),
        (0..vocab.len() * cfg.q)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
        cfg.q,
    );
    let mut entities = EmbeddingMatrix {
        q: cfg.q,
        data: (0..n_entities * cfg.q)
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    };

    let half = (cfg.window / 2).max(1);
    for _ in 0..cfg.align_epochs {
        for doc in corpus {
            for mention in &doc.mentions {
                let Some(e) = mention.label.entity() else {
                    continue;
                };
                if e.0 >= n_entities {
                    continue;
                }
                let lo = mention.start.saturating_sub(half);
                let hi = (mention.end + half).min(doc.tokens.len());
                for p in lo..hi {
                    if p >= mention.start && p < mention.end {
                        continue;
                    }
                    let Some(pos) = words.word_index(&doc.tokens[p]) else {
                        continue;
                    };
                    for _ in 0..cfg.negatives {
                        let neg = rng.gen_range(0..words.len());
                        if neg == pos {
                            continue;
                        }
                        let x = entities.row(e);
                        let u = words.vector_at(pos);
                        let v = words.vector_at(neg);
                        let hinge = cfg.margin - dot(x, u) + dot(x, v);
                        if hinge > 0.0 {
                            // Simultaneous step: all three gradients use the
                            // pre-update values.
                            let lr = cfg.learning_rate;
                            let x_old = x.to_vec();
                            let u_old = u.to_vec();
                            let v_old = v.to_vec();
                            let xe = entities.row_mut(e);
                            for k in 0..cfg.q {
                                xe[k] += lr * (u_old[k] - v_old[k]);
                            }
                            let uw = words.vector_at_mut(pos);
                            for k in 0..cfg.q {
                                uw[k] += lr * x_old[k];
                            }
                            let vw = words.vector_at_mut(neg);
                            for k in 0..cfg.q {
                                vw[k] -= lr * x_old[k];
                            }
                        }
                    }
                }
            }
        }
    }

    for ee in emerging {
        if ee.0 < n_entities {
            entities.row_mut(ee).fill(0.0);
        }
    }
    (entities, words)
}
