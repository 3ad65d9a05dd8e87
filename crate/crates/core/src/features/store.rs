//! The assembled feature store, the emerging entity's parameter bundle, and
//! the read view that overlays one on the other.
//!
//! The store holds the frozen parameters: priors, relatedness, entity
//! embeddings, and word embeddings, estimated once from the reference corpus.
//! Learning never mutates it. A [`StoreView`] pairs the store with an
//! optional [`EeFeatures`] overlay so scorers read the emerging entity's
//! current parameters while every frozen entry stays byte-identical.

use crate::kb::{AliasDictionary, Document, EntityId, KnowledgeBase, MentionId};
use crate::util::digest_f64s;

use super::counts::{
    alias_columns, count_cooccurrences, ee_prior_from_counts, estimate_prior, PriorTable,
};
use super::embedding::{
    train_aligned_embeddings, train_entity_embedding, EmbedConfig, EmbeddingMatrix,
    WordEmbeddingTable,
};
use super::wlm::{build_doc_index, ee_relatedness_row, estimate_relatedness, RelatednessMatrix};

/// Frozen feature parameters for all entities plus the alias dictionary
/// they were estimated with.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub prior: PriorTable,
    pub relatedness: RelatednessMatrix,
    pub embeddings: EmbeddingMatrix,
    pub words: WordEmbeddingTable,
    dict: AliasDictionary,
}

impl FeatureStore {
    pub fn new(
        prior: PriorTable,
        relatedness: RelatednessMatrix,
        embeddings: EmbeddingMatrix,
        words: WordEmbeddingTable,
        dict: AliasDictionary,
    ) -> Self {
        assert_eq!(embeddings.q(), words.q(), "embedding dimensions must agree");
        FeatureStore {
            prior,
            relatedness,
            embeddings,
            words,
            dict,
        }
    }

    pub fn dict(&self) -> &AliasDictionary {
        &self.dict
    }

    pub fn q(&self) -> usize {
        self.embeddings.q()
    }

    pub fn n_entities(&self) -> usize {
        self.embeddings.rows()
    }

    /// Digest over every stored parameter; used by freeze checks.
    pub fn digest(&self) -> u64 {
        let mut priors: Vec<(usize, usize, f64)> =
            self.prior.iter().map(|(e, m, p)| (e.0, m.0, p)).collect();
        priors.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut rel: Vec<(usize, usize, f64)> = self
            .relatedness
            .iter()
            .map(|(i, j, s)| (i.0, j.0, s))
            .collect();
        rel.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        digest_f64s(
            priors
                .iter()
                .flat_map(|&(e, m, p)| [e as f64, m as f64, p])
                .chain(rel.iter().flat_map(|&(i, j, s)| [i as f64, j as f64, s]))
                .chain(self.embeddings.data().iter().copied())
                .chain(self.words.data().iter().copied()),
        )
    }
}

/// Estimates the full store from the reference corpus: priors and
/// relatedness from labeled mentions, embeddings by joint alignment.
/// Emerging entities end up with all-zero parameters.
pub fn estimate_store(
    wiki: &[Document],
    kb: &KnowledgeBase,
    dict: &AliasDictionary,
    embed_cfg: &EmbedConfig,
    seed: u64,
) -> FeatureStore {
    let counts = count_cooccurrences(wiki, dict);
    let prior = estimate_prior(&counts, dict);
    let index = build_doc_index(wiki);
    let relatedness = estimate_relatedness(&index, kb.len());
    let emerging: Vec<EntityId> = kb.emerging().map(|e| e.id).collect();
    let (embeddings, words) =
        train_aligned_embeddings(wiki, kb.len(), emerging.iter().copied(), embed_cfg, seed);
    FeatureStore::new(prior, relatedness, embeddings, words, dict.clone())
}

/// Which of the three feature groups participate in learning. Inactive
/// groups are pinned to zero throughout a run (feature ablations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMask {
    pub prior: bool,
    pub relatedness: bool,
    pub embedding: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask {
            prior: true,
            relatedness: true,
            embedding: true,
        }
    }
}

impl FeatureMask {
    pub fn without(group: FeatureGroup) -> Self {
        let mut mask = FeatureMask::default();
        match group {
            FeatureGroup::Prior => mask.prior = false,
            FeatureGroup::Relatedness => mask.relatedness = false,
            FeatureGroup::Embedding => mask.embedding = false,
        }
        mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureGroup {
    Prior,
    Relatedness,
    Embedding,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [
        FeatureGroup::Prior,
        FeatureGroup::Relatedness,
        FeatureGroup::Embedding,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FeatureGroup::Prior => "prior",
            FeatureGroup::Relatedness => "relatedness",
            FeatureGroup::Embedding => "embedding",
        }
    }
}

/// Flat parameter vector over the emerging entity's three feature groups:
/// prior entries (one per alias), a relatedness row (one per entity), and
/// the embedding. Gradients and moment accumulators share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EeVec {
    pub prior: Vec<f64>,
    pub relatedness: Vec<f64>,
    pub embedding: Vec<f64>,
}

impl EeVec {
    pub fn zeros(n_aliases: usize, n_entities: usize, q: usize) -> Self {
        EeVec {
            prior: vec![0.0; n_aliases],
            relatedness: vec![0.0; n_entities],
            embedding: vec![0.0; q],
        }
    }

    pub fn zeros_like(&self) -> Self {
        EeVec::zeros(self.prior.len(), self.relatedness.len(), self.embedding.len())
    }

    pub fn group(&self, g: FeatureGroup) -> &[f64] {
        match g {
            FeatureGroup::Prior => &self.prior,
            FeatureGroup::Relatedness => &self.relatedness,
            FeatureGroup::Embedding => &self.embedding,
        }
    }

    pub fn group_mut(&mut self, g: FeatureGroup) -> &mut [f64] {
        match g {
            FeatureGroup::Prior => &mut self.prior,
            FeatureGroup::Relatedness => &mut self.relatedness,
            FeatureGroup::Embedding => &mut self.embedding,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.prior
            .iter()
            .chain(&self.relatedness)
            .chain(&self.embedding)
            .copied()
    }

    pub fn len(&self) -> usize {
        self.prior.len() + self.relatedness.len() + self.embedding.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += a * x`, elementwise over all groups.
    pub fn axpy(&mut self, a: f64, x: &EeVec) {
        for g in FeatureGroup::ALL {
            for (s, v) in self.group_mut(g).iter_mut().zip(x.group(g)) {
                *s += a * v;
            }
        }
    }

    pub fn sub(a: &EeVec, b: &EeVec) -> EeVec {
        let mut out = a.clone();
        out.axpy(-1.0, b);
        out
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn apply_mask(&mut self, mask: &FeatureMask) {
        if !mask.prior {
            self.prior.fill(0.0);
        }
        if !mask.relatedness {
            self.relatedness.fill(0.0);
        }
        if !mask.embedding {
            self.embedding.fill(0.0);
        }
    }

    pub fn digest(&self) -> u64 {
        digest_f64s(self.iter())
    }
}

/// The emerging entity's learnable parameter bundle θ(e*).
#[derive(Debug, Clone, PartialEq)]
pub struct EeFeatures {
    pub ee: EntityId,
    /// Mention-vocabulary columns of the entity's aliases, ascending; the
    /// prior group is indexed in this order.
    pub alias_cols: Vec<MentionId>,
    pub vals: EeVec,
    /// Set when estimation saw no labeled mention of the entity at all.
    pub degenerate: bool,
}

impl EeFeatures {
    pub fn zeros(ee: EntityId, dict: &AliasDictionary, n_entities: usize, q: usize) -> Self {
        let alias_cols = alias_columns(ee, dict);
        EeFeatures {
            ee,
            vals: EeVec::zeros(alias_cols.len(), n_entities, q),
            alias_cols,
            degenerate: false,
        }
    }

    pub fn prior_for(&self, m: MentionId) -> Option<f64> {
        self.alias_cols
            .binary_search(&m)
            .ok()
            .map(|i| self.vals.prior[i])
    }

    pub fn alias_pos(&self, m: MentionId) -> Option<usize> {
        self.alias_cols.binary_search(&m).ok()
    }
}

/// Estimates the full bundle from a (partially pseudo-)labeled candidate
/// corpus: prior ratios per alias, the relatedness row, and the embedding.
/// Groups disabled by `mask` stay zero.
pub fn estimate_ee_features<'a>(
    docs: &[&'a Document],
    store: &FeatureStore,
    ee: EntityId,
    embed_cfg: &EmbedConfig,
    mask: &FeatureMask,
    seed: u64,
) -> EeFeatures {
    let dict = store.dict();
    let mut out = EeFeatures::zeros(ee, dict, store.n_entities(), store.q());

    let counts = count_cooccurrences(docs.iter().copied(), dict);
    let labeled_mentions: u64 = out
        .alias_cols
        .iter()
        .map(|&m| counts.get(ee, m))
        .sum();
    out.degenerate = labeled_mentions == 0;

    if mask.prior {
        out.vals.prior = ee_prior_from_counts(&counts, ee, &out.alias_cols, dict);
    }
    if mask.relatedness {
        let index = build_doc_index(docs.iter().copied());
        out.vals.relatedness = ee_relatedness_row(&index, ee, store.n_entities());
    }
    if mask.embedding {
        let outcome =
            train_entity_embedding(ee, docs.iter().copied(), &store.words, embed_cfg, seed);
        out.vals.embedding = outcome.vector;
    }
    out
}

/// Read view over the store with an optional emerging-entity overlay.
///
/// Lookups touching the overlay's entity read the bundle; everything else
/// reads the frozen store. The relatedness row is served symmetrically, so
/// `(e*, j)` and `(j, e*)` always agree.
#[derive(Clone, Copy)]
pub struct StoreView<'a> {
    store: &'a FeatureStore,
    overlay: Option<&'a EeFeatures>,
}

impl<'a> StoreView<'a> {
    pub fn base(store: &'a FeatureStore) -> Self {
        StoreView {
            store,
            overlay: None,
        }
    }

    pub fn with_ee(store: &'a FeatureStore, overlay: &'a EeFeatures) -> Self {
        StoreView {
            store,
            overlay: Some(overlay),
        }
    }

    pub fn store(&self) -> &'a FeatureStore {
        self.store
    }

    pub fn overlay(&self) -> Option<&'a EeFeatures> {
        self.overlay
    }

    pub fn dict(&self) -> &'a AliasDictionary {
        self.store.dict()
    }

    pub fn q(&self) -> usize {
        self.store.q()
    }

    pub fn prior(&self, e: EntityId, m: MentionId) -> f64 {
        if let Some(ov) = self.overlay {
            if e == ov.ee {
                return ov.prior_for(m).unwrap_or(0.0);
            }
        }
        self.store.prior.get(e, m)
    }

    pub fn prior_str(&self, e: EntityId, surface: &str) -> f64 {
        self.store
            .dict()
            .mention_id(surface)
            .map_or(0.0, |m| self.prior(e, m))
    }

    pub fn relatedness(&self, i: EntityId, j: EntityId) -> f64 {
        if let Some(ov) = self.overlay {
            if i == ov.ee {
                return ov.vals.relatedness[j.0];
            }
            if j == ov.ee {
                return ov.vals.relatedness[i.0];
            }
        }
        self.store.relatedness.get(i, j)
    }

    pub fn embedding(&self, e: EntityId) -> &'a [f64] {
        if let Some(ov) = self.overlay {
            if e == ov.ee {
                return &ov.vals.embedding;
            }
        }
        self.store.embeddings.row(e)
    }

    pub fn word_vector(&self, w: &str) -> Option<&'a [f64]> {
        self.store.words.vector(w)
    }
}
