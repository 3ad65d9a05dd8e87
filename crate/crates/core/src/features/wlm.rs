//! Document-set relatedness (θ2): inverted doc index and the link-based
//! relatedness measure over it.
//!
//! Relatedness between two entities is
//! `1 − (ln max(|Di|,|Dj|) − ln |Di∩Dj|) / (ln |D| − ln min(|Di|,|Dj|))`
//! with natural logarithms. Degenerate cases are pinned: an empty doc set or
//! empty overlap scores 0, identical doc sets score 1, and negative values
//! are clamped to 0.

use std::collections::{HashMap, HashSet};

use crate::kb::{Document, EntityId};

/// Inverted index: for each entity, the set of documents that refer to it
/// (by gold or pseudo label), plus the corpus size |D|.
#[derive(Debug, Clone, Default)]
pub struct DocSetIndex {
    total_docs: usize,
    doc_sets: HashMap<EntityId, HashSet<String>>,
}

impl DocSetIndex {
    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    pub fn doc_set(&self, e: EntityId) -> Option<&HashSet<String>> {
        self.doc_sets.get(&e)
    }

    pub fn doc_count(&self, e: EntityId) -> usize {
        self.doc_sets.get(&e).map_or(0, HashSet::len)
    }

    pub fn overlap(&self, i: EntityId, j: EntityId) -> usize {
        match (self.doc_sets.get(&i), self.doc_sets.get(&j)) {
            (Some(a), Some(b)) => {
                let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
                small.iter().filter(|d| large.contains(*d)).count()
            }
            _ => 0,
        }
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.doc_sets.keys().copied()
    }
}

/// Builds the inverted index over labeled mentions of a corpus.
pub fn build_doc_index<'a>(docs: impl IntoIterator<Item = &'a Document>) -> DocSetIndex {
    let mut index = DocSetIndex::default();
    for doc in docs {
        index.total_docs += 1;
        for mention in &doc.mentions {
            if let Some(e) = mention.label.entity() {
                index
                    .doc_sets
                    .entry(e)
                    .or_default()
                    .insert(doc.doc_id.clone());
            }
        }
    }
    index
}

/// Link-based relatedness of two entities under an index.
pub fn wlm(i: EntityId, j: EntityId, index: &DocSetIndex) -> f64 {
    let di = index.doc_count(i);
    let dj = index.doc_count(j);
    if di == 0 || dj == 0 {
        return 0.0;
    }
    let overlap = if i == j { di } else { index.overlap(i, j) };
    if overlap == 0 {
        return 0.0;
    }
    let (lo, hi) = (di.min(dj) as f64, di.max(dj) as f64);
    let numerator = hi.ln() - (overlap as f64).ln();
    if numerator <= 0.0 {
        // max(|Di|,|Dj|) == |Di∩Dj| means the doc sets coincide.
        return 1.0;
    }
    let denominator = (index.total_docs() as f64).ln() - lo.ln();
    if denominator <= 0.0 {
        return 0.0;
    }
    (1.0 - numerator / denominator).max(0.0)
}

/// Sparse symmetric relatedness table θ2. Keys are stored canonically so
/// `get(i, j) == get(j, i)` by construction; absent pairs read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelatednessMatrix {
    entries: HashMap<(EntityId, EntityId), f64>,
}

impl RelatednessMatrix {
    fn key(i: EntityId, j: EntityId) -> (EntityId, EntityId) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn get(&self, i: EntityId, j: EntityId) -> f64 {
        self.entries.get(&Self::key(i, j)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: EntityId, j: EntityId, score: f64) {
        if score != 0.0 {
            self.entries.insert(Self::key(i, j), score);
        } else {
            self.entries.remove(&Self::key(i, j));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, EntityId, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &s)| (i, j, s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Full pairwise estimation over the indexed entities.
pub fn estimate_relatedness(index: &DocSetIndex, n_entities: usize) -> RelatednessMatrix {
    let mut matrix = RelatednessMatrix::default();
    let mut present: Vec<EntityId> = index
        .entities()
        .filter(|e| e.0 < n_entities && index.doc_count(*e) > 0)
        .collect();
    present.sort();
    for (a, &i) in present.iter().enumerate() {
        for &j in &present[a..] {
            matrix.set(i, j, wlm(i, j, index));
        }
    }
    matrix
}

/// The emerging entity's relatedness row under a web-corpus index.
pub fn ee_relatedness_row(web_index: &DocSetIndex, ee: EntityId, n_entities: usize) -> Vec<f64> {
    (0..n_entities)
        .map(|j| wlm(ee, EntityId(j), web_index))
        .collect()
}

/// Recomputes the emerging entity's row and column from the web index,
/// leaving every other pair untouched. Symmetry is preserved because row and
/// column share storage.
pub fn update_relatedness_for_ee(
    matrix: &RelatednessMatrix,
    web_index: &DocSetIndex,
    ee: EntityId,
    n_entities: usize,
) -> RelatednessMatrix {
    let mut out = matrix.clone();
    for (j, &score) in ee_relatedness_row(web_index, ee, n_entities).iter().enumerate() {
        out.set(ee, EntityId(j), score);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{CorpusSource, Label, MentionOccurrence};
    use rand::Rng;

    fn doc(id: &str, entities: &[usize]) -> Document {
        let tokens: Vec<String> = entities.iter().map(|e| format!("e{e}")).collect();
        let mentions = entities
            .iter()
            .enumerate()
            .map(|(i, &e)| MentionOccurrence {
                start: i,
                end: i + 1,
                surface: format!("e{e}"),
                is_candidate: false,
                label: Label::Gold(EntityId(e)),
            })
            .collect();
        Document {
            doc_id: id.to_string(),
            tokens,
            mentions,
            source: CorpusSource::WikiLike,
        }
    }

    #[test]
    fn index_counts_docs_per_entity() {
        let docs = vec![doc("a", &[0, 1]), doc("b", &[0])];
        let index = build_doc_index(&docs);
        assert_eq!(index.total_docs(), 2);
        assert_eq!(index.doc_count(EntityId(0)), 2);
        assert_eq!(index.doc_count(EntityId(1)), 1);
        assert_eq!(index.doc_count(EntityId(9)), 0);
    }

    #[test]
    fn index_of_union_is_union_of_indices() {
        let a = vec![doc("a", &[0, 1]), doc("b", &[2])];
        let b = vec![doc("c", &[1, 2])];
        let union: Vec<Document> = a.iter().chain(b.iter()).cloned().collect();
        let idx = build_doc_index(&union);
        let ia = build_doc_index(&a);
        let ib = build_doc_index(&b);
        assert_eq!(idx.total_docs(), ia.total_docs() + ib.total_docs());
        for e in [0, 1, 2].map(EntityId) {
            let merged: HashSet<String> = ia
                .doc_set(e)
                .into_iter()
                .chain(ib.doc_set(e))
                .flatten()
                .cloned()
                .collect();
            assert_eq!(idx.doc_set(e).cloned().unwrap_or_default(), merged);
        }
    }

    // Synthetic index with prescribed sizes: |D|=100, |D(i)|=10, |D(j)|=5, overlap 3.
    fn prescribed_index() -> DocSetIndex {
        let mut docs = Vec::new();
        for k in 0..100 {
            let mut ents = Vec::new();
            if k < 10 {
                ents.push(0);
            }
            // overlap docs 0..3, then 7..9 to reach |D(j)|=5
            if k < 3 || (7..9).contains(&k) {
                ents.push(1);
            }
            docs.push(doc(&format!("d{k}"), &ents));
        }
        build_doc_index(&docs)
    }

    #[test]
    fn wlm_worked_example() {
        let index = prescribed_index();
        assert_eq!(index.doc_count(EntityId(0)), 10);
        assert_eq!(index.doc_count(EntityId(1)), 5);
        assert_eq!(index.overlap(EntityId(0), EntityId(1)), 3);
        let got = wlm(EntityId(0), EntityId(1), &index);
        // 1 - ln(10/3)/ln(100/5)
        let expected = 1.0 - (10.0f64 / 3.0).ln() / (100.0f64 / 5.0).ln();
        assert!((got - 0.598104).abs() < 1e-6, "got {got}");
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn wlm_self_is_one() {
        let docs: Vec<Document> = (0..7).map(|k| doc(&format!("d{k}"), &[0])).collect();
        let index = build_doc_index(&docs);
        assert_eq!(wlm(EntityId(0), EntityId(0), &index), 1.0);
    }

    #[test]
    fn wlm_disjoint_is_zero() {
        let docs = vec![doc("a", &[0]), doc("b", &[1])];
        let index = build_doc_index(&docs);
        assert_eq!(wlm(EntityId(0), EntityId(1), &index), 0.0);
    }

    #[test]
    fn wlm_empty_set_is_zero() {
        let docs = vec![doc("a", &[0])];
        let index = build_doc_index(&docs);
        assert_eq!(wlm(EntityId(0), EntityId(5), &index), 0.0);
    }

    /// Brute-force oracle evaluated straight from set operations, kept
    /// independent of the `wlm` code path.
    pub(crate) fn wlm_oracle(
        docs_i: &HashSet<String>,
        docs_j: &HashSet<String>,
        total: usize,
    ) -> f64 {
        if docs_i.is_empty() || docs_j.is_empty() {
            return 0.0;
        }
        let overlap = docs_i.intersection(docs_j).count();
        if overlap == 0 {
            return 0.0;
        }
        let hi = docs_i.len().max(docs_j.len()) as f64;
        let lo = docs_i.len().min(docs_j.len()) as f64;
        let num = hi.ln() - (overlap as f64).ln();
        if num <= 0.0 {
            return 1.0;
        }
        let den = (total as f64).ln() - lo.ln();
        if den <= 0.0 {
            return 0.0;
        }
        (1.0 - num / den).max(0.0)
    }

    #[test]
    fn wlm_matches_brute_force_on_random_corpora() {
        let mut rng = crate::util::rng_from(17);
        for _ in 0..200 {
            let n_docs = rng.gen_range(1..=50);
            let n_entities = rng.gen_range(2..=20);
            let docs: Vec<Document> = (0..n_docs)
                .map(|d| {
                    let k = rng.gen_range(0..4.min(n_entities));
                    let ents: Vec<usize> = (0..k).map(|_| rng.gen_range(0..n_entities)).collect();
                    doc(&format!("d{d}"), &ents)
                })
                .collect();
            let index = build_doc_index(&docs);
            for _ in 0..10 {
                let i = EntityId(rng.gen_range(0..n_entities));
                let j = EntityId(rng.gen_range(0..n_entities));
                let empty = HashSet::new();
                let oracle = wlm_oracle(
                    index.doc_set(i).unwrap_or(&empty),
                    index.doc_set(j).unwrap_or(&empty),
                    index.total_docs(),
                );
                let got = wlm(i, j, &index);
                assert!((got - oracle).abs() < 1e-12, "{i} {j}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_and_updates_preserve_frozen_pairs() {
        let wiki = vec![doc("a", &[0, 1]), doc("b", &[0, 1]), doc("c", &[1])];
        let index = build_doc_index(&wiki);
        let base = estimate_relatedness(&index, 3);
        assert_eq!(base.get(EntityId(0), EntityId(1)), base.get(EntityId(1), EntityId(0)));
        assert_eq!(base.get(EntityId(0), EntityId(0)), 1.0);

        let web = vec![doc("x", &[2, 1]), doc("y", &[2]), doc("z", &[1])];
        let web_index = build_doc_index(&web);
        let updated = update_relatedness_for_ee(&base, &web_index, EntityId(2), 3);
        // Frozen pair untouched.
        assert_eq!(
            updated.get(EntityId(0), EntityId(1)),
            base.get(EntityId(0), EntityId(1))
        );
        assert_eq!(updated.get(EntityId(2), EntityId(2)), 1.0);
        assert_eq!(
            updated.get(EntityId(2), EntityId(1)),
            updated.get(EntityId(1), EntityId(2))
        );
        // EE row zero when the EE has an empty web doc set.
        let empty_web = build_doc_index(&[doc("w", &[0])]);
        let zeroed = update_relatedness_for_ee(&base, &empty_web, EntityId(2), 3);
        for j in 0..3 {
            assert_eq!(zeroed.get(EntityId(2), EntityId(j)), 0.0);
        }
    }
}
