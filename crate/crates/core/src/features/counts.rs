//! Mention-entity co-occurrence counting and prior-probability estimation.
//!
//! The prior for entity `e` given mention surface `m` is the count ratio
//! `count(e, m) / Σ_{e' ∈ E(m)} count(e', m)` over a labeled corpus. For an
//! emerging entity the same ratio is recomputed on the candidate web corpus
//! for its alias columns only; all other entries stay frozen.

use std::collections::HashMap;

use crate::kb::{AliasDictionary, Document, EntityId, MentionId};

/// Sparse mention-entity co-occurrence counts.
///
/// Merging two counts is commutative and associative, so counting can be
/// sharded over document subsets and recombined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceCounts {
    counts: HashMap<(EntityId, MentionId), u64>,
}

impl CooccurrenceCounts {
    pub fn get(&self, e: EntityId, m: MentionId) -> u64 {
        self.counts.get(&(e, m)).copied().unwrap_or(0)
    }

    pub fn add(&mut self, e: EntityId, m: MentionId, n: u64) {
        if n > 0 {
            *self.counts.entry((e, m)).or_insert(0) += n;
        }
    }

    pub fn merge(&mut self, other: &CooccurrenceCounts) {
        for (&k, &v) in &other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, MentionId, u64)> + '_ {
        self.counts.iter().map(|(&(e, m), &v)| (e, m, v))
    }
}

/// Tallies labeled (mention, entity) pairs. Gold and pseudo labels count
/// identically; which of them appear is decided by the corpus handed in.
/// Mentions whose surface is not in the dictionary are skipped.
pub fn count_cooccurrences<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    dict: &AliasDictionary,
) -> CooccurrenceCounts {
    let mut counts = CooccurrenceCounts::default();
    for doc in docs {
        for mention in &doc.mentions {
            if let (Some(e), Some(m)) = (mention.label.entity(), dict.mention_id(&mention.surface))
            {
                counts.add(e, m, 1);
            }
        }
    }
    counts
}

/// Sparse prior-probability table θ1. Absent entries read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorTable {
    entries: HashMap<(EntityId, MentionId), f64>,
}

impl PriorTable {
    pub fn get(&self, e: EntityId, m: MentionId) -> f64 {
        self.entries.get(&(e, m)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, e: EntityId, m: MentionId, p: f64) {
        self.entries.insert((e, m), p);
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, MentionId, f64)> + '_ {
        self.entries.iter().map(|(&(e, m), &p)| (e, m, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Estimates the prior table from counts: each populated mention column is
/// normalized over the candidate set of that mention; columns with zero
/// total are left absent.
pub fn estimate_prior(counts: &CooccurrenceCounts, dict: &AliasDictionary) -> PriorTable {
    let mut table = PriorTable::default();
    for (j, alias) in dict.vocab().iter().enumerate() {
        let m = MentionId(j);
        let candidates = dict.lookup(alias);
        let total: u64 = candidates.iter().map(|&e| counts.get(e, m)).sum();
        if total == 0 {
            continue;
        }
        for &e in candidates {
            let c = counts.get(e, m);
            if c > 0 {
                table.set(e, m, c as f64 / total as f64);
            }
        }
    }
    table
}

/// The emerging entity's prior entries over its alias columns, from web
/// counts. The denominator runs over the full candidate set of each alias;
/// a zero denominator yields a zero entry.
pub fn ee_prior_from_counts(
    web_counts: &CooccurrenceCounts,
    ee: EntityId,
    alias_cols: &[MentionId],
    dict: &AliasDictionary,
) -> Vec<f64> {
    alias_cols
        .iter()
        .map(|&m| {
            let candidates = dict.lookup(dict.mention_str(m));
            let total: u64 = candidates.iter().map(|&e| web_counts.get(e, m)).sum();
            if total == 0 {
                0.0
            } else {
                web_counts.get(ee, m) as f64 / total as f64
            }
        })
        .collect()
}

/// Mention-vocabulary columns belonging to an entity's aliases, ascending.
pub fn alias_columns(ee: EntityId, dict: &AliasDictionary) -> Vec<MentionId> {
    (0..dict.vocab_len())
        .map(MentionId)
        .filter(|&m| dict.lookup(dict.mention_str(m)).contains(&ee))
        .collect()
}

/// Rewrites the emerging entity's alias entries from web counts, leaving
/// every other entry untouched.
pub fn update_prior_for_ee(
    prior: &PriorTable,
    web_counts: &CooccurrenceCounts,
    ee: EntityId,
    dict: &AliasDictionary,
) -> PriorTable {
    let mut out = prior.clone();
    let cols = alias_columns(ee, dict);
    let values = ee_prior_from_counts(web_counts, ee, &cols, dict);
    for (&m, &p) in cols.iter().zip(&values) {
        out.set(ee, m, p);
    }
    out
}
