//! Knowledge-base data model: entities, aliases, mentions, documents,
//! candidate generation, and the local-model linking contract.
//!
//! Conventions used throughout the crate:
//!
//! * Entity ids are dense `0..|E|`. Emerging entities occupy the tail of the
//!   index range, so with a single emerging entity it is `|E|-1`.
//! * All tie-breaks (equal priors, equal scores) resolve to the ascending
//!   entity id. The reference method leaves tie handling unspecified; a fixed
//!   rule keeps every run reproducible.
//! * Alias matching is exact and case-sensitive over whitespace tokens.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::PriorTable;
use crate::features::StoreView;
use crate::models::{LinkingContext, ScoringModel};
use crate::{Error, Result};

/// Dense index of an entity in a [`KnowledgeBase`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct EntityId(pub usize);

impl std::fmt::Display for EntityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense index of an alias string in the mention vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MentionId(pub usize);

/// An entity record. Aliases are kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub is_emerging: bool,
}

impl Entity {
    pub fn new(
        id: usize,
        canonical_name: impl Into<String>,
        aliases: impl IntoIterator<Item = impl Into<String>>,
        is_emerging: bool,
    ) -> Self {
        let mut aliases: Vec<String> = aliases.into_iter().map(Into::into).collect();
        aliases.sort();
        aliases.dedup();
        Entity {
            id: EntityId(id),
            canonical_name: canonical_name.into(),
            aliases,
            is_emerging,
        }
    }
}

/// The target knowledge base: a dense list of entities.
///
/// Emerging entities sit at the tail of the index range and carry at most
/// three aliases each; exactly one of them is the learning target of any
/// single run.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entities: Vec<Entity>,
}

impl KnowledgeBase {
    pub fn new(entities: Vec<Entity>) -> Result<Self> {
        for (i, e) in entities.iter().enumerate() {
            if e.id.0 != i {
                return Err(Error::InvalidKb(format!(
                    "entity ids must be dense: found id {} at position {}",
                    e.id.0, i
                )));
            }
            if e.aliases.is_empty() {
                return Err(Error::InvalidKb(format!("entity {} has no aliases", e.id)));
            }
            if e.is_emerging && e.aliases.len() > 3 {
                return Err(Error::InvalidKb(format!(
                    "emerging entity {} has {} aliases (max 3)",
                    e.id,
                    e.aliases.len()
                )));
            }
        }
        // Emerging entities must form a contiguous tail.
        let first_emerging = entities
            .iter()
            .position(|e| e.is_emerging)
            .unwrap_or(entities.len());
        if let Some(bad) = entities[first_emerging..].iter().find(|e| !e.is_emerging) {
            return Err(Error::InvalidKb(format!(
                "non-emerging entity {} after emerging ones; emerging entities must be last",
                bad.id
            )));
        }
        Ok(KnowledgeBase { entities })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: EntityId) -> &Entity {
        &self.entities[id.0]
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn emerging(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.is_emerging)
    }

    pub fn non_emerging(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| !e.is_emerging)
    }

    /// TSV columns: entity_id, canonical_name, pipe-separated aliases, is_emerging(0/1).
    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entities {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.id,
                e.canonical_name,
                e.aliases.join("|"),
                u8::from(e.is_emerging)
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let mut entities = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, got {}", cols.len())));
            }
            let id: usize = cols[0]
                .parse()
                .map_err(|e| parse_err(format!("bad entity id: {e}")))?;
            let is_emerging = match cols[3] {
                "0" => false,
                "1" => true,
                other => return Err(parse_err(format!("bad is_emerging flag {other:?}"))),
            };
            entities.push(Entity::new(
                id,
                cols[1],
                cols[2].split('|').filter(|a| !a.is_empty()),
                is_emerging,
            ));
        }
        KnowledgeBase::new(entities)
    }
}

/// Inverted alias index plus a dense vocabulary over alias strings.
///
/// `lookup(m)` returns the candidate set `E(m)` in ascending entity-id order;
/// the round-trip invariant `m ∈ A(e) ⇔ e ∈ E(m)` holds by construction.
#[derive(Debug, Clone)]
pub struct AliasDictionary {
    alias_to_entities: HashMap<String, Vec<EntityId>>,
    mention_vocab: Vec<String>,
    vocab_index: HashMap<String, MentionId>,
}

/// Builds the alias dictionary, erroring on duplicate or non-dense ids.
pub fn build_alias_dictionary(entities: &[Entity]) -> Result<AliasDictionary> {
    let mut seen = vec![false; entities.len()];
    let mut alias_to_entities: HashMap<String, Vec<EntityId>> = HashMap::new();
    for e in entities {
        if e.id.0 >= entities.len() || seen[e.id.0] {
            return Err(Error::InvalidKb(format!(
                "duplicate or out-of-range entity id {}",
                e.id
            )));
        }
        seen[e.id.0] = true;
        for alias in &e.aliases {
            alias_to_entities.entry(alias.clone()).or_default().push(e.id);
        }
    }
    for ids in alias_to_entities.values_mut() {
        ids.sort();
        ids.dedup();
    }
    let mut mention_vocab: Vec<String> = alias_to_entities.keys().cloned().collect();
    mention_vocab.sort();
    let vocab_index = mention_vocab
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), MentionId(i)))
        .collect();
    Ok(AliasDictionary {
        alias_to_entities,
        mention_vocab,
        vocab_index,
    })
}

impl AliasDictionary {
    /// Candidate entities for a surface string, ascending by id; empty if unknown.
    pub fn lookup(&self, surface: &str) -> &[EntityId] {
        self.alias_to_entities
            .get(surface)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn mention_id(&self, surface: &str) -> Option<MentionId> {
        self.vocab_index.get(surface).copied()
    }

    pub fn mention_str(&self, id: MentionId) -> &str {
        &self.mention_vocab[id.0]
    }

    pub fn vocab_len(&self) -> usize {
        self.mention_vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.mention_vocab
    }
}

/// Label state of a mention occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Gold(EntityId),
    Pseudo(EntityId),
    Unlabeled,
}

impl Label {
    pub fn entity(&self) -> Option<EntityId> {
        match self {
            Label::Gold(e) | Label::Pseudo(e) => Some(*e),
            Label::Unlabeled => None,
        }
    }

    pub fn is_unlabeled(&self) -> bool {
        matches!(self, Label::Unlabeled)
    }
}

/// A mention span inside a document. `is_candidate` is true iff the surface
/// is an alias of the run's emerging entity; non-candidate mentions always
/// arrive gold-linked and serve as the entity context.
#[derive(Debug, Clone, PartialEq)]
pub struct MentionOccurrence {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub is_candidate: bool,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusSource {
    WikiLike,
    WebLike,
}

/// A tokenized document with mention annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<MentionOccurrence>,
    pub source: CorpusSource,
}

impl Document {
    /// Checks span bounds, ordering, non-overlap, and surface/token agreement.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Error::InvalidDocument {
            doc_id: self.doc_id.clone(),
            msg,
        };
        let mut prev_end = 0usize;
        for (i, m) in self.mentions.iter().enumerate() {
            if m.start >= m.end || m.end > self.tokens.len() {
                return Err(fail(format!("mention {i} span out of bounds")));
            }
            if m.start < prev_end {
                return Err(fail(format!("mention {i} overlaps or is unsorted")));
            }
            prev_end = m.end;
            let joined = self.tokens[m.start..m.end].join(" ");
            if joined != m.surface {
                return Err(fail(format!(
                    "mention {i} surface {:?} does not match tokens {joined:?}",
                    m.surface
                )));
            }
            if !m.is_candidate && m.label.entity().is_none() {
                return Err(fail(format!("non-candidate mention {i} is unlabeled")));
            }
        }
        Ok(())
    }

    pub fn candidate_mentions(&self) -> impl Iterator<Item = (usize, &MentionOccurrence)> {
        self.mentions
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_candidate)
    }
}

/// Candidate generation mode: training truncates to the 30 most probable
/// candidates, testing keeps the full set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    Train,
    Test,
}

pub const MAX_TRAIN_CANDIDATES: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub candidates: Vec<EntityId>,
    pub truncated: bool,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }
}

/// Candidate set for a surface, with an arbitrary prior lookup.
///
/// Train mode keeps the top 30 by descending prior, ties broken by ascending
/// entity id; with an all-zero prior this degenerates to dictionary order.
pub fn candidates_for_with(
    surface: &str,
    dict: &AliasDictionary,
    prior_of: impl Fn(EntityId) -> f64,
    mode: CandidateMode,
) -> CandidateSet {
    let all = dict.lookup(surface);
    match mode {
        CandidateMode::Test => CandidateSet {
            candidates: all.to_vec(),
            truncated: false,
        },
        CandidateMode::Train => {
            if all.len() <= MAX_TRAIN_CANDIDATES {
                return CandidateSet {
                    candidates: all.to_vec(),
                    truncated: false,
                };
            }
            let mut ranked: Vec<EntityId> = all.to_vec();
            // Stable ranking: descending prior, then ascending id.
            ranked.sort_by(|a, b| {
                prior_of(*b)
                    .partial_cmp(&prior_of(*a))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(b))
            });
            ranked.truncate(MAX_TRAIN_CANDIDATES);
            CandidateSet {
                candidates: ranked,
                truncated: true,
            }
        }
    }
}

/// Candidate set ranked by a prior table (empty table → dictionary order).
pub fn candidates_for(
    m: &MentionOccurrence,
    dict: &AliasDictionary,
    prior: &PriorTable,
    mode: CandidateMode,
) -> CandidateSet {
    let mention_id = dict.mention_id(&m.surface);
    candidates_for_with(
        &m.surface,
        dict,
        |e| mention_id.map_or(0.0, |mid| prior.get(e, mid)),
        mode,
    )
}

/// Links every candidate mention of a document with the argmax-scoring
/// candidate entity; mention surfaces absent from the dictionary are skipped.
///
/// Returns `(mention index, predicted entity)` pairs in mention order. The
/// call is a pure function of its inputs: scores are evaluated with dropout
/// disabled and ties resolve to the lower entity id.
pub fn link_document(
    doc: &Document,
    scorer: &ScoringModel,
    view: &StoreView<'_>,
) -> Vec<(usize, EntityId)> {
    let dict = view.dict();
    let mut out = Vec::new();
    for (idx, mention) in doc.candidate_mentions() {
        let cands = candidates_for_with(
            &mention.surface,
            dict,
            |e| view.prior_str(e, &mention.surface),
            CandidateMode::Test,
        );
        if cands.is_empty() {
            continue;
        }
        let ctx = LinkingContext::from_document(doc, idx, scorer.context_window());
        let mut best: Option<(EntityId, f64)> = None;
        for &e in &cands.candidates {
            let s = scorer.score(e, mention, &ctx, &cands, view);
            let better = match best {
                None => true,
                Some((be, bs)) => s > bs || (s == bs && e < be),
            };
            if better {
                best = Some((e, s));
            }
        }
        if let Some((e, _)) = best {
            out.push((idx, e));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ent(id: usize, name: &str, aliases: &[&str]) -> Entity {
        Entity::new(id, name, aliases.iter().copied(), false)
    }

    #[test]
    fn dictionary_inverts_aliases() {
        let entities = vec![
            ent(0, "New York City", &["NYC", "Big Apple"]),
            ent(1, "NYC (band)", &["NYC"]),
        ];
        let dict = build_alias_dictionary(&entities).unwrap();
        assert_eq!(dict.lookup("NYC"), &[EntityId(0), EntityId(1)]);
        assert_eq!(dict.lookup("Big Apple"), &[EntityId(0)]);
        assert_eq!(dict.lookup("unknown"), &[] as &[EntityId]);
    }

    #[test]
    fn dictionary_singleton() {
        let dict = build_alias_dictionary(&[ent(0, "Solo", &["solo"])]).unwrap();
        assert_eq!(dict.lookup("solo"), &[EntityId(0)]);
        assert_eq!(dict.vocab_len(), 1);
    }

    #[test]
    fn shared_alias_four_candidates() {
        let entities: Vec<Entity> = (0..4).map(|i| ent(i, &format!("Rey {i}"), &["Rey"])).collect();
        let dict = build_alias_dictionary(&entities).unwrap();
        assert_eq!(dict.lookup("Rey").len(), 4);
    }

    #[test]
    fn duplicate_id_is_error() {
        let entities = vec![ent(0, "A", &["a"]), ent(0, "B", &["b"])];
        assert!(build_alias_dictionary(&entities).is_err());
    }

    #[test]
    fn kb_requires_emerging_tail() {
        let mut a = ent(0, "A", &["a"]);
        a.is_emerging = true;
        let b = ent(1, "B", &["b"]);
        assert!(KnowledgeBase::new(vec![a, b]).is_err());
    }

    #[test]
    fn kb_rejects_wide_emerging_alias_set() {
        let mut e = Entity::new(0, "E", ["a", "b", "c", "d"], true);
        e.is_emerging = true;
        assert!(KnowledgeBase::new(vec![e]).is_err());
    }

    #[test]
    fn kb_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.tsv");
        let kb = KnowledgeBase::new(vec![
            ent(0, "New York City", &["NYC", "Big Apple"]),
            Entity::new(1, "Rey Skywalker", ["Rey", "Skywalker"], true),
        ])
        .unwrap();
        kb.save_tsv(&path).unwrap();
        let loaded = KnowledgeBase::load_tsv(&path).unwrap();
        assert_eq!(loaded.entities(), kb.entities());
    }

    fn mention(surface: &str) -> MentionOccurrence {
        MentionOccurrence {
            start: 0,
            end: 1,
            surface: surface.to_string(),
            is_candidate: true,
            label: Label::Unlabeled,
        }
    }

    #[test]
    fn truncation_keeps_top_30_by_prior() {
        let entities: Vec<Entity> = (0..40).map(|i| ent(i, &format!("E{i}"), &["m"])).collect();
        let dict = build_alias_dictionary(&entities).unwrap();
        // Higher id → higher prior, so the top 30 are ids 10..40 descending.
        let set = candidates_for_with("m", &dict, |e| e.0 as f64, CandidateMode::Train);
        assert!(set.truncated);
        assert_eq!(set.len(), 30);
        assert_eq!(set.candidates[0], EntityId(39));
        assert_eq!(set.candidates[29], EntityId(10));

        let full = candidates_for_with("m", &dict, |e| e.0 as f64, CandidateMode::Test);
        assert!(!full.truncated);
        assert_eq!(full.len(), 40);
    }

    #[test]
    fn truncation_tie_breaks_ascending_id() {
        let entities: Vec<Entity> = (0..31).map(|i| ent(i, &format!("E{i}"), &["m"])).collect();
        let dict = build_alias_dictionary(&entities).unwrap();
        let set = candidates_for_with("m", &dict, |_| 0.5, CandidateMode::Train);
        assert_eq!(set.candidates[0], EntityId(0));
        assert_eq!(set.len(), 30);
        assert!(!set.candidates.contains(&EntityId(30)));
    }

    #[test]
    fn unknown_surface_yields_empty_set() {
        let dict = build_alias_dictionary(&[ent(0, "A", &["a"])]).unwrap();
        let m = mention("zzz");
        let prior = PriorTable::default();
        let set = candidates_for(&m, &dict, &prior, CandidateMode::Train);
        assert!(set.is_empty());
    }

    #[test]
    fn document_validation_catches_bad_spans() {
        let doc = Document {
            doc_id: "d0".into(),
            tokens: vec!["a".into(), "b".into()],
            mentions: vec![MentionOccurrence {
                start: 1,
                end: 3,
                surface: "b".into(),
                is_candidate: true,
                label: Label::Unlabeled,
            }],
            source: CorpusSource::WebLike,
        };
        assert!(doc.validate().is_err());
    }

    #[test]
    fn document_validation_checks_surface_agreement() {
        let doc = Document {
            doc_id: "d0".into(),
            tokens: vec!["Big".into(), "Apple".into()],
            mentions: vec![MentionOccurrence {
                start: 0,
                end: 2,
                surface: "Big Apple".into(),
                is_candidate: true,
                label: Label::Unlabeled,
            }],
            source: CorpusSource::WebLike,
        };
        doc.validate().unwrap();
    }

    proptest! {
        // m ∈ A(e) ⇔ e ∈ E(m), over random alias assignments.
        #[test]
        fn alias_round_trip(assignments in prop::collection::vec(prop::collection::vec(0usize..8, 1..4), 1..10)) {
            let entities: Vec<Entity> = assignments
                .iter()
                .enumerate()
                .map(|(i, aliases)| {
                    Entity::new(i, format!("E{i}"), aliases.iter().map(|a| format!("alias{a}")), false)
                })
                .collect();
            let dict = build_alias_dictionary(&entities).unwrap();
            for e in &entities {
                for alias in &e.aliases {
                    prop_assert!(dict.lookup(alias).contains(&e.id));
                }
            }
            for alias in dict.vocab() {
                for id in dict.lookup(alias) {
                    prop_assert!(entities[id.0].aliases.iter().any(|a| a == alias));
                }
            }
        }
    }
}
