//! Hierarchies, documents and the corpus that binds them.

mod hierarchy;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::hierarchy::{parse_hierarchy, Entity, Hierarchy, HierarchyError, NodeId};
pub use self::tokenize::tokenize;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("document `{doc}` is bound to unknown entity `{entity}`")]
    UnknownEntity { doc: String, entity: String },
    #[error("document `{doc}` is bound to internal entity `{entity}`; documents must sit on leaves")]
    NotALeaf { doc: String, entity: String },
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
    #[error("documents file line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a documents file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub entity: String,
    pub text: String,
}

/// A tokenized document owned by a leaf entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub owner: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Documents bound to the leaves of a hierarchy, plus their vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    hierarchy: Hierarchy,
    documents: Vec<Document>,
    vocabulary: BTreeSet<String>,
    // Document positions per entity, indexed by NodeId; empty for internal nodes.
    by_leaf: Vec<Vec<usize>>,
}

/// Reads a JSON-lines documents file. Blank lines are skipped.
pub fn read_document_records<R: BufRead>(reader: R) -> Result<Vec<DocumentRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

impl Corpus {
    /// Tokenizes raw records and binds them to leaves of `hierarchy`.
    pub fn ingest<I>(records: I, hierarchy: Hierarchy) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = DocumentRecord>,
    {
        let docs = records.into_iter().map(|r| Document {
            tokens: tokenize(&r.text),
            id: r.id,
            owner: r.entity,
        });
        Self::from_documents(hierarchy, docs)
    }

    /// Builds a corpus from already tokenized documents.
    pub fn from_documents<I>(hierarchy: Hierarchy, docs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut by_leaf = vec![Vec::new(); hierarchy.len()];
        let mut seen = HashSet::new();
        let mut documents = Vec::new();
        let mut vocabulary = BTreeSet::new();
        for doc in docs {
            let node = hierarchy
                .get(&doc.owner)
                .ok_or_else(|| CorpusError::UnknownEntity {
                    doc: doc.id.clone(),
                    entity: doc.owner.clone(),
                })?;
            if !hierarchy.is_leaf(node) {
                return Err(CorpusError::NotALeaf {
                    doc: doc.id.clone(),
                    entity: doc.owner.clone(),
                });
            }
            if !seen.insert(doc.id.clone()) {
                return Err(CorpusError::DuplicateDocument(doc.id));
            }
            vocabulary.extend(doc.tokens.iter().cloned());
            by_leaf[node.index()].push(documents.len());
            documents.push(doc);
        }
        Ok(Corpus {
            hierarchy,
            documents,
            vocabulary,
            by_leaf,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// Documents owned directly by `node` (only leaves own documents).
    pub fn documents_of(&self, node: NodeId) -> impl Iterator<Item = &Document> + '_ {
        self.by_leaf[node.index()].iter().map(|&i| &self.documents[i])
    }

    /// Documents anywhere in the subtree of `node`.
    pub fn documents_under(&self, node: NodeId) -> impl Iterator<Item = &Document> + '_ {
        self.hierarchy
            .leaves_under(node)
            .into_iter()
            .flat_map(move |leaf| self.documents_of(leaf))
    }

    /// Pooled term frequencies over every document under `node`.
    pub fn term_counts(&self, node: NodeId) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in self.documents_under(node) {
            for tok in &doc.tokens {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        counts
    }

    pub fn token_count(&self, node: NodeId) -> usize {
        self.documents_under(node).map(Document::token_count).sum()
    }

    /// Keeps only the listed leaves (and their ancestors); other leaves and
    /// their documents are dropped. Internal nodes left without leaves are
    /// pruned, except the root.
    pub fn restrict_to_leaves(&self, leaves: &[NodeId]) -> Corpus {
        let keep: HashSet<NodeId> = leaves.iter().copied().collect();
        self.retain_leaves(|n| keep.contains(&n))
    }

    fn retain_leaves(&self, keep_leaf: impl Fn(NodeId) -> bool) -> Corpus {
        let h = &self.hierarchy;
        let kept_leaves: Vec<NodeId> = h.leaves().filter(|&l| keep_leaf(l)).collect();
        if kept_leaves.len() == h.leaves().count() {
            return self.clone();
        }
        let mut keep: HashSet<NodeId> = HashSet::new();
        for leaf in kept_leaves {
            let mut cur = Some(leaf);
            while let Some(n) = cur {
                if !keep.insert(n) {
                    break;
                }
                cur = h.parent(n);
            }
        }
        let pruned = h.retain(|n| keep.contains(&n));
        let docs = self
            .documents
            .iter()
            .filter(|d| h.get(&d.owner).is_some_and(|n| keep.contains(&n)))
            .cloned();
        Corpus::from_documents(pruned, docs).expect("subset of a valid corpus is valid")
    }

    /// Re-roots every document as its own leaf under the entity that owned it.
    ///
    /// Use this to model at document granularity instead of pooling all of a
    /// leaf's documents into one pseudo-document.
    pub fn documents_as_leaves(&self) -> Result<Corpus, CorpusError> {
        let mut links = self.hierarchy.links();
        for doc in &self.documents {
            links.push((doc.id.clone(), Some(doc.owner.clone())));
        }
        let hierarchy = Hierarchy::from_links(links)?;
        let docs = self.documents.iter().map(|d| Document {
            id: d.id.clone(),
            owner: d.id.clone(),
            tokens: d.tokens.clone(),
        });
        Corpus::from_documents(hierarchy, docs)
    }
}

/// Removes leaves whose pooled token count is below `min_tokens`, with their
/// documents; internal nodes left childless are pruned too, except the root.
pub fn filter_short_leaves(corpus: &Corpus, min_tokens: usize) -> Corpus {
    let totals: HashMap<NodeId, usize> = corpus
        .hierarchy
        .leaves()
        .map(|l| (l, corpus.documents_of(l).map(Document::token_count).sum()))
        .collect();
    corpus.retain_leaves(|l| totals[&l] >= min_tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, entity: &str, text: &str) -> DocumentRecord {
        DocumentRecord {
            id: id.into(),
            entity: entity.into(),
            text: text.into(),
        }
    }

    fn small() -> Hierarchy {
        parse_hierarchy("root\ns1\troot\ns2\troot\na\ts1\nb\ts1\nc\ts2\n").unwrap()
    }

    #[test]
    fn ingest_builds_vocabulary() {
        let h = parse_hierarchy("root\na\troot\nb\troot\n").unwrap();
        let c = Corpus::ingest([rec("d1", "a", "x y"), rec("d2", "b", "y Z")], h).unwrap();
        let vocab: Vec<&str> = c.vocabulary().iter().map(String::as_str).collect();
        assert_eq!(vocab, ["x", "y", "z"]);
        assert_eq!(c.token_count(c.hierarchy().root()), 4);
    }

    #[test]
    fn ingest_errors() {
        let err = Corpus::ingest([rec("d1", "s1", "x")], small()).unwrap_err();
        assert!(matches!(err, CorpusError::NotALeaf { .. }));
        let err = Corpus::ingest([rec("d1", "zz", "x")], small()).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownEntity { .. }));
        let err = Corpus::ingest([rec("d1", "a", "x"), rec("d1", "b", "y")], small()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateDocument(ref d) if d == "d1"));
    }

    #[test]
    fn empty_ingest_is_valid() {
        let c = Corpus::ingest(Vec::new(), small()).unwrap();
        assert!(c.vocabulary().is_empty());
        assert!(c.documents().is_empty());
    }

    #[test]
    fn records_parse_from_jsonl() {
        let text = "{\"id\":\"d1\",\"entity\":\"a\",\"text\":\"Hi there\"}\n\n{\"id\":\"d2\",\"entity\":\"b\",\"text\":\"\"}\n";
        let recs = read_document_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].text, "Hi there");
        let err = read_document_records("{\"id\":1}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Record { line: 1, .. }));
    }

    #[test]
    fn filter_removes_short_leaf_and_empty_parent() {
        let long = vec!["w"; 100].join(" ");
        let short = vec!["w"; 99].join(" ");
        let c = Corpus::ingest(
            [
                rec("d1", "a", &long),
                rec("d2", "b", &short),
                rec("d3", "c", &short),
            ],
            small(),
        )
        .unwrap();
        let f = filter_short_leaves(&c, 100);
        let ids: Vec<&str> = f.hierarchy().bfs().map(|n| f.hierarchy().id(n)).collect();
        assert_eq!(ids, ["root", "s1", "a"]);
        assert_eq!(f.documents().len(), 1);
    }

    #[test]
    fn filter_zero_is_identity() {
        let c = Corpus::ingest([rec("d1", "a", "x"), rec("d2", "c", "y y")], small()).unwrap();
        assert_eq!(filter_short_leaves(&c, 0), c);
    }

    #[test]
    fn filter_everything_leaves_root() {
        let c = Corpus::ingest([rec("d1", "a", "x")], small()).unwrap();
        let f = filter_short_leaves(&c, 100);
        assert_eq!(f.hierarchy().len(), 1);
        assert!(f.vocabulary().is_empty());
    }

    #[test]
    fn documents_become_leaves() {
        let c = Corpus::ingest(
            [rec("d1", "a", "x"), rec("d2", "a", "y"), rec("d3", "c", "z")],
            small(),
        )
        .unwrap();
        let d = c.documents_as_leaves().unwrap();
        let h = d.hierarchy();
        assert_eq!(h.len(), 6 + 3);
        let a = h.get("a").unwrap();
        assert_eq!(h.children(a).len(), 2);
        assert!(h.is_leaf(h.get("d2").unwrap()));
        // "b" owns nothing and stays a leaf.
        assert!(h.is_leaf(h.get("b").unwrap()));
        assert_eq!(d.vocabulary(), c.vocabulary());
    }
}
