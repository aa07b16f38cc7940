use std::collections::{HashMap, HashSet, VecDeque};

use serde::Deserialize;
use thiserror::Error;

/// Position of an entity inside a [`Hierarchy`].
///
/// Entities are stored in breadth-first order with children in declaration
/// order, so comparing two ids compares their BFS rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("hierarchy is empty")]
    Empty,
    #[error("malformed hierarchy: {0}")]
    Syntax(String),
    #[error("duplicate entity id `{0}`")]
    DuplicateId(String),
    #[error("multiple roots: `{first}` and `{second}`")]
    MultipleRoots { first: String, second: String },
    #[error("cycle through entity `{0}`")]
    Cycle(String),
    #[error("entity `{child}` names unknown parent `{parent}`")]
    DanglingParent { child: String, parent: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` has no ancestor {distance} edges up (depth {depth})")]
    AncestorOutOfRange {
        entity: String,
        distance: usize,
        depth: usize,
    },
    #[error("entity `{entity}` has no descendants {distance} edges down (height {height})")]
    DescendantOutOfRange {
        entity: String,
        distance: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Distance from the root; the root is layer 0.
    pub depth: usize,
    /// Longest distance down to a leaf; leaves have height 0.
    pub height: usize,
}

impl Entity {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn layer(&self) -> usize {
        self.depth
    }
}

/// Rooted tree of entities. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    entities: Vec<Entity>,
    index: HashMap<String, NodeId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NestedNode {
    id: String,
    #[serde(default)]
    children: Vec<NestedNode>,
}

impl Hierarchy {
    /// Builds a tree from `(child, parent)` links given in declaration order.
    ///
    /// The root is the single entity with no parent. Children keep the order
    /// in which their links appear.
    pub fn from_links<I, S>(links: I) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = (S, Option<S>)>,
        S: Into<String>,
    {
        let links: Vec<(String, Option<String>)> = links
            .into_iter()
            .map(|(c, p)| (c.into(), p.map(Into::into)))
            .collect();
        if links.is_empty() {
            return Err(HierarchyError::Empty);
        }

        let mut declared: HashMap<&str, usize> = HashMap::with_capacity(links.len());
        for (pos, (child, _)) in links.iter().enumerate() {
            if declared.insert(child.as_str(), pos).is_some() {
                return Err(HierarchyError::DuplicateId(child.clone()));
            }
        }

        let mut root: Option<&str> = None;
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for (child, parent) in &links {
            match parent {
                None => {
                    if let Some(first) = root {
                        return Err(HierarchyError::MultipleRoots {
                            first: first.to_string(),
                            second: child.clone(),
                        });
                    }
                    root = Some(child);
                }
                Some(parent) => {
                    if parent == child {
                        return Err(HierarchyError::Cycle(child.clone()));
                    }
                    if !declared.contains_key(parent.as_str()) {
                        return Err(HierarchyError::DanglingParent {
                            child: child.clone(),
                            parent: parent.clone(),
                        });
                    }
                    children.entry(parent.as_str()).or_default().push(child);
                }
            }
        }
        // Every entity has a parent, so following parents must loop.
        let Some(root) = root else {
            return Err(HierarchyError::Cycle(links[0].0.clone()));
        };

        let mut entities: Vec<Entity> = Vec::with_capacity(links.len());
        let mut index: HashMap<String, NodeId> = HashMap::with_capacity(links.len());
        let mut queue: VecDeque<(&str, Option<NodeId>, usize)> = VecDeque::new();
        queue.push_back((root, None, 0));
        while let Some((id, parent, depth)) = queue.pop_front() {
            let node = NodeId(entities.len());
            index.insert(id.to_string(), node);
            entities.push(Entity {
                id: id.to_string(),
                parent,
                children: Vec::new(),
                depth,
                height: 0,
            });
            if let Some(p) = parent {
                entities[p.0].children.push(node);
            }
            for &child in children.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                queue.push_back((child, Some(node), depth + 1));
            }
        }
        if entities.len() != links.len() {
            // Whatever was not reached from the root hangs off a parent cycle.
            let (unreached, _) = links
                .iter()
                .find(|(c, _)| !index.contains_key(c))
                .expect("some entity unreached");
            return Err(HierarchyError::Cycle(unreached.clone()));
        }

        for i in (0..entities.len()).rev() {
            let h = entities[i]
                .children
                .iter()
                .map(|c| entities[c.0].height + 1)
                .max()
                .unwrap_or(0);
            entities[i].height = h;
        }

        Ok(Hierarchy { entities, index })
    }

    /// Parses the nested-object JSON form `{"id": .., "children": [..]}`.
    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let root: NestedNode =
            serde_json::from_str(text).map_err(|e| HierarchyError::Syntax(e.to_string()))?;
        let mut links: Vec<(String, Option<String>)> = Vec::new();
        let mut stack: Vec<(NestedNode, Option<String>)> = vec![(root, None)];
        // Depth-first walk preserving sibling order.
        while let Some((node, parent)) = stack.pop() {
            let NestedNode { id, children } = node;
            links.push((id.clone(), parent));
            for child in children.into_iter().rev() {
                stack.push((child, Some(id.clone())));
            }
        }
        Self::from_links(links)
    }

    /// Parses the TSV edge list form: one `child<TAB>parent` per line.
    ///
    /// The root is declared by a line holding only its id (or an empty parent
    /// column). Blank lines and lines starting with `#` are ignored.
    pub fn from_tsv(text: &str) -> Result<Self, HierarchyError> {
        let mut links = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let child = cols.next().unwrap_or("").trim();
            let parent = cols.next().map(str::trim).filter(|p| !p.is_empty());
            if cols.next().is_some() {
                return Err(HierarchyError::Syntax(format!(
                    "line {}: expected at most two columns",
                    lineno + 1
                )));
            }
            if child.is_empty() {
                return Err(HierarchyError::Syntax(format!(
                    "line {}: empty entity id",
                    lineno + 1
                )));
            }
            links.push((child.to_string(), parent.map(str::to_string)));
        }
        Self::from_links(links)
    }

    /// Serializes back to the nested JSON form.
    pub fn to_json(&self) -> serde_json::Value {
        fn node(h: &Hierarchy, id: NodeId) -> serde_json::Value {
            let e = h.entity(id);
            let mut obj = serde_json::Map::new();
            obj.insert("id".into(), e.id.clone().into());
            if !e.children.is_empty() {
                let kids = e.children.iter().map(|&c| node(h, c)).collect();
                obj.insert("children".into(), serde_json::Value::Array(kids));
            }
            serde_json::Value::Object(obj)
        }
        node(self, self.root())
    }

    /// `(child, parent)` links in BFS order, suitable for [`Hierarchy::from_links`].
    pub fn links(&self) -> Vec<(String, Option<String>)> {
        self.entities
            .iter()
            .map(|e| (e.id.clone(), e.parent.map(|p| self.entities[p.0].id.clone())))
            .collect()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, id: NodeId) -> &Entity {
        &self.entities[id.0]
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn get(&self, id: &str) -> Option<NodeId> {
        self.index.get(id).copied()
    }

    pub fn lookup(&self, id: &str) -> Result<NodeId, HierarchyError> {
        self.get(id)
            .ok_or_else(|| HierarchyError::UnknownEntity(id.to_string()))
    }

    pub fn id(&self, node: NodeId) -> &str {
        &self.entities[node.0].id
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.entities[node.0].depth
    }

    pub fn height(&self, node: NodeId) -> usize {
        self.entities[node.0].height
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.entities[node.0].parent
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.entities[node.0].children
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.entities[node.0].is_leaf()
    }

    /// All entities, top-down breadth first.
    pub fn bfs(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator + '_ {
        (0..self.entities.len()).map(NodeId)
    }

    /// Entities grouped by depth, each group in BFS order.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels: Vec<Vec<NodeId>> = Vec::new();
        for node in self.bfs() {
            let d = self.depth(node);
            if levels.len() <= d {
                levels.resize_with(d + 1, Vec::new);
            }
            levels[d].push(node);
        }
        levels
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.bfs().filter(|&n| self.is_leaf(n))
    }

    /// The ancestor exactly `distance` edges above `node`.
    pub fn ancestor_at(&self, node: NodeId, distance: usize) -> Result<NodeId, HierarchyError> {
        let depth = self.depth(node);
        if distance == 0 || distance > depth {
            return Err(HierarchyError::AncestorOutOfRange {
                entity: self.id(node).to_string(),
                distance,
                depth,
            });
        }
        let mut cur = node;
        for _ in 0..distance {
            cur = self.parent(cur).expect("depth bounds parent chain");
        }
        Ok(cur)
    }

    /// All descendants exactly `distance` edges below `node`, in document order.
    pub fn descendants_at(
        &self,
        node: NodeId,
        distance: usize,
    ) -> Result<Vec<NodeId>, HierarchyError> {
        let height = self.height(node);
        if distance == 0 || distance > height {
            return Err(HierarchyError::DescendantOutOfRange {
                entity: self.id(node).to_string(),
                distance,
                height,
            });
        }
        let mut frontier = vec![node];
        for _ in 0..distance {
            frontier = frontier
                .iter()
                .flat_map(|&n| self.children(n).iter().copied())
                .collect();
        }
        Ok(frontier)
    }

    /// Leaves in the subtree of `node` (the node itself if it is a leaf).
    pub fn leaves_under(&self, node: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let kids = self.children(n);
            if kids.is_empty() {
                out.push(n);
            } else {
                stack.extend(kids.iter().rev());
            }
        }
        out
    }

    /// Whether `ancestor` lies on the path from `node` to the root (inclusive).
    pub fn is_ancestor_or_self(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.parent(n);
        }
        false
    }

    /// Sub-hierarchy keeping only the entities for which `keep` holds.
    ///
    /// Kept entities must have kept parents; the root is always kept.
    pub(crate) fn retain(&self, keep: impl Fn(NodeId) -> bool) -> Self {
        let kept: HashSet<NodeId> = self
            .bfs()
            .filter(|&n| n == self.root() || keep(n))
            .collect();
        let links = self
            .bfs()
            .filter(|n| kept.contains(n))
            .map(|n| {
                let e = self.entity(n);
                (e.id.clone(), e.parent.map(|p| self.id(p).to_string()))
            })
            .collect::<Vec<_>>();
        Self::from_links(links).expect("retained subtree is a valid hierarchy")
    }
}

/// Parses either hierarchy format, choosing JSON when the text starts with `{`.
pub fn parse_hierarchy(text: &str) -> Result<Hierarchy, HierarchyError> {
    if text.trim_start().starts_with('{') {
        Hierarchy::from_json(text)
    } else {
        Hierarchy::from_tsv(text)
    }
}
