use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Length of the edge to the parent. Zero for the root unless the
    /// Newick string gave the root an explicit length.
    pub branch_length: f64,
    pub label: Option<String>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted tree with branch lengths. Nodes are stored in preorder, so the
/// root is always node 0 and every parent precedes its children.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    leaf_index: HashMap<String, NodeId>,
}

impl PhyloTree {
    /// Builds a tree from preorder nodes, checking the structural
    /// invariants: single root at index 0, parent links consistent,
    /// non-negative finite lengths, unique labelled leaves.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidData("tree has no nodes".into()));
        }
        if nodes[0].parent.is_some() {
            return Err(Error::InvalidData("node 0 must be the root".into()));
        }
        let mut leaf_index = HashMap::new();
        for (id, node) in nodes.iter().enumerate() {
            if id > 0 {
                match node.parent {
                    Some(p) if p < id && nodes[p].children.contains(&id) => {}
                    _ => {
                        return Err(Error::InvalidData(format!(
                            "node {id} has an inconsistent parent link"
                        )))
                    }
                }
            }
            if !(node.branch_length >= 0.0 && node.branch_length.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "node {id} has invalid branch length {}",
                    node.branch_length
                )));
            }
            for &c in &node.children {
                if c >= nodes.len() || nodes[c].parent != Some(id) {
                    return Err(Error::InvalidData(format!(
                        "child link {id} -> {c} is inconsistent"
                    )));
                }
            }
            if node.is_leaf() {
                let label = node
                    .label
                    .clone()
                    .filter(|l| !l.is_empty())
                    .ok_or_else(|| Error::InvalidData(format!("leaf node {id} has no label")))?;
                if leaf_index.insert(label.clone(), id).is_some() {
                    return Err(Error::DuplicateId(label));
                }
            }
        }
        Ok(PhyloTree { nodes, leaf_index })
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf ids in preorder.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    pub fn leaf_labels(&self) -> Vec<&str> {
        self.leaves()
            .map(|i| self.nodes[i].label.as_deref().unwrap_or(""))
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn leaf(&self, label: &str) -> Option<NodeId> {
        self.leaf_index.get(label).copied()
    }

    /// Sum of branch lengths from each node up to (excluding) the root edge.
    pub fn node_depths(&self) -> Vec<f64> {
        let mut depth = vec![0.0; self.nodes.len()];
        for id in 1..self.nodes.len() {
            let p = self.nodes[id].parent.expect("non-root node has a parent");
            depth[id] = depth[p] + self.nodes[id].branch_length;
        }
        depth
    }

    /// Root-to-leaf path length for each requested leaf label.
    pub fn root_path_lengths(&self, labels: &[String]) -> Result<Vec<f64>> {
        let depth = self.node_depths();
        labels
            .iter()
            .map(|l| {
                self.leaf(l).map(|id| depth[id]).ok_or_else(|| Error::MissingId {
                    id: l.clone(),
                    component: "tree",
                })
            })
            .collect()
    }

    /// Serializes to Newick. Branch lengths use the shortest decimal form that
    /// round-trips, so `parse_newick(t.to_newick())` reproduces `t` exactly.
    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out);
        if self.nodes[0].branch_length != 0.0 {
            let _ = write!(out, ":{}", self.nodes[0].branch_length);
        }
        out.push(';');
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id];
        if !node.children.is_empty() {
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write_node(c, out);
                let _ = write!(out, ":{}", self.nodes[c].branch_length);
            }
            out.push(')');
        }
        if let Some(label) = &node.label {
            out.push_str(&quote_label(label));
        }
    }
}

fn quote_label(label: &str) -> String {
    let needs_quotes = label
        .chars()
        .any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if needs_quotes {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
    missing_lengths: usize,
}

impl<'a> Parser<'a> {
    fn line(&self) -> usize {
        1 + self.text[..self.pos.min(self.text.len())]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse("Newick", self.line(), msg)
    }

    fn skip_ignorable(&mut self) -> Result<()> {
        loop {
            match self.text.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.pos;
                    match self.text[self.pos..].iter().position(|&b| b == b']') {
                        Some(off) => self.pos += off + 1,
                        None => {
                            self.pos = start;
                            return Err(self.err("unterminated [comment]"));
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn peek(&mut self) -> Result<Option<u8>> {
        self.skip_ignorable()?;
        Ok(self.text.get(self.pos).copied())
    }

    fn add_node(&mut self, parent: Option<NodeId>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent,
            children: Vec::new(),
            branch_length: 0.0,
            label: None,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn subtree(&mut self, parent: Option<NodeId>) -> Result<NodeId> {
        let id = self.add_node(parent);
        if self.peek()? == Some(b'(') {
            self.pos += 1;
            loop {
                self.subtree(Some(id))?;
                match self.peek()? {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        return Err(self.err(format!("unexpected {:?} inside parentheses", c as char)))
                    }
                    None => return Err(self.err("unbalanced parentheses: missing ')'")),
                }
            }
        }
        let label = self.label()?;
        if !label.is_empty() {
            self.nodes[id].label = Some(label);
        }
        if self.peek()? == Some(b':') {
            self.pos += 1;
            self.nodes[id].branch_length = self.number()?;
        } else if parent.is_some() {
            self.missing_lengths += 1;
        }
        Ok(id)
    }

    fn label(&mut self) -> Result<String> {
        match self.peek()? {
            Some(b'\'') => {
                self.pos += 1;
                let mut bytes = Vec::new();
                loop {
                    match self.text.get(self.pos) {
                        Some(b'\'') if self.text.get(self.pos + 1) == Some(&b'\'') => {
                            bytes.push(b'\'');
                            self.pos += 2;
                        }
                        Some(b'\'') => {
                            self.pos += 1;
                            break;
                        }
                        Some(&b) => {
                            bytes.push(b);
                            self.pos += 1;
                        }
                        None => return Err(self.err("unterminated quoted label")),
                    }
                }
                String::from_utf8(bytes).map_err(|_| self.err("label is not valid UTF-8"))
            }
            _ => {
                let start = self.pos;
                while let Some(&b) = self.text.get(self.pos) {
                    if b"():;,[".contains(&b) || b.is_ascii_whitespace() {
                        break;
                    }
                    self.pos += 1;
                }
                std::str::from_utf8(&self.text[start..self.pos])
                    .map(str::to_string)
                    .map_err(|_| self.err("label is not valid UTF-8"))
            }
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ignorable()?;
        let start = self.pos;
        while let Some(&b) = self.text.get(self.pos) {
            if b.is_ascii_digit() || b"+-.eE".contains(&b) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let raw = std::str::from_utf8(&self.text[start..self.pos]).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| self.err(format!("invalid branch length {raw:?}")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(self.err(format!("branch length must be non-negative, got {raw}")));
        }
        Ok(value)
    }
}

/// Parses a single Newick tree terminated by `;`.
///
/// Internal node labels are kept, `[comments]` are stripped, and missing
/// branch lengths default to zero (logged as a warning).
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
        missing_lengths: 0,
    };
    if parser.peek()?.is_none() {
        return Err(Error::parse("Newick", 1, "empty input"));
    }
    parser.subtree(None)?;
    match parser.peek()? {
        Some(b';') => parser.pos += 1,
        Some(b')') => return Err(parser.err("unbalanced parentheses: unexpected ')'")),
        Some(c) => return Err(parser.err(format!("unexpected {:?} after tree", c as char))),
        None => return Err(parser.err("missing terminating ';'")),
    }
    if parser.peek()?.is_some() {
        return Err(parser.err("trailing content after ';'"));
    }
    if parser.missing_lengths > 0 {
        log::warn!(
            "{} branch length(s) missing from Newick input; defaulting to 0",
            parser.missing_lengths
        );
    }
    PhyloTree::from_nodes(parser.nodes).map_err(|e| match e {
        Error::InvalidData(msg) => Error::parse("Newick", 1, msg),
        other => other,
    })
}
