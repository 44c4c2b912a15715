//! Tree factorization for expert review.
//!
//! Two rewrites are applied until neither changes the tree:
//!
//! * **hoist**: an element (on a given line) carried by every immediate
//!   child of a node moves into that node;
//! * **merge**: the largest set of branch values whose subtrees are
//!   identical becomes a single `<other>` branch with recorded members.
//!
//! A node whose branches all merged into one `<other>` conveys nothing and
//! is replaced by its child, keeping its hoisted elements. Evaluation
//! accumulates hoisted elements along the path and adds the leaf residual.

use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use crate::dss::{ClassLabel, LabelError, Line, RecommendationElement, RecommendationSet};
use crate::kb::KnowledgeBase;
use crate::learner::{
    attributes_from_json, attributes_json, node_path, Attribute, DecisionTree, Node,
    TreeFormatError,
};

pub const OTHER: &str = "<other>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueGroup {
    Value(u16),
    /// Recorded members, in domain order.
    Other(Vec<u16>),
}

impl ValueGroup {
    pub fn contains(&self, v: u16) -> bool {
        match self {
            ValueGroup::Value(x) => *x == v,
            ValueGroup::Other(xs) => xs.contains(&v),
        }
    }

    fn first(&self) -> u16 {
        match self {
            ValueGroup::Value(x) => *x,
            ValueGroup::Other(xs) => xs[0],
        }
    }

    pub fn is_other(&self) -> bool {
        matches!(self, ValueGroup::Other(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub group: ValueGroup,
    pub node: FactoredNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactoredKind {
    Internal {
        attribute: usize,
        branches: Vec<Branch>,
    },
    Leaf {
        residual: RecommendationSet,
        support: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredNode {
    pub hoisted: RecommendationSet,
    pub kind: FactoredKind,
}

impl FactoredNode {
    pub fn node_count(&self) -> usize {
        match &self.kind {
            FactoredKind::Leaf { .. } => 1,
            FactoredKind::Internal { branches, .. } => {
                1 + branches.iter().map(|b| b.node.node_count()).sum::<usize>()
            }
        }
    }

    /// Structural identity ignoring leaf supports.
    pub fn same_shape(&self, other: &FactoredNode) -> bool {
        if self.hoisted != other.hoisted {
            return false;
        }
        match (&self.kind, &other.kind) {
            (FactoredKind::Leaf { residual: a, .. }, FactoredKind::Leaf { residual: b, .. }) => {
                a == b
            }
            (
                FactoredKind::Internal {
                    attribute: a,
                    branches: ba,
                },
                FactoredKind::Internal {
                    attribute: b,
                    branches: bb,
                },
            ) => {
                a == b
                    && ba.len() == bb.len()
                    && ba
                        .iter()
                        .zip(bb)
                        .all(|(x, y)| x.group == y.group && x.node.same_shape(&y.node))
            }
            _ => false,
        }
    }

    /// Adds the supports of a same-shaped node into this one.
    fn absorb_support(&mut self, other: &FactoredNode) {
        match (&mut self.kind, &other.kind) {
            (FactoredKind::Leaf { support, .. }, FactoredKind::Leaf { support: s, .. }) => {
                *support += s
            }
            (
                FactoredKind::Internal { branches, .. },
                FactoredKind::Internal { branches: bs, .. },
            ) => {
                for (b, o) in branches.iter_mut().zip(bs) {
                    b.node.absorb_support(&o.node);
                }
            }
            _ => unreachable!("supports are only merged between same-shaped nodes"),
        }
    }

    /// Elements a node offers to its parent for hoisting: its hoisted set,
    /// plus its residual when it is a leaf.
    fn carried(&self, line: Line) -> BTreeSet<RecommendationElement> {
        let mut out = self.hoisted.line(line).clone();
        if let FactoredKind::Leaf { residual, .. } = &self.kind {
            out.extend(residual.line(line).iter().cloned());
        }
        out
    }

    fn remove(&mut self, line: Line, e: &RecommendationElement) {
        self.hoisted.line_mut(line).remove(e);
        if let FactoredKind::Leaf { residual, .. } = &mut self.kind {
            residual.line_mut(line).remove(e);
        }
    }

    fn hoist(&mut self) -> bool {
        let FactoredKind::Internal { branches, .. } = &mut self.kind else {
            return false;
        };
        let mut changed = false;
        for b in branches.iter_mut() {
            changed |= b.node.hoist();
        }
        for line in [Line::First, Line::Second] {
            let mut common = branches[0].node.carried(line);
            for b in &branches[1..] {
                let c = b.node.carried(line);
                common.retain(|e| c.contains(e));
            }
            for e in common {
                for b in branches.iter_mut() {
                    b.node.remove(line, &e);
                }
                self.hoisted.line_mut(line).insert(e);
                changed = true;
            }
        }
        changed
    }

    fn merge(&mut self) -> bool {
        let FactoredKind::Internal { branches, .. } = &mut self.kind else {
            return false;
        };
        let mut changed = false;
        for b in branches.iter_mut() {
            changed |= b.node.merge();
        }
        changed |= merge_branches(branches);
        changed
    }

    /// Replaces nodes left with a single branch by that branch's subtree.
    fn collapse(&mut self) -> bool {
        let mut changed = false;
        if let FactoredKind::Internal { branches, .. } = &mut self.kind {
            for b in branches.iter_mut() {
                changed |= b.node.collapse();
            }
            if branches.len() == 1 {
                let child = branches.pop().expect("one branch").node;
                let mut hoisted = std::mem::take(&mut self.hoisted);
                hoisted.extend(&child.hoisted);
                let kind = match child.kind {
                    // Leaves keep everything in the residual so that equal
                    // leaves stay structurally equal.
                    FactoredKind::Leaf {
                        mut residual,
                        support,
                    } => {
                        residual.extend(&hoisted);
                        hoisted = RecommendationSet::default();
                        FactoredKind::Leaf { residual, support }
                    }
                    kind => kind,
                };
                *self = FactoredNode { hoisted, kind };
                changed = true;
            }
        }
        changed
    }
}

/// Rule 2 at a single node. Returns whether the branch list changed.
fn merge_branches(branches: &mut Vec<Branch>) -> bool {
    if let Some(o) = branches.iter().position(|b| b.group.is_other()) {
        // An existing `<other>` only absorbs branches identical to it.
        let absorbed: Vec<usize> = (0..branches.len())
            .filter(|&i| i != o && branches[i].node.same_shape(&branches[o].node))
            .collect();
        if absorbed.is_empty() {
            return false;
        }
        let mut other = branches.remove(o);
        let mut members = match other.group {
            ValueGroup::Other(m) => m,
            ValueGroup::Value(_) => unreachable!(),
        };
        let mut kept = Vec::new();
        for (i, b) in std::mem::take(branches).into_iter().enumerate() {
            let i = if i >= o { i + 1 } else { i };
            if absorbed.contains(&i) {
                other.node.absorb_support(&b.node);
                if let ValueGroup::Value(v) = b.group {
                    members.push(v);
                }
            } else {
                kept.push(b);
            }
        }
        members.sort_unstable();
        other.group = ValueGroup::Other(members);
        kept.push(other);
        *branches = kept;
        return true;
    }

    // Classes of identical subtrees, in order of their earliest value.
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..branches.len() {
        match classes
            .iter_mut()
            .find(|c| branches[c[0]].node.same_shape(&branches[i].node))
        {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    let mut best: Option<&Vec<usize>> = None;
    for c in &classes {
        let earliest = |c: &Vec<usize>| c.iter().map(|&i| branches[i].group.first()).min();
        let better = match best {
            None => true,
            Some(b) => c.len() > b.len() || (c.len() == b.len() && earliest(c) < earliest(b)),
        };
        if better {
            best = Some(c);
        }
    }
    let Some(group) = best.filter(|c| c.len() >= 2).cloned() else {
        return false;
    };
    let mut members = Vec::new();
    let mut merged: Option<FactoredNode> = None;
    let mut kept = Vec::new();
    for (i, b) in std::mem::take(branches).into_iter().enumerate() {
        if group.contains(&i) {
            if let ValueGroup::Value(v) = b.group {
                members.push(v);
            }
            match &mut merged {
                None => merged = Some(b.node),
                Some(m) => m.absorb_support(&b.node),
            }
        } else {
            kept.push(b);
        }
    }
    members.sort_unstable();
    kept.push(Branch {
        group: ValueGroup::Other(members),
        node: merged.expect("group is non-empty"),
    });
    *branches = kept;
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredTree {
    pub attributes: Vec<Attribute>,
    pub training_rows: usize,
    /// Node count of the tree this one was derived from.
    pub source_node_count: usize,
    pub root: FactoredNode,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no branch for {attribute}={value} at node {node}")]
    UnseenValue {
        node: String,
        attribute: String,
        value: String,
    },
    #[error("assignment has {found} values, expected {expected}")]
    Width { expected: usize, found: usize },
}

impl FactoredTree {
    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Rule 1 applied bottom-up. Returns the rewritten tree.
    pub fn hoist_common(mut self) -> Self {
        self.root.hoist();
        self
    }

    /// Rule 2 applied at every node.
    pub fn merge_values(mut self) -> Self {
        self.root.merge();
        self
    }

    /// Alternates both rules (with collapse) until nothing changes.
    pub fn fixpoint(mut self) -> Self {
        loop {
            let mut changed = self.root.hoist();
            changed |= self.root.merge();
            changed |= self.root.collapse();
            if !changed {
                return self;
            }
        }
    }

    pub fn evaluate(&self, values: &[u16]) -> Result<RecommendationSet, EvalError> {
        if values.len() != self.attributes.len() {
            return Err(EvalError::Width {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        let mut acc = RecommendationSet::default();
        let mut node = &self.root;
        let mut path = Vec::new();
        loop {
            acc.extend(&node.hoisted);
            match &node.kind {
                FactoredKind::Leaf { residual, .. } => {
                    acc.extend(residual);
                    return Ok(acc);
                }
                FactoredKind::Internal {
                    attribute,
                    branches,
                } => {
                    let attr = &self.attributes[*attribute];
                    let v = values[*attribute];
                    let value = attr
                        .values
                        .get(v as usize)
                        .cloned()
                        .unwrap_or_else(|| v.to_string());
                    // Explicit values take precedence over `<other>`.
                    let branch = branches
                        .iter()
                        .find(|b| b.group == ValueGroup::Value(v))
                        .or_else(|| branches.iter().find(|b| b.group.contains(v)));
                    match branch {
                        Some(b) => {
                            path.push(format!("{}={}", attr.name, value));
                            node = &b.node;
                        }
                        None => {
                            return Err(EvalError::UnseenValue {
                                node: node_path(&path),
                                attribute: attr.name.clone(),
                                value,
                            })
                        }
                    }
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "attributes": attributes_json(&self.attributes),
            "training_rows": self.training_rows,
            "source_node_count": self.source_node_count,
            "node_count": self.node_count(),
            "root": node_json(&self.attributes, &self.root),
        })
    }

    pub fn from_json(doc: &Value) -> Result<FactoredTree, TreeFormatError> {
        let attributes = attributes_from_json(doc)?;
        let number = |key: &str| {
            doc[key]
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| TreeFormatError::new(format!("`{key}` missing")))
        };
        let training_rows = number("training_rows")?;
        let source_node_count = number("source_node_count")?;
        let root = node_from_json(&attributes, &doc["root"])?;
        Ok(FactoredTree {
            attributes,
            training_rows,
            source_node_count,
            root,
        })
    }
}

fn set_json(set: &RecommendationSet) -> Value {
    let line = |s: &BTreeSet<RecommendationElement>| -> Value {
        s.iter().map(|e| Value::String(e.to_string())).collect()
    };
    json!({"first": line(&set.first_line), "second": line(&set.second_line)})
}

fn set_from_json(v: &Value) -> Result<RecommendationSet, TreeFormatError> {
    let line = |key: &str| -> Result<BTreeSet<RecommendationElement>, TreeFormatError> {
        v[key]
            .as_array()
            .ok_or_else(|| TreeFormatError::new(format!("line `{key}` missing")))?
            .iter()
            .map(|e| {
                e.as_str()
                    .ok_or_else(|| TreeFormatError::new("element is not a string"))?
                    .parse()
                    .map_err(|e: LabelError| TreeFormatError::new(e.to_string()))
            })
            .collect()
    };
    Ok(RecommendationSet {
        first_line: line("first")?,
        second_line: line("second")?,
    })
}

fn node_json(attrs: &[Attribute], n: &FactoredNode) -> Value {
    let mut map = Map::new();
    if !n.hoisted.is_empty() {
        map.insert("hoisted".into(), set_json(&n.hoisted));
    }
    match &n.kind {
        FactoredKind::Leaf { residual, support } => {
            map.insert("residual".into(), set_json(residual));
            map.insert("support".into(), json!(support));
        }
        FactoredKind::Internal {
            attribute,
            branches,
        } => {
            let attr = &attrs[*attribute];
            map.insert("split".into(), json!(attr.name));
            let mut out = Map::new();
            for b in branches {
                match &b.group {
                    ValueGroup::Value(v) => {
                        out.insert(attr.values[*v as usize].clone(), node_json(attrs, &b.node));
                    }
                    ValueGroup::Other(members) => {
                        map.insert(
                            "other".into(),
                            members
                                .iter()
                                .map(|&v| Value::String(attr.values[v as usize].clone()))
                                .collect(),
                        );
                        out.insert(OTHER.into(), node_json(attrs, &b.node));
                    }
                }
            }
            map.insert("branches".into(), Value::Object(out));
        }
    }
    Value::Object(map)
}

fn node_from_json(attrs: &[Attribute], v: &Value) -> Result<FactoredNode, TreeFormatError> {
    let hoisted = match v.get("hoisted") {
        Some(h) => set_from_json(h)?,
        None => RecommendationSet::default(),
    };
    if let Some(residual) = v.get("residual") {
        let support = v["support"]
            .as_u64()
            .ok_or_else(|| TreeFormatError::new("leaf without `support`"))?;
        return Ok(FactoredNode {
            hoisted,
            kind: FactoredKind::Leaf {
                residual: set_from_json(residual)?,
                support: support as usize,
            },
        });
    }
    let name = v["split"]
        .as_str()
        .ok_or_else(|| TreeFormatError::new("node is neither a leaf nor a split"))?;
    let attribute = attrs
        .iter()
        .position(|a| a.name == name)
        .ok_or_else(|| TreeFormatError::new(format!("unknown attribute `{name}`")))?;
    let attr = &attrs[attribute];
    let index = |value: &str| {
        attr.value_index(value)
            .ok_or_else(|| TreeFormatError::new(format!("`{value}` is not a value of `{name}`")))
    };
    let map = v["branches"]
        .as_object()
        .ok_or_else(|| TreeFormatError::new("split without `branches`"))?;
    let mut branches = Vec::with_capacity(map.len());
    let mut other = None;
    for (key, child) in map {
        let node = node_from_json(attrs, child)?;
        if key == OTHER && v.get("other").is_some() {
            let members = v["other"]
                .as_array()
                .ok_or_else(|| TreeFormatError::new("`other` is not a list"))?
                .iter()
                .map(|m| {
                    m.as_str()
                        .ok_or_else(|| TreeFormatError::new("non-string `other` member"))
                        .and_then(index)
                })
                .collect::<Result<Vec<u16>, _>>()?;
            other = Some(Branch {
                group: ValueGroup::Other(members),
                node,
            });
        } else {
            branches.push(Branch {
                group: ValueGroup::Value(index(key)?),
                node,
            });
        }
    }
    branches.sort_by_key(|b| b.group.first());
    branches.extend(other);
    Ok(FactoredNode {
        hoisted,
        kind: FactoredKind::Internal {
            attribute,
            branches,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FactorError {
    #[error("leaf at {node}: {source}")]
    Label {
        node: String,
        #[source]
        source: LabelError,
    },
}

/// 1:1 conversion of a learned tree, decoding every leaf label.
pub fn lift(tree: &DecisionTree, kb: Option<&KnowledgeBase>) -> Result<FactoredTree, FactorError> {
    fn go(
        t: &DecisionTree,
        kb: Option<&KnowledgeBase>,
        n: &Node,
        path: &mut Vec<String>,
    ) -> Result<FactoredNode, FactorError> {
        match n {
            Node::Leaf { label, support } => {
                let residual = decode(label, kb).map_err(|source| FactorError::Label {
                    node: node_path(path),
                    source,
                })?;
                Ok(FactoredNode {
                    hoisted: RecommendationSet::default(),
                    kind: FactoredKind::Leaf {
                        residual,
                        support: *support,
                    },
                })
            }
            Node::Split {
                attribute,
                branches,
            } => {
                let attr = &t.attributes[*attribute];
                let mut out = Vec::with_capacity(branches.len());
                for (v, child) in branches {
                    path.push(format!("{}={}", attr.name, attr.values[*v as usize]));
                    out.push(Branch {
                        group: ValueGroup::Value(*v),
                        node: go(t, kb, child, path)?,
                    });
                    path.pop();
                }
                Ok(FactoredNode {
                    hoisted: RecommendationSet::default(),
                    kind: FactoredKind::Internal {
                        attribute: *attribute,
                        branches: out,
                    },
                })
            }
        }
    }
    Ok(FactoredTree {
        attributes: tree.attributes.clone(),
        training_rows: tree.training_rows,
        source_node_count: tree.node_count(),
        root: go(tree, kb, &tree.root, &mut Vec::new())?,
    })
}

fn decode(label: &ClassLabel, kb: Option<&KnowledgeBase>) -> Result<RecommendationSet, LabelError> {
    match kb {
        Some(kb) => label.decode_for(kb),
        None => label.decode(),
    }
}

/// Lift, then both rules to a joint fixpoint. With a KB, leaf labels must
/// also name catalog treatments.
pub fn factorize(
    tree: &DecisionTree,
    kb: Option<&KnowledgeBase>,
) -> Result<FactoredTree, FactorError> {
    Ok(lift(tree, kb)?.fixpoint())
}

pub fn evaluate_factored(
    tree: &FactoredTree,
    values: &[u16],
) -> Result<RecommendationSet, EvalError> {
    tree.evaluate(values)
}
