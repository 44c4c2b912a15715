//! Categorical C4.5 induction without pruning.

use std::collections::HashMap;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::dss::{ClassLabel, InputVector};
use crate::kb::KnowledgeBase;

/// Information gains at or below this are treated as zero. Absorbs
/// floating-point residue when a split leaves every class proportion
/// unchanged.
pub const GAIN_EPSILON: f64 = 1e-10;

/// Minimum rows at a node before candidate attributes are scored in
/// parallel.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, values: &[&str]) -> Self {
        Attribute {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn value_index(&self, value: &str) -> Option<u16> {
        self.values
            .iter()
            .position(|v| v == value)
            .map(|i| i as u16)
    }
}

/// Attributes for a KB's variables; conditional variables carry NA as an
/// ordinary last value.
pub fn kb_attributes(kb: &KnowledgeBase) -> Vec<Attribute> {
    kb.variables
        .iter()
        .map(|v| Attribute {
            name: v.name.clone(),
            values: v.encoded_values(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("empty class distribution")]
    EmptyDistribution,
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("row has {found} values, expected {expected}")]
    RowWidth { expected: usize, found: usize },
    #[error("value `{value}` is outside the domain of `{attribute}`")]
    UnknownValue { attribute: String, value: String },
    #[error("rows {first} and {second} share [{vector}] but are labeled `{first_label}` and `{second_label}`")]
    NonFunctional {
        first: usize,
        second: usize,
        vector: String,
        first_label: String,
        second_label: String,
    },
}

/// Entropy in bits of a class distribution; zero counts are skipped.
pub fn entropy(counts: &[usize]) -> Result<f64, LearnError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(LearnError::EmptyDistribution);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

/// Class counts per represented attribute value (rows of `table`).
#[derive(Debug, Clone)]
struct Contingency {
    table: Vec<Vec<usize>>,
    total: usize,
}

impl Contingency {
    fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut out = vec![0; classes];
        for row in &self.table {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    fn represented(&self) -> usize {
        self.table
            .iter()
            .filter(|r| r.iter().any(|&c| c > 0))
            .count()
    }

    fn info_gain(&self, classes: usize) -> f64 {
        let n = self.total as f64;
        let before = entropy(&self.class_counts(classes)).unwrap_or(0.0);
        let after: f64 = self
            .table
            .iter()
            .filter_map(|row| {
                let size: usize = row.iter().sum();
                (size > 0).then(|| size as f64 / n * entropy(row).unwrap_or(0.0))
            })
            .sum();
        before - after
    }

    fn split_info(&self) -> f64 {
        let sizes: Vec<usize> = self.table.iter().map(|r| r.iter().sum()).collect();
        entropy(&sizes).unwrap_or(0.0)
    }

    fn gain_ratio(&self, classes: usize) -> f64 {
        if self.represented() < 2 {
            return 0.0;
        }
        self.info_gain(classes) / self.split_info()
    }
}

/// A labeled table over categorical attributes. Values are stored as
/// indices into each attribute's domain; labels are interned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<Attribute>,
    rows: Vec<Vec<u16>>,
    labels: Vec<u32>,
    classes: Vec<ClassLabel>,
    class_index: HashMap<ClassLabel, u32>,
}

impl Dataset {
    pub fn new(attributes: Vec<Attribute>) -> Self {
        Dataset {
            attributes,
            rows: Vec::new(),
            labels: Vec::new(),
            classes: Vec::new(),
            class_index: HashMap::new(),
        }
    }

    pub fn from_kb(
        kb: &KnowledgeBase,
        rows: impl IntoIterator<Item = (InputVector, ClassLabel)>,
    ) -> Result<Self, LearnError> {
        let mut ds = Dataset::new(kb_attributes(kb));
        for (v, label) in rows {
            ds.push(v.values, label)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, values: Vec<u16>, label: ClassLabel) -> Result<(), LearnError> {
        if values.len() != self.attributes.len() {
            return Err(LearnError::RowWidth {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        for (a, &v) in self.attributes.iter().zip(&values) {
            if v as usize >= a.values.len() {
                return Err(LearnError::UnknownValue {
                    attribute: a.name.clone(),
                    value: v.to_string(),
                });
            }
        }
        let next = self.classes.len() as u32;
        let class = *self.class_index.entry(label.clone()).or_insert_with(|| {
            self.classes.push(label);
            next
        });
        self.rows.push(values);
        self.labels.push(class);
        Ok(())
    }

    /// Appends a row given by value names.
    pub fn push_named(&mut self, values: &[&str], label: &str) -> Result<(), LearnError> {
        if values.len() != self.attributes.len() {
            return Err(LearnError::RowWidth {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        let encoded = self
            .attributes
            .iter()
            .zip(values)
            .map(|(a, v)| {
                a.value_index(v).ok_or_else(|| LearnError::UnknownValue {
                    attribute: a.name.clone(),
                    value: v.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.push(encoded, ClassLabel::from_text(label))
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> (&[u16], &ClassLabel) {
        (&self.rows[i], &self.classes[self.labels[i] as usize])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[u16], &ClassLabel)> {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize, LearnError> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| LearnError::UnknownAttribute(name.to_string()))
    }

    fn contingency(&self, subset: &[usize], attr: usize) -> Contingency {
        let mut table = vec![vec![0usize; self.classes.len()]; self.attributes[attr].values.len()];
        for &i in subset {
            table[self.rows[i][attr] as usize][self.labels[i] as usize] += 1;
        }
        Contingency {
            table,
            total: subset.len(),
        }
    }

    fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    fn class_counts(&self, subset: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &i in subset {
            counts[self.labels[i] as usize] += 1;
        }
        counts
    }

    pub fn entropy(&self) -> Result<f64, LearnError> {
        entropy(&self.class_counts(&self.all()))
    }

    pub fn info_gain(&self, attribute: &str) -> Result<f64, LearnError> {
        let a = self.attribute_index(attribute)?;
        self.nonempty()?;
        Ok(self
            .contingency(&self.all(), a)
            .info_gain(self.classes.len()))
    }

    pub fn split_info(&self, attribute: &str) -> Result<f64, LearnError> {
        let a = self.attribute_index(attribute)?;
        self.nonempty()?;
        Ok(self.contingency(&self.all(), a).split_info())
    }

    /// Zero by convention when only one value of the attribute occurs.
    pub fn gain_ratio(&self, attribute: &str) -> Result<f64, LearnError> {
        let a = self.attribute_index(attribute)?;
        self.nonempty()?;
        Ok(self
            .contingency(&self.all(), a)
            .gain_ratio(self.classes.len()))
    }

    fn nonempty(&self) -> Result<(), LearnError> {
        if self.is_empty() {
            Err(LearnError::EmptyDataset)
        } else {
            Ok(())
        }
    }

    fn describe(&self, values: &[u16]) -> String {
        self.attributes
            .iter()
            .zip(values)
            .map(|(a, &v)| format!("{}={}", a.name, a.values[v as usize]))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// First pair of rows with equal vectors and different labels.
    pub fn check_functional(&self) -> Result<(), LearnError> {
        let mut seen: HashMap<&[u16], usize> = HashMap::with_capacity(self.len());
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(&j) = seen.get(row.as_slice()) {
                if self.labels[j] != self.labels[i] {
                    return Err(LearnError::NonFunctional {
                        first: j,
                        second: i,
                        vector: self.describe(row),
                        first_label: self.classes[self.labels[j] as usize].to_string(),
                        second_label: self.classes[self.labels[i] as usize].to_string(),
                    });
                }
            } else {
                seen.insert(row, i);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Leaf {
        label: ClassLabel,
        support: usize,
    },
    /// Branches appear in attribute-domain order.
    Split {
        attribute: usize,
        branches: Vec<(u16, Node)>,
    },
}

impl Node {
    pub fn node_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { branches, .. } => {
                1 + branches.iter().map(|(_, n)| n.node_count()).sum::<usize>()
            }
        }
    }

    pub fn leaves(&self) -> Vec<(&ClassLabel, usize)> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a Node, out: &mut Vec<(&'a ClassLabel, usize)>) {
            match n {
                Node::Leaf { label, support } => out.push((label, *support)),
                Node::Split { branches, .. } => branches.iter().for_each(|(_, c)| walk(c, out)),
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    pub attributes: Vec<Attribute>,
    pub training_rows: usize,
    pub root: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("no branch for {attribute}={value} at node {node}")]
    UnseenValue {
        node: String,
        attribute: String,
        value: String,
    },
    #[error("assignment has {found} values, expected {expected}")]
    Width { expected: usize, found: usize },
}

impl DecisionTree {
    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn classify(&self, values: &[u16]) -> Result<&ClassLabel, ClassifyError> {
        if values.len() != self.attributes.len() {
            return Err(ClassifyError::Width {
                expected: self.attributes.len(),
                found: values.len(),
            });
        }
        let mut node = &self.root;
        let mut path = Vec::new();
        loop {
            match node {
                Node::Leaf { label, .. } => return Ok(label),
                Node::Split {
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
                    match branches.iter().find(|(b, _)| *b == v) {
                        Some((_, child)) => {
                            path.push(format!("{}={}", attr.name, value));
                            node = child;
                        }
                        None => {
                            return Err(ClassifyError::UnseenValue {
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
        fn node(t: &DecisionTree, n: &Node) -> Value {
            match n {
                Node::Leaf { label, support } => {
                    json!({"label": label.as_str(), "support": support})
                }
                Node::Split {
                    attribute,
                    branches,
                } => {
                    let attr = &t.attributes[*attribute];
                    let mut map = Map::new();
                    for (v, child) in branches {
                        map.insert(attr.values[*v as usize].clone(), node(t, child));
                    }
                    json!({"split": attr.name, "branches": map})
                }
            }
        }
        json!({
            "attributes": attributes_json(&self.attributes),
            "training_rows": self.training_rows,
            "node_count": self.node_count(),
            "root": node(self, &self.root),
        })
    }

    pub fn from_json(doc: &Value) -> Result<DecisionTree, TreeFormatError> {
        let attributes = attributes_from_json(doc)?;
        let training_rows = doc["training_rows"]
            .as_u64()
            .ok_or_else(|| TreeFormatError::new("`training_rows` missing"))?
            as usize;
        fn node(attrs: &[Attribute], v: &Value) -> Result<Node, TreeFormatError> {
            if let Some(label) = v.get("label") {
                let label = label
                    .as_str()
                    .ok_or_else(|| TreeFormatError::new("`label` is not a string"))?;
                let support = v["support"]
                    .as_u64()
                    .ok_or_else(|| TreeFormatError::new("leaf without `support`"))?;
                return Ok(Node::Leaf {
                    label: ClassLabel::from_text(label),
                    support: support as usize,
                });
            }
            let name = v["split"]
                .as_str()
                .ok_or_else(|| TreeFormatError::new("node is neither a leaf nor a split"))?;
            let attribute = attrs
                .iter()
                .position(|a| a.name == name)
                .ok_or_else(|| TreeFormatError::new(format!("unknown attribute `{name}`")))?;
            let map = v["branches"]
                .as_object()
                .ok_or_else(|| TreeFormatError::new("split without `branches`"))?;
            let mut branches = Vec::with_capacity(map.len());
            for (value, child) in map {
                let idx = attrs[attribute].value_index(value).ok_or_else(|| {
                    TreeFormatError::new(format!("`{value}` is not a value of `{name}`"))
                })?;
                branches.push((idx, node(attrs, child)?));
            }
            branches.sort_by_key(|(v, _)| *v);
            Ok(Node::Split {
                attribute,
                branches,
            })
        }
        let root = node(&attributes, &doc["root"])?;
        Ok(DecisionTree {
            attributes,
            training_rows,
            root,
        })
    }
}

pub(crate) fn node_path(path: &[String]) -> String {
    if path.is_empty() {
        "<root>".to_string()
    } else {
        path.join(" / ")
    }
}

pub(crate) fn attributes_json(attrs: &[Attribute]) -> Value {
    Value::Array(
        attrs
            .iter()
            .map(|a| json!({"name": a.name, "values": a.values}))
            .collect(),
    )
}

pub(crate) fn attributes_from_json(doc: &Value) -> Result<Vec<Attribute>, TreeFormatError> {
    doc["attributes"]
        .as_array()
        .ok_or_else(|| TreeFormatError::new("`attributes` missing"))?
        .iter()
        .map(|a| {
            let name = a["name"]
                .as_str()
                .ok_or_else(|| TreeFormatError::new("attribute without `name`"))?;
            let values = a["values"]
                .as_array()
                .ok_or_else(|| TreeFormatError::new("attribute without `values`"))?
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| TreeFormatError::new("non-string attribute value"))
                })
                .collect::<Result<_, _>>()?;
            Ok(Attribute {
                name: name.to_string(),
                values,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed tree document: {0}")]
pub struct TreeFormatError(pub String);

impl TreeFormatError {
    pub(crate) fn new(msg: impl Into<String>) -> Self {
        TreeFormatError(msg.into())
    }
}

/// Induces an unpruned tree. The dataset must be functional.
pub fn build_tree(ds: &Dataset) -> Result<DecisionTree, LearnError> {
    ds.nonempty()?;
    ds.check_functional()?;
    let mut used = vec![false; ds.attributes.len()];
    let root = grow(ds, ds.all(), &mut used);
    Ok(DecisionTree {
        attributes: ds.attributes.clone(),
        training_rows: ds.len(),
        root,
    })
}

/// Chooses the split attribute for `subset`, or `None` when it is pure.
fn choose(ds: &Dataset, subset: &[usize], used: &[bool]) -> Option<usize> {
    let k = ds.classes.len();
    let candidates: Vec<usize> = (0..ds.attributes.len()).filter(|&a| !used[a]).collect();
    let score = |&a: &usize| {
        let c = ds.contingency(subset, a);
        (c.info_gain(k), c.gain_ratio(k), c.represented())
    };
    let scores: Vec<(f64, f64, usize)> = if subset.len() >= PARALLEL_ROWS {
        candidates.par_iter().map(score).collect()
    } else {
        candidates.iter().map(score).collect()
    };
    let mut best: Option<(usize, f64)> = None;
    for (&a, &(gain, ratio, _)) in candidates.iter().zip(&scores) {
        if gain > GAIN_EPSILON && best.is_none_or(|(_, r)| ratio > r) {
            best = Some((a, ratio));
        }
    }
    // An impure node where no single attribute carries information on its
    // own (parity-like interactions): split on the first attribute that
    // still partitions the rows.
    best.map(|(a, _)| a).or_else(|| {
        candidates
            .iter()
            .zip(&scores)
            .find(|(_, s)| s.2 >= 2)
            .map(|(&a, _)| a)
    })
}

fn grow(ds: &Dataset, subset: Vec<usize>, used: &mut [bool]) -> Node {
    let first = ds.labels[subset[0]];
    if subset.iter().all(|&i| ds.labels[i] == first) {
        return Node::Leaf {
            label: ds.classes[first as usize].clone(),
            support: subset.len(),
        };
    }
    let attribute = choose(ds, &subset, used)
        .expect("a functional dataset always has a partitioning attribute at an impure node");
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); ds.attributes[attribute].values.len()];
    for i in subset {
        parts[ds.rows[i][attribute] as usize].push(i);
    }
    used[attribute] = true;
    let branches = parts
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(v, p)| (v as u16, grow(ds, p, used)))
        .collect();
    used[attribute] = false;
    Node::Split {
        attribute,
        branches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(attrs: Vec<Attribute>, rows: &[(&[&str], &str)]) -> Dataset {
        let mut d = Dataset::new(attrs);
        for (v, l) in rows {
            d.push_named(v, l).unwrap();
        }
        d
    }

    #[test]
    fn entropy_basics() {
        assert_eq!(entropy(&[8]).unwrap(), 0.0);
        assert_eq!(entropy(&[4, 4]).unwrap(), 1.0);
        assert!((entropy(&[9, 5]).unwrap() - 0.940_285_958_670_631_1).abs() < 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(LearnError::EmptyDistribution));
        assert_eq!(entropy(&[3, 0, 3]).unwrap(), 1.0);
    }

    #[test]
    fn constant_attribute_has_zero_ratio() {
        let d = ds(
            vec![
                Attribute::new("c", &["k", "j"]),
                Attribute::new("p", &["u", "v"]),
            ],
            &[(&["k", "u"], "A"), (&["k", "v"], "B")],
        );
        assert_eq!(d.gain_ratio("c").unwrap(), 0.0);
        assert_eq!(d.info_gain("p").unwrap(), 1.0);
        assert_eq!(d.split_info("p").unwrap(), 1.0);
        assert_eq!(d.gain_ratio("p").unwrap(), 1.0);
        assert!(matches!(
            d.gain_ratio("zz"),
            Err(LearnError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn single_label_is_one_leaf() {
        let d = ds(
            vec![Attribute::new("a", &["x", "y"])],
            &[(&["x"], "L"), (&["y"], "L")],
        );
        let t = build_tree(&d).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(
            t.root,
            Node::Leaf {
                label: ClassLabel::from_text("L"),
                support: 2
            }
        );
    }

    #[test]
    fn determining_attribute_gives_depth_one() {
        let d = ds(
            vec![
                Attribute::new("noise", &["n0", "n1"]),
                Attribute::new("key", &["k0", "k1", "k2"]),
            ],
            &[
                (&["n0", "k0"], "A"),
                (&["n1", "k0"], "A"),
                (&["n0", "k1"], "B"),
                (&["n1", "k1"], "B"),
                (&["n0", "k2"], "C"),
                (&["n1", "k2"], "C"),
            ],
        );
        let t = build_tree(&d).unwrap();
        assert_eq!(t.node_count(), 4);
        match &t.root {
            Node::Split { attribute, .. } => assert_eq!(*attribute, 1),
            n => panic!("{n:?}"),
        }
        for (row, label) in d.rows() {
            assert_eq!(t.classify(row).unwrap(), label);
        }
    }

    #[test]
    fn unseen_value_is_an_error() {
        let d = ds(
            vec![
                Attribute::new("a", &["x", "y", "z"]),
                Attribute::new("b", &["p", "q"]),
            ],
            &[(&["x", "p"], "A"), (&["y", "p"], "B"), (&["y", "q"], "C")],
        );
        let t = build_tree(&d).unwrap();
        let err = t.classify(&[2, 0]).unwrap_err();
        assert_eq!(
            err,
            ClassifyError::UnseenValue {
                node: "<root>".into(),
                attribute: "a".into(),
                value: "z".into()
            }
        );
        let err = t.classify(&[1, 1]);
        assert_eq!(err.unwrap().as_str(), "C");
    }

    #[test]
    fn parity_falls_back_to_first_partitioning_attribute() {
        let d = ds(
            vec![
                Attribute::new("a", &["0", "1"]),
                Attribute::new("b", &["0", "1"]),
            ],
            &[
                (&["0", "0"], "E"),
                (&["0", "1"], "O"),
                (&["1", "0"], "O"),
                (&["1", "1"], "E"),
            ],
        );
        let t = build_tree(&d).unwrap();
        assert_eq!(t.node_count(), 7);
        for (row, label) in d.rows() {
            assert_eq!(t.classify(row).unwrap(), label);
        }
    }

    #[test]
    fn non_functional_dataset_names_witness_pair() {
        let d = ds(
            vec![Attribute::new("a", &["x", "y"])],
            &[(&["x"], "A"), (&["y"], "B"), (&["x"], "C")],
        );
        assert_eq!(
            build_tree(&d).unwrap_err(),
            LearnError::NonFunctional {
                first: 0,
                second: 2,
                vector: "a=x".into(),
                first_label: "A".into(),
                second_label: "C".into()
            }
        );
    }

    #[test]
    fn json_round_trip() {
        let d = ds(
            vec![
                Attribute::new("a", &["x", "y", "z"]),
                Attribute::new("b", &["p", "q"]),
            ],
            &[
                (&["x", "p"], "A"),
                (&["y", "p"], "B"),
                (&["y", "q"], "C"),
                (&["z", "q"], "A"),
            ],
        );
        let t = build_tree(&d).unwrap();
        let doc = t.to_json();
        assert_eq!(doc["node_count"], t.node_count());
        assert_eq!(DecisionTree::from_json(&doc).unwrap(), t);
    }
}
