//! Structural comparison of two factored trees over the same attributes.

use std::fmt;

use serde::Serialize;

use crate::factor::{Branch, FactoredKind, FactoredNode, FactoredTree, ValueGroup, OTHER};
use crate::learner::{node_path, Attribute};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum Change {
    /// Both nodes split, on different attributes.
    SplitChanged {
        a: String,
        b: String,
    },
    /// One side is a leaf, the other an internal node.
    KindChanged {
        a: String,
        b: String,
    },
    BranchAdded {
        group: String,
    },
    BranchRemoved {
        group: String,
    },
    /// `<other>` present on both sides with different members.
    GroupChanged {
        a: Vec<String>,
        b: Vec<String>,
    },
    HoistedChanged {
        a: String,
        b: String,
    },
    Relabeled {
        a: String,
        b: String,
    },
}

impl Change {
    fn mirror(&self) -> Change {
        match self.clone() {
            Change::SplitChanged { a, b } => Change::SplitChanged { a: b, b: a },
            Change::KindChanged { a, b } => Change::KindChanged { a: b, b: a },
            Change::BranchAdded { group } => Change::BranchRemoved { group },
            Change::BranchRemoved { group } => Change::BranchAdded { group },
            Change::GroupChanged { a, b } => Change::GroupChanged { a: b, b: a },
            Change::HoistedChanged { a, b } => Change::HoistedChanged { a: b, b: a },
            Change::Relabeled { a, b } => Change::Relabeled { a: b, b: a },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffEntry {
    pub path: String,
    #[serde(flatten)]
    pub change: Change,
}

impl fmt::Display for DiffEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.path)?;
        match &self.change {
            Change::SplitChanged { a, b } => write!(f, "split {a} -> {b}"),
            Change::KindChanged { a, b } => write!(f, "{a} -> {b}"),
            Change::BranchAdded { group } => write!(f, "+ branch {group}"),
            Change::BranchRemoved { group } => write!(f, "- branch {group}"),
            Change::GroupChanged { a, b } => {
                write!(f, "{OTHER} {{{}}} -> {{{}}}", a.join(", "), b.join(", "))
            }
            Change::HoistedChanged { a, b } => write!(f, "hoisted {a} -> {b}"),
            Change::Relabeled { a, b } => write!(f, "leaf {a} -> {b}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct TreeDiff {
    pub entries: Vec<DiffEntry>,
}

impl TreeDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mirror(&self) -> TreeDiff {
        TreeDiff {
            entries: self
                .entries
                .iter()
                .map(|e| DiffEntry {
                    path: e.path.clone(),
                    change: e.change.mirror(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for TreeDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trees are over different attributes")]
pub struct AttributeMismatch;

pub fn diff(a: &FactoredTree, b: &FactoredTree) -> Result<TreeDiff, AttributeMismatch> {
    if a.attributes != b.attributes {
        return Err(AttributeMismatch);
    }
    let mut out = TreeDiff::default();
    walk(
        &a.attributes,
        &a.root,
        &b.root,
        &mut Vec::new(),
        &mut out.entries,
    );
    Ok(out)
}

fn group_name(attr: &Attribute, g: &ValueGroup) -> String {
    match g {
        ValueGroup::Value(v) => attr.values[*v as usize].clone(),
        ValueGroup::Other(_) => OTHER.to_string(),
    }
}

fn kind_name(attrs: &[Attribute], n: &FactoredNode) -> String {
    match &n.kind {
        FactoredKind::Internal { attribute, .. } => format!("split {}", attrs[*attribute].name),
        FactoredKind::Leaf { residual, .. } => format!("leaf {}", residual.label()),
    }
}

fn walk(
    attrs: &[Attribute],
    a: &FactoredNode,
    b: &FactoredNode,
    path: &mut Vec<String>,
    out: &mut Vec<DiffEntry>,
) {
    let here = node_path(path);
    let mut push = |change| {
        out.push(DiffEntry {
            path: here.clone(),
            change,
        })
    };
    if a.hoisted != b.hoisted {
        push(Change::HoistedChanged {
            a: a.hoisted.label().to_string(),
            b: b.hoisted.label().to_string(),
        });
    }
    match (&a.kind, &b.kind) {
        (FactoredKind::Leaf { residual: ra, .. }, FactoredKind::Leaf { residual: rb, .. }) => {
            if ra != rb {
                push(Change::Relabeled {
                    a: ra.label().to_string(),
                    b: rb.label().to_string(),
                });
            }
        }
        (
            FactoredKind::Internal {
                attribute: xa,
                branches: ba,
            },
            FactoredKind::Internal {
                attribute: xb,
                branches: bb,
            },
        ) => {
            if xa != xb {
                push(Change::SplitChanged {
                    a: attrs[*xa].name.clone(),
                    b: attrs[*xb].name.clone(),
                });
                return;
            }
            let attr = &attrs[*xa];
            let find = |bs: &'_ [Branch], g: &ValueGroup| -> Option<usize> {
                bs.iter().position(|x| match (g, &x.group) {
                    (ValueGroup::Other(_), ValueGroup::Other(_)) => true,
                    _ => *g == x.group,
                })
            };
            let key = |g: &ValueGroup| match g {
                ValueGroup::Value(v) => (false, *v),
                ValueGroup::Other(_) => (true, 0),
            };
            let mut pairs = Vec::new();
            let mut unmatched = Vec::new();
            for x in ba {
                match find(bb, &x.group) {
                    Some(j) => pairs.push((x, &bb[j])),
                    None => unmatched.push((
                        key(&x.group),
                        Change::BranchRemoved {
                            group: group_name(attr, &x.group),
                        },
                    )),
                }
            }
            for y in bb {
                if find(ba, &y.group).is_none() {
                    unmatched.push((
                        key(&y.group),
                        Change::BranchAdded {
                            group: group_name(attr, &y.group),
                        },
                    ));
                }
            }
            // Domain order, `<other>` last, so that the diff mirrors exactly.
            unmatched.sort_by_key(|(k, _)| *k);
            for (_, change) in unmatched {
                push(change);
            }
            for (x, y) in &pairs {
                if let (ValueGroup::Other(ma), ValueGroup::Other(mb)) = (&x.group, &y.group) {
                    if ma != mb {
                        let names = |m: &[u16]| {
                            m.iter().map(|&v| attr.values[v as usize].clone()).collect()
                        };
                        push(Change::GroupChanged {
                            a: names(ma),
                            b: names(mb),
                        });
                    }
                }
            }
            for (x, y) in pairs {
                path.push(format!("{}={}", attr.name, group_name(attr, &x.group)));
                walk(attrs, &x.node, &y.node, path, out);
                path.pop();
            }
        }
        _ => push(Change::KindChanged {
            a: kind_name(attrs, a),
            b: kind_name(attrs, b),
        }),
    }
}
