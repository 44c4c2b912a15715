//! Human-readable renderings of a factored tree.

use std::fmt::Write;
use std::str::FromStr;

use crate::dss::RecommendationSet;
use crate::factor::{FactoredKind, FactoredNode, FactoredTree, ValueGroup, OTHER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Dot,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "dot" => Ok(Format::Dot),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected text, dot or json)")),
        }
    }
}

pub fn render(tree: &FactoredTree, format: Format) -> String {
    match format {
        Format::Text => render_text(tree),
        Format::Dot => render_dot(tree),
        Format::Json => render_json(tree),
    }
}

pub fn render_json(tree: &FactoredTree) -> String {
    let mut s = serde_json::to_string_pretty(&tree.to_json()).expect("tree JSON serializes");
    s.push('\n');
    s
}

fn describe(node: &FactoredNode, tree: &FactoredTree) -> String {
    let mut s = match &node.kind {
        FactoredKind::Internal { attribute, .. } => {
            format!("split {}", tree.attributes[*attribute].name)
        }
        FactoredKind::Leaf { residual, support } => {
            format!("{} (support {support})", residual.label())
        }
    };
    if !node.hoisted.is_empty() {
        let _ = write!(s, " [hoisted {}]", node.hoisted.label());
    }
    s
}

/// Indented outline, one line per node. `<other>` groups are numbered in
/// pre-order and expanded in a legend after the outline.
pub fn render_text(tree: &FactoredTree) -> String {
    let mut out = String::new();
    let mut legend = Vec::new();
    let _ = writeln!(out, "{}", describe(&tree.root, tree));
    fn walk(
        tree: &FactoredTree,
        node: &FactoredNode,
        depth: usize,
        out: &mut String,
        legend: &mut Vec<String>,
    ) {
        let FactoredKind::Internal {
            attribute,
            branches,
        } = &node.kind
        else {
            return;
        };
        let attr = &tree.attributes[*attribute];
        for b in branches {
            let value = match &b.group {
                ValueGroup::Value(v) => attr.values[*v as usize].clone(),
                ValueGroup::Other(members) => {
                    let tag = format!("<other#{}>", legend.len() + 1);
                    let names: Vec<&str> = members
                        .iter()
                        .map(|&m| attr.values[m as usize].as_str())
                        .collect();
                    legend.push(format!("{tag} {} in {{{}}}", attr.name, names.join(", ")));
                    tag
                }
            };
            let _ = writeln!(
                out,
                "{}{} = {} -> {}",
                "  ".repeat(depth + 1),
                attr.name,
                value,
                describe(&b.node, tree)
            );
            walk(tree, &b.node, depth + 1, out, legend);
        }
    }
    walk(tree, &tree.root, 0, &mut out, &mut legend);
    if !legend.is_empty() {
        out.push_str("legend:\n");
        for l in legend {
            let _ = writeln!(out, "  {l}");
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn dot_set(set: &RecommendationSet) -> String {
    set.label().to_string()
}

/// Graphviz digraph: one statement per node, one labeled edge per branch.
pub fn render_dot(tree: &FactoredTree) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let mut next = 0usize;
    fn walk(tree: &FactoredTree, node: &FactoredNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let mut label = match &node.kind {
            FactoredKind::Internal { attribute, .. } => tree.attributes[*attribute].name.clone(),
            FactoredKind::Leaf { residual, support } => {
                format!("{}\\nsupport {support}", dot_escape(&dot_set(residual)))
            }
        };
        if !node.hoisted.is_empty() {
            let _ = write!(label, "\\nhoisted {}", dot_escape(&dot_set(&node.hoisted)));
        }
        let shape = match node.kind {
            FactoredKind::Leaf { .. } => ", shape=ellipse",
            FactoredKind::Internal { .. } => "",
        };
        let _ = writeln!(out, "  n{id} [label=\"{label}\"{shape}];");
        if let FactoredKind::Internal {
            attribute,
            branches,
        } = &node.kind
        {
            let attr = &tree.attributes[*attribute];
            for b in branches {
                let child = walk(tree, &b.node, next, out);
                match &b.group {
                    ValueGroup::Value(v) => {
                        let _ = writeln!(
                            out,
                            "  n{id} -> n{child} [label=\"{}\"];",
                            dot_escape(&attr.values[*v as usize])
                        );
                    }
                    ValueGroup::Other(members) => {
                        let names: Vec<&str> = members
                            .iter()
                            .map(|&m| attr.values[m as usize].as_str())
                            .collect();
                        let _ = writeln!(
                            out,
                            "  n{id} -> n{child} [label=\"{OTHER}\", tooltip=\"{}\"];",
                            dot_escape(&names.join(", "))
                        );
                    }
                }
            }
        }
        id
    }
    walk(tree, &tree.root, &mut next, &mut out);
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::factorize;
    use crate::learner::{build_tree, Attribute, Dataset};

    fn fixture() -> FactoredTree {
        let mut ds = Dataset::new(vec![
            Attribute::new("a", &["a0", "a1", "a2"]),
            Attribute::new("b", &["b0", "b1"]),
        ]);
        for (a, b, l) in [
            ("a0", "b0", "1:[P,X];2:[]"),
            ("a0", "b1", "1:[X];2:[Q]"),
            ("a1", "b0", "1:[P,X];2:[]"),
            ("a1", "b1", "1:[X];2:[Q]"),
            ("a2", "b0", "1:[X,Y];2:[]"),
            ("a2", "b1", "1:[X,Y];2:[]"),
        ] {
            ds.push_named(&[a, b], l).unwrap();
        }
        factorize(&build_tree(&ds).unwrap(), None).unwrap()
    }

    #[test]
    fn text_outline() {
        let t = fixture();
        assert_eq!(
            render_text(&t),
            "split b [hoisted 1:[X];2:[]]\n\
             \x20 b = b0 -> split a\n\
             \x20   a = a2 -> 1:[Y];2:[] (support 1)\n\
             \x20   a = <other#1> -> 1:[P];2:[] (support 2)\n\
             \x20 b = b1 -> split a\n\
             \x20   a = a2 -> 1:[Y];2:[] (support 1)\n\
             \x20   a = <other#2> -> 1:[];2:[Q] (support 2)\n\
             legend:\n\
             \x20 <other#1> a in {a0, a1}\n\
             \x20 <other#2> a in {a0, a1}\n"
        );
    }

    #[test]
    fn single_leaf_renders() {
        let mut ds = Dataset::new(vec![Attribute::new("a", &["x", "y"])]);
        ds.push_named(&["x"], "1:[A];2:[]").unwrap();
        ds.push_named(&["y"], "1:[A];2:[]").unwrap();
        let t = factorize(&build_tree(&ds).unwrap(), None).unwrap();
        assert_eq!(render_text(&t), "1:[A];2:[] (support 2)\n");
        let dot = render_dot(&t);
        assert_eq!(dot.matches(" -> ").count(), 0);
        assert_eq!(dot.matches("[label=").count(), 1);
    }

    #[test]
    fn dot_counts_agree_with_tree() {
        let t = fixture();
        let dot = render_dot(&t);
        assert!(dot.starts_with("digraph tree {\n") && dot.ends_with("}\n"));
        let nodes = dot
            .lines()
            .filter(|l| {
                let l = l.trim_start();
                l.starts_with('n')
                    && l[1..].starts_with(|c: char| c.is_ascii_digit())
                    && !l.contains("->")
            })
            .count();
        assert_eq!(nodes, t.node_count());
        assert_eq!(dot.matches(" -> ").count(), t.node_count() - 1);
        assert!(dot.contains("[label=\"<other>\", tooltip=\"a0, a1\"]"));
    }

    #[test]
    fn renders_are_deterministic() {
        let t = fixture();
        for f in [Format::Text, Format::Dot, Format::Json] {
            assert_eq!(render(&t, f), render(&fixture(), f));
        }
        assert_eq!("dot".parse::<Format>(), Ok(Format::Dot));
        assert!("svg".parse::<Format>().is_err());
    }
}
