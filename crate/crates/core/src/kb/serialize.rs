use std::fmt::Write;

use super::{KnowledgeBase, RuleElement, Test, TestOp};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn tests(kb: &KnowledgeBase, tests: &[Test]) -> String {
    tests
        .iter()
        .map(|t| {
            let var = kb.variable(t.variable);
            match &t.op {
                TestOp::Eq(v) => format!("{} = {}", var.name, var.value_name(*v)),
                TestOp::Ne(v) => format!("{} != {}", var.name, var.value_name(*v)),
                TestOp::In(vs) => format!(
                    "{} in {{ {} }}",
                    var.name,
                    vs.iter()
                        .map(|v| var.value_name(*v))
                        .collect::<Vec<_>>()
                        .join(" ")
                ),
            }
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

fn elements(kb: &KnowledgeBase, elems: &[RuleElement]) -> String {
    if elems.is_empty() {
        return "{ }".into();
    }
    let body = elems
        .iter()
        .map(|e| format!("{}{}", kb.treatment(e.treatment).id, e.dose.suffix()))
        .collect::<Vec<_>>()
        .join(" ");
    format!("{{ {body} }}")
}

/// Renders a KB back to its text form. Sections are emitted in a fixed
/// order with declaration order preserved inside each; empty sections are
/// omitted.
pub fn serialize_kb(kb: &KnowledgeBase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kb {} {{", quote(&kb.version));

    if !kb.components.is_empty() {
        let _ = writeln!(out, "  components {{ {} }}", kb.components.join(" "));
    }
    for var in &kb.variables {
        let guard = match var.applicability {
            Some(a) => {
                let g = kb.variable(a.variable);
                format!(" when {} = {}", g.name, g.value_name(a.value))
            }
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "  variable {}{} {{ {} }}",
            var.name,
            guard,
            var.domain.join(" ")
        );
    }
    for t in &kb.catalog {
        let kind = t
            .kind
            .as_ref()
            .map(|k| format!(" : {k}"))
            .unwrap_or_default();
        let comps: Vec<&str> = t
            .components
            .iter()
            .map(|c| kb.components[c.0].as_str())
            .collect();
        let body = if comps.is_empty() {
            "{ }".to_string()
        } else {
            format!("{{ {} }}", comps.join(" "))
        };
        let _ = writeln!(out, "  treatment {}{} {}", t.id, kind, body);
    }
    for role in super::Role::ALL {
        if let Some(v) = kb.roles.get(role) {
            let _ = writeln!(out, "  role {} = {}", role.keyword(), kb.variable(v).name);
        }
    }
    for d in &kb.dose_rules {
        let word = match d.modifier {
            super::DoseModifier::Decrease => "decrease",
            _ => "increase",
        };
        let _ = writeln!(out, "  dose {} when {}", word, tests(kb, &d.conjuncts));
    }
    for c in &kb.constraints {
        let _ = writeln!(out, "  exclude {} when {}", c.name, tests(kb, &c.conjuncts));
    }
    for r in &kb.rules {
        let _ = writeln!(out, "  rule {} {{", r.name);
        let _ = writeln!(out, "    when {}", tests(kb, &r.guard));
        let _ = writeln!(out, "    first {}", elements(kb, &r.first_line));
        let _ = writeln!(out, "    second {}", elements(kb, &r.second_line));
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}
