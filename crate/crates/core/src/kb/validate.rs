//! Static and enumeration-backed KB checks.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{DoseModifier, KnowledgeBase, TreatmentId, ValueIdx};
use crate::generator::enumerate;

/// One invariant violation. Findings are data: an empty list means valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DomainTooSmall {
        variable: String,
        size: usize,
    },
    /// A role-bound variable has a value that does not name what the role
    /// requires (a treatment id or a component).
    RoleValue {
        role: String,
        variable: String,
        value: String,
    },
    TypeTag {
        treatment: String,
        tag: Option<String>,
    },
    Quadritherapy {
        treatment: String,
        drugs: usize,
    },
    DuplicateCanonicalName {
        name: String,
        treatments: Vec<String>,
    },
    GuardRepeatsVariable {
        rule: String,
        variable: String,
    },
    GuardUsesProposed {
        rule: String,
        variable: String,
    },
    EmptyFirstLine {
        rule: String,
    },
    /// A dose-annotated element that can never be the patient's current
    /// treatment under the rule's guard.
    UnreachableDose {
        rule: String,
        treatment: String,
    },
    UnannotatedDoseRule {
        index: usize,
    },
    Overlap {
        rules: [String; 2],
        witness: String,
    },
    Gap {
        vectors: u64,
        witness: String,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::DomainTooSmall { variable, size } => {
                write!(f, "variable `{variable}` has {size} value(s); at least 2 are required")
            }
            Finding::RoleValue {
                role,
                variable,
                value,
            } => write!(
                f,
                "value `{value}` of `{variable}` (role {role}) does not name a valid entry"
            ),
            Finding::TypeTag { treatment, tag } => match tag {
                Some(t) => write!(f, "treatment `{treatment}` has type `{t}`, not a value of the type variable"),
                None => write!(f, "treatment `{treatment}` has no type tag"),
            },
            Finding::Quadritherapy { treatment, drugs } => {
                write!(f, "treatment `{treatment}` combines {drugs} drugs")
            }
            Finding::DuplicateCanonicalName { name, treatments } => write!(
                f,
                "treatments {} share canonical name `{name}`",
                treatments.join(", ")
            ),
            Finding::GuardRepeatsVariable { rule, variable } => {
                write!(f, "rule `{rule}` tests `{variable}` more than once")
            }
            Finding::GuardUsesProposed { rule, variable } => {
                write!(f, "rule `{rule}` tests the proposed treatment `{variable}`")
            }
            Finding::EmptyFirstLine { rule } => write!(f, "rule `{rule}` has an empty first line"),
            Finding::UnreachableDose { rule, treatment } => write!(
                f,
                "rule `{rule}` changes the dose of `{treatment}`, which cannot be the current treatment"
            ),
            Finding::UnannotatedDoseRule { index } => {
                write!(f, "dose rule #{index} carries no modifier")
            }
            Finding::Overlap { rules, witness } => write!(
                f,
                "rules `{}` and `{}` both match [{witness}]",
                rules[0], rules[1]
            ),
            Finding::Gap { vectors, witness } => {
                write!(f, "{vectors} realistic vector(s) match no rule, e.g. [{witness}]")
            }
        }
    }
}

fn static_findings(kb: &KnowledgeBase) -> Vec<Finding> {
    let mut out = Vec::new();

    for var in &kb.variables {
        if var.domain.len() < 2 {
            out.push(Finding::DomainTooSmall {
                variable: var.name.clone(),
                size: var.domain.len(),
            });
        }
    }

    let roles = &kb.roles;
    for (role, var) in [("current", roles.current), ("proposed", roles.proposed)] {
        let Some(var) = var else { continue };
        let def = kb.variable(var);
        for value in &def.domain {
            if kb.treatment_id(value).is_none() {
                out.push(Finding::RoleValue {
                    role: role.into(),
                    variable: def.name.clone(),
                    value: value.clone(),
                });
            }
        }
    }
    if let Some(var) = roles.intolerance {
        let def = kb.variable(var);
        for value in &def.domain {
            if kb.component_id(value).is_none() {
                out.push(Finding::RoleValue {
                    role: "intolerance".into(),
                    variable: def.name.clone(),
                    value: value.clone(),
                });
            }
        }
    }
    if let Some(var) = roles.treatment_type {
        let def = kb.variable(var);
        for t in &kb.catalog {
            if t.kind.as_deref().and_then(|k| def.value_index(k)).is_none() {
                out.push(Finding::TypeTag {
                    treatment: t.id.clone(),
                    tag: t.kind.clone(),
                });
            }
        }
    }

    let mut by_name: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, t) in kb.catalog.iter().enumerate() {
        let drugs = kb.drug_count(TreatmentId(i));
        if drugs >= 4 {
            out.push(Finding::Quadritherapy {
                treatment: t.id.clone(),
                drugs,
            });
        }
        by_name
            .entry(kb.canonical_name(TreatmentId(i)))
            .or_default()
            .push(t.id.clone());
    }
    for (name, treatments) in by_name {
        if treatments.len() > 1 {
            out.push(Finding::DuplicateCanonicalName { name, treatments });
        }
    }

    for (index, d) in kb.dose_rules.iter().enumerate() {
        if d.modifier == DoseModifier::Unchanged {
            out.push(Finding::UnannotatedDoseRule { index });
        }
    }

    for rule in &kb.rules {
        let mut seen = Vec::new();
        for t in &rule.guard {
            let name = &kb.variable(t.variable).name;
            if seen.contains(&t.variable) {
                out.push(Finding::GuardRepeatsVariable {
                    rule: rule.name.clone(),
                    variable: name.clone(),
                });
            }
            seen.push(t.variable);
            if !kb.is_clinical(t.variable) {
                out.push(Finding::GuardUsesProposed {
                    rule: rule.name.clone(),
                    variable: name.clone(),
                });
            }
        }
        if rule.first_line.is_empty() {
            out.push(Finding::EmptyFirstLine {
                rule: rule.name.clone(),
            });
        }
        for e in rule.first_line.iter().chain(&rule.second_line) {
            if e.dose == DoseModifier::Unchanged {
                continue;
            }
            let id = &kb.treatment(e.treatment).id;
            let reachable = kb.roles.current.is_some_and(|cur| {
                let def = kb.variable(cur);
                def.value_index(id).is_some_and(|v: ValueIdx| {
                    rule.guard
                        .iter()
                        .filter(|t| t.variable == cur)
                        .all(|t| t.admits(v))
                })
            });
            if !reachable {
                out.push(Finding::UnreachableDose {
                    rule: rule.name.clone(),
                    treatment: id.clone(),
                });
            }
        }
    }
    out
}

/// Sweeps the realistic space once, reporting the first witness of every
/// overlapping rule pair and of uncovered vectors.
fn coverage_findings(kb: &KnowledgeBase) -> Vec<Finding> {
    let mut overlaps: BTreeMap<(usize, usize), String> = BTreeMap::new();
    let mut gaps = 0u64;
    let mut gap_witness = None;
    let mut matched = Vec::new();
    for v in enumerate(kb) {
        matched.clear();
        matched.extend(
            kb.rules
                .iter()
                .enumerate()
                .filter(|(_, r)| r.matches(&v.values))
                .map(|(i, _)| i),
        );
        if matched.is_empty() {
            gaps += 1;
            gap_witness.get_or_insert_with(|| kb.describe(&v.values));
        }
        for (n, &a) in matched.iter().enumerate() {
            for &b in &matched[n + 1..] {
                overlaps
                    .entry((a, b))
                    .or_insert_with(|| kb.describe(&v.values));
            }
        }
    }
    let mut out: Vec<Finding> = overlaps
        .into_iter()
        .map(|((a, b), witness)| Finding::Overlap {
            rules: [kb.rules[a].name.clone(), kb.rules[b].name.clone()],
            witness,
        })
        .collect();
    if let Some(witness) = gap_witness {
        out.push(Finding::Gap {
            vectors: gaps,
            witness,
        });
    }
    out
}

/// All invariant violations, static checks first, then the
/// exclusivity/exhaustiveness sweep over the realistic space.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Finding> {
    let mut out = static_findings(kb);
    out.extend(coverage_findings(kb));
    out
}

#[cfg(test)]
mod tests {
    use super::super::{parse_kb, sample_kb};
    use super::*;

    #[test]
    fn sample_is_valid() {
        let findings = validate_kb(&sample_kb());
        assert!(findings.is_empty(), "{findings:#?}");
    }

    #[test]
    fn overlap_cites_both_rules_and_a_witness() {
        let kb = parse_kb(
            r#"kb "t" { variable a { x y z } treatment n { }
               rule r1 { when a in { x y } first { n } second { } }
               rule r2 { when a in { y z } first { n } second { } } }"#,
        )
        .unwrap();
        assert_eq!(
            validate_kb(&kb),
            vec![Finding::Overlap {
                rules: ["r1".into(), "r2".into()],
                witness: "a=y".into()
            }]
        );
    }

    #[test]
    fn gap_is_counted() {
        let kb = parse_kb(
            r#"kb "t" { variable a { x y z } variable b { p q } treatment n { }
               rule r1 { when a = x first { n } second { } } }"#,
        )
        .unwrap();
        assert_eq!(
            validate_kb(&kb),
            vec![Finding::Gap {
                vectors: 4,
                witness: "a=y, b=p".into()
            }]
        );
    }

    #[test]
    fn quadritherapy_is_reported() {
        let kb = parse_kb(
            r#"kb "t" { components { diet m s g a }
               variable v { x y }
               treatment quad { diet m s g a }
               treatment tri { diet m s g }
               rule r { when v in { x y } first { tri } second { } } }"#,
        )
        .unwrap();
        assert_eq!(
            validate_kb(&kb),
            vec![Finding::Quadritherapy {
                treatment: "quad".into(),
                drugs: 4
            }]
        );
    }

    #[test]
    fn static_checks() {
        let kb = parse_kb(
            r#"kb "t" { components { diet m }
               variable one { only }
               variable cur { n dm ghost }
               variable prop { n dm }
               treatment n { }
               treatment dm { diet m }
               treatment dm2 { m diet }
               role current = cur
               role proposed = prop
               rule r { when cur = n and cur != dm and prop = n first { dm ^+ } second { } } }"#,
        )
        .unwrap();
        let f = static_findings(&kb);
        let kinds: Vec<String> = f
            .iter()
            .map(|x| {
                serde_json::to_value(x).unwrap()["kind"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect();
        assert_eq!(
            kinds,
            [
                "domain_too_small",
                "role_value",
                "duplicate_canonical_name",
                "guard_repeats_variable",
                "guard_uses_proposed",
                "unreachable_dose"
            ]
        );
        assert!(f[1].to_string().contains("ghost"));
    }
}
