//! The critiquing engine under test.
//!
//! Given a KB and an input vector it finds the single matching therapy
//! rule, produces the two-line recommendation set, derives the physician's
//! proposed action (with the implied dose change) and issues a verdict.
//! Downstream modules only ever observe it through [`Engine::label`] and
//! [`Engine::recommend`].

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::kb::{
    all_match, ComponentId, DoseModifier, KnowledgeBase, TherapyRule, TreatmentId, ValueIdx, VarId,
};

/// One assignment of every KB variable, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputVector {
    pub values: Vec<ValueIdx>,
}

impl InputVector {
    pub fn new(values: Vec<ValueIdx>) -> Self {
        InputVector { values }
    }

    pub fn get(&self, var: VarId) -> ValueIdx {
        self.values[var.0]
    }

    /// Builds a vector from `name = value` pairs; unspecified conditional
    /// variables default to NA.
    pub fn from_names(kb: &KnowledgeBase, pairs: &[(&str, &str)]) -> Result<Self, DssError> {
        let mut values: Vec<Option<ValueIdx>> = kb.variables.iter().map(|v| v.na()).collect();
        for (name, value) in pairs {
            let var = kb
                .variable_id(name)
                .ok_or_else(|| DssError::UnknownVariable(name.to_string()))?;
            let idx =
                kb.variable(var)
                    .value_index(value)
                    .ok_or_else(|| DssError::UnmappedValue {
                        variable: name.to_string(),
                        value: value.to_string(),
                    })?;
            values[var.0] = Some(idx);
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| DssError::UnknownVariable(kb.variables[i].name.clone())))
            .collect::<Result<Vec<_>, _>>()
            .map(InputVector::new)
    }

    pub fn describe(&self, kb: &KnowledgeBase) -> String {
        kb.describe(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DssError {
    #[error("no rule matches vector [{vector}]")]
    NoMatch { vector: String },
    #[error("rules {} all match vector [{vector}]", rules.join(", "))]
    MultiMatch { rules: Vec<String>, vector: String },
    #[error("knowledge base binds no `{0}` role")]
    MissingRole(&'static str),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value `{value}` of `{variable}` does not name a catalog entry")]
    UnmappedValue { variable: String, value: String },
}

/// A recommended treatment with its dose annotation. Ordered by canonical
/// name, then dose modifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecommendationElement {
    pub treatment: String,
    pub dose: DoseModifier,
}

impl RecommendationElement {
    pub fn new(treatment: impl Into<String>, dose: DoseModifier) -> Self {
        RecommendationElement {
            treatment: treatment.into(),
            dose,
        }
    }

    pub fn plain(treatment: impl Into<String>) -> Self {
        Self::new(treatment, DoseModifier::Unchanged)
    }
}

impl fmt::Display for RecommendationElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.treatment, self.dose.suffix())
    }
}

impl FromStr for RecommendationElement {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, dose) = if let Some(n) = s.strip_suffix("^+") {
            (n, DoseModifier::Increase)
        } else if let Some(n) = s.strip_suffix("^-") {
            (n, DoseModifier::Decrease)
        } else {
            (s, DoseModifier::Unchanged)
        };
        if name.is_empty() || name.contains([',', '[', ']', ';', '^']) {
            return Err(LabelError::Malformed(s.to_string()));
        }
        Ok(RecommendationElement::new(name, dose))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Line {
    First,
    Second,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RecommendationSet {
    pub first_line: BTreeSet<RecommendationElement>,
    pub second_line: BTreeSet<RecommendationElement>,
}

impl RecommendationSet {
    pub fn line(&self, line: Line) -> &BTreeSet<RecommendationElement> {
        match line {
            Line::First => &self.first_line,
            Line::Second => &self.second_line,
        }
    }

    pub fn line_mut(&mut self, line: Line) -> &mut BTreeSet<RecommendationElement> {
        match line {
            Line::First => &mut self.first_line,
            Line::Second => &mut self.second_line,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.first_line.is_empty() && self.second_line.is_empty()
    }

    pub fn extend(&mut self, other: &RecommendationSet) {
        self.first_line.extend(other.first_line.iter().cloned());
        self.second_line.extend(other.second_line.iter().cloned());
    }

    pub fn label(&self) -> ClassLabel {
        ClassLabel::from_set(self)
    }
}

impl fmt::Display for RecommendationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label().as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error("malformed class label `{0}`")]
    Malformed(String),
    #[error("label names treatment `{0}`, which is not in the catalog")]
    UnknownTreatment(String),
}

/// Canonical text form of a recommendation set: `1:[e1,e2];2:[f1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn from_set(set: &RecommendationSet) -> Self {
        let join = |s: &BTreeSet<RecommendationElement>| {
            s.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        ClassLabel(format!(
            "1:[{}];2:[{}]",
            join(&set.first_line),
            join(&set.second_line)
        ))
    }

    /// Wraps label text read back from a file; use [`ClassLabel::decode`]
    /// to check its shape.
    pub fn from_text(text: impl Into<String>) -> Self {
        ClassLabel(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn decode(&self) -> Result<RecommendationSet, LabelError> {
        let malformed = || LabelError::Malformed(self.0.clone());
        let (first, second) = self.0.split_once(";2:[").ok_or_else(malformed)?;
        let first = first
            .strip_prefix("1:[")
            .and_then(|f| f.strip_suffix(']'))
            .ok_or_else(malformed)?;
        let second = second.strip_suffix(']').ok_or_else(malformed)?;
        let parse = |s: &str| -> Result<BTreeSet<RecommendationElement>, LabelError> {
            if s.is_empty() {
                return Ok(BTreeSet::new());
            }
            s.split(',').map(|e| e.parse()).collect()
        };
        let set = RecommendationSet {
            first_line: parse(first)?,
            second_line: parse(second)?,
        };
        // Only the canonical serialization decodes.
        if ClassLabel::from_set(&set) != *self {
            return Err(malformed());
        }
        Ok(set)
    }

    /// Decodes and checks that every element names a catalog treatment.
    pub fn decode_for(&self, kb: &KnowledgeBase) -> Result<RecommendationSet, LabelError> {
        let set = self.decode()?;
        for e in set.first_line.iter().chain(&set.second_line) {
            if kb.treatment_by_canonical_name(&e.treatment).is_none() {
                return Err(LabelError::UnknownTreatment(e.treatment.clone()));
            }
        }
        Ok(set)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Verdicts order as `Conform > NotOptimal > NonConform`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonConform,
    NotOptimal,
    Conform,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Conform => "conform",
            Verdict::NotOptimal => "not_optimal",
            Verdict::NonConform => "non_conform",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the physician's prescription amounts to once the dose rule is
/// applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposedAction {
    pub treatment: String,
    pub dose: DoseModifier,
}

impl ProposedAction {
    pub fn element(&self) -> RecommendationElement {
        RecommendationElement::new(self.treatment.clone(), self.dose)
    }
}

/// Per-KB lookup tables for the role-bound variables.
#[derive(Debug, Clone, Default)]
pub struct RoleIndex {
    current: Option<(VarId, Vec<Option<TreatmentId>>)>,
    proposed: Option<(VarId, Vec<Option<TreatmentId>>)>,
    intolerance: Option<(VarId, Vec<Option<ComponentId>>)>,
    /// Expected type-variable value for each catalog entry.
    treatment_type: Option<(VarId, Vec<Option<ValueIdx>>)>,
}

impl RoleIndex {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let treatments = |var: VarId| {
            let def = kb.variable(var);
            let map = (0..def.arity())
                .map(|i| kb.treatment_id(def.value_name(i as ValueIdx)))
                .collect();
            (var, map)
        };
        let intolerance = kb.roles.intolerance.map(|var| {
            let def = kb.variable(var);
            let map = (0..def.arity())
                .map(|i| kb.component_id(def.value_name(i as ValueIdx)))
                .collect();
            (var, map)
        });
        let treatment_type = kb.roles.treatment_type.map(|var| {
            let def = kb.variable(var);
            let map = kb
                .catalog
                .iter()
                .map(|t| t.kind.as_deref().and_then(|k| def.value_index(k)))
                .collect();
            (var, map)
        });
        RoleIndex {
            current: kb.roles.current.map(treatments),
            proposed: kb.roles.proposed.map(treatments),
            intolerance,
            treatment_type,
        }
    }

    pub fn current(&self, values: &[ValueIdx]) -> Option<TreatmentId> {
        self.current
            .as_ref()
            .and_then(|(var, map)| map.get(values[var.0] as usize).copied().flatten())
    }

    pub fn proposed(&self, values: &[ValueIdx]) -> Option<TreatmentId> {
        self.proposed
            .as_ref()
            .and_then(|(var, map)| map.get(values[var.0] as usize).copied().flatten())
    }

    /// Structural invariants of an input vector: an intolerant drug is a
    /// component of the current treatment, and the treatment-type variable
    /// agrees with the current treatment's type tag.
    pub fn is_consistent(&self, kb: &KnowledgeBase, values: &[ValueIdx]) -> bool {
        if let Some((var, map)) = &self.intolerance {
            let v = values[var.0];
            if kb.variable(*var).na() != Some(v) {
                let Some(component) = map.get(v as usize).copied().flatten() else {
                    return false;
                };
                let Some(current) = self.current(values) else {
                    return false;
                };
                if !kb.treatment(current).components.contains(&component) {
                    return false;
                }
            }
        }
        if let (Some((var, expected)), Some(_)) = (&self.treatment_type, &self.current) {
            let Some(current) = self.current(values) else {
                return false;
            };
            if expected[current.0] != Some(values[var.0]) {
                return false;
            }
        }
        true
    }
}

/// A critiquing engine bound to one knowledge base.
#[derive(Debug, Clone)]
pub struct Engine<'kb> {
    kb: &'kb KnowledgeBase,
    roles: RoleIndex,
    names: Vec<String>,
}

impl<'kb> Engine<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        Engine {
            kb,
            roles: RoleIndex::new(kb),
            names: (0..kb.catalog.len())
                .map(|i| kb.canonical_name(TreatmentId(i)))
                .collect(),
        }
    }

    pub fn kb(&self) -> &'kb KnowledgeBase {
        self.kb
    }

    pub fn roles(&self) -> &RoleIndex {
        &self.roles
    }

    pub fn canonical_name(&self, id: TreatmentId) -> &str {
        &self.names[id.0]
    }

    pub fn match_rule(&self, v: &InputVector) -> Result<&'kb TherapyRule, DssError> {
        let mut matched = self.kb.rules.iter().filter(|r| r.matches(&v.values));
        let first = matched.next().ok_or_else(|| DssError::NoMatch {
            vector: v.describe(self.kb),
        })?;
        if let Some(second) = matched.next() {
            let mut rules = vec![first.name.clone(), second.name.clone()];
            rules.extend(matched.map(|r| r.name.clone()));
            return Err(DssError::MultiMatch {
                rules,
                vector: v.describe(self.kb),
            });
        }
        Ok(first)
    }

    pub fn recommend(&self, v: &InputVector) -> Result<RecommendationSet, DssError> {
        let rule = self.match_rule(v)?;
        let current = self.roles.current(&v.values);
        let resolve = |elems: &[crate::kb::RuleElement]| {
            elems
                .iter()
                // A dose change only means something for the treatment
                // the patient is already on.
                .filter(|e| {
                    e.dose == DoseModifier::Unchanged
                        || current.is_none()
                        || current == Some(e.treatment)
                })
                .map(|e| RecommendationElement::new(self.names[e.treatment.0].clone(), e.dose))
                .collect()
        };
        Ok(RecommendationSet {
            first_line: resolve(&rule.first_line),
            second_line: resolve(&rule.second_line),
        })
    }

    pub fn derive_action(&self, v: &InputVector) -> Result<ProposedAction, DssError> {
        let kb = self.kb;
        let proposed_var = kb.roles.proposed.ok_or(DssError::MissingRole("proposed"))?;
        let current_var = kb.roles.current.ok_or(DssError::MissingRole("current"))?;
        let unmapped = |var: VarId| {
            let def = kb.variable(var);
            DssError::UnmappedValue {
                variable: def.name.clone(),
                value: def.value_name(v.get(var)).to_string(),
            }
        };
        let proposed = self
            .roles
            .proposed(&v.values)
            .ok_or_else(|| unmapped(proposed_var))?;
        let current = self
            .roles
            .current(&v.values)
            .ok_or_else(|| unmapped(current_var))?;
        let dose = if proposed != current {
            DoseModifier::Unchanged
        } else {
            kb.dose_rules
                .iter()
                .find(|d| all_match(&d.conjuncts, &v.values))
                .map(|d| d.modifier)
                .unwrap_or(DoseModifier::Unchanged)
        };
        Ok(ProposedAction {
            treatment: self.names[proposed.0].clone(),
            dose,
        })
    }

    pub fn critique(&self, v: &InputVector) -> Result<Verdict, DssError> {
        let set = self.recommend(v)?;
        let action = self.derive_action(v)?;
        Ok(verdict_for(&set, &action))
    }

    pub fn label(&self, v: &InputVector) -> Result<ClassLabel, DssError> {
        self.recommend(v).map(|s| s.label())
    }
}

/// First-line membership wins when an element appears on both lines.
pub fn verdict_for(set: &RecommendationSet, action: &ProposedAction) -> Verdict {
    let e = action.element();
    if set.first_line.contains(&e) {
        Verdict::Conform
    } else if set.second_line.contains(&e) {
        Verdict::NotOptimal
    } else {
        Verdict::NonConform
    }
}

pub fn match_rule<'kb>(
    kb: &'kb KnowledgeBase,
    v: &InputVector,
) -> Result<&'kb TherapyRule, DssError> {
    Engine::new(kb).match_rule(v)
}

pub fn recommend(kb: &KnowledgeBase, v: &InputVector) -> Result<RecommendationSet, DssError> {
    Engine::new(kb).recommend(v)
}

pub fn derive_action(kb: &KnowledgeBase, v: &InputVector) -> Result<ProposedAction, DssError> {
    Engine::new(kb).derive_action(v)
}

pub fn critique(kb: &KnowledgeBase, v: &InputVector) -> Result<Verdict, DssError> {
    Engine::new(kb).critique(v)
}

pub fn label(kb: &KnowledgeBase, v: &InputVector) -> Result<ClassLabel, DssError> {
    Engine::new(kb).label(v)
}
