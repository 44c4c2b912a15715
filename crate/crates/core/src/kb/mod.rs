//! Knowledge-base model and its declarative text format.
//!
//! A [`KnowledgeBase`] holds everything the critiquing engine needs: the
//! discretised input variables, the component list and treatment catalog,
//! exclusion constraints, role bindings and the therapy rules. All
//! cross-references are stored as indices into the owning KB.

mod lexer;
mod parser;
mod serialize;
mod validate;

pub use parser::{parse_kb, ParseError, ParseErrorKind};
pub use serialize::serialize_kb;
pub use validate::{validate_kb, Finding};

use std::path::Path;

/// Index of a value within a variable's domain. For conditional variables
/// the index `domain.len()` encodes "not applicable".
pub type ValueIdx = u16;

/// Rendering of the "not applicable" value.
pub const NA: &str = "NA";

/// The only component that is not counted as a drug.
pub const NON_DRUG_COMPONENT: &str = "diet";

/// Canonical name of the empty treatment.
pub const NO_TREATMENT: &str = "no treatment";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreatmentId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub usize);

/// "Meaningful only if `variable` = `value`."
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applicability {
    pub variable: VarId,
    pub value: ValueIdx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDef {
    pub name: String,
    pub domain: Vec<String>,
    pub applicability: Option<Applicability>,
}

impl VariableDef {
    /// Number of distinct encoded values, counting the NA slot of a
    /// conditional variable.
    pub fn arity(&self) -> usize {
        self.domain.len() + usize::from(self.applicability.is_some())
    }

    pub fn na(&self) -> Option<ValueIdx> {
        self.applicability.map(|_| self.domain.len() as ValueIdx)
    }

    pub fn value_name(&self, value: ValueIdx) -> &str {
        self.domain
            .get(value as usize)
            .map(String::as_str)
            .unwrap_or(NA)
    }

    pub fn value_index(&self, name: &str) -> Option<ValueIdx> {
        if name == NA {
            return self.na();
        }
        self.domain
            .iter()
            .position(|v| v == name)
            .map(|i| i as ValueIdx)
    }

    /// Every encoded value name in index order, NA last when conditional.
    pub fn encoded_values(&self) -> Vec<String> {
        let mut values = self.domain.clone();
        if self.applicability.is_some() {
            values.push(NA.to_string());
        }
        values
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Treatment {
    /// Identifier used in the DSL and as a variable value.
    pub id: String,
    /// Value of the treatment-type variable this treatment implies.
    pub kind: Option<String>,
    /// Components, sorted by component declaration order.
    pub components: Vec<ComponentId>,
}

impl Treatment {
    pub fn is_no_treatment(&self) -> bool {
        self.components.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestOp {
    Eq(ValueIdx),
    Ne(ValueIdx),
    In(Vec<ValueIdx>),
}

/// One conjunct of a guard or constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Test {
    pub variable: VarId,
    pub op: TestOp,
}

impl Test {
    pub fn matches(&self, values: &[ValueIdx]) -> bool {
        let v = values[self.variable.0];
        match &self.op {
            TestOp::Eq(x) => v == *x,
            TestOp::Ne(x) => v != *x,
            TestOp::In(xs) => xs.contains(&v),
        }
    }

    /// Whether the test admits `value` for its variable.
    pub fn admits(&self, value: ValueIdx) -> bool {
        match &self.op {
            TestOp::Eq(x) => value == *x,
            TestOp::Ne(x) => value != *x,
            TestOp::In(xs) => xs.contains(&value),
        }
    }

    pub fn values(&self) -> Vec<ValueIdx> {
        match &self.op {
            TestOp::Eq(x) | TestOp::Ne(x) => vec![*x],
            TestOp::In(xs) => xs.clone(),
        }
    }
}

pub fn all_match(tests: &[Test], values: &[ValueIdx]) -> bool {
    tests.iter().all(|t| t.matches(values))
}

/// A vector matching every conjunct is excluded as unrealistic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintRule {
    pub name: String,
    pub conjuncts: Vec<Test>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DoseModifier {
    Unchanged,
    Increase,
    Decrease,
}

impl DoseModifier {
    pub fn suffix(self) -> &'static str {
        match self {
            DoseModifier::Unchanged => "",
            DoseModifier::Increase => "^+",
            DoseModifier::Decrease => "^-",
        }
    }
}

/// A recommendation element as written in a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleElement {
    pub treatment: TreatmentId,
    pub dose: DoseModifier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TherapyRule {
    pub name: String,
    pub guard: Vec<Test>,
    pub first_line: Vec<RuleElement>,
    pub second_line: Vec<RuleElement>,
}

impl TherapyRule {
    pub fn matches(&self, values: &[ValueIdx]) -> bool {
        all_match(&self.guard, values)
    }
}

/// Variables playing a fixed part in the critiquing semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roles {
    pub current: Option<VarId>,
    pub proposed: Option<VarId>,
    pub intolerance: Option<VarId>,
    pub treatment_type: Option<VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Current,
    Proposed,
    Intolerance,
    TreatmentType,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::Current,
        Role::Proposed,
        Role::Intolerance,
        Role::TreatmentType,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Role::Current => "current",
            Role::Proposed => "proposed",
            Role::Intolerance => "intolerance",
            Role::TreatmentType => "treatment_type",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.keyword() == s)
    }
}

impl Roles {
    pub fn get(&self, role: Role) -> Option<VarId> {
        match role {
            Role::Current => self.current,
            Role::Proposed => self.proposed,
            Role::Intolerance => self.intolerance,
            Role::TreatmentType => self.treatment_type,
        }
    }

    pub fn set(&mut self, role: Role, var: VarId) {
        match role {
            Role::Current => self.current = Some(var),
            Role::Proposed => self.proposed = Some(var),
            Role::Intolerance => self.intolerance = Some(var),
            Role::TreatmentType => self.treatment_type = Some(var),
        }
    }
}

/// Dose change implied when the proposed treatment equals the current one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoseRule {
    pub modifier: DoseModifier,
    pub conjuncts: Vec<Test>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub version: String,
    pub components: Vec<String>,
    pub variables: Vec<VariableDef>,
    pub catalog: Vec<Treatment>,
    pub roles: Roles,
    pub dose_rules: Vec<DoseRule>,
    pub constraints: Vec<ConstraintRule>,
    pub rules: Vec<TherapyRule>,
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<KnowledgeBase, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_kb(&text).map_err(|error| LoadError::Parse {
            path: path.display().to_string(),
            error,
        })
    }

    pub fn variable(&self, id: VarId) -> &VariableDef {
        &self.variables[id.0]
    }

    pub fn variable_id(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    pub fn treatment(&self, id: TreatmentId) -> &Treatment {
        &self.catalog[id.0]
    }

    pub fn treatment_id(&self, id: &str) -> Option<TreatmentId> {
        self.catalog
            .iter()
            .position(|t| t.id == id)
            .map(TreatmentId)
    }

    pub fn component_id(&self, name: &str) -> Option<ComponentId> {
        self.components
            .iter()
            .position(|c| c == name)
            .map(ComponentId)
    }

    /// Components joined with `+` in declaration order; the empty set is
    /// "no treatment".
    pub fn canonical_name(&self, id: TreatmentId) -> String {
        let t = self.treatment(id);
        if t.is_no_treatment() {
            return NO_TREATMENT.to_string();
        }
        t.components
            .iter()
            .map(|c| self.components[c.0].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    pub fn treatment_by_canonical_name(&self, name: &str) -> Option<TreatmentId> {
        (0..self.catalog.len())
            .map(TreatmentId)
            .find(|&id| self.canonical_name(id) == name)
    }

    pub fn drug_count(&self, id: TreatmentId) -> usize {
        self.treatment(id)
            .components
            .iter()
            .filter(|c| self.components[c.0] != NON_DRUG_COMPONENT)
            .count()
    }

    pub fn rule(&self, name: &str) -> Option<&TherapyRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Clinical variables are every variable except the proposed treatment.
    pub fn is_clinical(&self, var: VarId) -> bool {
        self.roles.proposed != Some(var)
    }

    /// `name=value` pairs, comma separated.
    pub fn describe(&self, values: &[ValueIdx]) -> String {
        self.variables
            .iter()
            .zip(values)
            .map(|(var, &v)| format!("{}={}", var.name, var.value_name(v)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{error}")]
    Parse { path: String, error: ParseError },
}

/// Path of the sample KB shipped with this crate.
pub fn sample_kb_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("kb/diabetes-t2.kb")
}

/// Source of the sample KB, embedded at build time.
pub const SAMPLE_KB: &str = include_str!("../../kb/diabetes-t2.kb");

pub fn sample_kb() -> KnowledgeBase {
    parse_kb(SAMPLE_KB).expect("embedded sample KB parses")
}
