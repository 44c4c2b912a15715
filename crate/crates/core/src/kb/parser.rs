//! Recursive-descent parser for the KB text format.
//!
//! ```text
//! kb         := "kb" STRING "{" item* "}"
//! item       := components | variable | treatment | role | dose | exclude | rule
//! components := "components" "{" IDENT+ "}"
//! variable   := "variable" IDENT ["when" IDENT "=" VALUE] "{" VALUE+ "}"
//! treatment  := "treatment" IDENT [":" VALUE] "{" IDENT* "}"
//! role       := "role" ("current" | "proposed" | "intolerance" | "treatment_type") "=" IDENT
//! dose       := "dose" ("increase" | "decrease") "when" tests
//! exclude    := "exclude" IDENT "when" tests
//! rule       := "rule" IDENT "{" "when" tests "first" "{" elem+ "}" "second" "{" elem* "}" "}"
//! tests      := test ("and" test)*
//! test       := IDENT ("=" | "!=") VALUE | IDENT "in" "{" VALUE+ "}"
//! elem       := IDENT ["^+" | "^-"]
//! ```
//!
//! Parsing happens in two passes: a syntactic pass producing positioned
//! raw items, then name resolution into a [`KnowledgeBase`].

use std::collections::HashSet;
use std::fmt;

use super::lexer::{tokenize, Pos, Spanned, Tok};
use super::{
    Applicability, ComponentId, ConstraintRule, DoseModifier, DoseRule, KnowledgeBase, Role, Roles,
    RuleElement, Test, TestOp, TherapyRule, Treatment, VarId, VariableDef, NA,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Lex(String),
    #[error("expected {}, found {found}", expected.join(" or "))]
    Syntax {
        expected: Vec<String>,
        found: String,
    },
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("variable `{variable}` has no value `{value}`")]
    UndeclaredValue { variable: String, value: String },
    #[error("undeclared treatment `{0}`")]
    UndeclaredTreatment(String),
    #[error("undeclared component `{0}`")]
    UndeclaredComponent(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("value `{NA}` is reserved for inapplicable variables")]
    ReservedValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.kind)
    }
}

impl std::error::Error for ParseError {}

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: pos.line,
        col: pos.col,
        kind,
    }
}

type Name = (String, Pos);

enum RawOp {
    Eq(Name),
    Ne(Name),
    In(Vec<Name>),
}

struct RawTest {
    var: Name,
    op: RawOp,
}

struct RawVariable {
    name: Name,
    guard: Option<(Name, Name)>,
    values: Vec<Name>,
}

struct RawTreatment {
    id: Name,
    kind: Option<Name>,
    components: Vec<Name>,
}

struct RawRule {
    name: Name,
    guard: Vec<RawTest>,
    first: Vec<(Name, DoseModifier)>,
    second: Vec<(Name, DoseModifier)>,
}

#[derive(Default)]
struct RawKb {
    version: String,
    components: Vec<Name>,
    variables: Vec<RawVariable>,
    treatments: Vec<RawTreatment>,
    roles: Vec<(Name, Name)>,
    doses: Vec<(DoseModifier, Vec<RawTest>)>,
    excludes: Vec<(Name, Vec<RawTest>)>,
    rules: Vec<RawRule>,
}

const ITEM_KEYWORDS: [&str; 7] = [
    "components",
    "variable",
    "treatment",
    "role",
    "dose",
    "exclude",
    "rule",
];

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.at]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        err(
            t.pos,
            ParseErrorKind::Syntax {
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: t.tok.to_string(),
            },
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&[&tok.to_string()]))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        if self.at_keyword(kw) {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(&[&format!("`{kw}`")]))
        }
    }

    fn word(&mut self, what: &str) -> Result<Name, ParseError> {
        match &self.peek().tok {
            Tok::Word(_) => {
                let t = self.next();
                match t.tok {
                    Tok::Word(w) => Ok((w, t.pos)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn ident(&mut self, what: &str) -> Result<Name, ParseError> {
        let (w, pos) = self.word(what)?;
        if is_ident(&w) {
            Ok((w, pos))
        } else {
            Err(err(pos, ParseErrorKind::InvalidIdentifier(w)))
        }
    }

    fn words_in_braces(&mut self, what: &str, at_least_one: bool) -> Result<Vec<Name>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::RBrace if !(at_least_one && out.is_empty()) => {
                    self.next();
                    return Ok(out);
                }
                Tok::Word(_) => out.push(self.word(what)?),
                _ if out.is_empty() && at_least_one => return Err(self.unexpected(&[what])),
                _ => return Err(self.unexpected(&[what, "`}`"])),
            }
        }
    }

    fn test(&mut self) -> Result<RawTest, ParseError> {
        let var = self.ident("variable name")?;
        let op = match &self.peek().tok {
            Tok::Eq => {
                self.next();
                RawOp::Eq(self.word("value")?)
            }
            Tok::Ne => {
                self.next();
                RawOp::Ne(self.word("value")?)
            }
            Tok::Word(w) if w == "in" => {
                self.next();
                RawOp::In(self.words_in_braces("value", true)?)
            }
            _ => return Err(self.unexpected(&["`=`", "`!=`", "`in`"])),
        };
        Ok(RawTest { var, op })
    }

    fn tests(&mut self) -> Result<Vec<RawTest>, ParseError> {
        let mut out = vec![self.test()?];
        while self.at_keyword("and") {
            self.next();
            out.push(self.test()?);
        }
        Ok(out)
    }

    fn elements(&mut self, at_least_one: bool) -> Result<Vec<(Name, DoseModifier)>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::RBrace if !(at_least_one && out.is_empty()) => {
                    self.next();
                    return Ok(out);
                }
                Tok::Word(_) => {
                    let name = self.ident("treatment identifier")?;
                    let dose = match self.peek().tok {
                        Tok::DoseUp => {
                            self.next();
                            DoseModifier::Increase
                        }
                        Tok::DoseDown => {
                            self.next();
                            DoseModifier::Decrease
                        }
                        _ => DoseModifier::Unchanged,
                    };
                    out.push((name, dose));
                }
                _ if out.is_empty() && at_least_one => {
                    return Err(self.unexpected(&["treatment identifier"]))
                }
                _ => return Err(self.unexpected(&["treatment identifier", "`}`"])),
            }
        }
    }

    fn document(&mut self) -> Result<RawKb, ParseError> {
        let mut raw = RawKb::default();
        self.keyword("kb")?;
        raw.version = match &self.peek().tok {
            Tok::Str(_) => match self.next().tok {
                Tok::Str(s) => s,
                _ => unreachable!(),
            },
            _ => return Err(self.unexpected(&["version string"])),
        };
        self.expect(Tok::LBrace)?;
        loop {
            let kw = match &self.peek().tok {
                Tok::RBrace => {
                    self.next();
                    break;
                }
                Tok::Word(w) if ITEM_KEYWORDS.contains(&w.as_str()) => w.clone(),
                _ => {
                    let mut expected: Vec<String> =
                        ITEM_KEYWORDS.iter().map(|k| format!("`{k}`")).collect();
                    expected.push("`}`".into());
                    let refs: Vec<&str> = expected.iter().map(String::as_str).collect();
                    return Err(self.unexpected(&refs));
                }
            };
            self.next();
            match kw.as_str() {
                "components" => {
                    for (c, pos) in self.words_in_braces("component identifier", true)? {
                        if !is_ident(&c) {
                            return Err(err(pos, ParseErrorKind::InvalidIdentifier(c)));
                        }
                        raw.components.push((c, pos));
                    }
                }
                "variable" => {
                    let name = self.ident("variable name")?;
                    let guard = if self.at_keyword("when") {
                        self.next();
                        let var = self.ident("variable name")?;
                        self.expect(Tok::Eq)?;
                        let value = self.word("value")?;
                        Some((var, value))
                    } else {
                        None
                    };
                    let values = self.words_in_braces("value", true)?;
                    raw.variables.push(RawVariable {
                        name,
                        guard,
                        values,
                    });
                }
                "treatment" => {
                    let id = self.ident("treatment identifier")?;
                    let kind = if self.peek().tok == Tok::Colon {
                        self.next();
                        Some(self.word("treatment type value")?)
                    } else {
                        None
                    };
                    let components = self.words_in_braces("component identifier", false)?;
                    raw.treatments.push(RawTreatment {
                        id,
                        kind,
                        components,
                    });
                }
                "role" => {
                    let role = self.word("role name")?;
                    self.expect(Tok::Eq)?;
                    let var = self.ident("variable name")?;
                    raw.roles.push((role, var));
                }
                "dose" => {
                    let modifier = if self.at_keyword("increase") {
                        DoseModifier::Increase
                    } else if self.at_keyword("decrease") {
                        DoseModifier::Decrease
                    } else {
                        return Err(self.unexpected(&["`increase`", "`decrease`"]));
                    };
                    self.next();
                    self.keyword("when")?;
                    raw.doses.push((modifier, self.tests()?));
                }
                "exclude" => {
                    let name = self.ident("constraint name")?;
                    self.keyword("when")?;
                    raw.excludes.push((name, self.tests()?));
                }
                "rule" => {
                    let name = self.ident("rule name")?;
                    self.expect(Tok::LBrace)?;
                    self.keyword("when")?;
                    let guard = self.tests()?;
                    self.keyword("first")?;
                    let first = self.elements(true)?;
                    self.keyword("second")?;
                    let second = self.elements(false)?;
                    self.expect(Tok::RBrace)?;
                    raw.rules.push(RawRule {
                        name,
                        guard,
                        first,
                        second,
                    });
                }
                _ => unreachable!(),
            }
        }
        self.expect(Tok::Eof)?;
        Ok(raw)
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_unique<'a>(
    seen: &mut HashSet<&'a str>,
    kind: &'static str,
    name: &'a Name,
) -> Result<(), ParseError> {
    if seen.insert(name.0.as_str()) {
        Ok(())
    } else {
        Err(err(
            name.1,
            ParseErrorKind::Duplicate {
                kind,
                name: name.0.clone(),
            },
        ))
    }
}

struct Resolver<'a> {
    variables: &'a [VariableDef],
}

impl Resolver<'_> {
    fn var(&self, name: &Name) -> Result<VarId, ParseError> {
        self.variables
            .iter()
            .position(|v| v.name == name.0)
            .map(VarId)
            .ok_or_else(|| err(name.1, ParseErrorKind::UndeclaredVariable(name.0.clone())))
    }

    fn value(&self, var: VarId, value: &Name) -> Result<u16, ParseError> {
        let def = &self.variables[var.0];
        def.value_index(&value.0).ok_or_else(|| {
            err(
                value.1,
                ParseErrorKind::UndeclaredValue {
                    variable: def.name.clone(),
                    value: value.0.clone(),
                },
            )
        })
    }

    fn tests(&self, raw: &[RawTest]) -> Result<Vec<Test>, ParseError> {
        raw.iter()
            .map(|t| {
                let variable = self.var(&t.var)?;
                let op = match &t.op {
                    RawOp::Eq(v) => TestOp::Eq(self.value(variable, v)?),
                    RawOp::Ne(v) => TestOp::Ne(self.value(variable, v)?),
                    RawOp::In(vs) => TestOp::In(
                        vs.iter()
                            .map(|v| self.value(variable, v))
                            .collect::<Result<_, _>>()?,
                    ),
                };
                Ok(Test { variable, op })
            })
            .collect()
    }
}

fn resolve(raw: RawKb) -> Result<KnowledgeBase, ParseError> {
    let mut seen = HashSet::new();
    for c in &raw.components {
        check_unique(&mut seen, "component", c)?;
    }
    let components: Vec<String> = raw.components.iter().map(|c| c.0.clone()).collect();

    let mut variables: Vec<VariableDef> = Vec::with_capacity(raw.variables.len());
    let mut seen = HashSet::new();
    for rv in &raw.variables {
        check_unique(&mut seen, "variable", &rv.name)?;
        let mut values = HashSet::new();
        for v in &rv.values {
            if v.0 == NA {
                return Err(err(v.1, ParseErrorKind::ReservedValue));
            }
            check_unique(&mut values, "value", v)?;
        }
        let applicability = match &rv.guard {
            None => None,
            Some((gvar, gval)) => {
                // Guards may only look backwards.
                let resolver = Resolver {
                    variables: &variables,
                };
                let variable = resolver.var(gvar)?;
                let value = resolver.value(variable, gval)?;
                Some(Applicability { variable, value })
            }
        };
        variables.push(VariableDef {
            name: rv.name.0.clone(),
            domain: rv.values.iter().map(|v| v.0.clone()).collect(),
            applicability,
        });
    }

    let mut catalog = Vec::with_capacity(raw.treatments.len());
    let mut seen = HashSet::new();
    for rt in &raw.treatments {
        check_unique(&mut seen, "treatment", &rt.id)?;
        let mut comps = Vec::new();
        for c in &rt.components {
            let id = components
                .iter()
                .position(|x| *x == c.0)
                .map(ComponentId)
                .ok_or_else(|| err(c.1, ParseErrorKind::UndeclaredComponent(c.0.clone())))?;
            if comps.contains(&id) {
                return Err(err(
                    c.1,
                    ParseErrorKind::Duplicate {
                        kind: "component",
                        name: c.0.clone(),
                    },
                ));
            }
            comps.push(id);
        }
        comps.sort();
        catalog.push(Treatment {
            id: rt.id.0.clone(),
            kind: rt.kind.as_ref().map(|k| k.0.clone()),
            components: comps,
        });
    }

    let resolver = Resolver {
        variables: &variables,
    };

    let mut roles = Roles::default();
    for (role, var) in &raw.roles {
        let r = Role::from_keyword(&role.0)
            .ok_or_else(|| err(role.1, ParseErrorKind::UnknownRole(role.0.clone())))?;
        if roles.get(r).is_some() {
            return Err(err(
                role.1,
                ParseErrorKind::Duplicate {
                    kind: "role",
                    name: role.0.clone(),
                },
            ));
        }
        roles.set(r, resolver.var(var)?);
    }

    let dose_rules = raw
        .doses
        .iter()
        .map(|(modifier, tests)| {
            Ok(DoseRule {
                modifier: *modifier,
                conjuncts: resolver.tests(tests)?,
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    let mut seen = HashSet::new();
    let mut constraints = Vec::with_capacity(raw.excludes.len());
    for (name, tests) in &raw.excludes {
        check_unique(&mut seen, "constraint", name)?;
        constraints.push(ConstraintRule {
            name: name.0.clone(),
            conjuncts: resolver.tests(tests)?,
        });
    }

    let element = |(name, dose): &(Name, DoseModifier)| -> Result<RuleElement, ParseError> {
        let treatment = catalog
            .iter()
            .position(|t: &Treatment| t.id == name.0)
            .map(super::TreatmentId)
            .ok_or_else(|| err(name.1, ParseErrorKind::UndeclaredTreatment(name.0.clone())))?;
        Ok(RuleElement {
            treatment,
            dose: *dose,
        })
    };

    let mut seen = HashSet::new();
    let mut rules = Vec::with_capacity(raw.rules.len());
    for rr in &raw.rules {
        check_unique(&mut seen, "rule", &rr.name)?;
        rules.push(TherapyRule {
            name: rr.name.0.clone(),
            guard: resolver.tests(&rr.guard)?,
            first_line: rr.first.iter().map(element).collect::<Result<_, _>>()?,
            second_line: rr.second.iter().map(element).collect::<Result<_, _>>()?,
        });
    }

    Ok(KnowledgeBase {
        version: raw.version,
        components,
        variables,
        catalog,
        roles,
        dose_rules,
        constraints,
        rules,
    })
}

/// Parses a complete KB document.
pub fn parse_kb(text: &str) -> Result<KnowledgeBase, ParseError> {
    let toks = tokenize(text).map_err(|e| err(e.pos, ParseErrorKind::Lex(e.message)))?;
    let raw = Parser { toks, at: 0 }.document()?;
    resolve(raw)
}
