//! Generators shared by the property and acceptance suites.
#![allow(dead_code)]

pub mod kernel;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

use gverify_core::dss::{RecommendationElement, RecommendationSet};
use gverify_core::learner::{Attribute, Dataset};

/// Deterministic cursor over a pool of random words.
struct Draw<'a> {
    words: &'a [u32],
    at: usize,
}

impl Draw<'_> {
    fn next(&mut self, modulus: u32) -> u32 {
        let w = self.words[self.at % self.words.len()]
            .wrapping_add((self.at / self.words.len()) as u32);
        self.at += 1;
        w % modulus
    }

    fn distinct(&mut self, n: u32, max: u32) -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        let want = n.min(max);
        while (out.len() as u32) < want {
            let v = self.next(max);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

struct Var {
    name: String,
    values: Vec<String>,
    conditional: bool,
}

fn test_text(d: &mut Draw, vars: &[Var], var: usize) -> String {
    let v = &vars[var];
    let mut pool = v.values.clone();
    if v.conditional {
        pool.push("NA".into());
    }
    let pick = |d: &mut Draw| pool[d.next(pool.len() as u32) as usize].clone();
    match d.next(3) {
        0 => format!("{} = {}", v.name, pick(d)),
        1 => format!("{} != {}", v.name, pick(d)),
        _ => {
            let n = 1 + d.next(pool.len() as u32);
            let picked: Vec<String> = d
                .distinct(n, pool.len() as u32)
                .into_iter()
                .map(|i| pool[i as usize].clone())
                .collect();
            format!("{} in {{ {} }}", v.name, picked.join(" "))
        }
    }
}

fn conjunction(d: &mut Draw, vars: &[Var]) -> String {
    let n = 1 + d.next(2);
    d.distinct(n, vars.len() as u32)
        .into_iter()
        .map(|v| test_text(d, vars, v as usize))
        .collect::<Vec<_>>()
        .join(" and ")
}

/// A well-formed toy KB document built from `words`. Covers components,
/// conditional variables, constraints with every comparator (NA included),
/// and rules with possibly empty second lines.
pub fn toy_kb_source(words: &[u32]) -> String {
    let mut d = Draw { words, at: 0 };
    let mut out = format!("kb \"toy {}\" {{\n", d.next(1000));

    let ncomp = 1 + d.next(4);
    let comps: Vec<String> = (0..ncomp)
        .map(|i| {
            if i == 0 {
                "diet".to_string()
            } else {
                format!("c{i}")
            }
        })
        .collect();
    out += &format!("  components {{ {} }}\n", comps.join(" "));

    let nvars = 1 + d.next(4);
    let mut vars: Vec<Var> = Vec::new();
    for i in 0..nvars {
        let size = 2 + d.next(3);
        let name = format!("x{i}");
        let values: Vec<String> = (0..size).map(|k| format!("v{i}_{k}")).collect();
        let guard = if i > 0 && d.next(3) == 0 {
            let g = d.next(i) as usize;
            let gv = vars[g].values[d.next(vars[g].values.len() as u32) as usize].clone();
            Some(format!(" when {} = {}", vars[g].name, gv))
        } else {
            None
        };
        out += &format!(
            "  variable {name}{} {{ {} }}\n",
            guard.clone().unwrap_or_default(),
            values.join(" ")
        );
        vars.push(Var {
            name,
            values,
            conditional: guard.is_some(),
        });
    }

    let ntreat = 1 + d.next(4);
    let mut treatments = Vec::new();
    for t in 0..ntreat {
        let mask = d.next(1 << ncomp);
        let members: Vec<&str> = (0..ncomp)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| comps[b as usize].as_str())
            .collect();
        out += &format!("  treatment t{t} {{ {} }}\n", members.join(" "));
        treatments.push(format!("t{t}"));
    }

    for c in 0..d.next(3) {
        out += &format!("  exclude k{c} when {}\n", conjunction(&mut d, &vars));
    }

    let line = |d: &mut Draw, min: u32| {
        let n = min + d.next(3 - min);
        d.distinct(n, ntreat)
            .into_iter()
            .map(|i| treatments[i as usize].clone())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for r in 0..1 + d.next(3) {
        let guard = conjunction(&mut d, &vars);
        let first = line(&mut d, 1);
        let second = line(&mut d, 0);
        out += &format!("  rule r{r} {{\n    when {guard}\n    first {{ {first} }}\n    second {{ {second} }}\n  }}\n");
    }
    out.push_str("}\n");
    out
}

pub fn toy_kb_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(any::<u32>(), 64).prop_map(|w| toy_kb_source(&w))
}

/// `n` toy KB sources from a fixed-seed runner.
pub fn deterministic_toy_kbs(n: usize) -> Vec<String> {
    let mut runner = TestRunner::deterministic();
    let strategy = toy_kb_strategy();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}

/// Element pool used for random recommendation labels: three first-line
/// and two second-line elements.
pub fn label_for(mask: u8) -> RecommendationSet {
    let first = ["A", "B^+", "C"];
    let second = ["D", "E^-"];
    let mut s = RecommendationSet::default();
    for (i, e) in first.iter().enumerate() {
        if mask & (1 << i) != 0 {
            s.first_line
                .insert(e.parse::<RecommendationElement>().unwrap());
        }
    }
    for (i, e) in second.iter().enumerate() {
        if mask & (1 << (i + 3)) != 0 {
            s.second_line
                .insert(e.parse::<RecommendationElement>().unwrap());
        }
    }
    s
}

/// A functional dataset: a subset of the full product of `arities`, each
/// row labeled through a per-combination table.
#[derive(Debug, Clone)]
pub struct RandomTable {
    pub arities: Vec<u16>,
    pub labels: Vec<u8>,
    pub keep: Vec<bool>,
}

impl RandomTable {
    pub fn combinations(&self) -> Vec<Vec<u16>> {
        let mut out = vec![vec![]];
        for &a in &self.arities {
            out = out
                .into_iter()
                .flat_map(|p: Vec<u16>| {
                    (0..a).map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn dataset(&self) -> Dataset {
        let attrs: Vec<Attribute> = self
            .arities
            .iter()
            .enumerate()
            .map(|(i, &a)| Attribute {
                name: format!("a{i}"),
                values: (0..a).map(|v| format!("a{i}v{v}")).collect(),
            })
            .collect();
        let mut ds = Dataset::new(attrs);
        for (i, row) in self.combinations().into_iter().enumerate() {
            if self.keep[i % self.keep.len()] || i == 0 {
                let label = label_for(self.labels[i % self.labels.len()]).label();
                ds.push(row, label).unwrap();
            }
        }
        ds
    }
}

/// Label masks are drawn from a small alphabet so that subtrees repeat.
pub fn random_table() -> impl Strategy<Value = RandomTable> {
    (
        prop::collection::vec(2u16..=3, 1..=4),
        prop::collection::vec(
            prop::sample::select(vec![0b00001u8, 0b01011, 0b10011, 0b00111, 0b01001]),
            81,
        ),
        prop::collection::vec(prop::bool::weighted(0.8), 81),
    )
        .prop_map(|(arities, labels, keep)| RandomTable {
            arities,
            labels,
            keep,
        })
}
