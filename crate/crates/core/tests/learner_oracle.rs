mod common;

use common::kernel::{
    check, toy, weather, NINE_FIVE, TOL, TOY_ENTROPY, TOY_EXPECTED, WEATHER_ENTROPY,
    WEATHER_EXPECTED,
};
use gverify_core::learner::{build_tree, entropy, Node};

#[test]
fn nine_five_distribution() {
    assert!((entropy(&[9, 5]).unwrap() - NINE_FIVE).abs() <= TOL);
}

#[test]
fn toy_fixture_matches_oracle() {
    check(&toy(), &TOY_EXPECTED, TOY_ENTROPY).unwrap();
}

#[test]
fn weather_fixture_matches_oracle() {
    check(&weather(), &WEATHER_EXPECTED, WEATHER_ENTROPY).unwrap();
}

#[test]
fn equal_gain_prefers_higher_ratio() {
    // Both toy attributes have the same gain; the three-valued one pays a
    // larger split penalty, so the root splits on the first.
    let t = build_tree(&toy()).unwrap();
    match t.root {
        Node::Split { attribute, .. } => assert_eq!(attribute, 0),
        n => panic!("{n:?}"),
    }
}

#[test]
fn weather_tree_has_zero_training_error() {
    let ds = weather();
    let t = build_tree(&ds).unwrap();
    match &t.root {
        Node::Split { attribute, .. } => assert_eq!(ds.attributes()[*attribute].name, "outlook"),
        n => panic!("{n:?}"),
    }
    for (row, label) in ds.rows() {
        assert_eq!(t.classify(row).unwrap(), label);
    }
}
