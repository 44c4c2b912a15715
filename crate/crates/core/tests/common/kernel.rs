//! Fixture datasets and information measures frozen from
//! `tests/oracles/gain_ratio_oracle.py` (direct formulas, 50-digit
//! arithmetic). Fixtures here must stay identical to the script's.

use gverify_core::learner::{entropy, Attribute, Dataset};

pub const TOL: f64 = 1e-9;

pub const NINE_FIVE: f64 = 0.9402859586706311;

const TOY: &[[&str; 3]] = &[
    ["a", "x", "P"],
    ["a", "y", "P"],
    ["b", "x", "N"],
    ["b", "z", "P"],
];

const WEATHER: &[[&str; 5]] = &[
    ["sunny", "hot", "high", "false", "no"],
    ["sunny", "hot", "high", "true", "no"],
    ["overcast", "hot", "high", "false", "yes"],
    ["rain", "mild", "high", "false", "yes"],
    ["rain", "cool", "normal", "false", "yes"],
    ["rain", "cool", "normal", "true", "no"],
    ["overcast", "cool", "normal", "true", "yes"],
    ["sunny", "mild", "high", "false", "no"],
    ["sunny", "cool", "normal", "false", "yes"],
    ["rain", "mild", "normal", "false", "yes"],
    ["sunny", "mild", "normal", "true", "yes"],
    ["overcast", "mild", "high", "true", "yes"],
    ["overcast", "hot", "normal", "false", "yes"],
    ["rain", "mild", "high", "true", "no"],
];

pub fn toy() -> Dataset {
    let mut ds = Dataset::new(vec![
        Attribute::new("first", &["a", "b"]),
        Attribute::new("second", &["x", "y", "z"]),
    ]);
    for r in TOY {
        ds.push_named(&r[..2], r[2]).unwrap();
    }
    ds
}

pub fn weather() -> Dataset {
    let mut ds = Dataset::new(vec![
        Attribute::new("outlook", &["sunny", "overcast", "rain"]),
        Attribute::new("temperature", &["hot", "mild", "cool"]),
        Attribute::new("humidity", &["high", "normal"]),
        Attribute::new("windy", &["false", "true"]),
    ]);
    for r in WEATHER {
        ds.push_named(&r[..4], r[4]).unwrap();
    }
    ds
}

pub const TOY_ENTROPY: f64 = 0.8112781244591328;
pub const WEATHER_ENTROPY: f64 = 0.940285958670631;

/// (info_gain, split_info, gain_ratio) per attribute.
pub const TOY_EXPECTED: [(f64, f64, f64); 2] = [
    (0.3112781244591329, 1.0, 0.3112781244591329),
    (0.3112781244591329, 1.5, 0.2075187496394219),
];

pub const WEATHER_EXPECTED: [(f64, f64, f64); 4] = [
    (0.24674981977443916, 1.5774062828523452, 0.15642756242117517),
    (
        0.029222565658954713,
        1.5566567074628228,
        0.018772646222418712,
    ),
    (0.1518355013623416, 1.0, 0.1518355013623416),
    (0.0481270304082694, 0.9852281360342514, 0.04884861551152074),
];

fn close(got: f64, want: f64, what: &str) -> Result<(), String> {
    if (got - want).abs() <= TOL {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want}"))
    }
}

pub fn check(
    ds: &Dataset,
    expected: &[(f64, f64, f64)],
    dataset_entropy: f64,
) -> Result<(), String> {
    close(ds.entropy().unwrap(), dataset_entropy, "entropy")?;
    for (a, &(gain, split, ratio)) in ds.attributes().iter().zip(expected) {
        close(
            ds.info_gain(&a.name).unwrap(),
            gain,
            &format!("{} gain", a.name),
        )?;
        close(
            ds.split_info(&a.name).unwrap(),
            split,
            &format!("{} split", a.name),
        )?;
        close(
            ds.gain_ratio(&a.name).unwrap(),
            ratio,
            &format!("{} ratio", a.name),
        )?;
    }
    Ok(())
}

/// Every frozen value; returns the number of values compared.
pub fn check_all() -> Result<usize, String> {
    close(entropy(&[9, 5]).unwrap(), NINE_FIVE, "{9,5}")?;
    check(&toy(), &TOY_EXPECTED, TOY_ENTROPY)?;
    check(&weather(), &WEATHER_EXPECTED, WEATHER_ENTROPY)?;
    Ok(1 + 1 + 3 * TOY_EXPECTED.len() + 1 + 3 * WEATHER_EXPECTED.len())
}
