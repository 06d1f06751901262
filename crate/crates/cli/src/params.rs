//! `best.params` files: one `name = value` line per fuzzy parameter.
//!
//! Blank lines and `#` comments (whole-line or trailing) are ignored. All nine
//! fields must appear exactly once; order is free. Values use Rust float
//! syntax and are written back with shortest round-trip formatting, so a
//! written file parses to the identical parameter set.

use std::fmt::Write as _;

use fuzzdrive_core::fuzzy::FuzzyParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("line {line}: expected `name = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown parameter `{name}` (expected one of {})", FuzzyParams::FIELDS.join(", "))]
    UnknownField { line: usize, name: String },
    #[error("line {line}: `{name}` already set on line {first}")]
    Duplicate {
        line: usize,
        name: String,
        first: usize,
    },
    #[error("line {line}: `{name}`: cannot parse `{value}` as a number")]
    BadNumber {
        line: usize,
        name: String,
        value: String,
    },
    #[error("missing parameter(s): {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        source: fuzzdrive_core::Error,
    },
}

pub fn parse_params(text: &str) -> Result<FuzzyParams, ParamsError> {
    let mut values = [None::<(f64, usize)>; 9];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (name, value) = content
            .split_once('=')
            .ok_or(ParamsError::Syntax { line })?;
        let (name, value) = (name.trim(), value.trim());
        if name.is_empty() || value.is_empty() {
            return Err(ParamsError::Syntax { line });
        }
        let slot = FuzzyParams::FIELDS
            .iter()
            .position(|f| *f == name)
            .ok_or_else(|| ParamsError::UnknownField {
                line,
                name: name.to_string(),
            })?;
        if let Some((_, first)) = values[slot] {
            return Err(ParamsError::Duplicate {
                line,
                name: name.to_string(),
                first,
            });
        }
        let v: f64 = value.parse().map_err(|_| ParamsError::BadNumber {
            line,
            name: name.to_string(),
            value: value.to_string(),
        })?;
        values[slot] = Some((v, line));
    }

    let missing: Vec<&'static str> = FuzzyParams::FIELDS
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(f, _)| *f)
        .collect();
    if !missing.is_empty() {
        return Err(ParamsError::Missing(missing));
    }
    let params =
        FuzzyParams::from_array(std::array::from_fn(|k| values[k].expect("checked above").0));
    params.validate().map_err(|source| {
        let line = match &source {
            fuzzdrive_core::Error::InvalidParameter { field, .. } => FuzzyParams::FIELDS
                .iter()
                .position(|f| f == field)
                .and_then(|k| values[k])
                .map_or(0, |(_, l)| l),
            _ => 0,
        };
        ParamsError::Invalid { line, source }
    })?;
    Ok(params)
}

pub fn format_params(params: &FuzzyParams) -> String {
    let mut out = String::from("# fuzzy speed controller parameters\n");
    for (name, value) in FuzzyParams::FIELDS.iter().zip(params.to_array()) {
        writeln!(out, "{name} = {value:?}").expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "\
# tuned
k1 = 0.005
k2 = 0.5
k3 = 3   # trailing comment
a1 = 0.2
a2 = 0.6

b1 = 0.1
b2 = 0.9
c1 = 0.3
c2 = 0.7
";

    #[test]
    fn parses_sample() {
        let p = parse_params(SAMPLE).unwrap();
        assert_eq!(p.k1, 0.005);
        assert_eq!(p.k3, 3.0);
        assert_eq!(p.c2, 0.7);
    }

    #[test]
    fn order_is_free() {
        let reversed: String = SAMPLE.lines().rev().map(|l| format!("{l}\n")).collect();
        assert_eq!(
            parse_params(&reversed).unwrap(),
            parse_params(SAMPLE).unwrap()
        );
    }

    #[test]
    fn round_trip_of_baseline() {
        let p = FuzzyParams::baseline();
        assert_eq!(parse_params(&format_params(&p)).unwrap(), p);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let dup = format!("{SAMPLE}k2 = 0.4\n");
        assert_eq!(
            parse_params(&dup).unwrap_err(),
            ParamsError::Duplicate {
                line: 12,
                name: "k2".into(),
                first: 3
            }
        );
        let err = parse_params("k1 = 0.005\nk9 = 1\n").unwrap_err();
        assert!(
            matches!(err, ParamsError::UnknownField { line: 2, .. }),
            "{err:?}"
        );
        let err = parse_params("k1 0.005\n").unwrap_err();
        assert_eq!(err, ParamsError::Syntax { line: 1 });
        let err = parse_params("k1 = fast\n").unwrap_err();
        assert!(matches!(err, ParamsError::BadNumber { line: 1, .. }));
    }

    #[test]
    fn missing_fields_are_listed() {
        let err = parse_params("k1 = 0.001\n").unwrap_err();
        assert_eq!(
            err,
            ParamsError::Missing(vec!["k2", "k3", "a1", "a2", "b1", "b2", "c1", "c2"])
        );
    }

    #[test]
    fn out_of_bound_k1_names_the_bound() {
        let text = SAMPLE.replace("k1 = 0.005", "k1 = 0.01");
        let err = parse_params(&text).unwrap_err();
        assert!(
            matches!(err, ParamsError::Invalid { line: 2, .. }),
            "{err:?}"
        );
        let msg = err.to_string();
        assert!(msg.contains("k1") && msg.contains("0.00667"), "{msg}");
    }

    #[test]
    fn unordered_peaks_are_rejected() {
        let text = SAMPLE.replace("a2 = 0.6", "a2 = 0.1");
        let err = parse_params(&text).unwrap_err();
        assert!(
            matches!(err, ParamsError::Invalid { line: 6, .. }),
            "{err:?}"
        );
    }

    proptest! {
        #[test]
        fn valid_records_round_trip(
            k in (0.0..=6.67e-3f64, 0.0..=1.0f64, 0.0..=6.0f64),
            pairs in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3),
        ) {
            let ordered: Vec<f64> = pairs
                .iter()
                .flat_map(|&(x, y)| {
                    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                    [lo, if hi > lo { hi } else { (lo + 1e-3).min(1.0) }]
                })
                .collect();
            prop_assume!(ordered.chunks(2).all(|c| c[0] < c[1]));
            let mut flat = vec![k.0, k.1, k.2];
            flat.extend(ordered);
            let p = FuzzyParams::from_slice(&flat).unwrap();
            prop_assert_eq!(parse_params(&format_params(&p)).unwrap(), p);
        }

        #[test]
        fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
            let _ = parse_params(&text);
        }
    }
}
