//! JSON and CSV reading and writing.
//!
//! Floats are written with 17 significant digits, enough to round-trip any
//! `f64`. Parsing goes through two stages: syntax errors carry line and
//! column, and invariant violations come back as [`Error::Validation`].

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::bell::{BellExpression, Correlation, CorrelationRepr, ExpressionRepr, MeasurementAssemblage};
use crate::entanglement::EntanglementCertificate;
use crate::error::{Error, Result};
use crate::nondegeneracy::NondegeneracyCertificate;

use super::simulate::SimulationSpec;
use super::sweep::{SweepRow, SWEEP_HEADER};

/// `x` with 17 significant digits; plain notation for moderate exponents.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0000000000000000".into() } else { "0.0000000000000000".into() };
    }
    let sci = format!("{x:.16e}");
    let (_, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..=16).contains(&exp) {
        return sci;
    }
    let decimals = (16 - exp).max(0) as usize;
    let plain = format!("{x:.decimals$}");
    if decimals == 0 {
        format!("{plain}.0")
    } else {
        plain
    }
}

struct Fmt17<'a>(PrettyFormatter<'a>);

impl Formatter for Fmt17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt17(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17-digit floats. Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fmt17(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Io(e.to_string()))?;
    let mut s = String::from_utf8(out).expect("serde_json writes UTF-8");
    s.push('\n');
    Ok(s)
}

/// Syntax check with position, then typed decode.
fn parse_stage<T: DeserializeOwned>(text: &str, kind: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{kind}: line {}, column {}: {e}", e.line(), e.column())))?;
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("{kind}: {e}")))
}

pub fn parse_expression(text: &str) -> Result<BellExpression> {
    BellExpression::try_from(parse_stage::<ExpressionRepr>(text, "expression")?)
}

pub fn parse_correlation(text: &str) -> Result<Correlation> {
    Correlation::try_from(parse_stage::<CorrelationRepr>(text, "correlation")?)
}

pub fn parse_assemblage(text: &str) -> Result<MeasurementAssemblage> {
    let m: MeasurementAssemblage = parse_stage(text, "assemblage")?;
    MeasurementAssemblage::new(m.dim(), m.povms().to_vec())
}

pub fn parse_nondegeneracy_certificate(text: &str) -> Result<NondegeneracyCertificate> {
    let c: NondegeneracyCertificate = parse_stage(text, "nondegeneracy certificate")?;
    let problems = c.defects();
    if problems.is_empty() {
        Ok(c)
    } else {
        Err(Error::Validation(problems))
    }
}

pub fn parse_entanglement_certificate(text: &str) -> Result<EntanglementCertificate> {
    let c: EntanglementCertificate = parse_stage(text, "entanglement certificate")?;
    let problems = c.defects();
    if problems.is_empty() {
        Ok(c)
    } else {
        Err(Error::Validation(problems))
    }
}

pub fn parse_spec(text: &str) -> Result<SimulationSpec> {
    let s: SimulationSpec = parse_stage(text, "simulation spec")?;
    s.validate()?;
    Ok(s)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// The serialized object kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Expression,
    Correlation,
    Assemblage,
    NondegeneracyCertificate,
    EntanglementCertificate,
    SimulationSpec,
    SweepCsv,
}

/// Parses, validates and re-serializes.
pub fn io_roundtrip(text: &str, kind: ObjectKind) -> Result<String> {
    match kind {
        ObjectKind::Expression => to_json(&parse_expression(text)?),
        ObjectKind::Correlation => to_json(&parse_correlation(text)?),
        ObjectKind::Assemblage => to_json(&parse_assemblage(text)?),
        ObjectKind::NondegeneracyCertificate => to_json(&parse_nondegeneracy_certificate(text)?),
        ObjectKind::EntanglementCertificate => to_json(&parse_entanglement_certificate(text)?),
        ObjectKind::SimulationSpec => to_json(&parse_spec(text)?),
        ObjectKind::SweepCsv => Ok(sweep_csv(&parse_sweep_csv(text)?)),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            fmt17(r.w),
            fmt17(r.violation),
            fmt17(r.gap),
            fmt17(r.eps1),
            opt(r.eps2),
            opt(r.purity_lower),
            opt(r.s_upper),
            fmt17(r.gamma_a),
            fmt17(r.s_lower),
            opt(r.ic_lower),
            fmt17(r.ic_true),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == SWEEP_HEADER => {}
        _ => return Err(Error::Parse(format!("sweep csv: line 1: header must be `{SWEEP_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 11 {
            return Err(Error::Parse(format!("sweep csv: line {}: expected 11 fields, found {}", i + 1, cells.len())));
        }
        let names: Vec<&str> = SWEEP_HEADER.split(',').collect();
        let num = |j: usize| -> Result<f64> {
            cells[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("sweep csv: line {}, field {}: {e}", i + 1, names[j])))
        };
        let maybe = |j: usize| -> Result<Option<f64>> {
            if cells[j].trim().is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        rows.push(SweepRow {
            w: num(0)?,
            violation: num(1)?,
            gap: num(2)?,
            eps1: num(3)?,
            eps2: maybe(4)?,
            purity_lower: maybe(5)?,
            s_upper: maybe(6)?,
            gamma_a: num(7)?,
            s_lower: num(8)?,
            ic_lower: maybe(9)?,
            ic_true: num(10)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{builtin_expression, BellScenario};
    use proptest::prelude::*;

    #[test]
    fn fmt17_examples() {
        assert_eq!(fmt17(1.0), "1.0000000000000000");
        assert_eq!(fmt17(0.1), "0.10000000000000001");
        assert_eq!(fmt17(3.3050), "3.3050000000000002");
        assert_eq!(fmt17(-2.5e-7), "-2.4999999999999999e-7");
        assert_eq!(fmt17(1e20), "1.0000000000000000e20");
        assert_eq!(fmt17(0.0), "0.0000000000000000");
    }

    proptest! {
        #[test]
        fn fmt17_round_trips(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn expression_round_trip() {
        let e = builtin_expression("cglmp3").unwrap();
        let text = to_json(&e).unwrap();
        assert_eq!(parse_expression(&text).unwrap(), e);
        assert_eq!(io_roundtrip(&text, ObjectKind::Expression).unwrap(), text);
    }

    #[test]
    fn negative_probability_names_index() {
        let s = BellScenario::new(1, 1, 2, 2).unwrap();
        let mut c = serde_json::to_value(Correlation::uniform(s)).unwrap();
        c["p"][0][0][1][0] = serde_json::json!(-0.01);
        c["p"][0][0][0][0] = serde_json::json!(0.51);
        match parse_correlation(&c.to_string()) {
            Err(Error::Validation(msgs)) => assert!(msgs.iter().any(|m| m.contains("p[0][0][1][0]")), "{msgs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_correlation("{\n  \"scenario\": ,\n}") {
            Err(Error::Parse(m)) => assert!(m.contains("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expression("{\"scenario\": 3}"), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_header_and_round_trip() {
        let row = SweepRow {
            w: 0.1,
            violation: 3.2,
            gap: 0.105,
            eps1: 0.105,
            eps2: Some(0.2),
            purity_lower: None,
            s_upper: None,
            gamma_a: 0.4,
            s_lower: 1.4,
            ic_lower: None,
            ic_true: 0.7,
        };
        let text = sweep_csv(std::slice::from_ref(&row));
        assert_eq!(text.lines().next().unwrap(), "w,violation,gap,eps1,eps2,purity_lower,s_upper,gamma_a,s_lower,ic_lower,ic_true");
        assert_eq!(parse_sweep_csv(&text).unwrap(), vec![row]);
        assert!(parse_sweep_csv("w,violation\n").is_err());
    }

    #[test]
    fn certificate_validation_on_parse() {
        let mut c = NondegeneracyCertificate::from_estimates("cglmp3", 3, 3.3, 6.2, None, true);
        let text = to_json(&c).unwrap();
        assert_eq!(parse_nondegeneracy_certificate(&text).unwrap(), c);
        c.eps1_max = 0.5;
        assert!(matches!(parse_nondegeneracy_certificate(&to_json(&c).unwrap()), Err(Error::Validation(_))));
    }
}
