//! Family definition files.
//!
//! ```text
//! [family]
//! k = 1
//! d = 2
//! label = quadratic
//! kind = polynomial
//!
//! [coord 0]
//! 2 0 : 1,0
//! 0 2 : 0,0 1,0
//! [coord 1]
//! 0 2 : 1,0
//! ```
//!
//! Each monomial line lists the `k+1` exponents, a colon, then the
//! λ-polynomial coefficients `c_0 c_1 ...` as `re,im` pairs. Numbers are
//! parsed with the standard library's correctly rounded decimal parser, so a
//! written file reads back bit for bit.

use super::{FamilyKind, FamilySpec, Term};
use crate::cvec::C64;
use crate::error::{Error, Result};
use crate::poly::ParamPolynomial;

enum Section {
    None,
    Family,
    Coord(usize),
}

pub fn parse_family(text: &str) -> Result<FamilySpec> {
    let mut k: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut label = String::new();
    let mut kind = FamilyKind::Generic;
    let mut coords: Vec<Option<Vec<Term>>> = Vec::new();
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(head) = line.strip_prefix('[') {
            let head = head.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            section = if head == "family" {
                Section::Family
            } else if let Some(i) = head.strip_prefix("coord") {
                let i: usize = i.trim().parse().map_err(|_| err(format!("bad coordinate index in [{head}]")))?;
                if coords.len() <= i {
                    coords.resize(i + 1, None);
                }
                if coords[i].is_some() {
                    return Err(err(format!("duplicate section [coord {i}]")));
                }
                coords[i] = Some(Vec::new());
                Section::Coord(i)
            } else {
                return Err(err(format!("unknown section [{head}]")));
            };
            continue;
        }
        match section {
            Section::None => return Err(err("content before any section".into())),
            Section::Family => {
                let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "k" => k = Some(value.parse().map_err(|_| err(format!("bad k {value:?}")))?),
                    "d" => d = Some(value.parse().map_err(|_| err(format!("bad d {value:?}")))?),
                    "label" => label = value.to_string(),
                    "kind" => kind = value.parse().map_err(|e: Error| err(e.to_string()))?,
                    other => return Err(err(format!("unknown key {other:?}"))),
                }
            }
            Section::Coord(i) => {
                let (exps, coefs) = line.split_once(':').ok_or_else(|| err("expected 'exponents : coefficients'".into()))?;
                let exps = exps
                    .split_whitespace()
                    .map(|e| e.parse::<u32>().map_err(|_| err(format!("bad exponent {e:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let coefs = coefs.split_whitespace().map(|c| parse_complex(c).map_err(&err)).collect::<Result<Vec<_>>>()?;
                if coefs.is_empty() {
                    return Err(err("monomial without coefficients".into()));
                }
                coords[i].as_mut().expect("section opened").push(Term { exps, coef: ParamPolynomial::new(coefs) });
            }
        }
    }

    let k = k.ok_or(Error::Parse { line: 0, msg: "missing k".into() })?;
    let d = d.ok_or(Error::Parse { line: 0, msg: "missing d".into() })?;
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(Error::Parse { line: 0, msg: format!("missing section [coord {i}]") }))
        .collect::<Result<Vec<_>>>()?;
    FamilySpec::new(k, d, label, kind, coords)
}

fn parse_complex(tok: &str) -> std::result::Result<C64, String> {
    let (re, im) = tok.split_once(',').ok_or_else(|| format!("coefficient {tok:?} is not re,im"))?;
    let re: f64 = re.parse().map_err(|_| format!("bad real part {re:?}"))?;
    let im: f64 = im.parse().map_err(|_| format!("bad imaginary part {im:?}"))?;
    Ok(C64::new(re, im))
}

pub fn write_family(spec: &FamilySpec) -> String {
    let mut s = String::new();
    s.push_str("[family]\n");
    s.push_str(&format!("k = {}\nd = {}\n", spec.k(), spec.d()));
    if !spec.label().is_empty() {
        s.push_str(&format!("label = {}\n", spec.label()));
    }
    s.push_str(&format!("kind = {}\n", spec.kind().as_str()));
    for (i, terms) in spec.coords().iter().enumerate() {
        s.push_str(&format!("\n[coord {i}]\n"));
        for t in terms {
            let exps: Vec<String> = t.exps.iter().map(|e| e.to_string()).collect();
            let coefs: Vec<String> = if t.coef.is_zero() {
                vec!["0.0,0.0".into()]
            } else {
                t.coef.coeffs().iter().map(|c| format!("{:?},{:?}", c.re, c.im)).collect()
            };
            s.push_str(&format!("{} : {}\n", exps.join(" "), coefs.join(" ")));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{lattes_map, quadratic_family, skew_family};
    use proptest::prelude::*;

    const QUAD: &str = "\
# the quadratic family
[family]
k = 1
d = 2
label = quad
kind = polynomial

[coord 0]
2 0 : 1,0
0 2 : 0,0 1,0
[coord 1]
0 2 : 1,0
";

    #[test]
    fn parses_quadratic() {
        let f = parse_family(QUAD).unwrap();
        assert_eq!(f.k(), 1);
        assert_eq!(f.d(), 2);
        assert_eq!(f.kind(), FamilyKind::Polynomial);
        assert_eq!(f.coords(), quadratic_family().coords());
    }

    #[test]
    fn rejects_wrong_exponent_sum() {
        let bad = QUAD.replace("2 0 : 1,0", "3 0 : 1,0");
        let e = parse_family(&bad).unwrap_err();
        assert!(matches!(e, Error::InvalidFamily(_)), "{e}");
    }

    #[test]
    fn rejects_garbage_coefficients() {
        let bad = QUAD.replace("1,0\n[coord 1]", "1;0\n[coord 1]");
        assert!(matches!(parse_family(&bad), Err(Error::Parse { line: 10, .. })));
    }

    #[test]
    fn rejects_missing_coordinate() {
        let bad = QUAD.split("[coord 1]").next().unwrap();
        assert!(parse_family(bad).is_err());
    }

    #[test]
    fn catalog_round_trips() {
        for f in [quadratic_family(), lattes_map(), skew_family()] {
            let back = parse_family(&write_family(&f)).unwrap();
            assert_eq!(back, f);
        }
    }

    proptest! {
        #[test]
        fn coefficients_round_trip_bit_exact(re in any::<f64>(), im in any::<f64>()) {
            prop_assume!(re.is_finite() && im.is_finite() && (re != 0.0 || im != 0.0));
            let text = QUAD.replace("0,0 1,0", &format!("{:?},{:?}", re, im));
            let f = parse_family(&text).unwrap();
            let back = parse_family(&write_family(&f)).unwrap();
            let c = back.coords()[0][1].coef.coeffs()[0];
            prop_assert_eq!(c.re.to_bits(), re.to_bits());
            prop_assert_eq!(c.im.to_bits(), im.to_bits());
        }
    }
}
