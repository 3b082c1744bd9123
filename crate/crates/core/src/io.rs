//! Plain-text output formats and their loaders.
//!
//! Numbers are written with 12 significant digits in a `%g`-like style so
//! that the same values always produce the same bytes.

use crate::cvec::C64;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Format `x` with 12 significant digits, trailing zeros removed.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mant), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Parse a complex literal `re,im` (a bare real is accepted too).
pub fn parse_complex(s: &str) -> Result<C64> {
    let s = s.trim();
    let (re, im) = match s.split_once(',') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "0"),
    };
    let re: f64 = re.parse().map_err(|_| Error::InvalidArgument(format!("bad complex literal {s:?}")))?;
    let im: f64 = im.parse().map_err(|_| Error::InvalidArgument(format!("bad complex literal {s:?}")))?;
    Ok(C64::new(re, im))
}

pub fn fmt_complex(z: C64) -> String {
    format!("{},{}", fmt12(z.re), fmt12(z.im))
}

/// A CSV table held as strings; the header row is kept separately.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty CSV".into() })?;
        let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, l) in lines {
            let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Parse { line: i + 1, msg: format!("expected {} fields, got {}", header.len(), row.len()) });
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column {name:?}") })
    }

    /// Numeric column; empty fields and `nan` read as NaN.
    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = r[c].as_str();
                if v.is_empty() {
                    return Ok(f64::NAN);
                }
                v.parse::<f64>().map_err(|_| Error::Parse { line: i + 2, msg: format!("bad number {v:?}") })
            })
            .collect()
    }
}

/// Binary 8-bit grayscale PGM (P5), rows top to bottom.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    f.flush()?;
    Ok(())
}

/// Read back a P5 file written by `write_pgm`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse { line: 1, msg: "truncated PGM header".into() });
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Parse { line: 1, msg: "not an 8-bit P5 image".into() });
    }
    let w: usize = fields[1].parse().map_err(|_| Error::Parse { line: 2, msg: "bad width".into() })?;
    let h: usize = fields[2].parse().map_err(|_| Error::Parse { line: 2, msg: "bad height".into() })?;
    let data = bytes.get(pos..pos + w * h).ok_or(Error::Parse { line: 3, msg: "truncated PGM data".into() })?;
    Ok((w, h, data.to_vec()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Serialize a float as a JSON number with 12 significant digits; non-finite
/// values become `null`.
pub fn json12(x: f64) -> serde_json::Value {
    if x.is_finite() {
        let s = fmt12(x);
        serde_json::from_str(&s).unwrap_or(serde_json::Value::Null)
    } else {
        serde_json::Value::Null
    }
}

pub fn json_complex(z: C64) -> serde_json::Value {
    serde_json::Value::Array(vec![json12(z.re), json12(z.im)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(std::f64::consts::LN_2), "0.69314718056");
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(-2.5), "-2.5");
        assert_eq!(fmt12(1.0e-9), "1e-9");
        assert_eq!(fmt12(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt12(0.0001234), "0.0001234");
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("-0.75,0").unwrap(), C64::new(-0.75, 0.0));
        assert_eq!(parse_complex(" 1e-3 , -2 ").unwrap(), C64::new(1e-3, -2.0));
        assert!(parse_complex("a,b").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![fmt12(1.5), String::new()]);
        let back = Table::parse(&t.to_csv_string()).unwrap();
        assert_eq!(back, t);
        let b = back.f64_column("b").unwrap();
        assert!(b[0].is_nan());
    }

    #[test]
    fn pgm_round_trip() {
        let dir = std::env::temp_dir().join(format!("biflab-pgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.pgm");
        let px: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        write_pgm(&p, 4, 3, &px).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), (4, 3, px));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn fmt12_keeps_twelve_digits(x in -1e20f64..1e20) {
            let y: f64 = fmt12(x).parse().unwrap();
            prop_assert!((x - y).abs() <= 1e-11 * x.abs());
        }
    }
}
