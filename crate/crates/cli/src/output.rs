use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use std::io::{self, Write};

/// Pretty JSON with every float written to 17 significant digits.
pub struct Canonical<'a> {
    pretty: PrettyFormatter<'a>,
}

impl Canonical<'_> {
    pub fn new() -> Self {
        Canonical {
            pretty: PrettyFormatter::with_indent(b"  "),
        }
    }
}

fn write_float<W: ?Sized + Write>(w: &mut W, x: f64) -> io::Result<()> {
    if x.is_finite() {
        write!(w, "{x:.16e}")
    } else {
        w.write_all(b"null")
    }
}

impl Formatter for Canonical<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, x: f64) -> io::Result<()> {
        write_float(w, x)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, x: f32) -> io::Result<()> {
        write_float(w, x as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical::new());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Provenance wrapper written around every result.
#[derive(Serialize)]
pub struct Artifact<'a, C: Serialize, R: Serialize> {
    pub sandlab_version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub seed: Option<u64>,
    /// `null` under `--reproducible`.
    pub wall_time_s: Option<f64>,
    pub result: R,
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, rows);
            }
        }
        Value::Array(items) => {
            for (k, x) in items.iter().enumerate() {
                flatten(&key(&k.to_string()), x, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// `key,value` rows of every scalar in the artifact (dotted paths; shortest float form).
pub fn to_csv<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    let mut rows = Vec::new();
    flatten("", &v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, x) in rows {
        w.write_record([k, x])?;
    }
    Ok(w.into_inner()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = String::from_utf8(to_canonical_json(&vec![0.1, -2.5e-300, 3.0]).unwrap()).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("3.0000000000000000e0"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.1, -2.5e-300, 3.0]);
    }

    #[test]
    fn non_finite_is_null() {
        let s = String::from_utf8(to_canonical_json(&f64::NAN).unwrap()).unwrap();
        assert_eq!(s.trim(), "null");
    }

    #[test]
    fn csv_flattens_paths() {
        #[derive(Serialize)]
        struct T {
            a: Vec<u32>,
            b: Option<f64>,
        }
        let s = String::from_utf8(to_csv(&T { a: vec![4, 5], b: None }).unwrap()).unwrap();
        assert_eq!(s, "key,value\na.0,4\na.1,5\nb,\n");
    }
}
