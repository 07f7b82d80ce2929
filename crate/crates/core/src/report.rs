//! Serialization helpers shared by the library and the command line.
//!
//! JSON floats use the shortest representation that round-trips exactly;
//! CSV floats use 17 significant digits. Neither depends on the platform.

use std::fmt::Write as _;

/// Format a float for CSV with 17 significant digits.
pub fn csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Render a numeric table as CSV with a header row and LF line endings.
pub fn csv_table<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    let names: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", csv_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Serde adapter that writes non-finite floats as the strings `"inf"`,
/// `"-inf"` and `"nan"` instead of JSON `null`.
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::csv_float(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for v in [1.0 / 7.0, 0.1, -2.5e-300, 1e300, 0.0] {
            let s = csv_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(csv_float(1.0 / 7.0), "1.4285714285714285e-1");
    }

    #[test]
    fn table_layout() {
        let t = csv_table(&["t", "x_1"], vec![vec![0.0, 2.0]]);
        assert_eq!(t, "t,x_1\n0.0000000000000000e0,2.0000000000000000e0\n");
    }
}
