//! Text output with every float written to 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// `x` with 17 significant digits; enough to round-trip any `f64`.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON formatter that writes floats as [`f17`] does, optionally indented.
pub struct Sig17<'a> {
    pretty: Option<PrettyFormatter<'a>>,
}

impl Sig17<'_> {
    pub fn compact() -> Self {
        Sig17 { pretty: None }
    }

    pub fn pretty() -> Self {
        Sig17 {
            pretty: Some(PrettyFormatter::new()),
        }
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                match &mut self.pretty {
                    Some(p) => p.$name(w $(, $arg)*),
                    None => serde_json::ser::CompactFormatter.$name(w $(, $arg)*),
                }
            }
        )*
    };
}

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{v:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T, pretty: bool) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let fmt = if pretty { Sig17::pretty() } else { Sig17::compact() };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser)?;
    if pretty {
        out.push(b'\n');
    }
    Ok(out)
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    res.map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let bytes = to_json_bytes(value, true).map_err(|e| CliError::io(path, io::Error::other(e)))?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(f17(0.1), "1.0000000000000001e-1");
        assert_eq!(f17(-0.60178), "-6.0177999999999998e-1");
        assert_eq!(f17(0.0), "0.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(f17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_round_trip() {
        let v = vec![0.1, -1.0 / 3.0, 1e-310, 12345.678];
        let text = to_json_bytes(&v, false).unwrap();
        assert_eq!(
            std::str::from_utf8(&text).unwrap(),
            "[1.0000000000000001e-1,-3.3333333333333331e-1,9.9999999999999694e-311,1.2345678000000000e4]"
        );
        let back: Vec<f64> = serde_json::from_slice(&text).unwrap();
        assert_eq!(back, v);
        let pretty = to_json_bytes(&serde_json::json!({"a": [1.5]}), true).unwrap();
        assert!(std::str::from_utf8(&pretty).unwrap().contains("\n  \"a\""));
    }
}
