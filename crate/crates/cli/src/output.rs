//! JSON and CSV emission with atomic file replacement.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::CliError;

/// Wraps a serde_json formatter so that every float is written with 17
/// significant digits.
pub struct Precise<F>(pub F);

impl<F: Formatter> Formatter for Precise<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON followed by a newline. Non-finite numbers become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Serialize(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// One JSON value on one line, newline-terminated.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(CompactFormatter));
    value.serialize(&mut ser).map_err(|e| CliError::Serialize(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// CSV with a header taken from the field names of `R`.
pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Serialize(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))
}

fn io_error(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_error(&target, e));
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: Option<f64>,
    }

    #[test]
    fn seventeen_digits() {
        let s = String::from_utf8(to_json_line(&[std::f64::consts::PI, 0.1, -2.5e-300]).unwrap()).unwrap();
        assert_eq!(s, "[3.1415926535897931e0,1.0000000000000001e-1,-2.5000000000000000e-300]\n");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![std::f64::consts::PI, 0.1, -2.5e-300]);
    }

    #[test]
    fn non_finite_is_null() {
        let s = String::from_utf8(to_json_line(&[f64::NAN, f64::INFINITY]).unwrap()).unwrap();
        assert_eq!(s, "[null,null]\n");
    }

    #[test]
    fn integers_untouched_and_pretty() {
        let s = String::from_utf8(to_json(&serde_json::json!({"n": 3, "v": [1.5]})).unwrap()).unwrap();
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("1.5000000000000000e0"));
        assert!(s.contains('\n'));
    }

    #[test]
    fn csv_header_and_rows() {
        let s = String::from_utf8(to_csv(&[Row { x: 1.0, y: None }, Row { x: 0.5, y: Some(2.0) }]).unwrap()).unwrap();
        assert_eq!(s, "x,y\n1.0,\n0.5,2.0\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
