use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{anyhow, Context};
use serde::Serialize;

/// Write through a temporary file in the target directory and rename it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| anyhow!("cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

static STDOUT_DATA: AtomicBool = AtomicBool::new(false);

/// Print command output to stdout; the summary line then goes to stderr.
pub fn print_data(s: &str) {
    STDOUT_DATA.store(true, Ordering::Relaxed);
    print!("{s}");
}

pub fn stdout_has_data() -> bool {
    STDOUT_DATA.load(Ordering::Relaxed)
}

/// Write JSON to `path`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let s = to_json(value)?;
    match path {
        Some(p) => write_atomic(p, s.as_bytes()),
        None => {
            print_data(&s);
            Ok(())
        }
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y] = parts[..] else {
        return Err(format!("expected x,y but got {s:?}"));
    };
    let x: f64 = x.parse().map_err(|e| format!("{x:?}: {e}"))?;
    let y: f64 = y.parse().map_err(|e| format!("{y:?}: {e}"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(format!("non-finite coordinate in {s:?}"));
    }
    Ok([x, y])
}

/// Twelve significant digits with trailing zeros dropped, for summaries.
pub fn short(v: f64) -> String {
    let s = abreu_core::io::format_sig12(v);
    match s.split_once('e') {
        Some((m, e)) => format!("{}e{e}", trim_zeros(m)),
        None => trim_zeros(&s).to_string(),
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_and_numbers() {
        assert_eq!(parse_point("0.5, 0.25"), Ok([0.5, 0.25]));
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("nan,0").is_err());
        assert_eq!(short(4.0), "4");
        assert_eq!(short(6.000000000000001), "6");
        assert_eq!(short(-0.125), "-0.125");
        assert_eq!(short(1.5e-9), "1.5e-9");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert!(write_atomic(&dir.path().join("missing/a.txt"), b"x").is_err());
    }
}
