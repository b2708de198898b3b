//! Plain-text series for external plotting: one file per `y` column, two
//! whitespace-separated columns under a `# x y` comment line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::results::ResultRow;
use crate::error::{Error, Result};

pub fn series_path(dir: &Path, x: &str, y: &str) -> PathBuf {
    dir.join(format!("{y}_vs_{x}.dat"))
}

/// Writes one file per `y` column, rows sorted by `x`.
pub fn emit_plotdata(rows: &[ResultRow], x: &str, ys: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(ys.len());
    for y in ys {
        let mut pts = Vec::with_capacity(rows.len());
        for r in rows {
            let xv = r
                .get(x)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{x}`")))?;
            let yv = r
                .get(y)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{y}`")))?;
            pts.push((xv, yv));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut text = format!("# {x} {y}\n");
        for (a, b) in pts {
            // shortest digits that parse back to the same bits
            writeln!(text, "{a:e} {b:e}").expect("write to string");
        }
        let path = series_path(dir, x, y);
        std::fs::write(&path, text)?;
        files.push(path);
    }
    Ok(files)
}

/// Reads a series back: column names and points.
pub fn read_series(path: &Path) -> Result<((String, String), Vec<(f64, f64)>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Results(format!("{}: missing header", path.display())))?;
    let mut names = head.split_whitespace().map(str::to_owned);
    let (Some(xn), Some(yn)) = (names.next(), names.next()) else {
        return Err(Error::Results(format!("{}: malformed header", path.display())));
    };
    let mut pts = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => pts.push((a, b)),
            _ => return Err(Error::Results(format!("{}: bad line {}", path.display(), i + 2))),
        }
    }
    Ok(((xn, yn), pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plotdata(&[], "strength", &["gap".into()], dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), "# strength gap\n");
        let (names, pts) = read_series(&files[0]).unwrap();
        assert_eq!(names, ("strength".into(), "gap".into()));
        assert!(pts.is_empty());
    }

    #[test]
    fn roundtrip_bits() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = [1.0 / 3.0, 0.1, 7e-300]
            .iter()
            .enumerate()
            .map(|(i, &x)| ResultRow {
                index: i,
                strength: x,
                gap: x.sqrt() * std::f64::consts::PI,
                certificate: f64::NAN,
                ..Default::default()
            })
            .collect();
        let files = emit_plotdata(&rows, "strength", &["gap".into(), "certificate".into()], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let (_, pts) = read_series(&files[0]).unwrap();
        let mut expect: Vec<(f64, f64)> = rows.iter().map(|r| (r.strength, r.gap)).collect();
        expect.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (a, b) in pts.iter().zip(&expect) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        let (_, pts) = read_series(&files[1]).unwrap();
        assert!(pts.iter().all(|p| p.1.is_nan()));
        assert!(emit_plotdata(&rows, "strength", &["bogus".into()], dir.path()).is_err());
    }
}
