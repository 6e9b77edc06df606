//! Matrix arguments: `identity`, `diag:v1,v2,…`, `scaled:c`, a bare number
//! `c` (same as `scaled:c`), or a path to a CSV file.
//!
//! A CSV file holds either the full `r × r` matrix, one row per line, or a
//! single line with the `r(r+1)/2` lower-triangle entries in row-major
//! order (`m11, m21, m22, m31, …`).

use std::path::Path;

use anyhow::{bail, Context};
use mgig_core::spd::{packed_len, SpdMatrix, SymMatrix};

pub fn parse_matrix(spec: &str, dim: usize) -> anyhow::Result<SpdMatrix> {
    let spec = spec.trim();
    if spec == "identity" {
        return Ok(SpdMatrix::identity(dim));
    }
    if let Some(rest) = spec.strip_prefix("diag:") {
        let diag = numbers(rest)?;
        if diag.len() != dim {
            bail!("diag has {} entries, dimension is {dim}", diag.len());
        }
        return Ok(SpdMatrix::from_diag(&diag)?);
    }
    let scale = spec.strip_prefix("scaled:").unwrap_or(spec);
    if let Ok(c) = scale.parse::<f64>() {
        return Ok(SpdMatrix::scaled_identity(dim, c)?);
    }
    if spec.starts_with("scaled:") {
        bail!("bad scale in {spec:?}");
    }
    from_csv(Path::new(spec), dim)
}

fn numbers(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("not a number: {s:?}")))
        .collect()
}

fn from_csv(path: &Path, dim: usize) -> anyhow::Result<SpdMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading matrix file {}", path.display()))?;
    let mut rows = vec![];
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().with_context(|| format!("not a number: {s:?}")))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let m = if rows.len() == 1 && rows[0].len() == packed_len(dim) {
        SymMatrix::from_packed(dim, rows.remove(0))?
    } else if rows.len() == dim && rows.iter().all(|r| r.len() == dim) {
        SymMatrix::from_row_major(dim, &rows.concat())?
    } else {
        bail!("{} does not hold a {dim}×{dim} symmetric matrix", path.display());
    };
    Ok(SpdMatrix::new(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn shorthands() {
        assert_eq!(parse_matrix("identity", 3).unwrap(), SpdMatrix::identity(3));
        assert_eq!(
            parse_matrix("diag:1,2", 2).unwrap(),
            SpdMatrix::from_diag(&[1.0, 2.0]).unwrap()
        );
        assert_eq!(
            parse_matrix("scaled:2.5", 2).unwrap(),
            SpdMatrix::scaled_identity(2, 2.5).unwrap()
        );
        assert_eq!(parse_matrix("0.5", 1).unwrap(), SpdMatrix::from_diag(&[0.5]).unwrap());
        assert!(parse_matrix("diag:1,2,3", 2).is_err());
        assert!(parse_matrix("scaled:-1", 2).is_err());
        assert!(parse_matrix("scaled:x", 2).is_err());
    }

    #[test]
    fn csv_full_and_packed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "2, 1\n1, 3").unwrap();
        let full = parse_matrix(f.path().to_str().unwrap(), 2).unwrap();
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "# lower triangle\n2,1,3").unwrap();
        let packed = parse_matrix(g.path().to_str().unwrap(), 2).unwrap();
        assert_eq!(full, packed);
        assert_eq!(full.base().get(1, 0), 1.0);
        // not positive definite
        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "1,2\n2,1").unwrap();
        assert!(parse_matrix(h.path().to_str().unwrap(), 2).is_err());
    }
}
