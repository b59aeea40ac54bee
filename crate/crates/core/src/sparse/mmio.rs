//! MatrixMarket coordinate text, for dumping small matrices to other tools.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::crs::CrsMatrix;

/// Writes `a` as a `coordinate real general` matrix using 1-based global
/// row and column ids. `col_global` maps local columns to global ids.
pub fn write_matrix_market<W: Write>(
    mut w: W,
    a: &CrsMatrix,
    col_global: &[usize],
    global_size: usize,
) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{global_size} {global_size} {}", a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", a.rows[i] + 1, col_global[c as usize] + 1, v)?;
        }
    }
    Ok(())
}

/// Parsed coordinate matrix: size and 0-based `(row, col, value)` triplets.
/// Symmetric files are expanded to both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinates {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<Coordinates> {
    let err = |msg: String| Error::MatrixMarket(msg);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| err("empty input".into()))?
        .map_err(|e| err(e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(format!("bad header: {header}")));
    }
    if tokens[2] != "coordinate" || (tokens[3] != "real" && tokens[3] != "integer") {
        return Err(err(format!("unsupported format: {header}")));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(format!("unsupported symmetry: {other}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for line in lines {
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if f.len() != 3 {
                    return Err(err(format!("bad size line: {line}")));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s}: {e}")));
                let s = (p(f[0])?, p(f[1])?, p(f[2])?);
                entries.reserve(s.2);
                size = Some(s);
            }
            Some((nr, nc, _)) => {
                if f.len() != 3 {
                    return Err(err(format!("bad entry: {line}")));
                }
                let i: usize = f[0].parse().map_err(|_| err(format!("bad row in: {line}")))?;
                let j: usize = f[1].parse().map_err(|_| err(format!("bad column in: {line}")))?;
                let v: f64 = f[2].parse().map_err(|_| err(format!("bad value in: {line}")))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(err(format!("index out of range: {line}")));
                }
                entries.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    entries.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| err("missing size line".into()))?;
    let stored = if symmetric {
        entries.iter().filter(|e| e.0 >= e.1).count()
    } else {
        entries.len()
    };
    if stored != nnz {
        return Err(err(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(Coordinates { nrows, ncols, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let a = CrsMatrix::from_rows(3, &[vec![(0, 4.0), (2, -0.125)], vec![], vec![(1, 1e-17)]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &a, &[0, 1, 2], 3).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 3\n"));
        let c = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(c.entries, vec![(0, 0, 4.0), (0, 2, -0.125), (2, 1, 1e-17)]);
    }

    #[test]
    fn symmetric_is_expanded() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1\n";
        let c = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(c.entries.len(), 3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_matrix_market("hello".as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(read_matrix_market(oob.as_bytes()).is_err());
    }
}
