//! Grid dump format shared by ensembles and mask snapshots.
//!
//! ```text
//! # key = value          (any number of header lines)
//! realization,row,col,re,im
//! 0,0,0,1.25,-0.5
//! ...
//! ```
//!
//! Values are written in shortest round-trip form, so a dump read back gives
//! bit-identical grids. Real-valued data (mask magnitudes) uses `im = 0`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::config::header_lines;
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

type Cell = (usize, usize, Complex64);

pub const COLUMNS: &str = "realization,row,col,re,im";

/// Writes square grids; `ids` label each grid (defaults to its position).
pub fn write_grids(header: &[(String, String)], grids: &[ComplexGrid], ids: Option<&[usize]>) -> String {
    let mut out = header_lines(header);
    out.push_str(COLUMNS);
    out.push('\n');
    for (i, g) in grids.iter().enumerate() {
        let id = ids.map_or(i, |ids| ids[i]);
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                let v = g[(r, c)];
                writeln!(out, "{id},{r},{c},{},{}", v.re, v.im).expect("write to string");
            }
        }
    }
    out
}

/// Parses a dump into `(id, grid)` pairs in file order.
pub fn read_grids(text: &str) -> Result<Vec<(usize, ComplexGrid)>> {
    let mut cells: Vec<(usize, Vec<Cell>)> = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let bad = |msg: String| Error::Config { line: i + 1, msg };
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !seen_columns {
            if t != COLUMNS {
                return Err(bad(format!("expected column line `{COLUMNS}`")));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
        let (id, r, c) = (int(f[0])?, int(f[1])?, int(f[2])?);
        let v = Complex64::new(num(f[3])?, num(f[4])?);
        match cells.last_mut() {
            Some((last, v_cells)) if *last == id => v_cells.push((r, c, v)),
            _ => cells.push((id, vec![(r, c, v)])),
        }
    }
    cells
        .into_iter()
        .map(|(id, entries)| {
            let n = (entries.len() as f64).sqrt().round() as usize;
            if n * n != entries.len() {
                return Err(crate::error::invalid(format!("grid {id} has {} cells, not a square", entries.len())));
            }
            let mut g = ComplexGrid::zeros(n);
            let mut filled = vec![false; n * n];
            for (r, c, v) in entries {
                if r >= n || c >= n || filled[r * n + c] {
                    return Err(crate::error::invalid(format!("grid {id}: bad or repeated cell ({r}, {c})")));
                }
                filled[r * n + c] = true;
                g[(r, c)] = v;
            }
            Ok((id, g))
        })
        .collect()
}

/// Real amplitudes as a grid (`im = 0`), for mask snapshots.
pub fn amplitude_grid(amps: &[f64]) -> Result<ComplexGrid> {
    let n = (amps.len() as f64).sqrt().round() as usize;
    ComplexGrid::from_vec(n, n, amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream, Domain};

    #[test]
    fn round_trip_is_exact() {
        let mut rng = stream(3, Domain::MonteCarlo, 0);
        let grids: Vec<ComplexGrid> = (0..3)
            .map(|_| ComplexGrid::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0)))
            .collect();
        let text = write_grids(&[("n".into(), "4".into())], &grids, Some(&[5, 6, 9]));
        assert!(text.starts_with("# n = 4\nrealization,row,col,re,im\n5,0,0,"));
        let back = read_grids(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].0, 9);
        for ((_, g), want) in back.iter().zip(&grids) {
            assert_eq!(g, want);
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_grids("0,0,0,1,0\n").is_err());
        let err = read_grids("realization,row,col,re,im\n0,0,0,1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        assert!(read_grids("realization,row,col,re,im\n0,0,0,1,0\n0,0,1,1,0\n").is_err());
    }
}
