//! Plain-text matrix format.
//!
//! Each matrix is written row-major, one row per line, entries separated by
//! whitespace. Consecutive matrices are separated by one or more blank lines.
//! Lines starting with `#` are comments. A plant file holds A, B and C in that
//! order.

use nalgebra::DMatrix;

use super::ContinuousPlant;
use crate::error::{Error, Result};

/// Parses every matrix in `text`, in order.
pub fn parse_matrices(text: &str) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first_line = 0;
    let flush = |rows: &mut Vec<Vec<f64>>, first_line: usize, out: &mut Vec<DMatrix<f64>>| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let ncols = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::InvalidArgument(format!(
                "line {}: row has {} entries, expected {ncols}",
                first_line + i,
                r.len()
            )));
        }
        let nrows = rows.len();
        out.push(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]));
        rows.clear();
        Ok(())
    };
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            flush(&mut rows, first_line, &mut out)?;
            continue;
        }
        if rows.is_empty() {
            first_line = lineno;
        }
        let row = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("line {lineno}: cannot parse `{tok}` as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    flush(&mut rows, first_line, &mut out)?;
    Ok(out)
}

/// Parses a single matrix; more than one block is an error.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut ms = parse_matrices(text)?;
    match ms.len() {
        1 => Ok(ms.remove(0)),
        k => Err(Error::InvalidArgument(format!("expected one matrix, found {k}"))),
    }
}

/// Parses A, B, C from a plant file.
pub fn parse_plant(text: &str) -> Result<ContinuousPlant> {
    let ms = parse_matrices(text)?;
    let [a, b, c]: [DMatrix<f64>; 3] = ms.try_into().map_err(|v: Vec<_>| {
        Error::InvalidArgument(format!("plant file must hold A, B, C; found {} matrices", v.len()))
    })?;
    ContinuousPlant::new(a, b, c)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

pub fn format_plant(plant: &ContinuousPlant) -> String {
    [plant.a(), plant.b(), plant.c()].iter().map(|m| format_matrix(m)).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;
    use proptest::prelude::*;

    #[test]
    fn parses_plant_with_comments() {
        let text = "# A\n0 1\n-2 -3\n\n# B\n0\n1\n\n1 0\n";
        let p = parse_plant(text).unwrap();
        assert_eq!(p.a(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]));
        assert_eq!(p.b().shape(), (2, 1));
        assert_eq!(p.c().shape(), (1, 2));
    }

    #[test]
    fn ragged_row_names_the_line() {
        let err = parse_matrices("1 2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn bad_token_names_the_line() {
        let err = parse_matrices("1 2\n\n3 x\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("`x`"), "{err}");
    }

    #[test]
    fn wrong_matrix_count() {
        assert!(parse_plant("1\n\n1\n").is_err());
    }

    #[test]
    fn benchmark_round_trip() {
        let p = benchmark::aircraft_plant();
        assert_eq!(parse_plant(&format_plant(&p)).unwrap(), p);
    }

    proptest! {
        #[test]
        fn round_trip(rows in 1usize..5, cols in 1usize..5, seed in proptest::collection::vec(-1e6f64..1e6, 25)) {
            let m = DMatrix::from_fn(rows, cols, |i, j| seed[i * 5 + j]);
            prop_assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        }
    }
}
