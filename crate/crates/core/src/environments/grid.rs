//! Gridded fields read from ESRI-ASCII files and interpolated by a bicubic tensor spline.

use std::path::Path;

use nalgebra::{DMatrix, LU, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of an ESRI-ASCII grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    /// Native coordinate of the first column's node.
    pub x0: f64,
    /// Native coordinate of the bottom row's node.
    pub y0: f64,
    pub cellsize: f64,
}

/// Lattice values and the bicubic interpolant built on them.
///
/// The lattice is mapped onto the unit square so that the first and last nodes of each
/// axis sit on the boundary.
#[derive(Debug, Clone)]
pub struct GridField {
    pub header: GridHeader,
    /// `values[j][i]` at `u = i/(ncols-1)`, `v = j/(nrows-1)` (row 0 is the bottom).
    pub values: Vec<Vec<f64>>,
    fx: Vec<Vec<f64>>,
    fy: Vec<Vec<f64>>,
    fxy: Vec<Vec<f64>>,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl GridField {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses ESRI-ASCII text: `ncols`, `nrows`, `xllcorner|xllcenter`,
    /// `yllcorner|yllcenter`, `cellsize`, optional `nodata_value`, then `nrows` lines of
    /// `ncols` numbers, northernmost row first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut centered = (false, false);
        let mut cellsize = None;
        let mut nodata: Option<f64> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut first_data_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let first = line.split_whitespace().next().unwrap_or("");
            if rows.is_empty() && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let mut parts = line.split_whitespace();
                let key = parts.next().unwrap().to_ascii_lowercase();
                let val = parts
                    .next()
                    .ok_or_else(|| parse_err(line_no, line.len() + 1, format!("missing value for `{key}`")))?;
                let col = raw.find(val).map_or(1, |c| c + 1);
                let num: f64 = val
                    .parse()
                    .map_err(|_| parse_err(line_no, col, format!("`{val}` is not a number")))?;
                let count = || -> Result<usize> {
                    if num >= 1.0 && num.fract() == 0.0 {
                        Ok(num as usize)
                    } else {
                        Err(parse_err(line_no, col, format!("`{key}` must be a positive integer")))
                    }
                };
                match key.as_str() {
                    "ncols" => ncols = Some(count()?),
                    "nrows" => nrows = Some(count()?),
                    "xllcorner" => xll = Some(num),
                    "xllcenter" => {
                        xll = Some(num);
                        centered.0 = true;
                    }
                    "yllcorner" => yll = Some(num),
                    "yllcenter" => {
                        yll = Some(num);
                        centered.1 = true;
                    }
                    "cellsize" => cellsize = Some(num),
                    "nodata_value" => nodata = Some(num),
                    _ => return Err(parse_err(line_no, 1, format!("unknown header key `{key}`"))),
                }
                continue;
            }
            if rows.is_empty() {
                first_data_line = line_no;
            }
            let ncols = ncols.ok_or_else(|| parse_err(line_no, 1, "data before `ncols` header"))?;
            let mut row = Vec::with_capacity(ncols);
            for (k, tok) in line.split_whitespace().enumerate() {
                let col = raw.find(tok).map_or(1, |c| c + 1);
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(line_no, col, format!("value {} (`{tok}`) is not a number", k + 1)))?;
                if nodata == Some(v) || !v.is_finite() {
                    return Err(parse_err(line_no, col, "missing or non-finite values are not supported"));
                }
                row.push(v);
            }
            if row.len() != ncols {
                return Err(parse_err(
                    line_no,
                    raw.len().max(1),
                    format!("expected {ncols} values, found {}", row.len()),
                ));
            }
            rows.push(row);
        }

        let last_line = text.lines().count().max(1);
        let missing = |k: &str| parse_err(last_line, 1, format!("header is missing `{k}`"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let yll = yll.ok_or_else(|| missing("yllcorner"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        if !(cellsize > 0.0) {
            return Err(parse_err(last_line, 1, "cellsize must be positive"));
        }
        if rows.len() != nrows {
            return Err(parse_err(
                first_data_line.max(1) + rows.len(),
                1,
                format!("expected {nrows} data rows, found {}", rows.len()),
            ));
        }
        if ncols < 4 || nrows < 4 {
            return Err(parse_err(1, 1, format!("lattice must be at least 4×4, got {ncols}×{nrows}")));
        }
        rows.reverse();
        let header = GridHeader {
            ncols,
            nrows,
            x0: if centered.0 { xll } else { xll + 0.5 * cellsize },
            y0: if centered.1 { yll } else { yll + 0.5 * cellsize },
            cellsize,
        };
        Ok(Self::from_lattice(header, rows))
    }

    /// Builds the interpolant from bottom-first rows.
    pub fn from_lattice(header: GridHeader, values: Vec<Vec<f64>>) -> Self {
        let (nx, ny) = (header.ncols, header.nrows);
        assert!(nx >= 4 && ny >= 4, "lattice must be at least 4×4");
        assert!(values.len() == ny && values.iter().all(|r| r.len() == nx));
        let hx = 1.0 / (nx - 1) as f64;
        let hy = 1.0 / (ny - 1) as f64;
        let sx = SlopeSolver::new(nx, hx);
        let sy = SlopeSolver::new(ny, hy);

        let f = DMatrix::from_fn(ny, nx, |j, i| values[j][i]);
        // d/du along rows: each row of f is a spline in u
        let fx = sx.slopes(&f.transpose()).transpose();
        let fy = sy.slopes(&f);
        let fxy = sy.slopes(&fx);
        let to_vec = |m: &DMatrix<f64>| (0..ny).map(|j| (0..nx).map(|i| m[(j, i)]).collect()).collect();
        Self {
            fx: to_vec(&fx),
            fy: to_vec(&fy),
            fxy: to_vec(&fxy),
            header,
            values,
        }
    }

    /// Native extent `[[x_lo, x_hi], [y_lo, y_hi]]` of the lattice nodes.
    pub fn native_domain(&self) -> [[f64; 2]; 2] {
        let h = &self.header;
        [
            [h.x0, h.x0 + (h.ncols - 1) as f64 * h.cellsize],
            [h.y0, h.y0 + (h.nrows - 1) as f64 * h.cellsize],
        ]
    }

    /// Interpolated value at a unit-square point (clamped to the square).
    pub fn eval(&self, z: [f64; 2]) -> f64 {
        let (nx, ny) = (self.header.ncols, self.header.nrows);
        let locate = |u: f64, n: usize| -> (usize, f64) {
            let pos = u.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = (pos.floor() as usize).min(n - 2);
            (i, pos - i as f64)
        };
        let (i, p) = locate(z[0], nx);
        let (j, q) = locate(z[1], ny);
        let hx = 1.0 / (nx - 1) as f64;
        let hy = 1.0 / (ny - 1) as f64;
        let h0 = |s: f64| [2.0 * s.powi(3) - 3.0 * s * s + 1.0, -2.0 * s.powi(3) + 3.0 * s * s];
        let h1 = |s: f64| [s.powi(3) - 2.0 * s * s + s, s.powi(3) - s * s];
        let (a0, a1) = (h0(p), h1(p));
        let (b0, b1) = (h0(q), h1(q));
        let mut acc = 0.0;
        for (di, (&va, &sa)) in a0.iter().zip(&a1).enumerate() {
            for (dj, (&vb, &sb)) in b0.iter().zip(&b1).enumerate() {
                let (ii, jj) = (i + di, j + dj);
                acc += self.values[jj][ii] * va * vb
                    + hx * self.fx[jj][ii] * sa * vb
                    + hy * self.fy[jj][ii] * va * sb
                    + hx * hy * self.fxy[jj][ii] * sa * sb;
            }
        }
        acc
    }

    /// Lattice node with the smallest value, in unit coordinates.
    pub fn lattice_argmin(&self) -> ([f64; 2], f64) {
        let (nx, ny) = (self.header.ncols, self.header.nrows);
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for (j, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if *v < best.1 {
                    best = ([i as f64 / (nx - 1) as f64, j as f64 / (ny - 1) as f64], *v);
                }
            }
        }
        best
    }

    /// Renders the lattice as ESRI-ASCII text.
    pub fn to_esri_ascii(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcenter {}\nyllcenter {}\ncellsize {}\n",
            h.ncols, h.nrows, h.x0, h.y0, h.cellsize
        );
        for row in self.values.iter().rev() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Node slopes of the not-a-knot cubic spline on a uniform grid, for many columns at once.
struct SlopeSolver {
    lu: LU<f64, Dyn, Dyn>,
    n: usize,
    h: f64,
}

impl SlopeSolver {
    fn new(n: usize, h: f64) -> Self {
        let mut a = DMatrix::zeros(n, n);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 2.0;
        for i in 1..n - 1 {
            a[(i, i - 1)] = 1.0;
            a[(i, i)] = 4.0;
            a[(i, i + 1)] = 1.0;
        }
        a[(n - 1, n - 2)] = 2.0;
        a[(n - 1, n - 1)] = 1.0;
        Self { lu: a.lu(), n, h }
    }

    /// `y` has one spline per column (length `n` down the rows).
    fn slopes(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let h = self.h;
        let d = |r: usize, c: usize| (y[(r + 1, c)] - y[(r, c)]) / h;
        let rhs = DMatrix::from_fn(n, y.ncols(), |r, c| {
            if r == 0 {
                0.5 * (5.0 * d(0, c) + d(1, c))
            } else if r == n - 1 {
                0.5 * (d(n - 3, c) + 5.0 * d(n - 2, c))
            } else {
                3.0 * (y[(r + 1, c)] - y[(r - 1, c)]) / h
            }
        });
        self.lu.solve(&rhs).expect("spline system is nonsingular")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> GridField {
        let values = (0..ny)
            .map(|j| {
                (0..nx)
                    .map(|i| f(i as f64 / (nx - 1) as f64, j as f64 / (ny - 1) as f64))
                    .collect()
            })
            .collect();
        let header = GridHeader {
            ncols: nx,
            nrows: ny,
            x0: 0.0,
            y0: 0.0,
            cellsize: 1.0,
        };
        GridField::from_lattice(header, values)
    }

    #[test]
    fn reproduces_bicubic_polynomials() {
        let f = |u: f64, v: f64| 1.0 + u - 2.0 * v + u * v * v + 3.0 * u.powi(3) * v.powi(2) - v.powi(3) * u.powi(3);
        let g = lattice(7, 5, f);
        for k in 0..=50 {
            let u = k as f64 / 50.0;
            let v = (k as f64 * 0.37).fract();
            assert!((g.eval([u, v]) - f(u, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolates_nodes() {
        let g = lattice(6, 8, |u, v| (4.0 * u).sin() * (3.0 * v).exp());
        for j in 0..8 {
            for i in 0..6 {
                let z = [i as f64 / 5.0, j as f64 / 7.0];
                assert!((g.eval(z) - g.values[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parses_and_round_trips() {
        let text = "ncols 4\nnrows 4\nxllcorner 10\nyllcorner 20\ncellsize 2\n\
                    1 2 3 4\n5 6 7 8\n9 10 11 12\n13 14 15 16\n";
        let g = GridField::parse(text).unwrap();
        // last text row is the bottom of the lattice
        assert_eq!(g.values[0], vec![13.0, 14.0, 15.0, 16.0]);
        assert_eq!(g.native_domain(), [[11.0, 17.0], [21.0, 27.0]]);
        let again = GridField::parse(&g.to_esri_ascii()).unwrap();
        assert_eq!(again.values, g.values);
        assert_eq!(again.header, g.header);
    }

    #[test]
    fn parse_errors_carry_location() {
        let bad = "ncols 4\nnrows 4\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4\n5 6 x 8\n";
        match GridField::parse(bad) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 5);
            }
            other => panic!("{other:?}"),
        }
        let short = "ncols 4\nnrows 4\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4\n5 6 7\n";
        assert!(matches!(GridField::parse(short), Err(Error::Parse { line: 7, .. })));
        let small = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5 6\n7 8 9\n";
        assert!(GridField::parse(small).is_err());
    }
}
