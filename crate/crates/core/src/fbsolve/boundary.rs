//! Free boundary `b(r) = sup{z : U(r, z) > 1}` from a solved field.

use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::grid::{bracket, fmt17, parse_floats, ScalarField};
use crate::{Error, Real, Result};

/// Sampled free boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary<T> {
    pub r: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> Boundary<T> {
    pub fn new(r: Vec<T>, b: Vec<T>) -> Result<Self> {
        if r.len() != b.len() || r.len() < 2 {
            return Err(Error::Config(format!(
                "boundary needs matching r and b columns with at least 2 rows (got {} and {})",
                r.len(),
                b.len()
            )));
        }
        if let Some(i) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!("boundary r column not strictly increasing at row {}", i + 1)));
        }
        if r.iter().chain(&b).any(|v| v.is_nan()) {
            return Err(Error::Config("boundary contains NaN".into()));
        }
        Ok(Self { r, b })
    }

    /// Linear interpolation in `r`, constant beyond either end.
    pub fn eval(&self, r: T) -> T {
        let (i, w) = bracket(&self.r, r);
        let (lo, hi) = (self.b[i], self.b[i + 1]);
        if w == T::zero() {
            lo
        } else if w == T::one() {
            hi
        } else {
            lo + w * (hi - lo)
        }
    }

    /// Largest increase `b(r_{i+1}) − b(r_i)`; nonpositive for a
    /// nonincreasing boundary.
    pub fn max_increase(&self) -> T {
        self.b.windows(2).map(|w| w[1] - w[0]).fold(T::neg_infinity(), T::max)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.max_increase() <= T::zero()
    }

    pub fn min(&self) -> T {
        self.b.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.b.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// CSV with header `r,b`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,b")?;
        for (&r, &b) in self.r.iter().zip(&self.b) {
            writeln!(out, "{},{}", fmt17(r), fmt17(b))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty boundary file".into()))??;
        if header.trim() != "r,b" {
            return Err(Error::Parse(format!("unexpected boundary header {header:?}")));
        }
        let (mut r, mut b) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols = parse_floats::<T>(&line, 2, n + 2)?;
            r.push(cols[0]);
            b.push(cols[1]);
        }
        Self::new(r, b)
    }
}

/// Threshold defining the contact set within a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum LevelRule<T> {
    /// `b` is the first `z` where `U` falls to `1 + tol_b`.
    Offset(T),
    /// `b` is the first `z` where `U` falls halfway between 1 and the
    /// column's stopping plateau `min U`; equal to `Offset(0)` when the
    /// column never drops below 1.
    #[default]
    Midpoint,
}

impl<T: Real> LevelRule<T> {
    fn level(&self, column: &[T]) -> T {
        match *self {
            LevelRule::Offset(tol) => T::one() + tol,
            LevelRule::Midpoint => {
                let plateau = column.iter().copied().fold(T::one(), T::min);
                (T::one() + plateau) / T::lit(2.0)
            }
        }
    }
}


/// Result of [`extract_boundary`].
#[derive(Debug, Clone)]
pub struct BoundaryExtraction<T> {
    /// Nonincreasing boundary after isotonic projection.
    pub boundary: Boundary<T>,
    /// Per-column crossings before projection.
    pub raw: Vec<T>,
    /// `max |raw − projected|`.
    pub displacement: T,
    /// Columns whose superlevel set was empty (`b = α`) or reached the top of
    /// the grid (`b = z_max`).
    pub empty_columns: Vec<usize>,
    pub truncated_columns: Vec<usize>,
    pub warnings: Vec<String>,
}

impl<T: Real> BoundaryExtraction<T> {
    /// Displacement measured in `z` cells of the given size.
    pub fn displacement_cells(&self, h_z: T) -> T {
        self.displacement / h_z
    }
}

/// Extracts `b(r)` column by column.
///
/// Scanning upward from `α`, `b` is the first point where `U` drops to the
/// level of `rule`, located by linear interpolation between the bracketing
/// nodes. Columns listed in `fixed_columns` carry Dirichlet data and take the
/// value of their nearest free neighbour. The raw boundary is then projected
/// onto nonincreasing functions by pool-adjacent-violators.
pub fn extract_boundary<T: Real>(
    u: &ScalarField<T>,
    rule: LevelRule<T>,
    fixed_columns: &[usize],
) -> Result<BoundaryExtraction<T>> {
    let grid = &u.grid;
    let zs = grid.z_nodes();
    let n_r = grid.n_r();
    let free: Vec<usize> = (0..n_r).filter(|i| !fixed_columns.contains(i)).collect();
    if free.is_empty() {
        return Err(Error::Config("every column is fixed; nothing to extract".into()));
    }
    let mut raw = vec![T::nan(); n_r];
    let mut warnings = Vec::new();
    let (mut empty_columns, mut truncated_columns) = (Vec::new(), Vec::new());
    for &i in &free {
        let col = u.column(i);
        let level = rule.level(col);
        raw[i] = match col.iter().position(|&v| !(v > level)) {
            Some(0) => {
                empty_columns.push(i);
                warnings.push(format!(
                    "column r={:.6}: U never exceeds {:.6}; b set to alpha",
                    grid.r_nodes()[i].as_f64(),
                    level.as_f64()
                ));
                zs[0]
            }
            Some(j) => {
                let (hi, lo) = (col[j - 1], col[j]);
                let w = (hi - level) / (hi - lo);
                zs[j - 1] + w * (zs[j] - zs[j - 1])
            }
            None => {
                truncated_columns.push(i);
                warnings.push(format!(
                    "column r={:.6}: U stays above {:.6} up to z_max; b set to z_max",
                    grid.r_nodes()[i].as_f64(),
                    level.as_f64()
                ));
                grid.z_max()
            }
        };
    }
    for &i in fixed_columns {
        if i < n_r {
            let nearest = *free.iter().min_by_key(|&&f| f.abs_diff(i)).expect("free columns exist");
            raw[i] = raw[nearest];
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    let projected = isotonic_nonincreasing(&raw);
    let displacement = raw
        .iter()
        .zip(&projected)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    Ok(BoundaryExtraction {
        boundary: Boundary::new(grid.r_nodes().to_vec(), projected)?,
        raw,
        displacement,
        empty_columns,
        truncated_columns,
        warnings,
    })
}

/// Least-squares projection onto nonincreasing sequences
/// (pool-adjacent-violators).
pub fn isotonic_nonincreasing<T: Real>(values: &[T]) -> Vec<T> {
    // Blocks of (sum, count); merge while a later block mean exceeds an
    // earlier one.
    let mut blocks: Vec<(T, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s1 / T::from_usize_lossy(c1) > s0 / T::from_usize_lossy(c0) {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, c) in blocks {
        let mean = s / T::from_usize_lossy(c);
        out.extend(std::iter::repeat_n(mean, c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use proptest::prelude::*;

    fn grid() -> Grid2D<f64> {
        Grid2D::uniform(0.01, 1.0, 16, 0.0, 3.0, 31).unwrap()
    }

    #[test]
    fn unit_field_gives_alpha_everywhere() {
        let u = ScalarField::from_fn(grid(), |_, _| 1.0);
        for rule in [LevelRule::Offset(0.05), LevelRule::Midpoint] {
            let ex = extract_boundary(&u, rule, &[]).unwrap();
            assert!(ex.boundary.b.iter().all(|&b| b == 0.0));
            assert_eq!(ex.warnings.len(), 16);
            assert_eq!(ex.empty_columns.len(), 16);
        }
    }

    #[test]
    fn linear_crossing_is_interpolated() {
        // U = 1 + (1.5 − z) − 0.1 r above the plateau at 0.5.
        let u = ScalarField::from_fn(grid(), |r, z| (2.5 - z - 0.1 * r).max(0.5));
        let ex = extract_boundary(&u, LevelRule::Offset(0.0), &[]).unwrap();
        for (&r, &b) in ex.boundary.r.iter().zip(&ex.boundary.b) {
            assert!((b - (1.5 - 0.1 * r)).abs() < 1e-12, "{r} {b}");
        }
        assert_eq!(ex.displacement, 0.0);
        let mid = extract_boundary(&u, LevelRule::Midpoint, &[]).unwrap();
        assert!((mid.boundary.b[0] - (1.75 - 0.1 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn fixed_columns_copy_neighbours() {
        let u = ScalarField::from_fn(grid(), |r, z| if r > 0.99 { 0.5 } else { (2.0 - z).max(0.99) });
        let ex = extract_boundary(&u, LevelRule::Offset(0.0), &[15]).unwrap();
        assert_eq!(ex.boundary.b[15], ex.boundary.b[14]);
        assert!(ex.warnings.is_empty());
    }

    #[test]
    fn truncated_column_is_reported() {
        let u = ScalarField::from_fn(grid(), |_, _| 2.0);
        let ex = extract_boundary(&u, LevelRule::Offset(0.0), &[]).unwrap();
        assert_eq!(ex.truncated_columns.len(), 16);
        assert!(ex.boundary.b.iter().all(|&b| b == 3.0));
    }

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_nonincreasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_nonincreasing::<f64>(&[]), Vec::<f64>::new());
    }

    proptest! {
        #[test]
        fn pava_is_monotone_and_mean_preserving(v in proptest::collection::vec(-5.0f64..5.0, 1..60)) {
            let p = isotonic_nonincreasing(&v);
            prop_assert!(p.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            let (s0, s1): (f64, f64) = (v.iter().sum(), p.iter().sum());
            prop_assert!((s0 - s1).abs() < 1e-9);
            if v.windows(2).all(|w| w[1] <= w[0]) {
                prop_assert_eq!(p, v);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_eval() {
        let b = Boundary::new(vec![0.1, 0.2, 0.4], vec![2.0, 1.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let c: Boundary<f64> = Boundary::read_csv(buf.as_slice()).unwrap();
        assert_eq!(b, c);
        assert_eq!(c.eval(0.0), 2.0);
        assert_eq!(c.eval(9.0), 1.0);
        assert!((c.eval(0.3) - 1.25).abs() < 1e-15);
        assert!(c.is_nonincreasing());
        let bad = Boundary::new(vec![0.1, 0.2, 0.4], vec![2.0, 2.5, 1.0]).unwrap();
        assert!(!bad.is_nonincreasing());
        assert!(Boundary::<f64>::read_csv("r,x\n".as_bytes()).is_err());
    }
}
