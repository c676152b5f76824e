//! Tensor-product `(r, z)` grids and nodal fields.

use std::io::{BufRead, Write};

use crate::{Error, Real, Result};

/// Fewest nodes accepted along either axis.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T> {
    r_nodes: Vec<T>,
    z_nodes: Vec<T>,
}

impl<T: Real> Grid2D<T> {
    /// Builds a grid from explicit node vectors; `z_nodes[0]` is the
    /// solvency level `α`.
    pub fn from_nodes(r_nodes: Vec<T>, z_nodes: Vec<T>) -> Result<Self> {
        for (axis, nodes) in [("r", &r_nodes), ("z", &z_nodes)] {
            if nodes.len() < MIN_NODES {
                return Err(Error::Config(format!(
                    "{axis} axis has {} nodes, at least {MIN_NODES} required",
                    nodes.len()
                )));
            }
            if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!("{axis} nodes not strictly increasing at index {}", i + 1)));
            }
            if nodes.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{axis} nodes must be finite")));
            }
        }
        if !(r_nodes[0] > T::zero()) {
            return Err(Error::Config(format!("r_min must be positive, got {}", r_nodes[0])));
        }
        if z_nodes[0] < T::zero() {
            return Err(Error::Config(format!("z axis must start at alpha ≥ 0, got {}", z_nodes[0])));
        }
        Ok(Self { r_nodes, z_nodes })
    }

    /// Uniform grid with `n_r × n_z` nodes on `[r_min, r_max] × [alpha, z_max]`.
    pub fn uniform(r_min: T, r_max: T, n_r: usize, alpha: T, z_max: T, n_z: usize) -> Result<Self> {
        if !(r_max > r_min) || !(z_max > alpha) {
            return Err(Error::Config("grid extents must satisfy r_max > r_min and z_max > alpha".into()));
        }
        Self::from_nodes(linspace(r_min, r_max, n_r), linspace(alpha, z_max, n_z))
    }

    pub fn r_nodes(&self) -> &[T] {
        &self.r_nodes
    }

    pub fn z_nodes(&self) -> &[T] {
        &self.z_nodes
    }

    pub fn n_r(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn n_z(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_z()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha(&self) -> T {
        self.z_nodes[0]
    }

    pub fn z_max(&self) -> T {
        self.z_nodes[self.n_z() - 1]
    }

    pub fn r_min(&self) -> T {
        self.r_nodes[0]
    }

    pub fn r_max(&self) -> T {
        self.r_nodes[self.n_r() - 1]
    }

    /// Largest spacing along `z`.
    pub fn h_z(&self) -> T {
        max_spacing(&self.z_nodes)
    }

    /// Largest spacing along `r`.
    pub fn h_r(&self) -> T {
        max_spacing(&self.r_nodes)
    }

    /// Flat index of node `(i_r, i_z)`; `z` varies fastest.
    #[inline]
    pub fn idx(&self, i_r: usize, i_z: usize) -> usize {
        i_r * self.n_z() + i_z
    }
}

fn max_spacing<T: Real>(nodes: &[T]) -> T {
    nodes.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
}

pub fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n.saturating_sub(1).max(1));
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * T::from_usize_lossy(i) / last })
        .collect()
}

/// Locates `x` in sorted `nodes`: returns `(i, w)` with
/// `x ≈ (1 − w)·nodes[i] + w·nodes[i+1]`, clamped to the node range.
pub fn bracket<T: Real>(nodes: &[T], x: T) -> (usize, T) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, T::zero());
    }
    if x >= nodes[n - 1] {
        return (n - 2, T::one());
    }
    // Uniform guess first, binary search if it misses.
    let guess = ((x - nodes[0]) / (nodes[n - 1] - nodes[0]) * T::from_usize_lossy(n - 1))
        .to_usize()
        .unwrap_or(0)
        .min(n - 2);
    let i = if nodes[guess] <= x && x < nodes[guess + 1] {
        guess
    } else {
        (nodes.partition_point(|&v| v <= x) - 1).min(n - 2)
    };
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

/// Values of one scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub grid: Grid2D<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at node (i_r={}, i_z={})",
                i / grid.n_z(),
                i % grid.n_z()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.r_nodes() {
            for &z in grid.z_nodes() {
                values.push(f(r, z));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i_r: usize, i_z: usize) -> T {
        self.values[self.grid.idx(i_r, i_z)]
    }

    /// Values along `z` at rate node `i_r`.
    pub fn column(&self, i_r: usize) -> &[T] {
        let n = self.grid.n_z();
        &self.values[i_r * n..(i_r + 1) * n]
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn interpolate(&self, r: T, z: T) -> T {
        let (i, wr) = bracket(self.grid.r_nodes(), r);
        let (j, wz) = bracket(self.grid.z_nodes(), z);
        let one = T::one();
        let v00 = self.at(i, j);
        let v01 = self.at(i, j + 1);
        let v10 = self.at(i + 1, j);
        let v11 = self.at(i + 1, j + 1);
        (one - wr) * ((one - wz) * v00 + wz * v01) + wr * ((one - wz) * v10 + wz * v11)
    }

    /// CSV with header `r,z,value`, `r` outer and `z` inner, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,z,value")?;
        for (i, &r) in self.grid.r_nodes().iter().enumerate() {
            for (j, &z) in self.grid.z_nodes().iter().enumerate() {
                writeln!(out, "{},{},{}", fmt17(r), fmt17(z), fmt17(self.at(i, j)))?;
            }
        }
        Ok(())
    }

    /// Reads the format produced by [`ScalarField::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        if header.trim() != "r,z,value" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows: Vec<(T, T, T)> = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols = parse_floats::<T>(&line, 3, n + 2)?;
            rows.push((cols[0], cols[1], cols[2]));
        }
        if rows.is_empty() {
            return Err(Error::Parse("field file has no rows".into()));
        }
        let n_z = rows.iter().take_while(|row| row.0 == rows[0].0).count();
        if !rows.len().is_multiple_of(n_z) {
            return Err(Error::Parse("field rows do not form a tensor grid".into()));
        }
        let z_nodes: Vec<T> = rows[..n_z].iter().map(|row| row.1).collect();
        let r_nodes: Vec<T> = rows.iter().step_by(n_z).map(|row| row.0).collect();
        let grid = Grid2D::from_nodes(r_nodes, z_nodes)?;
        for (k, row) in rows.iter().enumerate() {
            let (i, j) = (k / n_z, k % n_z);
            if row.0 != grid.r_nodes()[i] || row.1 != grid.z_nodes()[j] {
                return Err(Error::Parse(format!("row {} breaks the grid layout", k + 2)));
            }
        }
        Self::new(grid, rows.into_iter().map(|row| row.2).collect())
    }
}

pub(crate) fn parse_floats<T: Real>(line: &str, expected: usize, line_no: usize) -> Result<Vec<T>> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != expected {
        return Err(Error::Parse(format!("line {line_no}: expected {expected} columns, got {}", cols.len())));
    }
    cols.iter()
        .map(|c| {
            c.parse::<f64>()
                .map(T::lit)
                .map_err(|e| Error::Parse(format!("line {line_no}: {c:?}: {e}")))
        })
        .collect()
}

/// Formats with 17 significant digits in scientific notation.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D<f64> {
        Grid2D::uniform(0.005, 1.1, 16, 0.0, 2.5, 20).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid2D::uniform(0.0, 1.1, 16, 0.0, 2.5, 16).is_err());
        assert!(Grid2D::uniform(0.005, 1.1, 15, 0.0, 2.5, 16).is_err());
        assert!(Grid2D::from_nodes(linspace(0.1, 1.0, 16), {
            let mut z = linspace(0.0, 1.0, 16);
            z[3] = z[2];
            z
        })
        .is_err());
    }

    #[test]
    fn bracket_on_uneven_nodes() {
        let nodes = [0.0f64, 0.1, 0.15, 0.9, 1.0];
        for &(x, i, w) in &[(0.05f64, 0usize, 0.5f64), (0.1, 1, 0.0), (0.5, 2, 0.35 / 0.75), (0.95, 3, 0.5), (-1.0, 0, 0.0), (2.0, 3, 1.0)] {
            let (bi, bw) = bracket(&nodes, x);
            assert_eq!(bi, i, "{x}");
            assert!((bw - w).abs() < 1e-12, "{x}: {bw}");
        }
        let even = linspace(0.0, 1.0, 11);
        for k in 0..100 {
            let x = k as f64 / 100.0;
            let (i, w) = bracket(&even, x);
            assert!(even[i] <= x && x <= even[i + 1] && (0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn z_starts_at_alpha_exactly() {
        let g = Grid2D::uniform(0.01, 1.0, 16, 0.3, 2.0, 16).unwrap();
        assert_eq!(g.alpha(), 0.3);
        assert_eq!(g.z_max(), 2.0);
        assert_eq!(g.r_max(), 1.0);
    }

    #[test]
    fn bilinear_is_exact_on_bilinear_functions() {
        let f = ScalarField::from_fn(grid(), |r, z| 1.0 + 2.0 * r - 0.5 * z + 3.0 * r * z);
        let (r, z) = (0.3333, 1.2345);
        assert!((f.interpolate(r, z) - (1.0 + 2.0 * r - 0.5 * z + 3.0 * r * z)).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = ScalarField::from_fn(grid(), |r, z| (r * 7.1).sin() + z.exp() / 3.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g: ScalarField<f64> = ScalarField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }
}
