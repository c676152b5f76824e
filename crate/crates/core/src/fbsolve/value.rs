use crate::grid::ScalarField;
use crate::Real;

/// `V(r, z) = ∫_α^z U(r, y) dy` by the cumulative trapezoid rule in each
/// column.
pub fn integrate_value<T: Real>(u: &ScalarField<T>) -> ScalarField<T> {
    let grid = u.grid.clone();
    let zs = grid.z_nodes();
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_r() {
        let col = u.column(i);
        let mut acc = T::zero();
        values.push(acc);
        for j in 1..col.len() {
            acc = acc + half * (zs[j] - zs[j - 1]) * (col[j] + col[j - 1]);
            values.push(acc);
        }
    }
    ScalarField { grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{linspace, Grid2D};

    #[test]
    fn unit_field_gives_liquidation_value() {
        let mut z = linspace(0.3f64, 2.0, 20);
        z[5] += 0.01;
        let g = Grid2D::from_nodes(linspace(0.01, 1.0, 16), z).unwrap();
        let v = integrate_value(&ScalarField::from_fn(g.clone(), |_, _| 1.0));
        for i in 0..g.n_r() {
            assert_eq!(v.at(i, 0), 0.0);
            for (j, &z) in g.z_nodes().iter().enumerate() {
                assert!((v.at(i, j) - (z - 0.3)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn second_order_on_smooth_data() {
        let err = |n: usize| {
            let g = Grid2D::<f64>::uniform(0.1, 1.0, 16, 0.0, 1.0, n).unwrap();
            let v = integrate_value(&ScalarField::from_fn(g.clone(), |r, z| (r * z).exp()));
            let r = g.r_nodes()[3];
            ((r).exp_m1() / r - v.at(3, n - 1)).abs()
        };
        let ratio = err(33) / err(65);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }
}
