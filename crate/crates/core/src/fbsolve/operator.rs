//! Five-point discretisation of `L − ρ` where
//! `L f = (σ²/2) f_zz + μ f_z + (γ² r/2) f_rr + k(θ − r) f_r`.

use crate::fbsolve::{DriftScheme, RmaxCondition, RminCondition};
use crate::grid::Grid2D;
use crate::model::{lambda, DiscountSpec, ModelParams};
use crate::{Error, Real, Result};

/// Coefficients of `(L − ρ)U` at one node; neighbours that do not exist or
/// were folded into a ghost-node relation carry zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil<T> {
    pub center: T,
    pub zm: T,
    pub zp: T,
    pub rm: T,
    pub rp: T,
}

impl<T: Real> Stencil<T> {
    fn zero() -> Self {
        Self { center: T::zero(), zm: T::zero(), zp: T::zero(), rm: T::zero(), rp: T::zero() }
    }
}

/// Discrete `L − ρ` on a grid. Nodes without a stencil carry Dirichlet data
/// supplied by the solver.
#[derive(Debug, Clone)]
pub struct Operator<T> {
    pub grid: Grid2D<T>,
    stencils: Vec<Option<Stencil<T>>>,
}

impl<T: Real> Operator<T> {
    #[inline]
    pub fn stencil(&self, i_r: usize, i_z: usize) -> Option<&Stencil<T>> {
        self.stencils[self.grid.idx(i_r, i_z)].as_ref()
    }

    pub fn is_dirichlet(&self, i_r: usize, i_z: usize) -> bool {
        self.stencil(i_r, i_z).is_none()
    }

    /// `(L − ρ)U` at a node that has a stencil.
    pub fn apply_at(&self, values: &[T], i_r: usize, i_z: usize) -> Option<T> {
        let s = self.stencil(i_r, i_z)?;
        let g = &self.grid;
        let (n_r, n_z) = (g.n_r(), g.n_z());
        let mut acc = s.center * values[g.idx(i_r, i_z)];
        if i_z > 0 {
            acc = acc + s.zm * values[g.idx(i_r, i_z - 1)];
        }
        if i_z + 1 < n_z {
            acc = acc + s.zp * values[g.idx(i_r, i_z + 1)];
        }
        if i_r > 0 {
            acc = acc + s.rm * values[g.idx(i_r - 1, i_z)];
        }
        if i_r + 1 < n_r {
            acc = acc + s.rp * values[g.idx(i_r + 1, i_z)];
        }
        Some(acc)
    }

    /// `(L − ρ)U` at every node with a stencil; `None` at Dirichlet nodes.
    pub fn apply(&self, values: &[T]) -> Vec<Option<T>> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.n_r() {
            for j in 0..g.n_z() {
                out.push(self.apply_at(values, i, j));
            }
        }
        out
    }
}

/// Three-point weights `(minus, center, plus)` for `a f'' + b f'` at an
/// interior node with spacings `hm` (behind) and `hp` (ahead).
pub(crate) fn weights<T: Real>(a: T, b: T, hm: T, hp: T, scheme: DriftScheme) -> (T, T, T) {
    let two = T::lit(2.0);
    let s = hm + hp;
    let (dm, dp) = (two / (hm * s), two / (hp * s));
    let (dc,) = (-(dm + dp),);
    let central = (-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s));
    let upwind = if b >= T::zero() {
        (T::zero(), -T::one() / hp, T::one() / hp)
    } else {
        (-T::one() / hm, T::one() / hm, T::zero())
    };
    let use_central = match scheme {
        DriftScheme::Upwind => false,
        DriftScheme::Central => true,
        DriftScheme::Hybrid => a * dm + b * central.0 >= T::zero() && a * dp + b * central.2 >= T::zero(),
    };
    let c = if use_central { central } else { upwind };
    (a * dm + b * c.0, a * dc + b * c.1, a * dp + b * c.2)
}

/// Assembles `L − ρ`.
///
/// The row at `z = α` uses the ghost value `U_{−1} = U_1 + 2hλU_0`, which
/// imposes `U_z = −λU`, and replaces `μU_z` by `−μλU_0`. Rows on `z = z_max`,
/// on `r = r_max` under [`RmaxCondition::Dirichlet`] and on `r = r_min` under
/// [`RminCondition::Profile`] are Dirichlet. Zero-flux edges mirror the
/// neighbour into the ghost node.
///
/// Fails if any row ends up with a positive diagonal or a negative
/// off-diagonal.
pub fn assemble_operator<T: Real>(
    grid: &Grid2D<T>,
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    scheme: DriftScheme,
    rmin: RminCondition,
    rmax: RmaxCondition,
) -> Result<Operator<T>> {
    let lam = lambda(params)?;
    let two = T::lit(2.0);
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let rs = grid.r_nodes();
    let zs = grid.z_nodes();
    let a_z = params.sigma * params.sigma / two;
    let b_z = params.mu;

    let mut stencils = Vec::with_capacity(grid.len());
    for i in 0..n_r {
        let r = rs[i];
        let a_r = params.gamma * params.gamma * r / two;
        let b_r = params.k * (params.theta - r);
        let dirichlet_column = (i == 0 && rmin == RminCondition::Profile)
            || (i + 1 == n_r && rmax == RmaxCondition::Dirichlet);

        // r-direction contribution shared by the whole column.
        let (rm, rc, rp) = if i == 0 {
            let h = rs[1] - rs[0];
            let (m, c, p) = weights(a_r, b_r, h, h, scheme);
            (T::zero(), c, p + m)
        } else if i + 1 == n_r {
            let h = rs[i] - rs[i - 1];
            let (m, c, p) = weights(a_r, b_r, h, h, scheme);
            (m + p, c, T::zero())
        } else {
            weights(a_r, b_r, rs[i] - rs[i - 1], rs[i + 1] - rs[i], scheme)
        };
        let rho = disc.rho(r);

        for j in 0..n_z {
            if dirichlet_column || j + 1 == n_z {
                stencils.push(None);
                continue;
            }
            let mut s = Stencil::zero();
            if j == 0 {
                let h = zs[1] - zs[0];
                s.zp = a_z * two / (h * h);
                s.center = a_z * (-two / (h * h) + two * lam / h) - b_z * lam;
            } else {
                let (m, c, p) = weights(a_z, b_z, zs[j] - zs[j - 1], zs[j + 1] - zs[j], scheme);
                s.zm = m;
                s.center = c;
                s.zp = p;
            }
            s.rm = rm;
            s.rp = rp;
            s.center = s.center + rc - rho;
            check_sign_pattern(&s, i, j)?;
            stencils.push(Some(s));
        }
    }
    Ok(Operator { grid: grid.clone(), stencils })
}

fn check_sign_pattern<T: Real>(s: &Stencil<T>, i_r: usize, i_z: usize) -> Result<()> {
    let offs = [("z-", s.zm), ("z+", s.zp), ("r-", s.rm), ("r+", s.rp)];
    if let Some((name, v)) = offs.iter().find(|(_, v)| *v < T::zero() || !v.is_finite()) {
        return Err(Error::Assembly {
            i_r,
            i_z,
            reason: format!("off-diagonal {name} coefficient {v:.3e} is negative; refine the grid"),
        });
    }
    if !(s.center <= T::zero()) {
        return Err(Error::Assembly {
            i_r,
            i_z,
            reason: format!("diagonal {:.3e} is positive; refine the z grid", s.center.as_f64()),
        });
    }
    Ok(())
}
