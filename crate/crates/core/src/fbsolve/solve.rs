//! Active-set iteration for the penalised equation
//! `(L − ρ)U + (1/δ)(1 − U)⁺ = 0`.

use log::{debug, info};
use serde::Serialize;

use crate::fbsolve::operator::{assemble_operator, Operator};
use crate::fbsolve::{FarBoundary, RmaxCondition, RminCondition, SolverConfig};
use crate::grid::{Grid2D, ScalarField};
use crate::linalg::BandedMatrix;
use crate::model::{DiscountSpec, ModelParams};
use crate::oracle1d::ConstantRateSolution;
use crate::{Error, Real, Result};

/// Value of a far Dirichlet node at rate `r` when it is not on the `z_max`
/// row: 1 under [`FarBoundary::Unit`], `1/(1 + δρ(r))` otherwise.
pub fn far_value<T: Real>(cfg: &SolverConfig<T>, disc: &DiscountSpec<T>, r: T) -> T {
    match cfg.far {
        FarBoundary::Unit => T::one(),
        FarBoundary::PenaltyConsistent => T::one() / (T::one() + cfg.delta * disc.rho(r)),
    }
}

/// Values on the `z_max` row. Under [`FarBoundary::PenaltyConsistent`] this
/// is the `z`-independent solution of the penalised equation,
/// `(γ²r/2)c'' + k(θ − r)c' − ρc + (1 − c)/δ = 0`, discretised with the
/// interior `r`-stencil and the same rate-edge conditions, so that a column
/// whose top lies in the stopping region sees no jump at `z_max`.
fn far_row<T: Real>(cfg: &SolverConfig<T>, op: &Operator<T>, disc: &DiscountSpec<T>) -> Result<Vec<T>> {
    let grid = &op.grid;
    let rs = grid.r_nodes();
    if cfg.far == FarBoundary::Unit {
        return Ok(vec![T::one(); rs.len()]);
    }
    let n_r = rs.len();
    let j = grid.n_z() - 2;
    let inv_delta = T::one() / cfg.delta;
    let mut m = BandedMatrix::zeros(n_r, 1, 1);
    let mut rhs = vec![T::zero(); n_r];
    for (i, &r) in rs.iter().enumerate() {
        match op.stencil(i, j) {
            Some(st) => {
                m.set(i, i, st.rm + st.rp + disc.rho(r) + inv_delta);
                if i > 0 {
                    m.set(i, i - 1, -st.rm);
                }
                if i + 1 < n_r {
                    m.set(i, i + 1, -st.rp);
                }
                rhs[i] = inv_delta;
            }
            None => {
                m.set(i, i, T::one());
                rhs[i] = far_value(cfg, disc, r);
            }
        }
    }
    m.factor()?.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Data for the lower rate edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData<T> {
    /// Values at the `z` nodes, used under [`RminCondition::Profile`].
    pub rmin_profile: Option<Vec<T>>,
}

impl<T: Real> BoundaryData<T> {
    pub fn none() -> Self {
        Self { rmin_profile: None }
    }

    /// `(1 − 1/(1 + z − α))·u(z)` with `u` the constant-rate stopping value at
    /// the rate `ρ(0)`.
    pub fn constant_rate_profile(grid: &Grid2D<T>, params: &ModelParams<T>, disc: &DiscountSpec<T>) -> Result<Self> {
        let sol = ConstantRateSolution::new(params, disc.rho(T::zero()))?;
        Ok(Self { rmin_profile: Some(grid.z_nodes().iter().map(|&z| sol.rmin_profile(z)).collect()) })
    }

    /// Whatever `cfg` needs: the constant-rate profile under
    /// [`RminCondition::Profile`], nothing otherwise.
    pub fn for_config(
        cfg: &SolverConfig<T>,
        grid: &Grid2D<T>,
        params: &ModelParams<T>,
        disc: &DiscountSpec<T>,
    ) -> Result<Self> {
        match cfg.rmin {
            RminCondition::Profile => Self::constant_rate_profile(grid, params, disc),
            RminCondition::ZeroFlux => Ok(Self::none()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PenalizedSolution<T> {
    #[serde(skip)]
    pub field: ScalarField<T>,
    pub iterations: usize,
    /// Sup-norm change of each outer iterate; the first entry is measured
    /// against the constant-rate initial guess.
    pub history: Vec<T>,
    /// Smallest `κ ≥ 0` with `min U ≥ 1 − κδ`.
    pub kappa: T,
    /// Nodes in the penalised (stopping) set at convergence.
    pub active_nodes: usize,
    pub factorizations: usize,
    /// Rate columns carrying Dirichlet data rather than the equation.
    pub fixed_columns: Vec<usize>,
}

struct Ordering {
    n_r: usize,
    n_z: usize,
    r_fastest: bool,
}

impl Ordering {
    /// Orders the shorter axis fastest, which minimises the bandwidth.
    fn new(grid: &Grid2D<impl Real>) -> Self {
        Self::with(grid, grid.n_r() <= grid.n_z())
    }

    fn with(grid: &Grid2D<impl Real>, r_fastest: bool) -> Self {
        Self { n_r: grid.n_r(), n_z: grid.n_z(), r_fastest }
    }

    fn bandwidth(&self) -> usize {
        if self.r_fastest {
            self.n_r
        } else {
            self.n_z
        }
    }

    #[inline]
    fn pos(&self, i_r: usize, i_z: usize) -> usize {
        if self.r_fastest {
            i_z * self.n_r + i_r
        } else {
            i_r * self.n_z + i_z
        }
    }
}

/// Solves the penalised problem by repeatedly freezing the set where
/// `U < 1`, solving the resulting linear system and updating the set.
///
/// On a frozen set the system is a nonsingular M-matrix, so each step is a
/// semismooth Newton step for the penalty term and the sequence settles after
/// finitely many updates.
pub fn solve_penalized<T: Real>(
    cfg: &SolverConfig<T>,
    grid: &Grid2D<T>,
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    data: &BoundaryData<T>,
) -> Result<PenalizedSolution<T>> {
    cfg.validate()?;
    let op = assemble_operator(grid, params, disc, cfg.scheme, cfg.rmin, cfg.rmax)?;
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let dirichlet = dirichlet_values(cfg, &op, disc, data)?;

    let mut u = initial_guess(grid, params, disc, &dirichlet);
    let mut active: Vec<bool> = u.iter().map(|&v| v < T::one()).collect();
    for (a, d) in active.iter_mut().zip(&dirichlet) {
        *a = *a && d.is_none();
    }
    let inv_delta = T::one() / cfg.delta;
    let mut history = Vec::new();
    let mut factorizations = 0;

    for iter in 1..=cfg.max_outer_iters {
        let target = solve_frozen(&op, &dirichlet, &active, inv_delta, cfg.linear_solver_tol, &Ordering::new(grid))?;
        factorizations += 1;
        let mut change = T::zero();
        for (cur, new) in u.iter_mut().zip(&target) {
            let next = *cur + cfg.damping * (*new - *cur);
            change = change.max((next - *cur).abs());
            *cur = next;
        }
        history.push(change);
        let mut flips = 0usize;
        for ((a, &v), d) in active.iter_mut().zip(&u).zip(&dirichlet) {
            let now = d.is_none() && v < T::one();
            if now != *a {
                flips += 1;
                *a = now;
            }
        }
        debug!("outer iteration {iter}: change {change:.3e}, {flips} active-set flips");
        let settled = flips == 0 && cfg.damping == T::one();
        if change <= cfg.tol_outer || settled {
            let field = ScalarField::new(grid.clone(), u)?;
            let kappa = ((T::one() - field.min()) / cfg.delta).max(T::zero());
            let fixed_columns = (0..n_r).filter(|&i| (0..n_z).all(|j| op.is_dirichlet(i, j))).collect();
            info!("penalised solve converged after {iter} iterations (κ = {kappa:.4})");
            return Ok(PenalizedSolution {
                field,
                iterations: iter,
                history,
                kappa,
                active_nodes: active.iter().filter(|&&a| a).count(),
                factorizations,
                fixed_columns,
            });
        }
    }
    let last = history.last().map_or(f64::NAN, |v| v.as_f64());
    Err(Error::NonConvergence {
        iterations: cfg.max_outer_iters,
        last,
        history: history.iter().map(|v| v.as_f64()).collect(),
    })
}

fn dirichlet_values<T: Real>(
    cfg: &SolverConfig<T>,
    op: &Operator<T>,
    disc: &DiscountSpec<T>,
    data: &BoundaryData<T>,
) -> Result<Vec<Option<T>>> {
    let grid = &op.grid;
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let top = far_row(cfg, op, disc)?;
    let profile = match cfg.rmin {
        RminCondition::Profile => {
            let p = data
                .rmin_profile
                .as_ref()
                .ok_or_else(|| Error::Config("r_min profile condition selected but no profile supplied".into()))?;
            if p.len() != n_z {
                return Err(Error::Config(format!("r_min profile has {} values for {n_z} z nodes", p.len())));
            }
            Some(p)
        }
        RminCondition::ZeroFlux => None,
    };
    let mut out = vec![None; grid.len()];
    for (i, &r) in grid.r_nodes().iter().enumerate() {
        let far = far_value(cfg, disc, r);
        for j in 0..n_z {
            let v = if j + 1 == n_z {
                Some(top[i])
            } else if i + 1 == n_r && cfg.rmax == RmaxCondition::Dirichlet {
                Some(far)
            } else if i == 0 {
                profile.map(|p| p[j])
            } else {
                None
            };
            out[grid.idx(i, j)] = v;
        }
    }
    Ok(out)
}

/// Constant-rate stopping value at `ρ(r)` column by column; it is `≥ 1` and
/// equal to 1 above the constant-rate barrier, which seeds the active set.
fn initial_guess<T: Real>(
    grid: &Grid2D<T>,
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    dirichlet: &[Option<T>],
) -> Vec<T> {
    let below = T::one() - T::lit(1e-12);
    let mut u = Vec::with_capacity(grid.len());
    for &r in grid.r_nodes() {
        let sol = ConstantRateSolution::new(params, disc.rho(r)).ok();
        for &z in grid.z_nodes() {
            u.push(match &sol {
                Some(s) if z >= s.barrier() => below,
                Some(s) => s.derivative(z),
                None => T::one(),
            });
        }
    }
    for (v, d) in u.iter_mut().zip(dirichlet) {
        if let Some(d) = d {
            *v = *d;
        }
    }
    u
}

/// Solves `(−(L − ρ) + χ_A/δ) U = χ_A/δ` with Dirichlet rows as identities.
fn solve_frozen<T: Real>(
    op: &Operator<T>,
    dirichlet: &[Option<T>],
    active: &[bool],
    inv_delta: T,
    tol: T,
    ord: &Ordering,
) -> Result<Vec<T>> {
    let grid = &op.grid;
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let bw = ord.bandwidth();
    let mut m = BandedMatrix::zeros(grid.len(), bw, bw);
    let mut rhs = vec![T::zero(); grid.len()];

    for i in 0..n_r {
        for j in 0..n_z {
            let g = grid.idx(i, j);
            let p = ord.pos(i, j);
            match (op.stencil(i, j), dirichlet[g]) {
                (Some(s), None) => {
                    let pen = if active[g] { inv_delta } else { T::zero() };
                    m.set(p, p, pen - s.center);
                    rhs[p] = pen;
                    let neighbours = [
                        (j > 0, i, j.wrapping_sub(1), s.zm),
                        (j + 1 < n_z, i, j + 1, s.zp),
                        (i > 0, i.wrapping_sub(1), j, s.rm),
                        (i + 1 < n_r, i + 1, j, s.rp),
                    ];
                    for (exists, ii, jj, c) in neighbours {
                        if exists && c != T::zero() {
                            m.set(p, ord.pos(ii, jj), -c);
                        }
                    }
                }
                (None, Some(v)) => {
                    m.set(p, p, T::one());
                    rhs[p] = v;
                }
                _ => {
                    return Err(Error::Assembly {
                        i_r: i,
                        i_z: j,
                        reason: "node has neither an equation nor Dirichlet data".into(),
                    })
                }
            }
        }
    }

    let lu = m.factor()?;
    let mut x = rhs.clone();
    lu.solve_in_place(&mut x);

    let mut u = vec![T::zero(); grid.len()];
    for i in 0..n_r {
        for j in 0..n_z {
            u[grid.idx(i, j)] = x[ord.pos(i, j)];
        }
    }
    let scale = rhs.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let mut worst = T::zero();
    for i in 0..n_r {
        for j in 0..n_z {
            let g = grid.idx(i, j);
            let res = match op.apply_at(&u, i, j) {
                Some(lu_val) => {
                    let pen = if active[g] { inv_delta } else { T::zero() };
                    lu_val + pen * (T::one() - u[g])
                }
                None => u[g] - dirichlet[g].unwrap_or(u[g]),
            };
            if !res.is_finite() {
                return Err(Error::LinearSolve(format!("non-finite residual at node (i_r={i}, i_z={j})")));
            }
            worst = worst.max(res.abs());
        }
    }
    if worst > tol * scale {
        return Err(Error::LinearSolve(format!(
            "relative residual {:.3e} exceeds tolerance {:.3e}",
            (worst / scale).as_f64(),
            tol.as_f64()
        )));
    }
    Ok(u)
}
