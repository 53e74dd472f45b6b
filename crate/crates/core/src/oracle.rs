//! Brute-force references used to validate the fast paths.

use crate::channel::{Channel, ProbVector, RatePoint, ZVector};
use crate::error::{Error, Result};
use crate::gamma::max_over_z;
use crate::lp::{solve, LpProblem, LpStatus, Relation};
use crate::scalar::Scalar;

/// Largest `nx * ny` accepted by [`maxmin_lp`].
pub const MAXMIN_CELL_LIMIT: usize = 4096;

/// `β_α(P, Q)` as the LP over randomized tests:
/// minimize `Σ Q(w) t_w` subject to `Σ P(w) t_w >= α`, `0 <= t_w <= 1`.
pub fn beta_lp_oracle<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidAlpha(alpha.to_f64_lossy()));
    }
    let n = p.len();
    let mut lp = LpProblem::new(q.as_slice().to_vec());
    for w in 0..n {
        lp.set_bounds(w, T::zero(), T::one());
    }
    lp.add_constraint(p.as_slice().to_vec(), Relation::Ge, alpha);
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value.max(T::zero()).min(T::one())),
        _ => Err(Error::NumericalFailure("test LP not optimal".into())),
    }
}

/// The saddle value as one LP in max-min form: maximize `t` subject to
/// `t <= Σ_y m_xy − e^{−R} Σ_y z_y` for every `x`, `0 <= m_xy <= W(y|x)`,
/// `m_xy <= z_y`, `0 <= z_y <= 1`.
pub fn maxmin_lp<T: Scalar>(w: &Channel<T>, r: &RatePoint<T>) -> Result<(T, ZVector<T>)> {
    let (nx, ny) = (w.nx(), w.ny());
    if nx * ny > MAXMIN_CELL_LIMIT {
        return Err(Error::TooLarge { what: "max-min LP", needed: (nx * ny) as u128, limit: MAXMIN_CELL_LIMIT as u128 });
    }
    let thr = r.threshold();
    // Variables: z (ny), m (nx * ny, row-major), t.
    let nv = ny + nx * ny + 1;
    let t = nv - 1;
    let m = |x: usize, y: usize| ny + x * ny + y;
    let mut obj = vec![T::zero(); nv];
    obj[t] = -T::one();
    let mut lp = LpProblem::new(obj);
    for y in 0..ny {
        lp.set_bounds(y, T::zero(), T::one());
    }
    for x in 0..nx {
        for y in 0..ny {
            lp.set_bounds(m(x, y), T::zero(), w.get(x, y));
        }
    }
    lp.set_free(t);
    for x in 0..nx {
        let mut row = vec![T::zero(); nv];
        row[t] = T::one();
        for y in 0..ny {
            row[m(x, y)] = -T::one();
            row[y] = thr;
        }
        lp.add_constraint(row, Relation::Le, T::zero());
    }
    for x in 0..nx {
        for y in 0..ny {
            let mut row = vec![T::zero(); nv];
            row[m(x, y)] = T::one();
            row[y] = -T::one();
            lp.add_constraint(row, Relation::Le, T::zero());
        }
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure("max-min LP not optimal".into()));
    }
    Ok((sol.primal[t], ZVector::clamped(sol.primal[..ny].to_vec())))
}

/// `min` over the simplex grid with `grid_steps` divisions of
/// `max_z γ(Q_X, z)`. An upper bound on the saddle value that tightens as
/// the grid refines. Only for `nx <= 3`.
pub fn grid_saddle_check<T: Scalar>(w: &Channel<T>, r: &RatePoint<T>, grid_steps: usize) -> Result<T> {
    let nx = w.nx();
    if nx > 3 {
        return Err(Error::TooLarge { what: "grid search inputs", needed: nx as u128, limit: 3 });
    }
    let steps = grid_steps.max(1);
    let denom = T::from_usize_lossy(steps);
    let mut best = T::infinity();
    let mut counts = vec![0usize; nx];
    loop {
        let used: usize = counts[..nx - 1].iter().sum();
        if used <= steps {
            counts[nx - 1] = steps - used;
            let q = ProbVector::from_vec_unchecked(counts.iter().map(|&c| T::from_usize_lossy(c) / denom).collect());
            best = best.min(max_over_z(&q, w, r)?.0);
        }
        // Advance the odometer over the first nx - 1 coordinates.
        let mut k = 0;
        loop {
            if k + 1 >= nx {
                return Ok(best);
            }
            counts[k] += 1;
            if counts[..nx - 1].iter().sum::<usize>() <= steps {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}
