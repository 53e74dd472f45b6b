//! Optimal binary hypothesis testing between two distributions on a finite
//! set: `β_α(P, Q)`, the least `Q`-mass of any randomized test that accepts
//! `P`-mass at least `α`.

use std::cmp::Ordering;

use crate::channel::{ProbVector, TolerancePolicy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Neyman–Pearson test: accept `strict_set` outright, accept
/// `boundary_set` with probability `randomization`.
#[derive(Debug, Clone, PartialEq)]
pub struct NpTest<T> {
    pub strict_set: Vec<usize>,
    pub boundary_set: Vec<usize>,
    pub randomization: T,
    pub lambda: T,
}

impl<T: Scalar> NpTest<T> {
    /// Probability that the test accepts sample point `w`.
    pub fn accept_prob(&self, w: usize) -> T {
        if self.strict_set.contains(&w) {
            T::one()
        } else if self.boundary_set.contains(&w) {
            self.randomization
        } else {
            T::zero()
        }
    }

    /// Mass the test accepts under `dist`.
    pub fn accepted_mass(&self, dist: &ProbVector<T>) -> T {
        let strict: T = self.strict_set.iter().map(|&w| dist[w]).sum();
        let boundary: T = self.boundary_set.iter().map(|&w| dist[w]).sum();
        strict + self.randomization * boundary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaResult<T> {
    pub beta: T,
    /// Every threshold in this closed interval satisfies the optimality
    /// condition; the upper end may be `+inf`.
    pub lambda_interval: (T, T),
    pub test: NpTest<T>,
}

fn check_args<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidAlpha(alpha.to_f64_lossy()));
    }
    Ok(())
}

/// `Q(w)/P(w)`, `+inf` when only `P` vanishes, `None` when both do.
fn ratio<T: Scalar>(pw: T, qw: T) -> Option<T> {
    if pw > T::zero() {
        Some(qw / pw)
    } else if qw > T::zero() {
        Some(T::infinity())
    } else {
        None
    }
}

fn ratio_tie<T: Scalar>(a: T, b: T, tol: T) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

struct Group<T> {
    ratio: T,
    members: Vec<usize>,
    p: T,
    q: T,
}

/// Sample points bucketed by likelihood ratio, ascending.
fn ratio_groups<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, tol: T) -> Vec<Group<T>> {
    let mut pts: Vec<(usize, T)> = (0..p.len()).filter_map(|w| ratio(p[w], q[w]).map(|r| (w, r))).collect();
    pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut groups: Vec<Group<T>> = Vec::new();
    for (w, r) in pts {
        match groups.last_mut() {
            Some(g) if ratio_tie(g.ratio, r, tol) => {
                g.members.push(w);
                g.p += p[w];
                g.q += q[w];
            }
            _ => groups.push(Group { ratio: r, members: vec![w], p: p[w], q: q[w] }),
        }
    }
    groups
}

/// `β_α(P, Q)` by the Neyman–Pearson construction at the default tolerance.
pub fn beta_np<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T) -> Result<BetaResult<T>> {
    beta_np_tol(p, q, alpha, TolerancePolicy::<T>::default().tol_eq)
}

/// `β_α(P, Q)` with ratio ties and mass comparisons resolved at `tol`.
pub fn beta_np_tol<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T, tol: T) -> Result<BetaResult<T>> {
    check_args(p, q, alpha)?;
    let groups = ratio_groups(p, q, tol);
    let finite: Vec<&Group<T>> = groups.iter().filter(|g| g.ratio.is_finite()).collect();
    let mut cum_p = T::zero();
    let mut cum_q = T::zero();
    let mut strict = Vec::new();
    for (k, g) in finite.iter().enumerate() {
        let last = k + 1 == finite.len();
        if cum_p + g.p >= alpha - tol || last {
            let delta = if g.p > T::zero() { ((alpha - cum_p) / g.p).max(T::zero()).min(T::one()) } else { T::zero() };
            let beta = (cum_q + delta * g.q).max(T::zero()).min(T::one());
            let lo = if k == 0 && alpha <= tol { T::zero() } else { g.ratio };
            let hi = if cum_p + g.p <= alpha + tol {
                finite.get(k + 1).map_or(T::infinity(), |n| n.ratio)
            } else {
                g.ratio
            };
            return Ok(BetaResult {
                beta,
                lambda_interval: (lo, hi),
                test: NpTest { strict_set: strict, boundary_set: g.members.clone(), randomization: delta, lambda: g.ratio },
            });
        }
        cum_p += g.p;
        cum_q += g.q;
        strict.extend_from_slice(&g.members);
    }
    // P is a distribution, so some point has finite ratio.
    Err(Error::NotNormalized { sum: 0.0 })
}

/// `Σ_w min(Q(w), λ P(w)) − λ (1 − α)`, the concave dual objective whose
/// maximum over `λ >= 0` is `β_α(P, Q)`.
pub fn beta_objective<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T, lambda: T) -> T {
    let s: T = (0..p.len()).map(|w| q[w].min(lambda * p[w])).sum();
    s - lambda * (T::one() - alpha)
}

/// `β_α(P, Q)` as the maximum of [`beta_objective`] over its breakpoints.
/// Returns `(β, λ*)` with `λ*` the smallest maximizing breakpoint.
pub fn beta_variational<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T) -> Result<(T, T)> {
    check_args(p, q, alpha)?;
    let mut cands: Vec<T> = (0..p.len()).filter_map(|w| ratio(p[w], q[w])).filter(|r| r.is_finite()).collect();
    cands.push(T::zero());
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    cands.dedup();
    let mut best = (T::neg_infinity(), T::zero());
    for lam in cands {
        let v = beta_objective(p, q, alpha, lam);
        if v > best.0 {
            best = (v, lam);
        }
    }
    Ok((best.0.max(T::zero()).min(T::one()), best.1))
}

/// `P{Q/P < λ} <= α <= P{Q/P <= λ}` with masses and ratios compared at `tol`.
pub fn lambda_condition_holds<T: Scalar>(p: &ProbVector<T>, q: &ProbVector<T>, alpha: T, lambda: T, tol: T) -> bool {
    let mut below = T::zero();
    let mut at_or_below = T::zero();
    for w in 0..p.len() {
        let Some(r) = ratio(p[w], q[w]) else { continue };
        if ratio_tie(r, lambda, tol) {
            at_or_below += p[w];
        } else if r < lambda {
            below += p[w];
            at_or_below += p[w];
        }
    }
    below <= alpha + tol && alpha <= at_or_below + tol
}
