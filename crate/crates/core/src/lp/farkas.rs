//! Generalized Farkas systems `b = Σ λ_y a_y + τ·1` with box constraints
//! `0 <= λ_y <= α_y`, and the homogeneous perturbation LP that decides them.

use super::simplex::{solve, LpProblem, LpStatus, Relation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Target `b` over inputs, one coefficient vector `a_y` per output, and
/// nonnegative weights `α_y`.
///
/// For a plain channel the `a_y` are 0/1 indicators. For type-reduced
/// problems they are class masses and may be fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasSystem<T> {
    pub b: Vec<T>,
    pub a: Vec<Vec<T>>,
    pub alpha: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate<T> {
    pub lambda: Vec<T>,
    pub tau: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FarkasOutcome<T> {
    Certificate(FarkasCertificate<T>),
    /// No decomposition exists; `direction` sums to zero and has `eta < 0`.
    NoneExists { direction: Vec<T>, eta: T },
}

impl<T: Scalar> FarkasSystem<T> {
    pub fn new(b: Vec<T>, a: Vec<Vec<T>>, alpha: Vec<T>) -> Result<Self> {
        if a.len() != alpha.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: alpha.len() });
        }
        if let Some(row) = a.iter().find(|r| r.len() != b.len()) {
            return Err(Error::DimensionMismatch { expected: b.len(), got: row.len() });
        }
        if let Some((k, &v)) = alpha.iter().enumerate().find(|(_, v)| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidProbability { index: k, value: v.to_f64_lossy() });
        }
        Ok(Self { b, a, alpha })
    }

    pub fn num_inputs(&self) -> usize {
        self.b.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.a.len()
    }

    /// `η(μ) = μᵀb − Σ_y α_y (μᵀa_y) 1{μᵀa_y < 0}`.
    pub fn eta(&self, mu: &[T]) -> T {
        let mut e = dot(mu, &self.b);
        for (ay, &al) in self.a.iter().zip(&self.alpha) {
            let d = dot(mu, ay);
            if d < T::zero() {
                e -= al * d;
            }
        }
        e
    }

    /// `Σ λ_y a_y + τ·1`.
    pub fn reconstruct(&self, cert: &FarkasCertificate<T>) -> Vec<T> {
        let mut out = vec![cert.tau; self.num_inputs()];
        for (ay, &l) in self.a.iter().zip(&cert.lambda) {
            for (o, &v) in out.iter_mut().zip(ay) {
                *o += l * v;
            }
        }
        out
    }

    /// Largest entrywise deviation of the reconstruction from `b`.
    pub fn residual(&self, cert: &FarkasCertificate<T>) -> T {
        self.reconstruct(cert).iter().zip(&self.b).fold(T::zero(), |m, (&r, &b)| m.max((r - b).abs()))
    }

    /// True when every `λ_y` lies in `[−tol, α_y + tol]`.
    pub fn within_bounds(&self, cert: &FarkasCertificate<T>, tol: T) -> bool {
        cert.lambda.len() == self.num_outputs()
            && cert.lambda.iter().zip(&self.alpha).all(|(&l, &a)| l >= -tol && l <= a + tol)
    }

    fn row_scale(&self, y: usize) -> T {
        self.a[y].iter().fold(T::one(), |m, v| m.max(v.abs()))
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Variables `(μ, s)`; minimize `μᵀb + sᵀα` subject to
/// `μᵀa_y + s_y >= 0`, `s >= 0`, `Σ μ = 0`, `μ` free.
///
/// Rows are divided by their max-norm (never by less than one). The LP is
/// homogeneous: its optimum is either 0 or unbounded.
pub fn build_perturbation_lp<T: Scalar>(sys: &FarkasSystem<T>) -> LpProblem<T> {
    perturbation_lp(sys, None)
}

fn perturbation_lp<T: Scalar>(sys: &FarkasSystem<T>, mu_box: Option<T>) -> LpProblem<T> {
    let (nx, ny) = (sys.num_inputs(), sys.num_outputs());
    let mut c = sys.b.clone();
    c.extend_from_slice(&sys.alpha);
    let mut lp = LpProblem::new(c);
    for x in 0..nx {
        match mu_box {
            Some(r) => lp.set_bounds(x, -r, r),
            None => lp.set_free(x),
        }
    }
    for y in 0..ny {
        let sc = sys.row_scale(y);
        let mut row = vec![T::zero(); nx + ny];
        for x in 0..nx {
            row[x] = sys.a[y][x] / sc;
        }
        row[nx + y] = T::one() / sc;
        lp.add_constraint(row, Relation::Ge, T::zero());
    }
    let mut sum = vec![T::zero(); nx + ny];
    for v in sum.iter_mut().take(nx) {
        *v = T::one();
    }
    lp.add_constraint(sum, Relation::Eq, T::zero());
    lp
}

/// Decides whether `b` admits a decomposition `Σ λ_y a_y + τ·1` with
/// `0 <= λ_y <= α_y`, returning the multipliers or an improving direction.
pub fn farkas_certificate<T: Scalar>(sys: &FarkasSystem<T>) -> Result<FarkasOutcome<T>> {
    let nx = sys.num_inputs();
    let sol = solve(&build_perturbation_lp(sys))?;
    match sol.status {
        LpStatus::Optimal => return Ok(FarkasOutcome::Certificate(extract(sys, &sol.dual))),
        LpStatus::Infeasible => return Err(Error::NumericalFailure("perturbation LP reported infeasible".into())),
        LpStatus::Unbounded => {
            let ray = sol.ray.expect("unbounded solution carries a ray");
            let mu = center(&ray[..nx]);
            let eta = sys.eta(&mu);
            if eta < -T::lit(1e-9) {
                return Ok(FarkasOutcome::NoneExists { direction: mu, eta });
            }
        }
    }
    // The ray was numerically flat; settle the question on the boxed LP,
    // whose optimum is 0 exactly when a certificate exists.
    let sol = solve(&perturbation_lp(sys, Some(T::one())))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure("boxed perturbation LP not optimal".into()));
    }
    let mu = center(&sol.primal[..nx]);
    let eta = sys.eta(&mu);
    if eta < -T::lit(1e-12) {
        Ok(FarkasOutcome::NoneExists { direction: mu, eta })
    } else {
        Ok(FarkasOutcome::Certificate(extract(sys, &sol.dual)))
    }
}

fn extract<T: Scalar>(sys: &FarkasSystem<T>, dual: &[T]) -> FarkasCertificate<T> {
    let ny = sys.num_outputs();
    let lambda = (0..ny).map(|y| (dual[y] / sys.row_scale(y)).max(T::zero()).min(sys.alpha[y])).collect();
    FarkasCertificate { lambda, tau: dual[ny] }
}

/// Removes the floating residue of `Σ μ` and renormalizes to max-norm 1.
fn center<T: Scalar>(mu: &[T]) -> Vec<T> {
    let n = T::from_usize_lossy(mu.len().max(1));
    let mean = mu.iter().copied().sum::<T>() / n;
    let mut out: Vec<T> = mu.iter().map(|&v| v - mean).collect();
    let norm = out.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if norm > T::zero() {
        for v in out.iter_mut() {
            *v /= norm;
        }
    }
    out
}
