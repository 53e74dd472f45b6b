//! Iterative saddle-point search for `min_{Q_X} max_z γ(Q_X, z)`.
//!
//! Each round re-optimizes `z`, tries the local LP over `Q_X` with `z`
//! held fixed, and, once that stalls, asks the perturbation LP for a
//! direction along which the outer value still decreases. When no such
//! direction exists the LP duals give a Farkas certificate from which an
//! optimal `z` is rebuilt; inputs outside the support are then checked and,
//! if needed, repaired by moving `z` inside its optimal box.

use crate::channel::{Channel, ProbVector, RatePoint, TolerancePolicy, ZVector};
use crate::error::{Error, Result};
use crate::lp::{farkas_certificate, solve, FarkasCertificate, FarkasOutcome, FarkasSystem, LpProblem, LpStatus, Relation};
use crate::problem::Problem;
use crate::scalar::{value_ge, value_gt, Scalar};

/// Rates of change below this are treated as zero in step-size ratio tests.
const RATE_EPS: f64 = 1e-12;
/// Halvings tried when looking for a longer step than the first breakpoint.
const LINE_SEARCH_STEPS: usize = 60;
/// Consecutive rounds without progress before giving up.
const MAX_STALLS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// The duality gap is within `tol_gap`.
    Converged,
    IterationLimit,
    /// No further progress was possible; the reported value is still a
    /// valid lower bound.
    Stalled,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    LocalLp,
    Improvement,
    ZeroFix,
}

/// One accepted step. `before`/`after` are outer values `max_z γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<T> {
    pub kind: StepKind,
    pub before: T,
    pub after: T,
    pub mu: Option<Vec<T>>,
    pub delta: Option<T>,
    pub eta: Option<T>,
}

/// Outer value and the max-min lower bound at the start of a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iterate<T> {
    pub value: T,
    pub lower_bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    pub steps: Vec<TraceStep<T>>,
    pub iterates: Vec<Iterate<T>>,
}

impl<T> Default for IterationTrace<T> {
    fn default() -> Self {
        Self { steps: Vec::new(), iterates: Vec::new() }
    }
}

impl<T: Scalar> IterationTrace<T> {
    /// True when outer values never increase by more than `tol`.
    pub fn is_monotone(&self, tol: T) -> bool {
        self.iterates.windows(2).all(|w| w[1].value <= w[0].value + tol)
            && self.steps.iter().all(|s| s.after <= s.before + tol)
    }
}

/// The Farkas system solved at the final round, restricted to the inputs
/// in `support`, with the multipliers found for it.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasRecord<T> {
    pub system: FarkasSystem<T>,
    pub certificate: FarkasCertificate<T>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCertificate<T> {
    pub qx_star: ProbVector<T>,
    pub z_star: ZVector<T>,
    /// `min_x score(x)` at `z_star`: always a valid lower bound.
    pub epsilon: T,
    /// `max_z γ(qx_star, z)`: an upper bound on the saddle value.
    pub value: T,
    pub gap: T,
    pub farkas: Option<FarkasRecord<T>>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub tol: TolerancePolicy<T>,
}

impl<T: Scalar> SaddleCertificate<T> {
    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Zero-sum perturbation of an input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationVector<T> {
    mu: Vec<T>,
}

impl<T: Scalar> PerturbationVector<T> {
    pub fn new(mu: Vec<T>, tol_eq: T) -> Result<Self> {
        let s: T = mu.iter().copied().sum();
        if s.abs() > tol_eq || mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotNormalized { sum: s.to_f64_lossy() });
        }
        Ok(Self { mu })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectionOutcome<T> {
    Direction(PerturbationVector<T>),
    GloballyOptimal(FarkasCertificate<T>),
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn clean<T: Scalar>(raw: &[T], cut: T) -> Vec<T> {
    ProbVector::cleaned(raw, cut).as_slice().to_vec()
}

fn scale_of<T: Scalar>(row: &[T]) -> T {
    row.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------------------
// Steps on the weighted problem.

/// Minimizes `Σ q_i score_z(i)` over distributions keeping `z` optimal.
pub(crate) fn local_lp<T: Scalar>(p: &Problem<T>, z: &[T], tol: T) -> Result<Vec<T>> {
    let n = p.n_in;
    let mut lp = LpProblem::new(p.scores(z));
    lp.add_constraint(vec![T::one(); n], Relation::Eq, T::one());
    for j in 0..p.n_out() {
        let gt = p.mass_coeffs(j, z[j], true);
        let mx = scale_of(&gt);
        if mx > p.thr {
            lp.add_constraint(gt.iter().map(|&v| v / mx).collect(), Relation::Le, (p.thr + tol) / mx);
        }
        let ge = p.mass_coeffs(j, z[j], false);
        let mn = ge.iter().copied().fold(T::infinity(), T::min);
        if mn < p.thr {
            let mx = scale_of(&ge);
            if mx == T::zero() {
                return Err(Error::InfeasibleLocalLp);
            }
            lp.add_constraint(ge.iter().map(|&v| v / mx).collect(), Relation::Ge, (p.thr - tol) / mx);
        }
    }
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(clean(&sol.primal, tol)),
        LpStatus::Infeasible => Err(Error::InfeasibleLocalLp),
        LpStatus::Unbounded => Err(Error::NumericalFailure("local LP unbounded over the simplex".into())),
    }
}

pub(crate) fn z_mu_of<T: Scalar>(p: &Problem<T>, mu: &[T], hi: &[T], lo: &[T]) -> Vec<T> {
    (0..p.n_out())
        .map(|j| if dot(mu, &p.mass_coeffs(j, hi[j], false)) >= -T::lit(RATE_EPS) { hi[j] } else { lo[j] })
        .collect()
}

pub(crate) fn eta_of<T: Scalar>(p: &Problem<T>, mu: &[T], hi: &[T], lo: &[T]) -> T {
    let mut e = dot(mu, &p.b(hi));
    for j in 0..p.n_out() {
        let d = dot(mu, &p.mass_coeffs(j, hi[j], false));
        if d < T::zero() {
            e -= (hi[j] - lo[j]) * p.columns[j].mult * d;
        }
    }
    e
}

pub(crate) fn farkas_system_of<T: Scalar>(p: &Problem<T>, q: &[T], hi: &[T], lo: &[T], tol: T) -> (FarkasSystem<T>, Vec<usize>) {
    let support: Vec<usize> = (0..p.n_in).filter(|&i| q[i] > tol).collect();
    let b_full = p.b(hi);
    let b = support.iter().map(|&i| b_full[i]).collect();
    let a = (0..p.n_out())
        .map(|j| {
            let full = p.mass_coeffs(j, hi[j], false);
            support.iter().map(|&i| full[i]).collect()
        })
        .collect();
    let alpha = (0..p.n_out()).map(|j| ((hi[j] - lo[j]) * p.columns[j].mult).max(T::zero())).collect();
    (FarkasSystem { b, a, alpha }, support)
}

/// Optimal `z` rebuilt from Farkas multipliers: `z_j = hi_j − λ_j / mult_j`.
pub(crate) fn z_from_certificate<T: Scalar>(p: &Problem<T>, cert: &FarkasCertificate<T>, hi: &[T], lo: &[T]) -> Vec<T> {
    (0..p.n_out()).map(|j| (hi[j] - cert.lambda[j] / p.columns[j].mult).max(lo[j]).min(hi[j])).collect()
}

/// Moves `q` along `mu` while `zmu` stays optimal, then tries longer
/// steps; returns the new distribution, the step and its outer value.
pub(crate) fn apply_direction_of<T: Scalar>(
    p: &Problem<T>,
    q: &[T],
    mu: &[T],
    zmu: &[T],
    tol: T,
) -> Result<(Vec<T>, T, T)> {
    let v0 = p.value(q, tol);
    let eps = T::lit(RATE_EPS);
    let mut d_nonneg = T::infinity();
    for (&qi, &mi) in q.iter().zip(mu) {
        if mi < -eps {
            d_nonneg = d_nonneg.min(qi / -mi);
        }
    }
    let mut d_star = d_nonneg;
    for (j, &c) in zmu.iter().enumerate() {
        let agt = p.mass_coeffs(j, c, true);
        let r1 = dot(mu, &agt);
        if r1 > eps {
            d_star = d_star.min((p.thr - dot(q, &agt)).max(T::zero()) / r1);
        }
        let age = p.mass_coeffs(j, c, false);
        let r2 = dot(mu, &age);
        if r2 < -eps {
            d_star = d_star.min((dot(q, &age) - p.thr).max(T::zero()) / -r2);
        }
    }
    if !d_nonneg.is_finite() {
        return Err(Error::ZeroStep);
    }
    let mut cands = Vec::new();
    if d_star > T::zero() {
        cands.push(d_star);
    }
    let mut d = d_nonneg;
    for _ in 0..LINE_SEARCH_STEPS {
        if d <= d_star {
            break;
        }
        cands.push(d);
        d = d / T::lit(2.0);
    }
    let mut best: Option<(Vec<T>, T, T)> = None;
    for d in cands {
        let raw: Vec<T> = q.iter().zip(mu).map(|(&qi, &mi)| (qi + d * mi).max(T::zero())).collect();
        let qn = clean(&raw, tol);
        let v = p.value(&qn, tol);
        if best.as_ref().is_none_or(|b| v < b.2) {
            best = Some((qn, d, v));
        }
    }
    match best {
        Some(b) if b.2 < v0 - tol => Ok(b),
        _ => Err(Error::ZeroStep),
    }
}

/// Searches `z` inside the optimal box `[lo, hi]` keeping support scores
/// equal and maximizing the worst off-support margin `t`. Returns `z` and
/// `t`, or `None` when support scores cannot be equalized.
pub(crate) fn zero_fix_of<T: Scalar>(p: &Problem<T>, q: &[T], hi: &[T], lo: &[T], tol: T) -> Result<Option<(Vec<T>, T)>> {
    let n = p.n_in;
    let on: Vec<bool> = q.iter().map(|&v| v > tol).collect();
    // Variable layout: θ_j for free columns, τ, t, then one u per
    // off-support entry strictly inside its column's box.
    let mut theta = vec![None; p.n_out()];
    let mut nv = 0;
    for j in 0..p.n_out() {
        if value_gt(hi[j], lo[j]) {
            theta[j] = Some(nv);
            nv += 1;
        }
    }
    let (tau, t) = (nv, nv + 1);
    nv += 2;
    let mut konst = vec![T::zero(); n];
    let mut lin: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut links: Vec<(usize, usize, T, T, T)> = Vec::new(); // (u, θ, ω(hi−lo), ω lo, ω v)
    for (j, col) in p.columns.iter().enumerate() {
        for e in &col.entries {
            let i = e.input;
            match theta[j] {
                None => konst[i] += e.omega * e.value.min(hi[j]),
                Some(th) => {
                    if value_ge(e.value, hi[j]) {
                        konst[i] += e.omega * lo[j];
                        lin[i].push((th, e.omega * (hi[j] - lo[j])));
                    } else if value_ge(lo[j], e.value) || on[i] {
                        konst[i] += e.omega * e.value;
                    } else {
                        let u = nv;
                        nv += 1;
                        lin[i].push((u, T::one()));
                        links.push((u, th, e.omega * (hi[j] - lo[j]), e.omega * lo[j], e.omega * e.value));
                    }
                }
            }
        }
    }
    let mut obj = vec![T::zero(); nv];
    obj[t] = -T::one();
    let mut lp = LpProblem::new(obj);
    for j in 0..p.n_out() {
        if let Some(th) = theta[j] {
            lp.set_bounds(th, T::zero(), T::one());
        }
    }
    lp.set_free(tau);
    lp.set_bounds(t, T::neg_infinity(), T::one());
    for &(u, _, _, _, cap) in &links {
        lp.set_bounds(u, T::zero(), cap);
    }
    let push_row = |lp: &mut LpProblem<T>, terms: &[(usize, T)], rel: Relation, rhs: T| {
        let mut row = vec![T::zero(); nv];
        for &(k, c) in terms {
            row[k] += c;
        }
        let sc = scale_of(&row).max(T::one());
        lp.add_constraint(row.into_iter().map(|v| v / sc).collect(), rel, rhs / sc);
    };
    for i in 0..n {
        let mut terms = lin[i].clone();
        terms.push((tau, -T::one()));
        if on[i] {
            push_row(&mut lp, &terms, Relation::Eq, -konst[i]);
        } else {
            terms.push((t, -T::one()));
            push_row(&mut lp, &terms, Relation::Ge, -konst[i]);
        }
    }
    for &(u, th, slope, base, _) in &links {
        push_row(&mut lp, &[(u, T::one()), (th, -slope)], Relation::Le, base);
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let z = (0..p.n_out())
        .map(|j| match theta[j] {
            Some(th) => lo[j] + (hi[j] - lo[j]) * sol.primal[th].max(T::zero()).min(T::one()),
            None => hi[j],
        })
        .collect();
    Ok(Some((z, sol.primal[t])))
}

/// `max_{z ∈ [lo, hi]} min_i score_z(i)` as an LP, exact for entries
/// strictly inside a column's box through one capped variable each.
///
/// Returns the maximizing `z`, the optimal value `t` and the row duals as a
/// distribution over inputs. Since the box is the set of maximizers of
/// `γ(q, ·)` at the `q` the box came from, the outer value decreases from `q` towards the dual
/// distribution whenever `t` is below it.
pub(crate) fn box_lp_of<T: Scalar>(p: &Problem<T>, hi: &[T], lo: &[T]) -> Result<Option<(Vec<T>, T, Vec<T>)>> {
    let n = p.n_in;
    let mut theta = vec![None; p.n_out()];
    let mut nv = 0;
    for j in 0..p.n_out() {
        if value_gt(hi[j], lo[j]) {
            theta[j] = Some(nv);
            nv += 1;
        }
    }
    let t = nv;
    nv += 1;
    // score_i = konst_i + Σ lin_i − rate, with rate = rate0 + Σ_j rslope_j θ_j
    let mut konst = vec![T::zero(); n];
    let mut lin: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut links: Vec<(usize, usize, T, T, T)> = Vec::new(); // (u, θ, ω(hi−lo), ω lo, ω v)
    let mut rate0 = T::zero();
    let mut rslope: Vec<(usize, T)> = Vec::new();
    for (j, col) in p.columns.iter().enumerate() {
        match theta[j] {
            None => {
                rate0 += p.thr * col.mult * hi[j];
                for e in &col.entries {
                    konst[e.input] += e.omega * e.value.min(hi[j]);
                }
            }
            Some(th) => {
                rate0 += p.thr * col.mult * lo[j];
                rslope.push((th, p.thr * col.mult * (hi[j] - lo[j])));
                for e in &col.entries {
                    let i = e.input;
                    if value_ge(e.value, hi[j]) {
                        konst[i] += e.omega * lo[j];
                        lin[i].push((th, e.omega * (hi[j] - lo[j])));
                    } else if value_ge(lo[j], e.value) {
                        konst[i] += e.omega * e.value;
                    } else {
                        let u = nv;
                        nv += 1;
                        lin[i].push((u, T::one()));
                        links.push((u, th, e.omega * (hi[j] - lo[j]), e.omega * lo[j], e.omega * e.value));
                    }
                }
            }
        }
    }
    let mut obj = vec![T::zero(); nv];
    obj[t] = -T::one();
    let mut lp = LpProblem::new(obj);
    for th in theta.iter().flatten() {
        lp.set_bounds(*th, T::zero(), T::one());
    }
    lp.set_free(t);
    for &(u, _, _, _, cap) in &links {
        lp.set_bounds(u, T::zero(), cap);
    }
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![T::zero(); nv];
        for &(k, c) in &lin[i] {
            row[k] += c;
        }
        for &(k, c) in &rslope {
            row[k] -= c;
        }
        row[t] = -T::one();
        let sc = scale_of(&row).max(T::one());
        scales.push(sc);
        lp.add_constraint(row.into_iter().map(|v| v / sc).collect(), Relation::Ge, (rate0 - konst[i]) / sc);
    }
    for &(u, th, slope, base, _) in &links {
        let mut row = vec![T::zero(); nv];
        row[u] = T::one();
        row[th] = -slope;
        let sc = scale_of(&row).max(T::one());
        lp.add_constraint(row.into_iter().map(|v| v / sc).collect(), Relation::Le, base / sc);
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let z = (0..p.n_out())
        .map(|j| match theta[j] {
            Some(th) => lo[j] + (hi[j] - lo[j]) * sol.primal[th].max(T::zero()).min(T::one()),
            None => hi[j],
        })
        .collect();
    let raw: Vec<T> = (0..n).map(|i| (sol.dual[i] / scales[i]).max(T::zero())).collect();
    let total: T = raw.iter().copied().sum();
    if !(total > T::zero()) {
        return Ok(None);
    }
    let target = raw.into_iter().map(|v| v / total).collect();
    Ok(Some((z, sol.primal[t], target)))
}

/// Minimizes the outer value on the segment from `q` to `target`, which is
/// convex in the step. Returns the new distribution, the step and value.
pub(crate) fn segment_search<T: Scalar>(p: &Problem<T>, q: &[T], target: &[T], tol: T) -> Option<(Vec<T>, T, T)> {
    let at = |d: T| -> (Vec<T>, T) {
        let raw: Vec<T> = q.iter().zip(target).map(|(&a, &b)| a + d * (b - a)).collect();
        let qn = clean(&raw, T::zero());
        let v = p.value(&qn, tol);
        (qn, v)
    };
    let v0 = p.value(q, tol);
    let g = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let (mut a, mut b) = (T::zero(), T::one());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (at(c).1, at(d).1);
    for _ in 0..LINE_SEARCH_STEPS * 2 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = at(c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = at(d).1;
        }
    }
    let best = [a, c, d, b, T::one()]
        .into_iter()
        .map(|s| {
            let (qn, v) = at(s);
            (qn, s, v)
        })
        .fold(None, |acc: Option<(Vec<T>, T, T)>, c| match acc {
            Some(x) if x.2 <= c.2 => Some(x),
            _ => Some(c),
        })?;
    (best.2 < v0 - tol).then_some(best)
}

// ---------------------------------------------------------------------------
// Driver.

pub(crate) struct Solved<T> {
    pub q: Vec<T>,
    pub z: Vec<T>,
    pub value: T,
    pub epsilon: T,
    pub gap: T,
    pub farkas: Option<FarkasRecord<T>>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: IterationTrace<T>,
}

pub(crate) fn solve_problem<T: Scalar>(p: &Problem<T>, tol: &TolerancePolicy<T>, q0: &[T]) -> Result<Solved<T>> {
    let te = tol.tol_eq;
    let mut q = clean(q0, te);
    let mut trace = IterationTrace::default();
    let mut stalls = 0;
    let mut iterations = 0;

    let finish = |q: Vec<T>, cands: Vec<Vec<T>>, farkas, hint, iterations, trace| {
        let value = p.value(&q, te);
        let (z, epsilon) = cands
            .into_iter()
            .map(|z| {
                let e = p.min_score(&z);
                (z, e)
            })
            .fold(None, |acc: Option<(Vec<T>, T)>, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            })
            .expect("at least one candidate");
        let gap = value - epsilon;
        let status = if gap <= tol.tol_gap { SolveStatus::Converged } else { hint };
        Solved { q, z, value, epsilon, gap, farkas, iterations, status, trace }
    };

    loop {
        let z = p.optimal_z(&q, te);
        let v = p.gamma(&q, &z);
        trace.iterates.push(Iterate { value: v, lower_bound: p.min_score(&z) });
        if iterations >= tol.max_iter {
            return Ok(finish(q, vec![z], None, SolveStatus::IterationLimit, iterations, trace));
        }
        iterations += 1;

        match local_lp(p, &z, te) {
            Ok(q2) => {
                let v2 = p.value(&q2, te);
                if v2 < v - te {
                    trace.steps.push(TraceStep { kind: StepKind::LocalLp, before: v, after: v2, mu: None, delta: None, eta: None });
                    q = q2;
                    stalls = 0;
                    continue;
                }
            }
            Err(Error::InfeasibleLocalLp) => {}
            Err(e) => return Err(e),
        }

        let (hi, lo) = p.tighten(&q, te);
        let (system, support) = farkas_system_of(p, &q, &hi, &lo, te);
        let mut cands = vec![hi.clone()];
        let mut record = None;
        match farkas_certificate(&system)? {
            FarkasOutcome::NoneExists { direction, .. } => {
                let mut mu = vec![T::zero(); p.n_in];
                for (&i, &m) in support.iter().zip(&direction) {
                    mu[i] = m;
                }
                let eta = eta_of(p, &mu, &hi, &lo);
                if eta < -te {
                    let zmu = z_mu_of(p, &mu, &hi, &lo);
                    if let Ok((q2, delta, v2)) = apply_direction_of(p, &q, &mu, &zmu, te) {
                        trace.steps.push(TraceStep {
                            kind: StepKind::Improvement,
                            before: v,
                            after: v2,
                            mu: Some(mu),
                            delta: Some(delta),
                            eta: Some(eta),
                        });
                        q = q2;
                        stalls = 0;
                        continue;
                    }
                }
            }
            FarkasOutcome::Certificate(certificate) => {
                let z0 = z_from_certificate(p, &certificate, &hi, &lo);
                let ok = v - p.min_score(&z0) <= tol.tol_gap;
                cands.push(z0);
                record = Some(FarkasRecord { system, certificate, support });
                if ok {
                    return Ok(finish(q, cands, record, SolveStatus::Stalled, iterations, trace));
                }
            }
        }

        match box_lp_of(p, &hi, &lo)? {
            Some((zb, t, _)) if v - t <= tol.tol_gap => {
                trace.steps.push(TraceStep { kind: StepKind::ZeroFix, before: v, after: v, mu: None, delta: None, eta: None });
                cands.push(zb);
                return Ok(finish(q, cands, record, SolveStatus::Stalled, iterations, trace));
            }
            Some((_, t, target)) => {
                if let Some((q2, delta, v2)) = segment_search(p, &q, &target, te) {
                    let mu: Vec<T> = target.iter().zip(&q).map(|(&a, &b)| a - b).collect();
                    trace.steps.push(TraceStep {
                        kind: StepKind::Improvement,
                        before: v,
                        after: v2,
                        mu: Some(mu),
                        delta: Some(delta),
                        eta: Some(t - v),
                    });
                    q = q2;
                    stalls = 0;
                    continue;
                }
            }
            None => {}
        }
        stalls += 1;
        if stalls > MAX_STALLS {
            return Ok(finish(q, cands, record, SolveStatus::Stalled, iterations, trace));
        }
    }
}

// ---------------------------------------------------------------------------
// Channel-level operations.

fn dims<T: Scalar>(w: &Channel<T>, qx: Option<&ProbVector<T>>, zs: &[&ZVector<T>], mu: Option<&PerturbationVector<T>>) -> Result<()> {
    if let Some(q) = qx {
        if q.len() != w.nx() {
            return Err(Error::DimensionMismatch { expected: w.nx(), got: q.len() });
        }
    }
    if let Some(m) = mu {
        if m.len() != w.nx() {
            return Err(Error::DimensionMismatch { expected: w.nx(), got: m.len() });
        }
    }
    for z in zs {
        if z.len() != w.ny() {
            return Err(Error::DimensionMismatch { expected: w.ny(), got: z.len() });
        }
    }
    Ok(())
}

fn default_tol<T: Scalar>() -> T {
    TolerancePolicy::<T>::default().tol_eq
}

/// One local LP over `Q_X` with `z` fixed. Returns the minimizer and
/// whether it lowers `γ(·, z)` by more than the equality tolerance.
pub fn local_qx_step<T: Scalar>(qx: &ProbVector<T>, z: &ZVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<(ProbVector<T>, bool)> {
    dims(w, Some(qx), &[z], None)?;
    let te = default_tol::<T>();
    let p = Problem::from_channel(w, r);
    let q2 = local_lp(&p, z.as_slice(), te)?;
    if p.gamma(&q2, z.as_slice()) < p.gamma(qx.as_slice(), z.as_slice()) - te {
        Ok((ProbVector::from_vec_unchecked(q2), true))
    } else {
        Ok((qx.clone(), false))
    }
}

/// Ends of the optimal `z` box on the support of `qx`: `(z_tight, z_lower)`.
pub fn tighten_z<T: Scalar>(qx: &ProbVector<T>, z: &ZVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<(ZVector<T>, ZVector<T>)> {
    dims(w, Some(qx), &[z], None)?;
    let (hi, lo) = Problem::from_channel(w, r).tighten(qx.as_slice(), default_tol::<T>());
    Ok((ZVector::clamped(hi), ZVector::clamped(lo)))
}

pub fn z_mu<T: Scalar>(mu: &PerturbationVector<T>, z_tight: &ZVector<T>, z_lower: &ZVector<T>, w: &Channel<T>) -> Result<ZVector<T>> {
    dims(w, None, &[z_tight, z_lower], Some(mu))?;
    let r = RatePoint::new(T::zero())?;
    let p = Problem::from_channel(w, &r);
    Ok(ZVector::clamped(z_mu_of(&p, mu.as_slice(), z_tight.as_slice(), z_lower.as_slice())))
}

/// Directional derivative of the outer value along `mu`.
pub fn eta_direction<T: Scalar>(
    mu: &PerturbationVector<T>,
    z_tight: &ZVector<T>,
    z_lower: &ZVector<T>,
    w: &Channel<T>,
    r: &RatePoint<T>,
) -> Result<T> {
    dims(w, None, &[z_tight, z_lower], Some(mu))?;
    let p = Problem::from_channel(w, r);
    Ok(eta_of(&p, mu.as_slice(), z_tight.as_slice(), z_lower.as_slice()))
}

/// The Farkas system on the support of `qx` for the given box.
pub fn farkas_system<T: Scalar>(
    qx: &ProbVector<T>,
    z_tight: &ZVector<T>,
    z_lower: &ZVector<T>,
    w: &Channel<T>,
    r: &RatePoint<T>,
) -> Result<(FarkasSystem<T>, Vec<usize>)> {
    dims(w, Some(qx), &[z_tight, z_lower], None)?;
    let p = Problem::from_channel(w, r);
    Ok(farkas_system_of(&p, qx.as_slice(), z_tight.as_slice(), z_lower.as_slice(), default_tol::<T>()))
}

/// Either a zero-sum direction (supported on `qx`) with negative
/// derivative, or a certificate that none exists.
pub fn find_improving_direction<T: Scalar>(
    qx: &ProbVector<T>,
    z_tight: &ZVector<T>,
    z_lower: &ZVector<T>,
    w: &Channel<T>,
    r: &RatePoint<T>,
) -> Result<DirectionOutcome<T>> {
    let (system, support) = farkas_system(qx, z_tight, z_lower, w, r)?;
    let te = default_tol::<T>();
    match farkas_certificate(&system)? {
        FarkasOutcome::Certificate(c) => Ok(DirectionOutcome::GloballyOptimal(c)),
        FarkasOutcome::NoneExists { direction, eta } => {
            if eta >= -te {
                // Numerically flat: treat as optimal with the trivial bound.
                let c = FarkasCertificate { lambda: vec![T::zero(); system.num_outputs()], tau: T::zero() };
                return Ok(DirectionOutcome::GloballyOptimal(c));
            }
            let mut mu = vec![T::zero(); w.nx()];
            for (&i, &m) in support.iter().zip(&direction) {
                mu[i] = m;
            }
            Ok(DirectionOutcome::Direction(PerturbationVector { mu }))
        }
    }
}

/// Steps from `qx` along `mu` to the first breakpoint (or further if the
/// outer value keeps falling). Returns the new distribution and `z^μ`.
pub fn apply_direction<T: Scalar>(
    qx: &ProbVector<T>,
    mu: &PerturbationVector<T>,
    z_tight: &ZVector<T>,
    z_lower: &ZVector<T>,
    w: &Channel<T>,
    r: &RatePoint<T>,
) -> Result<(ProbVector<T>, ZVector<T>)> {
    dims(w, Some(qx), &[z_tight, z_lower], Some(mu))?;
    let te = default_tol::<T>();
    let p = Problem::from_channel(w, r);
    if eta_of(&p, mu.as_slice(), z_tight.as_slice(), z_lower.as_slice()) >= -te {
        return Err(Error::ZeroStep);
    }
    let zmu = z_mu_of(&p, mu.as_slice(), z_tight.as_slice(), z_lower.as_slice());
    let (q2, _, _) = apply_direction_of(&p, qx.as_slice(), mu.as_slice(), &zmu, te)?;
    Ok((ProbVector::from_vec_unchecked(q2), ZVector::clamped(zmu)))
}

/// Adjusts `z` inside its optimal box so inputs outside the support of
/// `qx` score at least the saddle value. Returns `z` unchanged when they
/// already do.
pub fn zero_support_fix<T: Scalar>(qx: &ProbVector<T>, z: &ZVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<ZVector<T>> {
    dims(w, Some(qx), &[z], None)?;
    let te = default_tol::<T>();
    let p = Problem::from_channel(w, r);
    let q = qx.as_slice();
    let value = p.gamma(q, z.as_slice());
    let scores = p.scores(z.as_slice());
    if (0..w.nx()).all(|x| q[x] > te || scores[x] >= value - te) {
        return Ok(z.clone());
    }
    let (hi, lo) = p.tighten(q, te);
    match zero_fix_of(&p, q, &hi, &lo, te)? {
        Some((zf, t)) if t >= -te => Ok(ZVector::clamped(zf)),
        _ => Err(Error::NoDecomposition),
    }
}

/// Finds the saddle point of `γ` for channel `w` at rate `r`, starting from
/// `qx0` (uniform when absent).
pub fn solve_saddle<T: Scalar>(
    w: &Channel<T>,
    r: &RatePoint<T>,
    tol: &TolerancePolicy<T>,
    qx0: Option<&ProbVector<T>>,
) -> Result<(SaddleCertificate<T>, IterationTrace<T>)> {
    dims(w, qx0, &[], None)?;
    let p = Problem::from_channel(w, r);
    let q0 = qx0.cloned().unwrap_or_else(|| ProbVector::uniform(w.nx()));
    let s = solve_problem(&p, tol, q0.as_slice())?;
    let cert = SaddleCertificate {
        qx_star: ProbVector::from_vec_unchecked(s.q),
        z_star: ZVector::clamped(s.z),
        epsilon: s.epsilon.max(T::zero()).min(T::one()),
        value: s.value,
        gap: s.gap,
        farkas: s.farkas,
        iterations: s.iterations,
        status: s.status,
        tol: *tol,
    };
    Ok((cert, s.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::check_saddle;

    fn ln2() -> RatePoint<f64> {
        RatePoint::new(std::f64::consts::LN_2).unwrap()
    }

    fn solve(w: &Channel<f64>, r: &RatePoint<f64>) -> SaddleCertificate<f64> {
        solve_saddle(w, r, &TolerancePolicy::default(), None).unwrap().0
    }

    #[test]
    fn fixed_points() {
        assert!((solve(&Channel::bsc(0.3), &ln2()).epsilon - 0.3).abs() < 1e-12);
        assert!(solve(&Channel::identity(2), &ln2()).epsilon.abs() < 1e-12);
        let z = Channel::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap();
        assert!((solve(&z, &ln2()).epsilon - 0.25).abs() < 1e-12);
        let r0 = RatePoint::new(0.0).unwrap();
        assert!(solve(&z, &r0).epsilon.abs() < 1e-12);
    }

    #[test]
    fn bsc_operations() {
        let w = Channel::<f64>::bsc(0.3);
        let q = ProbVector::uniform(2);
        let z = ZVector::from_f64(&[0.7, 0.7]).unwrap();
        let (q2, improved) = local_qx_step(&q, &z, &w, &ln2()).unwrap();
        assert!(!improved);
        assert_eq!(q2, q);
        let (zt, zl) = tighten_z(&q, &z, &w, &ln2()).unwrap();
        assert_eq!(zt.as_slice(), &[0.7, 0.7]);
        assert_eq!(zl.as_slice(), &[0.3, 0.3]);
        let mu = PerturbationVector::new(vec![0.5, -0.5], 1e-12).unwrap();
        assert_eq!(z_mu(&mu, &zt, &zl, &w).unwrap().as_slice(), &[0.7, 0.3]);
        assert!((eta_direction(&mu, &zt, &zl, &w, &ln2()).unwrap() - 0.2).abs() < 1e-15);
        match find_improving_direction(&q, &zt, &zl, &w, &ln2()).unwrap() {
            DirectionOutcome::GloballyOptimal(c) => {
                assert!((c.lambda[0] - c.lambda[1]).abs() < 1e-12);
                assert!(c.lambda[0] >= 0.0 && c.lambda[0] <= 0.4 + 1e-12);
                assert!((c.tau - (1.0 - c.lambda[0])).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_tighten() {
        let w = Channel::<f64>::identity(2);
        let q = ProbVector::uniform(2);
        let (zt, zl) = tighten_z(&q, &ZVector::ones(2), &w, &ln2()).unwrap();
        assert_eq!(zt.as_slice(), &[1.0, 1.0]);
        assert_eq!(zl.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn dominated_row_moves_mass() {
        let w = Channel::from_rows(&[[0.7, 0.3], [0.3, 0.7], [0.5, 0.5]]).unwrap();
        let (cert, trace) = solve_saddle(&w, &ln2(), &TolerancePolicy::default(), None).unwrap();
        assert!(cert.is_converged());
        assert!((cert.epsilon - 0.3).abs() < 1e-10);
        assert!(trace.is_monotone(1e-12));
        assert!(!trace.steps.is_empty());
        let rep = check_saddle(&cert.qx_star, &cert.z_star, &w, &ln2(), 1e-8).unwrap();
        assert!(rep.passed(1e-8), "{rep:?}");
    }

    #[test]
    fn nonnegativity_limits_step() {
        // Moving mass from input 0 to input 1 of a Z-channel away from its
        // optimum cannot go beyond emptying input 0.
        let w = Channel::from_rows(&[[0.9, 0.1], [0.2, 0.8]]).unwrap();
        let q = ProbVector::from_f64(&[0.6, 0.4]).unwrap();
        let p = Problem::from_channel(&w, &ln2());
        let (hi, lo) = p.tighten(q.as_slice(), 1e-10);
        let mu = [-1.0, 1.0];
        let zmu = z_mu_of(&p, &mu, &hi, &lo);
        if let Ok((q2, d, _)) = apply_direction_of(&p, q.as_slice(), &mu, &zmu, 1e-10) {
            assert!(d <= 0.6 + 1e-15);
            assert!(q2.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn zero_fix_leaves_valid_z_alone() {
        let w = Channel::from_rows(&[[0.7, 0.3], [0.3, 0.7], [0.7, 0.3]]).unwrap();
        let q = ProbVector::from_f64(&[0.5, 0.5, 0.0]).unwrap();
        let z = ZVector::from_f64(&[0.7, 0.7]).unwrap();
        assert_eq!(zero_support_fix(&q, &z, &w, &ln2()).unwrap(), z);
    }

    #[test]
    fn near_copy_input_still_certified() {
        for third in [[0.7, 0.3], [0.71, 0.29], [0.75, 0.25], [0.69, 0.31]] {
            let w = Channel::from_rows(&[[0.7, 0.3], [0.3, 0.7], third]).unwrap();
            let c = solve(&w, &ln2());
            let (want, _) = crate::oracle::maxmin_lp(&w, &ln2()).unwrap();
            assert!(c.is_converged());
            assert!((c.epsilon - want).abs() < 1e-9, "{third:?}: {} vs {want}", c.epsilon);
            assert!(check_saddle(&c.qx_star, &c.z_star, &w, &ln2(), 1e-8).unwrap().passed(1e-8));
        }
    }

    #[test]
    fn f32_solve() {
        let w = Channel::<f32>::bsc(0.3);
        let r = RatePoint::new(std::f32::consts::LN_2).unwrap();
        let (c, _) = solve_saddle(&w, &r, &TolerancePolicy::default(), None).unwrap();
        assert!((c.epsilon - 0.3).abs() < 1e-5);
    }
}
