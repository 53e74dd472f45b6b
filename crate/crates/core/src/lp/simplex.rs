//! Dense two-phase tableau simplex with Dantzig pricing and a Bland fallback.
//!
//! Problems are stated as `minimize c·x` subject to linear rows with a
//! relation and per-variable bounds (possibly infinite). Internally every
//! variable is shifted, flipped or split so that all structural columns are
//! nonnegative, finite upper bounds become extra rows, and rows are signed
//! so the right-hand side is nonnegative.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivot elements smaller than this are treated as zero.
const PIVOT_EPS: f64 = 1e-9;
/// Reduced costs above `-COST_EPS` count as nonnegative.
const COST_EPS: f64 = 1e-11;
/// Phase-one residual (relative to the largest rhs) accepted as feasible.
const FEAS_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_RUN_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `minimize objective·x` subject to `constraints` and `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<LinearConstraint<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// New problem with every variable in `[0, +inf)`.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        Self { objective, constraints: Vec::new(), lower: vec![T::zero(); n], upper: vec![T::infinity(); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> usize {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(LinearConstraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, T::neg_infinity(), T::infinity());
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.lower.len().min(self.upper.len()) });
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.coeffs.len() });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure("non-finite constraint coefficient".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite objective coefficient".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Optimal point, or the last basic feasible point when unbounded.
    pub primal: Vec<T>,
    pub objective_value: T,
    /// One multiplier per constraint: `d objective / d rhs` at the optimum.
    /// Nonnegative for `Ge` rows, nonpositive for `Le` rows.
    pub dual: Vec<T>,
    /// Improving extreme ray (max-norm 1) when `Unbounded`.
    pub ray: Option<Vec<T>>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
enum VarMap<T> {
    /// x = lower + s
    Shift { col: usize, lower: T },
    /// x = upper - s
    Flip { col: usize, upper: T },
    /// x = s⁺ - s⁻
    Split { pos: usize, neg: usize },
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    /// Reduced costs of the active phase.
    cost: Vec<T>,
    ncols: usize,
    first_artificial: usize,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, q: usize) {
        let piv = self.rows[r][q];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rhs[r] /= piv;
        self.rows[r][q] = T::one();
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][q];
            if f != T::zero() {
                for (v, &p) in self.rows[i].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.rows[i][q] = T::zero();
                self.rhs[i] -= f * prhs;
                if self.rhs[i] < T::zero() && self.rhs[i] > -T::lit(1e-13) {
                    self.rhs[i] = T::zero();
                }
            }
        }
        let f = self.cost[q];
        if f != T::zero() {
            for (v, &p) in self.cost.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.cost[q] = T::zero();
        }
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Sets reduced costs `c - c_B B^{-1} A` for the given column costs.
    fn price(&mut self, c: &[T]) {
        self.cost = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != T::zero() {
                for (v, &a) in self.cost.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * a;
                }
            }
        }
    }

    /// Primal simplex over columns `< allowed`. Prices by most negative
    /// reduced cost and falls back to Bland's rule during long runs of
    /// degenerate pivots, which rules out cycling. Returns the entering
    /// column of an unbounded edge, if any.
    fn optimize(&mut self, allowed: usize) -> Result<Option<usize>> {
        let cost_eps = -T::lit(COST_EPS);
        let piv_eps = T::lit(PIVOT_EPS);
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NumericalFailure("simplex pivot limit exceeded".into()));
            }
            let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;
            let entering = if bland {
                (0..allowed).find(|&j| self.cost[j] < cost_eps)
            } else {
                (0..allowed).filter(|&j| self.cost[j] < cost_eps).min_by(|&a, &b| {
                    self.cost[a].partial_cmp(&self.cost[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
                })
            };
            let Some(q) = entering else {
                return Ok(None);
            };
            // (row, ratio, pivot element)
            let mut best: Option<(usize, T, T)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][q];
                if a > piv_eps {
                    let ratio = self.rhs[i].max(T::zero()) / a;
                    best = match best {
                        None => Some((i, ratio, a)),
                        Some((bi, br, ba)) => {
                            let tie = (ratio - br).abs() <= T::lit(1e-12) * (T::one() + br.abs());
                            let wins_tie = if bland { self.basis[i] < self.basis[bi] } else { a > ba };
                            if ratio < br && !tie || tie && wins_tie {
                                Some((i, ratio, a))
                            } else {
                                Some((bi, br, ba))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(Some(q)),
                Some((r, ratio, _)) => {
                    if ratio > T::zero() {
                        degenerate_run = 0;
                    } else {
                        degenerate_run += 1;
                    }
                    self.pivot(r, q)
                }
            }
        }
    }

    fn basic_values(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs[i];
        }
        x
    }
}

/// Solves `problem`. Deterministic: identical inputs follow identical pivots.
pub fn solve<T: Scalar>(problem: &LpProblem<T>) -> Result<LpSolution<T>> {
    problem.validate()?;
    let n = problem.num_vars();
    let m0 = problem.constraints.len();

    for j in 0..n {
        if problem.lower[j] > problem.upper[j] {
            return Ok(infeasible(n, m0));
        }
    }

    // Structural columns.
    let mut maps = Vec::with_capacity(n);
    let mut ns = 0usize;
    let mut bound_rows: Vec<(usize, T)> = Vec::new();
    for j in 0..n {
        let (lo, up) = (problem.lower[j], problem.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ns, lower: lo });
            if up.is_finite() {
                bound_rows.push((ns, up - lo));
            }
            ns += 1;
        } else if up.is_finite() {
            maps.push(VarMap::Flip { col: ns, upper: up });
            ns += 1;
        } else {
            maps.push(VarMap::Split { pos: ns, neg: ns + 1 });
            ns += 2;
        }
    }

    // Rows over structural columns, rhs adjusted for shifts.
    let m = m0 + bound_rows.len();
    let mut a = vec![vec![T::zero(); ns]; m];
    let mut b = vec![T::zero(); m];
    let mut rel = Vec::with_capacity(m);
    for (i, c) in problem.constraints.iter().enumerate() {
        let mut rhs = c.rhs;
        for (j, &coef) in c.coeffs.iter().enumerate() {
            if coef == T::zero() {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    a[i][col] += coef;
                    rhs -= coef * lower;
                }
                VarMap::Flip { col, upper } => {
                    a[i][col] -= coef;
                    rhs -= coef * upper;
                }
                VarMap::Split { pos, neg } => {
                    a[i][pos] += coef;
                    a[i][neg] -= coef;
                }
            }
        }
        b[i] = rhs;
        rel.push(c.relation);
    }
    for (k, &(col, ub)) in bound_rows.iter().enumerate() {
        a[m0 + k][col] = T::one();
        b[m0 + k] = ub;
        rel.push(Relation::Le);
    }
    let mut flipped = vec![false; m];
    for i in 0..m {
        if b[i] < T::zero() {
            flipped[i] = true;
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
            rel[i] = match rel[i] {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    // Slack / surplus then artificial columns.
    let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
    let first_artificial = ns + n_slack;
    let ncols = first_artificial + n_art;
    let mut rows = vec![vec![T::zero(); ncols]; m];
    let mut basis = vec![0usize; m];
    let mut init_col = vec![0usize; m];
    let (mut s, mut art) = (ns, first_artificial);
    for i in 0..m {
        rows[i][..ns].copy_from_slice(&a[i]);
        match rel[i] {
            Relation::Le => {
                rows[i][s] = T::one();
                basis[i] = s;
                init_col[i] = s;
                s += 1;
            }
            Relation::Ge => {
                rows[i][s] = -T::one();
                s += 1;
                rows[i][art] = T::one();
                basis[i] = art;
                init_col[i] = art;
                art += 1;
            }
            Relation::Eq => {
                rows[i][art] = T::one();
                basis[i] = art;
                init_col[i] = art;
                art += 1;
            }
        }
    }

    let mut tab = Tableau { rows, rhs: b.clone(), basis, cost: vec![T::zero(); ncols], ncols, first_artificial, pivots: 0 };

    // Phase one.
    if n_art > 0 {
        let mut c1 = vec![T::zero(); ncols];
        for v in c1.iter_mut().skip(first_artificial) {
            *v = T::one();
        }
        tab.price(&c1);
        tab.optimize(ncols)?;
        let infeas: T = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &bcol)| bcol >= first_artificial)
            .map(|(i, _)| tab.rhs[i])
            .sum();
        let scale = b.iter().copied().fold(T::one(), T::max);
        if infeas > T::lit(FEAS_EPS) * scale {
            return Ok(infeasible(n, m0));
        }
        // Drive remaining artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= first_artificial {
                let mut best: Option<(usize, T)> = None;
                for j in 0..first_artificial {
                    let v = tab.rows[i][j].abs();
                    if v > T::lit(PIVOT_EPS) && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((j, v));
                    }
                }
                if let Some((j, _)) = best {
                    tab.rhs[i] = T::zero();
                    tab.pivot(i, j);
                }
            }
        }
    }

    // Phase two.
    let mut c2 = vec![T::zero(); ncols];
    for (j, map) in maps.iter().enumerate() {
        let c = problem.objective[j];
        match *map {
            VarMap::Shift { col, .. } => c2[col] = c,
            VarMap::Flip { col, .. } => c2[col] = -c,
            VarMap::Split { pos, neg } => {
                c2[pos] = c;
                c2[neg] = -c;
            }
        }
    }
    tab.price(&c2);
    let unbounded_col = tab.optimize(tab.first_artificial)?;

    let xs = tab.basic_values();
    let primal = map_back(&maps, &xs, true);
    let objective_value = problem.objective.iter().zip(&primal).map(|(&c, &x)| c * x).sum();
    let dual = (0..m0)
        .map(|i| {
            let y = -tab.cost[init_col[i]];
            if flipped[i] {
                -y
            } else {
                y
            }
        })
        .collect();

    match unbounded_col {
        None => Ok(LpSolution { status: LpStatus::Optimal, primal, objective_value, dual, ray: None, pivots: tab.pivots }),
        Some(q) => {
            let mut d = vec![T::zero(); ncols];
            d[q] = T::one();
            for (i, &bcol) in tab.basis.iter().enumerate() {
                d[bcol] = -tab.rows[i][q];
            }
            let mut ray = map_back(&maps, &d, false);
            let norm = ray.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
            if norm > T::zero() {
                for v in ray.iter_mut() {
                    *v /= norm;
                }
            }
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal,
                objective_value: T::neg_infinity(),
                dual,
                ray: Some(ray),
                pivots: tab.pivots,
            })
        }
    }
}

fn map_back<T: Scalar>(maps: &[VarMap<T>], xs: &[T], affine: bool) -> Vec<T> {
    maps.iter()
        .map(|m| match *m {
            VarMap::Shift { col, lower } => {
                if affine {
                    lower + xs[col]
                } else {
                    xs[col]
                }
            }
            VarMap::Flip { col, upper } => {
                if affine {
                    upper - xs[col]
                } else {
                    -xs[col]
                }
            }
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect()
}

fn infeasible<T: Scalar>(n: usize, m: usize) -> LpSolution<T> {
    LpSolution {
        status: LpStatus::Infeasible,
        primal: vec![T::zero(); n],
        objective_value: T::nan(),
        dual: vec![T::zero(); m],
        ray: None,
        pivots: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn minimize_x_at_least_one() {
        let mut p = LpProblem::new(vec![1.0]);
        p.add_constraint(vec![1.0], Relation::Ge, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.primal[0], 1.0) && close(s.objective_value, 1.0));
        assert!(close(s.dual[0], 1.0));
    }

    #[test]
    fn unbounded_ray() {
        let p = LpProblem::new(vec![-1.0]);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
        assert_eq!(s.ray.unwrap(), vec![1.0]);
    }

    #[test]
    fn infeasible_bounds_and_rows() {
        let mut p = LpProblem::new(vec![0.0]);
        p.add_constraint(vec![1.0], Relation::Ge, 1.0);
        p.add_constraint(vec![1.0], Relation::Le, 0.0);
        assert_eq!(solve(&p).unwrap().status, LpStatus::Infeasible);
        let mut q = LpProblem::new(vec![1.0]);
        q.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve(&q).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn textbook_max_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut p = LpProblem::new(vec![-3.0, -5.0]);
        p.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        p.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        p.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.primal[0], 2.0) && close(s.primal[1], 6.0));
        assert!(close(s.objective_value, -36.0));
        // shadow prices of the max problem are (0, 3/2, 1); signs flip for min
        assert!(close(s.dual[0], 0.0) && close(s.dual[1], -1.5) && close(s.dual[2], -1.0));
        let dual_obj: f64 = s.dual.iter().zip([4.0, 12.0, 18.0]).map(|(y, b)| y * b).sum();
        assert!(close(dual_obj, s.objective_value));
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x - y, x free, -1 <= y <= 2, x + y = 1, x >= -3 via row
        let mut p = LpProblem::new(vec![1.0, -1.0]);
        p.set_free(0);
        p.set_bounds(1, -1.0, 2.0);
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        p.add_constraint(vec![1.0, 0.0], Relation::Ge, -3.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.primal[0], -1.0) && close(s.primal[1], 2.0));
        assert!(close(s.objective_value, -3.0));
    }

    #[test]
    fn upper_only_variable() {
        // min -x with x <= 5 and no lower bound
        let mut p = LpProblem::new(vec![-1.0]);
        p.set_bounds(0, f64::NEG_INFINITY, 5.0);
        let s = solve(&p).unwrap();
        assert!(close(s.primal[0], 5.0));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling example (cycles under Dantzig's rule).
        let mut p = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        p.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        p.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective_value, -0.05));
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(vec![1.0, 2.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        p.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective_value, 1.0));
    }

    #[test]
    fn deterministic() {
        let mut p = LpProblem::new(vec![-1.0, -1.0, -1.0]);
        p.add_constraint(vec![1.0, 1.0, 0.0], Relation::Le, 1.0);
        p.add_constraint(vec![0.0, 1.0, 1.0], Relation::Le, 1.0);
        p.add_constraint(vec![1.0, 0.0, 1.0], Relation::Le, 1.0);
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a, b);
    }
}
