//! Weighted form of the saddle problem shared by plain channels and the
//! type-class reduction.
//!
//! Inputs are classes carrying total mass `q_i`. Each output column `j`
//! stands for `mult_j` output symbols sharing one `z_j`. An entry
//! `(i, v, ω, mass)` in column `j` says that a representative of input
//! class `i` meets `ω` outputs of the column at channel value `v`, and
//! contributes `q_i · mass` to the column's interval constraint masses.
//! For a plain channel every weight is one.

use std::cmp::Ordering;

use crate::channel::{Channel, RatePoint};
use crate::scalar::{value_ge, value_gt, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry<T> {
    pub input: usize,
    pub value: T,
    pub omega: T,
    pub mass: T,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Column<T> {
    pub mult: T,
    /// Sorted by value, descending; tied values snapped to the level max.
    pub entries: Vec<Entry<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Problem<T> {
    pub n_in: usize,
    pub thr: T,
    pub columns: Vec<Column<T>>,
}

impl<T: Scalar> Column<T> {
    pub fn new(mult: T, mut entries: Vec<Entry<T>>) -> Self {
        entries.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(Ordering::Equal).then(a.input.cmp(&b.input)));
        let mut level = T::infinity();
        for e in entries.iter_mut() {
            if level.is_finite() && value_ge(e.value, level) {
                e.value = level;
            } else {
                level = e.value;
            }
        }
        Self { mult, entries }
    }
}

impl<T: Scalar> Problem<T> {
    pub fn from_channel(w: &Channel<T>, r: &RatePoint<T>) -> Self {
        let columns = (0..w.ny())
            .map(|y| {
                let entries = (0..w.nx())
                    .map(|x| Entry { input: x, value: w.get(x, y), omega: T::one(), mass: T::one() })
                    .collect();
                Column::new(T::one(), entries)
            })
            .collect();
        Self { n_in: w.nx(), thr: r.threshold(), columns }
    }

    pub fn n_out(&self) -> usize {
        self.columns.len()
    }

    /// `b(i) = Σ_j Σ_e ω_e min(v_e, z_j)`.
    pub fn b(&self, z: &[T]) -> Vec<T> {
        let mut b = vec![T::zero(); self.n_in];
        for (col, &zj) in self.columns.iter().zip(z) {
            for e in &col.entries {
                b[e.input] += e.omega * e.value.min(zj);
            }
        }
        b
    }

    pub fn rate_term(&self, z: &[T]) -> T {
        self.thr * self.columns.iter().zip(z).map(|(c, &zj)| c.mult * zj).sum::<T>()
    }

    pub fn scores(&self, z: &[T]) -> Vec<T> {
        let rt = self.rate_term(z);
        self.b(z).into_iter().map(|b| b - rt).collect()
    }

    pub fn min_score(&self, z: &[T]) -> T {
        self.scores(z).into_iter().fold(T::infinity(), T::min)
    }

    pub fn gamma(&self, q: &[T], z: &[T]) -> T {
        let b = self.b(z);
        q.iter().zip(&b).map(|(&qi, &bi)| qi * bi).sum::<T>() - self.rate_term(z)
    }

    /// `(Q{v > zj}, Q{v >= zj})` for column `j`.
    pub fn masses(&self, q: &[T], j: usize, zj: T) -> (T, T) {
        let mut gt = T::zero();
        let mut ge = T::zero();
        for e in &self.columns[j].entries {
            let m = q[e.input] * e.mass;
            if value_gt(e.value, zj) {
                gt += m;
            }
            if value_ge(e.value, zj) {
                ge += m;
            }
        }
        (gt, ge)
    }

    /// Per-input coefficients of `Q{v >= zj}` (or `Q{v > zj}` when `strict`).
    pub fn mass_coeffs(&self, j: usize, zj: T, strict: bool) -> Vec<T> {
        let mut a = vec![T::zero(); self.n_in];
        for e in &self.columns[j].entries {
            let hit = if strict { value_gt(e.value, zj) } else { value_ge(e.value, zj) };
            if hit {
                a[e.input] += e.mass;
            }
        }
        a
    }

    /// Upper end of the optimal interval for each column.
    pub fn optimal_z(&self, q: &[T], tol: T) -> Vec<T> {
        self.columns
            .iter()
            .map(|col| {
                let mut cum = T::zero();
                let mut k = 0;
                while k < col.entries.len() {
                    let v = col.entries[k].value;
                    while k < col.entries.len() && col.entries[k].value == v {
                        cum += q[col.entries[k].input] * col.entries[k].mass;
                        k += 1;
                    }
                    if cum >= self.thr - tol {
                        return v.max(T::zero()).min(T::one());
                    }
                }
                T::zero()
            })
            .collect()
    }

    /// `max_z γ(q, z)`.
    pub fn value(&self, q: &[T], tol: T) -> T {
        self.gamma(q, &self.optimal_z(q, tol))
    }

    /// Splits the optimal interval of each column into its ends: `hi` is
    /// the highest value at which `Q{v >= hi}` reaches `e^{−R}`, `lo` the
    /// highest value below it at which that mass exceeds `e^{−R}`. Both
    /// tests allow `10·tol`, so rounding mass left by earlier steps cannot
    /// pin the interval to a point.
    pub fn tighten(&self, q: &[T], tol: T) -> (Vec<T>, Vec<T>) {
        let wide = tol * T::lit(10.0);
        let hi = self.optimal_z(q, wide);
        let slack = self.thr + wide;
        let lo = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let (_, mut cum) = self.masses(q, j, hi[j]);
                if cum > slack {
                    return hi[j];
                }
                let below = col.entries.iter().filter(|e| value_gt(hi[j], e.value));
                let mut level = None;
                for e in below {
                    if level.is_some_and(|l| l != e.value && cum > slack) {
                        break;
                    }
                    level = Some(e.value);
                    cum += q[e.input] * e.mass;
                }
                match level {
                    Some(l) if cum > slack => l,
                    _ => T::zero(),
                }
            })
            .collect();
        (hi, lo)
    }

    /// True when `z` satisfies both interval conditions in every column.
    pub fn z_condition(&self, q: &[T], z: &[T], tol: T) -> bool {
        (0..self.n_out()).all(|j| {
            let (gt, ge) = self.masses(q, j, z[j]);
            gt <= self.thr + tol && ge >= self.thr - tol
        })
    }
}
