//! Channels, distributions, rates and the numeric tolerance policy.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper limit on `nx^n * ny^n` for an expanded product channel.
pub const PRODUCT_ENTRY_LIMIT: u128 = 1_000_000;

/// Row-stochastic transition matrix `W(y|x)` over finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    nx: usize,
    ny: usize,
    w: Vec<T>,
}

impl<T: Scalar> Channel<T> {
    /// Validates `rows` as a channel. Rows whose sum is within `tol_eq` of one
    /// are renormalized; anything further off is rejected.
    pub fn new(rows: &[Vec<T>], tol_eq: T) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 {
            return Err(Error::EmptyChannel);
        }
        let mut w = Vec::with_capacity(nx * ny);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != ny {
                return Err(Error::RaggedRows { row: x, expected: ny, got: row.len() });
            }
            for (y, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= T::zero()) {
                    return Err(Error::NegativeEntry { row: x, col: y, value: v.to_f64_lossy() });
                }
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol_eq {
                return Err(Error::NonStochasticRow { row: x, sum: sum.to_f64_lossy() });
            }
            w.extend(row.iter().map(|&v| v / sum));
        }
        Ok(Self { nx, ny, w })
    }

    /// Convenience constructor from nested slices with the default `tol_eq`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::new(&rows, TolerancePolicy::<T>::default().tol_eq)
    }

    /// The noiseless channel on `n` symbols.
    pub fn identity(n: usize) -> Self {
        let mut w = vec![T::zero(); n * n];
        for i in 0..n {
            w[i * n + i] = T::one();
        }
        Self { nx: n, ny: n, w }
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: T) -> Self {
        let q = T::one() - p;
        Self { nx: 2, ny: 2, w: vec![q, p, p, q] }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.w[x * self.ny + y]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.w[x * self.ny..(x + 1) * self.ny]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.w.chunks(self.ny)
    }

    /// Tensor product `(W ⊗ V)((y1,y2)|(x1,x2)) = W(y1|x1) V(y2|x2)`, with the
    /// first factor's index most significant.
    pub fn kron(&self, other: &Self) -> Self {
        let nx = self.nx * other.nx;
        let ny = self.ny * other.ny;
        let mut w = Vec::with_capacity(nx * ny);
        for x1 in 0..self.nx {
            for x2 in 0..other.nx {
                for y1 in 0..self.ny {
                    for y2 in 0..other.ny {
                        w.push(self.get(x1, y1) * other.get(x2, y2));
                    }
                }
            }
        }
        Self { nx, ny, w }
    }
}

/// Memoryless extension `W^n(y|x) = prod_i W(y_i|x_i)` in lexicographic index
/// order (first letter most significant).
///
/// Factors are multiplied in ascending order so that sequence pairs sharing
/// a joint type get bit-identical probabilities.
pub fn product_channel<T: Scalar>(w: &Channel<T>, n: usize) -> Result<Channel<T>> {
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let nx_n = checked_pow(w.nx, n);
    let ny_n = checked_pow(w.ny, n);
    let needed = nx_n.saturating_mul(ny_n);
    if needed > PRODUCT_ENTRY_LIMIT {
        return Err(Error::TooLarge { what: "product channel", needed, limit: PRODUCT_ENTRY_LIMIT });
    }
    let (nxn, nyn) = (nx_n as usize, ny_n as usize);
    let xs = digits_table(w.nx, n);
    let ys = digits_table(w.ny, n);
    let mut out = Vec::with_capacity(nxn * nyn);
    let mut factors = vec![T::zero(); n];
    for xd in &xs {
        for yd in &ys {
            for i in 0..n {
                factors[i] = w.get(xd[i], yd[i]);
            }
            factors.sort_by(|a, b| a.partial_cmp(b).expect("finite channel entries"));
            out.push(factors.iter().fold(T::one(), |acc, &f| acc * f));
        }
    }
    Ok(Channel { nx: nxn, ny: nyn, w: out })
}

fn checked_pow(base: usize, n: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

/// Base-`k` digit expansions of `0..k^n`, most significant digit first.
pub(crate) fn digits_table(k: usize, n: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut d = vec![0; n];
            for slot in d.iter_mut().rev() {
                *slot = idx % k;
                idx /= k;
            }
            d
        })
        .collect()
}

/// A probability distribution over a finite set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T> {
    p: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    /// Validates nonnegativity and normalization (within `tol_eq`), then
    /// renormalizes.
    pub fn new(p: Vec<T>, tol_eq: T) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::InvalidProbability { index: i, value: v.to_f64_lossy() });
            }
        }
        let sum: T = p.iter().copied().sum();
        if p.is_empty() || (sum - T::one()).abs() > tol_eq {
            return Err(Error::NotNormalized { sum: sum.to_f64_lossy() });
        }
        Ok(Self { p: p.into_iter().map(|v| v / sum).collect() })
    }

    pub fn from_f64(p: &[f64]) -> Result<Self> {
        Self::new(p.iter().map(|&v| T::lit(v)).collect(), TolerancePolicy::<T>::default().tol_eq)
    }

    pub fn uniform(n: usize) -> Self {
        let v = T::one() / T::from_usize_lossy(n);
        Self { p: vec![v; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![T::zero(); n];
        p[at] = T::one();
        Self { p }
    }

    /// Clamps tiny negatives, zeroes entries at or below `cut`, and
    /// renormalizes. Used on LP outputs.
    pub(crate) fn cleaned(raw: &[T], cut: T) -> Self {
        let mut p: Vec<T> = raw.iter().map(|&v| if v > cut { v } else { T::zero() }).collect();
        let sum: T = p.iter().copied().sum();
        for v in &mut p {
            *v /= sum;
        }
        Self { p }
    }

    pub(crate) fn from_vec_unchecked(p: Vec<T>) -> Self {
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    /// Entries strictly above `tol`.
    pub fn support(&self, tol: T) -> Vec<usize> {
        (0..self.p.len()).filter(|&i| self.p[i] > tol).collect()
    }
}

impl<T> std::ops::Index<usize> for ProbVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.p[i]
    }
}

/// A rate `R` in nats together with the cached threshold `e^{-R}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint<T> {
    rate: T,
    threshold: T,
}

impl<T: Scalar> RatePoint<T> {
    pub fn new(rate: T) -> Result<Self> {
        if !(rate.is_finite() && rate >= T::zero()) {
            return Err(Error::InvalidRate(rate.to_f64_lossy()));
        }
        Ok(Self { rate, threshold: (-rate).exp() })
    }

    pub fn from_bits(bits: T) -> Result<Self> {
        Self::new(bits * T::lit(std::f64::consts::LN_2))
    }

    /// Rate of a code with `m` equiprobable codewords.
    pub fn from_codewords(m: usize) -> Result<Self> {
        Self::new(T::from_usize_lossy(m.max(1)).ln())
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    /// `e^{-R}`.
    pub fn threshold(&self) -> T {
        self.threshold
    }
}

/// The auxiliary vector `z ∈ [0,1]^|Y|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZVector<T> {
    z: Vec<T>,
}

impl<T: Scalar> ZVector<T> {
    pub fn new(z: Vec<T>) -> Result<Self> {
        for (i, &v) in z.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::ZOutOfRange { index: i, value: v.to_f64_lossy() });
            }
        }
        Ok(Self { z })
    }

    pub fn from_f64(z: &[f64]) -> Result<Self> {
        Self::new(z.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self { z: vec![T::zero(); n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { z: vec![T::one(); n] }
    }

    /// Clamps into `[0, 1]`.
    pub(crate) fn clamped(z: Vec<T>) -> Self {
        Self { z: z.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect() }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.z
    }

    pub fn sum(&self) -> T {
        self.z.iter().copied().sum()
    }
}

impl<T> std::ops::Index<usize> for ZVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.z[i]
    }
}

/// Numeric tolerances and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy<T> {
    /// Absolute tolerance for equality of probabilities and masses.
    pub tol_eq: T,
    /// Duality-gap stopping tolerance.
    pub tol_gap: T,
    pub max_iter: usize,
}

impl<T: Scalar> TolerancePolicy<T> {
    pub fn new(tol_eq: T, tol_gap: T, max_iter: usize) -> Result<Self> {
        if !(tol_eq > T::zero() && tol_eq.is_finite()) {
            return Err(Error::InvalidTolerance("tol_eq must be positive"));
        }
        if !(tol_gap > T::zero() && tol_gap.is_finite()) {
            return Err(Error::InvalidTolerance("tol_gap must be positive"));
        }
        if max_iter == 0 {
            return Err(Error::InvalidTolerance("max_iter must be at least 1"));
        }
        Ok(Self { tol_eq, tol_gap, max_iter })
    }
}

impl<T: Scalar> Default for TolerancePolicy<T> {
    /// `tol_eq = 1e-10`, `tol_gap = 1e-8` in double precision; widened to a
    /// multiple of machine epsilon for narrower scalars.
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            tol_eq: T::lit(1e-10).max(eps * T::lit(100.0)),
            tol_gap: T::lit(1e-8).max(eps * T::lit(1e4)),
            max_iter: 10_000,
        }
    }
}
