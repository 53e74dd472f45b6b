//! Type-class reduction for `n` uses of a memoryless channel.
//!
//! The saddle point can be taken uniform on input and output type classes,
//! so the variables shrink to one weight per input type and one `z` per
//! output type. Class sizes are kept as logarithms; only ratios of sizes
//! and products with channel values are exponentiated.

use crate::channel::{digits_table, product_channel, Channel, ProbVector, RatePoint, TolerancePolicy, ZVector};
use crate::error::{Error, Result};
use crate::problem::{Column, Entry, Problem};
use crate::saddle::{solve_problem, IterationTrace, SaddleCertificate};
use crate::scalar::{log_factorials, log_sum_exp, Scalar};

/// Largest number of joint types [`build_index`] will enumerate.
pub const JOINT_TYPE_LIMIT: u128 = 2_000_000;

/// A joint type: `counts[a * ny + b]` letters with input `a` and output `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointType {
    pub counts: Vec<usize>,
    pub input_type: usize,
    pub output_type: usize,
    /// `ln |T_{x,y}|`
    pub log_size: f64,
    /// `ln |T_{y|x}|`
    pub log_cond_y_given_x: f64,
    /// `ln |T_{x|y}|`
    pub log_cond_x_given_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassIndex {
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    /// Letter counts of each input type.
    pub input_types: Vec<Vec<usize>>,
    pub output_types: Vec<Vec<usize>>,
    pub joint_types: Vec<JointType>,
    /// `ln |T_x|` per input type.
    pub log_size_x: Vec<f64>,
    /// `ln |T_y|` per output type.
    pub log_size_y: Vec<f64>,
}

/// All compositions of `n` into `k` ordered nonnegative parts, in
/// lexicographically decreasing order of the first part.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=n).rev() {
            prefix.push(first);
            rec(n - first, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn log_multinomial(lf: &[f64], total: usize, parts: impl IntoIterator<Item = usize>) -> f64 {
    lf[total] - parts.into_iter().map(|c| lf[c]).sum::<f64>()
}

/// Enumerates input, output and joint types of length-`n` sequences.
pub fn build_index(nx: usize, ny: usize, n: usize) -> Result<TypeClassIndex> {
    if nx == 0 || ny == 0 {
        return Err(Error::EmptyChannel);
    }
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let input_types = compositions(n, nx);
    // Guard on the joint-type count before enumerating.
    let mut needed: u128 = 0;
    for t in &input_types {
        let per: u128 = t.iter().fold(1u128, |acc, &k| acc.saturating_mul(binomial((k + ny - 1) as u128, (ny - 1) as u128)));
        needed = needed.saturating_add(per);
    }
    if needed > JOINT_TYPE_LIMIT {
        return Err(Error::TooLarge { what: "joint types", needed, limit: JOINT_TYPE_LIMIT });
    }
    let output_types = compositions(n, ny);
    let lf = log_factorials::<f64>(n);
    let log_size_x: Vec<f64> = input_types.iter().map(|t| log_multinomial(&lf, n, t.iter().copied())).collect();
    let log_size_y: Vec<f64> = output_types.iter().map(|t| log_multinomial(&lf, n, t.iter().copied())).collect();
    let out_pos = |counts: &[usize]| -> usize {
        // Position of an output type among `compositions(n, ny)`.
        let mut col = vec![0usize; ny];
        for a in 0..nx {
            for b in 0..ny {
                col[b] += counts[a * ny + b];
            }
        }
        output_types.binary_search_by(|t| col.cmp(t)).expect("column sums form an output type")
    };

    let mut joint_types = Vec::with_capacity(needed as usize);
    for (ti, t) in input_types.iter().enumerate() {
        let rows: Vec<Vec<Vec<usize>>> = t.iter().map(|&k| compositions(k, ny)).collect();
        let mut pick = vec![0usize; nx];
        loop {
            let mut counts = Vec::with_capacity(nx * ny);
            for a in 0..nx {
                counts.extend_from_slice(&rows[a][pick[a]]);
            }
            let log_size = log_multinomial(&lf, n, counts.iter().copied());
            let output_type = out_pos(&counts);
            joint_types.push(JointType {
                log_cond_y_given_x: log_size - log_size_x[ti],
                log_cond_x_given_y: log_size - log_size_y[output_type],
                counts,
                input_type: ti,
                output_type,
                log_size,
            });
            // Odometer over one row composition per input letter.
            let mut a = nx;
            let done = loop {
                if a == 0 {
                    break true;
                }
                a -= 1;
                pick[a] += 1;
                if pick[a] < rows[a].len() {
                    break false;
                }
                pick[a] = 0;
            };
            if done {
                break;
            }
        }
    }
    Ok(TypeClassIndex { n, nx, ny, input_types, output_types, joint_types, log_size_x, log_size_y })
}

impl TypeClassIndex {
    pub fn num_input_types(&self) -> usize {
        self.input_types.len()
    }

    pub fn num_output_types(&self) -> usize {
        self.output_types.len()
    }

    /// Position of the type of `letters` among the input types.
    pub fn input_type_of(&self, letters: &[usize]) -> usize {
        type_of(&self.input_types, letters, self.nx)
    }

    pub fn output_type_of(&self, letters: &[usize]) -> usize {
        type_of(&self.output_types, letters, self.ny)
    }
}

fn type_of(types: &[Vec<usize>], letters: &[usize], k: usize) -> usize {
    let mut c = vec![0usize; k];
    for &l in letters {
        c[l] += 1;
    }
    types.binary_search_by(|t| c.cmp(t)).expect("letters form a type")
}

/// `ln Wⁿ(y|x)` for any pair in the joint type; `-inf` when a counted
/// transition has probability zero.
pub fn channel_value_on_joint_type<T: Scalar>(w: &Channel<T>, counts: &[usize]) -> T {
    let ny = w.ny();
    let mut acc = T::zero();
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let p = w.get(k / ny, k % ny);
        if p <= T::zero() {
            return T::neg_infinity();
        }
        acc += T::from_usize_lossy(c) * p.ln();
    }
    acc
}

/// Per-type weights `λ_T` (total input mass of each class) and per-output-
/// type values `z_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeWeights<T> {
    pub lambda: ProbVector<T>,
    pub z: ZVector<T>,
}

impl<T: Scalar> TypeWeights<T> {
    pub fn new(lambda: ProbVector<T>, z: ZVector<T>, index: &TypeClassIndex) -> Result<Self> {
        if lambda.len() != index.num_input_types() {
            return Err(Error::DimensionMismatch { expected: index.num_input_types(), got: lambda.len() });
        }
        if z.len() != index.num_output_types() {
            return Err(Error::DimensionMismatch { expected: index.num_output_types(), got: z.len() });
        }
        Ok(Self { lambda, z })
    }

    /// Weights of the i.i.d. distribution `P^n` on input sequences.
    pub fn iid_lambda(index: &TypeClassIndex, p: &ProbVector<T>) -> ProbVector<T> {
        let v = index
            .input_types
            .iter()
            .zip(&index.log_size_x)
            .map(|(t, &ls)| {
                let lp: T = t
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| if c == 0 { T::zero() } else { T::from_usize_lossy(c) * p[a].ln() })
                    .sum();
                (T::lit(ls) + lp).exp()
            })
            .collect();
        ProbVector::from_vec_unchecked(v)
    }
}

/// `Q{Wⁿ(y|·) > z}` (or `>=` unless `strict`) for a representative `y`
/// of output type `y_type`, at `z = weights.z[y_type]`.
pub fn reduced_constraint_mass<T: Scalar>(
    weights: &TypeWeights<T>,
    index: &TypeClassIndex,
    w: &Channel<T>,
    y_type: usize,
    strict: bool,
) -> T {
    let z = weights.z[y_type];
    let terms = index.joint_types.iter().filter(|j| j.output_type == y_type).filter_map(|j| {
        let lw = channel_value_on_joint_type(w, &j.counts);
        let v = lw.exp();
        let hit = if strict { crate::scalar::value_gt(v, z) } else { crate::scalar::value_ge(v, z) };
        let lam = weights.lambda[j.input_type];
        (hit && lam > T::zero()).then(|| lam.ln() + T::lit(j.log_cond_x_given_y - index.log_size_x[j.input_type]))
    });
    log_sum_exp(terms).exp()
}

/// `γ` in type coordinates:
/// `Σ_joint |T_{y|x}| λ_{T_x} min(Wⁿ, z_{T_y}) − e^{−R} Σ_{T_y} |T_y| z_{T_y}`.
pub fn reduced_gamma<T: Scalar>(weights: &TypeWeights<T>, index: &TypeClassIndex, w: &Channel<T>, r: &RatePoint<T>) -> T {
    let terms = index.joint_types.iter().filter_map(|j| {
        let lam = weights.lambda[j.input_type];
        let z = weights.z[j.output_type];
        let m = channel_value_on_joint_type(w, &j.counts).min(z.ln());
        (lam > T::zero() && m > T::neg_infinity()).then(|| T::lit(j.log_cond_y_given_x) + lam.ln() + m)
    });
    let first = log_sum_exp(terms).exp();
    let rate = log_sum_exp(
        index.log_size_y.iter().zip(weights.z.as_slice()).filter(|(_, &z)| z > T::zero()).map(|(&ls, &z)| T::lit(ls) + z.ln()),
    )
    .exp();
    first - r.threshold() * rate
}

pub(crate) fn reduced_problem<T: Scalar>(index: &TypeClassIndex, w: &Channel<T>, r: &RatePoint<T>) -> Problem<T> {
    let mut per_col: Vec<Vec<Entry<T>>> = vec![Vec::new(); index.num_output_types()];
    for j in &index.joint_types {
        let lw = channel_value_on_joint_type(w, &j.counts);
        per_col[j.output_type].push(Entry {
            input: j.input_type,
            value: lw.exp(),
            omega: T::lit(j.log_cond_y_given_x).exp(),
            mass: T::lit(j.log_cond_x_given_y - index.log_size_x[j.input_type]).exp(),
        });
    }
    let columns = per_col
        .into_iter()
        .zip(&index.log_size_y)
        .map(|(entries, &ls)| Column::new(T::lit(ls).exp(), entries))
        .collect();
    Problem { n_in: index.num_input_types(), thr: r.threshold(), columns }
}

/// Saddle point of the type-reduced problem.
#[derive(Debug, Clone)]
pub struct DmcSolution<T> {
    /// `qx_star` holds the type weights `λ_T`, `z_star` the per-output-type `z`.
    pub certificate: SaddleCertificate<T>,
    pub trace: IterationTrace<T>,
    pub index: TypeClassIndex,
}

impl<T: Scalar> DmcSolution<T> {
    pub fn weights(&self) -> TypeWeights<T> {
        TypeWeights { lambda: self.certificate.qx_star.clone(), z: self.certificate.z_star.clone() }
    }

    /// True when every `z_T` lies in its optimal interval for the type
    /// weights, i.e. the reduced `z` maximizes `γ` at `λ`.
    pub fn z_condition_holds(&self, w: &Channel<T>, r: &RatePoint<T>, tol: T) -> bool {
        let p = reduced_problem(&self.index, w, r);
        p.z_condition(self.certificate.qx_star.as_slice(), self.certificate.z_star.as_slice(), tol)
    }

    /// Input distribution on sequences, uniform within each type class.
    pub fn expand_qx(&self) -> Result<ProbVector<T>> {
        let seqs = expansion_guard(self.index.nx, self.index.n)?;
        let q = seqs
            .iter()
            .map(|s| {
                let t = self.index.input_type_of(s);
                self.certificate.qx_star[t] / T::lit(self.index.log_size_x[t]).exp()
            })
            .collect();
        Ok(ProbVector::from_vec_unchecked(q))
    }

    /// `z` on output sequences, constant on type classes.
    pub fn expand_z(&self) -> Result<ZVector<T>> {
        let seqs = expansion_guard(self.index.ny, self.index.n)?;
        Ok(ZVector::clamped(seqs.iter().map(|s| self.certificate.z_star[self.index.output_type_of(s)]).collect()))
    }
}

fn expansion_guard(k: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    let needed = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > crate::channel::PRODUCT_ENTRY_LIMIT {
        return Err(Error::TooLarge { what: "sequence expansion", needed, limit: crate::channel::PRODUCT_ENTRY_LIMIT });
    }
    Ok(digits_table(k, n))
}

/// Minimax converse for `n` uses of `w` at total rate `r` (nats per block).
pub fn solve_saddle_dmc<T: Scalar>(w: &Channel<T>, n: usize, r: &RatePoint<T>, tol: &TolerancePolicy<T>) -> Result<DmcSolution<T>> {
    let index = build_index(w.nx(), w.ny(), n)?;
    let p = reduced_problem(&index, w, r);
    let q0 = TypeWeights::iid_lambda(&index, &ProbVector::uniform(w.nx()));
    let s = solve_problem(&p, tol, q0.as_slice())?;
    let certificate = SaddleCertificate {
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
    Ok(DmcSolution { certificate, trace: s.trace, index })
}

/// The expanded product channel, for cross-checks at small `n`.
pub fn expanded_channel<T: Scalar>(w: &Channel<T>, n: usize) -> Result<Channel<T>> {
    product_channel(w, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::gamma_eval;
    use crate::saddle::solve_saddle;

    #[test]
    fn small_index() {
        let idx = build_index(2, 2, 2).unwrap();
        assert_eq!(idx.input_types, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert!((idx.log_size_x[1] - 2f64.ln()).abs() < 1e-15);
        let idx3 = build_index(2, 2, 3).unwrap();
        let total: f64 = idx3.log_size_x.iter().map(|l| l.exp()).sum();
        assert!((total - 8.0).abs() < 1e-9);
        for j in &idx3.joint_types {
            assert!((j.log_size - idx3.log_size_x[j.input_type] - j.log_cond_y_given_x).abs() < 1e-12);
        }
        // 2x2 joint types for n = 3: sum over k of (k+1)(4-k)
        assert_eq!(idx3.joint_types.len(), 4 + 6 + 6 + 4);
    }

    #[test]
    fn joint_type_values() {
        let bsc = Channel::<f64>::bsc(0.3);
        assert!((channel_value_on_joint_type(&bsc, &[2, 0, 0, 0]) - 0.49f64.ln()).abs() < 1e-15);
        assert!((channel_value_on_joint_type(&bsc, &[1, 1, 0, 0]) - 0.21f64.ln()).abs() < 1e-15);
        assert_eq!(channel_value_on_joint_type(&Channel::<f64>::identity(2), &[0, 1, 0, 0]), f64::NEG_INFINITY);
    }

    #[test]
    fn guard() {
        assert!(matches!(build_index(4, 4, 40), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn reduced_gamma_matches_expanded() {
        let w = Channel::<f64>::bsc(0.3);
        let r = RatePoint::new(2.0 * std::f64::consts::LN_2).unwrap();
        let idx = build_index(2, 2, 2).unwrap();
        let lambda = TypeWeights::iid_lambda(&idx, &ProbVector::uniform(2));
        let z = ZVector::from_f64(&[0.49, 0.21, 0.09]).unwrap();
        let wt = TypeWeights::new(lambda, z, &idx).unwrap();
        let w2 = product_channel(&w, 2).unwrap();
        let q = ProbVector::uniform(4);
        let zs: Vec<f64> = digits_table(2, 2).iter().map(|s| wt.z[idx.output_type_of(s)]).collect();
        let direct = gamma_eval(&q, &ZVector::from_f64(&zs).unwrap(), &w2, &r).unwrap();
        let reduced = reduced_gamma(&wt, &idx, &w, &r);
        assert!((direct - reduced).abs() < 1e-12);
        let zero = TypeWeights::new(wt.lambda.clone(), ZVector::zeros(3), &idx).unwrap();
        assert_eq!(reduced_gamma(&zero, &idx, &w, &r), 0.0);
        // seen from y = 01 at z = 0.21 under uniform inputs
        let m = reduced_constraint_mass(&wt, &idx, &w, 1, false);
        assert!((m - 0.75).abs() < 1e-12, "{m}");
        let m = reduced_constraint_mass(&wt, &idx, &w, 1, true);
        assert!((m - 0.25).abs() < 1e-12, "{m}");
    }

    #[test]
    fn matches_expanded_solver() {
        let w = Channel::<f64>::bsc(0.3);
        let tol = TolerancePolicy::default();
        let r = RatePoint::new(2.0 * std::f64::consts::LN_2).unwrap();
        let d = solve_saddle_dmc(&w, 2, &r, &tol).unwrap();
        let (e, _) = solve_saddle(&product_channel(&w, 2).unwrap(), &r, &tol, None).unwrap();
        assert!((d.certificate.epsilon - e.epsilon).abs() < 1e-10);
        let one = solve_saddle_dmc(&w, 1, &RatePoint::new(std::f64::consts::LN_2).unwrap(), &tol).unwrap();
        assert!((one.certificate.epsilon - 0.3).abs() < 1e-10);
        let zero = solve_saddle_dmc(&w, 2, &RatePoint::new(0.0).unwrap(), &tol).unwrap();
        assert!(zero.certificate.epsilon.abs() < 1e-10);
        assert_eq!(d.expand_qx().unwrap().len(), 4);
        assert!(d.z_condition_holds(&w, &r, 1e-9));
    }
}
