//! The functional `γ(Q_X, z) = Σ Q_X(x) min(W(y|x), z_y) − e^{−R} Σ z_y`,
//! its exact maximization over `z`, per-input scores and saddle checks.

use std::cmp::Ordering;

use crate::channel::{Channel, ProbVector, RatePoint, TolerancePolicy, ZVector};
use crate::error::{Error, Result};
use crate::scalar::{value_ge, value_gt, Scalar};

/// Per-input terms of `γ` for a fixed `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    /// `b(x) = Σ_y min(W(y|x), z_y)`
    pub b: Vec<T>,
    /// `e^{−R} Σ_y z_y`
    pub rate_term: T,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn score(&self, x: usize) -> T {
        self.b[x] - self.rate_term
    }

    pub fn scores(&self) -> Vec<T> {
        self.b.iter().map(|&b| b - self.rate_term).collect()
    }

    /// `min_x score(x)`, which equals `min_{Q_X} γ(Q_X, z)`.
    pub fn min_score(&self) -> T {
        self.b.iter().fold(T::infinity(), |m, &b| m.min(b)) - self.rate_term
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleReport<T> {
    pub value: T,
    pub support_scores_ok: bool,
    pub offsupport_scores_ok: bool,
    pub z_condition_ok: bool,
    pub duality_gap: T,
}

impl<T: Scalar> SaddleReport<T> {
    pub fn passed(&self, tol: T) -> bool {
        self.support_scores_ok && self.offsupport_scores_ok && self.z_condition_ok && self.duality_gap <= tol
    }
}

fn check_dims<T: Scalar>(qx: Option<&ProbVector<T>>, z: Option<&ZVector<T>>, w: &Channel<T>) -> Result<()> {
    if let Some(q) = qx {
        if q.len() != w.nx() {
            return Err(Error::DimensionMismatch { expected: w.nx(), got: q.len() });
        }
    }
    if let Some(z) = z {
        if z.len() != w.ny() {
            return Err(Error::DimensionMismatch { expected: w.ny(), got: z.len() });
        }
    }
    Ok(())
}

pub fn gamma_eval<T: Scalar>(qx: &ProbVector<T>, z: &ZVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<T> {
    check_dims(Some(qx), Some(z), w)?;
    let s = score_vector(z, w, r)?;
    Ok((0..w.nx()).map(|x| qx[x] * s.b[x]).sum::<T>() - s.rate_term)
}

pub fn score_vector<T: Scalar>(z: &ZVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<ScoreVector<T>> {
    check_dims(None, Some(z), w)?;
    let b = w.rows().map(|row| row.iter().zip(z.as_slice()).map(|(&wv, &zv)| wv.min(zv)).sum()).collect();
    Ok(ScoreVector { b, rate_term: r.threshold() * z.sum() })
}

/// `(Q_X{W(y|·) > z_y}, Q_X{W(y|·) >= z_y})`.
pub fn constraint_masses<T: Scalar>(qx: &ProbVector<T>, w: &Channel<T>, y: usize, zy: T) -> (T, T) {
    let mut gt = T::zero();
    let mut ge = T::zero();
    for x in 0..w.nx() {
        let v = w.get(x, y);
        if value_gt(v, zy) {
            gt += qx[x];
        }
        if value_ge(v, zy) {
            ge += qx[x];
        }
    }
    (gt, ge)
}

/// Inputs sorted by `W(y|x)` descending, bucketed into tied value levels.
fn levels<T: Scalar>(qx: &ProbVector<T>, w: &Channel<T>, y: usize) -> Vec<(T, T, bool)> {
    let mut xs: Vec<usize> = (0..w.nx()).collect();
    xs.sort_by(|&a, &b| w.get(b, y).partial_cmp(&w.get(a, y)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    // (level value, level mass, level holds an input of positive mass)
    let mut out: Vec<(T, T, bool)> = Vec::new();
    for x in xs {
        let v = w.get(x, y);
        match out.last_mut() {
            Some(l) if value_ge(v, l.0) => {
                l.1 += qx[x];
                l.2 |= qx[x] > T::zero();
            }
            _ => out.push((v, qx[x], qx[x] > T::zero())),
        }
    }
    out
}

/// Largest channel value at which the cumulative input mass, sweeping
/// from the top, first reaches `e^{−R}`.
fn crossing<T: Scalar>(levels: &[(T, T, bool)], thr: T, tol: T) -> (usize, T) {
    let mut cum = T::zero();
    for (k, &(v, m, _)) in levels.iter().enumerate() {
        cum += m;
        if cum >= thr - tol {
            return (k, v);
        }
    }
    (levels.len().saturating_sub(1), T::zero())
}

/// Maximizer of `γ(Q_X, ·)`: for each output the upper end of its
/// optimal interval.
pub fn optimal_z<T: Scalar>(qx: &ProbVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> ZVector<T> {
    let tol = TolerancePolicy::<T>::default().tol_eq;
    let z = (0..w.ny()).map(|y| crossing(&levels(qx, w, y), r.threshold(), tol).1).collect();
    ZVector::clamped(z)
}

/// The closed interval of `z_y` values that maximize `γ(Q_X, ·)` in
/// coordinate `y`.
pub fn z_interval<T: Scalar>(qx: &ProbVector<T>, w: &Channel<T>, r: &RatePoint<T>, y: usize, tol: T) -> (T, T) {
    let lv = levels(qx, w, y);
    let (k, hi) = crossing(&lv, r.threshold(), tol);
    let upto: T = lv[..=k].iter().map(|l| l.1).sum();
    if upto > r.threshold() + tol {
        return (hi, hi);
    }
    let lo = lv[k + 1..].iter().find(|l| l.2).map_or(T::zero(), |l| l.0);
    (lo, hi)
}

pub fn max_over_z<T: Scalar>(qx: &ProbVector<T>, w: &Channel<T>, r: &RatePoint<T>) -> Result<(T, ZVector<T>)> {
    check_dims(Some(qx), None, w)?;
    let z = optimal_z(qx, w, r);
    Ok((gamma_eval(qx, &z, w, r)?, z))
}

/// `z = λ Q_Y` with `λ = Σ z_y`.
pub fn recover_qy<T: Scalar>(z: &ZVector<T>) -> Result<(T, ProbVector<T>)> {
    let lam = z.sum();
    if !(lam > T::zero()) {
        return Err(Error::ZeroZ);
    }
    Ok((lam, ProbVector::from_vec_unchecked(z.as_slice().iter().map(|&v| v / lam).collect())))
}

pub fn check_saddle<T: Scalar>(
    qx: &ProbVector<T>,
    z: &ZVector<T>,
    w: &Channel<T>,
    r: &RatePoint<T>,
    tol: T,
) -> Result<SaddleReport<T>> {
    check_dims(Some(qx), Some(z), w)?;
    let thr = r.threshold();
    let z_condition_ok = (0..w.ny()).all(|y| {
        let (gt, ge) = constraint_masses(qx, w, y, z[y]);
        gt <= thr + tol && ge >= thr - tol
    });
    let value = gamma_eval(qx, z, w, r)?;
    let s = score_vector(z, w, r)?;
    let mut support_scores_ok = true;
    let mut offsupport_scores_ok = true;
    for x in 0..w.nx() {
        let sc = s.score(x);
        if qx[x] > tol {
            support_scores_ok &= (sc - value).abs() <= tol;
        } else {
            offsupport_scores_ok &= sc >= value - tol;
        }
    }
    let (best, _) = max_over_z(qx, w, r)?;
    Ok(SaddleReport { value, support_scores_ok, offsupport_scores_ok, z_condition_ok, duality_gap: best - s.min_score() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln2() -> RatePoint<f64> {
        RatePoint::new(std::f64::consts::LN_2).unwrap()
    }

    fn zchannel() -> Channel<f64> {
        Channel::from_rows(&[[1.0, 0.0], [0.5, 0.5]]).unwrap()
    }

    #[test]
    fn gamma_at_zero_and_ones() {
        let w = Channel::<f64>::bsc(0.3);
        let q = ProbVector::from_f64(&[0.2, 0.8]).unwrap();
        let r = RatePoint::new(0.4).unwrap();
        assert_eq!(gamma_eval(&q, &ZVector::zeros(2), &w, &r).unwrap(), 0.0);
        let v = gamma_eval(&q, &ZVector::ones(2), &w, &r).unwrap();
        assert!((v - (1.0 - (-0.4f64).exp() * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn bsc_values() {
        let w = Channel::<f64>::bsc(0.3);
        let q = ProbVector::uniform(2);
        let z = ZVector::from_f64(&[0.7, 0.7]).unwrap();
        assert!((gamma_eval(&q, &z, &w, &ln2()).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(optimal_z(&q, &w, &ln2()).as_slice(), &[0.7, 0.7]);
        let s = score_vector(&z, &w, &ln2()).unwrap();
        assert!(s.scores().iter().all(|v| (v - 0.3).abs() < 1e-15));
        let rep = check_saddle(&q, &z, &w, &ln2(), 1e-10).unwrap();
        assert!(rep.passed(1e-10));
        assert_eq!(z_interval(&q, &w, &ln2(), 0, 1e-10), (0.3, 0.7));
    }

    #[test]
    fn identity_and_zchannel() {
        let q = ProbVector::uniform(2);
        let (v, z) = max_over_z(&q, &Channel::<f64>::identity(2), &ln2()).unwrap();
        assert!(v.abs() < 1e-15);
        assert_eq!(z.as_slice(), &[1.0, 1.0]);
        let w = zchannel();
        let z = optimal_z(&q, &w, &ln2());
        assert_eq!(z.as_slice(), &[1.0, 0.5]);
        let s = score_vector(&z, &w, &ln2()).unwrap();
        assert_eq!(s.b, vec![1.0, 1.0]);
        assert!((s.min_score() - 0.25).abs() < 1e-15);
        assert!(check_saddle(&q, &z, &w, &ln2(), 1e-10).unwrap().passed(1e-10));
    }

    #[test]
    fn zero_rate_value_is_zero() {
        let w = Channel::from_rows(&[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]]).unwrap();
        let r = RatePoint::new(0.0).unwrap();
        let (v, _): (f64, _) = max_over_z(&ProbVector::from_f64(&[0.3, 0.7]).unwrap(), &w, &r).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn point_mass_has_gap() {
        let w = Channel::<f64>::bsc(0.3);
        let q = ProbVector::point_mass(2, 0);
        let z = optimal_z(&q, &w, &ln2());
        let rep = check_saddle(&q, &z, &w, &ln2(), 1e-10).unwrap();
        assert!(rep.support_scores_ok);
        assert!(rep.duality_gap > 0.1);
    }

    #[test]
    fn recover_output_distribution() {
        let (l, qy) = recover_qy(&ZVector::<f64>::from_f64(&[1.0, 0.5]).unwrap()).unwrap();
        assert!((l - 1.5).abs() < 1e-15);
        assert!((qy[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recover_qy(&ZVector::<f64>::zeros(2)), Err(Error::ZeroZ));
    }

    #[test]
    fn dimension_errors() {
        let w = Channel::<f64>::bsc(0.3);
        let q = ProbVector::uniform(3);
        assert!(gamma_eval(&q, &ZVector::zeros(2), &w, &ln2()).is_err());
    }
}
