//! Randomized self-check: solves seeded random instances and compares the
//! fast paths against the brute-force references.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{Channel, ProbVector, RatePoint, TolerancePolicy};
use crate::error::Result;
use crate::gamma::check_saddle;
use crate::hypothesis::{beta_np, beta_variational};
use crate::oracle::{beta_lp_oracle, maxmin_lp};
use crate::saddle::solve_saddle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: usize,
    /// Shift every computed bound by `1e-6` so the comparisons must fail.
    /// Used to check that the suite can fail at all.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFailure {
    /// Seed that reproduces this case alone with `cases = 1`.
    pub seed: u64,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub cases: usize,
    pub failures: Vec<CaseFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.failures {
            writeln!(s, "FAIL {}: {} (reproduce with --seed {} --cases 1)", f.check, f.detail, f.seed).unwrap();
        }
        writeln!(s, "{} cases, {} failures", self.cases, self.failures.len()).unwrap();
        s
    }
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> ProbVector<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen() }).collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            if let Ok(p) = ProbVector::new(raw.iter().map(|v| v / s).collect(), 1e-9) {
                return p;
            }
        }
    }
}

fn run_case(seed: u64, fault: bool, out: &mut Vec<CaseFailure>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = if fault { 1e-6 } else { 0.0 };
    let mut fail = |check, detail: String| out.push(CaseFailure { seed, check, detail });

    let n = rng.gen_range(2..=12);
    let (p, q) = (random_dist(&mut rng, n), random_dist(&mut rng, n));
    let alpha: f64 = rng.gen();
    let np = beta_np(&p, &q, alpha)?.beta + shift;
    let (var, _) = beta_variational(&p, &q, alpha)?;
    let lp = beta_lp_oracle(&p, &q, alpha)?;
    if (np - var).abs() > 1e-10 {
        fail("beta-variational", format!("{np:e} vs {var:e}"));
    }
    if (np - lp).abs() > 1e-8 {
        fail("beta-lp", format!("{np:e} vs {lp:e}"));
    }

    let (nx, ny) = (rng.gen_range(2..=6), rng.gen_range(2..=6));
    let rows: Vec<Vec<f64>> = (0..nx).map(|_| random_dist(&mut rng, ny).as_slice().to_vec()).collect();
    let w = Channel::new(&rows, 1e-9)?;
    let r = RatePoint::new(rng.gen::<f64>() * (nx as f64).ln())?;
    let (cert, trace) = solve_saddle(&w, &r, &TolerancePolicy::default(), None)?;
    let eps = cert.epsilon + shift;
    let (reference, _) = maxmin_lp(&w, &r)?;
    if (eps - reference).abs() > 1e-8 {
        fail("saddle-vs-lp", format!("{eps:e} vs {reference:e}"));
    }
    if !check_saddle(&cert.qx_star, &cert.z_star, &w, &r, 1e-8)?.passed(1e-8) {
        fail("saddle-conditions", format!("status {}", cert.status.as_str()));
    }
    if !trace.is_monotone(0.0) {
        fail("monotone-trace", format!("{} iterates", trace.iterates.len()));
    }
    if let Some(f) = &cert.farkas {
        let res = f.system.residual(&f.certificate);
        if res > 1e-10 || !f.system.within_bounds(&f.certificate, 0.0) {
            fail("farkas-reconstruction", format!("residual {res:e}"));
        }
    }
    Ok(())
}

/// Case `k` uses seed `config.seed + k`.
pub fn run_verify(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport { cases: config.cases, failures: Vec::new() };
    for k in 0..config.cases {
        run_case(config.seed.wrapping_add(k as u64), config.inject_fault, &mut report.failures)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_and_faulty_runs() {
        let ok = run_verify(&VerifyConfig { seed: 7, cases: 20, inject_fault: false }).unwrap();
        assert!(ok.passed(), "{}", ok.render());
        let bad = run_verify(&VerifyConfig { seed: 7, cases: 3, inject_fault: true }).unwrap();
        assert!(!bad.passed());
        assert!(bad.render().contains("--seed 7 --cases 1"));
    }
}
