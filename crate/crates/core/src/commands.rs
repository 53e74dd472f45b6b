//! Library side of the command-line tool: each command returns the text it
//! prints, so the binary stays a thin argument parser.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{Channel, ProbVector, RatePoint, TolerancePolicy};
use crate::dmc::{solve_saddle_dmc, DmcSolution};
use crate::error::{Error, Result};
use crate::hypothesis::beta_np;
use crate::saddle::{solve_saddle, SaddleCertificate, SolveStatus};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// Numerical failure inside the solver.
    pub const NUMERICAL: u8 = 1;
    /// Bad command-line usage (also what the argument parser uses).
    pub const USAGE: u8 = 2;
    /// Malformed or invalid input data.
    pub const INPUT: u8 = 3;
    /// The solver stopped without meeting the gap tolerance.
    pub const NOT_CONVERGED: u8 = 4;
    /// The problem exceeds a size guard.
    pub const TOO_LARGE: u8 = 5;
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TooLarge { .. } => exit::TOO_LARGE,
        Error::NumericalFailure(_) | Error::InfeasibleLocalLp | Error::ZeroStep | Error::NoDecomposition => exit::NUMERICAL,
        Error::InvalidTolerance(_) => exit::USAGE,
        _ => exit::INPUT,
    }
}

pub fn status_exit_code(s: SolveStatus) -> u8 {
    match s {
        SolveStatus::Converged => exit::OK,
        _ => exit::NOT_CONVERGED,
    }
}

/// Twelve significant digits, scientific notation.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

pub fn cmd_beta(p: &ProbVector<f64>, q: &ProbVector<f64>, alpha: f64) -> Result<String> {
    let res = beta_np(p, q, alpha)?;
    let mut s = String::new();
    writeln!(s, "beta {}", fmt12(res.beta)).unwrap();
    writeln!(s, "lambda_min {}", fmt12(res.lambda_interval.0)).unwrap();
    writeln!(s, "lambda_max {}", fmt12(res.lambda_interval.1)).unwrap();
    writeln!(s, "randomization {}", fmt12(res.test.randomization)).unwrap();
    Ok(s)
}

fn summary(s: &mut String, cert: &SaddleCertificate<f64>) {
    writeln!(s, "epsilon {}", fmt12(cert.epsilon)).unwrap();
    writeln!(s, "value {}", fmt12(cert.value)).unwrap();
    writeln!(s, "gap {}", fmt12(cert.gap)).unwrap();
    writeln!(s, "iterations {}", cert.iterations).unwrap();
    writeln!(s, "status {}", cert.status.as_str()).unwrap();
}

/// Full-precision dump of a certificate, one `key value` line each.
pub fn dump_certificate(cert: &SaddleCertificate<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "qx {}", fmt_vec(cert.qx_star.as_slice())).unwrap();
    writeln!(s, "z {}", fmt_vec(cert.z_star.as_slice())).unwrap();
    writeln!(s, "epsilon {:e}", cert.epsilon).unwrap();
    writeln!(s, "value {:e}", cert.value).unwrap();
    writeln!(s, "gap {:e}", cert.gap).unwrap();
    if let Some(f) = &cert.farkas {
        let support: Vec<String> = f.support.iter().map(|i| i.to_string()).collect();
        writeln!(s, "farkas_support {}", support.join(",")).unwrap();
        writeln!(s, "farkas_lambda {}", fmt_vec(&f.certificate.lambda)).unwrap();
        writeln!(s, "farkas_tau {:e}", f.certificate.tau).unwrap();
        writeln!(s, "farkas_residual {:e}", f.system.residual(&f.certificate)).unwrap();
    }
    s
}

pub fn cmd_converse(w: &Channel<f64>, r: &RatePoint<f64>, tol: &TolerancePolicy<f64>, dump: bool) -> Result<(String, SaddleCertificate<f64>)> {
    let (cert, _) = solve_saddle(w, r, tol, None)?;
    let mut s = String::new();
    summary(&mut s, &cert);
    if dump {
        s.push_str(&dump_certificate(&cert));
    }
    Ok((s, cert))
}

/// `r_total` is the rate of the whole block, in nats.
pub fn cmd_converse_dmc(
    w: &Channel<f64>,
    n: usize,
    r_total: &RatePoint<f64>,
    tol: &TolerancePolicy<f64>,
    dump: bool,
) -> Result<(String, DmcSolution<f64>)> {
    let d = solve_saddle_dmc(w, n, r_total, tol)?;
    let mut s = String::new();
    summary(&mut s, &d.certificate);
    writeln!(s, "input_types {}", d.index.num_input_types()).unwrap();
    writeln!(s, "output_types {}", d.index.num_output_types()).unwrap();
    if dump {
        s.push_str(&dump_certificate(&d.certificate));
    }
    Ok((s, d))
}

/// Evenly spaced rates `rate_min..=rate_max`, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub rate_min: f64,
    pub rate_max: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn rates(&self) -> Result<Vec<RatePoint<f64>>> {
        if self.steps == 0 || !(self.rate_min <= self.rate_max) {
            return Err(Error::InvalidRate(self.rate_min));
        }
        (0..self.steps)
            .map(|k| {
                let r = if self.steps == 1 {
                    self.rate_min
                } else {
                    self.rate_min + (self.rate_max - self.rate_min) * k as f64 / (self.steps - 1) as f64
                };
                RatePoint::new(r.min(self.rate_max))
            })
            .collect()
    }
}

/// CSV with header `rate,epsilon,iterations,gap,status`. Points are solved
/// in parallel; the output order and content do not depend on scheduling.
pub fn cmd_sweep(w: &Channel<f64>, spec: &SweepSpec, tol: &TolerancePolicy<f64>) -> Result<String> {
    let rates = spec.rates()?;
    let rows: Vec<Result<String>> = rates
        .par_iter()
        .map(|r| {
            let (c, _) = solve_saddle(w, r, tol, None)?;
            Ok(format!("{},{},{},{},{}", fmt12(r.rate()), fmt12(c.epsilon), c.iterations, fmt12(c.gap), c.status.as_str()))
        })
        .collect();
    let mut s = String::from("rate,epsilon,iterations,gap,status\n");
    for row in rows {
        s.push_str(&row?);
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid() {
        let spec = SweepSpec { rate_min: 0.0, rate_max: 1.0, steps: 5 };
        let r: Vec<f64> = spec.rates().unwrap().iter().map(|r| r.rate()).collect();
        assert_eq!(r, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(SweepSpec { rate_min: 1.0, rate_max: 0.0, steps: 3 }.rates().is_err());
    }

    #[test]
    fn converse_text() {
        let r = RatePoint::new(std::f64::consts::LN_2).unwrap();
        let (s, c) = cmd_converse(&Channel::bsc(0.3), &r, &TolerancePolicy::default(), true).unwrap();
        assert!(s.starts_with("epsilon 3.00000000000e-1\n"), "{s}");
        assert!(s.contains("status converged"));
        assert_eq!(status_exit_code(c.status), exit::OK);
        assert!(s.contains("qx "));
    }

    #[test]
    fn beta_text() {
        let p = ProbVector::from_f64(&[0.5, 0.5]).unwrap();
        let q = ProbVector::from_f64(&[0.9, 0.1]).unwrap();
        let s = cmd_beta(&p, &q, 0.5).unwrap();
        assert!(s.starts_with("beta 1.00000000000e-1\n"), "{s}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::TooLarge { what: "x", needed: 2, limit: 1 }), exit::TOO_LARGE);
        assert_eq!(exit_code(&Error::Parse { line: 1, msg: String::new() }), exit::INPUT);
    }
}
