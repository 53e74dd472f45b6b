//! Minimax-converse lower bounds on the error probability of channel codes.
//!
//! For a channel `W` and rate `R` the bound is the saddle value of
//! `γ(Q_X, z) = Σ Q_X(x) min(W(y|x), z_y) − e^{−R} Σ z_y`, computed here by
//! an LP-driven descent with Farkas optimality certificates. Memoryless
//! channels used `n` times are handled through a type-class reduction.
//!
//! Every numeric routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases fix double precision.

pub mod channel;
pub mod commands;
pub mod dmc;
pub mod error;
pub mod gamma;
pub mod hypothesis;
pub mod io;
pub mod lp;
pub mod oracle;
mod problem;
pub mod saddle;
pub mod scalar;
pub mod verify;

pub use channel::{product_channel, Channel, ProbVector, RatePoint, TolerancePolicy, ZVector};
pub use dmc::{solve_saddle_dmc, DmcSolution, TypeClassIndex};
pub use error::{Error, Result};
pub use gamma::{check_saddle, gamma_eval, max_over_z, optimal_z, recover_qy, score_vector, SaddleReport, ScoreVector};
pub use hypothesis::{beta_np, beta_variational, lambda_condition_holds, BetaResult, NpTest};
pub use saddle::{solve_saddle, IterationTrace, SaddleCertificate, SolveStatus};
pub use scalar::Scalar;

pub type Channel64 = Channel<f64>;
pub type ProbVector64 = ProbVector<f64>;
pub type RatePoint64 = RatePoint<f64>;
pub type ZVector64 = ZVector<f64>;
pub type TolerancePolicy64 = TolerancePolicy<f64>;
pub type SaddleCertificate64 = SaddleCertificate<f64>;
