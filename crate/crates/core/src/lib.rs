//! Gaussian smoothing (with first and second derivatives) and Morlet wavelet
//! transforms whose cost does not depend on the smoothing size.
//!
//! The kernels are approximated by short trigonometric series fitted in the
//! least-squares sense ([`fourier`]). Convolving with such a series reduces to
//! a handful of sliding Fourier components per sample ([`engine`]), which can
//! be evaluated by a kernel integral, by first- or second-order recursive
//! filters, or by the log-depth data-parallel sliding sum in [`sliding_sum`].
//! An exponentially attenuated variant keeps recursive state bounded in single
//! precision; the attenuation is undone by an integer output shift.
//!
//! [`smoothers`] assembles components into end-user transforms, [`kernels`]
//! holds the analytic kernels and the brute-force convolution oracle, and
//! [`eval`] reproduces the accuracy experiments.

pub mod benchmark;
pub mod engine;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fourier;
pub mod kernels;
pub mod signal;
pub mod sliding_sum;
pub mod smoothers;

pub use error::{Error, Result};
pub use exec::Workers;
pub use signal::{BoundaryPolicy, Precision, Signal, TestSignal};
