//! Spectral analysis of ordinary differential operators on a segment with
//! two-point boundary conditions.
//!
//! The crate models operators `(-i)^n D^n + sum_{k<=n-2} p_k(x) D^k` on `[a, b]`
//! subject to `n` boundary conditions `P_j(D)y(a) + Q_j(D)y(b) = 0` and provides:
//!
//! - normalization and classification of boundary-condition systems ([`bc`]),
//! - the algebraic structure matrices behind the closed-form regularized trace
//!   and the identities they satisfy ([`coeffmat`]),
//! - the characteristic determinant and unperturbed Green function ([`greenfn`]),
//! - eigenvalue computation by characteristic-determinant root search and by
//!   Chebyshev collocation ([`spectrum`]),
//! - regularized trace series summed over contour-grouped partial sums and
//!   compared against the closed form ([`trace`]),
//! - numerical equiconvergence diagnostics for the resolvent difference
//!   ([`equiconv`]),
//! - potential/coefficient profiles with endpoint averaged limits ([`profile`]).

pub mod bc;
pub mod cheb;
pub mod coeffmat;
pub mod equiconv;
pub mod error;
pub mod greenfn;
pub mod jsonfmt;
pub mod profile;
pub mod spectrum;
pub mod trace;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
