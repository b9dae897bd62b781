//! mercer-kit core library.
//!
//! Numerical constructions around bi-Carleman integral operators on L²(ℝ),
//! truncated to a finite orthonormal basis: M-factorizations, bilinear
//! kernel expansions with derivatives, Fredholm-resolvent solution of
//! second-kind integral equations, Fenyö's recursive decomposition, and the
//! unitary smoothing transform that turns abstract matrix operators into
//! smooth sampled kernels.
//!
//! Everything is desk-scale and deterministic: dense complex matrices over
//! an explicit basis, Jacobi-type factorizations with a fixed phase
//! convention, and composite Gauss-Legendre quadrature standing in for the
//! L² inner product.

pub mod basis;
pub mod expand;
pub mod fenyo;
pub mod formats;
pub mod linalg;
pub mod opcore;
pub mod resolvent;
pub mod smoothing;

mod error;

pub use error::{Error, Result};
pub use num_complex::Complex64;
