//! Exact AHHP representations of meromorphic connections on the Riemann
//! sphere: the canonical section, Harnad duality, middle convolution and the
//! isomonodromy one-forms, over ℚ(i) and over double-precision complex numbers.

pub mod connection;
pub mod criteria;
pub mod dual;
pub mod error;
pub mod family;
pub mod flow;
pub mod hobject;
pub mod kappa;
pub mod linalg;
pub mod matrix;
pub mod moment;
pub mod normal_form;
pub mod poly;
pub mod random;
pub mod scalar;
pub mod series;
pub mod suite;
pub mod sylvester;
pub mod theta_xi;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use poly::Polynomial;
pub use scalar::{Field, Qi};

/// Double-precision complex scalar used by the flow layer.
pub type C64 = num_complex::Complex64;
/// Exact matrices over ℚ(i).
pub type QMatrix = Matrix<Qi>;
/// Float matrices.
pub type CMatrix = Matrix<C64>;
