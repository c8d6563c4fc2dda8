//! Joint design of MIMO radar transmit waveforms and receive filters by
//! Riemannian gradient descent over constant-modulus-type waveform sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`]: array geometry, steering vectors and interference operators;
//! * [`manifolds`]: the CM, ε-CM and CM&S constraint sets;
//! * [`objective`]: SINR, the optimal receiver and the transmit objective;
//! * [`solver`]: the descent loop with constant or Armijo stepsizes;
//! * [`ambiguity`]: range-angle response surfaces of a designed pair;
//! * [`cli`]: scenario files, run/sweep orchestration and artifact output.

pub mod ambiguity;
pub mod cli;
pub mod error;
pub mod manifolds;
pub mod objective;
pub mod scene;
pub mod solver;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

pub use error::{Error, Result};
pub use manifolds::{ConstraintSpec, Waveform};
pub use objective::{ProblemOperators, ReceiveFilter};
pub use scene::{ArrayConfig, Emitter, Scenario};
