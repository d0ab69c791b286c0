//! Discrete rough Hilbert transform along the curve `[m^alpha]`, its maximal
//! truncation, and numerical probes of the Calderón-Zygmund machinery used
//! to study its weak-type (1,1) behaviour.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: finitely supported functions on the integers, dyadic
//!   intervals, conditional expectations, the Hardy-Littlewood maximal
//!   function.
//! * [`measures`]: the curve measures `mu_N`, their reflections and
//!   autocorrelations.
//! * [`operators`]: convolution, `H_M`, `H_M^*`, level sets and the
//!   four-term splitting.
//! * [`czdecomp`]: the Calderón-Zygmund decomposition and the bad/good
//!   function hierarchy.
//! * [`stopping`]: stopping times, `beta_N`, the error function and the
//!   exceptional sets.
//! * [`kernels`]: bilinear kernels and their regularity probes.
//! * [`squarefn`]: the Menshov inequality and the square-function sides.
//! * [`expcli`]: configuration, input generators, sweeps and reports.

pub mod czdecomp;
pub mod error;
pub mod expcli;
pub mod kernels;
pub mod lattice;
pub mod measures;
pub mod numeric;
pub mod operators;
pub mod squarefn;
pub mod stopping;

pub use error::{Error, Result};
pub use lattice::{DyadicInterval, Interval, IntervalFamily, LatticeFunction};
