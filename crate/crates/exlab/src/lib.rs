//! A laboratory for exclusion processes on `Z^d` and on trees.
//!
//! The crate has three layers:
//!
//! * structure: jump kernels and their stationary product measures
//!   ([`kernels`], [`measures`]) -- which density profiles `alpha` make the
//!   product measure `nu_alpha` stationary or reversible, enumerated exactly;
//! * dynamics: an exact continuous-time simulator for the particle system on
//!   finite windows with periodic / closed / reservoir boundaries
//!   ([`dynamics`]), plus the basic coupling of two or more copies
//!   ([`coupling`]);
//! * continuum: entropy solutions of the associated Burgers equation, both
//!   closed-form and finite-volume ([`burgers`]), and the scaling experiments
//!   that tie the simulator to the PDE ([`hydro`]).
//!
//! Everything stochastic is driven by explicitly seeded streams; a fixed
//! `(seed, replicate)` pair reproduces a trajectory bit for bit.

pub mod burgers;
pub mod coupling;
pub mod dynamics;
pub mod hydro;
pub mod io;
pub mod kernels;
pub mod measures;
pub mod stats;
