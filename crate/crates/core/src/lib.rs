//! Chemical reaction networks with general rate laws: deterministic and
//! stochastic kinetics, large-deviation quasi-potentials, mesoscopic and
//! macroscopic thermodynamic functionals, and fluctuation-dissipation
//! analysis at stable fixed points.

pub mod error;
pub mod fdt;
pub mod netmodel;
pub mod numeric;
pub mod par;

pub mod detkin;
pub mod ldp;
pub mod stochkin;
pub mod stoichio;
pub mod thermo;

#[cfg(test)]
pub(crate) mod fixtures;

pub use error::{Error, Result};
pub use netmodel::{parse_network, Dir, MacroState, MesoState, RateLaw, Reaction, ReactionNetwork};
