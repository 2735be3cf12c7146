//! Green's-function channel model for metasurface-based RISs and STAR-RISs.
//!
//! The crate models a reconfigurable intelligent surface as a volume of
//! induced electric currents and propagates them with the free-space scalar
//! Green's function. On top of that it provides:
//!
//! * the Hermitian coupling kernel between source points, its paraxial
//!   approximation, and its discretization into a matrix whose
//!   eigen-structure gives channel gain and degrees of freedom ([`kernel`]),
//! * field-region classification (reactive / radiating near field /
//!   far field) and the critical surface volume for far-field operation
//!   ([`regions`]),
//! * single-user channel-gain upper bounds and power scaling laws
//!   ([`gain`]),
//! * multi-user STAR-RIS configuration strategies (power splitting,
//!   selective and random element grouping) with closed-form per-user
//!   gains ([`multiuser`]),
//! * an outdoor-to-indoor case study with knife-edge diffraction baseline,
//!   3GPP antenna pattern, and indoor coverage grids ([`hybrid`]).
//!
//! All quantities are strict SI (metres, hertz, radians). Channel gains are
//! linear power ratios unless a `_db` suffix says otherwise.

pub mod em;
pub mod error;
pub mod gain;
pub mod hybrid;
pub mod kernel;
pub mod multiuser;
pub mod regions;

pub use em::{BoxVolume, Point3, SignalParams};
pub use error::ModelError;
