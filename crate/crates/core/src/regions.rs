//! Field-region classification for a surface/receiver pair.
//!
//! The radiating near-field/far-field boundary depends on the apertures of
//! both ends of the link, not just the surface: phase coherence across the
//! receiver requires `k * dx_T * dx_R / r < pi` per transverse axis.
//! Multiplying the two axis conditions gives the boundary distance
//! [`field_boundary`] and, read the other way, the largest surface volume
//! that still looks far-field from a given distance
//! ([`max_farfield_volume`]). The ratio of the surface volume to that
//! critical volume is the analytic degrees-of-freedom count
//! ([`analytic_dof`]). Closer still lies the reactive near field, bounded by
//! the classical `0.62 * sqrt(L^3 / lambda)` ([`reactive_boundary`]).

use crate::em::{BoxVolume, SignalParams};
use crate::error::{ModelError, Result};

/// Where a receiver sits relative to the surface's field boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRegion {
    /// Evanescent coupling dominates; the radiating model does not apply.
    Reactive,
    /// Radiating near field: multiple orthogonal sub-channels available.
    RadiatingNearField,
    /// Beyond the boundary: a single rank-one channel.
    FarField,
}

impl std::fmt::Display for FieldRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FieldRegion::Reactive => "reactive",
            FieldRegion::RadiatingNearField => "radiating-near-field",
            FieldRegion::FarField => "far-field",
        };
        f.write_str(s)
    }
}

/// Summary of the region analysis at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegionReport {
    /// Radiating near-field / far-field boundary (m).
    pub boundary_rb_m: f64,
    /// Reactive near-field boundary (m).
    pub reactive_rr_m: f64,
    /// Region containing the evaluated distance.
    pub region: FieldRegion,
    /// Largest surface volume that is still far-field at this distance (m^3).
    pub delta_vt_max_m3: f64,
    /// Analytic degrees of freedom at this distance.
    pub dof: usize,
}

/// Distance of the radiating near-field / far-field boundary:
/// `sqrt(2 * dx_T * dy_T / lambda) * sqrt(2 * dx_R * dy_R / lambda)`.
///
/// Symmetric in the two footprints, so swapping surface and receiver leaves
/// the boundary unchanged.
pub fn field_boundary(params: &SignalParams, tx: &BoxVolume, rx: &BoxVolume) -> f64 {
    let lam = params.wavelength_m;
    (2.0 * tx.extent_x * tx.extent_y / lam).sqrt() * (2.0 * rx.extent_x * rx.extent_y / lam).sqrt()
}

/// Largest surface volume that still sees the receiver in its far field
/// from distance `distance_m`:
/// `(lambda*r / (2*dx_R)) * (lambda*r / (2*dy_R)) * 2*dz_T`.
///
/// Grows with the square of the distance.
pub fn max_farfield_volume(
    params: &SignalParams,
    rx: &BoxVolume,
    distance_m: f64,
    tx_width_z: f64,
) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if !(tx_width_z.is_finite() && tx_width_z > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "surface width must be positive, got {tx_width_z}"
        )));
    }
    let lr = params.wavelength_m * distance_m;
    Ok(lr / (2.0 * rx.extent_x) * (lr / (2.0 * rx.extent_y)) * 2.0 * tx_width_z)
}

/// Analytic degrees of freedom at distance `distance_m`:
/// 1 when the whole surface fits in one critical volume, otherwise the
/// ceiling of `V_T / delta_V_T,max` (equivalently
/// `2*V_T*V_R / ((lambda*r)^2 * dz_T * dz_R)`).
pub fn analytic_dof(
    params: &SignalParams,
    tx: &BoxVolume,
    rx: &BoxVolume,
    distance_m: f64,
) -> Result<usize> {
    let critical = max_farfield_volume(params, rx, distance_m, tx.extent_z)?;
    // ratios a few ulps past an integer count as that integer
    let ratio = tx.volume() / critical - 1e-9;
    if ratio <= 1.0 {
        Ok(1)
    } else {
        Ok(ratio.ceil() as usize)
    }
}

/// Reactive near-field boundary `0.62 * sqrt(L^3 / lambda)` with `L` the
/// largest box extent of the surface.
pub fn reactive_boundary(params: &SignalParams, tx: &BoxVolume) -> f64 {
    let l = tx.max_extent();
    0.62 * (l.powi(3) / params.wavelength_m).sqrt()
}

/// Classify a distance against both boundaries and report the critical
/// volume and DoF there.
///
/// The boundary itself counts as near field (`r <= r_b`), and likewise
/// `r <= r_r` counts as reactive. Errors with
/// [`ModelError::DegenerateRegion`] when the reactive boundary reaches the
/// radiating one and the two formulas have no common domain.
pub fn classify(
    params: &SignalParams,
    tx: &BoxVolume,
    rx: &BoxVolume,
    distance_m: f64,
) -> Result<FieldRegionReport> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    let boundary_rb_m = field_boundary(params, tx, rx);
    let reactive_rr_m = reactive_boundary(params, tx);
    if reactive_rr_m >= boundary_rb_m {
        return Err(ModelError::DegenerateRegion {
            reactive_m: reactive_rr_m,
            boundary_m: boundary_rb_m,
        });
    }
    let region = if distance_m <= reactive_rr_m {
        FieldRegion::Reactive
    } else if distance_m <= boundary_rb_m {
        FieldRegion::RadiatingNearField
    } else {
        FieldRegion::FarField
    };
    Ok(FieldRegionReport {
        boundary_rb_m,
        reactive_rr_m,
        region,
        delta_vt_max_m3: max_farfield_volume(params, rx, distance_m, tx.extent_z)?,
        dof: analytic_dof(params, tx, rx, distance_m)?,
    })
}
