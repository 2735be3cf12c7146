//! Physical constants, geometry primitives, the scalar Green's function,
//! and the focusing phase function.
//!
//! Everything else in the crate is built from the three leaves defined
//! here: [`green_yy`] propagates a y-polarized point current to a field
//! point, [`focusing_phase`] is the lens-like phase profile that makes all
//! source contributions add constructively at a target, and
//! [`local_frame`] expresses points in the element-centered frame whose
//! +z axis looks at the target.

use num_complex::Complex64;

use crate::error::{ModelError, Result};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;

/// Permeability of free space (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Permittivity of free space (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Carrier description plus the complex coupling prefactor of the Green's
/// function.
///
/// The literal prefactor `j*omega*mu0 + k^2/(j*omega*eps0)` evaluates to
/// exactly zero in free space (both terms have magnitude `omega*mu0`), which
/// would null every gain expression. The prefactor is therefore exposed as a
/// configurable complex constant `beta`, defaulting to the standard
/// radiation prefactor `-j*omega*mu0`. Every gain carries `|beta|^2`
/// multiplicatively, so the choice rescales but never reorders results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// Carrier frequency (Hz).
    pub frequency_hz: f64,
    /// Carrier wavelength (m), `c / f`.
    pub wavelength_m: f64,
    /// Wavenumber (rad/m), `2*pi / lambda`.
    pub wavenumber: f64,
    /// Angular frequency (rad/s), `2*pi*f`.
    pub angular_freq: f64,
    /// Complex coupling prefactor of the Green's function.
    pub beta: Complex64,
}

impl SignalParams {
    /// Build parameters for a carrier frequency, with the default
    /// `beta = -j*omega*mu0`.
    pub fn new(frequency_hz: f64) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "frequency must be positive and finite, got {frequency_hz}"
            )));
        }
        let wavelength_m = C0 / frequency_hz;
        let angular_freq = 2.0 * std::f64::consts::PI * frequency_hz;
        Ok(Self {
            frequency_hz,
            wavelength_m,
            wavenumber: 2.0 * std::f64::consts::PI / wavelength_m,
            angular_freq,
            beta: Complex64::new(0.0, -angular_freq * MU0),
        })
    }

    /// Build parameters from a wavelength instead of a frequency.
    pub fn from_wavelength(wavelength_m: f64) -> Result<Self> {
        if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "wavelength must be positive and finite, got {wavelength_m}"
            )));
        }
        Self::new(C0 / wavelength_m)
    }

    /// Same carrier, with `|beta|` overridden (phase kept at -pi/2).
    pub fn with_beta_magnitude(mut self, magnitude: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "beta magnitude must be positive, got {magnitude}"
            )));
        }
        self.beta = Complex64::new(0.0, -magnitude);
        Ok(self)
    }

    /// Same carrier with an arbitrary complex prefactor.
    pub fn with_beta(mut self, beta: Complex64) -> Result<Self> {
        if beta.norm() == 0.0 || !beta.is_finite() {
            return Err(ModelError::InvalidParameter(
                "beta must be nonzero and finite".into(),
            ));
        }
        self.beta = beta;
        Ok(self)
    }
}

/// A point (or displacement) in 3-D space, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance_to(&self, other: &Point3) -> f64 {
        (*self - *other).norm()
    }

    pub fn scaled(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in this direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Point3> {
        let n = self.norm();
        if n > 0.0 {
            Some(self.scaled(1.0 / n))
        } else {
            None
        }
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// An axis-aligned rectangular volume: the surface, the receiver, and every
/// element or tile are described this way.
///
/// Extents are the full side lengths, so the box spans
/// `center +- extent/2` along each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxVolume {
    pub center: Point3,
    pub extent_x: f64,
    pub extent_y: f64,
    pub extent_z: f64,
}

impl BoxVolume {
    pub fn new(center: Point3, extent_x: f64, extent_y: f64, extent_z: f64) -> Result<Self> {
        for (name, v) in [("x", extent_x), ("y", extent_y), ("z", extent_z)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "box extent_{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !center.is_finite() {
            return Err(ModelError::InvalidParameter("box center must be finite".into()));
        }
        Ok(Self { center, extent_x, extent_y, extent_z })
    }

    /// Cube of side `extent` centered at `center`.
    pub fn cube(center: Point3, extent: f64) -> Result<Self> {
        Self::new(center, extent, extent, extent)
    }

    pub fn volume(&self) -> f64 {
        self.extent_x * self.extent_y * self.extent_z
    }

    /// Area of the x-y face (the aperture facing a z-directed link).
    pub fn face_area_xy(&self) -> f64 {
        self.extent_x * self.extent_y
    }

    pub fn max_extent(&self) -> f64 {
        self.extent_x.max(self.extent_y).max(self.extent_z)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (p.x - self.center.x).abs() <= self.extent_x / 2.0
            && (p.y - self.center.y).abs() <= self.extent_y / 2.0
            && (p.z - self.center.z).abs() <= self.extent_z / 2.0
    }

    /// Axis-aligned overlap test. Boxes that merely share a face do not
    /// count as intersecting, including when rounding makes the shared face
    /// fuzzy by a few ulps.
    pub fn intersects(&self, other: &BoxVolume) -> bool {
        let overlap = |dc: f64, ea: f64, eb: f64| {
            let slack = 1e-12 * ea.max(eb).max(1.0);
            dc.abs() < (ea + eb) / 2.0 - slack
        };
        overlap(self.center.x - other.center.x, self.extent_x, other.extent_x)
            && overlap(self.center.y - other.center.y, self.extent_y, other.extent_y)
            && overlap(self.center.z - other.center.z, self.extent_z, other.extent_z)
    }
}

/// Free-space scalar Green's function for a y-polarized current,
/// `-beta * exp(-j*k*d) / (4*pi*d)` with `d = |field - source|`.
///
/// The (y,y) tensor element for points in the x-z plane reduces to this
/// scalar form; the configurable `beta` in [`SignalParams`] absorbs the
/// radiation prefactor.
pub fn green_yy(params: &SignalParams, field_pt: &Point3, source_pt: &Point3) -> Result<Complex64> {
    let d = field_pt.distance_to(source_pt);
    if d <= 0.0 {
        return Err(ModelError::SingularPoint(
            "field point coincides with source point".into(),
        ));
    }
    let phase = Complex64::from_polar(1.0, -params.wavenumber * d);
    Ok(-params.beta * phase / (4.0 * std::f64::consts::PI * d))
}

/// Unit-modulus focusing phase for a source at `local_source` (coordinates
/// in the frame whose +z axis points at the target) and a focal distance
/// `focal_distance` to the target:
/// `exp(-j*k*[z - (x^2 + y^2) / (2*r)])`.
///
/// Multiplying a current distribution by this profile aligns all its
/// contributions constructively at the focal point.
pub fn focusing_phase(params: &SignalParams, local_source: &Point3, focal_distance: f64) -> Result<Complex64> {
    if !(focal_distance.is_finite() && focal_distance > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "focal distance must be positive, got {focal_distance}"
        )));
    }
    let transverse_sq = local_source.x * local_source.x + local_source.y * local_source.y;
    let phase = -params.wavenumber * (local_source.z - transverse_sq / (2.0 * focal_distance));
    Ok(Complex64::from_polar(1.0, phase))
}

/// Express `global_pt` in a right-handed orthonormal frame centered at
/// `element_center` with +z toward `target`.
///
/// The x axis is chosen perpendicular to global y where possible; when the
/// target direction is parallel to global y the frame falls back to global
/// x as its x axis. Only z and the radial distance x^2 + y^2 enter any
/// formula, so the tie-break does not affect scalar results.
pub fn local_frame(element_center: &Point3, target: &Point3, global_pt: &Point3) -> Result<Point3> {
    let axis = *target - *element_center;
    let z_hat = axis.normalized().ok_or(ModelError::DegenerateFrame)?;

    let y_global = Point3::new(0.0, 1.0, 0.0);
    let x_hat = match y_global.cross(&z_hat).normalized() {
        Some(v) => v,
        // target direction parallel to global y: fall back to global x
        None => Point3::new(1.0, 0.0, 0.0),
    };
    let y_hat = z_hat.cross(&x_hat);

    let rel = *global_pt - *element_center;
    Ok(Point3::new(rel.dot(&x_hat), rel.dot(&y_hat), rel.dot(&z_hat)))
}
