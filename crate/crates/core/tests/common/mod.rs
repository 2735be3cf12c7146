//! Brute-force field oracle shared by the integration tests.
//!
//! A current distribution is a set of sample points with quadrature weights
//! and complex amplitudes. Fields are propagated sample by sample with the
//! free-space Green's function and powers integrated over a receiver grid:
//! no closed form, tiling, or kernel shortcut enters anywhere, so this path
//! is independent of everything it validates.

// each integration-test target uses its own subset of the oracle
#![allow(dead_code)]

use num_complex::Complex64;
use starris_core::em::{focusing_phase, green_yy, local_frame, BoxVolume, Point3, SignalParams};
use starris_core::kernel::QuadratureGrid;
use starris_core::multiuser::superposition_normalization;

pub struct CurrentDistribution {
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CurrentDistribution {
    /// Discretized squared L2 norm of the current.
    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum()
    }

    /// Scale to unit L2 norm.
    pub fn normalized(mut self) -> Self {
        let scale = 1.0 / self.norm_sq().sqrt();
        for v in &mut self.values {
            *v *= scale;
        }
        self
    }

    /// Radiated field at a point: `sum_j w_j G(at, p_j) J_j`.
    pub fn field_at(&self, params: &SignalParams, at: &Point3) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((p, w), v) in self.points.iter().zip(&self.weights).zip(&self.values) {
            acc += green_yy(params, at, p).expect("sample off the field point") * v * *w;
        }
        acc
    }

    /// `integral of |E|^2` over the receiver grid.
    pub fn received_power(&self, params: &SignalParams, rx_grid: &QuadratureGrid) -> f64 {
        rx_grid
            .points
            .iter()
            .zip(&rx_grid.weights)
            .map(|(pt, w)| self.field_at(params, pt).norm_sqr() * w)
            .sum()
    }

    /// Complex inner product of the received fields of two currents over a
    /// receiver grid.
    pub fn field_inner_product(
        &self,
        other: &CurrentDistribution,
        params: &SignalParams,
        rx_grid: &QuadratureGrid,
    ) -> Complex64 {
        rx_grid
            .points
            .iter()
            .zip(&rx_grid.weights)
            .map(|(pt, w)| {
                self.field_at(params, pt).conj() * other.field_at(params, pt) * *w
            })
            .sum()
    }
}

/// Focusing current on one region: `amplitude * F(local)` with the local
/// frame centered at the region center looking at `focus`.
pub fn focusing_current(
    params: &SignalParams,
    region: &BoxVolume,
    counts: (usize, usize, usize),
    focus: &Point3,
    amplitude: f64,
) -> CurrentDistribution {
    let grid = QuadratureGrid::midpoint(region, counts.0, counts.1, counts.2).unwrap();
    let r = focus.distance_to(&region.center);
    let values = grid
        .points
        .iter()
        .map(|pt| {
            let local = local_frame(&region.center, focus, pt).unwrap();
            focusing_phase(params, &local, r).unwrap() * amplitude
        })
        .collect();
    CurrentDistribution { points: grid.points, weights: grid.weights, values }
}

/// Power-splitting current over a set of elements:
/// per element `sum_p F_p / sqrt(V_m * A_m)`.
///
/// The focusing profiles use one frame per user centered at `frame_center`
/// (the critical-volume tile center): per-element frames would leave the
/// inter-element phases unaligned, which contradicts the coherent sums the
/// closed forms assert.
pub fn ps_current(
    params: &SignalParams,
    elements: &[BoxVolume],
    frame_center: &Point3,
    users: &[Point3],
    counts: (usize, usize, usize),
) -> CurrentDistribution {
    let mut out = CurrentDistribution { points: vec![], weights: vec![], values: vec![] };
    for element in elements {
        let a_m = superposition_normalization(params, element, users).unwrap();
        let scale = 1.0 / (element.volume() * a_m).sqrt();
        let grid = QuadratureGrid::midpoint(element, counts.0, counts.1, counts.2).unwrap();
        for pt in &grid.points {
            let mut sum = Complex64::new(0.0, 0.0);
            for u in users {
                let r = u.distance_to(frame_center);
                let local = local_frame(frame_center, u, pt).unwrap();
                sum += focusing_phase(params, &local, r).unwrap();
            }
            out.points.push(*pt);
            out.values.push(sum * scale);
        }
        out.weights.extend_from_slice(&grid.weights);
    }
    out
}

/// Grouped current: each element focuses its owner, `F_owner / sqrt(V_m)`,
/// frames at the shared tile center.
pub fn grouped_current(
    params: &SignalParams,
    elements: &[BoxVolume],
    frame_center: &Point3,
    owners: &[usize],
    users: &[Point3],
    counts: (usize, usize, usize),
) -> CurrentDistribution {
    let mut out = CurrentDistribution { points: vec![], weights: vec![], values: vec![] };
    for (element, &owner) in elements.iter().zip(owners) {
        let scale = 1.0 / element.volume().sqrt();
        let focus = &users[owner];
        let r = focus.distance_to(frame_center);
        let grid = QuadratureGrid::midpoint(element, counts.0, counts.1, counts.2).unwrap();
        for pt in &grid.points {
            let local = local_frame(frame_center, focus, pt).unwrap();
            out.points.push(*pt);
            out.values.push(focusing_phase(params, &local, r).unwrap() * scale);
        }
        out.weights.extend_from_slice(&grid.weights);
    }
    out
}
