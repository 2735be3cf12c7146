//! Single-user end-to-end channel gain: the element current model, the
//! tiling of a large surface into critical volumes, the closed-form gain
//! upper bound, and the element-count power scaling law.
//!
//! A surface larger than the critical volume of [`crate::regions`] is split
//! into tiles, each small enough that one focusing phase profile stays
//! coherent over it. Tiles act as parallel sub-channels: the gain bound
//! sums `V_R * V_tile / (4*pi*r_i)^2` over tiles, and the received power for
//! `M` discrete elements scales with the square of the per-tile element
//! count (all-coherent within a tile, incoherent across tiles).

use num_complex::Complex64;

use crate::em::{BoxVolume, Point3, SignalParams};
use crate::error::{ModelError, Result};
use crate::regions::max_farfield_volume;

/// Link budget of the feed: base-station directivity (linear), distance to
/// the surface, and the surface aperture facing the base station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub bs_directivity: f64,
    pub bs_distance_m: f64,
    pub tx_aperture_m2: f64,
}

impl LinkBudget {
    pub fn new(bs_directivity: f64, bs_distance_m: f64, tx_aperture_m2: f64) -> Result<Self> {
        if !(bs_directivity.is_finite() && bs_directivity >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "directivity must be nonnegative, got {bs_directivity}"
            )));
        }
        for (name, v) in [("distance", bs_distance_m), ("aperture", tx_aperture_m2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { bs_directivity, bs_distance_m, tx_aperture_m2 })
    }

    /// Feed-to-surface gain `D * A_T / (4*pi*d^2)`.
    pub fn friis_factor(&self) -> f64 {
        self.bs_directivity * self.tx_aperture_m2
            / (4.0 * std::f64::consts::PI * self.bs_distance_m * self.bs_distance_m)
    }

    /// A feed gain above one means the stated geometry cannot be a
    /// far-field link; flags unphysical inputs.
    pub fn is_unphysical(&self) -> bool {
        self.friis_factor() > 1.0
    }
}

/// Surface currents on the incident and transmission faces of one element.
/// Phases are normalized into `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementCurrents {
    pub j1_amp: f64,
    pub j1_phase: f64,
    pub j2_amp: f64,
    pub j2_phase: f64,
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * std::f64::consts::PI);
    if p > std::f64::consts::PI {
        p -= 2.0 * std::f64::consts::PI;
    }
    p
}

impl ElementCurrents {
    pub fn new(j1_amp: f64, j1_phase: f64, j2_amp: f64, j2_phase: f64) -> Result<Self> {
        if !(j1_amp >= 0.0 && j2_amp >= 0.0 && j1_amp.is_finite() && j2_amp.is_finite()) {
            return Err(ModelError::InvalidParameter(
                "current amplitudes must be nonnegative".into(),
            ));
        }
        Ok(Self {
            j1_amp,
            j1_phase: wrap_phase(j1_phase),
            j2_amp,
            j2_phase: wrap_phase(j2_phase),
        })
    }

    pub fn j1(&self) -> Complex64 {
        Complex64::from_polar(self.j1_amp, self.j1_phase)
    }

    pub fn j2(&self) -> Complex64 {
        Complex64::from_polar(self.j2_amp, self.j2_phase)
    }
}

/// Transmission and reflection coefficients of a quarter-wavelength-wide
/// element carrying front/back surface currents, up to the common
/// propagation factor:
/// `T = J1 * exp(j*pi/2) + J2`, `R = J1 + J2 * exp(j*pi/2)`.
///
/// Equal amplitudes with a `+pi/2` phase lead on the back face transmit
/// everything; a `+pi/2` lead on the front face reflects everything; a `pi`
/// offset splits power evenly (the simultaneous transmit-and-reflect mode).
pub fn tr_from_currents(currents: &ElementCurrents) -> (Complex64, Complex64) {
    let quarter_turn = Complex64::new(0.0, 1.0);
    let j1 = currents.j1();
    let j2 = currents.j2();
    (j1 * quarter_turn + j2, j1 + j2 * quarter_turn)
}

/// How tile sizes are bounded while partitioning a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TilingMode {
    /// Re-evaluate the critical volume at each tile's own distance
    /// (conservative; the default).
    #[default]
    PerTileDistance,
    /// Evaluate the critical volume once at the parent-center distance.
    SingleDistance,
}

/// One tile of a partition: a sub-box of the surface and the distance from
/// its center to the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub volume: BoxVolume,
    pub distance_m: f64,
}

/// Disjoint grid tiling of a surface's x-y face whose union is the parent
/// box and whose tiles each satisfy the critical-volume bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePartition {
    pub tiles: Vec<Tile>,
    pub parent: BoxVolume,
    pub rx_center: Point3,
}

impl TilePartition {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Index of the tile whose x-y footprint contains the point, if any.
    /// Points on a shared tile edge go to the first matching tile; the
    /// slack absorbs rounding on those edges.
    pub fn tile_containing_xy(&self, p: &Point3) -> Option<usize> {
        self.tiles.iter().position(|t| {
            let sx = 1e-9 * t.volume.extent_x.max(1e-6);
            let sy = 1e-9 * t.volume.extent_y.max(1e-6);
            (p.x - t.volume.center.x).abs() <= t.volume.extent_x / 2.0 + sx
                && (p.y - t.volume.center.y).abs() <= t.volume.extent_y / 2.0 + sy
        })
    }
}

/// Pick the factor pair `(nx, ny)` of `n` whose tiles come out closest to
/// square on the given face. Equally square options split the preferred
/// axis: phase coherence breaks first along the axis of the receiver's
/// transverse offset, so that axis should carry the finer division.
fn balanced_factors(n: usize, face_x: f64, face_y: f64, prefer_x: bool) -> (usize, usize) {
    let mut best = (n, 1);
    let mut best_aspect = f64::INFINITY;
    for a in 1..=n {
        if !n.is_multiple_of(a) {
            continue;
        }
        let b = n / a;
        let aspect = ((face_x / a as f64) / (face_y / b as f64)).ln().abs();
        let better = aspect < best_aspect - 1e-9
            || ((aspect - best_aspect).abs() <= 1e-9 && prefer_x && a > best.0)
            || ((aspect - best_aspect).abs() <= 1e-9 && !prefer_x && b > best.1);
        if better {
            best_aspect = best_aspect.min(aspect);
            best = (a, b);
        }
    }
    best
}

fn grid_tiles(tx: &BoxVolume, rx_center: &Point3, nx: usize, ny: usize) -> Vec<Tile> {
    let step_x = tx.extent_x / nx as f64;
    let step_y = tx.extent_y / ny as f64;
    let corner_x = tx.center.x - tx.extent_x / 2.0;
    let corner_y = tx.center.y - tx.extent_y / 2.0;
    let mut tiles = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let center = Point3::new(
                corner_x + (ix as f64 + 0.5) * step_x,
                corner_y + (iy as f64 + 0.5) * step_y,
                tx.center.z,
            );
            let volume = BoxVolume::new(center, step_x, step_y, tx.extent_z)
                .expect("tile extents inherit positivity from the parent");
            tiles.push(Tile { volume, distance_m: rx_center.distance_to(&center) });
        }
    }
    tiles
}

/// Split the surface's x-y face into the smallest near-square grid of tiles
/// that all satisfy the critical-volume bound; a surface that already fits
/// the bound stays a single tile.
pub fn partition_tiles(
    params: &SignalParams,
    tx: &BoxVolume,
    rx: &BoxVolume,
    rx_center: &Point3,
    mode: TilingMode,
) -> Result<TilePartition> {
    if tx.contains(rx_center) {
        return Err(ModelError::SingularPoint(
            "receiver center lies inside the surface volume".into(),
        ));
    }
    let r_center = rx_center.distance_to(&tx.center);
    let critical_at_center = max_farfield_volume(params, rx, r_center, tx.extent_z)?;
    // ratios a few ulps past an integer count as that integer
    let mut n_target = (tx.volume() / critical_at_center - 1e-9).ceil().max(1.0) as usize;

    let prefer_x =
        (rx_center.x - tx.center.x).abs() >= (rx_center.y - tx.center.y).abs();
    let max_rounds = 10_000;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let (nx, ny) = balanced_factors(n_target, tx.extent_x, tx.extent_y, prefer_x);
        let tiles = grid_tiles(tx, rx_center, nx, ny);
        let ok = match mode {
            TilingMode::SingleDistance => true,
            TilingMode::PerTileDistance => tiles.iter().all(|t| {
                let bound = max_farfield_volume(params, rx, t.distance_m, tx.extent_z)
                    .unwrap_or(0.0);
                t.volume.volume() <= bound * (1.0 + 1e-9)
            }),
        };
        if ok {
            return Ok(TilePartition { tiles, parent: *tx, rx_center: *rx_center });
        }
        n_target += 1;
    }
    Err(ModelError::InvalidParameter(format!(
        "tile partition did not stabilize within {max_rounds} refinements"
    )))
}

/// Closed-form upper bound on the end-to-end gain:
/// `friis * |beta|^2 * sum_i V_R * V_tile_i / (4*pi*r_i)^2`.
///
/// For a single tile this collapses to
/// `friis * |beta|^2 * V_R * V_T / (4*pi*r)^2`.
pub fn channel_gain_upper_bound(
    params: &SignalParams,
    budget: &LinkBudget,
    partition: &TilePartition,
    rx: &BoxVolume,
) -> Result<f64> {
    if partition.is_empty() {
        return Err(ModelError::InvalidParameter("empty tile partition".into()));
    }
    let beta_sq = params.beta.norm_sqr();
    let v_r = rx.volume();
    let sum: f64 = partition
        .tiles
        .iter()
        .map(|t| {
            let denom = 4.0 * std::f64::consts::PI * t.distance_m;
            v_r * t.volume.volume() / (denom * denom)
        })
        .sum();
    Ok(budget.friis_factor() * beta_sq * sum)
}

/// Received power for `M` discrete equal-volume elements distributed over
/// tiles as `(distance r_i, count M_i)` pairs:
/// `friis * |beta|^2 * V_R * sum_i V_ele^2 * M_i^2 / (4*pi*r_i)^2`.
///
/// The prefactor is pinned to the same constant as
/// [`channel_gain_upper_bound`], so scaling curves and gain curves share one
/// axis. With every element in one tile the power grows with `M^2`; with one
/// element per tile it grows linearly in the tile count.
pub fn power_scaling(
    params: &SignalParams,
    budget: &LinkBudget,
    rx_volume_m3: f64,
    element_volume_m3: f64,
    groups: &[(f64, usize)],
) -> Result<f64> {
    if !(rx_volume_m3 > 0.0 && element_volume_m3 > 0.0) {
        return Err(ModelError::InvalidParameter(
            "receiver and element volumes must be positive".into(),
        ));
    }
    let total: usize = groups.iter().map(|(_, m)| m).sum();
    if total == 0 {
        return Err(ModelError::InvalidParameter(
            "power scaling needs at least one element".into(),
        ));
    }
    if groups.iter().any(|&(r, _)| !(r.is_finite() && r > 0.0)) {
        return Err(ModelError::InvalidParameter(
            "group distances must be positive".into(),
        ));
    }
    let beta_sq = params.beta.norm_sqr();
    let sum: f64 = groups
        .iter()
        .map(|&(r, m)| {
            let denom = 4.0 * std::f64::consts::PI * r;
            element_volume_m3 * element_volume_m3 * (m * m) as f64 / (denom * denom)
        })
        .sum();
    Ok(budget.friis_factor() * beta_sq * rx_volume_m3 * sum)
}

/// Linear power ratio to decibels.
pub fn to_db(gain: f64) -> f64 {
    10.0 * gain.log10()
}
