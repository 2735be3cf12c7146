//! Outdoor-to-indoor case study: a surface deployed on a window serves one
//! far outdoor user by reflection and one near indoor user by transmission.
//!
//! The room sits in the first quadrant: the origin is its bottom-left
//! corner, the sealed wall runs along the y axis and carries the window,
//! and the bottom edge along the x axis is open. A plane wave arrives from
//! `x = -inf` traveling in `+x`; indoors, the only paths are knife-edge
//! diffraction at the corner and (when open) the window aperture. The scene
//! is treated as translation-invariant along z and evaluated on the `z = 0`
//! slice.
//!
//! Baselines without the surface: the outdoor user rides the base-station
//! sidelobe pattern (the sectored `-min(12 (theta/theta_3dB)^2, 30 dB)`
//! law), the indoor user the shadow-edge diffraction law
//! `A / (k^2 r lambda sin^2(theta))`. With the surface, per-element sums
//! over the window aperture remove both angle dependencies.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::em::{focusing_phase, green_yy, local_frame, BoxVolume, Point3, SignalParams};
use crate::error::{ModelError, Result};
use crate::multiuser::{
    angle_between_users, sinc, superposition_normalization, xi_factor, Grouping, StrategyConfig,
    StrategyKind,
};
use crate::regions::field_boundary;

/// Horizontal 3 dB beamwidth of the sectored base-station pattern.
pub const THETA_3DB_RAD: f64 = 65.0 * std::f64::consts::PI / 180.0;

/// Sidelobe floor of the sectored pattern.
pub const PATTERN_FLOOR_DB: f64 = 30.0;

/// Cells closer than this to the shadow edge are masked: the diffraction
/// law diverges where the shadow region hands over to the lit one.
pub const SHADOW_GUARD_RAD: f64 = 2.0 * std::f64::consts::PI / 180.0;

/// The room, the window-mounted surface, and the two served users.
///
/// Lengths in metres; the window is a square of side `window_size_m`
/// centered at `(0, window_center_y_m, 0)` in the y-z wall plane, with the
/// surface thickness along x.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomScene {
    pub params: SignalParams,
    /// Room extent along x (into the room).
    pub room_width_m: f64,
    /// Room extent along y (along the sealed wall).
    pub room_height_m: f64,
    pub window_center_y_m: f64,
    pub window_size_m: f64,
    /// Surface thickness along the wall normal.
    pub star_thickness_m: f64,
    /// Side of the square element footprint on the window.
    pub element_size_m: f64,
    /// Receiver aperture of either user (m^2).
    pub user_aperture_m2: f64,
    /// Base-station distance used in the feed prefactor.
    pub bs_distance_m: f64,
    /// Outdoor far user (x < 0 side of the wall).
    pub far_user: Point3,
    /// Indoor near user.
    pub near_user: Point3,
    /// Where the surface focuses its transmitted power.
    pub focus_targets: Vec<Point3>,
}

/// Which user a hybrid gain refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridTarget {
    Far,
    Near,
}

/// Coverage raster flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    /// Sealed wall: corner diffraction only.
    NoWindow,
    /// Window open, uniform aperture currents, no beam shaping.
    OpenWindow,
    /// Window carrying the focused surface currents.
    StarRis,
}

impl std::fmt::Display for CoverageMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoverageMode::NoWindow => "no-window",
            CoverageMode::OpenWindow => "open-window",
            CoverageMode::StarRis => "star-ris",
        })
    }
}

/// Received-power map over the room interior, in dB relative to the power
/// an equal aperture collects from the incident plane wave. Masked cells
/// (the shadow-edge guard band) hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub nx: usize,
    pub ny: usize,
    pub cell_m: f64,
    pub reference_db: f64,
    pub mode: CoverageMode,
    /// Row-major, `values[iy * nx + ix]`, x fastest.
    pub values: Vec<f64>,
}

impl CoverageGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point3 {
        Point3::new(
            (ix as f64 + 0.5) * self.cell_m,
            (iy as f64 + 0.5) * self.cell_m,
            0.0,
        )
    }

    /// Plain-text raster: a header line `nx ny cell_m reference_db`, then
    /// one row per line (y ascending), `NaN` for masked cells, 0.01 dB
    /// resolution.
    pub fn to_raster_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8 + 64);
        out.push_str(&format!(
            "{} {} {:.6} {:.2}\n",
            self.nx, self.ny, self.cell_m, self.reference_db
        ));
        for iy in 0..self.ny {
            let mut row = Vec::with_capacity(self.nx);
            for ix in 0..self.nx {
                let v = self.value(ix, iy);
                row.push(if v.is_nan() { "NaN".to_string() } else { format!("{v:.2}") });
            }
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Mean of the linear powers over the cells of an axis-aligned zone, in
    /// dB. Masked cells are skipped.
    pub fn zone_average_db(&self, center: &Point3, size_m: f64) -> Option<f64> {
        let mut acc = 0.0;
        let mut n = 0usize;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.cell_center(ix, iy);
                if (c.x - center.x).abs() <= size_m / 2.0
                    && (c.y - center.y).abs() <= size_m / 2.0
                {
                    let v = self.value(ix, iy);
                    if v.is_finite() {
                        acc += 10f64.powf(v / 10.0);
                        n += 1;
                    }
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some(10.0 * (acc / n as f64).log10())
        }
    }

    /// Location (cell center) of the smallest unmasked value.
    pub fn min_location(&self) -> Option<(Point3, f64)> {
        let mut best: Option<(Point3, f64)> = None;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let v = self.value(ix, iy);
                if !v.is_finite() {
                    continue;
                }
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((self.cell_center(ix, iy), v));
                }
            }
        }
        best
    }
}

/// One row of the angle study: the four gains (dB) at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSweepRow {
    pub theta_rad: f64,
    pub gain_f_no_star_db: f64,
    pub gain_n_no_star_db: f64,
    pub gain_f_ps_db: f64,
    pub gain_n_ps_db: f64,
}

impl RoomScene {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: SignalParams,
        room_width_m: f64,
        room_height_m: f64,
        window_center_y_m: f64,
        window_size_m: f64,
        star_thickness_m: f64,
        element_size_m: f64,
        user_aperture_m2: f64,
        bs_distance_m: f64,
        far_user: Point3,
        near_user: Point3,
        focus_targets: Vec<Point3>,
    ) -> Result<Self> {
        for (name, v) in [
            ("room width", room_width_m),
            ("room height", room_height_m),
            ("window size", window_size_m),
            ("surface thickness", star_thickness_m),
            ("element size", element_size_m),
            ("user aperture", user_aperture_m2),
            ("base-station distance", bs_distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if window_center_y_m - window_size_m / 2.0 < 0.0
            || window_center_y_m + window_size_m / 2.0 > room_height_m
        {
            return Err(ModelError::InvalidParameter(
                "window does not fit inside the wall".into(),
            ));
        }
        if element_size_m > window_size_m {
            return Err(ModelError::InvalidParameter(
                "element larger than the window".into(),
            ));
        }
        if far_user.x >= 0.0 {
            return Err(ModelError::InvalidParameter(
                "far user must sit outside the wall (x < 0)".into(),
            ));
        }
        if !(near_user.x > 0.0
            && near_user.x < room_width_m
            && near_user.y > 0.0
            && near_user.y < room_height_m)
        {
            return Err(ModelError::InvalidParameter(
                "near user must sit inside the room".into(),
            ));
        }
        if focus_targets.is_empty() {
            return Err(ModelError::InvalidParameter(
                "at least one focus target required".into(),
            ));
        }
        Ok(Self {
            params,
            room_width_m,
            room_height_m,
            window_center_y_m,
            window_size_m,
            star_thickness_m,
            element_size_m,
            user_aperture_m2,
            bs_distance_m,
            far_user,
            near_user,
            focus_targets,
        })
    }

    /// Center of the window / surface.
    pub fn star_center(&self) -> Point3 {
        Point3::new(0.0, self.window_center_y_m, 0.0)
    }

    /// An `n x n` grid of focus points spanning a square zone; spreading the
    /// beams keeps the whole zone lit instead of a single focal spot.
    pub fn zone_targets(center: Point3, size_m: f64, n: usize) -> Vec<Point3> {
        let n = n.max(1);
        let mut out = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                let fx = if n == 1 { 0.5 } else { ix as f64 / (n - 1) as f64 };
                let fy = if n == 1 { 0.5 } else { iy as f64 / (n - 1) as f64 };
                out.push(Point3::new(
                    center.x + (fx - 0.5) * size_m,
                    center.y + (fy - 0.5) * size_m,
                    0.0,
                ));
            }
        }
        out
    }

    /// Aperture area of the surface facing the base station.
    pub fn star_aperture_m2(&self) -> f64 {
        self.window_size_m * self.window_size_m
    }

    pub fn star_volume_m3(&self) -> f64 {
        self.star_aperture_m2() * self.star_thickness_m
    }

    /// Feed prefactor `D0 * A_T / (4 pi d^2)` with boresight directivity.
    pub fn feed_factor(&self) -> f64 {
        self.star_aperture_m2()
            / (4.0 * std::f64::consts::PI * self.bs_distance_m * self.bs_distance_m)
    }

    /// Field boundary of the surface/user-aperture pair.
    pub fn boundary_m(&self) -> f64 {
        let side = self.user_aperture_m2.sqrt();
        // orientation-free footprint boxes: the boundary only uses apertures
        let star = BoxVolume::new(
            Point3::ORIGIN,
            self.window_size_m,
            self.window_size_m,
            self.star_thickness_m,
        )
        .expect("validated extents");
        let user = BoxVolume::new(Point3::new(0.0, 0.0, 1.0), side, side, side.min(0.01))
            .expect("validated extents");
        field_boundary(&self.params, &star, &user)
    }

    /// Element boxes tiling the window, thickness along x.
    pub fn window_elements(&self) -> Vec<BoxVolume> {
        let n = (self.window_size_m / self.element_size_m).round().max(1.0) as usize;
        let step = self.window_size_m / n as f64;
        let y0 = self.window_center_y_m - self.window_size_m / 2.0;
        let z0 = -self.window_size_m / 2.0;
        let mut out = Vec::with_capacity(n * n);
        for iy in 0..n {
            for iz in 0..n {
                let center = Point3::new(
                    0.0,
                    y0 + (iy as f64 + 0.5) * step,
                    z0 + (iz as f64 + 0.5) * step,
                );
                out.push(
                    BoxVolume::new(center, self.star_thickness_m, step, step)
                        .expect("validated extents"),
                );
            }
        }
        out
    }

    /// Element-to-user split for the grouped strategies: SEG gives the near
    /// user the half of the window closest to it, REG deals a seeded
    /// shuffle. Label 0 is the far user, 1 the near user.
    pub fn hybrid_grouping(&self, kind: StrategyKind, seed: u64) -> Result<Grouping> {
        let elements = self.window_elements();
        let m = elements.len();
        match kind {
            StrategyKind::Ps => Err(ModelError::InvalidParameter(
                "power splitting uses no element grouping".into(),
            )),
            StrategyKind::Reg => {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut order: Vec<usize> = (0..m).collect();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                order.shuffle(&mut rng);
                let mut assignments = vec![0usize; m];
                for (pos, &e) in order.iter().enumerate() {
                    assignments[e] = pos % 2;
                }
                Ok(Grouping { assignments })
            }
            StrategyKind::Seg => {
                let mut by_near: Vec<(f64, usize)> = elements
                    .iter()
                    .enumerate()
                    .map(|(e, b)| (self.near_user.distance_to(&b.center), e))
                    .collect();
                by_near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let mut assignments = vec![0usize; m];
                for &(_, e) in by_near.iter().take(m / 2 + m % 2) {
                    assignments[e] = 1;
                }
                Ok(Grouping { assignments })
            }
        }
    }
}

/// Sectored base-station pattern `-min(12 (theta/theta_3dB)^2, 30) dB`,
/// even in the angle, zero at boresight, floored at -30 dB.
pub fn bs_directivity_db(theta: f64) -> f64 {
    let ratio = theta / THETA_3DB_RAD;
    -(12.0 * ratio * ratio).min(PATTERN_FLOOR_DB)
}

/// Outdoor baseline without the surface: the sidelobe level times the
/// spread aperture, `10^(D(theta)/10) * A_F / r_OF`, as a proportional
/// linear gain.
pub fn gain_outdoor_no_star(theta_f: f64, r_of: f64, aperture_f: f64) -> Result<f64> {
    if !(r_of.is_finite() && r_of > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "outdoor distance must be positive, got {r_of}"
        )));
    }
    if !(aperture_f.is_finite() && aperture_f > 0.0) {
        return Err(ModelError::InvalidParameter(
            "outdoor aperture must be positive".into(),
        ));
    }
    Ok(10f64.powf(bs_directivity_db(theta_f) / 10.0) * aperture_f / r_of)
}

/// Indoor baseline without the surface: shadow-edge diffraction
/// `A_N / (k^2 * r_ON * lambda * sin^2(theta_N))`, a proportional linear
/// gain. Diverges at the shadow edge `theta = 0`.
pub fn gain_indoor_no_star(
    params: &SignalParams,
    theta_n: f64,
    r_on: f64,
    aperture_n: f64,
) -> Result<f64> {
    if theta_n == 0.0 {
        return Err(ModelError::SingularAngle { theta_rad: theta_n });
    }
    if !(theta_n > 0.0 && theta_n <= std::f64::consts::FRAC_PI_2) {
        return Err(ModelError::InvalidParameter(format!(
            "shadow angle must lie in (0, pi/2], got {theta_n}"
        )));
    }
    if !(r_on.is_finite() && r_on > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "indoor distance must be positive, got {r_on}"
        )));
    }
    if !(aperture_n.is_finite() && aperture_n > 0.0) {
        return Err(ModelError::InvalidParameter(
            "indoor aperture must be positive".into(),
        ));
    }
    let s = theta_n.sin();
    Ok(aperture_n / (params.wavenumber * params.wavenumber * r_on * params.wavelength_m * s * s))
}

/// End-to-end gain through the surface for the far (reflection) or near
/// (transmission) user under a strategy.
///
/// The far user must sit beyond the field boundary and the near user within
/// it, or the call fails with [`ModelError::RegimeMismatch`].
pub fn gain_with_star(
    scene: &RoomScene,
    strategy: &StrategyConfig,
    target: HybridTarget,
) -> Result<f64> {
    let star = scene.star_center();
    let r_sf = scene.far_user.distance_to(&star);
    let r_sn = scene.near_user.distance_to(&star);
    let boundary = scene.boundary_m();
    if r_sf <= boundary {
        return Err(ModelError::RegimeMismatch(format!(
            "far user at {r_sf:.2} m is inside the field boundary ({boundary:.2} m)"
        )));
    }
    if r_sn > boundary {
        return Err(ModelError::RegimeMismatch(format!(
            "near user at {r_sn:.2} m is beyond the field boundary ({boundary:.2} m)"
        )));
    }

    let params = &scene.params;
    let beta_sq = params.beta.norm_sqr();
    let feed = scene.feed_factor() * beta_sq;
    let v_r = scene.user_aperture_m2 * scene.user_aperture_m2.sqrt().min(0.01);
    let dz = scene.star_thickness_m;
    let elements = scene.window_elements();
    let v_m = elements[0].volume();
    let four_pi = 4.0 * std::f64::consts::PI;
    let targets = [scene.far_user, scene.near_user];

    match strategy.kind {
        StrategyKind::Ps => match target {
            HybridTarget::Far => {
                // all elements look the same from the far side: single-term
                // form with the angle taken at the surface center
                let alpha = angle_between_users(&star, &scene.far_user, &scene.near_user)?;
                let xi = xi_factor(params, alpha, dz)?;
                let center_element = elements[elements.len() / 2];
                let a_m = superposition_normalization(params, &center_element, &targets)?;
                let num = (1.0 + sinc(xi)).powi(2);
                Ok(feed * v_r * scene.star_volume_m3() * num / ((four_pi * r_sf).powi(2) * a_m))
            }
            HybridTarget::Near => {
                let mut sum = 0.0;
                for element in &elements {
                    let alpha =
                        angle_between_users(&element.center, &scene.far_user, &scene.near_user)?;
                    let xi = xi_factor(params, alpha, dz)?;
                    let a_m = superposition_normalization(params, element, &targets)?;
                    let r_m = scene.near_user.distance_to(&element.center);
                    sum += v_r * element.volume() * (1.0 + sinc(xi)).powi(2)
                        / ((four_pi * r_m).powi(2) * a_m);
                }
                Ok(feed * sum)
            }
        },
        StrategyKind::Reg | StrategyKind::Seg => {
            let grouping = match &strategy.grouping {
                Some(g) => g.clone(),
                None => scene.hybrid_grouping(strategy.kind, strategy.rng_seed)?,
            };
            grouping.validate(elements.len(), 2)?;
            let m_far = grouping.assignments.iter().filter(|&&u| u == 0).count() as f64;
            let m_near = elements.len() as f64 - m_far;
            match target {
                HybridTarget::Far => {
                    // one critical volume covers the whole surface out there
                    let alpha = angle_between_users(&star, &scene.far_user, &scene.near_user)?;
                    let xi = xi_factor(params, alpha, dz)?;
                    let s = sinc(xi);
                    let num = m_far * m_far + (m_near * s) * (m_near * s);
                    Ok(feed * v_r * v_m * num / (four_pi * r_sf).powi(2))
                }
                HybridTarget::Near => {
                    // per-tile sums over the window as seen by the near user
                    let tiles = window_tiles(scene, r_sn)?;
                    let mut counts = vec![[0usize; 2]; tiles.len()];
                    for (m, element) in elements.iter().enumerate() {
                        let t = tiles
                            .iter()
                            .position(|tile| {
                                (element.center.y - tile.center.y).abs()
                                    <= tile.extent_y / 2.0 + 1e-12
                                    && (element.center.z - tile.center.z).abs()
                                        <= tile.extent_z / 2.0 + 1e-12
                            })
                            .ok_or_else(|| {
                                ModelError::InvalidGrouping(format!(
                                    "element {m} outside the window tiling"
                                ))
                            })?;
                        counts[t][grouping.assignments[m]] += 1;
                    }
                    let mut sum = 0.0;
                    for (tile, count) in tiles.iter().zip(&counts) {
                        let alpha = angle_between_users(
                            &tile.center,
                            &scene.far_user,
                            &scene.near_user,
                        )?;
                        let s = sinc(xi_factor(params, alpha, dz)?);
                        let amplitude = count[1] as f64 + count[0] as f64 * s;
                        if amplitude == 0.0 {
                            continue;
                        }
                        let r_i = scene.near_user.distance_to(&tile.center);
                        sum += v_r * v_m * amplitude * amplitude / (four_pi * r_i).powi(2);
                    }
                    Ok(feed * sum)
                }
            }
        }
    }
}

/// Tile the window (y-z plane) into critical volumes for the near user.
fn window_tiles(scene: &RoomScene, r_sn: f64) -> Result<Vec<BoxVolume>> {
    let params = &scene.params;
    let side = scene.user_aperture_m2.sqrt();
    let lr = params.wavelength_m * r_sn;
    let critical = lr / (2.0 * side) * (lr / (2.0 * side)) * 2.0 * scene.star_thickness_m;
    let volume = scene.star_volume_m3();
    let n = (volume / critical).ceil().max(1.0) as usize;
    // near-square split of the window face
    let mut best = (n, 1usize);
    let mut best_gap = usize::MAX;
    for a in 1..=n {
        if n.is_multiple_of(a) {
            let b = n / a;
            let gap = a.abs_diff(b);
            if gap < best_gap {
                best_gap = gap;
                best = (a, b);
            }
        }
    }
    let (ny, nz) = best;
    let step_y = scene.window_size_m / ny as f64;
    let step_z = scene.window_size_m / nz as f64;
    let y0 = scene.window_center_y_m - scene.window_size_m / 2.0;
    let z0 = -scene.window_size_m / 2.0;
    let mut tiles = Vec::with_capacity(ny * nz);
    for iy in 0..ny {
        for iz in 0..nz {
            tiles.push(BoxVolume::new(
                Point3::new(
                    0.0,
                    y0 + (iy as f64 + 0.5) * step_y,
                    z0 + (iz as f64 + 0.5) * step_z,
                ),
                scene.star_thickness_m,
                step_y,
                step_z,
            )?);
        }
    }
    Ok(tiles)
}

/// Sample points and area weights over the window sheet (x = 0 plane),
/// about two samples per wavelength.
fn window_sheet_samples(scene: &RoomScene) -> (Vec<Point3>, f64) {
    let lam = scene.params.wavelength_m;
    let n = ((scene.window_size_m / lam * 2.0).ceil() as usize).max(2);
    let step = scene.window_size_m / n as f64;
    let y0 = scene.window_center_y_m - scene.window_size_m / 2.0;
    let z0 = -scene.window_size_m / 2.0;
    let mut pts = Vec::with_capacity(n * n);
    for iy in 0..n {
        for iz in 0..n {
            pts.push(Point3::new(
                0.0,
                y0 + (iy as f64 + 0.5) * step,
                z0 + (iz as f64 + 0.5) * step,
            ));
        }
    }
    (pts, step * step)
}

/// Per-sample complex current weights for the surface modes.
///
/// The uniform sheet current `J0 = 2k / |beta|` reproduces a unit-amplitude
/// transmitted plane wave behind an unbounded aperture, which pins the
/// 0 dB reference of the coverage maps. Focused modes reuse the same
/// amplitude with the superposed, power-normalized phase profiles, so
/// beam shaping never radiates more total power than the open window.
fn window_currents(
    scene: &RoomScene,
    pts: &[Point3],
    mode: CoverageMode,
    strategy: Option<&StrategyConfig>,
) -> Result<Vec<Complex64>> {
    let params = &scene.params;
    let j0 = 2.0 * params.wavenumber / params.beta.norm();
    match mode {
        CoverageMode::NoWindow => Ok(vec![Complex64::new(0.0, 0.0); pts.len()]),
        CoverageMode::OpenWindow => Ok(vec![Complex64::new(j0, 0.0); pts.len()]),
        CoverageMode::StarRis => {
            let strategy = strategy.cloned().unwrap_or_else(StrategyConfig::ps);
            let targets = &scene.focus_targets;
            match strategy.kind {
                StrategyKind::Ps => {
                    // superposition of all target profiles, power-normalized
                    // per sample neighborhood via the elementwise factor
                    let elements = scene.window_elements();
                    let mut out = Vec::with_capacity(pts.len());
                    let mut a_cache: Vec<Option<f64>> = vec![None; elements.len()];
                    for pt in pts {
                        let e = elements
                            .iter()
                            .position(|b| {
                                (pt.y - b.center.y).abs() <= b.extent_y / 2.0 + 1e-12
                                    && (pt.z - b.center.z).abs() <= b.extent_z / 2.0 + 1e-12
                            })
                            .ok_or_else(|| {
                                ModelError::InvalidParameter(
                                    "window sample outside the element grid".into(),
                                )
                            })?;
                        let a_m = match a_cache[e] {
                            Some(v) => v,
                            None => {
                                let v = superposition_normalization(
                                    params,
                                    &elements[e],
                                    targets,
                                )?;
                                a_cache[e] = Some(v);
                                v
                            }
                        };
                        let mut sum = Complex64::new(0.0, 0.0);
                        for t in targets {
                            let r = t.distance_to(&elements[e].center);
                            let local = local_frame(&elements[e].center, t, pt)?;
                            sum += focusing_phase(params, &local, r)?;
                        }
                        out.push(sum * (j0 / a_m.sqrt()));
                    }
                    Ok(out)
                }
                StrategyKind::Seg | StrategyKind::Reg => {
                    // each element serves one target at full amplitude
                    let elements = scene.window_elements();
                    let n_t = targets.len();
                    let owner: Vec<usize> = match strategy.kind {
                        StrategyKind::Seg => {
                            let mut owner = vec![0usize; elements.len()];
                            for (e, b) in elements.iter().enumerate() {
                                let mut best = 0usize;
                                let mut best_d = f64::INFINITY;
                                for (t, tp) in targets.iter().enumerate() {
                                    let d = tp.distance_to(&b.center);
                                    if d < best_d {
                                        best_d = d;
                                        best = t;
                                    }
                                }
                                owner[e] = best;
                            }
                            owner
                        }
                        _ => {
                            use rand::seq::SliceRandom;
                            use rand::SeedableRng;
                            let mut order: Vec<usize> = (0..elements.len()).collect();
                            let mut rng =
                                rand_chacha::ChaCha8Rng::seed_from_u64(strategy.rng_seed);
                            order.shuffle(&mut rng);
                            let mut owner = vec![0usize; elements.len()];
                            for (pos, &e) in order.iter().enumerate() {
                                owner[e] = pos % n_t;
                            }
                            owner
                        }
                    };
                    let mut out = Vec::with_capacity(pts.len());
                    for pt in pts {
                        let e = elements
                            .iter()
                            .position(|b| {
                                (pt.y - b.center.y).abs() <= b.extent_y / 2.0 + 1e-12
                                    && (pt.z - b.center.z).abs() <= b.extent_z / 2.0 + 1e-12
                            })
                            .ok_or_else(|| {
                                ModelError::InvalidParameter(
                                    "window sample outside the element grid".into(),
                                )
                            })?;
                        let t = &targets[owner[e]];
                        let r = t.distance_to(&elements[e].center);
                        let local = local_frame(&elements[e].center, t, pt)?;
                        out.push(focusing_phase(params, &local, r)? * j0);
                    }
                    Ok(out)
                }
            }
        }
    }
}

/// Simulate the indoor received-power map.
///
/// Every mode keeps the corner-diffraction path; the window modes add the
/// aperture field power on top (the two arrivals are treated as
/// power-additive). Cells within the shadow guard band are masked NaN.
pub fn coverage_grid(
    scene: &RoomScene,
    mode: CoverageMode,
    strategy: Option<&StrategyConfig>,
    resolution_per_m: f64,
) -> Result<CoverageGrid> {
    if !resolution_per_m.is_finite() || resolution_per_m < 10.0 {
        return Err(ModelError::InvalidParameter(format!(
            "coverage resolution must be at least 10 points per metre, got {resolution_per_m}"
        )));
    }
    let cell = 1.0 / resolution_per_m;
    let nx = (scene.room_width_m * resolution_per_m).ceil() as usize;
    let ny = (scene.room_height_m * resolution_per_m).ceil() as usize;

    let (pts, area_w) = window_sheet_samples(scene);
    let currents = window_currents(scene, &pts, mode, strategy)?;
    let params = &scene.params;
    let use_window = mode != CoverageMode::NoWindow;

    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let ix = idx % nx;
            let iy = idx / nx;
            let c = Point3::new((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell, 0.0);
            let r_on = c.norm();
            let theta = c.y.atan2(c.x);
            if theta < SHADOW_GUARD_RAD {
                return f64::NAN;
            }
            // diffraction gain per unit aperture
            let s = theta.sin();
            let mut power = 1.0
                / (params.wavenumber * params.wavenumber * r_on * params.wavelength_m * s * s);
            if use_window {
                let mut field = Complex64::new(0.0, 0.0);
                for (pt, j) in pts.iter().zip(&currents) {
                    if j.norm_sqr() == 0.0 {
                        continue;
                    }
                    // cells never touch the x = 0 wall plane
                    let g = green_yy(params, &c, pt).expect("cell off the wall");
                    field += g * j * area_w;
                }
                power += field.norm_sqr();
            }
            10.0 * power.log10()
        })
        .collect();

    Ok(CoverageGrid { nx, ny, cell_m: cell, reference_db: 0.0, mode, values })
}

/// Gain-versus-angle study.
///
/// For each angle the no-surface columns use fixed-radius arcs around the
/// corner (`r_ON`, `r_OF` from the scene users), while the surface-aided
/// columns move the users along arcs of fixed `r_SN` / `r_SF` around the
/// surface center, per the power-splitting closed forms.
pub fn angle_sweep(scene: &RoomScene, angles: &[f64]) -> Result<Vec<AngleSweepRow>> {
    if angles.is_empty() {
        return Err(ModelError::InvalidParameter("no sweep angles given".into()));
    }
    for &a in angles {
        if !(a > 0.0 && a < std::f64::consts::FRAC_PI_2) {
            return Err(ModelError::InvalidParameter(format!(
                "sweep angles must lie strictly inside (0, pi/2), got {a}"
            )));
        }
    }
    let star = scene.star_center();
    let r_of = scene.far_user.norm();
    let r_on = scene.near_user.norm();
    let r_sf = scene.far_user.distance_to(&star);
    let r_sn = scene.near_user.distance_to(&star);

    let ps = StrategyConfig::ps();
    angles
        .iter()
        .map(|&theta| {
            let g_f = gain_outdoor_no_star(theta, r_of, scene.user_aperture_m2)?;
            let g_n =
                gain_indoor_no_star(&scene.params, theta, r_on, scene.user_aperture_m2)?;

            // each column sweeps its own user along an arc around the
            // surface center, the other user staying put
            let mut far_swept = scene.clone();
            far_swept.far_user = Point3::new(
                -r_sf * theta.cos(),
                scene.window_center_y_m + r_sf * theta.sin(),
                0.0,
            );
            let g_f_ps = gain_with_star(&far_swept, &ps, HybridTarget::Far)?;

            let mut near_swept = scene.clone();
            near_swept.near_user = Point3::new(
                r_sn * theta.cos(),
                (scene.window_center_y_m + r_sn * theta.sin())
                    .min(scene.room_height_m - 1e-3),
                0.0,
            );
            let g_n_ps = gain_with_star(&near_swept, &ps, HybridTarget::Near)?;

            Ok(AngleSweepRow {
                theta_rad: theta,
                gain_f_no_star_db: 10.0 * g_f.log10(),
                gain_n_no_star_db: 10.0 * g_n.log10(),
                gain_f_ps_db: 10.0 * g_f_ps.log10(),
                gain_n_ps_db: 10.0 * g_n_ps.log10(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scene() -> RoomScene {
        let params = SignalParams::from_wavelength(0.0099).unwrap();
        RoomScene::new(
            params,
            6.0,
            4.0,
            2.0,
            0.5,
            0.05,
            0.0125,
            0.01,
            50.0,
            Point3::new(-17.3, 12.0, 0.0), // about 20 m from the surface
            Point3::new(1.2, 3.6, 0.0),    // about 2 m from the surface
            RoomScene::zone_targets(Point3::new(1.5, 3.0, 0.0), 0.5, 3),
        )
        .unwrap()
    }

    #[test]
    fn pattern_reference_points() {
        assert_eq!(bs_directivity_db(0.0), 0.0);
        let deg = std::f64::consts::PI / 180.0;
        assert_relative_eq!(bs_directivity_db(65.0 * deg), -12.0, max_relative = 1e-12);
        // clamp engages where 12 (theta/65)^2 = 30, at 65 * sqrt(2.5) degrees
        let clamp_angle = 65.0 * (30.0f64 / 12.0).sqrt() * deg;
        assert_relative_eq!(bs_directivity_db(clamp_angle), -30.0, max_relative = 1e-9);
        assert_eq!(bs_directivity_db(140.0 * deg), -30.0);
        // even in the angle, continuous at the clamp
        assert_eq!(bs_directivity_db(-0.3), bs_directivity_db(0.3));
        let eps = 1e-9;
        assert!(
            (bs_directivity_db(clamp_angle - eps) - bs_directivity_db(clamp_angle + eps)).abs()
                < 1e-6
        );
    }

    #[test]
    fn outdoor_baseline_follows_the_pattern() {
        let deg = std::f64::consts::PI / 180.0;
        let a = 0.01;
        let g0 = gain_outdoor_no_star(1e-12, 10.0, a).unwrap();
        let g65 = gain_outdoor_no_star(65.0 * deg, 10.0, a).unwrap();
        assert_relative_eq!(10.0 * (g65 / g0).log10(), -12.0, epsilon = 1e-9);
        // beyond the clamp the pattern is flat
        let g110 = gain_outdoor_no_star(110.0 * deg, 10.0, a).unwrap();
        let g150 = gain_outdoor_no_star(150.0 * deg, 10.0, a).unwrap();
        assert_relative_eq!(g110, g150, max_relative = 1e-12);
        // decreasing in distance
        assert!(gain_outdoor_no_star(0.3, 20.0, a).unwrap() < gain_outdoor_no_star(0.3, 10.0, a).unwrap());
    }

    #[test]
    fn indoor_baseline_sin_squared_law() {
        let p = SignalParams::from_wavelength(0.0099).unwrap();
        let deg = std::f64::consts::PI / 180.0;
        let a = 0.01;
        let g90 = gain_indoor_no_star(&p, 90.0 * deg, 2.0, a).unwrap();
        let g30 = gain_indoor_no_star(&p, 30.0 * deg, 2.0, a).unwrap();
        let g45 = gain_indoor_no_star(&p, 45.0 * deg, 2.0, a).unwrap();
        assert_relative_eq!(g30 / g90, 4.0, max_relative = 1e-12);
        assert_relative_eq!(g45 / g90, 2.0, max_relative = 1e-12);
        // halves when the distance doubles
        let g90_far = gain_indoor_no_star(&p, 90.0 * deg, 4.0, a).unwrap();
        assert_relative_eq!(g90 / g90_far, 2.0, max_relative = 1e-12);
        // the law times sin^2 * r is angle- and distance-free
        let mut reference: Option<f64> = None;
        for (theta, r) in [(0.3, 1.0), (0.9, 2.5), (1.4, 0.7)] {
            let v = gain_indoor_no_star(&p, theta, r, a).unwrap() * theta.sin().powi(2) * r;
            match reference {
                None => reference = Some(v),
                Some(first) => assert_relative_eq!(v, first, max_relative = 1e-12),
            }
        }
        assert!(matches!(
            gain_indoor_no_star(&p, 0.0, 1.0, a),
            Err(ModelError::SingularAngle { .. })
        ));
    }

    #[test]
    fn scene_validation() {
        let params = SignalParams::from_wavelength(0.0099).unwrap();
        // window poking out of the wall
        assert!(RoomScene::new(
            params,
            6.0,
            4.0,
            0.1,
            0.5,
            0.05,
            0.0125,
            0.01,
            50.0,
            Point3::new(-10.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            vec![Point3::new(1.5, 3.0, 0.0)],
        )
        .is_err());
        // near user outside the room
        assert!(RoomScene::new(
            params,
            6.0,
            4.0,
            2.0,
            0.5,
            0.05,
            0.0125,
            0.01,
            50.0,
            Point3::new(-10.0, 0.0, 0.0),
            Point3::new(7.0, 1.0, 0.0),
            vec![Point3::new(1.5, 3.0, 0.0)],
        )
        .is_err());
    }

    #[test]
    fn hybrid_boundary_and_dof_scale() {
        let s = scene();
        assert_relative_eq!(s.boundary_m(), 10.1, max_relative = 0.01);

        // the far user's critical volume dwarfs the whole surface (about
        // 2 m^2 of footprint at 20 m versus 0.25 m^2), so that side is a
        // single rank-one tile
        let side = s.user_aperture_m2.sqrt();
        let rx = BoxVolume::new(Point3::new(0.0, 0.0, 20.0), side, side, 0.01).unwrap();
        let critical = crate::regions::max_farfield_volume(&s.params, &rx, 20.0, s.star_thickness_m)
            .unwrap();
        assert_relative_eq!(critical / s.star_thickness_m, 2.0, max_relative = 0.05);
        assert!(critical > s.star_volume_m3() * 4.0);
    }

    #[test]
    fn regime_mismatch_detected() {
        let mut s = scene();
        s.far_user = Point3::new(-3.0, 2.0, 0.0); // inside the boundary
        assert!(matches!(
            gain_with_star(&s, &StrategyConfig::ps(), HybridTarget::Far),
            Err(ModelError::RegimeMismatch(_))
        ));
        let mut s2 = scene();
        s2.room_width_m = 40.0;
        s2.near_user = Point3::new(30.0, 2.0, 0.0); // beyond the boundary
        assert!(matches!(
            gain_with_star(&s2, &StrategyConfig::ps(), HybridTarget::Near),
            Err(ModelError::RegimeMismatch(_))
        ));
    }

    #[test]
    fn reg_and_seg_far_user_agree_for_equal_groups() {
        let s = scene();
        let seg = StrategyConfig {
            kind: StrategyKind::Seg,
            grouping: Some(s.hybrid_grouping(StrategyKind::Seg, 0).unwrap()),
            rng_seed: 0,
        };
        let reg = StrategyConfig {
            kind: StrategyKind::Reg,
            grouping: Some(s.hybrid_grouping(StrategyKind::Reg, 7).unwrap()),
            rng_seed: 7,
        };
        // identical group sizes give identical far-user closed forms
        let g_seg = gain_with_star(&s, &seg, HybridTarget::Far).unwrap();
        let g_reg = gain_with_star(&s, &reg, HybridTarget::Far).unwrap();
        assert_relative_eq!(g_seg, g_reg, max_relative = 1e-12);
    }

    #[test]
    fn far_user_collapses_when_one_group_empty() {
        let s = scene();
        let m = s.window_elements().len();
        let all_far = StrategyConfig {
            kind: StrategyKind::Reg,
            grouping: Some(Grouping { assignments: vec![0; m] }),
            rng_seed: 0,
        };
        let g = gain_with_star(&s, &all_far, HybridTarget::Far).unwrap();
        // equals the single-group coherent form
        let star = s.star_center();
        let r_sf = s.far_user.distance_to(&star);
        let v_r = s.user_aperture_m2 * s.user_aperture_m2.sqrt().min(0.01);
        let expected = s.feed_factor()
            * s.params.beta.norm_sqr()
            * v_r
            * s.window_elements()[0].volume()
            * (m as f64).powi(2)
            / (4.0 * std::f64::consts::PI * r_sf).powi(2);
        assert_relative_eq!(g, expected, max_relative = 1e-12);
    }

    #[test]
    fn colinear_users_double_the_ps_amplitude() {
        // angle zero between the users as seen from the surface: the
        // coherent factor is (1 + 1)^2 = 4 in the far-user numerator
        let mut s = scene();
        s.far_user = Point3::new(-20.0, 2.0, 0.0);
        s.room_width_m = 8.0;
        s.near_user = Point3::new(2.0, 2.0, 0.0);
        // alpha is pi here (opposite sides through the center), so instead
        // check directly at alpha = 0 via the xi/sinc identity
        let alpha = 0.0;
        let xi = xi_factor(&s.params, alpha, s.star_thickness_m).unwrap();
        assert_eq!(sinc(xi), 1.0);
        assert_relative_eq!((1.0 + sinc(xi)).powi(2), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn coverage_no_window_minimum_in_top_left() {
        let s = scene();
        let grid = coverage_grid(&s, CoverageMode::NoWindow, None, 10.0).unwrap();
        let (loc, _) = grid.min_location().unwrap();
        assert!(
            loc.x < s.room_width_m / 2.0 && loc.y > s.room_height_m / 2.0,
            "minimum at ({}, {}) not in the top-left region",
            loc.x,
            loc.y
        );
        // in fact the darkest cell hugs the wall at maximum height
        assert!(loc.x < 0.5);
        assert!(loc.y > s.room_height_m - 0.5);
    }

    #[test]
    fn coverage_open_window_peaks_on_boresight_strip() {
        let s = scene();
        let grid = coverage_grid(&s, CoverageMode::OpenWindow, None, 10.0).unwrap();
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = grid.value(ix, iy);
                if v.is_finite() && v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        let c = grid.cell_center(best.0, best.1);
        // the brightest cell sits in the window's boresight strip
        assert!(
            (c.y - s.window_center_y_m).abs() <= s.window_size_m,
            "peak at y = {}",
            c.y
        );
    }

    #[test]
    fn coverage_star_beats_open_window_in_zone() {
        let s = scene();
        let zone_center = Point3::new(1.5, 3.0, 0.0);
        let star =
            coverage_grid(&s, CoverageMode::StarRis, Some(&StrategyConfig::ps()), 10.0).unwrap();
        let open = coverage_grid(&s, CoverageMode::OpenWindow, None, 10.0).unwrap();
        let none = coverage_grid(&s, CoverageMode::NoWindow, None, 10.0).unwrap();

        let star_avg = star.zone_average_db(&zone_center, 0.5).unwrap();
        let open_avg = open.zone_average_db(&zone_center, 0.5).unwrap();
        let none_avg = none.zone_average_db(&zone_center, 0.5).unwrap();
        assert!(
            star_avg >= none_avg + 3.0,
            "star {star_avg:.2} dB vs sealed {none_avg:.2} dB"
        );
        assert!(
            star_avg >= open_avg + 1.0,
            "star {star_avg:.2} dB vs open {open_avg:.2} dB"
        );

        // focusing never hurts at the targeted cells (between focal spots
        // the coherent beams interfere and the field is speckled, so the
        // pointwise guarantee applies where the beams actually point)
        for t in &s.focus_targets {
            let ix = (t.x / star.cell_m) as usize;
            let iy = (t.y / star.cell_m) as usize;
            let sv = star.value(ix, iy);
            let ov = open.value(ix, iy);
            assert!(
                sv >= ov - 1e-6,
                "target cell ({ix},{iy}): star {sv:.2} dB < open {ov:.2} dB"
            );
        }
    }

    #[test]
    fn raster_round_trip_header() {
        let s = scene();
        let grid = coverage_grid(&s, CoverageMode::NoWindow, None, 10.0).unwrap();
        let text = grid.to_raster_string();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(header[0].parse::<usize>().unwrap(), grid.nx);
        assert_eq!(header[1].parse::<usize>().unwrap(), grid.ny);
        assert_eq!(text.lines().count(), grid.ny + 1);
        // masked guard band shows up as NaN tokens on the first row
        assert!(text.lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn angle_sweep_reference_deltas() {
        let s = scene();
        let deg = std::f64::consts::PI / 180.0;
        let rows = angle_sweep(&s, &[30.0 * deg, 65.0 * deg, 89.999 * deg]).unwrap();
        // indoor law: a factor of 4 (10 log10(4) = 6.02 dB) at 30 degrees
        // relative to 90
        let g30 = rows[0].gain_n_no_star_db;
        let g90 = rows[2].gain_n_no_star_db;
        assert!((g30 - g90 - 10.0 * 4f64.log10()).abs() < 0.01, "{}", g30 - g90);
        // outdoor law: -12 dB at the 3 dB beamwidth angle
        let f65 = rows[1].gain_f_no_star_db;
        let rows0 = angle_sweep(&s, &[1e-6]).unwrap();
        assert!((f65 - rows0[0].gain_f_no_star_db + 12.0).abs() < 0.01);
    }

    #[test]
    fn angle_sweep_ps_columns_stay_flat() {
        let s = scene();
        let deg = std::f64::consts::PI / 180.0;
        let angles: Vec<f64> = (1..17).map(|i| (5.0 * i as f64) * deg).collect();
        let rows = angle_sweep(&s, &angles).unwrap();
        let n_vals: Vec<f64> = rows.iter().map(|r| r.gain_n_ps_db).collect();
        let spread = n_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - n_vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 3.0, "near-user spread {spread:.2} dB");
    }
}
