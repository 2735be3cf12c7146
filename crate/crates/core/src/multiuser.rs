//! Multi-user configuration strategies for a simultaneously transmitting
//! and reflecting surface.
//!
//! Three ways to serve `U` users with `M` elements:
//!
//! * **PS** (power splitting): every element superposes the focusing
//!   profiles of all users, normalized to keep the per-element radiated
//!   power fixed;
//! * **SEG** (selective element grouping): each user owns the `M/U`
//!   elements nearest to it;
//! * **REG** (random element grouping): a seeded uniform shuffle splits the
//!   elements evenly.
//!
//! Closed-form per-user gains follow the angular cross-talk factor
//! `sinc(xi)` with `xi = pi * (1 - cos(alpha)) * dz / lambda`, where `alpha`
//! is the angle under which the two users are seen from an element. The
//! surface normal is +z: transmission-side users sit at `z > 0`, reflection
//! side at `z < 0`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::em::{BoxVolume, Point3, SignalParams};
use crate::error::{ModelError, Result};
use crate::gain::{partition_tiles, LinkBudget, TilePartition, TilingMode};
use crate::kernel::QuadratureGrid;

/// Which side of the surface a user is served on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserSide {
    /// Through the surface, `z > 0`.
    Transmission,
    /// Bounced back, `z < 0`.
    Reflection,
}

/// A served user: position, receiving volume centered there, and side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSpec {
    pub position: Point3,
    pub receive_volume: BoxVolume,
    pub side: UserSide,
}

impl UserSpec {
    /// Build a user with a receive box of the given extents centered at
    /// `position`. The position's z sign must agree with the side.
    pub fn new(position: Point3, extents: (f64, f64, f64), side: UserSide) -> Result<Self> {
        let consistent = match side {
            UserSide::Transmission => position.z > 0.0,
            UserSide::Reflection => position.z < 0.0,
        };
        if !consistent {
            return Err(ModelError::InvalidParameter(format!(
                "user at z = {} is not on the {side:?} side",
                position.z
            )));
        }
        Ok(Self {
            position,
            receive_volume: BoxVolume::new(position, extents.0, extents.1, extents.2)?,
            side,
        })
    }
}

/// Operating mode of one element, induced by which users it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementMode {
    TransmitOnly,
    ReflectOnly,
    Star,
}

/// A rectangular grid of equal surface elements in the x-y plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RisLayout {
    pub elements: Vec<BoxVolume>,
    pub modes: Vec<ElementMode>,
    pub bounding: BoxVolume,
    pub nx: usize,
    pub ny: usize,
}

impl RisLayout {
    /// `nx * ny` elements tiling the x-y footprint of `bounding`.
    pub fn grid(bounding: BoxVolume, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(ModelError::InvalidParameter(
                "element grid needs at least one element per axis".into(),
            ));
        }
        let step_x = bounding.extent_x / nx as f64;
        let step_y = bounding.extent_y / ny as f64;
        let corner_x = bounding.center.x - bounding.extent_x / 2.0;
        let corner_y = bounding.center.y - bounding.extent_y / 2.0;
        let mut elements = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                let center = Point3::new(
                    corner_x + (ix as f64 + 0.5) * step_x,
                    corner_y + (iy as f64 + 0.5) * step_y,
                    bounding.center.z,
                );
                elements.push(BoxVolume::new(center, step_x, step_y, bounding.extent_z)?);
            }
        }
        Ok(Self {
            modes: vec![ElementMode::Star; elements.len()],
            elements,
            bounding,
            nx,
            ny,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Volume of a single element (all elements are equal by construction).
    pub fn element_volume(&self) -> f64 {
        self.elements[0].volume()
    }

    /// Derive per-element modes from a grouping: an element serving only
    /// transmission-side users transmits, only reflection-side users
    /// reflects; anything mixed (or power splitting) runs in the combined
    /// mode.
    pub fn assign_modes(&mut self, grouping: Option<&Grouping>, users: &[UserSpec]) {
        match grouping {
            None => self.modes.fill(ElementMode::Star),
            Some(g) => {
                for (m, &u) in g.assignments.iter().enumerate() {
                    self.modes[m] = match users[u].side {
                        UserSide::Transmission => ElementMode::TransmitOnly,
                        UserSide::Reflection => ElementMode::ReflectOnly,
                    };
                }
            }
        }
    }
}

/// Strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Ps,
    Seg,
    Reg,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::Ps => "PS",
            StrategyKind::Seg => "SEG",
            StrategyKind::Reg => "REG",
        })
    }
}

/// Element-to-user assignment (one owning user index per element).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub assignments: Vec<usize>,
}

impl Grouping {
    /// Check the grouping covers `n_elements` exactly once with valid user
    /// labels.
    pub fn validate(&self, n_elements: usize, n_users: usize) -> Result<()> {
        if self.assignments.len() != n_elements {
            return Err(ModelError::InvalidGrouping(format!(
                "grouping labels {} elements, surface has {n_elements}",
                self.assignments.len()
            )));
        }
        for &u in &self.assignments {
            if u >= n_users {
                return Err(ModelError::InvalidGrouping(format!(
                    "user label {u} out of range (users: {n_users})"
                )));
            }
        }
        Ok(())
    }

    /// [`Grouping::validate`] plus the balance requirement: group sizes
    /// within one of `M / U`.
    pub fn validate_balanced(&self, n_elements: usize, n_users: usize) -> Result<()> {
        self.validate(n_elements, n_users)?;
        let mut sizes = vec![0usize; n_users];
        for &u in &self.assignments {
            sizes[u] += 1;
        }
        let floor = n_elements / n_users;
        let ceil = floor + usize::from(!n_elements.is_multiple_of(n_users));
        if sizes.iter().any(|&s| s + 1 < floor || s > ceil + 1) {
            return Err(ModelError::InvalidGrouping(format!(
                "group sizes {sizes:?} deviate from {floor}..={ceil} by more than one"
            )));
        }
        Ok(())
    }

    pub fn group_of(&self, user: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &u)| u == user)
            .map(|(m, _)| m)
            .collect()
    }
}

/// Full strategy description: kind, explicit grouping for SEG/REG, and the
/// shuffle seed for REG.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub grouping: Option<Grouping>,
    pub rng_seed: u64,
}

impl StrategyConfig {
    pub fn ps() -> Self {
        Self { kind: StrategyKind::Ps, grouping: None, rng_seed: 0 }
    }

    pub fn seg() -> Self {
        Self { kind: StrategyKind::Seg, grouping: None, rng_seed: 0 }
    }

    pub fn reg(seed: u64) -> Self {
        Self { kind: StrategyKind::Reg, grouping: None, rng_seed: seed }
    }
}

/// Per-user gains plus the resulting sum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub per_user_gain: Vec<f64>,
    pub per_user_gain_db: Vec<f64>,
    pub sum_rate_bps_hz: f64,
}

impl GainReport {
    pub fn new(gains: Vec<f64>, tx_power_w: f64, noise_w: f64) -> Result<Self> {
        let rate = sum_rate(&gains, tx_power_w, noise_w)?;
        let db = gains.iter().map(|g| 10.0 * g.log10()).collect();
        Ok(Self { per_user_gain: gains, per_user_gain_db: db, sum_rate_bps_hz: rate })
    }
}

/// Angle in `[0, pi]` under which two users are seen from an element center.
pub fn angle_between_users(
    element_center: &Point3,
    user_p: &Point3,
    user_q: &Point3,
) -> Result<f64> {
    let a = (*user_p - *element_center)
        .normalized()
        .ok_or(ModelError::DegenerateFrame)?;
    let b = (*user_q - *element_center)
        .normalized()
        .ok_or(ModelError::DegenerateFrame)?;
    Ok(a.dot(&b).clamp(-1.0, 1.0).acos())
}

/// Cross-talk phase argument `xi = pi * (1 - cos(alpha)) * dz / lambda`.
pub fn xi_factor(params: &SignalParams, alpha: f64, element_width_z: f64) -> Result<f64> {
    if !(element_width_z.is_finite() && element_width_z > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "element width must be positive, got {element_width_z}"
        )));
    }
    Ok(std::f64::consts::PI * (1.0 - alpha.cos()) * element_width_z / params.wavelength_m)
}

/// Unnormalized `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

fn check_users_outside(layout: &RisLayout, users: &[UserSpec]) -> Result<()> {
    if users.is_empty() {
        return Err(ModelError::InvalidParameter("no users given".into()));
    }
    for (i, u) in users.iter().enumerate() {
        if layout.bounding.contains(&u.position) {
            return Err(ModelError::SingularPoint(format!(
                "user {i} lies inside the surface volume"
            )));
        }
    }
    Ok(())
}

/// Per-element power-splitting normalization
/// `A_m = (1/V_m) * integral over the element of |sum_p F_p|^2`,
/// evaluated by midpoint quadrature. Exactly `U` for one target or
/// co-located targets, and dimensionless by the `1/V_m` scaling.
pub fn superposition_normalization(
    params: &SignalParams,
    element: &BoxVolume,
    targets: &[Point3],
) -> Result<f64> {
    let grid = QuadratureGrid::for_wavelength(element, params, 6.0)?;
    let mut acc = 0.0;
    for (pt, w) in grid.points.iter().zip(&grid.weights) {
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        for t in targets {
            let r = t.distance_to(&element.center);
            let local = crate::em::local_frame(&element.center, t, pt)?;
            sum += crate::em::focusing_phase(params, &local, r)?;
        }
        acc += sum.norm_sqr() * w;
    }
    Ok(acc / element.volume())
}

/// Power-splitting gain for user `target`:
/// `friis * |beta|^2 * sum_m V_R * V_m / ((4*pi*r_m)^2 * A_m)
///  * (1 + sum_{p != target} sinc(xi_m))^2`.
///
/// Collapses exactly to the per-element single-user sum when only one user
/// is served.
pub fn gain_ps(
    params: &SignalParams,
    budget: &LinkBudget,
    layout: &RisLayout,
    users: &[UserSpec],
    target: usize,
) -> Result<f64> {
    check_users_outside(layout, users)?;
    if target >= users.len() {
        return Err(ModelError::InvalidParameter(format!(
            "target user {target} out of range"
        )));
    }
    let q = &users[target];
    let v_r = q.receive_volume.volume();
    let beta_sq = params.beta.norm_sqr();
    let targets: Vec<Point3> = users.iter().map(|u| u.position).collect();
    let mut sum = 0.0;
    for element in &layout.elements {
        let r_mq = q.position.distance_to(&element.center);
        let mut coherent = 1.0;
        for (p_idx, p) in users.iter().enumerate() {
            if p_idx == target {
                continue;
            }
            let alpha = angle_between_users(&element.center, &p.position, &q.position)?;
            coherent += sinc(xi_factor(params, alpha, element.extent_z)?);
        }
        let a_m = superposition_normalization(params, element, &targets)?;
        let denom = 4.0 * std::f64::consts::PI * r_mq;
        sum += v_r * element.volume() / (denom * denom * a_m) * coherent * coherent;
    }
    Ok(budget.friis_factor() * beta_sq * sum)
}

/// Tile partition of the surface as seen by one user.
pub fn tiles_for_user(
    params: &SignalParams,
    layout: &RisLayout,
    user: &UserSpec,
) -> Result<TilePartition> {
    partition_tiles(
        params,
        &layout.bounding,
        &user.receive_volume,
        &user.position,
        TilingMode::PerTileDistance,
    )
}

/// Shared engine for the grouped strategies: per tile `i`,
/// `(M_i_own + sum_{q != p} M_i_q * sinc(xi_i))^2 * V_R * V_m / (4*pi*r_i)^2`.
///
/// With a selective grouping the tiles come out purely owned and the mixed
/// sum reduces to the own-tiles `M_i^2` / foreign-tiles `(M_i * sinc)^2`
/// split.
fn gain_grouped(
    params: &SignalParams,
    budget: &LinkBudget,
    layout: &RisLayout,
    users: &[UserSpec],
    grouping: &Grouping,
    target: usize,
) -> Result<f64> {
    check_users_outside(layout, users)?;
    if target >= users.len() {
        return Err(ModelError::InvalidParameter(format!(
            "target user {target} out of range"
        )));
    }
    grouping.validate(layout.len(), users.len())?;

    let p = &users[target];
    let tiles = tiles_for_user(params, layout, p)?;

    // per-tile, per-user element counts
    let mut counts = vec![vec![0usize; users.len()]; tiles.len()];
    for (m, element) in layout.elements.iter().enumerate() {
        let tile = tiles.tile_containing_xy(&element.center).ok_or_else(|| {
            ModelError::InvalidGrouping(format!("element {m} outside the tile partition"))
        })?;
        counts[tile][grouping.assignments[m]] += 1;
    }

    let v_r = p.receive_volume.volume();
    let v_m = layout.element_volume();
    let beta_sq = params.beta.norm_sqr();
    let dz = layout.bounding.extent_z;

    let mut sum = 0.0;
    for (i, tile) in tiles.tiles.iter().enumerate() {
        let own = counts[i][target] as f64;
        let mut amplitude = own;
        for (q_idx, q) in users.iter().enumerate() {
            if q_idx == target || counts[i][q_idx] == 0 {
                continue;
            }
            let alpha =
                angle_between_users(&tile.volume.center, &p.position, &q.position)?;
            amplitude += counts[i][q_idx] as f64 * sinc(xi_factor(params, alpha, dz)?);
        }
        if amplitude == 0.0 {
            continue;
        }
        let r_i = p.position.distance_to(&tile.volume.center);
        let denom = 4.0 * std::f64::consts::PI * r_i;
        sum += v_r * v_m / (denom * denom) * amplitude * amplitude;
    }
    Ok(budget.friis_factor() * beta_sq * sum)
}

/// Random-element-grouping gain for user `target` under the given grouping.
pub fn gain_reg(
    params: &SignalParams,
    budget: &LinkBudget,
    layout: &RisLayout,
    users: &[UserSpec],
    grouping: &Grouping,
    target: usize,
) -> Result<f64> {
    gain_grouped(params, budget, layout, users, grouping, target)
}

/// Selective-element-grouping gain for user `target`. Expects the
/// nearest-element grouping produced by [`make_grouping`] with
/// [`StrategyKind::Seg`]; tiles then split cleanly into own and foreign
/// ones.
pub fn gain_seg(
    params: &SignalParams,
    budget: &LinkBudget,
    layout: &RisLayout,
    users: &[UserSpec],
    grouping: &Grouping,
    target: usize,
) -> Result<f64> {
    gain_grouped(params, budget, layout, users, grouping, target)
}

/// Build an element-to-user assignment.
///
/// SEG assigns elements to their nearest user under capacity limits: all
/// (element, user) pairs are visited in ascending distance order, first
/// filling every group to `floor(M/U)`, then topping up to the ceiling.
/// REG shuffles the elements with a seeded generator and deals them
/// round-robin. Both give group sizes within one of `M / U` and are
/// deterministic for a fixed seed.
pub fn make_grouping(
    kind: StrategyKind,
    layout: &RisLayout,
    users: &[UserSpec],
    seed: u64,
) -> Result<Grouping> {
    let m = layout.len();
    let u = users.len();
    if u == 0 {
        return Err(ModelError::InvalidParameter("no users given".into()));
    }
    if m < u {
        return Err(ModelError::InvalidParameter(format!(
            "{m} elements cannot serve {u} users"
        )));
    }
    match kind {
        StrategyKind::Ps => Err(ModelError::InvalidParameter(
            "power splitting uses no element grouping".into(),
        )),
        StrategyKind::Reg => {
            let mut order: Vec<usize> = (0..m).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            let mut assignments = vec![0usize; m];
            for (pos, &elem) in order.iter().enumerate() {
                assignments[elem] = pos % u;
            }
            Ok(Grouping { assignments })
        }
        StrategyKind::Seg => {
            let floor = m / u;
            let ceil = floor + usize::from(!m.is_multiple_of(u));
            let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * u);
            for (e, element) in layout.elements.iter().enumerate() {
                for (i, user) in users.iter().enumerate() {
                    pairs.push((user.position.distance_to(&element.center), e, i));
                }
            }
            pairs.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then(a.2.cmp(&b.2))
                    .then(a.1.cmp(&b.1))
            });

            let mut assignments = vec![usize::MAX; m];
            let mut sizes = vec![0usize; u];
            let mut assigned = 0usize;
            for cap in [floor, ceil] {
                if assigned == m {
                    break;
                }
                for &(_, e, i) in &pairs {
                    if assignments[e] != usize::MAX || sizes[i] >= cap {
                        continue;
                    }
                    assignments[e] = i;
                    sizes[i] += 1;
                    assigned += 1;
                    if assigned == m {
                        break;
                    }
                }
            }
            debug_assert_eq!(assigned, m);
            Ok(Grouping { assignments })
        }
    }
}

/// Per-user gains under a strategy; groupings are derived on demand.
pub fn gains_for_strategy(
    params: &SignalParams,
    budget: &LinkBudget,
    layout: &RisLayout,
    users: &[UserSpec],
    config: &StrategyConfig,
) -> Result<Vec<f64>> {
    let mut gains = Vec::with_capacity(users.len());
    match config.kind {
        StrategyKind::Ps => {
            for target in 0..users.len() {
                gains.push(gain_ps(params, budget, layout, users, target)?);
            }
        }
        StrategyKind::Seg | StrategyKind::Reg => {
            let grouping = match &config.grouping {
                Some(g) => g.clone(),
                None => make_grouping(config.kind, layout, users, config.rng_seed)?,
            };
            for target in 0..users.len() {
                gains.push(gain_grouped(params, budget, layout, users, &grouping, target)?);
            }
        }
    }
    Ok(gains)
}

/// Shannon sum rate `sum_p log2(1 + gain_p * P / N)` in bit/s/Hz.
pub fn sum_rate(gains: &[f64], tx_power_w: f64, noise_w: f64) -> Result<f64> {
    if !(noise_w.is_finite() && noise_w > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "noise power must be positive, got {noise_w}"
        )));
    }
    if !(tx_power_w.is_finite() && tx_power_w >= 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "transmit power must be nonnegative, got {tx_power_w}"
        )));
    }
    if gains.iter().any(|g| *g < 0.0 || !g.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "gains must be finite and nonnegative".into(),
        ));
    }
    Ok(gains
        .iter()
        .map(|g| (1.0 + g * tx_power_w / noise_w).log2())
        .sum())
}
