//! Self-contained brute-force oracle for the multi-user closed forms:
//! sample the strategy's current distribution, propagate every sample with
//! the free-space Green's function, and integrate the received power over
//! the user volume. No tiling, kernel, or closed-form shortcut is used.
//!
//! Current conventions mirror the closed forms under test: the
//! power-splitting gain corresponds to a globally unit-norm current, the
//! grouped gains to the per-element `1/sqrt(V_m)` scaling. Focusing
//! profiles share one frame per user at the surface center; per-element
//! frames would leave inter-element phases unaligned, contradicting the
//! coherent per-tile sums the closed forms assert.

use num_complex::Complex64;
use starris_core::em::{
    focusing_phase, green_yy, local_frame, BoxVolume, Point3, SignalParams,
};
use starris_core::gain::LinkBudget;
use starris_core::kernel::QuadratureGrid;
use starris_core::multiuser::{
    gain_ps, gain_reg, make_grouping, superposition_normalization, RisLayout, StrategyKind,
    UserSide, UserSpec,
};

struct Samples {
    points: Vec<Point3>,
    weights: Vec<f64>,
    values: Vec<Complex64>,
}

impl Samples {
    fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum()
    }

    fn received_power(&self, params: &SignalParams, rx_grid: &QuadratureGrid) -> f64 {
        rx_grid
            .points
            .iter()
            .zip(&rx_grid.weights)
            .map(|(at, w)| {
                let mut field = Complex64::new(0.0, 0.0);
                for ((p, wj), v) in self.points.iter().zip(&self.weights).zip(&self.values) {
                    field += green_yy(params, at, p).expect("disjoint volumes") * v * *wj;
                }
                field.norm_sqr() * w
            })
            .sum()
    }
}

fn profile(
    params: &SignalParams,
    frame_center: &Point3,
    focus: &Point3,
    at: &Point3,
) -> Complex64 {
    let r = focus.distance_to(frame_center);
    let local = local_frame(frame_center, focus, at).unwrap();
    focusing_phase(params, &local, r).unwrap()
}

fn ps_samples(
    params: &SignalParams,
    layout: &RisLayout,
    users: &[Point3],
    counts: (usize, usize, usize),
) -> Samples {
    let mut out = Samples { points: vec![], weights: vec![], values: vec![] };
    let frame = layout.bounding.center;
    for element in &layout.elements {
        let a_m = superposition_normalization(params, element, users).unwrap();
        let scale = 1.0 / (element.volume() * a_m).sqrt();
        let grid = QuadratureGrid::midpoint(element, counts.0, counts.1, counts.2).unwrap();
        for pt in &grid.points {
            let sum: Complex64 = users.iter().map(|u| profile(params, &frame, u, pt)).sum();
            out.points.push(*pt);
            out.values.push(sum * scale);
        }
        out.weights.extend_from_slice(&grid.weights);
    }
    out
}

fn grouped_samples(
    params: &SignalParams,
    layout: &RisLayout,
    owners: &[usize],
    users: &[Point3],
    counts: (usize, usize, usize),
) -> Samples {
    let mut out = Samples { points: vec![], weights: vec![], values: vec![] };
    let frame = layout.bounding.center;
    for (element, &owner) in layout.elements.iter().zip(owners) {
        let scale = 1.0 / element.volume().sqrt();
        let grid = QuadratureGrid::midpoint(element, counts.0, counts.1, counts.2).unwrap();
        for pt in &grid.points {
            out.points.push(*pt);
            out.values.push(profile(params, &frame, &users[owner], pt) * scale);
        }
        out.weights.extend_from_slice(&grid.weights);
    }
    out
}

/// Run the three reference geometries through both strategies and both
/// users; returns the worst relative deviation between the closed form and
/// the brute-force integration.
pub fn run_brute_force_comparisons() -> f64 {
    // opposite-side users near the surface normal, with element thickness
    // setting the cross-talk strength
    let geometries = [
        (Point3::new(0.0, 0.0, 0.6), Point3::new(0.02, 0.0, -0.55), 0.25),
        (Point3::new(-0.02, 0.0, 0.58), Point3::new(0.015, 0.0, -0.6), 0.5),
        (Point3::new(0.02, 0.0, 0.62), Point3::new(-0.015, 0.0, -0.57), 0.125),
    ];

    let mut worst = 0.0f64;
    for (seed, (user_p, user_q, thickness_wl)) in geometries.into_iter().enumerate() {
        let params = SignalParams::from_wavelength(0.01).unwrap();
        let budget = LinkBudget::new(8.0, 25.0, 9e-4).unwrap();
        let bounding =
            BoxVolume::new(Point3::ORIGIN, 0.03, 0.03, thickness_wl * params.wavelength_m)
                .unwrap();
        let layout = RisLayout::grid(bounding, 12, 12).unwrap();
        let side_of = |p: &Point3| {
            if p.z > 0.0 {
                UserSide::Transmission
            } else {
                UserSide::Reflection
            }
        };
        let users = vec![
            UserSpec::new(user_p, (0.01, 0.01, 0.01), side_of(&user_p)).unwrap(),
            UserSpec::new(user_q, (0.01, 0.01, 0.01), side_of(&user_q)).unwrap(),
        ];
        let positions: Vec<Point3> = users.iter().map(|u| u.position).collect();

        let ps = ps_samples(&params, &layout, &positions, (2, 2, 4));
        let ps_norm = ps.norm_sq();
        let grouping = make_grouping(StrategyKind::Reg, &layout, &users, seed as u64).unwrap();
        let reg = grouped_samples(&params, &layout, &grouping.assignments, &positions, (2, 2, 4));

        for (target, user) in users.iter().enumerate() {
            let rx_grid =
                QuadratureGrid::for_wavelength(&user.receive_volume, &params, 4.0).unwrap();

            let closed_ps = gain_ps(&params, &budget, &layout, &users, target).unwrap();
            let brute_ps =
                budget.friis_factor() * ps.received_power(&params, &rx_grid) / ps_norm;
            worst = worst.max((closed_ps - brute_ps).abs() / brute_ps);

            let closed_reg =
                gain_reg(&params, &budget, &layout, &users, &grouping, target).unwrap();
            let brute_reg = budget.friis_factor() * reg.received_power(&params, &rx_grid);
            worst = worst.max((closed_reg - brute_reg).abs() / brute_reg);
        }
    }
    worst
}
