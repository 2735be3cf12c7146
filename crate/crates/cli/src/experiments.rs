//! Experiment drivers: map a validated scenario onto the model crate and
//! render deterministic output files.

use std::fmt;

use starris_core::em::{BoxVolume, Point3, SignalParams};
use starris_core::gain::{
    channel_gain_upper_bound, partition_tiles, power_scaling, LinkBudget, TilingMode,
};
use starris_core::hybrid::{coverage_grid, angle_sweep, CoverageMode, RoomScene};
use starris_core::kernel::{build_kernel_matrix, effective_dof, QuadratureGrid, DEFAULT_DOF_THRESHOLD};
use starris_core::multiuser::{
    gains_for_strategy, make_grouping, sum_rate, RisLayout, StrategyConfig, StrategyKind,
    UserSide, UserSpec,
};
use starris_core::regions::{classify, field_boundary, max_farfield_volume, reactive_boundary};
use starris_core::ModelError;

use crate::output::{Csv, OutputFile};
use crate::scenario::{BoxSpec, Experiment, FeedSpec, ScenarioConfig};

/// Failure while executing a validated scenario.
#[derive(Debug)]
pub enum RunError {
    Model(ModelError),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Model(e) => write!(f, "model error: {e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        RunError::Model(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn signal(config: &ScenarioConfig, wavelength_m: f64) -> Result<SignalParams, RunError> {
    let p = SignalParams::from_wavelength(wavelength_m)?;
    Ok(match config.beta_magnitude {
        Some(mag) => p.with_beta_magnitude(mag)?,
        None => p,
    })
}

fn budget(feed: &FeedSpec) -> Result<LinkBudget, RunError> {
    Ok(LinkBudget::new(feed.directivity, feed.distance_m, feed.aperture_m2)?)
}

fn receiver_box(spec: &BoxSpec, center: Point3) -> Result<BoxVolume, RunError> {
    Ok(BoxVolume::new(center, spec.extent_x, spec.extent_y, spec.extent_z)?)
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        if x <= 0.0 || y <= 0.0 {
            return None;
        }
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        None
    } else {
        Some((n * sxy - sx * sy) / denom)
    }
}

/// Run the configured experiment, producing the output files in memory.
pub fn run_experiment(config: &ScenarioConfig) -> Result<Vec<OutputFile>, RunError> {
    match &config.experiment {
        Experiment::BoundaryTable { rows } => run_boundary(config, rows),
        Experiment::ScalingSweep {
            wavelength_m,
            feed,
            distance_m,
            element_size_m,
            max_elements,
            receiver,
        } => run_scaling(
            config,
            *wavelength_m,
            feed,
            *distance_m,
            *element_size_m,
            *max_elements,
            receiver,
        ),
        Experiment::GainVsDistance { wavelength_m, feed, surface, receiver, distances } => {
            run_gain_distance(config, *wavelength_m, feed, surface, receiver, distances)
        }
        Experiment::MultiuserSumrate {
            wavelength_m,
            feed,
            surface_thickness_m,
            element_size_m,
            sizes,
            users,
            tx_power_w,
            noise_w,
        } => run_multiuser(
            config,
            *wavelength_m,
            feed,
            *surface_thickness_m,
            *element_size_m,
            sizes,
            users,
            *tx_power_w,
            *noise_w,
        ),
        Experiment::HybridCoverage {
            wavelength_m,
            room,
            resolution_per_m,
            strategy,
            zone_center,
            zone_size_m,
            focus_grid,
        } => run_coverage(
            config,
            *wavelength_m,
            room,
            *resolution_per_m,
            strategy,
            zone_center,
            *zone_size_m,
            *focus_grid,
        ),
        Experiment::HybridAngleSweep { wavelength_m, room, angles } => {
            run_angle_sweep(config, *wavelength_m, room, angles)
        }
    }
}

fn run_boundary(
    config: &ScenarioConfig,
    rows: &[crate::scenario::BoundaryRow],
) -> Result<Vec<OutputFile>, RunError> {
    let mut csv = Csv::new(&[
        ("label", "row label"),
        ("wavelength_m", "carrier wavelength, m"),
        ("surface_m", "surface side, m"),
        ("receiver_m", "receiver side, m"),
        ("boundary_m", "radiating near-field / far-field boundary, m"),
        ("reactive_m", "reactive near-field boundary, m"),
    ]);
    for row in rows {
        let params = signal(config, row.wavelength_m)?;
        let tx = BoxVolume::new(
            Point3::ORIGIN,
            row.surface_side_m,
            row.surface_side_m,
            row.surface_side_m.min(0.05),
        )?;
        let rx = BoxVolume::new(
            Point3::new(0.0, 0.0, 1.0),
            row.receiver_side_m,
            row.receiver_side_m,
            row.receiver_side_m.min(0.01),
        )?;
        let rb = field_boundary(&params, &tx, &rx);
        let rr = reactive_boundary(&params, &tx);
        csv.row(vec![
            Csv::text(&row.label),
            Csv::number(row.wavelength_m),
            Csv::number(row.surface_side_m),
            Csv::number(row.receiver_side_m),
            Csv::number(rb),
            Csv::number(rr),
        ]);
    }
    Ok(csv_outputs(&config.output_prefix, csv))
}

/// Elements in a row along x; the surface box grows with the count.
fn scaling_surface(element_size_m: f64, m: usize) -> BoxVolume {
    BoxVolume::new(
        Point3::ORIGIN,
        element_size_m * m as f64,
        element_size_m,
        element_size_m,
    )
    .expect("positive extents")
}

#[allow(clippy::too_many_arguments)]
fn run_scaling(
    config: &ScenarioConfig,
    wavelength_m: f64,
    feed: &FeedSpec,
    distance_m: f64,
    element_size_m: f64,
    max_elements: usize,
    receiver: &BoxSpec,
) -> Result<Vec<OutputFile>, RunError> {
    let params = signal(config, wavelength_m)?;
    let budget = budget(feed)?;
    let rx = receiver_box(receiver, Point3::new(0.0, 0.0, distance_m))?;
    let element_volume = element_size_m.powi(3);

    let mut csv = Csv::new(&[
        ("elements", "number of surface elements"),
        ("surface_volume_m3", "total surface volume, m^3"),
        ("critical_volume_m3", "largest far-field surface volume at this distance, m^3"),
        ("tiles", "tile count of the partition"),
        ("received_power", "received power, linear"),
        ("regime", "far or near field by the volume criterion"),
    ]);

    let mut far_points = Vec::new();
    let mut near_points = Vec::new();
    let mut crossover_elements: Option<usize> = None;

    for m in 1..=max_elements {
        let tx = scaling_surface(element_size_m, m);
        let critical = max_farfield_volume(&params, &rx, distance_m, tx.extent_z)?;
        let partition =
            partition_tiles(&params, &tx, &rx, &rx.center, TilingMode::PerTileDistance)?;

        // bin the element centers into tiles
        let mut counts = vec![0usize; partition.len()];
        for e in 0..m {
            let x = -tx.extent_x / 2.0 + (e as f64 + 0.5) * element_size_m;
            let center = Point3::new(x, 0.0, 0.0);
            let tile = partition
                .tile_containing_xy(&center)
                .expect("element centers lie on the surface face");
            counts[tile] += 1;
        }
        let groups: Vec<(f64, usize)> = partition
            .tiles
            .iter()
            .zip(&counts)
            .filter(|&(_, &c)| c > 0)
            .map(|(t, &c)| (t.distance_m, c))
            .collect();
        let power = power_scaling(&params, &budget, rx.volume(), element_volume, &groups)?;

        let far = tx.volume() <= critical * (1.0 + 1e-9);
        if far {
            far_points.push((m as f64, power));
        } else {
            near_points.push((m as f64, power));
            crossover_elements.get_or_insert(m);
        }
        csv.row(vec![
            Csv::integer(m),
            Csv::number(tx.volume()),
            Csv::number(critical),
            Csv::integer(partition.len()),
            Csv::number(power),
            Csv::text(if far { "far" } else { "near" }),
        ]);
    }

    let mut summary = Csv::new(&[
        ("slope_far", "log-log power slope over the far-field limb"),
        ("slope_near", "log-log power slope over the near-field limb"),
        ("crossover_elements", "first element count past the volume criterion"),
    ]);
    summary.row(vec![
        loglog_slope(&far_points).map_or("NaN".into(), Csv::number),
        loglog_slope(&near_points).map_or("NaN".into(), Csv::number),
        crossover_elements.map_or("none".into(), Csv::integer),
    ]);

    let mut files = csv_outputs(&config.output_prefix, csv);
    files.extend(csv_outputs(&format!("{}_slopes", config.output_prefix), summary));
    Ok(files)
}

fn run_gain_distance(
    config: &ScenarioConfig,
    wavelength_m: f64,
    feed: &FeedSpec,
    surface: &BoxSpec,
    receiver: &BoxSpec,
    distances: &crate::scenario::SweepAxis,
) -> Result<Vec<OutputFile>, RunError> {
    let params = signal(config, wavelength_m)?;
    let budget = budget(feed)?;
    let tx = BoxVolume::new(Point3::ORIGIN, surface.extent_x, surface.extent_y, surface.extent_z)?;

    let mut csv = Csv::new(&[
        ("distance_m", "surface-to-receiver distance, m"),
        ("gain", "end-to-end gain upper bound, linear"),
        ("gain_db", "end-to-end gain upper bound, dB"),
        ("tiles", "tile count of the partition"),
        ("region", "field region at this distance"),
    ]);
    for d in distances.values() {
        let rx = receiver_box(receiver, Point3::new(0.0, 0.0, d))?;
        let partition =
            partition_tiles(&params, &tx, &rx, &rx.center, TilingMode::PerTileDistance)?;
        let gain = channel_gain_upper_bound(&params, &budget, &partition, &rx)?;
        let report = classify(&params, &tx, &rx, d)?;
        csv.row(vec![
            Csv::number(d),
            Csv::number(gain),
            Csv::db(10.0 * gain.log10()),
            Csv::integer(partition.len()),
            Csv::text(&report.region.to_string()),
        ]);
    }
    Ok(csv_outputs(&config.output_prefix, csv))
}

/// Effective DoF of the surface-to-user channel, optionally restricted to
/// the grid points owned by the user under a grouping.
fn user_dof(
    params: &SignalParams,
    layout: &RisLayout,
    user: &UserSpec,
    owned: Option<(&[usize], usize)>,
) -> Result<usize, RunError> {
    let tx_grid = QuadratureGrid::midpoint(&layout.bounding, 16, 16, 1)?;
    let rx_grid = QuadratureGrid::midpoint(&user.receive_volume, 6, 6, 1)?;
    let matrix = build_kernel_matrix(params, &tx_grid, &user.receive_volume, &rx_grid)?;
    let matrix = match owned {
        None => matrix,
        Some((assignments, target)) => {
            let keep: Vec<usize> = tx_grid
                .points
                .iter()
                .enumerate()
                .filter(|(_, pt)| {
                    layout
                        .elements
                        .iter()
                        .position(|e| {
                            (pt.x - e.center.x).abs() <= e.extent_x / 2.0 + 1e-12
                                && (pt.y - e.center.y).abs() <= e.extent_y / 2.0 + 1e-12
                        })
                        .is_some_and(|e| assignments[e] == target)
                })
                .map(|(i, _)| i)
                .collect();
            matrix.restricted(&keep)?
        }
    };
    Ok(effective_dof(&matrix, DEFAULT_DOF_THRESHOLD)?)
}

#[allow(clippy::too_many_arguments)]
fn run_multiuser(
    config: &ScenarioConfig,
    wavelength_m: f64,
    feed: &FeedSpec,
    surface_thickness_m: f64,
    element_size_m: f64,
    sizes: &crate::scenario::SweepAxis,
    users: &[crate::scenario::UserRow],
    tx_power_w: f64,
    noise_w: f64,
) -> Result<Vec<OutputFile>, RunError> {
    let params = signal(config, wavelength_m)?;
    let budget = budget(feed)?;

    let user_specs: Vec<UserSpec> = users
        .iter()
        .map(|u| {
            let side = if u.position.z > 0.0 {
                UserSide::Transmission
            } else {
                UserSide::Reflection
            };
            UserSpec::new(
                u.position,
                (u.extents.extent_x, u.extents.extent_y, u.extents.extent_z),
                side,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut columns: Vec<(String, String)> = vec![
        ("size_m".into(), "surface side, m".into()),
        ("strategy".into(), "configuration strategy".into()),
        ("sum_rate_bps_hz".into(), "Shannon sum rate, bit/s/Hz".into()),
    ];
    for i in 0..user_specs.len() {
        columns.push((format!("user{i}_gain"), format!("end-to-end gain of user {i}, linear")));
        columns.push((
            format!("user{i}_dof"),
            format!("effective sub-channel count toward user {i} (owned elements only for SEG/REG)"),
        ));
    }
    let col_refs: Vec<(&str, &str)> =
        columns.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut csv = Csv::new(&col_refs);

    for size in sizes.values() {
        let n = (size / element_size_m).round().max(1.0) as usize;
        let bounding = BoxVolume::new(Point3::ORIGIN, size, size, surface_thickness_m)?;
        let layout = RisLayout::grid(bounding, n, n)?;
        for kind in [StrategyKind::Ps, StrategyKind::Reg, StrategyKind::Seg] {
            let strategy = StrategyConfig {
                kind,
                grouping: None,
                rng_seed: config.seed,
            };
            let gains = gains_for_strategy(&params, &budget, &layout, &user_specs, &strategy)?;
            let rate = sum_rate(&gains, tx_power_w, noise_w)?;
            let grouping = match kind {
                StrategyKind::Ps => None,
                _ => Some(make_grouping(kind, &layout, &user_specs, config.seed)?),
            };
            let mut row = vec![Csv::number(size), Csv::text(&kind.to_string()), Csv::number(rate)];
            for (i, user) in user_specs.iter().enumerate() {
                row.push(Csv::number(gains[i]));
                let owned = grouping.as_ref().map(|g| (g.assignments.as_slice(), i));
                row.push(Csv::integer(user_dof(&params, &layout, user, owned)?));
            }
            csv.row(row);
        }
    }
    Ok(csv_outputs(&config.output_prefix, csv))
}

fn build_scene(
    params: SignalParams,
    room: &crate::scenario::RoomSpec,
    focus_targets: Vec<Point3>,
) -> Result<RoomScene, RunError> {
    Ok(RoomScene::new(
        params,
        room.width_m,
        room.height_m,
        room.window_center_y_m,
        room.window_size_m,
        room.thickness_m,
        room.element_size_m,
        room.user_aperture_m2,
        room.bs_distance_m,
        room.far_user,
        room.near_user,
        focus_targets,
    )?)
}

#[allow(clippy::too_many_arguments)]
fn run_coverage(
    config: &ScenarioConfig,
    wavelength_m: f64,
    room: &crate::scenario::RoomSpec,
    resolution_per_m: f64,
    strategy: &str,
    zone_center: &Point3,
    zone_size_m: f64,
    focus_grid: usize,
) -> Result<Vec<OutputFile>, RunError> {
    let params = signal(config, wavelength_m)?;
    let targets = RoomScene::zone_targets(*zone_center, zone_size_m, focus_grid);
    let scene = build_scene(params, room, targets)?;
    let strategy_config = match strategy {
        "SEG" => StrategyConfig::seg(),
        "REG" => StrategyConfig::reg(config.seed),
        _ => StrategyConfig::ps(),
    };

    let mut files = Vec::new();
    let mut zone_rows = Vec::new();
    for mode in [CoverageMode::NoWindow, CoverageMode::OpenWindow, CoverageMode::StarRis] {
        let grid = coverage_grid(
            &scene,
            mode,
            if mode == CoverageMode::StarRis { Some(&strategy_config) } else { None },
            resolution_per_m,
        )?;
        files.push(OutputFile {
            name: format!("{}_{}.raster", config.output_prefix, mode),
            contents: grid.to_raster_string(),
        });
        let avg = grid.zone_average_db(zone_center, zone_size_m);
        let min = grid.min_location();
        zone_rows.push((mode.to_string(), avg, min));
    }

    let mut csv = Csv::new(&[
        ("mode", "coverage mode"),
        ("zone_avg_db", "mean power over the focus zone, dB"),
        ("min_x_m", "x of the weakest unmasked cell, m"),
        ("min_y_m", "y of the weakest unmasked cell, m"),
        ("min_db", "weakest unmasked cell value, dB"),
    ]);
    for (mode, avg, min) in zone_rows {
        let (loc, val) = min.expect("grids have unmasked cells");
        csv.row(vec![
            Csv::text(&mode),
            avg.map_or("NaN".into(), Csv::db),
            Csv::number(loc.x),
            Csv::number(loc.y),
            Csv::db(val),
        ]);
    }
    files.extend(csv_outputs(&format!("{}_zones", config.output_prefix), csv));
    Ok(files)
}

fn run_angle_sweep(
    config: &ScenarioConfig,
    wavelength_m: f64,
    room: &crate::scenario::RoomSpec,
    angles: &crate::scenario::SweepAxis,
) -> Result<Vec<OutputFile>, RunError> {
    let params = signal(config, wavelength_m)?;
    // angle studies use the power-splitting strategy toward the two users;
    // focus targets are irrelevant, any valid point will do
    let scene = build_scene(params, room, vec![Point3::new(room.width_m / 2.0, room.height_m / 2.0, 0.0)])?;
    let rows = angle_sweep(&scene, &angles.values())?;

    let mut csv = Csv::new(&[
        ("theta_deg", "sweep angle, degrees"),
        ("gain_f_no_star_db", "outdoor user baseline (sidelobe pattern), dB"),
        ("gain_n_no_star_db", "indoor user baseline (corner diffraction), dB"),
        ("gain_f_ps_db", "outdoor user through the surface, power splitting, dB"),
        ("gain_n_ps_db", "indoor user through the surface, power splitting, dB"),
    ]);
    for row in rows {
        csv.row(vec![
            Csv::number(row.theta_rad.to_degrees()),
            Csv::db(row.gain_f_no_star_db),
            Csv::db(row.gain_n_no_star_db),
            Csv::db(row.gain_f_ps_db),
            Csv::db(row.gain_n_ps_db),
        ]);
    }
    Ok(csv_outputs(&config.output_prefix, csv))
}

fn csv_outputs(prefix: &str, csv: Csv) -> Vec<OutputFile> {
    vec![
        OutputFile { name: format!("{prefix}.csv"), contents: csv.render() },
        OutputFile { name: format!("{prefix}.columns.txt"), contents: csv.sidecar() },
    ]
}
