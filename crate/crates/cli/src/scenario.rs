//! Scenario files: a TOML document with mandatory unit suffixes describing
//! exactly one experiment.
//!
//! Parsing validates everything it can before any computation starts and
//! reports every problem it finds, not just the first.

use std::fmt;
use std::path::Path;

use starris_core::em::Point3;
use toml::value::Table;
use toml::Value;

use crate::units::{parse_quantity, Dimension};

/// A single validation problem, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    Syntax { message: String },
    MissingField { field: String },
    UnitError { field: String, message: String },
    RangeError { field: String, message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Syntax { message } => write!(f, "syntax: {message}"),
            ScenarioError::MissingField { field } => write!(f, "missing field: {field}"),
            ScenarioError::UnitError { field, message } => {
                write!(f, "unit error at {field}: {message}")
            }
            ScenarioError::RangeError { field, message } => {
                write!(f, "range error at {field}: {message}")
            }
        }
    }
}

/// Linear or logarithmic sweep of one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub log_spaced: bool,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / (self.steps - 1) as f64;
                if self.log_spaced {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect()
    }
}

/// One row of the field-boundary table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub label: String,
    pub wavelength_m: f64,
    pub surface_side_m: f64,
    pub receiver_side_m: f64,
}

/// Feed description shared by the gain experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedSpec {
    pub directivity: f64,
    pub distance_m: f64,
    pub aperture_m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    pub extent_x: f64,
    pub extent_y: f64,
    pub extent_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub position: Point3,
    pub extents: BoxSpec,
}

/// Room geometry for the hybrid experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub window_center_y_m: f64,
    pub window_size_m: f64,
    pub thickness_m: f64,
    pub element_size_m: f64,
    pub user_aperture_m2: f64,
    pub bs_distance_m: f64,
    pub far_user: Point3,
    pub near_user: Point3,
}

/// The six experiment kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    BoundaryTable {
        rows: Vec<BoundaryRow>,
    },
    ScalingSweep {
        wavelength_m: f64,
        feed: FeedSpec,
        distance_m: f64,
        element_size_m: f64,
        max_elements: usize,
        receiver: BoxSpec,
    },
    GainVsDistance {
        wavelength_m: f64,
        feed: FeedSpec,
        surface: BoxSpec,
        receiver: BoxSpec,
        distances: SweepAxis,
    },
    MultiuserSumrate {
        wavelength_m: f64,
        feed: FeedSpec,
        surface_thickness_m: f64,
        element_size_m: f64,
        sizes: SweepAxis,
        users: Vec<UserRow>,
        tx_power_w: f64,
        noise_w: f64,
    },
    HybridCoverage {
        wavelength_m: f64,
        room: RoomSpec,
        resolution_per_m: f64,
        strategy: String,
        zone_center: Point3,
        zone_size_m: f64,
        focus_grid: usize,
    },
    HybridAngleSweep {
        wavelength_m: f64,
        room: RoomSpec,
        angles: SweepAxis,
    },
}

impl Experiment {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Experiment::BoundaryTable { .. } => "boundary-table",
            Experiment::ScalingSweep { .. } => "scaling-sweep",
            Experiment::GainVsDistance { .. } => "gain-vs-distance",
            Experiment::MultiuserSumrate { .. } => "multiuser-sumrate",
            Experiment::HybridCoverage { .. } => "hybrid-coverage",
            Experiment::HybridAngleSweep { .. } => "hybrid-angle-sweep",
        }
    }
}

pub const EXPERIMENT_KINDS: [&str; 6] = [
    "boundary-table",
    "scaling-sweep",
    "gain-vs-distance",
    "multiuser-sumrate",
    "hybrid-coverage",
    "hybrid-angle-sweep",
];

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub samples_per_wavelength: f64,
    pub beta_magnitude: Option<f64>,
    pub output_prefix: String,
}

struct Parser {
    errors: Vec<ScenarioError>,
}

impl Parser {
    fn new() -> Self {
        Self { errors: Vec::new() }
    }

    fn missing(&mut self, field: &str) {
        self.errors.push(ScenarioError::MissingField { field: field.into() });
    }

    fn section<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(ScenarioError::RangeError {
                    field: name.into(),
                    message: "expected a table".into(),
                });
                None
            }
            None => {
                self.missing(name);
                None
            }
        }
    }

    fn quantity(&mut self, table: &Table, section: &str, name: &str, dim: Dimension) -> Option<f64> {
        let field = format!("{section}.{name}");
        match table.get(name) {
            None => {
                self.missing(&field);
                None
            }
            Some(Value::String(s)) => match parse_quantity(s, dim) {
                Ok(v) => Some(v),
                Err(message) => {
                    self.errors.push(ScenarioError::UnitError { field, message });
                    None
                }
            },
            Some(Value::Float(v)) if dim == Dimension::Dimensionless => Some(*v),
            Some(Value::Integer(v)) if dim == Dimension::Dimensionless => Some(*v as f64),
            Some(_) => {
                self.errors.push(ScenarioError::UnitError {
                    field,
                    message: format!("expected a string like \"0.5 m\" ({dim})"),
                });
                None
            }
        }
    }

    fn positive(&mut self, table: &Table, section: &str, name: &str, dim: Dimension) -> Option<f64> {
        let v = self.quantity(table, section, name, dim)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.errors.push(ScenarioError::RangeError {
                field: format!("{section}.{name}"),
                message: format!("must be positive, got {v}"),
            });
            None
        }
    }

    fn integer(&mut self, table: &Table, section: &str, name: &str) -> Option<i64> {
        let field = format!("{section}.{name}");
        match table.get(name) {
            None => {
                self.missing(&field);
                None
            }
            Some(Value::Integer(v)) => Some(*v),
            Some(_) => {
                self.errors.push(ScenarioError::RangeError {
                    field,
                    message: "expected an integer".into(),
                });
                None
            }
        }
    }

    fn string(&mut self, table: &Table, section: &str, name: &str) -> Option<String> {
        let field = format!("{section}.{name}");
        match table.get(name) {
            None => {
                self.missing(&field);
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.errors.push(ScenarioError::RangeError {
                    field,
                    message: "expected a string".into(),
                });
                None
            }
        }
    }

    /// Wavelength from either `wavelength` or `frequency`.
    fn signal_wavelength(&mut self, root: &Table) -> Option<f64> {
        let signal = self.section(root, "signal")?;
        if signal.contains_key("wavelength") {
            self.positive(signal, "signal", "wavelength", Dimension::Length)
        } else if signal.contains_key("frequency") {
            let f = self.positive(signal, "signal", "frequency", Dimension::Frequency)?;
            Some(starris_core::em::C0 / f)
        } else {
            self.missing("signal.wavelength (or signal.frequency)");
            None
        }
    }

    fn feed(&mut self, root: &Table) -> Option<FeedSpec> {
        let feed = self.section(root, "feed")?;
        let directivity = self.positive(feed, "feed", "directivity", Dimension::Dimensionless);
        let distance = self.positive(feed, "feed", "distance", Dimension::Length);
        let aperture = self.positive(feed, "feed", "aperture", Dimension::Area);
        Some(FeedSpec {
            directivity: directivity?,
            distance_m: distance?,
            aperture_m2: aperture?,
        })
    }

    fn box_spec(&mut self, root: &Table, name: &str) -> Option<BoxSpec> {
        let t = self.section(root, name)?;
        let x = self.positive(t, name, "width", Dimension::Length);
        let y = self.positive(t, name, "height", Dimension::Length);
        let z = self.positive(t, name, "depth", Dimension::Length);
        Some(BoxSpec { extent_x: x?, extent_y: y?, extent_z: z? })
    }

    fn sweep(&mut self, root: &Table, dim: Dimension) -> Option<SweepAxis> {
        let t = self.section(root, "sweep")?;
        let from = self.quantity(t, "sweep", "from", dim);
        let to = self.quantity(t, "sweep", "to", dim);
        let steps = self.integer(t, "sweep", "steps");
        let log_spaced = matches!(t.get("log"), Some(Value::Boolean(true)));
        let steps = match steps {
            Some(s) if s >= 1 => s as usize,
            Some(s) => {
                self.errors.push(ScenarioError::RangeError {
                    field: "sweep.steps".into(),
                    message: format!("must be at least 1, got {s}"),
                });
                return None;
            }
            None => return None,
        };
        Some(SweepAxis { from: from?, to: to?, steps, log_spaced })
    }

    fn point(&mut self, table: &Table, section: &str) -> Option<Point3> {
        let x = self.quantity(table, section, "x", Dimension::Length);
        let y = self.quantity(table, section, "y", Dimension::Length);
        let z = match table.get("z") {
            // the hybrid scenes live in the z = 0 plane
            None => Some(0.0),
            Some(_) => self.quantity(table, section, "z", Dimension::Length),
        };
        Some(Point3::new(x?, y?, z?))
    }

    fn room(&mut self, root: &Table) -> Option<RoomSpec> {
        let room = self.section(root, "room")?;
        let width = self.positive(room, "room", "width", Dimension::Length);
        let height = self.positive(room, "room", "height", Dimension::Length);

        let window = self.section(root, "window")?;
        let center_y = self.positive(window, "window", "center_y", Dimension::Length);
        let size = self.positive(window, "window", "size", Dimension::Length);
        let thickness = self.positive(window, "window", "thickness", Dimension::Length);
        let element = self.positive(window, "window", "element_size", Dimension::Length);

        let users = self.section(root, "users")?;
        let aperture = self.positive(users, "users", "aperture", Dimension::Area);
        let bs_distance = self.positive(users, "users", "bs_distance", Dimension::Length);
        let far = match users.get("far") {
            Some(Value::Table(t)) => self.point(t, "users.far"),
            _ => {
                self.missing("users.far");
                None
            }
        };
        let near = match users.get("near") {
            Some(Value::Table(t)) => self.point(t, "users.near"),
            _ => {
                self.missing("users.near");
                None
            }
        };

        Some(RoomSpec {
            width_m: width?,
            height_m: height?,
            window_center_y_m: center_y?,
            window_size_m: size?,
            thickness_m: thickness?,
            element_size_m: element?,
            user_aperture_m2: aperture?,
            bs_distance_m: bs_distance?,
            far_user: far?,
            near_user: near?,
        })
    }
}

/// Parse and validate a scenario file. All validation errors are returned
/// together.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, Vec<ScenarioError>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ScenarioError::Syntax { message: format!("cannot read {}: {e}", path.display()) }]
    })?;
    parse_scenario_str(&text)
}

/// Parse a scenario from its text content.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, Vec<ScenarioError>> {
    let root: Table = toml::from_str(text)
        .map_err(|e| vec![ScenarioError::Syntax { message: e.to_string() }])?;
    let mut p = Parser::new();

    let kind = match root.get("experiment") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            p.errors.push(ScenarioError::RangeError {
                field: "experiment".into(),
                message: "expected a string".into(),
            });
            return Err(p.errors);
        }
        None => {
            p.missing("experiment");
            return Err(p.errors);
        }
    };

    let seed = match root.get("seed") {
        Some(Value::Integer(s)) if *s >= 0 => *s as u64,
        Some(Value::Integer(s)) => {
            p.errors.push(ScenarioError::RangeError {
                field: "seed".into(),
                message: format!("must be nonnegative, got {s}"),
            });
            0
        }
        Some(_) => {
            p.errors.push(ScenarioError::RangeError {
                field: "seed".into(),
                message: "expected an integer".into(),
            });
            0
        }
        None => 0,
    };

    let samples_per_wavelength = match root.get("quadrature") {
        Some(Value::Table(t)) => p
            .positive(t, "quadrature", "samples_per_wavelength", Dimension::Dimensionless)
            .unwrap_or(4.0),
        _ => 4.0,
    };

    let output_prefix = match root.get("output") {
        Some(Value::Table(t)) => match t.get("prefix") {
            Some(Value::String(s)) => s.clone(),
            _ => kind.clone(),
        },
        _ => kind.clone(),
    };

    let experiment = match kind.as_str() {
        "boundary-table" => parse_boundary(&mut p, &root),
        "scaling-sweep" => parse_scaling(&mut p, &root),
        "gain-vs-distance" => parse_gain_distance(&mut p, &root),
        "multiuser-sumrate" => parse_multiuser(&mut p, &root),
        "hybrid-coverage" => parse_coverage(&mut p, &root),
        "hybrid-angle-sweep" => parse_angle_sweep(&mut p, &root),
        other => {
            p.errors.push(ScenarioError::RangeError {
                field: "experiment".into(),
                message: format!(
                    "unknown experiment '{other}'; valid kinds: {}",
                    EXPERIMENT_KINDS.join(", ")
                ),
            });
            None
        }
    };

    match experiment {
        Some(experiment) if p.errors.is_empty() => Ok(ScenarioConfig {
            experiment,
            seed,
            samples_per_wavelength,
            beta_magnitude: None,
            output_prefix,
        }),
        _ => Err(p.errors),
    }
}

fn parse_boundary(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let rows_value = match root.get("rows") {
        Some(Value::Array(a)) if !a.is_empty() => a,
        Some(Value::Array(_)) => {
            p.errors.push(ScenarioError::RangeError {
                field: "rows".into(),
                message: "needs at least one row".into(),
            });
            return None;
        }
        _ => {
            p.missing("rows");
            return None;
        }
    };
    let mut rows = Vec::new();
    for (i, v) in rows_value.iter().enumerate() {
        let section = format!("rows[{i}]");
        let Some(t) = v.as_table() else {
            p.errors.push(ScenarioError::RangeError {
                field: section,
                message: "expected a table".into(),
            });
            continue;
        };
        let wavelength = if t.contains_key("wavelength") {
            p.positive(t, &section, "wavelength", Dimension::Length)
        } else if t.contains_key("frequency") {
            p.positive(t, &section, "frequency", Dimension::Frequency)
                .map(|f| starris_core::em::C0 / f)
        } else {
            p.missing(&format!("{section}.wavelength (or frequency)"));
            None
        };
        let surface = p.positive(t, &section, "surface", Dimension::Length);
        let receiver = p.positive(t, &section, "receiver", Dimension::Length);
        let label = t
            .get("label")
            .and_then(|v| v.as_str())
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("row{}", i + 1));
        if let (Some(w), Some(s), Some(r)) = (wavelength, surface, receiver) {
            rows.push(BoundaryRow {
                label,
                wavelength_m: w,
                surface_side_m: s,
                receiver_side_m: r,
            });
        }
    }
    if p.errors.is_empty() {
        Some(Experiment::BoundaryTable { rows })
    } else {
        None
    }
}

fn parse_scaling(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let wavelength = p.signal_wavelength(root);
    let feed = p.feed(root);
    let receiver = p.box_spec(root, "receiver");
    let scaling = p.section(root, "scaling")?;
    let distance = p.positive(scaling, "scaling", "distance", Dimension::Length);
    let element = p.positive(scaling, "scaling", "element_size", Dimension::Length);
    let max_elements = match p.integer(scaling, "scaling", "max_elements") {
        Some(m) if m >= 2 => Some(m as usize),
        Some(m) => {
            p.errors.push(ScenarioError::RangeError {
                field: "scaling.max_elements".into(),
                message: format!("needs at least 2 elements to fit a slope, got {m}"),
            });
            None
        }
        None => None,
    };
    Some(Experiment::ScalingSweep {
        wavelength_m: wavelength?,
        feed: feed?,
        distance_m: distance?,
        element_size_m: element?,
        max_elements: max_elements?,
        receiver: receiver?,
    })
}

fn parse_gain_distance(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let wavelength = p.signal_wavelength(root);
    let feed = p.feed(root);
    let surface = p.box_spec(root, "surface");
    let receiver = p.box_spec(root, "receiver");
    let distances = p.sweep(root, Dimension::Length);
    let distances = distances.and_then(|d| {
        if d.from > 0.0 && d.to > 0.0 {
            Some(d)
        } else {
            p.errors.push(ScenarioError::RangeError {
                field: "sweep.from".into(),
                message: "distances must be positive".into(),
            });
            None
        }
    });
    Some(Experiment::GainVsDistance {
        wavelength_m: wavelength?,
        feed: feed?,
        surface: surface?,
        receiver: receiver?,
        distances: distances?,
    })
}

fn parse_multiuser(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let wavelength = p.signal_wavelength(root);
    let feed = p.feed(root);
    let surface = p.section(root, "surface");
    let (thickness, element_size) = match surface {
        Some(t) => (
            p.positive(t, "surface", "thickness", Dimension::Length),
            p.positive(t, "surface", "element_size", Dimension::Length),
        ),
        None => (None, None),
    };
    let sizes = p.sweep(root, Dimension::Length);

    let mut users = Vec::new();
    match root.get("users") {
        Some(Value::Array(list)) if list.len() >= 2 => {
            for (i, v) in list.iter().enumerate() {
                let section = format!("users[{i}]");
                let Some(t) = v.as_table() else {
                    p.errors.push(ScenarioError::RangeError {
                        field: section,
                        message: "expected a table".into(),
                    });
                    continue;
                };
                let pos = p.point(t, &section);
                let w = p.positive(t, &section, "width", Dimension::Length);
                let h = p.positive(t, &section, "height", Dimension::Length);
                let d = p.positive(t, &section, "depth", Dimension::Length);
                if let (Some(pos), Some(w), Some(h), Some(d)) = (pos, w, h, d) {
                    if pos.z == 0.0 {
                        p.errors.push(ScenarioError::RangeError {
                            field: format!("{section}.z"),
                            message: "users must sit off the surface plane (z != 0)".into(),
                        });
                    } else {
                        users.push(UserRow {
                            position: pos,
                            extents: BoxSpec { extent_x: w, extent_y: h, extent_z: d },
                        });
                    }
                }
            }
        }
        Some(Value::Array(_)) => p.errors.push(ScenarioError::RangeError {
            field: "users".into(),
            message: "needs at least two users".into(),
        }),
        _ => p.missing("users"),
    }

    let link = p.section(root, "link");
    let (tx_power, noise) = match link {
        Some(t) => (
            p.positive(t, "link", "tx_power", Dimension::Power),
            p.positive(t, "link", "noise", Dimension::Power),
        ),
        None => (None, None),
    };

    Some(Experiment::MultiuserSumrate {
        wavelength_m: wavelength?,
        feed: feed?,
        surface_thickness_m: thickness?,
        element_size_m: element_size?,
        sizes: sizes?,
        users,
        tx_power_w: tx_power?,
        noise_w: noise?,
    })
}

fn parse_coverage(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let wavelength = p.signal_wavelength(root);
    let room = p.room(root);
    let coverage = p.section(root, "coverage")?;
    let resolution =
        p.positive(coverage, "coverage", "resolution", Dimension::Dimensionless).and_then(|r| {
            if r >= 10.0 {
                Some(r)
            } else {
                p.errors.push(ScenarioError::RangeError {
                    field: "coverage.resolution".into(),
                    message: format!("must be at least 10 points per metre, got {r}"),
                });
                None
            }
        });
    let strategy = p.string(coverage, "coverage", "strategy").and_then(|s| {
        if ["PS", "SEG", "REG"].contains(&s.as_str()) {
            Some(s)
        } else {
            p.errors.push(ScenarioError::RangeError {
                field: "coverage.strategy".into(),
                message: format!("unknown strategy '{s}', expected PS, SEG, or REG"),
            });
            None
        }
    });
    let zone_x = p.positive(coverage, "coverage", "zone_center_x", Dimension::Length);
    let zone_y = p.positive(coverage, "coverage", "zone_center_y", Dimension::Length);
    let zone_size = p.positive(coverage, "coverage", "zone_size", Dimension::Length);
    let focus_grid = match coverage.get("targets") {
        Some(Value::Integer(n)) if *n >= 1 => *n as usize,
        Some(Value::Integer(n)) => {
            p.errors.push(ScenarioError::RangeError {
                field: "coverage.targets".into(),
                message: format!("must be at least 1, got {n}"),
            });
            3
        }
        _ => 3,
    };
    Some(Experiment::HybridCoverage {
        wavelength_m: wavelength?,
        room: room?,
        resolution_per_m: resolution?,
        strategy: strategy?,
        zone_center: Point3::new(zone_x?, zone_y?, 0.0),
        zone_size_m: zone_size?,
        focus_grid,
    })
}

fn parse_angle_sweep(p: &mut Parser, root: &Table) -> Option<Experiment> {
    let wavelength = p.signal_wavelength(root);
    let room = p.room(root);
    let angles = p.sweep(root, Dimension::Angle);
    let angles = angles.and_then(|a| {
        let quarter = std::f64::consts::FRAC_PI_2;
        if a.from > 0.0 && a.to < quarter {
            Some(a)
        } else {
            p.errors.push(ScenarioError::RangeError {
                field: "sweep".into(),
                message: "angles must lie strictly inside (0 deg, 90 deg)".into(),
            });
            None
        }
    });
    Some(Experiment::HybridAngleSweep {
        wavelength_m: wavelength?,
        room: room?,
        angles: angles?,
    })
}
