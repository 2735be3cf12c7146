//! The Hermitian coupling kernel between source points, its paraxial
//! approximation, and its discretization into a matrix.
//!
//! `K(r1, r2) = integral over the receiver volume of conj(G(r, r1)) * G(r, r2)`
//! measures how strongly two source points couple through their jointly
//! received power. Sampled on a quadrature grid with square-root weight
//! scaling it becomes a Hermitian positive-semidefinite matrix whose largest
//! eigenvalue is the best achievable surface-to-receiver gain and whose
//! significant eigenvalue count is the number of usable spatial
//! sub-channels. This discretized route is the ground-truth oracle against
//! which every closed form in the crate is checked.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::em::{focusing_phase, green_yy, local_frame, BoxVolume, Point3, SignalParams};
use crate::error::{ModelError, Result};

/// Default ratio below the largest eigenvalue at which an eigenvalue stops
/// counting toward the degrees of freedom.
pub const DEFAULT_DOF_THRESHOLD: f64 = 0.01;

/// Matrices up to this dimension are eigendecomposed directly; larger ones
/// fall back to power iteration with deflation.
const DENSE_EIGEN_LIMIT: usize = 2048;

/// Minimum separation-to-extent ratio for the paraxial kernel form.
const PARAXIAL_MIN_RATIO: f64 = 5.0;

/// Midpoint-rule quadrature over a box volume.
///
/// Points sit at uniform cell centers and every weight is the (positive)
/// cell volume, so the weights sum to the box volume by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    pub source_volume: BoxVolume,
}

impl QuadratureGrid {
    /// Uniform midpoint grid with explicit per-axis counts.
    pub fn midpoint(volume: &BoxVolume, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(ModelError::InvalidParameter(
                "quadrature counts must all be at least 1".into(),
            ));
        }
        let n = nx * ny * nz;
        let cell = volume.volume() / n as f64;
        let mut points = Vec::with_capacity(n);
        let step_x = volume.extent_x / nx as f64;
        let step_y = volume.extent_y / ny as f64;
        let step_z = volume.extent_z / nz as f64;
        let corner = Point3::new(
            volume.center.x - volume.extent_x / 2.0,
            volume.center.y - volume.extent_y / 2.0,
            volume.center.z - volume.extent_z / 2.0,
        );
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    points.push(Point3::new(
                        corner.x + (ix as f64 + 0.5) * step_x,
                        corner.y + (iy as f64 + 0.5) * step_y,
                        corner.z + (iz as f64 + 0.5) * step_z,
                    ));
                }
            }
        }
        Ok(Self { points, weights: vec![cell; n], source_volume: *volume })
    }

    /// Midpoint grid sized from the carrier: at least `samples_per_wavelength`
    /// cells per wavelength on each axis (and at least one cell per axis).
    ///
    /// Oscillatory integrands need sampling tied to the wavelength; four
    /// samples per wavelength is the coarsest density the crate trusts.
    pub fn for_wavelength(
        volume: &BoxVolume,
        params: &SignalParams,
        samples_per_wavelength: f64,
    ) -> Result<Self> {
        if !(samples_per_wavelength.is_finite() && samples_per_wavelength > 0.0) {
            return Err(ModelError::InvalidParameter(
                "samples per wavelength must be positive".into(),
            ));
        }
        let count = |extent: f64| -> usize {
            ((extent / params.wavelength_m * samples_per_wavelength).ceil() as usize).max(1)
        };
        Self::midpoint(
            volume,
            count(volume.extent_x),
            count(volume.extent_y),
            count(volume.extent_z),
        )
    }

    /// Single-sample grid: the box center carrying the full volume as its
    /// weight. Models a point receiver.
    pub fn single_point(volume: &BoxVolume) -> Self {
        Self {
            points: vec![volume.center],
            weights: vec![volume.volume()],
            source_volume: *volume,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Hermitian PSD sampling of the coupling kernel over a source grid.
///
/// Entry `(i, j)` holds `sqrt(w_i * w_j) * K(src_i, src_j)`, symmetrized to
/// machine precision, so the matrix eigenvalues approximate the continuous
/// operator's eigenvalues under unit-norm currents.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub entries: DMatrix<Complex64>,
    pub grid: QuadratureGrid,
    pub receiver: BoxVolume,
}

/// Exact (quadrature) kernel value between two source points, integrating
/// `conj(G(r, src1)) * G(r, src2)` over the receiver grid.
pub fn kernel_exact(
    params: &SignalParams,
    src1: &Point3,
    src2: &Point3,
    receiver: &BoxVolume,
    rx_grid: &QuadratureGrid,
) -> Result<Complex64> {
    if rx_grid.source_volume != *receiver {
        return Err(ModelError::InvalidParameter(
            "receiver grid does not discretize the given receiver volume".into(),
        ));
    }
    for (name, src) in [("src1", src1), ("src2", src2)] {
        if receiver.contains(src) {
            return Err(ModelError::SingularPoint(format!(
                "{name} lies inside the receiver volume"
            )));
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (pt, w) in rx_grid.points.iter().zip(&rx_grid.weights) {
        let g1 = green_yy(params, pt, src1)?;
        let g2 = green_yy(params, pt, src2)?;
        acc += g1.conj() * g2 * *w;
    }
    Ok(acc)
}

/// Paraxial closed form of the kernel for two sources inside a small
/// sub-volume centered at `subvolume_center`:
/// `|beta|^2 * F(src1) * conj(F(src2)) * V_R / (4*pi*r)^2`
/// with `r` the sub-volume-to-receiver-center distance and `F` the focusing
/// phase in the local frame looking at the receiver.
///
/// Returns [`ModelError::ParaxialDomainViolation`] when the separation is
/// less than five times the larger of the receiver extent and the source
/// offsets; call [`kernel_paraxial_unchecked`] to override.
pub fn kernel_paraxial(
    params: &SignalParams,
    src1: &Point3,
    src2: &Point3,
    subvolume_center: &Point3,
    receiver: &BoxVolume,
) -> Result<Complex64> {
    let r = receiver.center.distance_to(subvolume_center);
    let extent = receiver
        .max_extent()
        .max(2.0 * src1.distance_to(subvolume_center))
        .max(2.0 * src2.distance_to(subvolume_center));
    if extent > 0.0 && r / extent < PARAXIAL_MIN_RATIO {
        return Err(ModelError::ParaxialDomainViolation {
            ratio: r / extent,
            min_ratio: PARAXIAL_MIN_RATIO,
        });
    }
    kernel_paraxial_unchecked(params, src1, src2, subvolume_center, receiver)
}

/// The paraxial form without the separation-ratio guard.
pub fn kernel_paraxial_unchecked(
    params: &SignalParams,
    src1: &Point3,
    src2: &Point3,
    subvolume_center: &Point3,
    receiver: &BoxVolume,
) -> Result<Complex64> {
    let r = receiver.center.distance_to(subvolume_center);
    if r <= 0.0 {
        return Err(ModelError::SingularPoint(
            "receiver center coincides with the sub-volume center".into(),
        ));
    }
    let f1 = focusing_phase(params, &local_frame(subvolume_center, &receiver.center, src1)?, r)?;
    let f2 = focusing_phase(params, &local_frame(subvolume_center, &receiver.center, src2)?, r)?;
    let beta_sq = params.beta.norm_sqr();
    let denom = 4.0 * std::f64::consts::PI * r;
    Ok(f1 * f2.conj() * (beta_sq * receiver.volume() / (denom * denom)))
}

/// Assemble the discretized kernel matrix over a source grid.
///
/// The matrix is built as a Gram product `A^H A` with
/// `A[m, i] = sqrt(w_m) * G(rx_m, src_i) * sqrt(w_i)`, which makes it
/// positive semidefinite by construction; it is then symmetrized to absorb
/// the last bits of rounding asymmetry.
pub fn build_kernel_matrix(
    params: &SignalParams,
    tx_grid: &QuadratureGrid,
    receiver: &BoxVolume,
    rx_grid: &QuadratureGrid,
) -> Result<KernelMatrix> {
    if rx_grid.source_volume != *receiver {
        return Err(ModelError::InvalidParameter(
            "receiver grid does not discretize the given receiver volume".into(),
        ));
    }
    if tx_grid.is_empty() || rx_grid.is_empty() {
        return Err(ModelError::InvalidParameter("empty quadrature grid".into()));
    }
    if tx_grid.source_volume.intersects(receiver) {
        return Err(ModelError::SingularPoint(
            "source and receiver volumes overlap".into(),
        ));
    }

    let n_src = tx_grid.len();
    let n_rx = rx_grid.len();
    let rx_sqrt_w: Vec<f64> = rx_grid.weights.iter().map(|w| w.sqrt()).collect();

    // columns are independent, so they can be filled concurrently
    let columns: Vec<Vec<Complex64>> = (0..n_src)
        .into_par_iter()
        .map(|i| {
            let src = tx_grid.points[i];
            let sw = tx_grid.weights[i].sqrt();
            rx_grid
                .points
                .iter()
                .zip(&rx_sqrt_w)
                .map(|(pt, rw)| {
                    // sources never coincide with receiver samples: volumes
                    // are disjoint, checked above
                    green_yy(params, pt, &src).expect("disjoint volumes") * (sw * rw)
                })
                .collect()
        })
        .collect();

    let mut factor = DMatrix::<Complex64>::zeros(n_rx, n_src);
    for (i, col) in columns.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            factor[(m, i)] = *v;
        }
    }

    let gram = factor.adjoint() * &factor;
    let entries = (&gram + gram.adjoint()).scale(0.5);
    Ok(KernelMatrix { entries, grid: tx_grid.clone(), receiver: *receiver })
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// All eigenvalues, descending. Real because the matrix is Hermitian.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Err(ModelError::InvalidParameter("empty kernel matrix".into()));
        }
        if self.dim() <= DENSE_EIGEN_LIMIT {
            let mut vals: Vec<f64> = self
                .entries
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            Ok(vals)
        } else {
            Err(ModelError::InvalidParameter(format!(
                "full spectrum requested for a {0}x{0} matrix; only matrices up to \
                 {DENSE_EIGEN_LIMIT} are decomposed densely",
                self.dim()
            )))
        }
    }

    /// Principal submatrix restricted to the given grid indices, with the
    /// matching sub-grid. Used to compare per-group sub-channels against the
    /// full surface.
    pub fn restricted(&self, keep: &[usize]) -> Result<KernelMatrix> {
        if keep.is_empty() {
            return Err(ModelError::InvalidParameter("empty restriction".into()));
        }
        if keep.iter().any(|&i| i >= self.dim()) {
            return Err(ModelError::InvalidParameter("restriction index out of range".into()));
        }
        let n = keep.len();
        let mut entries = DMatrix::<Complex64>::zeros(n, n);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                entries[(a, b)] = self.entries[(i, j)];
            }
        }
        let grid = QuadratureGrid {
            points: keep.iter().map(|&i| self.grid.points[i]).collect(),
            weights: keep.iter().map(|&i| self.grid.weights[i]).collect(),
            source_volume: self.grid.source_volume,
        };
        Ok(KernelMatrix { entries, grid, receiver: self.receiver })
    }
}

/// Number of eigenvalues at least `threshold_ratio` times the largest one:
/// the effective degrees of freedom of the discretized channel.
pub fn effective_dof(matrix: &KernelMatrix, threshold_ratio: f64) -> Result<usize> {
    if matrix.dim() == 0 {
        return Err(ModelError::InvalidParameter("empty kernel matrix".into()));
    }
    if !(threshold_ratio > 0.0 && threshold_ratio < 1.0) {
        return Err(ModelError::InvalidParameter(format!(
            "DoF threshold must lie in (0, 1), got {threshold_ratio}"
        )));
    }
    if matrix.dim() <= DENSE_EIGEN_LIMIT {
        let vals = matrix.eigenvalues()?;
        let lambda_max = vals[0];
        if lambda_max <= 0.0 {
            return Err(ModelError::InvalidParameter(
                "kernel matrix has no positive eigenvalue".into(),
            ));
        }
        Ok(vals.iter().filter(|&&v| v >= threshold_ratio * lambda_max).count())
    } else {
        // deflated power iteration: peel eigenpairs until below threshold
        let mut deflated = matrix.entries.clone();
        let mut lambda_max = f64::NAN;
        let mut count = 0usize;
        loop {
            let (lambda, v) = power_iteration(&deflated)?;
            if lambda_max.is_nan() {
                lambda_max = lambda;
            }
            if lambda < threshold_ratio * lambda_max || count == matrix.dim() {
                return Ok(count.max(1));
            }
            count += 1;
            let vv = &v * v.adjoint();
            deflated -= vv.scale(lambda);
        }
    }
}

/// Largest eigenvalue and its unit-norm eigenvector.
///
/// The pair satisfies `|K v - lambda v| <= 1e-8 * lambda` or the call fails
/// with [`ModelError::ConvergenceFailure`].
pub fn dominant_eigenpair(matrix: &KernelMatrix) -> Result<(f64, DVector<Complex64>)> {
    if matrix.dim() == 0 {
        return Err(ModelError::InvalidParameter("empty kernel matrix".into()));
    }
    let (lambda, v) = if matrix.dim() <= DENSE_EIGEN_LIMIT {
        let eig = matrix.entries.clone().symmetric_eigen();
        let (best, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty spectrum");
        let lambda = eig.eigenvalues[best];
        let v = eig.eigenvectors.column(best).into_owned();
        (lambda, v.normalize())
    } else {
        power_iteration(&matrix.entries)?
    };

    let residual = (&matrix.entries * &v - v.scale(lambda)).norm();
    if lambda <= 0.0 || residual > 1e-8 * lambda {
        return Err(ModelError::ConvergenceFailure { residual, iterations: 0 });
    }
    Ok((lambda, v))
}

/// Plain power iteration for the dominant eigenpair of a Hermitian PSD
/// matrix. Deterministic start vector; used above the dense-solver size cap.
fn power_iteration(matrix: &DMatrix<Complex64>) -> Result<(f64, DVector<Complex64>)> {
    let n = matrix.nrows();
    let mut v = DVector::<Complex64>::from_fn(n, |i, _| {
        // fixed pseudo-random phases avoid starting orthogonal to the
        // dominant eigenvector
        Complex64::from_polar(1.0, (i as f64 * 0.7391 + 0.31).sin() * 3.0)
    })
    .normalize();

    let max_iters = 10_000;
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 0..max_iters {
        let w = matrix * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok((0.0, v));
        }
        let next = w.unscale(norm);
        lambda = norm; // Rayleigh quotient of the previous unit iterate
        residual = (matrix * &next - next.scale(lambda)).norm();
        v = next;
        if residual <= 1e-10 * lambda && it > 2 {
            return Ok((lambda, v));
        }
    }
    if residual <= 1e-8 * lambda {
        Ok((lambda, v))
    } else {
        Err(ModelError::ConvergenceFailure { residual, iterations: max_iters })
    }
}
