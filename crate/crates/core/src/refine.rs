//! ICP refinement from a coarse initial transform.
//!
//! Two variants: point-to-point (closed-form Kabsch update) and
//! point-to-plane (linearized least-squares twist update, target normals
//! from k=16 neighborhood PCA). Correspondences are nearest neighbors gated
//! by a maximum distance, found through a uniform spatial hash with cell
//! size equal to the gate.

use nalgebra::{Matrix3, Matrix6, Point3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::spatial::SpatialHash;

pub const DEFAULT_MAX_ITERATIONS: usize = 50;
pub const DEFAULT_CONVERGENCE_EPS: f64 = 1e-6;
pub const NORMAL_NEIGHBORHOOD: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IcpVariant {
    #[default]
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Clone, Copy)]
pub struct IcpConfig {
    pub max_iterations: usize,
    pub max_correspondence_dist_m: f64,
    /// Relative change in mean squared correspondence distance that counts
    /// as converged.
    pub convergence_eps: f64,
    pub variant: IcpVariant,
}

impl IcpConfig {
    pub fn new(max_correspondence_dist_m: f64) -> Result<Self> {
        let cfg = Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_correspondence_dist_m,
            convergence_eps: DEFAULT_CONVERGENCE_EPS,
            variant: IcpVariant::PointToPoint,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "icp max_iterations must be >= 1".into(),
            ));
        }
        if !(self.max_correspondence_dist_m > 0.0) {
            return Err(Error::InvalidParameter(
                "icp correspondence gate must be > 0".into(),
            ));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(Error::InvalidParameter(
                "icp convergence eps must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpReport {
    pub transform: RigidTransform,
    pub converged: bool,
    pub iterations: usize,
    /// Mean squared gated correspondence distance per accepted iteration;
    /// non-increasing by construction.
    pub mse_history: Vec<f64>,
    pub final_correspondences: usize,
}

/// Closed-form rigid transform minimizing Σ‖R·a + t − b‖² over given pairs
/// (orthogonal Procrustes via SVD, reflection guarded).
pub fn kabsch_transform(pairs: &[(Point3<f64>, Point3<f64>)]) -> Result<RigidTransform> {
    if pairs.is_empty() {
        return Err(Error::InvalidParameter(
            "kabsch needs at least one pair".into(),
        ));
    }
    let n = pairs.len() as f64;
    let mut ca = Vector3::zeros();
    let mut cb = Vector3::zeros();
    for (a, b) in pairs {
        ca += a.coords;
        cb += b.coords;
    }
    ca /= n;
    cb /= n;

    let mut h = Matrix3::zeros();
    for (a, b) in pairs {
        h += (a.coords - ca) * (b.coords - cb).transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut v = v_t.transpose();
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        rotation = v * u.transpose();
    }
    // Re-orthonormalize to keep the SO(3) invariant airtight under noise.
    let rotation = orthonormalize(&rotation);
    let translation = cb - rotation * ca;
    RigidTransform::new(rotation, translation)
}

fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Per-point unit normals from the k-nearest-neighbor covariance (smallest
/// principal direction). Orientation is arbitrary; point-to-plane residuals
/// are sign-insensitive through squaring.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Vec<Vector3<f64>> {
    let pts = cloud.points();
    if pts.len() < 3 {
        return vec![Vector3::z(); pts.len()];
    }
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diag = (hi - lo).norm().max(1e-9);
    let cell = (diag / (pts.len() as f64).cbrt()).max(1e-9);
    let hash = SpatialHash::build(pts, cell);

    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let neighbors = hash.knn(p, k.min(pts.len() - 1), Some(i));
            if neighbors.len() < 2 {
                return Vector3::z();
            }
            let mut mean = p.coords;
            for &(j, _) in &neighbors {
                mean += pts[j].coords;
            }
            mean /= (neighbors.len() + 1) as f64;
            let mut cov = Matrix3::zeros();
            let d0 = p.coords - mean;
            cov += d0 * d0.transpose();
            for &(j, _) in &neighbors {
                let d = pts[j].coords - mean;
                cov += d * d.transpose();
            }
            let eig = cov.symmetric_eigen();
            let mut min_idx = 0;
            for a in 1..3 {
                if eig.eigenvalues[a] < eig.eigenvalues[min_idx] {
                    min_idx = a;
                }
            }
            let n = eig.eigenvectors.column(min_idx).into_owned();
            let norm = n.norm();
            if norm > 0.0 {
                n / norm
            } else {
                Vector3::z()
            }
        })
        .collect()
}

/// Iterative refinement of `init`. Returns the refined transform and a
/// convergence report; `converged = false` means the iteration cap was hit.
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<IcpReport> {
    cfg.validate()?;
    source.require_non_empty()?;
    target.require_non_empty()?;

    let gate = cfg.max_correspondence_dist_m;
    let hash = SpatialHash::build(target.points(), gate);
    let normals = match cfg.variant {
        IcpVariant::PointToPlane => estimate_normals(target, NORMAL_NEIGHBORHOOD),
        IcpVariant::PointToPoint => Vec::new(),
    };

    let mut transform = init.clone();
    let mut previous = init.clone();
    let mut mse_history: Vec<f64> = Vec::new();
    let mut correspondences = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..cfg.max_iterations {
        // Correspondences under the current transform.
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut sq_sum = 0.0f64;
        for (si, sp) in source.iter().enumerate() {
            let moved = transform.apply_point(sp);
            if let Some((ti, d)) = hash.nearest_within(&moved, gate) {
                pairs.push((si, ti));
                sq_sum += d * d;
            }
        }
        if pairs.is_empty() {
            if iter == 0 {
                return Err(Error::NoOverlapAtInit);
            }
            break;
        }
        let mse = sq_sum / pairs.len() as f64;

        // Keep the recorded sequence non-increasing: a (rare) regression
        // after re-gating means the previous transform was the local
        // optimum, so revert and stop there.
        if let Some(&prev) = mse_history.last() {
            if mse > prev + 1e-15 {
                transform = previous;
                converged = true;
                break;
            }
            if prev - mse <= cfg.convergence_eps * prev + 1e-30 {
                mse_history.push(mse);
                correspondences = pairs.len();
                iterations = iter + 1;
                converged = true;
                break;
            }
        }
        mse_history.push(mse);
        correspondences = pairs.len();
        iterations = iter + 1;

        let updated = match cfg.variant {
            IcpVariant::PointToPoint => {
                let point_pairs: Vec<(Point3<f64>, Point3<f64>)> = pairs
                    .iter()
                    .map(|&(si, ti)| (source.points()[si], target.points()[ti]))
                    .collect();
                kabsch_transform(&point_pairs)?
            }
            IcpVariant::PointToPlane => {
                point_to_plane_update(source, target, &normals, &pairs, &transform)?
            }
        };
        previous = transform;
        transform = updated;
    }

    Ok(IcpReport {
        transform,
        converged,
        iterations,
        mse_history,
        final_correspondences: correspondences,
    })
}

/// One linearized point-to-plane step: solve the 6×6 normal equations for a
/// small twist (ω, t) minimizing Σ (n·(p + ω×p + t − q))² and compose it
/// onto the current transform.
fn point_to_plane_update(
    source: &PointCloud,
    target: &PointCloud,
    normals: &[Vector3<f64>],
    pairs: &[(usize, usize)],
    current: &RigidTransform,
) -> Result<RigidTransform> {
    let mut jtj = Matrix6::<f64>::zeros();
    let mut jtr = Vector6::<f64>::zeros();
    for &(si, ti) in pairs {
        let p = current.apply_point(&source.points()[si]).coords;
        let q = target.points()[ti].coords;
        let n = normals[ti];
        let residual = n.dot(&(p - q));
        let cross = p.cross(&n);
        let row = Vector6::new(cross.x, cross.y, cross.z, n.x, n.y, n.z);
        jtj += row * row.transpose();
        jtr -= row * residual;
    }
    let delta = jtj
        .cholesky()
        .map(|c| c.solve(&jtr))
        .or_else(|| jtj.lu().solve(&jtr))
        .ok_or_else(|| {
            Error::InvalidParameter("point-to-plane normal equations are singular".into())
        })?;
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let t = Vector3::new(delta[3], delta[4], delta[5]);
    let angle = omega.norm();
    let rotation = if angle > 0.0 {
        nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(omega), angle)
            .into_inner()
    } else {
        Matrix3::identity()
    };
    let step = RigidTransform::new(rotation, t)?;
    Ok(step.compose(current))
}
