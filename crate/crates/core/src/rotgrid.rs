//! Rotation candidate grid: the Cartesian product of uniformly sampled Euler
//! angles over a closed interval `[-range, +range]` per axis.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{euler_to_matrix, EulerAngles};

/// One precomputed candidate rotation.
#[derive(Debug, Clone)]
pub struct GridRotation {
    pub angles: EulerAngles,
    pub matrix: Matrix3<f64>,
    /// Sample indices along (α, β, γ); adjacency is defined on this lattice.
    pub lattice: [usize; 3],
}

/// Immutable set of candidate rotations, ordered lexicographically in
/// (α, β, γ). Built once, shared read-only by all solver workers.
#[derive(Debug, Clone)]
pub struct RotationGrid {
    range_deg: f64,
    step_deg: f64,
    axis_samples: [Vec<f64>; 3],
    candidates: Vec<GridRotation>,
}

/// Samples `[-range, +range]` closed on both ends with step `step`:
/// `floor(2·range/step) + 1` values. The paper reports N=2028 for
/// (90°, 15°); the closed-interval product yields 13³ = 2197, which is what
/// the sampling formula states, so 2197 is what this returns.
pub fn build_grid(range_deg: f64, step_deg: f64) -> Result<RotationGrid> {
    if !(range_deg.is_finite() && range_deg >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "angle range must be >= 0, got {range_deg}"
        )));
    }
    if !(step_deg.is_finite() && step_deg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "angle step must be > 0, got {step_deg}"
        )));
    }
    let samples = sample_axis(range_deg, step_deg);
    RotationGrid::from_axis_samples(samples.clone(), samples.clone(), samples)
        .map(|g| RotationGrid {
            range_deg,
            step_deg,
            ..g
        })
}

fn sample_axis(range_deg: f64, step_deg: f64) -> Vec<f64> {
    // Tiny slack so e.g. 2*0.3/0.1 == 5.999999... still counts 7 samples.
    let count = (2.0 * range_deg / step_deg + 1e-9).floor() as usize + 1;
    (0..count).map(|i| -range_deg + i as f64 * step_deg).collect()
}

impl RotationGrid {
    /// Cartesian product of explicit per-axis sample lists. `build_grid` is
    /// the uniform case; tests and callers with bespoke sampling use this.
    pub fn from_axis_samples(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<RotationGrid> {
        for (name, axis) in [("alpha", &alpha), ("beta", &beta), ("gamma", &gamma)] {
            if axis.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis has no samples"
                )));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis has a non-finite sample"
                )));
            }
        }
        let mut candidates = Vec::with_capacity(alpha.len() * beta.len() * gamma.len());
        for (ia, &a) in alpha.iter().enumerate() {
            for (ib, &b) in beta.iter().enumerate() {
                for (ic, &c) in gamma.iter().enumerate() {
                    let angles = EulerAngles::new(a, b, c);
                    candidates.push(GridRotation {
                        angles,
                        matrix: euler_to_matrix(angles),
                        lattice: [ia, ib, ic],
                    });
                }
            }
        }
        Ok(RotationGrid {
            range_deg: f64::NAN,
            step_deg: f64::NAN,
            axis_samples: [alpha, beta, gamma],
            candidates,
        })
    }

    pub fn range_deg(&self) -> f64 {
        self.range_deg
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[GridRotation] {
        &self.candidates
    }

    pub fn candidate(&self, index: usize) -> &GridRotation {
        &self.candidates[index]
    }

    pub fn axis_samples(&self, axis: usize) -> &[f64] {
        &self.axis_samples[axis]
    }

    /// Half the maximum geodesic angle between lattice-adjacent candidates
    /// (candidates whose sample indices differ by one along exactly one
    /// Euler axis). For a uniform grid with step S this is S/2 — the 7.5°
    /// figure quoted for S = 15°.
    ///
    /// The companion `global_pairwise_bound_deg` maximizes over all pairs
    /// i ≠ j instead, which reads the bound formula literally but saturates
    /// near 90° for any grid with a wide range.
    pub fn covering_bound_deg(&self) -> Result<f64> {
        if self.candidates.len() < 2 {
            return Err(Error::BoundUndefined);
        }
        let dims = [
            self.axis_samples[0].len(),
            self.axis_samples[1].len(),
            self.axis_samples[2].len(),
        ];
        let stride = [dims[1] * dims[2], dims[2], 1];
        let mut max_angle: f64 = 0.0;
        for (i, cand) in self.candidates.iter().enumerate() {
            for axis in 0..3 {
                if cand.lattice[axis] + 1 < dims[axis] {
                    let j = i + stride[axis];
                    let angle = geodesic_deg(&cand.matrix, &self.candidates[j].matrix);
                    max_angle = max_angle.max(angle);
                }
            }
        }
        Ok(max_angle / 2.0)
    }

    /// Half the maximum geodesic angle over all candidate pairs i ≠ j.
    pub fn global_pairwise_bound_deg(&self) -> Result<f64> {
        if self.candidates.len() < 2 {
            return Err(Error::BoundUndefined);
        }
        let mut max_angle: f64 = 0.0;
        for i in 0..self.candidates.len() {
            for j in (i + 1)..self.candidates.len() {
                max_angle = max_angle.max(geodesic_deg(
                    &self.candidates[i].matrix,
                    &self.candidates[j].matrix,
                ));
            }
        }
        Ok(max_angle / 2.0)
    }
}

/// Geodesic angle between two rotations in degrees, via the trace formula.
pub fn geodesic_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let arg = ((a.transpose() * b).trace() - 1.0) / 2.0;
    arg.clamp(-1.0, 1.0).acos().to_degrees()
}
