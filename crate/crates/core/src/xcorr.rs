//! 3D valid cross-correlation of voxel volumes: a direct sliding-dot-product
//! reference and an FFT engine that must agree with it.
//!
//! The FFT route zero-pads each axis to the next 7-smooth length, transforms
//! both volumes, multiplies the source spectrum by the conjugated target
//! spectrum, inverse-transforms and crops the valid region. Circular
//! wrap-around cannot reach the valid offsets because the transform length
//! covers the full padded source extent.

use std::sync::Arc;

use ndarray::{Array3, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::voxel::VoxelVolume;

/// Which correlation implementation the solver runs. `Direct` is retained as
/// the oracle and for tiny volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationEngine {
    #[default]
    Fft,
    Direct,
}

/// Scores of one rotation candidate over all valid offsets. Dims equal the
/// unpadded source volume dims by the padding construction.
#[derive(Debug, Clone)]
pub struct CorrelationVolume {
    scores: Array3<f64>,
    rotation_index: usize,
}

impl CorrelationVolume {
    pub fn dims(&self) -> [usize; 3] {
        let d = self.scores.dim();
        [d.0, d.1, d.2]
    }

    pub fn scores(&self) -> &Array3<f64> {
        &self.scores
    }

    pub fn rotation_index(&self) -> usize {
        self.rotation_index
    }

    /// Peak cell and score; ties resolve to the lexicographically lowest
    /// cell in (x, y, z).
    pub fn argmax(&self) -> ([usize; 3], f64) {
        let mut best_cell = [0usize; 3];
        let mut best = f64::NEG_INFINITY;
        for ((x, y, z), &v) in self.scores.indexed_iter() {
            if v > best {
                best = v;
                best_cell = [x, y, z];
            }
        }
        (best_cell, best)
    }
}

fn check_fit(source: &VoxelVolume, target: &VoxelVolume) -> Result<[usize; 3]> {
    let s = source.dims();
    let t = target.dims();
    let mut valid = [0usize; 3];
    for axis in 0..3 {
        if t[axis] > s[axis] {
            return Err(Error::TargetTooLarge {
                axis,
                target_dim: t[axis],
                source_dim: s[axis],
            });
        }
        valid[axis] = s[axis] - t[axis] + 1;
    }
    Ok(valid)
}

/// Valid cross-correlation by direct summation:
/// `scores[o] = Σ_k source[o + k] · target[k]`.
pub fn xcorr_direct(
    source: &VoxelVolume,
    target: &VoxelVolume,
    rotation_index: usize,
) -> Result<CorrelationVolume> {
    let valid = check_fit(source, target)?;
    let t = target.dims();
    let src = source.data();
    let tgt = target.data();
    let mut scores = Array3::zeros((valid[0], valid[1], valid[2]));

    // Innermost loop is a contiguous dot product along z on both grids.
    for ox in 0..valid[0] {
        for oy in 0..valid[1] {
            for oz in 0..valid[2] {
                let mut acc = 0.0f64;
                for kx in 0..t[0] {
                    for ky in 0..t[1] {
                        let s_lane = src
                            .slice(ndarray::s![ox + kx, oy + ky, oz..oz + t[2]]);
                        let t_lane = tgt.slice(ndarray::s![kx, ky, ..]);
                        let s_lane = s_lane.as_slice().expect("source lane contiguous");
                        let t_lane = t_lane.as_slice().expect("target lane contiguous");
                        for k in 0..t[2] {
                            acc += s_lane[k] * t_lane[k];
                        }
                    }
                }
                scores[(ox, oy, oz)] = acc;
            }
        }
    }
    Ok(CorrelationVolume {
        scores,
        rotation_index,
    })
}

/// Direct-summation score at a single offset; the spot-check oracle for
/// volumes too large to correlate exhaustively.
pub fn xcorr_direct_at(source: &VoxelVolume, target: &VoxelVolume, offset: [usize; 3]) -> f64 {
    let t = target.dims();
    let src = source.data();
    let tgt = target.data();
    let mut acc = 0.0f64;
    for kx in 0..t[0] {
        for ky in 0..t[1] {
            for kz in 0..t[2] {
                acc += src[(offset[0] + kx, offset[1] + ky, offset[2] + kz)]
                    * tgt[(kx, ky, kz)];
            }
        }
    }
    acc
}

/// Smallest length ≥ `n` whose prime factors are all in {2, 3, 5, 7}.
fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Reusable FFT correlation state for one target volume and one padded
/// source shape: plans plus the conjugated target spectrum. Immutable after
/// construction, shared read-only across rotation workers.
pub struct FftCorrelator {
    fft_dims: [usize; 3],
    padded_source_dims: [usize; 3],
    valid_dims: [usize; 3],
    target_spectrum_conj: Array3<Complex<f64>>,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl FftCorrelator {
    pub fn new(target: &VoxelVolume, padded_source_dims: [usize; 3]) -> Result<Self> {
        let t = target.dims();
        let mut valid_dims = [0usize; 3];
        for axis in 0..3 {
            if t[axis] > padded_source_dims[axis] {
                return Err(Error::TargetTooLarge {
                    axis,
                    target_dim: t[axis],
                    source_dim: padded_source_dims[axis],
                });
            }
            valid_dims[axis] = padded_source_dims[axis] - t[axis] + 1;
        }
        let fft_dims = [
            next_smooth(padded_source_dims[0]),
            next_smooth(padded_source_dims[1]),
            next_smooth(padded_source_dims[2]),
        ];
        let mut planner = FftPlanner::new();
        let forward = [
            planner.plan_fft_forward(fft_dims[0]),
            planner.plan_fft_forward(fft_dims[1]),
            planner.plan_fft_forward(fft_dims[2]),
        ];
        let inverse = [
            planner.plan_fft_inverse(fft_dims[0]),
            planner.plan_fft_inverse(fft_dims[1]),
            planner.plan_fft_inverse(fft_dims[2]),
        ];

        let mut spectrum = embed(target.data(), fft_dims);
        fft3(&mut spectrum, &forward);
        spectrum.mapv_inplace(|c| c.conj());

        Ok(Self {
            fft_dims,
            padded_source_dims,
            valid_dims,
            target_spectrum_conj: spectrum,
            forward,
            inverse,
        })
    }

    pub fn valid_dims(&self) -> [usize; 3] {
        self.valid_dims
    }

    /// Correlates one padded source volume against the cached target
    /// spectrum. The source dims must match the shape this correlator was
    /// planned for.
    pub fn correlate(
        &self,
        padded_source: &VoxelVolume,
        rotation_index: usize,
    ) -> Result<CorrelationVolume> {
        if padded_source.dims() != self.padded_source_dims {
            return Err(Error::InvalidParameter(format!(
                "padded source dims {:?} do not match correlator dims {:?}",
                padded_source.dims(),
                self.padded_source_dims
            )));
        }
        let mut buf = embed(padded_source.data(), self.fft_dims);
        fft3(&mut buf, &self.forward);
        buf.zip_mut_with(&self.target_spectrum_conj, |a, b| *a *= *b);
        fft3(&mut buf, &self.inverse);

        let scale = 1.0 / (self.fft_dims[0] * self.fft_dims[1] * self.fft_dims[2]) as f64;
        let mut scores = Array3::zeros((
            self.valid_dims[0],
            self.valid_dims[1],
            self.valid_dims[2],
        ));
        let mut finite = true;
        for ((x, y, z), out) in scores.indexed_iter_mut() {
            let v = buf[(x, y, z)].re * scale;
            finite &= v.is_finite();
            *out = v;
        }
        if !finite {
            return Err(Error::InvalidParameter(
                "correlation produced non-finite scores".into(),
            ));
        }
        Ok(CorrelationVolume {
            scores,
            rotation_index,
        })
    }
}

/// One-shot FFT correlation (plans and target spectrum built per call).
pub fn xcorr_fft(
    source: &VoxelVolume,
    target: &VoxelVolume,
    rotation_index: usize,
) -> Result<CorrelationVolume> {
    check_fit(source, target)?;
    FftCorrelator::new(target, source.dims())?.correlate(source, rotation_index)
}

fn embed(data: &Array3<f64>, fft_dims: [usize; 3]) -> Array3<Complex<f64>> {
    let mut out = Array3::from_elem((fft_dims[0], fft_dims[1], fft_dims[2]), Complex::ZERO);
    let d = data.dim();
    out.slice_mut(ndarray::s![..d.0, ..d.1, ..d.2])
        .zip_mut_with(data, |o, &v| *o = Complex::new(v, 0.0));
    out
}

fn fft3(data: &mut Array3<Complex<f64>>, plans: &[Arc<dyn Fft<f64>>; 3]) {
    for axis in 0..3 {
        let plan = &plans[axis];
        let mut scratch = vec![Complex::ZERO; plan.get_inplace_scratch_len()];
        let mut lane_buf = vec![Complex::ZERO; plan.len()];
        for mut lane in data.lanes_mut(Axis(axis)) {
            if let Some(slice) = lane.as_slice_mut() {
                plan.process_with_scratch(slice, &mut scratch);
            } else {
                for (b, v) in lane_buf.iter_mut().zip(lane.iter()) {
                    *b = *v;
                }
                plan.process_with_scratch(&mut lane_buf, &mut scratch);
                for (v, b) in lane.iter_mut().zip(lane_buf.iter()) {
                    *v = *b;
                }
            }
        }
    }
}

/// Relative ∞-norm disagreement between two score volumes, normalized by the
/// largest reference magnitude.
pub fn relative_inf_error(reference: &CorrelationVolume, other: &CorrelationVolume) -> f64 {
    let denom = reference
        .scores
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for (a, b) in reference.scores.iter().zip(other.scores.iter()) {
        worst = worst.max((a - b).abs());
    }
    worst / denom
}
