//! Full registration pipeline: sweep all rotation candidates, correlate each
//! voxelized rotated source against the target volume, keep the single
//! global peak, and assemble the rigid transform from the recorded shifts.
//!
//! Per rotation i the source is centered, rotated, positive-shifted and
//! voxelized into a grid shape shared by all rotations, so one target
//! spectrum and one FFT plan serve the whole sweep. Workers stream: only a
//! rotation's peak survives, never its full correlation volume.

use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{center_of_mass_shift, positive_shift, PointCloud, RigidTransform};
use crate::refine::{icp_refine, IcpConfig, IcpReport};
use crate::rotgrid::RotationGrid;
use crate::voxel::{
    compute_padding_split, voxelize, voxelize_with_dims, PaddingSplit, VoxelConfig, VoxelVolume,
};
use crate::xcorr::{xcorr_direct, CorrelationEngine, CorrelationVolume, FftCorrelator};

/// Default cap on padded volume cells (512³).
pub const DEFAULT_MAX_PADDED_CELLS: usize = 512 * 512 * 512;

/// Winning rotation index, peak cell and score of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakResult {
    pub rotation_index: usize,
    pub cell: [usize; 3],
    pub score: f64,
}

/// The translation components the final transform is assembled from, kept
/// so it can be cross-checked against the two-path algebra.
#[derive(Debug, Clone, Copy)]
pub struct TranslationParts {
    /// Source center of mass (t^CENTER).
    pub center_shift: Vector3<f64>,
    /// Positive shift of the winning rotated source (t^POSIT of X_i*).
    pub source_positive_shift: Vector3<f64>,
    /// Positive shift of the target (t^POSIT of Y).
    pub target_positive_shift: Vector3<f64>,
    /// Voxel-space translation recovered from the peak.
    pub t_est: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub prepare_s: f64,
    pub sweep_s: f64,
    pub refine_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub rotation_count: usize,
    /// Shared rasterization dims of all rotated source volumes.
    pub source_dims: [usize; 3],
    pub target_dims: [usize; 3],
    pub padded_dims: [usize; 3],
    pub padding: [usize; 6],
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub coarse: RigidTransform,
    pub refined: Option<RigidTransform>,
    pub icp: Option<IcpReport>,
    pub peak: PeakResult,
    pub parts: TranslationParts,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub engine: CorrelationEngine,
    pub padding_split: PaddingSplit,
    pub max_padded_cells: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            engine: CorrelationEngine::Fft,
            padding_split: PaddingSplit::CeilLeft,
            max_padded_cells: DEFAULT_MAX_PADDED_CELLS,
        }
    }
}

/// Best peak over fully materialized correlation volumes. Ties break to the
/// lowest rotation index, then the lexicographically lowest cell, so the
/// result is deterministic under any execution order.
pub fn global_peak(volumes: &[CorrelationVolume]) -> Result<PeakResult> {
    let mut best: Option<PeakResult> = None;
    for vol in volumes {
        let (cell, score) = vol.argmax();
        let candidate = PeakResult {
            rotation_index: vol.rotation_index(),
            cell,
            score,
        };
        best = Some(match best {
            None => candidate,
            Some(current) => pick_better(current, candidate),
        });
    }
    best.ok_or_else(|| Error::InvalidParameter("no correlation volumes given".into()))
}

fn pick_better(a: PeakResult, b: PeakResult) -> PeakResult {
    if b.score > a.score {
        return b;
    }
    if b.score < a.score {
        return a;
    }
    match b
        .rotation_index
        .cmp(&a.rotation_index)
        .then(b.cell.cmp(&a.cell))
    {
        std::cmp::Ordering::Less => b,
        _ => a,
    }
}

/// Recovers the translation between the positive-shifted frames from a peak
/// offset. 0-based derivation: offset `o` aligns target cell k onto source
/// cell `o + k − P_lo`, i.e. the map y ↦ y + (o − P_lo)·VR, and the pipeline
/// convention (X_pos ≈ Y_pos − t_est) makes `t_est = (P_lo − o)·VR`. The
/// low-side padding appears in both the pad and this formula, so any split
/// convention yields the same final transform.
pub fn estimate_translation(
    peak: &PeakResult,
    target_vol: &VoxelVolume,
    padding: [usize; 6],
    resolution_m: f64,
) -> Result<Vector3<f64>> {
    let t = target_vol.dims();
    for a in 0..3 {
        let total = padding[2 * a] + padding[2 * a + 1];
        if total + 1 != t[a] {
            return Err(Error::InvalidParameter(format!(
                "padding {padding:?} inconsistent with target dims {t:?} on axis {a}"
            )));
        }
    }
    Ok(Vector3::new(
        (padding[0] as f64 - peak.cell[0] as f64) * resolution_m,
        (padding[2] as f64 - peak.cell[1] as f64) * resolution_m,
        (padding[4] as f64 - peak.cell[2] as f64) * resolution_m,
    ))
}

fn check_not_degenerate(pc: &PointCloud) -> Result<()> {
    pc.require_non_empty()?;
    if pc.len() >= 2 {
        let first = pc.points()[0];
        if pc.iter().all(|p| *p == first) {
            return Err(Error::DegenerateGeometry { count: pc.len() });
        }
    }
    Ok(())
}

/// Coarse registration with default options and no refinement.
pub fn register(
    source: &PointCloud,
    target: &PointCloud,
    grid: &RotationGrid,
    cfg: &VoxelConfig,
) -> Result<RegistrationResult> {
    register_with(source, target, grid, cfg, &SolverOptions::default(), None)
}

struct RotationOutcome {
    peak: PeakResult,
    positive_shift: Vector3<f64>,
}

/// Full pipeline with explicit options and optional ICP refinement.
pub fn register_with(
    source: &PointCloud,
    target: &PointCloud,
    grid: &RotationGrid,
    cfg: &VoxelConfig,
    options: &SolverOptions,
    refine: Option<&IcpConfig>,
) -> Result<RegistrationResult> {
    let total_start = Instant::now();
    check_not_degenerate(source)?;
    check_not_degenerate(target)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty rotation grid".into()));
    }

    let prepare_start = Instant::now();
    let center_shift = center_of_mass_shift(source)?;
    let centered = source.translated(&-center_shift);

    let target_positive_shift = positive_shift(target)?;
    let target_pos = target.translated(&target_positive_shift);
    let target_vol = voxelize(&target_pos, cfg)?;
    let target_dims = target_vol.dims();

    // Pass 1: per-rotation positive shifts and the shared rasterization
    // dims (the elementwise max of every rotation's natural dims).
    let per_rotation: Vec<(Vector3<f64>, [usize; 3])> = grid
        .candidates()
        .par_iter()
        .map(|cand| {
            let rotated = centered.rotated(&cand.matrix);
            let shift = positive_shift(&rotated)?;
            let pos = rotated.translated(&shift);
            let dims = crate::voxel::natural_dims(&pos, cfg.resolution_m)?;
            Ok((shift, dims))
        })
        .collect::<Result<_>>()?;
    let mut source_dims = [1usize; 3];
    for (_, dims) in &per_rotation {
        for a in 0..3 {
            source_dims[a] = source_dims[a].max(dims[a]);
        }
    }

    let padding = compute_padding_split(source_dims, target_dims, options.padding_split);
    let padded_dims = [
        source_dims[0] + padding[0] + padding[1],
        source_dims[1] + padding[2] + padding[3],
        source_dims[2] + padding[4] + padding[5],
    ];
    let padded_cells: usize = padded_dims.iter().product();
    if padded_cells > options.max_padded_cells {
        let suggested_vr = cfg.resolution_m
            * (padded_cells as f64 / options.max_padded_cells as f64)
                .cbrt()
                .max(1.0)
            * 1.01;
        return Err(Error::VolumeBudget {
            cells: padded_cells,
            cap: options.max_padded_cells,
            suggested_vr,
        });
    }

    let correlator = match options.engine {
        CorrelationEngine::Fft => Some(FftCorrelator::new(&target_vol, padded_dims)?),
        CorrelationEngine::Direct => None,
    };
    let prepare_s = prepare_start.elapsed().as_secs_f64();

    // Pass 2: the sweep. Each rotation voxelizes, pads, correlates and
    // reduces to its peak; the reduction keeps the global best under the
    // deterministic tie-break.
    let sweep_start = Instant::now();
    let best = grid
        .candidates()
        .par_iter()
        .enumerate()
        .map(|(index, cand)| -> Result<RotationOutcome> {
            let shift = per_rotation[index].0;
            let pos = centered.rotated(&cand.matrix).translated(&shift);
            let vol = voxelize_with_dims(&pos, cfg, source_dims)?;
            let padded = vol.padded(padding, cfg.negative_value);
            let cc = match &correlator {
                Some(fft) => fft.correlate(&padded, index)?,
                None => xcorr_direct(&padded, &target_vol, index)?,
            };
            let (cell, score) = cc.argmax();
            Ok(RotationOutcome {
                peak: PeakResult {
                    rotation_index: index,
                    cell,
                    score,
                },
                positive_shift: shift,
            })
        })
        .try_reduce_with(|a, b| {
            Ok(if pick_better(a.peak, b.peak) == a.peak {
                a
            } else {
                b
            })
        })
        .expect("at least one rotation candidate")?;
    let sweep_s = sweep_start.elapsed().as_secs_f64();

    let peak = best.peak;
    let t_est = estimate_translation(&peak, &target_vol, padding, cfg.resolution_m)?;
    let rotation = grid.candidate(peak.rotation_index).matrix;
    let translation =
        -(rotation * center_shift) + best.positive_shift + t_est - target_positive_shift;
    let coarse = RigidTransform::new(rotation, translation)?;

    let refine_start = Instant::now();
    let icp = match refine {
        Some(icp_cfg) => Some(icp_refine(source, target, &coarse, icp_cfg)?),
        None => None,
    };
    let refine_s = refine_start.elapsed().as_secs_f64();

    Ok(RegistrationResult {
        refined: icp.as_ref().map(|r| r.transform.clone()),
        icp,
        coarse,
        peak,
        parts: TranslationParts {
            center_shift,
            source_positive_shift: best.positive_shift,
            target_positive_shift,
            t_est,
        },
        diagnostics: Diagnostics {
            rotation_count: grid.len(),
            source_dims,
            target_dims,
            padded_dims,
            padding,
            timings: StageTimings {
                prepare_s,
                sweep_s,
                refine_s,
                total_s: total_start.elapsed().as_secs_f64(),
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xcorr::xcorr_fft;
    use ndarray::Array3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn volume_from(values: Array3<f64>) -> VoxelVolume {
        VoxelVolume::from_parts(values, 1.0)
    }

    #[test]
    fn global_peak_tie_breaks_to_first_volume_and_cell() {
        let flat = volume_from(Array3::from_elem((2, 2, 2), 3.0));
        let target = volume_from(Array3::from_elem((1, 1, 1), 1.0));
        let volumes: Vec<_> = (0..3)
            .map(|i| xcorr_fft(&flat, &target, i).unwrap())
            .collect();
        // FFT noise could perturb exact ties; use the direct engine for the
        // tie contract.
        let volumes_direct: Vec<_> = (0..3)
            .map(|i| xcorr_direct(&flat, &target, i).unwrap())
            .collect();
        let peak = global_peak(&volumes_direct).unwrap();
        assert_eq!(peak.rotation_index, 0);
        assert_eq!(peak.cell, [0, 0, 0]);
        assert_eq!(peak.score, 3.0);
        drop(volumes);
    }

    #[test]
    fn global_peak_unique_maximum() {
        let mut data = Array3::from_elem((3, 3, 3), -1.0);
        data[(2, 1, 0)] = 7.0;
        let source = volume_from(data);
        let target = volume_from(Array3::from_elem((1, 1, 1), 1.0));
        let cc = xcorr_direct(&source, &target, 4).unwrap();
        let peak = global_peak(&[cc]).unwrap();
        assert_eq!(peak.rotation_index, 4);
        assert_eq!(peak.cell, [2, 1, 0]);
        assert_eq!(peak.score, 7.0);
    }

    #[test]
    fn global_peak_matches_exhaustive_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let target = volume_from(Array3::from_elem((1, 1, 1), 1.0));
        let volumes: Vec<CorrelationVolume> = (0..5)
            .map(|i| {
                let data = Array3::from_shape_fn((4, 3, 5), |_| rng.random_range(-10.0..10.0));
                xcorr_direct(&volume_from(data), &target, i).unwrap()
            })
            .collect();

        // Oracle: full linear scan with explicit ordering.
        let mut best_score = f64::NEG_INFINITY;
        let mut best_key = (usize::MAX, [usize::MAX; 3]);
        for vol in &volumes {
            for ((x, y, z), &v) in vol.scores().indexed_iter() {
                let key = (vol.rotation_index(), [x, y, z]);
                if v > best_score || (v == best_score && key < best_key) {
                    best_score = v;
                    best_key = key;
                }
            }
        }

        let peak = global_peak(&volumes).unwrap();
        assert_eq!(peak.rotation_index, best_key.0);
        assert_eq!(peak.cell, best_key.1);
        assert_eq!(peak.score, best_score);
    }

    #[test]
    fn global_peak_empty_errors() {
        assert!(global_peak(&[]).is_err());
    }

    #[test]
    fn estimate_translation_validates_padding() {
        let target = volume_from(Array3::from_elem((3, 3, 3), 1.0));
        let peak = PeakResult {
            rotation_index: 0,
            cell: [0, 0, 0],
            score: 1.0,
        };
        assert!(estimate_translation(&peak, &target, [1, 1, 1, 1, 1, 1], 0.5).is_ok());
        assert!(estimate_translation(&peak, &target, [2, 1, 1, 1, 1, 1], 0.5).is_err());
    }

    #[test]
    fn degenerate_clouds_rejected() {
        let grid = crate::rotgrid::build_grid(0.0, 15.0).unwrap();
        let cfg = VoxelConfig::with_resolution(0.1).unwrap();
        let dup = PointCloud::from_coords([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]).unwrap();
        let ok = PointCloud::from_coords([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            register(&dup, &ok, &grid, &cfg),
            Err(Error::DegenerateGeometry { count: 2 })
        ));
        assert!(matches!(
            register(&ok, &dup, &grid, &cfg),
            Err(Error::DegenerateGeometry { count: 2 })
        ));
    }

    #[test]
    fn volume_budget_guard_suggests_resolution() {
        let grid = crate::rotgrid::build_grid(0.0, 15.0).unwrap();
        let cfg = VoxelConfig::with_resolution(0.01).unwrap();
        let cloud = PointCloud::from_coords([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap();
        let options = SolverOptions {
            max_padded_cells: 1000,
            ..SolverOptions::default()
        };
        match register_with(&cloud, &cloud, &grid, &cfg, &options, None) {
            Err(Error::VolumeBudget { suggested_vr, .. }) => {
                assert!(suggested_vr > cfg.resolution_m);
            }
            other => panic!("expected volume budget error, got {other:?}"),
        }
    }
}
