//! JSON serialization of registration results.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::RigidTransform;
use crate::solver::RegistrationResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakRecord {
    pub rotation_index: usize,
    pub cell: [usize; 3],
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingsRecord {
    pub prepare_s: f64,
    pub sweep_s: f64,
    pub refine_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcpRecord {
    pub converged: bool,
    pub iterations: usize,
    pub final_mse: Option<f64>,
    pub correspondences: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub rotation_count: usize,
    pub source_dims: [usize; 3],
    pub target_dims: [usize; 3],
    pub padded_dims: [usize; 3],
    pub padding: [usize; 6],
    pub timings: TimingsRecord,
    pub icp: Option<IcpRecord>,
}

/// Free-form echo of the parameters the run was configured with; the CLI
/// fills it so results are self-describing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub voxel_resolution_m: f64,
    pub positive_value: f64,
    pub negative_value: f64,
    pub angle_range_deg: f64,
    pub angle_step_deg: f64,
    pub engine: String,
    pub refine: String,
    pub unit_scale: f64,
    pub threads: Option<usize>,
}

/// One registration run: 4×4 row-major transforms, peak metadata, config
/// echo and timings. `refined` is an explicit null when refinement was off.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    pub coarse: [f64; 16],
    pub refined: Option<[f64; 16]>,
    pub peak: PeakRecord,
    pub config: ConfigEcho,
    pub diagnostics: DiagnosticsRecord,
}

impl RegistrationRecord {
    pub fn from_result(
        result: &RegistrationResult,
        config: ConfigEcho,
        pair_id: Option<String>,
    ) -> Self {
        Self {
            pair_id,
            coarse: result.coarse.to_matrix4_row_major(),
            refined: result.refined.as_ref().map(|t| t.to_matrix4_row_major()),
            peak: PeakRecord {
                rotation_index: result.peak.rotation_index,
                cell: result.peak.cell,
                score: result.peak.score,
            },
            config,
            diagnostics: DiagnosticsRecord {
                rotation_count: result.diagnostics.rotation_count,
                source_dims: result.diagnostics.source_dims,
                target_dims: result.diagnostics.target_dims,
                padded_dims: result.diagnostics.padded_dims,
                padding: result.diagnostics.padding,
                timings: TimingsRecord {
                    prepare_s: result.diagnostics.timings.prepare_s,
                    sweep_s: result.diagnostics.timings.sweep_s,
                    refine_s: result.diagnostics.timings.refine_s,
                    total_s: result.diagnostics.timings.total_s,
                },
                icp: result.icp.as_ref().map(|icp| IcpRecord {
                    converged: icp.converged,
                    iterations: icp.iterations,
                    final_mse: icp.mse_history.last().copied(),
                    correspondences: icp.final_correspondences,
                }),
            },
        }
    }

    pub fn coarse_transform(&self) -> Result<RigidTransform> {
        RigidTransform::from_matrix4_row_major(&self.coarse)
    }

    pub fn refined_transform(&self) -> Result<Option<RigidTransform>> {
        self.refined
            .as_ref()
            .map(RigidTransform::from_matrix4_row_major)
            .transpose()
    }

    /// Refined transform when present, else the coarse one.
    pub fn best_transform(&self) -> Result<RigidTransform> {
        match self.refined_transform()? {
            Some(t) => Ok(t),
            None => self.coarse_transform(),
        }
    }
}
