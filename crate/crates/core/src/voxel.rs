//! Dense PV/NV occupancy volumes built from positive-shifted point clouds,
//! plus the padding arithmetic used by the correlation stage.
//!
//! All voxel indices are 0-based. A point `p` falls in voxel
//! `floor(p/VR)` per axis; points on the maximal boundary clamp into the
//! last voxel so no phantom layer appears.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub const DEFAULT_POSITIVE_VALUE: f64 = 5.0;
pub const DEFAULT_NEGATIVE_VALUE: f64 = -1.0;

/// Voxelization parameters: edge length and the occupied/empty cell values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelConfig {
    pub resolution_m: f64,
    pub positive_value: f64,
    pub negative_value: f64,
}

impl VoxelConfig {
    pub fn new(resolution_m: f64, positive_value: f64, negative_value: f64) -> Result<Self> {
        if !(resolution_m.is_finite() && resolution_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "voxel resolution must be > 0, got {resolution_m}"
            )));
        }
        if !positive_value.is_finite() || !negative_value.is_finite() {
            return Err(Error::InvalidParameter(
                "voxel values must be finite".into(),
            ));
        }
        if positive_value == negative_value {
            return Err(Error::InvalidParameter(
                "positive and negative voxel values must differ".into(),
            ));
        }
        Ok(Self {
            resolution_m,
            positive_value,
            negative_value,
        })
    }

    /// Published defaults: PV = 5, NV = −1.
    pub fn with_resolution(resolution_m: f64) -> Result<Self> {
        Self::new(
            resolution_m,
            DEFAULT_POSITIVE_VALUE,
            DEFAULT_NEGATIVE_VALUE,
        )
    }
}

/// Dense scalar grid with its resolution and the padding applied to it.
/// `padding` is `[x_lo, x_hi, y_lo, y_hi, z_lo, z_hi]` in voxels; an
/// unpadded volume records all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    data: Array3<f64>,
    resolution_m: f64,
    padding: [usize; 6],
}

impl VoxelVolume {
    pub fn from_parts(data: Array3<f64>, resolution_m: f64) -> Self {
        Self {
            data,
            resolution_m,
            padding: [0; 6],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        let d = self.data.dim();
        [d.0, d.1, d.2]
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn resolution_m(&self) -> f64 {
        self.resolution_m
    }

    pub fn padding(&self) -> [usize; 6] {
        self.padding
    }

    pub fn cell_count(&self) -> usize {
        self.data.len()
    }

    pub fn count_value(&self, value: f64) -> usize {
        self.data.iter().filter(|&&v| v == value).count()
    }

    /// Copy of this volume embedded in a larger grid, offset by the low-side
    /// padding and surrounded with `fill`.
    pub fn padded(&self, padding: [usize; 6], fill: f64) -> VoxelVolume {
        let [nx, ny, nz] = self.dims();
        let out_dims = (
            nx + padding[0] + padding[1],
            ny + padding[2] + padding[3],
            nz + padding[4] + padding[5],
        );
        let mut data = Array3::from_elem(out_dims, fill);
        data.slice_mut(ndarray::s![
            padding[0]..padding[0] + nx,
            padding[2]..padding[2] + ny,
            padding[4]..padding[4] + nz
        ])
        .assign(&self.data);
        VoxelVolume {
            data,
            resolution_m: self.resolution_m,
            padding,
        }
    }
}

/// Grid dimensions implied by a positive-shifted cloud:
/// `max(1, ceil(extent/VR))` per axis.
pub fn natural_dims(pc: &PointCloud, resolution_m: f64) -> Result<[usize; 3]> {
    let max = pc.max_corner()?;
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((max[a] / resolution_m).ceil() as usize).max(1);
    }
    Ok(dims)
}

/// Occupancy volume of a positive-shifted cloud at its natural dimensions.
pub fn voxelize(pc: &PointCloud, cfg: &VoxelConfig) -> Result<VoxelVolume> {
    let dims = checked_dims(pc, cfg)?;
    voxelize_into(pc, cfg, dims)
}

/// Occupancy volume rasterized into an explicit grid size, which must cover
/// the cloud's natural dimensions. The solver uses this to give every
/// rotated source volume a common shape so one target spectrum serves all
/// rotations.
pub fn voxelize_with_dims(pc: &PointCloud, cfg: &VoxelConfig, dims: [usize; 3]) -> Result<VoxelVolume> {
    let natural = checked_dims(pc, cfg)?;
    for a in 0..3 {
        if dims[a] < natural[a] {
            return Err(Error::InvalidParameter(format!(
                "requested dims {dims:?} smaller than natural dims {natural:?} on axis {a}"
            )));
        }
    }
    voxelize_into(pc, cfg, dims)
}

fn checked_dims(pc: &PointCloud, cfg: &VoxelConfig) -> Result<[usize; 3]> {
    pc.require_non_empty()?;
    for (index, p) in pc.iter().enumerate() {
        for axis in 0..3 {
            if p[axis] < 0.0 {
                return Err(Error::NotPositiveShifted {
                    index,
                    axis,
                    value: p[axis],
                });
            }
        }
    }
    natural_dims(pc, cfg.resolution_m)
}

fn voxelize_into(pc: &PointCloud, cfg: &VoxelConfig, dims: [usize; 3]) -> Result<VoxelVolume> {
    let mut data = Array3::from_elem((dims[0], dims[1], dims[2]), cfg.negative_value);
    let inv = 1.0 / cfg.resolution_m;
    for p in pc.iter() {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            // Boundary points clamp into the last voxel.
            idx[a] = ((p[a] * inv).floor() as usize).min(dims[a] - 1);
        }
        data[(idx[0], idx[1], idx[2])] = cfg.positive_value;
    }
    Ok(VoxelVolume {
        data,
        resolution_m: cfg.resolution_m,
        padding: [0; 6],
    })
}

/// How a per-axis total pad of `target_dim − 1` is split between the low and
/// high sides. `CeilLeft` is the shipping convention; the final transform is
/// invariant to the choice because the low pad re-enters the translation
/// recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingSplit {
    #[default]
    CeilLeft,
    AllLeft,
}

/// Padding (per axis: total `target_dim − 1`) that makes the valid
/// cross-correlation output exactly `source_dims`.
pub fn compute_padding(source_dims: [usize; 3], target_dims: [usize; 3]) -> [usize; 6] {
    compute_padding_split(source_dims, target_dims, PaddingSplit::CeilLeft)
}

pub fn compute_padding_split(
    _source_dims: [usize; 3],
    target_dims: [usize; 3],
    split: PaddingSplit,
) -> [usize; 6] {
    let mut padding = [0usize; 6];
    for a in 0..3 {
        let total = target_dims[a] - 1;
        let lo = match split {
            PaddingSplit::CeilLeft => total.div_ceil(2),
            PaddingSplit::AllLeft => total,
        };
        padding[2 * a] = lo;
        padding[2 * a + 1] = total - lo;
    }
    padding
}

/// 0-based central voxel: `ceil(V/2) − 1` per axis (the middle voxel for odd
/// counts, the one left of the midpoint for even counts).
pub fn central_voxel(dims: [usize; 3]) -> [usize; 3] {
    [
        dims[0].div_ceil(2) - 1,
        dims[1].div_ceil(2) - 1,
        dims[2].div_ceil(2) - 1,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cfg(vr: f64) -> VoxelConfig {
        VoxelConfig::with_resolution(vr).unwrap()
    }

    #[test]
    fn single_point_single_voxel() {
        let pc = PointCloud::from_coords([[0.1, 0.1, 0.1]]).unwrap();
        let vol = voxelize(&pc, &cfg(1.0)).unwrap();
        assert_eq!(vol.dims(), [1, 1, 1]);
        assert_eq!(vol.data()[(0, 0, 0)], DEFAULT_POSITIVE_VALUE);
    }

    #[test]
    fn two_points_hand_enumeration() {
        let pc = PointCloud::from_coords([[0.0, 0.0, 0.0], [2.5, 0.5, 0.5]]).unwrap();
        let vol = voxelize(&pc, &cfg(1.0)).unwrap();
        assert_eq!(vol.dims(), [3, 1, 1]);
        let pv = DEFAULT_POSITIVE_VALUE;
        let nv = DEFAULT_NEGATIVE_VALUE;
        assert_eq!(vol.data()[(0, 0, 0)], pv);
        assert_eq!(vol.data()[(1, 0, 0)], nv);
        assert_eq!(vol.data()[(2, 0, 0)], pv);
    }

    #[test]
    fn boundary_point_clamps_into_last_voxel() {
        let pc = PointCloud::from_coords([[0.0, 0.0, 0.0], [2.0, 1.0, 1.0]]).unwrap();
        let vol = voxelize(&pc, &cfg(1.0)).unwrap();
        assert_eq!(vol.dims(), [2, 1, 1]);
        assert_eq!(vol.data()[(1, 0, 0)], DEFAULT_POSITIVE_VALUE);
    }

    #[test]
    fn negative_coordinate_rejected() {
        let pc = PointCloud::from_coords([[0.5, -0.01, 0.5]]).unwrap();
        let err = voxelize(&pc, &cfg(1.0)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveShifted { axis: 1, .. }));
    }

    #[test]
    fn empty_cloud_rejected() {
        let pc = PointCloud::new(vec![]).unwrap();
        assert!(matches!(voxelize(&pc, &cfg(1.0)), Err(Error::EmptyCloud)));
    }

    #[test]
    fn config_validation() {
        assert!(VoxelConfig::new(0.0, 5.0, -1.0).is_err());
        assert!(VoxelConfig::new(-0.1, 5.0, -1.0).is_err());
        assert!(VoxelConfig::new(0.1, 2.0, 2.0).is_err());
        assert!(VoxelConfig::new(0.1, 5.0, -1.0).is_ok());
    }

    #[test]
    fn padding_examples() {
        assert_eq!(compute_padding([4, 4, 4], [1, 1, 1]), [0; 6]);
        assert_eq!(compute_padding([4, 4, 4], [3, 3, 3]), [1, 1, 1, 1, 1, 1]);
        assert_eq!(compute_padding([5, 5, 5], [4, 4, 4]), [2, 1, 2, 1, 2, 1]);
    }

    #[test]
    fn central_voxel_examples() {
        assert_eq!(central_voxel([4, 4, 4]), [1, 1, 1]);
        assert_eq!(central_voxel([5, 3, 1]), [2, 1, 0]);
        assert_eq!(central_voxel([1, 1, 1]), [0, 0, 0]);
    }

    #[test]
    fn duplicated_points_do_not_change_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<[f64; 3]> = (0..40)
            .map(|_| {
                [
                    rng.random_range(0.0..2.0),
                    rng.random_range(0.0..2.0),
                    rng.random_range(0.0..2.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_coords(pts.clone()).unwrap();
        let vol = voxelize(&pc, &cfg(0.25)).unwrap();

        let mut dup = pts.clone();
        dup.push(pts[7]);
        let pc2 = PointCloud::from_coords(dup).unwrap();
        let vol2 = voxelize(&pc2, &cfg(0.25)).unwrap();
        assert_eq!(vol, vol2);

        assert!(vol.count_value(DEFAULT_POSITIVE_VALUE) <= pc.len());
    }

    #[test]
    fn scaling_points_and_resolution_preserves_occupancy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<[f64; 3]> = (0..60)
            .map(|_| {
                [
                    rng.random_range(0.0..3.0),
                    rng.random_range(0.0..3.0),
                    rng.random_range(0.0..3.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_coords(pts.clone()).unwrap();
        let vol = voxelize(&pc, &cfg(0.5)).unwrap();

        let factor = 4.0;
        let scaled_pts: Vec<[f64; 3]> = pts
            .iter()
            .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
            .collect();
        let scaled = PointCloud::from_coords(scaled_pts).unwrap();
        let vol_scaled = voxelize(&scaled, &cfg(0.5 * factor)).unwrap();

        assert_eq!(vol.dims(), vol_scaled.dims());
        assert_eq!(vol.data(), vol_scaled.data());
    }

    #[test]
    fn padded_records_padding_and_preserves_interior() {
        let pc = PointCloud::from_coords([[0.1, 0.1, 0.1]]).unwrap();
        let vol = voxelize(&pc, &cfg(1.0)).unwrap();
        let padded = vol.padded([2, 1, 0, 0, 1, 1], -1.0);
        assert_eq!(padded.dims(), [4, 1, 3]);
        assert_eq!(padded.padding(), [2, 1, 0, 0, 1, 1]);
        assert_eq!(padded.data()[(2, 0, 1)], DEFAULT_POSITIVE_VALUE);
        assert_eq!(padded.count_value(DEFAULT_POSITIVE_VALUE), 1);
    }

    proptest! {
        // Valid-correlation output size equals the source dims for any pair.
        #[test]
        fn padding_preserves_valid_output_size(
            sx in 1usize..=16, sy in 1usize..=16, sz in 1usize..=16,
            tx in 1usize..=16, ty in 1usize..=16, tz in 1usize..=16,
        ) {
            let s = [sx, sy, sz];
            let t = [tx, ty, tz];
            for split in [PaddingSplit::CeilLeft, PaddingSplit::AllLeft] {
                let p = compute_padding_split(s, t, split);
                for a in 0..3 {
                    let padded = s[a] + p[2 * a] + p[2 * a + 1];
                    prop_assert_eq!(padded + 1 - t[a], s[a]);
                }
            }
        }
    }
}
