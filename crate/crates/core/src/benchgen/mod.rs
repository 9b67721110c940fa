//! Partial-view registration benchmark generator: floor-align a watertight
//! scan, surround it with icosahedron viewpoints, carve per-viewpoint
//! fragments by hidden point removal, and emit overlapping fragment pairs
//! with a sampled ground-truth perturbation.

mod hull;

pub use hull::{convex_hull_vertices, HullResult};

use nalgebra::{Point3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform, center_of_mass_shift, euler_to_matrix, EulerAngles, PointCloud,
    RigidTransform,
};
use crate::spatial::{median_nn_spacing, SpatialHash};

pub const DEFAULT_VIEWPOINT_RADIUS_M: f64 = 1.5;
pub const DEFAULT_OVERLAP_MIN: f64 = 0.6;
pub const DEFAULT_FLIP_RADIUS_FACTOR: f64 = 1e3;
/// Ground-truth sampling ranges: Euler angles and translation components.
pub const GT_ANGLE_RANGE_DEG: (f64, f64) = (0.0, 45.0);
pub const GT_TRANSLATION_RANGE_M: (f64, f64) = (-0.5, 0.5);

/// One candidate camera position on the viewpoint sphere.
#[derive(Debug, Clone, Copy)]
pub struct Viewpoint {
    pub position: Point3<f64>,
    pub index: usize,
}

/// Translates the cloud so its axis-aligned bounding box minimum sits at the
/// origin (the xz-plane becomes the floor).
pub fn floor_align(pc: &PointCloud) -> Result<PointCloud> {
    let min = pc.min_corner()?;
    Ok(pc.translated(&-min))
}

/// The 12 vertices of a regular icosahedron (golden-ratio construction, one
/// fixed canonical orientation), scaled to `radius_m` around `center`.
pub fn icosahedron_viewpoints(center: &Point3<f64>, radius_m: f64) -> Result<Vec<Viewpoint>> {
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "viewpoint radius must be > 0, got {radius_m}"
        )));
    }
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw = [
        [0.0, 1.0, phi],
        [0.0, 1.0, -phi],
        [0.0, -1.0, phi],
        [0.0, -1.0, -phi],
        [1.0, phi, 0.0],
        [1.0, -phi, 0.0],
        [-1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, 1.0],
        [phi, 0.0, -1.0],
        [-phi, 0.0, -1.0],
    ];
    Ok(raw
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let unit = Vector3::new(v[0], v[1], v[2]).normalize();
            Viewpoint {
                position: center + unit * radius_m,
                index,
            }
        })
        .collect())
}

/// Drops viewpoints below the floor (y < 0). Errors when nothing remains.
pub fn drop_below_floor(viewpoints: Vec<Viewpoint>) -> Result<Vec<Viewpoint>> {
    let kept: Vec<Viewpoint> = viewpoints.into_iter().filter(|v| v.position.y >= 0.0).collect();
    if kept.is_empty() {
        return Err(Error::NoUsableViewpoints);
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy)]
pub struct HprParams {
    /// Flip radius as a multiple of the farthest point distance from the
    /// viewpoint. Large values approximate exact visibility.
    pub flip_radius_factor: f64,
}

impl Default for HprParams {
    fn default() -> Self {
        Self {
            flip_radius_factor: DEFAULT_FLIP_RADIUS_FACTOR,
        }
    }
}

/// Indices of points visible from `viewpoint` by spherical flipping: each
/// point (taken relative to the viewpoint) maps to
/// `p + 2(R_f − ‖p‖)·p/‖p‖`, and the visible points are those whose image
/// lands on the convex hull of the flipped set plus the origin.
///
/// Degenerate (planar) flipped sets fall back to treating every point as
/// visible, with a warning.
pub fn hidden_point_removal(
    pc: &PointCloud,
    viewpoint: &Point3<f64>,
    params: &HprParams,
) -> Result<Vec<usize>> {
    pc.require_non_empty()?;
    let mut relative: Vec<Vector3<f64>> = Vec::with_capacity(pc.len());
    let mut max_norm = 0.0f64;
    for (index, p) in pc.iter().enumerate() {
        let r = p - viewpoint;
        let n = r.norm();
        if n < 1e-12 {
            return Err(Error::PointAtViewpoint { index });
        }
        max_norm = max_norm.max(n);
        relative.push(r);
    }
    let flip_radius = params.flip_radius_factor * max_norm;

    let mut flipped: Vec<Point3<f64>> = relative
        .iter()
        .map(|r| {
            let n = r.norm();
            Point3::from(r + 2.0 * (flip_radius - n) * r / n)
        })
        .collect();
    // The viewpoint joins the hull as a tiny tetrahedron rather than a
    // single point, so collinear or planar flipped sets still get a full
    // 3D hull and resolve to the correct lower-dimensional visibility.
    let anchor = 1e-9 * flip_radius;
    flipped.push(Point3::origin());
    flipped.push(Point3::new(anchor, 0.0, 0.0));
    flipped.push(Point3::new(0.0, anchor, 0.0));
    flipped.push(Point3::new(0.0, 0.0, anchor));

    match convex_hull_vertices(&flipped) {
        HullResult::Hull(vertices) => Ok(vertices
            .into_iter()
            .filter(|&i| i < pc.len())
            .collect()),
        HullResult::Degenerate => {
            log::warn!(
                "hidden point removal: flipped set is degenerate (planar); \
                 treating all {} points as visible",
                pc.len()
            );
            Ok((0..pc.len()).collect())
        }
    }
}

/// Symmetric epsilon-ball coverage: the smaller of the two directed
/// fractions of points with a counterpart within `eps_m` in the other cloud.
pub fn overlap_fraction(a: &PointCloud, b: &PointCloud, eps_m: f64) -> Result<f64> {
    a.require_non_empty()?;
    b.require_non_empty()?;
    if !(eps_m > 0.0) {
        return Err(Error::InvalidParameter(
            "overlap epsilon must be > 0".into(),
        ));
    }
    let covered = |from: &PointCloud, to: &PointCloud| -> f64 {
        let hash = SpatialHash::build(to.points(), eps_m);
        let hits = from
            .iter()
            .filter(|p| hash.has_within(p, eps_m))
            .count();
        hits as f64 / from.len() as f64
    };
    Ok(covered(a, b).min(covered(b, a)))
}

#[derive(Debug, Clone)]
pub struct GenerateParams {
    pub viewpoint_radius_m: f64,
    pub overlap_min: f64,
    /// Overlap gate distance; `None` derives 2× the median nearest-neighbor
    /// spacing of each fragment pair.
    pub overlap_eps_m: Option<f64>,
    pub flip_radius_factor: f64,
    pub rng_seed: u64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            viewpoint_radius_m: DEFAULT_VIEWPOINT_RADIUS_M,
            overlap_min: DEFAULT_OVERLAP_MIN,
            overlap_eps_m: None,
            flip_radius_factor: DEFAULT_FLIP_RADIUS_FACTOR,
            rng_seed: 0,
        }
    }
}

/// One generated registration pair, in memory. `ground_truth` is the
/// perturbation that was applied to the unperturbed source fragment; its
/// inverse maps the source fragment back onto the common frame (and is the
/// transform a registration of source onto target should estimate).
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub source_viewpoint: usize,
    pub target_viewpoint: usize,
    pub ground_truth: RigidTransform,
    pub gt_euler_deg: [f64; 3],
    pub overlap: f64,
    pub overlap_eps_m: f64,
    pub rng_seed: u64,
    pub source_fragment: PointCloud,
    pub source_unperturbed: PointCloud,
    pub target_fragment: PointCloud,
}

/// Stable per-pair seed derivation (splitmix64 over the base seed and the
/// pair coordinates), so generation is deterministic under any parallelism.
pub fn pair_seed(base: u64, scan_index: u64, vp_i: u64, vp_j: u64) -> u64 {
    let mut x = base
        ^ scan_index.wrapping_mul(0x9e3779b97f4a7c15)
        ^ vp_i.wrapping_mul(0xbf58476d1ce4e5b9)
        ^ vp_j.wrapping_mul(0x94d049bb133111eb);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn sample_ground_truth(seed: u64) -> (RigidTransform, [f64; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = [
        rng.random_range(GT_ANGLE_RANGE_DEG.0..GT_ANGLE_RANGE_DEG.1),
        rng.random_range(GT_ANGLE_RANGE_DEG.0..GT_ANGLE_RANGE_DEG.1),
        rng.random_range(GT_ANGLE_RANGE_DEG.0..GT_ANGLE_RANGE_DEG.1),
    ];
    let translation = Vector3::new(
        rng.random_range(GT_TRANSLATION_RANGE_M.0..GT_TRANSLATION_RANGE_M.1),
        rng.random_range(GT_TRANSLATION_RANGE_M.0..GT_TRANSLATION_RANGE_M.1),
        rng.random_range(GT_TRANSLATION_RANGE_M.0..GT_TRANSLATION_RANGE_M.1),
    );
    let rotation = euler_to_matrix(EulerAngles::new(angles[0], angles[1], angles[2]));
    (
        RigidTransform::new(rotation, translation).expect("sampled rotation is SO(3)"),
        angles,
    )
}

/// Generates every qualifying pair for one scan. Fragments are carved per
/// retained viewpoint; each unordered viewpoint pair (i < j) whose fragments
/// overlap more than `overlap_min` (measured in the common frame) yields one
/// pair with fragment i perturbed.
pub fn generate_pairs(
    scan: &PointCloud,
    params: &GenerateParams,
    scan_index: u64,
) -> Result<Vec<GeneratedPair>> {
    scan.require_non_empty()?;
    let aligned = floor_align(scan)?;
    let com = center_of_mass_shift(&aligned)?;
    let viewpoints = drop_below_floor(icosahedron_viewpoints(
        &Point3::from(com),
        params.viewpoint_radius_m,
    )?)?;
    let hpr = HprParams {
        flip_radius_factor: params.flip_radius_factor,
    };

    let fragments: Vec<(usize, PointCloud)> = viewpoints
        .par_iter()
        .map(|vp| {
            let visible = hidden_point_removal(&aligned, &vp.position, &hpr)?;
            Ok((vp.index, aligned.select(&visible)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, frag)| !frag.is_empty())
        .collect();

    let mut index_pairs = Vec::new();
    for a in 0..fragments.len() {
        for b in (a + 1)..fragments.len() {
            index_pairs.push((a, b));
        }
    }

    let mut pairs: Vec<GeneratedPair> = index_pairs
        .par_iter()
        .map(|&(a, b)| -> Result<Option<GeneratedPair>> {
            let (vi, frag_i) = &fragments[a];
            let (vj, frag_j) = &fragments[b];
            let eps = match params.overlap_eps_m {
                Some(e) => e,
                None => {
                    let mut spacings = Vec::new();
                    spacings.extend(median_nn_spacing(frag_i.points()));
                    spacings.extend(median_nn_spacing(frag_j.points()));
                    if spacings.is_empty() {
                        return Ok(None);
                    }
                    2.0 * spacings.iter().sum::<f64>() / spacings.len() as f64
                }
            };
            let overlap = overlap_fraction(frag_i, frag_j, eps)?;
            if overlap <= params.overlap_min {
                return Ok(None);
            }
            let seed = pair_seed(params.rng_seed, scan_index, *vi as u64, *vj as u64);
            let (ground_truth, gt_euler_deg) = sample_ground_truth(seed);
            let perturbed = apply_transform(frag_i, &ground_truth);
            Ok(Some(GeneratedPair {
                source_viewpoint: *vi,
                target_viewpoint: *vj,
                ground_truth,
                gt_euler_deg,
                overlap,
                overlap_eps_m: eps,
                rng_seed: seed,
                source_fragment: perturbed,
                source_unperturbed: frag_i.clone(),
                target_fragment: frag_j.clone(),
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    pairs.sort_by_key(|p| (p.source_viewpoint, p.target_viewpoint));
    Ok(pairs)
}

/// Manifest entry persisted for each pair. `gt` is the 4×4 row-major
/// perturbation applied to the source fragment; registration evaluation
/// uses its inverse as the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPair {
    pub id: String,
    pub source: String,
    pub target: String,
    pub gt: Vec<f64>,
    pub gt_euler_deg: [f64; 3],
    pub overlap: f64,
    pub overlap_eps_m: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestParams {
    pub viewpoint_radius_m: f64,
    pub overlap_min: f64,
    pub overlap_eps_m: Option<f64>,
    pub flip_radius_factor: f64,
    pub rng_seed: u64,
}

/// Persisted benchmark description: the pair list plus the generation
/// parameters for reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub pairs: Vec<ManifestPair>,
    pub params: ManifestParams,
}

impl BenchmarkManifest {
    pub fn from_generated(
        scans: &[(String, Vec<GeneratedPair>)],
        params: &GenerateParams,
        file_namer: impl Fn(&str, &GeneratedPair) -> (String, String, String),
    ) -> Self {
        let mut pairs = Vec::new();
        for (scan_id, generated) in scans {
            for pair in generated {
                let (id, source, target) = file_namer(scan_id, pair);
                pairs.push(ManifestPair {
                    id,
                    source,
                    target,
                    gt: pair.ground_truth.to_matrix4_row_major().to_vec(),
                    gt_euler_deg: pair.gt_euler_deg,
                    overlap: pair.overlap,
                    overlap_eps_m: pair.overlap_eps_m,
                    seed: pair.rng_seed,
                });
            }
        }
        Self {
            pairs,
            params: ManifestParams {
                viewpoint_radius_m: params.viewpoint_radius_m,
                overlap_min: params.overlap_min,
                overlap_eps_m: params.overlap_eps_m,
                flip_radius_factor: params.flip_radius_factor,
                rng_seed: params.rng_seed,
            },
        }
    }
}

/// Reads scans, generates pairs and writes fragments plus `manifest.json`
/// into `out_dir`. Unreadable scans become warnings and generation
/// continues; zero pairs overall is an error. File names and manifest
/// contents are deterministic for a fixed seed.
pub fn generate_benchmark(
    scan_paths: &[std::path::PathBuf],
    out_dir: &std::path::Path,
    params: &GenerateParams,
) -> Result<(BenchmarkManifest, Vec<String>)> {
    use crate::io::{write_point_cloud, PlyEncoding};

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut sorted: Vec<&std::path::PathBuf> = scan_paths.iter().collect();
    sorted.sort();

    let mut warnings = Vec::new();
    let mut generated: Vec<(String, Vec<GeneratedPair>)> = Vec::new();
    for (scan_index, path) in sorted.iter().enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("scan{scan_index}"));
        let scan = match crate::io::read_point_cloud(path) {
            Ok(pc) => pc,
            Err(e) => {
                warnings.push(format!("skipping scan {}: {e}", path.display()));
                continue;
            }
        };
        match generate_pairs(&scan, params, scan_index as u64) {
            Ok(pairs) => generated.push((stem, pairs)),
            Err(e) => warnings.push(format!("skipping scan {}: {e}", path.display())),
        }
    }

    let mut written_targets: std::collections::HashSet<String> = std::collections::HashSet::new();
    for (stem, pairs) in &generated {
        for pair in pairs {
            let target_name = format!("{stem}_vp{}.ply", pair.target_viewpoint);
            if written_targets.insert(target_name.clone()) {
                write_point_cloud(
                    out_dir.join(&target_name),
                    &pair.target_fragment,
                    PlyEncoding::BinaryLittleEndian,
                )?;
            }
            let source_name = format!(
                "{stem}_vp{}_vp{}_perturbed.ply",
                pair.source_viewpoint, pair.target_viewpoint
            );
            write_point_cloud(
                out_dir.join(&source_name),
                &pair.source_fragment,
                PlyEncoding::BinaryLittleEndian,
            )?;
        }
    }

    let manifest = BenchmarkManifest::from_generated(&generated, params, |stem, pair| {
        (
            format!("{stem}_vp{}_vp{}", pair.source_viewpoint, pair.target_viewpoint),
            format!(
                "{stem}_vp{}_vp{}_perturbed.ply",
                pair.source_viewpoint, pair.target_viewpoint
            ),
            format!("{stem}_vp{}.ply", pair.target_viewpoint),
        )
    });
    if manifest.pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    crate::io::write_json(out_dir.join("manifest.json"), &manifest)?;
    Ok((manifest, warnings))
}
