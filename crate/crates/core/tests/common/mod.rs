//! Shared fixtures for the integration suites.

use gridreg::geometry::PointCloud;
use nalgebra::{Point3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Asymmetric multi-cluster cloud centered at its center of mass. Structured
/// enough that voxel correlation has a sharp, unique peak.
pub fn structured_blob(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cluster_count = 4;
    let centers: Vec<Vector3<f64>> = (0..cluster_count)
        .map(|_| {
            Vector3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            )
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i % 5 == 4 {
            // scattered fill
            Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            )
        } else {
            let c = centers[i % cluster_count];
            c + Vector3::new(
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.12..0.12),
            )
        };
        points.push(Point3::from(p));
    }
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    PointCloud::new(points.into_iter().map(|p| Point3::from(p.coords - mean)).collect())
        .expect("finite points")
}

/// Adds zero-mean uniform jitter of half-width `amplitude` to every point.
pub fn jittered(pc: &PointCloud, amplitude: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        pc.iter()
            .map(|p| {
                Point3::new(
                    p.x + rng.random_range(-amplitude..amplitude),
                    p.y + rng.random_range(-amplitude..amplitude),
                    p.z + rng.random_range(-amplitude..amplitude),
                )
            })
            .collect(),
    )
    .expect("finite points")
}
