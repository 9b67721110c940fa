//! Uniform spatial hash grid over a fixed point set. Cell size is chosen by
//! the caller; radius queries with `radius <= cell_size` only ever touch the
//! 27 surrounding cells.

use std::collections::HashMap;

use nalgebra::Point3;

/// Hash grid over an immutable slice of points.
pub struct SpatialHash<'a> {
    points: &'a [Point3<f64>],
    cell_size: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl<'a> SpatialHash<'a> {
    pub fn build(points: &'a [Point3<f64>], cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite());
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells
                .entry(Self::key(p, cell_size))
                .or_default()
                .push(i as u32);
        }
        Self {
            points,
            cell_size,
            cells,
        }
    }

    fn key(p: &Point3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest stored point within `radius` of `q`, as (index, distance).
    /// `radius` must not exceed the cell size.
    pub fn nearest_within(&self, q: &Point3<f64>, radius: f64) -> Option<(usize, f64)> {
        debug_assert!(radius <= self.cell_size * (1.0 + 1e-12));
        let center = Self::key(q, self.cell_size);
        let mut best: Option<(usize, f64)> = None;
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = (center.0 + dx, center.1 + dy, center.2 + dz);
                    let Some(bucket) = self.cells.get(&key) else {
                        continue;
                    };
                    for &i in bucket {
                        let i = i as usize;
                        let d2 = (self.points[i] - q).norm_squared();
                        // Distance ties break to the lowest index, keeping
                        // results independent of hash iteration order.
                        if d2 <= r2
                            && best.map_or(true, |(bi, bd)| d2 < bd || (d2 == bd && i < bi))
                        {
                            best = Some((i, d2));
                        }
                    }
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// True if any stored point lies within `radius` of `q`.
    pub fn has_within(&self, q: &Point3<f64>, radius: f64) -> bool {
        self.nearest_within(q, radius).is_some()
    }

    /// `k` nearest stored points to `q`, optionally excluding one index
    /// (used for self-queries). Expands cell shells until the best `k` are
    /// certain. Returns (index, distance) pairs sorted by distance.
    pub fn knn(&self, q: &Point3<f64>, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let center = Self::key(q, self.cell_size);
        let mut found: Vec<(usize, f64)> = Vec::new();
        let mut ring = 0i64;
        loop {
            // Visit the shell of cells at Chebyshev distance `ring`.
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let key = (center.0 + dx, center.1 + dy, center.2 + dz);
                        let Some(bucket) = self.cells.get(&key) else {
                            continue;
                        };
                        for &i in bucket {
                            if exclude == Some(i as usize) {
                                continue;
                            }
                            let d2 = (self.points[i as usize] - q).norm_squared();
                            found.push((i as usize, d2));
                        }
                    }
                }
            }
            found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            found.truncate(k);

            // Points in unvisited cells are at least `ring * cell` away.
            let safe_radius = ring as f64 * self.cell_size;
            let have_k_within_safe =
                found.len() >= k && found[k - 1].1.sqrt() <= safe_radius;
            let exhausted = (ring as usize) > self.max_useful_ring();
            if have_k_within_safe || exhausted {
                found.truncate(k);
                return found
                    .into_iter()
                    .map(|(i, d2)| (i, d2.sqrt()))
                    .collect();
            }
            ring += 1;
        }
    }

    fn max_useful_ring(&self) -> usize {
        // Beyond the bounding box's cell span there is nothing left to find.
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for key in self.cells.keys() {
            lo = (lo.0.min(key.0), lo.1.min(key.1), lo.2.min(key.2));
            hi = (hi.0.max(key.0), hi.1.max(key.1), hi.2.max(key.2));
        }
        if self.cells.is_empty() {
            return 0;
        }
        ((hi.0 - lo.0).max(hi.1 - lo.1).max(hi.2 - lo.2) + 2) as usize
    }
}

/// Median over every point's nearest-neighbor distance. Used to derive the
/// default overlap epsilon.
pub fn median_nn_spacing(points: &[Point3<f64>]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    // Cell size guess from the bounding box; refined only through knn rings.
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diag = (hi - lo).norm().max(1e-12);
    let cell = (diag / (points.len() as f64).cbrt()).max(1e-12);
    let hash = SpatialHash::build(points, cell);
    let mut dists: Vec<f64> = (0..points.len())
        .map(|i| {
            hash.knn(&points[i], 1, Some(i))
                .first()
                .map(|&(_, d)| d)
                .unwrap_or(0.0)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    Some(dists[dists.len() / 2])
}
