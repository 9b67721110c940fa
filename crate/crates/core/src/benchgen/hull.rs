//! Incremental 3D convex hull (quickhull with conflict lists), returning the
//! set of input indices that are hull vertices. Coplanarity is judged
//! against a tolerance of 1e-10 × the input diameter; inputs without four
//! affinely independent points report `Degenerate` instead of a hull.

use nalgebra::{Point3, Vector3};

const COPLANARITY_REL_TOL: f64 = 1e-10;

#[derive(Debug)]
pub enum HullResult {
    /// Indices of input points that are vertices of the hull.
    Hull(Vec<usize>),
    /// Point/segment/planar input; no 3D hull exists.
    Degenerate,
}

#[derive(Clone)]
struct Face {
    verts: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
    conflicts: Vec<usize>,
    alive: bool,
}

impl Face {
    fn signed_dist(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

fn make_face(
    points: &[Point3<f64>],
    verts: [usize; 3],
    interior: &Point3<f64>,
) -> Option<Face> {
    let a = points[verts[0]];
    let b = points[verts[1]];
    let c = points[verts[2]];
    let mut normal = (b - a).cross(&(c - a));
    let norm = normal.norm();
    if norm < 1e-300 {
        return None;
    }
    normal /= norm;
    let mut verts = verts;
    let mut offset = normal.dot(&a.coords);
    if normal.dot(&interior.coords) - offset > 0.0 {
        verts.swap(1, 2);
        normal = -normal;
        offset = normal.dot(&a.coords);
    }
    Some(Face {
        verts,
        normal,
        offset,
        conflicts: Vec::new(),
        alive: true,
    })
}

pub fn convex_hull_vertices(points: &[Point3<f64>]) -> HullResult {
    if points.len() < 4 {
        return HullResult::Degenerate;
    }

    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diameter = (hi - lo).norm();
    let eps = (COPLANARITY_REL_TOL * diameter).max(f64::MIN_POSITIVE);

    let Some([i0, i1, i2, i3]) = initial_simplex(points, eps) else {
        return HullResult::Degenerate;
    };
    let interior = Point3::from(
        (points[i0].coords + points[i1].coords + points[i2].coords + points[i3].coords) / 4.0,
    );

    let mut faces: Vec<Face> = Vec::new();
    for verts in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        match make_face(points, verts, &interior) {
            Some(f) => faces.push(f),
            None => return HullResult::Degenerate,
        }
    }

    // Initial conflict assignment: each exterior point goes to the first
    // face it lies outside of.
    for (i, p) in points.iter().enumerate() {
        if i == i0 || i == i1 || i == i2 || i == i3 {
            continue;
        }
        for face in faces.iter_mut() {
            if face.signed_dist(p) > eps {
                face.conflicts.push(i);
                break;
            }
        }
    }

    loop {
        // Any alive face with outstanding conflicts.
        let Some(face_idx) = faces
            .iter()
            .position(|f| f.alive && !f.conflicts.is_empty())
        else {
            break;
        };
        let apex = *faces[face_idx]
            .conflicts
            .iter()
            .max_by(|&&a, &&b| {
                faces[face_idx]
                    .signed_dist(&points[a])
                    .total_cmp(&faces[face_idx].signed_dist(&points[b]))
            })
            .expect("non-empty conflicts");
        let apex_point = points[apex];

        // All faces the apex sees, plus their orphaned conflict points.
        let mut orphaned: Vec<usize> = Vec::new();
        let mut visible: Vec<usize> = Vec::new();
        for (fi, face) in faces.iter_mut().enumerate() {
            if face.alive && face.signed_dist(&apex_point) > eps {
                visible.push(fi);
                face.alive = false;
                orphaned.append(&mut face.conflicts);
            }
        }
        debug_assert!(visible.contains(&face_idx));

        // Horizon: undirected edges used by exactly one visible face.
        // BTreeMap keeps the face creation order deterministic.
        let mut edge_counts: std::collections::BTreeMap<(usize, usize), usize> =
            std::collections::BTreeMap::new();
        for &fi in &visible {
            let v = faces[fi].verts;
            for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
                let key = (a.min(b), a.max(b));
                *edge_counts.entry(key).or_insert(0) += 1;
            }
        }

        let mut new_faces: Vec<usize> = Vec::new();
        for (&(a, b), &count) in &edge_counts {
            if count != 1 {
                continue;
            }
            if let Some(face) = make_face(points, [apex, a, b], &interior) {
                faces.push(face);
                new_faces.push(faces.len() - 1);
            }
        }

        // Reassign orphans; points inside every new face are interior now.
        for i in orphaned {
            if i == apex {
                continue;
            }
            let p = &points[i];
            for &fi in &new_faces {
                if faces[fi].signed_dist(p) > eps {
                    faces[fi].conflicts.push(i);
                    break;
                }
            }
        }
    }

    let mut on_hull: Vec<usize> = faces
        .iter()
        .filter(|f| f.alive)
        .flat_map(|f| f.verts)
        .collect();
    on_hull.sort_unstable();
    on_hull.dedup();
    HullResult::Hull(on_hull)
}

fn initial_simplex(points: &[Point3<f64>], eps: f64) -> Option<[usize; 4]> {
    // Most separated pair among the six axis-extreme points.
    let mut extremes = [0usize; 6];
    for (i, p) in points.iter().enumerate() {
        for a in 0..3 {
            if p[a] < points[extremes[a]][a] {
                extremes[a] = i;
            }
            if p[a] > points[extremes[3 + a]][a] {
                extremes[3 + a] = i;
            }
        }
    }
    let (mut e0, mut e1, mut best) = (extremes[0], extremes[1], -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (points[i] - points[j]).norm();
            if d > best {
                best = d;
                e0 = i;
                e1 = j;
            }
        }
    }
    if best <= eps {
        return None;
    }

    let dir = (points[e1] - points[e0]).normalize();
    let (mut e2, mut best) = (0usize, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = (p - points[e0]).cross(&dir).norm();
        if d > best {
            best = d;
            e2 = i;
        }
    }
    if best <= eps {
        return None;
    }

    let normal = (points[e1] - points[e0])
        .cross(&(points[e2] - points[e0]))
        .normalize();
    let (mut e3, mut best) = (0usize, -1.0);
    for (i, p) in points.iter().enumerate() {
        let d = normal.dot(&(p - points[e0])).abs();
        if d > best {
            best = d;
            e3 = i;
        }
    }
    if best <= eps {
        return None;
    }
    Some([e0, e1, e2, e3])
}
