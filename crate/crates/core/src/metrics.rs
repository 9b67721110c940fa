//! Registration error metrics (RRE, RTE) and the recall-based evaluation
//! loop over a benchmark's pairs.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{validate_rotation, RigidTransform};

/// Success thresholds: a pair counts as registered when RRE < τ_r AND
/// RTE < τ_t (strict, matching the indicator in the recall definition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalThresholds {
    pub tau_r_deg: f64,
    pub tau_t_m: f64,
}

impl EvalThresholds {
    pub fn new(tau_r_deg: f64, tau_t_m: f64) -> Result<Self> {
        if !(tau_r_deg > 0.0 && tau_t_m > 0.0) {
            return Err(Error::InvalidParameter(
                "evaluation thresholds must be > 0".into(),
            ));
        }
        Ok(Self { tau_r_deg, tau_t_m })
    }

    /// KITTI preset: 5°, 2 m.
    pub fn kitti() -> Self {
        Self {
            tau_r_deg: 5.0,
            tau_t_m: 2.0,
        }
    }

    /// ETH preset: 5°, 0.3 m.
    pub fn eth() -> Self {
        Self {
            tau_r_deg: 5.0,
            tau_t_m: 0.3,
        }
    }

    /// FAUST-partial preset: 10°, 0.03 m.
    pub fn faust_partial() -> Self {
        Self {
            tau_r_deg: 10.0,
            tau_t_m: 0.03,
        }
    }
}

/// Relative rotation error in degrees: the geodesic angle between two
/// rotations, in [0°, 180°]. The trace argument is clamped before acos so
/// floating drift can never produce NaN.
pub fn rre(r_true: &Matrix3<f64>, r_est: &Matrix3<f64>) -> Result<f64> {
    validate_rotation(r_true)?;
    validate_rotation(r_est)?;
    let arg = ((r_est.transpose() * r_true).trace() - 1.0) / 2.0;
    Ok(arg.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Relative translation error in meters: `‖t* − t̂‖₂`.
pub fn rte(t_true: &Vector3<f64>, t_est: &Vector3<f64>) -> f64 {
    (t_true - t_est).norm()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOutcome {
    pub pair_id: String,
    pub rre_deg: f64,
    pub rte_m: f64,
    pub success: bool,
}

/// Dataset-level evaluation. Means are over successful pairs only and are
/// `None` (serialized as null, never 0) when nothing succeeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall: f64,
    pub mean_rre_deg: Option<f64>,
    pub mean_rte_m: Option<f64>,
    pub per_pair: Vec<PairOutcome>,
}

/// Scores estimates against ground truth. `ground_truth` fixes the pair set
/// and order; `estimates` must cover it exactly once, in any order.
pub fn evaluate(
    ground_truth: &[(String, RigidTransform)],
    estimates: &[(String, RigidTransform)],
    thresholds: &EvalThresholds,
) -> Result<EvalReport> {
    EvalThresholds::new(thresholds.tau_r_deg, thresholds.tau_t_m)?;
    if ground_truth.is_empty() {
        return Err(Error::EvalMismatch("no ground-truth pairs".into()));
    }

    let mut by_id: std::collections::HashMap<&str, Vec<&RigidTransform>> =
        std::collections::HashMap::new();
    for (id, t) in estimates {
        by_id.entry(id.as_str()).or_default().push(t);
    }

    let mut missing = Vec::new();
    let mut duplicated = Vec::new();
    for (id, _) in ground_truth {
        match by_id.get(id.as_str()).map(|v| v.len()).unwrap_or(0) {
            0 => missing.push(id.clone()),
            1 => {}
            _ => duplicated.push(id.clone()),
        }
    }
    let truth_ids: std::collections::HashSet<&str> =
        ground_truth.iter().map(|(id, _)| id.as_str()).collect();
    let unknown: Vec<String> = estimates
        .iter()
        .map(|(id, _)| id)
        .filter(|id| !truth_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !(missing.is_empty() && duplicated.is_empty() && unknown.is_empty()) {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing results for {missing:?}"));
        }
        if !duplicated.is_empty() {
            parts.push(format!("duplicate results for {duplicated:?}"));
        }
        if !unknown.is_empty() {
            parts.push(format!("results for unknown pairs {unknown:?}"));
        }
        return Err(Error::EvalMismatch(parts.join("; ")));
    }

    let per_pair: Vec<PairOutcome> = ground_truth
        .par_iter()
        .map(|(id, truth)| {
            let est = by_id[id.as_str()][0];
            let rre_deg = rre(truth.rotation(), est.rotation())?;
            let rte_m = rte(truth.translation(), est.translation());
            Ok(PairOutcome {
                pair_id: id.clone(),
                rre_deg,
                rte_m,
                success: rre_deg < thresholds.tau_r_deg && rte_m < thresholds.tau_t_m,
            })
        })
        .collect::<Result<_>>()?;

    let successes: Vec<&PairOutcome> = per_pair.iter().filter(|p| p.success).collect();
    let recall = successes.len() as f64 / per_pair.len() as f64;
    let (mean_rre_deg, mean_rte_m) = if successes.is_empty() {
        (None, None)
    } else {
        let n = successes.len() as f64;
        (
            Some(successes.iter().map(|p| p.rre_deg).sum::<f64>() / n),
            Some(successes.iter().map(|p| p.rte_m).sum::<f64>() / n),
        )
    };
    Ok(EvalReport {
        recall,
        mean_rre_deg,
        mean_rte_m,
        per_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euler_to_matrix, EulerAngles};
    use nalgebra::UnitQuaternion;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.0..3.0))
            .to_rotation_matrix()
            .into_inner()
    }

    #[test]
    fn rre_identity_and_axis_angle() {
        let i = Matrix3::identity();
        assert_eq!(rre(&i, &i).unwrap(), 0.0);
        let r30 = euler_to_matrix(EulerAngles::new(0.0, 0.0, 30.0));
        assert!((rre(&i, &r30).unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn rre_matches_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let got = rre(&a, &b).unwrap();
            let oracle = UnitQuaternion::from_matrix(&a)
                .angle_to(&UnitQuaternion::from_matrix(&b))
                .to_degrees();
            assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        }
    }

    #[test]
    fn rre_rejects_non_rotation() {
        let bad = Matrix3::identity() * 1.5;
        assert!(rre(&bad, &Matrix3::identity()).is_err());
    }

    #[test]
    fn rre_symmetry_and_left_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..50 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let g = random_rotation(&mut rng);
            let ab = rre(&a, &b).unwrap();
            assert!((ab - rre(&b, &a).unwrap()).abs() < 1e-9);
            assert!((ab - rre(&(g * a), &(g * b)).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rre_never_nan_under_float_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            let v = rre(&r, &r).unwrap();
            assert!(v.is_finite());
            assert!(v.abs() < 1e-5);
        }
    }

    #[test]
    fn rte_examples() {
        assert_eq!(rte(&Vector3::zeros(), &Vector3::zeros()), 0.0);
        assert_eq!(rte(&Vector3::new(1.0, 2.0, 2.0), &Vector3::zeros()), 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..20 {
            let a = Vector3::new(rng.random(), rng.random(), rng.random());
            let b = Vector3::new(rng.random(), rng.random(), rng.random());
            let d: Vector3<f64> = a - b;
            let oracle = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
            assert!((rte(&a, &b) - oracle).abs() < 1e-12);
        }
    }

    fn transform_with(rre_deg: f64, rte_m: f64) -> RigidTransform {
        RigidTransform::new(
            euler_to_matrix(EulerAngles::new(0.0, 0.0, rre_deg)),
            Vector3::new(rte_m, 0.0, 0.0),
        )
        .unwrap()
    }

    fn hand_case() -> (Vec<(String, RigidTransform)>, Vec<(String, RigidTransform)>) {
        // RRE/RTE per pair: (1°, 0.01), (20°, 0.01), (1°, 9.9), (1°, 0.01)
        let errors = [(1.0, 0.01), (20.0, 0.01), (1.0, 9.9), (1.0, 0.01)];
        let truth: Vec<_> = errors
            .iter()
            .enumerate()
            .map(|(i, _)| (format!("p{i}"), RigidTransform::identity()))
            .collect();
        let est: Vec<_> = errors
            .iter()
            .enumerate()
            .map(|(i, &(r, t))| (format!("p{i}"), transform_with(r, t)))
            .collect();
        (truth, est)
    }

    #[test]
    fn evaluate_hand_example() {
        let (truth, est) = hand_case();
        let report = evaluate(&truth, &est, &EvalThresholds::new(5.0, 1.0).unwrap()).unwrap();
        assert_eq!(report.recall, 0.5);
        assert!((report.mean_rre_deg.unwrap() - 1.0).abs() < 1e-9);
        assert!((report.mean_rte_m.unwrap() - 0.01).abs() < 1e-9);
        assert_eq!(report.per_pair.len(), 4);
        assert_eq!(
            report
                .per_pair
                .iter()
                .map(|p| p.success)
                .collect::<Vec<_>>(),
            vec![true, false, false, true]
        );
    }

    #[test]
    fn evaluate_all_fail_means_undefined() {
        let truth = vec![("a".to_string(), RigidTransform::identity())];
        let est = vec![("a".to_string(), transform_with(30.0, 5.0))];
        let report = evaluate(&truth, &est, &EvalThresholds::new(5.0, 1.0).unwrap()).unwrap();
        assert_eq!(report.recall, 0.0);
        assert!(report.mean_rre_deg.is_none());
        assert!(report.mean_rte_m.is_none());
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["mean_rre_deg"].is_null());
    }

    #[test]
    fn evaluate_all_identical_passing() {
        let truth = vec![
            ("a".to_string(), RigidTransform::identity()),
            ("b".to_string(), RigidTransform::identity()),
        ];
        let est = vec![
            ("a".to_string(), transform_with(1.0, 0.1)),
            ("b".to_string(), transform_with(1.0, 0.1)),
        ];
        let report = evaluate(&truth, &est, &EvalThresholds::new(5.0, 1.0).unwrap()).unwrap();
        assert_eq!(report.recall, 1.0);
        assert!((report.mean_rre_deg.unwrap() - 1.0).abs() < 1e-9);
        assert!((report.mean_rte_m.unwrap() - 0.1).abs() < 1e-9);
    }

    #[test]
    fn evaluate_rejects_missing_and_duplicates() {
        let (truth, mut est) = hand_case();
        est.pop();
        let err = evaluate(&truth, &est, &EvalThresholds::kitti()).unwrap_err();
        assert!(err.to_string().contains("missing"));
        assert!(err.to_string().contains("p3"));

        let (truth, mut est) = hand_case();
        est.push(est[0].clone());
        let err = evaluate(&truth, &est, &EvalThresholds::kitti()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));

        let (truth, mut est) = hand_case();
        est.push(("stray".to_string(), RigidTransform::identity()));
        let err = evaluate(&truth, &est, &EvalThresholds::kitti()).unwrap_err();
        assert!(err.to_string().contains("unknown"));
    }

    #[test]
    fn recall_monotone_in_thresholds() {
        let (truth, est) = hand_case();
        let mut prev = -1.0;
        for (tr, tt) in [(0.5, 0.005), (2.0, 0.02), (25.0, 0.02), (25.0, 20.0)] {
            let report =
                evaluate(&truth, &est, &EvalThresholds::new(tr, tt).unwrap()).unwrap();
            assert!(report.recall >= prev);
            prev = report.recall;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn strictness_of_threshold_comparison() {
        // RTE exactly at the threshold must not count as success (the
        // translation norm is exact in floats, unlike a trig round-trip).
        let truth = vec![("a".to_string(), RigidTransform::identity())];
        let est = vec![("a".to_string(), transform_with(0.0, 1.0))];
        let report = evaluate(&truth, &est, &EvalThresholds::new(5.0, 1.0).unwrap()).unwrap();
        assert_eq!(report.per_pair[0].rte_m, 1.0);
        assert_eq!(report.recall, 0.0);
    }

    #[test]
    fn presets_match_published_values() {
        assert_eq!(EvalThresholds::kitti().tau_r_deg, 5.0);
        assert_eq!(EvalThresholds::kitti().tau_t_m, 2.0);
        assert_eq!(EvalThresholds::eth().tau_r_deg, 5.0);
        assert_eq!(EvalThresholds::eth().tau_t_m, 0.3);
        assert_eq!(EvalThresholds::faust_partial().tau_r_deg, 10.0);
        assert_eq!(EvalThresholds::faust_partial().tau_t_m, 0.03);
    }
}
