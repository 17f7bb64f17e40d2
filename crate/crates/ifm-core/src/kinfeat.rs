//! Kinematic features: the 4 world-frame signals, the 12 hand-frame
//! coordinates, and their 1600-dimensional concatenation.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{IfmError, Result};
use crate::preprocess::{normalize_time, wrist_speed, PreprocessConfig};
use crate::trial::Trial;

/// Which feature family a block holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Local,
    Global,
    /// Concatenation of local then global.
    K,
}

impl BlockKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockKind::Local => "local",
            BlockKind::Global => "global",
            BlockKind::K => "k",
        }
    }

    pub fn parse(s: &str) -> Result<BlockKind> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(BlockKind::Local),
            "global" => Ok(BlockKind::Global),
            "k" => Ok(BlockKind::K),
            other => Err(IfmError::config(format!("unknown feature block '{other}'"))),
        }
    }
}

/// A named family of per-trial time series on the normalized timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub kind: BlockKind,
    pub trial_id: String,
    /// (feature name, resampled sequence), in the documented order.
    pub features: Vec<(String, Vec<f64>)>,
}

impl FeatureBlock {
    /// Sequences concatenated in declared order.
    pub fn flattened(&self) -> Vec<f64> {
        self.features
            .iter()
            .flat_map(|(_, seq)| seq.iter().copied())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.features.iter().map(|(_, seq)| seq.len()).sum()
    }
}

/// Orthonormal right-handed frame anchored on the hand dorsum.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFrame {
    pub origin: Point3<f64>,
    /// Rows are the hand-centered x, y, z directions.
    pub axes: Matrix3<f64>,
}

impl LocalFrame {
    /// Expresses a world point in this frame.
    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.axes * (p - self.origin)
    }

    /// Expresses a world direction in this frame (no translation).
    pub fn dir_to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.axes * v
    }
}

/// Relative cross-product magnitude below which the dorsum markers are
/// treated as collinear.
const DEGENERACY_TOL: f64 = 1e-9;

/// Hand-local frame from the dorsum markers at sample `t`:
/// x along base->radial, z normal to the dorsum plane, y completing the
/// right-handed triad.
pub fn local_frame(trial: &Trial, t: usize) -> Result<LocalFrame> {
    let m1 = trial.marker("hand_dorsum_base")?;
    let m2 = trial.marker("hand_dorsum_radial")?;
    let m3 = trial.marker("hand_dorsum_ulnar")?;
    if t >= m1.len() {
        return Err(IfmError::data(format!(
            "sample index {t} out of range (trial length {})",
            m1.len()
        )));
    }
    frame_from_markers(&m1[t], &m2[t], &m3[t], t)
}

pub(crate) fn frame_from_markers(
    m1: &Point3<f64>,
    m2: &Point3<f64>,
    m3: &Point3<f64>,
    sample: usize,
) -> Result<LocalFrame> {
    let e1 = m2 - m1;
    let e2 = m3 - m1;
    let n1 = e1.norm();
    let n2 = e2.norm();
    let cross = e1.cross(&e2);
    // Condition measure: sine of the angle between the two dorsum edges.
    let condition = if n1 > 0.0 && n2 > 0.0 {
        cross.norm() / (n1 * n2)
    } else {
        0.0
    };
    if condition < DEGENERACY_TOL {
        return Err(IfmError::DegenerateFrame { sample, condition });
    }
    let x = e1 / n1;
    let z = cross / cross.norm();
    let y = z.cross(&x);
    Ok(LocalFrame {
        origin: *m1,
        axes: Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]),
    })
}

/// Per-sample thumb-tip to index-tip distance in mm.
pub fn grip_aperture(trial: &Trial) -> Result<Vec<f64>> {
    let thumb = trial.marker("thumb_tip")?;
    let index = trial.marker("index_tip")?;
    Ok(thumb
        .iter()
        .zip(index.iter())
        .map(|(a, b)| (a - b).norm())
        .collect())
}

pub const GLOBAL_FEATURE_NAMES: [&str; 4] = [
    "wrist_velocity",
    "wrist_height",
    "wrist_horizontal",
    "grip_aperture",
];

/// The 4 world-frame features resampled to `cfg.resample_count`:
/// wrist speed, wrist z, wrist x, and grip aperture.
pub fn global_features(trial: &Trial, cfg: &PreprocessConfig) -> Result<FeatureBlock> {
    let wrist = trial.marker("wrist")?;
    let series: [Vec<f64>; 4] = [
        wrist_speed(trial)?,
        wrist.iter().map(|p| p.z).collect(),
        wrist.iter().map(|p| p.x).collect(),
        grip_aperture(trial)?,
    ];
    let features = GLOBAL_FEATURE_NAMES
        .iter()
        .zip(series.iter())
        .map(|(&name, seq)| Ok((name.to_string(), normalize_time(seq, cfg.resample_count)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureBlock {
        kind: BlockKind::Global,
        trial_id: trial.trial_id.clone(),
        features,
    })
}

pub const LOCAL_FEATURE_TARGETS: [&str; 4] =
    ["thumb", "index", "thumb_index_plane", "radius_phalanx"];

/// Raw (un-resampled) local-frame coordinates of the four targets at every
/// sample: 12 sequences of trial length, in (target, axis) order.
pub fn local_coordinates(trial: &Trial) -> Result<Vec<(String, Vec<f64>)>> {
    let thumb = trial.marker("thumb_tip")?;
    let index = trial.marker("index_tip")?;
    let phalanx = trial.marker("index_phalanx_prox")?;
    let m1 = trial.marker("hand_dorsum_base")?;

    let len = trial.len();
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(len); 12];
    for t in 0..len {
        let frame = local_frame(trial, t)?;
        // Unit normal of the plane through thumb tip, index tip and the
        // frame origin marker.
        let pa = thumb[t] - m1[t];
        let pb = index[t] - m1[t];
        let cross = pa.cross(&pb);
        let denom = pa.norm() * pb.norm();
        let condition = if denom > 0.0 { cross.norm() / denom } else { 0.0 };
        if condition < DEGENERACY_TOL {
            return Err(IfmError::DegenerateFrame {
                sample: t,
                condition,
            });
        }
        let normal = cross / cross.norm();

        let coords = [
            frame.to_local(&thumb[t]),
            frame.to_local(&index[t]),
            frame.dir_to_local(&normal),
            frame.to_local(&phalanx[t]),
        ];
        for (target_idx, v) in coords.iter().enumerate() {
            series[target_idx * 3].push(v.x);
            series[target_idx * 3 + 1].push(v.y);
            series[target_idx * 3 + 2].push(v.z);
        }
    }

    let axis = ["x", "y", "z"];
    Ok(series
        .into_iter()
        .enumerate()
        .map(|(i, seq)| {
            let name = format!("{}_{}", LOCAL_FEATURE_TARGETS[i / 3], axis[i % 3]);
            (name, seq)
        })
        .collect())
}

/// The 12 hand-frame features resampled to `cfg.resample_count`.
pub fn local_features(trial: &Trial, cfg: &PreprocessConfig) -> Result<FeatureBlock> {
    let features = local_coordinates(trial)?
        .into_iter()
        .map(|(name, seq)| Ok((name, normalize_time(&seq, cfg.resample_count)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureBlock {
        kind: BlockKind::Local,
        trial_id: trial.trial_id.clone(),
        features,
    })
}

/// Concatenates valid local and global blocks of the same trial into the
/// combined block (local first).
pub fn assemble(block_local: &FeatureBlock, block_global: &FeatureBlock) -> Result<FeatureBlock> {
    if block_local.kind != BlockKind::Local || block_global.kind != BlockKind::Global {
        return Err(IfmError::data(format!(
            "assemble expects (local, global) blocks, got ({:?}, {:?})",
            block_local.kind, block_global.kind
        )));
    }
    if block_local.trial_id != block_global.trial_id {
        return Err(IfmError::data(format!(
            "assemble: mismatched trial ids '{}' vs '{}'",
            block_local.trial_id, block_global.trial_id
        )));
    }
    let mut features = block_local.features.clone();
    features.extend(block_global.features.iter().cloned());
    Ok(FeatureBlock {
        kind: BlockKind::K,
        trial_id: block_local.trial_id.clone(),
        features,
    })
}

/// Computes the requested block for one (already preprocessed) trial.
pub fn feature_block(trial: &Trial, kind: BlockKind, cfg: &PreprocessConfig) -> Result<FeatureBlock> {
    match kind {
        BlockKind::Local => local_features(trial, cfg),
        BlockKind::Global => global_features(trial, cfg),
        BlockKind::K => {
            let local = local_features(trial, cfg)?;
            let global = global_features(trial, cfg)?;
            assemble(&local, &global)
        }
    }
}

/// Per-dimension z-scoring with statistics from a training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits population mean and standard deviation per dimension.
    /// Zero-variance dimensions get unit scale.
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Standardizer> {
        let n = vectors.len();
        if n == 0 {
            return Err(IfmError::data("cannot standardize an empty set"));
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(IfmError::data("standardizer: inconsistent dimensions"));
        }
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, &x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, &x), &m) in var.iter_mut().zip(v.iter()).zip(mean.iter()) {
                let d = x - m;
                *s += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|&s| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter())
            .zip(self.scale.iter())
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::{Intention, MARKER_NAMES};
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn make_trial(build: impl Fn(&str, usize) -> Point3<f64>, len: usize) -> Trial {
        let markers = MARKER_NAMES
            .iter()
            .map(|&name| (0..len).map(|t| build(name, t)).collect())
            .collect();
        Trial::new("t0", "s0", Intention::Drinking, 100.0, markers).unwrap()
    }

    /// A mildly articulated trial with distinct, non-collinear marker
    /// positions (fixed pseudo-random scatter per marker).
    fn generic_trial(len: usize) -> Trial {
        make_trial(
            |name, t| {
                let i = crate::trial::marker_index(name).unwrap();
                let tau = t as f64 / (len - 1).max(1) as f64;
                let scatter = Point3::new(
                    ((i * 37) % 11) as f64 * 4.0,
                    ((i * 17) % 7) as f64 * 5.0,
                    ((i * 29) % 13) as f64 * 3.0,
                );
                Point3::new(
                    scatter.x + 10.0 * i as f64 + 30.0 * tau,
                    scatter.y + 100.0 * tau * tau,
                    scatter.z + 20.0 * tau,
                )
            },
            len,
        )
    }

    #[test]
    fn aperture_simple_cases() {
        let coincident = make_trial(|_, _| Point3::new(1.0, 2.0, 3.0), 5);
        assert!(grip_aperture(&coincident)
            .unwrap()
            .iter()
            .all(|&d| d == 0.0));

        let t = make_trial(
            |name, _| match name {
                "thumb_tip" => Point3::new(0.0, 0.0, 0.0),
                "index_tip" => Point3::new(3.0, 4.0, 0.0),
                _ => Point3::new(9.0, 9.0, 9.0),
            },
            4,
        );
        for d in grip_aperture(&t).unwrap() {
            assert_relative_eq!(d, 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn canonical_dorsum_markers_give_identity_frame() {
        let t = make_trial(
            |name, _| match name {
                "hand_dorsum_base" => Point3::new(0.0, 0.0, 0.0),
                "hand_dorsum_radial" => Point3::new(1.0, 0.0, 0.0),
                "hand_dorsum_ulnar" => Point3::new(0.0, 1.0, 0.0),
                _ => Point3::new(5.0, 5.0, 5.0),
            },
            3,
        );
        let f = local_frame(&t, 0).unwrap();
        assert_relative_eq!(f.axes, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(f.origin, Point3::new(0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn frame_is_rotation_equivariant() {
        let trial = generic_trial(4);
        let rot = Rotation3::from_euler_angles(0.4, -0.8, 1.3);
        let moved = trial.transformed(&rot, &Vector3::new(12.0, -7.0, 30.0));
        let f0 = local_frame(&trial, 2).unwrap();
        let f1 = local_frame(&moved, 2).unwrap();
        // Rows transform as axes' = axes * R^T.
        let expect = f0.axes * rot.matrix().transpose();
        assert_relative_eq!(f1.axes, expect, epsilon = 1e-9);
    }

    #[test]
    fn random_frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in 0..1000 {
            let m1 = Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let m2 = m1 + Vector3::new(rng.random::<f64>() + 0.1, rng.random(), rng.random());
            let m3 = m1 + Vector3::new(rng.random(), rng.random::<f64>() + 0.1, rng.random());
            match frame_from_markers(&m1, &m2, &m3, s) {
                Ok(f) => {
                    assert_relative_eq!(
                        f.axes * f.axes.transpose(),
                        Matrix3::identity(),
                        epsilon = 1e-9
                    );
                    assert_relative_eq!(f.axes.determinant(), 1.0, epsilon = 1e-9);
                }
                // Random collinear triples are possible in principle.
                Err(IfmError::DegenerateFrame { .. }) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn collinear_dorsum_markers_error() {
        let t = make_trial(
            |name, _| match name {
                "hand_dorsum_base" => Point3::new(0.0, 0.0, 0.0),
                "hand_dorsum_radial" => Point3::new(1.0, 0.0, 0.0),
                "hand_dorsum_ulnar" => Point3::new(2.0, 0.0, 0.0),
                _ => Point3::new(5.0, 5.0, 5.0),
            },
            3,
        );
        match local_frame(&t, 0) {
            Err(IfmError::DegenerateFrame { condition, .. }) => assert!(condition < 1e-9),
            other => panic!("expected DegenerateFrame, got {other:?}"),
        }
    }

    #[test]
    fn block_dimensions() {
        let cfg = PreprocessConfig::default();
        let trial = generic_trial(60);
        let local = local_features(&trial, &cfg).unwrap();
        let global = global_features(&trial, &cfg).unwrap();
        assert_eq!(local.features.len(), 12);
        assert_eq!(global.features.len(), 4);
        assert_eq!(local.flattened().len(), 1200);
        assert_eq!(global.flattened().len(), 400);
        let k = assemble(&local, &global).unwrap();
        assert_eq!(k.flattened().len(), 1600);
        assert_eq!(&k.flattened()[..1200], &local.flattened()[..]);
        assert!(k.flattened().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn assemble_rejects_mismatched_trials() {
        let cfg = PreprocessConfig::default();
        let a = generic_trial(40);
        let mut b = generic_trial(40);
        b.trial_id = "other".into();
        let local = local_features(&a, &cfg).unwrap();
        let global = global_features(&b, &cfg).unwrap();
        assert!(assemble(&local, &global).is_err());
    }

    #[test]
    fn rigid_motion_invariance() {
        let cfg = PreprocessConfig::default();
        let trial = generic_trial(50);
        let rot = Rotation3::from_euler_angles(0.3, 0.7, -0.2);
        let shift = Vector3::new(40.0, -25.0, 50.0);
        let moved = trial.transformed(&rot, &shift);

        let l0 = local_features(&trial, &cfg).unwrap().flattened();
        let l1 = local_features(&moved, &cfg).unwrap().flattened();
        for (a, b) in l0.iter().zip(l1.iter()) {
            assert!((a - b).abs() < 1e-6, "local feature changed: {a} vs {b}");
        }

        let a0 = grip_aperture(&trial).unwrap();
        let a1 = grip_aperture(&moved).unwrap();
        for (a, b) in a0.iter().zip(a1.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn translation_shifts_height_only() {
        let cfg = PreprocessConfig::default();
        let trial = generic_trial(50);
        let moved = trial.transformed(&Rotation3::identity(), &Vector3::new(0.0, 0.0, 50.0));
        let g0 = global_features(&trial, &cfg).unwrap();
        let g1 = global_features(&moved, &cfg).unwrap();
        for (f0, f1) in g0.features.iter().zip(g1.features.iter()) {
            for (a, b) in f0.1.iter().zip(f1.1.iter()) {
                let expect = if f0.0 == "wrist_height" { 50.0 } else { 0.0 };
                assert_relative_eq!(b - a, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn feature_blocks_are_deterministic() {
        let cfg = PreprocessConfig::default();
        let trial = generic_trial(45);
        let k1 = feature_block(&trial, BlockKind::K, &cfg).unwrap();
        let k2 = feature_block(&trial, BlockKind::K, &cfg).unwrap();
        assert_eq!(k1.flattened(), k2.flattened());
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..16).map(|d| rng.random::<f64>() * (d + 1) as f64).collect())
            .collect();
        let st = Standardizer::fit(&data).unwrap();
        let z: Vec<Vec<f64>> = data.iter().map(|v| st.transform(v)).collect();
        for d in 0..16 {
            let mean: f64 = z.iter().map(|v| v[d]).sum::<f64>() / z.len() as f64;
            let var: f64 = z.iter().map(|v| v[d] * v[d]).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "dim {d} var {var}");
        }
    }
}
