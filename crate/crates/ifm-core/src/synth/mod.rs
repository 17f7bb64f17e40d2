//! Synthetic reach-to-grasp dataset generator: a rigid 20-marker hand
//! template riding a minimum-jerk wrist path, with articulated thumb/index
//! digits driven by a scripted grip aperture, intention-dependent late
//! modulations, per-subject bias, and marker jitter. Ground truth for every
//! scripted quantity is recorded alongside each trial.

pub mod render;

use nalgebra::{Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IfmError, Result};
use crate::preprocess::speed_of;
use crate::trial::{Intention, Trial, MARKER_NAMES};

pub use render::{render_flow, RenderedVideo, ViewConfig};

/// Per-intention modulation amplitudes, applied in the late reach phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionEffect {
    /// Extra grip aperture at grasp, mm.
    pub aperture_mm: f64,
    /// Extra wrist height (world z) on approach, mm.
    pub height_mm: f64,
    /// Lateral (world x) deviation on approach, mm.
    pub lateral_mm: f64,
}

impl IntentionEffect {
    pub const ZERO: IntentionEffect = IntentionEffect {
        aperture_mm: 0.0,
        height_mm: 0.0,
        lateral_mm: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_intention: usize,
    /// Reach duration range in samples (inclusive).
    pub duration_samples: (usize, usize),
    /// Quiescent padding before and after the reach, samples (inclusive ranges).
    pub lead_in_samples: (usize, usize),
    pub lead_out_samples: (usize, usize),
    pub sample_rate_hz: f64,
    /// Start-to-bottle distance along world y, mm.
    pub reach_distance_mm: f64,
    /// Mid-reach arc height of the wrist path, mm.
    pub arc_height_mm: f64,
    /// Grip aperture at rest / grasp before modulation, mm.
    pub aperture_base_mm: f64,
    /// Extra mid-reach aperture opening, mm.
    pub aperture_peak_mm: f64,
    /// Late-phase modulation per intention, in `Intention::ALL` order.
    pub intention_effect: [IntentionEffect; 4],
    /// Fraction of the reach over which the modulation ramps in.
    pub late_fraction: f64,
    /// Per-subject additive bias on each effect channel, standard deviation, mm.
    pub subject_bias_sd: f64,
    /// I.i.d. Gaussian marker jitter, mm.
    pub noise_sd_mm: f64,
    /// Probability of a trial being discarded as imprecise.
    pub rejection_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 17,
            trials_per_intention: 20,
            duration_samples: (80, 120),
            lead_in_samples: (20, 40),
            lead_out_samples: (15, 30),
            sample_rate_hz: 100.0,
            reach_distance_mm: 460.0,
            arc_height_mm: 50.0,
            aperture_base_mm: 35.0,
            aperture_peak_mm: 45.0,
            intention_effect: Self::late_divergence_effects(),
            late_fraction: 0.3,
            subject_bias_sd: 5.0,
            noise_sd_mm: 0.15,
            rejection_rate: 0.05,
            seed: 20,
        }
    }
}

impl SynthConfig {
    /// The default preset: intentions diverge in the final phase of the
    /// reach, most strongly in approach height and grip aperture.
    pub fn late_divergence_effects() -> [IntentionEffect; 4] {
        [
            // Pouring
            IntentionEffect {
                aperture_mm: 10.0,
                height_mm: 15.0,
                lateral_mm: -18.0,
            },
            // Passing
            IntentionEffect {
                aperture_mm: 3.0,
                height_mm: 34.0,
                lateral_mm: 22.0,
            },
            // Drinking
            IntentionEffect {
                aperture_mm: 24.0,
                height_mm: 48.0,
                lateral_mm: 6.0,
            },
            // Placing
            IntentionEffect {
                aperture_mm: 0.0,
                height_mm: 0.0,
                lateral_mm: -6.0,
            },
        ]
    }

    /// All intention effects zeroed: classifier performance must be chance.
    pub fn null_effect(mut self) -> Self {
        self.intention_effect = [IntentionEffect::ZERO; 4];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.trials_per_intention == 0 {
            return Err(IfmError::config("subject and trial counts must be positive"));
        }
        if self.duration_samples.0 < 10 || self.duration_samples.0 > self.duration_samples.1 {
            return Err(IfmError::config("invalid duration range"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(IfmError::config("sample_rate_hz must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rejection_rate) {
            return Err(IfmError::config("rejection_rate must lie in [0, 1]"));
        }
        if !(self.late_fraction > 0.0 && self.late_fraction < 1.0) {
            return Err(IfmError::config("late_fraction must lie in (0, 1)"));
        }
        if self.noise_sd_mm < 0.0 || self.subject_bias_sd < 0.0 {
            return Err(IfmError::config("noise scales must be nonnegative"));
        }
        Ok(())
    }
}

/// Oracle record for one generated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trial_id: String,
    /// First raw sample where the noise-free wrist speed exceeds epsilon.
    pub onset: usize,
    /// First raw sample after onset where the noise-free speed drops back.
    pub offset: usize,
    /// Scripted thumb-index aperture per raw sample, exact at zero noise.
    pub aperture_script: Vec<f64>,
    /// Scripted local-frame thumb-tip coordinates per raw sample.
    pub local_thumb: Vec<[f64; 3]>,
    /// Effect actually applied (intention effect plus subject bias).
    pub effect_applied: IntentionEffect,
    pub lead_in: usize,
    pub duration: usize,
    pub lead_out: usize,
}

/// Minimum-jerk point-to-point path: zero velocity and acceleration at both
/// endpoints, sampled at `t_samples` points.
pub fn minimum_jerk(start: Point3<f64>, end: Point3<f64>, t_samples: usize) -> Result<Vec<Point3<f64>>> {
    if t_samples < 2 {
        return Err(IfmError::config("minimum_jerk needs at least 2 samples"));
    }
    let delta = end - start;
    Ok((0..t_samples)
        .map(|k| {
            let tau = k as f64 / (t_samples - 1) as f64;
            start + delta * min_jerk_s(tau)
        })
        .collect())
}

#[inline]
pub fn min_jerk_s(tau: f64) -> f64 {
    let t3 = tau * tau * tau;
    10.0 * t3 - 15.0 * t3 * tau + 6.0 * t3 * tau * tau
}

/// Smoothstep ramp used for the late-phase modulation: 0 before `tau0`,
/// 1 from `tau1` on.
fn late_ramp(tau: f64, tau0: f64, tau1: f64) -> f64 {
    let u = ((tau - tau0) / (tau1 - tau0)).clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Hand template: marker offsets from the wrist in the hand frame
/// (x radial toward the thumb, y distal toward the fingers, z dorsal), mm.
fn template_offset(name: &str) -> Vector3<f64> {
    match name {
        "wrist" => Vector3::new(0.0, 0.0, 0.0),
        "radius_styloid" => Vector3::new(25.0, -5.0, 0.0),
        "ulna_styloid" => Vector3::new(-25.0, -8.0, 0.0),
        "hand_dorsum_base" => Vector3::new(5.0, 30.0, 12.0),
        "hand_dorsum_radial" => Vector3::new(25.0, 45.0, 10.0),
        "hand_dorsum_ulnar" => Vector3::new(-18.0, 48.0, 8.0),
        "thumb_tip" => Vector3::new(58.0, 70.0, -8.0),
        "thumb_ip" => Vector3::new(52.0, 55.0, -6.0),
        "thumb_mcp" => Vector3::new(45.0, 38.0, -5.0),
        "thumb_cmc" => Vector3::new(32.0, 18.0, -2.0),
        "index_tip" => Vector3::new(26.0, 118.0, 0.0),
        "index_dip" => Vector3::new(25.0, 108.0, 2.0),
        "index_pip" => Vector3::new(24.0, 95.0, 4.0),
        "index_phalanx_prox" => Vector3::new(22.0, 78.0, 6.0),
        "middle_tip" => Vector3::new(0.0, 125.0, 0.0),
        "middle_mcp" => Vector3::new(2.0, 80.0, 8.0),
        "ring_tip" => Vector3::new(-20.0, 115.0, -2.0),
        "ring_mcp" => Vector3::new(-16.0, 76.0, 6.0),
        "little_tip" => Vector3::new(-36.0, 100.0, -6.0),
        "little_mcp" => Vector3::new(-30.0, 70.0, 2.0),
        other => unreachable!("unknown marker {other}"),
    }
}

/// How strongly each articulated marker follows its digit tip.
fn chain_factor(name: &str) -> Option<(&'static str, f64)> {
    match name {
        "thumb_ip" => Some(("thumb_tip", 0.6)),
        "thumb_mcp" => Some(("thumb_tip", 0.25)),
        "index_dip" => Some(("index_tip", 0.65)),
        "index_pip" => Some(("index_tip", 0.35)),
        "index_phalanx_prox" => Some(("index_tip", 0.15)),
        _ => None,
    }
}

/// Per-subject generation profile.
#[derive(Debug, Clone)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub bias: IntentionEffect,
    /// Fixed yaw of the hand at rest, radians.
    pub yaw: f64,
    /// Duration multiplier.
    pub tempo: f64,
    /// Start-position offset, mm.
    pub start_offset: Vector3<f64>,
}

fn stream_seed(master: u64, tag: &str, a: u64, b: u64, c: u64) -> u64 {
    // FNV-1a over the tag, then splitmix64 over the indices.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    for x in [a, b, c] {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

pub fn subject_profile(cfg: &SynthConfig, subject_idx: usize) -> SubjectProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
        cfg.seed,
        "subject",
        subject_idx as u64,
        0,
        0,
    ));
    let normal = Normal::new(0.0, cfg.subject_bias_sd.max(f64::MIN_POSITIVE)).unwrap();
    let bias = if cfg.subject_bias_sd > 0.0 {
        IntentionEffect {
            aperture_mm: normal.sample(&mut rng),
            height_mm: normal.sample(&mut rng),
            lateral_mm: normal.sample(&mut rng),
        }
    } else {
        // Keep the rng draw count stable across configurations.
        let _ = (
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        );
        IntentionEffect::ZERO
    };
    SubjectProfile {
        subject_id: format!("S{:02}", subject_idx + 1),
        bias,
        yaw: rng.random_range(-0.1..0.1),
        tempo: rng.random_range(0.9..1.1),
        start_offset: Vector3::new(
            rng.random_range(-15.0..15.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-8.0..8.0),
        ),
    }
}

/// Generates one trial plus its ground truth. Trial-level randomness
/// (duration, padding) is drawn independently of the intention so that a
/// null-effect configuration at zero noise yields identical trials for all
/// four intentions.
pub fn synth_trial(
    intention: Intention,
    subject: &SubjectProfile,
    subject_idx: usize,
    trial_idx: usize,
    cfg: &SynthConfig,
) -> Result<(Trial, GroundTruth)> {
    cfg.validate()?;
    let mut trial_rng = ChaCha8Rng::seed_from_u64(stream_seed(
        cfg.seed,
        "trial",
        subject_idx as u64,
        trial_idx as u64,
        0,
    ));
    let dur_range = (
        (cfg.duration_samples.0 as f64 * subject.tempo).round() as usize,
        (cfg.duration_samples.1 as f64 * subject.tempo).round() as usize,
    );
    let duration = trial_rng.random_range(dur_range.0..=dur_range.1).max(10);
    let lead_in = trial_rng.random_range(cfg.lead_in_samples.0..=cfg.lead_in_samples.1);
    let lead_out = trial_rng.random_range(cfg.lead_out_samples.0..=cfg.lead_out_samples.1);
    let start_jitter = Vector3::new(
        trial_rng.random_range(-5.0..5.0),
        trial_rng.random_range(-5.0..5.0),
        trial_rng.random_range(-3.0..3.0),
    );

    let effect_base = cfg.intention_effect[intention.index()];
    let effect = IntentionEffect {
        aperture_mm: effect_base.aperture_mm + subject.bias.aperture_mm,
        height_mm: effect_base.height_mm + subject.bias.height_mm,
        lateral_mm: effect_base.lateral_mm + subject.bias.lateral_mm,
    };

    let start = Point3::new(0.0, 0.0, 120.0) + subject.start_offset + start_jitter;
    let reach = Vector3::new(0.0, cfg.reach_distance_mm, 0.0);
    let tau0 = 1.0 - cfg.late_fraction;
    let tau1 = 1.0 - 0.1 * cfg.late_fraction;

    let total = lead_in + duration + lead_out;
    let template_thumb = template_offset("thumb_tip");
    let template_index = template_offset("index_tip");
    let open_mid = (template_thumb + template_index) / 2.0;
    let open_dir = (template_index - template_thumb).normalize();

    // Scripted quantities per raw sample.
    let mut aperture_script = Vec::with_capacity(total);
    let mut clean: Vec<Vec<Point3<f64>>> = vec![Vec::with_capacity(total); MARKER_NAMES.len()];
    let mut local_thumb = Vec::with_capacity(total);

    for t in 0..total {
        let tau = if t < lead_in {
            0.0
        } else if t < lead_in + duration {
            (t - lead_in) as f64 / (duration - 1) as f64
        } else {
            1.0
        };
        let s = min_jerk_s(tau);
        let w = late_ramp(tau, tau0, tau1);

        let wrist = start
            + reach * s
            + Vector3::new(
                effect.lateral_mm * w,
                0.0,
                cfg.arc_height_mm * (std::f64::consts::PI * tau).sin() + effect.height_mm * w,
            );
        // Slight pronation over the reach plus the subject's resting yaw.
        let rot = Rotation3::from_euler_angles(0.12 * s, 0.0, subject.yaw);

        let aperture = cfg.aperture_base_mm
            + cfg.aperture_peak_mm * (std::f64::consts::PI * tau).sin()
            + effect.aperture_mm * w;
        aperture_script.push(aperture);

        // Articulated digit tips in the hand frame: exact scripted aperture.
        let thumb_h = open_mid - open_dir * (aperture / 2.0);
        let index_h = open_mid + open_dir * (aperture / 2.0);
        let d_thumb = thumb_h - template_thumb;
        let d_index = index_h - template_index;

        for (m, &name) in MARKER_NAMES.iter().enumerate() {
            let offset_h = match name {
                "thumb_tip" => thumb_h,
                "index_tip" => index_h,
                _ => match chain_factor(name) {
                    Some(("thumb_tip", f)) => template_offset(name) + d_thumb * f,
                    Some((_, f)) => template_offset(name) + d_index * f,
                    None => template_offset(name),
                },
            };
            clean[m].push(wrist + rot * offset_h);
        }

        // Scripted local-frame thumb coordinates from the rigid dorsum
        // template (rotation and translation cancel by construction).
        let m1 = template_offset("hand_dorsum_base");
        let m2 = template_offset("hand_dorsum_radial");
        let m3 = template_offset("hand_dorsum_ulnar");
        let frame = crate::kinfeat::frame_from_markers(
            &Point3::from(m1),
            &Point3::from(m2),
            &Point3::from(m3),
            t,
        )?;
        let v = frame.axes * (thumb_h - m1);
        local_thumb.push([v.x, v.y, v.z]);
    }

    // Ground-truth onset/offset from the noise-free wrist speed.
    let wrist_idx = crate::trial::marker_index("wrist").unwrap();
    let clean_speed = speed_of(&clean[wrist_idx], cfg.sample_rate_hz);
    let epsilon = 20.0;
    let onset = clean_speed
        .iter()
        .position(|&v| v > epsilon)
        .unwrap_or(lead_in);
    let offset = clean_speed[onset..]
        .iter()
        .position(|&v| v < epsilon)
        .map(|o| onset + o)
        .unwrap_or(total);

    // Marker jitter, seeded per (subject, intention, trial).
    let mut markers = clean;
    if cfg.noise_sd_mm > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(stream_seed(
            cfg.seed,
            "noise",
            subject_idx as u64,
            intention.index() as u64,
            trial_idx as u64,
        ));
        let normal = Normal::new(0.0, cfg.noise_sd_mm).unwrap();
        for seq in &mut markers {
            for p in seq.iter_mut() {
                p.x += normal.sample(&mut noise_rng);
                p.y += normal.sample(&mut noise_rng);
                p.z += normal.sample(&mut noise_rng);
            }
        }
    }

    let trial_id = format!("{}_{}_{:02}", subject.subject_id, intention.as_str(), trial_idx);
    let trial = Trial::new(
        trial_id.clone(),
        subject.subject_id.clone(),
        intention,
        cfg.sample_rate_hz,
        markers,
    )?;
    let truth = GroundTruth {
        trial_id,
        onset,
        offset,
        aperture_script,
        local_thumb,
        effect_applied: effect,
        lead_in,
        duration,
        lead_out,
    };
    Ok((trial, truth))
}

/// A fully generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub trials: Vec<Trial>,
    pub ground_truth: Vec<GroundTruth>,
}

/// Generates the full dataset: `n_subjects x 4 intentions x trials_per_intention`
/// minus rejected trials. Deterministic for a fixed seed.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut trials = Vec::new();
    let mut ground_truth = Vec::new();
    for s in 0..cfg.n_subjects {
        let profile = subject_profile(cfg, s);
        for &intention in &Intention::ALL {
            for t in 0..cfg.trials_per_intention {
                let mut reject_rng = ChaCha8Rng::seed_from_u64(stream_seed(
                    cfg.seed,
                    "reject",
                    s as u64,
                    intention.index() as u64,
                    t as u64,
                ));
                if reject_rng.random::<f64>() < cfg.rejection_rate {
                    continue;
                }
                let (trial, truth) = synth_trial(intention, &profile, s, t, cfg)?;
                trials.push(trial);
                ground_truth.push(truth);
            }
        }
    }
    Ok(SynthDataset {
        trials,
        ground_truth,
    })
}
