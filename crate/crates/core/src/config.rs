//! Run configuration: one strongly-typed document holding every geometry
//! constant, tolerance, hyperparameter and path the pipeline consumes.
//!
//! Two presets exist: `desk` (128x128 halves, d=16, small budgets — the
//! default everything is tested at) and `paper` (360x232 halves at 2 mm/px,
//! d=64, 500 episodes, 20 trials). A config file selects a preset and
//! overlays individual keys; unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown preset {0:?} (expected \"desk\" or \"paper\")")]
    UnknownPreset(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One convolution block of the fully-convolutional trunk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub residual: bool,
}

/// Trunk architecture shared by all three heads (head width differs).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub blocks: Vec<BlockConfig>,
}

impl NetworkConfig {
    pub fn dilated_residual_default() -> Self {
        let ch = [16, 16, 32, 32, 32, 32];
        let dil = [1, 1, 2, 2, 4, 4];
        let blocks = ch
            .iter()
            .zip(dil.iter())
            .enumerate()
            .map(|(i, (&channels, &dilation))| BlockConfig {
                channels,
                kernel: 3,
                dilation,
                residual: i > 0 && ch[i - 1] == channels,
            })
            .collect();
        NetworkConfig {
            in_channels: 2,
            blocks,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Gradient steps per affordance head (suction, place).
    pub affordance_steps: usize,
    /// Gradient steps for the matching head.
    pub match_steps: usize,
    /// Contrastive margin M.
    pub margin: f64,
    /// Radius (px) of the positive disk painted around affordance labels.
    pub positive_radius_px: usize,
    /// Sampled negatives per positive pixel for affordance training.
    pub negative_ratio: usize,
    /// Match pairs consumed per matching sample.
    pub match_pairs: usize,
    /// Non-match pairs sampled per matching sample.
    pub match_nonmatches: usize,
    /// Wrong rotation bins forwarded per matching step (non-match source).
    pub wrong_rotations_per_step: usize,
    /// Include recorded failed-suction pixels in the offline suction set.
    pub use_failed_suction_negatives: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    /// Training mode: kit pose is the identity every call.
    pub kit_fixed: bool,
    /// Kit orientation sampling half-range, degrees.
    pub kit_theta_max_deg: f64,
    /// Object orientation sampling half-range, degrees.
    pub obj_theta_max_deg: f64,
    /// Rejection-sampling attempts before a generation error.
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    /// Cavity shape radius, meters.
    pub shape_radius_m: f64,
    /// Radial roughness of generated blobs in [0, 1].
    pub roughness: f64,
    /// Vertex count range for generated blobs.
    pub min_vertices: usize,
    pub max_vertices: usize,
    /// Board wall thickness around the cavity bounding box, meters.
    pub wall_m: f64,
    /// Board slab height, meters (per layer for layered kits).
    pub board_height_m: f64,
    /// Seed offset separating train kits from held-out (novel) kits.
    pub test_seed_offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CollectConfig {
    /// Disassembly episodes per kit.
    pub episodes_per_kit: usize,
    /// Failed-suction budget per episode before it is flagged incomplete.
    pub retry_budget: usize,
    /// Height change (meters) that counts as a differencing mask hit.
    pub diff_height_m: f64,
    /// Abort threshold on the incomplete-episode fraction.
    pub max_incomplete_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    /// Candidates kept per affordance map.
    pub top_k: usize,
    /// Non-max suppression radius, px.
    pub nms_radius_px: f64,
    /// Upper bound on planned steps per sequence.
    pub max_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Square descriptor patch side, px (odd).
    pub patch_px: usize,
    /// Binary intensity comparisons per descriptor.
    pub descriptor_bits: usize,
    /// Keypoints kept per image.
    pub max_keypoints: usize,
    /// RANSAC hypothesis count.
    pub ransac_iters: usize,
    /// RANSAC inlier tolerance, px.
    pub inlier_tol_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Trials per kit in the success-rate suites.
    pub trials_per_kit: usize,
    /// Held-out sequences per kit in the ADD/AUC benchmark.
    pub benchmark_sequences: usize,
    /// Maximum ADD threshold for the accuracy curve, meters.
    pub tau_max_m: f64,
    /// Half-width of the 180-degree flip detection band, degrees.
    pub flip_band_deg: f64,
    /// Place failed objects at ground truth and continue (multi-object kits).
    pub intervene: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub kits_dir: PathBuf,
    pub episodes_dir: PathBuf,
    pub datasets_dir: PathBuf,
    pub checkpoints_dir: PathBuf,
    pub models_dir: PathBuf,
    pub reports_dir: PathBuf,
}

/// The complete run configuration. See module docs for preset semantics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Half-image height and width, px.
    pub half_extent_px: [usize; 2],
    /// Heightmap resolution, meters per pixel.
    pub pixel_size: f64,
    /// Shape mask resolution, meters per pixel (finer than the heightmap).
    pub shape_pixel_size: f64,
    /// Grayscale value rendered for bare table pixels.
    pub table_gray: f64,
    /// Rotation bins R of the kit rotation stack.
    pub rotation_bins: usize,
    /// Descriptor dimension d of the matching head.
    pub descriptor_dim: usize,
    /// Object-cavity clearance, shape-mask px.
    pub clearance_px: usize,
    /// Placement containment tolerance, shape-mask px.
    pub fit_tol_px: usize,
    /// Suction mask erosion, shape-mask px.
    pub suction_margin_px: usize,
    /// Minimum cavity coverage fraction for a fit.
    pub fit_coverage: f64,
    /// Self-IoU threshold of the rotational symmetry detector.
    pub symmetry_iou: f64,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub scatter: ScatterConfig,
    pub gen: GenConfig,
    pub collect: CollectConfig,
    pub plan: PlanConfig,
    pub baseline: BaselineConfig,
    pub eval: EvalConfig,
    /// Master seed; every stream derives from it. `F2F_SEED` overrides.
    pub seed: u64,
    /// Worker threads for episode/trial/rotation parallelism.
    pub jobs: usize,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            half_extent_px: [128, 128],
            pixel_size: 0.004,
            shape_pixel_size: 0.002,
            table_gray: 0.25,
            rotation_bins: 20,
            descriptor_dim: 16,
            clearance_px: 1,
            fit_tol_px: 1,
            suction_margin_px: 1,
            fit_coverage: 0.9,
            symmetry_iou: 0.97,
            network: NetworkConfig::dilated_residual_default(),
            train: TrainConfig {
                learning_rate: 1e-3,
                affordance_steps: 2000,
                match_steps: 2000,
                margin: 0.5,
                positive_radius_px: 2,
                negative_ratio: 8,
                match_pairs: 128,
                match_nonmatches: 512,
                wrong_rotations_per_step: 2,
                use_failed_suction_negatives: true,
            },
            scatter: ScatterConfig {
                kit_fixed: false,
                kit_theta_max_deg: 120.0,
                obj_theta_max_deg: 180.0,
                max_attempts: 1000,
            },
            gen: GenConfig {
                shape_radius_m: 0.046,
                roughness: 0.22,
                min_vertices: 10,
                max_vertices: 18,
                wall_m: 0.036,
                board_height_m: 0.024,
                test_seed_offset: 10_000,
            },
            collect: CollectConfig {
                episodes_per_kit: 50,
                retry_budget: 25,
                diff_height_m: 0.002,
                max_incomplete_fraction: 0.2,
            },
            plan: PlanConfig {
                top_k: 5,
                nms_radius_px: 4.0,
                max_steps: 12,
            },
            baseline: BaselineConfig {
                patch_px: 15,
                descriptor_bits: 256,
                max_keypoints: 120,
                ransac_iters: 500,
                inlier_tol_px: 2.0,
            },
            eval: EvalConfig {
                trials_per_kit: 8,
                benchmark_sequences: 10,
                tau_max_m: 0.1,
                flip_band_deg: 9.0,
                intervene: true,
            },
            seed: 1,
            jobs: 0,
            paths: PathsConfig {
                kits_dir: "runs/kits".into(),
                episodes_dir: "runs/episodes".into(),
                datasets_dir: "runs/datasets".into(),
                checkpoints_dir: "runs/checkpoints".into(),
                models_dir: "runs/models".into(),
                reports_dir: "runs/reports".into(),
            },
        }
    }

    pub fn paper() -> Self {
        let mut c = Self::desk();
        c.half_extent_px = [360, 232];
        c.pixel_size = 0.002;
        c.shape_pixel_size = 0.001;
        c.descriptor_dim = 64;
        c.train.affordance_steps = 20_000;
        c.train.match_steps = 20_000;
        c.collect.episodes_per_kit = 500;
        c.collect.diff_height_m = 0.001;
        c.eval.trials_per_kit = 20;
        c.eval.benchmark_sequences = 25;
        c
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    /// Load a config file: `{"preset": "desk", ...overrides}`. Overrides are
    /// deep-merged onto the preset; unknown keys anywhere are an error.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let mut doc: serde_json::Value = serde_json::from_str(text)?;
        let preset = match &mut doc {
            serde_json::Value::Object(map) => match map.remove("preset") {
                Some(serde_json::Value::String(s)) => Self::preset(&s)?,
                Some(v) => {
                    return Err(ConfigError::Invalid(format!(
                        "preset must be a string, got {v}"
                    )))
                }
                None => Self::desk(),
            },
            _ => return Err(ConfigError::Invalid("config root must be an object".into())),
        };
        let mut base = serde_json::to_value(&preset).expect("config serializes");
        deep_merge(&mut base, doc);
        let cfg: RunConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.half_extent_px[0] == 0 || self.half_extent_px[1] == 0 {
            return Err(ConfigError::Invalid("half_extent_px must be nonzero".into()));
        }
        if self.rotation_bins == 0 {
            return Err(ConfigError::Invalid("rotation_bins must be >= 1".into()));
        }
        if !(self.pixel_size > 0.0 && self.shape_pixel_size > 0.0) {
            return Err(ConfigError::Invalid("pixel sizes must be positive".into()));
        }
        if self.plan.top_k == 0 {
            return Err(ConfigError::Invalid("plan.top_k must be >= 1".into()));
        }
        Ok(())
    }

    /// Half-image extent in meters: (height, width).
    pub fn half_extent_m(&self) -> (f64, f64) {
        (
            self.half_extent_px[0] as f64 * self.pixel_size,
            self.half_extent_px[1] as f64 * self.pixel_size,
        )
    }

    /// Stable 64-bit hash of the keys a checkpoint must agree on.
    pub fn compat_hash(&self) -> u64 {
        #[derive(Serialize)]
        struct Compat<'a> {
            network: &'a NetworkConfig,
            descriptor_dim: usize,
            rotation_bins: usize,
            in_extent: [usize; 2],
        }
        let doc = serde_json::to_string(&Compat {
            network: &self.network,
            descriptor_dim: self.descriptor_dim,
            rotation_bins: self.rotation_bins,
            in_extent: self.half_extent_px,
        })
        .expect("compat serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in doc.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

fn deep_merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        // unknown key: keep it so final deserialization rejects it
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// (json pointer, default in the desk preset, consuming module) for every
/// leaf key. `cli --help` prints this table; a test pins it to the struct.
pub fn key_docs() -> Vec<(String, String, &'static str)> {
    let desk = serde_json::to_value(RunConfig::desk()).expect("serializes");
    let mut out = Vec::new();
    flatten("", &desk, &mut out);
    out.into_iter()
        .map(|(k, v)| {
            let module = match k.split('/').next().unwrap_or("") {
                "half_extent_px" | "pixel_size" | "table_gray" => "render",
                "shape_pixel_size" | "clearance_px" | "symmetry_iou" | "gen" => "scene",
                "rotation_bins" => "render/plan",
                "descriptor_dim" | "network" | "train" => "learn",
                "fit_tol_px" | "suction_margin_px" | "fit_coverage" => "sim",
                "scatter" => "scene",
                "collect" => "collect",
                "plan" => "plan",
                "baseline" => "baseline",
                "eval" => "eval",
                "seed" | "jobs" | "paths" => "cli",
                _ => "cli",
            };
            (k, v, module)
        })
        .collect()
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, val) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}/{k}")
                };
                flatten(&key, val, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        RunConfig::desk().validate().unwrap();
        RunConfig::paper().validate().unwrap();
        assert_eq!(RunConfig::desk().half_extent_m(), (0.512, 0.512));
        assert_eq!(RunConfig::paper().half_extent_px, [360, 232]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json_str(r#"{"preset":"desk","fit_tolerance":2}"#);
        assert!(err.is_err(), "typo key must be rejected");
        let err = RunConfig::from_json_str(r#"{"train":{"margni":0.4}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn overrides_merge() {
        let c =
            RunConfig::from_json_str(r#"{"preset":"paper","train":{"margin":0.75}}"#).unwrap();
        assert_eq!(c.train.margin, 0.75);
        assert_eq!(c.descriptor_dim, 64);
        assert_eq!(c.collect.episodes_per_kit, 500);
    }

    #[test]
    fn key_docs_cover_every_leaf() {
        let docs = key_docs();
        assert!(docs.iter().any(|(k, _, _)| k == "train/margin"));
        assert!(docs.iter().any(|(k, _, _)| k == "fit_tol_px"));
        // count matches an independent flatten of the serialized struct
        let desk = serde_json::to_value(RunConfig::desk()).unwrap();
        let mut leaves = Vec::new();
        flatten("", &desk, &mut leaves);
        assert_eq!(docs.len(), leaves.len());
    }

    #[test]
    fn compat_hash_tracks_network_changes() {
        let a = RunConfig::desk();
        let mut b = RunConfig::desk();
        b.descriptor_dim = 32;
        assert_ne!(a.compat_hash(), b.compat_hash());
        assert_eq!(a.compat_hash(), RunConfig::desk().compat_hash());
    }
}
