//! Episode records and their on-disk layout:
//! `episodes/<kit_id>/<seed>/step_<k>/{before_kit,before_obj,after_kit,after_obj}.f2f`
//! plus a `meta.json` per step and an `episode.json` per trajectory.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::CollectError;
use crate::mask::{Mask, MaskRle};
use crate::render::Heightmap;
use crate::scene::Pose2;

pub const STEP_FORMAT: &str = "f2f-episode-step";
pub const EPISODE_FORMAT: &str = "f2f-episode";
pub const FORMAT_VERSION: u32 = 1;

/// One disassembly step. For failed suctions only `p` and the images are
/// meaningful; `q`, `theta` are absent and the masks empty.
#[derive(Debug, Clone)]
pub struct EpisodeStep {
    pub before_kit: Heightmap,
    pub before_obj: Heightmap,
    pub after_kit: Heightmap,
    pub after_obj: Heightmap,
    /// Suction point, world meters.
    pub p: (f64, f64),
    /// Place point (grasp-point target), world meters.
    pub q: Option<(f64, f64)>,
    /// Commanded place rotation, radians (stack convention: world change
    /// is `-theta`).
    pub theta: Option<f64>,
    pub suction_success: bool,
    /// Silhouette the object vacated, in `before_kit` pixels.
    pub object_mask_kit: Mask,
    /// Silhouette where it landed, in `after_obj` pixels.
    pub object_mask_table: Mask,
    /// Which object the step moved.
    pub object_index: Option<usize>,
    /// Ground-truth world poses around the step (benchmark metadata).
    pub gt_pose_before: Option<Pose2>,
    pub gt_pose_after: Option<Pose2>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub kit_id: String,
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    pub complete: bool,
}

impl Episode {
    pub fn successful_steps(&self) -> impl Iterator<Item = &EpisodeStep> {
        self.steps.iter().filter(|s| s.suction_success)
    }
}

#[derive(Serialize, Deserialize)]
struct StepMeta {
    format: String,
    version: u32,
    p: [f64; 2],
    q: Option<[f64; 2]>,
    theta: Option<f64>,
    suction_success: bool,
    object_mask_kit: MaskRle,
    object_mask_table: MaskRle,
    object_index: Option<usize>,
    gt_pose_before: Option<[f64; 3]>,
    gt_pose_after: Option<[f64; 3]>,
    origin_kit: [f64; 2],
    origin_obj: [f64; 2],
    pixel_size: f64,
}

#[derive(Serialize, Deserialize)]
struct EpisodeMeta {
    format: String,
    version: u32,
    kit_id: String,
    seed: u64,
    steps: usize,
    complete: bool,
}

pub fn episode_dir(root: &Path, kit_id: &str, seed: u64) -> PathBuf {
    root.join(kit_id).join(seed.to_string())
}

pub fn save_episode(ep: &Episode, root: &Path) -> Result<(), CollectError> {
    let dir = episode_dir(root, &ep.kit_id, ep.seed);
    std::fs::create_dir_all(&dir)?;
    for (k, step) in ep.steps.iter().enumerate() {
        let sdir = dir.join(format!("step_{k}"));
        std::fs::create_dir_all(&sdir)?;
        step.before_kit.save(&sdir.join("before_kit.f2f"))?;
        step.before_obj.save(&sdir.join("before_obj.f2f"))?;
        step.after_kit.save(&sdir.join("after_kit.f2f"))?;
        step.after_obj.save(&sdir.join("after_obj.f2f"))?;
        let meta = StepMeta {
            format: STEP_FORMAT.to_string(),
            version: FORMAT_VERSION,
            p: [step.p.0, step.p.1],
            q: step.q.map(|q| [q.0, q.1]),
            theta: step.theta,
            suction_success: step.suction_success,
            object_mask_kit: step.object_mask_kit.to_rle(),
            object_mask_table: step.object_mask_table.to_rle(),
            object_index: step.object_index,
            gt_pose_before: step.gt_pose_before.map(|p| [p.x, p.y, p.theta]),
            gt_pose_after: step.gt_pose_after.map(|p| [p.x, p.y, p.theta]),
            origin_kit: [step.before_kit.origin.0, step.before_kit.origin.1],
            origin_obj: [step.before_obj.origin.0, step.before_obj.origin.1],
            pixel_size: step.before_kit.pixel_size,
        };
        std::fs::write(
            sdir.join("meta.json"),
            serde_json::to_string_pretty(&meta)?,
        )?;
    }
    let meta = EpisodeMeta {
        format: EPISODE_FORMAT.to_string(),
        version: FORMAT_VERSION,
        kit_id: ep.kit_id.clone(),
        seed: ep.seed,
        steps: ep.steps.len(),
        complete: ep.complete,
    };
    std::fs::write(
        dir.join("episode.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

pub fn load_episode(root: &Path, kit_id: &str, seed: u64) -> Result<Episode, CollectError> {
    let dir = episode_dir(root, kit_id, seed);
    let meta: EpisodeMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("episode.json"))?)?;
    if meta.format != EPISODE_FORMAT || meta.version != FORMAT_VERSION {
        return Err(CollectError::Format(format!(
            "{}: not an episode dir",
            dir.display()
        )));
    }
    let mut steps = Vec::with_capacity(meta.steps);
    for k in 0..meta.steps {
        let sdir = dir.join(format!("step_{k}"));
        let sm: StepMeta =
            serde_json::from_str(&std::fs::read_to_string(sdir.join("meta.json"))?)?;
        if sm.format != STEP_FORMAT || sm.version != FORMAT_VERSION {
            return Err(CollectError::Format(format!(
                "{}: bad step meta",
                sdir.display()
            )));
        }
        let ok = (sm.origin_kit[0], sm.origin_kit[1]);
        let oo = (sm.origin_obj[0], sm.origin_obj[1]);
        let ps = sm.pixel_size;
        steps.push(EpisodeStep {
            before_kit: Heightmap::load(&sdir.join("before_kit.f2f"), ok, ps)?,
            before_obj: Heightmap::load(&sdir.join("before_obj.f2f"), oo, ps)?,
            after_kit: Heightmap::load(&sdir.join("after_kit.f2f"), ok, ps)?,
            after_obj: Heightmap::load(&sdir.join("after_obj.f2f"), oo, ps)?,
            p: (sm.p[0], sm.p[1]),
            q: sm.q.map(|q| (q[0], q[1])),
            theta: sm.theta,
            suction_success: sm.suction_success,
            object_mask_kit: Mask::from_rle(&sm.object_mask_kit)
                .map_err(CollectError::Format)?,
            object_mask_table: Mask::from_rle(&sm.object_mask_table)
                .map_err(CollectError::Format)?,
            object_index: sm.object_index,
            gt_pose_before: sm.gt_pose_before.map(|p| Pose2::new(p[0], p[1], p[2])),
            gt_pose_after: sm.gt_pose_after.map(|p| Pose2::new(p[0], p[1], p[2])),
        });
    }
    Ok(Episode {
        kit_id: meta.kit_id,
        seed: meta.seed,
        steps,
        complete: meta.complete,
    })
}
