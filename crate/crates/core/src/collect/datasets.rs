//! Compile episodes into the three training datasets. Dataset files are
//! single-file JSON indexes referencing episode files by (kit, seed, step).

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::episode::Episode;
use super::CollectError;
use crate::mask::{round_cell, Mask, MaskRle};
use crate::render::to_rotated_frame;
use crate::rng::stream;
use crate::scene::Pose2;
use rand::seq::SliceRandom;
use rand::Rng;

pub const DATASET_FORMAT: &str = "f2f-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    BeforeKit,
    BeforeObj,
    AfterKit,
    AfterObj,
}

/// Reference into the episode store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapRef {
    pub episode: usize,
    pub step: usize,
    pub map: MapKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuctionSample {
    pub image: MapRef,
    pub pixel: (usize, usize),
    pub positive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaceSample {
    pub image: MapRef,
    pub pixel: (usize, usize),
}

/// One matching-head sample: the empty-cavity kit image, the object image,
/// the ground-truth rotation bin and pixel correspondences expressed in
/// rotation frame `j_star` (where the residual map is a pure translation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchSample {
    pub kit_image: MapRef,
    pub obj_image: MapRef,
    pub j_star: usize,
    /// (kit pixel in rotated frame j*, object pixel).
    pub pairs: Vec<((usize, usize), (usize, usize))>,
    /// Vacated silhouette in the unrotated kit frame.
    pub cavity_mask: MaskRle,
    /// Object silhouette in the object frame.
    pub object_mask: MaskRle,
}

/// The world map an executed step applied to its object: grasp point `p`
/// moved to `q` with a CCW world rotation of `-theta` about it.
pub fn step_world_transform(p: (f64, f64), q: (f64, f64), theta: f64) -> Pose2 {
    let rot = -theta;
    let (s, c) = rot.sin_cos();
    Pose2::new(q.0 - (c * p.0 - s * p.1), q.1 - (s * p.0 + c * p.1), rot)
}

/// Nearest rotation bin of an executed step's world rotation.
pub fn rotation_bin(theta_cmd: f64, bins: usize) -> usize {
    let deg = (-theta_cmd).to_degrees().rem_euclid(360.0);
    let step = 360.0 / bins as f64;
    (((deg / step).round() as usize) % bins.max(1)) as usize
}

pub fn build_suction_dataset(episodes: &[Episode], seed: u64) -> Vec<SuctionSample> {
    let mut out = Vec::new();
    for (ei, ep) in episodes.iter().enumerate() {
        let mut rng = stream(seed, "suction-neg", ep.seed);
        for (si, step) in ep.steps.iter().enumerate() {
            let (pr, pc) = step.before_kit.world_to_pixel(step.p);
            if step.suction_success {
                if step.before_kit.in_bounds(pr, pc) {
                    out.push(SuctionSample {
                        image: MapRef {
                            episode: ei,
                            step: si,
                            map: MapKind::BeforeKit,
                        },
                        pixel: (pr as usize, pc as usize),
                        positive: true,
                    });
                }
                let q = step.q.expect("successful step has q");
                let (qr, qc) = step.after_obj.world_to_pixel(q);
                if step.after_obj.in_bounds(qr, qc) {
                    out.push(SuctionSample {
                        image: MapRef {
                            episode: ei,
                            step: si,
                            map: MapKind::AfterObj,
                        },
                        pixel: (qr as usize, qc as usize),
                        positive: true,
                    });
                }
                // a few background negatives per positive pair
                for (map, hm) in [
                    (MapKind::BeforeKit, &step.before_kit),
                    (MapKind::AfterObj, &step.after_obj),
                ] {
                    for _ in 0..2 {
                        for _try in 0..50 {
                            let r = rng.gen_range(0..hm.h);
                            let c = rng.gen_range(0..hm.w);
                            if hm.height[hm.idx(r, c)] == 0.0 {
                                out.push(SuctionSample {
                                    image: MapRef {
                                        episode: ei,
                                        step: si,
                                        map,
                                    },
                                    pixel: (r, c),
                                    positive: false,
                                });
                                break;
                            }
                        }
                    }
                }
            } else if step.before_kit.in_bounds(pr, pc) {
                // recorded failed suction
                out.push(SuctionSample {
                    image: MapRef {
                        episode: ei,
                        step: si,
                        map: MapKind::BeforeKit,
                    },
                    pixel: (pr as usize, pc as usize),
                    positive: false,
                });
            }
        }
    }
    out
}

/// Place labels pair the suction location at time t with the kit image at
/// time t+1, so the head learns to score empty cavities of the current kit.
pub fn build_place_dataset(episodes: &[Episode]) -> Vec<PlaceSample> {
    let mut out = Vec::new();
    for (ei, ep) in episodes.iter().enumerate() {
        for (si, step) in ep.steps.iter().enumerate() {
            if !step.suction_success {
                continue;
            }
            let (pr, pc) = step.after_kit.world_to_pixel(step.p);
            if step.after_kit.in_bounds(pr, pc) {
                out.push(PlaceSample {
                    image: MapRef {
                        episode: ei,
                        step: si,
                        map: MapKind::AfterKit,
                    },
                    pixel: (pr as usize, pc as usize),
                });
            }
        }
    }
    out
}

fn masks_consistent(step: &super::episode::EpisodeStep) -> bool {
    let a = step.object_mask_kit.area();
    let b = step.object_mask_table.area();
    if a == 0 || b == 0 {
        return false;
    }
    let (a, b) = (a as f64, b as f64);
    (a - b).abs() / a.max(b) <= 0.10
}

/// Build matching samples: map each vacated-cavity pixel through the
/// step's rigid transform into the object image, then re-express the kit
/// pixel in rotation frame `j*` so the surviving correspondence is a pure
/// translation. Steps with inconsistent differencing masks are dropped.
pub fn build_match_dataset(
    episodes: &[Episode],
    bins: usize,
    n_pairs: usize,
    seed: u64,
) -> (Vec<MatchSample>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for (ei, ep) in episodes.iter().enumerate() {
        for (si, step) in ep.steps.iter().enumerate() {
            if !step.suction_success {
                continue;
            }
            if !masks_consistent(step) {
                dropped += 1;
                continue;
            }
            let theta = step.theta.expect("successful step");
            let q = step.q.expect("successful step");
            let delta = step_world_transform(step.p, q, theta);
            let j_star = rotation_bin(theta, bins);
            let angle = j_star as f64 * 360.0 / bins as f64;
            let kit_hm = &step.after_kit;
            let obj_hm = &step.after_obj;
            let mut pairs = Vec::new();
            for (r, c) in step.object_mask_kit.cells() {
                let w = kit_hm.pixel_to_world(r, c);
                let w2 = delta.apply(w);
                let (br, bc) = obj_hm.world_to_pixel(w2);
                if !obj_hm.in_bounds(br, bc)
                    || !step.object_mask_table.get(br as usize, bc as usize)
                {
                    continue;
                }
                let rot = to_rotated_frame(kit_hm.h, kit_hm.w, angle, (r as f64, c as f64));
                let (ar, ac) = (round_cell(rot.0), round_cell(rot.1));
                if ar < 0 || ac < 0 || ar as usize >= kit_hm.h || ac as usize >= kit_hm.w {
                    continue;
                }
                pairs.push(((ar as usize, ac as usize), (br as usize, bc as usize)));
            }
            if pairs.is_empty() {
                dropped += 1;
                continue;
            }
            let mut rng = stream(seed, "match-pairs", ep.seed * 1000 + si as u64);
            pairs.shuffle(&mut rng);
            pairs.truncate(n_pairs);
            out.push(MatchSample {
                kit_image: MapRef {
                    episode: ei,
                    step: si,
                    map: MapKind::AfterKit,
                },
                obj_image: MapRef {
                    episode: ei,
                    step: si,
                    map: MapKind::AfterObj,
                },
                j_star,
                pairs,
                cavity_mask: step.object_mask_kit.to_rle(),
                object_mask: step.object_mask_table.to_rle(),
            });
        }
    }
    (out, dropped)
}

/// The compiled dataset triple plus the episode list its MapRefs index.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format: String,
    pub version: u32,
    pub config_hash: u64,
    /// (kit_id, episode seed) in MapRef order.
    pub episodes: Vec<(String, u64)>,
    pub suction: Vec<SuctionSample>,
    pub place: Vec<PlaceSample>,
    pub matching: Vec<MatchSample>,
    pub dropped_match_steps: usize,
}

impl DatasetIndex {
    pub fn build(episodes: &[Episode], bins: usize, n_pairs: usize, seed: u64, config_hash: u64) -> Self {
        let (matching, dropped) = build_match_dataset(episodes, bins, n_pairs, seed);
        DatasetIndex {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            config_hash,
            episodes: episodes.iter().map(|e| (e.kit_id.clone(), e.seed)).collect(),
            suction: build_suction_dataset(episodes, seed),
            place: build_place_dataset(episodes),
            matching,
            dropped_match_steps: dropped,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CollectError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CollectError> {
        let doc: DatasetIndex =
            serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if doc.format != DATASET_FORMAT || doc.version != DATASET_VERSION {
            return Err(CollectError::Format(format!(
                "{}: not a dataset index",
                path.display()
            )));
        }
        Ok(doc)
    }

    /// Fetch the heightmap a MapRef points at.
    pub fn resolve<'a>(
        &self,
        episodes: &'a [Episode],
        r: &MapRef,
    ) -> &'a crate::render::Heightmap {
        let step = &episodes[r.episode].steps[r.step];
        match r.map {
            MapKind::BeforeKit => &step.before_kit,
            MapKind::BeforeObj => &step.before_obj,
            MapKind::AfterKit => &step.after_kit,
            MapKind::AfterObj => &step.after_obj,
        }
    }
}
