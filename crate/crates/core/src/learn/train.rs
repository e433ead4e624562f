//! Training loops for the affordance heads (suction, place) and the
//! Siamese matching head, plus small evaluation helpers.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;

use super::adam::Adam;
use super::checkpoint::Checkpoint;
use super::loss::{bce_with_logits, contrastive_loss, DescriptorPair, PairSet};
use super::net::{heightmap_to_input, Network};
use super::tape::Tape;
use super::tensor::Tensor;
use super::LearnError;
use crate::collect::{Episode, MapRef, MatchSample, PlaceSample, SuctionSample};
use crate::mask::{round_cell, Mask};
use crate::render::{from_rotated_frame, rotate_heightmap, to_rotated_frame, Heightmap};
use crate::rng::stream;

#[derive(Debug, Clone)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub steps: usize,
    pub margin: f64,
    pub positive_radius_px: usize,
    pub negative_ratio: usize,
    pub match_nonmatches: usize,
    pub wrong_rotations_per_step: usize,
    pub rotation_bins: usize,
    /// Background fill for rotated kit images (table gray, height 0).
    pub background: (f32, f32),
    pub seed: u64,
}

impl TrainHyper {
    pub fn from_config(cfg: &crate::config::RunConfig, head: Head) -> Self {
        TrainHyper {
            learning_rate: cfg.train.learning_rate,
            steps: match head {
                Head::Match => cfg.train.match_steps,
                _ => cfg.train.affordance_steps,
            },
            margin: cfg.train.margin,
            positive_radius_px: cfg.train.positive_radius_px,
            negative_ratio: cfg.train.negative_ratio,
            match_nonmatches: cfg.train.match_nonmatches,
            wrong_rotations_per_step: cfg.train.wrong_rotations_per_step,
            rotation_bins: cfg.rotation_bins,
            background: (cfg.table_gray as f32, 0.0),
            seed: cfg.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Suction,
    Place,
    Match,
}

/// Labeled pixels of one image: the unit the affordance trainers sample.
#[derive(Debug, Clone)]
pub struct AffordanceGroup {
    pub image: MapRef,
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

pub fn group_suction_samples(samples: &[SuctionSample]) -> Vec<AffordanceGroup> {
    group_by_image(samples.iter().map(|s| (s.image, s.pixel, s.positive)))
}

pub fn group_place_samples(samples: &[PlaceSample]) -> Vec<AffordanceGroup> {
    group_by_image(samples.iter().map(|s| (s.image, s.pixel, true)))
}

fn group_by_image(
    it: impl Iterator<Item = (MapRef, (usize, usize), bool)>,
) -> Vec<AffordanceGroup> {
    let mut groups: Vec<AffordanceGroup> = Vec::new();
    for (image, pixel, positive) in it {
        let slot = groups.iter_mut().find(|g| g.image == image);
        let g = match slot {
            Some(g) => g,
            None => {
                groups.push(AffordanceGroup {
                    image,
                    positives: Vec::new(),
                    negatives: Vec::new(),
                });
                groups.last_mut().unwrap()
            }
        };
        if positive {
            g.positives.push(pixel);
        } else {
            g.negatives.push(pixel);
        }
    }
    groups
}

fn resolve<'a>(episodes: &'a [Episode], r: &MapRef) -> &'a Heightmap {
    let step = &episodes[r.episode].steps[r.step];
    match r.map {
        crate::collect::MapKind::BeforeKit => &step.before_kit,
        crate::collect::MapKind::BeforeObj => &step.before_obj,
        crate::collect::MapKind::AfterKit => &step.after_kit,
        crate::collect::MapKind::AfterObj => &step.after_obj,
    }
}

/// Build the labeled-pixel list for one affordance step: positive disks of
/// radius `r_pos` plus recorded and sampled background negatives (1:ratio).
fn affordance_labels(
    group: &AffordanceGroup,
    hm: &Heightmap,
    r_pos: usize,
    neg_ratio: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, f64)> {
    let mut pos_set = BTreeSet::new();
    let r = r_pos as i64;
    for (pr, pc) in &group.positives {
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc > r * r {
                    continue;
                }
                let (rr, cc) = (*pr as i64 + dr, *pc as i64 + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < hm.h && (cc as usize) < hm.w {
                    pos_set.insert(rr as usize * hm.w + cc as usize);
                }
            }
        }
    }
    let mut labels: Vec<(usize, f64)> = Vec::new();
    let mut neg_set = BTreeSet::new();
    for (nr, nc) in &group.negatives {
        let idx = nr * hm.w + nc;
        if !pos_set.contains(&idx) {
            neg_set.insert(idx);
        }
    }
    let want_negs = pos_set.len() * neg_ratio;
    let mut guard = 0;
    while neg_set.len() < want_negs && guard < want_negs * 20 {
        guard += 1;
        let r = rng.gen_range(0..hm.h);
        let c = rng.gen_range(0..hm.w);
        let idx = r * hm.w + c;
        if hm.height[idx] == 0.0 && !pos_set.contains(&idx) {
            neg_set.insert(idx);
        }
    }
    labels.extend(pos_set.iter().map(|i| (*i, 1.0)));
    labels.extend(neg_set.iter().map(|i| (*i, 0.0)));
    labels
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub losses: Vec<f64>,
}

fn make_checkpoint(
    network: &Network,
    params: &[Tensor<f32>],
    config_hash: u64,
    steps: u64,
    rng: &ChaCha8Rng,
) -> Checkpoint {
    Checkpoint {
        config_hash,
        names: network.param_names().to_vec(),
        tensors: params.to_vec(),
        step_count: steps,
        rng_seed: rng.get_seed(),
        rng_word_pos: rng.get_word_pos(),
    }
}

/// Restore parameters and RNG from a checkpoint to continue training.
fn restore(
    network: &Network,
    ckpt: &Checkpoint,
    config_hash: u64,
) -> Result<(Vec<Tensor<f32>>, ChaCha8Rng, u64), LearnError> {
    if ckpt.config_hash != config_hash {
        return Err(LearnError::ConfigMismatch {
            expected: config_hash,
            found: ckpt.config_hash,
        });
    }
    if ckpt.names != network.param_names() {
        return Err(LearnError::Format("checkpoint names mismatch".into()));
    }
    let mut rng = ChaCha8Rng::from_seed(ckpt.rng_seed);
    rng.set_word_pos(ckpt.rng_word_pos);
    Ok((ckpt.tensors.clone(), rng, ckpt.step_count))
}

/// Train a suction or place head with per-pixel BCE on labeled pixels.
pub fn train_affordance(
    groups: &[AffordanceGroup],
    episodes: &[Episode],
    network: &Network,
    hyper: &TrainHyper,
    config_hash: u64,
    resume: Option<&Checkpoint>,
) -> Result<TrainOutput, LearnError> {
    if groups.iter().all(|g| g.positives.is_empty()) {
        return Err(LearnError::DegenerateDataset(
            "affordance dataset has no positive labels".into(),
        ));
    }
    let usable: Vec<&AffordanceGroup> =
        groups.iter().filter(|g| !g.positives.is_empty()).collect();
    let (mut params, mut rng, start_step) = match resume {
        Some(c) => restore(network, c, config_hash)?,
        None => (
            network.init_params::<f32>(hyper.seed),
            stream(hyper.seed, "train-affordance", 0),
            0,
        ),
    };
    let mut opt = Adam::new(hyper.learning_rate, network.param_shapes());
    let mut losses = Vec::with_capacity(hyper.steps);
    for _step in 0..hyper.steps {
        let g = usable[rng.gen_range(0..usable.len())];
        let hm = resolve(episodes, &g.image);
        let labels = affordance_labels(
            g,
            hm,
            hyper.positive_radius_px,
            hyper.negative_ratio,
            &mut rng,
        );
        let mut tape = Tape::new();
        let input = tape.input(heightmap_to_input::<f32>(hm));
        let logits = network.forward(&mut tape, &params, input);
        let (loss, dlogits) = bce_with_logits(tape.value(logits), &labels);
        let grads = tape.backward(logits, dlogits, &params);
        opt.step(&mut params, &grads);
        losses.push(loss);
    }
    Ok(TrainOutput {
        checkpoint: make_checkpoint(
            network,
            &params,
            config_hash,
            start_step + hyper.steps as u64,
            &rng,
        ),
        losses,
    })
}

/// The per-step pair sampling for the matching head. `kit_maps[0]` is the
/// ground-truth rotation; the rest are the sampled wrong rotations.
fn sample_pairs(
    sample: &MatchSample,
    cavity: &Mask,
    object: &Mask,
    wrong_angles: &[(usize, f64)],
    img_h: usize,
    img_w: usize,
    hyper: &TrainHyper,
    rng: &mut ChaCha8Rng,
) -> PairSet {
    let bins = hyper.rotation_bins;
    let gt_angle = sample.j_star as f64 * 360.0 / bins as f64;
    let mut matches = Vec::with_capacity(sample.pairs.len());
    for ((ar, ac), (br, bc)) in &sample.pairs {
        matches.push(DescriptorPair {
            kit_map: 0,
            kit_px: ar * img_w + ac,
            obj_px: br * img_w + bc,
        });
    }
    // rotated cavity pixel pool per kit map
    let cavity_cells: Vec<(usize, usize)> = cavity.cells().collect();
    let object_cells: Vec<(usize, usize)> = object.cells().collect();
    let rot_pool = |angle: f64, rng: &mut ChaCha8Rng, n: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        let mut guard = 0;
        while out.len() < n && guard < n * 20 {
            guard += 1;
            let (r, c) = cavity_cells[rng.gen_range(0..cavity_cells.len())];
            let p = to_rotated_frame(img_h, img_w, angle, (r as f64, c as f64));
            let (rr, cc) = (round_cell(p.0), round_cell(p.1));
            if rr >= 0 && cc >= 0 && (rr as usize) < img_h && (cc as usize) < img_w {
                out.push(rr as usize * img_w + cc as usize);
            }
        }
        out
    };

    let total = hyper.match_nonmatches;
    let at_gt = total / 2;
    let mut nonmatches = Vec::with_capacity(total);
    // (a) wrong pixels at the correct rotation: half hard ring offsets
    // around true matches, half random cavity x object combinations
    for k in 0..at_gt {
        if k % 2 == 0 && !matches.is_empty() {
            let m = matches[rng.gen_range(0..matches.len())];
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rad: f64 = rng.gen_range(2.0..10.0);
            let dr = (rad * ang.sin()).round() as i64;
            let dc = (rad * ang.cos()).round() as i64;
            let (r, c) = ((m.kit_px / img_w) as i64 + dr, (m.kit_px % img_w) as i64 + dc);
            if r >= 0 && c >= 0 && (r as usize) < img_h && (c as usize) < img_w {
                nonmatches.push(DescriptorPair {
                    kit_map: 0,
                    kit_px: r as usize * img_w + c as usize,
                    obj_px: m.obj_px,
                });
                continue;
            }
        }
        let pool = rot_pool(gt_angle, rng, 1);
        if let Some(kp) = pool.first() {
            let (or, oc) = object_cells[rng.gen_range(0..object_cells.len())];
            nonmatches.push(DescriptorPair {
                kit_map: 0,
                kit_px: *kp,
                obj_px: or * img_w + oc,
            });
        }
    }
    // (b) pairs at wrong rotations, including the correct location there
    let per_wrong = (total - nonmatches.len()) / wrong_angles.len().max(1);
    for (mi, (_, angle)) in wrong_angles.iter().enumerate() {
        for k in 0..per_wrong {
            if k % 2 == 0 && !matches.is_empty() {
                // the true pair's kit location expressed in this rotation
                let m = matches[rng.gen_range(0..matches.len())];
                let unrot = from_rotated_frame(
                    img_h,
                    img_w,
                    gt_angle,
                    ((m.kit_px / img_w) as f64, (m.kit_px % img_w) as f64),
                );
                let p = to_rotated_frame(img_h, img_w, *angle, unrot);
                let (rr, cc) = (round_cell(p.0), round_cell(p.1));
                if rr >= 0 && cc >= 0 && (rr as usize) < img_h && (cc as usize) < img_w {
                    nonmatches.push(DescriptorPair {
                        kit_map: mi + 1,
                        kit_px: rr as usize * img_w + cc as usize,
                        obj_px: m.obj_px,
                    });
                    continue;
                }
            }
            let pool = rot_pool(*angle, rng, 1);
            if let Some(kp) = pool.first() {
                let (or, oc) = object_cells[rng.gen_range(0..object_cells.len())];
                nonmatches.push(DescriptorPair {
                    kit_map: mi + 1,
                    kit_px: *kp,
                    obj_px: or * img_w + oc,
                });
            }
        }
    }
    PairSet {
        matches,
        nonmatches,
        margin: hyper.margin,
    }
}

/// Train the matching head: a two-stream Siamese forward (object image and
/// the selected kit rotations) sharing one parameter set, with the
/// pixel-wise contrastive loss.
pub fn train_match(
    samples: &[MatchSample],
    episodes: &[Episode],
    network: &Network,
    hyper: &TrainHyper,
    config_hash: u64,
    resume: Option<&Checkpoint>,
) -> Result<TrainOutput, LearnError> {
    if samples.is_empty() {
        return Err(LearnError::DegenerateDataset(
            "matching dataset is empty".into(),
        ));
    }
    let (mut params, mut rng, start_step) = match resume {
        Some(c) => restore(network, c, config_hash)?,
        None => (
            network.init_params::<f32>(hyper.seed),
            stream(hyper.seed, "train-match", 0),
            0,
        ),
    };
    let mut opt = Adam::new(hyper.learning_rate, network.param_shapes());
    let mut losses = Vec::with_capacity(hyper.steps);
    let bins = hyper.rotation_bins;

    // decoded masks, cached per sample index
    let masks: Vec<(Mask, Mask)> = samples
        .iter()
        .map(|s| {
            (
                Mask::from_rle(&s.cavity_mask).expect("valid cavity mask"),
                Mask::from_rle(&s.object_mask).expect("valid object mask"),
            )
        })
        .collect();

    for _step in 0..hyper.steps {
        let si = rng.gen_range(0..samples.len());
        let sample = &samples[si];
        let (cavity, object) = &masks[si];
        let kit_hm = resolve(episodes, &sample.kit_image);
        let obj_hm = resolve(episodes, &sample.obj_image);
        let (img_h, img_w) = (kit_hm.h, kit_hm.w);

        // choose wrong rotations for this step
        let mut wrong: Vec<usize> = (0..bins).filter(|j| *j != sample.j_star).collect();
        wrong.shuffle(&mut rng);
        wrong.truncate(hyper.wrong_rotations_per_step.min(wrong.len()));
        let wrong_angles: Vec<(usize, f64)> = wrong
            .iter()
            .map(|j| (*j, *j as f64 * 360.0 / bins as f64))
            .collect();

        let pairs = sample_pairs(
            sample,
            cavity,
            object,
            &wrong_angles,
            img_h,
            img_w,
            hyper,
            &mut rng,
        );

        // forwards: object plus kit at [j*, wrong...] in parallel
        let gt_angle = sample.j_star as f64 * 360.0 / bins as f64;
        let mut kit_images = Vec::with_capacity(1 + wrong_angles.len());
        kit_images.push(rotate_heightmap(kit_hm, gt_angle, hyper.background));
        for (_, angle) in &wrong_angles {
            kit_images.push(rotate_heightmap(kit_hm, *angle, hyper.background));
        }

        enum Branch<'h> {
            Obj(&'h Heightmap),
            Kit(&'h Heightmap),
        }
        let branches: Vec<Branch> = std::iter::once(Branch::Obj(obj_hm))
            .chain(kit_images.iter().map(Branch::Kit))
            .collect();
        let forwards: Vec<(Tape<f32>, usize)> = branches
            .par_iter()
            .map(|b| {
                let hm = match b {
                    Branch::Obj(h) => *h,
                    Branch::Kit(h) => *h,
                };
                let mut tape = Tape::new();
                let input = tape.input(heightmap_to_input::<f32>(hm));
                let out = network.forward(&mut tape, &params, input);
                (tape, out)
            })
            .collect();

        let mu_obj = forwards[0].0.value(forwards[0].1);
        let mu_kits: Vec<&Tensor<f32>> = forwards[1..]
            .iter()
            .map(|(t, id)| t.value(*id))
            .collect();
        let (loss, d_obj, d_kits) = contrastive_loss(mu_obj, &mu_kits, &pairs);

        // backward all branches in parallel, then reduce in fixed order
        let seeds: Vec<Tensor<f32>> = std::iter::once(d_obj).chain(d_kits).collect();
        let grad_sets: Vec<Vec<Tensor<f32>>> = forwards
            .par_iter()
            .zip(seeds.into_par_iter())
            .map(|((tape, out), seed)| tape.backward(*out, seed, &params))
            .collect();
        let mut grads = grad_sets[0].clone();
        for gs in &grad_sets[1..] {
            for (acc, g) in grads.iter_mut().zip(gs) {
                for (a, v) in acc.data.iter_mut().zip(&g.data) {
                    *a += *v;
                }
            }
        }
        opt.step(&mut params, &grads);
        losses.push(loss);
    }

    Ok(TrainOutput {
        checkpoint: make_checkpoint(
            network,
            &params,
            config_hash,
            start_step + hyper.steps as u64,
            &rng,
        ),
        losses,
    })
}

/// Fraction of samples whose best rotation bin (mean descriptor distance
/// over the sample's pairs, argmin over bins) equals the ground truth.
pub fn rotation_bin_accuracy(
    samples: &[MatchSample],
    episodes: &[Episode],
    network: &Network,
    params: &[Tensor<f32>],
    bins: usize,
    background: (f32, f32),
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits: usize = samples
        .par_iter()
        .map(|sample| {
            let kit_hm = resolve(episodes, &sample.kit_image);
            let obj_hm = resolve(episodes, &sample.obj_image);
            let (img_h, img_w) = (kit_hm.h, kit_hm.w);
            let mu_obj = network.infer::<f32>(params, obj_hm, false);
            let gt_angle = sample.j_star as f64 * 360.0 / bins as f64;
            let plane = img_h * img_w;
            let d = mu_obj.dims[0];
            let mut best = (usize::MAX, f64::INFINITY);
            for j in 0..bins {
                let angle = j as f64 * 360.0 / bins as f64;
                let rot = rotate_heightmap(kit_hm, angle, background);
                let mu_kit = network.infer::<f32>(params, &rot, false);
                let mut total = 0.0;
                let mut n = 0usize;
                for ((ar, ac), (br, bc)) in &sample.pairs {
                    // express the stored frame-j* kit pixel in frame j
                    let unrot = from_rotated_frame(
                        img_h,
                        img_w,
                        gt_angle,
                        (*ar as f64, *ac as f64),
                    );
                    let p = to_rotated_frame(img_h, img_w, angle, unrot);
                    let (rr, cc) = (round_cell(p.0), round_cell(p.1));
                    if rr < 0 || cc < 0 || rr as usize >= img_h || cc as usize >= img_w {
                        continue;
                    }
                    let kp = rr as usize * img_w + cc as usize;
                    let op = br * img_w + bc;
                    let mut d2 = 0.0;
                    for c in 0..d {
                        let diff = (mu_kit.data[c * plane + kp]
                            - mu_obj.data[c * plane + op]) as f64;
                        d2 += diff * diff;
                    }
                    total += d2.sqrt();
                    n += 1;
                }
                if n > 0 {
                    let mean = total / n as f64;
                    if mean < best.1 {
                        best = (j, mean);
                    }
                }
            }
            usize::from(best.0 == sample.j_star)
        })
        .sum();
    hits as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collect::MapKind;
    use crate::config::{BlockConfig, NetworkConfig};

    fn tiny_network(head: usize) -> Network {
        Network::new(
            &NetworkConfig {
                in_channels: 2,
                blocks: vec![
                    BlockConfig {
                        channels: 8,
                        kernel: 3,
                        dilation: 1,
                        residual: false,
                    },
                    BlockConfig {
                        channels: 8,
                        kernel: 3,
                        dilation: 2,
                        residual: true,
                    },
                ],
            },
            head,
        )
    }

    /// Synthetic episodes: a bright square "object" on a dark table.
    fn toy_episodes(n: usize, side: usize) -> (Vec<Episode>, Vec<AffordanceGroup>) {
        let mut episodes = Vec::new();
        let mut groups = Vec::new();
        let mut rng = stream(77, "toy", 0);
        for i in 0..n {
            let mut hm = Heightmap::filled(side, side, (0.0, 0.0), 0.004, 0.25, 0.0);
            let r0 = rng.gen_range(4..side - 9);
            let c0 = rng.gen_range(4..side - 9);
            for r in r0..r0 + 5 {
                for c in c0..c0 + 5 {
                    let idx = hm.idx(r, c);
                    hm.height[idx] = 0.02;
                    hm.gray[idx] = 0.8;
                }
            }
            let step = crate::collect::EpisodeStep {
                before_kit: hm.clone(),
                before_obj: hm.clone(),
                after_kit: hm.clone(),
                after_obj: hm,
                p: (0.0, 0.0),
                q: None,
                theta: None,
                suction_success: false,
                object_mask_kit: Mask::new(0, 0),
                object_mask_table: Mask::new(0, 0),
                object_index: None,
                gt_pose_before: None,
                gt_pose_after: None,
            };
            episodes.push(Episode {
                kit_id: "toy".into(),
                seed: i as u64,
                steps: vec![step],
                complete: true,
            });
            groups.push(AffordanceGroup {
                image: MapRef {
                    episode: i,
                    step: 0,
                    map: MapKind::BeforeKit,
                },
                positives: vec![(r0 + 2, c0 + 2)],
                negatives: vec![],
            });
        }
        (episodes, groups)
    }

    #[test]
    fn toy_affordance_training_reaches_high_accuracy() {
        let (episodes, groups) = toy_episodes(10, 32);
        let net = tiny_network(1);
        let hyper = TrainHyper {
            learning_rate: 1e-3,
            steps: 500,
            margin: 0.5,
            positive_radius_px: 2,
            negative_ratio: 8,
            match_nonmatches: 0,
            wrong_rotations_per_step: 0,
            rotation_bins: 20,
            background: (0.25, 0.0),
            seed: 5,
        };
        let out = train_affordance(&groups, &episodes, &net, &hyper, 1, None).unwrap();
        // loss dropped
        assert!(out.losses[out.losses.len() - 1] < out.losses[0]);
        // labeled-pixel accuracy on the training set
        let params = &out.checkpoint.tensors;
        let mut correct = 0usize;
        let mut total = 0usize;
        let mut rng = stream(6, "toy-eval", 0);
        for g in &groups {
            let hm = resolve(&episodes, &g.image);
            let probs = net.infer::<f32>(params, hm, true);
            let labels = affordance_labels(g, hm, 2, 8, &mut rng);
            for (idx, y) in labels {
                let pred = f64::from(probs.data[idx] > 0.5);
                correct += usize::from(pred == y);
                total += 1;
            }
        }
        let acc = correct as f64 / total as f64;
        assert!(acc >= 0.9, "labeled-pixel accuracy {acc}");
    }

    #[test]
    fn degenerate_dataset_refused() {
        let (episodes, mut groups) = toy_episodes(2, 24);
        for g in &mut groups {
            g.positives.clear();
        }
        let net = tiny_network(1);
        let hyper = TrainHyper {
            learning_rate: 1e-3,
            steps: 10,
            margin: 0.5,
            positive_radius_px: 2,
            negative_ratio: 8,
            match_nonmatches: 0,
            wrong_rotations_per_step: 0,
            rotation_bins: 20,
            background: (0.25, 0.0),
            seed: 5,
        };
        assert!(matches!(
            train_affordance(&groups, &episodes, &net, &hyper, 1, None),
            Err(LearnError::DegenerateDataset(_))
        ));
    }

    #[test]
    fn affordance_training_is_bit_deterministic() {
        let (episodes, groups) = toy_episodes(4, 24);
        let net = tiny_network(1);
        let hyper = TrainHyper {
            learning_rate: 1e-3,
            steps: 40,
            margin: 0.5,
            positive_radius_px: 2,
            negative_ratio: 8,
            match_nonmatches: 0,
            wrong_rotations_per_step: 0,
            rotation_bins: 20,
            background: (0.25, 0.0),
            seed: 9,
        };
        let a = train_affordance(&groups, &episodes, &net, &hyper, 1, None).unwrap();
        let b = train_affordance(&groups, &episodes, &net, &hyper, 1, None).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn resume_continues_step_count() {
        let (episodes, groups) = toy_episodes(4, 24);
        let net = tiny_network(1);
        let mut hyper = TrainHyper {
            learning_rate: 1e-3,
            steps: 20,
            margin: 0.5,
            positive_radius_px: 2,
            negative_ratio: 8,
            match_nonmatches: 0,
            wrong_rotations_per_step: 0,
            rotation_bins: 20,
            background: (0.25, 0.0),
            seed: 9,
        };
        let a = train_affordance(&groups, &episodes, &net, &hyper, 1, None).unwrap();
        hyper.steps = 15;
        let b =
            train_affordance(&groups, &episodes, &net, &hyper, 1, Some(&a.checkpoint)).unwrap();
        assert_eq!(b.checkpoint.step_count, 35);
    }
}
