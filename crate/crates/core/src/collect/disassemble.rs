//! Disassembly episodes and their time reversal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::episode::{Episode, EpisodeStep};
use super::CollectError;
use crate::mask::Mask;
use crate::render::{render, split, Heightmap, RenderParams};
use crate::rng::stream;
use crate::scene::{wrap_angle, ObjectLocation, Pose2, SceneState};
use crate::sim::{self, SimParams};

/// Chooses the next suction point during disassembly. The oracle uses
/// simulator ground truth; callers can wire a trained suction head in.
pub enum PickerPolicy<'a> {
    /// Pick a uniformly random extractable object at an interior point.
    Oracle,
    /// Arbitrary policy over the rendered halves (e.g. a suction network).
    External(&'a mut dyn FnMut(&SceneState, &Heightmap, &Heightmap, &mut ChaCha8Rng) -> (f64, f64)),
}

#[derive(Debug, Clone, Copy)]
pub struct CollectParams {
    pub retry_budget: usize,
    pub diff_height_m: f64,
    /// Interior margin for oracle grasps, as a fraction of the inradius.
    pub grasp_depth: f64,
}

impl CollectParams {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        CollectParams {
            retry_budget: cfg.collect.retry_budget,
            diff_height_m: cfg.collect.diff_height_m,
            grasp_depth: 0.35,
        }
    }
}

/// Oracle pick: uniform over extractable in-kit objects, at a uniformly
/// random interior cell of the silhouette.
pub fn oracle_pick(
    state: &SceneState,
    grasp_depth: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, f64)> {
    let candidates: Vec<usize> = (0..state.objects.len())
        .filter(|i| {
            matches!(state.objects[*i].location, ObjectLocation::InCavity(_))
                && sim::unoccluded(state, *i)
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let idx = candidates[rng.gen_range(0..candidates.len())];
    let shape = state
        .kit
        .object_shape(state.kit.objects[idx].shape_id);
    let margin = ((shape.grid.inradius() as f64) * grasp_depth).round() as usize;
    sim::interior_grasp_point(state, idx, margin.max(1), rng)
}

fn height_diff_mask(before: &Heightmap, after: &Heightmap, thr: f64, dropped: bool) -> Mask {
    let mut m = Mask::new(before.h, before.w);
    for r in 0..before.h {
        for c in 0..before.w {
            let i = before.idx(r, c);
            let d = if dropped {
                before.height[i] - after.height[i]
            } else {
                after.height[i] - before.height[i]
            };
            if d as f64 > thr {
                m.set(r, c, true);
            }
        }
    }
    m
}

/// Run one disassembly trajectory from a fully assembled scene: pick with
/// the policy, place at a uniformly random free table pose, record failed
/// suctions as negative steps. Ends when the kit is empty or the failure
/// budget runs out (the episode is then flagged incomplete).
pub fn run_disassembly(
    scene: &SceneState,
    mut policy: PickerPolicy<'_>,
    seed: u64,
    rp: &RenderParams,
    sp: &SimParams,
    cp: &CollectParams,
) -> Result<Episode, CollectError> {
    if !scene.kit_full() {
        return Err(CollectError::Contract(
            "disassembly starts from a fully assembled scene".into(),
        ));
    }
    let mut rng = stream(seed, "episode", 0);
    let mut state = scene.clone();
    let mut steps = Vec::new();
    let mut failures_left = cp.retry_budget;

    while !state.kit_empty() && failures_left > 0 {
        let full = render(&state, rp)?;
        let (before_kit, before_obj) = split(&full)?;
        let p = match &mut policy {
            PickerPolicy::Oracle => match oracle_pick(&state, cp.grasp_depth, &mut rng) {
                Some(p) => p,
                None => break, // nothing extractable; counted as incomplete
            },
            PickerPolicy::External(f) => f(&state, &before_kit, &before_obj, &mut rng),
        };
        let res = sim::suction(&state, p, sp)?;
        if !res.success {
            failures_left -= 1;
            steps.push(EpisodeStep {
                after_kit: before_kit.clone(),
                after_obj: before_obj.clone(),
                before_kit,
                before_obj,
                p,
                q: None,
                theta: None,
                suction_success: false,
                object_mask_kit: Mask::new(0, 0),
                object_mask_table: Mask::new(0, 0),
                object_index: None,
                gt_pose_before: None,
                gt_pose_after: None,
            });
            continue;
        }
        let held_idx = res.object_index.expect("successful suction holds an object");
        let gt_before = state.objects[held_idx].pose;
        let held_state = res.new_state;

        // sample a free table pose, then express it as (q, theta)
        let g = held_state.objects[held_idx].grasp_local.unwrap();
        let theta_held = held_state.objects[held_idx].pose.theta;
        let kit = &held_state.kit;
        let ws = &held_state.workspace;
        let radius = kit.shape(kit.objects[held_idx].shape_id).max_radius_m();
        let (ocx, ocy) = ws.object_center();
        let fx = ws.half_w_m / 2.0 - radius - 0.006;
        let fy = ws.half_h_m / 2.0 - radius - 0.006;
        let mut placed = None;
        for _ in 0..2000 {
            let pose = Pose2::new(
                ocx + rng.gen_range(-fx..=fx),
                ocy + rng.gen_range(-fy..=fy),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let theta_cmd = wrap_angle(theta_held - pose.theta);
            let q = pose.apply(g);
            if !ws.in_object_half(q) {
                continue;
            }
            let r2 = sim::place(&held_state, q, theta_cmd, sp)?;
            if r2.success {
                placed = Some((q, theta_cmd, r2.new_state));
                break;
            }
        }
        let (q, theta_cmd, new_state) = placed.ok_or_else(|| {
            CollectError::Contract("no free table pose found for disassembly".into())
        })?;

        let full_after = render(&new_state, rp)?;
        let (after_kit, after_obj) = split(&full_after)?;
        let mask_kit = height_diff_mask(&before_kit, &after_kit, cp.diff_height_m, true);
        let mask_table = height_diff_mask(&before_obj, &after_obj, cp.diff_height_m, false);
        let gt_after = new_state.objects[held_idx].pose;
        steps.push(EpisodeStep {
            before_kit,
            before_obj,
            after_kit,
            after_obj,
            p,
            q: Some(q),
            theta: Some(theta_cmd),
            suction_success: true,
            object_mask_kit: mask_kit,
            object_mask_table: mask_table,
            object_index: Some(held_idx),
            gt_pose_before: Some(gt_before),
            gt_pose_after: Some(gt_after),
        });
        state = new_state;
    }

    Ok(Episode {
        kit_id: scene.kit.id.clone(),
        seed,
        steps,
        complete: state.kit_empty(),
    })
}

/// One reversed action: suction at `pick`, place at `place` with `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyAction {
    pub pick: (f64, f64),
    pub place: (f64, f64),
    pub theta: f64,
}

/// Reverse a complete episode into an assembly sequence: steps in reverse
/// order, each picking at the recorded place point and placing at the
/// recorded suction point with the inverse rotation.
pub fn reverse(episode: &Episode) -> Result<Vec<AssemblyAction>, CollectError> {
    if !episode.complete {
        return Err(CollectError::Contract(
            "cannot reverse an incomplete episode".into(),
        ));
    }
    Ok(episode
        .steps
        .iter()
        .rev()
        .filter(|s| s.suction_success)
        .map(|s| AssemblyAction {
            pick: s.q.expect("successful step has a place point"),
            place: s.p,
            theta: -s.theta.expect("successful step has a rotation"),
        })
        .collect())
}

/// Execute an assembly sequence in the simulator. Returns the final state;
/// errors if any action fails (reversal of a valid episode never does).
pub fn execute_assembly(
    state: &SceneState,
    actions: &[AssemblyAction],
    sp: &SimParams,
) -> Result<SceneState, CollectError> {
    let mut cur = state.clone();
    for (i, act) in actions.iter().enumerate() {
        let r = sim::suction(&cur, act.pick, sp)?;
        if !r.success {
            return Err(CollectError::ReplayFailed(format!(
                "action {i}: suction missed ({:?})",
                r.failure_reason
            )));
        }
        let r2 = sim::place(&r.new_state, act.place, act.theta, sp)?;
        if !r2.success {
            return Err(CollectError::ReplayFailed(format!(
                "action {i}: place failed ({:?})",
                r2.failure_reason
            )));
        }
        cur = r2.new_state;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::scene::kit::{generate_kit, KitGenParams};
    use crate::scene::Workspace;

    fn setup(seed: u64, n: usize, layers: usize) -> (SceneState, RenderParams, SimParams, CollectParams) {
        let cfg = RunConfig::desk();
        let kit = generate_kit(seed, n, layers, &KitGenParams::from_config(&cfg)).unwrap();
        let ws = Workspace::from_config(&cfg);
        (
            SceneState::assembled(kit, Pose2::IDENTITY, ws, seed),
            RenderParams::from_config(&cfg),
            SimParams::from_config(&cfg),
            CollectParams::from_config(&cfg),
        )
    }

    #[test]
    fn single_object_episode_has_one_step() {
        let (scene, rp, sp, cp) = setup(41, 1, 1);
        let ep = run_disassembly(&scene, PickerPolicy::Oracle, 7, &rp, &sp, &cp).unwrap();
        assert!(ep.complete);
        assert_eq!(ep.steps.len(), 1);
        let s = &ep.steps[0];
        assert!(s.suction_success);
        assert!(!s.object_mask_kit.is_empty());
        assert!(!s.object_mask_table.is_empty());
        // differenced masks agree in area within 10%
        let (a, b) = (s.object_mask_kit.area() as f64, s.object_mask_table.area() as f64);
        assert!((a - b).abs() / a.max(b) <= 0.10, "areas {a} vs {b}");
    }

    #[test]
    fn stacked_kit_disassembles_top_first() {
        let (scene, rp, sp, cp) = setup(2, 5, 2);
        let kit = scene.kit.clone();
        let ep = run_disassembly(&scene, PickerPolicy::Oracle, 3, &rp, &sp, &cp).unwrap();
        assert!(ep.complete);
        let mut seen_bottom: Vec<usize> = Vec::new();
        for s in ep.successful_steps() {
            let oi = s.object_index.unwrap();
            let layer = kit.spec.cavities[oi].layer;
            if layer == 0 {
                seen_bottom.push(oi);
            } else {
                // every top object leaves before the bottoms it covers
                for covered in kit.supporting_cavities(oi) {
                    assert!(
                        !seen_bottom.contains(covered),
                        "bottom {covered} extracted before top {oi}"
                    );
                }
            }
        }
    }

    #[test]
    fn always_missing_policy_gives_incomplete_episode_with_negatives() {
        let (scene, rp, sp, cp) = setup(41, 1, 1);
        let mut miss =
            |state: &SceneState, _k: &Heightmap, _o: &Heightmap, _r: &mut ChaCha8Rng| {
                state.workspace.object_center() // bare table, always misses
            };
        let ep = run_disassembly(
            &scene,
            PickerPolicy::External(&mut miss),
            9,
            &rp,
            &sp,
            &cp,
        )
        .unwrap();
        assert!(!ep.complete);
        assert_eq!(ep.steps.len(), cp.retry_budget);
        assert!(ep.steps.iter().all(|s| !s.suction_success));
        assert!(reverse(&ep).is_err());
    }

    #[test]
    fn reversal_swaps_roles_and_restores_state() {
        let (scene, rp, sp, cp) = setup(42, 3, 1);
        let ep = run_disassembly(&scene, PickerPolicy::Oracle, 11, &rp, &sp, &cp).unwrap();
        assert!(ep.complete);
        let actions = reverse(&ep).unwrap();
        assert_eq!(actions.len(), 3);
        // roles swap: the reversed pick is the recorded place point
        let last = ep.successful_steps().last().unwrap();
        assert_eq!(actions[0].pick, last.q.unwrap());
        assert_eq!(actions[0].place, last.p);
        // executing the reversal restores the assembled scene bit-exactly
        let disassembled = {
            // rebuild final state by replaying the episode forward
            let mut cur = scene.clone();
            for s in ep.successful_steps() {
                let r = sim::suction(&cur, s.p, &sp).unwrap();
                let r2 = sim::place(&r.new_state, s.q.unwrap(), s.theta.unwrap(), &sp).unwrap();
                cur = r2.new_state;
            }
            cur
        };
        let restored = execute_assembly(&disassembled, &actions, &sp).unwrap();
        assert!(restored.bits_eq(&scene));
    }

    #[test]
    fn empty_action_list_for_zero_steps() {
        let ep = Episode {
            kit_id: "none".into(),
            seed: 0,
            steps: Vec::new(),
            complete: true,
        };
        assert!(reverse(&ep).unwrap().is_empty());
    }
}
