//! Quasi-static pick and place primitives with deterministic success
//! models, fit checking and layered-kit ordering constraints.
//!
//! Conventions: `suction(p)` grabs the topmost object surface at the world
//! point `p`. `place(q, theta)` releases the held object so its grasp point
//! lands at `q`, rotated by `theta` *clockwise* in the world (the planner's
//! rotation-stack index direction: stack bin `j` aligns the kit image with
//! the object, so executing bin `j` turns the object back by the same
//! angle). A placement that fits a cavity settles to the cavity's exact
//! pose, which is what makes reversed episodes restore states bit-exactly.

use crate::mask::Mask;
use crate::rng::{derive_seed, stream};
use crate::scene::{
    wrap_angle, ObjectLocation, Pose2, SceneState, ShapeMask,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    MissedObject,
    Occluded,
    Misfit,
    OrderViolation,
    OutOfBounds,
    None,
}

#[derive(Debug, Clone)]
pub struct ActionResult {
    pub success: bool,
    pub new_state: SceneState,
    pub failure_reason: FailureReason,
    /// Object the action acted on (picked, placed or attempted).
    pub object_index: Option<usize>,
}

/// Tolerances of the success models, in shape-mask pixels.
#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub fit_tol_px: usize,
    pub suction_margin_px: usize,
    pub fit_coverage: f64,
}

impl SimParams {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        SimParams {
            fit_tol_px: cfg.fit_tol_px,
            suction_margin_px: cfg.suction_margin_px,
            fit_coverage: cfg.fit_coverage,
        }
    }
}

/// Top-down suction at world point `p`.
pub fn suction(
    state: &SceneState,
    p: (f64, f64),
    params: &SimParams,
) -> Result<ActionResult, SimError> {
    if state.held_index().is_some() {
        return Err(SimError::Contract(
            "suction while an object is already held".into(),
        ));
    }
    let kit = &state.kit;
    let layer_h = kit.spec.board_height / kit.spec.layers as f64;

    // all objects whose full silhouette covers p, with their top height
    let mut covering: Vec<(usize, f64, bool)> = Vec::new();
    for (i, obj) in state.objects.iter().enumerate() {
        let ospec = &kit.objects[i];
        let local = obj.pose.invert().apply(p);
        let shape = kit.object_shape(ospec.shape_id);
        if !shape.contains_local(local.0, local.1) {
            continue;
        }
        let base = match obj.location {
            ObjectLocation::InCavity(ci) => kit.spec.cavities[ci].layer as f64 * layer_h,
            _ => 0.0,
        };
        let eroded = shape.grid.erode(params.suction_margin_px);
        let cell = shape.local_to_cell(local.0, local.1);
        let grip = eroded.get_i(cell.0, cell.1);
        covering.push((i, base + ospec.height, grip));
    }
    if covering.is_empty() {
        return Ok(ActionResult {
            success: false,
            new_state: state.clone(),
            failure_reason: FailureReason::MissedObject,
            object_index: None,
        });
    }
    covering.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let (top_idx, _, top_grip) = covering[0];
    if top_grip {
        let mut new_state = state.clone();
        let grasp_local = state.objects[top_idx].pose.invert().apply(p);
        new_state.objects[top_idx].location = ObjectLocation::Held;
        new_state.objects[top_idx].grasp_local = Some(grasp_local);
        return Ok(ActionResult {
            success: true,
            new_state,
            failure_reason: FailureReason::None,
            object_index: Some(top_idx),
        });
    }
    // the topmost surface is only a rim here; an object below that could be
    // gripped is occluded by it
    let reason = if covering.iter().skip(1).any(|(_, _, grip)| *grip) {
        FailureReason::Occluded
    } else {
        FailureReason::MissedObject
    };
    Ok(ActionResult {
        success: false,
        new_state: state.clone(),
        failure_reason: reason,
        object_index: None,
    })
}

/// Release the held object with its grasp point at `q`, rotated `theta`.
pub fn place(
    state: &SceneState,
    q: (f64, f64),
    theta: f64,
    params: &SimParams,
) -> Result<ActionResult, SimError> {
    let held = state
        .held_index()
        .ok_or_else(|| SimError::Contract("place with nothing held".into()))?;
    let obj = &state.objects[held];
    let g = obj
        .grasp_local
        .expect("held object records its grasp point");
    let theta_new = wrap_angle(obj.pose.theta - theta);
    let pose_new = if theta == 0.0 {
        // exact translation: reuses the stale pose so that placing back at
        // the pre-suction grasp point restores the pose bit-for-bit
        let gw = obj.pose.apply(g);
        Pose2 {
            x: obj.pose.x + (q.0 - gw.0),
            y: obj.pose.y + (q.1 - gw.1),
            theta: obj.pose.theta,
        }
    } else {
        let (s, c) = theta_new.sin_cos();
        Pose2 {
            x: q.0 - (c * g.0 - s * g.1),
            y: q.1 - (s * g.0 + c * g.1),
            theta: theta_new,
        }
    };

    let ws = &state.workspace;
    if ws.in_kit_half(q) {
        place_in_kit(state, held, pose_new, params)
    } else if ws.in_object_half(q) {
        place_on_table(state, held, pose_new)
    } else {
        Ok(drop_failure(state, held, FailureReason::OutOfBounds))
    }
}

fn place_in_kit(
    state: &SceneState,
    held: usize,
    pose_new: Pose2,
    params: &SimParams,
) -> Result<ActionResult, SimError> {
    let kit = &state.kit;
    let ospec = &kit.objects[held];
    let obj_shape = kit.object_shape(ospec.shape_id);

    let mut fit_but_blocked = false;
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for ci in 0..kit.spec.cavities.len() {
        let cav_pose = kit.cavity_world_pose(&state.kit_pose, ci);
        // cheap gate: anchor distance
        let d2 = (cav_pose.x - pose_new.x).powi(2) + (cav_pose.y - pose_new.y).powi(2);
        if d2.sqrt() > 0.05 {
            continue;
        }
        let rel = cav_pose.invert().compose(&pose_new);
        let cav_shape = kit.shape(kit.spec.cavities[ci].shape_id);
        if !check_fit(&obj_shape, cav_shape, &rel, params) {
            continue;
        }
        if state.cavity_occupant(ci).is_some() || !layer_ok(state, ci) {
            fit_but_blocked = true;
            continue;
        }
        candidates.push((ci, d2));
    }
    if let Some((ci, _)) = candidates
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
    {
        let mut new_state = state.clone();
        // settle to the cavity's exact pose
        new_state.objects[held].pose = kit.cavity_world_pose(&state.kit_pose, ci);
        new_state.objects[held].location = ObjectLocation::InCavity(ci);
        new_state.objects[held].grasp_local = None;
        return Ok(ActionResult {
            success: true,
            new_state,
            failure_reason: FailureReason::None,
            object_index: Some(held),
        });
    }
    let reason = if fit_but_blocked {
        FailureReason::OrderViolation
    } else {
        FailureReason::Misfit
    };
    Ok(drop_failure(state, held, reason))
}

fn place_on_table(
    state: &SceneState,
    held: usize,
    pose_new: Pose2,
) -> Result<ActionResult, SimError> {
    if !table_pose_free(state, held, &pose_new) {
        return Ok(drop_failure(state, held, FailureReason::Misfit));
    }
    let mut new_state = state.clone();
    new_state.objects[held].pose = pose_new;
    new_state.objects[held].location = ObjectLocation::OnTable;
    new_state.objects[held].grasp_local = None;
    Ok(ActionResult {
        success: true,
        new_state,
        failure_reason: FailureReason::None,
        object_index: Some(held),
    })
}

/// Bounding-disk test: inside the object half and clear of other loose
/// objects (a conservative stand-in for pixel overlap).
fn table_pose_free(state: &SceneState, idx: usize, pose: &Pose2) -> bool {
    let kit = &state.kit;
    let ws = &state.workspace;
    let radius = kit.shape(kit.objects[idx].shape_id).max_radius_m();
    let margin = 0.004;
    let (ocx, ocy) = ws.object_center();
    if (pose.x - ocx).abs() > ws.half_w_m / 2.0 - radius - margin
        || (pose.y - ocy).abs() > ws.half_h_m / 2.0 - radius - margin
    {
        return false;
    }
    for (j, other) in state.objects.iter().enumerate() {
        if j == idx || other.location != ObjectLocation::OnTable {
            continue;
        }
        let rj = kit.shape(kit.objects[j].shape_id).max_radius_m();
        let d = ((other.pose.x - pose.x).powi(2) + (other.pose.y - pose.y).powi(2)).sqrt();
        if d <= radius + rj + 0.002 {
            return false;
        }
    }
    true
}

/// A failed release drops the object to a deterministic free table pose
/// derived from the scene seed and the attempted pose.
fn drop_failure(state: &SceneState, held: usize, reason: FailureReason) -> ActionResult {
    let mut new_state = state.clone();
    let key = state.objects[held].pose.x.to_bits() ^ state.objects[held].pose.theta.to_bits();
    let mut rng = stream(
        derive_seed(state.rng_seed, "drop", held as u64),
        "drop-pose",
        key,
    );
    let ws = &state.workspace;
    let kit = &state.kit;
    let radius = kit.shape(kit.objects[held].shape_id).max_radius_m();
    let (ocx, ocy) = ws.object_center();
    let fx = ws.half_w_m / 2.0 - radius - 0.006;
    let fy = ws.half_h_m / 2.0 - radius - 0.006;
    for _ in 0..2000 {
        let pose = Pose2::new(
            ocx + rng.gen_range(-fx..=fx),
            ocy + rng.gen_range(-fy..=fy),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if table_pose_free(&new_state, held, &pose) {
            new_state.objects[held].pose = pose;
            new_state.objects[held].location = ObjectLocation::OnTable;
            new_state.objects[held].grasp_local = None;
            return ActionResult {
                success: false,
                new_state,
                failure_reason: reason,
                object_index: Some(held),
            };
        }
    }
    // table is pathologically full; leave it held so invariants survive
    ActionResult {
        success: false,
        new_state,
        failure_reason: reason,
        object_index: Some(held),
    }
}

/// True iff the transformed object mask stays inside the cavity dilated by
/// `fit_tol_px` and covers at least `fit_coverage` of the cavity area.
pub fn check_fit(
    object: &ShapeMask,
    cavity: &ShapeMask,
    relative_pose: &Pose2,
    params: &SimParams,
) -> bool {
    assert!(
        (object.pixel_size - cavity.pixel_size).abs() < 1e-12,
        "masks must share pixel size"
    );
    let dilated = cavity.grid.dilate(params.fit_tol_px);
    // containment: every object cell maps into the dilated cavity
    for (r, c) in object.grid.cells() {
        let local = object.cell_to_local(r, c);
        let pt = relative_pose.apply(local);
        let cell = cavity.local_to_cell(pt.0, pt.1);
        if !dilated.get_i(cell.0, cell.1) {
            return false;
        }
    }
    // coverage: enough cavity cells are backed by the object
    let inv = relative_pose.invert();
    let mut covered = 0usize;
    let mut total = 0usize;
    for (r, c) in cavity.grid.cells() {
        total += 1;
        let local = cavity.cell_to_local(r, c);
        let pt = inv.apply(local);
        if object.contains_local(pt.0, pt.1) {
            covered += 1;
        }
    }
    total > 0 && covered as f64 >= params.fit_coverage * total as f64
}

/// True iff every supporting cavity below `ci` is occupied.
pub fn layer_ok(state: &SceneState, ci: usize) -> bool {
    state
        .kit
        .supporting_cavities(ci)
        .iter()
        .all(|below| state.cavity_occupant(*below).is_some())
}

/// State sanity used by tests and the collector after every transition:
/// object multiset conserved (implicit: indices are stable), at most one
/// held, in-cavity poses near their ideal, loose objects disjoint.
pub fn validate_state(state: &SceneState, params: &SimParams) -> Result<(), SimError> {
    let mut held = 0;
    for (i, obj) in state.objects.iter().enumerate() {
        match obj.location {
            ObjectLocation::Held => {
                held += 1;
                if obj.grasp_local.is_none() {
                    return Err(SimError::Contract(format!(
                        "held object {i} lost its grasp point"
                    )));
                }
            }
            ObjectLocation::InCavity(ci) => {
                let ideal = state.kit.cavity_world_pose(&state.kit_pose, ci);
                let (dt, da) = obj.pose.delta(&ideal);
                let tol_m = (params.fit_tol_px + 2) as f64
                    * state.kit.shape(state.kit.objects[i].shape_id).pixel_size;
                if dt > tol_m + 1e-9 && da > 0.35 {
                    return Err(SimError::Contract(format!(
                        "object {i} drifted from cavity {ci}: {dt} m, {da} rad"
                    )));
                }
            }
            ObjectLocation::OnTable => {
                if !table_pose_free_excluding(state, i) {
                    return Err(SimError::Contract(format!(
                        "loose object {i} overlaps another"
                    )));
                }
            }
        }
    }
    if held > 1 {
        return Err(SimError::Contract(format!("{held} objects held")));
    }
    Ok(())
}

fn table_pose_free_excluding(state: &SceneState, idx: usize) -> bool {
    let kit = &state.kit;
    let pose = state.objects[idx].pose;
    let radius = kit.shape(kit.objects[idx].shape_id).max_radius_m();
    for (j, other) in state.objects.iter().enumerate() {
        if j <= idx || other.location != ObjectLocation::OnTable {
            continue;
        }
        let rj = kit.shape(kit.objects[j].shape_id).max_radius_m();
        let d = ((other.pose.x - pose.x).powi(2) + (other.pose.y - pose.y).powi(2)).sqrt();
        if d <= radius + rj {
            return false;
        }
    }
    true
}

/// Convenience for tests and the oracle picker: a deterministic interior
/// grasp point of object `idx` (a mask cell well inside the silhouette).
pub fn interior_grasp_point(
    state: &SceneState,
    idx: usize,
    margin_px: usize,
    rng: &mut impl Rng,
) -> Option<(f64, f64)> {
    let kit = &state.kit;
    let shape = kit.object_shape(kit.objects[idx].shape_id);
    let deep = shape.grid.erode(margin_px.max(1));
    let pick_from = if deep.is_empty() {
        shape.grid.erode(1)
    } else {
        deep
    };
    let cells: Vec<_> = pick_from.cells().collect();
    if cells.is_empty() {
        return None;
    }
    let (r, c) = cells[rng.gen_range(0..cells.len())];
    let local = shape.cell_to_local(r, c);
    Some(state.objects[idx].pose.apply(local))
}

/// An object is extractable when no object resting in a higher layer
/// overlaps its silhouette (pulling it out would disturb the stack).
pub fn unoccluded(state: &SceneState, idx: usize) -> bool {
    let kit = &state.kit;
    let layer_of = |o: &crate::scene::ObjectState| match o.location {
        ObjectLocation::InCavity(ci) => kit.spec.cavities[ci].layer as i64,
        _ => -1,
    };
    let my_layer = layer_of(&state.objects[idx]);
    let my_pose = state.objects[idx].pose;
    let my_shape = kit.object_shape(kit.objects[idx].shape_id);
    for (j, other) in state.objects.iter().enumerate() {
        if j == idx || layer_of(other) <= my_layer {
            continue;
        }
        // sample the other object's cells into my frame
        let other_shape = kit.object_shape(kit.objects[j].shape_id);
        let to_mine = my_pose.invert().compose(&other.pose);
        for (r, c) in other_shape.grid.cells() {
            let local = other_shape.cell_to_local(r, c);
            let pt = to_mine.apply(local);
            if my_shape.contains_local(pt.0, pt.1) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::scene::kit::{generate_kit, KitGenParams};
    use crate::scene::{scatter_objects, SceneState, Workspace};
    use std::sync::Arc;

    fn cfg() -> RunConfig {
        RunConfig::desk()
    }

    fn assembled(seed: u64, n: usize, layers: usize) -> (SceneState, SimParams) {
        let cfg = cfg();
        let kit = generate_kit(seed, n, layers, &KitGenParams::from_config(&cfg)).unwrap();
        let ws = Workspace::from_config(&cfg);
        (
            SceneState::assembled(kit, Pose2::IDENTITY, ws, seed),
            SimParams::from_config(&cfg),
        )
    }

    #[test]
    fn suction_at_centroid_succeeds() {
        let cfg = cfg();
        let kit = generate_kit(21, 1, 1, &KitGenParams::from_config(&cfg)).unwrap();
        let ws = Workspace::from_config(&cfg);
        let scene = scatter_objects(&kit, ws, &cfg.scatter, 5).unwrap();
        let p = (scene.objects[0].pose.x, scene.objects[0].pose.y);
        let res = suction(&scene, p, &SimParams::from_config(&cfg)).unwrap();
        assert!(res.success);
        assert_eq!(res.new_state.objects[0].location, ObjectLocation::Held);
    }

    #[test]
    fn suction_on_bare_table_misses() {
        let (scene, params) = assembled(21, 1, 1);
        let p = scene.workspace.object_center();
        let res = suction(&scene, p, &params).unwrap();
        assert!(!res.success);
        assert_eq!(res.failure_reason, FailureReason::MissedObject);
    }

    #[test]
    fn suction_refuses_double_hold() {
        let (scene, params) = assembled(21, 1, 1);
        let p = (scene.objects[0].pose.x, scene.objects[0].pose.y);
        let held = suction(&scene, p, &params).unwrap().new_state;
        assert!(suction(&held, p, &params).is_err());
    }

    #[test]
    fn occluded_bottom_object_in_stacked_kit() {
        let (scene, params) = assembled(2, 5, 2);
        let kit = &scene.kit;
        // find a bottom object partially covered by a top object
        let mut probe = None;
        'outer: for (bi, cav) in kit.spec.cavities.iter().enumerate() {
            if cav.layer != 0 {
                continue;
            }
            let bshape = kit.object_shape(cav.shape_id);
            let beroded = bshape.grid.erode(params.suction_margin_px);
            for (r, c) in beroded.cells() {
                let local = bshape.cell_to_local(r, c);
                let world = scene.objects[bi].pose.apply(local);
                // covered by some top object's full mask but not its grip zone?
                for (ti, tcav) in kit.spec.cavities.iter().enumerate() {
                    if tcav.layer != 1 {
                        continue;
                    }
                    let tshape = kit.object_shape(tcav.shape_id);
                    let tl = scene.objects[ti].pose.invert().apply(world);
                    let cell = tshape.local_to_cell(tl.0, tl.1);
                    let full = tshape.grid.get_i(cell.0, cell.1);
                    let grip = tshape
                        .grid
                        .erode(params.suction_margin_px)
                        .get_i(cell.0, cell.1);
                    if full && !grip {
                        probe = Some(world);
                        break 'outer;
                    }
                }
            }
        }
        let p = probe.expect("stacked kit has a rim-covered bottom point");
        let res = suction(&scene, p, &params).unwrap();
        assert!(!res.success);
        assert_eq!(res.failure_reason, FailureReason::Occluded);
    }

    #[test]
    fn place_back_at_ground_truth_succeeds_and_restores() {
        let (scene, params) = assembled(23, 2, 1);
        let mut rng = crate::rng::stream(1, "test-grasp", 0);
        let p = interior_grasp_point(&scene, 0, 3, &mut rng).unwrap();
        let res = suction(&scene, p, &params).unwrap();
        assert!(res.success);
        // reverse: place at the same grasp world point, zero rotation
        let res2 = place(&res.new_state, p, 0.0, &params).unwrap();
        assert!(res2.success, "failed: {:?}", res2.failure_reason);
        assert!(res2.new_state.bits_eq(&scene), "state must restore exactly");
    }

    #[test]
    fn misfit_when_flipped_asymmetric() {
        let cfg = cfg();
        // find a clearly asymmetric kit
        let mut seed = 30;
        let (kit, params) = loop {
            let kit =
                generate_kit(seed, 1, 1, &KitGenParams::from_config(&cfg)).unwrap();
            if kit.objects[0].symmetry_order == 1 {
                break (kit, SimParams::from_config(&cfg));
            }
            seed += 1;
        };
        let ws = Workspace::from_config(&cfg);
        let scene = SceneState::assembled(kit, Pose2::IDENTITY, ws, 1);
        let mut rng = crate::rng::stream(2, "test-grasp", 0);
        let p = interior_grasp_point(&scene, 0, 3, &mut rng).unwrap();
        let held = suction(&scene, p, &params).unwrap().new_state;
        let res = place(&held, p, std::f64::consts::PI, &params).unwrap();
        assert!(!res.success);
        assert_eq!(res.failure_reason, FailureReason::Misfit);
        // failed placement dropped it to a free table pose
        assert_eq!(res.new_state.objects[0].location, ObjectLocation::OnTable);
        validate_state(&res.new_state, &params).unwrap();
    }

    #[test]
    fn order_violation_on_empty_bottom_layer() {
        let (scene, params) = assembled(2, 5, 2);
        let kit = Arc::clone(&scene.kit);
        let top_ci = kit
            .spec
            .cavities
            .iter()
            .position(|c| c.layer == 1)
            .unwrap();
        // empty the kit except nothing; try to place an object into the top
        // cavity of an otherwise empty kit
        let ws = scene.workspace;
        let empty = scatter_objects(&kit, ws, &cfg().scatter, 77).unwrap();
        assert!(!layer_ok(&empty, top_ci));
        let mut rng = crate::rng::stream(3, "test-grasp", 0);
        let p = interior_grasp_point(&empty, top_ci, 3, &mut rng).unwrap();
        let held = suction(&empty, p, &params).unwrap();
        assert!(held.success, "{:?}", held.failure_reason);
        assert_eq!(held.object_index, Some(top_ci));
        let target = kit.cavity_world_pose(&empty.kit_pose, top_ci);
        // grasp lands where the object's grasp point would sit at the ideal pose
        let g = held.new_state.objects[top_ci].grasp_local.unwrap();
        let q = target.apply(g);
        let theta = wrap_angle(held.new_state.objects[top_ci].pose.theta - target.theta);
        let res = place(&held.new_state, q, theta, &params).unwrap();
        assert!(!res.success);
        assert_eq!(res.failure_reason, FailureReason::OrderViolation);
    }

    #[test]
    fn layer_ok_cases() {
        let (scene, _params) = assembled(2, 5, 2);
        let kit = &scene.kit;
        for ci in 0..kit.spec.cavities.len() {
            assert!(layer_ok(&scene, ci), "assembled kit satisfies every layer");
        }
        // bottom cavities are fine even in an empty kit
        let empty = scatter_objects(
            &Arc::clone(&scene.kit),
            scene.workspace,
            &cfg().scatter,
            78,
        )
        .unwrap();
        for (ci, cav) in kit.spec.cavities.iter().enumerate() {
            assert_eq!(layer_ok(&empty, ci), cav.layer == 0);
        }
    }

    #[test]
    fn check_fit_examples() {
        let cfg = cfg();
        let params = SimParams::from_config(&cfg);
        let kit = generate_kit(33, 1, 1, &KitGenParams::from_config(&cfg)).unwrap();
        let cav = kit.shape(0);
        let obj = kit.object_shape(0);
        // identity: the eroded object fits its own cavity
        assert!(check_fit(&obj, cav, &Pose2::IDENTITY, &params));
        // 3 px translation with 1 px tolerance fails
        let off = Pose2::translation(3.0 * cav.pixel_size, 0.0);
        assert!(!check_fit(&obj, cav, &off, &params));
    }

    #[test]
    fn disk_fits_at_any_rotation() {
        let cfg = cfg();
        let params = SimParams::from_config(&cfg);
        // a near-circular shape: many vertices, zero roughness
        let shape = crate::scene::generate_shape(
            9,
            &crate::scene::ShapeParams {
                n_vertices: 64,
                radius_m: cfg.gen.shape_radius_m,
                roughness: 0.0,
                pixel_size: cfg.shape_pixel_size,
            },
        )
        .unwrap();
        let obj = ShapeMask {
            grid: shape.grid.erode(cfg.clearance_px),
            anchor: shape.anchor,
            pixel_size: shape.pixel_size,
        };
        for k in 0..8 {
            let rot = Pose2::rotation(k as f64 * std::f64::consts::TAU / 8.0 + 0.17);
            assert!(check_fit(&obj, &shape, &rot, &params), "rotation {k}");
        }
    }

    #[test]
    fn conservation_across_action_sequences() {
        let (scene, params) = assembled(23, 3, 1);
        let mut state = scene.clone();
        let mut rng = crate::rng::stream(9, "conserve", 0);
        for step in 0..6 {
            let idx = step % 3;
            if state.objects[idx].location == ObjectLocation::Held {
                continue;
            }
            if let Some(p) = interior_grasp_point(&state, idx, 2, &mut rng) {
                let r = suction(&state, p, &params).unwrap();
                state = r.new_state;
                if r.success {
                    let q = (
                        state.workspace.object_center().0 + rng.gen_range(-0.1..0.1),
                        rng.gen_range(-0.1..0.1),
                    );
                    let r2 = place(&state, q, rng.gen_range(-3.0..3.0), &params).unwrap();
                    state = r2.new_state;
                }
            }
            assert_eq!(state.objects.len(), 3);
            validate_state(&state, &params).unwrap();
        }
    }
}
