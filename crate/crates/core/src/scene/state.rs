//! World state: a kit board plus its objects, each in a cavity, loose on
//! the table half, or held by the (implicit) gripper.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::kit::Kit;
use super::pose::Pose2;
use super::SceneError;
use crate::config::{RunConfig, ScatterConfig};
use crate::rng::stream;

/// Where an object currently is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectLocation {
    InCavity(usize),
    OnTable,
    Held,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectState {
    /// World pose of the object's local frame. While held, `theta` is the
    /// orientation at suction time and `x, y` are stale.
    pub pose: Pose2,
    pub location: ObjectLocation,
    /// Grasp point in the object's local frame, present while held.
    pub grasp_local: Option<(f64, f64)>,
}

/// The two-half tabletop. The kit half is centered on the world origin;
/// the object half sits directly to its right.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Workspace {
    /// Half-image extent in meters: (height, width).
    pub half_h_m: f64,
    pub half_w_m: f64,
}

impl Workspace {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let (h, w) = cfg.half_extent_m();
        Workspace {
            half_h_m: h,
            half_w_m: w,
        }
    }

    pub fn kit_center(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    pub fn object_center(&self) -> (f64, f64) {
        (self.half_w_m, 0.0)
    }

    /// Is a world point inside the kit half?
    pub fn in_kit_half(&self, pt: (f64, f64)) -> bool {
        pt.0 >= -self.half_w_m / 2.0
            && pt.0 < self.half_w_m / 2.0
            && pt.1.abs() <= self.half_h_m / 2.0
    }

    /// Is a world point inside the object half?
    pub fn in_object_half(&self, pt: (f64, f64)) -> bool {
        pt.0 >= self.half_w_m / 2.0
            && pt.0 < 1.5 * self.half_w_m
            && pt.1.abs() <= self.half_h_m / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct SceneState {
    pub kit: Arc<Kit>,
    pub kit_pose: Pose2,
    pub objects: Vec<ObjectState>,
    pub workspace: Workspace,
    pub rng_seed: u64,
}

impl SceneState {
    /// Fully assembled scene: every object at its ideal cavity pose.
    pub fn assembled(kit: Arc<Kit>, kit_pose: Pose2, workspace: Workspace, seed: u64) -> Self {
        let objects = (0..kit.objects.len())
            .map(|i| ObjectState {
                pose: kit.cavity_world_pose(&kit_pose, i),
                location: ObjectLocation::InCavity(i),
                grasp_local: None,
            })
            .collect();
        SceneState {
            kit,
            kit_pose,
            objects,
            workspace,
            rng_seed: seed,
        }
    }

    pub fn held_index(&self) -> Option<usize> {
        self.objects
            .iter()
            .position(|o| o.location == ObjectLocation::Held)
    }

    /// Object occupying cavity `ci`, if any.
    pub fn cavity_occupant(&self, ci: usize) -> Option<usize> {
        self.objects
            .iter()
            .position(|o| o.location == ObjectLocation::InCavity(ci))
    }

    pub fn kit_full(&self) -> bool {
        (0..self.kit.spec.cavities.len()).all(|ci| self.cavity_occupant(ci).is_some())
    }

    pub fn kit_empty(&self) -> bool {
        !self
            .objects
            .iter()
            .any(|o| matches!(o.location, ObjectLocation::InCavity(_)))
    }

    /// Does the object's silhouette cover this world point?
    pub fn object_contains_world(&self, idx: usize, pt: (f64, f64)) -> bool {
        let o = &self.objects[idx];
        let local = o.pose.invert().apply(pt);
        self.kit
            .object_shape(self.kit.objects[idx].shape_id)
            .contains_local(local.0, local.1)
    }

    /// Strict component-wise equality of the dynamic state (poses, tags,
    /// grasp points); the kit reference must be the same family.
    pub fn bits_eq(&self, other: &SceneState) -> bool {
        if self.kit.id != other.kit.id
            || !self.kit_pose.bits_eq(&other.kit_pose)
            || self.objects.len() != other.objects.len()
            || self.rng_seed != other.rng_seed
        {
            return false;
        }
        self.objects.iter().zip(&other.objects).all(|(a, b)| {
            a.location == b.location
                && a.pose.bits_eq(&b.pose)
                && match (a.grasp_local, b.grasp_local) {
                    (None, None) => true,
                    (Some(x), Some(y)) => {
                        x.0.to_bits() == y.0.to_bits() && x.1.to_bits() == y.1.to_bits()
                    }
                    _ => false,
                }
        })
    }

    fn light_invariants(&self) -> Result<(), SceneError> {
        let held = self
            .objects
            .iter()
            .filter(|o| o.location == ObjectLocation::Held)
            .count();
        if held > 1 {
            return Err(SceneError::StateInvariant(format!(
                "{held} objects held at once"
            )));
        }
        Ok(())
    }
}

/// Sample a scene with the kit board posed in the kit half and every
/// object loose in the object half. Deterministic in `seed`.
pub fn scatter_objects(
    kit: &Arc<Kit>,
    workspace: Workspace,
    sc: &ScatterConfig,
    seed: u64,
) -> Result<SceneState, SceneError> {
    let mut rng = stream(seed, "scatter", 0);
    let margin = 0.006;
    let (bw, bh) = kit.spec.board_extent;

    let kit_pose = if sc.kit_fixed {
        Pose2::IDENTITY
    } else {
        let mut found = None;
        for _ in 0..sc.max_attempts {
            let max = sc.kit_theta_max_deg.to_radians();
            let theta = rng.gen_range(-max..=max);
            let (s, c) = (theta.sin().abs(), theta.cos().abs());
            let rw = bw * c + bh * s;
            let rh = bw * s + bh * c;
            if rw + 2.0 * margin > workspace.half_w_m || rh + 2.0 * margin > workspace.half_h_m {
                continue;
            }
            let fx = (workspace.half_w_m - rw) / 2.0 - margin;
            let fy = (workspace.half_h_m - rh) / 2.0 - margin;
            let x = rng.gen_range(-fx..=fx);
            let y = rng.gen_range(-fy..=fy);
            found = Some(Pose2::new(x, y, theta));
            break;
        }
        found.ok_or_else(|| SceneError::Scatter("no kit pose fits the kit half".into()))?
    };

    let mut placed: Vec<(Pose2, f64)> = Vec::new();
    let mut objects = Vec::new();
    let (ocx, ocy) = workspace.object_center();
    for (i, ospec) in kit.objects.iter().enumerate() {
        let shape = kit.shape(ospec.shape_id);
        let radius = shape.max_radius_m();
        let fx = workspace.half_w_m / 2.0 - radius - margin;
        let fy = workspace.half_h_m / 2.0 - radius - margin;
        if fx <= 0.0 || fy <= 0.0 {
            return Err(SceneError::Scatter(format!(
                "object {i} too large for the object half"
            )));
        }
        let mut pose = None;
        for _ in 0..sc.max_attempts {
            let max = sc.obj_theta_max_deg.to_radians();
            let theta = rng.gen_range(-max..=max);
            let x = ocx + rng.gen_range(-fx..=fx);
            let y = ocy + rng.gen_range(-fy..=fy);
            let ok = placed
                .iter()
                .all(|(p, r)| ((p.x - x).powi(2) + (p.y - y).powi(2)).sqrt() > r + radius + 0.002);
            if ok {
                pose = Some(Pose2::new(x, y, theta));
                break;
            }
        }
        let pose = pose.ok_or_else(|| {
            SceneError::Scatter(format!("no free table pose for object {i}"))
        })?;
        placed.push((pose, radius));
        objects.push(ObjectState {
            pose,
            location: ObjectLocation::OnTable,
            grasp_local: None,
        });
    }

    let state = SceneState {
        kit: Arc::clone(kit),
        kit_pose,
        objects,
        workspace,
        rng_seed: seed,
    };
    state.light_invariants()?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::scene::kit::{generate_kit, KitGenParams};

    fn setup(n: usize) -> (Arc<Kit>, Workspace, RunConfig) {
        let cfg = RunConfig::desk();
        let kit = generate_kit(4, n, 1, &KitGenParams::from_config(&cfg)).unwrap();
        (kit, Workspace::from_config(&cfg), cfg)
    }

    #[test]
    fn fixed_mode_pins_kit_pose() {
        let (kit, ws, cfg) = setup(2);
        let mut sc = cfg.scatter.clone();
        sc.kit_fixed = true;
        for seed in 0..5 {
            let s = scatter_objects(&kit, ws, &sc, seed).unwrap();
            assert!(s.kit_pose.bits_eq(&Pose2::IDENTITY));
        }
    }

    #[test]
    fn kit_theta_respects_range() {
        let (kit, ws, cfg) = setup(1);
        let mut sc = cfg.scatter.clone();
        sc.kit_fixed = false;
        sc.kit_theta_max_deg = 120.0;
        for seed in 0..40 {
            let s = scatter_objects(&kit, ws, &sc, seed).unwrap();
            assert!(s.kit_pose.theta.to_degrees().abs() <= 120.0 + 1e-9);
        }
    }

    #[test]
    fn zero_objects_is_a_valid_scene() {
        let cfg = RunConfig::desk();
        let kit = generate_kit(4, 1, 1, &KitGenParams::from_config(&cfg)).unwrap();
        // simulate an empty kit by taking the generated kit and no objects:
        // scatter still works with the kit's own object list; emptiness is
        // covered by an assembled scene with zero cavities being impossible,
        // so probe the workspace predicate directly instead.
        let ws = Workspace::from_config(&cfg);
        assert!(ws.in_kit_half((0.0, 0.0)));
        assert!(ws.in_object_half(ws.object_center()));
        assert!(!ws.in_object_half((0.0, 0.0)));
        let _ = kit;
    }

    #[test]
    fn scatter_objects_stay_in_object_half_disjoint() {
        let (kit, ws, cfg) = setup(4);
        for seed in 0..10 {
            let s = scatter_objects(&kit, ws, &cfg.scatter, seed).unwrap();
            for (i, o) in s.objects.iter().enumerate() {
                assert_eq!(o.location, ObjectLocation::OnTable);
                assert!(ws.in_object_half((o.pose.x, o.pose.y)), "object {i}");
            }
            for i in 0..s.objects.len() {
                for j in (i + 1)..s.objects.len() {
                    let a = &s.objects[i].pose;
                    let b = &s.objects[j].pose;
                    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                    let ra = kit.shape(kit.objects[i].shape_id).max_radius_m();
                    let rb = kit.shape(kit.objects[j].shape_id).max_radius_m();
                    assert!(d > ra + rb, "objects {i},{j} overlap");
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (kit, ws, cfg) = setup(3);
        let a = scatter_objects(&kit, ws, &cfg.scatter, 11).unwrap();
        let b = scatter_objects(&kit, ws, &cfg.scatter, 11).unwrap();
        assert!(a.bits_eq(&b));
    }

    #[test]
    fn assembled_scene_occupies_every_cavity() {
        let (kit, ws, _) = setup(3);
        let s = SceneState::assembled(Arc::clone(&kit), Pose2::IDENTITY, ws, 0);
        assert!(s.kit_full());
        assert!(!s.kit_empty());
        for ci in 0..kit.spec.cavities.len() {
            assert_eq!(s.cavity_occupant(ci), Some(ci));
        }
    }
}
