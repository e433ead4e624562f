//! Kit boards, cavities and their objects, plus the procedural generator
//! for single-layer and two-layer (stacked) kit families.

use crate::mask::{round_cell, Mask};
use crate::rng::{derive_seed, stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use super::pose::Pose2;
use super::shape::{generate_shape, ShapeMask, ShapeParams};
use super::SceneError;

pub type ShapeId = u32;

/// One recess in the board: a shape placed at a pose in the board frame,
/// on a stacking layer (0 = bottom).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cavity {
    pub shape_id: ShapeId,
    pub pose: Pose2,
    pub layer: usize,
}

/// Board geometry. Lengths in meters; the clearance between a cavity and
/// its object is stored in meters but is an integer number of shape cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KitSpec {
    pub board_extent: (f64, f64),
    pub board_height: f64,
    pub cavities: Vec<Cavity>,
    pub clearance: f64,
    pub layers: usize,
}

/// One object: references the cavity shape it was eroded from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape_id: ShapeId,
    pub height: f64,
    pub gray_value: f64,
    pub symmetry_order: usize,
}

/// A kit family: board spec, its objects and the shape registry they share.
/// Object `i` belongs to cavity `i`.
#[derive(Debug, Clone)]
pub struct Kit {
    pub id: String,
    pub spec: KitSpec,
    pub objects: Vec<ObjectSpec>,
    pub shapes: BTreeMap<ShapeId, ShapeMask>,
    object_masks: BTreeMap<ShapeId, Mask>,
    /// Per cavity: the layer-below cavities its footprint rests on.
    supports: Vec<Vec<usize>>,
}

impl Kit {
    pub fn new(
        id: String,
        spec: KitSpec,
        objects: Vec<ObjectSpec>,
        shapes: BTreeMap<ShapeId, ShapeMask>,
    ) -> Result<Self, SceneError> {
        let clearance_px = (spec.clearance
            / shapes
                .values()
                .next()
                .map(|s| s.pixel_size)
                .unwrap_or(1.0))
        .round() as usize;
        let object_masks = shapes
            .iter()
            .map(|(id, s)| (*id, s.grid.erode(clearance_px)))
            .collect();
        let mut kit = Kit {
            id,
            spec,
            objects,
            shapes,
            object_masks,
            supports: Vec::new(),
        };
        kit.check_invariants()?;
        kit.supports = (0..kit.spec.cavities.len())
            .map(|ci| kit.compute_supports(ci))
            .collect();
        Ok(kit)
    }

    pub fn shape(&self, id: ShapeId) -> &ShapeMask {
        &self.shapes[&id]
    }

    /// The object silhouette: cavity shape eroded by the clearance.
    pub fn object_mask(&self, id: ShapeId) -> &Mask {
        &self.object_masks[&id]
    }

    /// Object silhouette wrapped as a ShapeMask sharing the cavity anchor,
    /// so object and cavity local frames coincide.
    pub fn object_shape(&self, id: ShapeId) -> ShapeMask {
        let cav = self.shape(id);
        ShapeMask {
            grid: self.object_mask(id).clone(),
            anchor: cav.anchor,
            pixel_size: cav.pixel_size,
        }
    }

    pub fn clearance_px(&self) -> usize {
        let ps = self.shapes.values().next().map(|s| s.pixel_size).unwrap_or(1.0);
        (self.spec.clearance / ps).round() as usize
    }

    /// World pose of cavity `ci` given the kit board pose.
    pub fn cavity_world_pose(&self, kit_pose: &Pose2, ci: usize) -> Pose2 {
        kit_pose.compose(&self.spec.cavities[ci].pose)
    }

    /// Layer-below cavities whose footprint intersects cavity `ci`'s.
    pub fn supporting_cavities(&self, ci: usize) -> &[usize] {
        &self.supports[ci]
    }

    fn compute_supports(&self, ci: usize) -> Vec<usize> {
        let cav = &self.spec.cavities[ci];
        if cav.layer == 0 {
            return Vec::new();
        }
        let below_layer = cav.layer - 1;
        let my_fp = self.footprint_cells_board(ci);
        let mut out = Vec::new();
        for (j, other) in self.spec.cavities.iter().enumerate() {
            if other.layer != below_layer {
                continue;
            }
            let fp = self.footprint_cells_board(j);
            if my_fp.iter().any(|c| fp.contains(c)) {
                out.push(j);
            }
        }
        out
    }

    /// Footprint (dilated cavity) cell set in a fixed board-frame raster.
    fn footprint_cells_board(&self, ci: usize) -> std::collections::BTreeSet<(i64, i64)> {
        let cav = &self.spec.cavities[ci];
        let shape = self.shape(cav.shape_id);
        let fp = shape.grid.dilate(self.clearance_px());
        let ps = shape.pixel_size;
        let mut cells = std::collections::BTreeSet::new();
        for (r, c) in fp.cells() {
            let (lx, ly) = (
                (c as f64 - shape.anchor.1) * ps,
                (shape.anchor.0 - r as f64) * ps,
            );
            let (bx, by) = cav.pose.apply((lx, ly));
            cells.insert((round_cell(by / ps), round_cell(bx / ps)));
        }
        cells
    }

    fn check_invariants(&self) -> Result<(), SceneError> {
        if self.objects.len() != self.spec.cavities.len() {
            return Err(SceneError::KitInvariant(
                "object count must match cavity count".into(),
            ));
        }
        // same-layer footprints disjoint
        for i in 0..self.spec.cavities.len() {
            for j in (i + 1)..self.spec.cavities.len() {
                if self.spec.cavities[i].layer != self.spec.cavities[j].layer {
                    continue;
                }
                let a = self.footprint_cells_board(i);
                let b = self.footprint_cells_board(j);
                if a.iter().any(|c| b.contains(c)) {
                    return Err(SceneError::KitInvariant(format!(
                        "cavities {i} and {j} overlap within layer {}",
                        self.spec.cavities[i].layer
                    )));
                }
            }
        }
        // upper-layer cavities supported by the union below
        for (i, cav) in self.spec.cavities.iter().enumerate() {
            if cav.layer == 0 {
                continue;
            }
            let mine = self.footprint_cells_board(i);
            let mut below = std::collections::BTreeSet::new();
            for (j, other) in self.spec.cavities.iter().enumerate() {
                if other.layer + 1 == cav.layer {
                    below.extend(self.footprint_cells_board(j));
                }
            }
            let uncovered = mine.iter().filter(|c| !below.contains(*c)).count();
            // rounding between frames may leave a thin rim; demand 99%
            if uncovered * 100 > mine.len() {
                return Err(SceneError::KitInvariant(format!(
                    "cavity {i} (layer {}) not covered by the layer below ({uncovered}/{} cells exposed)",
                    cav.layer,
                    mine.len()
                )));
            }
        }
        Ok(())
    }
}

/// Generator knobs, typically derived from [`crate::config::RunConfig`].
#[derive(Debug, Clone)]
pub struct KitGenParams {
    pub shape_radius_m: f64,
    pub roughness: f64,
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub wall_m: f64,
    pub board_height_m: f64,
    pub clearance_px: usize,
    pub shape_pixel_size: f64,
    pub fit_coverage: f64,
    pub symmetry_iou: f64,
    pub symmetry_max_fold: usize,
}

impl KitGenParams {
    pub fn from_config(cfg: &crate::config::RunConfig) -> Self {
        KitGenParams {
            shape_radius_m: cfg.gen.shape_radius_m,
            roughness: cfg.gen.roughness,
            min_vertices: cfg.gen.min_vertices,
            max_vertices: cfg.gen.max_vertices,
            wall_m: cfg.gen.wall_m,
            board_height_m: cfg.gen.board_height_m,
            clearance_px: cfg.clearance_px,
            shape_pixel_size: cfg.shape_pixel_size,
            fit_coverage: cfg.fit_coverage,
            symmetry_iou: cfg.symmetry_iou,
            symmetry_max_fold: cfg.rotation_bins,
        }
    }
}

/// Generate a kit with `n_objects` cavities. `layers == 2` produces a
/// stacked kit: the bottom row holds ceil(n/2) cavities and the remaining
/// cavities sit on the seams above them, eroded to stay over the union of
/// the bottom footprints.
pub fn generate_kit(
    seed: u64,
    n_objects: usize,
    layers: usize,
    p: &KitGenParams,
) -> Result<Arc<Kit>, SceneError> {
    if n_objects == 0 || n_objects > 6 {
        return Err(SceneError::ShapeParams(format!(
            "n_objects must be 1..=6, got {n_objects}"
        )));
    }
    if !(layers == 1 || layers == 2) {
        return Err(SceneError::ShapeParams(format!(
            "layers must be 1 or 2, got {layers}"
        )));
    }
    match layers {
        1 => generate_flat_kit(seed, n_objects, p),
        _ => generate_stacked_kit(seed, n_objects, p),
    }
}

/// Generate a shape whose eroded object still covers `fit_coverage` of it
/// (with margin) so that generator and simulator stay self-consistent.
fn usable_shape(
    seed: u64,
    index: u64,
    p: &KitGenParams,
    roughness: f64,
) -> Result<ShapeMask, SceneError> {
    for attempt in 0..40u64 {
        let sub = derive_seed(seed, "kit-shape", index * 64 + attempt);
        let mut rng = stream(sub, "shape-verts", 0);
        let n_vertices = rng.gen_range(p.min_vertices..=p.max_vertices);
        let shape = generate_shape(
            sub,
            &ShapeParams {
                n_vertices,
                radius_m: p.shape_radius_m,
                roughness,
                pixel_size: p.shape_pixel_size,
            },
        )?;
        let obj = shape.grid.erode(p.clearance_px);
        let cover = obj.area() as f64 / shape.grid.area() as f64;
        if cover >= p.fit_coverage + 0.015 && !obj.is_empty() {
            return Ok(shape);
        }
    }
    Err(SceneError::Generation(
        "no usable shape after bounded attempts".into(),
    ))
}

fn object_from_shape(shape: &ShapeMask, p: &KitGenParams, height: f64, gray: f64) -> ObjectSpec {
    ObjectSpec {
        shape_id: 0, // fixed up by caller
        height,
        gray_value: gray,
        symmetry_order: shape.symmetry_order(p.symmetry_max_fold, p.symmetry_iou),
    }
}

fn generate_flat_kit(
    seed: u64,
    n_objects: usize,
    p: &KitGenParams,
) -> Result<Arc<Kit>, SceneError> {
    let mut rng = stream(seed, "kit-layout", 0);
    let mut shapes = BTreeMap::new();
    let mut cavities = Vec::new();
    let mut objects = Vec::new();

    let cols = (n_objects as f64).sqrt().ceil() as usize;
    let rows = n_objects.div_ceil(cols);

    let mut max_extent = 0.0f64;
    let mut shape_list = Vec::new();
    for i in 0..n_objects {
        let shape = usable_shape(seed, i as u64, p, p.roughness)?;
        max_extent = max_extent.max(2.0 * shape.max_radius_m());
        shape_list.push(shape);
    }
    let pitch = max_extent + 2.0 * (p.clearance_px as f64 + 2.0) * p.shape_pixel_size;
    let board_w = cols as f64 * pitch + 2.0 * p.wall_m;
    let board_h = rows as f64 * pitch + 2.0 * p.wall_m;

    for (i, shape) in shape_list.into_iter().enumerate() {
        let id = i as ShapeId;
        let (r, c) = (i / cols, i % cols);
        let x = (c as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
        let y = ((rows as f64 - 1.0) / 2.0 - r as f64) * pitch;
        let theta: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let gray: f64 = rng.gen_range(0.4..0.9);
        let mut obj = object_from_shape(&shape, p, p.board_height_m, gray);
        obj.shape_id = id;
        shapes.insert(id, shape);
        cavities.push(Cavity {
            shape_id: id,
            pose: Pose2::new(x, y, theta),
            layer: 0,
        });
        objects.push(obj);
    }

    let spec = KitSpec {
        board_extent: (board_w, board_h),
        board_height: p.board_height_m,
        cavities,
        clearance: p.clearance_px as f64 * p.shape_pixel_size,
        layers: 1,
    };
    let kit = Kit::new(
        format!("kit-{seed:05}-n{n_objects}-l1"),
        spec,
        objects,
        shapes,
    )?;
    Ok(Arc::new(kit))
}

fn generate_stacked_kit(
    seed: u64,
    n_objects: usize,
    p: &KitGenParams,
) -> Result<Arc<Kit>, SceneError> {
    if n_objects < 2 {
        return Err(SceneError::ShapeParams(
            "a stacked kit needs at least 2 objects".into(),
        ));
    }
    let mut rng = stream(seed, "kit-layout", 0);
    let n_bottom = n_objects.div_ceil(2);
    let n_top = n_objects - n_bottom;
    let ps = p.shape_pixel_size;

    // Rectangular bottom cavities: flat facing edges tile the seams, so the
    // union of bottom footprints is a solid strip the top row can rest on.
    // Odd dimensions keep the anchor on a whole cell.
    let r_px = (p.shape_radius_m / ps).round();
    let w_cells = (2.0 * r_px) as usize | 1;
    let h_cells = (2.4 * r_px) as usize | 1;
    let base = super::shape::rectangle_shape(w_cells, h_cells, ps);

    // footprints gap by exactly 2*clearance cells: dilations meet, no crack
    let pitch_cells = w_cells + 2 * p.clearance_px;
    let pitch = pitch_cells as f64 * ps;

    let mut shapes = BTreeMap::new();
    let mut cavities = Vec::new();
    let mut objects = Vec::new();
    let layer_h = p.board_height_m;

    for i in 0..n_bottom {
        let id = i as ShapeId;
        let x = (i as f64 - (n_bottom as f64 - 1.0) / 2.0) * pitch;
        let gray: f64 = rng.gen_range(0.4..0.9);
        let mut obj = object_from_shape(&base, p, layer_h, gray);
        obj.shape_id = id;
        shapes.insert(id, base.clone());
        cavities.push(Cavity {
            shape_id: id,
            pose: Pose2::new(x, 0.0, 0.0),
            layer: 0,
        });
        objects.push(obj);
    }

    // union of bottom footprints in a board-frame raster; cell indices use
    // the exact formula the kit invariant checker uses, plus an integer
    // offset (round_cell commutes with integer shifts)
    let span_m = n_bottom as f64 * pitch + 2.0 * p.wall_m;
    let grid_side = (span_m / ps).ceil() as usize + 8;
    let b_off = (grid_side / 2) as i64;
    let mut union = Mask::new(grid_side, grid_side);
    let fp = base.grid.dilate(p.clearance_px);
    for cav in &cavities {
        for (r, c) in fp.cells() {
            let (lx, ly) = (
                (c as f64 - base.anchor.1) * ps,
                (base.anchor.0 - r as f64) * ps,
            );
            let (bx, by) = cav.pose.apply((lx, ly));
            let br = round_cell(by / ps) + b_off;
            let bc = round_cell(bx / ps) + b_off;
            if br >= 0 && bc >= 0 && (br as usize) < grid_side && (bc as usize) < grid_side {
                union.set(br as usize, bc as usize, true);
            }
        }
    }
    let safe = union.erode(p.clearance_px + 1);

    for t in 0..n_top {
        let id = (n_bottom + t) as ShapeId;
        // seam between bottom cavities t and t+1
        let seam_x = (t as f64 - (n_bottom as f64 - 1.0) / 2.0) * pitch + pitch / 2.0;
        let mut found = None;
        for attempt in 0..60u64 {
            let sub = derive_seed(seed, "kit-topshape", t as u64 * 64 + attempt);
            let blob = generate_shape(
                sub,
                &ShapeParams {
                    n_vertices: 14,
                    radius_m: p.shape_radius_m,
                    roughness: 0.08,
                    pixel_size: ps,
                },
            )?;
            // clip the blob to the eroded union, expressed in the blob grid
            let mut clipped = Mask::new(blob.grid.h, blob.grid.w);
            for (r, c) in blob.grid.cells() {
                let (lx, ly) = blob.cell_to_local(r, c);
                let bx = seam_x + lx;
                let by = ly;
                let br = round_cell(by / ps) + b_off;
                let bc = round_cell(bx / ps) + b_off;
                if safe.get_i(br, bc) {
                    clipped.set(r, c, true);
                }
            }
            if clipped.is_empty() {
                continue;
            }
            let clipped_shape = ShapeMask {
                anchor: clipped.centroid().expect("nonempty"),
                grid: clipped,
                pixel_size: ps,
            };
            let obj = clipped_shape.grid.erode(p.clearance_px);
            let cover = obj.area() as f64 / clipped_shape.grid.area() as f64;
            if cover >= p.fit_coverage + 0.015 && !obj.is_empty() {
                found = Some((clipped_shape, blob.anchor));
                break;
            }
        }
        let (shape, old_anchor) =
            found.ok_or_else(|| SceneError::Generation("no usable top shape".into()))?;
        // clipping moved the anchor to the new centroid; shift the pose so
        // cells land exactly where the clip test placed them
        let pose = Pose2::new(
            seam_x + (shape.anchor.1 - old_anchor.1) * ps,
            (old_anchor.0 - shape.anchor.0) * ps,
            0.0,
        );
        let gray: f64 = rng.gen_range(0.4..0.9);
        let mut obj = object_from_shape(&shape, p, layer_h, gray);
        obj.shape_id = id;
        shapes.insert(id, shape);
        cavities.push(Cavity {
            shape_id: id,
            pose,
            layer: 1,
        });
        objects.push(obj);
    }

    let board_w = n_bottom as f64 * pitch + 2.0 * p.wall_m;
    let board_h = (h_cells + 4) as f64 * ps + 2.0 * p.wall_m;
    let spec = KitSpec {
        board_extent: (board_w, board_h),
        board_height: 2.0 * layer_h,
        cavities,
        clearance: p.clearance_px as f64 * ps,
        layers: 2,
    };
    let kit = Kit::new(
        format!("kit-{seed:05}-n{n_objects}-l2"),
        spec,
        objects,
        shapes,
    )?;
    Ok(Arc::new(kit))
}
