//! Orthographic heightmap rendering of scenes, the kit/object half split,
//! and the rotation stack consumed by the matching head.

pub mod heightmap;

pub use heightmap::{load_tensor, save_tensor, Heightmap, TENSOR_MAGIC};

use crate::config::RunConfig;
use crate::mask::round_cell;
use crate::scene::{ObjectLocation, SceneState};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("render io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad tensor file: {0}")]
    Format(String),
    #[error("geometry outside the crop region: {0}")]
    OutOfCrop(String),
    #[error("{0}")]
    Contract(String),
}

/// Rendering constants shared by every view of a run.
#[derive(Debug, Clone, Copy)]
pub struct RenderParams {
    pub half_px: (usize, usize),
    pub pixel_size: f64,
    pub table_gray: f32,
}

pub const BOARD_GRAY: f32 = 0.55;
pub const CAVITY_FLOOR_GRAY: f32 = 0.42;
/// Grayscale slope across an object's local x axis, the texture cue that
/// disambiguates 180-degree flips.
pub const OBJECT_SHADE: f32 = 0.12;

impl RenderParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        RenderParams {
            half_px: (cfg.half_extent_px[0], cfg.half_extent_px[1]),
            pixel_size: cfg.pixel_size,
            table_gray: cfg.table_gray as f32,
        }
    }

    pub fn background(&self) -> (f32, f32) {
        (self.table_gray, 0.0)
    }
}

/// The R rotated copies of a kit heightmap, angles in degrees CCW-world.
#[derive(Debug, Clone)]
pub struct RotationStack {
    pub maps: Vec<Heightmap>,
    pub angles_deg: Vec<f64>,
}

impl RotationStack {
    pub fn bins(&self) -> usize {
        self.maps.len()
    }
}

/// Render the full two-half workspace image. Surfaces:
/// bare table at height 0; board slab at `board_height` outside cavities;
/// cavity floors at `layer * board_height / layers`; objects resting on a
/// cavity floor or on the table. Held objects do not render.
pub fn render(scene: &SceneState, rp: &RenderParams) -> Result<Heightmap, RenderError> {
    let (hpx, wpx) = rp.half_px;
    let (full_h, full_w) = (hpx, 2 * wpx);
    let ps = rp.pixel_size;
    let half_w_m = wpx as f64 * ps;
    let half_h_m = hpx as f64 * ps;
    // pixel (0,0) center: left edge of the kit half, top of the workspace
    let origin = (-half_w_m / 2.0 + ps / 2.0, half_h_m / 2.0 - ps / 2.0);

    let mut img = Heightmap::filled(full_h, full_w, origin, ps, rp.table_gray, 0.0);
    // paint priority per pixel: table 0, board 1, objects 2
    let mut prio = vec![0u8; full_h * full_w];

    let kit = &scene.kit;
    let spec = &kit.spec;
    let layer_h = spec.board_height / spec.layers as f64;
    let inv_kit = scene.kit_pose.invert();

    // board bbox in pixels from its rotated corners
    let (bw, bh) = spec.board_extent;
    let corners = [
        (-bw / 2.0, -bh / 2.0),
        (bw / 2.0, -bh / 2.0),
        (bw / 2.0, bh / 2.0),
        (-bw / 2.0, bh / 2.0),
    ];
    let mut rmin = i64::MAX;
    let mut rmax = i64::MIN;
    let mut cmin = i64::MAX;
    let mut cmax = i64::MIN;
    for corner in corners {
        let wpt = scene.kit_pose.apply(corner);
        let (r, c) = img.world_to_pixel(wpt);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    if rmin < 0 || cmin < 0 || rmax >= full_h as i64 || cmax >= full_w as i64 {
        return Err(RenderError::OutOfCrop(format!(
            "kit board {} at pose ({:.3}, {:.3}, {:.3})",
            kit.id, scene.kit_pose.x, scene.kit_pose.y, scene.kit_pose.theta
        )));
    }

    let inv_cavities: Vec<_> = spec.cavities.iter().map(|c| c.pose.invert()).collect();
    for r in rmin.max(0)..=rmax.min(full_h as i64 - 1) {
        for c in cmin.max(0)..=cmax.min(full_w as i64 - 1) {
            let wpt = img.pixel_to_world(r as usize, c as usize);
            let local = inv_kit.apply(wpt);
            if local.0.abs() > bw / 2.0 || local.1.abs() > bh / 2.0 {
                continue;
            }
            // deepest cavity floor visible at this pixel, if any
            let mut floor: Option<f64> = None;
            for (ci, cav) in spec.cavities.iter().enumerate() {
                let cl = inv_cavities[ci].apply(local);
                if kit.shape(cav.shape_id).contains_local(cl.0, cl.1) {
                    let z = cav.layer as f64 * layer_h;
                    floor = Some(floor.map_or(z, |f: f64| f.min(z)));
                }
            }
            let (z, gray) = match floor {
                None => (spec.board_height, BOARD_GRAY),
                Some(f) => (f, CAVITY_FLOOR_GRAY),
            };
            paint(&mut img, &mut prio, r as usize, c as usize, z as f32, gray, 1);
        }
    }

    for (oi, obj) in scene.objects.iter().enumerate() {
        if obj.location == ObjectLocation::Held {
            continue;
        }
        let ospec = &kit.objects[oi];
        let shape = kit.object_shape(ospec.shape_id);
        let radius = shape.max_radius_m();
        let base_z = match obj.location {
            ObjectLocation::InCavity(ci) => spec.cavities[ci].layer as f64 * layer_h,
            _ => 0.0,
        };
        let top = (base_z + ospec.height) as f32;
        let (pr, pc) = img.world_to_pixel((obj.pose.x, obj.pose.y));
        let rad_px = (radius / ps).ceil() as i64 + 1;
        if pr - rad_px < 0
            || pc - rad_px < 0
            || pr + rad_px >= full_h as i64
            || pc + rad_px >= full_w as i64
        {
            return Err(RenderError::OutOfCrop(format!(
                "object {oi} of {} at ({:.3}, {:.3})",
                kit.id, obj.pose.x, obj.pose.y
            )));
        }
        let inv = obj.pose.invert();
        let shade_scale = (OBJECT_SHADE as f64) / radius.max(1e-9);
        for r in (pr - rad_px)..=(pr + rad_px) {
            for c in (pc - rad_px)..=(pc + rad_px) {
                let wpt = img.pixel_to_world(r as usize, c as usize);
                let local = inv.apply(wpt);
                if !shape.contains_local(local.0, local.1) {
                    continue;
                }
                let g = (ospec.gray_value + local.0 * shade_scale)
                    .clamp(0.05, 1.0) as f32;
                paint(&mut img, &mut prio, r as usize, c as usize, top, g, 2);
            }
        }
    }

    Ok(img)
}

#[inline]
fn paint(
    img: &mut Heightmap,
    prio: &mut [u8],
    r: usize,
    c: usize,
    z: f32,
    gray: f32,
    priority: u8,
) {
    let i = img.idx(r, c);
    if z > img.height[i] || (z == img.height[i] && priority >= prio[i]) {
        img.height[i] = z;
        img.gray[i] = gray;
        prio[i] = priority;
    }
}

/// Split the full image into the kit half (left) and object half (right).
pub fn split(full: &Heightmap) -> Result<(Heightmap, Heightmap), RenderError> {
    if full.w % 2 != 0 {
        return Err(RenderError::Contract(format!(
            "full image width {} is odd",
            full.w
        )));
    }
    let w = full.w / 2;
    let mut kit = Heightmap::filled(full.h, w, full.origin, full.pixel_size, 0.0, 0.0);
    let obj_origin = (
        full.origin.0 + w as f64 * full.pixel_size,
        full.origin.1,
    );
    let mut obj = Heightmap::filled(full.h, w, obj_origin, full.pixel_size, 0.0, 0.0);
    for r in 0..full.h {
        for c in 0..w {
            let src = full.idx(r, c);
            let dst = kit.idx(r, c);
            kit.gray[dst] = full.gray[src];
            kit.height[dst] = full.height[src];
            let src = full.idx(r, c + w);
            obj.gray[dst] = full.gray[src];
            obj.height[dst] = full.height[src];
        }
    }
    Ok((kit, obj))
}

/// Concatenate two halves back into a full image (inverse of [`split`]).
pub fn concat(kit: &Heightmap, obj: &Heightmap) -> Heightmap {
    assert_eq!(kit.h, obj.h);
    let mut full = Heightmap::filled(
        kit.h,
        kit.w + obj.w,
        kit.origin,
        kit.pixel_size,
        0.0,
        0.0,
    );
    for r in 0..kit.h {
        for c in 0..kit.w {
            let dst = full.idx(r, c);
            let src = kit.idx(r, c);
            full.gray[dst] = kit.gray[src];
            full.height[dst] = kit.height[src];
        }
        for c in 0..obj.w {
            let dst = full.idx(r, c + kit.w);
            let src = obj.idx(r, c);
            full.gray[dst] = obj.gray[src];
            full.height[dst] = obj.height[src];
        }
    }
    full
}

/// Rotate image content by `angle_deg` CCW-world about the image center
/// with nearest-neighbor sampling; out-of-bounds samples read as background.
/// Exact right angles take an exact permutation path.
pub fn rotate_heightmap(img: &Heightmap, angle_deg: f64, fill: (f32, f32)) -> Heightmap {
    let mut out = Heightmap::filled(
        img.h,
        img.w,
        img.origin,
        img.pixel_size,
        fill.0,
        fill.1,
    );
    let a = angle_deg.rem_euclid(360.0);
    if a == 0.0 {
        out.gray.copy_from_slice(&img.gray);
        out.height.copy_from_slice(&img.height);
        return out;
    }
    let cy = (img.h as f64 - 1.0) / 2.0;
    let cx = (img.w as f64 - 1.0) / 2.0;
    // in row-down coordinates a CCW-world rotation by t maps offsets by
    // (dr, dc) -> (dr cos t - dc sin t, dr sin t + dc cos t); sample with
    // the inverse. Right angles use exact +-1/0 coefficients.
    let (s, c) = if a == 90.0 {
        (1.0, 0.0)
    } else if a == 180.0 {
        (0.0, -1.0)
    } else if a == 270.0 {
        (-1.0, 0.0)
    } else {
        a.to_radians().sin_cos()
    };
    for r in 0..img.h {
        for col in 0..img.w {
            let dr = r as f64 - cy;
            let dc = col as f64 - cx;
            let sr = c * dr + s * dc + cy;
            let sc = -s * dr + c * dc + cx;
            let sri = round_cell(sr);
            let sci = round_cell(sc);
            if img.in_bounds(sri, sci) {
                let src = img.idx(sri as usize, sci as usize);
                let dst = out.idx(r, col);
                out.gray[dst] = img.gray[src];
                out.height[dst] = img.height[src];
            }
        }
    }
    out
}

/// Rotation-stack pixel mapping: the pixel of the unrotated image that a
/// rotated-frame pixel samples from, and its inverse.
pub fn to_rotated_frame(
    img_h: usize,
    img_w: usize,
    angle_deg: f64,
    pixel: (f64, f64),
) -> (f64, f64) {
    let cy = (img_h as f64 - 1.0) / 2.0;
    let cx = (img_w as f64 - 1.0) / 2.0;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let dr = pixel.0 - cy;
    let dc = pixel.1 - cx;
    (c * dr - s * dc + cy, s * dr + c * dc + cx)
}

pub fn from_rotated_frame(
    img_h: usize,
    img_w: usize,
    angle_deg: f64,
    pixel: (f64, f64),
) -> (f64, f64) {
    to_rotated_frame(img_h, img_w, -angle_deg, pixel)
}

/// Build the R-orientation stack: maps[j] = rotate(I, j * 360 / R).
pub fn make_rotation_stack(img: &Heightmap, bins: usize, fill: (f32, f32)) -> RotationStack {
    assert!(bins >= 1, "rotation stack needs at least one bin");
    let mut maps = Vec::with_capacity(bins);
    let mut angles = Vec::with_capacity(bins);
    for j in 0..bins {
        let angle = j as f64 * 360.0 / bins as f64;
        maps.push(rotate_heightmap(img, angle, fill));
        angles.push(angle);
    }
    RotationStack {
        maps,
        angles_deg: angles,
    }
}
