//! Procedural blob shapes: radially perturbed polygons rasterized onto a
//! fine mask grid, plus the rotational symmetry detector.

use crate::mask::{round_cell, Mask};
use crate::rng::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SceneError;

/// A rasterized shape. The grid is the cavity silhouette; the anchor is the
/// centroid of true cells and is the origin of the shape's local frame
/// (x right along columns, y up against rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMask {
    pub grid: Mask,
    /// (row, col) of the centroid in grid coordinates.
    pub anchor: (f64, f64),
    /// Meters per grid cell.
    pub pixel_size: f64,
}

impl ShapeMask {
    /// Local-frame position (meters) of a grid cell center.
    pub fn cell_to_local(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 - self.anchor.1) * self.pixel_size,
            (self.anchor.0 - row as f64) * self.pixel_size,
        )
    }

    /// Grid cell nearest to a local-frame position.
    pub fn local_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        (
            round_cell(self.anchor.0 - y / self.pixel_size),
            round_cell(self.anchor.1 + x / self.pixel_size),
        )
    }

    /// True when the local-frame point falls on a true cell.
    pub fn contains_local(&self, x: f64, y: f64) -> bool {
        let (r, c) = self.local_to_cell(x, y);
        self.grid.get_i(r, c)
    }

    /// Largest fold k in 2..=max_fold whose rotation by 360/k keeps
    /// self-IoU at or above `iou_threshold`; 1 when none does. The IoU is
    /// measured on a 3x upsampled grid so raster flicker at the boundary
    /// does not mask a true symmetry.
    pub fn symmetry_order(&self, max_fold: usize, iou_threshold: f64) -> usize {
        let up = self.grid.upsample(3);
        let pivot = (3.0 * self.anchor.0 + 1.0, 3.0 * self.anchor.1 + 1.0);
        let mut best = 1;
        for k in 2..=max_fold {
            let angle = std::f64::consts::TAU / k as f64;
            let rot = up.rotate_about(angle, pivot);
            if up.iou(&rot) >= iou_threshold {
                best = k;
            }
        }
        best
    }

    /// Radius (meters) of the farthest true cell from the anchor.
    pub fn max_radius_m(&self) -> f64 {
        let mut r2max = 0.0f64;
        for (r, c) in self.grid.cells() {
            let (x, y) = self.cell_to_local(r, c);
            r2max = r2max.max(x * x + y * y);
        }
        r2max.sqrt()
    }
}

/// Axis-aligned solid rectangle of `w_cells` x `h_cells` true cells with a
/// 2-cell empty border. Stacked kits use these for their bottom row so the
/// facing edges tile the seam exactly.
pub fn rectangle_shape(w_cells: usize, h_cells: usize, pixel_size: f64) -> ShapeMask {
    let (gw, gh) = (w_cells + 4, h_cells + 4);
    let mut grid = Mask::new(gh, gw);
    for r in 2..2 + h_cells {
        for c in 2..2 + w_cells {
            grid.set(r, c, true);
        }
    }
    let anchor = grid.centroid().expect("nonempty");
    ShapeMask {
        grid,
        anchor,
        pixel_size,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShapeParams {
    pub n_vertices: usize,
    pub radius_m: f64,
    pub roughness: f64,
    pub pixel_size: f64,
}

/// Generate a simply-connected blob: `n_vertices` spokes at equal angular
/// pitch with radius jitter `radius * (1 +- roughness)`, filled as a polygon
/// at the configured pixel size. Deterministic in `seed`.
pub fn generate_shape(seed: u64, params: &ShapeParams) -> Result<ShapeMask, SceneError> {
    if params.n_vertices < 3 {
        return Err(SceneError::ShapeParams(format!(
            "need >= 3 vertices, got {}",
            params.n_vertices
        )));
    }
    if params.radius_m <= 0.0 || params.radius_m < 2.0 * params.pixel_size {
        return Err(SceneError::ShapeParams(format!(
            "radius {} m degenerate at {} m/px",
            params.radius_m, params.pixel_size
        )));
    }
    let mut rng = stream(seed, "shape", 0);
    let n = params.n_vertices;
    // one grid with margin for the worst-case spoke
    let rmax_px = params.radius_m * (1.0 + params.roughness) / params.pixel_size;
    let half = rmax_px.ceil() as usize + 2;
    let side = 2 * half + 1;
    let center = half as f64;

    let mut verts = Vec::with_capacity(n);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    for i in 0..n {
        let ang = phase + i as f64 / n as f64 * std::f64::consts::TAU;
        let jitter: f64 = if params.roughness > 0.0 {
            rng.gen_range(-params.roughness..params.roughness)
        } else {
            // keep the RNG stream aligned so roughness only scales geometry
            let _ = rng.gen_range(-1.0f64..1.0);
            0.0
        };
        let r = params.radius_m * (1.0 + jitter) / params.pixel_size;
        // grid frame: row = center - r sin, col = center + r cos (y-up flip)
        verts.push((center - r * ang.sin(), center + r * ang.cos()));
    }
    let grid = Mask::fill_polygon(side, side, &verts);
    if grid.area() < 9 {
        return Err(SceneError::ShapeParams(
            "rasterized shape vanishes".to_string(),
        ));
    }
    let anchor = grid.centroid().expect("nonempty");
    Ok(ShapeMask {
        grid,
        anchor,
        pixel_size: params.pixel_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, roughness: f64) -> ShapeParams {
        ShapeParams {
            n_vertices: n,
            radius_m: 0.046,
            roughness,
            pixel_size: 0.002,
        }
    }

    #[test]
    fn triangle_area_matches_analytic() {
        let p = params(3, 0.0);
        let s = generate_shape(7, &p).unwrap();
        // equilateral triangle inscribed in radius r: area = (3*sqrt(3)/4) r^2
        let r_px = p.radius_m / p.pixel_size;
        let analytic = 3.0 * 3.0f64.sqrt() / 4.0 * r_px * r_px;
        let got = s.grid.area() as f64;
        assert!(
            (got - analytic).abs() / analytic < 0.05,
            "raster {got} vs analytic {analytic}"
        );
    }

    #[test]
    fn many_vertex_disk_is_highly_symmetric() {
        let s = generate_shape(3, &params(64, 0.0)).unwrap();
        assert!(s.symmetry_order(20, 0.97) >= 8);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_shape(42, &params(9, 0.3)).unwrap();
        let b = generate_shape(42, &params(9, 0.3)).unwrap();
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.anchor, b.anchor);
    }

    #[test]
    fn rejects_degenerate_radius() {
        let mut p = params(5, 0.0);
        p.radius_m = 0.003; // < 2 px at 2 mm/px
        assert!(generate_shape(1, &p).is_err());
    }

    #[test]
    fn anchor_is_centroid() {
        let s = generate_shape(11, &params(12, 0.25)).unwrap();
        let (cr, cc) = s.grid.centroid().unwrap();
        assert!((cr - s.anchor.0).abs() < 0.5 && (cc - s.anchor.1).abs() < 0.5);
    }

    #[test]
    fn local_frame_round_trip() {
        let s = generate_shape(5, &params(8, 0.1)).unwrap();
        for (r, c) in s.grid.cells().step_by(17) {
            let (x, y) = s.cell_to_local(r, c);
            let (rr, cc) = s.local_to_cell(x, y);
            assert_eq!((rr as usize, cc as usize), (r, c));
        }
    }
}
