//! Boolean pixel grids and the raster operations shared by the scene
//! generator, the simulator and the evaluator: polygon fill, 4-connected
//! morphology, nearest-neighbor rotation, IoU, centroids and a compact
//! run-length encoding used by every on-disk mask.

use serde::{Deserialize, Serialize};

/// Nearest-cell rounding, half rounds toward +inf. Unlike
/// `f64::round` (half away from zero) this commutes with integer frame
/// offsets, so cell mappings agree across shifted rasters.
#[inline]
pub fn round_cell(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// A dense boolean H x W grid. Row-major, `(row, col)` addressing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub w: usize,
    pub h: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(h: usize, w: usize) -> Self {
        Mask {
            w,
            h,
            bits: vec![false; w * h],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.w + col]
    }

    /// Out-of-bounds coordinates read as `false`.
    #[inline]
    pub fn get_i(&self, row: i64, col: i64) -> bool {
        if row < 0 || col < 0 || row as usize >= self.h || col as usize >= self.w {
            false
        } else {
            self.bits[row as usize * self.w + col as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        self.bits[row * self.w + col] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Iterator over `(row, col)` of all true cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.w;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Centroid of true cells in `(row, col)` coordinates. `None` when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sr, mut sc) = (0.0f64, 0.0f64);
        for (r, c) in self.cells() {
            sr += r as f64;
            sc += c as f64;
            n += 1;
        }
        if n == 0 {
            None
        } else {
            Some((sr / n as f64, sc / n as f64))
        }
    }

    /// 4-connected (diamond) dilation by `iters` steps.
    pub fn dilate(&self, iters: usize) -> Mask {
        let mut cur = self.clone();
        for _ in 0..iters {
            let mut next = cur.clone();
            for r in 0..self.h as i64 {
                for c in 0..self.w as i64 {
                    if !cur.get_i(r, c)
                        && (cur.get_i(r - 1, c)
                            || cur.get_i(r + 1, c)
                            || cur.get_i(r, c - 1)
                            || cur.get_i(r, c + 1))
                    {
                        next.set(r as usize, c as usize, true);
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// 4-connected (diamond) erosion by `iters` steps. Cells on the grid
    /// border erode (the outside counts as false).
    pub fn erode(&self, iters: usize) -> Mask {
        let mut cur = self.clone();
        for _ in 0..iters {
            let mut next = cur.clone();
            for r in 0..self.h as i64 {
                for c in 0..self.w as i64 {
                    if cur.get_i(r, c)
                        && !(cur.get_i(r - 1, c)
                            && cur.get_i(r + 1, c)
                            && cur.get_i(r, c - 1)
                            && cur.get_i(r, c + 1))
                    {
                        next.set(r as usize, c as usize, false);
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// Number of erosion steps until the mask vanishes; a discrete inradius.
    pub fn inradius(&self) -> usize {
        let mut cur = self.clone();
        let mut k = 0;
        while !cur.is_empty() {
            cur = cur.erode(1);
            k += 1;
            if k > self.w + self.h {
                break;
            }
        }
        k.saturating_sub(1)
    }

    pub fn intersection_area(&self, other: &Mask) -> usize {
        assert_eq!((self.w, self.h), (other.w, other.h));
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.intersection_area(other) as f64;
        let union = (self.area() + other.area()) as f64 - inter;
        if union == 0.0 {
            1.0
        } else {
            inter / union
        }
    }

    pub fn overlaps(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    /// True when every true cell of `self` is also true in `other`.
    pub fn subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Rotate true cells by `angle_rad` CCW (in the y-up world sense; the
    /// grid row axis points down) about `pivot = (row, col)`, sampling
    /// nearest-neighbor from the source. Output grid has the same shape.
    ///
    /// In row-down grid coordinates a world-CCW rotation maps an offset
    /// (dr, dc) to (dr cos a - dc sin a, dr sin a + dc cos a).
    pub fn rotate_about(&self, angle_rad: f64, pivot: (f64, f64)) -> Mask {
        let mut out = Mask::new(self.h, self.w);
        let (s, c) = angle_rad.sin_cos();
        for r in 0..self.h {
            for col in 0..self.w {
                // inverse map: rotate output offsets back by -angle
                let dr = r as f64 - pivot.0;
                let dc = col as f64 - pivot.1;
                let sr = c * dr + s * dc + pivot.0;
                let sc = -s * dr + c * dc + pivot.1;
                let sri = round_cell(sr);
                let sci = round_cell(sc);
                if self.get_i(sri, sci) {
                    out.set(r, col, true);
                }
            }
        }
        out
    }

    /// Integer upsampling: each cell becomes a k x k block.
    pub fn upsample(&self, k: usize) -> Mask {
        let mut out = Mask::new(self.h * k, self.w * k);
        for (r, c) in self.cells() {
            for dr in 0..k {
                for dc in 0..k {
                    out.set(r * k + dr, c * k + dc, true);
                }
            }
        }
        out
    }

    /// Fill a simple polygon given in `(row, col)` vertex coordinates using
    /// even-odd scanline crossings at cell centers.
    pub fn fill_polygon(h: usize, w: usize, verts: &[(f64, f64)]) -> Mask {
        let mut m = Mask::new(h, w);
        if verts.len() < 3 {
            return m;
        }
        for row in 0..h {
            let y = row as f64;
            let mut xs: Vec<f64> = Vec::new();
            for i in 0..verts.len() {
                let (y0, x0) = verts[i];
                let (y1, x1) = verts[(i + 1) % verts.len()];
                if (y0 <= y && y1 > y) || (y1 <= y && y0 > y) {
                    let t = (y - y0) / (y1 - y0);
                    xs.push(x0 + t * (x1 - x0));
                }
            }
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut i = 0;
            while i + 1 < xs.len() {
                let a = xs[i].ceil().max(0.0) as usize;
                let b = xs[i + 1].floor().min(w as f64 - 1.0);
                if b >= 0.0 {
                    for col in a..=(b as usize) {
                        m.set(row, col, true);
                    }
                }
                i += 2;
            }
        }
        m
    }

    /// Run-length encoding: runs alternate false/true starting with false.
    pub fn to_rle(&self) -> MaskRle {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut len = 0u32;
        for b in &self.bits {
            if *b == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = *b;
                len = 1;
            }
        }
        runs.push(len);
        MaskRle {
            w: self.w as u32,
            h: self.h as u32,
            runs: runs
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(","),
        }
    }

    pub fn from_rle(rle: &MaskRle) -> Result<Mask, String> {
        let mut m = Mask::new(rle.h as usize, rle.w as usize);
        let mut idx = 0usize;
        let mut cur = false;
        if !rle.runs.is_empty() {
            for tok in rle.runs.split(',') {
                let n: usize = tok
                    .parse()
                    .map_err(|_| format!("bad RLE run {tok:?}"))?;
                if cur {
                    for k in idx..idx + n {
                        if k >= m.bits.len() {
                            return Err("RLE overruns grid".into());
                        }
                        m.bits[k] = true;
                    }
                }
                idx += n;
                cur = !cur;
            }
        }
        if idx != m.bits.len() {
            return Err(format!(
                "RLE covers {idx} cells, grid has {}",
                m.bits.len()
            ));
        }
        Ok(m)
    }
}

/// Serialized mask: grid shape plus comma-separated run lengths,
/// alternating false/true and starting with a false run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MaskRle {
    pub w: u32,
    pub h: u32,
    pub runs: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(h: usize, w: usize, r: f64) -> Mask {
        let mut m = Mask::new(h, w);
        let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
        for row in 0..h {
            for col in 0..w {
                let d = ((row as f64 - cy).powi(2) + (col as f64 - cx).powi(2)).sqrt();
                if d <= r {
                    m.set(row, col, true);
                }
            }
        }
        m
    }

    #[test]
    fn erode_dilate_shrink_grow() {
        let d = disk(41, 41, 12.0);
        let e = d.erode(1);
        let g = d.dilate(1);
        assert!(e.area() < d.area());
        assert!(g.area() > d.area());
        assert!(e.subset_of(&d));
        assert!(d.subset_of(&g));
    }

    #[test]
    fn rotation_preserves_disk() {
        let d = disk(61, 61, 22.0);
        let r = d.rotate_about(0.7, (30.0, 30.0));
        assert!(d.iou(&r) > 0.9, "iou {}", d.iou(&r));
    }

    #[test]
    fn rotation_direction_is_ccw_world() {
        // single cell below the pivot moves to the right of the pivot
        let mut m = Mask::new(21, 21);
        m.set(16, 10, true); // offset (dr, dc) = (+6, 0)
        let r = m.rotate_about(std::f64::consts::FRAC_PI_2, (10.0, 10.0));
        assert!(r.get(10, 16), "expected cell at offset (0, +6)");
        assert_eq!(r.area(), 1);
    }

    #[test]
    fn right_angle_rotation_is_exact_on_centered_grid() {
        let d = disk(41, 41, 9.0);
        let r = d
            .rotate_about(std::f64::consts::FRAC_PI_2, (20.0, 20.0))
            .rotate_about(-std::f64::consts::FRAC_PI_2, (20.0, 20.0));
        assert_eq!(d, r);
    }

    #[test]
    fn polygon_triangle_area() {
        // off-lattice right triangle with legs 40: analytic area 800
        let m = Mask::fill_polygon(
            64,
            64,
            &[(5.3, 5.4), (45.3, 5.4), (5.3, 45.4)],
        );
        let a = m.area() as f64;
        assert!((a - 800.0).abs() / 800.0 < 0.05, "area {a}");
    }

    proptest! {
        #[test]
        fn rle_roundtrip(seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = crate::rng::stream(seed, "rle-test", 0);
            let h = rng.gen_range(1..24usize);
            let w = rng.gen_range(1..24usize);
            let mut m = Mask::new(h, w);
            for r in 0..h {
                for c in 0..w {
                    m.set(r, c, rng.gen_bool(0.4));
                }
            }
            let rle = m.to_rle();
            let back = Mask::from_rle(&rle).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
