//! The 2-channel heightmap image: grayscale plus height-from-bottom, with
//! its world anchoring and the binary tensor container it persists in.

use crate::mask::round_cell;
use std::io::{Read, Write};
use std::path::Path;

use super::RenderError;

/// Magic of the binary tensor container: "F2F1", u32 rank, u32 dims[],
/// then little-endian f32 payload in row-major order.
pub const TENSOR_MAGIC: &[u8; 4] = b"F2F1";

/// A top-down orthographic image. `origin` is the world position of the
/// center of pixel (0, 0); rows grow toward -y, columns toward +x.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    pub h: usize,
    pub w: usize,
    /// Grayscale intensity in [0, 1], row-major.
    pub gray: Vec<f32>,
    /// Height from the table in meters, row-major.
    pub height: Vec<f32>,
    /// World (x, y) of pixel (0, 0)'s center, meters.
    pub origin: (f64, f64),
    /// Meters per pixel.
    pub pixel_size: f64,
}

impl Heightmap {
    pub fn filled(
        h: usize,
        w: usize,
        origin: (f64, f64),
        pixel_size: f64,
        gray: f32,
        height: f32,
    ) -> Self {
        Heightmap {
            h,
            w,
            gray: vec![gray; h * w],
            height: vec![height; h * w],
            origin,
            pixel_size,
        }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.w + col
    }

    /// World position of a pixel center.
    pub fn pixel_to_world(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + col as f64 * self.pixel_size,
            self.origin.1 - row as f64 * self.pixel_size,
        )
    }

    /// Nearest pixel to a world point; may fall outside the image.
    pub fn world_to_pixel(&self, pt: (f64, f64)) -> (i64, i64) {
        (
            round_cell((self.origin.1 - pt.1) / self.pixel_size),
            round_cell((pt.0 - self.origin.0) / self.pixel_size),
        )
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.h && (col as usize) < self.w
    }

    /// Highest pixel of the height channel, `(row, col, height)`.
    pub fn max_height(&self) -> (usize, usize, f32) {
        let mut best = (0, 0, f32::MIN);
        for r in 0..self.h {
            for c in 0..self.w {
                let v = self.height[self.idx(r, c)];
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        best
    }

    /// Serialize both channels as one rank-3 tensor [2, H, W]. The file is
    /// a pure tensor container; world anchoring travels in the JSON
    /// metadata next to it.
    pub fn save(&self, path: &Path) -> Result<(), RenderError> {
        save_tensor(
            path,
            &[2, self.h as u32, self.w as u32],
            self.gray.iter().chain(self.height.iter()).cloned(),
        )
    }

    /// Load a [2, H, W] tensor and re-anchor it in the world.
    pub fn load(path: &Path, origin: (f64, f64), pixel_size: f64) -> Result<Self, RenderError> {
        let (dims, mut payload) = load_tensor(path)?;
        if dims.len() != 3 || dims[0] != 2 {
            return Err(RenderError::Format(format!(
                "{}: expected dims [2, H, W], found {dims:?}",
                path.display()
            )));
        }
        let (h, w) = (dims[1] as usize, dims[2] as usize);
        let height = payload.split_off(h * w);
        Ok(Heightmap {
            h,
            w,
            gray: payload,
            height,
            origin,
            pixel_size,
        })
    }

    /// 8-bit PGM previews of both channels for quick inspection.
    pub fn save_pgm_previews(&self, stem: &Path) -> Result<(), RenderError> {
        let scale_h = self
            .height
            .iter()
            .cloned()
            .fold(f32::EPSILON, f32::max);
        write_pgm(
            &stem.with_extension("gray.pgm"),
            self.h,
            self.w,
            self.gray.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0) as u8),
        )?;
        write_pgm(
            &stem.with_extension("height.pgm"),
            self.h,
            self.w,
            self.height
                .iter()
                .map(move |v| ((v / scale_h).clamp(0.0, 1.0) * 255.0) as u8),
        )?;
        Ok(())
    }
}

pub fn write_tensor_header<W: Write>(f: &mut W, dims: &[u32]) -> Result<(), RenderError> {
    f.write_all(TENSOR_MAGIC)?;
    f.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        f.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

/// Write a tensor file: header plus little-endian f32 payload.
pub fn save_tensor<I: Iterator<Item = f32>>(
    path: &Path,
    dims: &[u32],
    data: I,
) -> Result<(), RenderError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_tensor_header(&mut f, dims)?;
    let mut n = 0usize;
    for v in data {
        f.write_all(&v.to_le_bytes())?;
        n += 1;
    }
    let expect: usize = dims.iter().map(|d| *d as usize).product();
    if n != expect {
        return Err(RenderError::Format(format!(
            "{}: payload {n} != dims product {expect}",
            path.display()
        )));
    }
    Ok(())
}

/// Read a tensor file back as (dims, payload).
pub fn load_tensor(path: &Path) -> Result<(Vec<u32>, Vec<f32>), RenderError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let dims = read_tensor_header(&mut f, path)?;
    let n: usize = dims.iter().map(|d| *d as usize).product();
    let mut payload = vec![0f32; n];
    let mut buf = [0u8; 4];
    for v in payload.iter_mut() {
        f.read_exact(&mut buf)?;
        *v = f32::from_le_bytes(buf);
    }
    let mut probe = [0u8; 1];
    if f.read(&mut probe)? != 0 {
        return Err(RenderError::Format(format!(
            "{}: trailing bytes after tensor payload",
            path.display()
        )));
    }
    Ok((dims, payload))
}

pub fn read_tensor_header<R: Read>(f: &mut R, path: &Path) -> Result<Vec<u32>, RenderError> {
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(RenderError::Format(format!(
            "{}: bad tensor magic {magic:?}",
            path.display()
        )));
    }
    let mut b4 = [0u8; 4];
    f.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4);
    if rank > 8 {
        return Err(RenderError::Format(format!(
            "{}: implausible tensor rank {rank}",
            path.display()
        )));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        f.read_exact(&mut b4)?;
        dims.push(u32::from_le_bytes(b4));
    }
    Ok(dims)
}

fn write_pgm<I: Iterator<Item = u8>>(
    path: &Path,
    h: usize,
    w: usize,
    data: I,
) -> Result<(), RenderError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = data.collect();
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_pixel_round_trip() {
        let hm = Heightmap::filled(64, 48, (-0.1, 0.2), 0.004, 0.25, 0.0);
        for (r, c) in [(0usize, 0usize), (10, 20), (63, 47)] {
            let w = hm.pixel_to_world(r, c);
            assert_eq!(hm.world_to_pixel(w), (r as i64, c as i64));
        }
        // world -> pixel -> world displaces less than half a pixel per axis
        let pt = (0.0123, 0.0456);
        let (r, c) = hm.world_to_pixel(pt);
        let back = hm.pixel_to_world(r as usize, c as usize);
        assert!((back.0 - pt.0).abs() < hm.pixel_size / 2.0);
        assert!((back.1 - pt.1).abs() < hm.pixel_size / 2.0);
    }

    #[test]
    fn tensor_file_round_trip() {
        let mut hm = Heightmap::filled(5, 7, (0.5, -0.25), 0.002, 0.3, 0.0);
        hm.height[3 * 7 + 2] = 0.042;
        hm.gray[6] = 0.9;
        let dir = std::env::temp_dir().join("f2f-hm-io");
        let path = dir.join("map.f2f");
        hm.save(&path).unwrap();
        // file is exactly header + 2*H*W little-endian f32s
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, (4 + 4 + 3 * 4) as u64 + 2 * 5 * 7 * 4);
        let loaded = Heightmap::load(&path, hm.origin, hm.pixel_size).unwrap();
        assert_eq!(hm, loaded);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = std::env::temp_dir().join("f2f-hm-io-bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.f2f");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(Heightmap::load(&path, (0.0, 0.0), 1.0).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
