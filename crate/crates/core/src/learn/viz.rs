//! Descriptor visualization: project masked per-pixel descriptors onto
//! their top 3 principal components and write them as RGB.

use std::path::Path;

use super::net::Network;
use super::tensor::Tensor;
use super::LearnError;
use crate::mask::Mask;
use crate::render::Heightmap;

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub h: usize,
    pub w: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn save_ppm(&self, path: &Path) -> Result<(), LearnError> {
        use std::io::Write;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "P6\n{} {}\n255\n", self.w, self.h)?;
        f.write_all(&self.data)?;
        Ok(())
    }
}

/// Jacobi eigendecomposition of a small symmetric matrix. Returns
/// (eigenvalues, eigenvectors as rows) sorted by descending eigenvalue,
/// each vector's largest-magnitude component made positive.
fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|x, y| a[*y][*y].partial_cmp(&a[*x][*x]).unwrap());
    let vals = order.iter().map(|i| a[*i][*i]).collect();
    let vecs = order
        .iter()
        .map(|i| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k][*i]).collect();
            let lead = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(k, _)| k)
                .unwrap_or(0);
            if col[lead] < 0.0 {
                for x in &mut col {
                    *x = -*x;
                }
            }
            col
        })
        .collect();
    (vals, vecs)
}

/// PCA-to-RGB of the masked object descriptors. Background is black.
pub fn export_descriptor_visualization(
    network: &Network,
    params: &[Tensor<f32>],
    obj_image: &Heightmap,
    mask: &Mask,
) -> Result<RgbImage, LearnError> {
    if mask.is_empty() {
        return Err(LearnError::DegenerateDataset(
            "empty object mask for visualization".into(),
        ));
    }
    assert_eq!((mask.h, mask.w), (obj_image.h, obj_image.w));
    let mu = network.infer::<f32>(params, obj_image, false);
    let d = mu.dims[0];
    let plane = obj_image.h * obj_image.w;
    let cells: Vec<(usize, usize)> = mask.cells().collect();
    let n = cells.len();

    // mean-centered descriptors of masked pixels
    let mut mean = vec![0.0f64; d];
    for (r, c) in &cells {
        let px = r * obj_image.w + c;
        for ch in 0..d {
            mean[ch] += mu.data[ch * plane + px] as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0f64; d]; d];
    for (r, c) in &cells {
        let px = r * obj_image.w + c;
        for i in 0..d {
            let xi = mu.data[i * plane + px] as f64 - mean[i];
            for j in i..d {
                let xj = mu.data[j * plane + px] as f64 - mean[j];
                cov[i][j] += xi * xj;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i][j] = cov[j][i];
        }
        for j in i..d {
            cov[i][j] /= n as f64;
            let v = cov[i][j];
            cov[j][i] = v;
        }
    }
    let (_, vecs) = symmetric_eigen(cov);

    // project on 3 leading components then normalize each to [0, 255]
    let mut proj = vec![[0.0f64; 3]; n];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (pi, (r, c)) in cells.iter().enumerate() {
        let px = r * obj_image.w + c;
        for comp in 0..3.min(d) {
            let mut s = 0.0;
            for ch in 0..d {
                s += (mu.data[ch * plane + px] as f64 - mean[ch]) * vecs[comp][ch];
            }
            proj[pi][comp] = s;
            lo[comp] = lo[comp].min(s);
            hi[comp] = hi[comp].max(s);
        }
    }
    let mut img = RgbImage {
        h: obj_image.h,
        w: obj_image.w,
        data: vec![0u8; 3 * plane],
    };
    for (pi, (r, c)) in cells.iter().enumerate() {
        let px = r * obj_image.w + c;
        for comp in 0..3 {
            let range = (hi[comp] - lo[comp]).max(1e-12);
            let v = ((proj[pi][comp] - lo[comp]) / range * 255.0).round() as u8;
            img.data[3 * px + comp] = v;
        }
    }
    Ok(img)
}

/// Mean per-channel color difference between the masked pixels of two
/// visualizations, in [0, 255].
pub fn mean_color_difference(a: &RgbImage, b: &RgbImage, mask_a: &Mask, mask_b: &Mask) -> f64 {
    let avg = |img: &RgbImage, m: &Mask| -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        let mut n = 0usize;
        for (r, c) in m.cells() {
            let px = r * img.w + c;
            for k in 0..3 {
                acc[k] += img.data[3 * px + k] as f64;
            }
            n += 1;
        }
        for k in &mut acc {
            *k /= n.max(1) as f64;
        }
        acc
    };
    let ca = avg(a, mask_a);
    let cb = avg(b, mask_b);
    (0..3).map(|k| (ca[k] - cb[k]).abs()).sum::<f64>() / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(5, 2, 1) conjugated by a rotation in the (0,1) plane
        let (c, s) = (0.8f64, 0.6f64);
        // A = R D R^T
        let d = [5.0, 2.0, 1.0];
        let a = vec![
            vec![
                c * c * d[0] + s * s * d[1],
                c * s * (d[1] - d[0]),
                0.0,
            ],
            vec![
                c * s * (d[1] - d[0]),
                s * s * d[0] + c * c * d[1],
                0.0,
            ],
            vec![0.0, 0.0, d[2]],
        ];
        let (vals, vecs) = symmetric_eigen(a);
        assert!((vals[0] - 5.0).abs() < 1e-9);
        assert!((vals[1] - 2.0).abs() < 1e-9);
        assert!((vals[2] - 1.0).abs() < 1e-9);
        // leading eigenvector is (+-c, -+s, 0); sign fixed to positive lead
        assert!((vecs[0][0].abs() - c).abs() < 1e-9);
        assert!((vecs[0][1].abs() - s).abs() < 1e-9);
    }

    #[test]
    fn single_pixel_mask_gives_single_color() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 4);
        let params = net.init_params::<f32>(3);
        let hm = Heightmap::filled(16, 16, (0.0, 0.0), 0.004, 0.3, 0.01);
        let mut mask = Mask::new(16, 16);
        mask.set(8, 8, true);
        let img = export_descriptor_visualization(&net, &params, &hm, &mask).unwrap();
        // only the masked pixel may be non-black, and it is one color
        for px in 0..256 {
            if px != 8 * 16 + 8 {
                assert_eq!(&img.data[3 * px..3 * px + 3], &[0, 0, 0]);
            }
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 4);
        let params = net.init_params::<f32>(3);
        let hm = Heightmap::filled(8, 8, (0.0, 0.0), 0.004, 0.3, 0.0);
        let mask = Mask::new(8, 8);
        assert!(export_descriptor_visualization(&net, &params, &hm, &mask).is_err());
    }
}
