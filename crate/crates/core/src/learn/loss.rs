//! Loss functions with hand-derived gradients. They act on tape outputs
//! and feed the resulting seed gradients back into `Tape::backward`.

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Numerically stable binary cross-entropy on logits at labeled pixels.
/// `labels`: (flat pixel index, target in {0, 1}). Returns the mean loss
/// and d(loss)/d(logits) with zeros at unlabeled pixels.
pub fn bce_with_logits<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[(usize, f64)],
) -> (f64, Tensor<S>) {
    assert!(!labels.is_empty(), "bce needs at least one labeled pixel");
    let n = labels.len() as f64;
    let mut grad = Tensor::zeros(&logits.dims);
    let mut loss = 0.0f64;
    for (idx, y) in labels {
        let z = logits.data[*idx].to_f64();
        loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        let sig = 1.0 / (1.0 + (-z).exp());
        grad.data[*idx] += S::from_f64((sig - y) / n);
    }
    (loss / n, grad)
}

/// Pixel pair for the contrastive loss: which kit map, the kit pixel's
/// flat index in that map, and the object pixel's flat index.
#[derive(Debug, Clone, Copy)]
pub struct DescriptorPair {
    pub kit_map: usize,
    pub kit_px: usize,
    pub obj_px: usize,
}

#[derive(Debug, Clone)]
pub struct PairSet {
    pub matches: Vec<DescriptorPair>,
    pub nonmatches: Vec<DescriptorPair>,
    pub margin: f64,
}

/// Pixel-wise contrastive loss:
/// mean over matches of D^2 plus mean over non-matches of max(0, M - D)^2,
/// D the Euclidean distance between the paired descriptors. Returns the
/// loss and gradients for the object map and each kit map.
pub fn contrastive_loss<S: Scalar>(
    mu_obj: &Tensor<S>,
    mu_kits: &[&Tensor<S>],
    pairs: &PairSet,
) -> (f64, Tensor<S>, Vec<Tensor<S>>) {
    let d = mu_obj.dims[0];
    let plane = mu_obj.dims[1] * mu_obj.dims[2];
    let mut d_obj = Tensor::zeros(&mu_obj.dims);
    let mut d_kits: Vec<Tensor<S>> = mu_kits.iter().map(|t| Tensor::zeros(&t.dims)).collect();
    let mut loss = 0.0f64;

    let nm = pairs.matches.len().max(1) as f64;
    for p in &pairs.matches {
        let kit = mu_kits[p.kit_map];
        let mut d2 = 0.0f64;
        for c in 0..d {
            let diff = kit.data[c * plane + p.kit_px].to_f64()
                - mu_obj.data[c * plane + p.obj_px].to_f64();
            d2 += diff * diff;
        }
        loss += d2 / nm;
        for c in 0..d {
            let diff = kit.data[c * plane + p.kit_px].to_f64()
                - mu_obj.data[c * plane + p.obj_px].to_f64();
            let g = 2.0 * diff / nm;
            d_kits[p.kit_map].data[c * plane + p.kit_px] += S::from_f64(g);
            d_obj.data[c * plane + p.obj_px] += S::from_f64(-g);
        }
    }

    let nn = pairs.nonmatches.len().max(1) as f64;
    for p in &pairs.nonmatches {
        let kit = mu_kits[p.kit_map];
        let mut d2 = 0.0f64;
        for c in 0..d {
            let diff = kit.data[c * plane + p.kit_px].to_f64()
                - mu_obj.data[c * plane + p.obj_px].to_f64();
            d2 += diff * diff;
        }
        let dist = d2.sqrt();
        let viol = pairs.margin - dist;
        if viol <= 0.0 {
            continue;
        }
        loss += viol * viol / nn;
        if dist > 1e-12 {
            // d/d_kit of (M - D)^2 = -2 (M - D) * (kit - obj) / D
            let scale = -2.0 * viol / dist / nn;
            for c in 0..d {
                let diff = kit.data[c * plane + p.kit_px].to_f64()
                    - mu_obj.data[c * plane + p.obj_px].to_f64();
                d_kits[p.kit_map].data[c * plane + p.kit_px] += S::from_f64(scale * diff);
                d_obj.data[c * plane + p.obj_px] += S::from_f64(-scale * diff);
            }
        }
    }

    (loss, d_obj, d_kits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn bce_matches_finite_differences() {
        let mut rng = crate::rng::stream(5, "bce", 0);
        let n = 40usize;
        let logits = Tensor::from_vec(
            &[1, 5, 8],
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        );
        let labels: Vec<(usize, f64)> = (0..12)
            .map(|_| (rng.gen_range(0..n), f64::from(rng.gen_bool(0.5))))
            .collect();
        let (_, grad) = bce_with_logits(&logits, &labels);
        let h = 1e-4;
        for _ in 0..16 {
            let i = rng.gen_range(0..n);
            let mut plus = logits.clone();
            plus.data[i] += h;
            let mut minus = logits.clone();
            minus.data[i] -= h;
            let fd = (bce_with_logits(&plus, &labels).0 - bce_with_logits(&minus, &labels).0)
                / (2.0 * h);
            let an: f64 = grad.data[i];
            assert!(
                (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8) < 1e-4,
                "fd {fd} vs {an}"
            );
        }
    }

    fn tiny_maps(seed: u64) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>) {
        let mut rng = crate::rng::stream(seed, "cl", 0);
        let dims = [3usize, 4, 4];
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            Tensor::from_vec(
                &dims,
                (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        };
        (mk(&mut rng), mk(&mut rng), mk(&mut rng))
    }

    #[test]
    fn contrastive_arithmetic_examples() {
        // one match at D = 0.1 and one non-match at D = 0.3, M = 0.5:
        // loss = 0.1^2 + (0.5 - 0.3)^2 = 0.01 + 0.04 = 0.05
        let d = 1usize;
        let obj = Tensor::from_vec(&[d, 1, 2], vec![0.0, 0.0]);
        let kit = Tensor::from_vec(&[d, 1, 2], vec![0.1, 0.3]);
        let pairs = PairSet {
            matches: vec![DescriptorPair {
                kit_map: 0,
                kit_px: 0,
                obj_px: 0,
            }],
            nonmatches: vec![DescriptorPair {
                kit_map: 0,
                kit_px: 1,
                obj_px: 1,
            }],
            margin: 0.5,
        };
        let (loss, _, _) = contrastive_loss(&obj, &[&kit], &pairs);
        assert!((loss - 0.05).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn identical_descriptors_cost_margin_squared() {
        let obj: Tensor<f64> = Tensor::zeros(&[4, 2, 2]);
        let kit: Tensor<f64> = Tensor::zeros(&[4, 2, 2]);
        let pairs = PairSet {
            matches: (0..4)
                .map(|i| DescriptorPair {
                    kit_map: 0,
                    kit_px: i,
                    obj_px: i,
                })
                .collect(),
            nonmatches: (0..4)
                .map(|i| DescriptorPair {
                    kit_map: 0,
                    kit_px: i,
                    obj_px: (i + 1) % 4,
                })
                .collect(),
            margin: 0.5,
        };
        let (loss, _, _) = contrastive_loss(&obj, &[&kit], &pairs);
        assert!((loss - 0.25).abs() < 1e-12);
    }

    #[test]
    fn perfect_embedding_costs_nothing() {
        // matches at distance 0, non-matches at distance >= M
        let obj = Tensor::from_vec(&[1, 1, 2], vec![0.0, 5.0]);
        let kit = Tensor::from_vec(&[1, 1, 2], vec![0.0, 5.0]);
        let pairs = PairSet {
            matches: vec![DescriptorPair {
                kit_map: 0,
                kit_px: 0,
                obj_px: 0,
            }],
            nonmatches: vec![DescriptorPair {
                kit_map: 0,
                kit_px: 1,
                obj_px: 0,
            }],
            margin: 0.5,
        };
        let (loss, d_obj, d_kits) = contrastive_loss(&obj, &[&kit], &pairs);
        assert_eq!(loss, 0.0);
        assert!(d_obj.data.iter().all(|v| *v == 0.0));
        assert!(d_kits[0].data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn contrastive_matches_finite_differences() {
        let (obj, kit_a, kit_b) = tiny_maps(8);
        let mut rng = crate::rng::stream(9, "cl-fd", 0);
        let pairs = PairSet {
            matches: (0..6)
                .map(|_| DescriptorPair {
                    kit_map: 0,
                    kit_px: rng.gen_range(0..16),
                    obj_px: rng.gen_range(0..16),
                })
                .collect(),
            nonmatches: (0..10)
                .map(|_| DescriptorPair {
                    kit_map: rng.gen_range(0..2),
                    kit_px: rng.gen_range(0..16),
                    obj_px: rng.gen_range(0..16),
                })
                .collect(),
            margin: 0.5,
        };
        let (_, d_obj, d_kits) = contrastive_loss(&obj, &[&kit_a, &kit_b], &pairs);
        let h = 1e-5;
        let loss_of = |o: &Tensor<f64>, ka: &Tensor<f64>, kb: &Tensor<f64>| {
            contrastive_loss(o, &[ka, kb], &pairs).0
        };
        for _ in 0..24 {
            let which = rng.gen_range(0..3);
            let i = rng.gen_range(0..48);
            let (mut o, mut ka, mut kb) = (obj.clone(), kit_a.clone(), kit_b.clone());
            let (an, slot): (f64, &mut f64) = match which {
                0 => (d_obj.data[i], &mut o.data[i]),
                1 => (d_kits[0].data[i], &mut ka.data[i]),
                _ => (d_kits[1].data[i], &mut kb.data[i]),
            };
            *slot += h;
            let up = loss_of(&o, &ka, &kb);
            *slot -= 2.0 * h;
            let dn = loss_of(&o, &ka, &kb);
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7) < 1e-4,
                "slot {which}[{i}]: fd {fd} vs {an}"
            );
        }
    }
}
