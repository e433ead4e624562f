//! Checkpoint container: magic "F2FC", config hash, named parameter
//! tensors (each framed in the tensor format), step count, RNG state.

use std::io::{Read, Write};
use std::path::Path;

use super::tensor::Tensor;
use super::LearnError;
use crate::render::heightmap::{read_tensor_header, write_tensor_header};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"F2FC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<f32>>,
    pub step_count: u64,
    pub rng_seed: [u8; 32],
    pub rng_word_pos: u128,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        f.write_all(&self.config_hash.to_le_bytes())?;
        f.write_all(&(self.names.len() as u32).to_le_bytes())?;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            let nb = name.as_bytes();
            f.write_all(&(nb.len() as u32).to_le_bytes())?;
            f.write_all(nb)?;
            let dims: Vec<u32> = t.dims.iter().map(|d| *d as u32).collect();
            write_tensor_header(&mut f, &dims)?;
            for v in &t.data {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.write_all(&self.step_count.to_le_bytes())?;
        f.write_all(&self.rng_seed)?;
        f.write_all(&self.rng_word_pos.to_le_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(LearnError::Format(format!(
                "{}: bad checkpoint magic {magic:?}",
                path.display()
            )));
        }
        let mut b4 = [0u8; 4];
        f.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(LearnError::Format(format!(
                "{}: unsupported checkpoint version {version}",
                path.display()
            )));
        }
        let mut b8 = [0u8; 8];
        f.read_exact(&mut b8)?;
        let config_hash = u64::from_le_bytes(b8);
        f.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut names = Vec::with_capacity(n);
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            f.read_exact(&mut b4)?;
            let len = u32::from_le_bytes(b4) as usize;
            let mut nb = vec![0u8; len];
            f.read_exact(&mut nb)?;
            names.push(String::from_utf8(nb).map_err(|_| {
                LearnError::Format(format!("{}: bad tensor name", path.display()))
            })?);
            let dims = read_tensor_header(&mut f, path)?;
            let numel: usize = dims.iter().map(|d| *d as usize).product();
            let mut data = vec![0f32; numel];
            for v in data.iter_mut() {
                f.read_exact(&mut b4)?;
                *v = f32::from_le_bytes(b4);
            }
            tensors.push(Tensor::from_vec(
                &dims.iter().map(|d| *d as usize).collect::<Vec<_>>(),
                data,
            ));
        }
        f.read_exact(&mut b8)?;
        let step_count = u64::from_le_bytes(b8);
        let mut rng_seed = [0u8; 32];
        f.read_exact(&mut rng_seed)?;
        let mut b16 = [0u8; 16];
        f.read_exact(&mut b16)?;
        let rng_word_pos = u128::from_le_bytes(b16);
        Ok(Checkpoint {
            config_hash,
            names,
            tensors,
            step_count,
            rng_seed,
            rng_word_pos,
        })
    }
}
