//! Checkpoint container: one JSON header line describing the layout, then the
//! raw tensor data as little-endian f64, in header order. Round trips are
//! bitwise lossless.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecoderParams, HIDDEN};
use crate::diffcore::Tensor;
use crate::{Error, Result};

const MAGIC: &str = "LATSURF-CKPT";
const VERSION: u32 = 1;

/// Trained model state: decoder weights, the per-shape latent table, and the
/// template spec the decoder was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub latent_dim: usize,
    pub template_subdivision: u32,
    pub params: DecoderParams,
    pub shape_ids: Vec<String>,
    /// N x d table of trained per-shape latent vectors.
    pub latents: Tensor,
    pub best_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    magic: String,
    version: u32,
    latent_dim: usize,
    template_subdivision: u32,
    shape_count: usize,
    shape_ids: Vec<String>,
    best_loss: f64,
    tensors: Vec<TensorMeta>,
}

impl Checkpoint {
    pub fn shape_count(&self) -> usize {
        self.latents.rows()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tensors: Vec<(&str, &Tensor)> = self.params.tensors();
        tensors.push(("latents", &self.latents));
        let header = Header {
            magic: MAGIC.to_string(),
            version: VERSION,
            latent_dim: self.latent_dim,
            template_subdivision: self.template_subdivision,
            shape_count: self.latents.rows(),
            shape_ids: self.shape_ids.clone(),
            best_loss: self.best_loss,
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorMeta {
                    name: name.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut file, &header)?;
        file.write_all(b"\n")?;
        for (_, t) in &tensors {
            for v in t.data() {
                file.write_all(&v.to_le_bytes())?;
            }
        }
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bad = |detail: String| Error::Format {
            path: path.to_path_buf(),
            expected: "checkpoint",
            detail,
        };
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let header = read_header(&mut file, path)?;
        if header.magic != MAGIC {
            return Err(bad(format!("bad magic {:?}", header.magic)));
        }
        if header.version != VERSION {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for meta in &header.tensors {
            let count = meta.rows * meta.cols;
            let mut bytes = vec![0u8; count * 8];
            file.read_exact(&mut bytes)
                .map_err(|e| bad(format!("truncated tensor {:?}: {e}", meta.name)))?;
            let data: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((meta.name.clone(), Tensor::from_vec(meta.rows, meta.cols, data)));
        }
        let mut take = |name: &str| -> Result<Tensor> {
            let idx = tensors
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| bad(format!("missing tensor {name:?}")))?;
            Ok(tensors.remove(idx).1)
        };
        let d_in = 3 + header.latent_dim;
        let [h1, h2, h3] = HIDDEN;
        let params = DecoderParams {
            latent_dim: header.latent_dim,
            w1: take("w1")?,
            b1: take("b1")?,
            ln1_gain: take("ln1_gain")?,
            ln1_bias: take("ln1_bias")?,
            w2: take("w2")?,
            b2: take("b2")?,
            ln2_gain: take("ln2_gain")?,
            ln2_bias: take("ln2_bias")?,
            w3: take("w3")?,
            b3: take("b3")?,
            ln3_gain: take("ln3_gain")?,
            ln3_bias: take("ln3_bias")?,
            w4: take("w4")?,
            b4: take("b4")?,
        };
        if params.w1.shape() != (d_in, h1)
            || params.w2.shape() != (h1, h2)
            || params.w3.shape() != (h2, h3)
            || params.w4.shape() != (h3, 3)
        {
            return Err(bad("decoder tensor shapes do not match the declared layout".into()));
        }
        let latents = take("latents")?;
        if latents.cols() != header.latent_dim || latents.rows() != header.shape_count {
            return Err(bad("latent table shape does not match the header".into()));
        }
        Ok(Checkpoint {
            latent_dim: header.latent_dim,
            template_subdivision: header.template_subdivision,
            params,
            shape_ids: header.shape_ids,
            latents,
            best_loss: header.best_loss,
        })
    }
}

fn read_header(file: &mut impl Read, path: &Path) -> Result<Header> {
    // The header is everything up to the first newline.
    let mut bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        file.read_exact(&mut byte).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            expected: "checkpoint",
            detail: format!("missing header line: {e}"),
        })?;
        if byte[0] == b'\n' {
            break;
        }
        bytes.push(byte[0]);
        if bytes.len() > 1 << 22 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                expected: "checkpoint",
                detail: "header line exceeds 4 MiB".into(),
            });
        }
    }
    Ok(serde_json::from_slice(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = rng_from_seed(60);
        let params = DecoderParams::init(4, &mut rng);
        let latents = Tensor::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        Checkpoint {
            latent_dim: 4,
            template_subdivision: 2,
            params,
            shape_ids: vec!["a".into(), "b".into(), "c".into()],
            latents,
            best_loss: 0.012345678901234567,
        }
    }

    #[test]
    fn save_load_round_trip_is_bitwise() {
        let ckpt = sample_checkpoint();
        let dir = std::env::temp_dir().join("latsurf_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ckpt, back);
        assert_eq!(ckpt.best_loss.to_bits(), back.best_loss.to_bits());
        // Double round trip produces identical bytes.
        let path2 = dir.join("model2.ckpt");
        back.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupt_magic_is_rejected_with_path() {
        let ckpt = sample_checkpoint();
        let dir = std::env::temp_dir().join("latsurf_ckpt_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        ckpt.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip a byte inside the magic string.
        let pos = bytes.windows(4).position(|w| w == b"CKPT").unwrap();
        bytes[pos] = b'X';
        std::fs::write(&path, bytes).unwrap();
        let err = Checkpoint::load(&path).unwrap_err().to_string();
        assert!(err.contains("model.ckpt"), "{err}");
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let ckpt = sample_checkpoint();
        let dir = std::env::temp_dir().join("latsurf_ckpt_trunc");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        ckpt.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
