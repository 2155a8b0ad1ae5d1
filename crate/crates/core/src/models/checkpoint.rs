//! Versioned binary checkpoints: little-endian, magic `LTEB`, `u32` format
//! version, length-prefixed named f64 arrays, CRC32 trailer over everything
//! before it. Round trips are bit-identical.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{atomic_write, read_bytes};
use crate::models::mlp::{Activation, MlpNetwork};
use crate::models::vae::VaeModel;
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LTEB";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>) -> Self {
        Checkpoint { kind: kind.into(), meta: Vec::new(), arrays: Vec::new() }
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn meta_get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta_get(key)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing meta key '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::CorruptCheckpoint(format!("meta key '{key}' has bad value '{raw}'")))
    }

    pub fn array(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing array '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        write_str(&mut buf, &self.kind);
        buf.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            write_str(&mut buf, k);
            write_str(&mut buf, v);
        }
        buf.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            write_str(&mut buf, &a.name);
            buf.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            buf.extend_from_slice(&(a.data.len() as u64).to_le_bytes());
            for &v in &a.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::CorruptCheckpoint(format!("file too short ({} bytes)", bytes.len())));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let expected = u32::from_le_bytes(trailer.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if expected != actual {
            return Err(Error::ChecksumMismatch { expected, actual });
        }
        let mut cur = Cursor { buf: body, pos: 0 };
        let magic = cur.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = cur.read_u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion { found: version, supported: CHECKPOINT_VERSION });
        }
        let kind = cur.read_str()?;
        let meta_n = cur.read_u32()? as usize;
        let mut meta = Vec::with_capacity(meta_n);
        for _ in 0..meta_n {
            let k = cur.read_str()?;
            let v = cur.read_str()?;
            meta.push((k, v));
        }
        let arr_n = cur.read_u32()? as usize;
        let mut arrays = Vec::with_capacity(arr_n);
        for _ in 0..arr_n {
            let name = cur.read_str()?;
            let ndim = cur.read_u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(cur.read_u32()? as usize);
            }
            let count = cur.read_u64()? as usize;
            if count != shape.iter().product::<usize>() {
                return Err(Error::CorruptCheckpoint(format!(
                    "array '{name}': length {count} does not match shape {shape:?}"
                )));
            }
            let raw = cur.take(8 * count)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if cur.pos != body.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} trailing bytes after last array",
                body.len() - cur.pos
            )));
        }
        Ok(Checkpoint { kind, meta, arrays })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "unexpected end of file at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn read_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn read_str(&mut self) -> Result<String> {
        let n = self.read_u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::CorruptCheckpoint("invalid utf-8 in string field".into()))
    }
}

// ---- model adapters ----------------------------------------------------

fn sizes_to_meta(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

fn sizes_from_meta(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::CorruptCheckpoint(format!("bad layer sizes '{raw}'")))
        })
        .collect()
}

fn acts_to_meta(acts: &[Activation]) -> String {
    acts.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",")
}

fn acts_from_meta(raw: &str) -> Result<Vec<Activation>> {
    raw.split(',').map(|s| Activation::parse(s.trim())).collect()
}

pub fn push_mlp_arrays(ckpt: &mut Checkpoint, prefix: &str, net: &MlpNetwork) {
    ckpt.set_meta(format!("{prefix}sizes"), sizes_to_meta(net.layer_sizes()));
    ckpt.set_meta(format!("{prefix}activations"), acts_to_meta(net.activations()));
    for (name, tensor) in net.param_names(prefix).iter().zip(net.params()) {
        ckpt.arrays.push(NamedArray {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            data: tensor.data().to_vec(),
        });
    }
}

pub fn mlp_from_arrays(ckpt: &Checkpoint, prefix: &str) -> Result<MlpNetwork> {
    let sizes = sizes_from_meta(
        ckpt.meta_get(&format!("{prefix}sizes"))
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing meta '{prefix}sizes'")))?,
    )?;
    let acts = acts_from_meta(
        ckpt.meta_get(&format!("{prefix}activations")).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("missing meta '{prefix}activations'"))
        })?,
    )?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for i in 0..sizes.len().saturating_sub(1) {
        let w = ckpt.array(&format!("{prefix}w{i}"))?;
        let b = ckpt.array(&format!("{prefix}b{i}"))?;
        weights.push(Tensor::new(w.data.clone(), w.shape.clone())?);
        biases.push(Tensor::new(b.data.clone(), b.shape.clone())?);
    }
    MlpNetwork::from_parts(&sizes, &acts, weights, biases)
}

pub const VAE_KIND: &str = "vae";
pub const ENERGY_KIND: &str = "energy";

pub fn vae_to_checkpoint(model: &VaeModel, meta: &[(String, String)]) -> Checkpoint {
    let mut ckpt = Checkpoint::new(VAE_KIND);
    ckpt.set_meta("latent_dim", model.latent_dim.to_string());
    ckpt.set_meta("obs_dim", model.obs_dim.to_string());
    ckpt.set_meta("obs_noise_sigma", format!("{:?}", model.obs_noise_sigma));
    for (k, v) in meta {
        ckpt.set_meta(k.clone(), v.clone());
    }
    push_mlp_arrays(&mut ckpt, "encoder.", &model.encoder);
    push_mlp_arrays(&mut ckpt, "decoder.", &model.decoder);
    ckpt
}

pub fn vae_from_checkpoint(ckpt: &Checkpoint) -> Result<VaeModel> {
    if ckpt.kind != VAE_KIND {
        return Err(Error::CorruptCheckpoint(format!(
            "expected a '{VAE_KIND}' checkpoint, got '{}'",
            ckpt.kind
        )));
    }
    let encoder = mlp_from_arrays(ckpt, "encoder.")?;
    let decoder = mlp_from_arrays(ckpt, "decoder.")?;
    let sigma: f64 = ckpt.meta_parse("obs_noise_sigma")?;
    VaeModel::from_parts(encoder, decoder, sigma)
}

pub fn energy_to_checkpoint(
    energy: &crate::models::energy::EnergyNetwork,
    meta: &[(String, String)],
) -> Checkpoint {
    let mut ckpt = Checkpoint::new(ENERGY_KIND);
    for (k, v) in meta {
        ckpt.set_meta(k.clone(), v.clone());
    }
    push_mlp_arrays(&mut ckpt, "energy.", &energy.net);
    ckpt
}

pub fn energy_from_checkpoint(ckpt: &Checkpoint) -> Result<crate::models::energy::EnergyNetwork> {
    if ckpt.kind != ENERGY_KIND {
        return Err(Error::CorruptCheckpoint(format!(
            "expected an '{ENERGY_KIND}' checkpoint, got '{}'",
            ckpt.kind
        )));
    }
    crate::models::energy::EnergyNetwork::from_net(mlp_from_arrays(ckpt, "energy.")?)
}
