//! Versioned binary checkpoint container: magic bytes, format version,
//! robot-model hash, then named sections (flat f64 arrays or raw bytes).
//! Carries network parameters, optimizer moments, normalizer state,
//! curriculum levels, counters and the trainer RNG state — everything a
//! resume needs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"ZMLK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint model hash does not match the loaded robot model")]
    ModelHashMismatch,
    #[error("missing section '{0}'")]
    MissingSection(String),
    #[error("section '{0}' has unexpected type")]
    WrongType(String),
}

#[derive(Debug, Clone)]
pub enum Section {
    F64(Vec<f64>),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_hash: [u8; 32],
    sections: BTreeMap<String, Section>,
}

impl Checkpoint {
    pub fn new(model_hash: [u8; 32]) -> Checkpoint {
        Checkpoint {
            model_hash,
            sections: BTreeMap::new(),
        }
    }

    pub fn put_f64(&mut self, name: &str, data: Vec<f64>) {
        self.sections.insert(name.to_string(), Section::F64(data));
    }

    pub fn put_bytes(&mut self, name: &str, data: Vec<u8>) {
        self.sections.insert(name.to_string(), Section::Bytes(data));
    }

    pub fn put_u64(&mut self, name: &str, v: u64) {
        self.put_bytes(name, v.to_le_bytes().to_vec());
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64], CheckpointError> {
        match self.sections.get(name) {
            Some(Section::F64(v)) => Ok(v),
            Some(_) => Err(CheckpointError::WrongType(name.into())),
            None => Err(CheckpointError::MissingSection(name.into())),
        }
    }

    pub fn bytes(&self, name: &str) -> Result<&[u8], CheckpointError> {
        match self.sections.get(name) {
            Some(Section::Bytes(v)) => Ok(v),
            Some(_) => Err(CheckpointError::WrongType(name.into())),
            None => Err(CheckpointError::MissingSection(name.into())),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64, CheckpointError> {
        let b = self.bytes(name)?;
        if b.len() != 8 {
            return Err(CheckpointError::WrongType(name.into()));
        }
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, CheckpointError> {
        let v = self.f64s(name)?;
        if v.len() != 1 {
            return Err(CheckpointError::WrongType(name.into()));
        }
        Ok(v[0])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.model_hash)?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())?;
        for (name, section) in &self.sections {
            let nb = name.as_bytes();
            w.write_all(&(nb.len() as u16).to_le_bytes())?;
            w.write_all(nb)?;
            match section {
                Section::F64(data) => {
                    w.write_all(&[0u8])?;
                    w.write_all(&(data.len() as u64).to_le_bytes())?;
                    for v in data {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                Section::Bytes(data) => {
                    w.write_all(&[1u8])?;
                    w.write_all(&(data.len() as u64).to_le_bytes())?;
                    w.write_all(data)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let version = u32::from_le_bytes(buf4);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut model_hash = [0u8; 32];
        r.read_exact(&mut model_hash)?;
        r.read_exact(&mut buf4)?;
        let n = u32::from_le_bytes(buf4);
        let mut sections = BTreeMap::new();
        for _ in 0..n {
            let mut buf2 = [0u8; 2];
            r.read_exact(&mut buf2)?;
            let name_len = u16::from_le_bytes(buf2) as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8_lossy(&name).into_owned();
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)?;
            let mut buf8 = [0u8; 8];
            r.read_exact(&mut buf8)?;
            let len = u64::from_le_bytes(buf8) as usize;
            let section = match kind[0] {
                0 => {
                    let mut data = vec![0.0f64; len];
                    let mut raw = vec![0u8; len * 8];
                    r.read_exact(&mut raw)?;
                    for (i, chunk) in raw.chunks_exact(8).enumerate() {
                        data[i] = f64::from_le_bytes(chunk.try_into().unwrap());
                    }
                    Section::F64(data)
                }
                1 => {
                    let mut data = vec![0u8; len];
                    r.read_exact(&mut data)?;
                    Section::Bytes(data)
                }
                k => {
                    return Err(CheckpointError::WrongType(format!(
                        "unknown section kind {k} for '{name}'"
                    )))
                }
            };
            sections.insert(name, section);
        }
        Ok(Checkpoint {
            model_hash,
            sections,
        })
    }

    /// Refuse to pair a checkpoint with a different robot model.
    pub fn verify_model_hash(&self, hash: &[u8; 32]) -> Result<(), CheckpointError> {
        if &self.model_hash != hash {
            return Err(CheckpointError::ModelHashMismatch);
        }
        Ok(())
    }
}

/// ChaCha stream state serialization for exact RNG resume.
pub fn rng_state_bytes(rng: &crate::rng::Stream) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 16 + 8);
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out
}

pub fn rng_from_state_bytes(bytes: &[u8]) -> Option<crate::rng::Stream> {
    use rand::SeedableRng;
    if bytes.len() != 56 {
        return None;
    }
    let seed: [u8; 32] = bytes[..32].try_into().ok()?;
    let word_pos = u128::from_le_bytes(bytes[32..48].try_into().ok()?);
    let stream = u64::from_le_bytes(bytes[48..56].try_into().ok()?);
    let mut rng = crate::rng::Stream::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    Some(rng)
}
