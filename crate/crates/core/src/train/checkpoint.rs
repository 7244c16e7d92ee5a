//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//! `"PNRF"`, version `u32`, scalar width `u8` (4 or 8), the config as a
//! length-prefixed JSON string, the step counter `u64`, then length-prefixed
//! scalar arrays: positions, velocities, features, network parameters and,
//! for each optimizer (network, then features), its step `u64` followed by
//! the first and second moments. Scalars are stored at their native width,
//! so round trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::encoding::ParticleCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::network::{AdamState, FieldParams};
use crate::scalar::Real;

use super::config::TrainConfig;
use super::state::TrainState;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PNRF";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_array<T: Real>(out: &mut Vec<u8>, values: impl ExactSizeIterator<Item = T>) {
    put_u64(out, values.len() as u64);
    for v in values {
        v.write_le(out);
    }
}

fn flatten<T: Real>(v: &[Vec3<T>]) -> impl ExactSizeIterator<Item = T> + '_ {
    v.iter().flat_map(|p| p.to_array()).collect::<Vec<_>>().into_iter()
}

pub fn encode_checkpoint<T: Real>(state: &TrainState<T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(T::BYTES as u8);
    let config = serde_json::to_vec(&state.config)?;
    put_u64(&mut out, config.len() as u64);
    out.extend_from_slice(&config);
    put_u64(&mut out, state.step);
    put_array(&mut out, flatten(&state.cloud.positions));
    put_array(&mut out, flatten(&state.cloud.velocities));
    put_array(&mut out, state.cloud.features.iter().copied());
    put_array(&mut out, state.params.as_slice().iter().copied());
    for adam in [&state.mlp_adam, &state.feature_adam] {
        put_u64(&mut out, adam.step);
        put_array(&mut out, adam.first.iter().copied());
        put_array(&mut out, adam.second.iter().copied());
    }
    Ok(out)
}

pub fn save_checkpoint<T: Real>(state: &TrainState<T>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(state)?;
    fs::write(path, bytes).map_err(|e| Error::WriteError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::CorruptCheckpoint(format!("truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn array<T: Real>(&mut self) -> Result<Vec<T>> {
        let n = self.u64()? as usize;
        let bytes = self.take(n.checked_mul(T::BYTES).ok_or_else(|| {
            Error::CorruptCheckpoint("array length overflows".into())
        })?)?;
        Ok(bytes.chunks_exact(T::BYTES).map(T::read_le).collect())
    }

    fn vectors<T: Real>(&mut self) -> Result<Vec<Vec3<T>>> {
        let flat = self.array::<T>()?;
        if flat.len() % 3 != 0 {
            return Err(Error::CorruptCheckpoint("vector array is not a multiple of 3".into()));
        }
        Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }

    fn adam<T: Real>(&mut self, config: crate::network::AdamConfig) -> Result<AdamState<T>> {
        let step = self.u64()?;
        let first = self.array()?;
        let second = self.array()?;
        if first.len() != second.len() {
            return Err(Error::CorruptCheckpoint("optimizer moments differ in length".into()));
        }
        Ok(AdamState {
            config,
            first,
            second,
            step,
        })
    }
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<TrainState<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("missing PNRF header".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint(format!(
            "format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let width = r.take(1)?[0] as usize;
    if width != T::BYTES {
        return Err(Error::IncompatibleCheckpoint(format!(
            "{width}-byte scalars, expected {}",
            T::BYTES
        )));
    }
    let config_len = r.u64()? as usize;
    let config: TrainConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::CorruptCheckpoint(format!("config: {e}")))?;
    let step = r.u64()?;
    let positions = r.vectors()?;
    let velocities = r.vectors()?;
    let features = r.array()?;
    let params = r.array()?;
    let mlp_adam = r.adam(config.mlp_optimizer)?;
    let feature_adam = r.adam(config.feature_optimizer)?;
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if velocities.len() != positions.len() || features.len() != positions.len() * config.feature_dim {
        return Err(Error::CorruptCheckpoint("particle arrays disagree in length".into()));
    }
    let corrupt = |e: Error| Error::CorruptCheckpoint(e.to_string());
    let cloud = ParticleCloud {
        positions,
        velocities,
        features,
        feature_dim: config.feature_dim,
        search_radius: T::lit(config.search_radius),
    };
    let params = FieldParams::from_flat(config.feature_dim, params).map_err(corrupt)?;
    TrainState::from_parts(config, cloud, params, Some(mlp_adam), Some(feature_adam), step)
        .map_err(corrupt)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<TrainState<T>> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_checkpoint(&bytes)
}
