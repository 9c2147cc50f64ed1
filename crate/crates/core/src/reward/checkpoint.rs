//! Binary ensemble checkpoints.
//!
//! Layout (little-endian):
//! `b"RRLCKPT\0"`, format version `u32`, scalar tag length `u8` + tag bytes,
//! input dim `u64`, hidden width `u64`, member count `u64`, then for each member
//! its parameter count `u64` followed by the parameters as `f64` bit patterns.
//! `f32` values widen to `f64` exactly, so both scalar types round-trip bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use super::ensemble::RewardEnsemble;
use super::net::RewardNet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"RRLCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(ens: &RewardEnsemble<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let tag = T::TAG.as_bytes();
    w.write_all(&[tag.len() as u8])?;
    w.write_all(tag)?;
    w.write_all(&(ens.input_dim() as u64).to_le_bytes())?;
    w.write_all(&(ens.hidden() as u64).to_le_bytes())?;
    w.write_all(&(ens.len() as u64).to_le_bytes())?;
    for m in ens.members() {
        w.write_all(&(m.params().len() as u64).to_le_bytes())?;
        for p in m.params() {
            w.write_all(&p.to_f64_lossy().to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<RewardEnsemble<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 1];
    r.read_exact(&mut len)?;
    let mut tag = vec![0u8; len[0] as usize];
    r.read_exact(&mut tag)?;
    if tag != T::TAG.as_bytes() {
        return Err(Error::Checkpoint(format!(
            "scalar type mismatch: file holds {}, expected {}",
            String::from_utf8_lossy(&tag),
            T::TAG
        )));
    }
    let input_dim = read_u64(&mut r)? as usize;
    let hidden = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let expected = RewardNet::<T>::param_count(input_dim, hidden);
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let n = read_u64(&mut r)? as usize;
        if n != expected {
            return Err(Error::Checkpoint(format!(
                "member has {n} parameters, expected {expected}"
            )));
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let bits = read_u64(&mut r)?;
            params.push(T::of(f64::from_bits(bits)));
        }
        members.push(RewardNet::from_params(input_dim, hidden, params)?);
    }
    RewardEnsemble::from_members(members)
}

pub fn save_checkpoint<T: Scalar>(ens: &RewardEnsemble<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(ens, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<RewardEnsemble<T>> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
