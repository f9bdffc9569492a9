//! Parameter snapshots.
//!
//! Layout: the 4-byte magic `SCEP`, a little-endian `u32` header length,
//! the UTF-8 JSON header, then every parameter value as little-endian `f32`
//! in registration order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Param, ParamSet, Real};

pub const MAGIC: &[u8; 4] = b"SCEP";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub tensors: Vec<TensorEntry>,
    pub seed: u64,
    /// Free-form model configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("not a parameter snapshot")]
    BadMagic,
    #[error("payload holds {got} values, header declares {expected}")]
    Length { expected: usize, got: usize },
}

pub fn write_snapshot<F: Real>(
    mut out: impl Write,
    params: &ParamSet<F>,
    seed: u64,
    config: serde_json::Value,
) -> Result<(), SnapshotError> {
    let header = SnapshotHeader {
        tensors: params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect(),
        seed,
        config,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for p in params.iter() {
        for v in &p.value {
            out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<F: Real>(mut input: impl Read) -> Result<(SnapshotHeader, ParamSet<F>), SnapshotError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: SnapshotHeader = serde_json::from_slice(&json)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    let expected: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if payload.len() != expected * 4 {
        return Err(SnapshotError::Length {
            expected,
            got: payload.len() / 4,
        });
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| F::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
    let mut set = ParamSet::new();
    for t in &header.tensors {
        let mut p = Param::zeros(t.name.clone(), &t.shape);
        for v in p.value.iter_mut() {
            *v = values.next().expect("length checked above");
        }
        set.push(p);
    }
    Ok((header, set))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_bits() {
        let mut set = ParamSet::<f32>::new();
        let mut a = Param::zeros("enc.conv0.w", &[2, 1, 1, 1]);
        a.value = vec![0.1, -3.5e-7];
        let mut b = Param::zeros("enc.conv0.b", &[2]);
        b.value = vec![f32::MAX, -0.0];
        set.push(a);
        set.push(b);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &set, 42, serde_json::json!({"variant": "mcpc"})).unwrap();
        let (header, back) = read_snapshot::<f32>(buf.as_slice()).unwrap();
        assert_eq!(header.seed, 42);
        assert_eq!(header.tensors[0].name, "enc.conv0.w");
        for (p, q) in set.iter().zip(back.iter()) {
            let pb: Vec<u32> = p.value.iter().map(|v| v.to_bits()).collect();
            let qb: Vec<u32> = q.value.iter().map(|v| v.to_bits()).collect();
            assert_eq!(pb, qb);
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut set = ParamSet::<f32>::new();
        set.push(Param::zeros("w", &[3]));
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &set, 0, serde_json::Value::Null).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(
            read_snapshot::<f32>(buf.as_slice()),
            Err(SnapshotError::Length { expected: 3, got: 2 })
        ));
    }
}
