use std::path::Path;

use crate::{Error, Result};

pub const MLOT_MAGIC: &[u8; 4] = b"MLOT";
pub const MLOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    fn dtype_code(&self) -> u8 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::F64(_) => 2,
        }
    }
}

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > u8::MAX as usize {
            return Err(Error::shape(format!("unsupported rank {}", shape.len())));
        }
        if expected != data.len() {
            return Err(Error::shape(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(shape, TensorData::F32(data))
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, TensorData::F64(data))
    }

    pub fn zeros_f32(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: TensorData::F32(vec![0.0; n]) }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut TensorData {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    pub fn is_all_zero(&self) -> bool {
        match &self.data {
            TensorData::F32(v) => v.iter().all(|&x| x == 0.0),
            TensorData::F64(v) => v.iter().all(|&x| x == 0.0),
        }
    }

    /// Layout: magic, u32 version, u8 dtype (1 = f32, 2 = f64), u8 rank,
    /// rank × u64 dims, row-major payload. All integers little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let width = match self.data {
            TensorData::F32(_) => 4,
            TensorData::F64(_) => 8,
        };
        let mut out = Vec::with_capacity(10 + 8 * self.shape.len() + width * self.len());
        out.extend_from_slice(MLOT_MAGIC);
        out.extend_from_slice(&MLOT_VERSION.to_le_bytes());
        out.push(self.data.dtype_code());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Format { what: "MLOT tensor", msg };
        if bytes.len() < 10 || &bytes[..4] != MLOT_MAGIC {
            return Err(bad("missing MLOT magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MLOT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dtype = bytes[8];
        let rank = bytes[9] as usize;
        let header = 10 + 8 * rank;
        if bytes.len() < header {
            return Err(bad("truncated shape".into()));
        }
        let shape: Vec<usize> = bytes[10..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("shape overflows".into()))?;
        let payload = &bytes[header..];
        let data = match dtype {
            1 if payload.len() == count * 4 => TensorData::F32(
                payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            2 if payload.len() == count * 8 => TensorData::F64(
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            ),
            1 | 2 => return Err(bad(format!("payload of {} bytes does not match shape {shape:?}", payload.len()))),
            other => return Err(bad(format!("unknown dtype code {other}"))),
        };
        Tensor::new(shape, data)
    }
}

pub fn write_mlot(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    std::fs::write(path, tensor.to_bytes())?;
    Ok(())
}

pub fn read_mlot(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor::f32(vec![2, 1], vec![1.0, -2.0]).unwrap();
        let bytes = t.to_bytes();
        let mut expected = b"MLOT".to_vec();
        expected.extend([1, 0, 0, 0, 1, 2]);
        expected.extend(2u64.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        expected.extend((-2.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Tensor::f64(vec![3], vec![1.0]).is_err());
        assert!(Tensor::from_bytes(b"NOPE000000").is_err());
        let mut bytes = Tensor::f64(vec![2], vec![1.0, 2.0]).unwrap().to_bytes();
        bytes.pop();
        assert!(Tensor::from_bytes(&bytes).is_err());
        bytes = Tensor::f64(vec![2], vec![1.0, 2.0]).unwrap().to_bytes();
        bytes[8] = 7;
        assert!(Tensor::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(shape in prop::collection::vec(1usize..4, 1..4), wide in any::<bool>(), seed in any::<u32>()) {
            let n: usize = shape.iter().product();
            let vals: Vec<f64> = (0..n).map(|i| (i as f64 + seed as f64) * 0.37 - 3.0).collect();
            let t = if wide {
                Tensor::f64(shape.clone(), vals).unwrap()
            } else {
                Tensor::f32(shape.clone(), vals.iter().map(|&v| v as f32).collect()).unwrap()
            };
            prop_assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
        }
    }
}
