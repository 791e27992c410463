//! Dense tensors and the `QTNS` container.
//!
//! Layout (little-endian): magic `QTNS`, `u32` version (1), `u32` ndim,
//! `ndim x u64` dims, `u32` dtype code, then the row-major payload.
//! Dtype 1 is 32-bit float; dtype 2 (signed 8-bit integers) is used for
//! quantized kernels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const QTNS_MAGIC: &[u8; 4] = b"QTNS";
pub const QTNS_VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const DTYPE_I8: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum QtnsData {
    F32(Vec<f32>),
    I8(Vec<i8>),
}

impl QtnsData {
    fn len(&self) -> usize {
        match self {
            QtnsData::F32(v) => v.len(),
            QtnsData::I8(v) => v.len(),
        }
    }
}

pub fn encode_qtns(dims: &[usize], data: &QtnsData) -> Result<Vec<u8>> {
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::LengthMismatch {
            expected: count,
            actual: data.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + 8 * dims.len() + 4 * count);
    out.extend_from_slice(QTNS_MAGIC);
    out.extend_from_slice(&QTNS_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match data {
        QtnsData::F32(v) => {
            out.extend_from_slice(&DTYPE_F32.to_le_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        QtnsData::I8(v) => {
            out.extend_from_slice(&DTYPE_I8.to_le_bytes());
            out.extend(v.iter().map(|&x| x as u8));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("truncated file while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode_qtns(bytes: &[u8]) -> Result<(Vec<usize>, QtnsData)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != QTNS_MAGIC {
        return Err(Error::format("bad magic, expected QTNS"));
    }
    let version = cur.u32("version")?;
    if version != QTNS_VERSION {
        return Err(Error::UnsupportedVersion {
            schema: "QTNS".into(),
            found: version.to_string(),
            supported: QTNS_VERSION,
        });
    }
    let ndim = cur.u32("ndim")? as usize;
    if ndim == 0 || ndim > 8 {
        return Err(Error::format(format!("unsupported ndim {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = cur.u64("dims")?;
        let d = usize::try_from(d).map_err(|_| Error::format("dimension overflows usize"))?;
        dims.push(d);
    }
    let count = dims
        .iter()
        .try_fold(1_usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("element count overflows"))?;
    let dtype = cur.u32("dtype")?;
    let data = match dtype {
        DTYPE_F32 => {
            let raw = cur.take(
                count
                    .checked_mul(4)
                    .ok_or_else(|| Error::format("payload size overflows"))?,
                "payload",
            )?;
            QtnsData::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
        DTYPE_I8 => {
            let raw = cur.take(count, "payload")?;
            QtnsData::I8(raw.iter().map(|&b| b as i8).collect())
        }
        other => return Err(Error::format(format!("unknown dtype code {other}"))),
    };
    if cur.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    Ok((dims, data))
}

/// Row-major `f32` tensor of arbitrary rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::format(format!("invalid tensor shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::LengthMismatch {
                expected: count,
                actual: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn to_qtns_bytes(&self) -> Vec<u8> {
        encode_qtns(&self.shape, &QtnsData::F32(self.data.clone())).expect("shape and data validated at construction")
    }

    pub fn from_qtns_bytes(bytes: &[u8]) -> Result<Self> {
        match decode_qtns(bytes)? {
            (dims, QtnsData::F32(data)) => Tensor::new(dims, data),
            (_, QtnsData::I8(_)) => Err(Error::format("expected a 32-bit real tensor, found int8")),
        }
    }

    pub fn read_qtns(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_qtns_bytes(&bytes).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }

    pub fn write_qtns(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_qtns_bytes())?;
        Ok(())
    }
}

/// Convolution weights shaped `(out_channels, in_channels, kernel_h, kernel_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::format(format!("invalid weight shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::LengthMismatch {
                expected: count,
                actual: data.len(),
            });
        }
        Ok(WeightTensor { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn in_channels(&self) -> usize {
        self.shape[1]
    }

    pub fn read_qtns(path: impl AsRef<Path>) -> Result<Self> {
        Tensor::read_qtns(path)?.try_into()
    }
}

/// Rank 4 maps directly; rank 2 `(out, in)` becomes `(out, in, 1, 1)` and
/// rank 1 `(n)` becomes `(1, n, 1, 1)`.
impl TryFrom<Tensor> for WeightTensor {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        let shape = match *t.shape() {
            [o, i, h, w] => [o, i, h, w],
            [o, i] => [o, i, 1, 1],
            [n] => [1, n, 1, 1],
            ref s => {
                return Err(Error::format(format!(
                    "weight tensors must have rank 1, 2 or 4, got shape {s:?}"
                )))
            }
        };
        WeightTensor::new(shape, t.into_data())
    }
}

impl From<WeightTensor> for Tensor {
    fn from(w: WeightTensor) -> Self {
        Tensor {
            shape: w.shape.to_vec(),
            data: w.data,
        }
    }
}

/// One depthwise block: elements `start + k * stride` for `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct BlockSpan {
    pub start: usize,
    pub stride: usize,
    pub len: usize,
}

impl BlockSpan {
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..self.len).map(move |k| self.start + k * self.stride)
    }
}

/// Blocks of `block` consecutive entries along `axis`, in scale-tensor order:
/// outer positions, then block index, then inner positions. The last block
/// along the axis may be short.
pub(crate) fn depth_blocks(shape: &[usize], axis: usize, block: usize) -> Vec<BlockSpan> {
    let outer: usize = shape[..axis].iter().product();
    let depth = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let nblocks = depth.div_ceil(block);
    let mut spans = Vec::with_capacity(outer * nblocks * inner);
    for o in 0..outer {
        for j in 0..nblocks {
            let c0 = j * block;
            let len = block.min(depth - c0);
            for r in 0..inner {
                spans.push(BlockSpan {
                    start: (o * depth + c0) * inner + r,
                    stride: inner,
                    len,
                });
            }
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qtns_layout_is_bit_exact() {
        let t = Tensor::new(vec![2, 1], vec![1.0, -2.5]).unwrap();
        let bytes = t.to_qtns_bytes();
        let mut expected = b"QTNS".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(Tensor::from_qtns_bytes(&bytes).unwrap(), t);
    }

    #[test]
    fn qtns_rejects_corruption() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = t.to_qtns_bytes();
        assert!(matches!(
            Tensor::from_qtns_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Tensor::from_qtns_bytes(&bad).is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            Tensor::from_qtns_bytes(&v2),
            Err(Error::UnsupportedVersion { .. })
        ));
        let mut extra = bytes;
        extra.push(0);
        assert!(Tensor::from_qtns_bytes(&extra).is_err());
    }

    #[test]
    fn int8_payload() {
        let bytes = encode_qtns(&[2, 2], &QtnsData::I8(vec![-128, -1, 0, 127])).unwrap();
        let (dims, data) = decode_qtns(&bytes).unwrap();
        assert_eq!(dims, vec![2, 2]);
        assert_eq!(data, QtnsData::I8(vec![-128, -1, 0, 127]));
        assert!(Tensor::from_qtns_bytes(&bytes).is_err());
    }

    #[test]
    fn weight_shapes() {
        let t = Tensor::new(vec![3, 5], vec![0.0; 15]).unwrap();
        let w: WeightTensor = t.try_into().unwrap();
        assert_eq!(w.shape(), [3, 5, 1, 1]);
        let t3 = Tensor::new(vec![1, 2, 3], vec![0.0; 6]).unwrap();
        assert!(WeightTensor::try_from(t3).is_err());
        assert!(WeightTensor::new([1, 2, 2, 1], vec![0.0; 3]).is_err());
    }

    #[test]
    fn block_spans_cover_every_element_once() {
        let shape = [2, 70, 3, 3];
        let spans = depth_blocks(&shape, 1, 32);
        // 2 outputs * 3 blocks * 9 positions
        assert_eq!(spans.len(), 2 * 3 * 9);
        let mut seen = vec![0u8; shape.iter().product()];
        for s in &spans {
            for i in s.indices() {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(spans[18].len, 6);
    }
}
