//! Weight quantization into an integer kernel (VQK) plus one scale per
//! depthwise block (KDS).
//!
//! Each block is scaled by `2^(b-1) / max|w|`, floored and clipped to the
//! signed `b`-bit range. The block scale `xi = sum(w * q) / sum(q^2)` is the
//! least-squares fit of the integers back onto the original values.

use crate::error::{Error, Result};
use crate::quant::tensor::{depth_blocks, WeightTensor};
use crate::quant::{check_bits, check_block, int_range};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedLayer {
    bits: u8,
    block_size: usize,
    source_shape: [usize; 4],
    /// Same layout as the source tensor.
    vqk: Vec<i8>,
    /// Shaped `(out, ceil(in / block), kh, kw)`.
    kds: Vec<f64>,
}

impl QuantizedLayer {
    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn source_shape(&self) -> [usize; 4] {
        self.source_shape
    }

    pub fn vqk(&self) -> &[i8] {
        &self.vqk
    }

    pub fn kds(&self) -> &[f64] {
        &self.kds
    }

    pub fn kds_shape(&self) -> [usize; 4] {
        let [o, i, h, w] = self.source_shape;
        [o, i.div_ceil(self.block_size), h, w]
    }

    /// Reconstruction `xi * q` kept in double precision.
    pub fn reconstruct_f64(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vqk.len()];
        for (span, &xi) in depth_blocks(&self.source_shape, 1, self.block_size)
            .into_iter()
            .zip(&self.kds)
        {
            for i in span.indices() {
                out[i] = xi * f64::from(self.vqk[i]);
            }
        }
        out
    }
}

/// Quantizes one block; returns the integer codes and the least-squares scale.
///
/// A block with `max|w| = 0`, or whose codes are all zero, gets `xi = 0`.
pub fn quantize_block(values: &[f64], bits: u8) -> Result<(Vec<i8>, f64)> {
    check_bits(bits)?;
    let (lo, hi) = int_range(bits);
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok((vec![0; values.len()], 0.0));
    }
    let scale = f64::from(1_i32 << (bits - 1)) / max_abs;
    let codes: Vec<i8> = values
        .iter()
        .map(|&w| ((w * scale).floor() as i64).clamp(i64::from(lo), i64::from(hi)) as i8)
        .collect();
    let (num, den) = values.iter().zip(&codes).fold((0.0, 0.0), |(n, d), (&w, &q)| {
        let q = f64::from(q);
        (n + w * q, d + q * q)
    });
    let xi = if den == 0.0 { 0.0 } else { num / den };
    Ok((codes, xi))
}

pub fn quantize_weights(t: &WeightTensor, bits: u8, block: usize) -> Result<QuantizedLayer> {
    check_bits(bits)?;
    check_block(block)?;
    let shape = t.shape();
    let data = t.data();
    let spans = depth_blocks(&shape, 1, block);
    let mut vqk = vec![0_i8; data.len()];
    let mut kds = Vec::with_capacity(spans.len());
    let mut buf = Vec::with_capacity(block);
    for span in spans {
        buf.clear();
        buf.extend(span.indices().map(|i| f64::from(data[i])));
        let (codes, xi) = quantize_block(&buf, bits)?;
        for (i, q) in span.indices().zip(codes) {
            vqk[i] = q;
        }
        kds.push(xi);
    }
    Ok(QuantizedLayer {
        bits,
        block_size: block,
        source_shape: shape,
        vqk,
        kds,
    })
}

pub fn dequantize(q: &QuantizedLayer) -> WeightTensor {
    let data = q.reconstruct_f64().into_iter().map(|v| v as f32).collect();
    WeightTensor::new(q.source_shape, data).expect("layer shape is consistent")
}

/// Signal-to-quantization-noise ratio of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    /// Reconstruction error is exactly zero.
    Exact,
    /// The original tensor is all zeros, so the ratio is undefined.
    NoSignal,
}

impl Snr {
    pub fn from_energies(signal: f64, error: f64) -> Snr {
        if signal == 0.0 {
            Snr::NoSignal
        } else if error == 0.0 {
            Snr::Exact
        } else {
            Snr::Db(10.0 * (signal / error).log10())
        }
    }

    /// Decibels, with `+inf` for an exact reconstruction.
    pub fn db(self) -> Option<f64> {
        match self {
            Snr::Db(v) => Some(v),
            Snr::Exact => Some(f64::INFINITY),
            Snr::NoSignal => None,
        }
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Db(v) => write!(f, "{v:.3} dB"),
            Snr::Exact => f.write_str("exact"),
            Snr::NoSignal => f.write_str("no-signal"),
        }
    }
}

fn energies(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> (f64, f64) {
    a.zip(b).fold((0.0, 0.0), |(s, e), (w, r)| {
        let d = w - r;
        (s + w * w, e + d * d)
    })
}

/// `10 log10(sum w^2 / sum (w - w_hat)^2)` against the `f32` reconstruction.
pub fn reconstruction_snr(original: &WeightTensor, q: &QuantizedLayer) -> Result<Snr> {
    if original.shape() != q.source_shape {
        return Err(Error::domain(format!(
            "shape mismatch: tensor {:?} vs quantized {:?}",
            original.shape(),
            q.source_shape
        )));
    }
    let recon = dequantize(q);
    let (signal, error) = energies(
        original.data().iter().map(|&v| f64::from(v)),
        recon.data().iter().map(|&v| f64::from(v)),
    );
    Ok(Snr::from_energies(signal, error))
}

/// SNR of every depthwise block, in scale-tensor order.
pub fn block_snrs(original: &WeightTensor, q: &QuantizedLayer) -> Result<Vec<Snr>> {
    if original.shape() != q.source_shape {
        return Err(Error::domain("shape mismatch between tensor and quantized layer"));
    }
    let recon = dequantize(q);
    let (w, r) = (original.data(), recon.data());
    Ok(depth_blocks(&q.source_shape, 1, q.block_size)
        .into_iter()
        .map(|span| {
            let (s, e) = energies(
                span.indices().map(|i| f64::from(w[i])),
                span.indices().map(|i| f64::from(r[i])),
            );
            Snr::from_energies(s, e)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_block(values: &[f32]) -> WeightTensor {
        WeightTensor::new([1, values.len(), 1, 1], values.to_vec()).unwrap()
    }

    #[test]
    fn uniform_block_round_trips() {
        for c in [0.1_f32, 0.37, 2.5, 1e-3] {
            let t = single_block(&[c; 32]);
            let q = quantize_weights(&t, 8, 32).unwrap();
            assert!(q.vqk().iter().all(|&v| v == 127));
            assert!((q.kds()[0] - f64::from(c) / 127.0).abs() < 1e-15);
            assert_eq!(dequantize(&q), t);
            assert_eq!(reconstruction_snr(&t, &q).unwrap(), Snr::Exact);
        }
    }

    #[test]
    fn zero_block() {
        let t = single_block(&[0.0; 8]);
        for b in 1..=8 {
            let q = quantize_weights(&t, b, 4).unwrap();
            assert!(q.vqk().iter().all(|&v| v == 0));
            assert_eq!(q.kds(), &[0.0, 0.0]);
            assert!(dequantize(&q).data().iter().all(|&v| v == 0.0));
            assert_eq!(reconstruction_snr(&t, &q).unwrap(), Snr::NoSignal);
        }
    }

    #[test]
    fn hand_worked_block() {
        let t = single_block(&[0.9, -0.3, 0.6, 0.1]);
        let q = quantize_weights(&t, 3, 4).unwrap();
        assert_eq!(q.vqk(), &[3, -2, 2, 0]);
        let w: Vec<f64> = t.data().iter().map(|&v| f64::from(v)).collect();
        let xi_hand = (w[0] * 3.0 + w[1] * -2.0 + w[2] * 2.0) / 17.0;
        assert!((q.kds()[0] - xi_hand).abs() < 1e-15);
        assert!((q.kds()[0] - 4.5 / 17.0).abs() < 1e-7);

        // dense 1-D grid over s for sum (w - s q)^2
        let codes = [3.0, -2.0, 2.0, 0.0];
        let err = |s: f64| -> f64 { w.iter().zip(codes).map(|(x, c)| (x - s * c).powi(2)).sum() };
        let best = (0..=500_000)
            .map(|k| k as f64 * 1e-6)
            .min_by(|a, b| err(*a).total_cmp(&err(*b)))
            .unwrap();
        assert!((best - q.kds()[0]).abs() < 1e-6);

        let recon = dequantize(&q);
        let expected = [0.7941, -0.5294, 0.5294, 0.0];
        for (r, e) in recon.data().iter().zip(expected) {
            assert!((f64::from(*r) - e).abs() < 1e-4);
        }
    }

    #[test]
    fn one_bit_codes_are_minus_one_or_zero() {
        let t = single_block(&[0.5, -0.25, 0.1, -1.0]);
        let q = quantize_weights(&t, 1, 4).unwrap();
        assert_eq!(q.vqk(), &[0, -1, 0, -1]);
        let pos = single_block(&[0.5, 0.25]);
        let q = quantize_weights(&pos, 1, 2).unwrap();
        assert_eq!(q.kds(), &[0.0]);
    }

    #[test]
    fn short_final_block() {
        let data: Vec<f32> = (0..5).map(|i| i as f32 - 2.0).collect();
        let t = WeightTensor::new([1, 5, 1, 1], data).unwrap();
        let q = quantize_weights(&t, 4, 2).unwrap();
        assert_eq!(q.kds_shape(), [1, 3, 1, 1]);
        assert_eq!(q.kds().len(), 3);
    }

    #[test]
    fn invalid_arguments() {
        let t = single_block(&[1.0]);
        assert!(matches!(quantize_weights(&t, 0, 4), Err(Error::InvalidBitWidth(0))));
        assert!(matches!(quantize_weights(&t, 9, 4), Err(Error::InvalidBitWidth(9))));
        assert!(matches!(quantize_weights(&t, 4, 0), Err(Error::InvalidBlockSize(0))));
        let other = single_block(&[1.0, 2.0]);
        let q = quantize_weights(&t, 4, 4).unwrap();
        assert!(reconstruction_snr(&other, &q).is_err());
    }

    #[test]
    fn zero_reconstruction_is_zero_db() {
        assert_eq!(Snr::from_energies(2.0, 2.0), Snr::Db(0.0));
    }
}
