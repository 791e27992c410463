//! Block floating point for activations.
//!
//! Each depthwise block shares the exponent `e = floor(log2 max|x|)` of its
//! largest element. Elements keep a `b`-bit two's-complement mantissa `m`
//! with value `m * 2^(e - b + 2)`, so the largest element maps to a mantissa
//! magnitude in `[2^(b-2), 2^(b-1))` before clipping.

use crate::error::Result;
use crate::quant::tensor::{depth_blocks, Tensor};
use crate::quant::{check_bits, check_block, int_range};

/// Shared exponent recorded for an all-zero block.
pub const EXPONENT_FLOOR: i32 = -127;

#[derive(Debug, Clone, PartialEq)]
pub struct BfpTensor {
    shape: Vec<usize>,
    axis: usize,
    bits: u8,
    block_size: usize,
    shared_exponents: Vec<i32>,
    mantissas: Vec<i8>,
}

impl BfpTensor {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn shared_exponents(&self) -> &[i32] {
        &self.shared_exponents
    }

    pub fn mantissas(&self) -> &[i8] {
        &self.mantissas
    }

    pub fn dequantize(&self) -> Tensor {
        let mut out = vec![0.0_f32; self.mantissas.len()];
        for (span, &e) in depth_blocks(&self.shape, self.axis, self.block_size)
            .into_iter()
            .zip(&self.shared_exponents)
        {
            let step = mantissa_step(e, self.bits);
            for i in span.indices() {
                out[i] = (f64::from(self.mantissas[i]) * step) as f32;
            }
        }
        Tensor::new(self.shape.clone(), out).expect("shape preserved")
    }
}

/// Value of one mantissa unit under shared exponent `e`.
pub fn mantissa_step(exponent: i32, bits: u8) -> f64 {
    2f64.powi(exponent - i32::from(bits) + 2)
}

/// Shared exponent and mantissas for a single block.
pub fn quantize_block_bfp(values: &[f64], bits: u8) -> Result<(i32, Vec<i8>)> {
    check_bits(bits)?;
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 || !max_abs.is_finite() {
        return Ok((EXPONENT_FLOOR, vec![0; values.len()]));
    }
    let exponent = (max_abs.log2().floor() as i32).max(EXPONENT_FLOOR);
    let step = mantissa_step(exponent, bits);
    let (lo, hi) = int_range(bits);
    let mantissas = values
        .iter()
        .map(|&v| ((v / step).round() as i64).clamp(i64::from(lo), i64::from(hi)) as i8)
        .collect();
    Ok((exponent, mantissas))
}

/// Quantizes an activation tensor blockwise along its channel axis.
///
/// The channel axis is 1 for rank-4 `(N, C, H, W)` input and 0 otherwise
/// (`(C, H, W)`, `(C, L)` or a flat vector).
pub fn quantize_activation_bfp(t: &Tensor, bits: u8, block: usize) -> Result<BfpTensor> {
    check_bits(bits)?;
    check_block(block)?;
    let axis = if t.shape().len() == 4 { 1 } else { 0 };
    let data = t.data();
    let spans = depth_blocks(t.shape(), axis, block);
    let mut mantissas = vec![0_i8; data.len()];
    let mut exps = Vec::with_capacity(spans.len());
    let mut buf = Vec::with_capacity(block);
    for span in spans {
        buf.clear();
        buf.extend(span.indices().map(|i| f64::from(data[i])));
        let (e, m) = quantize_block_bfp(&buf, bits)?;
        for (i, v) in span.indices().zip(m) {
            mantissas[i] = v;
        }
        exps.push(e);
    }
    Ok(BfpTensor {
        shape: t.shape().to_vec(),
        axis,
        bits,
        block_size: block,
        shared_exponents: exps,
        mantissas,
    })
}
