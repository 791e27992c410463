//! Blockwise quantization of weights and activations, tensor files, and
//! the per-configuration memory model.

pub mod bfp;
pub mod dsconv;
pub mod network;
pub mod tensor;
pub mod zoo;

pub use bfp::{quantize_activation_bfp, BfpTensor};
pub use dsconv::{dequantize, quantize_weights, reconstruction_snr, QuantizedLayer, Snr};
pub use network::{model_size_bytes, LayerKind, LayerSpec, NetworkSpec};
pub use tensor::{Tensor, WeightTensor};

/// Default depthwise block size.
pub const DEFAULT_BLOCK_SIZE: usize = 32;

pub(crate) fn check_bits(bits: u8) -> crate::Result<()> {
    if (1..=8).contains(&bits) {
        Ok(())
    } else {
        Err(crate::Error::InvalidBitWidth(u32::from(bits)))
    }
}

pub(crate) fn check_block(block: usize) -> crate::Result<()> {
    if block >= 1 {
        Ok(())
    } else {
        Err(crate::Error::InvalidBlockSize(block))
    }
}

/// Signed range of a `bits`-wide two's-complement integer.
pub(crate) fn int_range(bits: u8) -> (i32, i32) {
    let half = 1_i32 << (bits - 1);
    (-half, half - 1)
}
