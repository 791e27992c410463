//! Layer inventories and the memory model for a bit configuration.
//!
//! Convolution weights cost `b` bits each plus one 16-bit scale per block,
//! i.e. `param_count * (b + 16 / B) / 8` bytes. Fully connected layers stay
//! in 32-bit floats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvespace::BitConfig;
use crate::error::{Error, Result};

/// Bits used to store each block scale.
pub const KDS_BITS: f64 = 16.0;
pub const BYTES_PER_MB: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub param_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub dataset: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, dataset: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = NetworkSpec {
            name: name.into(),
            dataset: dataset.into(),
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.layers.iter().find(|l| l.param_count == 0) {
            return Err(Error::Network(format!("layer {:?} has no parameters", l.name)));
        }
        if self.conv_count() == 0 {
            return Err(Error::Network(format!(
                "network {:?} has no convolutional layers",
                self.name
            )));
        }
        Ok(())
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| l.kind == LayerKind::Conv)
    }

    pub fn conv_count(&self) -> usize {
        self.conv_layers().count()
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.param_count).sum()
    }

    pub fn fp32_bytes(&self) -> f64 {
        self.total_params() as f64 * 4.0
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: NetworkSpec = toml::from_str(s).map_err(|e| Error::Network(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("network spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::Network(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Network(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerFootprint {
    pub name: String,
    pub kind: LayerKind,
    pub param_count: u64,
    /// `None` for layers kept in 32-bit floats.
    pub bits: Option<u8>,
    pub bytes: f64,
}

pub fn layer_footprints(spec: &NetworkSpec, bits: &BitConfig, block: usize) -> Result<Vec<LayerFootprint>> {
    crate::quant::check_block(block)?;
    let convs = spec.conv_count();
    if bits.len() != convs {
        return Err(Error::LengthMismatch {
            expected: convs,
            actual: bits.len(),
        });
    }
    let per_weight_overhead = KDS_BITS / block as f64;
    let mut widths = bits.bits().iter();
    Ok(spec
        .layers
        .iter()
        .map(|l| {
            let n = l.param_count as f64;
            let (b, bytes) = match l.kind {
                LayerKind::Conv => {
                    let b = *widths.next().expect("length checked");
                    (Some(b), n * (f64::from(b) + per_weight_overhead) / 8.0)
                }
                LayerKind::Fc => (None, n * 4.0),
            };
            LayerFootprint {
                name: l.name.clone(),
                kind: l.kind,
                param_count: l.param_count,
                bits: b,
                bytes,
            }
        })
        .collect())
}

/// Total bytes for `bits` assigned to the convolutional layers in order.
pub fn model_size_bytes(spec: &NetworkSpec, bits: &BitConfig, block: usize) -> Result<f64> {
    Ok(layer_footprints(spec, bits, block)?.iter().map(|l| l.bytes).sum())
}
