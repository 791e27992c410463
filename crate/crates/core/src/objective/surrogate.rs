use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{fidelity_gap, request_seed, Objective, ObjectiveRequest, ObjectiveResult, Status};
use crate::curvespace::MAX_BITS;
use crate::error::{Error, Result};
use crate::quant::{quantize_weights, reconstruction_snr, Snr, WeightTensor, DEFAULT_BLOCK_SIZE};

/// Pseudo-accuracy from weight quantization quality.
///
/// Each layer's SNR is clipped to `[0, snr_cap]` dB; exact and all-zero
/// layers count as `snr_cap`, and a layer's SNR at `b` bits is the best
/// seen at any width up to `b`. The mean clipped SNR `s` maps to
/// `floor + (ceiling - floor) * (1 - exp(-s / tau)) / (1 - exp(-snr_cap / tau))`.
/// Lower fidelities then subtract `delta` per step below the target and add
/// noise of standard deviation `noise * g` as in the synthetic objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    pub floor: f64,
    pub ceiling: f64,
    pub tau: f64,
    pub snr_cap: f64,
    pub delta: f64,
    pub noise: f64,
    pub block_size: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            floor: 0.1,
            ceiling: 0.93,
            tau: 12.0,
            snr_cap: 60.0,
            delta: 0.02,
            noise: 0.005,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor.is_finite() && self.ceiling.is_finite() && self.floor <= self.ceiling) {
            return Err(Error::config("surrogate floor must not exceed ceiling"));
        }
        if !(0.0..=1.0).contains(&self.floor) || !(0.0..=1.0).contains(&self.ceiling) {
            return Err(Error::config("surrogate floor and ceiling must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.snr_cap > 0.0) || !self.tau.is_finite() || !self.snr_cap.is_finite() {
            return Err(Error::config("surrogate tau and snr_cap must be positive"));
        }
        if !(self.delta.is_finite() && self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config(
                "surrogate delta and noise must be finite, noise nonnegative",
            ));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidBlockSize(0));
        }
        Ok(())
    }

    /// Saturating map from mean clipped SNR (dB) to accuracy.
    pub fn accuracy_for_snr(&self, mean_snr: f64) -> f64 {
        let s = mean_snr.clamp(0.0, self.snr_cap);
        let frac = (1.0 - (-s / self.tau).exp()) / (1.0 - (-self.snr_cap / self.tau).exp());
        self.floor + (self.ceiling - self.floor) * frac
    }

    fn clip(&self, snr: Snr) -> f64 {
        match snr {
            Snr::Db(db) => db.clamp(0.0, self.snr_cap),
            Snr::Exact | Snr::NoSignal => self.snr_cap,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    params: SurrogateParams,
    task_count: usize,
    /// `snr[layer][b - 1]`, clipped.
    snr: Vec<[f64; MAX_BITS as usize]>,
}

impl Surrogate {
    /// Quantizes every layer at every bit width up front.
    pub fn new(layers: &[WeightTensor], params: SurrogateParams, task_count: usize) -> Result<Self> {
        params.validate()?;
        if layers.is_empty() {
            return Err(Error::config("surrogate snapshot has no layers"));
        }
        if task_count == 0 {
            return Err(Error::config("task count must be positive"));
        }
        let mut snr = Vec::with_capacity(layers.len());
        for layer in layers {
            let mut row = [0.0; MAX_BITS as usize];
            for (i, slot) in row.iter_mut().enumerate() {
                let q = quantize_weights(layer, i as u8 + 1, params.block_size)?;
                *slot = params.clip(reconstruction_snr(layer, &q)?);
            }
            // tiny layers can lose SNR when a bit is added; keep the envelope
            for i in 1..row.len() {
                row[i] = row[i].max(row[i - 1]);
            }
            snr.push(row);
        }
        Ok(Surrogate {
            params,
            task_count,
            snr,
        })
    }

    /// Loads one QTNS weight file per layer, in the given order.
    pub fn from_files<P: AsRef<Path>>(paths: &[P], params: SurrogateParams, task_count: usize) -> Result<Self> {
        let layers = paths
            .iter()
            .map(|p| {
                WeightTensor::read_qtns(p.as_ref()).map_err(|e| match e {
                    Error::Io(io) => Error::config(format!("{}: {io}", p.as_ref().display())),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&layers, params, task_count)
    }

    pub fn layer_count(&self) -> usize {
        self.snr.len()
    }

    /// Clipped SNR (dB) of `layer` at `bits`.
    pub fn layer_snr(&self, layer: usize, bits: u8) -> f64 {
        self.snr[layer][usize::from(bits) - 1]
    }

    /// Noise-free target-task pseudo-accuracy.
    pub fn clean_accuracy(&self, bits: &[u8]) -> f64 {
        let mean = bits.iter().enumerate().map(|(i, &b)| self.layer_snr(i, b)).sum::<f64>() / bits.len() as f64;
        self.params.accuracy_for_snr(mean)
    }
}

impl Objective for Surrogate {
    fn evaluate(&mut self, request: &ObjectiveRequest) -> ObjectiveResult {
        let bits = request.bits.bits();
        if bits.len() != self.snr.len() {
            return ObjectiveResult::failed(
                Status::Failed,
                format!("{} bit widths for a {}-layer snapshot", bits.len(), self.snr.len()),
            );
        }
        let g = fidelity_gap(request.task, self.task_count);
        let steps = (self.task_count - 1 - request.task.min(self.task_count - 1)) as f64;
        let mut y = self.clean_accuracy(bits) - self.params.delta * steps;
        let sd = self.params.noise * g;
        if sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(request_seed(request));
            let z: f64 = StandardNormal.sample(&mut rng);
            y += sd * z;
        }
        ObjectiveResult::ok(y.clamp(0.0, 1.0), f64::from(request.epochs.max(1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvespace::{BitConfig, CurveParams};
    use rand::Rng;

    fn random_layer(seed: u64, shape: [usize; 4]) -> WeightTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        WeightTensor::new(shape, (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
    }

    fn request(bits: Vec<u8>, task: usize) -> ObjectiveRequest {
        ObjectiveRequest {
            bits: BitConfig::new(bits).unwrap(),
            weights: CurveParams::bezier(vec![0.5]).unwrap(),
            task,
            epochs: 15,
            seed: 3,
        }
    }

    #[test]
    fn more_bits_more_accuracy() {
        let layers = [random_layer(1, [8, 64, 3, 3]), random_layer(2, [16, 32, 3, 3])];
        let mut s = Surrogate::new(&layers, SurrogateParams::default(), 2).unwrap();
        let hi = s.evaluate(&request(vec![8, 8], 1)).accuracy.unwrap();
        let lo = s.evaluate(&request(vec![2, 2], 1)).accuracy.unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn uniform_tensor_hits_ceiling() {
        let layer = WeightTensor::new([2, 32, 1, 1], vec![0.25; 64]).unwrap();
        let params = SurrogateParams::default();
        let mut s = Surrogate::new(&[layer], params.clone(), 1).unwrap();
        let r = s.evaluate(&request(vec![3], 0));
        assert!((r.accuracy.unwrap() - params.ceiling).abs() < 1e-12);
    }

    #[test]
    fn repeatable_and_length_checked() {
        let layers = [random_layer(4, [4, 32, 3, 3])];
        let mut s = Surrogate::new(&layers, SurrogateParams::default(), 3).unwrap();
        assert_eq!(s.evaluate(&request(vec![4], 0)), s.evaluate(&request(vec![4], 0)));
        assert_eq!(s.evaluate(&request(vec![4, 4], 0)).status, Status::Failed);
    }
}
