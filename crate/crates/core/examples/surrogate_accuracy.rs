//! Pseudo-accuracy from the reconstruction SNR of real-shaped weights.
//!
//!     cargo run --release --example surrogate_accuracy

use curvequant::objective::{Objective, ObjectiveRequest, Surrogate, SurrogateParams};
use curvequant::quant::{zoo, WeightTensor};
use curvequant::{BitConfig, CurveParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> curvequant::Result<()> {
    let arch = zoo::architecture("vgg11").expect("bundled");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layers: Vec<WeightTensor> = arch
        .convs
        .iter()
        .map(|c| {
            let shape = c.weight_shape();
            let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("valid sd");
            let n = shape.iter().product();
            WeightTensor::new(shape, (0..n).map(|_| normal.sample(&mut rng) as f32).collect())
        })
        .collect::<curvequant::Result<_>>()?;
    let mut surrogate = Surrogate::new(&layers, SurrogateParams::default(), 4)?;

    println!("layer  snr@2  snr@4  snr@8 (dB)");
    for l in 0..surrogate.layer_count() {
        println!(
            "{l:>5}  {:>5.1}  {:>5.1}  {:>5.1}",
            surrogate.layer_snr(l, 2),
            surrogate.layer_snr(l, 4),
            surrogate.layer_snr(l, 8)
        );
    }
    for bits in [vec![2; 8], vec![4; 8], vec![8, 7, 6, 5, 4, 3, 2, 2], vec![8; 8]] {
        let request = ObjectiveRequest {
            bits: BitConfig::new(bits.clone())?,
            weights: CurveParams::bezier(vec![0.5])?,
            task: 3,
            epochs: 15,
            seed: 0,
        };
        let r = surrogate.evaluate(&request);
        println!("{bits:?} -> {:.4}", r.accuracy.unwrap_or(f64::NAN));
    }
    Ok(())
}
