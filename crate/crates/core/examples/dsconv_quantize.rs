//! Quantizes a random convolution weight at every bit width, writes the
//! tensor as QTNS and reads it back.
//!
//!     cargo run --example dsconv_quantize

use curvequant::quant::dsconv::block_snrs;
use curvequant::quant::{
    dequantize, quantize_activation_bfp, quantize_weights, reconstruction_snr, Tensor, WeightTensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> curvequant::Result<()> {
    let shape = [16, 64, 3, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 0.05).expect("valid sd");
    let data: Vec<f32> = (0..shape.iter().product::<usize>())
        .map(|_| normal.sample(&mut rng))
        .collect();

    let dir = std::env::temp_dir().join("curvequant-dsconv-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("conv.qtns");
    Tensor::new(shape.to_vec(), data)?.write_qtns(&path)?;
    let w = WeightTensor::read_qtns(&path)?;
    println!("wrote and reloaded {} ({:?})", path.display(), w.shape());

    println!("bits  snr(dB)  worst block(dB)");
    for bits in 1..=8 {
        let q = quantize_weights(&w, bits, 32)?;
        let snr = reconstruction_snr(&w, &q)?;
        let worst = block_snrs(&w, &q)?
            .into_iter()
            .filter_map(|s| s.db())
            .fold(f64::INFINITY, f64::min);
        println!("{bits:>4}  {:>7.2}  {worst:>7.2}", snr.db().unwrap_or(f64::INFINITY));
    }

    let q = quantize_weights(&w, 4, 32)?;
    println!("kds shape {:?}, first scales {:?}", q.kds_shape(), &q.kds()[..3]);
    let back = dequantize(&q);
    println!("first weights  {:?}", &w.data()[..4]);
    println!("reconstructed  {:?}", &back.data()[..4]);

    let act = Tensor::new(vec![1, 64, 2, 2], (0..256).map(|i| (i as f32 * 0.37).sin()).collect())?;
    let bfp = quantize_activation_bfp(&act, 6, 32)?;
    println!(
        "bfp activations: {} shared exponents, first {:?}",
        bfp.shared_exponents().len(),
        &bfp.shared_exponents()[..2]
    );
    Ok(())
}
