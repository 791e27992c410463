//! Model sizes of the bundled networks under uniform and curve-shaped
//! bit configurations.
//!
//!     cargo run --example memory_table

use curvequant::curvespace::bits_for_layers;
use curvequant::quant::network::BYTES_PER_MB;
use curvequant::quant::{model_size_bytes, zoo};
use curvequant::{BitConfig, CurveParams};

fn main() -> curvequant::Result<()> {
    println!(
        "{:<10} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "network", "fp32", "8-bit", "4-bit", "2-bit", "8->2 curve"
    );
    let decreasing = CurveParams::bezier(vec![1.0, 0.125])?;
    for name in zoo::BUNDLED {
        let spec = zoo::bundled(name).expect("bundled name");
        let n = spec.conv_count();
        let mb = |bits: &BitConfig| model_size_bytes(&spec, bits, 32).map(|b| b / BYTES_PER_MB);
        println!(
            "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>10.2}",
            name,
            spec.fp32_bytes() / BYTES_PER_MB,
            mb(&BitConfig::uniform(8, n)?)?,
            mb(&BitConfig::uniform(4, n)?)?,
            mb(&BitConfig::uniform(2, n)?)?,
            mb(&bits_for_layers(&decreasing, n)?)?,
        );
    }
    Ok(())
}
