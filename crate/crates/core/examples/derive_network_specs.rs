//! Writes the bundled layer inventories to `networks/<name>.toml`.
//!
//! Convolution counts are rescaled from each architecture so the FP32
//! model occupies its reference size; see `curvequant::quant::zoo`.
//!
//!     cargo run --example derive_network_specs [-- <out-dir>]

use std::path::PathBuf;

use curvequant::quant::network::BYTES_PER_MB;
use curvequant::quant::zoo;

fn main() -> curvequant::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("networks"));
    std::fs::create_dir_all(&out)?;
    for name in zoo::BUNDLED {
        let spec = zoo::bundled(name).expect("bundled name");
        let path = out.join(format!("{name}.toml"));
        std::fs::write(&path, spec.to_toml_string())?;
        println!(
            "{:<10} {:>3} conv {:>2} fc  {:>7.2} MB fp32  -> {}",
            name,
            spec.conv_count(),
            spec.layers.len() - spec.conv_count(),
            spec.fp32_bytes() / BYTES_PER_MB,
            path.display()
        );
    }
    Ok(())
}
