//! Maps curve weights to per-layer bit widths for both bases.
//!
//!     cargo run --example curve_bits

use curvequant::curvespace::{bits_for_layers, bits_for_layers_on};
use curvequant::{CurveParams, LayerGrid};

fn show(label: &str, params: &CurveParams, layers: usize) -> curvequant::Result<()> {
    let bits = bits_for_layers(params, layers)?;
    let digits: String = bits.bits().iter().map(|b| char::from(b'0' + b)).collect();
    println!("{label:<28} {digits}  sum {}", bits.bit_sum());
    Ok(())
}

fn main() -> curvequant::Result<()> {
    let layers = 13;
    show("bezier [0.9, 0.1]", &CurveParams::bezier(vec![0.9, 0.1])?, layers)?;
    show("bezier [0.1, 0.9]", &CurveParams::bezier(vec![0.1, 0.9])?, layers)?;
    show(
        "bezier [0.2, 0.9, 0.2]",
        &CurveParams::bezier(vec![0.2, 0.9, 0.2])?,
        layers,
    )?;
    show("bezier [0.375]", &CurveParams::bezier(vec![0.375])?, layers)?;
    show(
        "chebyshev [0.6, 0.4, 0.1]",
        &CurveParams::chebyshev(vec![0.6, 0.4, 0.1])?,
        layers,
    )?;

    let p = CurveParams::bezier(vec![0.9, 0.1])?;
    let strict = bits_for_layers_on(&p, layers, LayerGrid::Strict)?;
    println!("strict grid, bezier [0.9, 0.1]: {:?}", strict.bits());

    println!("\ncurve value and bit width along the unit interval:");
    let p = CurveParams::bezier(vec![0.0, 1.0, 0.1])?;
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let v = p.eval_unit(t)?;
        println!("  t={t:.1}  p={v:+.3}  bits={}", curvequant::curvespace::constrain(v));
    }
    Ok(())
}
