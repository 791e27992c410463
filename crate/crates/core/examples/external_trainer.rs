//! Drives an external training command through the JSON stdin/stdout
//! protocol. The stand-in trainer is a shell one-liner.
//!
//!     cargo run --example external_trainer

use std::time::Duration;

use curvequant::objective::{External, Objective, ObjectiveRequest};
use curvequant::{BitConfig, CurveParams};

fn main() -> curvequant::Result<()> {
    let script = r#"read req; echo "request: $req" >&2; echo '{"accuracy": 0.71, "cost_seconds": 0.02}'"#;
    let mut trainer = External::new(vec!["sh".into(), "-c".into(), script.into()], Duration::from_secs(5))?;
    let request = ObjectiveRequest {
        bits: BitConfig::new(vec![6, 5, 5, 4, 3])?,
        weights: CurveParams::bezier(vec![0.8, 0.3])?,
        task: 1,
        epochs: 2,
        seed: 11,
    };
    println!("{:?}", trainer.evaluate(&request));

    let mut slow = External::new(vec!["sleep".into(), "5".into()], Duration::from_millis(200))?;
    println!("{:?}", slow.evaluate(&request));

    let mut broken = External::new(vec!["sh".into(), "-c".into(), "exit 1".into()], Duration::from_secs(5))?;
    println!("{:?}", broken.evaluate(&request));
    Ok(())
}
