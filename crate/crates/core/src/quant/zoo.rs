//! CIFAR-10 variants of common CNNs, as convolution and linear layer shapes.
//!
//! [`bundled`] returns inventories whose convolution counts are rescaled so
//! the whole network occupies the reference FP32 size for that model
//! (58.8 MB for VGG16, 80.1 MB for VGG19, 44.6 MB for ResNet18, 24.32 MB for
//! GoogLeNet). Per-layer proportions come from the architecture itself.
//! VGG11 and ResNet20 have no reference size and use raw counts.

use crate::quant::network::{LayerKind, LayerSpec, NetworkSpec, BYTES_PER_MB};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvShape {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
}

impl ConvShape {
    fn new(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvShape {
            name: name.into(),
            out_channels,
            in_channels,
            kernel,
        }
    }

    pub fn param_count(&self) -> u64 {
        (self.out_channels * self.in_channels * self.kernel * self.kernel) as u64
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub name: String,
    pub dataset: String,
    pub convs: Vec<ConvShape>,
    /// `(name, in_features, out_features)`; parameters include the bias.
    pub linear: Vec<(String, usize, usize)>,
}

impl Architecture {
    fn linear_params(&self) -> u64 {
        self.linear.iter().map(|(_, i, o)| (i * o + o) as u64).sum()
    }

    fn spec_with(&self, conv_counts: impl Iterator<Item = u64>) -> NetworkSpec {
        let mut layers: Vec<LayerSpec> = self
            .convs
            .iter()
            .zip(conv_counts)
            .map(|(c, n)| LayerSpec {
                name: c.name.clone(),
                kind: LayerKind::Conv,
                param_count: n,
            })
            .collect();
        layers.extend(self.linear.iter().map(|(name, i, o)| LayerSpec {
            name: name.clone(),
            kind: LayerKind::Fc,
            param_count: (i * o + o) as u64,
        }));
        NetworkSpec::new(self.name.clone(), self.dataset.clone(), layers).expect("architectures have convolutions")
    }

    /// Inventory with the architecture's exact parameter counts.
    pub fn spec(&self) -> NetworkSpec {
        self.spec_with(self.convs.iter().map(ConvShape::param_count))
    }

    /// Inventory rescaled so `4 * total_params` equals `fp32_mb` megabytes.
    pub fn calibrated(&self, fp32_mb: f64) -> NetworkSpec {
        let conv_total: u64 = self.convs.iter().map(ConvShape::param_count).sum();
        let target_conv = fp32_mb * BYTES_PER_MB / 4.0 - self.linear_params() as f64;
        let scale = target_conv / conv_total as f64;
        self.spec_with(
            self.convs
                .iter()
                .map(|c| ((c.param_count() as f64 * scale).round() as u64).max(1)),
        )
    }
}

const VGG11: &[usize] = &[64, 0, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0];
const VGG13: &[usize] = &[64, 64, 0, 128, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0];
const VGG16: &[usize] = &[
    64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0,
];
const VGG19: &[usize] = &[
    64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512, 0,
];

/// VGG with 3x3 convolutions (`0` marks a pooling stage) and one 512 -> 10 classifier.
pub fn vgg(depth: usize) -> Option<Architecture> {
    let cfg = match depth {
        11 => VGG11,
        13 => VGG13,
        16 => VGG16,
        19 => VGG19,
        _ => return None,
    };
    let mut convs = Vec::new();
    let mut channels = 3;
    for &width in cfg.iter().filter(|&&w| w != 0) {
        convs.push(ConvShape::new(format!("conv{}", convs.len() + 1), channels, width, 3));
        channels = width;
    }
    Some(Architecture {
        name: format!("vgg{depth}"),
        dataset: "cifar10".into(),
        convs,
        linear: vec![("fc".into(), 512, 10)],
    })
}

/// ResNet18 with basic blocks; 1x1 projection shortcuts follow each block's convolutions.
pub fn resnet18() -> Architecture {
    let mut convs = vec![ConvShape::new("conv1", 3, 64, 3)];
    let mut in_planes = 64;
    for (stage, (planes, stride)) in [(64, 1), (128, 2), (256, 2), (512, 2)].into_iter().enumerate() {
        for block in 0..2 {
            let stride = if block == 0 { stride } else { 1 };
            let prefix = format!("layer{}.{block}", stage + 1);
            convs.push(ConvShape::new(format!("{prefix}.conv1"), in_planes, planes, 3));
            convs.push(ConvShape::new(format!("{prefix}.conv2"), planes, planes, 3));
            if stride != 1 || in_planes != planes {
                convs.push(ConvShape::new(format!("{prefix}.shortcut"), in_planes, planes, 1));
            }
            in_planes = planes;
        }
    }
    Architecture {
        name: "resnet18".into(),
        dataset: "cifar10".into(),
        convs,
        linear: vec![("fc".into(), 512, 10)],
    }
}

/// ResNet20 (16/32/64 channels, parameter-free shortcuts).
pub fn resnet20() -> Architecture {
    let mut convs = vec![ConvShape::new("conv1", 3, 16, 3)];
    let mut in_planes = 16;
    for (stage, planes) in [16, 32, 64].into_iter().enumerate() {
        for block in 0..3 {
            let prefix = format!("layer{}.{block}", stage + 1);
            convs.push(ConvShape::new(format!("{prefix}.conv1"), in_planes, planes, 3));
            convs.push(ConvShape::new(format!("{prefix}.conv2"), planes, planes, 3));
            in_planes = planes;
        }
    }
    Architecture {
        name: "resnet20".into(),
        dataset: "cifar10".into(),
        convs,
        linear: vec![("fc".into(), 64, 10)],
    }
}

// (name, in, 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5 as two 3x3, pool projection)
type Inception = (&'static str, usize, usize, usize, usize, usize, usize, usize);

const INCEPTIONS: &[Inception] = &[
    ("a3", 192, 64, 96, 128, 16, 32, 32),
    ("b3", 256, 128, 128, 192, 32, 96, 64),
    ("a4", 480, 192, 96, 208, 16, 48, 64),
    ("b4", 512, 160, 112, 224, 24, 64, 64),
    ("c4", 512, 128, 128, 256, 24, 64, 64),
    ("d4", 512, 112, 144, 288, 32, 64, 64),
    ("e4", 528, 256, 160, 320, 32, 128, 128),
    ("a5", 832, 256, 160, 320, 32, 128, 128),
    ("b5", 832, 384, 192, 384, 48, 128, 128),
];

/// GoogLeNet for 32x32 inputs: a 3x3 stem and nine inception modules.
pub fn googlenet() -> Architecture {
    let mut convs = vec![ConvShape::new("pre", 3, 192, 3)];
    for &(name, inp, n1, r3, n3, r5, n5, pool) in INCEPTIONS {
        convs.push(ConvShape::new(format!("{name}.b1"), inp, n1, 1));
        convs.push(ConvShape::new(format!("{name}.b2.reduce"), inp, r3, 1));
        convs.push(ConvShape::new(format!("{name}.b2.conv"), r3, n3, 3));
        convs.push(ConvShape::new(format!("{name}.b3.reduce"), inp, r5, 1));
        convs.push(ConvShape::new(format!("{name}.b3.conv1"), r5, n5, 3));
        convs.push(ConvShape::new(format!("{name}.b3.conv2"), n5, n5, 3));
        convs.push(ConvShape::new(format!("{name}.b4.proj"), inp, pool, 1));
    }
    Architecture {
        name: "googlenet".into(),
        dataset: "cifar10".into(),
        convs,
        linear: vec![("fc".into(), 1024, 10)],
    }
}

pub const BUNDLED: &[&str] = &["vgg11", "vgg16", "vgg19", "resnet18", "resnet20", "googlenet"];

pub fn architecture(name: &str) -> Option<Architecture> {
    match name {
        "vgg11" => vgg(11),
        "vgg13" => vgg(13),
        "vgg16" => vgg(16),
        "vgg19" => vgg(19),
        "resnet18" => Some(resnet18()),
        "resnet20" => Some(resnet20()),
        "googlenet" => Some(googlenet()),
        _ => None,
    }
}

/// Reference FP32 model size in MB used for calibration.
pub fn reference_fp32_mb(name: &str) -> Option<f64> {
    match name {
        "vgg16" => Some(58.8),
        "vgg19" => Some(80.1),
        "resnet18" => Some(44.6),
        "googlenet" => Some(24.32),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<NetworkSpec> {
    let arch = architecture(name)?;
    Some(match reference_fp32_mb(name) {
        Some(mb) => arch.calibrated(mb),
        None => arch.spec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_counts() {
        assert_eq!(vgg(11).unwrap().convs.len(), 8);
        assert_eq!(vgg(16).unwrap().convs.len(), 13);
        assert_eq!(vgg(19).unwrap().convs.len(), 16);
        assert_eq!(resnet18().convs.len(), 20);
        assert_eq!(resnet20().convs.len(), 19);
        assert_eq!(googlenet().convs.len(), 64);
        assert!(vgg(12).is_none());
    }

    #[test]
    fn exact_conv_totals() {
        let total = |a: &Architecture| a.convs.iter().map(ConvShape::param_count).sum::<u64>();
        assert_eq!(total(&vgg(16).unwrap()), 14_710_464);
        assert_eq!(total(&vgg(19).unwrap()), 20_018_880);
        assert_eq!(total(&resnet18()), 11_159_232);
        assert_eq!(total(&googlenet()), 6_132_288);
    }

    #[test]
    fn calibration_hits_reference_size() {
        for name in ["vgg16", "vgg19", "resnet18", "googlenet"] {
            let spec = bundled(name).unwrap();
            let mb = spec.fp32_bytes() / BYTES_PER_MB;
            let reference = reference_fp32_mb(name).unwrap();
            assert!((mb - reference).abs() < 1e-3, "{name}: {mb}");
        }
    }
}
