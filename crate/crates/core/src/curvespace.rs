//! Curve bases that map a few weights to a per-layer bit configuration.
//!
//! A [`CurveParams`] describes a curve on `[0, 1]` (Bezier in the Bernstein
//! basis, or a shifted Chebyshev series). Sampling the curve on a layer grid
//! and passing each value through [`constrain`] gives one bit width per
//! layer, so the search space is the weight cube `[0, 1]^d` instead of
//! `{1..8}^n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BITS: u8 = 1;
pub const MAX_BITS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveBasis {
    Bezier,
    Chebyshev,
}

impl fmt::Display for CurveBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveBasis::Bezier => f.write_str("bezier"),
            CurveBasis::Chebyshev => f.write_str("chebyshev"),
        }
    }
}

impl CurveBasis {
    /// Number of weights for a curve of the given degree.
    ///
    /// Bezier curves of degree `k` carry `k + 1` control weights. Chebyshev
    /// series are specified by their order `d` directly (terms `T_0..T_{d-1}`).
    pub fn weight_count(self, degree: usize) -> usize {
        match self {
            CurveBasis::Bezier => degree + 1,
            CurveBasis::Chebyshev => degree,
        }
    }
}

/// Where the layer grid samples the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerGrid {
    /// `t_i = (i - 1) / (n - 1)`: first and last layers sit on the curve endpoints.
    #[default]
    Endpoints,
    /// `t_i = i / n`, never sampling `t = 0`.
    Strict,
}

impl LayerGrid {
    pub fn point(self, i: usize, n: usize) -> f64 {
        debug_assert!(i < n);
        match self {
            LayerGrid::Endpoints if n == 1 => 0.0,
            LayerGrid::Endpoints => i as f64 / (n - 1) as f64,
            LayerGrid::Strict => (i + 1) as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    basis: CurveBasis,
    weights: Vec<f64>,
}

impl CurveParams {
    pub fn new(basis: CurveBasis, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("curve needs at least one weight"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::domain(format!("curve weight {w} outside [0, 1]")));
        }
        Ok(CurveParams { basis, weights })
    }

    pub fn bezier(weights: Vec<f64>) -> Result<Self> {
        Self::new(CurveBasis::Bezier, weights)
    }

    pub fn chebyshev(weights: Vec<f64>) -> Result<Self> {
        Self::new(CurveBasis::Chebyshev, weights)
    }

    pub fn basis(&self) -> CurveBasis {
        self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Curve value at unit-grid position `t` in `[0, 1]`.
    pub fn eval_unit(&self, t: f64) -> Result<f64> {
        match self.basis {
            CurveBasis::Bezier => eval_bezier(self, t),
            CurveBasis::Chebyshev => eval_chebyshev(self, 2.0 * t - 1.0),
        }
    }
}

/// Bernstein basis of the given degree at `x`.
pub fn bernstein_features(degree: usize, x: f64) -> Vec<f64> {
    let mut coeff = 1.0_f64;
    (0..=degree)
        .map(|k| {
            if k > 0 {
                coeff = coeff * (degree - k + 1) as f64 / k as f64;
            }
            coeff * x.powi(k as i32) * (1.0 - x).powi((degree - k) as i32)
        })
        .collect()
}

/// `[T_0(x), .., T_{order-1}(x)]` by the three-term recurrence.
pub fn chebyshev_features(order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order);
    for k in 0..order {
        let next = match k {
            0 => 1.0,
            1 => x,
            _ => 2.0 * x * out[k - 1] - out[k - 2],
        };
        out.push(next);
    }
    out
}

fn check_basis(params: &CurveParams, expected: CurveBasis) -> Result<()> {
    if params.basis != expected {
        return Err(Error::domain(format!(
            "expected a {expected} curve, got {}",
            params.basis
        )));
    }
    Ok(())
}

/// `w . phi(x)` with `phi` the Bernstein basis of degree `len(w) - 1`.
pub fn eval_bezier(params: &CurveParams, x: f64) -> Result<f64> {
    check_basis(params, CurveBasis::Bezier)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("bezier argument {x} outside [0, 1]")));
    }
    let phi = bernstein_features(params.dim() - 1, x);
    Ok(dot(&params.weights, &phi))
}

/// `((w - 0.5) . phi_d(x) + 1) / 2` over Chebyshev polynomials of the first kind.
///
/// The result is not confined to `[0, 1]`; [`constrain`] clamps it.
pub fn eval_chebyshev(params: &CurveParams, x: f64) -> Result<f64> {
    check_basis(params, CurveBasis::Chebyshev)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("chebyshev argument {x} outside [-1, 1]")));
    }
    let phi = chebyshev_features(params.dim(), x);
    let s: f64 = params.weights.iter().zip(&phi).map(|(w, t)| (w - 0.5) * t).sum();
    Ok((s + 1.0) / 2.0)
}

/// Clamp-and-round a curve value to a bit width: `round(clamp(8p + 1, 1, 8))`.
///
/// Ties round away from zero. A NaN input maps to the lowest width.
pub fn constrain(p: f64) -> u8 {
    let v = (8.0 * p + 1.0).clamp(f64::from(MIN_BITS), f64::from(MAX_BITS));
    if v.is_nan() {
        return MIN_BITS;
    }
    v.round() as u8
}

pub fn bits_for_layers(params: &CurveParams, n: usize) -> Result<BitConfig> {
    bits_for_layers_on(params, n, LayerGrid::Endpoints)
}

pub fn bits_for_layers_on(params: &CurveParams, n: usize, grid: LayerGrid) -> Result<BitConfig> {
    if n == 0 {
        return Err(Error::domain("layer count must be at least 1"));
    }
    let bits = (0..n)
        .map(|i| params.eval_unit(grid.point(i, n)).map(constrain))
        .collect::<Result<Vec<_>>>()?;
    BitConfig::new(bits)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-layer bit widths, each in `1..=8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BitConfig(Vec<u8>);

impl BitConfig {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::domain("bit configuration needs at least one layer"));
        }
        if let Some(&b) = bits.iter().find(|b| !(MIN_BITS..=MAX_BITS).contains(*b)) {
            return Err(Error::InvalidBitWidth(u32::from(b)));
        }
        Ok(BitConfig(bits))
    }

    pub fn uniform(bits: u8, n: usize) -> Result<Self> {
        Self::new(vec![bits; n])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit_sum(&self) -> u32 {
        self.0.iter().map(|&b| u32::from(b)).sum()
    }
}

impl TryFrom<Vec<u8>> for BitConfig {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        BitConfig::new(bits)
    }
}

impl From<BitConfig> for Vec<u8> {
    fn from(c: BitConfig) -> Self {
        c.0
    }
}

impl fmt::Display for BitConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Accepts `"4444"`, `"4,4,4,4"` and run-length `"4x21 3x27 2x16"`.
impl FromStr for BitConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |tok: &str| Error::domain(format!("bad bit-width token {tok:?}"));
        let parse_width = |tok: &str| tok.trim().parse::<u8>().map_err(|_| bad(tok));
        let mut bits = Vec::new();
        if s.contains('x') || s.contains('×') {
            for tok in s.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let (width, count) = tok.split_once(['x', '×']).ok_or_else(|| bad(tok))?;
                let count: usize = count.parse().map_err(|_| bad(tok))?;
                bits.extend(std::iter::repeat_n(parse_width(width)?, count));
            }
        } else if s.contains(',') || s.contains(char::is_whitespace) {
            for tok in s.split(|c: char| c.is_whitespace() || c == ',') {
                if !tok.is_empty() {
                    bits.push(parse_width(tok)?);
                }
            }
        } else {
            for ch in s.chars() {
                let d = ch.to_digit(10).ok_or_else(|| bad(&ch.to_string()))?;
                bits.push(d as u8);
            }
        }
        BitConfig::new(bits)
    }
}
