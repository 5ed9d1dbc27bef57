use serde::{Deserialize, Serialize};

/// Rounds to one decimal, halves away from zero.
pub fn round1(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let scaled = (x.abs() * 10.0 + 0.5 + 1e-9).floor() / 10.0;
    scaled.copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub n: u32,
}

pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanSd {
        mean,
        sd: var.sqrt(),
        n: values.len() as u32,
    })
}
