//! Embedding metrics: CSD style similarity, CLIP content score, the
//! aesthetic MLP head, and the content-preservation cut-off (CPC) scores.
//!
//! CPC at a threshold keeps the CLIP content score only when the result's
//! style similarity reaches the threshold, and zeroes it otherwise. The range
//! variant averages CPC over an evenly spaced threshold grid.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{EmbeddingKind, EmbeddingVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub clamp_negative: bool,
    pub clip_scale: f64,
    pub cpc_threshold: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub range_step: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            clamp_negative: true,
            clip_scale: 1.0,
            cpc_threshold: 0.5,
            range_lo: 0.3,
            range_hi: 0.9,
            range_step: 0.1,
        }
    }
}

const GRID_TOL: f64 = 1e-9;

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.clip_scale,
            self.cpc_threshold,
            self.range_lo,
            self.range_hi,
            self.range_step,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("metric parameters must be finite".into()));
        }
        self.thresholds().map(|_| ())
    }

    /// The CPC range grid `lo, lo + step, ..., hi`.
    ///
    /// Grid points are snapped to 12 decimals so `0.3 + 3 * 0.1` is the same
    /// double as the literal `0.6`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        if self.range_step.is_nan() || self.range_step <= 0.0 {
            return Err(Error::InvalidConfig("range_step must be > 0".into()));
        }
        if self.range_lo > self.range_hi {
            return Err(Error::InvalidConfig(format!(
                "range_lo {} exceeds range_hi {}",
                self.range_lo, self.range_hi
            )));
        }
        let steps = ((self.range_hi - self.range_lo) / self.range_step).round();
        if steps > 1e6 {
            return Err(Error::InvalidConfig("threshold grid too fine".into()));
        }
        if (self.range_lo + steps * self.range_step - self.range_hi).abs() > GRID_TOL {
            return Err(Error::InvalidConfig(format!(
                "grid {}:{} step {} does not land on the upper bound",
                self.range_lo, self.range_hi, self.range_step
            )));
        }
        Ok((0..=steps as usize)
            .map(|i| snap(self.range_lo + i as f64 * self.range_step))
            .collect())
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::VectorDims {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    // sqrt(nu * nv) is exact for u == v; fall back when the product leaves range.
    let prod = nu * nv;
    let denom = if prod.is_finite() && prod > 0.0 {
        prod.sqrt()
    } else {
        nu.sqrt() * nv.sqrt()
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

fn expect_kind(v: &EmbeddingVector, kind: EmbeddingKind) -> Result<()> {
    if v.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            found: v.kind,
        });
    }
    Ok(())
}

/// Style similarity between the style reference and the generated image.
pub fn csd_score(style: &EmbeddingVector, result: &EmbeddingVector) -> Result<f64> {
    expect_kind(style, EmbeddingKind::Csd)?;
    expect_kind(result, EmbeddingKind::Csd)?;
    cosine(&style.values, &result.values)
}

/// Text-image agreement between the content caption and the generated image.
pub fn clip_score(text: &EmbeddingVector, image: &EmbeddingVector, cfg: &MetricConfig) -> Result<f64> {
    expect_kind(text, EmbeddingKind::ClipText)?;
    expect_kind(image, EmbeddingKind::ClipImage)?;
    let mut s = cosine(&text.values, &image.values)?;
    if cfg.clamp_negative {
        s = s.max(0.0);
    }
    Ok(cfg.clip_scale * s)
}

/// Content score at one threshold: `clip` if `csd >= thresh`, else 0.
pub fn cpc_at(clip: f64, csd: f64, thresh: f64) -> f64 {
    if csd >= thresh {
        clip
    } else {
        0.0
    }
}

/// Mean of [`cpc_at`] over the configured threshold grid.
pub fn cpc_range(clip: f64, csd: f64, cfg: &MetricConfig) -> Result<f64> {
    let grid = cfg.thresholds()?;
    Ok(cpc_range_on(clip, csd, &grid))
}

pub(crate) fn cpc_range_on(clip: f64, csd: f64, grid: &[f64]) -> f64 {
    let passed = grid.iter().filter(|&&t| csd >= t).count();
    clip * (passed as f64 / grid.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
                match self.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::None => z,
                }
            })
            .collect()
    }
}

/// Feed-forward scoring head over an image embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AestheticHead {
    pub normalize_input: bool,
    pub layers: Vec<DenseLayer>,
}

impl AestheticHead {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let head: AestheticHead = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        head.validate()?;
        Ok(head)
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::HeadLayer {
                layer: 0,
                message: "head has no layers".into(),
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let fail = |message: String| Err(Error::HeadLayer { layer: i, message });
            if layer.rows == 0 || layer.cols == 0 {
                return fail(format!("empty shape {}x{}", layer.rows, layer.cols));
            }
            if layer.weights.len() != layer.rows * layer.cols {
                return fail(format!(
                    "{} weights for a {}x{} matrix",
                    layer.weights.len(),
                    layer.rows,
                    layer.cols
                ));
            }
            if layer.bias.len() != layer.rows {
                return fail(format!("{} biases for {} rows", layer.bias.len(), layer.rows));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return fail("non-finite parameter".into());
            }
            if i > 0 && layer.cols != self.layers[i - 1].rows {
                return fail(format!(
                    "takes {} inputs but layer {} emits {}",
                    layer.cols,
                    i - 1,
                    self.layers[i - 1].rows
                ));
            }
        }
        let last = self.layers.len() - 1;
        if self.layers[last].rows != 1 {
            return Err(Error::HeadLayer {
                layer: last,
                message: format!("final layer emits {} values, expected 1", self.layers[last].rows),
            });
        }
        Ok(())
    }

    /// Runs the head on a raw feature vector.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        let mut x: Vec<f64> = if self.normalize_input {
            let norm = input.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector);
            }
            input.iter().map(|v| v / norm).collect()
        } else {
            input.to_vec()
        };
        for (i, layer) in self.layers.iter().enumerate() {
            if x.len() != layer.cols {
                return Err(Error::HeadLayer {
                    layer: i,
                    message: format!("expects {} inputs, got {}", layer.cols, x.len()),
                });
            }
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return Err(Error::HeadLayer {
                    layer: i,
                    message: "parameter shape does not match rows x cols".into(),
                });
            }
            x = layer.forward(&x);
        }
        match x.as_slice() {
            [score] => Ok(*score),
            other => Err(Error::HeadLayer {
                layer: self.layers.len().saturating_sub(1),
                message: format!("final layer emits {} values, expected 1", other.len()),
            }),
        }
    }
}

/// Aesthetic quality estimate for a generated image's CLIP embedding.
pub fn aesthetic_score(image: &EmbeddingVector, head: &AestheticHead) -> Result<f64> {
    expect_kind(image, EmbeddingKind::ClipImage)?;
    head.forward(&image.values)
}
