use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::neural::{Scalar, Tensor4, UNetOutputs};
use crate::preprocess::TargetMaps;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the BCE.
pub const BCE_CLAMP: f64 = 1e-7;
/// Smoothing term in the Dice denominator.
pub const DICE_EPS: f64 = 1e-7;

/// Per-term loss values. `seg_loss` is BCE minus the Dice coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub seg_loss: f64,
    pub mse_x: f64,
    pub mse_y: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.seg_loss.is_finite() && self.mse_x.is_finite() && self.mse_y.is_finite() && self.total.is_finite()
    }

    /// Running mean helper: adds `other` scaled by `weight`.
    pub fn accumulate(&mut self, other: &LossBreakdown, weight: f64) {
        self.seg_loss += other.seg_loss * weight;
        self.mse_x += other.mse_x * weight;
        self.mse_y += other.mse_y * weight;
        self.total += other.total * weight;
    }
}

/// Weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub seg: f64,
    pub x: f64,
    pub y: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            seg: 1.0,
            x: 1.0,
            y: 1.0,
        }
    }
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(shape_err(format!("{what}: {a} vs {b} cells")));
    }
    Ok(())
}

/// Mean BCE minus Dice, and its gradient with respect to `p`.
pub fn seg_loss_grad<T: Scalar>(p: &[T], g: &[T]) -> Result<(f64, Vec<T>)> {
    check_len(p.len(), g.len(), "seg_loss")?;
    let n = p.len().max(1) as f64;
    let (mut bce, mut s_pg, mut s_pp, mut s_gg) = (0.0, 0.0, 0.0, 0.0);
    for (pv, gv) in p.iter().zip(g) {
        let (pv, gv) = (pv.as_f64(), gv.as_f64());
        let pc = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        bce -= gv * pc.ln() + (1.0 - gv) * (1.0 - pc).ln();
        s_pg += pv * gv;
        s_pp += pv * pv;
        s_gg += gv * gv;
    }
    bce /= n;
    let den = s_pp + s_gg + DICE_EPS;
    let dice = 2.0 * s_pg / den;
    let grad = p
        .iter()
        .zip(g)
        .map(|(pv, gv)| {
            let (pv, gv) = (pv.as_f64(), gv.as_f64());
            let d_bce = if (BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&pv) {
                (-gv / pv + (1.0 - gv) / (1.0 - pv)) / n
            } else {
                0.0
            };
            let d_dice = 2.0 * gv / den - 4.0 * s_pg * pv / (den * den);
            T::from_f64(d_bce - d_dice)
        })
        .collect();
    Ok((bce - dice, grad))
}

/// Mean BCE over all cells minus the Dice coefficient `2 sum(pg) / (sum p^2 + sum g^2 + eps)`.
pub fn seg_loss<T: Scalar>(p: &[T], g: &[T]) -> Result<f64> {
    seg_loss_grad(p, g).map(|(v, _)| v)
}

/// Mean squared error over masked cells and its gradient; zero for an empty mask.
pub fn masked_mse_grad<T: Scalar>(c: &[T], target: &[T], mask: &[bool]) -> Result<(f64, Vec<T>)> {
    check_len(c.len(), target.len(), "masked_mse")?;
    check_len(c.len(), mask.len(), "masked_mse mask")?;
    let count = mask.iter().filter(|m| **m).count().max(1) as f64;
    let mut sum = 0.0;
    let grad = c
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((cv, tv), &m)| {
            if m {
                let d = cv.as_f64() - tv.as_f64();
                sum += d * d;
                T::from_f64(2.0 * d / count)
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((sum / count, grad))
}

pub fn masked_mse<T: Scalar>(c: &[T], target: &[T], mask: &[bool]) -> Result<f64> {
    masked_mse_grad(c, target, mask).map(|(v, _)| v)
}

fn to_scalar<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|x| T::from_f64(*x as f64)).collect()
}

/// Batch loss (mean over samples) and its gradient with respect to the
/// three output maps.
pub fn total_loss<T: Scalar>(
    outputs: &UNetOutputs<T>,
    targets: &[&TargetMaps],
    weights: &LossWeights,
) -> Result<(LossBreakdown, UNetOutputs<T>)> {
    let shape = outputs.presence.shape();
    let [batch, _, k, m] = shape;
    if targets.len() != batch {
        return Err(shape_err(format!("{} targets for a batch of {batch}", targets.len())));
    }
    for map in outputs.maps() {
        if map.shape() != shape || shape[1] != 1 {
            return Err(shape_err("output maps must share a (B,1,K,M) shape"));
        }
    }
    let mut grads = UNetOutputs::zeros(shape);
    let mut mean = LossBreakdown::default();
    let inv = 1.0 / batch.max(1) as f64;
    for (b, t) in targets.iter().enumerate() {
        if (t.range_bins, t.doppler_bins) != (k, m) {
            return Err(shape_err(format!(
                "target {}x{} vs output {k}x{m}",
                t.range_bins, t.doppler_bins
            )));
        }
        let mask = t.mask();
        let (seg, gp) = seg_loss_grad(outputs.presence.sample(b), &to_scalar::<T>(&t.presence))?;
        let (mx, gx) = masked_mse_grad(outputs.coord_x.sample(b), &to_scalar::<T>(&t.coord_x), &mask)?;
        let (my, gy) = masked_mse_grad(outputs.coord_y.sample(b), &to_scalar::<T>(&t.coord_y), &mask)?;
        let sample = LossBreakdown {
            seg_loss: seg,
            mse_x: mx,
            mse_y: my,
            total: weights.seg * seg + weights.x * mx + weights.y * my,
        };
        mean.accumulate(&sample, inv);
        for (dst, src, w) in [
            (&mut grads.presence, gp, weights.seg),
            (&mut grads.coord_x, gx, weights.x),
            (&mut grads.coord_y, gy, weights.y),
        ] {
            let scale = T::from_f64(w * inv);
            for (d, s) in dst.sample_mut(b).iter_mut().zip(src) {
                *d = s * scale;
            }
        }
    }
    Ok((mean, grads))
}

/// Stacks target maps into (B,1,K,M) tensors, mostly for tests and tooling.
pub fn targets_as_outputs<T: Scalar>(targets: &[&TargetMaps]) -> Result<UNetOutputs<T>> {
    let first = targets.first().ok_or_else(|| shape_err("no targets"))?;
    let shape = [targets.len(), 1, first.range_bins, first.doppler_bins];
    let collect = |f: &dyn Fn(&TargetMaps) -> &[f32]| {
        Tensor4::from_vec(shape, targets.iter().flat_map(|t| to_scalar::<T>(f(t))).collect())
    };
    Ok(UNetOutputs {
        presence: collect(&|t| &t.presence)?,
        coord_x: collect(&|t| &t.coord_x)?,
        coord_y: collect(&|t| &t.coord_y)?,
    })
}
