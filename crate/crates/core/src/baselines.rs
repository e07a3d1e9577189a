//! Comparison perturbations: inverted dropout, block-structured hard masks,
//! and additive Gaussian noise (i.i.d. and correlated) with an
//! energy-matching rule for the noise strength.

use crate::error::{Error, Result};
use crate::field::LatentField;
use crate::grid::GridSpec;
use crate::sampler::{sample_gff_spectral, SpectralPlan};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A hard mask: every entry is either 0 or the keep scale `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskField {
    values: LatentField,
    keep_prob: f64,
    scale: f64,
    degenerate: bool,
}

impl MaskField {
    pub fn values(&self) -> &LatentField {
        &self.values
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// True when every site was dropped (possible for block masks on tiny
    /// grids); such samples are returned as-is rather than resampled.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn get(&self, site: crate::grid::Site) -> f64 {
        self.values.get(site)
    }

    /// Entrywise product with a field.
    pub fn apply(&self, h: &LatentField) -> Result<LatentField> {
        self.values.same_shape(h)?;
        LatentField::new(
            h.height(),
            h.width(),
            self.values.values().iter().zip(h.values()).map(|(&m, &v)| m * v).collect(),
        )
    }
}

/// Inverted dropout: each site independently 1/q with probability q, else 0,
/// so E[m(x)] = 1 sitewise.
pub fn inverted_dropout_mask(grid: &GridSpec, q: f64, rng: &mut ChaCha12Rng) -> Result<MaskField> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be in (0,1], got {q}")));
    }
    let a = 1.0 / q;
    let mut degenerate = true;
    let values: Vec<f64> = (0..grid.n())
        .map(|_| {
            if rng.gen::<f64>() < q {
                degenerate = false;
                a
            } else {
                0.0
            }
        })
        .collect();
    Ok(MaskField {
        values: LatentField::new(grid.height(), grid.width(), values)?,
        keep_prob: q,
        scale: a,
        degenerate,
    })
}

/// Block-structured hard mask: i.i.d. block centers with the center rate
/// chosen so the expected dropped fraction is `p`, each zeroing the
/// block_size×block_size square around it (clipped at the edges); kept sites
/// are rescaled so the spatial mean is one. block_size = 1 degenerates to
/// per-site Bernoulli masking.
pub fn block_mask(
    grid: &GridSpec,
    p: f64,
    block_size: usize,
    rng: &mut ChaCha12Rng,
) -> Result<MaskField> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must be in (0,1), got {p}")));
    }
    let (h, w) = (grid.height(), grid.width());
    if block_size == 0 || block_size > h.min(w) {
        return Err(Error::InvalidParameter(format!(
            "block_size must be in 1..=min(H,W)={}, got {block_size}",
            h.min(w)
        )));
    }
    // centers are placed where a full block fits
    let valid_h = h - block_size + 1;
    let valid_w = w - block_size + 1;
    let n = (h * w) as f64;
    let rate = p * n / ((block_size * block_size) as f64 * (valid_h * valid_w) as f64);
    let rate = rate.min(1.0);

    let mut kept = vec![true; h * w];
    for ci in 0..valid_h {
        for cj in 0..valid_w {
            if rng.gen::<f64>() < rate {
                for di in 0..block_size {
                    for dj in 0..block_size {
                        kept[(ci + di) * w + (cj + dj)] = false;
                    }
                }
            }
        }
    }
    let kept_count = kept.iter().filter(|&&k| k).count();
    if kept_count == 0 {
        return Ok(MaskField {
            values: LatentField::zeros(h, w),
            keep_prob: 1.0 - p,
            scale: 0.0,
            degenerate: true,
        });
    }
    let scale = n / kept_count as f64;
    let values: Vec<f64> = kept.iter().map(|&k| if k { scale } else { 0.0 }).collect();
    Ok(MaskField {
        values: LatentField::new(h, w, values)?,
        keep_prob: 1.0 - p,
        scale,
        degenerate: false,
    })
}

/// I.i.d. N(0, σ²) additive field.
pub fn additive_iid_gaussian(grid: &GridSpec, sigma: f64, rng: &mut ChaCha12Rng) -> Result<LatentField> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    LatentField::new(
        grid.height(),
        grid.width(),
        (0..grid.n()).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
    )
}

/// Correlated additive field scale·ψ with ψ the spectral Gaussian free field
/// of the plan; covariance scale²β⁻¹G_U.
pub fn additive_correlated_gaussian(
    plan: &SpectralPlan,
    scale: f64,
    rng: &mut ChaCha12Rng,
) -> LatentField {
    sample_gff_spectral(plan, rng).map(|v| scale * v)
}

/// Noise strength matching the spatially averaged per-site variance of the
/// exact-gate deviation ξ − 1: σ² = (1/n)Σ_x (exp(γ²v(x)) − 1).
pub fn energy_match_sigma(plan: &SpectralPlan, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::InvalidParameter("gamma must be nonzero".into()));
    }
    let v = plan.variance_map();
    let mean =
        v.values().iter().map(|&vx| (gamma * gamma * vx).exp() - 1.0).sum::<f64>() / v.len() as f64;
    Ok(mean.sqrt())
}
