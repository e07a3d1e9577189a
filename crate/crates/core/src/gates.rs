//! Positive multiplicative gates built from the latent log-field, their
//! theoretical moment kernels, and injection into feature maps.
//!
//! Two normalizations of exp(γψ) are supported: the exact Wick form
//! ξ(x) = exp(γψ(x) − γ²v(x)/2) with sitewise mean one, and the sample-wise
//! form ξ(x) = exp(γψ(x)) / mean_y exp(γψ(y)) with spatial mean exactly one
//! on every sample.

use crate::error::{Error, Result};
use crate::field::{FeatureMap, LatentField};
use crate::grid::{GridSpec, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    ExactWick,
    SampleWise,
    Unit,
}

/// A strictly positive field on the grid, tagged with its normalization and
/// the (γ, β) it was built with.
#[derive(Debug, Clone)]
pub struct Gate {
    values: LatentField,
    normalization: Normalization,
    gamma: f64,
    beta: f64,
}

impl Gate {
    pub fn values(&self) -> &LatentField {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn get(&self, site: Site) -> f64 {
        self.values.get(site)
    }

    /// The all-ones gate (noise disabled).
    pub fn unit(height: usize, width: usize) -> Self {
        Self {
            values: LatentField::constant(height, width, 1.0),
            normalization: Normalization::Unit,
            gamma: 0.0,
            beta: 1.0,
        }
    }
}

/// Exact Wick-normalized gate ξ(x) = exp(γψ(x) − γ²v(x)/2); sitewise mean one
/// under the sampling law. `v` must be the variance map of ψ's law.
pub fn exact_wick_gate(psi: &LatentField, gamma: f64, v: &LatentField, beta: f64) -> Result<Gate> {
    psi.same_shape(v)?;
    let values = LatentField::new(
        psi.height(),
        psi.width(),
        psi.values()
            .iter()
            .zip(v.values())
            .map(|(&p, &var)| (gamma * p - 0.5 * gamma * gamma * var).exp())
            .collect(),
    )?;
    Ok(Gate { values, normalization: Normalization::ExactWick, gamma, beta })
}

/// Sample-wise mean-one gate ξ(x) = exp(γψ(x)) / ((1/n)Σ_y exp(γψ(y))).
/// Evaluated in max-shifted form so no overflow is reachable for finite ψ.
pub fn samplewise_gate(psi: &LatentField, gamma: f64, beta: f64) -> Gate {
    let shift = psi.values().iter().map(|&p| gamma * p).fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = psi.values().iter().map(|&p| (gamma * p - shift).exp()).collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let values = LatentField::new(
        psi.height(),
        psi.width(),
        shifted.iter().map(|&e| e / mean).collect(),
    )
    .expect("finite shifted exponentials");
    Gate { values, normalization: Normalization::SampleWise, gamma, beta }
}

/// τ = γ²/β, the single parameter governing the exact gate law.
pub fn effective_tau(gamma: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    Ok(gamma * gamma / beta)
}

/// Theoretical second moment K(x,y) = exp(τ G(x,y)) of the exact gate.
pub fn gate_kernel_theoretical(grid: &GridSpec, tau: f64, x: Site, y: Site) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    Ok((tau * grid.green_kernel(x, y)?).exp())
}

/// All-order moment E[Πᵣ ξ(xᵣ)] = exp(γ² Σ_{a<b} β⁻¹G(x_a,x_b)) of the exact
/// gate.
pub fn multi_point_moment_theoretical(
    grid: &GridSpec,
    beta: f64,
    gamma: f64,
    sites: &[Site],
) -> Result<f64> {
    if sites.is_empty() {
        return Err(Error::InvalidParameter("site list must be nonempty".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    for &s in sites {
        grid.check_site(s)?;
    }
    let g = grid.green_matrix()?;
    let mut acc = 0.0;
    for a in 0..sites.len() {
        for b in (a + 1)..sites.len() {
            acc += g[(grid.index_of(sites[a]), grid.index_of(sites[b]))] / beta;
        }
    }
    Ok((gamma * gamma * acc).exp())
}

/// Leading-order covariance γ²β⁻¹G(x,y) of the exact gate at small γ.
pub fn small_gamma_covariance_theoretical(
    grid: &GridSpec,
    beta: f64,
    gamma: f64,
    x: Site,
    y: Site,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    Ok(gamma * gamma * grid.green_kernel(x, y)? / beta)
}

/// Multiplicative injection: out(c,x) = F(c,x) ξ(x), the gate shared across
/// channels.
pub fn inject_multiplicative(f: &FeatureMap, gate: &Gate) -> Result<FeatureMap> {
    check_spatial(f, gate)?;
    let n = f.height() * f.width();
    let mut values = Vec::with_capacity(f.channels() * n);
    for c in 0..f.channels() {
        for (fv, gv) in f.channel(c).iter().zip(gate.values.values()) {
            values.push(fv * gv);
        }
    }
    Ok(FeatureMap::from_parts(f.channels(), f.height(), f.width(), values))
}

/// Residual injection: out(c,x) = F(c,x)(1 + α(ξ(x) − 1)); α = 1 reproduces
/// the plain multiplicative form.
pub fn inject_residual(f: &FeatureMap, gate: &Gate, alpha: f64) -> Result<FeatureMap> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0,1], got {alpha}")));
    }
    check_spatial(f, gate)?;
    let n = f.height() * f.width();
    let mut values = Vec::with_capacity(f.channels() * n);
    for c in 0..f.channels() {
        for (fv, gv) in f.channel(c).iter().zip(gate.values.values()) {
            values.push(fv * (1.0 + alpha * (gv - 1.0)));
        }
    }
    Ok(FeatureMap::from_parts(f.channels(), f.height(), f.width(), values))
}

/// Channel-wise injection with an independent gate per channel.
pub fn inject_multiplicative_channelwise(f: &FeatureMap, gates: &[Gate]) -> Result<FeatureMap> {
    if gates.len() != f.channels() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} gates", f.channels()),
            actual: format!("{} gates", gates.len()),
        });
    }
    let n = f.height() * f.width();
    let mut values = Vec::with_capacity(f.channels() * n);
    for (c, gate) in gates.iter().enumerate() {
        check_spatial(f, gate)?;
        for (fv, gv) in f.channel(c).iter().zip(gate.values.values()) {
            values.push(fv * gv);
        }
    }
    Ok(FeatureMap::from_parts(f.channels(), f.height(), f.width(), values))
}

/// Resample a gate to a different spatial resolution by bilinear
/// interpolation; sample-wise gates are re-normalized to spatial mean one.
pub fn resize_gate(gate: &Gate, height: usize, width: usize) -> Result<Gate> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter("target dimensions must be >= 1".into()));
    }
    let src = gate.values();
    let (sh, sw) = (src.height(), src.width());
    let mut values = vec![0.0; height * width];
    for i in 0..height {
        // cell-center alignment, clamped at the borders
        let fy = ((i as f64 + 0.5) * sh as f64 / height as f64 - 0.5).clamp(0.0, sh as f64 - 1.0);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let wy = fy - y0 as f64;
        for j in 0..width {
            let fx =
                ((j as f64 + 0.5) * sw as f64 / width as f64 - 0.5).clamp(0.0, sw as f64 - 1.0);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let v00 = src.values()[y0 * sw + x0];
            let v01 = src.values()[y0 * sw + x1];
            let v10 = src.values()[y1 * sw + x0];
            let v11 = src.values()[y1 * sw + x1];
            values[i * width + j] = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01)
                + wy * ((1.0 - wx) * v10 + wx * v11);
        }
    }
    if gate.normalization == Normalization::SampleWise {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in &mut values {
            *v /= mean;
        }
    }
    Ok(Gate {
        values: LatentField::new(height, width, values)?,
        normalization: gate.normalization,
        gamma: gate.gamma,
        beta: gate.beta,
    })
}

fn check_spatial(f: &FeatureMap, gate: &Gate) -> Result<()> {
    if f.height() != gate.values.height() || f.width() != gate.values.width() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", f.height(), f.width()),
            actual: format!("{}x{}", gate.values.height(), gate.values.width()),
        });
    }
    Ok(())
}
