//! Flat `key = value` run configuration files. Unknown keys are rejected,
//! and exactly one of `beta`/`eps` may be given — the two parameterizations
//! are linked by β = n/(2ε) and accepting both invites silent inconsistency.

use gch_core::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::InvalidParameter(format!("line {}: invalid {what}: {value}", lineno + 1))
            };
            match key {
                "height" => cfg.height = Some(value.parse().map_err(|_| bad("height"))?),
                "width" => cfg.width = Some(value.parse().map_err(|_| bad("width"))?),
                "beta" => cfg.beta = Some(value.parse().map_err(|_| bad("beta"))?),
                "eps" => cfg.eps = Some(value.parse().map_err(|_| bad("eps"))?),
                "gamma" => cfg.gamma = Some(value.parse().map_err(|_| bad("gamma"))?),
                "q" => cfg.q = Some(value.parse().map_err(|_| bad("q"))?),
                "alpha" => cfg.alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
                "mu" => cfg.mu = Some(value.parse().map_err(|_| bad("mu"))?),
                "n" => cfg.n = Some(value.parse().map_err(|_| bad("n"))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "out" => cfg.out = Some(value.to_string()),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        if cfg.beta.is_some() && cfg.eps.is_some() {
            return Err(Error::InvalidParameter("give exactly one of `beta` or `eps`".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Resolve β for a grid of n sites, defaulting to 1 when neither β nor ε
    /// is configured.
    pub fn resolve_beta(&self, n_sites: usize) -> Result<f64> {
        match (self.beta, self.eps) {
            (Some(beta), None) => {
                if beta > 0.0 {
                    Ok(beta)
                } else {
                    Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")))
                }
            }
            (None, Some(eps)) => {
                if eps > 0.0 {
                    Ok(n_sites as f64 / (2.0 * eps))
                } else {
                    Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")))
                }
            }
            (None, None) => Ok(1.0),
            (Some(_), Some(_)) => {
                Err(Error::InvalidParameter("give exactly one of `beta` or `eps`".into()))
            }
        }
    }
}

/// Seed resolution order: explicit value, then the GCH_SEED environment
/// variable, then 0.
pub fn resolve_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match std::env::var("GCH_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("GCH_SEED is not a u64: {text}"))),
        Err(_) => Ok(0),
    }
}

/// Parse an `HxW` grid shape such as `4x4`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("expected HxW grid shape, got `{text}`"));
    let (h, w) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}
