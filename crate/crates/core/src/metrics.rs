//! Compatibility observables: pairwise log-ratio deformations and their
//! Gaussian law, margin-sensitive ranking probabilities, intrinsic-roughness
//! budgets, coherence amplification under dropout, oscillation bounds,
//! superlevel sets, and cycle-graph Betti numbers.

use crate::baselines::MaskField;
use crate::error::{Error, Result};
use crate::field::LatentField;
use crate::grid::{GridSpec, Site};
use nalgebra::DMatrix;

/// Log-ratio outcomes extended by the three singular events a hard mask can
/// produce at a compared pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedLogRatio {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undefined,
}

impl ExtendedLogRatio {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedLogRatio::Finite(_))
    }
}

/// The cycle graph C_n with positive vertex values, indexed 0..n.
#[derive(Debug, Clone)]
pub struct CycleGraph {
    n: usize,
    values: Vec<f64>,
}

impl CycleGraph {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "cycle needs n >= 3 vertices, got {}",
                values.len()
            )));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("cycle vertex values must be positive and finite".into()));
        }
        Ok(Self { n: values.len(), values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Deformation log(h̃(x)/h̃(y)) − log(h(x)/h(y)) of the pairwise log-ratio.
pub fn logratio_deformation(
    h: &LatentField,
    h_tilde: &LatentField,
    x: Site,
    y: Site,
) -> Result<f64> {
    h.same_shape(h_tilde)?;
    for (f, name) in [(h, "h"), (h_tilde, "perturbed h")] {
        for s in [x, y] {
            if s.i == 0 || s.j == 0 || s.i > f.height() || s.j > f.width() {
                return Err(Error::IndexOutOfRange(format!("site ({}, {})", s.i, s.j)));
            }
            if !(f.get(s) > 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be strictly positive at compared sites"
                )));
            }
        }
    }
    Ok((h_tilde.get(x) / h_tilde.get(y)).ln() - (h.get(x) / h.get(y)).ln())
}

/// Theoretical deformation variance τ·R_G(x,y) under the sample-wise gate.
pub fn logratio_variance_theoretical(grid: &GridSpec, tau: f64, x: Site, y: Site) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    Ok(tau * grid.green_metric(x, y)?)
}

/// Standard normal CDF via the complementary error function; absolute
/// accuracy well below 1e-12 across the real line.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Ranking preservation probability Φ(δ/√(τR)) for a log-margin δ under the
/// sample-wise gate.
pub fn ranking_probability_theoretical(delta: f64, tau: f64, r: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    if !(tau >= 0.0 && r >= 0.0) {
        return Err(Error::InvalidParameter("tau and R must be nonnegative".into()));
    }
    let var = tau * r;
    if var == 0.0 {
        return Err(Error::DegenerateVariance(
            "tau*R = 0: the ranking law excludes the zero-variance case".into(),
        ));
    }
    Ok(standard_normal_cdf(delta / var.sqrt()))
}

/// Strict ranking outcome; ties count as not preserved.
pub fn ranking_preserved(h_tilde: &LatentField, x: Site, y: Site) -> bool {
    h_tilde.get(x) > h_tilde.get(y)
}

/// Log-ratio of a masked field, resolved into the extended value the mask's
/// zero events produce.
pub fn masked_logratio(h: &LatentField, m: &MaskField, x: Site, y: Site) -> Result<ExtendedLogRatio> {
    h.same_shape(m.values())?;
    for s in [x, y] {
        if !(h.get(s) > 0.0) {
            return Err(Error::Domain("h must be strictly positive at compared sites".into()));
        }
    }
    let mx = m.get(x) * h.get(x);
    let my = m.get(y) * h.get(y);
    Ok(match (mx > 0.0, my > 0.0) {
        (true, true) => ExtendedLogRatio::Finite((mx / my).ln()),
        (false, true) => ExtendedLogRatio::MinusInfinity,
        (true, false) => ExtendedLogRatio::PlusInfinity,
        (false, false) => ExtendedLogRatio::Undefined,
    })
}

/// Exact expected intrinsic-roughness budget γ²·½Tr(L_int C) added by the
/// gate, with C the log-field covariance.
pub fn expected_intrinsic_budget_gch(grid: &GridSpec, c: &DMatrix<f64>, gamma: f64) -> Result<f64> {
    Ok(gamma * gamma * grid.epsilon_intrinsic(c)?)
}

/// Exact expected intrinsic energy of inverted dropout,
/// E_int(h) + ((1−q)/(2q))·Σ_x d_x^int h(x)².
pub fn dropout_energy_expected(grid: &GridSpec, h: &LatentField, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be in (0,1], got {q}")));
    }
    let base = grid.intrinsic_energy(h)?;
    let mut weighted = 0.0;
    for s in grid.sites() {
        weighted += grid.intrinsic_degree(s)? * h.get(s) * h.get(s);
    }
    Ok(base + (1.0 - q) / (2.0 * q) * weighted)
}

/// Coherence amplification factor κ(h) = Σ_x d_x^int h(x)² / (2 E_int(h)), so
/// that E[E_int(m_q ⊙ h)] = (1 + ((1−q)/q)κ(h))·E_int(h).
pub fn coherence_score(grid: &GridSpec, h: &LatentField) -> Result<f64> {
    let e = grid.intrinsic_energy(h)?;
    if e <= 0.0 {
        return Err(Error::CoherenceUndefined);
    }
    let mut weighted = 0.0;
    for s in grid.sites() {
        weighted += grid.intrinsic_degree(s)? * h.get(s) * h.get(s);
    }
    Ok(weighted / (2.0 * e))
}

/// Oscillation max ψ − min ψ; bounds the sup-norm of the sample-wise gate's
/// log via ‖log ξ‖_∞ ≤ |γ|·osc(ψ).
pub fn oscillation(psi: &LatentField) -> f64 {
    psi.max() - psi.min()
}

/// Superlevel set {x : f(x) ≥ t}.
pub fn superlevel_set(f: &LatentField, t: f64) -> Result<Vec<Site>> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {t}")));
    }
    let mut out = Vec::new();
    for i in 1..=f.height() {
        for j in 1..=f.width() {
            let s = Site::new(i, j);
            if f.get(s) >= t {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Betti numbers (β₀, β₁) of the subgraph of C_n induced by the kept
/// vertices; β₁ = 1 iff the whole cycle survives.
pub fn betti_numbers_cycle(g: &CycleGraph, kept: &[bool]) -> Result<(usize, usize)> {
    if kept.len() != g.n {
        return Err(Error::DimensionMismatch {
            expected: format!("{} vertices", g.n),
            actual: format!("{} flags", kept.len()),
        });
    }
    let n = g.n;
    let vertices = kept.iter().filter(|&&k| k).count();
    let mut edges = 0usize;
    for i in 0..n {
        if kept[i] && kept[(i + 1) % n] {
            edges += 1;
        }
    }
    if n == vertices && edges == n {
        // full cycle: the n edges close a single loop
        return Ok((1, 1));
    }
    // breadth-first component count over the induced subgraph
    let mut seen = vec![false; n];
    let mut components = 0usize;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if !kept[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for w in [(v + 1) % n, (v + n - 1) % n] {
                if kept[w] && kept[v] && !seen[w] {
                    // neighbors along the cycle only
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let beta1 = edges + components - vertices;
    Ok((components, beta1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::samplewise_gate;
    use crate::sampler::{build_plan, sample_gff_spectral, RandomStream};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_positive_field(h: usize, w: usize, rng: &mut impl Rng) -> LatentField {
        LatentField::new(
            h,
            w,
            (0..h * w).map(|_| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn deformation_examples() {
        let h = LatentField::new(2, 1, vec![1.5, 0.7]).unwrap();
        let x = Site::new(1, 1);
        let y = Site::new(2, 1);
        assert_eq!(logratio_deformation(&h, &h, x, y).unwrap(), 0.0);

        let bad = LatentField::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(logratio_deformation(&h, &bad, x, y).is_err());
    }

    #[test]
    fn deformation_is_gated_increment() {
        let grid = GridSpec::new(3, 3).unwrap();
        let plan = build_plan(&grid, 1.0).unwrap();
        let mut rng = RandomStream::new(31, 0).rng();
        let gamma = 0.7;
        let x = Site::new(1, 2);
        let y = Site::new(3, 1);
        for _ in 0..500 {
            let psi = sample_gff_spectral(&plan, &mut rng);
            let h = random_positive_field(3, 3, &mut rng);
            let xi = samplewise_gate(&psi, gamma, 1.0);
            let gated = LatentField::new(
                3,
                3,
                h.values().iter().zip(xi.values().values()).map(|(a, b)| a * b).collect(),
            )
            .unwrap();
            let d = logratio_deformation(&h, &gated, x, y).unwrap();
            assert!((d - gamma * (psi.get(x) - psi.get(y))).abs() < 1e-10);

            // global rescale of h leaves the deformation unchanged
            let h2 = h.map(|v| 3.7 * v);
            let gated2 = LatentField::new(
                3,
                3,
                h2.values().iter().zip(xi.values().values()).map(|(a, b)| a * b).collect(),
            )
            .unwrap();
            let d2 = logratio_deformation(&h2, &gated2, x, y).unwrap();
            assert!((d - d2).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_theoretical_examples() {
        let grid = GridSpec::new(2, 1).unwrap();
        let x = Site::new(1, 1);
        let y = Site::new(2, 1);
        assert_eq!(logratio_variance_theoretical(&grid, 0.1, x, x).unwrap(), 0.0);
        assert!((logratio_variance_theoretical(&grid, 0.1, x, y).unwrap() - 0.04).abs() < 1e-12);
        assert!(logratio_variance_theoretical(&grid, 0.1, Site::new(3, 1), y).is_err());
    }

    #[test]
    fn ranking_probability_examples() {
        // Φ(1.0)
        let p = ranking_probability_theoretical(0.2, 0.1, 0.4).unwrap();
        assert!((p - 0.8413447460685429).abs() < 1e-12);

        // limit toward 0.5 as δ → 0⁺
        let p0 = ranking_probability_theoretical(1e-14, 0.1, 0.4).unwrap();
        assert!((p0 - 0.5).abs() < 1e-12);

        assert!(ranking_probability_theoretical(0.2, 0.0, 0.4).is_err());
        assert!(ranking_probability_theoretical(0.0, 0.1, 0.4).is_err());

        // Gaussian tail bound Φ(−u) ≤ exp(−u²/2)
        for u in [1.0, 2.0, 3.0] {
            let tail = 1.0 - ranking_probability_theoretical(u, 1.0, 1.0).unwrap();
            assert!(tail <= (-u * u / 2.0).exp());
        }
    }

    #[test]
    fn ranking_preserved_examples() {
        let h = LatentField::new(2, 1, vec![2.0, 1.0]).unwrap();
        assert!(ranking_preserved(&h, Site::new(1, 1), Site::new(2, 1)));
        assert!(!ranking_preserved(&h, Site::new(2, 1), Site::new(1, 1)));
        let tie = LatentField::constant(2, 1, 1.0);
        assert!(!ranking_preserved(&tie, Site::new(1, 1), Site::new(2, 1)));
    }

    #[test]
    fn masked_logratio_states() {
        use crate::baselines::inverted_dropout_mask;
        let grid = GridSpec::new(2, 1).unwrap();
        let h = LatentField::new(2, 1, vec![2.0, 3.0]).unwrap();
        let x = Site::new(1, 1);
        let y = Site::new(2, 1);

        let mut rng = RandomStream::new(2, 0).rng();
        let all_kept = inverted_dropout_mask(&grid, 1.0, &mut rng).unwrap();
        assert!(masked_logratio(&h, &all_kept, x, y).unwrap().is_finite());

        // frequency of non-finite outcomes is 1 − q²
        let q = 0.6;
        let n = 1_000_000;
        let mut counts = [0usize; 4]; // finite, -inf, +inf, undefined
        for _ in 0..n {
            let m = inverted_dropout_mask(&grid, q, &mut rng).unwrap();
            let idx = match masked_logratio(&h, &m, x, y).unwrap() {
                ExtendedLogRatio::Finite(_) => 0,
                ExtendedLogRatio::MinusInfinity => 1,
                ExtendedLogRatio::PlusInfinity => 2,
                ExtendedLogRatio::Undefined => 3,
            };
            counts[idx] += 1;
        }
        let p_bad = 1.0 - q * q;
        let freq = (counts[1] + counts[2] + counts[3]) as f64 / n as f64;
        let se = (p_bad * (1.0 - p_bad) / n as f64).sqrt();
        assert!((freq - p_bad).abs() < 4.0 * se, "{freq} vs {p_bad}");
    }

    #[test]
    fn intrinsic_budget_examples() {
        let grid = GridSpec::new(2, 1).unwrap();
        let c = grid.green_matrix().unwrap();
        assert_eq!(expected_intrinsic_budget_gch(&grid, &c, 0.0).unwrap(), 0.0);
        let b = expected_intrinsic_budget_gch(&grid, &c, 0.5).unwrap();
        assert!((b - 0.05).abs() < 1e-12);
    }

    #[test]
    fn dropout_energy_examples() {
        let grid = GridSpec::new(2, 2).unwrap();
        let h = LatentField::constant(2, 2, 1.0);
        assert_eq!(dropout_energy_expected(&grid, &h, 1.0).unwrap(), 0.0);
        let e = dropout_energy_expected(&grid, &h, 0.5).unwrap();
        assert!((e - 4.0).abs() < 1e-12);
        assert!(dropout_energy_expected(&grid, &h, 0.0).is_err());
    }

    // Exhaustive 2^n oracle: average E_int((b/q)⊙h) over all masks with
    // Bernoulli weights.
    fn dropout_energy_enumerated(grid: &GridSpec, h: &LatentField, q: f64) -> f64 {
        let n = grid.n();
        let sites: Vec<Site> = grid.sites().collect();
        let mut total = 0.0;
        for bits in 0u64..(1u64 << n) {
            let mut masked = h.clone();
            let mut weight = 1.0;
            for (k, &s) in sites.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    masked.set(s, h.get(s) / q);
                    weight *= q;
                } else {
                    masked.set(s, 0.0);
                    weight *= 1.0 - q;
                }
            }
            total += weight * grid.intrinsic_energy(&masked).unwrap();
        }
        total
    }

    #[test]
    fn dropout_energy_matches_enumeration() {
        let mut rng = RandomStream::new(41, 0).rng();
        for (hh, ww) in [(2, 2), (2, 3), (3, 4)] {
            let grid = GridSpec::new(hh, ww).unwrap();
            let h = random_positive_field(hh, ww, &mut rng);
            for &q in &[0.3, 0.5, 0.9] {
                let exact = dropout_energy_expected(&grid, &h, q).unwrap();
                let enumerated = dropout_energy_enumerated(&grid, &h, q);
                assert!((exact - enumerated).abs() < 1e-12 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn coherence_examples() {
        // 2-site path: h=[1,2], E_int = 0.5, Σ d h² = 1 + 4 = 5 → κ = 5
        let grid = GridSpec::new(2, 1).unwrap();
        let h = LatentField::new(2, 1, vec![1.0, 2.0]).unwrap();
        let kappa = coherence_score(&grid, &h).unwrap();
        assert!((kappa - 5.0).abs() < 1e-12);

        // scale invariance
        let kappa2 = coherence_score(&grid, &h.map(|v| 7.0 * v)).unwrap();
        assert!((kappa - kappa2).abs() < 1e-12);

        // amplification identity against the exact expected energy
        for &q in &[0.3, 0.7] {
            let lhs = dropout_energy_expected(&grid, &h, q).unwrap();
            let rhs = (1.0 + (1.0 - q) / q * kappa) * grid.intrinsic_energy(&h).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }

        // constant field: E_int = 0 → undefined
        let flat = LatentField::constant(2, 1, 1.0);
        assert!(matches!(coherence_score(&grid, &flat), Err(Error::CoherenceUndefined)));

        // κ diverges along h_ℓ = [1, 1+1/ℓ]
        let mut prev = 0.0;
        for l in [1.0, 10.0, 100.0] {
            let hl = LatentField::new(2, 1, vec![1.0, 1.0 + 1.0 / l]).unwrap();
            let k = coherence_score(&grid, &hl).unwrap();
            assert!(k > prev);
            prev = k;
        }
        assert!(prev > 1e4);
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(oscillation(&LatentField::constant(3, 3, 2.0)), 0.0);
        let psi = LatentField::new(2, 1, vec![-1.0, 2.0]).unwrap();
        assert_eq!(oscillation(&psi), 3.0);
    }

    #[test]
    fn oscillation_bounds_samplewise_log() {
        let grid = GridSpec::new(4, 4).unwrap();
        let plan = build_plan(&grid, 1.0).unwrap();
        let mut rng = RandomStream::new(47, 0).rng();
        let gamma = 0.8;
        for _ in 0..10_000 {
            let psi = sample_gff_spectral(&plan, &mut rng);
            let xi = samplewise_gate(&psi, gamma, 1.0);
            let sup = xi
                .values()
                .values()
                .iter()
                .map(|v| v.ln().abs())
                .fold(0.0f64, f64::max);
            assert!(sup <= gamma * oscillation(&psi) + 1e-12);
        }
    }

    #[test]
    fn superlevel_examples() {
        let f = LatentField::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(superlevel_set(&f, 0.5).unwrap().len(), 4);
        assert!(superlevel_set(&f, 5.0).unwrap().is_empty());
        assert!(superlevel_set(&f, 0.0).is_err());
        // monotone in t
        let a = superlevel_set(&f, 1.5).unwrap();
        let b = superlevel_set(&f, 2.5).unwrap();
        assert!(b.iter().all(|s| a.contains(s)));
    }

    #[test]
    fn superlevel_sandwich() {
        let grid = GridSpec::new(3, 3).unwrap();
        let plan = build_plan(&grid, 1.0).unwrap();
        let mut rng = RandomStream::new(53, 0).rng();
        let gamma = 0.6;
        for _ in 0..10_000 {
            let psi = sample_gff_spectral(&plan, &mut rng);
            let h = random_positive_field(3, 3, &mut rng);
            let xi = samplewise_gate(&psi, gamma, 1.0);
            let gated = LatentField::new(
                3,
                3,
                h.values().iter().zip(xi.values().values()).map(|(a, b)| a * b).collect(),
            )
            .unwrap();
            let eta = xi.values().values().iter().map(|v| v.ln().abs()).fold(0.0f64, f64::max);
            for t in [0.5, 1.0, 2.0] {
                let inner = superlevel_set(&h, t * eta.exp()).unwrap();
                let mid = superlevel_set(&gated, t).unwrap();
                let outer = superlevel_set(&h, t * (-eta).exp()).unwrap();
                assert!(inner.iter().all(|s| mid.contains(s)));
                assert!(mid.iter().all(|s| outer.contains(s)));
            }
        }
    }

    #[test]
    fn betti_examples() {
        let g = CycleGraph::new(vec![1.0; 4]).unwrap();
        assert_eq!(betti_numbers_cycle(&g, &[true; 4]).unwrap(), (1, 1));
        assert_eq!(betti_numbers_cycle(&g, &[false, true, true, true]).unwrap(), (1, 0));
        assert_eq!(betti_numbers_cycle(&g, &[false, true, false, true]).unwrap(), (2, 0));
        assert_eq!(betti_numbers_cycle(&g, &[false; 4]).unwrap(), (0, 0));
        assert!(CycleGraph::new(vec![1.0, 2.0]).is_err());
        assert!(betti_numbers_cycle(&g, &[true; 3]).is_err());

        // β₁ = 1 iff all kept, over every subset of C_5
        let g5 = CycleGraph::new(vec![2.0; 5]).unwrap();
        for bits in 0u32..32 {
            let kept: Vec<bool> = (0..5).map(|k| bits >> k & 1 == 1).collect();
            let (_, b1) = betti_numbers_cycle(&g5, &kept).unwrap();
            assert_eq!(b1 == 1, bits == 31);
        }
    }
}
