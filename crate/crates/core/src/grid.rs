//! Dirichlet grid geometry: Laplacians, energies, Green kernel, spectrum.
//!
//! The interior domain is U = {1..H}×{1..W}, surrounded by an auxiliary
//! Dirichlet boundary ring on which every field is extended by zero. The
//! Dirichlet Laplacian acts as
//!
//! ```text
//! (L_U φ)(x) = Σ_{y ~ x} c_xy (φ(x) − φ̄(y)),
//! ```
//!
//! summing over the 4-neighbor edge set of the extended grid, and is symmetric
//! positive definite. The intrinsic Laplacian L_int keeps interior-interior
//! edges only and annihilates constants.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::LatentField;

/// An interior site, 1-based: i ∈ 1..=H, j ∈ 1..=W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

impl Site {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// A point of the extended grid {0..H+1}×{0..W+1}.
type Point = (usize, usize);

fn edge_key(a: Point, b: Point) -> (Point, Point) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The H×W interior grid with auxiliary Dirichlet boundary, optional positive
/// edge weights, and optional mass term μ.
#[derive(Debug, Clone)]
pub struct GridSpec {
    height: usize,
    width: usize,
    mass: f64,
    edge_weights: HashMap<(Point, Point), f64>,
}

impl GridSpec {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be >= 1".into()));
        }
        Ok(Self { height, width, mass: 0.0, edge_weights: HashMap::new() })
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass >= 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be >= 0, got {mass}")));
        }
        self.mass = mass;
        Ok(self)
    }

    /// Set the weight of one 4-neighbor edge of the extended grid. At least
    /// one endpoint must be interior.
    pub fn with_edge_weight(mut self, a: (usize, usize), b: (usize, usize), c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("edge weight must be > 0, got {c}")));
        }
        let adjacent = (a.0.abs_diff(b.0) + a.1.abs_diff(b.1)) == 1;
        let in_extended =
            |p: (usize, usize)| p.0 <= self.height + 1 && p.1 <= self.width + 1;
        let interior = |p: (usize, usize)| {
            p.0 >= 1 && p.0 <= self.height && p.1 >= 1 && p.1 <= self.width
        };
        if !adjacent || !in_extended(a) || !in_extended(b) || !(interior(a) || interior(b)) {
            return Err(Error::InvalidParameter(format!(
                "({},{})-({},{}) is not an edge of the extended grid with an interior endpoint",
                a.0, a.1, b.0, b.1
            )));
        }
        self.edge_weights.insert(edge_key(a, b), c);
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// n = |U|.
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn is_weighted(&self) -> bool {
        !self.edge_weights.is_empty()
    }

    pub fn contains(&self, site: Site) -> bool {
        site.i >= 1 && site.i <= self.height && site.j >= 1 && site.j <= self.width
    }

    pub fn check_site(&self, site: Site) -> Result<()> {
        if self.contains(site) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange(format!(
                "site ({},{}) outside the {}x{} interior",
                site.i, site.j, self.height, self.width
            )))
        }
    }

    pub fn check_field(&self, field: &LatentField) -> Result<()> {
        if field.height() != self.height || field.width() != self.width {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("{}x{}", field.height(), field.width()),
            });
        }
        Ok(())
    }

    /// Row-major linear index of an interior site.
    pub fn index_of(&self, site: Site) -> usize {
        (site.i - 1) * self.width + (site.j - 1)
    }

    pub fn site_of(&self, index: usize) -> Site {
        Site::new(index / self.width + 1, index % self.width + 1)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (1..=self.height).flat_map(move |i| (1..=self.width).map(move |j| Site::new(i, j)))
    }

    fn weight(&self, a: Point, b: Point) -> f64 {
        *self.edge_weights.get(&edge_key(a, b)).unwrap_or(&1.0)
    }

    /// The four extended-grid neighbors of an interior site.
    fn extended_neighbors(site: Site) -> [Point; 4] {
        let (i, j) = (site.i, site.j);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
    }

    fn is_interior_point(&self, p: Point) -> bool {
        p.0 >= 1 && p.0 <= self.height && p.1 >= 1 && p.1 <= self.width
    }

    /// Applies (L_U + μI) to φ with zero extension to the auxiliary boundary.
    pub fn apply_dirichlet_laplacian(&self, phi: &LatentField) -> Result<LatentField> {
        self.check_field(phi)?;
        let mut out = LatentField::zeros(self.height, self.width);
        for site in self.sites() {
            let px = phi.get(site);
            let mut acc = self.mass * px;
            for nb in Self::extended_neighbors(site) {
                let pn = if self.is_interior_point(nb) {
                    phi.get(Site::new(nb.0, nb.1))
                } else {
                    0.0
                };
                acc += self.weight((site.i, site.j), nb) * (px - pn);
            }
            out.set(site, acc);
        }
        Ok(out)
    }

    /// Dirichlet energy ½⟨φ, L_U φ⟩ = ½ Σ_edges c_xy (φ̄(x) − φ̄(y))², with zero
    /// boundary extension. Does not include the mass term.
    pub fn dirichlet_energy(&self, phi: &LatentField) -> Result<f64> {
        self.check_field(phi)?;
        let mut acc = 0.0;
        for site in self.sites() {
            let px = phi.get(site);
            for nb in Self::extended_neighbors(site) {
                let c = self.weight((site.i, site.j), nb);
                if self.is_interior_point(nb) {
                    // count each interior-interior edge once
                    if nb > (site.i, site.j) {
                        let d = px - phi.get(Site::new(nb.0, nb.1));
                        acc += 0.5 * c * d * d;
                    }
                } else {
                    acc += 0.5 * c * px * px;
                }
            }
        }
        Ok(acc)
    }

    /// Intrinsic energy ½ Σ_{interior edges} c_xy (f(x) − f(y))²; invariant
    /// under adding constants.
    pub fn intrinsic_energy(&self, f: &LatentField) -> Result<f64> {
        self.check_field(f)?;
        let mut acc = 0.0;
        for site in self.sites() {
            let fx = f.get(site);
            for nb in Self::extended_neighbors(site) {
                if self.is_interior_point(nb) && nb > (site.i, site.j) {
                    let d = fx - f.get(Site::new(nb.0, nb.1));
                    acc += 0.5 * self.weight((site.i, site.j), nb) * d * d;
                }
            }
        }
        Ok(acc)
    }

    /// Intrinsic weighted degree d_x^int = Σ over interior neighbors y of c_xy.
    pub fn intrinsic_degree(&self, x: Site) -> Result<f64> {
        self.check_site(x)?;
        let mut acc = 0.0;
        for nb in Self::extended_neighbors(x) {
            if self.is_interior_point(nb) {
                acc += self.weight((x.i, x.j), nb);
            }
        }
        Ok(acc)
    }

    /// Closed-form Dirichlet eigenvalue λ_{k,ℓ} + μ of the unweighted operator.
    pub fn dirichlet_eigenvalue(&self, k: usize, l: usize) -> Result<f64> {
        if self.is_weighted() {
            return Err(Error::UnsupportedOperator(
                "spectral closed form requires the unweighted Laplacian".into(),
            ));
        }
        if k < 1 || k > self.height || l < 1 || l > self.width {
            return Err(Error::IndexOutOfRange(format!(
                "mode ({k},{l}) outside 1..={} x 1..={}",
                self.height, self.width
            )));
        }
        let h = self.height as f64;
        let w = self.width as f64;
        let sk = (std::f64::consts::PI * k as f64 / (2.0 * (h + 1.0))).sin();
        let sl = (std::f64::consts::PI * l as f64 / (2.0 * (w + 1.0))).sin();
        Ok(4.0 * sk * sk + 4.0 * sl * sl + self.mass)
    }

    /// Orthonormal sine eigenbasis value ẽ_{k,ℓ}(i,j).
    pub fn eigenbasis(&self, k: usize, l: usize, site: Site) -> f64 {
        let h = self.height as f64;
        let w = self.width as f64;
        let norm = 2.0 / ((h + 1.0) * (w + 1.0)).sqrt();
        let a = (std::f64::consts::PI * (k * site.i) as f64 / (h + 1.0)).sin();
        let b = (std::f64::consts::PI * (l * site.j) as f64 / (w + 1.0)).sin();
        norm * a * b
    }

    /// Dense assembly of L_U + μI, row-major site indexing.
    pub fn dense_laplacian(&self) -> Result<DenseOperator> {
        let n = self.n();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for site in self.sites() {
            let r = self.index_of(site);
            let mut diag = self.mass;
            for nb in Self::extended_neighbors(site) {
                let c = self.weight((site.i, site.j), nb);
                diag += c;
                if self.is_interior_point(nb) {
                    let q = self.index_of(Site::new(nb.0, nb.1));
                    m[(r, q)] = -c;
                }
            }
            m[(r, r)] = diag;
        }
        DenseOperator::new(m)
    }

    /// Interior Laplacian L_int (no boundary term, no mass).
    pub fn interior_laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for site in self.sites() {
            let r = self.index_of(site);
            for nb in Self::extended_neighbors(site) {
                if self.is_interior_point(nb) {
                    let c = self.weight((site.i, site.j), nb);
                    let q = self.index_of(Site::new(nb.0, nb.1));
                    m[(r, r)] += c;
                    m[(r, q)] -= c;
                }
            }
        }
        m
    }

    /// Full Green matrix G = (L_U + μI)⁻¹: spectral synthesis on unweighted
    /// grids, dense SPD inversion otherwise.
    pub fn green_matrix(&self) -> Result<DMatrix<f64>> {
        if self.is_weighted() {
            return self.green_matrix_dense();
        }
        let n = self.n();
        let mut basis = DMatrix::<f64>::zeros(n, n);
        let mut inv_lambda = Vec::with_capacity(n);
        let mut col = 0;
        for k in 1..=self.height {
            for l in 1..=self.width {
                inv_lambda.push(1.0 / self.dirichlet_eigenvalue(k, l)?);
                for site in self.sites() {
                    basis[(self.index_of(site), col)] = self.eigenbasis(k, l, site);
                }
                col += 1;
            }
        }
        let scaled = {
            let mut b = basis.clone();
            for (c, inv) in inv_lambda.iter().enumerate() {
                b.column_mut(c).scale_mut(*inv);
            }
            b
        };
        Ok(&scaled * basis.transpose())
    }

    /// Green matrix by dense SPD factorization (the oracle path).
    pub fn green_matrix_dense(&self) -> Result<DMatrix<f64>> {
        let op = self.dense_laplacian()?;
        op.inverse()
    }

    pub fn green_kernel(&self, x: Site, y: Site) -> Result<f64> {
        self.check_site(x)?;
        self.check_site(y)?;
        let g = self.green_matrix()?;
        Ok(g[(self.index_of(x), self.index_of(y))])
    }

    /// Green metric R_G(x,y) = G(x,x) + G(y,y) − 2G(x,y).
    pub fn green_metric(&self, x: Site, y: Site) -> Result<f64> {
        self.check_site(x)?;
        self.check_site(y)?;
        let g = self.green_matrix()?;
        Ok(green_metric_from(&g, self.index_of(x), self.index_of(y)))
    }

    /// Variance map v(x) = β⁻¹ G(x,x).
    pub fn variance_map(&self, beta: f64) -> Result<LatentField> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if self.is_weighted() {
            let g = self.green_matrix_dense()?;
            let vals = (0..self.n()).map(|r| g[(r, r)] / beta).collect();
            return LatentField::new(self.height, self.width, vals);
        }
        self.variance_map_spectral(beta)
    }

    // v(i,j) = β⁻¹ Σ_{k,ℓ} ẽ_{kℓ}(i,j)² / λ_{kℓ}, evaluated in O(n(H+W))
    // by splitting the row/column factors.
    fn variance_map_spectral(&self, beta: f64) -> Result<LatentField> {
        let (h, w) = (self.height, self.width);
        let hf = h as f64;
        let wf = w as f64;
        let row_eig: Vec<f64> = (1..=h)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / (2.0 * (hf + 1.0))).sin();
                4.0 * s * s
            })
            .collect();
        let col_eig: Vec<f64> = (1..=w)
            .map(|l| {
                let s = (std::f64::consts::PI * l as f64 / (2.0 * (wf + 1.0))).sin();
                4.0 * s * s
            })
            .collect();
        let sin_row: Vec<Vec<f64>> = (1..=h)
            .map(|i| {
                (1..=h)
                    .map(|k| (std::f64::consts::PI * (k * i) as f64 / (hf + 1.0)).sin())
                    .collect()
            })
            .collect();
        let sin_col: Vec<Vec<f64>> = (1..=w)
            .map(|j| {
                (1..=w)
                    .map(|l| (std::f64::consts::PI * (l * j) as f64 / (wf + 1.0)).sin())
                    .collect()
            })
            .collect();
        let norm_sq = 4.0 / ((hf + 1.0) * (wf + 1.0));
        // inner[k][j] = Σ_ℓ sin²(πℓj/(W+1)) / (λ_k + λ_ℓ + μ)
        let mut inner = vec![vec![0.0f64; w]; h];
        for (k, ik) in inner.iter_mut().enumerate() {
            for (j, ikj) in ik.iter_mut().enumerate() {
                let mut acc = 0.0;
                for l in 0..w {
                    let s = sin_col[j][l];
                    acc += s * s / (row_eig[k] + col_eig[l] + self.mass);
                }
                *ikj = acc;
            }
        }
        let mut values = vec![0.0f64; h * w];
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for k in 0..h {
                    let s = sin_row[i][k];
                    acc += s * s * inner[k][j];
                }
                values[i * w + j] = norm_sq * acc / beta;
            }
        }
        LatentField::new(h, w, values)
    }

    /// Expected intrinsic roughness ε_int = ½ Tr(L_int C) of a log-field with
    /// covariance C.
    pub fn epsilon_intrinsic(&self, c: &DMatrix<f64>) -> Result<f64> {
        let n = self.n();
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                actual: format!("{}x{}", c.nrows(), c.ncols()),
            });
        }
        let l_int = self.interior_laplacian();
        Ok(0.5 * (l_int * c).trace())
    }
}

pub fn green_metric_from(g: &DMatrix<f64>, ix: usize, iy: usize) -> f64 {
    g[(ix, ix)] + g[(iy, iy)] - 2.0 * g[(ix, iy)]
}

/// A symmetric positive definite operator on the interior sites, row-major
/// indexed. Symmetry and positive definiteness are checked on construction.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                actual: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let scale = matrix.amax().max(1.0);
        for r in 0..matrix.nrows() {
            for c in 0..r {
                if (matrix[(r, c)] - matrix[(c, r)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({r},{c})"
                    )));
                }
            }
        }
        if matrix.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Cholesky factorization failed".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.matrix
            .clone()
            .cholesky()
            .map(|ch| ch.inverse())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
    }
}
