//! Orthonormal bases of L²(ℝ) with derivative evaluators and quadrature.
//!
//! Two families are provided: physicists' Hermite functions (smooth, fast
//! decay, exact recurrences) and the Lemarié-Meyer wavelet system built
//! from a compactly supported frequency bell. Each basis carries a
//! composite Gauss-Legendre grid that realizes the L² inner product
//! ⟨f,g⟩ = ∫ f ḡ at truncation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Default ‖Gram − I‖_max tolerance accepted at basis construction.
pub const DEFAULT_GRAM_TOL: f64 = 1e-6;

/// Tail mass outside the grid window tolerated per stored function.
pub const TAIL_MASS_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on the Legendre
/// recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-like initial guess, roots ordered descending.
        let mut x = (PI * (4.0 * k as f64 + 3.0) / (4.0 * n as f64 + 2.0)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre P_n and its derivative at x.
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending nodes.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Composite Gauss-Legendre grid over [-L, L].
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    halfwidth: f64,
    panels_per_unit: usize,
    points_per_panel: usize,
}

impl QuadratureGrid {
    /// `halfwidth` is rounded up to an integer so the panel count is exact.
    pub fn composite(
        halfwidth: f64,
        panels_per_unit: usize,
        points_per_panel: usize,
    ) -> Result<Self> {
        if halfwidth <= 0.0 || panels_per_unit == 0 || points_per_panel == 0 {
            return Err(Error::invalid("quadrature grid parameters must be positive"));
        }
        let l = halfwidth.ceil();
        let panels = (2.0 * l).round() as usize * panels_per_unit;
        let width = 2.0 * l / panels as f64;
        let (xs, ws) = gauss_legendre(points_per_panel);
        let mut nodes = Vec::with_capacity(panels * points_per_panel);
        let mut weights = Vec::with_capacity(panels * points_per_panel);
        for p in 0..panels {
            let a = -l + p as f64 * width;
            let mid = a + 0.5 * width;
            let half = 0.5 * width;
            for (x, w) in xs.iter().zip(&ws) {
                nodes.push(mid + half * x);
                weights.push(w * half);
            }
        }
        Ok(QuadratureGrid {
            nodes,
            weights,
            halfwidth: l,
            panels_per_unit,
            points_per_panel,
        })
    }

    /// Default rule: 8 panels per unit length, 10 points per panel.
    pub fn default_for(halfwidth: f64) -> Result<Self> {
        QuadratureGrid::composite(halfwidth, 8, 10)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn panels_per_unit(&self) -> usize {
        self.panels_per_unit
    }

    pub fn points_per_panel(&self) -> usize {
        self.points_per_panel
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ⟨f, g⟩ over the grid for sampled values.
    pub fn inner_product(&self, f: &[C64], g: &[C64]) -> C64 {
        assert_eq!(f.len(), self.nodes.len());
        assert_eq!(g.len(), self.nodes.len());
        let mut acc = C64::new(0.0, 0.0);
        for ((a, b), w) in f.iter().zip(g).zip(&self.weights) {
            acc += a * b.conj() * *w;
        }
        acc
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        assert_eq!(f.len(), self.nodes.len());
        f.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }
}

// ---------------------------------------------------------------------------
// Meyer bell
// ---------------------------------------------------------------------------

/// The fixed transition profile ν(x) = x⁴(35 − 84x + 70x² − 20x³),
/// clamped to [0, 1]; satisfies ν(x) + ν(1−x) = 1.
pub fn meyer_nu(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * x * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x)
    }
}

/// Frequency bell supported on [lower, upper] ⊂ (0, ∞): a sin-profile ramp
/// up, an optional plateau, and a cos-profile ramp down. For the standard
/// Meyer band (e, 4e) the ramps join at 2e with no plateau and b² satisfies
/// the partition condition b²(ξ) + b²(2ξ) = 1 on the up-ramp.
#[derive(Debug, Clone)]
pub struct BellFunction {
    lower: f64,
    up_end: f64,
    down_start: f64,
    upper: f64,
}

/// The standard Meyer band edges (2π/3, 8π/3).
pub fn standard_meyer_edges() -> (f64, f64) {
    (2.0 * PI / 3.0, 8.0 * PI / 3.0)
}

pub fn build_meyer_bell(edge_low: f64, edge_high: f64) -> Result<BellFunction> {
    if !(edge_low > 0.0 && edge_high > edge_low) {
        return Err(Error::invalid(format!(
            "bell edges must satisfy 0 < low < high, got ({edge_low}, {edge_high})"
        )));
    }
    let (up_end, down_start) = if edge_high >= 4.0 * edge_low {
        (2.0 * edge_low, edge_high / 2.0)
    } else {
        // Band too narrow for the dyadic join; put the peak at the
        // geometric mean so the ramps stay inside the band.
        let m = (edge_low * edge_high).sqrt();
        (m, m)
    };
    Ok(BellFunction {
        lower: edge_low,
        up_end,
        down_start,
        upper: edge_high,
    })
}

impl BellFunction {
    pub fn eval(&self, xi: f64) -> f64 {
        if xi <= self.lower || xi >= self.upper {
            0.0
        } else if xi < self.up_end {
            (0.5 * PI * meyer_nu((xi - self.lower) / (self.up_end - self.lower))).sin()
        } else if xi <= self.down_start {
            1.0
        } else {
            (0.5 * PI * meyer_nu((xi - self.down_start) / (self.upper - self.down_start))).cos()
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        [self.lower, self.up_end, self.down_start, self.upper]
    }
}

// ---------------------------------------------------------------------------
// Mother wavelet synthesis
// ---------------------------------------------------------------------------

/// Internal oversampling of the synthesized time grid: the time step is
/// π/(OVERSAMPLE · upper band edge), fine enough that 12-point local
/// interpolation of ψ^{(i)} stays below ~1e-13 for i ≤ 4.
const OVERSAMPLE: f64 = 32.0;

/// Stencil width for barycentric interpolation on the synthesis table.
const STENCIL: usize = 12;

/// Default synthesis length. Covers |s| up to ~1500 for the standard band,
/// enough for the dyadic spreads of a few dozen enumerated members.
pub const DEFAULT_FFT_SIZE: usize = 1 << 18;

/// The synthesized Lemarié-Meyer mother wavelet with tabulated derivatives.
#[derive(Debug)]
pub struct MotherWavelet {
    bell: BellFunction,
    i_max: usize,
    step: f64,
    tables: Vec<Vec<C64>>,
    sup_norms: Vec<f64>,
    freq_nodes: Vec<f64>,
    freq_weights: Vec<f64>,
    fft_size: usize,
}

/// Synthesize ψ^{(i)} for i ≤ i_max from the frequency-domain definition
/// (1/2π)∫ e^{iξ(1/2+s)} sgn(ξ) b(|ξ|) (iξ)^i dξ, discretized on `fft_size`
/// frequency samples and inverted by FFT onto a uniform time table.
pub fn synthesize_mother_wavelet(
    bell: &BellFunction,
    fft_size: usize,
    i_max: usize,
) -> Result<Arc<MotherWavelet>> {
    if fft_size < 1024 || !fft_size.is_power_of_two() {
        return Err(Error::invalid(format!(
            "fft_size must be a power of two >= 1024, got {fft_size}"
        )));
    }
    let (lo, hi) = bell.support();
    let step = PI / (OVERSAMPLE * hi);
    let span = fft_size as f64 * step;
    // The covered window must resolve at least a few oscillations of the
    // band center, otherwise the table is useless.
    if span < 16.0 * 2.0 * PI / (hi - lo) {
        return Err(Error::Resolution(format!(
            "fft_size {fft_size} covers only |s| <= {:.2}, too small to resolve the band ({lo:.3}, {hi:.3})",
            span / 2.0
        )));
    }

    let m = fft_size;
    let d_xi = 2.0 * PI / span;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(m);

    let mut tables = Vec::with_capacity(i_max + 1);
    let mut sup_norms = Vec::with_capacity(i_max + 1);
    for i in 0..=i_max {
        let mut buf: Vec<C64> = (0..m)
            .map(|k| {
                let xi = (k as f64 - m as f64 / 2.0) * d_xi;
                let b = bell.eval(xi.abs());
                if b == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let sgn = if xi >= 0.0 { 1.0 } else { -1.0 };
                let spectral = C64::from_polar(sgn * b, 0.5 * xi);
                let deriv = C64::new(0.0, xi).powu(i as u32);
                let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
                spectral * deriv * alt
            })
            .collect();
        fft.process(&mut buf);
        let scale = d_xi / (2.0 * PI);
        let table: Vec<C64> = buf
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let alt = if j % 2 == 0 { 1.0 } else { -1.0 };
                v * scale * alt
            })
            .collect();
        let sup = table.iter().map(|v| v.norm()).fold(0.0, f64::max);
        tables.push(table);
        sup_norms.push(sup);
    }

    // Gauss-Legendre rule over the band for points outside the table.
    let (x, w) = gauss_legendre(4096);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let freq_nodes: Vec<f64> = x.iter().map(|t| mid + half * t).collect();
    let freq_weights: Vec<f64> = w.iter().map(|t| t * half).collect();

    Ok(Arc::new(MotherWavelet {
        bell: bell.clone(),
        i_max,
        step,
        tables,
        sup_norms,
        freq_nodes,
        freq_weights,
        fft_size,
    }))
}

/// Barycentric weights for an equispaced stencil: w_k = (-1)^k C(n-1, k).
fn equispaced_bary_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0f64; n];
    for k in 1..n {
        w[k] = -w[k - 1] * (n - k) as f64 / k as f64;
    }
    w
}

impl MotherWavelet {
    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn bell(&self) -> &BellFunction {
        &self.bell
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sup_norm(&self, i: usize) -> f64 {
        self.sup_norms[i]
    }

    /// ψ^{(i)}(s). Table interpolation inside the synthesis window, direct
    /// band quadrature outside it.
    pub fn eval(&self, s: f64, i: usize) -> C64 {
        assert!(i <= self.i_max, "derivative order exceeds i_max");
        let m = self.fft_size;
        let t = s / self.step + m as f64 / 2.0;
        let j0 = t.floor() as isize - (STENCIL as isize / 2 - 1);
        if j0 < 0 || (j0 as usize) + STENCIL > m {
            return self.eval_by_quadrature(s, i);
        }
        let j0 = j0 as usize;
        let local = t - j0 as f64;
        let table = &self.tables[i];
        // Exact hit on a node.
        let nearest = local.round();
        if (local - nearest).abs() < 1e-12 && (0.0..STENCIL as f64).contains(&nearest) {
            return table[j0 + nearest as usize];
        }
        let bw = equispaced_bary_weights(STENCIL);
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for k in 0..STENCIL {
            let c = bw[k] / (local - k as f64);
            num += table[j0 + k] * c;
            den += c;
        }
        num / den
    }

    fn eval_by_quadrature(&self, s: f64, i: usize) -> C64 {
        // (1/2π) ∫_band b(ξ) [(iξ)^i e^{iξ(s+1/2)} − (−iξ)^i e^{−iξ(s+1/2)}] dξ
        let mut acc = C64::new(0.0, 0.0);
        let arg = s + 0.5;
        for (&xi, &w) in self.freq_nodes.iter().zip(&self.freq_weights) {
            let b = self.bell.eval(xi);
            if b == 0.0 {
                continue;
            }
            let plus = C64::new(0.0, xi).powu(i as u32) * C64::from_polar(1.0, xi * arg);
            let minus = C64::new(0.0, -xi).powu(i as u32) * C64::from_polar(1.0, -xi * arg);
            acc += (plus - minus) * b * w;
        }
        acc / (2.0 * PI)
    }

    /// L² norm computed on the synthesis table (diagnostic).
    pub fn l2_norm(&self) -> f64 {
        (self.tables[0].iter().map(|v| v.norm_sqr()).sum::<f64>() * self.step).sqrt()
    }

    /// Smallest half-width X such that the tabulated mass outside [-X, X]
    /// is below `eps`. None if the table cannot certify it.
    pub fn tail_halfwidth(&self, eps: f64) -> Option<f64> {
        let m = self.fft_size;
        let t0 = &self.tables[0];
        let mut acc = 0.0;
        let mut j_left = 0usize;
        let mut j_right = m - 1;
        loop {
            if j_left >= j_right {
                return None;
            }
            let add = (t0[j_left].norm_sqr() + t0[j_right].norm_sqr()) * self.step;
            if acc + add > eps {
                let x = (m as f64 / 2.0 - j_left as f64) * self.step;
                return Some(x.max(1.0));
            }
            acc += add;
            j_left += 1;
            j_right -= 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Basis functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Hermite,
    Wavelet,
}

/// Index data for a basis member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionIndex {
    Hermite { n: usize },
    Wavelet { alpha: i32, beta: i32 },
}

impl std::fmt::Display for FunctionIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionIndex::Hermite { n } => write!(f, "h{n}"),
            FunctionIndex::Wavelet { alpha, beta } => write!(f, "psi({alpha},{beta})"),
        }
    }
}

#[derive(Debug, Clone)]
enum Evaluator {
    Hermite {
        n: usize,
    },
    Wavelet {
        alpha: i32,
        beta: i32,
        mother: Arc<MotherWavelet>,
    },
}

/// One basis function with a derivative evaluator and sup-norm bounds.
#[derive(Debug, Clone)]
pub struct BasisFunction {
    pub index: FunctionIndex,
    evaluator: Evaluator,
    /// N_n in the product bound ‖[u_n]^{(i)}‖_∞ ≤ N_n D_i.
    pub n_factor: f64,
    /// N_n · D_i for i = 0..=i_max.
    pub derivative_bounds: Vec<f64>,
}

/// Physicists' Hermite functions h_0..h_{n_max} at s by the stable
/// three-term recurrence h_{k+1} = √(2/(k+1)) s h_k − √(k/(k+1)) h_{k-1}.
pub fn hermite_values(n_max: usize, s: f64) -> Vec<f64> {
    let mut h = vec![0.0; n_max + 1];
    let h0 = (-0.5 * s * s).exp() / PI.powf(0.25);
    h[0] = h0;
    if n_max >= 1 {
        h[1] = 2.0f64.sqrt() * s * h0;
    }
    for k in 1..n_max {
        let kf = k as f64;
        h[k + 1] = (2.0 / (kf + 1.0)).sqrt() * s * h[k] - (kf / (kf + 1.0)).sqrt() * h[k - 1];
    }
    h
}

/// i-th derivative of h_n at s via the ladder
/// h_n' = √(n/2) h_{n-1} − √((n+1)/2) h_{n+1}.
pub fn hermite_derivative(n: usize, i: usize, s: f64) -> f64 {
    let top = n + i;
    let h = hermite_values(top, s);
    let mut c = vec![0.0; top + 2];
    c[n] = 1.0;
    for _ in 0..i {
        let mut next = vec![0.0; top + 2];
        for k in 0..=top {
            if c[k] == 0.0 {
                continue;
            }
            if k >= 1 {
                next[k - 1] += (k as f64 / 2.0).sqrt() * c[k];
            }
            next[k + 1] -= ((k as f64 + 1.0) / 2.0).sqrt() * c[k];
        }
        c = next;
    }
    (0..=top).map(|k| c[k] * h[k]).sum()
}

impl BasisFunction {
    /// Value of [u_n]^{(i)}(s).
    pub fn eval(&self, s: f64, i: usize) -> C64 {
        match &self.evaluator {
            Evaluator::Hermite { n } => C64::new(hermite_derivative(*n, i, s), 0.0),
            Evaluator::Wavelet {
                alpha,
                beta,
                mother,
            } => {
                let a = *alpha as f64;
                let scale = 2.0f64.powf(a * (0.5 + i as f64));
                mother.eval(2.0f64.powf(a) * s - *beta as f64, i) * scale
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Orthonormal basis
// ---------------------------------------------------------------------------

/// A finite orthonormal family with quadrature grid and tabulated values
/// of every function and derivative order on the grid.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub kind: BasisKind,
    pub id: String,
    pub functions: Vec<BasisFunction>,
    pub grid: QuadratureGrid,
    pub i_max: usize,
    /// tables[i][n] = values of [u_n]^{(i)} on the grid nodes.
    tables: Vec<Vec<Vec<C64>>>,
    /// measured sup |[u_n]^{(i)}| over the grid.
    measured_sup: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    fn build(
        kind: BasisKind,
        id: String,
        functions: Vec<BasisFunction>,
        grid: QuadratureGrid,
        i_max: usize,
    ) -> Self {
        let nodes = grid.nodes().to_vec();
        let tables: Vec<Vec<Vec<C64>>> = (0..=i_max)
            .map(|i| {
                functions
                    .par_iter()
                    .map(|f| nodes.iter().map(|&s| f.eval(s, i)).collect())
                    .collect()
            })
            .collect();
        let measured_sup: Vec<Vec<f64>> = (0..functions.len())
            .map(|n| {
                (0..=i_max)
                    .map(|i| tables[i][n].iter().map(|v| v.norm()).fold(0.0, f64::max))
                    .collect()
            })
            .collect();
        OrthonormalBasis {
            kind,
            id,
            functions,
            grid,
            i_max,
            tables,
            measured_sup,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Tabulated values of [u_n]^{(i)} on the grid.
    pub fn table(&self, i: usize, n: usize) -> &[C64] {
        &self.tables[i][n]
    }

    pub fn measured_sup(&self, n: usize, i: usize) -> f64 {
        self.measured_sup[n][i]
    }

    pub fn eval(&self, n: usize, s: f64, i: usize) -> C64 {
        self.functions[n].eval(s, i)
    }

    /// Σ_n c_n [u_n]^{(i)}(s).
    pub fn eval_combination(&self, coeffs: &[C64], s: f64, i: usize) -> C64 {
        assert_eq!(coeffs.len(), self.len());
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(n, c)| c * self.eval(n, s, i))
            .sum()
    }

    /// Values of Σ_n c_n [u_n]^{(i)} on the whole grid, from the tables.
    pub fn combination_on_grid(&self, coeffs: &[C64], i: usize) -> Vec<C64> {
        assert_eq!(coeffs.len(), self.len());
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (n, c) in coeffs.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.tables[i][n]) {
                *o += c * v;
            }
        }
        out
    }

    /// Gram matrix G_{mn} = Σ_k w_k u_m(s_k) conj(u_n(s_k)).
    pub fn gram_matrix(&self) -> crate::linalg::CMatrix {
        let n = self.len();
        let w = self.grid.weights();
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|m| {
                let um = &self.tables[0][m];
                (0..n)
                    .map(|j| {
                        let un = &self.tables[0][j];
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..w.len() {
                            acc += um[k] * un[k].conj() * w[k];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        crate::linalg::CMatrix::from_rows(&rows)
    }

    pub fn gram_deviation(&self) -> f64 {
        self.gram_matrix().max_deviation_from_identity()
    }
}

/// Gram matrix of a basis (operation-list alias of
/// [`OrthonormalBasis::gram_matrix`]).
pub fn gram_matrix(basis: &OrthonormalBasis) -> crate::linalg::CMatrix {
    basis.gram_matrix()
}

// ---------------------------------------------------------------------------
// Hermite basis construction
// ---------------------------------------------------------------------------

/// Half-width such that the first `count` Hermite functions have tail mass
/// far below TAIL_MASS_TOL: turning point of the top function plus margin.
pub fn hermite_halfwidth(count: usize, i_max: usize) -> f64 {
    ((2.0 * (count + i_max) as f64 + 1.0).sqrt() + 8.0).ceil()
}

pub fn build_hermite_basis(
    count: usize,
    i_max: usize,
    grid: QuadratureGrid,
) -> Result<OrthonormalBasis> {
    if count == 0 {
        return Err(Error::invalid("basis size must be at least 1"));
    }
    // The top function must have negligible mass outside the window; its
    // grid norm is the direct witness.
    let top = count - 1;
    let norm_sq: f64 = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .map(|(&s, &w)| {
            let h = hermite_values(top, s);
            h[top] * h[top] * w
        })
        .sum();
    if (norm_sq - 1.0).abs() > 10.0 * TAIL_MASS_TOL {
        return Err(Error::Resolution(format!(
            "grid half-width {} too narrow for h_{top}: ||h||^2 = {norm_sq} on the window",
            grid.halfwidth()
        )));
    }

    let mut functions = Vec::with_capacity(count);
    for n in 0..count {
        // Measured sup norms stand in for the N_n·D_i table; Hermite
        // functions have no dyadic structure to exploit.
        let mut probe_sup = vec![0.0f64; i_max + 1];
        for &s in grid.nodes() {
            for (i, sup) in probe_sup.iter_mut().enumerate() {
                *sup = sup.max(hermite_derivative(n, i, s).abs());
            }
        }
        let n_factor = probe_sup[0].max(1e-300);
        functions.push(BasisFunction {
            index: FunctionIndex::Hermite { n },
            evaluator: Evaluator::Hermite { n },
            n_factor,
            derivative_bounds: probe_sup,
        });
    }
    let id = format!("hermite-{count}-imax{i_max}-L{}", grid.halfwidth());
    Ok(OrthonormalBasis::build(
        BasisKind::Hermite,
        id,
        functions,
        grid,
        i_max,
    ))
}

/// Hermite basis over the default grid for `count` functions.
pub fn hermite_basis(count: usize, i_max: usize) -> Result<OrthonormalBasis> {
    let grid = QuadratureGrid::default_for(hermite_halfwidth(count, i_max))?;
    build_hermite_basis(count, i_max, grid)
}

// ---------------------------------------------------------------------------
// Wavelet basis enumeration
// ---------------------------------------------------------------------------

/// Zigzag order 0, -1, 1, -2, 2, ... used for both indices.
fn zigzag_rank(v: i32) -> u32 {
    if v < 0 {
        (-v as u32) * 2 - 1
    } else {
        v as u32 * 2
    }
}

/// Enumerate (α, β) pairs diagonally by max(|α|, |β|), then by zigzag rank
/// of α, then of β.
pub fn wavelet_index_order(count: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::with_capacity(count);
    let mut ring = 0i32;
    while out.len() < count {
        let mut members: Vec<(i32, i32)> = Vec::new();
        for a in -ring..=ring {
            for b in -ring..=ring {
                if a.abs().max(b.abs()) == ring {
                    members.push((a, b));
                }
            }
        }
        members.sort_by_key(|&(a, b)| (zigzag_rank(a), zigzag_rank(b)));
        for m in members {
            if out.len() == count {
                break;
            }
            out.push(m);
        }
        ring += 1;
    }
    out
}

/// N_n per the dyadic case split: 2^{α²} for α > 0, 2^{α/2} for α ≤ 0.
pub fn wavelet_n_factor(alpha: i32) -> f64 {
    if alpha > 0 {
        2.0f64.powi(alpha * alpha)
    } else {
        2.0f64.powf(alpha as f64 / 2.0)
    }
}

pub fn enumerate_wavelet_basis(
    mother: &Arc<MotherWavelet>,
    count: usize,
    i_max: usize,
) -> Result<OrthonormalBasis> {
    if count == 0 {
        return Err(Error::invalid("basis size must be at least 1"));
    }
    if i_max > mother.i_max() {
        return Err(Error::invalid(format!(
            "basis i_max {i_max} exceeds mother wavelet i_max {}",
            mother.i_max()
        )));
    }
    let pairs = wavelet_index_order(count);

    // Window: every member must keep its tail mass below the shared budget.
    let per_fn_tol = TAIL_MASS_TOL / (2.0 * count as f64);
    let x0 = mother.tail_halfwidth(per_fn_tol).ok_or_else(|| {
        Error::Resolution(
            "synthesis table too short to certify the tail-mass budget; increase fft_size".into(),
        )
    })?;
    let mut halfwidth = 1.0f64;
    for &(a, b) in &pairs {
        let need = (x0 + b.abs() as f64) * 2.0f64.powf(-(a as f64));
        halfwidth = halfwidth.max(need);
    }
    let grid = QuadratureGrid::default_for(halfwidth)?;

    let di: Vec<f64> = (0..=i_max)
        .map(|i| 2.0f64.powf((i as f64 + 0.5).powi(2)) * mother.sup_norm(i))
        .collect();

    let functions: Vec<BasisFunction> = pairs
        .iter()
        .map(|&(alpha, beta)| {
            let n_factor = wavelet_n_factor(alpha);
            let derivative_bounds = di.iter().map(|d| n_factor * d).collect();
            BasisFunction {
                index: FunctionIndex::Wavelet { alpha, beta },
                evaluator: Evaluator::Wavelet {
                    alpha,
                    beta,
                    mother: Arc::clone(mother),
                },
                n_factor,
                derivative_bounds,
            }
        })
        .collect();

    let id = format!("meyer-{count}-imax{i_max}-L{}", grid.halfwidth());
    let basis = OrthonormalBasis::build(BasisKind::Wavelet, id, functions, grid, i_max);
    let dev = basis.gram_deviation();
    if dev > DEFAULT_GRAM_TOL {
        return Err(Error::NumericalFailure {
            what: format!("wavelet basis Gram deviation {dev:.3e} exceeds {DEFAULT_GRAM_TOL:.1e}"),
            iterations: 0,
        });
    }
    Ok(basis)
}

/// Convenience: standard Meyer bell, default synthesis, `count` members.
pub fn meyer_basis(count: usize, i_max: usize) -> Result<OrthonormalBasis> {
    let (lo, hi) = standard_meyer_edges();
    let bell = build_meyer_bell(lo, hi)?;
    let mother = synthesize_mother_wavelet(&bell, DEFAULT_FFT_SIZE, i_max)?;
    enumerate_wavelet_basis(&mother, count, i_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        // degree 19 exactness: ∫_{-1}^{1} t^18 dt = 2/19
        let int: f64 = x.iter().zip(&w).map(|(t, w)| t.powi(18) * w).sum();
        assert!((int - 2.0 / 19.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_weights_sum_to_width() {
        let g = QuadratureGrid::default_for(11.0).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 2.0 * g.halfwidth()).abs() < 1e-12);
        for k in 1..g.len() {
            assert!(g.nodes()[k] > g.nodes()[k - 1]);
        }
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn meyer_bell_standard_profile() {
        // Oracle: the profile formulas evaluated symbolically. ν(1/2) = 1/2
        // exactly, so the up-ramp midpoint value is sin(π/4); the peak value
        // 1 is attained where the ramps join, at twice the lower edge.
        let (lo, hi) = standard_meyer_edges();
        let b = build_meyer_bell(lo, hi).unwrap();
        assert_eq!(b.eval(0.0), 0.0);
        assert!((b.eval(4.0 * PI / 3.0) - 1.0).abs() < 1e-15);
        let expect_mid = (0.5 * PI * 0.5).sin();
        assert!((b.eval(PI) - expect_mid).abs() < 1e-15);
        // Partition condition b²(ξ) + b²(2ξ) = 1 on the up-ramp.
        for k in 0..20 {
            let xi = lo + (k as f64 + 0.5) / 20.0 * lo;
            let s = b.eval(xi).powi(2) + b.eval(2.0 * xi).powi(2);
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn meyer_bell_narrow_band_support() {
        let b = build_meyer_bell(1.0, 2.0).unwrap();
        assert_eq!(b.eval(0.0), 0.0);
        assert_eq!(b.eval(3.0), 0.0);
        assert!(b.eval(1.5) > 0.0);
        assert!(build_meyer_bell(2.0, 1.0).is_err());
        assert!(build_meyer_bell(0.0, 1.0).is_err());
    }

    #[test]
    fn bell_normalization_oracle() {
        // Plancherel: ‖ψ‖² = (1/π)∫_0^∞ b² dξ, and the profile symmetry
        // ν(x) + ν(1−x) = 1 forces ∫ b² = π. Verified by trapezoid sums.
        let (lo, hi) = standard_meyer_edges();
        let b = build_meyer_bell(lo, hi).unwrap();
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let xi = lo + k as f64 * h;
            let v = b.eval(xi).powi(2);
            acc += if k == 0 || k == n { 0.5 * v } else { v };
        }
        acc *= h;
        assert!((acc - PI).abs() < 1e-8);
    }

    #[test]
    fn hermite_values_basics() {
        // h_0(0) = π^{-1/4}
        let h = hermite_values(3, 0.0);
        assert!((h[0] - PI.powf(-0.25)).abs() < 1e-15);
        // odd functions vanish at 0
        assert!(h[1].abs() < 1e-16);
        assert!(h[3].abs() < 1e-16);
    }

    #[test]
    fn hermite_derivative_matches_finite_difference() {
        let eps = 1e-5;
        for n in [0usize, 1, 4, 9] {
            for &s in &[-1.3f64, 0.2, 2.7] {
                let fd = (hermite_derivative(n, 0, s + eps) - hermite_derivative(n, 0, s - eps))
                    / (2.0 * eps);
                let an = hermite_derivative(n, 1, s);
                assert!((fd - an).abs() < 1e-8 * (1.0 + an.abs()), "n={n} s={s}");
            }
        }
    }

    #[test]
    fn hermite_gram_is_identity() {
        let basis = hermite_basis(8, 2).unwrap();
        assert!(basis.gram_deviation() < 1e-10);
    }

    #[test]
    fn hermite_single_function_gram() {
        let basis = hermite_basis(1, 0).unwrap();
        let g = basis.gram_matrix();
        assert!((g[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hermite_narrow_grid_rejected() {
        let grid = QuadratureGrid::default_for(2.0).unwrap();
        assert!(matches!(
            build_hermite_basis(12, 1, grid),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn wavelet_enumeration_head() {
        let order = wavelet_index_order(10);
        assert_eq!(order[0], (0, 0));
        assert_eq!(order[1], (0, -1));
        assert_eq!(order[2], (0, 1));
        assert_eq!(order[3], (-1, 0));
        assert_eq!(order[4], (-1, -1));
        assert_eq!(order[5], (-1, 1));
        assert_eq!(order[6], (1, 0));
        assert_eq!(order[9], (0, -2));
    }

    #[test]
    fn wavelet_n_factor_case_split() {
        assert!((wavelet_n_factor(-2) - 2.0f64.powf(-1.0)).abs() < 1e-15);
        assert!((wavelet_n_factor(0) - 1.0).abs() < 1e-15);
        assert!((wavelet_n_factor(2) - 16.0).abs() < 1e-15);
    }
}
