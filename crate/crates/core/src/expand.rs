//! Truncated bilinear expansions of kernels, Carleman functions, and
//! operator images, with derivative orders.
//!
//! Everything is built from one separable structure: given coefficient
//! columns c_n (left) and d_n (right) over a basis,
//!
//!   K[i,j](s,t) = Σ_n [c_n-function]^{(i)}(s) · conj([d_n-function]^{(j)}(t)),
//!
//! with left columns (R_λ W) e_n and right columns V e_n for a
//! factorization T = W V* and an optional resolvent R_λ. The diagnostics
//! of the positive case (the q-identity and diagonal non-negativity) live
//! here too.

use num_complex::Complex64 as C64;

use crate::basis::{gauss_legendre, OrthonormalBasis};
use crate::linalg::{dot, CMatrix};
use crate::opcore::{Factorization, OperatorMatrix, HERMITIAN_TOL, PSD_FLOOR};
use crate::{Error, Result};

/// Compensated (Kahan) accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: C64,
    comp: C64,
}

impl Kahan {
    pub fn add(&mut self, v: C64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> C64 {
        self.sum
    }
}

/// Rectangular sample grid for kernel values.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub s_points: Vec<f64>,
    pub t_points: Vec<f64>,
    /// Both axes coincide with the basis quadrature nodes; evaluation can
    /// then run off the precomputed tables.
    on_quadrature: bool,
}

impl SampleGrid {
    pub(crate) fn is_on_quadrature(&self) -> bool {
        self.on_quadrature
    }

    /// `points` × `points` uniform grid over [-halfwidth, halfwidth]².
    pub fn uniform(points: usize, halfwidth: f64) -> Self {
        assert!(points >= 2);
        let axis: Vec<f64> = (0..points)
            .map(|k| -halfwidth + 2.0 * halfwidth * k as f64 / (points - 1) as f64)
            .collect();
        SampleGrid {
            s_points: axis.clone(),
            t_points: axis,
            on_quadrature: false,
        }
    }

    pub fn from_points(s_points: Vec<f64>, t_points: Vec<f64>) -> Self {
        SampleGrid {
            s_points,
            t_points,
            on_quadrature: false,
        }
    }

    /// Both axes on the basis quadrature nodes.
    pub fn quadrature(basis: &OrthonormalBasis) -> Self {
        let nodes = basis.grid.nodes().to_vec();
        SampleGrid {
            s_points: nodes.clone(),
            t_points: nodes,
            on_quadrature: true,
        }
    }

    /// Default 64×64 uniform grid over the basis window.
    pub fn default_for(basis: &OrthonormalBasis) -> Self {
        SampleGrid::uniform(64, basis.grid.halfwidth())
    }
}

/// Truncated bilinear kernel with stored samples.
#[derive(Debug, Clone)]
pub struct KernelApprox {
    pub left_columns: Vec<Vec<C64>>,
    pub right_columns: Vec<Vec<C64>>,
    pub lambda: C64,
    pub orders: (usize, usize),
    pub grid: SampleGrid,
    /// samples[(k, l)] = K(s_k, t_l).
    pub samples: CMatrix,
    /// Cauchy-Schwarz majorant of the dropped block n > truncation.
    pub tail_bound: f64,
    pub truncation: usize,
    pub basis_id: String,
}

pub(crate) fn column_values(
    basis: &OrthonormalBasis,
    col: &[C64],
    points: &[f64],
    order: usize,
    on_quadrature: bool,
) -> Vec<C64> {
    if on_quadrature {
        basis.combination_on_grid(col, order)
    } else {
        points
            .iter()
            .map(|&x| basis.eval_combination(col, x, order))
            .collect()
    }
}

/// Assemble Σ_n left_n(s) conj(right_n(t)) over the sample grid with
/// compensated accumulation. Returns the samples and the Cauchy-Schwarz
/// tail majorant of the columns beyond `truncation`.
fn assemble_kernel(
    basis: &OrthonormalBasis,
    left: &[Vec<C64>],
    right: &[Vec<C64>],
    i: usize,
    j: usize,
    grid: &SampleGrid,
    truncation: usize,
) -> (CMatrix, f64) {
    let ns = grid.s_points.len();
    let nt = grid.t_points.len();
    let mut acc = vec![Kahan::default(); ns * nt];
    let mut tail_left_sq = vec![0.0f64; ns];
    let mut tail_right_sq = vec![0.0f64; nt];
    for n in 0..left.len() {
        let lv = column_values(basis, &left[n], &grid.s_points, i, grid.on_quadrature);
        let rv = column_values(basis, &right[n], &grid.t_points, j, grid.on_quadrature);
        if n < truncation {
            for (k, lvk) in lv.iter().enumerate() {
                let row = &mut acc[k * nt..(k + 1) * nt];
                for (l, rvl) in rv.iter().enumerate() {
                    row[l].add(lvk * rvl.conj());
                }
            }
        } else {
            for (k, lvk) in lv.iter().enumerate() {
                tail_left_sq[k] += lvk.norm_sqr();
            }
            for (l, rvl) in rv.iter().enumerate() {
                tail_right_sq[l] += rvl.norm_sqr();
            }
        }
    }
    let mut samples = CMatrix::zeros(ns, nt);
    for k in 0..ns {
        for l in 0..nt {
            samples[(k, l)] = acc[k * nt + l].value();
        }
    }
    let sup_l = tail_left_sq.iter().cloned().fold(0.0, f64::max).sqrt();
    let sup_r = tail_right_sq.iter().cloned().fold(0.0, f64::max).sqrt();
    (samples, sup_l * sup_r)
}

impl KernelApprox {
    /// On-demand evaluation at an arbitrary point, for consistency checks
    /// against the stored samples.
    pub fn eval(&self, basis: &OrthonormalBasis, s: f64, t: f64) -> C64 {
        let (i, j) = self.orders;
        let mut acc = Kahan::default();
        for n in 0..self.truncation {
            let lv = basis.eval_combination(&self.left_columns[n], s, i);
            let rv = basis.eval_combination(&self.right_columns[n], t, j);
            acc.add(lv * rv.conj());
        }
        acc.value()
    }

    /// Max deviation between stored samples and on-demand evaluation over
    /// a probe subset of the grid.
    pub fn sample_consistency(&self, basis: &OrthonormalBasis) -> f64 {
        let ns = self.grid.s_points.len();
        let nt = self.grid.t_points.len();
        let mut worst = 0.0f64;
        let step_s = (ns / 8).max(1);
        let step_t = (nt / 8).max(1);
        for k in (0..ns).step_by(step_s) {
            for l in (0..nt).step_by(step_t) {
                let v = self.eval(basis, self.grid.s_points[k], self.grid.t_points[l]);
                worst = worst.max((v - self.samples[(k, l)]).norm());
            }
        }
        worst
    }

    /// Quadrature of the kernel against basis pairs:
    /// ∬ K(s,t) u_n(t) conj(u_m(s)) dt ds for m, n < `n_check`, via 1-D
    /// quadratures on the basis grid applied to the separable terms.
    pub fn quadrature_matrix(&self, basis: &OrthonormalBasis, n_check: usize) -> CMatrix {
        let (i, j) = self.orders;
        let q = &basis.grid;
        let mut out = CMatrix::zeros(n_check, n_check);
        for p in 0..self.truncation {
            let lv = basis.combination_on_grid(&self.left_columns[p], i);
            let rv = basis.combination_on_grid(&self.right_columns[p], j);
            // a_m = ∫ left_p(s) conj(u_m(s)) ds, b_n = ∫ conj(right_p) u_n dt
            for m in 0..n_check {
                let um = basis.table(0, m);
                let mut a = C64::new(0.0, 0.0);
                for k in 0..q.len() {
                    a += lv[k] * um[k].conj() * q.weights()[k];
                }
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for n in 0..n_check {
                    let un = basis.table(0, n);
                    let mut b = C64::new(0.0, 0.0);
                    for k in 0..q.len() {
                        b += rv[k].conj() * un[k] * q.weights()[k];
                    }
                    out[(m, n)] += a * b;
                }
            }
        }
        out
    }
}

fn check_orders(basis: &OrthonormalBasis, i: usize, j: usize) -> Result<()> {
    if i > basis.i_max || j > basis.i_max {
        return Err(Error::invalid(format!(
            "derivative orders ({i},{j}) exceed basis i_max {}",
            basis.i_max
        )));
    }
    Ok(())
}

fn left_operator(
    fact: &Factorization,
    resolvent: Option<&OperatorMatrix>,
) -> Result<OperatorMatrix> {
    match resolvent {
        Some(r) => r.matmul(&fact.w),
        None => Ok(fact.w.clone()),
    }
}

/// Kernel of D₂ʲD₁ⁱ T_λ from a factorization T = W V* and an optional
/// resolvent R: left columns (R W) e_n, right columns V e_n.
pub fn bilinear_kernel(
    fact: &Factorization,
    resolvent: Option<&OperatorMatrix>,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<KernelApprox> {
    bilinear_kernel_truncated(fact, resolvent, basis, i, j, grid, None)
}

/// As [`bilinear_kernel`] with an explicit truncation order below the full
/// basis size; the dropped block feeds the tail majorant.
pub fn bilinear_kernel_truncated(
    fact: &Factorization,
    resolvent: Option<&OperatorMatrix>,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
    truncation: Option<usize>,
) -> Result<KernelApprox> {
    check_orders(basis, i, j)?;
    let n = basis.len();
    if fact.w.dim() != n {
        return Err(Error::dims(fact.w.dim(), n, "bilinear_kernel factor/basis"));
    }
    let lw = left_operator(fact, resolvent)?;
    let n_used = truncation.unwrap_or(n).min(n);
    let left: Vec<Vec<C64>> = (0..n).map(|k| lw.image_column(k)).collect();
    let right: Vec<Vec<C64>> = (0..n).map(|k| fact.v.image_column(k)).collect();
    let (samples, tail_bound) = assemble_kernel(basis, &left, &right, i, j, grid, n_used);
    Ok(KernelApprox {
        left_columns: left,
        right_columns: right,
        lambda: C64::new(0.0, 0.0),
        orders: (i, j),
        grid: grid.clone(),
        samples,
        tail_bound,
        truncation: n_used,
        basis_id: basis.id.clone(),
    })
}

/// A Carleman function approximation: at each base point the coefficient
/// vector of t_λ^{(i)}(s) in the basis.
#[derive(Debug, Clone)]
pub struct CarlemanFunctionApprox {
    pub order: usize,
    pub points: Vec<f64>,
    /// vectors[k] = coefficients of the function value at points[k].
    pub vectors: Vec<Vec<C64>>,
    pub norms: Vec<f64>,
}

impl CarlemanFunctionApprox {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

/// The two Carleman-function expansions:
/// t_λ^{(i)}(s) = Σ_n conj([R W u_n]^{(i)}(s)) V u_n  and
/// t'_λ^{(j)}(t) = Σ_n conj([V u_n]^{(j)}(t)) R W u_n.
pub fn carleman_functions(
    fact: &Factorization,
    resolvent: Option<&OperatorMatrix>,
    basis: &OrthonormalBasis,
    order: usize,
) -> Result<(CarlemanFunctionApprox, CarlemanFunctionApprox)> {
    check_orders(basis, order, order)?;
    let n = basis.len();
    let lw = left_operator(fact, resolvent)?;
    let grid = SampleGrid::default_for(basis);

    let left_cols: Vec<Vec<C64>> = (0..n).map(|k| lw.image_column(k)).collect();
    let right_cols: Vec<Vec<C64>> = (0..n).map(|k| fact.v.image_column(k)).collect();

    let build = |points: &[f64], eval_cols: &Vec<Vec<C64>>, carry_cols: &Vec<Vec<C64>>| {
        let mut vectors = Vec::with_capacity(points.len());
        let mut norms = Vec::with_capacity(points.len());
        for &x in points {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for (col, carry) in eval_cols.iter().zip(carry_cols) {
                let factor = basis.eval_combination(col, x, order).conj();
                if factor.norm_sqr() == 0.0 {
                    continue;
                }
                for (vi, ci) in v.iter_mut().zip(carry) {
                    *vi += factor * ci;
                }
            }
            norms.push(v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
            vectors.push(v);
        }
        (vectors, norms)
    };

    let (tv, tn) = build(&grid.s_points, &left_cols, &right_cols);
    let (pv, pn) = build(&grid.t_points, &right_cols, &left_cols);
    Ok((
        CarlemanFunctionApprox {
            order,
            points: grid.s_points.clone(),
            vectors: tv,
            norms: tn,
        },
        CarlemanFunctionApprox {
            order,
            points: grid.t_points.clone(),
            vectors: pv,
            norms: pn,
        },
    ))
}

/// Sampled image [T_λ f]^{(i)} together with its coefficient vector.
#[derive(Debug, Clone)]
pub struct SampledImage {
    pub points: Vec<f64>,
    pub values: Vec<C64>,
    pub coefficients: Vec<C64>,
}

/// [T_λ f]^{(i)}(s) = Σ_n ⟨f, V u_n⟩ [R W u_n]^{(i)}(s) sampled on the
/// default grid's s-axis.
pub fn apply_expansion(
    fact: &Factorization,
    resolvent: Option<&OperatorMatrix>,
    basis: &OrthonormalBasis,
    f: &[C64],
    order: usize,
) -> Result<SampledImage> {
    check_orders(basis, order, order)?;
    let n = basis.len();
    if f.len() != n {
        return Err(Error::dims(f.len(), n, "apply_expansion input vector"));
    }
    let lw = left_operator(fact, resolvent)?;
    let grid = SampleGrid::default_for(basis);

    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let weight = dot(f, &fact.v.image_column(k));
        if weight.norm_sqr() == 0.0 {
            continue;
        }
        let col = lw.image_column(k);
        for (c, v) in coeffs.iter_mut().zip(&col) {
            *c += weight * v;
        }
    }
    let values = grid
        .s_points
        .iter()
        .map(|&s| basis.eval_combination(&coeffs, s, order))
        .collect();
    Ok(SampledImage {
        points: grid.s_points.clone(),
        values,
        coefficients: coeffs,
    })
}

/// Spectral data of the diagonal-Λ expansion.
#[derive(Debug, Clone)]
pub struct EigenExpansion {
    pub kernel: KernelApprox,
    pub lambdas: Vec<C64>,
    /// ψ_n = W u_n (columns), with T ψ_n = λ_n ψ_n.
    pub psi: Vec<Vec<C64>>,
    /// φ_n = V u_n (columns), with T* φ_n = conj(λ_n) φ_n.
    pub phi: Vec<Vec<C64>>,
    /// max |⟨ψ_n, φ_m⟩ − λ_n δ_{nm}|.
    pub biorthogonality_residual: f64,
    /// max_n ‖T ψ_n − λ_n ψ_n‖.
    pub eigen_residual: f64,
}

/// Expansion for T = H (I + S) with H ≥ 0 and Λ = H^{1/2}(I+S)H^{1/2}
/// numerically normal: kernel samples
/// Σ_n (1/(1−λλ_n)) [ψ_n]^{(i)}(s) conj([φ_n]^{(j)}(t)) with ψ_n = W u_n,
/// φ_n = V u_n for W = H^{1/2}, V = (I+S*)H^{1/2} and the diagonalizing
/// basis u_n of Λ.
pub fn eigen_expansion(
    h: &OperatorMatrix,
    s_op: &OperatorMatrix,
    basis: &OrthonormalBasis,
    lambda: C64,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<EigenExpansion> {
    check_orders(basis, i, j)?;
    h.check_same_space(s_op, "eigen_expansion")?;
    let n = h.dim();
    if n != basis.len() {
        return Err(Error::dims(n, basis.len(), "eigen_expansion operator/basis"));
    }
    if h.entries.hermitian_defect() > HERMITIAN_TOL {
        return Err(Error::invalid("H must be Hermitian"));
    }
    let eig_h = crate::linalg::hermitian_eigen(&h.entries)?;
    if eig_h.eigenvalues.last().cloned().unwrap_or(0.0) < PSD_FLOOR {
        return Err(Error::invalid("H must be positive semidefinite"));
    }
    let h_sqrt = crate::linalg::hermitian_function(&h.entries, |x| x.max(0.0).sqrt())?;

    let id = CMatrix::identity(n);
    let one_plus_s = id.add(&s_op.entries);
    let lambda_mat = h_sqrt.matmul(&one_plus_s).matmul(&h_sqrt);
    let comm = lambda_mat
        .matmul(&lambda_mat.adjoint())
        .sub(&lambda_mat.adjoint().matmul(&lambda_mat));
    let lam_norm = lambda_mat.norm_fro();
    if lam_norm > 0.0 && comm.norm_fro() > 1e-8 * lam_norm * lam_norm {
        return Err(Error::UnsupportedInput(format!(
            "Lambda = H^(1/2)(I+S)H^(1/2) is not numerically normal (commutator {:.3e})",
            comm.norm_fro()
        )));
    }
    let eig = crate::linalg::normal_eigen(&lambda_mat)?;
    for lam in &eig.eigenvalues {
        if (C64::new(1.0, 0.0) - lambda * lam).norm() <= 1e-12 * (1.0 + (lambda * lam).norm()) {
            return Err(Error::NotRegular { sigma_min: 0.0 });
        }
    }

    let w = h_sqrt.clone();
    let v = id.add(&s_op.entries.adjoint()).matmul(&h_sqrt);
    let psi_mat = w.matmul(&eig.vectors);
    let phi_mat = v.matmul(&eig.vectors);

    let psi: Vec<Vec<C64>> = (0..n).map(|k| psi_mat.column(k)).collect();
    let phi: Vec<Vec<C64>> = (0..n).map(|k| phi_mat.column(k)).collect();

    // Certified relations.
    let t_full = h.entries.matmul(&one_plus_s);
    let mut biorth = 0.0f64;
    let mut eigres = 0.0f64;
    for a in 0..n {
        let t_psi = t_full.matvec(&psi[a]);
        let mut diff = 0.0;
        for r in 0..n {
            diff += (t_psi[r] - eig.eigenvalues[a] * psi[a][r]).norm_sqr();
        }
        eigres = eigres.max(diff.sqrt());
        for b in 0..n {
            let ip = dot(&psi[a], &phi[b]);
            let target = if a == b {
                eig.eigenvalues[a]
            } else {
                C64::new(0.0, 0.0)
            };
            biorth = biorth.max((ip - target).norm());
        }
    }

    // Left columns carry the resolvent weights 1/(1−λλ_n).
    let left: Vec<Vec<C64>> = (0..n)
        .map(|k| {
            let wgt = (C64::new(1.0, 0.0) - lambda * eig.eigenvalues[k]).inv();
            psi[k].iter().map(|z| z * wgt).collect()
        })
        .collect();
    let (samples, tail_bound) = assemble_kernel(basis, &left, &phi, i, j, grid, n);
    let kernel = KernelApprox {
        left_columns: left,
        right_columns: phi.clone(),
        lambda,
        orders: (i, j),
        grid: grid.clone(),
        samples,
        tail_bound,
        truncation: n,
        basis_id: basis.id.clone(),
    };
    Ok(EigenExpansion {
        kernel,
        lambdas: eig.eigenvalues,
        psi,
        phi,
        biorthogonality_residual: biorth,
        eigen_residual: eigres,
    })
}

/// One rectangle check of the q-identity.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RectangleCheck {
    pub bounds: [f64; 4],
    pub q1_re: f64,
    pub q1_im: f64,
    pub q2_re: f64,
    pub q2_im: f64,
    pub deviation: f64,
}

/// Diagnostics report for the positive operator P = V V*.
#[derive(Debug, Clone)]
pub struct MercerReport {
    pub ell: usize,
    pub m: usize,
    pub rectangles: Vec<RectangleCheck>,
    /// min over grid nodes of (D₁₂^ℓ F)(s,s) − Σ_{n≤m} |[Vu_n]^{(ℓ)}(s)|².
    pub diagonal_min_residual: f64,
    pub diagonal_max_residual: f64,
}

fn rectangle_rule(a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let panels = (((b - a) * 4.0).ceil() as usize).max(2);
    let (xs, ws) = gauss_legendre(8);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * xs.len());
    let mut weights = Vec::with_capacity(panels * xs.len());
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (x, w) in xs.iter().zip(&ws) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(w * 0.5 * width);
        }
    }
    (nodes, weights)
}

/// q-identity and diagonal non-negativity for F = V V*:
/// q₁ integrates the kernel remainder over each rectangle with a 2-D rule;
/// q₂ sums the separable products of 1-D integrals over the dropped
/// indices. Both routes must agree for every rectangle and every m.
pub fn mercer_diagnostics(
    v_factor: &OperatorMatrix,
    basis: &OrthonormalBasis,
    ell: usize,
    m: usize,
    rectangles: &[[f64; 4]],
) -> Result<MercerReport> {
    check_orders(basis, ell, ell)?;
    let n = basis.len();
    if v_factor.dim() != n {
        return Err(Error::dims(v_factor.dim(), n, "mercer_diagnostics"));
    }
    if m > n {
        return Err(Error::invalid(format!(
            "partial-sum order {m} exceeds N = {n}"
        )));
    }
    let cols: Vec<Vec<C64>> = (0..n).map(|k| v_factor.image_column(k)).collect();

    let mut rect_checks = Vec::with_capacity(rectangles.len());
    for q in rectangles {
        let [a, b, cc, d] = *q;
        if !(a < b && cc < d) {
            return Err(Error::invalid("rectangle must satisfy a < b and c < d"));
        }
        let (sn, sw) = rectangle_rule(a, b);
        let (tn, tw) = rectangle_rule(cc, d);

        let col_vals_s: Vec<Vec<C64>> = cols
            .iter()
            .map(|c| {
                sn.iter()
                    .map(|&x| basis.eval_combination(c, x, ell))
                    .collect()
            })
            .collect();
        let col_vals_t: Vec<Vec<C64>> = cols
            .iter()
            .map(|c| {
                tn.iter()
                    .map(|&x| basis.eval_combination(c, x, ell))
                    .collect()
            })
            .collect();

        // Route 1: 2-D quadrature of the pointwise remainder kernel.
        let mut q1 = Kahan::default();
        for (k, &wk) in sw.iter().enumerate() {
            for (l, &wl) in tw.iter().enumerate() {
                let mut rem = Kahan::default();
                for p in m..n {
                    rem.add(col_vals_s[p][k] * col_vals_t[p][l].conj());
                }
                q1.add(rem.value() * (wk * wl));
            }
        }

        // Route 2: products of 1-D integrals, one term per dropped index.
        let mut q2 = Kahan::default();
        for p in m..n {
            let mut int_s = Kahan::default();
            for (k, &wk) in sw.iter().enumerate() {
                int_s.add(col_vals_s[p][k] * wk);
            }
            let mut int_t = Kahan::default();
            for (l, &wl) in tw.iter().enumerate() {
                int_t.add(col_vals_t[p][l] * wl);
            }
            q2.add(int_s.value() * int_t.value().conj());
        }

        let deviation = (q1.value() - q2.value()).norm();
        rect_checks.push(RectangleCheck {
            bounds: *q,
            q1_re: q1.value().re,
            q1_im: q1.value().im,
            q2_re: q2.value().re,
            q2_im: q2.value().im,
            deviation,
        });
    }

    // Diagonal residual (D₁₂^ℓ F)(s,s) − Σ_{n≤m}|·|² on the basis grid,
    // summed directly over the dropped indices so the sign is exact.
    let mut diag_min = f64::INFINITY;
    let mut diag_max = f64::NEG_INFINITY;
    let tables: Vec<Vec<C64>> = cols
        .iter()
        .map(|c| basis.combination_on_grid(c, ell))
        .collect();
    for k in 0..basis.grid.len() {
        let resid: f64 = (m..n).map(|p| tables[p][k].norm_sqr()).sum();
        diag_min = diag_min.min(resid);
        diag_max = diag_max.max(resid);
    }
    Ok(MercerReport {
        ell,
        m,
        rectangles: rect_checks,
        diagonal_min_residual: diag_min,
        diagonal_max_residual: diag_max,
    })
}
