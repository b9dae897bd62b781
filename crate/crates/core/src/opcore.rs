//! Operators as dense complex matrices over an orthonormal basis.
//!
//! Entry (m, n) of an [`OperatorMatrix`] is ⟨T u_n, u_m⟩, so columns hold
//! the coefficients of the images T u_n. On top of the matrix algebra this
//! module provides the SVD with a pinned phase convention, the polar
//! M-factorization T = WV*, membership residuals for the four product
//! relations defining M(T), the positive-part check for M⁺(T), and the
//! Riesz-basis factorization.

use num_complex::Complex64 as C64;

use crate::linalg::{self, CMatrix, Svd};
use crate::{Error, Result};

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Relative least-squares residual accepted for membership in M(T).
pub const MEMBER_TOL: f64 = 1e-8;

/// Entrywise Hermitian-defect tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalue floor for positive semidefiniteness.
pub const PSD_FLOOR: f64 = -1e-10;

/// Condition-number ceiling for "invertible at truncation".
pub const COND_MAX: f64 = 1e12;

/// A dense complex matrix tagged with the basis it is expressed in.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub basis_id: String,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, basis_id: impl Into<String>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::invalid("operator matrix must be square"));
        }
        if entries
            .data()
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid("operator matrix entries must be finite"));
        }
        Ok(OperatorMatrix {
            entries,
            basis_id: basis_id.into(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        OperatorMatrix {
            entries: CMatrix::zeros(n, n),
            basis_id: String::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        OperatorMatrix {
            entries: CMatrix::identity(n),
            basis_id: String::new(),
        }
    }

    pub fn from_diag(d: &[C64]) -> Self {
        OperatorMatrix {
            entries: CMatrix::from_diag(d),
            basis_id: String::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn with_entries(&self, entries: CMatrix) -> OperatorMatrix {
        OperatorMatrix {
            entries,
            basis_id: self.basis_id.clone(),
        }
    }

    pub fn check_same_space(&self, other: &OperatorMatrix, context: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::dims(self.dim(), other.dim(), context));
        }
        if !self.basis_id.is_empty()
            && !other.basis_id.is_empty()
            && self.basis_id != other.basis_id
        {
            return Err(Error::invalid(format!(
                "{context}: operators live over different bases ({} vs {})",
                self.basis_id, other.basis_id
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_space(other, "matmul")?;
        Ok(self.with_entries(self.entries.matmul(&other.entries)))
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_space(other, "add")?;
        Ok(self.with_entries(self.entries.add(&other.entries)))
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.check_same_space(other, "sub")?;
        Ok(self.with_entries(self.entries.sub(&other.entries)))
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        self.with_entries(self.entries.adjoint())
    }

    pub fn scale(&self, z: C64) -> OperatorMatrix {
        self.with_entries(self.entries.scale(z))
    }

    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        self.entries.matvec(f)
    }

    pub fn norm_fro(&self) -> f64 {
        self.entries.norm_fro()
    }

    /// Coefficient column of T u_n.
    pub fn image_column(&self, n: usize) -> Vec<C64> {
        self.entries.column(n)
    }
}

/// SVD factors with descending singular values and the deterministic
/// phase convention applied.
#[derive(Debug, Clone)]
pub struct SVDFactors {
    pub left: CMatrix,
    pub singular_values: Vec<f64>,
    pub right: CMatrix,
}

impl SVDFactors {
    pub fn rank(&self) -> usize {
        let smax = self.singular_values.first().cloned().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * smax)
            .count()
    }

    pub fn reconstruction_residual(&self, t: &OperatorMatrix) -> f64 {
        let svd = Svd {
            u: self.left.clone(),
            sigma: self.singular_values.clone(),
            v: self.right.clone(),
        };
        svd.reconstruct().sub(&t.entries).norm_fro()
    }
}

pub fn svd(t: &OperatorMatrix) -> Result<SVDFactors> {
    let s = linalg::svd(&t.entries)?;
    Ok(SVDFactors {
        left: s.u,
        singular_values: s.sigma,
        right: s.v,
    })
}

/// An M factorization T = W V* with its residual certificates.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub w: OperatorMatrix,
    pub v: OperatorMatrix,
    /// ‖T − W V*‖_F.
    pub residual_t: f64,
    /// Membership residuals certifying V V* ∈ M⁺(T) and W W* ∈ M⁺(T).
    pub residual_membership: [f64; 2],
}

impl Factorization {
    /// The factored operator W V*.
    pub fn operator(&self) -> OperatorMatrix {
        self.w
            .matmul(&self.v.adjoint())
            .expect("factors share a basis")
    }
}

/// Polar-based M factorization: with T = U|T| and P = |T|^{1/2}, take
/// W = U P and V = P, so that V V* = |T| and W W* = U |T| U*.
pub fn polar_m_factorization(t: &OperatorMatrix) -> Result<Factorization> {
    let n = t.dim();
    let s = linalg::svd(&t.entries)?;
    let smax = s.sigma.first().cloned().unwrap_or(0.0);

    // |T| = V Σ V*, P = V Σ^{1/2} V*.
    let mut v_sqrt = s.v.clone();
    for j in 0..n {
        let r = s.sigma[j].max(0.0).sqrt();
        for i in 0..n {
            v_sqrt[(i, j)] *= r;
        }
    }
    let p = v_sqrt.matmul(&s.v.adjoint());

    // Partial isometry, zero on the kernel of |T|.
    let mut u_iso = CMatrix::zeros(n, n);
    for j in 0..n {
        if s.sigma[j] <= RANK_TOL * smax {
            continue;
        }
        let uc = s.u.column(j);
        let vc = s.v.column(j);
        for r in 0..n {
            for c in 0..n {
                u_iso[(r, c)] += uc[r] * vc[c].conj();
            }
        }
    }

    let w = t.with_entries(u_iso.matmul(&p));
    let v = t.with_entries(p);

    let residual_t = w.matmul(&v.adjoint())?.sub(t)?.norm_fro();
    let vv = v.matmul(&v.adjoint())?;
    let ww = w.matmul(&w.adjoint())?;
    let m_v = mplus_check(&vv, t)?;
    let m_w = mplus_check(&ww, t)?;
    Ok(Factorization {
        w,
        v,
        residual_t,
        residual_membership: [m_v.best_residual, m_w.best_residual],
    })
}

/// Residual record for the four product relations:
/// A = TM = NT, A = T*M = NT*, A = TM = NT*, A = T*N = MT.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    /// Max of the two relative least-squares residuals, per pattern.
    pub pattern_residuals: [f64; 4],
    /// Same, in absolute Frobenius norm.
    pub pattern_residuals_abs: [f64; 4],
    pub best_residual: f64,
    pub best_residual_abs: f64,
    pub accepted: bool,
}

fn relative(abs: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        abs / scale
    } else {
        abs
    }
}

/// Least-squares residuals of the four relations with S = T. A is accepted
/// as a member of M(T) when the best combined relative residual is at most
/// MEMBER_TOL.
pub fn membership_residual(a: &OperatorMatrix, t: &OperatorMatrix) -> Result<MembershipReport> {
    a.check_same_space(t, "membership_residual")?;
    let ta = &t.entries;
    let th = t.entries.adjoint();
    let aa = &a.entries;
    let ah = a.entries.adjoint();
    let scale = a.norm_fro();

    // Each constraint T·M = A (or mirrored) is solved through the SVD
    // pseudoinverse; right-sided problems become left-sided on adjoints.
    let solve_left = |x: &CMatrix, b: &CMatrix| -> Result<f64> {
        let (_, r) = linalg::lstsq(x, b, RANK_TOL)?;
        Ok(r)
    };

    let r_tm_a = solve_left(ta, aa)?; // T M = A
    let r_nt_a = solve_left(&th, &ah)?; // N T = A  <=>  T* N* = A*
    let r_thm_a = solve_left(&th, aa)?; // T* M = A
    let r_nth_a = solve_left(ta, &ah)?; // N T* = A <=>  T N* = A*

    let abs = [
        r_tm_a.max(r_nt_a),   // A = TM = NT
        r_thm_a.max(r_nth_a), // A = T*M = NT*
        r_tm_a.max(r_nth_a),  // A = TM = NT*
        r_thm_a.max(r_nt_a),  // A = T*N = MT
    ];
    let rel = [
        relative(abs[0], scale),
        relative(abs[1], scale),
        relative(abs[2], scale),
        relative(abs[3], scale),
    ];
    let best = rel.iter().cloned().fold(f64::INFINITY, f64::min);
    let best_abs = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MembershipReport {
        pattern_residuals: rel,
        pattern_residuals_abs: abs,
        best_residual: best,
        best_residual_abs: best_abs,
        accepted: best <= MEMBER_TOL,
    })
}

/// Positive-part membership report.
#[derive(Debug, Clone)]
pub struct MPlusReport {
    pub hermitian_defect: f64,
    pub min_eigenvalue: f64,
    /// min of the residuals for P = TB and P = BT, relative.
    pub best_residual: f64,
    pub accepted: bool,
}

/// P ∈ M⁺(T) iff P is Hermitian, PSD, and expressible as TB or BT.
pub fn mplus_check(p: &OperatorMatrix, t: &OperatorMatrix) -> Result<MPlusReport> {
    p.check_same_space(t, "mplus_check")?;
    let herm = p.entries.hermitian_defect();
    let eig = linalg::hermitian_eigen(&p.entries)?;
    let min_eig = eig.eigenvalues.last().cloned().unwrap_or(0.0);

    let scale = p.norm_fro();
    let (_, r_tb) = linalg::lstsq(&t.entries, &p.entries, RANK_TOL)?;
    // B T = P  <=>  T* B* = P*
    let (_, r_bt) = linalg::lstsq(&t.entries.adjoint(), &p.entries.adjoint(), RANK_TOL)?;
    let best = relative(r_tb.min(r_bt), scale);

    Ok(MPlusReport {
        hermitian_defect: herm,
        min_eigenvalue: min_eig,
        best_residual: best,
        accepted: herm <= HERMITIAN_TOL && min_eig >= PSD_FLOOR && best <= MEMBER_TOL,
    })
}

/// Factorization through a diagonal-in-disguise operator on Riesz bases:
/// given invertible A, B and Λ = Σ λ_n ⟨·,u_{k_n}⟩ u_{m_n}, build
/// U = Σ e^{iθ_n} ⟨·,u_{k_n}⟩ u_{m_n} and |Λ| = Σ |λ_n| ⟨·,u_{k_n}⟩ u_{k_n},
/// and return W = A U |Λ|^{1/2}, V = B* |Λ|^{1/2} with T = A Λ B = W V*.
pub fn riesz_factorization(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
    lambdas: &[C64],
    k_indices: &[usize],
    m_indices: &[usize],
) -> Result<Factorization> {
    a.check_same_space(b, "riesz_factorization")?;
    let n = a.dim();
    if lambdas.len() != k_indices.len() || lambdas.len() != m_indices.len() {
        return Err(Error::invalid(
            "lambdas and index maps must have equal length",
        ));
    }
    if lambdas.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::invalid(
            "riesz_factorization requires nonzero lambdas",
        ));
    }
    let mut seen_k = vec![false; n];
    let mut seen_m = vec![false; n];
    for (&k, &m) in k_indices.iter().zip(m_indices) {
        if k >= n || m >= n {
            return Err(Error::invalid("index map out of range"));
        }
        if seen_k[k] || seen_m[m] {
            return Err(Error::invalid("index maps must be injective"));
        }
        seen_k[k] = true;
        seen_m[m] = true;
    }
    for op in [a, b] {
        let s = linalg::svd(&op.entries)?;
        let smin = s.sigma.last().cloned().unwrap_or(0.0);
        let smax = s.sigma.first().cloned().unwrap_or(0.0);
        if smin <= 0.0 || smax / smin > COND_MAX {
            return Err(Error::invalid(format!(
                "factor matrix is singular at truncation (condition number > {COND_MAX:.0e})"
            )));
        }
    }

    let mut lambda_op = CMatrix::zeros(n, n);
    let mut u_phase = CMatrix::zeros(n, n);
    let mut abs_sqrt = CMatrix::zeros(n, n);
    for ((&lam, &k), &m) in lambdas.iter().zip(k_indices).zip(m_indices) {
        lambda_op[(m, k)] += lam;
        u_phase[(m, k)] += C64::from_polar(1.0, lam.arg());
        abs_sqrt[(k, k)] += C64::new(lam.norm().sqrt(), 0.0);
    }

    let w = a.with_entries(a.entries.matmul(&u_phase).matmul(&abs_sqrt));
    let v = b.with_entries(b.entries.adjoint().matmul(&abs_sqrt));

    let target = a.entries.matmul(&lambda_op).matmul(&b.entries);
    let t = a.with_entries(target);
    let residual_t = w.matmul(&v.adjoint())?.sub(&t)?.norm_fro();

    let vv = v.matmul(&v.adjoint())?;
    let ww = w.matmul(&w.adjoint())?;
    let m_v = mplus_check(&vv, &t)?;
    let m_w = mplus_check(&ww, &t)?;
    Ok(Factorization {
        w,
        v,
        residual_t,
        residual_membership: [m_v.best_residual, m_w.best_residual],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(n: usize, seed: &mut u64) -> OperatorMatrix {
        OperatorMatrix::new(CMatrix::from_fn(n, n, |_, _| c(lcg(seed), lcg(seed))), "").unwrap()
    }

    #[test]
    fn svd_examples() {
        let id = OperatorMatrix::identity(3);
        let s = svd(&id).unwrap();
        for k in 0..3 {
            assert!((s.singular_values[k] - 1.0).abs() < 1e-14);
        }
        let d = OperatorMatrix::from_diag(&[c(4.0, 0.0), c(1.0, 0.0)]);
        let s = svd(&d).unwrap();
        assert!((s.singular_values[0] - 4.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polar_identity() {
        let t = OperatorMatrix::identity(4);
        let f = polar_m_factorization(&t).unwrap();
        assert!(f.w.entries.max_deviation_from_identity() < 1e-13);
        assert!(f.v.entries.max_deviation_from_identity() < 1e-13);
        assert!(f.residual_t < 1e-13);
    }

    #[test]
    fn polar_diagonal_closed_form() {
        // T = diag(4,1): P = diag(2,1), U = I, W = V = diag(2,1).
        let t = OperatorMatrix::from_diag(&[c(4.0, 0.0), c(1.0, 0.0)]);
        let f = polar_m_factorization(&t).unwrap();
        assert!((f.v.entries[(0, 0)] - c(2.0, 0.0)).norm() < 1e-13);
        assert!((f.v.entries[(1, 1)] - c(1.0, 0.0)).norm() < 1e-13);
        assert!(f.w.entries.sub(&f.v.entries).norm_fro() < 1e-13);
        assert!(f.residual_t < 1e-13);
    }

    #[test]
    fn polar_nilpotent_closed_form() {
        // T = [[0,1],[0,0]]: |T| = diag(0,1) = P, W = T, and W V* = T.
        let t = OperatorMatrix::new(
            CMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0); 2]]),
            "",
        )
        .unwrap();
        let f = polar_m_factorization(&t).unwrap();
        assert!(f.v.entries[(0, 0)].norm() < 1e-13);
        assert!((f.v.entries[(1, 1)] - c(1.0, 0.0)).norm() < 1e-13);
        assert!(f.w.entries.sub(&t.entries).norm_fro() < 1e-13);
        assert!(f.residual_t < 1e-13);
        // VV* = |T| within 1e-10; here |T| = P itself.
        let vv = f.v.matmul(&f.v.adjoint()).unwrap();
        assert!(vv.entries.sub(&f.v.entries).norm_fro() < 1e-10);
    }

    #[test]
    fn polar_certificates_random() {
        let mut seed = 2024u64;
        for n in [2usize, 5, 9] {
            let t = random_matrix(n, &mut seed);
            let f = polar_m_factorization(&t).unwrap();
            assert!(f.residual_t <= 1e-10 * (1.0 + t.norm_fro()));
            let vv = f.v.matmul(&f.v.adjoint()).unwrap();
            let ww = f.w.matmul(&f.w.adjoint()).unwrap();
            assert!(mplus_check(&vv, &t).unwrap().accepted);
            assert!(mplus_check(&ww, &t).unwrap().accepted);
        }
    }

    #[test]
    fn membership_self_and_zero() {
        let mut seed = 7u64;
        let t = random_matrix(6, &mut seed);
        let rep = membership_residual(&t, &t).unwrap();
        assert!(rep.best_residual < 1e-12);
        assert!(rep.accepted);

        // T = 0 and A != 0: every pattern residual equals ||A||.
        let z = OperatorMatrix::zeros(3);
        let a = OperatorMatrix::identity(3);
        let rep = membership_residual(&a, &z).unwrap();
        for r in rep.pattern_residuals_abs {
            assert!((r - a.norm_fro()).abs() < 1e-12);
        }
        assert!(!rep.accepted);
    }

    #[test]
    fn membership_product_member() {
        // A = T R for explicit R, T invertible: pattern A = TM = NT fits
        // with M = R, N = T R T^{-1}.
        let mut seed = 99u64;
        let mut t = random_matrix(5, &mut seed);
        for i in 0..5 {
            t.entries[(i, i)] += c(4.0, 0.0);
        }
        let r = random_matrix(5, &mut seed);
        let a = t.matmul(&r).unwrap();
        let rep = membership_residual(&a, &t).unwrap();
        assert!(
            rep.pattern_residuals[0] <= 1e-10,
            "{:?}",
            rep.pattern_residuals
        );
        assert!(rep.accepted);
    }

    #[test]
    fn membership_symmetric_in_adjoint() {
        let mut seed = 5150u64;
        let t = random_matrix(6, &mut seed);
        let a = t.matmul(&random_matrix(6, &mut seed)).unwrap();
        let r1 = membership_residual(&a, &t).unwrap();
        let r2 = membership_residual(&a, &t.adjoint()).unwrap();
        assert!((r1.best_residual - r2.best_residual).abs() < 1e-9);
    }

    #[test]
    fn mplus_rejects_non_psd_and_non_hermitian() {
        let t = OperatorMatrix::identity(3);
        let negative = OperatorMatrix::from_diag(&[c(-1.0, 0.0); 3]);
        let rep = mplus_check(&negative, &t).unwrap();
        assert!(!rep.accepted);
        assert!(rep.min_eigenvalue < -0.5);

        let mut skew = OperatorMatrix::identity(3);
        skew.entries[(0, 1)] = c(0.3, 0.1);
        let rep = mplus_check(&skew, &t).unwrap();
        assert!(rep.hermitian_defect > 1e-3);
        assert!(!rep.accepted);
    }

    #[test]
    fn mplus_accepts_polar_modulus() {
        let mut seed = 31u64;
        let t = random_matrix(5, &mut seed);
        let f = polar_m_factorization(&t).unwrap();
        let vv = f.v.matmul(&f.v.adjoint()).unwrap();
        let rep = mplus_check(&vv, &t).unwrap();
        assert!(rep.accepted, "residual {}", rep.best_residual);
    }

    #[test]
    fn riesz_identity_single_lambda() {
        let a = OperatorMatrix::identity(3);
        let b = OperatorMatrix::identity(3);
        let f = riesz_factorization(&a, &b, &[c(1.0, 0.0)], &[0], &[0]).unwrap();
        let mut expect = CMatrix::zeros(3, 3);
        expect[(0, 0)] = c(1.0, 0.0);
        assert!(f.w.entries.sub(&expect).norm_fro() < 1e-14);
        assert!(f.v.entries.sub(&expect).norm_fro() < 1e-14);
        assert!(f.residual_t < 1e-14);
    }

    #[test]
    fn riesz_positive_lambdas_direct_formula() {
        // A = B = I, real positive λ on mapped indices: W = V = |Λ|^{1/2}
        // placed by the index maps.
        let a = OperatorMatrix::identity(4);
        let b = OperatorMatrix::identity(4);
        let lams = [c(2.0, 0.0), c(0.5, 0.0)];
        let f = riesz_factorization(&a, &b, &lams, &[1, 3], &[1, 3]).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        expect[(1, 1)] = c(2.0f64.sqrt(), 0.0);
        expect[(3, 3)] = c(0.5f64.sqrt(), 0.0);
        assert!(f.v.entries.sub(&expect).norm_fro() < 1e-14);
        assert!(f.w.entries.sub(&expect).norm_fro() < 1e-14);
        assert!(f.residual_t < 1e-14);
    }

    #[test]
    fn riesz_negative_lambda_phase() {
        // λ = −1 carries phase e^{iπ}: the factored product has entry −1 at
        // (m_1, k_1).
        let a = OperatorMatrix::identity(3);
        let b = OperatorMatrix::identity(3);
        let f = riesz_factorization(&a, &b, &[c(-1.0, 0.0)], &[2], &[0]).unwrap();
        let prod = f.operator();
        assert!((prod.entries[(0, 2)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(f.residual_t < 1e-14);
        assert!(f.residual_membership[0] <= MEMBER_TOL);
        assert!(f.residual_membership[1] <= MEMBER_TOL);
    }

    #[test]
    fn riesz_rejects_singular_factor() {
        let a = OperatorMatrix::from_diag(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = OperatorMatrix::identity(2);
        assert!(riesz_factorization(&a, &b, &[c(1.0, 0.0)], &[0], &[0]).is_err());
    }

    #[test]
    fn algebra_dimension_mismatch() {
        let a = OperatorMatrix::identity(3);
        let b = OperatorMatrix::identity(4);
        assert!(matches!(a.matmul(&b), Err(Error::DimensionMismatch { .. })));
    }
}
