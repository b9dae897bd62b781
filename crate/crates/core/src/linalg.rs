//! Dense complex linear algebra at desk scale.
//!
//! Everything here is written for matrices of dimension at most a few
//! hundred, where one-sided and two-sided Jacobi methods are both simple
//! and accurate to near machine precision. All routines are deterministic:
//! identical input produces bitwise-identical output.

use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = CMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = CMatrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[C64]) {
        assert_eq!(col.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = col[i];
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn conj(&self) -> CMatrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v = v.conj();
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        m
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        m
    }

    pub fn scale(&self, z: C64) -> CMatrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= z;
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                worst = worst.max((self[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// ⟨x, y⟩ = Σ x_k conj(y_k), conjugate-linear in the second slot.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Singular value decomposition A = U Σ V* of a square complex matrix.
///
/// Columns of `u` and `v` are unitary, `sigma` is non-increasing and
/// non-negative. Computed by one-sided Jacobi: unitary plane rotations are
/// applied to the columns of A until they are mutually orthogonal; the
/// surviving column norms are the singular values.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    assert!(a.is_square(), "svd expects a square matrix");
    let n = a.rows();
    let mut w = a.clone();
    let mut v = CMatrix::identity(n);

    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        converged = true;
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let col_p = w.column(p);
                let col_q = w.column(q);
                let app = vec_norm(&col_p).powi(2);
                let aqq = vec_norm(&col_q).powi(2);
                let apq = dot(&col_p, &col_q);
                let off = apq.norm();
                if off <= 1e-30 || off * off <= 1e-60 * app * aqq {
                    continue;
                }
                if off > 1e-15 * (app * aqq).sqrt() {
                    converged = false;
                }
                // Phase so the rotated pair has a real positive coupling.
                let phi = C64::from_polar(1.0, apq.arg());
                let zeta = (aqq - app) / (2.0 * off);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = phi * w[(i, q)];
                    w[(i, p)] = cs * wp - sn * wq;
                    w[(i, q)] = sn * wp + cs * wq;
                    let vp = v[(i, p)];
                    let vq = phi * v[(i, q)];
                    v[(i, p)] = cs * vp - sn * vq;
                    v[(i, q)] = sn * vp + cs * vq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure {
            what: "one-sided Jacobi SVD".into(),
            iterations: sweeps,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| vec_norm(&w.column(j))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut u = CMatrix::zeros(n, n);
    let mut vv = CMatrix::zeros(n, n);
    let mut sigma = vec![0.0; n];
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-300f64.max(sigma_max * 1e-18);
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        vv.set_column(k, &v.column(j));
        if norms[j] > floor {
            let col: Vec<C64> = w.column(j).iter().map(|z| z / norms[j]).collect();
            u.set_column(k, &col);
        }
    }
    // Columns whose singular value underflowed: complete U to a unitary by
    // Gram-Schmidt over the standard basis.
    for k in 0..n {
        if sigma[k] > floor {
            continue;
        }
        let mut chosen = vec![C64::new(0.0, 0.0); n];
        'candidates: for c in 0..n {
            let mut cand = vec![C64::new(0.0, 0.0); n];
            cand[c] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for j in 0..n {
                    if j == k || (sigma[j] <= floor && j > k) {
                        continue;
                    }
                    let uj = u.column(j);
                    let proj = dot(&cand, &uj);
                    axpy(-proj, &uj, &mut cand);
                }
            }
            let nrm = vec_norm(&cand);
            if nrm > 0.5 {
                for z in &mut cand {
                    *z /= nrm;
                }
                chosen = cand;
                break 'candidates;
            }
        }
        u.set_column(k, &chosen);
    }

    let mut out = Svd { u, sigma, v: vv };
    fix_svd_phases(&mut out);
    Ok(out)
}

/// Phase convention: scale each (u_k, v_k) pair so the largest-magnitude
/// entry of u_k is real positive (ties broken by lowest index). This pins
/// the gauge freedom so repeated runs agree bitwise.
fn fix_svd_phases(s: &mut Svd) {
    let n = s.sigma.len();
    for k in 0..n {
        let col = s.u.column(k);
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for (i, z) in col.iter().enumerate() {
            if z.norm() > best_mag + 1e-14 * best_mag.abs() {
                best_mag = z.norm();
                best = i;
            }
        }
        if best_mag <= 0.0 {
            continue;
        }
        let phase = C64::from_polar(1.0, -col[best].arg());
        let uc: Vec<C64> = col.iter().map(|z| z * phase).collect();
        let vc: Vec<C64> = s.v.column(k).iter().map(|z| z * phase).collect();
        s.u.set_column(k, &uc);
        s.v.set_column(k, &vc);
    }
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.sigma.len();
        let mut us = self.u.clone();
        for j in 0..n {
            for i in 0..n {
                us[(i, j)] *= self.sigma[j];
            }
        }
        us.matmul(&self.v.adjoint())
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.sigma.first().cloned().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > rel_tol * smax).count()
    }

    /// Pseudoinverse with relative rank cutoff.
    pub fn pseudoinverse(&self, rel_tol: f64) -> CMatrix {
        let n = self.sigma.len();
        let smax = self.sigma.first().cloned().unwrap_or(0.0);
        let mut vs = self.v.clone();
        for j in 0..n {
            let inv = if self.sigma[j] > rel_tol * smax && self.sigma[j] > 0.0 {
                1.0 / self.sigma[j]
            } else {
                0.0
            };
            for i in 0..n {
                vs[(i, j)] *= inv;
            }
        }
        vs.matmul(&self.u.adjoint())
    }
}

/// Eigendecomposition H = Q diag(λ) Q* of a Hermitian matrix, two-sided
/// Jacobi. Eigenvalues are returned in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    assert!(h.is_square());
    let n = h.rows();
    // Work on the Hermitian average so tiny asymmetries cannot drift.
    let mut a = CMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
    let mut q = CMatrix::identity(n);
    let scale = a.norm_fro().max(1e-300);

    let mut sweeps = 0;
    loop {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            return Err(Error::NumericalFailure {
                what: "Hermitian Jacobi eigendecomposition".into(),
                iterations: sweeps,
            });
        }
        for p in 0..n {
            for q_idx in (p + 1)..n {
                let hpq = a[(p, q_idx)];
                let off = hpq.norm();
                if off <= 1e-18 * scale {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q_idx, q_idx)].re;
                let phi = C64::from_polar(1.0, hpq.arg());
                let zeta = (aqq - app) / (2.0 * off);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // Column update A <- A J with J acting on columns (p, q).
                for i in 0..n {
                    let ap = a[(i, p)];
                    let aq = phi.conj() * a[(i, q_idx)];
                    a[(i, p)] = cs * ap - sn * aq;
                    a[(i, q_idx)] = phi * (sn * ap + cs * aq);
                    let qp = q[(i, p)];
                    let qq = phi.conj() * q[(i, q_idx)];
                    q[(i, p)] = cs * qp - sn * qq;
                    q[(i, q_idx)] = phi * (sn * qp + cs * qq);
                }
                // Row update A <- J* A.
                for j in 0..n {
                    let ap = a[(p, j)];
                    let aq = phi * a[(q_idx, j)];
                    a[(p, j)] = cs * ap - sn * aq;
                    a[(q_idx, j)] = phi.conj() * (sn * ap + cs * aq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap().then(x.cmp(&y)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = q.column(i);
        // Deterministic phase: largest entry real positive.
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for (idx, z) in col.iter().enumerate() {
            if z.norm() > best_mag + 1e-14 * best_mag.abs() {
                best_mag = z.norm();
                best = idx;
            }
        }
        if best_mag > 0.0 {
            let phase = C64::from_polar(1.0, -col[best].arg());
            for z in &mut col {
                *z *= phase;
            }
        }
        vectors.set_column(k, &col);
    }
    Ok(HermitianEigen {
        eigenvalues,
        vectors,
    })
}

/// Hermitian matrix function via the eigendecomposition: f applied to each
/// eigenvalue. Used for |T|^{1/2}, H^{1/2}, eighth roots, and friends.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    let n = h.rows();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let fv = f(eig.eigenvalues[j]);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    Ok(scaled.matmul(&eig.vectors.adjoint()))
}

/// Unitary diagonalization Λ = Q diag(λ) Q* of a (numerically) normal
/// matrix.
///
/// Splits Λ into commuting Hermitian parts, diagonalizes the real part,
/// then re-diagonalizes the imaginary part inside each eigenvalue cluster.
/// Eigenvalues are sorted by descending magnitude (ties by real part, then
/// imaginary part).
#[derive(Debug, Clone)]
pub struct NormalEigen {
    pub eigenvalues: Vec<C64>,
    pub vectors: CMatrix,
}

pub fn normal_eigen(lambda: &CMatrix) -> Result<NormalEigen> {
    assert!(lambda.is_square());
    let n = lambda.rows();
    let adj = lambda.adjoint();
    let re_part = lambda.add(&adj).scale(C64::new(0.5, 0.0));
    let im_part = lambda.sub(&adj).scale(C64::new(0.0, -0.5));

    let eig_re = hermitian_eigen(&re_part)?;
    let scale = lambda.norm_fro().max(1e-300);
    let cluster_tol = 1e-8 * scale;

    let mut q = eig_re.vectors.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig_re.eigenvalues[end - 1] - eig_re.eigenvalues[end]).abs() <= cluster_tol
        {
            end += 1;
        }
        if end - start > 1 {
            let m = end - start;
            // Restriction of the imaginary part to the cluster subspace.
            let mut block = CMatrix::zeros(m, m);
            let cols: Vec<Vec<C64>> = (start..end).map(|j| q.column(j)).collect();
            for a in 0..m {
                let im_col = im_part.matvec(&cols[a]);
                for b in 0..m {
                    block[(b, a)] = dot(&im_col, &cols[b]);
                }
            }
            let sub = hermitian_eigen(&block)?;
            for a in 0..m {
                let mut new_col = vec![C64::new(0.0, 0.0); n];
                for b in 0..m {
                    axpy(sub.vectors[(b, a)], &cols[b], &mut new_col);
                }
                q.set_column(start + a, &new_col);
            }
        }
        start = end;
    }

    let qh = q.adjoint();
    let d = qh.matmul(&lambda.matmul(&q));
    let mut eigs: Vec<C64> = (0..n).map(|i| d[(i, i)]).collect();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(d[(i, j)].norm());
            }
        }
    }
    if off > 1e-7 * scale.max(1.0) {
        return Err(Error::UnsupportedInput(format!(
            "matrix is not numerically normal: off-diagonal residue {off:.3e} after unitary diagonalization"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigs[b]
            .norm()
            .partial_cmp(&eigs[a].norm())
            .unwrap()
            .then(eigs[b].re.partial_cmp(&eigs[a].re).unwrap())
            .then(eigs[b].im.partial_cmp(&eigs[a].im).unwrap())
            .then(a.cmp(&b))
    });
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &q.column(i));
    }
    eigs = order.iter().map(|&i| eigs[i]).collect();
    Ok(NormalEigen {
        eigenvalues: eigs,
        vectors,
    })
}

/// Householder QR with column pivoting; solves square systems with one step
/// of iterative refinement.
pub struct PivotedQr {
    qr: CMatrix,
    betas: Vec<C64>,
    perm: Vec<usize>,
    n: usize,
}

pub fn pivoted_qr(a: &CMatrix) -> PivotedQr {
    assert!(a.is_square());
    let n = a.rows();
    let mut r = a.clone();
    let mut betas = vec![C64::new(0.0, 0.0); n];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut col_norms: Vec<f64> = (0..n).map(|j| vec_norm(&r.column(j)).powi(2)).collect();

    for k in 0..n {
        // Pivot: bring the column with the largest remaining norm to front.
        let mut best = k;
        for j in (k + 1)..n {
            if col_norms[j] > col_norms[best] * (1.0 + 1e-12) {
                best = j;
            }
        }
        if best != k {
            for i in 0..n {
                let tmp = r[(i, k)];
                r[(i, k)] = r[(i, best)];
                r[(i, best)] = tmp;
            }
            perm.swap(k, best);
            col_norms.swap(k, best);
        }
        // Householder vector for column k below the diagonal.
        let mut x: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
        let xnorm = vec_norm(&x);
        if xnorm <= 1e-300 {
            continue;
        }
        let alpha = if x[0].norm() > 0.0 {
            -C64::from_polar(xnorm, x[0].arg())
        } else {
            C64::new(-xnorm, 0.0)
        };
        x[0] -= alpha;
        let vnorm = vec_norm(&x);
        if vnorm <= 1e-300 {
            continue;
        }
        for z in &mut x {
            *z /= vnorm;
        }
        // Apply I - 2 v v* to the trailing block.
        for j in k..n {
            let mut proj = C64::new(0.0, 0.0);
            for (idx, i) in (k..n).enumerate() {
                proj += x[idx].conj() * r[(i, j)];
            }
            proj *= 2.0;
            for (idx, i) in (k..n).enumerate() {
                r[(i, j)] -= proj * x[idx];
            }
        }
        // Store v below the diagonal (diagonal entry of R stays in place).
        let diag = r[(k, k)];
        for (idx, i) in (k..n).enumerate() {
            if i > k {
                r[(i, k)] = x[idx];
            }
        }
        betas[k] = x[0];
        r[(k, k)] = diag;
        for j in (k + 1)..n {
            col_norms[j] = (col_norms[j] - r[(k, j)].norm_sqr()).max(0.0);
        }
    }
    PivotedQr {
        qr: r,
        betas,
        perm,
        n,
    }
}

impl PivotedQr {
    fn apply_qt(&self, b: &mut [C64]) {
        let n = self.n;
        for k in 0..n {
            if self.betas[k].norm() == 0.0 {
                continue;
            }
            let mut proj = self.betas[k].conj() * b[k];
            for i in (k + 1)..n {
                proj += self.qr[(i, k)].conj() * b[i];
            }
            proj *= 2.0;
            b[k] -= proj * self.betas[k];
            for i in (k + 1)..n {
                b[i] -= proj * self.qr[(i, k)];
            }
        }
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<Vec<C64>> {
        let n = self.n;
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        let mut z = vec![C64::new(0.0, 0.0); n];
        for k in (0..n).rev() {
            let mut acc = y[k];
            for j in (k + 1)..n {
                acc -= self.qr[(k, j)] * z[j];
            }
            let d = self.qr[(k, k)];
            if d.norm() <= 1e-300 {
                return Err(Error::NumericalFailure {
                    what: "back substitution on a singular R".into(),
                    iterations: 0,
                });
            }
            z[k] = acc / d;
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            x[self.perm[k]] = z[k];
        }
        Ok(x)
    }
}

/// Inverse of a square matrix by pivoted QR with one step of iterative
/// refinement: X <- X + solve(I - A X).
pub fn invert_refined(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    let qr = pivoted_qr(a);
    let mut x = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        let col = qr.solve_vec(&e)?;
        x.set_column(j, &col);
    }
    let resid = CMatrix::identity(n).sub(&a.matmul(&x));
    let mut corr = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = qr.solve_vec(&resid.column(j))?;
        corr.set_column(j, &col);
    }
    Ok(x.add(&corr))
}

/// Least-squares solve of A X = B through the SVD pseudoinverse.
/// Returns the minimizer and the absolute Frobenius residual ||A X - B||.
pub fn lstsq(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> Result<(CMatrix, f64)> {
    let s = svd(a)?;
    let x = s.pseudoinverse(rel_tol).matmul(b);
    let resid = a.matmul(&x).sub(b).norm_fro();
    Ok((x, resid))
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Returns the
/// residual and its norm after projecting out `basis`.
pub fn orthogonalize_against(v: &[C64], basis: &[Vec<C64>]) -> (Vec<C64>, f64) {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let proj = dot(&r, b);
            axpy(-proj, b, &mut r);
        }
    }
    let n = vec_norm(&r);
    (r, n)
}
