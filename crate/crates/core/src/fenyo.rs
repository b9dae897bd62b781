//! Fenyö's generalized Schmidt decomposition by the explicit two-sequence
//! recursion, with reconstruction through both displayed forms.
//!
//! The recursion interleaves x's in the closure of Ran T and y's in the
//! closure of Ran T*:
//!
//!   μ_{n−1} x_n = T y_{n−1} − κ_{n−1} x_{n−1},
//!   conj(κ_n) y_n = T* x_n − conj(μ_{n−1}) y_{n−1},
//!
//! started from κ_0 = 0, x_0 = y_0 = 0 and stopped once span{x_j} fills
//! the numerical range of T. Whenever the right side vanishes the next x
//! (or y) is a free choice; determinism is pinned by taking the singular
//! vector with the largest projection defect.

use num_complex::Complex64 as C64;

use crate::basis::OrthonormalBasis;
use crate::expand::{Kahan, SampleGrid};
use crate::linalg::{self, axpy, dot, orthogonalize_against, CMatrix};
use crate::opcore::OperatorMatrix;
use crate::{Error, Result};

/// Numerical-rank cutoff relative to the top singular value.
pub const FENYO_RANK_TOL: f64 = 1e-10;

/// Below this (times ‖T‖) the recursion's right side counts as zero and a
/// free choice is made.
pub const FENYO_FREE_TOL: f64 = 1e-12;

/// The decomposition data: orthonormal x's and y's, the recursion scalars
/// κ_n and μ_n (with μ_0 = 0), and the derived α_n, β_n, v_n, w_n.
#[derive(Debug, Clone)]
pub struct FenyoDecomposition {
    pub x: Vec<Vec<C64>>,
    pub y: Vec<Vec<C64>>,
    /// κ_1..κ_N.
    pub kappa: Vec<C64>,
    /// μ_0..μ_N (μ_0 = 0; μ_N = 0 after termination).
    pub mu: Vec<C64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// v_n = (conj(κ_n) y_n + conj(μ_{n−1}) y_{n−1}) / α_n.
    pub v: Vec<Vec<C64>>,
    /// w_n = (κ_n x_n + μ_n x_{n+1}) / β_n.
    pub w: Vec<Vec<C64>>,
}

impl FenyoDecomposition {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Worst pairwise orthonormality defect over {x_n} and {y_n}.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for family in [&self.x, &self.y] {
            for a in 0..family.len() {
                for b in a..family.len() {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((dot(&family[a], &family[b]).norm() - target).abs());
                }
            }
        }
        worst
    }
}

/// Pick the deterministic free-choice vector: the range basis column with
/// the largest projection defect against the vectors already chosen.
fn free_choice(range_basis: &[Vec<C64>], chosen: &[Vec<C64>]) -> Option<Vec<C64>> {
    let mut best: Option<(f64, usize)> = None;
    for (idx, cand) in range_basis.iter().enumerate() {
        let (_, defect) = orthogonalize_against(cand, chosen);
        let better = match best {
            None => defect > 1e-6,
            Some((d, _)) => defect > d + 1e-12,
        };
        if better {
            best = Some((defect, idx));
        }
    }
    best.map(|(_, idx)| {
        let (mut r, norm) = orthogonalize_against(&range_basis[idx], chosen);
        for z in &mut r {
            *z /= norm;
        }
        r
    })
}

pub fn fenyo_decompose(t: &OperatorMatrix) -> Result<FenyoDecomposition> {
    let dim = t.dim();
    let svd = linalg::svd(&t.entries)?;
    let smax = svd.sigma.first().cloned().unwrap_or(0.0);
    let rank = svd.sigma.iter().filter(|&&s| s > FENYO_RANK_TOL * smax).count();
    if rank == 0 {
        return Ok(FenyoDecomposition {
            x: vec![],
            y: vec![],
            kappa: vec![],
            mu: vec![C64::new(0.0, 0.0)],
            alpha: vec![],
            beta: vec![],
            v: vec![],
            w: vec![],
        });
    }
    let t_norm = smax;
    let free_tol = FENYO_FREE_TOL * t_norm;
    let range_x: Vec<Vec<C64>> = (0..rank).map(|k| svd.u.column(k)).collect();
    let range_y: Vec<Vec<C64>> = (0..rank).map(|k| svd.v.column(k)).collect();
    let adj = t.entries.adjoint();

    let mut xs: Vec<Vec<C64>> = Vec::with_capacity(rank);
    let mut ys: Vec<Vec<C64>> = Vec::with_capacity(rank);
    let mut kappa: Vec<C64> = Vec::with_capacity(rank);
    // mu[n] = μ_n with μ_0 = 0.
    let mut mu: Vec<C64> = vec![C64::new(0.0, 0.0)];

    let zero = vec![C64::new(0.0, 0.0); dim];
    while xs.len() < rank {
        let n = xs.len(); // building x_{n+1} in 1-based terms
        let y_prev = ys.last().unwrap_or(&zero);
        let x_prev = xs.last().unwrap_or(&zero);
        let kappa_prev = kappa.last().cloned().unwrap_or(C64::new(0.0, 0.0));

        // r = T y_{n-1} − κ_{n-1} x_{n-1}, orthogonal to all prior x's in
        // exact arithmetic; re-orthogonalized for stability.
        let mut r = t.entries.matvec(y_prev);
        axpy(-kappa_prev, x_prev, &mut r);
        let (r_orth, r_norm) = orthogonalize_against(&r, &xs);
        let x_next = if r_norm > free_tol {
            mu.push(C64::new(r_norm, 0.0));
            r_orth.iter().map(|z| z / r_norm).collect::<Vec<C64>>()
        } else {
            if n > 0 {
                mu.push(C64::new(0.0, 0.0));
            }
            free_choice(&range_x, &xs).ok_or_else(|| {
                Error::Internal("free choice exhausted before the range filled".into())
            })?
        };
        // mu holds μ_0..μ_n at this point (the first step pushes nothing:
        // μ_0 = 0 is pre-seeded).
        if mu.len() < xs.len() + 1 {
            mu.push(C64::new(0.0, 0.0));
        }

        // conj(κ_n) y_n = T* x_n − conj(μ_{n-1}) y_{n-1}; κ_n made real
        // non-negative by absorbing the phase into y_n.
        let mu_prev = mu[xs.len()];
        let mut z = adj.matvec(&x_next);
        axpy(-mu_prev.conj(), y_prev, &mut z);
        let (z_orth, z_norm) = orthogonalize_against(&z, &ys);
        let y_next = if z_norm > free_tol {
            kappa.push(C64::new(z_norm, 0.0));
            z_orth.iter().map(|v| v / z_norm).collect::<Vec<C64>>()
        } else {
            kappa.push(C64::new(0.0, 0.0));
            free_choice(&range_y, &ys).ok_or_else(|| {
                Error::Internal("free choice exhausted on the adjoint side".into())
            })?
        };

        xs.push(x_next);
        ys.push(y_next);
    }
    // μ_N = 0 after termination.
    while mu.len() < rank + 1 {
        mu.push(C64::new(0.0, 0.0));
    }
    mu[rank] = C64::new(0.0, 0.0);

    // Derived sequences.
    let mut alpha = Vec::with_capacity(rank);
    let mut beta = Vec::with_capacity(rank);
    let mut v = Vec::with_capacity(rank);
    let mut w = Vec::with_capacity(rank);
    for n in 0..rank {
        let kap = kappa[n];
        let mu_prev = mu[n];
        let mu_cur = mu[n + 1];
        let a = (kap.norm_sqr() + mu_prev.norm_sqr()).sqrt();
        let b = (kap.norm_sqr() + mu_cur.norm_sqr()).sqrt();
        alpha.push(a);
        beta.push(b);

        let mut vn = vec![C64::new(0.0, 0.0); dim];
        if a > 0.0 {
            axpy(kap.conj() / a, &ys[n], &mut vn);
            if n > 0 {
                axpy(mu_prev.conj() / a, &ys[n - 1], &mut vn);
            }
        }
        v.push(vn);

        let mut wn = vec![C64::new(0.0, 0.0); dim];
        if b > 0.0 {
            axpy(kap / b, &xs[n], &mut wn);
            if n + 1 < rank {
                axpy(mu_cur / b, &xs[n + 1], &mut wn);
            }
        }
        w.push(wn);
    }

    Ok(FenyoDecomposition {
        x: xs,
        y: ys,
        kappa,
        mu,
        alpha,
        beta,
        v,
        w,
    })
}

/// Both reconstruction forms: Σ α_n ⟨f,v_n⟩ x_n and Σ β_n ⟨f,y_n⟩ w_n.
pub fn fenyo_reconstruct(dec: &FenyoDecomposition, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let dim = f.len();
    let mut first = vec![C64::new(0.0, 0.0); dim];
    let mut second = vec![C64::new(0.0, 0.0); dim];
    for n in 0..dec.len() {
        let a = C64::new(dec.alpha[n], 0.0) * dot(f, &dec.v[n]);
        axpy(a, &dec.x[n], &mut first);
        let b = C64::new(dec.beta[n], 0.0) * dot(f, &dec.y[n]);
        axpy(b, &dec.w[n], &mut second);
    }
    (first, second)
}

/// Sampled kernels from both displayed series, with the max deviation from
/// the direct kernel Σ T_{mn} u_m(s) conj(u_n(t)) reported instead of any
/// convergence claim.
#[derive(Debug, Clone)]
pub struct FenyoKernelReport {
    /// Σ_n α_n [x_n]^{(i)}(s) conj([v_n]^{(j)}(t)).
    pub samples_first: CMatrix,
    /// Σ_n β_n [w_n]^{(i)}(s) conj([y_n]^{(j)}(t)).
    pub samples_second: CMatrix,
    pub max_deviation_first: f64,
    pub max_deviation_second: f64,
}

pub fn fenyo_bilinear_kernel(
    dec: &FenyoDecomposition,
    t: &OperatorMatrix,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<FenyoKernelReport> {
    if i > basis.i_max || j > basis.i_max {
        return Err(Error::invalid("derivative order exceeds basis i_max"));
    }
    if t.dim() != basis.len() {
        return Err(Error::dims(t.dim(), basis.len(), "fenyo_bilinear_kernel"));
    }
    let ns = grid.s_points.len();
    let nt = grid.t_points.len();

    let sample_series = |lefts: &[Vec<C64>], rights: &[Vec<C64>], weights: &[f64]| {
        let mut out = CMatrix::zeros(ns, nt);
        for n in 0..lefts.len() {
            if weights[n] == 0.0 {
                continue;
            }
            let lv: Vec<C64> = grid
                .s_points
                .iter()
                .map(|&s| basis.eval_combination(&lefts[n], s, i))
                .collect();
            let rv: Vec<C64> = grid
                .t_points
                .iter()
                .map(|&t| basis.eval_combination(&rights[n], t, j))
                .collect();
            for (a, l) in lv.iter().enumerate() {
                for (b, r) in rv.iter().enumerate() {
                    out[(a, b)] += C64::new(weights[n], 0.0) * l * r.conj();
                }
            }
        }
        out
    };

    let first = sample_series(&dec.x, &dec.v, &dec.alpha);
    let second = sample_series(&dec.w, &dec.y, &dec.beta);

    // Direct kernel Σ T_{mn} u_m(s) conj(u_n(t)).
    let n_basis = basis.len();
    let mut direct = CMatrix::zeros(ns, nt);
    let us: Vec<Vec<C64>> = (0..n_basis)
        .map(|m| grid.s_points.iter().map(|&s| basis.eval(m, s, i)).collect())
        .collect();
    let ut: Vec<Vec<C64>> = (0..n_basis)
        .map(|m| grid.t_points.iter().map(|&t| basis.eval(m, t, j)).collect())
        .collect();
    for a in 0..ns {
        for b in 0..nt {
            let mut acc = Kahan::default();
            for m in 0..n_basis {
                for n in 0..n_basis {
                    let tv = t.entries[(m, n)];
                    if tv.norm_sqr() == 0.0 {
                        continue;
                    }
                    acc.add(tv * us[m][a] * ut[n][b].conj());
                }
            }
            direct[(a, b)] = acc.value();
        }
    }

    Ok(FenyoKernelReport {
        max_deviation_first: first.sub(&direct).norm_max(),
        max_deviation_second: second.sub(&direct).norm_max(),
        samples_first: first,
        samples_second: second,
    })
}
