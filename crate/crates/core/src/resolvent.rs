//! Regular-value detection, Fredholm-resolvent construction, the resolvent
//! kernel, and second-kind equation solving by both routes.
//!
//! λ is regular at truncation when I − λT inverts with condition number at
//! most COND_MAX; then R_λ = (I − λT)^{-1}, T_λ = T R_λ, and the unique
//! solution of f − λTf = g is f = g + λ T_λ g.

use num_complex::Complex64 as C64;

use crate::basis::OrthonormalBasis;
use crate::expand::{bilinear_kernel, KernelApprox, SampleGrid};
use crate::linalg::{self, vec_norm};
use crate::opcore::{Factorization, OperatorMatrix, COND_MAX};
use crate::{Error, Result};

/// Certified resolvent data at a regular value.
#[derive(Debug, Clone)]
pub struct ResolventContext {
    pub lambda: C64,
    /// R = (I − λT)^{-1}.
    pub resolvent: OperatorMatrix,
    /// T_λ = T · R.
    pub t_lambda: OperatorMatrix,
    pub condition_number: f64,
    /// ‖(I−λT)R − I‖_F and ‖R(I−λT) − I‖_F.
    pub identity_residuals: [f64; 2],
    t: OperatorMatrix,
}

impl ResolventContext {
    pub fn operator(&self) -> &OperatorMatrix {
        &self.t
    }
}

/// Attempt to invert I − λT. Fails with the smallest singular value when
/// the inverse does not exist at truncation.
pub fn regular_value(t: &OperatorMatrix, lambda: C64) -> Result<ResolventContext> {
    let n = t.dim();
    let m = OperatorMatrix::identity(n)
        .sub(&t.scale(lambda).with_entries(t.entries.scale(lambda)))
        .unwrap_or_else(|_| unreachable!());
    // Condition estimate through the singular values.
    let s = linalg::svd(&m.entries)?;
    let smax = s.sigma.first().cloned().unwrap_or(0.0);
    let smin = s.sigma.last().cloned().unwrap_or(0.0);
    if smin <= 0.0 || smax / smin > COND_MAX {
        return Err(Error::NotRegular { sigma_min: smin });
    }
    let inv = linalg::invert_refined(&m.entries)?;
    let r = t.with_entries(inv);
    let t_lambda = t.matmul(&r)?;

    let id = OperatorMatrix::identity(n);
    let left = m.matmul(&r)?.sub(&id)?.norm_fro();
    let right = r.matmul(&m)?.sub(&id)?.norm_fro();
    let tol = 1e-10 * n as f64;
    if left > tol || right > tol {
        return Err(Error::NumericalFailure {
            what: format!("two-sided resolvent identity (residuals {left:.3e}, {right:.3e})"),
            iterations: 1,
        });
    }
    Ok(ResolventContext {
        lambda,
        resolvent: r,
        t_lambda,
        condition_number: smax / smin,
        identity_residuals: [left, right],
        t: t.clone(),
    })
}

/// Solution of the second-kind equation and its certificate.
#[derive(Debug, Clone)]
pub struct SecondKindSolution {
    pub f: Vec<C64>,
    /// ‖f − λTf − g‖.
    pub residual: f64,
}

/// f = g + λ T_λ g, certified by direct substitution.
pub fn solve_second_kind(ctx: &ResolventContext, g: &[C64]) -> Result<SecondKindSolution> {
    let n = ctx.t_lambda.dim();
    if g.len() != n {
        return Err(Error::dims(g.len(), n, "solve_second_kind right-hand side"));
    }
    let tg = ctx.t_lambda.apply(g);
    let f: Vec<C64> = g
        .iter()
        .zip(&tg)
        .map(|(gi, ti)| gi + ctx.lambda * ti)
        .collect();

    let tf = ctx.t.apply(&f);
    let resid: f64 = f
        .iter()
        .zip(&tf)
        .zip(g)
        .map(|((fi, tfi), gi)| (fi - ctx.lambda * tfi - gi).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let g_norm = vec_norm(g);
    if resid > 1e-8 * (1.0 + g_norm) {
        return Err(Error::NumericalFailure {
            what: format!("second-kind solve residual {resid:.3e}"),
            iterations: 0,
        });
    }
    Ok(SecondKindSolution { f, residual: resid })
}

/// Resolvent kernel of T_λ: the bilinear expansion with left factor R·W,
/// plus the Gram redundancy check
/// W_λ W_λ* = G + λ T R G + conj(λ) G R* T* + |λ|² T R G R* T*, G = W W*.
pub fn resolvent_kernel(
    fact: &Factorization,
    ctx: &ResolventContext,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<KernelApprox> {
    fact.w.check_same_space(&ctx.resolvent, "resolvent_kernel")?;
    let gram_residual = resolvent_gram_residual(fact, ctx)?;
    if gram_residual > 1e-9 * (1.0 + fact.w.norm_fro().powi(2)) {
        return Err(Error::NumericalFailure {
            what: format!("resolvent Gram identity residual {gram_residual:.3e}"),
            iterations: 0,
        });
    }
    let mut kernel = bilinear_kernel(fact, Some(&ctx.resolvent), basis, i, j, grid)?;
    kernel.lambda = ctx.lambda;
    Ok(kernel)
}

/// Residual of the factored-resolvent Gram identity, exact at truncation
/// up to rounding.
pub fn resolvent_gram_residual(fact: &Factorization, ctx: &ResolventContext) -> Result<f64> {
    let w_lambda = ctx.resolvent.matmul(&fact.w)?;
    let g_lambda = w_lambda.matmul(&w_lambda.adjoint())?;
    let g = fact.w.matmul(&fact.w.adjoint())?;
    let tr = ctx.t.matmul(&ctx.resolvent)?;
    let lam = ctx.lambda;
    let term1 = tr.matmul(&g)?.scale(lam);
    let term2 = g.matmul(&tr.adjoint())?.scale(lam.conj());
    let term3 = tr
        .matmul(&g)?
        .matmul(&tr.adjoint())?
        .scale(C64::new(lam.norm_sqr(), 0.0));
    let rhs = g.add(&term1)?.add(&term2)?.add(&term3)?;
    Ok(g_lambda.sub(&rhs)?.norm_fro())
}

/// Sampled solution by the kernel route:
/// f(s_k) = g(s_k) + λ Σ_l w_l K(s_k, t_l) g(t_l), with the kernel of T_λ
/// sampled on the quadrature nodes along t.
pub fn solve_by_kernel(
    kernel: &KernelApprox,
    lambda: C64,
    g_samples: &[C64],
    basis: &OrthonormalBasis,
) -> Result<Vec<C64>> {
    let q = &basis.grid;
    if kernel.grid.t_points.len() != q.len() || g_samples.len() != q.len() {
        return Err(Error::invalid(
            "solve_by_kernel requires the kernel t-axis and g to be sampled on the quadrature grid",
        ));
    }
    for (a, b) in kernel.grid.t_points.iter().zip(q.nodes()) {
        if (a - b).abs() > 1e-12 {
            return Err(Error::invalid(
                "kernel t-axis does not match the quadrature nodes",
            ));
        }
    }
    let mut out = Vec::with_capacity(kernel.grid.s_points.len());
    for (k, &_s) in kernel.grid.s_points.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (l, &w) in q.weights().iter().enumerate() {
            acc += kernel.samples[(k, l)] * g_samples[l] * w;
        }
        out.push(acc);
    }
    // f on the s-axis; if the s-axis is also the quadrature grid this pairs
    // one-to-one with g, otherwise g must be re-evaluated by the caller.
    let g_on_s: Vec<C64> = if kernel.grid.s_points.len() == q.len() {
        g_samples.to_vec()
    } else {
        return Err(Error::invalid(
            "solve_by_kernel requires the kernel s-axis on the quadrature grid",
        ));
    };
    Ok(out
        .iter()
        .zip(&g_on_s)
        .map(|(ti, gi)| gi + lambda * ti)
        .collect())
}
