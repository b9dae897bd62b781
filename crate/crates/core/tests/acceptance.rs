//! Acceptance suite: one test per criterion, each printing a pass line
//! with its measured residuals and runtime. Tolerances are pinned here and
//! must not be loosened.

use std::time::Instant;

use num_complex::Complex64 as C64;

use mercer_core::basis::{hermite_basis, meyer_basis, OrthonormalBasis};
use mercer_core::expand::{
    bilinear_kernel, eigen_expansion, mercer_diagnostics, SampleGrid,
};
use mercer_core::fenyo::{fenyo_decompose, fenyo_reconstruct};
use mercer_core::linalg::{vec_norm, CMatrix};
use mercer_core::opcore::{
    mplus_check, polar_m_factorization, Factorization, OperatorMatrix,
};
use mercer_core::resolvent::{
    regular_value, resolvent_gram_residual, resolvent_kernel, solve_second_kind,
};
use mercer_core::smoothing::{
    build_unitary, check_flattening, make_plan, smooth_family, smooth_kernel,
};

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

fn pass_line(criterion: usize, what: &str, elapsed: f64, limit: f64) {
    println!("criterion {criterion} PASS: {what} ({elapsed:.2}s < {limit:.0}s)");
    assert!(
        elapsed < limit,
        "criterion {criterion} exceeded its runtime limit: {elapsed:.2}s >= {limit:.0}s"
    );
}

/// Diagonal operator λ_n = 2^{-n} (1-based) over the Hermite basis.
fn diagonal_hermite(n: usize, i_max: usize) -> (OrthonormalBasis, OperatorMatrix, Factorization) {
    let basis = hermite_basis(n, i_max).unwrap();
    let diag: Vec<C64> = (0..n)
        .map(|k| c(2.0f64.powi(-(k as i32 + 1)), 0.0))
        .collect();
    let mut t = OperatorMatrix::from_diag(&diag);
    t.basis_id = basis.id.clone();
    let fact = polar_m_factorization(&t).unwrap();
    (basis, t, fact)
}

#[test]
fn criterion_01_basis_fidelity() {
    let start = Instant::now();
    let hermite = hermite_basis(16, 3).unwrap();
    let dev_h = hermite.gram_deviation();
    assert!(dev_h <= 1e-10, "Hermite Gram deviation {dev_h:.3e} > 1e-10");

    let wavelet = meyer_basis(16, 3).unwrap();
    let dev_w = wavelet.gram_deviation();
    assert!(dev_w <= 1e-6, "wavelet Gram deviation {dev_w:.3e} > 1e-6");

    pass_line(
        1,
        &format!("basis fidelity: Hermite Gram {dev_h:.2e} <= 1e-10, Lemarie-Meyer Gram {dev_w:.2e} <= 1e-6"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_02_factorization_certificates() {
    let start = Instant::now();
    let mut seed = 0xACCE97u64;
    let mut worst_resid = 0.0f64;
    for trial in 0..50 {
        let n = 2 + trial % 11; // up to 12x12
        let t = random_matrix(n, &mut seed);
        let f = polar_m_factorization(&t).unwrap();
        let bound = 1e-10 * (1.0 + t.norm_fro());
        assert!(
            f.residual_t <= bound,
            "trial {trial}: factorization residual {:.3e} > {bound:.3e}",
            f.residual_t
        );
        worst_resid = worst_resid.max(f.residual_t);
        let vv = f.v.matmul(&f.v.adjoint()).unwrap();
        let ww = f.w.matmul(&f.w.adjoint()).unwrap();
        let mv = mplus_check(&vv, &t).unwrap();
        let mw = mplus_check(&ww, &t).unwrap();
        assert!(mv.accepted, "trial {trial}: VV* rejected ({:.3e})", mv.best_residual);
        assert!(mw.accepted, "trial {trial}: WW* rejected ({:.3e})", mw.best_residual);
    }
    pass_line(
        2,
        &format!("50 random polar M-factorizations certified (worst residual {worst_resid:.2e})"),
        start.elapsed().as_secs_f64(),
        5.0,
    );
}

#[test]
fn criterion_03_mercer_reduction() {
    let start = Instant::now();
    let n = 10;
    let (basis, _t, fact) = diagonal_hermite(n, 1);
    let grid = SampleGrid::uniform(64, basis.grid.halfwidth());
    let kernel = bilinear_kernel(&fact, None, &basis, 0, 0, &grid).unwrap();

    // Direct-sum oracle Σ λ_n h_n(s) h_n(t) evaluated independently.
    let mut worst = 0.0f64;
    for (a, &s) in grid.s_points.iter().enumerate() {
        for (b, &t) in grid.t_points.iter().enumerate() {
            let mut direct = c(0.0, 0.0);
            for k in 0..n {
                let lam = 2.0f64.powi(-(k as i32 + 1));
                direct += c(lam, 0.0) * basis.eval(k, s, 0) * basis.eval(k, t, 0).conj();
            }
            worst = worst.max((direct - kernel.samples[(a, b)]).norm());
        }
    }
    assert!(worst <= 1e-10, "kernel deviation {worst:.3e} > 1e-10");

    // Diagonal non-negativity for every partial sum m <= N.
    let mut min_resid = f64::INFINITY;
    for m in 0..=n {
        let rep = mercer_diagnostics(&fact.v, &basis, 0, m, &[]).unwrap();
        min_resid = min_resid.min(rep.diagonal_min_residual);
        assert!(
            rep.diagonal_min_residual >= 0.0,
            "diagonal residual negative at m={m}: {:.3e}",
            rep.diagonal_min_residual
        );
    }
    pass_line(
        3,
        &format!("Mercer reduction: kernel matches direct sum to {worst:.2e}, diagonal remainder >= 0 for all m"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_04_q_identity() {
    let start = Instant::now();
    let n = 10;
    let (basis, _t, fact) = diagonal_hermite(n, 1);
    // 5 seeded random rectangles inside the well-resolved window.
    let mut seed = 0x9D1A6u64;
    let mut rects = Vec::new();
    for _ in 0..5 {
        let half = basis.grid.halfwidth() / 2.0;
        let a = lcg(&mut seed) * half;
        let b = a + 0.5 + lcg(&mut seed).abs() * half / 2.0;
        let cc = lcg(&mut seed) * half;
        let d = cc + 0.5 + lcg(&mut seed).abs() * half / 2.0;
        rects.push([a, b, cc, d]);
    }
    let mut worst = 0.0f64;
    for m in [1usize, n / 2, n] {
        let rep = mercer_diagnostics(&fact.v, &basis, 0, m, &rects).unwrap();
        for r in &rep.rectangles {
            worst = worst.max(r.deviation);
            assert!(
                r.deviation <= 1e-8,
                "q-identity deviation {:.3e} > 1e-8 at m={m}, Q={:?}",
                r.deviation,
                r.bounds
            );
        }
    }
    pass_line(
        4,
        &format!("q-identity: |q1 - q2| <= {worst:.2e} over 5 rectangles and m in {{1, N/2, N}}"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_05_resolvent_certificates() {
    let start = Instant::now();
    let mut seed = 0x5E501Eu64;
    let mut worst_identity = 0.0f64;
    let mut worst_solve = 0.0f64;
    let mut worst_first = 0.0f64;
    for trial in 0..20 {
        let n = 3 + trial % 8;
        let raw = random_matrix(n, &mut seed);
        let lam = c(lcg(&mut seed), lcg(&mut seed));
        // scale so ||λT||_F <= 0.9
        let scale = 0.9 / (lam.norm() * raw.norm_fro()).max(1e-12);
        let t = raw.with_entries(raw.entries.scale(c(scale, 0.0)));
        let ctx = regular_value(&t, lam).unwrap();
        let tol = 1e-10 * n as f64;
        assert!(ctx.identity_residuals[0] <= tol && ctx.identity_residuals[1] <= tol);
        worst_identity = worst_identity
            .max(ctx.identity_residuals[0])
            .max(ctx.identity_residuals[1]);

        let g: Vec<C64> = (0..n).map(|_| c(lcg(&mut seed), lcg(&mut seed))).collect();
        let sol = solve_second_kind(&ctx, &g).unwrap();
        assert!(sol.residual <= 1e-9 * (1.0 + vec_norm(&g)));
        worst_solve = worst_solve.max(sol.residual);

        // First resolvent identity against a second regular value.
        let mu = c(0.5 * lcg(&mut seed), 0.5 * lcg(&mut seed));
        if let Ok(ctx2) = regular_value(&t, mu) {
            let lhs = ctx.t_lambda.sub(&ctx2.t_lambda).unwrap();
            let rhs = ctx
                .t_lambda
                .matmul(&ctx2.t_lambda)
                .unwrap()
                .scale(lam - mu);
            let resid = lhs.sub(&rhs).unwrap().norm_fro();
            let norms = ctx.t_lambda.norm_fro() * ctx2.t_lambda.norm_fro();
            assert!(resid <= 1e-8 * (1.0 + norms));
            worst_first = worst_first.max(resid / (1.0 + norms));
        }
    }
    pass_line(
        5,
        &format!("resolvent: identities {worst_identity:.2e}, solve residual {worst_solve:.2e}, first-identity {worst_first:.2e}"),
        start.elapsed().as_secs_f64(),
        5.0,
    );
}

#[test]
fn criterion_06_resolvent_kernel() {
    let start = Instant::now();
    let n = 10;
    let (basis, t, fact) = diagonal_hermite(n, 1);
    let lam = c(1.0 / 3.0, 0.0);
    let ctx = regular_value(&t, lam).unwrap();
    let grid = SampleGrid::uniform(64, basis.grid.halfwidth());
    let kernel = resolvent_kernel(&fact, &ctx, &basis, 0, 0, &grid).unwrap();

    // Weight oracle λ_n / (1 − λ λ_n) against the sampled kernel.
    let mut worst = 0.0f64;
    for (a, &s) in grid.s_points.iter().enumerate() {
        for (b, &tt) in grid.t_points.iter().enumerate() {
            let mut direct = c(0.0, 0.0);
            for k in 0..n {
                let lk = 2.0f64.powi(-(k as i32 + 1));
                let w = lk / (1.0 - lam.re * lk);
                direct += c(w, 0.0) * basis.eval(k, s, 0) * basis.eval(k, tt, 0).conj();
            }
            worst = worst.max((direct - kernel.samples[(a, b)]).norm());
        }
    }
    assert!(worst <= 1e-9, "kernel weight deviation {worst:.3e} > 1e-9");

    // Double quadrature reproduces (T R)_{mn} for m, n <= 8.
    let tr = t.matmul(&ctx.resolvent).unwrap();
    let qm = kernel.quadrature_matrix(&basis, 8);
    let mut qdev = 0.0f64;
    for m in 0..8 {
        for nn in 0..8 {
            qdev = qdev.max((qm[(m, nn)] - tr.entries[(m, nn)]).norm());
        }
    }
    assert!(qdev <= 1e-6, "quadrature deviation {qdev:.3e} > 1e-6");

    let gram = resolvent_gram_residual(&fact, &ctx).unwrap();
    assert!(gram <= 1e-9, "Gram identity residual {gram:.3e} > 1e-9");

    pass_line(
        6,
        &format!("resolvent kernel: weights {worst:.2e}, quadrature {qdev:.2e}, Gram identity {gram:.2e}"),
        start.elapsed().as_secs_f64(),
        30.0,
    );
}

#[test]
fn criterion_07_fenyo() {
    let start = Instant::now();
    let mut seed = 0xFE40u64;
    let mut worst_rel = 0.0f64;
    let mut worst_orth = 0.0f64;

    let mut check = |t: &OperatorMatrix, seed: &mut u64| {
        let dec = fenyo_decompose(t).unwrap();
        let orth = dec.orthonormality_defect();
        assert!(orth <= 1e-10, "orthonormality defect {orth:.3e}");
        worst_orth = worst_orth.max(orth);
        let t_norm = t.norm_fro().max(1e-300);
        for _ in 0..20 {
            let f: Vec<C64> = (0..t.dim()).map(|_| c(lcg(seed), lcg(seed))).collect();
            let f_norm = vec_norm(&f).max(1e-300);
            let (r1, r2) = fenyo_reconstruct(&dec, &f);
            let direct = t.apply(&f);
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for k in 0..t.dim() {
                d1 += (r1[k] - direct[k]).norm_sqr();
                d2 += (r2[k] - direct[k]).norm_sqr();
            }
            let rel = d1.sqrt().max(d2.sqrt()) / (t_norm * f_norm);
            assert!(rel <= 1e-9, "reconstruction relative residual {rel:.3e}");
            worst_rel = worst_rel.max(rel);
        }
    };

    for trial in 0..50 {
        let n = 2 + trial % 7; // up to 8x8
        let t = random_matrix(n, &mut seed);
        check(&t, &mut seed);
    }
    // The hand-traced rank-1 case.
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 1)] = c(3.0, 0.0);
    let rank1 = OperatorMatrix::new(m, "").unwrap();
    check(&rank1, &mut seed);

    pass_line(
        7,
        &format!("Fenyo: both reconstruction forms to {worst_rel:.2e}, orthonormality {worst_orth:.2e}"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_08_smoothing_pipeline() {
    let start = Instant::now();
    let dim = 24;
    // S diagonal with entries 16^{-(k+2)}, k = 1..24.
    let diag: Vec<C64> = (0..dim)
        .map(|k| c(16.0f64.powi(-(k as i32 + 3)), 0.0))
        .collect();
    let s = OperatorMatrix::from_diag(&diag);
    let e: Vec<Vec<C64>> = (0..dim)
        .map(|k| {
            let mut v = vec![c(0.0, 0.0); dim];
            v[k] = c(1.0, 0.0);
            v
        })
        .collect();
    let report = check_flattening(std::slice::from_ref(&s), &e).unwrap();
    assert!(report.decision);

    let basis = meyer_basis(dim, 1).unwrap();
    let plan = make_plan(&report, &basis, dim).unwrap();
    // d(x_k) = 2^{-k} so the full-window budget is 1 − 2^{-24} -> 1.
    assert!(plan.budget_total <= 2.0);
    let expected = 1.0 - 2.0f64.powi(-(dim as i32));
    assert!(
        (plan.budget_total - expected).abs() <= 1e-12,
        "budget {} != {expected}",
        plan.budget_total
    );
    assert!((plan.budget_total - 1.0).abs() <= 1e-6);

    let unitary = build_unitary(&plan, dim).unwrap();
    let grid = SampleGrid::uniform(64, basis.grid.halfwidth());
    let sm = smooth_kernel(&s, &plan, &unitary, &basis, 0, 0, &grid).unwrap();

    // Quadrature fidelity against U S U^{-1} for well-resolved indices.
    let qm = sm.quadrature_matrix(&basis, 8);
    let mut qdev = 0.0f64;
    for m in 0..8 {
        for n in 0..8 {
            qdev = qdev.max((qm[(m, n)] - sm.transformed.entries[(m, n)]).norm());
        }
    }
    assert!(qdev <= 1e-6, "quadrature fidelity {qdev:.3e} > 1e-6");

    // Conjugate-transpose consistency on the square sample grid.
    let mut ct = 0.0f64;
    for a in 0..grid.s_points.len() {
        for b in 0..grid.t_points.len() {
            ct = ct.max((sm.samples[(a, b)] - sm.samples_adjoint[(b, a)].conj()).norm());
        }
    }
    assert!(ct <= 1e-8, "conjugate-transpose deviation {ct:.3e} > 1e-8");

    // Family linearity: z = (1/2, 1/2) of two commuting diagonals.
    let diag2: Vec<C64> = (0..dim)
        .map(|k| c(8.0f64.powi(-(k as i32 + 3)), 0.0))
        .collect();
    let s2 = OperatorMatrix::from_diag(&diag2);
    let family = vec![s.clone(), s2.clone()];
    let z = [c(0.5, 0.0), c(0.5, 0.0)];
    let fam_report = check_flattening(&family, &e).unwrap();
    let fam =
        smooth_family(&family, &z, &fam_report, &plan, &unitary, &basis, 0, 0, &grid).unwrap();
    let k2 = smooth_kernel(&s2, &plan, &unitary, &basis, 0, 0, &grid).unwrap();
    let expect = sm.samples.scale(z[0]).add(&k2.samples.scale(z[1]));
    let lin = expect.sub(&fam.smoothed.samples).norm_max();
    assert!(lin <= 1e-10, "family linearity deviation {lin:.3e} > 1e-10");
    assert!(fam.norm_bound_slack <= 1e-12);

    pass_line(
        8,
        &format!(
            "smoothing: budget {:.6} (-> 1), quadrature {qdev:.2e}, conj-transpose {ct:.2e}, linearity {lin:.2e}",
            plan.budget_total
        ),
        start.elapsed().as_secs_f64(),
        60.0,
    );
}

#[test]
fn criterion_09_eigen_expansion() {
    let start = Instant::now();
    let n = 8;
    let basis = hermite_basis(n, 1).unwrap();
    let diag: Vec<C64> = (0..n)
        .map(|k| c(2.0f64.powi(-(k as i32 + 1)), 0.0))
        .collect();
    let mut h = OperatorMatrix::from_diag(&diag);
    h.basis_id = basis.id.clone();
    let s_zero = h.with_entries(CMatrix::zeros(n, n));
    let grid = SampleGrid::uniform(48, basis.grid.halfwidth());

    let ee = eigen_expansion(&h, &s_zero, &basis, c(0.25, 0.0), 0, 0, &grid).unwrap();
    assert!(
        ee.eigen_residual <= 1e-9,
        "eigen relation residual {:.3e} > 1e-9",
        ee.eigen_residual
    );
    assert!(
        ee.biorthogonality_residual <= 1e-9,
        "biorthogonality residual {:.3e} > 1e-9",
        ee.biorthogonality_residual
    );

    // λ = 0 reduction equals the bilinear kernel of the factorization.
    let ee0 = eigen_expansion(&h, &s_zero, &basis, c(0.0, 0.0), 0, 0, &grid).unwrap();
    let fact = polar_m_factorization(&h).unwrap();
    let bk = bilinear_kernel(&fact, None, &basis, 0, 0, &grid).unwrap();
    let dev = ee0.kernel.samples.sub(&bk.samples).norm_max();
    assert!(dev <= 1e-10, "lambda-zero reduction deviation {dev:.3e} > 1e-10");

    pass_line(
        9,
        &format!(
            "eigen-expansion: relations {:.2e}/{:.2e}, lambda-zero reduction {dev:.2e}",
            ee.eigen_residual, ee.biorthogonality_residual
        ),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}

#[test]
fn criterion_10_derivative_expansion() {
    let start = Instant::now();
    let n = 10;
    let (basis, _t, fact) = diagonal_hermite(n, 1);
    let grid = SampleGrid::uniform(64, basis.grid.halfwidth());
    let kernel = bilinear_kernel(&fact, None, &basis, 1, 1, &grid).unwrap();

    // Oracle: Σ λ_n h_n'(s) h_n'(t) with the derivative ladder evaluated
    // directly.
    let mut worst = 0.0f64;
    for (a, &s) in grid.s_points.iter().enumerate() {
        for (b, &t) in grid.t_points.iter().enumerate() {
            let mut direct = c(0.0, 0.0);
            for k in 0..n {
                let lam = 2.0f64.powi(-(k as i32 + 1));
                direct += c(lam, 0.0) * basis.eval(k, s, 1) * basis.eval(k, t, 1).conj();
            }
            worst = worst.max((direct - kernel.samples[(a, b)]).norm());
        }
    }
    assert!(worst <= 1e-8, "derivative kernel deviation {worst:.3e} > 1e-8");

    pass_line(
        10,
        &format!("derivative expansion: D1 D2 kernel matches the derivative sum to {worst:.2e}"),
        start.elapsed().as_secs_f64(),
        10.0,
    );
}
