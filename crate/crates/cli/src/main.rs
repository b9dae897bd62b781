//! mercer-kit command line.
//!
//! Every subcommand reads one JSON config, runs a pipeline, writes its
//! artifacts plus a machine-readable report with all residuals next to
//! their tolerances, and exits 0 only if every certificate passed.
//! Exit codes: 1 validation failure, 2 numerical certificate failure,
//! 3 lambda not regular.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use mercer_core::basis::{
    build_hermite_basis, build_meyer_bell, enumerate_wavelet_basis, hermite_halfwidth,
    standard_meyer_edges, synthesize_mother_wavelet, BasisKind, OrthonormalBasis, QuadratureGrid,
    DEFAULT_FFT_SIZE,
};
use mercer_core::expand::{
    apply_expansion, bilinear_kernel, carleman_functions, mercer_diagnostics, SampleGrid,
};
use mercer_core::fenyo::{fenyo_bilinear_kernel, fenyo_decompose, fenyo_reconstruct};
use mercer_core::formats::{self, Certificate, Report, RunConfig};
use mercer_core::linalg::vec_norm;
use mercer_core::opcore::{
    mplus_check, polar_m_factorization, riesz_factorization, OperatorMatrix,
};
use mercer_core::resolvent::{
    regular_value, resolvent_gram_residual, resolvent_kernel, solve_by_kernel, solve_second_kind,
};
use mercer_core::smoothing::{
    build_unitary, check_flattening, make_plan, smooth_family, smooth_kernel, split_operator,
};
use mercer_core::Error;

#[derive(Parser)]
#[command(name = "mercer-kit", version, about = "Bilinear kernel expansions, Fredholm resolvents, and operator smoothing at finite truncation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the run configuration JSON.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Output directory for artifacts and the report.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for all randomized test vectors.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Multiplier applied to every certificate tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Build a basis and export it (JSON + sampled CSV).
    Basis,
    /// Polar or Riesz factorization with membership certificates.
    Factorize,
    /// Bilinear kernel, Carleman functions, and image expansion.
    Expand,
    /// Solve the second-kind equation by both routes.
    Solve,
    /// Generalized Schmidt decomposition and reconstruction report.
    Fenyo,
    /// The flattening/pairing/splitting smoothing pipeline.
    Smooth,
    /// q-identity and diagonal non-negativity diagnostics.
    Diagnose,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(report) => {
            if report.passed {
                eprintln!("ok: all {} certificates passed", report.certificates.len());
                ExitCode::SUCCESS
            } else {
                for c in report.certificates.iter().filter(|c| !c.pass) {
                    eprintln!(
                        "certificate failed: {} (residual {:.3e}, tolerance {:.3e})",
                        c.name, c.residual, c.tolerance
                    );
                }
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.downcast_ref::<Error>() {
                Some(Error::NotRegular { .. }) => 3,
                Some(Error::NumericalFailure { .. }) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("MERCER_KIT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let n = n.max(1);
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
    tol_scale: f64,
}

impl Ctx {
    fn tol(&self, t: f64) -> f64 {
        t * self.tol_scale
    }

    fn load_matrix(&self, rel: &str) -> anyhow::Result<OperatorMatrix> {
        Ok(formats::load_matrix(&formats::resolve_path(&self.base, rel))?)
    }

    fn write(&self, name: &str, content: &str, report: &mut Report) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, content)?;
        report.outputs.push(path.display().to_string());
        Ok(path)
    }
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    if cli.tol_scale <= 0.0 {
        anyhow::bail!("--tol-scale must be positive");
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", cli.config.display()))?;
    let cfg = formats::parse_run_config(&text)?;
    let base = cli
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    formats::validate_config_paths(&cfg, &base)?;
    std::fs::create_dir_all(&cli.out)?;

    let ctx = Ctx {
        cfg,
        base,
        out: cli.out.clone(),
        seed: cli.seed,
        tol_scale: cli.tol_scale,
    };
    let mut report = match cli.command {
        Command::Basis => run_basis(&ctx)?,
        Command::Factorize => run_factorize(&ctx)?,
        Command::Expand => run_expand(&ctx)?,
        Command::Solve => run_solve(&ctx)?,
        Command::Fenyo => run_fenyo(&ctx)?,
        Command::Smooth => run_smooth(&ctx)?,
        Command::Diagnose => run_diagnose(&ctx)?,
    };
    let path = ctx.out.join("report.json");
    std::fs::write(&path, report.to_json())?;
    report.outputs.push(path.display().to_string());
    Ok(report)
}

fn build_basis(ctx: &Ctx) -> anyhow::Result<OrthonormalBasis> {
    let spec = &ctx.cfg.basis;
    let basis = match spec.kind {
        BasisKind::Hermite => {
            let halfwidth = spec
                .grid
                .halfwidth
                .unwrap_or_else(|| hermite_halfwidth(spec.count, spec.i_max));
            let grid = QuadratureGrid::composite(
                halfwidth,
                spec.grid.panels_per_unit,
                spec.grid.points_per_panel,
            )?;
            build_hermite_basis(spec.count, spec.i_max, grid)?
        }
        BasisKind::Wavelet => {
            let (lo, hi) = standard_meyer_edges();
            let bell = build_meyer_bell(lo, hi)?;
            let fft_size = spec.fft_size.unwrap_or(DEFAULT_FFT_SIZE);
            let mother = synthesize_mother_wavelet(&bell, fft_size, spec.i_max)?;
            enumerate_wavelet_basis(&mother, spec.count, spec.i_max)?
        }
    };
    Ok(basis)
}

fn run_basis(ctx: &Ctx) -> anyhow::Result<Report> {
    let mut report = Report::new("basis", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;
    let gram_tol = match basis.kind {
        BasisKind::Hermite => ctx.tol(1e-10),
        BasisKind::Wavelet => ctx.tol(1e-6),
    };
    report.push(Certificate::new(
        "gram_max_deviation",
        basis.gram_deviation(),
        gram_tol,
    ));

    let export = formats::basis_to_export(&basis);
    ctx.write(
        "basis.json",
        &serde_json::to_string_pretty(&export)?,
        &mut report,
    )?;
    ctx.write("basis_samples.csv", &formats::basis_samples_csv(&basis), &mut report)?;
    Ok(report)
}

fn run_factorize(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .factorize
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"factorize\" section"))?;
    let mut report = Report::new("factorize", ctx.seed, ctx.tol_scale);
    let t = ctx.load_matrix(&spec.matrix)?;

    let fact = match spec.method.as_str() {
        "polar" => polar_m_factorization(&t)?,
        "riesz" => {
            let lambdas: Vec<C64> = spec
                .lambdas
                .ok_or_else(|| anyhow::anyhow!("riesz method requires \"lambdas\""))?
                .iter()
                .map(|[re, im]| C64::new(*re, *im))
                .collect();
            let k = spec
                .k_indices
                .ok_or_else(|| anyhow::anyhow!("riesz method requires \"k_indices\""))?;
            let m = spec
                .m_indices
                .ok_or_else(|| anyhow::anyhow!("riesz method requires \"m_indices\""))?;
            let a = match &spec.a_matrix {
                Some(p) => ctx.load_matrix(p)?,
                None => OperatorMatrix::identity(t.dim()),
            };
            let b = match &spec.b_matrix {
                Some(p) => ctx.load_matrix(p)?,
                None => OperatorMatrix::identity(t.dim()),
            };
            riesz_factorization(&a, &b, &lambdas, &k, &m)?
        }
        other => anyhow::bail!("unknown factorization method {other:?}"),
    };

    report.push(Certificate::new(
        "factorization_residual",
        fact.residual_t,
        ctx.tol(1e-10) * (1.0 + t.norm_fro()),
    ));
    report.push(Certificate::new(
        "vv_membership_residual",
        fact.residual_membership[0],
        ctx.tol(1e-8),
    ));
    report.push(Certificate::new(
        "ww_membership_residual",
        fact.residual_membership[1],
        ctx.tol(1e-8),
    ));
    let vv = fact.v.matmul(&fact.v.adjoint())?;
    let ww = fact.w.matmul(&fact.w.adjoint())?;
    for (name, p) in [("vv", &vv), ("ww", &ww)] {
        let rep = mplus_check(p, &t)?;
        report.push(Certificate::new(
            format!("{name}_hermitian_defect"),
            rep.hermitian_defect,
            ctx.tol(1e-12),
        ));
        report.push(Certificate::new(
            format!("{name}_min_eigenvalue_floor"),
            (-rep.min_eigenvalue).max(0.0),
            ctx.tol(1e-10),
        ));
    }

    ctx.write("w.json", &formats::matrix_to_json(&fact.w), &mut report)?;
    ctx.write("v.json", &formats::matrix_to_json(&fact.v), &mut report)?;
    Ok(report)
}

fn run_expand(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .expand
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"expand\" section"))?;
    let mut report = Report::new("expand", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;
    let mut t = ctx.load_matrix(&spec.matrix)?;
    if t.dim() != basis.len() {
        anyhow::bail!(
            "matrix dimension {} does not match basis size {}",
            t.dim(),
            basis.len()
        );
    }
    t.basis_id = basis.id.clone();
    let fact = polar_m_factorization(&t)?;
    report.push(Certificate::new(
        "factorization_residual",
        fact.residual_t,
        ctx.tol(1e-10) * (1.0 + t.norm_fro()),
    ));

    let [i, j] = spec.orders;
    let grid = SampleGrid::uniform(spec.sample_points.max(2), basis.grid.halfwidth());
    let lambda = spec.lambda.map(|[re, im]| C64::new(re, im));
    let (kernel, resolvent) = match lambda {
        Some(lam) if lam.norm() > 0.0 => {
            let rc = regular_value(&t, lam)?;
            report.push(Certificate::new(
                "resolvent_gram_identity",
                resolvent_gram_residual(&fact, &rc)?,
                ctx.tol(1e-9) * (1.0 + fact.w.norm_fro().powi(2)),
            ));
            let k = resolvent_kernel(&fact, &rc, &basis, i, j, &grid)?;
            (k, Some(rc))
        }
        _ => (bilinear_kernel(&fact, None, &basis, i, j, &grid)?, None),
    };

    report.push(Certificate::new(
        "kernel_sample_consistency",
        kernel.sample_consistency(&basis),
        ctx.tol(1e-12),
    ));
    // Quadrature consistency against the matrix the kernel represents.
    let n_check = basis.len().min(8);
    if i == 0 && j == 0 {
        let target = match &resolvent {
            Some(rc) => t.matmul(&rc.resolvent)?,
            None => t.clone(),
        };
        let qm = kernel.quadrature_matrix(&basis, n_check);
        let mut worst = 0.0f64;
        for m in 0..n_check {
            for n in 0..n_check {
                worst = worst.max((qm[(m, n)] - target.entries[(m, n)]).norm());
            }
        }
        report.push(Certificate::new(
            "kernel_quadrature_consistency",
            worst,
            ctx.tol(1e-6),
        ));
    }

    // Carleman functions and a seeded random-image agreement check.
    let (tl, tp) = carleman_functions(&fact, resolvent.as_ref().map(|r| &r.resolvent), &basis, i)?;
    let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
    let f: Vec<C64> = (0..basis.len())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let image = apply_expansion(&fact, resolvent.as_ref().map(|r| &r.resolvent), &basis, &f, i)?;
    let matrix_route = match &resolvent {
        Some(rc) => rc.t_lambda.apply(&f),
        None => t.apply(&f),
    };
    let mut worst = 0.0f64;
    for (k, &s) in image.points.iter().enumerate() {
        let direct = basis.eval_combination(&matrix_route, s, i);
        worst = worst.max((image.values[k] - direct).norm());
    }
    report.push(Certificate::new(
        "expansion_route_agreement",
        worst,
        ctx.tol(1e-9) * (1.0 + vec_norm(&matrix_route)),
    ));

    ctx.write("kernel.csv", &formats::kernel_to_csv(&kernel), &mut report)?;
    ctx.write(
        "kernel_meta.json",
        &serde_json::to_string_pretty(&formats::kernel_metadata(&kernel))?,
        &mut report,
    )?;
    // Carleman norms as a compact CSV.
    let mut carleman = String::from("s,norm_t,norm_t_prime\n");
    for (k, &s) in tl.points.iter().enumerate() {
        carleman.push_str(&format!("{s},{},{}\n", tl.norms[k], tp.norms[k]));
    }
    ctx.write("carleman_norms.csv", &carleman, &mut report)?;

    if let Some(fpath) = &spec.f_vector {
        let fv = formats::load_vector(&formats::resolve_path(&ctx.base, fpath))?;
        if fv.len() != basis.len() {
            anyhow::bail!("f vector length {} does not match basis", fv.len());
        }
        let img = apply_expansion(&fact, resolvent.as_ref().map(|r| &r.resolvent), &basis, &fv, i)?;
        let mut out = String::from("s,re,im\n");
        for (k, &s) in img.points.iter().enumerate() {
            out.push_str(&format!("{s},{},{}\n", img.values[k].re, img.values[k].im));
        }
        ctx.write("image_samples.csv", &out, &mut report)?;
    }
    Ok(report)
}

fn run_solve(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .solve
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"solve\" section"))?;
    let mut report = Report::new("solve", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;
    let mut t = ctx.load_matrix(&spec.matrix)?;
    if t.dim() != basis.len() {
        anyhow::bail!(
            "matrix dimension {} does not match basis size {}",
            t.dim(),
            basis.len()
        );
    }
    t.basis_id = basis.id.clone();
    let g = formats::load_vector(&formats::resolve_path(&ctx.base, &spec.g_vector))?;
    if g.len() != t.dim() {
        anyhow::bail!("g vector length {} does not match matrix", g.len());
    }
    let lambda = C64::new(spec.lambda[0], spec.lambda[1]);

    let rc = regular_value(&t, lambda)?;
    let n = t.dim() as f64;
    report.push(Certificate::new(
        "resolvent_identity_left",
        rc.identity_residuals[0],
        ctx.tol(1e-10) * n,
    ));
    report.push(Certificate::new(
        "resolvent_identity_right",
        rc.identity_residuals[1],
        ctx.tol(1e-10) * n,
    ));
    let sol = solve_second_kind(&rc, &g)?;
    report.push(Certificate::new(
        "second_kind_residual",
        sol.residual,
        ctx.tol(1e-8) * (1.0 + vec_norm(&g)),
    ));

    // Kernel route on the quadrature grid, cross-checked pointwise.
    let fact = polar_m_factorization(&t)?;
    let qgrid = SampleGrid::quadrature(&basis);
    let kernel = resolvent_kernel(&fact, &rc, &basis, 0, 0, &qgrid)?;
    let g_samples = basis.combination_on_grid(&g, 0);
    let f_kernel = solve_by_kernel(&kernel, lambda, &g_samples, &basis)?;
    let f_direct = basis.combination_on_grid(&sol.f, 0);
    let mut worst = 0.0f64;
    for (a, b) in f_kernel.iter().zip(&f_direct) {
        worst = worst.max((a - b).norm());
    }
    let f_scale = f_direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
    report.push(Certificate::new(
        "kernel_route_agreement",
        worst,
        ctx.tol(1e-6) * (1.0 + f_scale),
    ));

    ctx.write("f.csv", &formats::vector_to_csv(&sol.f), &mut report)?;
    let mut samples = String::from("s,re,im\n");
    for (k, &s) in basis.grid.nodes().iter().enumerate() {
        samples.push_str(&format!("{s},{},{}\n", f_direct[k].re, f_direct[k].im));
    }
    ctx.write("f_samples.csv", &samples, &mut report)?;
    Ok(report)
}

fn run_fenyo(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .fenyo
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"fenyo\" section"))?;
    let mut report = Report::new("fenyo", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;
    let mut t = ctx.load_matrix(&spec.matrix)?;
    if t.dim() != basis.len() {
        anyhow::bail!(
            "matrix dimension {} does not match basis size {}",
            t.dim(),
            basis.len()
        );
    }
    t.basis_id = basis.id.clone();

    let dec = fenyo_decompose(&t)?;
    report.push(Certificate::new(
        "orthonormality_defect",
        dec.orthonormality_defect(),
        ctx.tol(1e-10),
    ));
    let svd = mercer_core::opcore::svd(&t)?;
    let op_norm = svd.singular_values.first().cloned().unwrap_or(0.0);
    let bound_slack = dec
        .alpha
        .iter()
        .chain(dec.beta.iter())
        .map(|v| v - op_norm)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    report.push(Certificate::new(
        "sequence_bound_slack",
        bound_slack,
        ctx.tol(1e-9),
    ));

    let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
    let t_norm = t.norm_fro();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f: Vec<C64> = (0..t.dim())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let (r1, r2) = fenyo_reconstruct(&dec, &f);
        let direct = t.apply(&f);
        let f_norm = vec_norm(&f).max(1e-300);
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for k in 0..t.dim() {
            d1 += (r1[k] - direct[k]).norm_sqr();
            d2 += (r2[k] - direct[k]).norm_sqr();
        }
        worst = worst.max(d1.sqrt() / (t_norm.max(1e-300) * f_norm));
        worst = worst.max(d2.sqrt() / (t_norm.max(1e-300) * f_norm));
    }
    report.push(Certificate::new(
        "reconstruction_relative_residual",
        worst,
        ctx.tol(1e-9),
    ));

    let [i, j] = spec.orders;
    let grid = SampleGrid::uniform(spec.sample_points.max(2), basis.grid.halfwidth());
    let kr = fenyo_bilinear_kernel(&dec, &t, &basis, i, j, &grid)?;
    let ktol = ctx.tol(1e-8) * (1.0 + t_norm);
    report.push(Certificate::new(
        "kernel_first_form_deviation",
        kr.max_deviation_first,
        ktol,
    ));
    report.push(Certificate::new(
        "kernel_second_form_deviation",
        kr.max_deviation_second,
        ktol,
    ));

    ctx.write(
        "decomposition.json",
        &formats::decomposition_to_json(&dec),
        &mut report,
    )?;
    Ok(report)
}

fn run_smooth(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .smooth
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"smooth\" section"))?;
    let mut report = Report::new("smooth", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;

    let mut family = Vec::new();
    for path in &spec.family {
        let mut s = ctx.load_matrix(path)?;
        if s.dim() != basis.len() {
            anyhow::bail!(
                "family member dimension {} does not match basis size {}",
                s.dim(),
                basis.len()
            );
        }
        s.basis_id.clear();
        family.push(s);
    }
    let dim = family[0].dim();

    let e_vectors: Vec<Vec<C64>> = match &spec.e_sequence {
        Some(path) => {
            let m = ctx.load_matrix(path)?;
            (0..m.dim()).map(|k| m.entries.column(k)).collect()
        }
        None => (0..dim)
            .map(|k| {
                let mut e = vec![C64::new(0.0, 0.0); dim];
                e[k] = C64::new(1.0, 0.0);
                e
            })
            .collect(),
    };

    let flat = check_flattening(&family, &e_vectors)?;
    report.push(Certificate::flag("flattening_decision", flat.decision));
    if !flat.decision {
        return Ok(report);
    }
    let plan = make_plan(&flat, &basis, spec.window)?;
    report.push(Certificate::new(
        "budget_total",
        plan.budget_total,
        mercer_core::smoothing::BUDGET,
    ));
    let unitary = build_unitary(&plan, dim)?;
    report.push(Certificate::new(
        "unitarity_defect",
        unitary
            .entries
            .adjoint()
            .matmul(&unitary.entries)
            .max_deviation_from_identity(),
        ctx.tol(1e-14),
    ));

    let coeffs: Vec<C64> = match &spec.coefficients {
        Some(z) => z.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
        None => {
            let w = 1.0 / family.len() as f64;
            vec![C64::new(w, 0.0); family.len()]
        }
    };
    let [i, j] = spec.orders;
    let grid = SampleGrid::uniform(spec.sample_points.max(2), basis.grid.halfwidth());

    let first = &family[0];
    let split = split_operator(first, &plan)?;
    report.push(Certificate::new(
        "split_exactness",
        split.reassembly_residuals[0].max(split.reassembly_residuals[1]),
        ctx.tol(1e-12) * (1.0 + first.norm_fro()),
    ));

    let smoothed = smooth_kernel(first, &plan, &unitary, &basis, i, j, &grid)?;
    report.push(Certificate::new(
        "component_split_residual",
        smoothed.split_residual,
        ctx.tol(1e-10) * (1.0 + first.norm_fro()),
    ));
    let component_sum = smoothed
        .samples_p_tilde
        .add(&smoothed.samples_f_tilde)
        .sub(&smoothed.samples)
        .norm_max();
    report.push(Certificate::new(
        "component_sample_sum",
        component_sum,
        ctx.tol(1e-12),
    ));
    let c_slack = smoothed
        .c_values
        .iter()
        .zip(&plan.d_values)
        .map(|(c, d)| c - d)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    report.push(Certificate::new("c_below_d_slack", c_slack, ctx.tol(1e-12)));

    // Conjugate-transpose consistency on the square sample grid.
    let ns = grid.s_points.len();
    let mut ct = 0.0f64;
    for a in 0..ns {
        for b in 0..ns {
            ct = ct.max(
                (smoothed.samples[(a, b)] - smoothed.samples_adjoint[(b, a)].conj()).norm(),
            );
        }
    }
    report.push(Certificate::new(
        "conjugate_transpose_consistency",
        ct,
        ctx.tol(1e-8),
    ));

    let n_check = dim.min(6);
    let qm = smoothed.quadrature_matrix(&basis, n_check);
    let mut qdev = 0.0f64;
    for m in 0..n_check {
        for n in 0..n_check {
            qdev = qdev.max((qm[(m, n)] - smoothed.transformed.entries[(m, n)]).norm());
        }
    }
    report.push(Certificate::new(
        "kernel_quadrature_fidelity",
        qdev,
        ctx.tol(1e-6),
    ));

    if family.len() > 1 {
        let fam = smooth_family(
            &family, &coeffs, &flat, &plan, &unitary, &basis, i, j, &grid,
        )?;
        report.push(Certificate::new(
            "family_norm_bound_slack",
            fam.norm_bound_slack.max(0.0),
            ctx.tol(1e-12),
        ));
        ctx.write(
            "family_kernel.csv",
            &smoothed_kernel_csv(&fam.smoothed, i, j),
            &mut report,
        )?;
    }

    ctx.write("plan.json", &formats::plan_to_json(&plan), &mut report)?;
    ctx.write(
        "kernel.csv",
        &smoothed_kernel_csv(&smoothed, i, j),
        &mut report,
    )?;
    Ok(report)
}

fn smoothed_kernel_csv(sm: &mercer_core::smoothing::SmoothedOperator, i: usize, j: usize) -> String {
    let mut out = String::from("i,j,s,t,re,im\n");
    for (a, &s) in sm.grid.s_points.iter().enumerate() {
        for (b, &t) in sm.grid.t_points.iter().enumerate() {
            let v = sm.samples[(a, b)];
            out.push_str(&format!("{i},{j},{s},{t},{},{}\n", v.re, v.im));
        }
    }
    out
}

fn run_diagnose(ctx: &Ctx) -> anyhow::Result<Report> {
    let spec = ctx
        .cfg
        .diagnose
        .clone()
        .ok_or_else(|| anyhow::anyhow!("config is missing the \"diagnose\" section"))?;
    let mut report = Report::new("diagnose", ctx.seed, ctx.tol_scale);
    let basis = build_basis(ctx)?;
    let mut v = ctx.load_matrix(&spec.matrix)?;
    if v.dim() != basis.len() {
        anyhow::bail!(
            "matrix dimension {} does not match basis size {}",
            v.dim(),
            basis.len()
        );
    }
    v.basis_id = basis.id.clone();

    let rep = mercer_diagnostics(&v, &basis, spec.ell, spec.m, &spec.rectangles)?;
    for (k, r) in rep.rectangles.iter().enumerate() {
        report.push(Certificate::new(
            format!("q_identity_rect_{k}"),
            r.deviation,
            ctx.tol(1e-8),
        ));
    }
    report.push(Certificate::new(
        "diagonal_nonnegativity_floor",
        (-rep.diagonal_min_residual).max(0.0),
        ctx.tol(1e-10),
    ));
    // Full partial sums leave no diagonal remainder.
    if spec.m == basis.len() {
        report.push(Certificate::new(
            "diagonal_completeness",
            rep.diagonal_max_residual.abs(),
            ctx.tol(1e-8),
        ));
    }

    let detail = serde_json::to_string_pretty(&rep.rectangles)?;
    ctx.write("rectangles.json", &detail, &mut report)?;
    Ok(report)
}
