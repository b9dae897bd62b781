//! File formats: matrix JSON/CSV, coefficient-vector CSV, basis export,
//! kernel CSV with metadata, decomposition JSON, run configuration, and
//! the machine-readable report.
//!
//! Parsing is split into pure `parse_*` functions over strings (no I/O) so
//! untrusted inputs can be exercised directly; `load_*`/`save_*` wrap them
//! with the filesystem.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, OrthonormalBasis};
use crate::expand::KernelApprox;
use crate::fenyo::FenyoDecomposition;
use crate::linalg::CMatrix;
use crate::opcore::OperatorMatrix;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn fmt_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

// ---------------------------------------------------------------------------
// Matrix JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    #[serde(default)]
    basis_id: String,
    /// Row-major [re, im] pairs.
    entries: Vec<[f64; 2]>,
}

pub fn parse_matrix_json(text: &str) -> Result<OperatorMatrix> {
    let raw: MatrixJson = serde_json::from_str(text).map_err(fmt_err)?;
    if raw.n == 0 {
        return Err(Error::Format("matrix dimension must be positive".into()));
    }
    if raw.n > 4096 {
        return Err(Error::Format(format!("matrix dimension {} too large", raw.n)));
    }
    let expected = raw
        .n
        .checked_mul(raw.n)
        .ok_or_else(|| Error::Format("matrix dimension overflow".into()))?;
    if raw.entries.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} entries for n = {}, got {}",
            raw.n,
            raw.entries.len()
        )));
    }
    let mut m = CMatrix::zeros(raw.n, raw.n);
    for (k, [re, im]) in raw.entries.iter().enumerate() {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Format(format!("non-finite entry at index {k}")));
        }
        m[(k / raw.n, k % raw.n)] = C64::new(*re, *im);
    }
    OperatorMatrix::new(m, raw.basis_id)
}

pub fn matrix_to_json(op: &OperatorMatrix) -> String {
    let n = op.dim();
    let entries: Vec<[f64; 2]> = (0..n * n)
        .map(|k| {
            let v = op.entries[(k / n, k % n)];
            [v.re, v.im]
        })
        .collect();
    serde_json::to_string_pretty(&MatrixJson {
        n,
        basis_id: op.basis_id.clone(),
        entries,
    })
    .expect("matrix serialization cannot fail")
}

pub fn load_matrix(path: &Path) -> Result<OperatorMatrix> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_matrix_csv(&text),
        _ => parse_matrix_json(&text),
    }
}

pub fn save_matrix_json(op: &OperatorMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, matrix_to_json(op))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Matrix CSV: row, col, re, im
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
struct MatrixCsvRow {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

pub fn parse_matrix_csv(text: &str) -> Result<OperatorMatrix> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cells: Vec<MatrixCsvRow> = Vec::new();
    let mut max_index = 0usize;
    for record in reader.deserialize() {
        let row: MatrixCsvRow = record.map_err(fmt_err)?;
        if !row.re.is_finite() || !row.im.is_finite() {
            return Err(Error::Format("non-finite matrix entry".into()));
        }
        // Cap the implied dimension so a one-line file cannot demand a
        // huge allocation.
        if row.row > 1024 || row.col > 1024 {
            return Err(Error::Format("matrix index out of supported range".into()));
        }
        max_index = max_index.max(row.row).max(row.col);
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(Error::Format("empty matrix CSV".into()));
    }
    let n = max_index + 1;
    let mut m = CMatrix::zeros(n, n);
    for cell in cells {
        m[(cell.row, cell.col)] = C64::new(cell.re, cell.im);
    }
    OperatorMatrix::new(m, "")
}

pub fn matrix_to_csv(op: &OperatorMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in 0..op.dim() {
        for col in 0..op.dim() {
            let v = op.entries[(row, col)];
            w.serialize(MatrixCsvRow {
                row,
                col,
                re: v.re,
                im: v.im,
            })
            .expect("csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

// ---------------------------------------------------------------------------
// Coefficient-vector CSV: index, re, im
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
struct VectorCsvRow {
    index: usize,
    re: f64,
    im: f64,
}

pub fn parse_vector_csv(text: &str) -> Result<Vec<C64>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut entries: Vec<(usize, C64)> = Vec::new();
    for record in reader.deserialize() {
        let row: VectorCsvRow = record.map_err(fmt_err)?;
        if !row.re.is_finite() || !row.im.is_finite() {
            return Err(Error::Format("non-finite vector entry".into()));
        }
        if row.index > 65536 {
            return Err(Error::Format("vector index out of supported range".into()));
        }
        entries.push((row.index, C64::new(row.re, row.im)));
    }
    if entries.is_empty() {
        return Err(Error::Format("empty vector CSV".into()));
    }
    let n = entries.iter().map(|(i, _)| *i).max().unwrap_or(0) + 1;
    let mut v = vec![C64::new(0.0, 0.0); n];
    for (i, z) in entries {
        v[i] = z;
    }
    Ok(v)
}

pub fn vector_to_csv(v: &[C64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (index, z) in v.iter().enumerate() {
        w.serialize(VectorCsvRow {
            index,
            re: z.re,
            im: z.im,
        })
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

pub fn load_vector(path: &Path) -> Result<Vec<C64>> {
    parse_vector_csv(&std::fs::read_to_string(path)?)
}

pub fn save_vector_csv(v: &[C64], path: &Path) -> Result<()> {
    std::fs::write(path, vector_to_csv(v))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Basis export
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct BasisExport {
    pub kind: BasisKind,
    pub count: usize,
    pub i_max: usize,
    pub grid: BasisGridExport,
    pub functions: Vec<BasisFunctionExport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BasisGridExport {
    #[serde(rename = "L")]
    pub halfwidth: f64,
    pub nodes_per_unit: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BasisFunctionExport {
    pub index: String,
    #[serde(rename = "N_n")]
    pub n_factor: f64,
}

pub fn basis_to_export(basis: &OrthonormalBasis) -> BasisExport {
    BasisExport {
        kind: basis.kind,
        count: basis.len(),
        i_max: basis.i_max,
        grid: BasisGridExport {
            halfwidth: basis.grid.halfwidth(),
            nodes_per_unit: basis.grid.panels_per_unit() * basis.grid.points_per_panel(),
        },
        functions: basis
            .functions
            .iter()
            .map(|f| BasisFunctionExport {
                index: f.index.to_string(),
                n_factor: f.n_factor,
            })
            .collect(),
    }
}

/// Sampled values CSV: columns n, i, s, re, im on a uniform 256-point grid
/// over the basis window.
pub fn basis_samples_csv(basis: &OrthonormalBasis) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    #[derive(Serialize)]
    struct Row {
        n: usize,
        i: usize,
        s: f64,
        re: f64,
        im: f64,
    }
    let points = 256usize;
    let l = basis.grid.halfwidth();
    for n in 0..basis.len() {
        for i in 0..=basis.i_max {
            for k in 0..points {
                let s = -l + 2.0 * l * k as f64 / (points - 1) as f64;
                let v = basis.eval(n, s, i);
                w.serialize(Row {
                    n,
                    i,
                    s,
                    re: v.re,
                    im: v.im,
                })
                .expect("csv write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

// ---------------------------------------------------------------------------
// Kernel CSV + metadata
// ---------------------------------------------------------------------------

pub fn kernel_to_csv(kernel: &KernelApprox) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    #[derive(Serialize)]
    struct Row {
        i: usize,
        j: usize,
        s: f64,
        t: f64,
        re: f64,
        im: f64,
    }
    let (i, j) = kernel.orders;
    for (a, &s) in kernel.grid.s_points.iter().enumerate() {
        for (b, &t) in kernel.grid.t_points.iter().enumerate() {
            let v = kernel.samples[(a, b)];
            w.serialize(Row {
                i,
                j,
                s,
                t,
                re: v.re,
                im: v.im,
            })
            .expect("csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelMetadata {
    pub lambda: [f64; 2],
    pub truncation: usize,
    pub tail_bound: f64,
    pub orders: [usize; 2],
    pub basis_id: String,
}

pub fn kernel_metadata(kernel: &KernelApprox) -> KernelMetadata {
    KernelMetadata {
        lambda: [kernel.lambda.re, kernel.lambda.im],
        truncation: kernel.truncation,
        tail_bound: kernel.tail_bound,
        orders: [kernel.orders.0, kernel.orders.1],
        basis_id: kernel.basis_id.clone(),
    }
}

// ---------------------------------------------------------------------------
// Decomposition JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub kappa: Vec<[f64; 2]>,
    pub mu: Vec<[f64; 2]>,
    pub x: Vec<Vec<[f64; 2]>>,
    pub y: Vec<Vec<[f64; 2]>>,
}

fn vec_to_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn decomposition_to_json(dec: &FenyoDecomposition) -> String {
    let out = DecompositionJson {
        kappa: vec_to_pairs(&dec.kappa),
        mu: vec_to_pairs(&dec.mu),
        x: dec.x.iter().map(|v| vec_to_pairs(v)).collect(),
        y: dec.y.iter().map(|v| vec_to_pairs(v)).collect(),
    };
    serde_json::to_string_pretty(&out).expect("decomposition serialization")
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub halfwidth: Option<f64>,
    #[serde(default = "default_panels")]
    pub panels_per_unit: usize,
    #[serde(default = "default_points")]
    pub points_per_panel: usize,
}

fn default_panels() -> usize {
    8
}

fn default_points() -> usize {
    10
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            halfwidth: None,
            panels_per_unit: default_panels(),
            points_per_panel: default_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub count: usize,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default)]
    pub grid: GridSpec,
    /// Synthesis length for the wavelet family.
    pub fft_size: Option<usize>,
}

fn default_i_max() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizeSpec {
    pub matrix: String,
    #[serde(default = "default_method")]
    pub method: String,
    /// Riesz data: lambdas as [re, im], and the two index maps.
    pub lambdas: Option<Vec<[f64; 2]>>,
    pub k_indices: Option<Vec<usize>>,
    pub m_indices: Option<Vec<usize>>,
    pub a_matrix: Option<String>,
    pub b_matrix: Option<String>,
}

fn default_method() -> String {
    "polar".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandSpec {
    pub matrix: String,
    pub lambda: Option<[f64; 2]>,
    #[serde(default)]
    pub orders: [usize; 2],
    /// Optional input vector for the image expansion.
    pub f_vector: Option<String>,
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
}

fn default_sample_points() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSpec {
    pub matrix: String,
    pub g_vector: String,
    pub lambda: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FenyoSpec {
    pub matrix: String,
    #[serde(default)]
    pub orders: [usize; 2],
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub family: Vec<String>,
    pub coefficients: Option<Vec<[f64; 2]>>,
    pub window: usize,
    #[serde(default, rename = "derivative_orders", alias = "orders")]
    pub orders: [usize; 2],
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
    /// Matrix file whose columns are the flattening sequence; the standard
    /// basis when absent.
    pub e_sequence: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseSpec {
    pub matrix: String,
    #[serde(default)]
    pub ell: usize,
    pub m: usize,
    pub rectangles: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub basis: BasisSpec,
    pub factorize: Option<FactorizeSpec>,
    pub expand: Option<ExpandSpec>,
    pub solve: Option<SolveSpec>,
    pub fenyo: Option<FenyoSpec>,
    pub smooth: Option<SmoothSpec>,
    pub diagnose: Option<DiagnoseSpec>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(fmt_err)?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema version {}",
            cfg.schema_version
        )));
    }
    if cfg.basis.count == 0 {
        return Err(Error::Format("basis count must be at least 1".into()));
    }
    if cfg.basis.count > 512 {
        return Err(Error::Format("basis count out of supported range".into()));
    }
    if cfg.basis.i_max > 8 {
        return Err(Error::Format("i_max out of supported range".into()));
    }
    if let Some(h) = cfg.basis.grid.halfwidth {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Format("grid halfwidth must be positive".into()));
        }
    }
    if cfg.basis.grid.panels_per_unit == 0
        || cfg.basis.grid.panels_per_unit > 64
        || cfg.basis.grid.points_per_panel == 0
        || cfg.basis.grid.points_per_panel > 32
    {
        return Err(Error::Format("grid resolution out of supported range".into()));
    }
    if let Some(f) = &cfg.factorize {
        if let Some(lams) = &f.lambdas {
            if !lams.iter().all(|p| p.iter().all(|v| v.is_finite())) {
                return Err(Error::Format("factorize.lambdas must be finite".into()));
            }
        }
    }
    if let Some(e) = &cfg.expand {
        if let Some(lam) = &e.lambda {
            if !lam.iter().all(|v| v.is_finite()) {
                return Err(Error::Format("expand.lambda must be finite".into()));
            }
        }
    }
    if let Some(s) = &cfg.solve {
        if !s.lambda.iter().all(|v| v.is_finite()) {
            return Err(Error::Format("solve.lambda must be finite".into()));
        }
    }
    if let Some(sm) = &cfg.smooth {
        if sm.family.is_empty() {
            return Err(Error::Format("smooth.family must be non-empty".into()));
        }
        if sm.window == 0 {
            return Err(Error::Format("smooth.window must be positive".into()));
        }
        if let Some(z) = &sm.coefficients {
            if z.len() != sm.family.len() {
                return Err(Error::Format(
                    "smooth.coefficients length must match the family".into(),
                ));
            }
            if !z.iter().all(|p| p.iter().all(|v| v.is_finite())) {
                return Err(Error::Format("smooth.coefficients must be finite".into()));
            }
        }
    }
    if let Some(d) = &cfg.diagnose {
        for r in &d.rectangles {
            if !(r.iter().all(|v| v.is_finite()) && r[0] < r[1] && r[2] < r[3]) {
                return Err(Error::Format(
                    "diagnose rectangle must be finite with a < b and c < d".into(),
                ));
            }
        }
    }
    Ok(cfg)
}

/// Check that every file the config references exists, resolving relative
/// paths against `base`.
pub fn validate_config_paths(cfg: &RunConfig, base: &Path) -> Result<()> {
    let mut paths: Vec<&String> = Vec::new();
    if let Some(f) = &cfg.factorize {
        paths.push(&f.matrix);
        if let Some(a) = &f.a_matrix {
            paths.push(a);
        }
        if let Some(b) = &f.b_matrix {
            paths.push(b);
        }
    }
    if let Some(e) = &cfg.expand {
        paths.push(&e.matrix);
        if let Some(f) = &e.f_vector {
            paths.push(f);
        }
    }
    if let Some(s) = &cfg.solve {
        paths.push(&s.matrix);
        paths.push(&s.g_vector);
    }
    if let Some(f) = &cfg.fenyo {
        paths.push(&f.matrix);
    }
    if let Some(s) = &cfg.smooth {
        for m in &s.family {
            paths.push(m);
        }
    }
    if let Some(d) = &cfg.diagnose {
        paths.push(&d.matrix);
    }
    for p in paths {
        let resolved = resolve_path(base, p);
        if !resolved.exists() {
            return Err(Error::InvalidArgument(format!(
                "referenced file does not exist: {}",
                resolved.display()
            )));
        }
    }
    Ok(())
}

pub fn resolve_path(base: &Path, p: &str) -> std::path::PathBuf {
    let pb = std::path::PathBuf::from(p);
    if pb.is_absolute() {
        pb
    } else {
        base.join(pb)
    }
}

// ---------------------------------------------------------------------------
// Smoothing plan export
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanExport {
    pub x_source_indices: Vec<usize>,
    pub d_values: Vec<f64>,
    pub budget_total: f64,
    pub m_indices: Vec<usize>,
    pub l_indices: Vec<usize>,
    pub n_factor_sum: f64,
    pub h_sup_sums: Vec<f64>,
    pub weighted_g_sums: Vec<f64>,
}

pub fn plan_to_json(plan: &crate::smoothing::SmoothingPlan) -> String {
    let out = PlanExport {
        x_source_indices: plan.x_source_indices.clone(),
        d_values: plan.d_values.clone(),
        budget_total: plan.budget_total,
        m_indices: plan.m_indices.clone(),
        l_indices: plan.l_indices.clone(),
        n_factor_sum: plan.n_factor_sum,
        h_sup_sums: plan.h_sup_sums.clone(),
        weighted_g_sums: plan.weighted_g_sums.clone(),
    };
    serde_json::to_string_pretty(&out).expect("plan serialization")
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Certificate {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Certificate {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// A certificate for a boolean condition with no meaningful residual.
    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Certificate {
            name: name.into(),
            residual: if pass { 0.0 } else { 1.0 },
            tolerance: 0.5,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub subcommand: String,
    pub seed: u64,
    pub tol_scale: f64,
    pub certificates: Vec<Certificate>,
    pub outputs: Vec<String>,
    pub passed: bool,
}

impl Report {
    pub fn new(subcommand: impl Into<String>, seed: u64, tol_scale: f64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.into(),
            seed,
            tol_scale,
            certificates: Vec::new(),
            outputs: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, cert: Certificate) {
        self.passed &= cert.pass;
        self.certificates.push(cert);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = OperatorMatrix::new(
            CMatrix::from_rows(&[
                vec![c(1.0, -2.0), c(0.5, 0.0)],
                vec![c(0.0, 3.25), c(-1.0, 1.0)],
            ]),
            "test-basis",
        )
        .unwrap();
        let text = matrix_to_json(&m);
        let back = parse_matrix_json(&text).unwrap();
        assert_eq!(back.basis_id, "test-basis");
        assert!(back.entries.sub(&m.entries).norm_fro() == 0.0);
    }

    #[test]
    fn matrix_json_rejects_bad_input() {
        assert!(parse_matrix_json("").is_err());
        assert!(parse_matrix_json("{}").is_err());
        assert!(parse_matrix_json(r#"{"n": 2, "entries": [[1.0, 0.0]]}"#).is_err());
        assert!(parse_matrix_json(r#"{"n": 0, "entries": []}"#).is_err());
        // NaN is not valid JSON; infinity encoded as a string is rejected
        assert!(parse_matrix_json(r#"{"n": 1, "entries": [["inf", 0.0]]}"#).is_err());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = OperatorMatrix::new(
            CMatrix::from_rows(&[
                vec![c(0.125, -1.5), c(2.0, 0.0)],
                vec![c(0.0, 0.0), c(1e-9, 7.0)],
            ]),
            "",
        )
        .unwrap();
        let text = matrix_to_csv(&m);
        let back = parse_matrix_csv(&text).unwrap();
        assert!(back.entries.sub(&m.entries).norm_fro() == 0.0);
    }

    #[test]
    fn vector_csv_round_trip_and_errors() {
        let v = vec![c(1.5, -0.25), c(0.0, 2.0), c(-3.0, 0.125)];
        let text = vector_to_csv(&v);
        let back = parse_vector_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&v) {
            assert_eq!(a, b);
        }
        assert!(parse_vector_csv("").is_err());
        assert!(parse_vector_csv("index,re,im\nzero,1.0,2.0\n").is_err());
    }

    #[test]
    fn run_config_minimal_and_validation() {
        let text = r#"{
            "basis": {"kind": "hermite", "count": 8}
        }"#;
        let cfg = parse_run_config(text).unwrap();
        assert_eq!(cfg.basis.count, 8);
        assert_eq!(cfg.basis.i_max, 3);
        assert_eq!(cfg.basis.grid.panels_per_unit, 8);

        assert!(parse_run_config(r#"{"basis": {"kind": "hermite", "count": 0}}"#).is_err());
        assert!(parse_run_config(r#"{"schema_version": 99, "basis": {"kind": "hermite", "count": 2}}"#).is_err());
        assert!(parse_run_config("not json").is_err());
    }

    #[test]
    fn config_path_validation() {
        let text = r#"{
            "basis": {"kind": "hermite", "count": 4},
            "solve": {"matrix": "missing.json", "g_vector": "missing.csv", "lambda": [0.0, 0.0]}
        }"#;
        let cfg = parse_run_config(text).unwrap();
        assert!(validate_config_paths(&cfg, Path::new("/nonexistent-base")).is_err());
    }

    #[test]
    fn report_pass_logic() {
        let mut r = Report::new("solve", 42, 1.0);
        r.push(Certificate::new("a", 1e-12, 1e-10));
        assert!(r.passed);
        r.push(Certificate::new("b", 1e-3, 1e-10));
        assert!(!r.passed);
        let text = r.to_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back.certificates.len(), 2);
        assert!(!back.passed);
    }
}
