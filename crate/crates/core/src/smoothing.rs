//! The unitary smoothing pipeline: verify the flattening condition on a
//! family of operators, select a budgeted subsequence, pair it with a
//! wavelet basis through a unitary, split each operator, and assemble
//! sampled kernels whose smoothness comes from the wavelet side.
//!
//! The finite truncation replaces the infinite subsequences of the
//! construction: a plan covers a window of the flattening sequence and
//! certifies partial-sum versions of the budget and summability
//! conditions.

use num_complex::Complex64 as C64;

use crate::basis::OrthonormalBasis;
use crate::expand::{Kahan, SampleGrid};
use crate::linalg::{self, orthogonalize_against, vec_norm, CMatrix};
use crate::opcore::OperatorMatrix;
use crate::{Error, Result};

/// Budget that the selected d-values must fit under.
pub const BUDGET: f64 = 2.0;

/// Envelope decay ratio accepted as "tending to zero" over the window.
pub const DECAY_RATIO: f64 = 0.25;

/// Per-index suprema over the family and the flattening decision.
#[derive(Debug, Clone)]
pub struct FlatteningReport {
    /// e-sequence the suprema were measured on (coefficient vectors).
    pub e_vectors: Vec<Vec<C64>>,
    /// sup_γ ‖S_γ e_n‖ per n.
    pub sup_forward: Vec<f64>,
    /// sup_γ ‖S_γ* e_n‖ per n.
    pub sup_adjoint: Vec<f64>,
    /// d(e_n) = 2 (sup_forward^{1/4} + sup_adjoint^{1/4}).
    pub d_values: Vec<f64>,
    /// Non-increasing envelope of max(sup_forward, sup_adjoint).
    pub envelope: Vec<f64>,
    pub decision: bool,
}

/// Suprema of ‖S_γ e_n‖ and ‖S_γ* e_n‖ over the family, with a
/// monotone-envelope decay test over the window.
pub fn check_flattening(
    family: &[OperatorMatrix],
    e_vectors: &[Vec<C64>],
) -> Result<FlatteningReport> {
    if family.is_empty() {
        return Err(Error::invalid("operator family must be non-empty"));
    }
    let dim = family[0].dim();
    for s in family {
        if s.dim() != dim {
            return Err(Error::dims(s.dim(), dim, "check_flattening family"));
        }
    }
    for (a, ea) in e_vectors.iter().enumerate() {
        if ea.len() != dim {
            return Err(Error::dims(ea.len(), dim, "flattening sequence vector"));
        }
        for (b, eb) in e_vectors.iter().enumerate().take(a + 1) {
            let ip = linalg::dot(ea, eb);
            let target = if a == b { 1.0 } else { 0.0 };
            if (ip.norm() - target).abs() > 1e-10 {
                return Err(Error::invalid(format!(
                    "flattening sequence is not orthonormal at pair ({a},{b})"
                )));
            }
        }
    }

    let adjoints: Vec<OperatorMatrix> = family.iter().map(|s| s.adjoint()).collect();
    let mut sup_forward = Vec::with_capacity(e_vectors.len());
    let mut sup_adjoint = Vec::with_capacity(e_vectors.len());
    for e in e_vectors {
        let fwd = family
            .iter()
            .map(|s| vec_norm(&s.apply(e)))
            .fold(0.0, f64::max);
        let adj = adjoints
            .iter()
            .map(|s| vec_norm(&s.apply(e)))
            .fold(0.0, f64::max);
        sup_forward.push(fwd);
        sup_adjoint.push(adj);
    }
    let d_values: Vec<f64> = sup_forward
        .iter()
        .zip(&sup_adjoint)
        .map(|(&f, &a)| 2.0 * (f.powf(0.25) + a.powf(0.25)))
        .collect();

    let combined: Vec<f64> = sup_forward
        .iter()
        .zip(&sup_adjoint)
        .map(|(&f, &a)| f.max(a))
        .collect();
    let mut envelope = combined.clone();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let decision = match (envelope.first(), envelope.last()) {
        (Some(&first), Some(&last)) => first == 0.0 || last <= DECAY_RATIO * first,
        _ => false,
    };
    Ok(FlatteningReport {
        e_vectors: e_vectors.to_vec(),
        sup_forward,
        sup_adjoint,
        d_values,
        envelope,
        decision,
    })
}

/// Selected subsequence, its completion, and the wavelet pairing.
#[derive(Debug, Clone)]
pub struct SmoothingPlan {
    /// Selected x_k (subset of the e-sequence), orthonormal.
    pub x: Vec<Vec<C64>>,
    /// Original e-indices of the selected x_k.
    pub x_source_indices: Vec<usize>,
    /// Completion y_k to an orthonormal basis of the space.
    pub y: Vec<Vec<C64>>,
    /// d(x_k) for the selected vectors.
    pub d_values: Vec<f64>,
    /// Σ d(x_k) ≤ 2.
    pub budget_total: f64,
    /// Wavelet indices paired with the x's (g_k = u_{m(k)}).
    pub m_indices: Vec<usize>,
    /// Wavelet indices paired with the y's (h_k = u_{l(k)}).
    pub l_indices: Vec<usize>,
    /// Σ_k N_{l(k)} at truncation.
    pub n_factor_sum: f64,
    /// Σ_k ‖[h_k]^{(i)}‖_∞ per derivative order (partial sums of the
    /// h-side summability condition).
    pub h_sup_sums: Vec<f64>,
    /// Σ_k d(x_k) ‖[g_k]^{(i)}‖_∞ per derivative order.
    pub weighted_g_sums: Vec<f64>,
}

impl SmoothingPlan {
    pub fn dim(&self) -> usize {
        self.x.first().or(self.y.first()).map_or(0, Vec::len)
    }
}

/// Greedy budgeted selection: take e-indices by ascending d-value while
/// the running total stays at or under the budget, then complete the
/// selection to an orthonormal basis and pair everything with wavelet
/// indices (most negative scales go to the h-side).
pub fn make_plan(
    report: &FlatteningReport,
    wavelet_basis: &OrthonormalBasis,
    window: usize,
) -> Result<SmoothingPlan> {
    if !report.decision {
        return Err(Error::invalid(
            "flattening decision is false; no plan can be made",
        ));
    }
    let dim = report
        .e_vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty flattening sequence"))?;
    if wavelet_basis.len() != dim {
        return Err(Error::dims(
            wavelet_basis.len(),
            dim,
            "make_plan wavelet basis vs space",
        ));
    }
    let window = window.min(report.e_vectors.len());
    if window == 0 {
        return Err(Error::invalid("selection window must be positive"));
    }

    // Ascending-d greedy selection over the window.
    let mut order: Vec<usize> = (0..window).collect();
    order.sort_by(|&a, &b| {
        report.d_values[a]
            .partial_cmp(&report.d_values[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected = Vec::new();
    let mut total = 0.0;
    for &idx in &order {
        let d = report.d_values[idx];
        if total + d <= BUDGET {
            total += d;
            selected.push(idx);
        }
    }
    selected.sort_unstable();
    if selected.len() < window.div_ceil(2) {
        let minimal: f64 = order
            .iter()
            .take(window.div_ceil(2))
            .map(|&i| report.d_values[i])
            .sum();
        return Err(Error::PlanInfeasible {
            min_budget: minimal,
        });
    }

    let x: Vec<Vec<C64>> = selected.iter().map(|&i| report.e_vectors[i].clone()).collect();
    let d_values: Vec<f64> = selected.iter().map(|&i| report.d_values[i]).collect();

    // Complete to an orthonormal basis: unselected e's first, then the
    // standard basis, Gram-Schmidt against everything accepted so far.
    let mut y: Vec<Vec<C64>> = Vec::new();
    let mut accepted: Vec<Vec<C64>> = x.clone();
    let mut candidates: Vec<Vec<C64>> = Vec::new();
    for (i, e) in report.e_vectors.iter().enumerate() {
        if !selected.contains(&i) {
            candidates.push(e.clone());
        }
    }
    for k in 0..dim {
        let mut std_k = vec![C64::new(0.0, 0.0); dim];
        std_k[k] = C64::new(1.0, 0.0);
        candidates.push(std_k);
    }
    for cand in candidates {
        if accepted.len() == dim {
            break;
        }
        let (r, norm) = orthogonalize_against(&cand, &accepted);
        if norm > 0.5 {
            let unit: Vec<C64> = r.iter().map(|z| z / norm).collect();
            accepted.push(unit.clone());
            y.push(unit);
        }
    }
    if accepted.len() != dim {
        return Err(Error::Internal(
            "failed to complete the selection to an orthonormal basis".into(),
        ));
    }

    // Wavelet pairing: the h-side takes the most negative scales so that
    // Σ N_{l(k)} stays small; everything else pairs with the x's in order.
    let mut by_scale: Vec<usize> = (0..dim).collect();
    by_scale.sort_by(|&a, &b| {
        let ka = scale_of(wavelet_basis, a);
        let kb = scale_of(wavelet_basis, b);
        ka.cmp(&kb).then(a.cmp(&b))
    });
    let l_indices: Vec<usize> = {
        let mut l: Vec<usize> = by_scale.iter().take(y.len()).cloned().collect();
        l.sort_unstable();
        l
    };
    let m_indices: Vec<usize> = (0..dim).filter(|i| !l_indices.contains(i)).collect();

    let n_factor_sum: f64 = l_indices
        .iter()
        .map(|&i| wavelet_basis.functions[i].n_factor)
        .sum();
    let i_max = wavelet_basis.i_max;
    let h_sup_sums: Vec<f64> = (0..=i_max)
        .map(|i| {
            l_indices
                .iter()
                .map(|&idx| wavelet_basis.measured_sup(idx, i))
                .sum()
        })
        .collect();
    let weighted_g_sums: Vec<f64> = (0..=i_max)
        .map(|i| {
            m_indices
                .iter()
                .zip(&d_values)
                .map(|(&idx, &d)| d * wavelet_basis.measured_sup(idx, i))
                .sum()
        })
        .collect();

    Ok(SmoothingPlan {
        x,
        x_source_indices: selected,
        y,
        d_values,
        budget_total: total,
        m_indices,
        l_indices,
        n_factor_sum,
        h_sup_sums,
        weighted_g_sums,
    })
}

fn scale_of(basis: &OrthonormalBasis, idx: usize) -> i32 {
    match basis.functions[idx].index {
        crate::basis::FunctionIndex::Wavelet { alpha, .. } => alpha,
        // Hermite bases carry no dyadic scale; index order stands in.
        crate::basis::FunctionIndex::Hermite { n } => n as i32,
    }
}

/// The pairing unitary: U x_k = g_k (= e_{m(k)} coefficients) and
/// U y_k = h_k (= e_{l(k)} coefficients).
pub fn build_unitary(plan: &SmoothingPlan, dim: usize) -> Result<OperatorMatrix> {
    if plan.x.len() + plan.y.len() != dim {
        return Err(Error::invalid(format!(
            "plan covers {} + {} vectors, expected {dim}",
            plan.x.len(),
            plan.y.len()
        )));
    }
    if plan.m_indices.len() != plan.x.len() || plan.l_indices.len() != plan.y.len() {
        return Err(Error::Internal("plan index sets out of step".into()));
    }
    let mut u = CMatrix::zeros(dim, dim);
    for (k, x) in plan.x.iter().enumerate() {
        let row = plan.m_indices[k];
        for (col, xv) in x.iter().enumerate() {
            u[(row, col)] += xv.conj();
        }
    }
    for (k, y) in plan.y.iter().enumerate() {
        let row = plan.l_indices[k];
        for (col, yv) in y.iter().enumerate() {
            u[(row, col)] += yv.conj();
        }
    }
    let op = OperatorMatrix::new(u, "")?;
    let defect = op
        .entries
        .adjoint()
        .matmul(&op.entries)
        .max_deviation_from_identity();
    if defect > 1e-12 {
        return Err(Error::Internal(format!(
            "pairing unitary defect {defect:.3e}; plan invariant violated"
        )));
    }
    Ok(op)
}

/// The split of S against the projection E onto span{x_k}.
#[derive(Debug, Clone)]
pub struct OperatorSplit {
    /// J = S E (Hilbert-Schmidt part).
    pub j: OperatorMatrix,
    /// J̃ = S* E.
    pub j_tilde: OperatorMatrix,
    /// Q = (I − E) S*.
    pub q: OperatorMatrix,
    /// Q̃ = (I − E) S.
    pub q_tilde: OperatorMatrix,
    /// ‖S − (Q̃ + J̃*)‖_F and ‖S* − (Q + J*)‖_F.
    pub reassembly_residuals: [f64; 2],
}

pub fn split_operator(s: &OperatorMatrix, plan: &SmoothingPlan) -> Result<OperatorSplit> {
    let dim = s.dim();
    if plan.x.len() + plan.y.len() != dim {
        return Err(Error::dims(
            plan.x.len() + plan.y.len(),
            dim,
            "split_operator plan vs operator",
        ));
    }
    let mut e = CMatrix::zeros(dim, dim);
    for x in &plan.x {
        for (r, xr) in x.iter().enumerate() {
            for (c, xc) in x.iter().enumerate() {
                e[(r, c)] += xr * xc.conj();
            }
        }
    }
    let e_op = s.with_entries(e);
    let id = OperatorMatrix::identity(dim);
    let complement = id.sub(&e_op.with_entries(e_op.entries.clone()))?;

    let j = s.matmul(&e_op)?;
    let j_tilde = s.adjoint().matmul(&e_op)?;
    let q = complement.with_entries(complement.entries.matmul(&s.entries.adjoint()));
    let q_tilde = complement.with_entries(complement.entries.matmul(&s.entries));

    let r1 = q_tilde
        .add(&j_tilde.adjoint())?
        .sub(s)?
        .norm_fro();
    let r2 = q.add(&j.adjoint())?.sub(&s.adjoint())?.norm_fro();
    Ok(OperatorSplit {
        j,
        j_tilde,
        q,
        q_tilde,
        reassembly_residuals: [r1, r2],
    })
}

/// Assembled kernels of the transformed operator T = U S U^{-1} and of its
/// adjoint, with the component pieces.
#[derive(Debug, Clone)]
pub struct SmoothedOperator {
    pub unitary: OperatorMatrix,
    /// T = U S U^{-1}.
    pub transformed: OperatorMatrix,
    pub orders: (usize, usize),
    pub grid: SampleGrid,
    /// Kernel of the tail part P̃: Σ_k [h_k]^{(i)}(s) conj([T*h_k]^{(j)}(t)).
    pub samples_p_tilde: CMatrix,
    /// Kernel of the Hilbert-Schmidt part F̃ via fourth-root auxiliaries.
    pub samples_f_tilde: CMatrix,
    /// Assembled kernel T(s,t) = P̃(s,t) + F̃(s,t).
    pub samples: CMatrix,
    /// Adjoint-side assembly T*(s,t) = P(s,t) + F(s,t) at swapped orders.
    pub samples_adjoint: CMatrix,
    /// c(x_k) = ‖Bx_k‖+‖B*x_k‖+‖B̃x_k‖+‖B̃*x_k‖, bounded by d(x_k).
    pub c_values: Vec<f64>,
    /// ‖T − (UQ̃U* + UJ̃*U*)‖_F.
    pub split_residual: f64,
    /// Separable form of the assembled kernel: T(s,t) =
    /// Σ_p weights[p] · left_p^{(i)}(s) · conj(right_p^{(j)}(t)).
    pub series_left: Vec<Vec<C64>>,
    pub series_right: Vec<Vec<C64>>,
    pub series_weights: Vec<f64>,
}

impl SmoothedOperator {
    /// ∬ T(s,t) u_n(t) conj(u_m(s)) dt ds for m, n < n_check, from the
    /// separable series by 1-D quadratures on the basis grid.
    pub fn quadrature_matrix(&self, basis: &OrthonormalBasis, n_check: usize) -> CMatrix {
        let (i, j) = self.orders;
        let q = &basis.grid;
        let mut out = CMatrix::zeros(n_check, n_check);
        for p in 0..self.series_left.len() {
            let lv = basis.combination_on_grid(&self.series_left[p], i);
            let rv = basis.combination_on_grid(&self.series_right[p], j);
            let w_p = C64::new(self.series_weights[p], 0.0);
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
                    out[(m, n)] += w_p * a * b;
                }
            }
        }
        out
    }
}

struct SchmidtPiece {
    /// left columns in u-coordinates, weights already applied.
    left: Vec<Vec<C64>>,
    right: Vec<Vec<C64>>,
    weights: Vec<f64>,
    /// fourth-root auxiliary B = Σ s^{1/4} ⟨·,p⟩ q, in the original space.
    aux: CMatrix,
}

/// Schmidt pieces of a Hilbert-Schmidt part X = Σ s_n ⟨·,p_n⟩ q_n: the
/// kernel factors s_n^{1/2} [U B* q_n] and [U B p_n] where B carries the
/// fourth roots.
fn schmidt_piece(x: &CMatrix, u: &CMatrix) -> Result<SchmidtPiece> {
    let n = x.rows();
    let svd = linalg::svd(x)?;
    let smax = svd.sigma.first().cloned().unwrap_or(0.0);
    let keep: Vec<usize> = (0..n)
        .filter(|&k| svd.sigma[k] > 1e-14 * smax && svd.sigma[k] > 0.0)
        .collect();

    let mut aux = CMatrix::zeros(n, n);
    for &k in &keep {
        let root = svd.sigma[k].powf(0.25);
        let q = svd.u.column(k);
        let p = svd.v.column(k);
        for r in 0..n {
            for c in 0..n {
                aux[(r, c)] += C64::new(root, 0.0) * q[r] * p[c].conj();
            }
        }
    }

    let aux_adj = aux.adjoint();
    let mut left = Vec::with_capacity(keep.len());
    let mut right = Vec::with_capacity(keep.len());
    let mut weights = Vec::with_capacity(keep.len());
    for &k in &keep {
        let qv = svd.u.column(k);
        let pv = svd.v.column(k);
        // U B* q_n and U B p_n.
        let bq = aux_adj.matvec(&qv);
        let bp = aux.matvec(&pv);
        left.push(u.matvec(&bq));
        right.push(u.matvec(&bp));
        weights.push(svd.sigma[k].sqrt());
    }
    Ok(SchmidtPiece {
        left,
        right,
        weights,
        aux,
    })
}

fn sample_weighted_series(
    basis: &OrthonormalBasis,
    left: &[Vec<C64>],
    right: &[Vec<C64>],
    weights: &[f64],
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> CMatrix {
    let ns = grid.s_points.len();
    let nt = grid.t_points.len();
    let mut acc = vec![Kahan::default(); ns * nt];
    for n in 0..left.len() {
        let lv = crate::expand::column_values(
            basis,
            &left[n],
            &grid.s_points,
            i,
            grid.is_on_quadrature(),
        );
        let rv = crate::expand::column_values(
            basis,
            &right[n],
            &grid.t_points,
            j,
            grid.is_on_quadrature(),
        );
        let w = C64::new(weights[n], 0.0);
        for (a, l) in lv.iter().enumerate() {
            let row = &mut acc[a * nt..(a + 1) * nt];
            for (b, r) in rv.iter().enumerate() {
                row[b].add(w * l * r.conj());
            }
        }
    }
    let mut out = CMatrix::zeros(ns, nt);
    for a in 0..ns {
        for b in 0..nt {
            out[(a, b)] = acc[a * nt + b].value();
        }
    }
    out
}

/// Tail-part series [h_k] against [A h_k] where A is T* for the forward
/// assembly and T for the adjoint one.
fn tail_series(dim: usize, a_op: &CMatrix, l_indices: &[usize]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let lefts: Vec<Vec<C64>> = l_indices
        .iter()
        .map(|&l| {
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[l] = C64::new(1.0, 0.0);
            e
        })
        .collect();
    let rights: Vec<Vec<C64>> = l_indices
        .iter()
        .map(|&l| {
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[l] = C64::new(1.0, 0.0);
            a_op.matvec(&e)
        })
        .collect();
    (lefts, rights)
}

/// Full single-operator pipeline step: transform S by the plan's unitary,
/// split, and assemble the sampled kernel from the tail part and the
/// Schmidt part.
pub fn smooth_kernel(
    s: &OperatorMatrix,
    plan: &SmoothingPlan,
    unitary: &OperatorMatrix,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<SmoothedOperator> {
    if i > basis.i_max || j > basis.i_max {
        return Err(Error::invalid("derivative order exceeds basis i_max"));
    }
    let dim = s.dim();
    if unitary.dim() != dim || basis.len() != dim {
        return Err(Error::dims(unitary.dim(), dim, "smooth_kernel dimensions"));
    }
    let split = split_operator(s, plan)?;
    let u = &unitary.entries;
    let uh = u.adjoint();
    let t = u.matmul(&s.entries).matmul(&uh);
    let t_op = OperatorMatrix::new(t.clone(), basis.id.clone())?;

    // Components in u-coordinates.
    let p_tilde_mat = u.matmul(&split.q_tilde.entries).matmul(&uh);
    let f_tilde_mat = u.matmul(&split.j_tilde.entries.adjoint()).matmul(&uh);
    let split_residual = p_tilde_mat.add(&f_tilde_mat).sub(&t).norm_fro();

    // Kernel of P̃ from the h-side, F̃ from the Schmidt data of J̃.
    let (tail_left, tail_right) = tail_series(dim, &t.adjoint(), &plan.l_indices);
    let tail_weights = vec![1.0; tail_left.len()];
    let samples_p_tilde =
        sample_weighted_series(basis, &tail_left, &tail_right, &tail_weights, i, j, grid);
    let piece_tilde = schmidt_piece(&split.j_tilde.entries, u)?;
    let samples_f_tilde = sample_weighted_series(
        basis,
        &piece_tilde.left,
        &piece_tilde.right,
        &piece_tilde.weights,
        i,
        j,
        grid,
    );
    let samples = samples_p_tilde.add(&samples_f_tilde);

    // Adjoint side at swapped orders: T*(t-side) pairs with D₂ⁱD₁ʲ.
    let (adj_left, adj_right) = tail_series(dim, &t, &plan.l_indices);
    let adj_weights = vec![1.0; adj_left.len()];
    let samples_p =
        sample_weighted_series(basis, &adj_left, &adj_right, &adj_weights, j, i, grid);
    let piece = schmidt_piece(&split.j.entries, u)?;
    let samples_f =
        sample_weighted_series(basis, &piece.left, &piece.right, &piece.weights, j, i, grid);
    let samples_adjoint = samples_p.add(&samples_f);

    // Flattened series of the assembled kernel.
    let mut series_left = tail_left;
    let mut series_right = tail_right;
    let mut series_weights = tail_weights;
    series_left.extend(piece_tilde.left.iter().cloned());
    series_right.extend(piece_tilde.right.iter().cloned());
    series_weights.extend(piece_tilde.weights.iter().cloned());

    // c(x_k) from the fourth-root auxiliaries, bounded by d(x_k).
    let aux_b = &piece.aux;
    let aux_b_adj = aux_b.adjoint();
    let aux_bt = &piece_tilde.aux;
    let aux_bt_adj = aux_bt.adjoint();
    let mut c_values = Vec::with_capacity(plan.x.len());
    for x in &plan.x {
        let c = vec_norm(&aux_b.matvec(x))
            + vec_norm(&aux_b_adj.matvec(x))
            + vec_norm(&aux_bt.matvec(x))
            + vec_norm(&aux_bt_adj.matvec(x));
        c_values.push(c);
    }

    Ok(SmoothedOperator {
        unitary: unitary.clone(),
        transformed: t_op,
        orders: (i, j),
        grid: grid.clone(),
        samples_p_tilde,
        samples_f_tilde,
        samples,
        samples_adjoint,
        c_values,
        split_residual,
        series_left,
        series_right,
        series_weights,
    })
}

/// Smoothing of a finite linear combination G = Σ z_γ S_γ under the shared
/// plan. Requires Σ|z_γ| ≤ 1; rescales otherwise and reports the factor.
pub struct FamilySmoothing {
    pub smoothed: SmoothedOperator,
    /// Factor the coefficients were divided by (1.0 when none).
    pub rescale: f64,
    /// max_n (‖G e_n‖ − sup_γ ‖S_γ e_n‖): ≤ 0 certifies the norm bound.
    pub norm_bound_slack: f64,
}

pub fn smooth_family(
    family: &[OperatorMatrix],
    coefficients: &[C64],
    report: &FlatteningReport,
    plan: &SmoothingPlan,
    unitary: &OperatorMatrix,
    basis: &OrthonormalBasis,
    i: usize,
    j: usize,
    grid: &SampleGrid,
) -> Result<FamilySmoothing> {
    if family.len() != coefficients.len() {
        return Err(Error::dims(
            family.len(),
            coefficients.len(),
            "smooth_family coefficients",
        ));
    }
    if family.is_empty() {
        return Err(Error::invalid("family must be non-empty"));
    }
    let total: f64 = coefficients.iter().map(|z| z.norm()).sum();
    let rescale = if total > 1.0 { total } else { 1.0 };

    let dim = family[0].dim();
    let mut g = CMatrix::zeros(dim, dim);
    for (s, z) in family.iter().zip(coefficients) {
        g = g.add(&s.entries.scale(z / rescale));
    }
    let g_op = OperatorMatrix::new(g, family[0].basis_id.clone())?;

    // ‖G e_n‖ ≤ sup_γ ‖S_γ e_n‖ for each member of the e-sequence.
    let mut slack = f64::NEG_INFINITY;
    for (e, sup) in report.e_vectors.iter().zip(&report.sup_forward) {
        let g_norm = vec_norm(&g_op.apply(e));
        slack = slack.max(g_norm - sup);
    }

    let smoothed = smooth_kernel(&g_op, plan, unitary, basis, i, j, grid)?;
    Ok(FamilySmoothing {
        smoothed,
        rescale,
        norm_bound_slack: slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::meyer_basis;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn standard_e(dim: usize) -> Vec<Vec<C64>> {
        (0..dim)
            .map(|k| {
                let mut e = vec![C64::new(0.0, 0.0); dim];
                e[k] = C64::new(1.0, 0.0);
                e
            })
            .collect()
    }

    #[test]
    fn flattening_zero_family() {
        let family = vec![OperatorMatrix::zeros(4)];
        let rep = check_flattening(&family, &standard_e(4)).unwrap();
        assert!(rep.decision);
        assert!(rep.sup_forward.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flattening_halving_diagonal() {
        let dim = 8;
        let diag: Vec<C64> = (0..dim).map(|k| c(2.0f64.powi(-(k as i32)), 0.0)).collect();
        let family = vec![OperatorMatrix::from_diag(&diag)];
        let rep = check_flattening(&family, &standard_e(dim)).unwrap();
        for (k, &v) in rep.sup_forward.iter().enumerate() {
            assert!((v - 2.0f64.powi(-(k as i32))).abs() < 1e-14);
        }
        assert!(rep.decision);
    }

    #[test]
    fn flattening_identity_rejected() {
        let family = vec![OperatorMatrix::identity(6)];
        let rep = check_flattening(&family, &standard_e(6)).unwrap();
        assert!(!rep.decision);
    }

    #[test]
    fn flattening_requires_orthonormal_e() {
        let family = vec![OperatorMatrix::zeros(3)];
        let mut bad = standard_e(3);
        bad[1] = bad[0].clone();
        assert!(check_flattening(&family, &bad).is_err());
    }

    #[test]
    fn plan_budget_arithmetic_fast_decay() {
        // ‖S e_k‖ = ‖S* e_k‖ = 16^{-(k+2)} gives d = 2^{-k} (1-based) and a
        // full-window selection with Σ = 1 − 2^{-W}.
        let dim = 12;
        let diag: Vec<C64> = (0..dim)
            .map(|k| c(16.0f64.powi(-(k as i32 + 3)), 0.0))
            .collect();
        let family = vec![OperatorMatrix::from_diag(&diag)];
        let rep = check_flattening(&family, &standard_e(dim)).unwrap();
        for (k, &d) in rep.d_values.iter().enumerate() {
            let expect = 4.0 * 16.0f64.powi(-(k as i32 + 3)).powf(0.25);
            assert!((d - expect).abs() < 1e-12);
            assert!((expect - 2.0f64.powi(-(k as i32 + 1))).abs() < 1e-12);
        }
        let basis = meyer_basis(dim, 2).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        assert_eq!(plan.x.len(), dim);
        let expect_total = 1.0 - 2.0f64.powi(-(dim as i32));
        assert!((plan.budget_total - expect_total).abs() < 1e-12);
        assert!(plan.budget_total <= BUDGET);
        assert!(plan.y.is_empty());
    }

    #[test]
    fn plan_budget_skips_oversized_head() {
        // d(e_k) = 2^{2-k} (1-based): the full window sums past the budget,
        // the greedy selection must drop k = 1 and land exactly on 2 − 2^{2-W}.
        let dim = 10;
        let diag: Vec<C64> = (0..dim)
            .map(|k| c(16.0f64.powi(-(k as i32 + 1)), 0.0))
            .collect();
        let family = vec![OperatorMatrix::from_diag(&diag)];
        let rep = check_flattening(&family, &standard_e(dim)).unwrap();
        for (k, &d) in rep.d_values.iter().enumerate() {
            assert!((d - 2.0f64.powi(1 - k as i32)).abs() < 1e-12);
        }
        let basis = meyer_basis(dim, 2).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        assert_eq!(plan.x_source_indices, (1..dim).collect::<Vec<_>>());
        let expect_total = 2.0 - 2.0f64.powi(2 - dim as i32);
        assert!((plan.budget_total - expect_total).abs() < 1e-12);
        assert_eq!(plan.y.len(), 1);
        assert_eq!(plan.l_indices.len(), 1);
    }

    #[test]
    fn plan_infeasible_when_budget_unreachable() {
        let dim = 6;
        let family = vec![OperatorMatrix::identity(dim)];
        // force decision by measuring against a decayed family, then tamper
        let diag: Vec<C64> = (0..dim).map(|k| c(2.0f64.powi(-(k as i32)), 0.0)).collect();
        let mut rep = check_flattening(&[OperatorMatrix::from_diag(&diag)], &standard_e(dim)).unwrap();
        let _ = family;
        for d in rep.d_values.iter_mut() {
            *d = 3.0;
        }
        let basis = meyer_basis(dim, 2).unwrap();
        match make_plan(&rep, &basis, dim) {
            Err(Error::PlanInfeasible { min_budget }) => assert!(min_budget >= 9.0),
            other => panic!("expected PlanInfeasible, got {other:?}"),
        }
    }

    #[test]
    fn unitary_is_permutation_for_standard_plans() {
        let dim = 8;
        let diag: Vec<C64> = (0..dim)
            .map(|k| c(16.0f64.powi(-(k as i32 + 1)), 0.0))
            .collect();
        let family = vec![OperatorMatrix::from_diag(&diag)];
        let rep = check_flattening(&family, &standard_e(dim)).unwrap();
        let basis = meyer_basis(dim, 2).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        let u = build_unitary(&plan, dim).unwrap();
        let dev = u
            .entries
            .adjoint()
            .matmul(&u.entries)
            .max_deviation_from_identity();
        assert!(dev < 1e-14);
        // Permutation: every entry is 0 or 1.
        for v in u.entries.data() {
            assert!(v.norm() < 1e-14 || (v - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn unitary_trivial_and_swap_pairings() {
        // Identity pairing on dim 2.
        let id_plan = SmoothingPlan {
            x: standard_e(2),
            x_source_indices: vec![0, 1],
            y: vec![],
            d_values: vec![0.0; 2],
            budget_total: 0.0,
            m_indices: vec![0, 1],
            l_indices: vec![],
            n_factor_sum: 0.0,
            h_sup_sums: vec![],
            weighted_g_sums: vec![],
        };
        let u = build_unitary(&id_plan, 2).unwrap();
        assert!(u.entries.max_deviation_from_identity() < 1e-15);

        // Swap pairing: x_1 -> index 1, x_2 -> index 0.
        let swap_plan = SmoothingPlan {
            m_indices: vec![1, 0],
            ..id_plan
        };
        let u = build_unitary(&swap_plan, 2).unwrap();
        assert!((u.entries[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((u.entries[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(u.entries[(0, 0)].norm() < 1e-15);
        assert!(u.entries[(1, 1)].norm() < 1e-15);
        let dev = u
            .entries
            .adjoint()
            .matmul(&u.entries)
            .max_deviation_from_identity();
        assert!(dev < 1e-15);
    }

    #[test]
    fn zero_operator_zero_kernel() {
        let dim = 6;
        let s = OperatorMatrix::zeros(dim);
        let rep = check_flattening(std::slice::from_ref(&s), &standard_e(dim)).unwrap();
        let basis = meyer_basis(dim, 1).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        let u = build_unitary(&plan, dim).unwrap();
        let grid = SampleGrid::uniform(12, basis.grid.halfwidth());
        let sm = smooth_kernel(&s, &plan, &u, &basis, 0, 0, &grid).unwrap();
        assert!(sm.samples.norm_max() < 1e-14);
        assert!(sm.samples_adjoint.norm_max() < 1e-14);
    }

    #[test]
    fn pipeline_diagonal_end_to_end() {
        // Small end-to-end run: diagonal S with fast decay on dim 8.
        let dim = 8;
        let diag: Vec<C64> = (0..dim)
            .map(|k| c(16.0f64.powi(-(k as i32 + 1)), 0.0))
            .collect();
        let s = OperatorMatrix::from_diag(&diag);
        let rep = check_flattening(std::slice::from_ref(&s), &standard_e(dim)).unwrap();
        assert!(rep.decision);
        let basis = meyer_basis(dim, 1).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        let u = build_unitary(&plan, dim).unwrap();
        let grid = SampleGrid::uniform(24, basis.grid.halfwidth());
        let sm = smooth_kernel(&s, &plan, &u, &basis, 0, 0, &grid).unwrap();

        // Component split holds as matrices.
        assert!(sm.split_residual < 1e-10);
        // Assembled samples equal sum of component samples.
        let sum = sm.samples_p_tilde.add(&sm.samples_f_tilde);
        assert!(sum.sub(&sm.samples).norm_max() < 1e-12);

        // Assembled kernel equals the direct kernel of T = U S U*.
        let t = &sm.transformed;
        let ns = grid.s_points.len();
        let mut worst = 0.0f64;
        for (a, &sp) in grid.s_points.iter().enumerate() {
            for (b, &tp) in grid.t_points.iter().enumerate() {
                let mut direct = c(0.0, 0.0);
                for m in 0..dim {
                    for n in 0..dim {
                        let tv = t.entries[(m, n)];
                        if tv.norm_sqr() == 0.0 {
                            continue;
                        }
                        direct += tv * basis.eval(m, sp, 0) * basis.eval(n, tp, 0).conj();
                    }
                }
                worst = worst.max((direct - sm.samples[(a, b)]).norm());
            }
        }
        assert!(worst < 1e-8, "direct-assembly deviation {worst}");

        // Conjugate-transpose consistency on the square grid.
        let mut ct = 0.0f64;
        for a in 0..ns {
            for b in 0..ns {
                ct = ct.max((sm.samples[(a, b)] - sm.samples_adjoint[(b, a)].conj()).norm());
            }
        }
        assert!(ct < 1e-8, "conjugate-transpose deviation {ct}");

        // c(x_k) <= d(x_k).
        for (cv, dv) in sm.c_values.iter().zip(&plan.d_values) {
            assert!(*cv <= dv + 1e-12, "c = {cv}, d = {dv}");
        }

        // Quadrature fidelity against the transformed matrix.
        let qm = sm.quadrature_matrix(&basis, 4);
        let mut qdev = 0.0f64;
        for m in 0..4 {
            for n in 0..4 {
                qdev = qdev.max((qm[(m, n)] - t.entries[(m, n)]).norm());
            }
        }
        assert!(qdev < 1e-6, "quadrature fidelity {qdev}");
    }

    #[test]
    fn family_linearity_small() {
        let dim = 6;
        let d1: Vec<C64> = (0..dim)
            .map(|k| c(16.0f64.powi(-(k as i32 + 1)), 0.0))
            .collect();
        let d2: Vec<C64> = (0..dim)
            .map(|k| c(8.0f64.powi(-(k as i32 + 2)), 0.0))
            .collect();
        let s1 = OperatorMatrix::from_diag(&d1);
        let s2 = OperatorMatrix::from_diag(&d2);
        let family = vec![s1, s2];
        let rep = check_flattening(&family, &standard_e(dim)).unwrap();
        let basis = meyer_basis(dim, 1).unwrap();
        let plan = make_plan(&rep, &basis, dim).unwrap();
        let u = build_unitary(&plan, dim).unwrap();
        let grid = SampleGrid::uniform(16, basis.grid.halfwidth());

        let z = [c(0.5, 0.0), c(0.5, 0.0)];
        let fam = smooth_family(&family, &z, &rep, &plan, &u, &basis, 0, 0, &grid).unwrap();
        assert!((fam.rescale - 1.0).abs() < 1e-15);
        assert!(fam.norm_bound_slack <= 1e-12);

        // Linearity: combination kernel = combination of member kernels.
        let k1 = smooth_kernel(&family[0], &plan, &u, &basis, 0, 0, &grid).unwrap();
        let k2 = smooth_kernel(&family[1], &plan, &u, &basis, 0, 0, &grid).unwrap();
        let expect = k1
            .samples
            .scale(z[0])
            .add(&k2.samples.scale(z[1]));
        assert!(expect.sub(&fam.smoothed.samples).norm_max() < 1e-10);

        // Single member, z = 1: identical to smooth_kernel.
        let single = smooth_family(
            &family[..1],
            &[c(1.0, 0.0)],
            &rep,
            &plan,
            &u,
            &basis,
            0,
            0,
            &grid,
        )
        .unwrap();
        assert!(single.smoothed.samples.sub(&k1.samples).norm_max() < 1e-12);
    }

    #[test]
    fn split_full_and_empty_projection() {
        let dim = 6;
        let mut seed = 77u64;
        let mut lcg = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let s = OperatorMatrix::new(CMatrix::from_fn(dim, dim, |_, _| c(lcg(), lcg())), "").unwrap();

        // E = I: all x, no y.
        let full_plan = SmoothingPlan {
            x: standard_e(dim),
            x_source_indices: (0..dim).collect(),
            y: vec![],
            d_values: vec![0.0; dim],
            budget_total: 0.0,
            m_indices: (0..dim).collect(),
            l_indices: vec![],
            n_factor_sum: 0.0,
            h_sup_sums: vec![],
            weighted_g_sums: vec![],
        };
        let split = split_operator(&s, &full_plan).unwrap();
        assert!(split.q.norm_fro() < 1e-12);
        assert!(split.q_tilde.norm_fro() < 1e-12);
        assert!(split.j.sub(&s).unwrap().norm_fro() < 1e-12);
        assert!(split.reassembly_residuals[0] < 1e-12);
        assert!(split.reassembly_residuals[1] < 1e-12);

        // E = 0: all y, no x.
        let empty_plan = SmoothingPlan {
            x: vec![],
            x_source_indices: vec![],
            y: standard_e(dim),
            d_values: vec![],
            budget_total: 0.0,
            m_indices: vec![],
            l_indices: (0..dim).collect(),
            n_factor_sum: 0.0,
            h_sup_sums: vec![],
            weighted_g_sums: vec![],
        };
        let split = split_operator(&s, &empty_plan).unwrap();
        assert!(split.j.norm_fro() < 1e-12);
        assert!(split.j_tilde.norm_fro() < 1e-12);
        assert!(split.q_tilde.sub(&s).unwrap().norm_fro() < 1e-12);

        // Half-rank E on a random S: exact reassembly.
        let half_plan = SmoothingPlan {
            x: standard_e(dim)[..3].to_vec(),
            x_source_indices: (0..3).collect(),
            y: standard_e(dim)[3..].to_vec(),
            d_values: vec![0.0; 3],
            budget_total: 0.0,
            m_indices: (0..3).collect(),
            l_indices: (3..dim).collect(),
            n_factor_sum: 0.0,
            h_sup_sums: vec![],
            weighted_g_sums: vec![],
        };
        let split = split_operator(&s, &half_plan).unwrap();
        assert!(split.reassembly_residuals[0] < 1e-12);
        assert!(split.reassembly_residuals[1] < 1e-12);
    }
}
