//! Nested-commutator approximation of the adiabatic gauge potential.
//!
//! With `H_ad(λ) = H_I + λ (H_F − H_I)` and `∂_λ H_ad = H_F − H_I`, the
//! nested commutators
//!
//! ```text
//! O_1 = [H_ad, ∂H],   O_{k+1} = [H_ad, O_k]
//! ```
//!
//! are polynomials in `λ` whose operator coefficients are computed once per
//! instance. The order-`l` potential is `A^(l)(λ) = i Σ_k α_k(λ) O_{2k−1}(λ)`
//! with `α` solving the Hankel system built from `Γ_k = ‖O_k‖²_F`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{CdqcError, Result};
use crate::linalg;
use crate::pauli::PauliOperator;
use crate::problems::{ProblemInstance, DEFAULT_DEGENERACY_TOL};
use crate::schedule;
use crate::C64;

/// Default ceiling on the total number of stored Pauli terms per `O_k`.
pub const DEFAULT_TERM_BUDGET: usize = 1 << 20;

/// Relative singular-value cutoff for the Hankel solve.
pub const SV_CUTOFF: f64 = 1e-12;

/// `Σ_m λ^m · coeffs[m]` with operator coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPoly {
    n_qubits: usize,
    coeffs: Vec<PauliOperator>,
}

impl LambdaPoly {
    pub fn constant(op: PauliOperator) -> Self {
        Self {
            n_qubits: op.n_qubits(),
            coeffs: vec![op],
        }
    }

    pub fn coeffs(&self) -> &[PauliOperator] {
        &self.coeffs
    }

    /// Highest power with a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(PauliOperator::is_zero)
    }

    pub fn term_count(&self) -> usize {
        self.coeffs.iter().map(PauliOperator::len).sum()
    }

    pub fn evaluate(&self, lambda: f64) -> PauliOperator {
        let mut w = 1.0;
        let parts: Vec<(C64, &PauliOperator)> = self
            .coeffs
            .iter()
            .map(|c| {
                let part = (C64::new(w, 0.0), c);
                w *= lambda;
                part
            })
            .collect();
        PauliOperator::linear_combination(self.n_qubits, parts).expect("consistent sizes")
    }

    /// Coefficients of `‖p(λ)‖²_F` as an ordinary polynomial in `λ`.
    fn frobenius_sq_poly(&self) -> Vec<f64> {
        let d = self.coeffs.len();
        let mut out = vec![0.0; 2 * d - 1];
        for a in 0..d {
            for b in a..d {
                let g = self.coeffs[a].trace_inner(&self.coeffs[b]).expect("same size").re;
                out[a + b] += if a == b { g } else { 2.0 * g };
            }
        }
        out
    }

    /// `[H_I + λ·ΔH, p(λ)]`, raising the degree by one.
    fn commute_with_interpolation(&self, h_i: &PauliOperator, dh: &PauliOperator) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        for m in 0..=self.coeffs.len() {
            let mut c = PauliOperator::zero(self.n_qubits);
            if let Some(cm) = self.coeffs.get(m) {
                c = c.add(&h_i.commutator(cm)?)?;
            }
            if m >= 1 {
                c = c.add(&dh.commutator(&self.coeffs[m - 1])?)?;
            }
            coeffs.push(c);
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(PauliOperator::is_zero) {
            coeffs.pop();
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            coeffs,
        })
    }
}

fn horner(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `O_1 … O_{max_k}` as λ-polynomials.
pub fn build_nested(instance: &ProblemInstance, max_k: usize) -> Result<Vec<LambdaPoly>> {
    build_nested_with_budget(instance, max_k, DEFAULT_TERM_BUDGET)
}

pub fn build_nested_with_budget(
    instance: &ProblemInstance,
    max_k: usize,
    term_budget: usize,
) -> Result<Vec<LambdaPoly>> {
    if max_k == 0 {
        return Err(CdqcError::Validation("max_k must be >= 1".into()));
    }
    let h_i = &instance.h_initial;
    let dh = instance.delta_h();
    // O_1 = [H_I + λ ΔH, ΔH] = [H_I, ΔH]
    let mut current = LambdaPoly::constant(h_i.commutator(&dh)?);
    let mut out = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        if k > 1 {
            current = current.commute_with_interpolation(h_i, &dh)?;
        }
        if current.term_count() > term_budget {
            return Err(CdqcError::Resource(format!(
                "nested commutator O_{k} holds {} terms, above the budget of {term_budget}",
                current.term_count()
            )));
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Solution of the Hankel system at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub alphas: Vec<f64>,
    /// `‖M α + Γ_{1..l}‖ / ‖Γ_{1..l}‖` (0 when the right side vanishes).
    pub relative_residual: f64,
    /// Every Γ vanished: `H_I` and `H_F` commute and the potential is zero.
    pub trivial: bool,
}

/// Solves `Σ_j Γ_{i+j} α_j = −Γ_i`, `i, j = 1..l`, by truncated SVD after a
/// symmetric diagonal (Jacobi) rescaling. `gammas[k-1] = Γ_k`, `k = 1..2l`.
pub fn solve_hankel(gammas: &[f64], l: usize) -> Result<AlphaSolution> {
    if gammas.len() < 2 * l {
        return Err(CdqcError::Validation(format!(
            "order {l} needs Γ_1..Γ_{}, got {} values",
            2 * l,
            gammas.len()
        )));
    }
    if l == 0 {
        return Ok(AlphaSolution {
            alphas: vec![],
            relative_residual: 0.0,
            trivial: false,
        });
    }
    let gamma = |k: usize| gammas[k - 1];
    let rhs = DVector::from_fn(l, |i, _| -gamma(i + 1));
    let rhs_norm = rhs.norm();
    if gammas[..2 * l].iter().all(|&g| g == 0.0) {
        return Ok(AlphaSolution {
            alphas: vec![0.0; l],
            relative_residual: 0.0,
            trivial: true,
        });
    }
    let m = DMatrix::from_fn(l, l, |i, j| gamma(i + j + 2));
    let scale = DVector::from_fn(l, |i, _| {
        let d = m[(i, i)];
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            1.0
        }
    });
    let scaled = DMatrix::from_fn(l, l, |i, j| scale[i] * m[(i, j)] * scale[j]);
    let scaled_rhs = rhs.component_mul(&scale);
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let y = if smax > 0.0 {
        svd.solve(&scaled_rhs, SV_CUTOFF * smax)
            .map_err(|e| CdqcError::Numerical(format!("Hankel solve failed: {e}")))?
    } else {
        DVector::zeros(l)
    };
    let alpha = y.component_mul(&scale);
    let residual = (&m * &alpha - &rhs).norm();
    Ok(AlphaSolution {
        alphas: alpha.iter().copied().collect(),
        relative_residual: if rhs_norm > 0.0 { residual / rhs_norm } else { 0.0 },
        trivial: false,
    })
}

/// Order-`l` expansion for one instance: `O_1..O_{2l}` and their Γ polynomials.
#[derive(Debug, Clone)]
pub struct AgpExpansion {
    order: usize,
    nested: Vec<LambdaPoly>,
    gamma_polys: Vec<Vec<f64>>,
    trivial: bool,
}

impl AgpExpansion {
    /// `order = 0` yields an empty expansion (no counterdiabatic term).
    pub fn new(instance: &ProblemInstance, order: usize) -> Result<Self> {
        Self::with_budget(instance, order, DEFAULT_TERM_BUDGET)
    }

    pub fn with_budget(instance: &ProblemInstance, order: usize, term_budget: usize) -> Result<Self> {
        if order == 0 {
            return Ok(Self {
                order,
                nested: vec![],
                gamma_polys: vec![],
                trivial: false,
            });
        }
        let nested = build_nested_with_budget(instance, 2 * order, term_budget)?;
        let gamma_polys = nested.iter().map(LambdaPoly::frobenius_sq_poly).collect();
        let trivial = nested[0].is_zero();
        Ok(Self {
            order,
            nested,
            gamma_polys,
            trivial,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `O_1 … O_{2l}`.
    pub fn nested(&self) -> &[LambdaPoly] {
        &self.nested
    }

    /// `O_1, O_3, …, O_{2l−1}`.
    pub fn odd_commutators(&self) -> impl Iterator<Item = &LambdaPoly> {
        self.nested.iter().step_by(2)
    }

    /// `[H_I, H_F] = 0`, so every Γ and the potential vanish.
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// `Γ_k(λ)` by evaluating `O_k(λ)` and taking its squared Frobenius norm.
    pub fn gamma(&self, k: usize, lambda: f64) -> Result<f64> {
        let o = self.nested_at(k)?;
        Ok(o.evaluate(lambda).frobenius_sq())
    }

    fn nested_at(&self, k: usize) -> Result<&LambdaPoly> {
        if k == 0 || k > self.nested.len() {
            return Err(CdqcError::Validation(format!(
                "O_{k} not built (have O_1..O_{})",
                self.nested.len()
            )));
        }
        Ok(&self.nested[k - 1])
    }

    /// `Γ_1(λ) … Γ_{2l}(λ)` from the precomputed Gram polynomials.
    pub fn gammas(&self, lambda: f64) -> Vec<f64> {
        self.gamma_polys.iter().map(|p| horner(p, lambda).max(0.0)).collect()
    }

    pub fn solve_alphas(&self, lambda: f64) -> Result<AlphaSolution> {
        self.solve_alphas_at_order(self.order, lambda)
    }

    /// Solves with a lower order `l <= self.order()` using the same commutators.
    pub fn solve_alphas_at_order(&self, l: usize, lambda: f64) -> Result<AlphaSolution> {
        if l > self.order {
            return Err(CdqcError::Validation(format!(
                "order {l} requested from an order-{} expansion",
                self.order
            )));
        }
        if self.trivial {
            return Ok(AlphaSolution {
                alphas: vec![0.0; l],
                relative_residual: 0.0,
                trivial: true,
            });
        }
        solve_hankel(&self.gammas(lambda), l)
    }

    /// `A^(l)(λ) = i Σ_k α_k O_{2k−1}(λ)`.
    pub fn assemble(&self, lambda: f64) -> Result<PauliOperator> {
        let sol = self.solve_alphas(lambda)?;
        self.assemble_with(lambda, &sol.alphas)
    }

    pub fn assemble_with(&self, lambda: f64, alphas: &[f64]) -> Result<PauliOperator> {
        let n = self.n_qubits().unwrap_or(1);
        let evaluated: Vec<PauliOperator> =
            self.odd_commutators().map(|o| o.evaluate(lambda)).collect();
        let parts = alphas
            .iter()
            .zip(&evaluated)
            .map(|(&a, o)| (C64::new(0.0, a), o));
        PauliOperator::linear_combination(n, parts)
    }

    fn n_qubits(&self) -> Option<usize> {
        self.nested.first().map(|p| p.n_qubits)
    }
}

/// Dense `A(λ)` from the spectral sum over eigenpairs of `H_ad(λ)`.
#[derive(Debug, Clone)]
pub struct ExactAgp {
    pub matrix: DMatrix<C64>,
    /// Some pair of distinct eigenvectors was (near-)degenerate and zeroed.
    pub degenerate_pairs: bool,
}

/// `−i Σ_{m≠n} <m|∂H|n>/(ε_m − ε_n) |m><n|`, degenerate pairs zeroed.
pub fn exact_agp_dense(instance: &ProblemInstance, lambda: f64) -> Result<ExactAgp> {
    exact_agp_dense_with_tol(instance, lambda, DEFAULT_DEGENERACY_TOL)
}

pub fn exact_agp_dense_with_tol(
    instance: &ProblemInstance,
    lambda: f64,
    degeneracy_tol: f64,
) -> Result<ExactAgp> {
    let h = instance.h_ad(lambda).to_dense()?;
    let dh = instance.delta_h().to_dense()?;
    let eig = linalg::eigh(&h);
    let v = &eig.vectors;
    let dh_eig = v.adjoint() * dh * v;
    let scale = eig.values.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let dim = eig.dim();
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    let mut degenerate_pairs = false;
    for m in 0..dim {
        for n in 0..dim {
            if m == n {
                continue;
            }
            let de = eig.values[m] - eig.values[n];
            if de.abs() < degeneracy_tol * scale {
                if dh_eig[(m, n)].norm() > 0.0 {
                    degenerate_pairs = true;
                }
                continue;
            }
            a[(m, n)] = C64::new(0.0, -1.0) * dh_eig[(m, n)] / de;
        }
    }
    Ok(ExactAgp {
        matrix: v * a * v.adjoint(),
        degenerate_pairs,
    })
}

/// `H(t) = H_ad(λ(t)) + λ̇(t) A^(l)(λ(t))` built symbolically then realized dense.
pub fn cd_hamiltonian(
    instance: &ProblemInstance,
    expansion: &AgpExpansion,
    t: f64,
    total_time: f64,
) -> Result<DMatrix<C64>> {
    let lam = schedule::lambda(t, total_time)?;
    let lam_dot = schedule::lambda_dot(t, total_time)?;
    let mut h = instance.h_ad(lam);
    if expansion.order() > 0 && lam_dot != 0.0 {
        let a = expansion.assemble(lam)?;
        h = PauliOperator::combine(&h, &a, C64::new(1.0, 0.0), C64::new(lam_dot, 0.0))?;
    }
    h.to_dense()
}

/// Dense building blocks for fast evaluation of `H(t)` at many times.
///
/// Stores `H_I`, `H_F` and, for every odd commutator, the dense matrices of
/// `i · (λ^m coefficient)`, so one Hamiltonian costs a handful of matrix
/// additions plus a Hankel solve.
#[derive(Debug, Clone)]
pub struct DenseCd {
    expansion: AgpExpansion,
    h_initial: DMatrix<C64>,
    h_final: DMatrix<C64>,
    odd_dense: Vec<Vec<DMatrix<C64>>>,
    split_initial: Planes,
    split_final: Planes,
    split_odd: Vec<Vec<Planes>>,
}

/// Real and imaginary planes of a stored matrix; all-zero planes are dropped.
#[derive(Debug, Clone)]
struct Planes {
    re: Option<Vec<f64>>,
    im: Option<Vec<f64>>,
    /// `max_i Σ_j (|Re m_ij| + |Im m_ij|)`.
    row_sum: f64,
}

impl Planes {
    fn new(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let re: Vec<f64> = m.iter().map(|z| z.re).collect();
        let im: Vec<f64> = m.iter().map(|z| z.im).collect();
        let mut sums = vec![0.0f64; n];
        for col in m.as_slice().chunks_exact(n) {
            for (s, z) in sums.iter_mut().zip(col) {
                *s += z.re.abs() + z.im.abs();
            }
        }
        let keep = |v: Vec<f64>| if v.iter().any(|&x| x != 0.0) { Some(v) } else { None };
        Self {
            re: keep(re),
            im: keep(im),
            row_sum: sums.into_iter().fold(0.0, f64::max),
        }
    }
}

/// Schedule values and expansion coefficients used for one `H(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdSample {
    pub lambda: f64,
    pub lambda_dot: f64,
    pub alphas: Vec<f64>,
    pub relative_residual: f64,
}

impl DenseCd {
    pub fn new(instance: &ProblemInstance, expansion: AgpExpansion) -> Result<Self> {
        let h_initial = instance.h_initial.to_dense()?;
        let h_final = instance.h_final.to_dense()?;
        let odd_dense = expansion
            .odd_commutators()
            .map(|o| o.coeffs().iter().map(|c| c.times_i().to_dense()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            split_initial: Planes::new(&h_initial),
            split_final: Planes::new(&h_final),
            split_odd: odd_dense.iter().map(|cs| cs.iter().map(Planes::new).collect()).collect(),
            expansion,
            h_initial,
            h_final,
            odd_dense,
        })
    }

    pub fn expansion(&self) -> &AgpExpansion {
        &self.expansion
    }

    pub fn order(&self) -> usize {
        self.expansion.order()
    }

    pub fn dim(&self) -> usize {
        self.h_initial.nrows()
    }

    pub fn h_initial(&self) -> &DMatrix<C64> {
        &self.h_initial
    }

    pub fn h_final(&self) -> &DMatrix<C64> {
        &self.h_final
    }

    /// Solves for α at `λ(t)` and returns `H(t)` with the sample metadata.
    pub fn hamiltonian(&self, t: f64, total_time: f64) -> Result<(DMatrix<C64>, CdSample)> {
        let sample = self.sample(t, total_time)?;
        Ok((self.hamiltonian_from(&sample), sample))
    }

    /// Schedule values and α at time `t`, without building the matrix.
    pub fn sample(&self, t: f64, total_time: f64) -> Result<CdSample> {
        let (lambda, lambda_dot) = schedule::lambda_and_dot(t, total_time)?;
        let sol = if self.order() > 0 {
            self.expansion.solve_alphas(lambda)?
        } else {
            AlphaSolution {
                alphas: vec![],
                relative_residual: 0.0,
                trivial: false,
            }
        };
        Ok(CdSample {
            lambda,
            lambda_dot,
            alphas: sol.alphas,
            relative_residual: sol.relative_residual,
        })
    }

    /// `H` for explicit `(λ, λ̇, α)`; no Hankel solve.
    pub fn hamiltonian_from(&self, sample: &CdSample) -> DMatrix<C64> {
        let mut h = DMatrix::zeros(self.dim(), self.dim());
        self.hamiltonian_into(sample, &mut h);
        h
    }

    /// Same as [`DenseCd::hamiltonian_from`], writing into a `dim × dim` buffer.
    pub fn hamiltonian_into(&self, sample: &CdSample, h: &mut DMatrix<C64>) {
        let (a, b) = (1.0 - sample.lambda, sample.lambda);
        for ((out, hi), hf) in h
            .as_mut_slice()
            .iter_mut()
            .zip(self.h_initial.as_slice())
            .zip(self.h_final.as_slice())
        {
            *out = hi * a + hf * b;
        }
        if sample.lambda_dot != 0.0 {
            for (alpha, coeffs) in sample.alphas.iter().zip(&self.odd_dense) {
                let mut w = sample.lambda_dot * alpha;
                for c in coeffs {
                    if w != 0.0 {
                        add_scaled(h, w, c);
                    }
                    w *= sample.lambda;
                }
            }
        }
    }

    /// Writes the real and imaginary planes of `H` (column-major) and returns
    /// whether the imaginary plane is nonzero and an upper bound on `‖H‖`.
    pub(crate) fn split_into(&self, sample: &CdSample, re: &mut [f64], im: &mut [f64]) -> (bool, f64) {
        // each plane is overwritten by its first contribution, then accumulated
        let (mut re_set, mut im_set) = (false, false);
        let mut bound = 0.0;
        let mut add = |p: &Planes, w: f64| {
            if w == 0.0 {
                return;
            }
            bound += w.abs() * p.row_sum;
            if let Some(r) = &p.re {
                axpy(re, w, r, re_set);
                re_set = true;
            }
            if let Some(i) = &p.im {
                axpy(im, w, i, im_set);
                im_set = true;
            }
        };
        add(&self.split_initial, 1.0 - sample.lambda);
        add(&self.split_final, sample.lambda);
        if sample.lambda_dot != 0.0 {
            for (alpha, coeffs) in sample.alphas.iter().zip(&self.split_odd) {
                let mut w = sample.lambda_dot * alpha;
                for c in coeffs {
                    add(c, w);
                    w *= sample.lambda;
                }
            }
        }
        if !re_set {
            re.fill(0.0);
        }
        if !im_set {
            im.fill(0.0);
        }
        (im_set, bound)
    }
}

#[inline]
fn axpy(acc: &mut [f64], w: f64, x: &[f64], accumulate: bool) {
    if accumulate {
        for (a, b) in acc.iter_mut().zip(x) {
            *a += w * b;
        }
    } else {
        for (a, b) in acc.iter_mut().zip(x) {
            *a = w * b;
        }
    }
}

#[inline]
fn add_scaled(acc: &mut DMatrix<C64>, w: f64, m: &DMatrix<C64>) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *a += b * w;
    }
}

/// One row of the Γ/α conditioning table.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub lambda: f64,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub relative_residual: f64,
}

/// Γ_1..Γ_{2l}, α_1..α_l and the residual on a uniform λ grid.
pub fn gamma_table(expansion: &AgpExpansion, points: usize) -> Result<Vec<GammaRow>> {
    if points < 2 {
        return Err(CdqcError::Validation("need at least 2 λ points".into()));
    }
    (0..points)
        .map(|k| {
            let lambda = k as f64 / (points - 1) as f64;
            let sol = expansion.solve_alphas(lambda)?;
            Ok(GammaRow {
                lambda,
                gammas: expansion.gammas(lambda),
                alphas: sol.alphas,
                relative_residual: sol.relative_residual,
            })
        })
        .collect()
}

pub fn write_gamma_csv<W: Write>(rows: &[GammaRow], order: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=2 * order).map(|k| format!("gamma_{k}")));
    header.extend((1..=order).map(|k| format!("alpha_{k}")));
    header.push("residual".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![format!("{:?}", row.lambda)];
        rec.extend(row.gammas.iter().map(|g| format!("{g:?}")));
        rec.extend(row.alphas.iter().map(|a| format!("{a:?}")));
        rec.push(format!("{:?}", row.relative_residual));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
