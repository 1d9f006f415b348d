//! Unitary propagation under the counterdiabatic Hamiltonian.
//!
//! Each step applies the exponential midpoint rule
//! `ψ_{k+1} = exp(−i H(t_k + dt/2) dt) ψ_k`. The step exponential is
//! either formed from a full hermitian eigendecomposition or applied to the
//! state as a Taylor series summed to machine precision.

use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agp::{CdSample, DenseCd};
use crate::error::{CdqcError, Result};
use crate::linalg;
use crate::problems::{self, ProblemInstance, DEFAULT_DEGENERACY_TOL};
use crate::C64;

/// Traces whose norm drifts past this are marked invalid.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;

pub const DEFAULT_MIN_STEPS: usize = 2000;
pub const DEFAULT_STEPS_PER_PHASE: f64 = 40.0;
pub const DEFAULT_SAMPLES: usize = 401;
const NORM_PROBES: usize = 20;

/// How `exp(−i H dt) ψ` is evaluated inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepExponential {
    /// `V exp(−i E dt) V† ψ` from a hermitian eigendecomposition.
    Eigh,
    /// Taylor series on the state vector, truncated once a term drops
    /// below `1e-17 ‖ψ‖`; steps with `‖H dt‖ > 1` are split.
    #[default]
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    /// Fixed step count; `None` uses [`default_steps`].
    pub n_steps: Option<usize>,
    pub n_samples: usize,
    pub exponential: StepExponential,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            n_steps: None,
            n_samples: DEFAULT_SAMPLES,
            exponential: StepExponential::default(),
        }
    }
}

/// States sampled along one propagation.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub total_time: f64,
    pub order: usize,
    pub n_qubits: usize,
    pub n_steps: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    pub lambdas: Vec<f64>,
    pub lambda_dots: Vec<f64>,
    /// Expansion coefficients `α` in force at each sample.
    pub alphas: Vec<Vec<f64>>,
    /// `max |‖ψ‖ − 1|` over the recorded samples.
    pub norm_drift: f64,
    /// Largest relative Hankel residual seen at any evaluation node.
    pub gamma_residual_max: f64,
}

impl EvolutionTrace {
    pub fn is_valid(&self) -> bool {
        self.norm_drift <= NORM_DRIFT_LIMIT
    }

    /// `Ok(self)` when valid, otherwise [`CdqcError::InvalidTrace`].
    pub fn validated(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(CdqcError::InvalidTrace {
                norm_drift: self.norm_drift,
                limit: NORM_DRIFT_LIMIT,
            })
        }
    }

    pub fn initial_state(&self) -> &DVector<C64> {
        &self.states[0]
    }

    pub fn final_state(&self) -> &DVector<C64> {
        self.states.last().expect("trace has samples")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Unique ground state of `H_I`, phase-fixed.
pub fn initial_state(instance: &ProblemInstance) -> Result<DVector<C64>> {
    let gs = problems::ground_space(&instance.h_initial, DEFAULT_DEGENERACY_TOL)?;
    if gs.dim() != 1 {
        return Err(CdqcError::Validation(format!(
            "initial Hamiltonian has a {}-fold degenerate ground state",
            gs.dim()
        )));
    }
    Ok(linalg::canonical_phase(gs.states[0].clone()))
}

/// Largest spectral norm of `H(t)` over uniformly spaced probe times.
pub fn max_hamiltonian_norm(cd: &DenseCd, total_time: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..NORM_PROBES {
        let t = (total_time * k as f64 / (NORM_PROBES - 1) as f64).min(total_time);
        let (h, _) = cd.hamiltonian(t, total_time)?;
        worst = worst.max(linalg::hermitian_norm(&h));
    }
    Ok(worst)
}

/// `max(2000, ⌈40 · T · ‖H‖_max⌉)`.
pub fn default_steps(cd: &DenseCd, total_time: f64) -> Result<usize> {
    let norm = max_hamiltonian_norm(cd, total_time)?;
    let by_phase = (DEFAULT_STEPS_PER_PHASE * total_time * norm).ceil();
    Ok((by_phase as usize).max(DEFAULT_MIN_STEPS))
}

/// Applies `exp(−i H dt)` to `psi` in place.
pub fn apply_step(h: &DMatrix<C64>, dt: f64, psi: &mut DVector<C64>, method: StepExponential) {
    match method {
        StepExponential::Eigh => eigh_step(h, dt, psi),
        StepExponential::Taylor => {
            let mut ws = Workspace::new(psi.len());
            let bound = ws.load(h);
            ws.set_state(psi);
            ws.taylor(dt, bound);
            ws.get_state(psi);
        }
    }
}

fn eigh_step(h: &DMatrix<C64>, dt: f64, psi: &mut DVector<C64>) {
    let eig = linalg::eigh(h);
    let mut coeffs = eig.vectors.ad_mul(psi);
    for (c, e) in coeffs.iter_mut().zip(&eig.values) {
        *c *= C64::from_polar(1.0, -e * dt);
    }
    eig.vectors.mul_to(&coeffs, psi);
}

/// Scratch space for the Taylor path: `H` and the state held as separate
/// real and imaginary planes so the inner loops vectorize.
struct Workspace {
    n: usize,
    h_re: Vec<f64>,
    h_im: Vec<f64>,
    has_im: bool,
    psi: [Vec<f64>; 2],
    term: [Vec<f64>; 2],
    next: [Vec<f64>; 2],
}

impl Workspace {
    fn new(n: usize) -> Self {
        let v = || [vec![0.0; n], vec![0.0; n]];
        Self {
            n,
            h_re: vec![0.0; n * n],
            h_im: vec![0.0; n * n],
            has_im: false,
            psi: v(),
            term: v(),
            next: v(),
        }
    }

    /// Loads `H` and returns `max_i Σ_j (|Re h_ij| + |Im h_ij|)`, a bound on `‖H‖`.
    fn load(&mut self, h: &DMatrix<C64>) -> f64 {
        let n = self.n;
        let mut sums = vec![0.0f64; n];
        for (j, col) in h.as_slice().chunks_exact(n).enumerate() {
            let re = &mut self.h_re[j * n..j * n + n];
            let im = &mut self.h_im[j * n..j * n + n];
            for i in 0..n {
                let z = col[i];
                re[i] = z.re;
                im[i] = z.im;
                sums[i] += z.re.abs() + z.im.abs();
            }
        }
        self.has_im = self.h_im.iter().any(|&v| v != 0.0);
        sums.into_iter().fold(0.0, f64::max)
    }

    fn load_sample(&mut self, cd: &DenseCd, sample: &CdSample) -> f64 {
        let (has_im, bound) = cd.split_into(sample, &mut self.h_re, &mut self.h_im);
        self.has_im = has_im;
        bound
    }

    fn set_state(&mut self, psi: &DVector<C64>) {
        for (k, z) in psi.iter().enumerate() {
            self.psi[0][k] = z.re;
            self.psi[1][k] = z.im;
        }
    }

    fn get_state(&self, psi: &mut DVector<C64>) {
        for (k, z) in psi.iter_mut().enumerate() {
            *z = C64::new(self.psi[0][k], self.psi[1][k]);
        }
    }

    /// Taylor series for `exp(−i H dt)` on the stored state; `norm_bound ≥ ‖H‖`.
    fn taylor(&mut self, dt: f64, norm_bound: f64) {
        let bound = norm_bound * dt.abs();
        let substeps = bound.ceil().max(1.0) as usize;
        let sub_dt = dt / substeps as f64;
        let terms = taylor_terms(bound / substeps as f64);
        if self.n <= SMALL_DIM {
            for _ in 0..substeps {
                match self.n {
                    2 => self.taylor_fixed_dispatch::<2>(sub_dt, terms),
                    4 => self.taylor_fixed_dispatch::<4>(sub_dt, terms),
                    8 => self.taylor_fixed_dispatch::<8>(sub_dt, terms),
                    _ => self.taylor_small(sub_dt, terms),
                }
            }
            return;
        }
        for _ in 0..substeps {
            self.term[0].copy_from_slice(&self.psi[0]);
            self.term[1].copy_from_slice(&self.psi[1]);
            for k in 1..=terms {
                self.apply_scaled(sub_dt / k as f64);
                std::mem::swap(&mut self.term, &mut self.next);
                for p in 0..2 {
                    for (a, b) in self.psi[p].iter_mut().zip(&self.term[p]) {
                        *a += b;
                    }
                }
            }
        }
    }

    fn taylor_fixed_dispatch<const N: usize>(&mut self, dt: f64, terms: usize) {
        #[cfg(target_arch = "x86_64")]
        {
            if has_fma() {
                // SAFETY: the required CPU features were detected at runtime.
                unsafe { self.taylor_fixed_fma::<N>(dt, terms) };
                return;
            }
        }
        self.taylor_fixed::<N, false>(dt, terms);
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn taylor_fixed_fma<const N: usize>(&mut self, dt: f64, terms: usize) {
        self.taylor_fixed::<N, true>(dt, terms);
    }

    /// [`Workspace::taylor_small`] with the dimension known at compile time.
    #[inline(always)]
    fn taylor_fixed<const N: usize, const FUSED: bool>(&mut self, dt: f64, terms: usize) {
        let mut re = [[0.0; N]; N];
        let mut im = [[0.0; N]; N];
        for i in 0..N {
            re[i].copy_from_slice(&self.h_re[i * N..i * N + N]);
            im[i].copy_from_slice(&self.h_im[i * N..i * N + N]);
        }
        let [pr, pi] = &mut self.psi;
        let (pr, pi): (&mut [f64; N], &mut [f64; N]) = (
            (&mut pr[..N]).try_into().expect("length N"),
            (&mut pi[..N]).try_into().expect("length N"),
        );
        // Horner form: v ← ψ + (−i dt / k) H v for k = K, …, 1
        let (mut vr, mut vi) = (*pr, *pi);
        for k in (1..=terms).rev() {
            let a = dt / k as f64;
            // H v column by column, two accumulators to shorten the chain
            let mut ar = [[0.0; N]; 2];
            let mut ai = [[0.0; N]; 2];
            for j in 0..N {
                let (xr, xi) = (vr[j], vi[j]);
                let (ar, ai) = (&mut ar[j & 1], &mut ai[j & 1]);
                for i in 0..N {
                    ar[i] = madd::<FUSED>(re[j][i], xr, ar[i]);
                    ai[i] = madd::<FUSED>(re[j][i], xi, ai[i]);
                }
                if self.has_im {
                    for i in 0..N {
                        ar[i] = madd::<FUSED>(-im[j][i], xi, ar[i]);
                        ai[i] = madd::<FUSED>(im[j][i], xr, ai[i]);
                    }
                }
            }
            for i in 0..N {
                vr[i] = madd::<FUSED>(a, ai[0][i] + ai[1][i], pr[i]);
                vi[i] = madd::<FUSED>(-a, ar[0][i] + ar[1][i], pi[i]);
            }
        }
        (*pr, *pi) = (vr, vi);
    }

    /// One substep for small `n`: row sums on the fly, no scratch passes.
    fn taylor_small(&mut self, dt: f64, terms: usize) {
        let n = self.n;
        let mut tr = [0.0; SMALL_DIM];
        let mut ti = [0.0; SMALL_DIM];
        let mut nr = [0.0; SMALL_DIM];
        let mut ni = [0.0; SMALL_DIM];
        let [pr, pi] = &mut self.psi;
        tr[..n].copy_from_slice(&pr[..n]);
        ti[..n].copy_from_slice(&pi[..n]);
        for k in 1..=terms {
            let a = dt / k as f64;
            // row i of Re H is column i; row i of Im H is minus column i
            for i in 0..n {
                let re = &self.h_re[i * n..i * n + n];
                let (mut sr, mut si) = (0.0, 0.0);
                for j in 0..n {
                    sr += re[j] * tr[j];
                    si += re[j] * ti[j];
                }
                if self.has_im {
                    let im = &self.h_im[i * n..i * n + n];
                    for j in 0..n {
                        sr += im[j] * ti[j];
                        si -= im[j] * tr[j];
                    }
                }
                nr[i] = a * si;
                ni[i] = -a * sr;
            }
            for i in 0..n {
                tr[i] = nr[i];
                ti[i] = ni[i];
                pr[i] += nr[i];
                pi[i] += ni[i];
            }
        }
    }

    /// `next = c · H · term` with `c = −i a`.
    fn apply_scaled(&mut self, a: f64) {
        let [nr, ni] = &mut self.next;
        let [tr, ti] = &self.term;
        nr.fill(0.0);
        ni.fill(0.0);
        // (H t)_re accumulates into ni, (H t)_im into nr; the −i a factor is applied after
        if self.has_im {
            zgemv(&self.h_re, &self.h_im, tr, ti, ni, nr);
        } else {
            gemv2(&self.h_re, tr, ti, ni, nr);
        }
        for v in nr.iter_mut() {
            *v *= a;
        }
        for v in ni.iter_mut() {
            *v *= -a;
        }
    }
}

#[cfg(target_arch = "x86_64")]
fn has_fma() -> bool {
    static FMA: OnceLock<bool> = OnceLock::new();
    *FMA.get_or_init(|| std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma"))
}

#[inline(always)]
fn madd<const FUSED: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FUSED {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// `out_x += H x`, `out_y += H y` for a column-major square `H`.
fn gemv2(h: &[f64], x: &[f64], y: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if has_fma() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { gemv2_fma(h, x, y, out_x, out_y) };
            return;
        }
    }
    gemv2_body::<false>(h, x, y, out_x, out_y);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemv2_fma(h: &[f64], x: &[f64], y: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
    gemv2_body::<true>(h, x, y, out_x, out_y);
}

/// `(out_re + i out_im) += (H_re + i H_im)(x_re + i x_im)` in one pass over `H`.
fn zgemv(h_re: &[f64], h_im: &[f64], x_re: &[f64], x_im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if has_fma() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { zgemv_fma(h_re, h_im, x_re, x_im, out_re, out_im) };
            return;
        }
    }
    zgemv_body::<false>(h_re, h_im, x_re, x_im, out_re, out_im);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn zgemv_fma(h_re: &[f64], h_im: &[f64], x_re: &[f64], x_im: &[f64], out_re: &mut [f64], out_im: &mut [f64]) {
    zgemv_body::<true>(h_re, h_im, x_re, x_im, out_re, out_im);
}

#[inline(always)]
fn zgemv_body<const FUSED: bool>(
    h_re: &[f64],
    h_im: &[f64],
    x_re: &[f64],
    x_im: &[f64],
    out_re: &mut [f64],
    out_im: &mut [f64],
) {
    let n = x_re.len();
    let (out_re, out_im) = (&mut out_re[..n], &mut out_im[..n]);
    let cols = h_re.chunks_exact(n).zip(h_im.chunks_exact(n));
    for ((cr, ci), (&xr, &xi)) in cols.zip(x_re.iter().zip(&x_im[..n])) {
        for (((or, oi), &a), &b) in out_re.iter_mut().zip(out_im.iter_mut()).zip(cr).zip(ci) {
            *or = madd::<FUSED>(a, xr, madd::<FUSED>(-b, xi, *or));
            *oi = madd::<FUSED>(a, xi, madd::<FUSED>(b, xr, *oi));
        }
    }
}

#[inline(always)]
fn gemv2_body<const FUSED: bool>(h: &[f64], x: &[f64], y: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
    let n = x.len();
    let (out_x, out_y) = (&mut out_x[..n], &mut out_y[..n]);
    for ((col, &xj), &yj) in h.chunks_exact(n).zip(x).zip(&y[..n]) {
        for ((ox, oy), &hij) in out_x.iter_mut().zip(out_y.iter_mut()).zip(col) {
            *ox = madd::<FUSED>(hij, xj, *ox);
            *oy = madd::<FUSED>(hij, yj, *oy);
        }
    }
}

/// Largest dimension handled by the row-sum kernel.
const SMALL_DIM: usize = 16;

const TAYLOR_TOL: f64 = 1e-17;
const MAX_TAYLOR_TERMS: usize = 60;

/// Smallest `K` with `x^K / K! ≤ 1e-17` for `0 ≤ x ≤ 1`.
fn taylor_terms(x: f64) -> usize {
    static LIMITS: OnceLock<Vec<f64>> = OnceLock::new();
    // LIMITS[K-1] is the largest x for which K terms suffice
    let limits = LIMITS.get_or_init(|| {
        let mut log_fact = 0.0;
        (1..=MAX_TAYLOR_TERMS)
            .map(|k| {
                log_fact += (k as f64).ln();
                ((TAYLOR_TOL.ln() + log_fact) / k as f64).exp()
            })
            .collect()
    });
    limits.iter().position(|&lim| x <= lim).map_or(MAX_TAYLOR_TERMS, |k| k + 1)
}

/// Propagates the ground state of `H_I` from `t = 0` to `T`.
///
/// Steps are uniform; the step count is rounded up to a multiple of
/// `n_samples − 1` so that every sample time is a step boundary.
pub fn propagate(
    instance: &ProblemInstance,
    cd: &DenseCd,
    total_time: f64,
    opts: &PropagateOptions,
) -> Result<EvolutionTrace> {
    let psi0 = initial_state(instance)?;
    propagate_from(cd, psi0, total_time, opts, instance.n_qubits)
}

pub fn propagate_from(
    cd: &DenseCd,
    psi0: DVector<C64>,
    total_time: f64,
    opts: &PropagateOptions,
    n_qubits: usize,
) -> Result<EvolutionTrace> {
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(CdqcError::Validation(format!("total time must be positive, got {total_time}")));
    }
    if opts.n_samples < 2 {
        return Err(CdqcError::Validation("need at least 2 samples".into()));
    }
    if psi0.len() != cd.dim() {
        return Err(CdqcError::Structure(format!(
            "initial state has dimension {}, Hamiltonian {}",
            psi0.len(),
            cd.dim()
        )));
    }
    let requested = match opts.n_steps {
        Some(n) => n,
        None => default_steps(cd, total_time)?,
    };
    if requested < opts.n_samples - 1 {
        return Err(CdqcError::Validation(format!(
            "n_steps ({requested}) must be at least n_samples - 1 ({})",
            opts.n_samples - 1
        )));
    }
    let intervals = opts.n_samples - 1;
    let per_sample = requested.div_ceil(intervals);
    let n_steps = per_sample * intervals;
    let dt = total_time / n_steps as f64;

    let mut trace = EvolutionTrace {
        total_time,
        order: cd.order(),
        n_qubits,
        n_steps,
        times: Vec::with_capacity(opts.n_samples),
        states: Vec::with_capacity(opts.n_samples),
        lambdas: Vec::with_capacity(opts.n_samples),
        lambda_dots: Vec::with_capacity(opts.n_samples),
        alphas: Vec::with_capacity(opts.n_samples),
        norm_drift: (psi0.norm() - 1.0).abs(),
        gamma_residual_max: 0.0,
    };
    let record = |trace: &mut EvolutionTrace, t: f64, psi: &DVector<C64>| -> Result<()> {
        let sample = cd.sample(t, total_time)?;
        trace.gamma_residual_max = trace.gamma_residual_max.max(sample.relative_residual);
        trace.times.push(t);
        trace.states.push(psi.clone());
        trace.lambdas.push(sample.lambda);
        trace.lambda_dots.push(sample.lambda_dot);
        trace.alphas.push(sample.alphas);
        Ok(())
    };

    let mut psi = psi0;
    let mut h = DMatrix::zeros(cd.dim(), cd.dim());
    let mut ws = Workspace::new(cd.dim());
    ws.set_state(&psi);
    record(&mut trace, 0.0, &psi)?;
    let mut until_sample = per_sample;
    for step in 0..n_steps {
        let mid = ((step as f64 + 0.5) * dt).min(total_time);
        let sample = cd.sample(mid, total_time)?;
        trace.gamma_residual_max = trace.gamma_residual_max.max(sample.relative_residual);
        match opts.exponential {
            StepExponential::Eigh => {
                cd.hamiltonian_into(&sample, &mut h);
                eigh_step(&h, dt, &mut psi);
            }
            StepExponential::Taylor => {
                let bound = ws.load_sample(cd, &sample);
                ws.taylor(dt, bound);
            }
        }
        until_sample -= 1;
        if until_sample == 0 {
            until_sample = per_sample;
            let t = if step + 1 == n_steps {
                total_time
            } else {
                ((step + 1) as f64 * dt).min(total_time)
            };
            if opts.exponential == StepExponential::Taylor {
                ws.get_state(&mut psi);
            }
            trace.norm_drift = trace.norm_drift.max((psi.norm() - 1.0).abs());
            record(&mut trace, t, &psi)?;
        }
    }
    Ok(trace)
}

/// `‖ψ_T(n_{i+1}) − ψ_T(n_i)‖` for successive step counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub difference: f64,
}

pub fn convergence_report(
    instance: &ProblemInstance,
    cd: &DenseCd,
    total_time: f64,
    steps_sequence: &[usize],
    exponential: StepExponential,
) -> Result<Vec<ConvergenceRow>> {
    let mut finals = Vec::with_capacity(steps_sequence.len());
    for &n in steps_sequence {
        let opts = PropagateOptions {
            n_steps: Some(n),
            n_samples: 2,
            exponential,
        };
        let trace = propagate(instance, cd, total_time, &opts)?;
        finals.push((trace.n_steps, trace.final_state().clone()));
    }
    Ok(finals
        .windows(2)
        .map(|w| ConvergenceRow {
            n_steps: w[1].0,
            difference: (&w[1].1 - &w[0].1).norm(),
        })
        .collect())
}

/// Binary trace layout, all little-endian:
///
/// ```text
/// u64 n_qubits
/// u64 n_samples
/// f64 × n_samples                       sample times
/// (f64 re, f64 im) × 2^n × n_samples    amplitudes, sample-major
/// ```
pub fn write_trace_binary<W: Write>(trace: &EvolutionTrace, mut out: W) -> Result<()> {
    out.write_all(&(trace.n_qubits as u64).to_le_bytes())?;
    out.write_all(&(trace.times.len() as u64).to_le_bytes())?;
    for t in &trace.times {
        out.write_all(&t.to_le_bytes())?;
    }
    for state in &trace.states {
        for a in state.iter() {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the layout written by [`write_trace_binary`]: `(n_qubits, times, states)`.
pub fn read_trace_binary<R: Read>(mut input: R) -> Result<(usize, Vec<f64>, Vec<DVector<C64>>)> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let n_qubits = u64::from_le_bytes(next(&mut input)?) as usize;
    let n_samples = u64::from_le_bytes(next(&mut input)?) as usize;
    if n_qubits == 0 || n_qubits > 30 {
        return Err(CdqcError::Parse(format!("implausible qubit count {n_qubits}")));
    }
    let times = (0..n_samples)
        .map(|_| Ok(f64::from_le_bytes(next(&mut input)?)))
        .collect::<Result<Vec<_>>>()?;
    let dim = 1usize << n_qubits;
    let mut states = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut v = DVector::<C64>::zeros(dim);
        for a in v.iter_mut() {
            let re = f64::from_le_bytes(next(&mut input)?);
            let im = f64::from_le_bytes(next(&mut input)?);
            *a = C64::new(re, im);
        }
        states.push(v);
    }
    Ok((n_qubits, times, states))
}
