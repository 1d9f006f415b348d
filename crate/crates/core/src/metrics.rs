//! Coherence, energy fluctuation, speed-limit time and success probability.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agp::DenseCd;
use crate::error::{CdqcError, Result};
use crate::evolve::EvolutionTrace;
use crate::linalg::{self, Eigen};
use crate::problems::{GroundSpace, DEFAULT_DEGENERACY_TOL};
use crate::schedule::{self, Regime};
use crate::C64;

const UNIT_TOL: f64 = 1e-8;

/// Which instantaneous Hamiltonian defines the coherence basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceBasis {
    /// Eigenbasis of the full `H(t)` including the counterdiabatic term.
    #[default]
    Full,
    /// Eigenbasis of `H_ad(λ(t))` only.
    Adiabatic,
}

/// Populations of the distinct-eigenvalue projectors `‖Π_g ψ‖²`.
pub fn level_populations(psi: &DVector<C64>, eig: &Eigen, degeneracy_tol: f64) -> Vec<f64> {
    let amps = eig.amplitudes(psi);
    eig.degenerate_blocks(degeneracy_tol)
        .into_iter()
        .map(|block| block.map(|k| amps[k].norm_sqr()).sum())
        .collect()
}

/// Shannon entropy in bits; non-positive entries contribute nothing.
pub fn shannon_bits(populations: &[f64]) -> f64 {
    populations
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Relative entropy of coherence of a pure state in the eigenbasis of `h`.
pub fn coherence_re(psi: &DVector<C64>, h: &DMatrix<C64>) -> Result<f64> {
    coherence_re_with_tol(psi, h, DEFAULT_DEGENERACY_TOL)
}

pub fn coherence_re_with_tol(psi: &DVector<C64>, h: &DMatrix<C64>, degeneracy_tol: f64) -> Result<f64> {
    linalg::check_unit(psi, UNIT_TOL)?;
    let eig = linalg::eigh(h);
    Ok(shannon_bits(&level_populations(psi, &eig, degeneracy_tol)))
}

/// `√(<H²> − <H>²)`, clamping roundoff-sized negative variances.
pub fn energy_fluctuation(psi: &DVector<C64>, h: &DMatrix<C64>) -> Result<f64> {
    let hpsi = h * psi;
    let nn = psi.norm_squared();
    let mean = psi.dotc(&hpsi).re / nn;
    let second = hpsi.norm_squared() / nn;
    let var = second - mean * mean;
    if var < -1e-12 * mean.mul_add(mean, 1.0) {
        return Err(CdqcError::Numerical(format!("negative energy variance {var:e}")));
    }
    Ok(var.max(0.0).sqrt())
}

/// `(1/T) ∫ f dt` by the trapezoid rule on the sample grid.
pub fn time_average(times: &[f64], values: &[f64]) -> f64 {
    let total = times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0);
    if total <= 0.0 {
        return values.first().copied().unwrap_or(0.0);
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum();
    integral / total
}

/// Per-sample coherence and energy spread along a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
    pub fluctuation: Vec<f64>,
    /// `Σ_g p_g` at each sample; 1 up to roundoff.
    pub population_sums: Vec<f64>,
}

/// Rebuilds `H(t)` at every sample and evaluates the local quantities.
pub fn trace_series(trace: &EvolutionTrace, cd: &DenseCd, basis: CoherenceBasis) -> Result<TraceSeries> {
    if !trace.is_valid() {
        return Err(CdqcError::InvalidTrace {
            norm_drift: trace.norm_drift,
            limit: crate::evolve::NORM_DRIFT_LIMIT,
        });
    }
    if trace.len() < 2 {
        return Err(CdqcError::Validation("trace needs at least 2 samples".into()));
    }
    let mut series = TraceSeries {
        times: trace.times.clone(),
        coherence: Vec::with_capacity(trace.len()),
        fluctuation: Vec::with_capacity(trace.len()),
        population_sums: Vec::with_capacity(trace.len()),
    };
    for k in 0..trace.len() {
        let sample = crate::agp::CdSample {
            lambda: trace.lambdas[k],
            lambda_dot: trace.lambda_dots[k],
            alphas: trace.alphas[k].clone(),
            relative_residual: 0.0,
        };
        let h = cd.hamiltonian_from(&sample);
        let psi = &trace.states[k];
        let eig = match basis {
            CoherenceBasis::Full => linalg::eigh(&h),
            CoherenceBasis::Adiabatic => {
                let adiabatic = crate::agp::CdSample {
                    lambda_dot: 0.0,
                    ..sample
                };
                linalg::eigh(&cd.hamiltonian_from(&adiabatic))
            }
        };
        let pops = level_populations(psi, &eig, DEFAULT_DEGENERACY_TOL);
        series.population_sums.push(pops.iter().sum());
        series.coherence.push(shannon_bits(&pops));
        series.fluctuation.push(energy_fluctuation(psi, &h)?);
    }
    Ok(series)
}

/// `C_P = (1/T) ∫ C_re(t) dt`.
pub fn mean_coherence(trace: &EvolutionTrace, cd: &DenseCd) -> Result<f64> {
    let s = trace_series(trace, cd, CoherenceBasis::Full)?;
    Ok(time_average(&s.times, &s.coherence))
}

/// `ΔĒ = (1/T) ∫ √(<H²> − <H>²) dt` with the full `H(t)`.
pub fn energy_fluctuation_avg(trace: &EvolutionTrace, cd: &DenseCd) -> Result<f64> {
    let s = trace_series(trace, cd, CoherenceBasis::Full)?;
    Ok(time_average(&s.times, &s.fluctuation))
}

/// `arccos(|<ψ(0)|ψ(T)>|) / ΔĒ`; infinite if the state moved with `ΔĒ = 0`.
pub fn qsl_time(psi0: &DVector<C64>, psi_t: &DVector<C64>, avg_fluctuation: f64) -> f64 {
    let overlap = linalg::overlap_abs(psi0, psi_t).min(1.0);
    let angle = overlap.acos();
    if angle == 0.0 {
        0.0
    } else if avg_fluctuation <= 0.0 {
        f64::INFINITY
    } else {
        angle / avg_fluctuation
    }
}

/// Population of `ψ(T)` inside the ground space of `H_F`.
pub fn success_probability(final_state: &DVector<C64>, ground: &GroundSpace) -> f64 {
    ground.population(final_state)
}

/// Scalars summarising one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub mean_coherence: f64,
    pub avg_energy_fluctuation: f64,
    pub qsl_time: f64,
    pub success_probability: f64,
    pub t_delta: f64,
    pub regime: Regime,
    pub order: usize,
    pub coherence_series: Vec<f64>,
}

/// Evaluates every metric of a valid trace.
pub fn evaluate(
    trace: &EvolutionTrace,
    cd: &DenseCd,
    ground: &GroundSpace,
    gap: f64,
    basis: CoherenceBasis,
) -> Result<MetricsRecord> {
    let full = trace_series(trace, cd, CoherenceBasis::Full)?;
    let coherence_series = match basis {
        CoherenceBasis::Full => full.coherence.clone(),
        CoherenceBasis::Adiabatic => trace_series(trace, cd, basis)?.coherence,
    };
    let avg_energy_fluctuation = time_average(&full.times, &full.fluctuation);
    let report = schedule::classify_regime(trace.total_time, gap);
    Ok(MetricsRecord {
        mean_coherence: time_average(&full.times, &coherence_series),
        avg_energy_fluctuation,
        qsl_time: qsl_time(trace.initial_state(), trace.final_state(), avg_energy_fluctuation),
        success_probability: success_probability(trace.final_state(), ground),
        t_delta: report.t_delta,
        regime: report.regime,
        order: trace.order,
        coherence_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;

    fn diag(values: &[f64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }

    fn basis(dim: usize, k: usize) -> DVector<C64> {
        DVector::from_fn(dim, |i, _| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0))
    }

    #[test]
    fn eigenstate_has_no_coherence() {
        let h = diag(&[0.3, -1.0, 2.0, 5.0]);
        assert_eq!(coherence_re(&basis(4, 2), &h).unwrap(), 0.0);
    }

    #[test]
    fn two_level_superposition_is_one_bit() {
        let h = diag(&[-1.0, 1.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DVector::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, s)]);
        assert!((coherence_re(&psi, &h).unwrap() - 1.0).abs() < 1e-14);
        assert!((energy_fluctuation(&psi, &h).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_superposition_is_n_bits() {
        let n = 4;
        let dim = 1 << n;
        let levels: Vec<f64> = (0..dim).map(|k| k as f64 * 0.37 - 1.0).collect();
        let psi = DVector::from_element(dim, C64::new((dim as f64).sqrt().recip(), 0.0));
        assert!((coherence_re(&psi, &diag(&levels)).unwrap() - n as f64).abs() < 1e-12);
    }

    #[test]
    fn non_unit_state_rejected() {
        let h = diag(&[0.0, 1.0]);
        let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(coherence_re(&psi, &h), Err(CdqcError::Validation(_))));
    }

    #[test]
    fn degenerate_remixing_leaves_coherence_unchanged() {
        // levels {−1, −1, 2, 2, 3}; random unitary inside each degenerate block
        let d = diag(&[-1.0, -1.0, 2.0, 2.0, 3.0]);
        let (c, s) = (0.6f64, 0.8f64);
        let mut u = DMatrix::<C64>::identity(5, 5);
        u[(0, 0)] = C64::new(c, 0.0);
        u[(0, 1)] = C64::new(-s, 0.0);
        u[(1, 0)] = C64::new(s, 0.0);
        u[(1, 1)] = C64::new(c, 0.0);
        let phase = C64::from_polar(1.0, 0.9);
        u[(2, 2)] = C64::new(c, 0.0) * phase;
        u[(2, 3)] = C64::new(0.0, s);
        u[(3, 2)] = C64::new(0.0, s) * phase;
        u[(3, 3)] = C64::new(c, 0.0);
        // a generic unitary for the outer basis change
        let w = linalg::eigh(&(diag(&[0.1, 0.4, -0.3, 0.7, 0.2]) + DMatrix::from_fn(5, 5, |i, j| {
            C64::new(0.05 * (i + j) as f64, 0.03 * (i as f64 - j as f64))
        }))).vectors;
        let h1 = &w * &d * w.adjoint();
        let wu = &w * &u;
        let h2 = &wu * &d * wu.adjoint();
        let psi = DVector::from_fn(5, |i, _| C64::new(0.2 + 0.1 * i as f64, -0.05 * i as f64)).normalize();
        let a = coherence_re(&psi, &h1).unwrap();
        let b = coherence_re(&psi, &h2).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_average() {
        let t = [0.0, 1.0, 2.0];
        assert!((time_average(&t, &[0.0, 1.0, 2.0]) - 1.0).abs() < 1e-15);
        assert!((time_average(&t, &[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qsl_examples() {
        let a = basis(2, 0);
        let b = basis(2, 1);
        assert_eq!(qsl_time(&a, &a, 0.7), 0.0);
        assert!((qsl_time(&a, &b, 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(qsl_time(&a, &b, 0.0).is_infinite());
    }

    #[test]
    fn success_probability_examples() {
        let h = problems::build_maxcut(2, &[(0, 1, 1.0)]).unwrap();
        let gs = problems::ground_space(&h, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(gs.dim(), 2);
        // |01> lies in the ground space, |00> is orthogonal to it
        assert!((success_probability(&basis(4, 1), &gs) - 1.0).abs() < 1e-12);
        assert!(success_probability(&basis(4, 0), &gs) < 1e-12);
    }
}
