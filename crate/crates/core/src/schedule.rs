//! The interpolation schedule `λ(t)`, its derivative, the adiabatic gap and
//! regime classification.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CdqcError, Result};
use crate::linalg;
use crate::problems::{ProblemInstance, DEFAULT_DEGENERACY_TOL};

/// Default number of λ points used when searching for the minimum gap.
pub const DEFAULT_GAP_GRID: usize = 201;

/// Gaps smaller than this make the regime classification unreliable.
pub const GAPLESS_THRESHOLD: f64 = 1e-12;

/// `π²/4`, the crossover value of `TΔ`.
pub const CROSSOVER: f64 = PI * PI / 4.0;

/// Factor standing in for "much smaller/larger than".
pub const REGIME_FACTOR: f64 = 10.0;

fn check_time(t: f64, total_time: f64) -> Result<()> {
    if !(total_time > 0.0) {
        return Err(CdqcError::Validation(format!("total time must be positive, got {total_time}")));
    }
    if !(0.0..=total_time).contains(&t) {
        return Err(CdqcError::Validation(format!("t = {t} outside [0, {total_time}]")));
    }
    Ok(())
}

/// `λ(t) = sin²((π/2) sin²(πt/2T))`.
pub fn lambda(t: f64, total_time: f64) -> Result<f64> {
    check_time(t, total_time)?;
    Ok(lambda_unchecked(t, total_time))
}

/// `λ̇(t) = (π²/4T) sin(πt/T) sin(π sin²(πt/2T))`.
pub fn lambda_dot(t: f64, total_time: f64) -> Result<f64> {
    check_time(t, total_time)?;
    Ok(lambda_dot_unchecked(t, total_time))
}

/// `(λ(t), λ̇(t))` sharing the inner sine.
pub fn lambda_and_dot(t: f64, total_time: f64) -> Result<(f64, f64)> {
    check_time(t, total_time)?;
    let (s, c) = (PI * t / (2.0 * total_time)).sin_cos();
    let (outer, outer_cos) = (0.5 * PI * s * s).sin_cos();
    let dot = PI * PI / (4.0 * total_time) * (2.0 * s * c) * (2.0 * outer * outer_cos);
    Ok((outer * outer, dot.max(0.0)))
}

#[inline]
pub(crate) fn lambda_unchecked(t: f64, total_time: f64) -> f64 {
    let inner = (PI * t / (2.0 * total_time)).sin().powi(2);
    (0.5 * PI * inner).sin().powi(2)
}

#[inline]
pub(crate) fn lambda_dot_unchecked(t: f64, total_time: f64) -> f64 {
    let inner = (PI * t / (2.0 * total_time)).sin().powi(2);
    // sin(π t / T) is negative-zero-safe at the endpoints; clamp tiny negatives
    let v = PI * PI / (4.0 * total_time) * (PI * t / total_time).sin() * (PI * inner).sin();
    v.max(0.0)
}

/// The schedule over a fixed total time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub total_time: f64,
}

impl Schedule {
    pub fn new(total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(CdqcError::Validation(format!("total time must be positive, got {total_time}")));
        }
        Ok(Self { total_time })
    }

    pub fn lambda(&self, t: f64) -> Result<f64> {
        lambda(t, self.total_time)
    }

    pub fn lambda_dot(&self, t: f64) -> Result<f64> {
        lambda_dot(t, self.total_time)
    }

    /// `max_t λ̇ = π²/(4T)`, attained at `t = T/2`.
    pub fn max_lambda_dot(&self) -> f64 {
        CROSSOVER / self.total_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Impulse,
    Intermediate,
    Adiabatic,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Impulse => "impulse",
            Regime::Intermediate => "intermediate",
            Regime::Adiabatic => "adiabatic",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Regime {
    type Err = CdqcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impulse" => Ok(Regime::Impulse),
            "intermediate" => Ok(Regime::Intermediate),
            "adiabatic" => Ok(Regime::Adiabatic),
            other => Err(CdqcError::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub gap: f64,
    pub t_delta: f64,
    pub regime: Regime,
}

/// Thresholds are `CROSSOVER / REGIME_FACTOR` and `CROSSOVER · REGIME_FACTOR`.
pub fn classify_regime(total_time: f64, gap: f64) -> RegimeReport {
    let t_delta = total_time * gap;
    let regime = if t_delta <= CROSSOVER / REGIME_FACTOR {
        Regime::Impulse
    } else if t_delta >= CROSSOVER * REGIME_FACTOR {
        Regime::Adiabatic
    } else {
        Regime::Intermediate
    };
    RegimeReport { gap, t_delta, regime }
}

/// Result of a minimum-gap search along `H_ad(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub lambda_at_min: f64,
    /// The gap dropped below [`GAPLESS_THRESHOLD`] (or no distinct excited
    /// level exists) somewhere on the grid.
    pub gapless: bool,
}

/// Distance from the ground level to the first distinct level.
///
/// Levels within `degeneracy_tol` times the spectral radius (at least 1) of
/// `E₀` count as degenerate with it.
pub fn spectral_gap(values: &[f64], degeneracy_tol: f64) -> Option<f64> {
    let e0 = values[0];
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let cutoff = e0 + degeneracy_tol * scale;
    values.iter().find(|&&v| v > cutoff).map(|&e1| e1 - e0)
}

/// Minimum over a uniform λ grid of `E₁ − E₀` of `H_ad(λ)`.
pub fn min_gap(instance: &ProblemInstance, grid_points: usize) -> Result<GapReport> {
    min_gap_with_tol(instance, grid_points, DEFAULT_DEGENERACY_TOL)
}

pub fn min_gap_with_tol(
    instance: &ProblemInstance,
    grid_points: usize,
    degeneracy_tol: f64,
) -> Result<GapReport> {
    if grid_points < 2 {
        return Err(CdqcError::Validation("gap grid needs at least 2 points".into()));
    }
    let h_i = instance.h_initial.to_dense()?;
    let h_f = instance.h_final.to_dense()?;
    let mut best = GapReport {
        gap: f64::INFINITY,
        lambda_at_min: 0.0,
        gapless: false,
    };
    for k in 0..grid_points {
        let lam = k as f64 / (grid_points - 1) as f64;
        let h = &h_i * crate::C64::new(1.0 - lam, 0.0) + &h_f * crate::C64::new(lam, 0.0);
        let eig = linalg::eigh(&h);
        match spectral_gap(&eig.values, degeneracy_tol) {
            Some(g) => {
                if g < best.gap {
                    best.gap = g;
                    best.lambda_at_min = lam;
                }
                if g < GAPLESS_THRESHOLD {
                    best.gapless = true;
                }
            }
            None => best.gapless = true,
        }
    }
    if !best.gap.is_finite() {
        best.gap = 0.0;
    }
    Ok(best)
}
