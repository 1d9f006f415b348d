//! Initial and final Hamiltonians for the five problem families.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CdqcError, Result};
use crate::linalg;
use crate::pauli::{self, PauliLetter, PauliOperator, PauliString};
use crate::C64;

/// Default relative tolerance separating degenerate levels.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MaxCut,
    RandomQubo,
    Factorization,
    #[serde(rename = "random_4local")]
    Random4Local,
    Heisenberg,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::MaxCut => "max_cut",
            Family::RandomQubo => "random_qubo",
            Family::Factorization => "factorization",
            Family::Random4Local => "random_4local",
            Family::Heisenberg => "heisenberg",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = CdqcError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "max_cut" => Family::MaxCut,
            "random_qubo" => Family::RandomQubo,
            "factorization" => Family::Factorization,
            "random_4local" => Family::Random4Local,
            "heisenberg" => Family::Heisenberg,
            other => return Err(CdqcError::Parse(format!("unknown family {other:?}"))),
        })
    }
}

/// Weighted undirected edge `(i, j, J_ij)`.
pub type Edge = (usize, usize, f64);

/// Family-specific parameters that generated an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemParams {
    MaxCut { edges: Vec<Edge> },
    /// Z-coupling coefficients keyed by strictly increasing index tuples
    /// (one index for α, two for β, three for γ, four for δ).
    ZCouplings { coeffs: Vec<(Vec<usize>, f64)> },
    Factorization { n: u64, n_x: usize, n_y: usize },
    Heisenberg { g: f64, j: f64, beta: f64 },
}

/// A paired `(H_I, H_F)` with the metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub family: Family,
    pub n_qubits: usize,
    pub seed: u64,
    pub params: ProblemParams,
    pub h_initial: PauliOperator,
    pub h_final: PauliOperator,
}

impl ProblemInstance {
    /// Wraps a pair of Hamiltonians after checking the instance invariants.
    pub fn new(
        family: Family,
        seed: u64,
        params: ProblemParams,
        h_initial: PauliOperator,
        h_final: PauliOperator,
    ) -> Result<Self> {
        let n_qubits = h_initial.n_qubits();
        if h_final.n_qubits() != n_qubits {
            return Err(CdqcError::Structure(format!(
                "H_I has {n_qubits} qubits, H_F has {}",
                h_final.n_qubits()
            )));
        }
        for (name, h) in [("H_I", &h_initial), ("H_F", &h_final)] {
            if !h.is_hermitian(1e-12) {
                return Err(CdqcError::Validation(format!("{name} is not hermitian")));
            }
        }
        Ok(Self {
            family,
            n_qubits,
            seed,
            params,
            h_initial,
            h_final,
        })
    }

    /// True when `H_F − c·H_I` is a multiple of the identity for some `c`,
    /// ignoring identity components. Such pairs have a vanishing gauge potential.
    pub fn is_trivial_pair(&self) -> bool {
        let strip = |h: &PauliOperator| {
            let id = PauliString::identity(h.n_qubits());
            PauliOperator::from_terms(
                h.n_qubits(),
                h.terms().iter().copied().filter(|(s, _)| *s != id),
            )
            .expect("same size")
        };
        let (a, b) = (strip(&self.h_initial), strip(&self.h_final));
        if a.is_zero() || b.is_zero() {
            return true;
        }
        let ab = a.trace_inner(&b).expect("same size");
        let aa = a.frobenius_sq();
        let c = ab / aa;
        let resid = PauliOperator::combine(&b, &a, C64::new(1.0, 0.0), -c).expect("same size");
        resid.frobenius_sq() <= 1e-24 * b.frobenius_sq()
    }

    /// `H_F − H_I`, the λ-derivative of the interpolation.
    pub fn delta_h(&self) -> PauliOperator {
        self.h_final.sub(&self.h_initial).expect("same size")
    }

    /// `H_ad(λ) = (1 − λ) H_I + λ H_F`.
    pub fn h_ad(&self, lambda: f64) -> PauliOperator {
        PauliOperator::combine(
            &self.h_initial,
            &self.h_final,
            C64::new(1.0 - lambda, 0.0),
            C64::new(lambda, 0.0),
        )
        .expect("same size")
    }

    /// Decodes a computational basis index into `(x, y)` for factorization
    /// instances.
    pub fn decode_factors(&self, basis_index: u64) -> Option<(u64, u64)> {
        match self.params {
            ProblemParams::Factorization { n_x, n_y, .. } => {
                Some(decode_factor_bits(basis_index, self.n_qubits, n_x, n_y))
            }
            _ => None,
        }
    }

    /// Canonical instance text; see [`ProblemInstance::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# cdqc instance v1\n");
        out.push_str(&format!("family={}\n", self.family));
        out.push_str(&format!("n_qubits={}\n", self.n_qubits));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str("[params]\n");
        match &self.params {
            ProblemParams::MaxCut { edges } => {
                for (i, j, w) in edges {
                    out.push_str(&format!("edge {i} {j} {w:?}\n"));
                }
            }
            ProblemParams::ZCouplings { coeffs } => {
                for (idx, v) in coeffs {
                    let idx: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                    out.push_str(&format!("coeff {} {v:?}\n", idx.join(",")));
                }
            }
            ProblemParams::Factorization { n, n_x, n_y } => {
                out.push_str(&format!("N {n}\nn_x {n_x}\nn_y {n_y}\n"));
            }
            ProblemParams::Heisenberg { g, j, beta } => {
                out.push_str(&format!("g {g:?}\nJ {j:?}\nbeta {beta:?}\n"));
            }
        }
        out.push_str("[h_initial]\n");
        out.push_str(&self.h_initial.to_text());
        out.push_str("[h_final]\n");
        out.push_str(&self.h_final.to_text());
        out.push_str("[end]\n");
        out
    }

    /// Parses instance text. Errors carry the 1-based line number.
    pub fn from_text(text: &str) -> Result<Self> {
        InstanceParser::default().parse(text)
    }
}

#[derive(Default)]
struct InstanceParser {
    family: Option<Family>,
    n_qubits: Option<usize>,
    seed: Option<u64>,
    edges: Vec<Edge>,
    coeffs: Vec<(Vec<usize>, f64)>,
    scalars: Vec<(String, String, usize)>,
    ops: [Vec<(PauliString, C64)>; 2],
    op_sizes: [Option<usize>; 2],
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Params,
    Op(usize),
    End,
}

impl InstanceParser {
    fn parse(mut self, text: &str) -> Result<ProblemInstance> {
        let mut section = Section::Header;
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            last_line = lineno;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CdqcError::ParseAt { line: lineno, msg };
            if section == Section::End {
                return Err(err("content after [end]".into()));
            }
            match line {
                "[params]" => {
                    section = Section::Params;
                    continue;
                }
                "[h_initial]" => {
                    section = Section::Op(0);
                    continue;
                }
                "[h_final]" => {
                    section = Section::Op(1);
                    continue;
                }
                "[end]" => {
                    section = Section::End;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Header => {
                    let (k, v) = line
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
                    match k.trim() {
                        "family" => self.family = Some(v.trim().parse().map_err(|e: CdqcError| err(e.to_string()))?),
                        "n_qubits" => {
                            self.n_qubits =
                                Some(v.trim().parse().map_err(|_| err(format!("bad n_qubits {v:?}")))?)
                        }
                        "seed" => {
                            self.seed = Some(v.trim().parse().map_err(|_| err(format!("bad seed {v:?}")))?)
                        }
                        other => return Err(err(format!("unknown header key {other:?}"))),
                    }
                }
                Section::Params => self.param_line(line, lineno)?,
                Section::Op(k) => {
                    if self.op_sizes[k].is_none() {
                        self.op_sizes[k] = Some(pauli::parse_header(line, lineno)?);
                    } else {
                        let n = self.op_sizes[k].unwrap();
                        self.ops[k].push(pauli::parse_term_line(line, n, lineno)?);
                    }
                }
                Section::End => unreachable!(),
            }
        }
        if section != Section::End {
            return Err(CdqcError::ParseAt {
                line: last_line,
                msg: "file ends before the [end] marker (truncated?)".into(),
            });
        }
        self.finish(last_line)
    }

    fn param_line(&mut self, line: &str, lineno: usize) -> Result<()> {
        let err = |msg: String| CdqcError::ParseAt { line: lineno, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["edge", i, j, w] => {
                let parse_idx = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad vertex {s:?}")));
                let w: f64 = w.parse().map_err(|_| err(format!("bad weight {w:?}")))?;
                self.edges.push((parse_idx(i)?, parse_idx(j)?, w));
            }
            ["coeff", idx, v] => {
                let idx = idx
                    .split(',')
                    .map(|s| s.parse::<usize>().map_err(|_| err(format!("bad index {s:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let v: f64 = v.parse().map_err(|_| err(format!("bad coefficient {v:?}")))?;
                self.coeffs.push((idx, v));
            }
            [key, value] => self.scalars.push((key.to_string(), value.to_string(), lineno)),
            _ => return Err(err(format!("unrecognized parameter line {line:?}"))),
        }
        Ok(())
    }

    fn scalar<T: FromStr>(&self, key: &str, last_line: usize) -> Result<T> {
        let (_, v, lineno) = self
            .scalars
            .iter()
            .find(|(k, _, _)| k == key)
            .ok_or_else(|| CdqcError::ParseAt {
                line: last_line,
                msg: format!("missing parameter {key}"),
            })?;
        v.parse().map_err(|_| CdqcError::ParseAt {
            line: *lineno,
            msg: format!("bad value {v:?} for {key}"),
        })
    }

    fn finish(self, last_line: usize) -> Result<ProblemInstance> {
        let missing = |what: &str| CdqcError::ParseAt {
            line: last_line,
            msg: format!("missing {what}"),
        };
        let family = self.family.ok_or_else(|| missing("family"))?;
        let n_qubits = self.n_qubits.ok_or_else(|| missing("n_qubits"))?;
        let seed = self.seed.ok_or_else(|| missing("seed"))?;
        let params = match family {
            Family::MaxCut => ProblemParams::MaxCut {
                edges: self.edges.clone(),
            },
            Family::RandomQubo | Family::Random4Local => ProblemParams::ZCouplings {
                coeffs: self.coeffs.clone(),
            },
            Family::Factorization => ProblemParams::Factorization {
                n: self.scalar("N", last_line)?,
                n_x: self.scalar("n_x", last_line)?,
                n_y: self.scalar("n_y", last_line)?,
            },
            Family::Heisenberg => ProblemParams::Heisenberg {
                g: self.scalar("g", last_line)?,
                j: self.scalar("J", last_line)?,
                beta: self.scalar("beta", last_line)?,
            },
        };
        let [ops_i, ops_f] = self.ops;
        let n_i = self.op_sizes[0].ok_or_else(|| missing("[h_initial] block"))?;
        let n_f = self.op_sizes[1].ok_or_else(|| missing("[h_final] block"))?;
        if n_i != n_qubits || n_f != n_qubits {
            return Err(missing("operators matching n_qubits"));
        }
        let h_initial = PauliOperator::from_terms(n_qubits, ops_i)?;
        let h_final = PauliOperator::from_terms(n_qubits, ops_f)?;
        ProblemInstance::new(family, seed, params, h_initial, h_final)
    }
}

/// Transverse-field mixer `−Σ_j σ^x_j`; ground state `|+>^⊗n`.
pub fn build_mixer(n: usize) -> PauliOperator {
    let terms = (0..n).map(|q| {
        (
            PauliString::from_sparse(n, &[(q, PauliLetter::X)]).expect("in range"),
            C64::new(-1.0, 0.0),
        )
    });
    PauliOperator::from_terms(n, terms).expect("consistent sizes")
}

/// `½ Σ_{(i,j)∈E} J_ij (σ^z_i σ^z_j − 1)`.
pub fn build_maxcut(n: usize, edges: &[Edge]) -> Result<PauliOperator> {
    let mut terms = Vec::with_capacity(2 * edges.len());
    for &(i, j, w) in edges {
        if i == j {
            return Err(CdqcError::Validation(format!("self-loop on vertex {i}")));
        }
        if i >= n || j >= n {
            return Err(CdqcError::Validation(format!(
                "edge ({i}, {j}) out of range for {n} vertices"
            )));
        }
        terms.push((pauli::z_string(n, &[i, j]), C64::new(0.5 * w, 0.0)));
        terms.push((PauliString::identity(n), C64::new(-0.5 * w, 0.0)));
    }
    PauliOperator::from_terms(n, terms)
}

/// The six-vertex, nine-edge 3-regular graph `K_{3,3}` (parts `{0,1,2}`, `{3,4,5}`).
pub fn k33_edges(weights: Option<&[f64]>) -> Vec<Edge> {
    let mut edges = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 3..6 {
            let w = weights.map_or(1.0, |ws| ws[edges.len()]);
            edges.push((a, b, w));
        }
    }
    edges
}

/// Nine seeded weights uniform in `[0, 1]` for the `K_{3,3}` instance.
pub fn seeded_unit_weights(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(0.0..=1.0)).collect()
}

pub fn maxcut_instance(n: usize, edges: Vec<Edge>, seed: u64) -> Result<ProblemInstance> {
    let h_final = build_maxcut(n, &edges)?;
    ProblemInstance::new(
        Family::MaxCut,
        seed,
        ProblemParams::MaxCut { edges },
        build_mixer(n),
        h_final,
    )
}

/// All strictly increasing index tuples of the given length, lexicographic.
pub fn index_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, len, &mut Vec::with_capacity(len), &mut out);
    out
}

/// `Σ c_S Π_{j∈S} σ^z_j` from explicit index-tuple coefficients.
pub fn z_coupling_operator(n: usize, coeffs: &[(Vec<usize>, f64)]) -> Result<PauliOperator> {
    for (idx, _) in coeffs {
        if idx.iter().any(|&q| q >= n) || idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CdqcError::Validation(format!(
                "index tuple {idx:?} must be strictly increasing and below {n}"
            )));
        }
    }
    PauliOperator::from_terms(
        n,
        coeffs
            .iter()
            .map(|(idx, v)| (pauli::z_string(n, idx), C64::new(*v, 0.0))),
    )
}

fn random_z_couplings(n: usize, max_body: usize, seed: u64) -> Vec<(Vec<usize>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = Vec::new();
    for body in 1..=max_body {
        for idx in index_tuples(n, body) {
            coeffs.push((idx, rng.random_range(-1.0..=1.0)));
        }
    }
    coeffs
}

/// `Σ α_j σ^z_j + Σ_{j<k} β_jk σ^z_j σ^z_k` with coefficients uniform in `[−1, 1]`.
pub fn build_random_qubo(n: usize, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(CdqcError::Validation("random QUBO needs n >= 2".into()));
    }
    z_coupling_instance(Family::RandomQubo, n, random_z_couplings(n, 2, seed), seed)
}

/// Random 1- to 4-body Z couplings uniform in `[−1, 1]`.
pub fn build_random_4local(n: usize, seed: u64) -> Result<ProblemInstance> {
    if n < 4 {
        return Err(CdqcError::Validation("random 4-local needs n >= 4".into()));
    }
    z_coupling_instance(Family::Random4Local, n, random_z_couplings(n, 4, seed), seed)
}

pub fn z_coupling_instance(
    family: Family,
    n: usize,
    coeffs: Vec<(Vec<usize>, f64)>,
    seed: u64,
) -> Result<ProblemInstance> {
    let h_final = z_coupling_operator(n, &coeffs)?;
    ProblemInstance::new(
        family,
        seed,
        ProblemParams::ZCouplings { coeffs },
        build_mixer(n),
        h_final,
    )
}

/// `x = 1 + Σ_{j=1}^{n_x} 2^j q_j` over qubits `0..n_x`, `y` likewise over
/// the next `n_y` qubits. `q = 1` means the qubit is in `|1>` (σ^z = −1).
pub fn decode_factor_bits(basis_index: u64, n_qubits: usize, n_x: usize, n_y: usize) -> (u64, u64) {
    let bit = |q: usize| (basis_index >> (n_qubits - 1 - q)) & 1;
    let x = 1 + (0..n_x).map(|j| bit(j) << (j + 1)).sum::<u64>();
    let y = 1 + (0..n_y).map(|k| bit(n_x + k) << (k + 1)).sum::<u64>();
    (x, y)
}

/// Largest odd value representable with `width` bits in the `1 + Σ 2^j q_j` form.
fn max_representable(width: usize) -> u64 {
    (1u64 << (width + 1)) - 1
}

/// Nontrivial odd factor pairs `x <= y`, `x >= 3`.
fn odd_factor_pairs(n: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut x = 3;
    while x * x <= n {
        if n.is_multiple_of(x) {
            out.push((x, n / x));
        }
        x += 2;
    }
    out
}

fn widths_admit(n: u64, n_x: usize, n_y: usize) -> bool {
    odd_factor_pairs(n).iter().any(|&(a, b)| {
        (a <= max_representable(n_x) && b <= max_representable(n_y))
            || (b <= max_representable(n_x) && a <= max_representable(n_y))
    })
}

/// Smallest `(n_x, n_y)`, `n_x <= n_y`, admitting a nontrivial factor pair
/// (minimal total width, then minimal `n_x`).
pub fn default_factor_widths(n: u64) -> Result<(usize, usize)> {
    validate_factor_target(n)?;
    for total in 2..=126 {
        for n_x in 1..=total / 2 {
            let n_y = total - n_x;
            if n_y <= 62 && widths_admit(n, n_x, n_y) {
                return Ok((n_x, n_y));
            }
        }
    }
    Err(CdqcError::Validation(format!("no factor widths found for {n}")))
}

fn validate_factor_target(n: u64) -> Result<()> {
    if n < 9 || n.is_multiple_of(2) {
        return Err(CdqcError::Validation(format!(
            "factorization target must be odd and >= 9, got {n}"
        )));
    }
    if odd_factor_pairs(n).is_empty() {
        return Err(CdqcError::Validation(format!("{n} has no nontrivial odd factor pair")));
    }
    Ok(())
}

/// `(x̂ ŷ − N)^2` expanded into Z-diagonal Pauli terms with `Q_j = (1 − σ^z_j)/2`.
pub fn build_factorization(n: u64, n_x: usize, n_y: usize) -> Result<ProblemInstance> {
    validate_factor_target(n)?;
    if n_x == 0 || n_y == 0 {
        return Err(CdqcError::Validation("factor widths must be >= 1".into()));
    }
    if !widths_admit(n, n_x, n_y) {
        let (sx, sy) = default_factor_widths(n)?;
        return Err(CdqcError::Validation(format!(
            "no factor pair of {n} is representable with n_x={n_x}, n_y={n_y}; \
             smallest sufficient widths are n_x={sx}, n_y={sy}"
        )));
    }
    let nq = n_x + n_y;
    let one = PauliOperator::identity(nq);
    let register = |offset: usize, width: usize| -> Result<PauliOperator> {
        let mut acc = one.clone();
        for j in 0..width {
            let weight = (1u64 << (j + 1)) as f64;
            // weight · Q = weight/2 · (1 − Z)
            let q = PauliOperator::from_terms(
                nq,
                [
                    (PauliString::identity(nq), C64::new(0.5 * weight, 0.0)),
                    (pauli::z_string(nq, &[offset + j]), C64::new(-0.5 * weight, 0.0)),
                ],
            )?;
            acc = acc.add(&q)?;
        }
        Ok(acc)
    };
    let x = register(0, n_x)?;
    let y = register(n_x, n_y)?;
    let p = PauliOperator::combine(&x.mul(&y)?, &one, C64::new(1.0, 0.0), C64::new(-(n as f64), 0.0))?;
    let h_final = p.mul(&p)?;
    ProblemInstance::new(
        Family::Factorization,
        0,
        ProblemParams::Factorization { n, n_x, n_y },
        build_mixer(nq),
        h_final,
    )
}

/// `g Σσ^z + J Σ(σ^xσ^x + σ^yσ^y) + β Σ σ^zσ^z` on a periodic chain.
pub fn build_heisenberg_operator(n: usize, g: f64, j: f64, beta: f64) -> Result<PauliOperator> {
    if n < 3 {
        return Err(CdqcError::Validation("Heisenberg ring needs n >= 3".into()));
    }
    let mut terms = Vec::with_capacity(4 * n);
    for site in 0..n {
        let next = (site + 1) % n;
        terms.push((pauli::z_string(n, &[site]), C64::new(g, 0.0)));
        for letter in [PauliLetter::X, PauliLetter::Y] {
            let s = PauliString::from_sparse(n, &[(site, letter), (next, letter)])?;
            terms.push((s, C64::new(j, 0.0)));
        }
        terms.push((pauli::z_string(n, &[site, next]), C64::new(beta, 0.0)));
    }
    PauliOperator::from_terms(n, terms)
}

pub fn build_heisenberg(n: usize, g: f64, j: f64, beta: f64, seed: u64) -> Result<ProblemInstance> {
    let h_final = build_heisenberg_operator(n, g, j, beta)?;
    ProblemInstance::new(
        Family::Heisenberg,
        seed,
        ProblemParams::Heisenberg { g, j, beta },
        build_mixer(n),
        h_final,
    )
}

/// Lowest eigenvalue and an orthonormal basis of its (near-)degenerate eigenspace.
#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub energy: f64,
    pub states: Vec<DVector<C64>>,
}

impl GroundSpace {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// `Σ_i |<g_i|ψ>|²`.
    pub fn population(&self, psi: &DVector<C64>) -> f64 {
        self.states.iter().map(|g| g.dotc(psi).norm_sqr()).sum()
    }
}

/// Eigenvectors with eigenvalue `<= E₀ + tol · max(1, |E₀|)`.
pub fn ground_space(h: &PauliOperator, degeneracy_tol: f64) -> Result<GroundSpace> {
    let eig = linalg::eigh(&h.to_dense()?);
    let e0 = eig.values[0];
    let cutoff = e0 + degeneracy_tol * e0.abs().max(1.0);
    let states = eig
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v <= cutoff)
        .map(|(k, _)| eig.vector(k))
        .collect();
    Ok(GroundSpace { energy: e0, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_min(h: &PauliOperator) -> (f64, Vec<u64>) {
        let dim = 1u64 << h.n_qubits();
        let vals: Vec<f64> = (0..dim).map(|b| h.diagonal_value(b).re).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let argmins = (0..dim).filter(|&b| (vals[b as usize] - min).abs() < 1e-9).collect();
        (min, argmins)
    }

    fn max_cut_size(n: usize, edges: &[Edge]) -> f64 {
        (0..1u64 << n)
            .map(|b| {
                edges
                    .iter()
                    .filter(|(i, j, _)| ((b >> i) & 1) != ((b >> j) & 1))
                    .map(|e| e.2)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn mixer_examples() {
        let m1 = build_mixer(1);
        assert_eq!(m1.to_text(), "n_qubits=1\nX -1.0 0.0\n");
        let gs = ground_space(&build_mixer(2), DEFAULT_DEGENERACY_TOL).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-12);
        assert_eq!(gs.dim(), 1);
        let gs6 = ground_space(&build_mixer(6), DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(gs6.dim(), 1);
        for a in gs6.states[0].iter() {
            assert!((a.norm() - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn maxcut_examples() {
        let h = build_maxcut(2, &[(0, 1, 1.0)]).unwrap();
        let d = h.to_dense().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| d[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, -1.0, -1.0, 0.0]);

        let edges = k33_edges(None);
        assert_eq!(edges.len(), 9);
        for v in 0..6 {
            assert_eq!(edges.iter().filter(|(a, b, _)| *a == v || *b == v).count(), 3);
        }
        let h = build_maxcut(6, &edges).unwrap();
        let (min, _) = brute_force_min(&h);
        assert_eq!(min, -max_cut_size(6, &edges));
        assert_eq!(min, -9.0);

        assert!(build_maxcut(3, &[]).unwrap().is_zero());
        assert!(matches!(
            build_maxcut(3, &[(1, 1, 1.0)]),
            Err(CdqcError::Validation(_))
        ));
    }

    #[test]
    fn weighted_maxcut_matches_brute_force() {
        let edges = k33_edges(Some(&seeded_unit_weights(9, 5)));
        let h = build_maxcut(6, &edges).unwrap();
        let (min, _) = brute_force_min(&h);
        assert!((min + max_cut_size(6, &edges)).abs() < 1e-12);
    }

    #[test]
    fn qubo_examples() {
        let a = build_random_qubo(6, 11).unwrap();
        let b = build_random_qubo(6, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.h_final, build_random_qubo(6, 12).unwrap().h_final);
        assert_eq!(a.h_final.len(), 6 + 15);
        assert!(a.h_final.is_diagonal());
        for (_, c) in a.h_final.terms() {
            assert!(c.re.abs() <= 1.0 && c.im == 0.0);
        }

        let zero = z_coupling_operator(2, &[(vec![0], 0.0), (vec![1], 0.0), (vec![0, 1], 0.0)]).unwrap();
        assert!(zero.is_zero());

        let (min, _) = brute_force_min(&a.h_final);
        let gs = ground_space(&a.h_final, DEFAULT_DEGENERACY_TOL).unwrap();
        assert!((gs.energy - min).abs() < 1e-10);
        assert!(build_random_qubo(1, 0).is_err());
    }

    #[test]
    fn four_local_examples() {
        let inst = build_random_4local(4, 3).unwrap();
        assert_eq!(inst.h_final.len(), 15);
        assert!(inst.h_final.is_diagonal());
        let (min, _) = brute_force_min(&inst.h_final);
        let gs = ground_space(&inst.h_final, DEFAULT_DEGENERACY_TOL).unwrap();
        assert!((gs.energy - min).abs() < 1e-10);

        let ProblemParams::ZCouplings { coeffs } = &inst.params else { panic!() };
        let reduced: Vec<_> = coeffs.iter().filter(|(idx, _)| idx.len() <= 2).cloned().collect();
        let h = z_coupling_operator(4, &reduced).unwrap();
        assert!(h.terms().iter().all(|(s, _)| s.weight() <= 2));
        assert_eq!(h.len(), 10);
        assert!(build_random_4local(3, 0).is_err());
    }

    #[test]
    fn factorization_143() {
        assert_eq!(default_factor_widths(143).unwrap(), (3, 3));
        let inst = build_factorization(143, 3, 3).unwrap();
        assert_eq!(inst.n_qubits, 6);
        assert!(inst.h_final.is_diagonal());
        let (min, argmins) = brute_force_min(&inst.h_final);
        assert!(min.abs() < 1e-9);
        let mut decoded: Vec<_> = argmins.iter().map(|&b| inst.decode_factors(b).unwrap()).collect();
        decoded.sort();
        assert_eq!(decoded, vec![(11, 13), (13, 11)]);
        let gs = ground_space(&inst.h_final, DEFAULT_DEGENERACY_TOL).unwrap();
        assert!(gs.energy.abs() < 1e-9);
        assert_eq!(gs.dim(), 2);
        let dim = 1u64 << 6;
        for b in 0..dim {
            assert!(inst.h_final.diagonal_value(b).re >= -1e-9);
        }
    }

    #[test]
    fn factorization_small_targets() {
        let nine = build_factorization(9, 1, 1).unwrap();
        let (min, argmins) = brute_force_min(&nine.h_final);
        assert!(min.abs() < 1e-12);
        assert_eq!(argmins.len(), 1);
        assert_eq!(nine.decode_factors(argmins[0]), Some((3, 3)));

        let fifteen = build_factorization(15, 1, 2).unwrap();
        let (min, argmins) = brute_force_min(&fifteen.h_final);
        assert!(min.abs() < 1e-12);
        let decoded: Vec<_> = argmins.iter().map(|&b| fifteen.decode_factors(b).unwrap()).collect();
        assert_eq!(decoded, vec![(3, 5)]);
    }

    #[test]
    fn factorization_rejects_bad_widths() {
        let err = build_factorization(143, 1, 1).unwrap_err().to_string();
        assert!(err.contains("n_x=3, n_y=3"), "{err}");
        assert!(build_factorization(14, 2, 2).is_err());
        assert!(build_factorization(13, 2, 2).is_err());
    }

    #[test]
    fn heisenberg_structure() {
        let h = build_heisenberg_operator(5, 1.0, 0.0, 0.0).unwrap();
        let gs = ground_space(&h, DEFAULT_DEGENERACY_TOL).unwrap();
        assert!((gs.energy + 5.0).abs() < 1e-12);
        assert_eq!(gs.dim(), 1);
        // all spins down: basis index with every bit set
        assert!((gs.states[0][31].norm() - 1.0).abs() < 1e-12);
        let d = h.to_dense().unwrap();
        for b in 0..32u32 {
            let expected = 5.0 - 2.0 * b.count_ones() as f64;
            assert!((d[(b as usize, b as usize)].re - expected).abs() < 1e-12);
        }

        let h = build_heisenberg_operator(6, 1.0, 0.2, 0.5).unwrap();
        assert!(!h.is_diagonal());
        assert!(h.is_hermitian(0.0));
        let magnetization = PauliOperator::from_terms(6, (0..6).map(|q| (pauli::z_string(6, &[q]), C64::new(1.0, 0.0)))).unwrap();
        assert!(magnetization.commutator(&h).unwrap().is_zero());
        assert!(build_heisenberg_operator(2, 1.0, 0.2, 0.2).is_err());
    }

    /// Number of Schmidt coefficients above `1e-8` across the half-chain cut.
    fn half_chain_schmidt_rank(psi: &DVector<C64>, n: usize) -> usize {
        let half = 1usize << (n / 2);
        let rest = 1usize << (n - n / 2);
        let m = nalgebra::DMatrix::from_fn(half, rest, |a, b| psi[a * rest + b]);
        m.singular_values().iter().filter(|&&s| s > 1e-8).count()
    }

    #[test]
    fn heisenberg_ground_state_entanglement() {
        let entangled = ground_space(&build_heisenberg_operator(6, 1.0, 0.2, 0.8).unwrap(), DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(entangled.dim(), 1);
        assert!(half_chain_schmidt_rank(&entangled.states[0], 6) > 1);
        // weak coupling keeps the fully polarized product state
        let product = ground_space(&build_heisenberg_operator(6, 1.0, 0.2, 0.2).unwrap(), DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!(product.dim(), 1);
        assert_eq!(half_chain_schmidt_rank(&product.states[0], 6), 1);
    }

    #[test]
    fn instance_text_round_trip() {
        let instances = vec![
            build_random_qubo(4, 9).unwrap(),
            build_random_4local(4, 2).unwrap(),
            build_factorization(15, 1, 2).unwrap(),
            build_heisenberg(4, 1.0, 0.2, 0.3, 7).unwrap(),
            maxcut_instance(6, k33_edges(None), 0).unwrap(),
        ];
        for inst in instances {
            let text = inst.to_text();
            let back = ProblemInstance::from_text(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn truncated_instance_names_line() {
        let text = build_random_qubo(3, 1).unwrap().to_text();
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        match ProblemInstance::from_text(&cut) {
            Err(CdqcError::ParseAt { line, .. }) => assert_eq!(line, 8),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad = text.replace("seed=1", "seed=abc");
        assert!(matches!(
            ProblemInstance::from_text(&bad),
            Err(CdqcError::ParseAt { line: 4, .. })
        ));
    }

    #[test]
    fn trivial_pairs_detected() {
        let mixer = build_mixer(2);
        let shifted = mixer.add(&PauliOperator::identity(2)).unwrap().scale(C64::new(2.0, 0.0));
        let inst = ProblemInstance::new(Family::RandomQubo, 0, ProblemParams::ZCouplings { coeffs: vec![] }, mixer, shifted).unwrap();
        assert!(inst.is_trivial_pair());
        assert!(!build_random_qubo(3, 0).unwrap().is_trivial_pair());
    }
}
