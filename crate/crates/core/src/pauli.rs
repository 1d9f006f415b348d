//! Weighted sums of n-qubit Pauli strings.
//!
//! A [`PauliString`] is stored in symplectic form as a pair of bit masks
//! `(x, z)` so that the single-qubit letter on qubit `q` is
//!
//! | x | z | letter |
//! |---|---|--------|
//! | 0 | 0 | I      |
//! | 1 | 0 | X      |
//! | 1 | 1 | Y      |
//! | 0 | 1 | Z      |
//!
//! Qubit `q` lives on bit `n - 1 - q` of both masks, which is also the bit
//! it occupies in a computational-basis index. Qubit 0 is therefore the
//! leftmost letter of the textual form and the most significant factor of
//! the Kronecker product, so masks act directly on basis indices.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{CdqcError, Result};
use crate::C64;

/// Coefficients with magnitude below this are dropped after every merge.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Largest qubit count a [`PauliString`] can represent.
pub const MAX_QUBITS: usize = 64;

/// Default cap on dense realizations (`2^12 = 4096` dimensional matrices).
pub const DEFAULT_DENSE_CAP: usize = 12;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::I => (false, false),
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliLetter::I,
            (true, false) => PauliLetter::X,
            (true, true) => PauliLetter::Y,
            (false, true) => PauliLetter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(PauliLetter::I),
            'X' => Some(PauliLetter::X),
            'Y' => Some(PauliLetter::Y),
            'Z' => Some(PauliLetter::Z),
            _ => None,
        }
    }
}

/// Tensor product of single-qubit Pauli matrices on `n_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: u32,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self {
            n_qubits: n_qubits as u32,
            x: 0,
            z: 0,
        }
    }

    /// Builds a string from `(qubit, letter)` pairs; unlisted qubits are `I`.
    pub fn from_sparse(n_qubits: usize, ops: &[(usize, PauliLetter)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits);
        for &(q, letter) in ops {
            if q >= n_qubits {
                return Err(CdqcError::Structure(format!(
                    "qubit index {q} out of range for {n_qubits} qubits"
                )));
            }
            s.set(q, letter);
        }
        Ok(s)
    }

    pub fn from_letters(letters: &[PauliLetter]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            s.set(q, l);
        }
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    #[inline]
    fn bit(&self, q: usize) -> u64 {
        1u64 << (self.n_qubits as usize - 1 - q)
    }

    fn set(&mut self, q: usize, letter: PauliLetter) {
        let b = self.bit(q);
        let (x, z) = letter.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn letter(&self, q: usize) -> PauliLetter {
        let b = self.bit(q);
        PauliLetter::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn letters(&self) -> impl Iterator<Item = PauliLetter> + '_ {
        (0..self.n_qubits()).map(move |q| self.letter(q))
    }

    /// Bit-flip mask in basis-index convention.
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    /// Phase mask in basis-index convention.
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True when the string contains only `I` and `Z` letters.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Whether `self` and `other` commute (even symplectic product).
    #[inline]
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Product without the length check; phase returned as a power of `i`.
    #[inline]
    fn mul_unchecked(&self, other: &PauliString) -> (u32, PauliString) {
        let (ax, az, bx, bz) = (self.x, self.z, other.x, other.z);
        let a_x = ax & !az;
        let a_y = ax & az;
        let a_z = !ax & az;
        let b_x = bx & !bz;
        let b_y = bx & bz;
        let b_z = !bx & bz;
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders pick up -i.
        let plus = ((a_x & b_y) | (a_y & b_z) | (a_z & b_x)).count_ones();
        let minus = ((a_y & b_x) | (a_z & b_y) | (a_x & b_z)).count_ones();
        let power = (plus + 4 * 64 - minus) % 4;
        (
            power,
            PauliString {
                n_qubits: self.n_qubits,
                x: ax ^ bx,
                z: az ^ bz,
            },
        )
    }

    /// `self · other = phase · c` with `phase ∈ {1, -1, i, -i}`.
    pub fn mul(&self, other: &PauliString) -> Result<(C64, PauliString)> {
        if self.n_qubits != other.n_qubits {
            return Err(CdqcError::Structure(format!(
                "Pauli string length mismatch: {} vs {}",
                self.n_qubits, other.n_qubits
            )));
        }
        let (power, c) = self.mul_unchecked(other);
        Ok((i_pow(power), c))
    }

    /// Ordering key: base-4 digits `I<X<Y<Z` with qubit 0 most significant.
    fn sort_key(&self) -> u128 {
        let mut key = 0u128;
        for q in 0..self.n_qubits() {
            key = key * 4 + self.letter(q) as u128;
        }
        key
    }

    /// Amplitude map `P|b> = phase(b) |b ^ x>`; returns `(target, phase)`.
    #[inline]
    pub fn act_on_basis(&self, b: u64) -> (u64, C64) {
        // P = i^{|x & z|} X^x Z^z
        let power = ((self.x & self.z).count_ones() + 2 * (b & self.z).count_ones()) % 4;
        (b ^ self.x, i_pow(power))
    }
}

#[inline]
fn i_pow(power: u32) -> C64 {
    match power % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n_qubits
            .cmp(&other.n_qubits)
            .then_with(|| self.sort_key().cmp(&other.sort_key()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.letters() {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = CdqcError;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| {
                PauliLetter::from_char(c)
                    .ok_or_else(|| CdqcError::Parse(format!("invalid Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() || letters.len() > MAX_QUBITS {
            return Err(CdqcError::Parse(format!("bad Pauli string length in {s:?}")));
        }
        Ok(Self::from_letters(&letters))
    }
}

/// Weighted sum of Pauli strings in canonical form: terms sorted
/// lexicographically, one entry per string, no coefficient below
/// [`PRUNE_THRESHOLD`].
#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    n_qubits: usize,
    terms: Vec<(PauliString, C64)>,
}

impl PauliOperator {
    pub fn zero(n_qubits: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n_qubits));
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::from_terms(n_qubits, [(PauliString::identity(n_qubits), C64::new(1.0, 0.0))])
            .expect("identity string has matching length")
    }

    pub fn single(string: PauliString, coeff: C64) -> Self {
        let n = string.n_qubits();
        Self::from_terms(n, [(string, coeff)]).expect("lengths agree")
    }

    /// Merges duplicate strings and prunes small coefficients.
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (PauliString, C64)>,
    ) -> Result<Self> {
        let mut acc: HashMap<PauliString, C64> = HashMap::new();
        for (s, c) in terms {
            if s.n_qubits() != n_qubits {
                return Err(CdqcError::Structure(format!(
                    "term {s} has {} qubits, operator has {n_qubits}",
                    s.n_qubits()
                )));
            }
            *acc.entry(s).or_default() += c;
        }
        Ok(Self::from_map(n_qubits, acc))
    }

    fn from_map(n_qubits: usize, acc: HashMap<PauliString, C64>) -> Self {
        let mut terms: Vec<_> = acc
            .into_iter()
            .filter(|(_, c)| c.norm() >= PRUNE_THRESHOLD)
            .collect();
        terms.sort_unstable_by_key(|a| a.0);
        Self { n_qubits, terms }
    }

    /// Parses `(letters, real coefficient)` pairs, e.g. `[("XZ", 0.5)]`.
    pub fn from_labels(labels: &[(&str, f64)]) -> Result<Self> {
        let first = labels
            .first()
            .ok_or_else(|| CdqcError::Structure("no terms given".into()))?;
        let n = first.0.len();
        let terms = labels
            .iter()
            .map(|(s, c)| Ok((s.parse::<PauliString>()?, C64::new(*c, 0.0))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(PauliString, C64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, s: &PauliString) -> C64 {
        self.terms
            .binary_search_by(|(t, _)| t.cmp(s))
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    /// All coefficients real to within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.iter().all(|(_, c)| c.im.abs() <= tol)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(s, _)| s.is_diagonal())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }

    fn check_same_size(&self, other: &PauliOperator) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(CdqcError::Structure(format!(
                "qubit-count mismatch: {} vs {}",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    pub fn scale(&self, s: C64) -> PauliOperator {
        let terms = self.terms.iter().map(|&(p, c)| (p, c * s));
        let mut out = Self {
            n_qubits: self.n_qubits,
            terms: terms.collect(),
        };
        out.terms.retain(|(_, c)| c.norm() >= PRUNE_THRESHOLD);
        out
    }

    /// `scale_a · a + scale_b · b`, merged and pruned.
    pub fn combine(a: &PauliOperator, b: &PauliOperator, scale_a: C64, scale_b: C64) -> Result<Self> {
        a.check_same_size(b)?;
        let mut out = Vec::with_capacity(a.terms.len() + b.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < a.terms.len() || j < b.terms.len() {
            let next = match (a.terms.get(i), b.terms.get(j)) {
                (Some(ta), Some(tb)) => match ta.0.cmp(&tb.0) {
                    Ordering::Less => {
                        i += 1;
                        (ta.0, ta.1 * scale_a)
                    }
                    Ordering::Greater => {
                        j += 1;
                        (tb.0, tb.1 * scale_b)
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        (ta.0, ta.1 * scale_a + tb.1 * scale_b)
                    }
                },
                (Some(ta), None) => {
                    i += 1;
                    (ta.0, ta.1 * scale_a)
                }
                (None, Some(tb)) => {
                    j += 1;
                    (tb.0, tb.1 * scale_b)
                }
                (None, None) => unreachable!(),
            };
            if next.1.norm() >= PRUNE_THRESHOLD {
                out.push(next);
            }
        }
        Ok(Self {
            n_qubits: a.n_qubits,
            terms: out,
        })
    }

    pub fn add(&self, other: &PauliOperator) -> Result<Self> {
        Self::combine(self, other, C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &PauliOperator) -> Result<Self> {
        Self::combine(self, other, C64::new(1.0, 0.0), C64::new(-1.0, 0.0))
    }

    /// Linear combination `Σ w_k · ops_k`.
    pub fn linear_combination<'a>(
        n_qubits: usize,
        parts: impl IntoIterator<Item = (C64, &'a PauliOperator)>,
    ) -> Result<Self> {
        let mut acc: HashMap<PauliString, C64> = HashMap::new();
        for (w, op) in parts {
            if op.n_qubits != n_qubits {
                return Err(CdqcError::Structure(format!(
                    "qubit-count mismatch: {} vs {n_qubits}",
                    op.n_qubits
                )));
            }
            if w == C64::default() {
                continue;
            }
            for &(s, c) in &op.terms {
                *acc.entry(s).or_default() += w * c;
            }
        }
        Ok(Self::from_map(n_qubits, acc))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliOperator) -> Result<Self> {
        self.check_same_size(other)?;
        let mut acc: HashMap<PauliString, C64> =
            HashMap::with_capacity(self.terms.len() * other.terms.len());
        for &(sa, ca) in &self.terms {
            for &(sb, cb) in &other.terms {
                let (power, s) = sa.mul_unchecked(&sb);
                *acc.entry(s).or_default() += i_pow(power) * ca * cb;
            }
        }
        Ok(Self::from_map(self.n_qubits, acc))
    }

    /// `[self, other] = self·other − other·self`. Only anticommuting string
    /// pairs contribute, each as `2 · phase · (a·b)`.
    pub fn commutator(&self, other: &PauliOperator) -> Result<Self> {
        self.check_same_size(other)?;
        let mut acc: HashMap<PauliString, C64> = HashMap::new();
        for &(sa, ca) in &self.terms {
            for &(sb, cb) in &other.terms {
                if sa.commutes_with(&sb) {
                    continue;
                }
                let (power, s) = sa.mul_unchecked(&sb);
                *acc.entry(s).or_default() += 2.0 * i_pow(power) * ca * cb;
            }
        }
        Ok(Self::from_map(self.n_qubits, acc))
    }

    /// Hermitian adjoint (Pauli strings are hermitian, so conjugate coefficients).
    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|&(s, c)| (s, c.conj())).collect(),
        }
    }

    /// `Tr(A†A) = 2^n Σ |c|²`.
    pub fn frobenius_sq(&self) -> f64 {
        let sum: f64 = self.terms.iter().map(|(_, c)| c.norm_sqr()).sum();
        sum * (self.n_qubits as f64).exp2()
    }

    /// Trace inner product `Tr(A†B)`.
    pub fn trace_inner(&self, other: &PauliOperator) -> Result<C64> {
        self.check_same_size(other)?;
        let (mut i, mut j) = (0, 0);
        let mut acc = C64::default();
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += self.terms[i].1.conj() * other.terms[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(acc * (self.n_qubits as f64).exp2())
    }

    /// Dense matrix `Σ c · (⊗ σ)` of dimension `2^n`.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DMatrix<C64>> {
        check_dense_cap(self.n_qubits, cap)?;
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        self.add_to_dense(&mut m, C64::new(1.0, 0.0));
        Ok(m)
    }

    /// `m += w · dense(self)`; `m` must already have dimension `2^n`.
    pub fn add_to_dense(&self, m: &mut DMatrix<C64>, w: C64) {
        let dim = 1u64 << self.n_qubits;
        debug_assert_eq!(m.nrows() as u64, dim);
        for &(s, c) in &self.terms {
            let wc = w * c;
            for col in 0..dim {
                let (row, phase) = s.act_on_basis(col);
                m[(row as usize, col as usize)] += wc * phase;
            }
        }
    }

    /// Matrix-free action on a state vector.
    pub fn apply(&self, psi: &DVector<C64>) -> Result<DVector<C64>> {
        let dim = 1usize << self.n_qubits;
        if psi.len() != dim {
            return Err(CdqcError::Structure(format!(
                "state has dimension {}, operator needs {dim}",
                psi.len()
            )));
        }
        let mut out = DVector::<C64>::zeros(dim);
        for &(s, c) in &self.terms {
            for b in 0..dim as u64 {
                let (row, phase) = s.act_on_basis(b);
                out[row as usize] += c * phase * psi[b as usize];
            }
        }
        Ok(out)
    }

    /// Diagonal entry `<b|H|b>`; only `I`/`Z` strings contribute.
    pub fn diagonal_value(&self, b: u64) -> C64 {
        self.terms
            .iter()
            .filter(|(s, _)| s.is_diagonal())
            .map(|&(s, c)| {
                if (b & s.z_mask()).count_ones().is_multiple_of(2) {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }

    /// `i · self`, handy when turning antihermitian commutators hermitian.
    pub fn times_i(&self) -> Self {
        self.scale(I)
    }

    /// Canonical text form: `n_qubits=<n>` header, then `<letters> <re> <im>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("n_qubits={}\n", self.n_qubits);
        for (s, c) in &self.terms {
            out.push_str(&format!("{s} {:?} {:?}\n", c.re, c.im));
        }
        out
    }

    /// Parses [`PauliOperator::to_text`] output.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let n = match lines.next() {
            Some((i, l)) => parse_header(l.trim(), i + 1)?,
            None => return Err(CdqcError::Parse("empty operator text".into())),
        };
        let mut terms = Vec::new();
        for (i, line) in lines {
            terms.push(parse_term_line(line, n, i + 1)?);
        }
        Self::from_terms(n, terms)
    }
}

pub(crate) fn parse_header(line: &str, lineno: usize) -> Result<usize> {
    let n = line
        .strip_prefix("n_qubits=")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| CdqcError::ParseAt {
            line: lineno,
            msg: format!("expected `n_qubits=<n>`, found {line:?}"),
        })?;
    if n == 0 || n > MAX_QUBITS {
        return Err(CdqcError::ParseAt {
            line: lineno,
            msg: format!("qubit count {n} out of range"),
        });
    }
    Ok(n)
}

pub(crate) fn parse_term_line(line: &str, n: usize, lineno: usize) -> Result<(PauliString, C64)> {
    let err = |msg: String| CdqcError::ParseAt { line: lineno, msg };
    let mut it = line.split_whitespace();
    let (Some(letters), Some(re), Some(im), None) = (it.next(), it.next(), it.next(), it.next())
    else {
        return Err(err(format!("expected `<letters> <re> <im>`, found {line:?}")));
    };
    let s: PauliString = letters.parse().map_err(|e: CdqcError| err(e.to_string()))?;
    if s.n_qubits() != n {
        return Err(err(format!("string {letters} does not have {n} letters")));
    }
    let re: f64 = re.parse().map_err(|_| err(format!("bad real part {re:?}")))?;
    let im: f64 = im.parse().map_err(|_| err(format!("bad imaginary part {im:?}")))?;
    Ok((s, C64::new(re, im)))
}

pub fn check_dense_cap(n_qubits: usize, cap: usize) -> Result<()> {
    if n_qubits > cap {
        return Err(CdqcError::Resource(format!(
            "{n_qubits} qubits exceeds the dense cap of {cap}"
        )));
    }
    Ok(())
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `σ^letter` on qubit `q` of an `n`-qubit register.
pub fn single_site(n: usize, q: usize, letter: PauliLetter, coeff: f64) -> PauliOperator {
    let s = PauliString::from_sparse(n, &[(q, letter)]).expect("qubit in range");
    PauliOperator::single(s, C64::new(coeff, 0.0))
}

/// Product of `Z` letters on the listed qubits.
pub fn z_string(n: usize, qubits: &[usize]) -> PauliString {
    let ops: Vec<_> = qubits.iter().map(|&q| (q, PauliLetter::Z)).collect();
    PauliString::from_sparse(n, &ops).expect("qubit in range")
}
