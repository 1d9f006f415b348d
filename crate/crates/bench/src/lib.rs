//! Shared fixtures for the criterion benches.

use cdqc::problems::{self, ProblemInstance};
use cdqc::{AgpExpansion, DenseCd, PauliOperator};

/// Seeded 6-qubit QUBO instance, the acceptance-suite workload.
pub fn qubo(n: usize) -> ProblemInstance {
    problems::build_random_qubo(n, 11).expect("valid size")
}

/// `H_ad(λ)` and `∂_λ H_ad` of a QUBO instance, a dense commutator pair.
pub fn operator_pair(n: usize, lambda: f64) -> (PauliOperator, PauliOperator) {
    let inst = qubo(n);
    let d = inst.h_final.sub(&inst.h_initial).expect("same size");
    (inst.h_ad(lambda), d)
}

pub fn dense_cd(n: usize, order: usize) -> DenseCd {
    let inst = qubo(n);
    let exp = AgpExpansion::new(&inst, order).expect("expansion builds");
    DenseCd::new(&inst, exp).expect("dense terms build")
}
