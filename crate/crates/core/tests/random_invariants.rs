//! Randomized invariants of the linear-algebra substrate and the
//! ensemble/measurement duality, exercised through proptest with seeded
//! instance generators so every failure is reproducible from the seed.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use povm_squeeze_core::bounds::{
    dual_triple, holevo_check, joint_distribution, mutual_information, thm3_lower_bound, Triple,
};
use povm_squeeze_core::linalg::{
    eig_hermitian, op_sqrt, partial_trace, random, re, tensor_product, trace_re,
};
use povm_squeeze_core::quantum::{
    canonical_ensemble, ensemble_average, entropy_defect, pretty_good_measurement,
    spectrum_conjugacy_check, DensityMatrix, Ensemble, Povm,
};
use povm_squeeze_core::CMatrix;

fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Random Hermitian matrix with entries of order one.
fn hermitian(d: usize, rng: &mut ChaCha12Rng) -> CMatrix {
    let g = random::psd(d, rng);
    // Shift to mix signs so the spectrum is not one-sided.
    let shift = trace_re(&g) / d as f64;
    g - CMatrix::identity(d, d) * re(shift)
}

fn random_ensemble(seed: u64, d: usize, n: usize) -> Ensemble {
    let mut rng = seeded(seed);
    let mut probs = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        probs.push(rand::Rng::gen_range(&mut rng, 0.1..1.0));
        states.push(DensityMatrix::new(random::density(d, &mut rng)).unwrap());
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ensemble::new(probs, states).unwrap()
}

fn random_triple(seed: u64, d: usize, n: usize, m: usize) -> Triple {
    let mut rng = seeded(seed);
    let ensemble = random_ensemble(seed.wrapping_add(1), d, n);
    let povm = Povm::new(random::povm(d, m, &mut rng)).unwrap();
    Triple::new(ensemble, povm).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    /// Eigendecomposition invariants: reconstruction, orthonormality,
    /// descending eigenvalue order.
    #[test]
    fn eig_reconstructs_random_hermitian(seed in 0u64..1 << 48, d in 2usize..=5) {
        let mut rng = seeded(seed);
        let h = hermitian(d, &mut rng);
        let spec = eig_hermitian(&h).unwrap();
        let gap = max_abs(&(spec.reconstruct() - &h));
        prop_assert!(gap < 1e-10, "reconstruction gap {gap:.3e}");
        let v = &spec.eigenvectors;
        let ortho = max_abs(&(v.adjoint() * v - CMatrix::identity(d, d)));
        prop_assert!(ortho < 1e-10, "orthonormality gap {ortho:.3e}");
        for pair in spec.eigenvalues.windows(2) {
            prop_assert!(pair[0] >= pair[1], "eigenvalues not descending: {pair:?}");
        }
    }

    /// The eigenbasis convention is deterministic: decomposing twice yields
    /// bitwise-identical eigenvectors.
    #[test]
    fn eig_basis_is_deterministic(seed in 0u64..1 << 48, d in 2usize..=4) {
        let mut rng = seeded(seed);
        let h = hermitian(d, &mut rng);
        let s1 = eig_hermitian(&h).unwrap();
        let s2 = eig_hermitian(&h).unwrap();
        for (a, b) in s1.eigenvectors.iter().zip(s2.eigenvectors.iter()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    /// √X·√X returns X for PSD X.
    #[test]
    fn operator_sqrt_squares_back(seed in 0u64..1 << 48, d in 2usize..=5) {
        let mut rng = seeded(seed);
        let x = random::psd(d, &mut rng);
        let s = op_sqrt(&x).unwrap();
        let gap = max_abs(&(&s * &s - &x));
        prop_assert!(gap < 1e-9, "√X·√X − X = {gap:.3e}");
    }

    /// Partial trace of a pure tensor factorizes: Tr_B(A⊗B) = Tr(B)·A, and
    /// the full trace is preserved.
    #[test]
    fn partial_trace_splits_tensor_products(seed in 0u64..1 << 48, da in 2usize..=3, db in 2usize..=3) {
        let mut rng = seeded(seed);
        let a = random::psd(da, &mut rng);
        let b = random::psd(db, &mut rng);
        let ab = tensor_product(&a, &b);
        let reduced = partial_trace(&ab, &[da, db], &[1]).unwrap();
        let gap = max_abs(&(&reduced - &a * re(trace_re(&b))));
        prop_assert!(gap < 1e-12, "Tr_B(A⊗B) ≠ Tr(B)·A by {gap:.3e}");
        let full = trace_re(&ab);
        prop_assert!((trace_re(&reduced) - full).abs() < 1e-12, "trace not preserved");
    }

    /// Mixed-product identity (A⊗B)(C⊗D) = (AC)⊗(BD).
    #[test]
    fn tensor_product_is_multiplicative(seed in 0u64..1 << 48) {
        let mut rng = seeded(seed);
        let (a, c) = (random::psd(2, &mut rng), random::psd(2, &mut rng));
        let (b, d) = (random::psd(3, &mut rng), random::psd(3, &mut rng));
        let lhs = tensor_product(&a, &b) * tensor_product(&c, &d);
        let rhs = tensor_product(&(&a * &c), &(&b * &d));
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-10);
    }

    /// The canonical ensemble of (ρ, a) averages back to ρ, and the
    /// pretty-good measurement of that ensemble recovers the measurement a —
    /// the two constructions are mutually inverse for full-rank ρ.
    #[test]
    fn canonical_ensemble_and_pgm_are_inverse(seed in 0u64..1 << 48, d in 2usize..=3, m in 2usize..=3) {
        let mut rng = seeded(seed);
        let rho = DensityMatrix::new(random::density(d, &mut rng)).unwrap();
        let a = Povm::new(random::povm(d, m, &mut rng)).unwrap();
        let canon = canonical_ensemble(&rho, &a).unwrap();
        prop_assume!(canon.kept.len() == m); // vanishing weights change the alphabet

        let avg = ensemble_average(&canon.ensemble).unwrap();
        let gap = max_abs(&(avg.matrix() - rho.matrix()));
        prop_assert!(gap < 1e-10, "Σ λ_j ρ̂_j ≠ ρ by {gap:.3e}");

        let pgm = pretty_good_measurement(&canon.ensemble).unwrap();
        prop_assert!(!pgm.restricted);
        for (j, orig) in a.elements().iter().enumerate() {
            let back = max_abs(&(pgm.povm.element(j) - orig));
            prop_assert!(back < 1e-8, "PGM element {j} differs by {back:.3e}");
        }
    }

    /// Holevo bound: I(X;Y) ≤ χ for both the ensemble and the measurement
    /// side, and mutual information is nonnegative and bounded by the entropy
    /// of either marginal.
    #[test]
    fn holevo_dominates_mutual_information(seed in 0u64..1 << 48, d in 2usize..=4) {
        let t = random_triple(seed, d, 3, 3);
        let check = holevo_check(&t).unwrap();
        prop_assert!(check.slack_ensemble >= -1e-9, "ensemble slack {:.3e}", check.slack_ensemble);
        prop_assert!(check.slack_measurement >= -1e-9, "measurement slack {:.3e}", check.slack_measurement);

        let p = joint_distribution(&t).unwrap();
        let i = mutual_information(&p);
        prop_assert!(i >= -1e-12, "negative mutual information {i:.3e}");
        let h_row = entropy_of(&p.row_marginal());
        let h_col = entropy_of(&p.col_marginal());
        prop_assert!(i <= h_row + 1e-9 && i <= h_col + 1e-9, "I = {i:.6} exceeds marginal entropy");
    }

    /// The dual triple transposes the joint distribution exactly.
    #[test]
    fn dual_triple_transposes_statistics(seed in 0u64..1 << 48, d in 2usize..=3) {
        let t = random_triple(seed, d, 2, 3);
        let dual = dual_triple(&t).unwrap();
        prop_assert!(dual.i2_gap <= 1e-10, "duality gap {:.3e}", dual.i2_gap);
        prop_assert!(dual.average_gap <= 1e-10, "average drifted by {:.3e}", dual.average_gap);
    }

    /// √ρ a √ρ and √a ρ √a share their spectrum (conjugacy of the two
    /// orderings), which underlies the canonical-ensemble entropies.
    #[test]
    fn sandwich_orderings_share_spectra(seed in 0u64..1 << 48, d in 2usize..=4) {
        let mut rng = seeded(seed);
        let rho = DensityMatrix::new(random::density(d, &mut rng)).unwrap();
        let a_j = random::psd(d, &mut rng);
        let check = spectrum_conjugacy_check(&rho, &a_j).unwrap();
        prop_assert!(check.max_gap <= 1e-9, "spectra differ by {:.3e}", check.max_gap);
    }

    /// Entropy defect of a random ensemble lies in [0, H(ρ̄)]; the lower-bound
    /// formula never exceeds l × defect for admissible ε.
    #[test]
    fn entropy_defect_brackets_the_lower_bound(seed in 0u64..1 << 48, d in 2usize..=3) {
        let e = random_ensemble(seed, d, 3);
        let defect = entropy_defect(&e).unwrap();
        let h_avg = ensemble_average(&e).unwrap().entropy_bits();
        prop_assert!(defect >= -1e-9, "negative defect {defect:.3e}");
        prop_assert!(defect <= h_avg + 1e-9, "defect {defect:.6} exceeds H(ρ̄) = {h_avg:.6}");

        let lambda_min = e.probs().iter().copied().fold(f64::INFINITY, f64::min);
        let eps = (lambda_min / 2.0).powi(2) * 0.5;
        let l = 4usize;
        let bound = thm3_lower_bound(e.probs(), e.states(), eps, d, l).unwrap();
        prop_assert!(
            bound.clamped_bits <= l as f64 * defect + 1e-9,
            "lower bound {:.6} exceeds l·defect {:.6}",
            bound.clamped_bits,
            l as f64 * defect
        );
        prop_assert!(bound.clamped_bits >= 0.0);
    }
}

/// Shannon entropy (bits) of a probability vector.
fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}
