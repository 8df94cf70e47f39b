//! Dense complex-matrix substrate.
//!
//! All operators live in `DMatrix<Complex64>` (row-major semantics are only
//! relevant at the serialization boundary; see [`crate::io`]). The central
//! service is [`eig_hermitian`], which returns eigenvalues sorted descending
//! together with a *canonical* orthonormal eigenbasis: within every
//! degenerate cluster the eigenvectors are produced by Gram–Schmidt over the
//! projected standard basis vectors in index order. Downstream machinery
//! (typical projectors, cutoff subspaces) depends on a reproducible
//! eigenbasis, so the convention is applied uniformly — including to
//! singleton clusters, where it reduces to a phase convention making the
//! first significant component of each eigenvector real and positive.
//!
//! Tensor-product index convention: the **first factor is most significant**
//! in the composite index, matching the Kronecker product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

/// Dense complex matrix used for every operator in this crate.
pub type CMatrix = DMatrix<Complex64>;

/// Complex scalar shorthand.
#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real scalar embedded as a complex number.
#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Builds a matrix from rows of real numbers (test and fixture convenience).
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nr = rows.len();
    let nc = if nr > 0 { rows[0].len() } else { 0 };
    CMatrix::from_fn(nr, nc, |i, j| re(rows[i][j]))
}

/// Diagonal matrix with the given real diagonal.
pub fn diag_real(d: &[f64]) -> CMatrix {
    CMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { re(d[i]) } else { re(0.0) })
}

/// Largest entrywise modulus of `M − M†`.
pub fn hermiticity_gap(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    let mut gap = 0.0f64;
    for (a, b) in m.iter().zip(adj.iter()) {
        gap = gap.max((a - b).norm());
    }
    gap
}

/// Eigendecomposition of a Hermitian operator.
///
/// Eigenvalues are sorted descending; the eigenvector columns are orthonormal
/// and canonically ordered (see module docs).
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, aligned with `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    /// Dimension of the underlying space.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Σ_t f(λ_t) · v_t v_t† — applies a spectral function.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (t, &lam) in self.eigenvalues.iter().enumerate() {
            let flam = f(lam);
            if flam != 0.0 {
                let v = self.eigenvectors.column(t);
                out += v * v.adjoint() * re(flam);
            }
        }
        out
    }

    /// Reconstructs the original operator, Σ_t λ_t v_t v_t†.
    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    /// Largest |eigenvalue| (the operator norm of the decomposed operator).
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x))
    }
}

/// Hermitian eigendecomposition with the canonical eigenbasis convention.
///
/// Errors on non-square input and on self-adjointness violations beyond
/// `tol::HERMITICITY_REL` relative to the operator norm.
pub fn eig_hermitian(m: &CMatrix) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let d = m.nrows();
    if d == 0 {
        return Ok(Spectrum { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }
    let gap = hermiticity_gap(m);
    // Work on the symmetrized matrix; the anti-Hermitian part is noise by the
    // check below.
    let sym = (m + m.adjoint()) * re(0.5);
    let se = nalgebra::linalg::SymmetricEigen::new(sym);
    let opnorm = se.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    // Relative limit with an absolute floor at unit scale, so that
    // differences of nearly equal Hermitian operators (norm ≈ rounding noise)
    // are not rejected for their own noise.
    let limit = tol::HERMITICITY_REL * opnorm.max(1.0);
    if gap > limit {
        return Err(Error::NotHermitian { gap, limit });
    }

    // Sort descending.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &se.eigenvectors.column(i));
    }

    // Canonicalize each degenerate cluster.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && eigenvalues[end - 1] - eigenvalues[end] < tol::EIG_CLUSTER_GAP {
            end += 1;
        }
        canonicalize_cluster(&mut eigenvectors, start, end)?;
        start = end;
    }

    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Replaces the eigenvector columns `start..end` (an eigenvalue cluster) by
/// the deterministic basis: Gram–Schmidt over the cluster-projected standard
/// basis vectors, taken in index order.
fn canonicalize_cluster(vecs: &mut CMatrix, start: usize, end: usize) -> Result<()> {
    let d = vecs.nrows();
    let size = end - start;
    let mut proj = CMatrix::zeros(d, d);
    for t in start..end {
        let v = vecs.column(t);
        proj += v * v.adjoint();
    }
    let mut accepted: Vec<DVector<Complex64>> = Vec::with_capacity(size);
    for threshold in [tol::GS_RESIDUAL, 1e-14] {
        for i in 0..d {
            if accepted.len() == size {
                break;
            }
            let mut w: DVector<Complex64> = proj.column(i).into();
            for a in &accepted {
                let overlap = a.dotc(&w);
                w -= a * overlap;
            }
            let norm = w.norm();
            if norm > threshold {
                let unit = w / re(norm);
                vecs.set_column(start + accepted.len(), &unit);
                accepted.push(unit);
            }
        }
        if accepted.len() == size {
            break;
        }
    }
    if accepted.len() != size {
        return Err(Error::PremiseViolated(format!(
            "degenerate cluster of size {size} spans only {} standard directions",
            accepted.len()
        )));
    }
    Ok(())
}

/// Operator square root of a PSD Hermitian operator.
///
/// Eigenvalues in `[-tol::PSD_CLAMP, 0)` are clamped to zero; an eigenvalue
/// below `-tol::PSD_ERROR` is an error.
pub fn op_sqrt(h: &CMatrix) -> Result<CMatrix> {
    let spec = eig_hermitian(h)?;
    let min = spec.min_eigenvalue();
    if min < -tol::PSD_ERROR {
        return Err(Error::NotPsd { min_eig: min });
    }
    Ok(spec.map(|x| x.max(0.0).sqrt()))
}

/// Pseudo-inverse square root: eigenvalues above `rank_tol` map to λ^{-1/2},
/// the kernel maps to zero.
pub fn op_inv_sqrt_on_support(h: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    let spec = eig_hermitian(h)?;
    let min = spec.min_eigenvalue();
    if min < -tol::PSD_ERROR {
        return Err(Error::NotPsd { min_eig: min });
    }
    Ok(spec.map(|x| if x > rank_tol { 1.0 / x.sqrt() } else { 0.0 }))
}

/// Default relative rank threshold for [`op_inv_sqrt_on_support`].
pub fn default_rank_tol(h: &CMatrix) -> Result<f64> {
    Ok(tol::RANK_REL * eig_hermitian(h)?.operator_norm())
}

/// Kronecker (tensor) product; the first factor is most significant.
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `m^{⊗ l}`; the identity on a one-dimensional space for `l = 0`.
pub fn tensor_power(m: &CMatrix, l: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for _ in 0..l {
        out = out.kronecker(m);
    }
    out
}

/// Kronecker product of a list of factors, first factor most significant.
pub fn kron_list(factors: &[&CMatrix]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Partial trace of `c` over the factors listed in `traced_factors`.
///
/// `factor_dims` are the tensor-factor dimensions in order (first factor most
/// significant); their product must equal `dim(c)`. The result lives on the
/// kept factors in their original order.
pub fn partial_trace(
    c: &CMatrix,
    factor_dims: &[usize],
    traced_factors: &[usize],
) -> Result<CMatrix> {
    let dim: usize = factor_dims.iter().product();
    if c.nrows() != dim || c.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: format!(
                "partial_trace: operator is {}×{}, factor dims multiply to {}",
                c.nrows(),
                c.ncols(),
                dim
            ),
        });
    }
    let n = factor_dims.len();
    let mut is_traced = vec![false; n];
    for &t in traced_factors {
        if t >= n {
            return Err(Error::DimensionMismatch {
                context: format!("partial_trace: traced factor {t} out of range (n = {n})"),
            });
        }
        is_traced[t] = true;
    }

    // Strides in the composite index, first factor most significant.
    let mut stride = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * factor_dims[k + 1];
    }

    let kept: Vec<usize> = (0..n).filter(|&k| !is_traced[k]).collect();
    let traced: Vec<usize> = (0..n).filter(|&k| is_traced[k]).collect();
    let dim_kept: usize = kept.iter().map(|&k| factor_dims[k]).product();
    let dim_traced: usize = traced.iter().map(|&k| factor_dims[k]).product();

    // Composite-index offsets of every kept / traced multi-index.
    let offsets = |factors: &[usize], count: usize| -> Vec<usize> {
        let mut out = vec![0usize; count];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut r = flat;
            for &k in factors.iter().rev() {
                *slot += (r % factor_dims[k]) * stride[k];
                r /= factor_dims[k];
            }
        }
        out
    };
    let kept_off = offsets(&kept, dim_kept);
    let traced_off = offsets(&traced, dim_traced);

    let mut out = CMatrix::zeros(dim_kept, dim_kept);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (s, &co) in kept_off.iter().enumerate() {
            let mut acc = re(0.0);
            for &to in &traced_off {
                acc += c[(ro + to, co + to)];
            }
            out[(r, s)] = acc;
        }
    }
    Ok(out)
}

/// Norm bundle of a Hermitian operator.
#[derive(Debug, Clone, Copy)]
pub struct Norms {
    /// max |eigenvalue|.
    pub operator_norm: f64,
    /// Σ |eigenvalues|.
    pub trace_norm: f64,
    /// Plain trace.
    pub trace: Complex64,
}

/// Operator norm, trace norm, and trace of a Hermitian operator.
pub fn norms(h: &CMatrix) -> Result<Norms> {
    let spec = eig_hermitian(h)?;
    let trace = h.diagonal().iter().sum();
    Ok(Norms {
        operator_norm: spec.operator_norm(),
        trace_norm: spec.eigenvalues.iter().map(|x| x.abs()).sum(),
        trace,
    })
}

/// Operator (sup) norm of a Hermitian operator.
pub fn operator_norm(h: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.operator_norm())
}

/// Trace norm ‖·‖₁ of a Hermitian operator.
pub fn trace_norm(h: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.min_eigenvalue())
}

/// Löwner order check: `A ≤ B` iff the minimum eigenvalue of `B − A` is at
/// least `-tol`.
pub fn loewner_leq(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: format!("loewner_leq: {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    Ok(min_eigenvalue(&(b - a))? >= -tol)
}

/// Operator-norm distance between two Hermitian operators.
pub fn operator_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    operator_norm(&(a - b))
}

/// Real part of the trace (the trace itself for Hermitian operators).
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().sum::<Complex64>().re
}

/// Random matrix generators used by Monte-Carlo checks and tests.
pub mod random {
    use super::*;
    use rand::Rng;

    /// Matrix with i.i.d. standard-normal-ish complex entries (sum of two
    /// uniforms per component; the exact law is irrelevant, only genericity).
    fn raw<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| {
            cplx(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        })
    }

    /// Random Hermitian matrix, entries O(1).
    pub fn hermitian<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        let g = raw(d, rng);
        (&g + g.adjoint()) * re(0.5)
    }

    /// Random PSD matrix `G G†`.
    pub fn psd<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        let g = raw(d, rng);
        &g * g.adjoint()
    }

    /// Random density matrix (PSD, unit trace, full rank a.s.).
    pub fn density<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        let p = psd(d, rng);
        let tr: Complex64 = p.diagonal().iter().sum();
        p * re(1.0 / tr.re)
    }

    /// Random pure state |ψ⟩⟨ψ|.
    pub fn pure<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        let mut v = DVector::from_fn(d, |_, _| {
            cplx(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        });
        let n = v.norm();
        v /= re(n);
        &v * v.adjoint()
    }

    /// Random `m`-outcome POVM on dimension `d`: rescales random PSD pieces
    /// so the family sums to the identity exactly (up to rounding).
    pub fn povm<R: Rng>(d: usize, m: usize, rng: &mut R) -> Vec<CMatrix> {
        loop {
            let parts: Vec<CMatrix> = (0..m).map(|_| psd(d, rng)).collect();
            let total = parts.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
            let Ok(isq) = op_inv_sqrt_on_support(&total, 1e-9) else {
                continue;
            };
            // Full rank with probability 1; retry on the null set.
            if (CMatrix::identity(d, d) - &isq * &total * &isq).norm() > 1e-9 {
                continue;
            }
            return parts.iter().map(|p| &isq * p * &isq).collect();
        }
    }

    /// Random operator with spectrum in `[0, 1]` (operator norm exactly 1).
    pub fn bounded01<R: Rng>(d: usize, rng: &mut R) -> CMatrix {
        let p = psd(d, rng);
        let norm = eig_hermitian(&p).expect("psd is Hermitian").operator_norm();
        p * re(1.0 / norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let gap = operator_distance(a, b).unwrap();
        assert!(gap <= tol, "operator gap {gap:.3e} exceeds {tol:.1e}");
    }

    #[test]
    fn eig_diagonal_sorts_descending() {
        let spec = eig_hermitian(&diag_real(&[1.0, 3.0, 2.0])).unwrap();
        let expect = [3.0, 2.0, 1.0];
        for (got, want) in spec.eigenvalues.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_identity_uses_standard_basis() {
        let spec = eig_hermitian(&CMatrix::identity(2, 2)).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-12);
        // The tie rule projects the standard basis, so vectors are e_0, e_1.
        assert_close(&spec.eigenvectors, &CMatrix::identity(2, 2), 1e-12);
    }

    #[test]
    fn eig_pauli_x_closed_form() {
        let x = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let spec = eig_hermitian(&x).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((spec.eigenvalues[1] + 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DVector::from_vec(vec![re(s), re(s)]);
        let minus = DVector::from_vec(vec![re(s), re(-s)]);
        // Phase convention: first significant component real positive.
        assert!((spec.eigenvectors.column(0) - &plus).norm() < 1e-12);
        assert!((spec.eigenvectors.column(1) - &minus).norm() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(eig_hermitian(&m), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..25 {
            let h = random::hermitian(6, &mut rng);
            let spec = eig_hermitian(&h).unwrap();
            let scale = 1.0 + spec.operator_norm();
            assert!(operator_distance(&spec.reconstruct(), &h).unwrap() <= 1e-10 * scale);
            let v = &spec.eigenvectors;
            assert!((v.adjoint() * v - CMatrix::identity(6, 6)).norm() <= 1e-10);
        }
    }

    #[test]
    fn sqrt_of_diagonal() {
        let s = op_sqrt(&diag_real(&[4.0, 9.0])).unwrap();
        assert_close(&s, &diag_real(&[2.0, 3.0]), 1e-12);
    }

    #[test]
    fn sqrt_of_projector_is_projector() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let q = op_sqrt(&p).unwrap();
        assert_close(&q, &p, 1e-12);
        let _ = s;
    }

    #[test]
    fn sqrt_squares_back_on_random_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..25 {
            let h = random::psd(5, &mut rng);
            let s = op_sqrt(&h).unwrap();
            let scale = 1.0 + operator_norm(&h).unwrap();
            assert!(operator_distance(&(&s * &s), &h).unwrap() <= 1e-9 * scale);
        }
    }

    #[test]
    fn sqrt_rejects_non_psd() {
        assert!(matches!(op_sqrt(&diag_real(&[1.0, -0.5])), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn inv_sqrt_flat_state() {
        let h = diag_real(&[0.5, 0.5]);
        let s = op_inv_sqrt_on_support(&h, 1e-12).unwrap();
        assert_close(&s, &(CMatrix::identity(2, 2) * re(2.0f64.sqrt())), 1e-12);
    }

    #[test]
    fn inv_sqrt_kernel_maps_to_zero() {
        let s = op_inv_sqrt_on_support(&diag_real(&[0.25, 0.0]), 1e-12).unwrap();
        assert_close(&s, &diag_real(&[2.0, 0.0]), 1e-12);
    }

    #[test]
    fn inv_sqrt_inverts_on_support() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let rho = random::density(4, &mut rng);
            let isq = op_inv_sqrt_on_support(&rho, default_rank_tol(&rho).unwrap()).unwrap();
            assert_close(&(&isq * &rho * &isq), &CMatrix::identity(4, 4), 1e-8);
        }
    }

    #[test]
    fn tensor_identity() {
        assert_close(
            &tensor_product(&CMatrix::identity(2, 2), &CMatrix::identity(2, 2)),
            &CMatrix::identity(4, 4),
            0.0,
        );
    }

    #[test]
    fn tensor_basis_ordering() {
        // diag(1,0) ⊗ diag(0,1): first factor most significant ⇒ index 0·2+1.
        let t = tensor_product(&diag_real(&[1.0, 0.0]), &diag_real(&[0.0, 1.0]));
        assert_close(&t, &diag_real(&[0.0, 1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn tensor_trace_multiplies() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = random::hermitian(3, &mut rng);
            let b = random::hermitian(2, &mut rng);
            let lhs: Complex64 = tensor_product(&a, &b).diagonal().iter().sum();
            let ta: Complex64 = a.diagonal().iter().sum();
            let tb: Complex64 = b.diagonal().iter().sum();
            assert!((lhs - ta * tb).norm() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        for _ in 0..10 {
            let a = random::psd(3, &mut rng);
            let b = random::psd(2, &mut rng);
            let tb: Complex64 = b.diagonal().iter().sum();
            let got = partial_trace(&tensor_product(&a, &b), &[3, 2], &[1]).unwrap();
            assert_close(&got, &(&a * tb), 1e-12 * (1.0 + a.norm() * tb.norm()));
        }
    }

    #[test]
    fn partial_trace_of_bell_projector() {
        // |Φ+⟩ = (|00⟩ + |11⟩)/√2; its marginal is I/2.
        let mut phi = CMatrix::zeros(4, 4);
        for &r in &[0usize, 3] {
            for &c in &[0usize, 3] {
                phi[(r, c)] = re(0.5);
            }
        }
        let got = partial_trace(&phi, &[2, 2], &[1]).unwrap();
        assert_close(&got, &diag_real(&[0.5, 0.5]), 1e-12);
    }

    #[test]
    fn partial_trace_defining_property() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..10 {
            let c = random::hermitian(6, &mut rng);
            let a = random::hermitian(2, &mut rng);
            let reduced = partial_trace(&c, &[2, 3], &[1]).unwrap();
            let lhs: Complex64 = (&a * &reduced).diagonal().iter().sum();
            let rhs: Complex64 = (tensor_product(&a, &CMatrix::identity(3, 3)) * &c)
                .diagonal()
                .iter()
                .sum();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let c = random::hermitian(8, &mut rng);
        let full: Complex64 = c.diagonal().iter().sum();
        for traced in [vec![0usize], vec![1], vec![2], vec![0, 2]] {
            let r = partial_trace(&c, &[2, 2, 2], &traced).unwrap();
            let tr: Complex64 = r.diagonal().iter().sum();
            assert!((tr - full).norm() < 1e-10);
        }
    }

    #[test]
    fn norms_of_signature_matrix() {
        let n = norms(&diag_real(&[1.0, -1.0])).unwrap();
        assert!((n.trace_norm - 2.0).abs() < 1e-12);
        assert!((n.operator_norm - 1.0).abs() < 1e-12);
        assert!(n.trace.norm() < 1e-12);
    }

    #[test]
    fn trace_norm_of_projector_is_rank() {
        let p = diag_real(&[1.0, 1.0, 1.0, 0.0]);
        assert!((trace_norm(&p).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hoelder_pairing() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..25 {
            let a = random::hermitian(4, &mut rng);
            let b = random::hermitian(4, &mut rng);
            let pair: Complex64 = (&a * &b).diagonal().iter().sum();
            assert!(pair.norm() <= trace_norm(&a).unwrap() * operator_norm(&b).unwrap() + 1e-10);
        }
    }

    #[test]
    fn loewner_basics() {
        let z = CMatrix::zeros(2, 2);
        let id = CMatrix::identity(2, 2);
        let half = &id * re(0.5);
        assert!(loewner_leq(&z, &half, 1e-10).unwrap());
        assert!(!loewner_leq(&id, &half, 1e-10).unwrap());
    }

    #[test]
    fn degenerate_cluster_reconstructs() {
        // |+⟩⟨+| ⊗ I has a doubly degenerate eigenvalue 1; the canonical
        // basis must still reconstruct the operator.
        let plus = from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let m = tensor_product(&plus, &CMatrix::identity(2, 2));
        let spec = eig_hermitian(&m).unwrap();
        assert_close(&spec.reconstruct(), &m, 1e-10);
        let v = &spec.eigenvectors;
        assert!((v.adjoint() * v - CMatrix::identity(4, 4)).norm() <= 1e-10);
    }
}
