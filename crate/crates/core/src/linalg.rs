//! Dense complex linear algebra on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = Vec<Complex64>;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real(n: usize, m: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(n, m, data.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn diag(entries: &[Complex64]) -> CMat {
    let n = entries.len();
    let mut m = zeros(n, n);
    for (i, &e) in entries.iter().enumerate() {
        m[(i, i)] = e;
    }
    m
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all<'a, I: IntoIterator<Item = &'a CMat>>(ms: I) -> CMat {
    let mut acc = identity(1);
    for m in ms {
        acc = kron(&acc, m);
    }
    acc
}

/// Direct sum of square blocks along the diagonal.
pub fn direct_sum(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
    max_diff(&(a * b), &(b * a))
}

pub fn unitarity_residual(m: &CMat) -> f64 {
    max_diff(&(m.adjoint() * m), &identity(m.ncols()))
}

/// `tr(A†B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Hermitian eigendecomposition with eigenvalues in ascending order; column
/// `k` of the returned matrix is the eigenvector for eigenvalue `k`.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Number of singular values above `thresh`.
pub fn rank(m: &CMat, thresh: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    singular_values(m).iter().filter(|&&s| s > thresh).count()
}

/// Orthonormal basis (as columns) of the range of a Hermitian projector-like
/// matrix: eigenvectors with eigenvalue above `thresh`.
pub fn range_basis(p: &CMat, thresh: f64) -> CMat {
    let (vals, vecs) = eigh(p);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > thresh).collect();
    let mut out = zeros(p.nrows(), cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &vecs.column(k));
    }
    out
}

/// Right singular vector of the smallest singular value, with that value.
pub fn smallest_right_singular(m: &CMat) -> (f64, Vec<Complex64>) {
    let (r, c) = (m.nrows(), m.ncols());
    // Pad to at least square so the SVD returns a full right basis.
    let work = if r < c {
        let mut p = zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = work.svd(false, true);
    let vt = svd.v_t.expect("requested right vectors");
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, &s)| (k, s))
        .expect("non-empty matrix");
    (s, vt.row(k).iter().map(|z| z.conj()).collect())
}

pub fn col_vec(v: &[Complex64]) -> CMat {
    CMat::from_column_slice(v.len(), 1, v)
}

pub fn outer(a: &[Complex64], b: &[Complex64]) -> CMat {
    CMat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

pub fn projector(v: &[Complex64]) -> CMat {
    outer(v, v)
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [Complex64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

pub fn mat_vec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    (m * col_vec(v)).column(0).iter().copied().collect()
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = random_gaussian(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    u
}

pub fn random_gaussian<R: Rng>(r: usize, c: usize, rng: &mut R) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = random_gaussian(n, 1, rng).iter().copied().collect();
    normalize(&mut v);
    v
}

/// Cyclic shift `X = Σ|i⟩⟨i⊕1|` on `C^n`, so `X|a⟩ = |a⊖1⟩`.
pub fn shift(n: usize) -> CMat {
    let mut m = zeros(n, n);
    for i in 0..n {
        m[(i, (i + 1) % n)] = ONE;
    }
    m
}

/// Clock `Z = diag(e^{2πi j/n})`.
pub fn clock(n: usize) -> CMat {
    let e: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
        .collect();
    diag(&e)
}

pub fn mat_pow(m: &CMat, k: usize) -> CMat {
    let mut acc = identity(m.nrows());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

pub fn pauli_x() -> CMat {
    from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_z() -> CMat {
    from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// Swap of two qudits of dimensions `da`, `db`: `|a,b⟩ ↦ |b,a⟩`.
pub fn swap(da: usize, db: usize) -> CMat {
    let n = da * db;
    let mut m = zeros(n, n);
    for a in 0..da {
        for b in 0..db {
            m[(b * da + a, a * db + b)] = ONE;
        }
    }
    m
}

/// If `a = c·b` for a scalar `c`, return `c`; otherwise `None` (tolerance on
/// the residual `‖a − c b‖_max`).
pub fn proportionality(a: &CMat, b: &CMat, tol: f64) -> Option<Complex64> {
    let nb = hs_inner(b, b);
    if nb.norm() < tol {
        return None;
    }
    let c = hs_inner(b, a) / nb;
    if max_diff(a, &b.map(|z| z * c)) < tol {
        Some(c)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        assert!(max_diff(&(&z * &x), &(&x * &z).scale(-1.0)) < 1e-15);
        assert!(max_diff(&(&z * &x), &y.map(|v| v * I)) < 1e-15);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            assert!(unitarity_residual(&random_unitary(n, &mut rng)) < 1e-12);
        }
    }

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_gaussian(4, 4, &mut rng);
        let h = &g + g.adjoint();
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = &vecs * diag(&vals.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()) * vecs.adjoint();
        assert!(max_diff(&back, &h) < 1e-10);
    }

    #[test]
    fn shift_and_clock_commute_up_to_root() {
        let n = 4;
        let (x, z) = (shift(n), clock(n));
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / n as f64);
        assert!(max_diff(&(&x * &z), &(&z * &x).map(|v| v * w)) < 1e-12);
    }

    #[test]
    fn swap_moves_basis_states() {
        let s = swap(2, 3);
        // |1,2⟩ (index 1*3+2=5) ↦ |2,1⟩ (index 2*2+1=5 in 3x2 ordering)
        let mut v = vec![ZERO; 6];
        v[5] = ONE;
        let w = mat_vec(&s, &v);
        assert_eq!(w[2 * 2 + 1], ONE);
        assert!(unitarity_residual(&s) < 1e-15);
    }
}
