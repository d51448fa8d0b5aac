//! Small complex linear-algebra helpers on top of nalgebra.

use crate::scalar::Real;
use nalgebra::{Complex, DMatrix, DVector};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Principal square root of a Hermitian PSD matrix. Eigenvalues below zero are
/// treated as rounding noise and clamped.
pub fn hermitian_psd_sqrt<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let eig = a.clone().symmetric_eigen();
    let floor = eigenvalue_floor(eig.eigenvalues.as_slice(), a.nrows());
    let roots: CVector<T> = eig
        .eigenvalues
        .map(|l| Complex::new(if l > floor { l.sqrt() } else { T::zero() }, T::zero()));
    let u = &eig.eigenvectors;
    let scaled = u * CMatrix::from_diagonal(&roots);
    scaled * u.adjoint()
}

/// Eigenvalues at or below this are rounding noise around zero.
pub(crate) fn eigenvalue_floor<T: Real>(eigenvalues: &[T], n: usize) -> T {
    let top = eigenvalues.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
    top * T::epsilon() * T::from_usize_lossy(n.max(1))
}

/// Singular values in no particular order.
pub fn singular_values<T: Real>(a: &CMatrix<T>) -> DVector<T> {
    a.clone().singular_values()
}

/// `(σ_max, σ_min)` of `a`.
pub fn extreme_singular_values<T: Real>(a: &CMatrix<T>) -> (T, T) {
    let sv = singular_values(a);
    let mut hi = T::zero();
    let mut lo = T::infinity();
    for &s in sv.iter() {
        hi = hi.max(s);
        lo = lo.min(s);
    }
    (hi, lo)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr().sqrt())
        .fold(T::zero(), |m, v| m.max(v))
}

/// Hermitian part check: `max |a - aᴴ|`.
pub fn hermitian_defect<T: Real>(a: &CMatrix<T>) -> T {
    max_abs_diff(a, &a.adjoint())
}

pub fn trace<T: Real>(a: &CMatrix<T>) -> Complex<T> {
    a.diagonal().iter().fold(Complex::new(T::zero(), T::zero()), |s, &z| s + z)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::scalar::complex_normal;
    use rand::Rng;

    pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<f64> {
        CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, 1.0))
    }

    /// Haar-ish unitary via QR of a Gaussian matrix.
    pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix<f64> {
        random_matrix(n, n, rng).qr().q()
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_matrix(5, 3, &mut rng);
        let a = &b * b.adjoint();
        let r = hermitian_psd_sqrt(&a);
        assert!(max_abs_diff(&(&r * &r), &a) < 1e-10 * a.norm());
        assert!(hermitian_defect(&r) < 1e-12 * a.norm());
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_unitary(4, &mut rng);
        let eye = CMatrix::<f64>::identity(4, 4);
        assert!(max_abs_diff(&(u.adjoint() * &u), &eye) < 1e-12);
    }

    #[test]
    fn diag_singular_values() {
        let mut a = CMatrix::<f64>::zeros(2, 2);
        a[(0, 0)] = Complex::new(2.0, 0.0);
        a[(1, 1)] = Complex::new(0.0, 1.0);
        let (hi, lo) = extreme_singular_values(&a);
        assert!((hi - 2.0).abs() < 1e-14 && (lo - 1.0).abs() < 1e-14);
    }
}
