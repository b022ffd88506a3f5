//! Hermitian eigendecomposition.
//!
//! [`eigen_hermitian`] is a cyclic complex Jacobi solver. It is slow but its
//! accuracy does not depend on the spectrum, which makes it the reference
//! path. [`eigen_hermitian_fast`] reduces to real tridiagonal form with
//! Householder reflections and finishes with implicit QL; the seesaw loop
//! calls it hundreds of times per restart on 81×81 Bell operators.

use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// Hermiticity accepted by the eigensolvers.
pub const HERMITIAN_TOL: f64 = 1e-10;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.eigenvectors.column(i)
    }

    /// `Σ f(λ_i) v_i v_i†`
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * v[(j, k)].conj() * weights[k])
                .sum()
        })
    }

    fn sorted(mut eigenvalues: Vec<f64>, vectors: ComplexMatrix) -> Self {
        let n = eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
        eigenvalues = order.iter().map(|&k| eigenvalues[k]).collect();
        Spectrum {
            eigenvalues,
            eigenvectors,
        }
    }
}

fn check_hermitian(h: &ComplexMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::NonSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NonHermitian(defect));
    }
    Ok(())
}

/// Full spectrum by cyclic Jacobi rotations.
pub fn eigen_hermitian(h: &ComplexMatrix) -> Result<Spectrum> {
    check_hermitian(h)?;
    let n = h.rows();
    let mut a = h.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let tol = JACOBI_OFF_TOL.max(f64::EPSILON * a.frobenius_norm() * n as f64);

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= tol;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // V = diag(1, conj(phase)) · [[c, s], [-s, c]] on (p, q).
                let vqp = -phase.conj() * s;
                let vqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * vqp;
                    a[(k, q)] = akp * s + akq * vqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * vqp.conj();
                    a[(q, k)] = apk * s + aqk * vqq.conj();
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(app - t * mag, 0.0);
                a[(q, q)] = C64::new(aqq + t * mag, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * vqp;
                    v[(k, q)] = vkp * s + vkq * vqq;
                }
            }
        }
        converged = off_norm(&a) <= tol;
    }
    if !converged {
        return Err(Error::ConvergenceFailure("Jacobi eigensolver"));
    }
    let eig = (0..n).map(|i| a[(i, i)].re).collect();
    Ok(Spectrum::sorted(eig, v))
}

/// Full spectrum by Householder tridiagonalization and implicit QL.
pub fn eigen_hermitian_fast(h: &ComplexMatrix) -> Result<Spectrum> {
    check_hermitian(h)?;
    let n = h.rows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut a = h.hermitize();
    let mut q = ComplexMatrix::identity(n);
    let mut sub = vec![ZERO; n];

    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let xnorm = (start..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm < 1e-300 {
            sub[k] = ZERO;
            continue;
        }
        let x0 = a[(start, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;
        for i in start..n {
            v[i] = a[(i, k)];
        }
        v[start] -= alpha;
        let vnorm = (start..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm < 1e-300 {
            sub[k] = a[(start, k)];
            continue;
        }
        for i in start..n {
            v[i] /= vnorm;
        }
        // p = A v on the trailing block, w = p - (v†p) v
        for i in start..n {
            let mut acc = ZERO;
            for j in start..n {
                acc += a[(i, j)] * v[j];
            }
            p[i] = acc;
        }
        let kappa: C64 = (start..n).map(|i| v[i].conj() * p[i]).sum();
        for i in start..n {
            p[i] -= kappa * v[i];
        }
        // A' = A - 2 v w† - 2 w v†
        for i in start..n {
            for j in start..n {
                let upd = (v[i] * p[j].conj() + p[i] * v[j].conj()) * 2.0;
                a[(i, j)] -= upd;
            }
        }
        a[(start, k)] = alpha;
        a[(k, start)] = alpha.conj();
        for i in (start + 1)..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }
        sub[k] = alpha;
        // Q ← Q (I - 2 v v†)
        for r in 0..n {
            let mut acc = ZERO;
            for j in start..n {
                acc += q[(r, j)] * v[j];
            }
            let acc = acc * 2.0;
            for j in start..n {
                let upd = acc * v[j].conj();
                q[(r, j)] -= upd;
            }
        }
    }
    if n >= 2 {
        sub[n - 2] = a[(n - 1, n - 2)];
    }

    // Diagonal phases make the subdiagonal real and nonnegative.
    let mut phases = vec![ONE; n];
    let mut e = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let m = sub[i].norm();
        e[i] = m;
        phases[i + 1] = if m > 0.0 { phases[i] * (sub[i] / m) } else { phases[i] };
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;

    // eigenvectors = Q · diag(phases) · Z
    let mut qd = q;
    for r in 0..n {
        for c in 0..n {
            qd[(r, c)] *= phases[c];
        }
    }
    let mut vecs = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for k in 0..n {
            let x = qd[(r, k)];
            if x == ZERO {
                continue;
            }
            for c in 0..n {
                vecs[(r, c)] += x * z[k * n + c];
            }
        }
    }
    Ok(Spectrum::sorted(d, vecs))
}

/// Implicit QL on a real symmetric tridiagonal matrix (diagonal `d`,
/// subdiagonal `e[i]` between `i` and `i+1`), accumulating rotations into `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    e[n - 1] = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::ConvergenceFailure("tridiagonal QL"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk1 = z[k * n + i + 1];
                        let zk = z[k * n + i];
                        z[k * n + i + 1] = s * zk + c * zk1;
                        z[k * n + i] = c * zk - s * zk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn hermitian_function(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    Ok(eigen_hermitian(h)?.reassemble(f))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    let spec = eigen_hermitian(h)?;
    Ok(spec.eigenvalues.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_spectrum(h: &ComplexMatrix, s: &Spectrum) {
        let n = h.rows();
        for w in s.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let v = &s.eigenvectors;
        let gram = &v.adjoint() * v;
        assert!((&gram - &ComplexMatrix::identity(n)).max_abs() <= 1e-10);
        let back = s.reassemble(|l| l);
        assert!((&back - h).max_abs() <= 1e-9, "reconstruction {}", (&back - h).max_abs());
        let tr: f64 = s.eigenvalues.iter().sum();
        assert!((tr - h.trace().re).abs() <= 1e-9);
    }

    #[test]
    fn diagonal_and_pauli_x() {
        let s = eigen_hermitian(&ComplexMatrix::from_real_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 1.0]);
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for s in [eigen_hermitian(&x).unwrap(), eigen_hermitian_fast(&x).unwrap()] {
            assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
            assert!((s.eigenvalues[1] + 1.0).abs() < 1e-14);
            let v0 = s.vector(0);
            let r = std::f64::consts::FRAC_1_SQRT_2;
            assert!(((v0[0] / v0[1]) - ONE).norm() < 1e-12);
            assert!((v0[0].norm() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn random_hermitian_suites() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 5, 9, 16, 81] {
            for _ in 0..3 {
                let h = sample::random_hermitian(n, &mut rng);
                check_spectrum(&h, &eigen_hermitian(&h).unwrap());
                check_spectrum(&h, &eigen_hermitian_fast(&h).unwrap());
            }
        }
    }

    #[test]
    fn fast_and_jacobi_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let h = sample::random_hermitian(9, &mut rng);
            let a = eigen_hermitian(&h).unwrap();
            let b = eigen_hermitian_fast(&h).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = sample::haar_unitary(6, &mut rng);
        let d = ComplexMatrix::from_real_diag(&[2.0, 2.0, 2.0, -1.0, -1.0, 0.0]);
        let h = (&(&u * &d) * &u.adjoint()).hermitize();
        check_spectrum(&h, &eigen_hermitian(&h).unwrap());
        check_spectrum(&h, &eigen_hermitian_fast(&h).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eigen_hermitian(&m), Err(Error::NonSquare { .. })));
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(eigen_hermitian(&m), Err(Error::NonHermitian(_))));
        assert!(matches!(eigen_hermitian_fast(&m), Err(Error::NonHermitian(_))));
    }
}
