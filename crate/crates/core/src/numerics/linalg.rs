use super::matrix::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// A singular value counts toward the rank iff it exceeds this fraction of
/// the largest one.
pub const RANK_TOL: f64 = 1e-9;

/// Largest matrix accepted by [`eig_general`].
pub const EIG_GENERAL_MAX_DIM: usize = 12;

const QR_MAX_ITERS: usize = 500;
const SVD_MAX_SWEEPS: usize = 60;

/// Singular values in descending order, `min(rows, cols)` of them.
///
/// One-sided (Hestenes) Jacobi on the columns; small singular values keep
/// relative accuracy, which rank certification relies on.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let work = if m.rows() >= m.cols() { m.clone() } else { m.adjoint() };
    let (rows, cols) = (work.rows(), work.cols());
    let mut colv: Vec<Vec<C64>> = (0..cols).map(|j| work.column(j)).collect();
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: f64 = colv[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = colv[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = colv[p].iter().zip(&colv[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g < 1e-300 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = colv.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for i in 0..rows {
                    let a = cp[i];
                    let b = cq[i] * phase.conj();
                    cp[i] = a * c - b * s;
                    cq[i] = a * s + b * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = colv
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(m: &ComplexMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// All eigenvalues (with multiplicity) of a small square matrix.
pub fn eig_general(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > EIG_GENERAL_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "eig_general supports at most {EIG_GENERAL_MAX_DIM}x{EIG_GENERAL_MAX_DIM}, got {n}x{n}"
        )));
    }
    let mut h = hessenberg(m);
    let mut eig = Vec::with_capacity(n);
    if n == 0 {
        return Ok(eig);
    }
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iters = 0;
    let mut since_deflation = 0;
    loop {
        if hi == 0 {
            eig.push(h[(0, 0)]);
            break;
        }
        let mut l = hi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let s = if s == 0.0 { scale } else { s };
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig.push(h[(hi, hi)]);
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iters += 1;
        since_deflation += 1;
        if iters > QR_MAX_ITERS {
            return Err(Error::ConvergenceFailure("shifted QR"));
        }
        let mu = if since_deflation % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm(), 0.0) * 0.75
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(&mut h, l, hi, mu);
    }
    Ok(eig)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() < (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// One explicitly shifted QR sweep on the active block `lo..=hi`.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, mu: C64) {
    for i in lo..=hi {
        h[(i, i)] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + y * s;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in lo..=top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s.conj();
            h[(i, k + 1)] = -x * s + y * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += mu;
    }
}

/// `G = [[c, s], [-s̄, c]]` with `G·[x; y] = [r; 0]`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let rho = ax.hypot(ay);
    (ax / rho, (x / ax) * y.conj() / rho)
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    let mut a = m.clone();
    for k in 0..n.saturating_sub(2) {
        let xnorm = ((k + 1)..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if xnorm < 1e-300 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let mut v: Vec<C64> = ((k + 1)..n).map(|i| a[(i, k)]).collect();
        v[0] += phase * xnorm;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vn;
        }
        // left: A ← (I - 2vv†) A
        for j in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * a[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                a[(k + 1 + i, j)] -= *vi * dot * 2.0;
            }
        }
        // right: A ← A (I - 2vv†)
        for i in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(j, vj)| a[(i, k + 1 + j)] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                a[(i, k + 1 + j)] -= dot * vj.conj() * 2.0;
            }
        }
        for i in (k + 2)..n {
            a[(i, k)] = ZERO;
        }
    }
    a
}

/// Matrix inverse by Gauss–Jordan elimination with partial pivoting.
///
/// Refuses matrices whose condition exceeds `1e10` (smallest singular value
/// below `1e-10` of the largest).
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let sv = singular_values(m);
    if n > 0 && (sv[0] == 0.0 || sv[n - 1] <= 1e-10 * sv[0]) {
        return Err(Error::Singular);
    }
    let mut a = m.clone();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .expect("nonempty range");
        if a[(pivot, col)].norm() == 0.0 {
            return Err(Error::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(pivot, j)];
                a[(pivot, j)] = t;
                let t = inv[(col, j)];
                inv[(col, j)] = inv[(pivot, j)];
                inv[(pivot, j)] = t;
            }
        }
        let p = ONE / a[(col, col)];
        for j in 0..n {
            a[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[(i, col)];
            if f == ZERO {
                continue;
            }
            for j in 0..n {
                let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                a[(i, j)] -= f * ac;
                inv[(i, j)] -= f * ic;
            }
        }
    }
    Ok(inv)
}
