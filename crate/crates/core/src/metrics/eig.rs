//! Symmetric 3x3 eigendecomposition: analytic Cardano eigenvalues with
//! cross-product eigenvectors on the fast path, cyclic Jacobi when the
//! spectrum is too degenerate for cross products to be trustworthy.

use crate::error::{CoreError, Result};

/// Relative eigenvalue separation below which the analytic path hands off to
/// Jacobi.
const DEGENERACY_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct EigenDecomposition {
    /// Descending: lambda[0] >= lambda[1] >= lambda[2].
    pub lambda: [f64; 3],
    /// Unit eigenvectors as rows, e[i] paired with lambda[i].
    pub e: [[f64; 3]; 3],
}

#[inline]
fn mat_from_coeffs(m: [f64; 6]) -> [[f64; 3]; 3] {
    let [dxx, dxy, dxz, dyy, dyz, dzz] = m;
    [[dxx, dxy, dxz], [dxy, dyy, dyz], [dxz, dyz, dzz]]
}

#[inline]
fn frobenius(m: [f64; 6]) -> f64 {
    let [dxx, dxy, dxz, dyy, dyz, dzz] = m;
    (dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * (dxy * dxy + dxz * dxz + dyz * dyz)).sqrt()
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn scale(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

/// Cardano eigenvalues of a symmetric 3x3, descending.
fn eigenvalues_analytic(a: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        let mut l = [a[0][0], a[1][1], a[2][2]];
        l.sort_by(|x, y| y.partial_cmp(x).unwrap());
        return l;
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let inv_p = 1.0 / p;
    let b = [
        [(a[0][0] - q) * inv_p, a[0][1] * inv_p, a[0][2] * inv_p],
        [a[0][1] * inv_p, (a[1][1] - q) * inv_p, a[1][2] * inv_p],
        [a[0][2] * inv_p, a[1][2] * inv_p, (a[2][2] - q) * inv_p],
    ];
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3 * 2.0).cos();
    let l2 = 3.0 * q - l1 - l3;
    [l1, l2, l3]
}

/// Eigenvector for an isolated eigenvalue via the largest cross product of
/// rows of (A - lambda I). Returns None when every cross product is tiny,
/// i.e. the eigenvalue is not actually isolated at working precision.
fn eigenvector_for(a: [[f64; 3]; 3], lambda: f64, scale_hint: f64) -> Option<[f64; 3]> {
    let r0 = [a[0][0] - lambda, a[0][1], a[0][2]];
    let r1 = [a[0][1], a[1][1] - lambda, a[1][2]];
    let r2 = [a[0][2], a[1][2], a[2][2] - lambda];
    let candidates = [cross(r0, r1), cross(r0, r2), cross(r1, r2)];
    let mut best = candidates[0];
    let mut best_norm = norm(best);
    for &c in &candidates[1..] {
        let n = norm(c);
        if n > best_norm {
            best = c;
            best_norm = n;
        }
    }
    // Cross products of near-parallel rows scale like separation * |A|; far
    // below that they are numerical noise.
    if best_norm <= 1e-14 * scale_hint * scale_hint {
        return None;
    }
    Some(scale(best, 1.0 / best_norm))
}

/// One cyclic Jacobi rotation sweep family; used as the robust fallback.
/// Stops when the off-diagonal norm drops below 1e-15 * |A| (or absolutely
/// for the zero matrix), well past every tolerance in the public contract.
fn jacobi(a0: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = a0;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale_f = {
        let mut s = 0.0f64;
        for r in &a0 {
            for &x in r {
                s += x * x;
            }
        }
        s.sqrt()
    };
    let tol = (1e-15 * scale_f).max(1e-300);
    for _ in 0..64 {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // A <- J^T A J with J the (p,q) rotation.
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q; // the remaining index
            let arp = a[r][p];
            let arq = a[r][q];
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

fn decomposition_from_jacobi(m: [f64; 6]) -> EigenDecomposition {
    let (lam, v) = jacobi(mat_from_coeffs(m));
    // Columns of v are eigenvectors; sort descending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| lam[j].partial_cmp(&lam[i]).unwrap());
    let mut lambda = [0.0; 3];
    let mut e = [[0.0; 3]; 3];
    for (slot, &src) in order.iter().enumerate() {
        lambda[slot] = lam[src];
        let col = [v[0][src], v[1][src], v[2][src]];
        e[slot] = scale(col, 1.0 / norm(col));
    }
    EigenDecomposition { lambda, e }
}

/// Decompose the symmetric tensor given as (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz).
pub fn eig3_symmetric(m: [f64; 6]) -> Result<EigenDecomposition> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFiniteInput(0));
    }
    let scale_f = frobenius(m);
    if scale_f == 0.0 {
        return Ok(EigenDecomposition {
            lambda: [0.0; 3],
            e: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        });
    }
    let a = mat_from_coeffs(m);
    let lambda = eigenvalues_analytic(a);
    let sep = (lambda[0] - lambda[1]).min(lambda[1] - lambda[2]);
    if sep < DEGENERACY_REL * scale_f {
        return Ok(decomposition_from_jacobi(m));
    }
    let e1 = eigenvector_for(a, lambda[0], scale_f);
    let e3 = eigenvector_for(a, lambda[2], scale_f);
    match (e1, e3) {
        (Some(e1), Some(e3)) => {
            let e2 = cross(e3, e1);
            let n2 = norm(e2);
            if n2 < 0.5 {
                // e1 and e3 nearly parallel: the analytic split was unstable.
                return Ok(decomposition_from_jacobi(m));
            }
            Ok(EigenDecomposition {
                lambda,
                e: [e1, scale(e2, 1.0 / n2), e3],
            })
        }
        _ => Ok(decomposition_from_jacobi(m)),
    }
}

/// Fractional anisotropy of an eigenvalue triple; the zero tensor maps to 0.
#[inline]
pub fn fa_from_lambda(l: [f64; 3]) -> f64 {
    let den = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    if den <= 0.0 {
        return 0.0;
    }
    let num = (l[0] - l[1]).powi(2) + (l[0] - l[2]).powi(2) + (l[1] - l[2]).powi(2);
    (num / (2.0 * den)).sqrt()
}

#[inline]
pub fn md_from_lambda(l: [f64; 3]) -> f64 {
    (l[0] + l[1] + l[2]) / 3.0
}
