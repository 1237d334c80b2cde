//! Vertex operators: the general R(theta1,theta2,theta3), its static-limit
//! specialisation S, and the gauge-transformed L with its free-fermion
//! 4x4 blocks.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::SphericalTriangle;
use crate::mat::{kron, max_abs, CMat};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Dense operator on three two-dimensional spaces.  Rows are indexed by the
/// incoming multi-index (i1,i2,i3) packed as i1*4 + i2*2 + i3, columns by
/// the outgoing (j1,j2,j3).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexOperator {
    pub mat: CMat,
}

impl VertexOperator {
    pub fn zeros() -> Self {
        Self {
            mat: Array2::zeros((8, 8)),
        }
    }

    fn put(&mut self, i: (usize, usize, usize), j: (usize, usize, usize), v: Complex64) {
        self.mat[[i.0 * 4 + i.1 * 2 + i.2, j.0 * 4 + j.1 * 2 + j.2]] = v;
    }

    pub fn nonzero_count(&self) -> usize {
        self.mat.iter().filter(|z| z.norm() > 0.0).count()
    }

    /// True when every entry with i1+i2+i3 != j1+j2+j3 (mod 2) is exactly zero.
    pub fn parity_conserving(&self) -> bool {
        for r in 0..8usize {
            for c in 0..8usize {
                let pr = (r.count_ones() + c.count_ones()) % 2;
                if pr == 1 && self.mat[[r, c]] != Complex64::new(0.0, 0.0) {
                    return false;
                }
            }
        }
        true
    }
}

/// Populate the 32 weights from the four t-values.
fn fill_weights(t: [Complex64; 4]) -> VertexOperator {
    let [t0, t1, t2, t3] = t;
    let mut op = VertexOperator::zeros();
    let one = re(1.0);
    op.put((0, 0, 0), (0, 0, 0), one);
    op.put((0, 1, 1), (0, 1, 1), one);
    op.put((1, 0, 1), (1, 0, 1), one);
    op.put((1, 1, 0), (1, 1, 0), one);

    let q = t0 * t1 * t2 * t3;
    op.put((1, 1, 1), (1, 1, 1), q);
    op.put((1, 0, 0), (1, 0, 0), q);
    op.put((0, 1, 0), (0, 1, 0), q);
    op.put((0, 0, 1), (0, 0, 1), q);

    let v = t2 * t3;
    op.put((0, 0, 1), (0, 1, 0), v);
    op.put((0, 1, 0), (0, 0, 1), v);
    op.put((1, 1, 1), (1, 0, 0), -v);
    op.put((1, 0, 0), (1, 1, 1), -v);

    let v = t0 * t1;
    op.put((1, 1, 0), (1, 0, 1), v);
    op.put((1, 0, 1), (1, 1, 0), v);
    op.put((0, 0, 0), (0, 1, 1), -v);
    op.put((0, 1, 1), (0, 0, 0), -v);

    let v = -I * t1 * t3;
    op.put((0, 1, 0), (1, 1, 1), v);
    op.put((0, 0, 1), (1, 0, 0), v);
    op.put((1, 0, 0), (0, 0, 1), -v);
    op.put((1, 1, 1), (0, 1, 0), -v);

    let v = I * t0 * t2;
    op.put((1, 0, 1), (0, 0, 0), v);
    op.put((1, 1, 0), (0, 1, 1), v);
    op.put((0, 1, 1), (1, 1, 0), -v);
    op.put((0, 0, 0), (1, 0, 1), -v);

    let v = t1 * t2;
    op.put((1, 1, 1), (0, 0, 1), v);
    op.put((0, 0, 1), (1, 1, 1), v);
    op.put((0, 1, 0), (1, 0, 0), v);
    op.put((1, 0, 0), (0, 1, 0), v);

    let v = t0 * t3;
    op.put((0, 0, 0), (1, 1, 0), v);
    op.put((1, 1, 0), (0, 0, 0), v);
    op.put((1, 0, 1), (0, 1, 1), v);
    op.put((0, 1, 1), (1, 0, 1), v);
    op
}

/// The general vertex operator of a solved spherical triangle.
pub fn build_r(tri: &SphericalTriangle) -> VertexOperator {
    fill_weights([re(tri.t[0]), re(tri.t[1]), re(tri.t[2]), re(tri.t[3])])
}

/// R with externally supplied (possibly complex) t-values.
pub fn build_r_from_t(t: [Complex64; 4]) -> VertexOperator {
    fill_weights(t)
}

/// The static-limit operator: t0 = 0, T_i = sqrt(tan(theta_i/2)); sixteen
/// nonzero entries and S^2 = 1.
pub fn build_s(theta: [f64; 3]) -> Result<VertexOperator> {
    let sum = theta[0] + theta[1] + theta[2];
    if (sum - std::f64::consts::PI).abs() > 1e-10 {
        return Err(Error::Constraint(format!(
            "static operator needs theta1+theta2+theta3 = pi, off by {:e}",
            sum - std::f64::consts::PI
        )));
    }
    for &t in &theta {
        if !(t > 0.0 && t < std::f64::consts::PI) {
            return Err(Error::Constraint(format!("angle {t} outside (0, pi)")));
        }
    }
    let t = [
        re(0.0),
        re((theta[0] / 2.0).tan().sqrt()),
        re((theta[1] / 2.0).tan().sqrt()),
        re((theta[2] / 2.0).tan().sqrt()),
    ];
    Ok(fill_weights(t))
}

/// Fixed 2x2 gauge matrices and basis vectors.
pub mod gauge {
    use super::*;

    pub fn hadamard() -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ndarray::array![[re(s), re(s)], [re(s), re(-s)]]
    }

    pub fn d_matrix(xi: Complex64) -> CMat {
        ndarray::array![[re(1.0), re(0.0)], [re(0.0), xi]]
    }

    pub fn pauli_x() -> CMat {
        ndarray::array![[re(0.0), re(1.0)], [re(1.0), re(0.0)]]
    }

    pub fn pauli_y() -> CMat {
        ndarray::array![[re(0.0), -I], [I, re(0.0)]]
    }

    pub fn pauli_z() -> CMat {
        ndarray::array![[re(1.0), re(0.0)], [re(0.0), re(-1.0)]]
    }

    /// tau = diag(1, i); tau^2 = sigma_z.
    pub fn tau() -> CMat {
        ndarray::array![[re(1.0), re(0.0)], [re(0.0), I]]
    }

    pub fn v0() -> [Complex64; 2] {
        [re(1.0), re(0.0)]
    }

    pub fn v1() -> [Complex64; 2] {
        [re(0.0), re(1.0)]
    }
}

/// Coefficients of the two w_- blocks (even sector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvenCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

/// Coefficients of the two w_+ blocks (odd sector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

/// The gauge-transformed operator, stored as four 4x4 blocks indexed by the
/// first-space pair (i1, j1).  Normalised so that the closed-form block
/// coefficients are the t-polynomials a = 1 - t0 t1 + t2 t3 + t0 t1 t2 t3
/// and friends (twice the bare similarity transform of R).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockL {
    pub blocks: [[CMat; 2]; 2],
    pub even: EvenCoeffs,
    pub odd: OddCoeffs,
    pub xi: Complex64,
}

impl BlockL {
    pub fn assemble(&self) -> CMat {
        let mut out: CMat = Array2::zeros((8, 8));
        for (bi, row) in self.blocks.iter().enumerate() {
            for (bj, blk) in row.iter().enumerate() {
                for r in 0..4 {
                    for c in 0..4 {
                        out[[bi * 4 + r, bj * 4 + c]] = blk[[r, c]];
                    }
                }
            }
        }
        out
    }

    /// Free-fermion defect w1 w2 + w3 w4 - w5 w6 - w7 w8 of one block.
    pub fn ffm_defect(block: &CMat) -> Complex64 {
        block[[0, 0]] * block[[3, 3]] + block[[1, 1]] * block[[2, 2]]
            - block[[1, 2]] * block[[2, 1]]
            - block[[0, 3]] * block[[3, 0]]
    }

    /// Worst free-fermion defect over the four blocks, each normalised to
    /// unit max entry (the defect is quadratic in the entries).
    pub fn worst_ffm_defect(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|b| {
                let m = max_abs(b);
                if m == 0.0 {
                    0.0
                } else {
                    Self::ffm_defect(b).norm() / (m * m)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Residuals of ab = a'b', cd = c'd', a^2+b^2-c^2-d^2 = 0 and the primed
    /// analogue, normalised by the squared magnitude of the largest
    /// coefficient.
    pub fn abcd_residuals(&self) -> [f64; 4] {
        let (e, o) = (&self.even, &self.odd);
        let s = [e.a, e.b, e.c, e.d, o.a, o.b, o.c, o.d]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        let s2 = s * s;
        [
            (e.a * e.b - o.a * o.b).norm() / s2,
            (e.c * e.d - o.c * o.d).norm() / s2,
            (e.a * e.a + e.b * e.b - e.c * e.c - e.d * e.d).norm() / s2,
            (o.a * o.a + o.b * o.b - o.c * o.c - o.d * o.d).norm() / s2,
        ]
    }
}

pub fn even_coeffs(t: [Complex64; 4]) -> EvenCoeffs {
    let [t0, t1, t2, t3] = t;
    let q = t0 * t1 * t2 * t3;
    EvenCoeffs {
        a: re(1.0) - t0 * t1 + t2 * t3 + q,
        b: re(1.0) + t0 * t1 - t2 * t3 + q,
        c: re(1.0) + t0 * t1 + t2 * t3 - q,
        d: re(1.0) - t0 * t1 - t2 * t3 - q,
    }
}

pub fn odd_coeffs(t: [Complex64; 4]) -> OddCoeffs {
    let [t0, t1, t2, t3] = t;
    OddCoeffs {
        a: -t1 * t2 - t0 * t3 + I * t0 * t2 + I * t1 * t3,
        b: -t1 * t2 - t0 * t3 - I * t0 * t2 - I * t1 * t3,
        c: -t1 * t2 + t0 * t3 + I * t0 * t2 - I * t1 * t3,
        d: -t1 * t2 + t0 * t3 - I * t0 * t2 + I * t1 * t3,
    }
}

/// Assemble the four blocks from the sector coefficients and xi.
pub fn blocks_from_coeffs(even: EvenCoeffs, odd: OddCoeffs, xi: Complex64) -> [[CMat; 2]; 2] {
    let z = re(0.0);
    let (a, b, c, d) = (even.a, even.b, even.c, even.d);
    let (ap, bp, cp, dp) = (odd.a, odd.b, odd.c, odd.d);
    let xi_inv = re(1.0) / xi;
    let l00 = ndarray::array![[a, z, z, d], [z, b, c, z], [z, c, b, z], [d, z, z, a]];
    let l11 = ndarray::array![[b, z, z, -c], [z, a, -d, z], [z, -d, a, z], [-c, z, z, b]];
    let l01 = ndarray::array![
        [-ap * xi_inv, z, z, -dp * xi_inv],
        [z, -bp * xi_inv, -cp * xi_inv, z],
        [z, cp * xi_inv, bp * xi_inv, z],
        [dp * xi_inv, z, z, ap * xi_inv]
    ];
    let l10 = ndarray::array![
        [-bp * xi, z, z, cp * xi],
        [z, -ap * xi, dp * xi, z],
        [z, -dp * xi, ap * xi, z],
        [-cp * xi, z, z, bp * xi]
    ];
    [[l00, l01], [l10, l11]]
}

/// Build L from a triangle and a gauge parameter: conjugate R by
/// D(xi) x F x F (times two, matching the closed-form normalisation) and
/// check the result against the t-polynomial closed forms entrywise.
pub fn build_l(tri: &SphericalTriangle, xi: Complex64) -> Result<BlockL> {
    if xi.norm() == 0.0 {
        return Err(Error::ZeroGauge);
    }
    let t = [re(tri.t[0]), re(tri.t[1]), re(tri.t[2]), re(tri.t[3])];
    build_l_from_t(t, xi)
}

pub fn build_l_from_t(t: [Complex64; 4], xi: Complex64) -> Result<BlockL> {
    if xi.norm() == 0.0 {
        return Err(Error::ZeroGauge);
    }
    let f = gauge::hadamard();
    let g = kron(&kron(&gauge::d_matrix(xi), &f), &f);
    let g_inv = kron(&kron(&gauge::d_matrix(re(1.0) / xi), &f), &f);
    let r8 = build_r_from_t(t).mat;
    let conj = g.dot(&r8).dot(&g_inv).mapv(|z| 2.0 * z);

    let even = even_coeffs(t);
    let odd = odd_coeffs(t);
    let blocks = blocks_from_coeffs(even, odd, xi);
    let out = BlockL {
        blocks,
        even,
        odd,
        xi,
    };
    let closed = out.assemble();
    let resid = max_abs(&(&closed - &conj));
    let scale = max_abs(&closed).max(1.0);
    if resid > 1e-11 * scale {
        return Err(Error::CrossRoute {
            what: "conjugation vs closed-form L blocks",
            residual: resid,
        });
    }
    Ok(out)
}

/// Partial transpose of an 8x8 operator in the given subset of spaces
/// (0-based).
pub fn partial_transpose(m: &CMat, spaces: &[usize]) -> CMat {
    let mut out: CMat = Array2::zeros((8, 8));
    for r in 0..8usize {
        let rb = [(r >> 2) & 1, (r >> 1) & 1, r & 1];
        for c in 0..8usize {
            let cb = [(c >> 2) & 1, (c >> 1) & 1, c & 1];
            let mut nr = rb;
            let mut nc = cb;
            for &s in spaces {
                nr[s] = cb[s];
                nc[s] = rb[s];
            }
            out[[nr[0] * 4 + nr[1] * 2 + nr[2], nc[0] * 4 + nc[1] * 2 + nc[2]]] = m[[r, c]];
        }
    }
    out
}

/// Permutation operator swapping spaces 1 and 3.
pub fn p13() -> CMat {
    let mut out: CMat = Array2::zeros((8, 8));
    for i in 0..8usize {
        let b = [(i >> 2) & 1, (i >> 1) & 1, i & 1];
        out[[b[2] * 4 + b[1] * 2 + b[0], i]] = re(1.0);
    }
    out
}

/// Max-abs residuals of the two spatial-symmetry generator identities.
pub fn check_symmetry(tri: &SphericalTriangle) -> Result<(f64, f64)> {
    let pi = std::f64::consts::PI;
    let th = tri.theta;
    let r = build_r(tri).mat;

    // R(pi-t1, pi-t2, t3) = (sy x sy x sz) R^{t1 t2} (sy x sy x sz)
    let partner1 = SphericalTriangle::from_angles([pi - th[0], pi - th[1], th[2]])?;
    let lhs1 = build_r(&partner1).mat;
    let q = kron(
        &kron(&gauge::pauli_y(), &gauge::pauli_y()),
        &gauge::pauli_z(),
    );
    let rhs1 = q.dot(&partial_transpose(&r, &[0, 1])).dot(&q);
    let res1 = max_abs(&(&lhs1 - &rhs1));

    // P13 R^{t1t2t3}(t3,t2,t1) P13 = (tau x tau x tau) R (tau x tau x tau)^-1
    let partner2 = SphericalTriangle::from_angles([th[2], th[1], th[0]])?;
    let p = p13();
    let lhs2 = p.dot(&build_r(&partner2).mat.t().to_owned()).dot(&p);
    let tau3 = kron(&kron(&gauge::tau(), &gauge::tau()), &gauge::tau());
    let tau_inv = gauge::d_matrix(-I); // diag(1, -i)
    let tau3_inv = kron(&kron(&tau_inv, &tau_inv), &tau_inv);
    let rhs2 = tau3.dot(&r).dot(&tau3_inv);
    let res2 = max_abs(&(&lhs2 - &rhs2));

    Ok((res1, res2))
}
