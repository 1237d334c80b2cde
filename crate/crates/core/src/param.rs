//! Elliptic parameterisation of the vertex weights: modulus extraction,
//! inversion of the angle-parameter map with branch selection, the
//! f/g/h/U/V function family, the weight factors rho+- and xi, the
//! free-fermion R-matrix, the uniform block form of L, the meromorphic
//! S-operator, and the Korepanov variable map.

use num_complex::Complex64;

use crate::elliptic::EllipticContext;
use crate::error::{Error, Result};
use crate::geometry::SphericalTriangle;
use crate::mat::{kron, CMat};
use crate::weights::{gauge, BlockL, EvenCoeffs, OddCoeffs, VertexOperator};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Elliptic modulus of a vertex together with the inclination angle phi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusResult {
    pub k: f64,
    pub phi: f64,
    pub ctx: EllipticContext,
}

/// k = (1 - sin phi)/(1 + sin phi) with
/// sin phi = 2 sqrt(sin a0 sin a1 sin a2 sin a3) / sin theta1,
/// cross-checked against the equivalent form sin theta2 sin a3.
pub fn modulus_from_vertex(tri: &SphericalTriangle) -> Result<ModulusResult> {
    let prod: f64 = tri.alpha.iter().map(|a| a.sin()).product();
    let sin_phi = 2.0 * prod.sqrt() / tri.theta[0].sin();
    let alt = tri.theta[1].sin() * tri.sides[2].sin();
    if (sin_phi - alt).abs() > 1e-11 {
        return Err(Error::CrossRoute {
            what: "two closed forms of sin(phi)",
            residual: (sin_phi - alt).abs(),
        });
    }
    if !(sin_phi > 0.0 && sin_phi <= 1.0 + 1e-12) {
        return Err(Error::InclinationRange(sin_phi));
    }
    let sin_phi = sin_phi.min(1.0);
    let mut k = ((1.0 - sin_phi) / (1.0 + sin_phi)).max(0.0);
    if k < 1e-14 {
        k = 0.0;
    }
    Ok(ModulusResult {
        k,
        phi: sin_phi.asin(),
        ctx: EllipticContext::new(k)?,
    })
}

/// f(w) = k'^2 sn w / ((cn w + dn w)(k cn w + dn w)).
pub fn f_fn(w: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let j = ctx.jacobi(w)?;
    let d1 = j.cn + j.dn;
    let d2 = ctx.k * j.cn + j.dn;
    ctx.guard(w, d1)?;
    ctx.guard(w, d2)?;
    Ok(re(ctx.k_prime * ctx.k_prime) * j.sn / (d1 * d2))
}

/// g(x,y) = k'^2 sd(x-y) sd(x+y) / (cn(x-y) cn(x+y)).
pub fn g_fn(x: Complex64, y: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let jm = ctx.jacobi(x - y)?;
    let jp = ctx.jacobi(x + y)?;
    ctx.guard(x - y, jm.cn * jm.dn)?;
    ctx.guard(x + y, jp.cn * jp.dn)?;
    let kp2 = ctx.k_prime * ctx.k_prime;
    Ok(re(kp2) * (jm.sn / jm.dn) * (jp.sn / jp.dn) / (jm.cn * jp.cn))
}

/// h(x,y) = sqrt(cd(x-y) sn(x-y) / (cd(x+y) sn(x+y))), principal branch.
pub fn h_fn(x: Complex64, y: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let jm = ctx.jacobi(x - y)?;
    let jp = ctx.jacobi(x + y)?;
    ctx.guard(x - y, jm.dn)?;
    ctx.guard(x + y, jp.dn)?;
    let num = (jm.cn / jm.dn) * jm.sn;
    let den = (jp.cn / jp.dn) * jp.sn;
    ctx.guard(x + y, den)?;
    Ok((num / den).sqrt())
}

/// U(x,y,z) = sd(x+y) cn(x-z) / (cn(x-y) sd(x+z)).
pub fn u_fn(x: Complex64, y: Complex64, z: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let jxy_p = ctx.jacobi(x + y)?;
    let jxz_m = ctx.jacobi(x - z)?;
    let jxy_m = ctx.jacobi(x - y)?;
    let jxz_p = ctx.jacobi(x + z)?;
    ctx.guard(x + y, jxy_p.dn)?;
    ctx.guard(x + z, jxz_p.dn)?;
    let den = jxy_m.cn * (jxz_p.sn / jxz_p.dn);
    ctx.guard(x + z, den)?;
    Ok((jxy_p.sn / jxy_p.dn) * jxz_m.cn / den)
}

/// V(x,y,z) = -k'^2 sd(y-x) sd(y+z) / (cn(y+x) cn(y-z)).
pub fn v_fn(x: Complex64, y: Complex64, z: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let jyx_m = ctx.jacobi(y - x)?;
    let jyz_p = ctx.jacobi(y + z)?;
    let jyx_p = ctx.jacobi(y + x)?;
    let jyz_m = ctx.jacobi(y - z)?;
    ctx.guard(y - x, jyx_m.dn)?;
    ctx.guard(y + z, jyz_p.dn)?;
    let den = jyx_p.cn * jyz_m.cn;
    ctx.guard(y + x, den)?;
    let kp2 = ctx.k_prime * ctx.k_prime;
    Ok(re(-kp2) * (jyx_m.sn / jyx_m.dn) * (jyz_p.sn / jyz_p.dn) / den)
}

/// The transcendental kernel of the angle-parameter map:
/// E(w) = (1 + sn 2w)(1 - k sn 2w) / (cn 2w dn 2w).
/// The angle relations read exp(-i theta2) = -E(w1), exp(i theta3) = E(w2).
pub fn angle_kernel(w: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let j = ctx.jacobi(w + w)?;
    let den = j.cn * j.dn;
    ctx.guard(w, den)?;
    Ok((re(1.0) + j.sn) * (re(1.0) - re(ctx.k) * j.sn) / den)
}

/// A solved parameter pair for one vertex, canonicalised so that the
/// difference w1 - w2 has real part in [0, 2K); when the raw difference is
/// negative, w2 is replaced by w2 - 2K (the kernel has real period 2K, so
/// the defining relations are untouched).
#[derive(Debug, Clone, PartialEq)]
pub struct WPair {
    pub w1: Complex64,
    pub w2: Complex64,
    pub w_minus: Complex64,
    pub w_plus: Complex64,
    /// true when the 2K shift of w2 was applied
    pub shifted: bool,
    /// exp(i theta1) of all four candidate solutions, for diagnostics
    pub candidates: Vec<Complex64>,
}

impl WPair {
    /// Canonical pair from two rectangle solutions.
    pub fn canonical(w1: Complex64, w2: Complex64, ctx: &EllipticContext) -> Self {
        let shifted = (w1 - w2).re < 0.0;
        let w2_eff = if shifted {
            w2 - re(2.0 * ctx.big_k)
        } else {
            w2
        };
        Self {
            w1,
            w2,
            w_minus: w1 - w2_eff,
            w_plus: w1 + w2_eff,
            shifted,
            candidates: Vec::new(),
        }
    }

    /// Raw pair: w_minus = u - w, w_plus = u + w with no canonicalisation.
    /// This is the convention of the algebra-level identities where the
    /// arguments are free parameters rather than rectangle representatives.
    pub fn raw(u: Complex64, w: Complex64) -> Self {
        Self {
            w1: u,
            w2: w,
            w_minus: u - w,
            w_plus: u + w,
            shifted: false,
            candidates: Vec::new(),
        }
    }
}

const NEWTON_GRID: usize = 8;
const NEWTON_MAX_ITER: usize = 80;
const NEWTON_TOL: f64 = 1e-12;

/// All solutions of E(w) = target in [0, 2K) x [0, K'/2), by damped Newton
/// iteration multi-started on a grid of cell centres.
fn kernel_solutions(target: Complex64, ctx: &EllipticContext) -> Result<Vec<Complex64>> {
    if !ctx.big_k_prime.is_finite() {
        return Err(Error::NoConvergence(
            "periodicity rectangle degenerates at k = 0".to_string(),
        ));
    }
    let two_k = 2.0 * ctx.big_k;
    let half_kp = 0.5 * ctx.big_k_prime;
    let h = 1e-7;
    let mut sols: Vec<Complex64> = Vec::new();
    for ix in 0..NEWTON_GRID {
        for iy in 0..NEWTON_GRID {
            let mut w = Complex64::new(
                (ix as f64 + 0.5) / NEWTON_GRID as f64 * two_k,
                (iy as f64 + 0.5) / NEWTON_GRID as f64 * half_kp,
            );
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let fval = match angle_kernel(w, ctx) {
                    Ok(v) => v - target,
                    Err(_) => break,
                };
                if fval.norm() < NEWTON_TOL {
                    converged = true;
                    break;
                }
                let d = match (angle_kernel(w + re(h), ctx), angle_kernel(w - re(h), ctx)) {
                    (Ok(p), Ok(m)) => (p - m) / re(2.0 * h),
                    _ => break,
                };
                if d.norm() == 0.0 {
                    break;
                }
                let mut step = fval / d;
                let cap = 0.5 * ctx.big_k;
                if step.norm() > cap {
                    step *= re(cap / step.norm());
                }
                w -= step;
            }
            if !converged {
                continue;
            }
            // reduce into the rectangle; E has real period 2K
            let mut x = w.re.rem_euclid(two_k);
            if x >= two_k {
                x -= two_k;
            }
            let y = w.im;
            if !(-1e-9..half_kp - 1e-12).contains(&y) {
                continue;
            }
            let cand = Complex64::new(x, y.max(0.0));
            if let Ok(v) = angle_kernel(cand, ctx) {
                if (v - target).norm() > 1e-9 {
                    continue;
                }
                if !sols.iter().any(|s| (s - cand).norm() < 1e-7) {
                    sols.push(cand);
                }
            }
        }
    }
    sols.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
    Ok(sols)
}

/// Invert the angle relations for one vertex: solve for w1 and w2 in the
/// periodicity rectangle and select, among the four candidate pairs, the
/// unique one whose exp(i theta1) = cd(2 w2)/cd(2 w1) reproduces the input
/// theta1 (comparison in the exponential avoids any 2 pi ambiguity).
pub fn invert_angles(tri: &SphericalTriangle, modulus: &ModulusResult) -> Result<WPair> {
    let ctx = &modulus.ctx;
    let target1 = -(-I * re(tri.theta[1])).exp(); // -exp(-i theta2)
    let target2 = (I * re(tri.theta[2])).exp(); // exp(+i theta3)
    let sols1 = kernel_solutions(target1, ctx)?;
    let sols2 = kernel_solutions(target2, ctx)?;
    if sols1.len() != 2 || sols2.len() != 2 {
        return Err(Error::NoConvergence(format!(
            "expected 2 rectangle solutions per relation, found {} and {}",
            sols1.len(),
            sols2.len()
        )));
    }
    let want = (I * re(tri.theta[0])).exp();
    let mut candidates = Vec::with_capacity(4);
    let mut hit: Option<(Complex64, Complex64)> = None;
    let mut hits = 0;
    for &w1 in &sols1 {
        for &w2 in &sols2 {
            let e1 = ctx.cd(w2 + w2)? / ctx.cd(w1 + w1)?;
            candidates.push(e1);
            if (e1 - want).norm() < 1e-9 {
                hits += 1;
                hit = Some((w1, w2));
            }
        }
    }
    if hits != 1 {
        return Err(Error::AmbiguousBranch { candidates: hits });
    }
    let (w1, w2) = hit.unwrap();
    let mut pair = WPair::canonical(w1, w2, ctx);
    pair.candidates = candidates;
    Ok(pair)
}

/// t-values from the solved pair, as principal square roots of the
/// i-dressed f-products; for a real-angle vertex these land on the positive
/// real axis and reproduce the geometric t's.
pub fn t_from_w(pair: &WPair, ctx: &EllipticContext) -> Result<[Complex64; 4]> {
    let big_k = re(ctx.big_k);
    let fm = f_fn(pair.w_minus, ctx)?;
    let fkm = f_fn(big_k - pair.w_minus, ctx)?;
    let fp = f_fn(pair.w_plus, ctx)?;
    let fkp = f_fn(big_k - pair.w_plus, ctx)?;
    ctx.guard(pair.w_plus, fp)?;
    ctx.guard(big_k - pair.w_plus, fkp)?;
    Ok([
        (I * fm * fkp).sqrt(),
        (-I * fm / fkp).sqrt(),
        (I * fkm / fp).sqrt(),
        (-I * fkm * fp).sqrt(),
    ])
}

/// rho- as a closed meromorphic form of w_-.
pub fn rho_minus_closed(wm: Complex64, ctx: &EllipticContext) -> Result<Complex64> {
    let j = ctx.jacobi(wm)?;
    let one = re(1.0);
    let den = j.cn * (j.cn * j.dn + (one - j.sn) * (one + re(ctx.k) * j.sn));
    ctx.guard(wm, den)?;
    Ok(re(4.0) * (one - j.sn) * j.dn / den)
}

/// The scalar factors entering the uniform block form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFactors {
    pub rho_minus: Complex64,
    pub rho_plus: Complex64,
    pub xi: Complex64,
    /// sign such that xi = sign * h(w1, w2) (principal branch), recorded
    /// for cross-checks; the closed-form square root leaves it implicit.
    pub h_sign: f64,
}

impl WeightFactors {
    /// Factors from the t-products of the pair.  xi is the exact ratio
    /// -rho+/rho-, so no independent square-root branch enters downstream.
    pub fn from_pair(pair: &WPair, ctx: &EllipticContext) -> Result<Self> {
        let t = t_from_w(pair, ctx)?;
        let rho_minus = re(1.0) + t[0] * t[1] + t[2] * t[3] - t[0] * t[1] * t[2] * t[3];
        let rho_plus = t[0] * t[3] - t[1] * t[2] + I * (t[0] * t[2] - t[1] * t[3]);
        ctx.guard(pair.w_minus, rho_minus)?;
        let xi = -rho_plus / rho_minus;
        let h_sign = match h_fn(pair.w1, pair.w2, ctx) {
            Ok(h) if (xi - h).norm() <= (xi + h).norm() => 1.0,
            Ok(_) => -1.0,
            Err(_) => 0.0,
        };
        Ok(Self {
            rho_minus,
            rho_plus,
            xi,
            h_sign,
        })
    }
}

/// The symmetric free-fermion R-matrix: entries cd w, sn w, 1 and
/// k cd w sn w in the eight-vertex pattern.
pub fn build_rffm(w: Complex64, ctx: &EllipticContext) -> Result<CMat> {
    let j = ctx.jacobi(w)?;
    ctx.guard(w, j.dn)?;
    let cd = j.cn / j.dn;
    let sn = j.sn;
    let d = re(ctx.k) * cd * sn;
    let z = re(0.0);
    let one = re(1.0);
    Ok(ndarray::array![
        [cd, z, z, d],
        [z, sn, one, z],
        [z, one, sn, z],
        [d, z, z, cd]
    ])
}

/// The four blocks of L in the uniform elliptic form:
///   L00 = rho- R(w-),                L01 = -rho+ xi^-1 sz(2) R(w+),
///   L10 = i rho+ xi sx(2) R(w+) sy(2),  L11 = rho- sy(2) R(w-) sy(2),
/// with the Pauli dressings acting in the first factor of the 4x4 space.
pub fn build_uniform_l(pair: &WPair, ctx: &EllipticContext) -> Result<BlockL> {
    let wf = WeightFactors::from_pair(pair, ctx)?;
    let r_minus = build_rffm(pair.w_minus, ctx)?;
    let r_plus = build_rffm(pair.w_plus, ctx)?;
    let id2 = crate::mat::identity(2);
    let sx2 = kron(&gauge::pauli_x(), &id2);
    let sy2 = kron(&gauge::pauli_y(), &id2);
    let sz2 = kron(&gauge::pauli_z(), &id2);

    // xi = -rho+/rho- exactly, so -rho+ xi^-1 = rho- and
    // i rho+ xi = -i rho+^2/rho-; the simplified forms stay finite when
    // rho+ vanishes (coincident arguments).
    let scale = |m: &CMat, s: Complex64| -> CMat { m.mapv(|z| s * z) };
    let l00 = scale(&r_minus, wf.rho_minus);
    let l01 = scale(&sz2.dot(&r_plus), wf.rho_minus);
    let l10 = scale(
        &sx2.dot(&r_plus).dot(&sy2),
        -I * wf.rho_plus * wf.rho_plus / wf.rho_minus,
    );
    let l11 = scale(&sy2.dot(&r_minus).dot(&sy2), wf.rho_minus);

    // sector coefficients for reporting and condition checks
    let jm = ctx.jacobi(pair.w_minus)?;
    let jp = ctx.jacobi(pair.w_plus)?;
    ctx.guard(pair.w_minus, jm.dn)?;
    ctx.guard(pair.w_plus, jp.dn)?;
    let cdm = jm.cn / jm.dn;
    let cdp = jp.cn / jp.dn;
    let even = EvenCoeffs {
        a: wf.rho_minus * cdm,
        b: wf.rho_minus * jm.sn,
        c: wf.rho_minus,
        d: wf.rho_minus * re(ctx.k) * cdm * jm.sn,
    };
    let odd = OddCoeffs {
        a: wf.rho_plus * cdp,
        b: wf.rho_plus * jp.sn,
        c: wf.rho_plus,
        d: wf.rho_plus * re(ctx.k) * cdp * jp.sn,
    };
    Ok(BlockL {
        blocks: [[l00, l01], [l10, l11]],
        even,
        odd,
        xi: wf.xi,
    })
}

/// The meromorphic S-operator: sixteen nonzero entries given by U and V
/// evaluations, unit entries on the parity-even diagonal quadruple.
pub fn build_cal_s(
    u1: Complex64,
    u2: Complex64,
    u3: Complex64,
    ctx: &EllipticContext,
) -> Result<VertexOperator> {
    let mut op = VertexOperator::zeros();
    let one = re(1.0);
    let mut put = |i: (usize, usize, usize), j: (usize, usize, usize), v: Complex64| {
        op.mat[[i.0 * 4 + i.1 * 2 + i.2, j.0 * 4 + j.1 * 2 + j.2]] = v;
    };
    put((0, 0, 0), (0, 0, 0), one);
    put((1, 1, 0), (1, 1, 0), one);
    put((1, 0, 1), (1, 0, 1), one);
    put((0, 1, 1), (0, 1, 1), one);

    put((0, 1, 0), (1, 0, 0), u_fn(u1, u2, u3, ctx)?);
    put((0, 1, 0), (0, 0, 1), u_fn(u3, u2, u1, ctx)?);
    put((1, 0, 0), (0, 0, 1), v_fn(u1, u2, u3, ctx)?);

    put((1, 0, 0), (0, 1, 0), u_fn(u1, -u2, -u3, ctx)?);
    put((0, 0, 1), (0, 1, 0), u_fn(u3, -u2, -u1, ctx)?);
    put((0, 0, 1), (1, 0, 0), v_fn(-u1, u2, -u3, ctx)?);

    put((1, 1, 1), (0, 0, 1), u_fn(u1, -u2, u3, ctx)?);
    put((1, 1, 1), (1, 0, 0), u_fn(u3, -u2, u1, ctx)?);
    put((1, 1, 1), (0, 1, 0), v_fn(u1, u2, -u3, ctx)?);

    put((0, 0, 1), (1, 1, 1), u_fn(u1, u2, -u3, ctx)?);
    put((1, 0, 0), (1, 1, 1), u_fn(u3, u2, -u1, ctx)?);
    put((0, 1, 0), (1, 1, 1), v_fn(-u1, u2, u3, ctx)?);
    Ok(op)
}

/// Korepanov's variables and the identities tying them to the angle map.
#[derive(Debug, Clone, PartialEq)]
pub struct KorepanovMap {
    pub varphi: [Complex64; 3],
    /// residuals of g(u_j, u_k) = tanh(varphi_j - varphi_k)
    pub g_residuals: [f64; 3],
    /// theta1 = 2i(phi2 - phi1), theta2 = pi + 2i(phi1 - phi3),
    /// theta3 = 2i(phi3 - phi2)
    pub theta: [Complex64; 3],
    /// residuals of the tan(theta/2) relations against g
    pub tan_residuals: [f64; 3],
}

pub fn korepanov_map(u: [Complex64; 3], ctx: &EllipticContext) -> Result<KorepanovMap> {
    let mut varphi = [re(0.0); 3];
    for (i, &ui) in u.iter().enumerate() {
        let cd2 = ctx.cd(ui + ui)?;
        let den = re(1.0) + cd2;
        ctx.guard(ui + ui, den)?;
        varphi[i] = ((re(1.0) - cd2) / den).atanh();
    }
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut g_residuals = [0.0; 3];
    for (n, &(j, k)) in pairs.iter().enumerate() {
        let g = g_fn(u[j], u[k], ctx)?;
        g_residuals[n] = (g - (varphi[j] - varphi[k]).tanh()).norm();
    }
    let two_i = re(2.0) * I;
    let theta = [
        two_i * (varphi[1] - varphi[0]),
        re(std::f64::consts::PI) + two_i * (varphi[0] - varphi[2]),
        two_i * (varphi[2] - varphi[1]),
    ];
    let tan_residuals = [
        ((theta[0] / re(2.0)).tan() + I * g_fn(u[0], u[1], ctx)?).norm(),
        ((theta[1] / re(2.0)).tan() - I / g_fn(u[0], u[2], ctx)?).norm(),
        ((theta[2] / re(2.0)).tan() + I * g_fn(u[1], u[2], ctx)?).norm(),
    ];
    Ok(KorepanovMap {
        varphi,
        g_residuals,
        theta,
        tan_residuals,
    })
}

/// Verify the stored pair against the defining angle relations of its
/// triangle; returns the worst residual of the three relations.
pub fn round_trip_residual(
    tri: &SphericalTriangle,
    pair: &WPair,
    ctx: &EllipticContext,
) -> Result<f64> {
    let e_t2 = -angle_kernel(pair.w1, ctx)?;
    let e_t3 = angle_kernel(pair.w2, ctx)?;
    let e_t1 = ctx.cd(pair.w2 + pair.w2)? / ctx.cd(pair.w1 + pair.w1)?;
    let r1 = (e_t1 - (I * re(tri.theta[0])).exp()).norm();
    let r2 = (e_t2 - (-I * re(tri.theta[1])).exp()).norm();
    let r3 = (e_t3 - (I * re(tri.theta[2])).exp()).norm();
    Ok(r1.max(r2).max(r3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SphericalTriangle;

    const PI: f64 = std::f64::consts::PI;

    fn c(re_: f64, im: f64) -> Complex64 {
        Complex64::new(re_, im)
    }

    #[test]
    fn modulus_right_angle_is_zero() {
        let tri = SphericalTriangle::from_angles([PI / 2.0; 3]).unwrap();
        let m = modulus_from_vertex(&tri).unwrap();
        assert!(m.k.abs() < 1e-12);
        assert!((m.phi - PI / 2.0).abs() < 1e-7);
    }

    #[test]
    fn modulus_equilateral_obtuse() {
        let tri = SphericalTriangle::from_angles([2.0 * PI / 3.0; 3]).unwrap();
        let m = modulus_from_vertex(&tri).unwrap();
        // sin(phi) = sqrt(2/3), k = (1 - sin phi)/(1 + sin phi)
        assert!((m.phi.sin() - (2.0f64 / 3.0).sqrt()).abs() < 1e-13);
        assert!((m.k - 0.101_020_514_433_643_8).abs() < 1e-13);
    }

    #[test]
    fn f_values() {
        let ctx = EllipticContext::new(0.6).unwrap();
        // f(0) = 0
        assert!(f_fn(c(0.0, 0.0), &ctx).unwrap().norm() < 1e-14);
        // f(K) = k'^2/(k' k') = 1
        assert!((f_fn(c(ctx.big_k, 0.0), &ctx).unwrap() - 1.0).norm() < 1e-13);
        // frozen reference values
        assert!((f_fn(c(0.9, 0.0), &ctx).unwrap() - 0.2466465358871883).norm() < 1e-13);
        assert!(
            (f_fn(c(0.9, 0.1), &ctx).unwrap()
                - c(0.243_588_575_302_168_4, 0.043_524_087_948_572_33))
            .norm()
                < 1e-13
        );
    }

    #[test]
    fn u_fn_collapses_at_equal_arguments() {
        let ctx = EllipticContext::new(0.6).unwrap();
        let (x, z) = (c(0.4, 0.1), c(0.9, 0.05));
        // U(x, y, z) at z = y: sd(x+y) cn(x-y) / (cn(x-y) sd(x+y)) = 1
        let v = u_fn(x, z, z, &ctx).unwrap();
        assert!((v - 1.0).norm() < 1e-12);
    }

    #[test]
    fn kernel_reference_value() {
        let ctx = EllipticContext::new(0.6).unwrap();
        let v = angle_kernel(c(0.7, 0.3), &ctx).unwrap();
        assert!((v - c(0.996_447_652_171_464_4, 1.412_751_737_647_261_6)).norm() < 1e-12);
    }

    #[test]
    fn kernel_solutions_pair_up() {
        // E(w) and E(iK'/2 - w) are reciprocal, so unimodular targets have
        // exactly two rectangle solutions.
        let ctx = EllipticContext::new(0.3).unwrap();
        let target = -(-I * re(1.1)).exp();
        let sols = kernel_solutions(target, &ctx).unwrap();
        assert_eq!(sols.len(), 2);
        for w in sols {
            assert!((angle_kernel(w, &ctx).unwrap() - target).norm() < 1e-9);
            assert!(w.re >= 0.0 && w.re < 2.0 * ctx.big_k);
            assert!(w.im >= 0.0 && w.im < 0.5 * ctx.big_k_prime);
        }
    }

    #[test]
    fn invert_selects_unique_branch_and_round_trips() {
        let tri = SphericalTriangle::from_angles([2.0 * PI / 3.0; 3]).unwrap();
        let m = modulus_from_vertex(&tri).unwrap();
        let pair = invert_angles(&tri, &m).unwrap();
        assert_eq!(pair.candidates.len(), 4);
        assert!(round_trip_residual(&tri, &pair, &m.ctx).unwrap() < 1e-10);
        // the four candidates produce {+-theta1, +-theta1'}
        let want = (I * re(tri.theta[0])).exp();
        let conj = want.conj();
        let matched = pair
            .candidates
            .iter()
            .filter(|e| (*e - want).norm() < 1e-9)
            .count();
        let conj_matched = pair
            .candidates
            .iter()
            .filter(|e| (*e - conj).norm() < 1e-9)
            .count();
        assert_eq!(matched, 1);
        assert_eq!(conj_matched, 1);
    }

    #[test]
    fn t_from_w_matches_geometric_values() {
        for th in [[2.0 * PI / 3.0; 3], [1.9, 1.3, 1.2], [2.2, 0.9, 1.4]] {
            let tri = SphericalTriangle::from_angles(th).unwrap();
            let m = modulus_from_vertex(&tri).unwrap();
            let pair = invert_angles(&tri, &m).unwrap();
            let t = t_from_w(&pair, &m.ctx).unwrap();
            for (i, (got, want)) in t.iter().zip(tri.t.iter()).enumerate() {
                assert!(
                    (got - want).norm() < 1e-10,
                    "theta={th:?} i={i}: {got} vs {want}"
                );
            }
            // t0 t1 = f(w-), t2 t3 = f(K - w-)
            let fm = f_fn(pair.w_minus, &m.ctx).unwrap();
            let fkm = f_fn(re(m.ctx.big_k) - pair.w_minus, &m.ctx).unwrap();
            assert!((t[0] * t[1] - fm).norm() < 1e-11);
            assert!((t[2] * t[3] - fkm).norm() < 1e-11);
        }
    }

    #[test]
    fn weight_factors_consistency() {
        let tri = SphericalTriangle::from_angles([1.9, 1.3, 1.2]).unwrap();
        let m = modulus_from_vertex(&tri).unwrap();
        let pair = invert_angles(&tri, &m).unwrap();
        let wf = WeightFactors::from_pair(&pair, &m.ctx).unwrap();
        // xi rho- + rho+ = 0 by construction
        assert!((wf.xi * wf.rho_minus + wf.rho_plus).norm() < 1e-12);
        // rho- closed form agrees with the t-product form
        let rm = rho_minus_closed(pair.w_minus, &m.ctx).unwrap();
        assert!((rm - wf.rho_minus).norm() < 1e-10);
        // xi = +- h(w1, w2) with the sign recorded
        assert!(wf.h_sign != 0.0);
        let h = h_fn(pair.w1, pair.w2, &m.ctx).unwrap();
        assert!((wf.xi - re(wf.h_sign) * h).norm() < 1e-10);
        // geometric t-polynomial rho- also agrees
        let t = &tri.t;
        let rm_geo = 1.0 + t[0] * t[1] + t[2] * t[3] - t[0] * t[1] * t[2] * t[3];
        assert!((wf.rho_minus - rm_geo).norm() < 1e-10);
    }

    #[test]
    fn rffm_structure() {
        let ctx = EllipticContext::new(0.6).unwrap();
        // w = 0: cd = 1, sn = 0
        let r0 = build_rffm(c(0.0, 0.0), &ctx).unwrap();
        assert!((r0[[0, 0]] - 1.0).norm() < 1e-14);
        assert!(r0[[1, 1]].norm() < 1e-14);
        assert!((r0[[1, 2]] - 1.0).norm() < 1e-14);
        assert!(r0[[0, 3]].norm() < 1e-14);
        // free-fermion combination vanishes identically
        for w in [c(0.3, 0.1), c(1.2, 0.4), c(0.9, 0.0)] {
            let r = build_rffm(w, &ctx).unwrap();
            let defect = r[[0, 0]] * r[[3, 3]] + r[[1, 1]] * r[[2, 2]]
                - r[[1, 2]] * r[[2, 1]]
                - r[[0, 3]] * r[[3, 0]];
            assert!(defect.norm() < 1e-12);
        }
        // k = 0 reduces to the trigonometric matrix
        let ctx0 = EllipticContext::new(0.0).unwrap();
        let r = build_rffm(c(0.7, 0.0), &ctx0).unwrap();
        assert!((r[[0, 0]] - 0.7f64.cos()).norm() < 1e-14);
        assert!((r[[1, 1]] - 0.7f64.sin()).norm() < 1e-14);
        assert!(r[[0, 3]].norm() < 1e-14);
    }

    #[test]
    fn uniform_l_first_block_is_rho_minus_rffm() {
        let tri = SphericalTriangle::from_angles([2.2, 0.9, 1.4]).unwrap();
        let m = modulus_from_vertex(&tri).unwrap();
        let pair = invert_angles(&tri, &m).unwrap();
        let wf = WeightFactors::from_pair(&pair, &m.ctx).unwrap();
        let l = build_uniform_l(&pair, &m.ctx).unwrap();
        let r = build_rffm(pair.w_minus, &m.ctx).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((l.blocks[0][0][[i, j]] - wf.rho_minus * r[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cal_s_matches_the_gauge_route() {
        // D(xi1) x D(xi2) x D(xi3) conjugation of the static operator
        // reproduces the meromorphic table entrywise on a real prism.
        let cfg = crate::geometry::random_prism(5).unwrap();
        let ctx = EllipticContext::new(cfg.k).unwrap();
        let [u1, u2, u3] = cfg.u;
        let cal_s = build_cal_s(u1, u2, u3, &ctx).unwrap();
        let xis: Vec<Complex64> = cfg
            .wpairs
            .iter()
            .map(|p| WeightFactors::from_pair(p, &ctx).unwrap().xi)
            .collect();
        let s0 = crate::weights::build_s([cfg.theta6[0], cfg.theta6[1], cfg.theta6[2]]).unwrap();
        let d = crate::mat::kron(
            &crate::mat::kron(&gauge::d_matrix(xis[0]), &gauge::d_matrix(xis[1])),
            &gauge::d_matrix(xis[2]),
        );
        let d_inv = crate::mat::kron(
            &crate::mat::kron(
                &gauge::d_matrix(re(1.0) / xis[0]),
                &gauge::d_matrix(re(1.0) / xis[1]),
            ),
            &gauge::d_matrix(re(1.0) / xis[2]),
        );
        let conj = d.dot(&s0.mat).dot(&d_inv);
        let diff = crate::mat::max_abs(&(&cal_s.mat - &conj));
        assert!(diff < 1e-10, "gauge route disagreement {diff:e}");
        // the four unit entries are exactly 1
        for idx in [0usize, 6, 5, 3] {
            assert_eq!(cal_s.mat[[idx, idx]], re(1.0));
        }
        assert_eq!(cal_s.nonzero_count(), 16);
    }

    #[test]
    fn uniform_l_is_doubly_periodic() {
        // Meromorphy witness: every entry is an elliptic function of w1
        // with period lattice (4K, 2iK').
        let ctx = EllipticContext::new(0.6).unwrap();
        for (u, w) in [
            (c(0.83, 0.21), c(0.42, 0.13)),
            (c(0.61, 0.18), c(0.29, 0.07)),
        ] {
            let base = build_uniform_l(&WPair::raw(u, w), &ctx).unwrap().assemble();
            let four_k = build_uniform_l(&WPair::raw(u + re(4.0 * ctx.big_k), w), &ctx)
                .unwrap()
                .assemble();
            assert!(crate::mat::max_abs(&(&four_k - &base)) < 1e-10);
            let two_ikp = build_uniform_l(
                &WPair::raw(u + Complex64::new(0.0, 2.0 * ctx.big_k_prime), w),
                &ctx,
            )
            .unwrap()
            .assemble();
            assert!(crate::mat::max_abs(&(&two_ikp - &base)) < 1e-9);
        }
    }

    #[test]
    fn static_elliptic_angle_relations() {
        // The cd-ratio definitions of the fourth-parameter angles imply the
        // half-angle tangent forms through g.
        let ctx = EllipticContext::new(0.6).unwrap();
        let (u1, u2, u3, u4) = (
            re(0.21 * ctx.big_k),
            re(0.47 * ctx.big_k),
            re(0.33 * ctx.big_k),
            re(0.12 * ctx.big_k),
        );
        let cd2 = |u: Complex64| ctx.cd(u + u).unwrap();
        let theta4 = (-cd2(u1) / cd2(u4)).ln() / I;
        let theta5 = (cd2(u4) / cd2(u2)).ln() / I;
        let theta6 = (cd2(u4) / cd2(u3)).ln() / I;
        assert!(((theta4 / re(2.0)).tan() - I / g_fn(u1, u4, &ctx).unwrap()).norm() < 1e-10);
        assert!(((theta5 / re(2.0)).tan() + I * g_fn(u2, u4, &ctx).unwrap()).norm() < 1e-10);
        assert!(((theta6 / re(2.0)).tan() + I * g_fn(u3, u4, &ctx).unwrap()).norm() < 1e-10);
        let _ = (theta4, theta5, theta6);
    }

    #[test]
    fn korepanov_identities() {
        let ctx = EllipticContext::new(0.6).unwrap();
        let u = [c(0.35, 0.0), c(0.61, 0.0), c(0.22, 0.0)];
        let map = korepanov_map(u, &ctx).unwrap();
        for r in map.g_residuals.iter().chain(map.tan_residuals.iter()) {
            assert!(*r < 1e-10, "{r:e}");
        }
        // theta1 + theta2 + theta3 = pi exactly by telescoping
        let sum: Complex64 = map.theta.iter().sum();
        assert!((sum - re(PI)).norm() < 1e-12);
        // coincident arguments: u1 = u2 gives theta1 = 0
        let map2 = korepanov_map([u[0], u[0], u[2]], &ctx).unwrap();
        assert!(map2.theta[0].norm() < 1e-12);
    }
}
