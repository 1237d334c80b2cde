//! Complete elliptic integrals and Jacobi elliptic functions of complex
//! argument, real modulus 0 <= k < 1.
//!
//! The real-argument case is computed by the descending Landen
//! transformation seeded from the AGM sequence; complex arguments are split
//! as sn(x + iy, k) etc. in terms of real evaluations at modulus k and the
//! complementary modulus k'.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default threshold below which a denominator counts as a pole.
pub const DEFAULT_POLE_THRESHOLD: f64 = 1e-10;

const AGM_MAX_ITER: usize = 32;

/// Complete elliptic integral of the first kind, by AGM iteration.
pub fn complete_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::ModulusRange(k));
    }
    Ok(agm_quarter_period((1.0 - k * k).sqrt()))
}

/// K expressed through the complementary modulus: K = pi / (2 AGM(1, k')).
/// Passing the complement directly avoids the 1 - k^2 cancellation when the
/// modulus is close to 1 (needed for K' at small k).
fn agm_quarter_period(k_complement: f64) -> f64 {
    let mut a = 1.0f64;
    let mut b = k_complement;
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    std::f64::consts::FRAC_PI_2 / a
}

/// The three Jacobi functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub sn: Complex64,
    pub cn: Complex64,
    pub dn: Complex64,
}

/// Modulus k together with its complement and both quarter-periods.
///
/// `big_k_prime` is infinite at k = 0 (the trigonometric limit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticContext {
    pub k: f64,
    pub k_prime: f64,
    pub big_k: f64,
    pub big_k_prime: f64,
    pole_threshold: f64,
}

impl EllipticContext {
    pub fn new(k: f64) -> Result<Self> {
        Self::with_pole_threshold(k, DEFAULT_POLE_THRESHOLD)
    }

    pub fn with_pole_threshold(k: f64, pole_threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(Error::ModulusRange(k));
        }
        let k_prime = (1.0 - k * k).sqrt();
        let big_k = complete_k(k)?;
        // K' = K(k') with complement k, computed without forming 1 - k'^2;
        // it is infinite to double precision at k = 0
        let big_k_prime = if k == 0.0 {
            f64::INFINITY
        } else {
            agm_quarter_period(k)
        };
        Ok(Self {
            k,
            k_prime,
            big_k,
            big_k_prime,
            pole_threshold,
        })
    }

    pub fn pole_threshold(&self) -> f64 {
        self.pole_threshold
    }

    /// sn, cn, dn of a complex argument.
    pub fn jacobi(&self, w: Complex64) -> Result<Jacobi> {
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(Error::NoConvergence(format!("non-finite argument {w}")));
        }
        let m = self.k * self.k;
        if m == 0.0 {
            // sn = sin, cn = cos, dn = 1
            return Ok(Jacobi {
                sn: w.sin(),
                cn: w.cos(),
                dn: Complex64::new(1.0, 0.0),
            });
        }
        if w.im == 0.0 {
            let (s, c, d) = jacobi_real(w.re, m, self.big_k);
            return Ok(Jacobi {
                sn: s.into(),
                cn: c.into(),
                dn: d.into(),
            });
        }
        // A&S 16.21: split into real evaluations at modulus k and k'.
        let (s, c, d) = jacobi_real(w.re, m, self.big_k);
        let m1 = 1.0 - m;
        let (s1, c1, d1) = jacobi_real(w.im, m1, self.big_k_prime);
        let denom = c1 * c1 + m * s * s * s1 * s1;
        if denom.abs() < self.pole_threshold {
            return Err(Error::Pole {
                w,
                denom: denom.abs(),
                threshold: self.pole_threshold,
            });
        }
        let inv = 1.0 / denom;
        Ok(Jacobi {
            sn: Complex64::new(s * d1, c * d * s1 * c1) * inv,
            cn: Complex64::new(c * c1, -s * d * s1 * d1) * inv,
            dn: Complex64::new(d * c1 * d1, -m * s * c * s1) * inv,
        })
    }

    /// cd w = cn w / dn w, with a pole check on dn.
    pub fn cd(&self, w: Complex64) -> Result<Complex64> {
        let j = self.jacobi(w)?;
        self.guard(w, j.dn)?;
        Ok(j.cn / j.dn)
    }

    /// sd w = sn w / dn w, with a pole check on dn.
    pub fn sd(&self, w: Complex64) -> Result<Complex64> {
        let j = self.jacobi(w)?;
        self.guard(w, j.dn)?;
        Ok(j.sn / j.dn)
    }

    /// Pole error unless |denom| clears the configured threshold.
    pub fn guard(&self, w: Complex64, denom: Complex64) -> Result<()> {
        if denom.norm() < self.pole_threshold {
            return Err(Error::Pole {
                w,
                denom: denom.norm(),
                threshold: self.pole_threshold,
            });
        }
        Ok(())
    }

    /// Reduce w modulo the lattice spanned by 2K and iK'/2 into
    /// [0, 2K) x [0, K'/2), recording the shift counts.  Real shifts flip
    /// the signs of sn and cn (dn is 2K-periodic); imaginary shifts carry
    /// no sign data, only the count.
    pub fn normalize(&self, w: Complex64) -> ComplexPoint {
        let two_k = 2.0 * self.big_k;
        let re_shifts = (w.re / two_k).floor();
        let re = w.re - re_shifts * two_k;
        let (im, im_shifts) = if self.big_k_prime.is_finite() {
            let half_kp = 0.5 * self.big_k_prime;
            let n = (w.im / half_kp).floor();
            (w.im - n * half_kp, n)
        } else {
            (w.im, 0.0)
        };
        let odd = (re_shifts as i64).rem_euclid(2) == 1;
        ComplexPoint {
            w: Complex64::new(re, im),
            re_shifts: re_shifts as i64,
            im_shifts: im_shifts as i64,
            sn_sign: if odd { -1.0 } else { 1.0 },
            cn_sign: if odd { -1.0 } else { 1.0 },
            dn_sign: 1.0,
        }
    }
}

/// Argument reduced into the fundamental rectangle, with the reduction
/// bookkeeping needed to recover function values at the original point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    pub w: Complex64,
    pub re_shifts: i64,
    pub im_shifts: i64,
    pub sn_sign: f64,
    pub cn_sign: f64,
    pub dn_sign: f64,
}

/// Real-argument sn, cn, dn for parameter m = k^2 in [0, 1].
///
/// Descending-Landen / AGM evaluation with the algebraic back-recurrence
/// (no inverse trigonometry, so accuracy is uniform in m across [0, 1]).
/// The convergence constant enters the result squared.
fn jacobi_real(u: f64, m: f64, big_k: f64) -> (f64, f64, f64) {
    debug_assert!((0.0..=1.0).contains(&m));
    const CA: f64 = 1e-15;
    let mc = 1.0 - m;
    if m == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    if mc < f64::EPSILON {
        let c = 1.0 / u.cosh();
        return (u.tanh(), c, c);
    }
    // Reduce modulo the real period 4K to keep the seed angle small; the
    // sign-preserving remainder leaves small arguments untouched.
    let u = if big_k.is_finite() {
        u % (4.0 * big_k)
    } else {
        u
    };

    let mut em = [0.0f64; AGM_MAX_ITER];
    let mut en = [0.0f64; AGM_MAX_ITER];
    let mut a = 1.0f64;
    let mut emc = mc;
    let mut c = 0.0f64;
    let mut l = 0;
    for i in 0..AGM_MAX_ITER {
        l = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= CA * a {
            break;
        }
        emc *= a;
        a = c;
    }

    let phi = u * c;
    let mut sn = phi.sin();
    let mut cn = phi.cos();
    let mut dn = 1.0;
    if sn.abs() > 0.0 {
        let mut t = cn / sn;
        c *= t;
        for i in (0..=l).rev() {
            let b = em[i];
            t *= c;
            c *= dn;
            dn = (en[i] + t) / (b + t);
            t = c / b;
        }
        let amp = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { amp } else { -amp };
        cn = c * sn;
    }
    (sn, cn, dn)
}
