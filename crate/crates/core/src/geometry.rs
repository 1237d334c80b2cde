//! Spherical trigonometry of a three-plane vertex and seeded generation of
//! tetrahedron, prism and static angle configurations.
//!
//! A configuration is six dihedral angles theta_1..theta_6 attached to the
//! six intersection lines of four planes.  The four vertex operators of the
//! tetrahedron identity see them as the triples
//! (t1,t2,t3), (t1,t4,t5), (pi-t2,t4,t6), (t3,pi-t5,t6).

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::param::{invert_angles, modulus_from_vertex, WPair};

/// Interior margin used by the generators when validating angles.
pub const VALIDITY_MARGIN: f64 = 1e-6;

/// Resampling budget for the seeded generators.
pub const RESAMPLE_BUDGET: usize = 1000;

/// A spherical triangle solved from its three angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalTriangle {
    /// Angles theta_1..theta_3, each in (0, pi).
    pub theta: [f64; 3],
    /// Sides a_1..a_3 opposite to the angles.
    pub sides: [f64; 3],
    /// Spherical sine constant K = sin(theta_i)/sin(a_i).
    pub sine_k: f64,
    /// Excesses alpha_0..alpha_3.
    pub alpha: [f64; 4],
    /// Complementary quantities beta_0..beta_3.
    pub beta: [f64; 4],
    /// t_i = sqrt(tan(alpha_i / 2)), positive roots.
    pub t: [f64; 4],
}

impl SphericalTriangle {
    /// Solve the triangle from its angles via the dual (polar) cosine rule
    /// cos a_i = (cos theta_i + cos theta_j cos theta_k) / (sin theta_j sin theta_k).
    pub fn from_angles(theta: [f64; 3]) -> Result<Self> {
        let fail = |msg: &str| {
            Err(Error::InvalidTriangle(
                theta[0],
                theta[1],
                theta[2],
                msg.to_string(),
            ))
        };
        for &t in &theta {
            if !(t > 0.0 && t < std::f64::consts::PI) {
                return fail("angle outside (0, pi)");
            }
        }
        let mut sides = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let ca = (theta[i].cos() + theta[j].cos() * theta[k].cos())
                / (theta[j].sin() * theta[k].sin());
            if !(ca > -1.0 && ca < 1.0) {
                return fail("dual cosine rule out of range");
            }
            sides[i] = ca.acos();
        }
        let alpha0 = 0.5 * (theta[0] + theta[1] + theta[2] - std::f64::consts::PI);
        let alpha = [
            alpha0,
            theta[0] - alpha0,
            theta[1] - alpha0,
            theta[2] - alpha0,
        ];
        let beta0 = std::f64::consts::PI - 0.5 * (sides[0] + sides[1] + sides[2]);
        let beta = [
            beta0,
            std::f64::consts::PI - sides[0] - beta0,
            std::f64::consts::PI - sides[1] - beta0,
            std::f64::consts::PI - sides[2] - beta0,
        ];
        for &a in alpha.iter().chain(beta.iter()) {
            if !(a > 0.0 && a < std::f64::consts::PI) {
                return fail("excess outside (0, pi)");
            }
        }
        let sine_k = theta[0].sin() / sides[0].sin();
        let t = [
            (alpha[0] / 2.0).tan().sqrt(),
            (alpha[1] / 2.0).tan().sqrt(),
            (alpha[2] / 2.0).tan().sqrt(),
            (alpha[3] / 2.0).tan().sqrt(),
        ];
        Ok(Self {
            theta,
            sides,
            sine_k,
            alpha,
            beta,
            t,
        })
    }

    /// All angles and excesses at least `margin` away from 0 and pi.
    pub fn is_interior(&self, margin: f64) -> bool {
        let pi = std::f64::consts::PI;
        self.theta
            .iter()
            .chain(self.alpha.iter())
            .chain(self.beta.iter())
            .all(|&x| x > margin && x < pi - margin)
    }

    /// Residual of 1 - sum t_i^2 t_j^2 + (t0 t1 t2 t3)^2 = 0.
    pub fn constraint_residual(&self) -> f64 {
        let t2: Vec<f64> = self.t.iter().map(|x| x * x).collect();
        let mut s = 1.0 + (t2[0] * t2[1] * t2[2] * t2[3]);
        for i in 0..4 {
            for j in (i + 1)..4 {
                s -= t2[i] * t2[j];
            }
        }
        s
    }
}

/// The vertex triples entering the tetrahedron identity, in operator order.
pub fn vertex_triples(theta6: [f64; 6]) -> [[f64; 3]; 4] {
    let pi = std::f64::consts::PI;
    let [t1, t2, t3, t4, t5, t6] = theta6;
    [
        [t1, t2, t3],
        [t1, t4, t5],
        [pi - t2, t4, t6],
        [t3, pi - t5, t6],
    ]
}

fn det4(m: [[f64; 4]; 4]) -> f64 {
    let det3 = |a: [[f64; 3]; 3]| -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let mut det = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0; 3]; 3];
        for (r, row) in m.iter().enumerate().skip(1) {
            let mut cc = 0;
            for (c, &entry) in row.iter().enumerate() {
                if c == col {
                    continue;
                }
                minor[r - 1][cc] = entry;
                cc += 1;
            }
        }
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * det3(minor);
    }
    det
}

/// Determinant of the 4x4 Gram matrix of the four construction normals,
/// expressed in the dihedral angles.  Vanishes exactly on angle sets coming
/// from four planes in Euclidean 3-space.
pub fn gram_residual(theta6: [f64; 6]) -> f64 {
    let c: Vec<f64> = theta6.iter().map(|t| t.cos()).collect();
    det4([
        [1.0, -c[0], -c[1], -c[3]],
        [-c[0], 1.0, -c[2], -c[4]],
        [-c[1], -c[2], 1.0, c[5]],
        [-c[3], -c[4], c[5], 1.0],
    ])
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn triple(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Six dihedral angles from four unit normals.  All plane pairs contribute
/// arccos(-n_i . n_j) except the pair (3,4) which contributes arccos(+n_3 . n_4);
/// this is the sign placement under which the Gram determinant above vanishes.
fn angles_from_normals(n: &[[f64; 3]; 4]) -> [f64; 6] {
    let ang = |x: f64| x.clamp(-1.0, 1.0).acos();
    [
        ang(-dot(n[0], n[1])),
        ang(-dot(n[0], n[2])),
        ang(-dot(n[1], n[2])),
        ang(-dot(n[0], n[3])),
        ang(-dot(n[1], n[3])),
        ang(dot(n[2], n[3])),
    ]
}

/// Flip normal signs so the four triple products (123), (124), (134), (234)
/// carry the sign pattern (e, e, -e, e).  The four per-normal toggles span
/// all sign patterns, so a solution always exists.
fn orient_normals(n: &mut [[f64; 3]; 4]) {
    let trips = |n: &[[f64; 3]; 4]| {
        [
            triple(n[0], n[1], n[2]),
            triple(n[0], n[1], n[3]),
            triple(n[0], n[2], n[3]),
            triple(n[1], n[2], n[3]),
        ]
    };
    let target = [1.0f64, 1.0, -1.0, 1.0];
    let t = trips(n);
    let diff: [u8; 4] = std::array::from_fn(|i| u8::from(t[i].signum() != target[i].signum()));
    // Toggle matrix over F2 is J - I, which is its own inverse.
    let m = [[1, 1, 1, 0], [1, 1, 0, 1], [1, 0, 1, 1], [0, 1, 1, 1]];
    for i in 0..4 {
        let s: u8 = (0..4).map(|j| m[i][j] * diff[j]).sum::<u8>() % 2;
        if s == 1 {
            for x in &mut n[i] {
                *x = -*x;
            }
        }
    }
    let t = trips(n);
    debug_assert!(
        t[0].signum() == t[1].signum()
            && t[1].signum() == -t[2].signum()
            && t[2].signum() == -t[3].signum()
    );
}

/// A validated tetrahedron configuration.
#[derive(Debug, Clone)]
pub struct TetraConfig {
    pub theta6: [f64; 6],
    pub gram_residual: f64,
    pub vertex_triangles: [SphericalTriangle; 4],
}

impl TetraConfig {
    /// Build from six angles, validating all four vertex triangles.
    pub fn from_angles(theta6: [f64; 6]) -> Result<Self> {
        let triples = vertex_triples(theta6);
        let tris: Vec<SphericalTriangle> = triples
            .iter()
            .map(|&t| SphericalTriangle::from_angles(t))
            .collect::<Result<_>>()?;
        for tri in &tris {
            if !tri.is_interior(VALIDITY_MARGIN) {
                return Err(Error::InvalidTriangle(
                    tri.theta[0],
                    tri.theta[1],
                    tri.theta[2],
                    "vertex triangle too close to degenerate".to_string(),
                ));
            }
        }
        Ok(Self {
            theta6,
            gram_residual: gram_residual(theta6),
            vertex_triangles: tris.try_into().map_err(|_| unreachable!()).unwrap(),
        })
    }
}

/// Sample a tetrahedron: four unit normals in general position, oriented to
/// the admissible sign pattern, resampled until all four vertex triangles
/// validate.  Deterministic per seed.
pub fn random_tetrahedron(seed: u64) -> Result<TetraConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_BUDGET {
        let mut n: [[f64; 3]; 4] = std::array::from_fn(|_| UnitSphere.sample(&mut rng));
        if triple(n[0], n[1], n[2]).abs() < 1e-3 || triple(n[1], n[2], n[3]).abs() < 1e-3 {
            continue;
        }
        orient_normals(&mut n);
        let theta6 = angles_from_normals(&n);
        if let Ok(cfg) = TetraConfig::from_angles(theta6) {
            return Ok(cfg);
        }
    }
    Err(Error::Exhausted(RESAMPLE_BUDGET))
}

/// A validated prism configuration with its elliptic data.
#[derive(Debug, Clone)]
pub struct PrismConfig {
    /// Six angles; theta_1 + theta_2 + theta_3 = pi.
    pub theta6: [f64; 6],
    /// Common elliptic modulus of the three base vertices.
    pub k: f64,
    /// Inclination angle of the parallel edges to the base plane.
    pub phi: f64,
    /// Parameters u_1, u_2, u_3 in the periodicity rectangle.
    pub u: [Complex64; 3],
    /// Base vertex triangles, in operator order (1,4,5), (2,4,6), (3,5,6).
    pub vertex_triangles: [SphericalTriangle; 3],
    /// Solved parameter pairs per base vertex: (u1,u2), (u1,u3), (u2,u3).
    pub wpairs: [WPair; 3],
    /// Largest pairwise disagreement of the three per-vertex moduli.
    pub k_spread: f64,
}

/// Sample a prism: three side planes sharing the vertical direction (their
/// trace normals placed so the cross-section interior angles are theta_1..3)
/// plus one base plane; then invert each base vertex for its (w1, w2) pair
/// and check that u_1, u_2, u_3 are shared across vertices.
pub fn random_prism(seed: u64) -> Result<PrismConfig> {
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err: Option<Error> = None;
    for _ in 0..RESAMPLE_BUDGET {
        let t1 = rng.gen_range(0.25..pi - 0.5);
        let t2 = rng.gen_range(0.25..pi - t1 - 0.25);
        let t3 = pi - t1 - t2;
        // Trace normals of the side planes in the plane orthogonal to the
        // common direction; gaps pi - theta between successive azimuths.
        let psi = [0.0, pi - t1, 2.0 * pi - t1 - t3];
        let side: [[f64; 3]; 3] = std::array::from_fn(|i| [psi[i].cos(), psi[i].sin(), 0.0]);
        let base: [f64; 3] = UnitSphere.sample(&mut rng);
        if !(0.25..=0.9).contains(&base[2].abs()) {
            continue;
        }
        for flip in [1.0, -1.0] {
            let n4 = [flip * base[0], flip * base[1], flip * base[2]];
            let t4 = (-dot(side[0], n4)).clamp(-1.0, 1.0).acos();
            let t5 = (-dot(side[1], n4)).clamp(-1.0, 1.0).acos();
            let t6 = dot(side[2], n4).clamp(-1.0, 1.0).acos();
            let theta6 = [t1, t2, t3, t4, t5, t6];
            match prism_from_angles(theta6) {
                Ok(cfg) => return Ok(cfg),
                Err(e) => last_err = Some(e),
            }
        }
    }
    Err(last_err.unwrap_or(Error::Exhausted(RESAMPLE_BUDGET)))
}

/// Validate prism angles and solve the elliptic parameters of all three
/// base vertices.
pub fn prism_from_angles(theta6: [f64; 6]) -> Result<PrismConfig> {
    let pi = std::f64::consts::PI;
    if (theta6[0] + theta6[1] + theta6[2] - pi).abs() > 1e-10 {
        return Err(Error::Constraint(format!(
            "theta1 + theta2 + theta3 - pi = {:e}",
            theta6[0] + theta6[1] + theta6[2] - pi
        )));
    }
    let triples = vertex_triples(theta6);
    let tris: Vec<SphericalTriangle> = triples[1..]
        .iter()
        .map(|&t| SphericalTriangle::from_angles(t))
        .collect::<Result<_>>()?;
    for tri in &tris {
        if !tri.is_interior(0.05) {
            return Err(Error::InvalidTriangle(
                tri.theta[0],
                tri.theta[1],
                tri.theta[2],
                "prism vertex triangle too close to degenerate".to_string(),
            ));
        }
    }

    let moduli: Vec<_> = tris
        .iter()
        .map(modulus_from_vertex)
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<f64> = moduli.iter().map(|m| m.k).collect();
    let k_spread = ks
        .iter()
        .flat_map(|a| ks.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    if k_spread > 1e-10 {
        return Err(Error::Constraint(format!(
            "per-vertex moduli disagree: spread {k_spread:e}"
        )));
    }
    if !(1e-4..0.97).contains(&moduli[0].k) {
        return Err(Error::Constraint(format!(
            "modulus k = {} outside comfortable range",
            moduli[0].k
        )));
    }

    let wpairs: Vec<WPair> = tris
        .iter()
        .zip(&moduli)
        .map(|(tri, m)| invert_angles(tri, m))
        .collect::<Result<_>>()?;
    // Vertices (1,4,5), (2,4,6), (3,5,6) solve for the pairs
    // (u1,u2), (u1,u3), (u2,u3); the shared components must agree.
    let agree = [
        (wpairs[0].w1 - wpairs[1].w1).norm(),
        (wpairs[0].w2 - wpairs[2].w1).norm(),
        (wpairs[1].w2 - wpairs[2].w2).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if agree > 1e-9 {
        return Err(Error::Constraint(format!(
            "shared parameters disagree across vertices: {agree:e}"
        )));
    }
    let u = [wpairs[0].w1, wpairs[0].w2, wpairs[1].w2];

    Ok(PrismConfig {
        theta6,
        k: moduli[0].k,
        phi: moduli[0].phi,
        u,
        vertex_triangles: tris.try_into().map_err(|_| unreachable!()).unwrap(),
        wpairs: wpairs.try_into().map_err(|_| unreachable!()).unwrap(),
        k_spread,
    })
}

/// A static configuration: every vertex has angle sum pi.
#[derive(Debug, Clone)]
pub struct StaticConfig {
    pub theta6: [f64; 6],
}

impl StaticConfig {
    /// Check the four linear constraints and interior angles of all four
    /// (degenerate, t0 = 0) vertex triples.
    pub fn from_angles(theta6: [f64; 6]) -> Result<Self> {
        let pi = std::f64::consts::PI;
        let [t1, t2, t3, t4, t5, t6] = theta6;
        let resids = [
            t1 + t2 + t3 - pi,
            t1 + t4 + t5 - pi,
            t4 + t6 - t2,
            t3 + t6 - t5,
        ];
        for r in resids {
            if r.abs() > 1e-10 {
                return Err(Error::Constraint(format!("static relation residual {r:e}")));
            }
        }
        for triple in vertex_triples(theta6) {
            for a in triple {
                if !(a > VALIDITY_MARGIN && a < pi - VALIDITY_MARGIN) {
                    return Err(Error::Constraint(format!("vertex angle {a} not interior")));
                }
            }
        }
        Ok(Self { theta6 })
    }
}

/// Sample three free angles and solve the static linear relations;
/// resample until all vertex triples are interior.
pub fn random_static(seed: u64) -> Result<StaticConfig> {
    let pi = std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_BUDGET {
        let t1 = rng.gen_range(0.05..pi - 0.1);
        let t2 = rng.gen_range(0.05..pi - t1 - 0.05);
        let t3 = pi - t1 - t2;
        let hi = t2.min(pi - t1);
        if hi <= 0.1 {
            continue;
        }
        let t4 = rng.gen_range(0.05..hi - 0.05);
        let t5 = pi - t1 - t4;
        let t6 = t2 - t4;
        if let Ok(cfg) = StaticConfig::from_angles([t1, t2, t3, t4, t5, t6]) {
            return Ok(cfg);
        }
    }
    Err(Error::Exhausted(RESAMPLE_BUDGET))
}
