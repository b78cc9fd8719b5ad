//! Sampled verification of the connection axioms.
//!
//! Every check is phrased through vector fields on a neighbourhood of the
//! sample point (frame fields with coefficients affine in the ambient
//! position), so covariant derivatives, brackets and torsion go through the
//! same difference stencils a user field would.

use super::connection::FieldFn;
use super::Triad;
use crate::error::Result;
use crate::la::V4;
use rand::Rng;

/// One row of an axiom report.
#[derive(Clone, Debug)]
pub struct AxiomRow {
    pub name: &'static str,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub triad: String,
    pub step: f64,
    pub samples: usize,
    pub rows: Vec<AxiomRow>,
}

impl AxiomReport {
    pub fn max(&self) -> f64 {
        self.rows.iter().fold(0.0_f64, |a, r| a.max(r.max_residual))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.max_residual)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.max_residual < tol)
    }
}

pub const AXIOM_NAMES: [&str; 9] = [
    "metric",
    "torsion_reeb",
    "reeb_parallel",
    "reeb_in_xi",
    "hermitian",
    "torsion_pi_jyy",
    "dbar_reeb",
    "cor_reeb_derivative",
    "cor_contact_torsion",
];

pub const INVARIANT_NAMES: [&str; 7] = [
    "lambda_reeb",
    "dlambda_reeb",
    "j_squared",
    "j_dlambda",
    "compatibility",
    "frame",
    "constraint",
];

/// Pointwise triad invariants at `n` sampled points: `λ(X) = 1`,
/// `X ⌟ dλ = 0`, `J² = -1 + λ ⊗ X`, `J`-invariance and taming of `dλ`,
/// unitarity of the working frame and the ellipsoid constraint. Taming is
/// reported as `0` when `dλ(v, Jv) > 0` on every sample and as
/// `1 - min dλ(v, Jv)/|v|²` otherwise.
pub fn invariant_check(triad: &Triad, n: usize, seed: u64) -> AxiomReport {
    let mut rng = crate::rng::stream(seed, "triad.invariants");
    let pts = triad.sample_points(&mut rng, n);
    let mut m = [0.0_f64; 7];
    let mut min_tame = f64::INFINITY;
    for p in &pts {
        let x = triad.reeb(p);
        let u = triad.random_tangent(&mut rng, p);
        let v = triad.random_tangent(&mut rng, p);
        m[0] = m[0].max((triad.lambda(p, &x) - 1.0).abs());
        m[1] = m[1].max(triad.dlambda(&x, &u).abs());
        let jju = triad.apply_j(p, &triad.apply_j(p, &u));
        m[2] = m[2].max((jju + u - x * triad.lambda(p, &u)).amax());
        let us = triad.pi(p, &u);
        let vs = triad.pi(p, &v);
        let ju = triad.apply_j(p, &us);
        let jv = triad.apply_j(p, &vs);
        m[3] = m[3].max((triad.dlambda(&ju, &jv) - triad.dlambda(&us, &vs)).abs());
        let nu = us.norm_squared();
        if nu > 0.0 {
            min_tame = min_tame.min(triad.dlambda(&us, &ju) / nu);
        }
        let fr = triad.frame(p);
        let fd = [
            triad.lambda(p, &fr.e1).abs(),
            triad.lambda(p, &fr.e2).abs(),
            (triad.metric(p, &fr.e1, &fr.e1) - 1.0).abs(),
            (triad.metric(p, &fr.e2, &fr.e2) - 1.0).abs(),
            triad.metric(p, &fr.e1, &fr.e2).abs(),
            (triad.apply_j(p, &fr.e1) - fr.e2).amax(),
        ];
        m[5] = fd.iter().fold(m[5], |a, &b| a.max(b));
        m[6] = m[6].max(triad.constraint(p).abs());
    }
    m[4] = if min_tame > 0.0 { 0.0 } else { 1.0 - min_tame };
    AxiomReport {
        triad: triad.id().to_string(),
        step: 0.0,
        samples: n,
        rows: INVARIANT_NAMES
            .iter()
            .zip(m)
            .map(|(name, max_residual)| AxiomRow { name, max_residual })
            .collect(),
    }
}

/// `Y(q) = Σ_a (c_a + k_a · (q - p)) E_a(q)`, restricted to `a ≥ 1` for
/// sections of `ξ`.
#[derive(Clone, Debug)]
struct AffineField {
    center: V4,
    c: [f64; 3],
    k: [V4; 3],
}

impl AffineField {
    fn random<R: Rng>(rng: &mut R, center: V4, xi_only: bool) -> Self {
        let mut c = [0.0; 3];
        let mut k = [V4::zeros(); 3];
        for a in 0..3 {
            if xi_only && a == 0 {
                continue;
            }
            c[a] = rng.random_range(-1.0..1.0);
            k[a] = V4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        }
        Self { center, c, k }
    }

    fn eval(&self, t: &Triad, q: &V4) -> V4 {
        let f = t.frame3(q);
        let d = f.base - self.center;
        let mut v = V4::zeros();
        for a in 0..3 {
            v += f.e[a] * (self.c[a] + self.k[a].dot(&d));
        }
        v
    }
}

/// Evaluate the axioms and the `∇_Y X_λ`, `λ(T|ξ)` identities at `n` sampled
/// points with difference step `step`; fields and points come from `seed`.
pub fn axiom_check(triad: &Triad, n: usize, step: f64, seed: u64) -> AxiomReport {
    let t = triad.clone().with_fd_step(step);
    let mut rng = crate::rng::stream(seed, "triad.axioms");
    let pts = t.sample_points(&mut rng, n);
    let mut maxes = [0.0_f64; 9];
    for p in &pts {
        let fy = AffineField::random(&mut rng, *p, false);
        let fz = AffineField::random(&mut rng, *p, false);
        let fs = AffineField::random(&mut rng, *p, true);
        let fs2 = AffineField::random(&mut rng, *p, true);
        let u = t.random_tangent(&mut rng, p);
        let r = check_point(&t, p, &u, &fy, &fz, &fs, &fs2, step).expect("fields are global");
        for i in 0..9 {
            maxes[i] = maxes[i].max(r[i]);
        }
    }
    AxiomReport {
        triad: triad.id().to_string(),
        step,
        samples: n,
        rows: AXIOM_NAMES
            .iter()
            .zip(maxes)
            .map(|(name, m)| AxiomRow { name, max_residual: m })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn check_point(
    t: &Triad,
    p: &V4,
    u: &V4,
    fy: &AffineField,
    fz: &AffineField,
    fs: &AffineField,
    fs2: &AffineField,
    eps: f64,
) -> Result<[f64; 9]> {
    let ce = t.connection_at(p);
    let nab = |dir: &V4, f: &FieldFn| t.covariant_with(&ce, dir, f, eps);
    let y = |q: &V4| -> Result<V4> { Ok(fy.eval(t, q)) };
    let z = |q: &V4| -> Result<V4> { Ok(fz.eval(t, q)) };
    let s = |q: &V4| -> Result<V4> { Ok(fs.eval(t, q)) };
    let s2 = |q: &V4| -> Result<V4> { Ok(fs2.eval(t, q)) };
    let js = |q: &V4| -> Result<V4> {
        let q = t.project_point(q);
        Ok(t.apply_j(&q, &fs.eval(t, &q)))
    };
    let x = |q: &V4| -> Result<V4> { Ok(t.reeb(&t.project_point(q))) };
    let xp = x(p)?;
    let yp = y(p)?;
    let sp = s(p)?;
    let jsp = js(p)?;

    // metric: U<Y,Z> = <∇_U Y, Z> + <Y, ∇_U Z>
    let gyz = |q: &V4| -> Result<V4> {
        let q = t.project_point(q);
        Ok(V4::new(t.metric(&q, &y(&q)?, &z(&q)?), 0.0, 0.0, 0.0))
    };
    let ug = t.directional(p, u, &gyz, eps)?[0];
    let zp = z(p)?;
    let metric = (ug - t.metric(p, &nab(u, &y)?, &zp) - t.metric(p, &yp, &nab(u, &z)?)).abs();

    // T(X, Y) = 0
    let txy = nab(&xp, &y)? - nab(&yp, &x)? - t.bracket_fields(p, &x, &y, eps)?;
    let torsion_reeb = norm_g(t, p, &txy);

    // ∇_X X = 0 and λ(∇_Y X) = 0 for Y ∈ ξ
    let reeb_parallel = norm_g(t, p, &nab(&xp, &x)?);
    let nsx = nab(&sp, &x)?;
    let reeb_in_xi = t.lambda(p, &nsx).abs();

    // ∇^π_U (J s) = J ∇^π_U s
    let hermitian = norm_g(t, p, &(t.pi(p, &nab(u, &js)?) - t.apply_j(p, &t.pi(p, &nab(u, &s)?))));

    // T^π(J s, s) = 0
    let tjss = nab(&jsp, &s)? - nab(&sp, &js)? - t.bracket_fields(p, &js, &s, eps)?;
    let torsion_pi = norm_g(t, p, &t.pi(p, &tjss));

    // ∇_s X = J ∇_{Js} X
    let dbar = norm_g(t, p, &(nsx - t.apply_j(p, &nab(&jsp, &x)?)));

    // ∇_Y X = ½ (L J) J Y
    let fr = t.frame(p);
    let lj = ce.lie * crate::la::j0();
    let cy = t.xi_coords_in(&fr, &yp);
    let pred = Triad::from_xi_coords(&fr, &(lj * cy * 0.5));
    let cor_reeb = norm_g(t, p, &(nab(&yp, &x)? - pred));

    // λ(T(s, s2)) = dλ(s, s2)
    let s2p = s2(p)?;
    let tss = nab(&sp, &s2)? - nab(&s2p, &s)? - t.bracket_fields(p, &s, &s2, eps)?;
    let cor_contact = (t.lambda(p, &tss) - t.dlambda(&sp, &s2p)).abs();

    Ok([
        metric,
        torsion_reeb,
        reeb_parallel,
        reeb_in_xi,
        hermitian,
        torsion_pi,
        dbar,
        cor_reeb,
        cor_contact,
    ])
}

fn norm_g(t: &Triad, p: &V4, v: &V4) -> f64 {
    t.metric(p, v, v).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_axioms_hold_to_roundoff() {
        let r = axiom_check(&Triad::flat(), 20, 1e-4, 1);
        assert!(r.passes(1e-8), "{r:?}");
    }

    #[test]
    fn ellipsoid_axioms_hold() {
        let r = axiom_check(&Triad::ellipsoid(1.0, crate::triad::GOLDEN), 10, 1e-4, 2);
        assert!(r.passes(1e-6), "{r:?}");
    }

    #[test]
    fn invariants_hold_on_every_model() {
        for t in [
            Triad::flat(),
            Triad::ellipsoid(1.0, crate::triad::GOLDEN),
            Triad::ellipsoid_perturbed(4, 1.0, crate::triad::GOLDEN),
        ] {
            let r = invariant_check(&t, 50, 3);
            assert!(r.passes(1e-10), "{r:?}");
        }
    }
}
