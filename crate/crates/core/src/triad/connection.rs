//! The contact triad connection in the orthonormal frame `(X_λ, e1, e2)`.
//!
//! Christoffel symbols `Γ[a][b][c] = g(∇_{E_a} E_b, E_c)` are assembled from
//! the frame brackets `C[a][b][c] = g([E_a, E_b], E_c)` and `L_{X_λ} J`:
//!
//! * Reeb column: `∇_Y X_λ = ½ (L_{X_λ} J) J Y`, `∇_{X_λ} X_λ = 0`;
//! * `ξ`-block on `ξ` directions: the Levi-Civita values, which are already
//!   `J`-linear in rank 2 and are forced by `T^π(JY, Y) = 0`;
//! * Reeb row: `T(X_λ, ·) = 0` gives `ω_0 = C[0][1][2] + Γ[1][0][2]`.
//!
//! Brackets are central differences of the frame fields along the manifold.

use super::{Triad, XiFrame};
use crate::error::{Error, Result};
use crate::la::{j0, M2, V2, V4};

/// Orthonormal frame `E0 = X_λ`, `E1 = e1`, `E2 = e2 = J e1` of `T_pM`.
#[derive(Clone, Copy, Debug)]
pub struct Frame3 {
    pub base: V4,
    pub e: [V4; 3],
    pub xi: XiFrame,
}

/// Connection data at a point.
#[derive(Clone, Debug)]
pub struct ConnectionEval {
    pub base: V4,
    pub frame: Frame3,
    /// `Γ[a][b][c] = g(∇_{E_a} E_b, E_c)`.
    pub christoffel: [[[f64; 3]; 3]; 3],
    /// `C[a][b][c] = g([E_a, E_b], E_c)`.
    pub bracket: [[[f64; 3]; 3]; 3],
    /// `L_{X_λ} J` in the frame `(e1, e2)`.
    pub lie: M2,
    /// Connection one-form of `∇^π`: `∇^π_{E_a} = E_a + ω_a J`.
    pub omega: [f64; 3],
}

pub(crate) type FieldFn<'a> = dyn Fn(&V4) -> Result<V4> + 'a;

impl ConnectionEval {
    /// Frame coordinates `(λ(v), c1, c2)`.
    pub fn coords(&self, triad: &Triad, v: &V4) -> [f64; 3] {
        triad.frame3_coords(&self.frame, v)
    }

    pub fn vector(&self, c: &[f64; 3]) -> V4 {
        self.frame.e[0] * c[0] + self.frame.e[1] * c[1] + self.frame.e[2] * c[2]
    }

    /// Torsion `T(u, v) = ∇_u v - ∇_v u - [u, v]` as a tensor.
    pub fn torsion(&self, triad: &Triad, u: &V4, v: &V4) -> V4 {
        let cu = self.coords(triad, u);
        let cv = self.coords(triad, v);
        let mut out = [0.0; 3];
        for (a, ua) in cu.iter().enumerate() {
            for (b, vb) in cv.iter().enumerate() {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += ua * vb * (self.christoffel[a][b][c] - self.christoffel[b][a][c] - self.bracket[a][b][c]);
                }
            }
        }
        self.vector(&out)
    }

    /// `∇_u` acting on a vector with frame coordinates `y` whose derivative
    /// along `u` is `dy`.
    pub fn apply(&self, cu: &[f64; 3], y: &[f64; 3], dy: &[f64; 3]) -> [f64; 3] {
        let mut out = *dy;
        for a in 0..3 {
            for b in 0..3 {
                for (c, o) in out.iter_mut().enumerate() {
                    *o += cu[a] * y[b] * self.christoffel[a][b][c];
                }
            }
        }
        out
    }

    /// `ω(u) = Σ u^a ω_a`.
    pub fn omega_of(&self, triad: &Triad, u: &V4) -> f64 {
        let c = self.coords(triad, u);
        c[0] * self.omega[0] + c[1] * self.omega[1] + c[2] * self.omega[2]
    }
}

impl Triad {
    pub fn frame3(&self, p: &V4) -> Frame3 {
        let q = self.project_point(p);
        let xi = self.frame(&q);
        Frame3 {
            base: q,
            e: [self.reeb(&q), xi.e1, xi.e2],
            xi,
        }
    }

    pub fn frame3_coords(&self, fr: &Frame3, v: &V4) -> [f64; 3] {
        let vt = self.tangent_proj(&fr.base) * v;
        let c = self.xi_coords_in(&fr.xi, &vt);
        [self.lambda(&fr.base, &vt), c[0], c[1]]
    }

    /// Points `proj(p ± ε u)` used by every directional difference.
    fn stencil(&self, p: &V4, u: &V4, eps: f64) -> (V4, V4) {
        (self.project_point(&(p + u * eps)), self.project_point(&(p - u * eps)))
    }

    /// Central difference of an ambient-valued field along `u`.
    pub(crate) fn directional(&self, p: &V4, u: &V4, f: &FieldFn, eps: f64) -> Result<V4> {
        let (qp, qm) = self.stencil(p, u, eps);
        Ok((f(&qp)? - f(&qm)?) / (2.0 * eps))
    }

    /// Lie bracket `[U, V](p) = DV·U - DU·V` of two fields on `M`.
    pub fn bracket_fields(&self, p: &V4, uf: &FieldFn, vf: &FieldFn, eps: f64) -> Result<V4> {
        let u = uf(p)?;
        let v = vf(p)?;
        let dv = self.directional(p, &u, vf, eps)?;
        let du = self.directional(p, &v, uf, eps)?;
        Ok(self.tangent_proj(p) * (dv - du))
    }

    /// Connection data at `p` using the triad's finite-difference step.
    pub fn connection_at(&self, p: &V4) -> ConnectionEval {
        self.connection_with_step(p, self.fd_step())
    }

    pub fn connection_with_step(&self, p: &V4, eps: f64) -> ConnectionEval {
        let p = self.project_point(p);
        let frame = self.frame3(&p);
        let lie = if self.is_perturbed() {
            self.lie_j_numeric(&p, eps)
        } else {
            M2::zeros()
        };
        let mut c = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in (a + 1)..3 {
                let ea = |q: &V4| -> Result<V4> { Ok(self.frame3(q).e[a]) };
                let eb = |q: &V4| -> Result<V4> { Ok(self.frame3(q).e[b]) };
                let br = self
                    .bracket_fields(&p, &ea, &eb, eps)
                    .expect("frame fields are defined everywhere");
                let k = self.frame3_coords(&frame, &br);
                for i in 0..3 {
                    c[a][b][i] = k[i];
                    c[b][a][i] = -k[i];
                }
            }
        }
        // r[a] = frame coordinates of ∇_{E_a} X_λ = ½ L J E_a
        let lj = lie * j0() * 0.5;
        let mut r = [V2::zeros(); 3];
        r[1] = lj.column(0).into();
        r[2] = lj.column(1).into();
        let mut omega = [0.0; 3];
        omega[1] = -c[1][2][1];
        omega[2] = -c[1][2][2];
        omega[0] = c[0][1][2] + r[1][1];
        let mut g = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for k in 0..2 {
                g[a][0][k + 1] = r[a][k];
                g[a][k + 1][0] = -r[a][k];
            }
            g[a][1][2] = omega[a];
            g[a][2][1] = -omega[a];
        }
        ConnectionEval {
            base: p,
            frame,
            christoffel: g,
            bracket: c,
            lie,
            omega,
        }
    }

    /// `∇_U Y` at `p` for a vector field `Y` on a neighbourhood of `p`.
    ///
    /// The field closure may return [`Error::Boundary`] when its stencil leaves
    /// the region where it is defined.
    pub fn triad_connection(&self, p: &V4, u: &V4, yf: &FieldFn) -> Result<V4> {
        let ce = self.connection_at(p);
        self.covariant_with(&ce, u, yf, self.fd_step())
    }

    pub(crate) fn covariant_with(&self, ce: &ConnectionEval, u: &V4, yf: &FieldFn, eps: f64) -> Result<V4> {
        let p = ce.base;
        let cu = ce.coords(self, u);
        let y = ce.coords(self, &yf(&p)?);
        let (qp, qm) = self.stencil(&p, u, eps);
        let fp = self.frame3(&qp);
        let fm = self.frame3(&qm);
        let yp = self.frame3_coords(&fp, &yf(&qp)?);
        let ym = self.frame3_coords(&fm, &yf(&qm)?);
        let mut dy = [0.0; 3];
        for i in 0..3 {
            dy[i] = (yp[i] - ym[i]) / (2.0 * eps);
        }
        Ok(ce.vector(&ce.apply(&cu, &y, &dy)))
    }

    /// `R^π(u, v)` on `ξ_p` as a matrix in the unitary frame at `p`.
    pub fn curvature_pi(&self, p: &V4, u: &V4, v: &V4) -> M2 {
        self.curvature_pi_with(p, u, v, 1e-3)
    }

    /// Curvature with an explicit outer step; the inner step is the triad's
    /// finite-difference step.
    pub fn curvature_pi_with(&self, p: &V4, u: &V4, v: &V4, outer: f64) -> M2 {
        let f = self.curvature_form(p, outer);
        let ce = self.connection_at(p);
        let cu = ce.coords(self, u);
        let cv = ce.coords(self, v);
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += cu[a] * cv[b] * f[a][b];
            }
        }
        j0() * s
    }

    /// `F[a][b]` with `R^π(E_a, E_b) = F[a][b] J`.
    pub fn curvature_form(&self, p: &V4, outer: f64) -> [[f64; 3]; 3] {
        let ce = self.connection_at(p);
        let mut dom = [[0.0; 3]; 3];
        for (a, row) in dom.iter_mut().enumerate() {
            let (qp, qm) = self.stencil(&ce.base, &ce.frame.e[a], outer);
            let op = self.connection_at(&qp).omega;
            let om = self.connection_at(&qm).omega;
            for b in 0..3 {
                row[b] = (op[b] - om[b]) / (2.0 * outer);
            }
        }
        let mut f = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut s = dom[a][b] - dom[b][a];
                for c in 0..3 {
                    s -= ce.bracket[a][b][c] * ce.omega[c];
                }
                f[a][b] = s;
            }
        }
        f
    }

    /// Parallel transport of `v0 ∈ ξ` along `s ↦ (c(s), c'(s))`, `s ∈ [0, 1]`,
    /// by RK4 on the frame coefficients.
    pub fn parallel_transport(&self, curve: &dyn Fn(f64) -> (V4, V4), v0: &V4, steps: usize) -> Result<V4> {
        if steps == 0 {
            return Err(Error::Argument("transport needs at least one step".into()));
        }
        let (p0, _) = curve(0.0);
        self.check_on(&p0)?;
        if self.lambda(&p0, v0).abs() > 1e-10 * (1.0 + v0.norm()) {
            return Err(Error::Contract("transported vector is not in ξ".into()));
        }
        let mut sig = self.xi_coords(&p0, v0);
        let rate = |s: f64| -> Result<f64> {
            let (q, dq) = curve(s);
            self.check_on(&q)?;
            let ce = self.connection_at(&q);
            Ok(ce.omega_of(self, &dq))
        };
        let h = 1.0 / steps as f64;
        let jm = j0();
        for k in 0..steps {
            let s = k as f64 * h;
            let w1 = rate(s)?;
            let w2 = rate(s + 0.5 * h)?;
            let w4 = rate(s + h)?;
            let k1 = -(jm * sig) * w1;
            let k2 = -(jm * (sig + k1 * (0.5 * h))) * w2;
            let k3 = -(jm * (sig + k2 * (0.5 * h))) * w2;
            let k4 = -(jm * (sig + k3 * h)) * w4;
            sig += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let (p1, _) = curve(1.0);
        let fr = self.frame(&p1);
        Ok(Triad::from_xi_coords(&fr, &sig))
    }

    fn check_on(&self, p: &V4) -> Result<()> {
        let c = self.constraint(p);
        if !c.is_finite() || c.abs() > 1e-8 {
            return Err(Error::Integration(format!(
                "curve leaves the manifold (residual {c:e})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::max_abs2;
    use crate::triad::GOLDEN;

    #[test]
    fn flat_reeb_field_is_parallel() {
        let t = Triad::flat();
        let p = V4::new(0.4, -0.7, 1.1, 0.0);
        let x = |q: &V4| -> Result<V4> { Ok(t.reeb(q)) };
        for u in [V4::new(1.0, 0.0, 0.0, 0.0), V4::new(0.2, -1.0, 0.5, 0.0)] {
            assert!(t.triad_connection(&p, &u, &x).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn curvature_is_skew_and_j_linear() {
        let t = Triad::ellipsoid_perturbed(4, 1.0, GOLDEN);
        let mut rng = crate::rng::stream(8, "test.curv");
        let p = t.sample_points(&mut rng, 1)[0];
        let u = t.random_tangent(&mut rng, &p);
        let v = t.random_tangent(&mut rng, &p);
        let r = t.curvature_pi(&p, &u, &v);
        assert!(max_abs2(&(r + r.transpose())) < 1e-12);
        assert!(max_abs2(&(r * j0() - j0() * r)) < 1e-12);
        assert!(max_abs2(&t.curvature_pi(&p, &u, &u)) < 1e-12);
    }

    #[test]
    fn transport_preserves_norm_and_inverts() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let p0 = t.project_point(&V4::new(0.6, 0.2, 0.7, -0.3));
        let d = t.random_tangent(&mut crate::rng::stream(1, "test.pt"), &p0);
        let curve = |s: f64| {
            let q = t.project_point(&(p0 + d * s));
            let qp = t.project_point(&(p0 + d * (s + 1e-6)));
            let qm = t.project_point(&(p0 + d * (s - 1e-6)));
            (q, (qp - qm) / 2e-6)
        };
        let rev = |s: f64| {
            let (q, v) = curve(1.0 - s);
            (q, -v)
        };
        let fr = t.frame(&p0);
        let v0 = fr.e1 * 0.3 + fr.e2 * 1.2;
        let v1 = t.parallel_transport(&curve, &v0, 200).unwrap();
        let n0 = t.metric(&p0, &v0, &v0).sqrt();
        let (p1, _) = curve(1.0);
        let n1 = t.metric(&p1, &v1, &v1).sqrt();
        assert!((n1 / n0 - 1.0).abs() < 1e-8);
        let back = t.parallel_transport(&rev, &v1, 200).unwrap();
        assert!((back - v0).norm() < 1e-8);
        let stay = |_s: f64| (p0, V4::zeros());
        assert_eq!(
            t.parallel_transport(&stay, &v0, 10).unwrap(),
            Triad::from_xi_coords(&fr, &t.xi_coords(&p0, &v0))
        );
    }
}
