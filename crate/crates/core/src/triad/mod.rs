//! Contact triads `(M, λ, J)` on concrete models.
//!
//! Points are stored in ambient `R⁴`. The flat model `R³` with
//! `λ = dz - y dx` keeps the fourth coordinate at zero; the ellipsoid
//! `E(a1, a2) = {|z1|²/a1 + |z2|²/a2 = 1} ⊂ C²` carries the restriction of
//! `½ Σ (x_k dy_k - y_k dx_k)`.
//!
//! `J` is always fixed by `dλ(v, Jv) > 0` on `ξ`. For the flat model this gives
//! `J ∂y = -(∂x + y ∂z)`.

mod axioms;
mod connection;

pub use axioms::{axiom_check, invariant_check, AxiomReport, AxiomRow};
pub use connection::{ConnectionEval, Frame3};

use crate::error::{Error, Result};
use crate::la::{j0, M2, M4, V2, V4};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Golden ratio, the default second axis of the perturbed ellipsoid.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

const PERTURB_AMP: f64 = 0.2;
const PERTURB_MODES: usize = 3;

/// Point of `M` in ambient coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriadPoint {
    pub coords: V4,
}

impl TriadPoint {
    pub fn new(coords: V4) -> Self {
        Self { coords }
    }

    pub fn flat(x: f64, y: f64, z: f64) -> Self {
        Self {
            coords: V4::new(x, y, z, 0.0),
        }
    }
}

/// Tangent vector with its base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tangent {
    pub base: TriadPoint,
    pub vec: V4,
}

impl Tangent {
    pub fn new(base: TriadPoint, vec: V4) -> Self {
        Self { base, vec }
    }
}

/// Unitary frame of `ξ_p`: `g_ξ(e_i, e_j) = δ_ij`, `e2 = J e1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiFrame {
    pub base: V4,
    pub e1: V4,
    pub e2: V4,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Flat,
    Ellipsoid { a1: f64, a2: f64 },
}

/// Seeded modification of the ambient metric used to build a non-invariant `J`.
///
/// `S(p) = I + Σ_k amp · sin(κ_k · p + φ_k) M_k` with `M_k` symmetric of unit
/// spectral norm, so `S` stays positive definite for `amp · modes < 1`.
#[derive(Clone, Debug)]
struct Perturbation {
    mats: Vec<M4>,
    waves: Vec<V4>,
    phases: Vec<f64>,
    amp: f64,
}

impl Perturbation {
    fn from_seed(seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed, "triad.perturbation");
        let mut mats = Vec::with_capacity(PERTURB_MODES);
        let mut waves = Vec::with_capacity(PERTURB_MODES);
        let mut phases = Vec::with_capacity(PERTURB_MODES);
        for _ in 0..PERTURB_MODES {
            let mut m = M4::zeros();
            for i in 0..4 {
                for j in i..4 {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let s = m.symmetric_eigenvalues();
            let n = s.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            mats.push(m / n);
            waves.push(V4::from_fn(|_, _| rng.random_range(-1.5..1.5)));
            phases.push(rng.random_range(0.0..std::f64::consts::TAU));
        }
        Self {
            mats,
            waves,
            phases,
            amp: PERTURB_AMP,
        }
    }

    fn metric(&self, p: &V4) -> M4 {
        let mut s = M4::identity();
        for k in 0..self.mats.len() {
            s += self.mats[k] * (self.amp * (self.waves[k].dot(p) + self.phases[k]).sin());
        }
        s
    }
}

/// A contact triad selected by id.
#[derive(Clone, Debug)]
pub struct Triad {
    id: String,
    model: Model,
    pert: Option<Perturbation>,
    fd_step: f64,
}

fn parse_kv(body: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for part in body.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::UnknownTriad(body.to_string()))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f(id: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::UnknownTriad(id.to_string()))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::UnknownTriad(id.to_string()));
    }
    Ok(x)
}

impl Triad {
    pub fn flat() -> Self {
        Self {
            id: "r3-standard".into(),
            model: Model::Flat,
            pert: None,
            fd_step: 1e-4,
        }
    }

    pub fn ellipsoid(a1: f64, a2: f64) -> Self {
        Self {
            id: format!("ellipsoid:a1={a1},a2={a2}"),
            model: Model::Ellipsoid { a1, a2 },
            pert: None,
            fd_step: 1e-4,
        }
    }

    pub fn ellipsoid_perturbed(seed: u64, a1: f64, a2: f64) -> Self {
        Self {
            id: format!("ellipsoid-perturbed:seed={seed},a1={a1},a2={a2}"),
            model: Model::Ellipsoid { a1, a2 },
            pert: Some(Perturbation::from_seed(seed)),
            fd_step: 1e-4,
        }
    }

    /// Parse `r3-standard`, `ellipsoid:a1=..,a2=..` or
    /// `ellipsoid-perturbed:seed=..[,a1=..,a2=..]`.
    pub fn from_id(id: &str) -> Result<Self> {
        let id = id.trim();
        if id == "r3-standard" {
            return Ok(Self::flat());
        }
        let (head, body) = id.split_once(':').ok_or_else(|| Error::UnknownTriad(id.to_string()))?;
        let kv = parse_kv(body)?;
        let mut a1 = None;
        let mut a2 = None;
        let mut seed = None;
        for (k, v) in &kv {
            match k.as_str() {
                "a1" => a1 = Some(parse_f(id, v)?),
                "a2" => a2 = Some(parse_f(id, v)?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| Error::UnknownTriad(id.to_string()))?),
                _ => return Err(Error::UnknownTriad(id.to_string())),
            }
        }
        match head {
            "ellipsoid" if seed.is_none() => match (a1, a2) {
                (Some(a1), Some(a2)) => Ok(Self::ellipsoid(a1, a2)),
                _ => Err(Error::UnknownTriad(id.to_string())),
            },
            "ellipsoid-perturbed" => match seed {
                Some(s) => Ok(Self::ellipsoid_perturbed(s, a1.unwrap_or(1.0), a2.unwrap_or(GOLDEN))),
                None => Err(Error::UnknownTriad(id.to_string())),
            },
            _ => Err(Error::UnknownTriad(id.to_string())),
        }
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.model, Model::Flat)
    }

    pub fn is_perturbed(&self) -> bool {
        self.pert.is_some()
    }

    /// Number of ambient coordinates actually used (3 or 4).
    pub fn ambient_dim(&self) -> usize {
        match self.model {
            Model::Flat => 3,
            Model::Ellipsoid { .. } => 4,
        }
    }

    /// Level-set residual of the defining constraint (0 for the flat model).
    pub fn constraint(&self, p: &V4) -> f64 {
        match self.model {
            Model::Flat => p[3],
            Model::Ellipsoid { a1, a2 } => (p[0] * p[0] + p[1] * p[1]) / a1 + (p[2] * p[2] + p[3] * p[3]) / a2 - 1.0,
        }
    }

    /// Closest point on `M` in the Euclidean ambient metric.
    pub fn project_point(&self, p: &V4) -> V4 {
        match self.model {
            Model::Flat => V4::new(p[0], p[1], p[2], 0.0),
            Model::Ellipsoid { a1, a2 } => {
                let r1 = p[0] * p[0] + p[1] * p[1];
                let r2 = p[2] * p[2] + p[3] * p[3];
                // x_k = p_k / (1 + μ/a_k) with g(μ) = Σ r_k / (a_k (1 + μ/a_k)²) - 1 = 0
                let mut mu = 0.0;
                for _ in 0..60 {
                    let d1 = 1.0 + mu / a1;
                    let d2 = 1.0 + mu / a2;
                    let g = r1 / (a1 * d1 * d1) + r2 / (a2 * d2 * d2) - 1.0;
                    let dg = -2.0 * r1 / (a1 * a1 * d1 * d1 * d1) - 2.0 * r2 / (a2 * a2 * d2 * d2 * d2);
                    let step = g / dg;
                    let floor = -a1.min(a2);
                    let next = mu - step;
                    let step = if next <= floor { mu - 0.5 * (mu + floor) } else { step };
                    mu -= step;
                    if step.abs() < 1e-16 * (1.0 + mu.abs()) {
                        break;
                    }
                }
                let s1 = 1.0 / (1.0 + mu / a1);
                let s2 = 1.0 / (1.0 + mu / a2);
                let q = V4::new(p[0] * s1, p[1] * s1, p[2] * s2, p[3] * s2);
                // final radial polish so the constraint holds to roundoff
                let c = (q[0] * q[0] + q[1] * q[1]) / a1 + (q[2] * q[2] + q[3] * q[3]) / a2;
                q / c.sqrt()
            }
        }
    }

    /// Unnormalized normal of the constraint, `None` for the flat model.
    fn normal(&self, p: &V4) -> Option<V4> {
        match self.model {
            Model::Flat => None,
            Model::Ellipsoid { a1, a2 } => Some(V4::new(p[0] / a1, p[1] / a1, p[2] / a2, p[3] / a2)),
        }
    }

    /// Orthogonal projection of `R⁴` onto `T_pM`.
    pub fn tangent_proj(&self, p: &V4) -> M4 {
        match self.normal(p) {
            None => M4::from_diagonal(&V4::new(1.0, 1.0, 1.0, 0.0)),
            Some(n) => M4::identity() - n * n.transpose() / n.norm_squared(),
        }
    }

    /// Covector of `λ` at `p` (ambient components).
    pub fn lambda_cov(&self, p: &V4) -> V4 {
        match self.model {
            Model::Flat => V4::new(-p[1], 0.0, 1.0, 0.0),
            Model::Ellipsoid { .. } => 0.5 * V4::new(-p[1], p[0], -p[3], p[2]),
        }
    }

    /// Jacobian of the covector field `p ↦ λ_p`.
    pub fn lambda_cov_jac(&self, _p: &V4) -> M4 {
        let mut m = M4::zeros();
        match self.model {
            Model::Flat => m[(0, 1)] = -1.0,
            Model::Ellipsoid { .. } => {
                m[(0, 1)] = -0.5;
                m[(1, 0)] = 0.5;
                m[(2, 3)] = -0.5;
                m[(3, 2)] = 0.5;
            }
        }
        m
    }

    pub fn lambda(&self, p: &V4, v: &V4) -> f64 {
        self.lambda_cov(p).dot(v)
    }

    /// Matrix `W` of `dλ`, constant on both models: `dλ(u, v) = uᵀ W v`.
    pub fn dlambda_mat(&self) -> M4 {
        let mut w = M4::zeros();
        w[(0, 1)] = 1.0;
        w[(1, 0)] = -1.0;
        if let Model::Ellipsoid { .. } = self.model {
            w[(2, 3)] = 1.0;
            w[(3, 2)] = -1.0;
        }
        w
    }

    pub fn dlambda(&self, u: &V4, v: &V4) -> f64 {
        u.dot(&(self.dlambda_mat() * v))
    }

    /// Reeb field, extended linearly off `M` for the ellipsoid.
    pub fn reeb(&self, p: &V4) -> V4 {
        match self.model {
            Model::Flat => V4::new(0.0, 0.0, 1.0, 0.0),
            Model::Ellipsoid { a1, a2 } => 2.0 * V4::new(-p[1] / a1, p[0] / a1, -p[3] / a2, p[2] / a2),
        }
    }

    /// Ambient Jacobian of [`Triad::reeb`].
    pub fn reeb_jac(&self, _p: &V4) -> M4 {
        let mut m = M4::zeros();
        if let Model::Ellipsoid { a1, a2 } = self.model {
            m[(0, 1)] = -2.0 / a1;
            m[(1, 0)] = 2.0 / a1;
            m[(2, 3)] = -2.0 / a2;
            m[(3, 2)] = 2.0 / a2;
        }
        m
    }

    /// Smooth basis of `ξ_p` in which the unperturbed metric has unit Gram matrix.
    fn xi_basis(&self, p: &V4) -> (V4, V4) {
        match self.model {
            Model::Flat => {
                let f1 = V4::new(0.0, 1.0, 0.0, 0.0);
                // unit Gram matrix in this basis makes J ∂y = -(∂x + y ∂z)
                (f1, V4::new(-1.0, 0.0, -p[1], 0.0))
            }
            Model::Ellipsoid { .. } => {
                let n = self.normal(p).unwrap();
                let nh = n / n.norm();
                let q = V4::new(-p[1], p[0], -p[3], p[2]);
                let q = q - nh * nh.dot(&q);
                let qh = q / q.norm();
                let strip = |u: V4| u - nh * nh.dot(&u) - qh * qh.dot(&u);
                let u1 = strip(V4::new(-p[2], p[3], p[0], -p[1]));
                let u2 = strip(V4::new(-p[3], -p[2], p[1], p[0]));
                let f1 = u1 / u1.norm();
                let u2 = u2 - f1 * f1.dot(&u2);
                (f1, u2 / u2.norm())
            }
        }
    }

    /// Unitary frame `(e1, e2 = J e1)` of `ξ_p`.
    pub fn frame(&self, p: &V4) -> XiFrame {
        let (f1, f2) = self.xi_basis(p);
        let w = self.dlambda_mat();
        let w12 = f1.dot(&(w * f2));
        let h = match &self.pert {
            None => M2::identity(),
            Some(pt) => {
                let s = pt.metric(p);
                let a = f1.dot(&(s * f1));
                let b = f1.dot(&(s * f2));
                let c = f2.dot(&(s * f2));
                M2::new(a, b, b, c)
            }
        };
        let jm = compatible_j(w12, &h).expect("ambient metric is positive definite");
        // g(f1, f1) = (Ω J)_{00}
        let om = M2::new(0.0, w12, -w12, 0.0);
        let g11 = (om * jm)[(0, 0)];
        let e1 = f1 / g11.sqrt();
        let e2 = (f1 * jm[(0, 0)] + f2 * jm[(1, 0)]) / g11.sqrt();
        XiFrame { base: *p, e1, e2 }
    }

    /// Coordinates of the `ξ`-part of a tangent vector in `frame`.
    pub fn xi_coords_in(&self, fr: &XiFrame, v: &V4) -> V2 {
        let w = self.dlambda_mat();
        let vt = self.tangent_proj(&fr.base) * v;
        V2::new(vt.dot(&(w * fr.e2)), fr.e1.dot(&(w * vt)))
    }

    pub fn xi_coords(&self, p: &V4, v: &V4) -> V2 {
        self.xi_coords_in(&self.frame(p), v)
    }

    pub fn from_xi_coords(fr: &XiFrame, c: &V2) -> V4 {
        fr.e1 * c[0] + fr.e2 * c[1]
    }

    /// Row vectors `(α1, α2, β)` with `ξ`-coordinates `(α1·u, α2·u)` and
    /// `λ(P_T u) = β·u` for a raw ambient vector `u` at `p`.
    pub fn pullback_coef(&self, p: &V4) -> [V4; 3] {
        let fr = self.frame(p);
        let pt = self.tangent_proj(p);
        let w = self.dlambda_mat();
        [pt * (w * fr.e2), pt * (w.transpose() * fr.e1), pt * self.lambda_cov(p)]
    }

    /// `π v = v - λ(v) X_λ` for a tangent vector `v`.
    pub fn pi(&self, p: &V4, v: &V4) -> V4 {
        let vt = self.tangent_proj(p) * v;
        vt - self.reeb(p) * self.lambda(p, &vt)
    }

    /// `J` applied to a tangent vector (with `J X_λ = 0`).
    pub fn apply_j(&self, p: &V4, v: &V4) -> V4 {
        let fr = self.frame(p);
        let c = self.xi_coords_in(&fr, v);
        fr.e2 * c[0] - fr.e1 * c[1]
    }

    /// Ambient matrix of `J ∘ P_T`.
    pub fn j_ambient(&self, p: &V4) -> M4 {
        let fr = self.frame(p);
        let w = self.dlambda_mat();
        let a = w * fr.e2;
        let b = w.transpose() * fr.e1;
        (fr.e2 * a.transpose() - fr.e1 * b.transpose()) * self.tangent_proj(p)
    }

    /// Triad metric `g = dλ(π·, Jπ·) + λ ⊗ λ`.
    pub fn metric(&self, p: &V4, u: &V4, v: &V4) -> f64 {
        let fr = self.frame(p);
        let cu = self.xi_coords_in(&fr, u);
        let cv = self.xi_coords_in(&fr, v);
        let ut = self.tangent_proj(p) * u;
        let vt = self.tangent_proj(p) * v;
        cu.dot(&cv) + self.lambda(p, &ut) * self.lambda(p, &vt)
    }

    fn check_base(p: &TriadPoint, v: &Tangent) -> Result<()> {
        if v.base != *p {
            return Err(Error::Contract(format!(
                "tangent based at {:?}, expected {:?}",
                v.base.coords.as_slice(),
                p.coords.as_slice()
            )));
        }
        Ok(())
    }

    /// `v - λ(v) X_λ(p)`.
    pub fn project_xi(&self, p: &TriadPoint, v: &Tangent) -> Result<Tangent> {
        Self::check_base(p, v)?;
        Ok(Tangent::new(*p, self.pi(&p.coords, &v.vec)))
    }

    pub fn triad_metric(&self, p: &TriadPoint, u: &Tangent, v: &Tangent) -> Result<f64> {
        Self::check_base(p, u)?;
        Self::check_base(p, v)?;
        Ok(self.metric(&p.coords, &u.vec, &v.vec))
    }

    /// `J` compatible with `dλ` built from a metric `h` on `ξ_p`, given as a
    /// Gram matrix in the unitary frame at `p`. Returns `J` in that frame.
    pub fn compatibilize(&self, _p: &TriadPoint, h: &M2) -> Result<M2> {
        compatible_j(1.0, h)
    }

    /// `(L_{X_λ} J)(p)` as a matrix in the unitary frame at `p`.
    ///
    /// Closed form (zero) on the unperturbed models, otherwise a central
    /// difference of the flow pushforward of `J` with step `fd_step`.
    pub fn lie_j(&self, p: &V4) -> M2 {
        if self.pert.is_none() {
            return M2::zeros();
        }
        self.lie_j_numeric(p, self.fd_step)
    }

    /// Pushforward difference quotient for `L_{X_λ} J`, used regardless of
    /// whether a closed form exists.
    pub fn lie_j_numeric(&self, p: &V4, eps: f64) -> M2 {
        let plus = self.pulled_back_j(p, eps);
        let minus = self.pulled_back_j(p, -eps);
        let lt = (plus - minus) / (2.0 * eps);
        let fr = self.frame(p);
        let c1 = self.xi_coords_in(&fr, &(lt * fr.e1));
        let c2 = self.xi_coords_in(&fr, &(lt * fr.e2));
        M2::new(c1[0], c2[0], c1[1], c2[1])
    }

    /// `dφ_t⁻¹ ∘ J(φ_t p) ∘ dφ_t` on ambient vectors.
    fn pulled_back_j(&self, p: &V4, t: f64) -> M4 {
        let (q, phi) = self.flow_with_jacobian(p, t, 1);
        let inv = phi.try_inverse().expect("flow jacobian is invertible");
        inv * self.j_ambient(&q) * phi
    }

    /// RK4 flow of the Reeb field together with its variational equation.
    pub fn flow_with_jacobian(&self, p: &V4, time: f64, steps: usize) -> (V4, M4) {
        let h = time / steps as f64;
        let mut x = *p;
        let mut y = M4::identity();
        for _ in 0..steps {
            let k1 = self.reeb(&x);
            let m1 = self.reeb_jac(&x) * y;
            let x2 = x + k1 * (0.5 * h);
            let k2 = self.reeb(&x2);
            let m2 = self.reeb_jac(&x2) * (y + m1 * (0.5 * h));
            let x3 = x + k2 * (0.5 * h);
            let k3 = self.reeb(&x3);
            let m3 = self.reeb_jac(&x3) * (y + m2 * (0.5 * h));
            let x4 = x + k3 * h;
            let k4 = self.reeb(&x4);
            let m4 = self.reeb_jac(&x4) * (y + m3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            y += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
            x = self.project_point(&x);
        }
        (x, y)
    }

    /// Uniformly spread sample points on `M` (a box for the flat model).
    pub fn sample_points<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<V4> {
        (0..n)
            .map(|_| match self.model {
                Model::Flat => V4::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    0.0,
                ),
                Model::Ellipsoid { .. } => {
                    let g = V4::from_fn(|_, _| StandardNormal.sample(&mut *rng));
                    self.project_point(&g)
                }
            })
            .collect()
    }

    /// Random ambient vector projected to `T_pM`.
    pub fn random_tangent<R: Rng>(&self, rng: &mut R, p: &V4) -> V4 {
        let g = V4::from_fn(|_, _| StandardNormal.sample(&mut *rng));
        self.tangent_proj(p) * g
    }
}

/// Compatible `J` from `dλ|ξ = ω12 f¹∧f²` and a metric Gram matrix `h` in the
/// basis `(f1, f2)`: `A = -h⁻¹Ω` (so `dλ(u, v) = h(Au, v)`), `J = A (-A²)^{-1/2}`.
pub fn compatible_j(omega12: f64, h: &M2) -> Result<M2> {
    let sym = (h[(0, 1)] - h[(1, 0)]).abs();
    if h[(0, 0)] <= 0.0 || h.determinant() <= 0.0 || sym > 1e-12 * h.norm() {
        return Err(Error::Singular(format!(
            "metric on ξ is not positive definite: {:?}",
            h.as_slice()
        )));
    }
    if omega12 == 0.0 {
        return Err(Error::Singular("dλ vanishes on ξ".into()));
    }
    let om = M2::new(0.0, omega12, -omega12, 0.0);
    let hinv = h
        .try_inverse()
        .ok_or_else(|| Error::Singular("metric not invertible".into()))?;
    let a = -hinv * om;
    // A is traceless, so A² = -det(A) I
    let d = a.determinant();
    if d <= 0.0 {
        return Err(Error::Singular("dλ and h not compatible".into()));
    }
    let mut jm = a / d.sqrt();
    if (om * jm)[(0, 0)] < 0.0 {
        jm = -jm;
    }
    Ok(jm)
}

/// Check `J² = -1`, `dλ(J·, J·) = dλ` and taming for a 2×2 frame matrix;
/// returns the largest violation.
pub fn compatibility_defect(omega12: f64, jm: &M2) -> f64 {
    let om = M2::new(0.0, omega12, -omega12, 0.0);
    let sq = (jm * jm + M2::identity()).abs().max();
    let inv = (jm.transpose() * om * jm - om).abs().max();
    let g = om * jm;
    let sym = (g[(0, 1)] - g[(1, 0)]).abs();
    let tame = if g[(0, 0)] > 0.0 && g.determinant() > 0.0 {
        0.0
    } else {
        1.0
    };
    sq.max(inv).max(sym).max(tame)
}

/// `J` in a unitary frame.
pub fn j_frame() -> M2 {
    j0()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::max_abs2;

    #[test]
    fn parse_ids() {
        assert!(Triad::from_id("r3-standard").unwrap().is_flat());
        let e = Triad::from_id("ellipsoid:a1=1,a2=1.618033988749895").unwrap();
        assert_eq!(e.model(), &Model::Ellipsoid { a1: 1.0, a2: GOLDEN });
        assert!(Triad::from_id("ellipsoid-perturbed:seed=11").unwrap().is_perturbed());
        for bad in [
            "bogus",
            "ellipsoid:a1=1",
            "ellipsoid:a1=-1,a2=1",
            "ellipsoid:a1=1,a2=2,q=3",
        ] {
            assert!(matches!(Triad::from_id(bad), Err(Error::UnknownTriad(_))), "{bad}");
        }
    }

    #[test]
    fn flat_projection_example() {
        let t = Triad::flat();
        let p = TriadPoint::flat(1.0, 2.0, 3.0);
        let v = Tangent::new(p, V4::new(1.0, 0.0, 0.0, 0.0));
        let r = t.project_xi(&p, &v).unwrap();
        assert!((r.vec - V4::new(1.0, 0.0, 2.0, 0.0)).norm() < 1e-15);
        let x = Tangent::new(p, t.reeb(&p.coords));
        assert!(t.project_xi(&p, &x).unwrap().vec.norm() < 1e-15);
        let other = Tangent::new(TriadPoint::flat(0.0, 0.0, 0.0), v.vec);
        assert!(matches!(t.project_xi(&p, &other), Err(Error::Contract(_))));
    }

    #[test]
    fn flat_metric_and_j_sign() {
        let t = Triad::flat();
        let o = TriadPoint::flat(0.0, 0.0, 0.0);
        let dy = Tangent::new(o, V4::new(0.0, 1.0, 0.0, 0.0));
        assert!((t.triad_metric(&o, &dy, &dy).unwrap() - 1.0).abs() < 1e-15);
        let p = V4::new(0.3, -1.2, 0.5, 0.0);
        let jdy = t.apply_j(&p, &V4::new(0.0, 1.0, 0.0, 0.0));
        assert!((jdy - V4::new(-1.0, 0.0, 1.2, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn frames_are_unitary() {
        let mut rng = crate::rng::stream(3, "test.frames");
        for t in [
            Triad::flat(),
            Triad::ellipsoid(1.0, GOLDEN),
            Triad::ellipsoid_perturbed(5, 1.0, GOLDEN),
        ] {
            for p in t.sample_points(&mut rng, 50) {
                let fr = t.frame(&p);
                assert!(
                    t.lambda(&p, &fr.e1).abs() < 1e-12,
                    "{} {:?} {}",
                    t.id(),
                    p,
                    t.lambda(&p, &fr.e1)
                );
                assert!(t.lambda(&p, &fr.e2).abs() < 1e-12);
                assert!((t.metric(&p, &fr.e1, &fr.e1) - 1.0).abs() < 1e-12);
                assert!((t.metric(&p, &fr.e2, &fr.e2) - 1.0).abs() < 1e-12);
                assert!(t.metric(&p, &fr.e1, &fr.e2).abs() < 1e-12);
                assert!((t.dlambda(&fr.e1, &fr.e2) - 1.0).abs() < 1e-12);
                assert!((t.apply_j(&p, &fr.e1) - fr.e2).norm() < 1e-12);
                assert!(t.constraint(&p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compatibilize_examples() {
        let t = Triad::flat();
        let o = TriadPoint::flat(0.0, 0.0, 0.0);
        let j = t.compatibilize(&o, &M2::identity()).unwrap();
        assert!(max_abs2(&(j - j0())) < 1e-15);
        let j2 = t.compatibilize(&o, &(M2::identity() * 2.0)).unwrap();
        assert!(max_abs2(&(j2 - j0())) < 1e-15);
        let h = M2::new(2.0, 0.7, 0.7, 0.5);
        let j3 = t.compatibilize(&o, &h).unwrap();
        assert!(compatibility_defect(1.0, &j3) < 1e-12);
        assert!(matches!(
            t.compatibilize(&o, &M2::new(1.0, 2.0, 2.0, 1.0)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn lie_derivative_vanishes_on_invariant_models() {
        let mut rng = crate::rng::stream(1, "test.lie");
        for t in [Triad::flat(), Triad::ellipsoid(1.0, GOLDEN)] {
            for p in t.sample_points(&mut rng, 10) {
                assert!(max_abs2(&t.lie_j_numeric(&p, 1e-4)) < 1e-8);
            }
        }
    }

    #[test]
    fn lie_derivative_structure_on_perturbed() {
        let t = Triad::ellipsoid_perturbed(9, 1.0, GOLDEN);
        let mut rng = crate::rng::stream(2, "test.lie");
        let mut seen = 0.0_f64;
        for p in t.sample_points(&mut rng, 20) {
            let l = t.lie_j(&p);
            seen = seen.max(max_abs2(&l));
            assert!(max_abs2(&(l * j0() + j0() * l)) < 1e-7);
            let lj = l * j0();
            assert!((lj[(0, 1)] - lj[(1, 0)]).abs() < 1e-7);
            assert!((l[(0, 1)] - l[(1, 0)]).abs() < 1e-7);
        }
        assert!(seen > 1e-3);
    }
}
