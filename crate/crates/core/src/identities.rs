//! Refinement checks of the tensorial identities and inequalities satisfied by
//! contact Cauchy-Riemann maps, plus the pointwise exterior algebra on the
//! cylinder `[0, L] × S¹` with the flat metric `dτ² + dt²`.
//!
//! Conventions: `*dτ = dt`, `*dt = -dτ` (so `*β = -β∘j` on 1-forms),
//! `δ = -*d*`, `Δ = dδ + δd`. Sections of `w*ξ` are stored as coordinates in
//! the unitary frame of the triad, and `∇^π = d + ω J` there.

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;

use crate::cylfield::{energies_from, node_data, CylinderGrid, MapField, NodeData};
use crate::error::{Error, Result};
use crate::la::{j0, norm2, rot, M2, V2, V4};
use crate::triad::{ConnectionEval, Triad};

type V3 = Vector3<f64>;

/// Residuals at or below this multiple of the term scale count as exact.
pub const ROUNDING_FLOOR: f64 = 1e-10;
/// Finest residual must be below this fraction of the term scale.
pub const RELATIVE_CAP: f64 = 0.05;
/// Tolerance of the pure-algebra identities.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Safety factor on sampled tensor sup-norms.
pub const NORM_SAFETY: f64 = 1.1;

// ---------------------------------------------------------------- algebra

/// Pointwise `ξ`-valued form on the cylinder. Components in the basis
/// `{1}`, `{dτ, dt}` or `{dτ∧dt}` by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct XiForm {
    pub deg: usize,
    pub c: Vec<V2>,
}

/// Pointwise real form, same basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarForm {
    pub deg: usize,
    pub c: Vec<f64>,
}

fn rank(deg: usize) -> usize {
    if deg == 1 {
        2
    } else {
        1
    }
}

impl XiForm {
    pub fn new(deg: usize, c: Vec<V2>) -> Result<Self> {
        if deg > 2 || c.len() != rank(deg) {
            return Err(Error::Argument(format!(
                "bad form of degree {deg} with {} components",
                c.len()
            )));
        }
        Ok(Self { deg, c })
    }

    pub fn random<R: Rng>(rng: &mut R, deg: usize) -> Self {
        let c = (0..rank(deg))
            .map(|_| V2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self { deg, c }
    }

    /// `⟨α1 ⊗ ζ1, α2 ⊗ ζ2⟩ = h(α1, α2) g(ζ1, ζ2)`.
    pub fn inner(&self, other: &Self) -> f64 {
        if self.deg != other.deg {
            return 0.0;
        }
        self.c.iter().zip(&other.c).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn hodge(&self) -> Self {
        let c = match self.deg {
            1 => vec![-self.c[1], self.c[0]],
            _ => self.c.clone(),
        };
        Self { deg: 2 - self.deg, c }
    }

    /// `β∘j` on 1-forms, `j∂τ = ∂t`.
    pub fn compose_j(&self) -> Self {
        assert_eq!(self.deg, 1);
        Self {
            deg: 1,
            c: vec![self.c[1], -self.c[0]],
        }
    }

    /// Wedge product paired through the fibre metric.
    pub fn wedge_dot(&self, other: &Self) -> Option<ScalarForm> {
        let deg = self.deg + other.deg;
        let c = match (self.deg, other.deg) {
            (0, _) => other.c.iter().map(|b| self.c[0].dot(b)).collect(),
            (_, 0) => self.c.iter().map(|a| a.dot(&other.c[0])).collect(),
            (1, 1) => vec![self.c[0].dot(&other.c[1]) - self.c[1].dot(&other.c[0])],
            _ => return None,
        };
        Some(ScalarForm { deg, c })
    }
}

impl ScalarForm {
    pub fn hodge(&self) -> Self {
        let c = match self.deg {
            1 => vec![-self.c[1], self.c[0]],
            _ => self.c.clone(),
        };
        Self { deg: 2 - self.deg, c }
    }
}

/// Inner-product/star defect `⟨β1, β2⟩ - *(β1 ∧ *β2)`.
pub fn inner_star_defect(b1: &XiForm, b2: &XiForm) -> Result<f64> {
    if b1.deg != b2.deg {
        return Err(Error::Argument("forms of different degree".into()));
    }
    let w = b1.wedge_dot(&b2.hodge()).expect("degrees add to two");
    Ok(b1.inner(b2) - w.hodge().c[0])
}

/// Sign conventions: `** = -1` and `* = -(·)∘j` on 1-forms, `** = 1` on 0-
/// and 2-forms.
pub fn hodge_self_test() -> Result<()> {
    let b = XiForm::new(1, vec![V2::new(0.3, -1.7), V2::new(2.1, 0.4)])?;
    let bb = b.hodge().hodge();
    let neg_j = b.compose_j();
    let ok1 = bb.c.iter().zip(&b.c).all(|(x, y)| (x + y).norm() == 0.0);
    let ok2 = b.hodge().c.iter().zip(&neg_j.c).all(|(x, y)| (x + y).norm() == 0.0);
    let s = XiForm::new(0, vec![V2::new(1.5, -0.5)])?;
    let ok3 = s.hodge().hodge() == s;
    if ok1 && ok2 && ok3 {
        Ok(())
    } else {
        Err(Error::Contract("Hodge star convention self-test failed".into()))
    }
}

// ---------------------------------------------------------------- reports

/// One resolution of one identity.
#[derive(Clone, Debug)]
pub struct Level {
    pub n: usize,
    pub residual: f64,
    /// Magnitude of the largest term, for relative caps.
    pub scale: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    /// Discretization error decaying at the given order.
    Convergent(f64),
    /// Holds to `ALGEBRA_TOL` at every resolution.
    Exact,
    /// One-sided check; the residual is the relative violation.
    Inequality,
}

#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub name: String,
    pub kind: Kind,
    pub resolutions: Vec<usize>,
    pub residuals: Vec<f64>,
    pub scales: Vec<f64>,
    pub order: Option<f64>,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Least-squares slope of `-log r` against `log n`.
pub fn fitted_order(ns: &[usize], rs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(rs)
        .filter(|(_, r)| **r > 0.0 && r.is_finite())
        .map(|(n, r)| ((*n as f64).ln(), -r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl IdentityReport {
    pub fn from_levels(name: &str, kind: Kind, mut levels: Vec<Level>) -> Self {
        levels.sort_by_key(|l| l.n);
        let resolutions: Vec<usize> = levels.iter().map(|l| l.n).collect();
        let residuals: Vec<f64> = levels.iter().map(|l| l.residual).collect();
        let scales: Vec<f64> = levels.iter().map(|l| l.scale).collect();
        let mut notes: Vec<String> = Vec::new();
        for l in &levels {
            for s in &l.notes {
                let s = format!("n={}: {s}", l.n);
                if !notes.contains(&s) {
                    notes.push(s);
                }
            }
        }
        let floor = |i: usize| residuals[i] <= ROUNDING_FLOOR * scales[i].max(1.0);
        let finite = residuals.iter().all(|r| r.is_finite());
        let (order, pass) = match kind {
            Kind::Exact => {
                let ok = (0..levels.len()).all(|i| residuals[i] <= ALGEBRA_TOL * scales[i].max(1.0));
                (None, finite && ok && !levels.is_empty())
            }
            Kind::Inequality => (
                None,
                finite && residuals.iter().all(|r| *r <= 0.0) && !levels.is_empty(),
            ),
            Kind::Convergent(expected) => {
                if levels.is_empty() {
                    (None, false)
                } else if (0..levels.len()).all(floor) {
                    notes.push("residual at rounding level at every resolution".into());
                    (None, finite)
                } else {
                    let order = fitted_order(&resolutions, &residuals);
                    let last = levels.len() - 1;
                    let band = order.is_some_and(|p| p >= 0.8 * expected && p <= 1.5 * expected);
                    let cap = residuals[last] <= RELATIVE_CAP * scales[last];
                    let mono = residuals
                        .windows(2)
                        .enumerate()
                        .all(|(i, w)| floor(i + 1) || w[1] <= w[0]);
                    if let Some(p) = order {
                        if p.abs() < 0.2 && residuals[last] > RELATIVE_CAP * scales[last] {
                            notes.push(
                                "residual stagnates at a resolution-independent value: check sign conventions".into(),
                            );
                        }
                    }
                    (order, finite && band && cap && mono)
                }
            }
        };
        Self {
            name: name.to_string(),
            kind,
            resolutions,
            residuals,
            scales,
            order,
            pass,
            notes,
        }
    }

    pub fn expected_order(&self) -> Option<f64> {
        match self.kind {
            Kind::Convergent(p) => Some(p),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------- pullback

/// First-order data, connection and `L_{X_λ} J` at every node of a map.
pub struct Pullback<'a> {
    pub triad: &'a Triad,
    pub grid: CylinderGrid,
    pub nd: Vec<NodeData>,
    pub ce: Vec<ConnectionEval>,
    /// `ω(∂τ w)`, `ω(∂t w)`.
    pub om_tau: Vec<f64>,
    pub om_t: Vec<f64>,
}

impl<'a> Pullback<'a> {
    pub fn new(triad: &'a Triad, w: &MapField) -> Result<Self> {
        let g = w.grid;
        if g.ntau < 7 || g.nt < 4 {
            return Err(Error::Argument("identity checks need at least 7 × 4 nodes".into()));
        }
        let nd = node_data(triad, w);
        let ce: Vec<ConnectionEval> = nd.par_iter().map(|d| triad.connection_at(&d.p)).collect();
        let om_tau = nd.iter().zip(&ce).map(|(d, c)| c.omega_of(triad, &d.u)).collect();
        let om_t = nd.iter().zip(&ce).map(|(d, c)| c.omega_of(triad, &d.v)).collect();
        Ok(Self {
            triad,
            grid: g,
            nd,
            ce,
            om_tau,
            om_t,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.nt
    }

    pub fn lie(&self, k: usize) -> M2 {
        self.ce[k].lie
    }

    /// Nodes in the fixed band `τ ∈ [L/4, 3L/4]`, at least two rows away
    /// from the ends. Solved fields carry boundary layers at the Dirichlet
    /// rows, which the band avoids.
    pub fn core(&self) -> Vec<usize> {
        let g = &self.grid;
        let lo = ((g.ntau - 1) as f64 / 4.0).ceil() as usize;
        let lo = lo.max(2);
        let hi = g.ntau - lo;
        (lo * g.nt..hi * g.nt).collect()
    }

    pub fn cov_tau(&self, s: &[V2]) -> Vec<V2> {
        (0..s.len())
            .map(|k| self.grid.dtau(s, k) + j0() * s[k] * self.om_tau[k])
            .collect()
    }

    pub fn cov_t(&self, s: &[V2]) -> Vec<V2> {
        (0..s.len())
            .map(|k| self.grid.dt(s, k) + j0() * s[k] * self.om_t[k])
            .collect()
    }

    /// Compact `∇τ∇τ s`: neighbours parallel transported along the edges,
    /// trapezoidal connection integral. Zero on the end rows.
    pub fn cov_tau2(&self, s: &[V2]) -> Vec<V2> {
        let g = &self.grid;
        let h = g.htau();
        (0..s.len())
            .map(|k| {
                let (i, j) = (k / g.nt, k % g.nt);
                if i == 0 || i + 1 == g.ntau {
                    return V2::zeros();
                }
                let (kp, km) = (g.idx(i + 1, j), g.idx(i - 1, j));
                let tp = 0.5 * h * (self.om_tau[k] + self.om_tau[kp]);
                let tm = 0.5 * h * (self.om_tau[k] + self.om_tau[km]);
                (rot(tp) * s[kp] - s[k] * 2.0 + rot(-tm) * s[km]) / (h * h)
            })
            .collect()
    }

    pub fn cov_t2(&self, s: &[V2]) -> Vec<V2> {
        let g = &self.grid;
        let h = g.ht();
        (0..s.len())
            .map(|k| {
                let (i, j) = (k / g.nt, k % g.nt);
                let (kp, km) = (g.idx(i, (j + 1) % g.nt), g.idx(i, (j + g.nt - 1) % g.nt));
                let tp = 0.5 * h * (self.om_t[k] + self.om_t[kp]);
                let tm = 0.5 * h * (self.om_t[k] + self.om_t[km]);
                (rot(tp) * s[kp] - s[k] * 2.0 + rot(-tm) * s[km]) / (h * h)
            })
            .collect()
    }

    /// Five-point Laplacian `∂τ² + ∂t²` of a scalar; zero on the end rows.
    pub fn lap(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (hs, ht) = (g.htau(), g.ht());
        (0..f.len())
            .map(|k| {
                let (i, j) = (k / g.nt, k % g.nt);
                if i == 0 || i + 1 == g.ntau {
                    return 0.0;
                }
                let ftt = f[g.idx(i, (j + 1) % g.nt)] - 2.0 * f[k] + f[g.idx(i, (j + g.nt - 1) % g.nt)];
                let fss = f[g.idx(i + 1, j)] - 2.0 * f[k] + f[g.idx(i - 1, j)];
                fss / (hs * hs) + ftt / (ht * ht)
            })
            .collect()
    }

    /// `κ` with `R^π(∂τ w, ∂t w) = κ J`.
    pub fn kappa(&self) -> Vec<f64> {
        if self.triad.is_flat() {
            return vec![0.0; self.nd.len()];
        }
        self.nd
            .par_iter()
            .map(|d| self.triad.curvature_pi(&d.p, &d.u, &d.v)[(1, 0)])
            .collect()
    }

    /// `∂^π w(∂τ) = ½(ζ - Jη)`.
    pub fn del(&self) -> Vec<V2> {
        self.nd.iter().map(|d| d.del_tau()).collect()
    }

    fn on_shell_notes(&self) -> Vec<String> {
        let e = energies_from(&self.grid, &self.nd);
        let scale = (2.0 * e.e_pi.max(0.0)).sqrt();
        if e.res_dbar > 1e-2 * scale.max(1e-300) {
            vec![format!(
                "precondition: field is not on shell (∂̄ residual {:.3e}); identity holds on shell only",
                e.res_dbar
            )]
        } else {
            Vec::new()
        }
    }
}

/// `d^∇` of a 1-form `(βτ, βt)`: the `dτ∧dt` coefficient.
pub fn d_one(pb: &Pullback, bt: &[V2], bs: &[V2]) -> Vec<V2> {
    let a = pb.cov_tau(bs);
    let b = pb.cov_t(bt);
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

/// `δ^∇` of a 1-form.
pub fn delta_one(pb: &Pullback, bt: &[V2], bs: &[V2]) -> Vec<V2> {
    let a = pb.cov_tau(bt);
    let b = pb.cov_t(bs);
    a.iter().zip(&b).map(|(x, y)| -(x + y)).collect()
}

/// `δ^∇` of a 2-form `σ dτ∧dt`.
pub fn delta_two(pb: &Pullback, s: &[V2]) -> (Vec<V2>, Vec<V2>) {
    let a = pb.cov_t(s);
    let b = pb.cov_tau(s);
    (a, b.iter().map(|x| -x).collect())
}

/// `Δ^∇ = d^∇δ^∇ + δ^∇d^∇` on 1-forms by composing the discrete operators.
pub fn hodge_laplacian(pb: &Pullback, bt: &[V2], bs: &[V2]) -> (Vec<V2>, Vec<V2>) {
    let rho = delta_one(pb, bt, bs);
    let sig = d_one(pb, bt, bs);
    let (d1, d2) = (pb.cov_tau(&rho), pb.cov_t(&rho));
    let (e1, e2) = delta_two(pb, &sig);
    (
        d1.iter().zip(&e1).map(|(a, b)| a + b).collect(),
        d2.iter().zip(&e2).map(|(a, b)| a + b).collect(),
    )
}

/// `-Tr∇²β + Σ α^j ∧ (e_i ⌟ R(e_i, e_j)β)` with compact second differences.
/// On the cylinder the curvature term is `(-κ J βt, κ J βτ)`.
pub fn weitzenboeck_laplacian(pb: &Pullback, kappa: &[f64], bt: &[V2], bs: &[V2]) -> (Vec<V2>, Vec<V2>) {
    let tr = |b: &[V2]| -> Vec<V2> {
        let a = pb.cov_tau2(b);
        let c = pb.cov_t2(b);
        a.iter().zip(&c).map(|(x, y)| -(x + y)).collect()
    };
    let (mut r1, mut r2) = (tr(bt), tr(bs));
    for k in 0..r1.len() {
        r1[k] -= j0() * bs[k] * kappa[k];
        r2[k] += j0() * bt[k] * kappa[k];
    }
    (r1, r2)
}

/// Max over `idx` of `|f|`.
fn max_on(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&k| f(k)).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- identities

/// `∇τζ + J∇tζ - ½ a_t Lζ + ½ a_τ LJζ` at one resolution.
pub fn fundamental_equation_at(triad: &Triad, w: &MapField) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let zeta: Vec<V2> = pb.nd.iter().map(|d| d.zeta).collect();
    let (zs, zt) = (pb.cov_tau(&zeta), pb.cov_t(&zeta));
    let core = pb.core();
    let jm = j0();
    let res = max_on(&core, |k| {
        let d = &pb.nd[k];
        let l = pb.lie(k);
        (zs[k] + jm * zt[k] - l * d.zeta * (0.5 * d.a_t) + l * jm * d.zeta * (0.5 * d.a_tau)).norm()
    });
    let scale = max_on(&core, |k| zs[k].norm().max(zt[k].norm()));
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: pb.on_shell_notes(),
    })
}

/// `d^{∇π}(d^π w)(∂τ, ∂t) = ∇τη - ∇tζ` against the torsion and wedge terms,
/// valid for every smooth map.
pub fn two_form_equation_at(triad: &Triad, w: &MapField) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let zeta: Vec<V2> = pb.nd.iter().map(|d| d.zeta).collect();
    let eta: Vec<V2> = pb.nd.iter().map(|d| d.eta).collect();
    let lhs = d_one(&pb, &zeta, &eta);
    let core = pb.core();
    let jm = j0();
    let mut res = 0.0f64;
    let mut torsion = 0.0f64;
    for &k in &core {
        let d = &pb.nd[k];
        let fr = &pb.ce[k].frame.xi;
        let (zv, ev) = (Triad::from_xi_coords(fr, &d.zeta), Triad::from_xi_coords(fr, &d.eta));
        let tpi = triad.xi_coords_in(fr, &pb.ce[k].torsion(triad, &zv, &ev));
        let l = pb.lie(k);
        let rhs = tpi + (l * jm * d.eta * d.a_tau - l * jm * d.zeta * d.a_t) * 0.5;
        res = res.max((lhs[k] - rhs).norm());
        torsion = torsion.max(tpi.norm());
    }
    let scale = max_on(&core, |k| lhs[k].norm());
    let mut notes = pb.on_shell_notes();
    notes.push(format!("max |T^π(ζ, η)| = {torsion:.3e}"));
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes,
    })
}

/// `|T^π(∂^π w(∂τ), ∂^π w(∂t))|` over the core nodes.
pub fn torsion_11_at(triad: &Triad, w: &MapField) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let core = pb.core();
    let jm = j0();
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &core {
        let del = pb.nd[k].del_tau();
        let fr = &pb.ce[k].frame.xi;
        let a = Triad::from_xi_coords(fr, &del);
        let b = Triad::from_xi_coords(fr, &(jm * del));
        let t = triad.xi_coords_in(fr, &pb.ce[k].torsion(triad, &a, &b));
        res = res.max(t.norm());
        scale = scale.max(del.norm_squared());
    }
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: Vec::new(),
    })
}

struct Density {
    lhs: Vec<f64>,
    rhs: Vec<f64>,
}

fn density_terms(pb: &Pullback) -> Density {
    let jm = j0();
    let del = pb.del();
    let bt = del.clone();
    let bs: Vec<V2> = del.iter().map(|x| jm * x).collect();
    let kappa = pb.kappa();
    let e: Vec<f64> = pb.nd.iter().map(|d| d.e_pi()).collect();
    let lap = pb.lap(&e);
    let (ts, tt, ss, st) = (pb.cov_tau(&bt), pb.cov_t(&bt), pb.cov_tau(&bs), pb.cov_t(&bs));
    let sigma: Vec<V2> = (0..del.len())
        .map(|k| {
            let (d, l) = (&pb.nd[k], pb.lie(k));
            l * jm * del[k] * d.a_t + l * del[k] * d.a_tau
        })
        .collect();
    let (gs, gt) = (pb.cov_tau(&sigma), pb.cov_t(&sigma));
    let rhs = (0..del.len())
        .map(|k| {
            let grad = ts[k].norm_squared() + tt[k].norm_squared() + ss[k].norm_squared() + st[k].norm_squared();
            let ric = 2.0 * kappa[k] * del[k].norm_squared();
            let dom = gt[k].dot(&del[k]) - gs[k].dot(&(jm * del[k]));
            grad + ric + dom
        })
        .collect();
    Density {
        lhs: lap.iter().map(|x| 0.5 * x).collect(),
        rhs,
    }
}

/// `-½Δe^π = |∇^π(∂^π w)|² + ⟨Ric(∂^π w), ∂^π w⟩ + ⟨δ^∇(...), ∂^π w⟩` with the
/// flat domain (`K = 0`, `Δ = -(∂τ² + ∂t²)`).
pub fn weitzenboeck_density_at(triad: &Triad, w: &MapField) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let dt = density_terms(&pb);
    let core = pb.core();
    let res = max_on(&core, |k| (dt.lhs[k] - dt.rhs[k]).abs());
    let scale = max_on(&core, |k| dt.lhs[k].abs().max(dt.rhs[k].abs()));
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: pb.on_shell_notes(),
    })
}

/// Sampled `C⁰` norms of the tensors entering the inequality constants.
#[derive(Clone, Copy, Debug, Default)]
pub struct TensorNorms {
    pub lie: f64,
    pub nabla_lie: f64,
    pub curvature: f64,
}

impl TensorNorms {
    /// `C = 2‖L‖² + ‖∇L‖ + ‖Ric‖ + 1`.
    pub fn apriori_constant(&self) -> f64 {
        2.0 * self.lie.powi(2) + self.nabla_lie + self.curvature + 1.0
    }

    /// `9‖L‖² + 4‖∇L‖ + 4‖Ric‖ + 4`.
    pub fn coercive_c1(&self) -> f64 {
        9.0 * self.lie.powi(2) + 4.0 * self.nabla_lie + 4.0 * self.curvature + 4.0
    }
}

/// `∇_{E_a}(L_{X_λ} J)` in the unitary frame, outer step `s`.
pub fn nabla_lie(triad: &Triad, ce: &ConnectionEval, a: usize, s: f64) -> M2 {
    let e = ce.frame.e[a];
    let qp = triad.project_point(&(ce.base + e * s));
    let qm = triad.project_point(&(ce.base - e * s));
    // frames at qp, qm are the unitary frames there; their coordinates
    // differ from transported ones by the connection term below
    let d = (triad.lie_j(&qp) - triad.lie_j(&qm)) / (2.0 * s);
    let jm = j0();
    d + (jm * ce.lie - ce.lie * jm) * ce.omega[a]
}

/// Norms over up to `max_samples` nodes of the image, times `NORM_SAFETY`.
pub fn sample_norms(triad: &Triad, w: &MapField, max_samples: usize) -> TensorNorms {
    let n = w.nodes.len();
    let step = n.div_ceil(max_samples.max(1)).max(1);
    let pts: Vec<V4> = w.nodes.iter().step_by(step).copied().collect();
    let per: Vec<TensorNorms> = pts
        .par_iter()
        .map(|p| {
            let ce = triad.connection_at(p);
            let lie = norm2(&ce.lie);
            let nabla_lie = if triad.is_perturbed() {
                (0..3)
                    .map(|a| norm2(&nabla_lie(triad, &ce, a, 1e-3)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            } else {
                0.0
            };
            let curvature = if triad.is_flat() {
                0.0
            } else {
                let f = triad.curvature_form(p, 1e-3);
                (f[0][1].powi(2) + f[0][2].powi(2) + f[1][2].powi(2)).sqrt()
            };
            TensorNorms {
                lie,
                nabla_lie,
                curvature,
            }
        })
        .collect();
    let m = per.iter().fold(TensorNorms::default(), |a, b| TensorNorms {
        lie: a.lie.max(b.lie),
        nabla_lie: a.nabla_lie.max(b.nabla_lie),
        curvature: a.curvature.max(b.curvature),
    });
    TensorNorms {
        lie: m.lie * NORM_SAFETY,
        nabla_lie: m.nabla_lie * NORM_SAFETY,
        curvature: m.curvature * NORM_SAFETY,
    }
}

/// `Δe ≤ C e²` nodewise for `e = |dw|²`. The residual is the largest
/// relative violation `(Δe - Ce²)/(Ce² + |Δe|)`, clipped at zero.
pub fn apriori_inequality_at(triad: &Triad, w: &MapField, norms: &TensorNorms) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let c = norms.apriori_constant();
    let e: Vec<f64> = pb
        .nd
        .iter()
        .map(|d| d.e_pi() + d.a_tau.powi(2) + d.a_t.powi(2))
        .collect();
    let lap = pb.lap(&e);
    let core = pb.core();
    let mut viol = 0.0f64;
    let mut slack = f64::INFINITY;
    for &k in &core {
        let de = -lap[k];
        let b = c * e[k] * e[k];
        let den = b + de.abs();
        if den > 0.0 {
            viol = viol.max((de - b) / den);
        }
        slack = slack.min(b - de);
    }
    let notes = vec![
        format!("C = {c:.6} from sampled norms x{NORM_SAFETY}"),
        format!("min slack Ce² - Δe = {slack:.6e}"),
    ];
    Ok(Level {
        n: pb.n(),
        residual: viol.max(0.0),
        scale: 1.0,
        notes,
    })
}

/// Nested `τ`-bands `D1 = [a1, b1] × S¹ ⊂ D2 = [a2, b2] × S¹`.
#[derive(Clone, Copy, Debug)]
pub struct Band {
    pub a: f64,
    pub b: f64,
}

/// Raised-cosine cutoff equal to one on `d1` and vanishing off `d2`.
pub fn cutoff(d1: Band, d2: Band, tau: f64) -> f64 {
    let ramp = |s: f64| 0.5 * (1.0 - (std::f64::consts::PI * s).cos());
    if tau <= d2.a || tau >= d2.b {
        0.0
    } else if tau < d1.a {
        ramp((tau - d2.a) / (d1.a - d2.a))
    } else if tau > d1.b {
        ramp((d2.b - tau) / (d2.b - d1.b))
    } else {
        1.0
    }
}

/// `‖dχ‖_{C⁰} = π / (2 · shortest ramp)`.
pub fn cutoff_gradient(d1: Band, d2: Band) -> f64 {
    std::f64::consts::PI / (2.0 * (d1.a - d2.a).min(d2.b - d1.b))
}

/// Values of the coercive estimate at one resolution.
#[derive(Clone, Copy, Debug)]
pub struct Coercive {
    pub lhs: f64,
    pub bound: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `‖∇(dw)‖²_{L²(D1)} ≤ C1 ‖dw‖²_{L²(D2)} + C2 ‖dw‖⁴_{L⁴(D2)}` with
/// `C1 = 16‖dχ‖²` (`K = 0`) and `C2 = 2(9‖L‖² + 4‖∇L‖ + 4‖Ric‖ + 4)`.
pub fn coercive_values(triad: &Triad, w: &MapField, d1: Band, d2: Band, norms: &TensorNorms) -> Result<Coercive> {
    let g = &w.grid;
    let nested = 0.0 <= d2.a && d2.a < d1.a && d1.a < d1.b && d1.b < d2.b && d2.b <= g.l;
    if !nested {
        return Err(Error::Argument(format!(
            "domains not nested: D1 = [{}, {}], D2 = [{}, {}] in [0, {}]",
            d1.a, d1.b, d2.a, d2.b, g.l
        )));
    }
    let pb = Pullback::new(triad, w)?;
    let n = g.len();
    let y: [Vec<V3>; 2] = [
        (0..n).map(|k| V3::from(pb.ce[k].coords(triad, &pb.nd[k].u))).collect(),
        (0..n).map(|k| V3::from(pb.ce[k].coords(triad, &pb.nd[k].v))).collect(),
    ];
    let dy = [
        [
            (0..n).map(|k| g.dtau(&y[0], k)).collect::<Vec<V3>>(),
            (0..n).map(|k| g.dtau(&y[1], k)).collect(),
        ],
        [
            (0..n).map(|k| g.dt(&y[0], k)).collect::<Vec<V3>>(),
            (0..n).map(|k| g.dt(&y[1], k)).collect(),
        ],
    ];
    let wts = g.weights();
    let (mut lhs, mut l2, mut l4) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let tau = g.tau(k / g.nt);
        let e = y[0][k].norm_squared() + y[1][k].norm_squared();
        if tau >= d2.a && tau <= d2.b {
            l2 += wts[k] * e;
            l4 += wts[k] * e * e;
        }
        if tau >= d1.a && tau <= d1.b {
            let mut s = 0.0;
            for i in 0..2 {
                let cu: [f64; 3] = y[i][k].into();
                for kk in 0..2 {
                    let yy: [f64; 3] = y[kk][k].into();
                    let d: [f64; 3] = dy[i][kk][k].into();
                    let v = V3::from(pb.ce[k].apply(&cu, &yy, &d));
                    s += v.norm_squared();
                }
            }
            lhs += wts[k] * s;
        }
    }
    let dchi = cutoff_gradient(d1, d2);
    let c1 = 16.0 * dchi * dchi;
    let c2 = 2.0 * norms.coercive_c1();
    Ok(Coercive {
        lhs,
        bound: c1 * l2 + c2 * l4,
        c1,
        c2,
    })
}

pub fn coercive_at(triad: &Triad, w: &MapField, d1: Band, d2: Band, norms: &TensorNorms) -> Result<Level> {
    let c = coercive_values(triad, w, d1, d2, norms)?;
    let viol = if c.lhs > c.bound {
        (c.lhs - c.bound) / c.lhs
    } else {
        0.0
    };
    let notes = vec![
        format!("C1 = {:.6}, C2 = {:.6}", c.c1, c.c2),
        format!(
            "lhs = {:.6e}, bound = {:.6e}, ratio = {:.4e}",
            c.lhs,
            c.bound,
            c.lhs / c.bound
        ),
    ];
    Ok(Level {
        n: w.grid.nt,
        residual: viol,
        scale: 1.0,
        notes,
    })
}

/// Smooth `w*ξ`-valued 1-form from low-frequency trigonometric coefficients
/// in the unitary frame.
pub fn random_one_form<R: Rng>(rng: &mut R, grid: &CylinderGrid) -> (Vec<V2>, Vec<V2>) {
    let tp = 2.0 * std::f64::consts::PI;
    let mut coef = Vec::new();
    for m in 0..3 {
        for nn in 0..3 {
            let c: [f64; 8] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) / (1.0 + (m + nn) as f64));
            coef.push((m as f64, nn as f64, c));
        }
    }
    let mut bt = vec![V2::zeros(); grid.len()];
    let mut bs = vec![V2::zeros(); grid.len()];
    for k in 0..grid.len() {
        let (s, t) = (grid.tau(k / grid.nt) / grid.l, grid.t(k % grid.nt));
        for (m, nn, c) in &coef {
            let (a, b) = ((std::f64::consts::PI * m * s).cos(), tp * nn * t);
            let (sn, cs) = b.sin_cos();
            bt[k] += V2::new(c[0] * cs + c[1] * sn, c[2] * cs + c[3] * sn) * a;
            bs[k] += V2::new(c[4] * cs + c[5] * sn, c[6] * cs + c[7] * sn) * a;
        }
    }
    (bt, bs)
}

/// Two routes to `Δ^∇β` on a given 1-form: residual on the core nodes.
pub fn weitzenboeck_forms_on(pb: &Pullback, bt: &[V2], bs: &[V2]) -> Level {
    let kappa = pb.kappa();
    let (h1, h2) = hodge_laplacian(pb, bt, bs);
    let (w1, w2) = weitzenboeck_laplacian(pb, &kappa, bt, bs);
    let core = pb.core();
    let res = max_on(&core, |k| (h1[k] - w1[k]).norm().max((h2[k] - w2[k]).norm()));
    let scale = max_on(&core, |k| h1[k].norm().max(h2[k].norm()));
    Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: Vec::new(),
    }
}

pub fn weitzenboeck_forms_at(triad: &Triad, w: &MapField, seed: u64) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let mut rng = crate::rng::stream(seed, "identities.beta");
    let (bt, bs) = random_one_form(&mut rng, &pb.grid);
    Ok(weitzenboeck_forms_on(&pb, &bt, &bs))
}

/// `-½Δ|β|² = |∇β|² - ⟨Δ^∇β, β⟩ + ⟨Ric β, β⟩` on a random 1-form.
pub fn bochner_scalar_at(triad: &Triad, w: &MapField, seed: u64) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let mut rng = crate::rng::stream(seed, "identities.beta");
    let (bt, bs) = random_one_form(&mut rng, &pb.grid);
    let kappa = pb.kappa();
    let (h1, h2) = hodge_laplacian(&pb, &bt, &bs);
    let sq: Vec<f64> = (0..bt.len())
        .map(|k| bt[k].norm_squared() + bs[k].norm_squared())
        .collect();
    let lap = pb.lap(&sq);
    let (a, b, c, d) = (pb.cov_tau(&bt), pb.cov_t(&bt), pb.cov_tau(&bs), pb.cov_t(&bs));
    let jm = j0();
    let core = pb.core();
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &core {
        let grad = a[k].norm_squared() + b[k].norm_squared() + c[k].norm_squared() + d[k].norm_squared();
        let pair = h1[k].dot(&bt[k]) + h2[k].dot(&bs[k]);
        let ric = -(jm * bs[k] * kappa[k]).dot(&bt[k]) + (jm * bt[k] * kappa[k]).dot(&bs[k]);
        let lhs = 0.5 * lap[k];
        res = res.max((lhs - (grad - pair + ric)).abs());
        scale = scale.max(lhs.abs()).max(grad);
    }
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: Vec::new(),
    })
}

/// Inner-product/star identity on random forms of each degree at every node.
pub fn inner_star_at(grid: &CylinderGrid, seed: u64) -> Result<Level> {
    let mut rng = crate::rng::stream(seed, "identities.inner-star");
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..grid.len() {
        for deg in 0..3 {
            let a = XiForm::random(&mut rng, deg);
            let b = XiForm::random(&mut rng, deg);
            res = res.max(inner_star_defect(&a, &b)?.abs());
            scale = scale.max(a.inner(&b).abs());
        }
    }
    Ok(Level {
        n: grid.nt,
        residual: res,
        scale,
        notes: Vec::new(),
    })
}

/// `sin⁴` bump in `τ` supported in the middle half of the cylinder.
fn bump(grid: &CylinderGrid, k: usize) -> f64 {
    let s = grid.tau(k / grid.nt) / grid.l;
    if (0.25..=0.75).contains(&s) {
        (2.0 * std::f64::consts::PI * (s - 0.25)).sin().powi(4)
    } else {
        0.0
    }
}

/// Integration by parts in degrees 0 and 1: `∫⟨d^∇β0, β1⟩ - ∫⟨β0, δ^∇β1⟩` with `β0`
/// compactly supported in the interior.
pub fn integration_by_parts_at(triad: &Triad, w: &MapField, seed: u64) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let g = &pb.grid;
    let mut rng = crate::rng::stream(seed, "identities.ibp");
    let (ut, us) = random_one_form(&mut rng, g);
    let (vt, vs) = random_one_form(&mut rng, g);
    let s0: Vec<V2> = (0..g.len()).map(|k| ut[k] * bump(g, k)).collect();
    let wts = g.weights();
    // degree 0: β0 = s0, β1 = (vt, vs)
    let (ds, dt) = (pb.cov_tau(&s0), pb.cov_t(&s0));
    let dv = delta_one(&pb, &vt, &vs);
    let f0: Vec<f64> = (0..g.len())
        .map(|k| ds[k].dot(&vt[k]) + dt[k].dot(&vs[k]) - s0[k].dot(&dv[k]))
        .collect();
    let m0: Vec<f64> = (0..g.len())
        .map(|k| (ds[k].dot(&vt[k]) + dt[k].dot(&vs[k])).abs())
        .collect();
    // degree 1: β0 = bump·(ut, us), β1 = us as a 2-form
    let b0t: Vec<V2> = s0.clone();
    let b0s: Vec<V2> = (0..g.len()).map(|k| us[k] * bump(g, k)).collect();
    let db = d_one(&pb, &b0t, &b0s);
    let (e1, e2) = delta_two(&pb, &vt);
    let f1: Vec<f64> = (0..g.len())
        .map(|k| db[k].dot(&vt[k]) - b0t[k].dot(&e1[k]) - b0s[k].dot(&e2[k]))
        .collect();
    let m1: Vec<f64> = (0..g.len()).map(|k| db[k].dot(&vt[k]).abs()).collect();
    let r0 = crate::sum::dot(&wts, &f0).abs();
    let r1 = crate::sum::dot(&wts, &f1).abs();
    let scale = crate::sum::dot(&wts, &m0).max(crate::sum::dot(&wts, &m1));
    Ok(Level {
        n: pb.n(),
        residual: r0.max(r1),
        scale,
        notes: vec![format!("degree-0 defect {r0:.3e}, degree-1 defect {r1:.3e}")],
    })
}

/// Double Laplacian identity: `⟨Δ^∇ ∂^π w, ∂^π w⟩ - 2⟨δ^∇ d^∇ ∂^π w, ∂^π w⟩`.
pub fn laplacian_double_at(triad: &Triad, w: &MapField) -> Result<Level> {
    let pb = Pullback::new(triad, w)?;
    let jm = j0();
    let bt = pb.del();
    let bs: Vec<V2> = bt.iter().map(|x| jm * x).collect();
    let (h1, h2) = hodge_laplacian(&pb, &bt, &bs);
    let sig = d_one(&pb, &bt, &bs);
    let (e1, e2) = delta_two(&pb, &sig);
    let core = pb.core();
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for &k in &core {
        let a = h1[k].dot(&bt[k]) + h2[k].dot(&bs[k]);
        let b = e1[k].dot(&bt[k]) + e2[k].dot(&bs[k]);
        res = res.max((a - 2.0 * b).abs());
        scale = scale.max(a.abs());
    }
    Ok(Level {
        n: pb.n(),
        residual: res,
        scale,
        notes: pb.on_shell_notes(),
    })
}

// ---------------------------------------------------------------- reports

fn levels<F>(fields: &[MapField], f: F) -> Result<Vec<Level>>
where
    F: Fn(&MapField) -> Result<Level> + Sync + Send,
{
    fields.par_iter().map(f).collect()
}

pub fn fundamental_equation_residual(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| fundamental_equation_at(triad, w))?;
    Ok(IdentityReport::from_levels(
        "fundamental_equation",
        Kind::Convergent(2.0),
        lv,
    ))
}

pub fn two_form_equation_residual(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| two_form_equation_at(triad, w))?;
    Ok(IdentityReport::from_levels(
        "two_form_equation",
        Kind::Convergent(2.0),
        lv,
    ))
}

/// In dimension three `T^π` vanishes on `ξ`, so the `(1,1)` torsion term is
/// zero up to the finite-difference error of the Christoffel symbols.
pub fn torsion_11_residual(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| torsion_11_at(triad, w))?;
    Ok(IdentityReport::from_levels("torsion_11", Kind::Exact, lv))
}

pub fn weitzenboeck_density_residual(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| weitzenboeck_density_at(triad, w))?;
    Ok(IdentityReport::from_levels(
        "weitzenboeck_density",
        Kind::Convergent(2.0),
        lv,
    ))
}

pub fn apriori_inequality_check(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| {
        let norms = sample_norms(triad, w, 64);
        apriori_inequality_at(triad, w, &norms)
    })?;
    Ok(IdentityReport::from_levels("apriori_inequality", Kind::Inequality, lv))
}

pub fn coercive_estimate_check(triad: &Triad, fields: &[MapField], d1: Band, d2: Band) -> Result<IdentityReport> {
    let lv = levels(fields, |w| {
        let norms = sample_norms(triad, w, 64);
        coercive_at(triad, w, d1, d2, &norms)
    })?;
    Ok(IdentityReport::from_levels("coercive_estimate", Kind::Inequality, lv))
}

pub fn weitzenboeck_forms_residual(triad: &Triad, fields: &[MapField], seed: u64) -> Result<IdentityReport> {
    let lv = levels(fields, |w| weitzenboeck_forms_at(triad, w, seed))?;
    Ok(IdentityReport::from_levels(
        "weitzenboeck_forms",
        Kind::Convergent(2.0),
        lv,
    ))
}

pub fn bochner_scalar_residual(triad: &Triad, fields: &[MapField], seed: u64) -> Result<IdentityReport> {
    let lv = levels(fields, |w| bochner_scalar_at(triad, w, seed))?;
    Ok(IdentityReport::from_levels("bochner_scalar", Kind::Convergent(2.0), lv))
}

pub fn inner_star_residual(fields: &[MapField], seed: u64) -> Result<IdentityReport> {
    let lv = levels(fields, |w| inner_star_at(&w.grid, seed))?;
    Ok(IdentityReport::from_levels("inner_star", Kind::Exact, lv))
}

pub fn integration_by_parts_residual(triad: &Triad, fields: &[MapField], seed: u64) -> Result<IdentityReport> {
    let lv = levels(fields, |w| integration_by_parts_at(triad, w, seed))?;
    Ok(IdentityReport::from_levels(
        "integration_by_parts",
        Kind::Convergent(2.0),
        lv,
    ))
}

pub fn laplacian_double_identity(triad: &Triad, fields: &[MapField]) -> Result<IdentityReport> {
    let lv = levels(fields, |w| laplacian_double_at(triad, w))?;
    Ok(IdentityReport::from_levels(
        "laplacian_double",
        Kind::Convergent(2.0),
        lv,
    ))
}

/// Merged reports of a full run.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub reports: Vec<IdentityReport>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    /// Identity × resolution residual matrix.
    pub fn to_csv(&self) -> String {
        let mut ns: Vec<usize> = self.reports.iter().flat_map(|r| r.resolutions.clone()).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut s = String::from("identity");
        for n in &ns {
            s += &format!(",n{n}");
        }
        s += ",order,pass\n";
        for r in &self.reports {
            s += &r.name;
            for n in &ns {
                match r.resolutions.iter().position(|m| m == n) {
                    Some(i) => s += &format!(",{:.6e}", r.residuals[i]),
                    None => s += ",",
                }
            }
            let ord = r.order.map(|p| format!("{p:.4}")).unwrap_or_default();
            s += &format!(",{ord},{}\n", r.pass);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            let ord = match (r.order, r.expected_order()) {
                (Some(p), Some(e)) => format!("order {p:.3} (expected {e})"),
                (None, Some(e)) => format!("rounding level (expected {e})"),
                _ => match r.kind {
                    Kind::Exact => "algebraic".to_string(),
                    _ => "inequality".to_string(),
                },
            };
            s += &format!("{} {} {}\n", if r.pass { "PASS" } else { "FAIL" }, r.name, ord);
            for n in &r.notes {
                s += &format!("  {n}\n");
            }
        }
        s += &format!("overall {}\n", if self.all_pass() { "PASS" } else { "FAIL" });
        s
    }
}

/// Default coercive bands on `[0, L]`.
pub fn default_bands(l: f64) -> (Band, Band) {
    (Band { a: 0.3 * l, b: 0.7 * l }, Band { a: 0.1 * l, b: 0.9 * l })
}

/// Every identity on a refinement family of fields over the same triad.
pub fn run_suite(triad: &Triad, fields: &[MapField], seed: u64) -> Result<SuiteReport> {
    hodge_self_test()?;
    if fields.is_empty() {
        return Err(Error::Argument("suite needs at least one field".into()));
    }
    let (d1, d2) = default_bands(fields[0].grid.l);
    type Job<'a> = Box<dyn Fn() -> Result<IdentityReport> + Sync + Send + 'a>;
    let jobs: Vec<Job> = vec![
        Box::new(|| fundamental_equation_residual(triad, fields)),
        Box::new(|| two_form_equation_residual(triad, fields)),
        Box::new(|| torsion_11_residual(triad, fields)),
        Box::new(|| weitzenboeck_density_residual(triad, fields)),
        Box::new(|| apriori_inequality_check(triad, fields)),
        Box::new(|| coercive_estimate_check(triad, fields, d1, d2)),
        Box::new(|| weitzenboeck_forms_residual(triad, fields, seed)),
        Box::new(|| bochner_scalar_residual(triad, fields, seed)),
        Box::new(|| inner_star_residual(fields, seed)),
        Box::new(|| integration_by_parts_residual(triad, fields, seed)),
        Box::new(|| laplacian_double_identity(triad, fields)),
    ];
    let reports = jobs.par_iter().map(|j| j()).collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { reports })
}

/// Flat-model oracle instantons `εe^{-2π(τ+it)}` on `[0, 1] × S¹` with
/// `h = 1/n`, `n` nodes in each direction.
pub fn flat_oracle_family(ns: &[usize], eps: f64) -> Result<Vec<MapField>> {
    ns.iter()
        .map(|&n| {
            let g = CylinderGrid::new(1.0, n + 1, n)?;
            let f = crate::instanton::decaying_mode(&g, eps);
            let z = vec![0.0; n];
            crate::instanton::oracle_flat(g, &f, (&z, &z), 1e-1)
        })
        .collect()
}

/// Solved instantons on `[0, 1] × S¹` with `h = 1/n` whose left loop is the
/// orbit through `p` pushed by `eps` along the lowest positive mode of `A_z`;
/// the right loop carries the linear prediction of that mode at `τ = 1`.
pub fn near_orbit_family(triad: &Triad, p: V4, period: f64, ns: &[usize], eps: f64, tol: f64) -> Result<Vec<MapField>> {
    ns.iter()
        .map(|&n| {
            let g = CylinderGrid::new(1.0, n + 1, n)?;
            let orbit = crate::reeb::ClosedOrbit::from_point(triad, p, period, n)?;
            let sr = crate::reeb::assemble_az(triad, &orbit, n)?;
            let k = sr
                .eigenvalues
                .iter()
                .position(|&m| m > 0.0)
                .ok_or_else(|| Error::DegenerateSpectrum("A_z has no positive eigenvalue".into()))?;
            let c = sr.eigenvectors.column(k) * (n as f64).sqrt();
            let bc = sr.near_orbit_loops(triad, &c.clone_owned(), eps, g.l);
            let w0 = crate::instanton::initial_guess(triad, g, &bc)?;
            let mut cfg = crate::instanton::SolveConfig::new(bc);
            cfg.tol_residual = tol;
            cfg.max_iters = 60;
            let r = crate::instanton::solve(triad, &w0, &cfg)?;
            if !r.converged {
                return Err(Error::NotConverged(format!(
                    "n = {n}, res_dbar = {:e}",
                    r.report.res_dbar
                )));
            }
            Ok(r.w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylfield::trivial_cylinder;

    #[test]
    fn hodge_conventions() {
        hodge_self_test().unwrap();
        let b = XiForm::new(1, vec![V2::new(1.0, 0.0), V2::new(0.0, 0.0)]).unwrap();
        // *dτ = dt
        assert_eq!(b.hodge().c, vec![V2::zeros(), V2::new(1.0, 0.0)]);
    }

    #[test]
    fn inner_star_is_algebraic() {
        let g = CylinderGrid::new(1.0, 9, 8).unwrap();
        let l = inner_star_at(&g, 3).unwrap();
        assert!(l.residual <= 1e-12 * l.scale.max(1.0), "{}", l.residual);
        assert!(XiForm::new(1, vec![V2::zeros()]).is_err());
    }

    #[test]
    fn order_fit() {
        let p = fitted_order(&[32, 64, 128], &[1.0, 0.25, 0.0625]).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
        let lv = |n, r| Level {
            n,
            residual: r,
            scale: 1.0,
            notes: vec![],
        };
        let r = IdentityReport::from_levels(
            "x",
            Kind::Convergent(2.0),
            vec![lv(32, 4e-3), lv(64, 1e-3), lv(128, 2.5e-4)],
        );
        assert!(r.pass, "{:?} {:?}", r.residuals, r.order);
        let r = IdentityReport::from_levels(
            "x",
            Kind::Convergent(2.0),
            vec![lv(32, 4e-3), lv(64, 2e-3), lv(128, 1e-3)],
        );
        assert!(!r.pass);
        let r = IdentityReport::from_levels("x", Kind::Convergent(2.0), vec![lv(32, 1e-14), lv(64, 3e-14)]);
        assert!(r.pass && r.order.is_none());
    }

    #[test]
    fn trivial_cylinder_vanishes() {
        let t = Triad::ellipsoid(1.0, crate::triad::GOLDEN);
        let g = CylinderGrid::new(1.0, 17, 32).unwrap();
        let circle = |s: f64| V4::new((2.0 * s).cos(), (2.0 * s).sin(), 0.0, 0.0);
        let w = trivial_cylinder(g, &t, circle, std::f64::consts::PI);
        let f = fundamental_equation_at(&t, &w).unwrap();
        assert!(f.residual < 1e-10, "{}", f.residual);
        let two = two_form_equation_at(&t, &w).unwrap();
        assert!(two.residual < 1e-8 * two.scale.max(1.0), "{}", two.residual);
        let d = weitzenboeck_density_at(&t, &w).unwrap();
        assert!(d.residual < 1e-8, "{}", d.residual);
        let l = laplacian_double_at(&t, &w).unwrap();
        assert!(l.residual < 1e-10);
    }

    #[test]
    fn flat_oracle_orders() {
        let t = Triad::flat();
        let fields = flat_oracle_family(&[32, 64, 128], 0.2).unwrap();
        for r in [
            fundamental_equation_residual(&t, &fields).unwrap(),
            two_form_equation_residual(&t, &fields).unwrap(),
            weitzenboeck_density_residual(&t, &fields).unwrap(),
            weitzenboeck_forms_residual(&t, &fields, 1).unwrap(),
            bochner_scalar_residual(&t, &fields, 1).unwrap(),
            integration_by_parts_residual(&t, &fields, 1).unwrap(),
            laplacian_double_identity(&t, &fields).unwrap(),
            apriori_inequality_check(&t, &fields).unwrap(),
        ] {
            assert!(r.pass, "{} {:?} {:?}", r.name, r.residuals, r.order);
        }
    }

    #[test]
    fn perturbed_two_form_off_shell() {
        let t = Triad::ellipsoid_perturbed(7, 1.0, crate::triad::GOLDEN);
        let fields: Vec<MapField> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = CylinderGrid::new(1.0, n + 1, n).unwrap();
                MapField::from_fn(g, &t, |s, th| {
                    let a = 2.0 * std::f64::consts::PI * th;
                    V4::new(a.cos() + 0.1 * s, a.sin(), 0.3 * (a + s).cos(), 0.2 * s.sin())
                })
            })
            .collect();
        let r = two_form_equation_residual(&t, &fields).unwrap();
        assert!(r.pass, "{:?} {:?}", r.residuals, r.order);
        let r = weitzenboeck_forms_residual(&t, &fields, 5).unwrap();
        assert!(r.pass, "{:?} {:?}", r.residuals, r.order);
        let r = bochner_scalar_residual(&t, &fields, 5).unwrap();
        assert!(r.pass, "{:?} {:?}", r.residuals, r.order);
    }

    #[test]
    fn coercive_nesting() {
        let t = Triad::flat();
        let w = &flat_oracle_family(&[16], 0.2).unwrap()[0];
        let n = sample_norms(&t, w, 16);
        let bad = coercive_values(&t, w, Band { a: 0.1, b: 0.9 }, Band { a: 0.3, b: 0.7 }, &n);
        assert!(matches!(bad, Err(Error::Argument(_))));
        let (d1, d2) = default_bands(1.0);
        let c = coercive_values(&t, w, d1, d2, &n).unwrap();
        assert!(c.lhs <= c.bound);
        assert!((cutoff(d1, d2, 0.5) - 1.0).abs() < 1e-15 && cutoff(d1, d2, 0.05) == 0.0);
    }
}
