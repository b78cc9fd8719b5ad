//! Least-squares solution of `∂̄^π w = 0`, `d(w*λ∘j) = 0` on a grid.
//!
//! The residual vector stacks `(√(2 w_k) ρ_k, √w_k r_k)` per node, where
//! `ρ = ∂̄^π w(∂τ)` in frame coordinates, `r = d(w*λ∘j)(∂τ, ∂t)` and `w_k` is the
//! interior quadrature weight (Dirichlet rows carry no equations). The merit `F = ½|R|²` equals
//! `½‖∂̄^π w‖² + ½‖d(w*λ∘j)‖²` in the discrete `L²` norms.
//!
//! Node updates live in the tangent space spanned by `(X_λ, e1, e2)` and
//! are followed by closest-point projection. Boundary rows never move.

use crate::cylfield::{self, CylinderGrid, EnergyReport, MapField};
use crate::error::{Error, Result};
use crate::la::{j0, V2, V4};
use crate::sum;
use crate::triad::Triad;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    GradientDescent,
    GaussNewton,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient-descent" | "gd" => Ok(Method::GradientDescent),
            "gauss-newton" | "gn" => Ok(Method::GaussNewton),
            _ => Err(Error::Argument(format!("unknown method `{s}`"))),
        }
    }
}

/// Dirichlet loops at `τ = 0` and `τ = L`, `Nt` points each.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub left: Vec<V4>,
    pub right: Vec<V4>,
}

impl BoundaryData {
    pub fn from_field(w: &MapField) -> Self {
        let g = &w.grid;
        Self {
            left: (0..g.nt).map(|j| w.nodes[g.idx(0, j)]).collect(),
            right: (0..g.nt).map(|j| w.nodes[g.idx(g.ntau - 1, j)]).collect(),
        }
    }

    /// Largest deviation of `w`'s boundary rows from the loops.
    pub fn mismatch(&self, w: &MapField) -> f64 {
        let g = &w.grid;
        if self.left.len() != g.nt || self.right.len() != g.nt {
            return f64::INFINITY;
        }
        (0..g.nt).fold(0.0_f64, |m, j| {
            m.max((w.nodes[g.idx(0, j)] - self.left[j]).amax())
                .max((w.nodes[g.idx(g.ntau - 1, j)] - self.right[j]).amax())
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub tol_residual: f64,
    pub max_iters: usize,
    pub method: Method,
    pub bc: BoundaryData,
    /// step of the central differences for the coefficient Jacobian
    pub fd_step: f64,
    pub seed: u64,
}

impl SolveConfig {
    pub fn new(bc: BoundaryData) -> Self {
        Self {
            tol_residual: 1e-10,
            max_iters: 50,
            method: Method::GaussNewton,
            bc,
            fd_step: 1e-5,
            seed: 0,
        }
    }

    pub fn validate(&self, triad: &Triad) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::Argument(format!(
                "tol_residual must be positive (got {})",
                self.tol_residual
            )));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Argument("fd_step must be positive".into()));
        }
        let off = self
            .bc
            .left
            .iter()
            .chain(&self.bc.right)
            .fold(0.0_f64, |m, p| m.max(triad.constraint(p).abs()));
        if off > 1e-10 {
            return Err(Error::Precondition(format!("boundary loops leave the triad ({off:e})")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub res_dbar: f64,
    pub res_closed: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub w: MapField,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
    pub report: EnergyReport,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("iter,F,grad_norm,res_dbar,res_closed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.iter, r.f, r.grad_norm, r.res_dbar, r.res_closed
        );
    }
    s
}

/// Residual vector, three entries per node.
pub fn residual(triad: &Triad, w: &MapField) -> Vec<f64> {
    let g = &w.grid;
    let nd = cylfield::node_data(triad, w);
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let a_t: Vec<f64> = nd.iter().map(|n| n.a_t).collect();
    let rc = cylfield::closedness(g, &a_tau, &a_t);
    let wq = g.interior_weights();
    let mut r = vec![0.0; 3 * g.len()];
    for k in 0..g.len() {
        let rho = nd[k].dbar_tau();
        let s2 = (2.0 * wq[k]).sqrt();
        r[3 * k] = s2 * rho[0];
        r[3 * k + 1] = s2 * rho[1];
        r[3 * k + 2] = wq[k].sqrt() * rc[k];
    }
    r
}

/// `F(w) = ½‖∂̄^π w‖² + ½‖d(w*λ∘j)‖²`.
pub fn functional(triad: &Triad, w: &MapField) -> f64 {
    let r = residual(triad, w);
    0.5 * sum::dot(&r, &r)
}

/// First-order data of the residual map at a field.
pub struct Linearization {
    grid: CylinderGrid,
    wq: Vec<f64>,
    coef: Vec<[V4; 3]>,
    gu: Vec<[V4; 3]>,
    gv: Vec<[V4; 3]>,
}

impl Linearization {
    pub fn new(triad: &Triad, w: &MapField, fd_step: f64) -> Self {
        let g = w.grid;
        let (u, v) = cylfield::raw_derivatives(w);
        let dim = triad.ambient_dim();
        let per: Vec<([V4; 3], [V4; 3], [V4; 3])> = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let p = w.nodes[k];
                let c = triad.pullback_coef(&p);
                let mut gu = [V4::zeros(); 3];
                let mut gv = [V4::zeros(); 3];
                for b in 0..dim {
                    let mut e = V4::zeros();
                    e[b] = fd_step;
                    let cp = triad.pullback_coef(&(p + e));
                    let cm = triad.pullback_coef(&(p - e));
                    for a in 0..3 {
                        let d = (cp[a] - cm[a]) / (2.0 * fd_step);
                        gu[a][b] = d.dot(&u[k]);
                        gv[a][b] = d.dot(&v[k]);
                    }
                }
                (c, gu, gv)
            })
            .collect();
        Self {
            grid: g,
            wq: g.interior_weights(),
            coef: per.iter().map(|x| x.0).collect(),
            gu: per.iter().map(|x| x.1).collect(),
            gv: per.iter().map(|x| x.2).collect(),
        }
    }

    /// Directional derivative of the residual along ambient node displacements.
    pub fn jvp(&self, dp: &[V4]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.len();
        let mut da_tau = vec![0.0; n];
        let mut da_t = vec![0.0; n];
        let mut out = vec![0.0; 3 * n];
        for k in 0..n {
            let du = g.dtau(dp, k);
            let dv = g.dt(dp, k);
            let (c, gu, gv) = (&self.coef[k], &self.gu[k], &self.gv[k]);
            let dz = |a: usize| gu[a].dot(&dp[k]) + c[a].dot(&du);
            let de = |a: usize| gv[a].dot(&dp[k]) + c[a].dot(&dv);
            let s2 = (2.0 * self.wq[k]).sqrt();
            out[3 * k] = s2 * 0.5 * (dz(0) - de(1));
            out[3 * k + 1] = s2 * 0.5 * (dz(1) + de(0));
            da_tau[k] = dz(2);
            da_t[k] = de(2);
        }
        let drc = cylfield::closedness(g, &da_tau, &da_t);
        for k in 0..n {
            out[3 * k + 2] = self.wq[k].sqrt() * drc[k];
        }
        out
    }

    /// Transpose of [`Self::jvp`].
    pub fn vjp(&self, rbar: &[f64]) -> Vec<V4> {
        let g = &self.grid;
        let n = g.len();
        // cotangents of a_τ, a_t through r = -(Dτ a_τ + Dt a_t)
        let mut abar_tau = vec![0.0; n];
        let mut abar_t = vec![0.0; n];
        for k in 0..n {
            let rb = -self.wq[k].sqrt() * rbar[3 * k + 2];
            let (i, j) = (k / g.nt, k % g.nt);
            for (ii, c) in g.dtau_stencil(i) {
                abar_tau[g.idx(ii, j)] += c * rb;
            }
            for (jj, c) in g.dt_stencil(j) {
                abar_t[g.idx(i, jj)] += c * rb;
            }
        }
        let mut pbar = vec![V4::zeros(); n];
        let mut ubar = vec![V4::zeros(); n];
        let mut vbar = vec![V4::zeros(); n];
        for k in 0..n {
            let s2 = (2.0 * self.wq[k]).sqrt();
            let (r0, r1) = (s2 * rbar[3 * k], s2 * rbar[3 * k + 1]);
            let zb = [0.5 * r0, 0.5 * r1, abar_tau[k]];
            let eb = [0.5 * r1, -0.5 * r0, abar_t[k]];
            let (c, gu, gv) = (&self.coef[k], &self.gu[k], &self.gv[k]);
            for a in 0..3 {
                pbar[k] += gu[a] * zb[a] + gv[a] * eb[a];
                ubar[k] += c[a] * zb[a];
                vbar[k] += c[a] * eb[a];
            }
        }
        for k in 0..n {
            let (i, j) = (k / g.nt, k % g.nt);
            for (ii, c) in g.dtau_stencil(i) {
                pbar[g.idx(ii, j)] += ubar[k] * c;
            }
            for (jj, c) in g.dt_stencil(j) {
                pbar[g.idx(i, jj)] += vbar[k] * c;
            }
        }
        pbar
    }
}

/// Gradient of [`functional`] with respect to node positions, projected to
/// the constraint tangent spaces; boundary rows are zero.
pub fn gradient(triad: &Triad, w: &MapField) -> Vec<V4> {
    gradient_with(triad, w, 1e-5)
}

pub fn gradient_with(triad: &Triad, w: &MapField, fd_step: f64) -> Vec<V4> {
    let lin = Linearization::new(triad, w, fd_step);
    let r = residual(triad, w);
    let mut gr = lin.vjp(&r);
    for (k, gk) in gr.iter_mut().enumerate() {
        *gk = if w.grid.is_boundary(k) {
            V4::zeros()
        } else {
            triad.tangent_proj(&w.nodes[k]) * *gk
        };
    }
    gr
}

/// Tangent bases `(X_λ, e1, e2)` at the interior nodes.
struct Reduced {
    interior: Vec<usize>,
    basis: Vec<[V4; 3]>,
}

impl Reduced {
    fn new(triad: &Triad, w: &MapField) -> Self {
        let interior: Vec<usize> = (0..w.grid.len()).filter(|&k| !w.grid.is_boundary(k)).collect();
        let basis = interior
            .par_iter()
            .map(|&k| {
                let p = w.nodes[k];
                let fr = triad.frame(&p);
                [triad.reeb(&p), fr.e1, fr.e2]
            })
            .collect();
        Self { interior, basis }
    }

    fn dim(&self) -> usize {
        3 * self.interior.len()
    }

    fn lift(&self, x: &[f64], n: usize) -> Vec<V4> {
        let mut dp = vec![V4::zeros(); n];
        for (m, &k) in self.interior.iter().enumerate() {
            let b = &self.basis[m];
            dp[k] = b[0] * x[3 * m] + b[1] * x[3 * m + 1] + b[2] * x[3 * m + 2];
        }
        dp
    }

    fn restrict(&self, pbar: &[V4]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (m, &k) in self.interior.iter().enumerate() {
            for a in 0..3 {
                x[3 * m + a] = self.basis[m][a].dot(&pbar[k]);
            }
        }
        x
    }
}

/// Inverse 3×3 diagonal blocks of `JᵀJ` in reduced coordinates, assembled
/// by probing node classes whose residual footprints do not overlap.
fn block_jacobi(lin: &Linearization, red: &Reduced, damping: f64) -> Vec<Matrix3<f64>> {
    let g = &lin.grid;
    let n = g.len();
    const RI: usize = 4;
    const RJ: usize = 2;
    let q = g.nt / 5;
    let jcolor = |j: usize| if j < 5 * q { j % 5 } else { j };
    let mut classes: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (m, &k) in red.interior.iter().enumerate() {
        classes
            .entry(((k / g.nt) % (2 * RI + 1), jcolor(k % g.nt)))
            .or_default()
            .push(m);
    }
    let mut blocks = vec![Matrix3::zeros(); red.interior.len()];
    let cls: Vec<Vec<usize>> = classes.into_values().collect();
    let parts: Vec<Vec<(usize, Matrix3<f64>)>> = cls
        .par_iter()
        .map(|members| {
            let cols: Vec<Vec<f64>> = (0..3)
                .map(|a| {
                    let mut dp = vec![V4::zeros(); n];
                    for &m in members {
                        dp[red.interior[m]] = red.basis[m][a];
                    }
                    lin.jvp(&dp)
                })
                .collect();
            members
                .iter()
                .map(|&m| {
                    let k = red.interior[m];
                    let (i, j) = (k / g.nt, k % g.nt);
                    let mut b = Matrix3::zeros();
                    for ii in i.saturating_sub(RI)..(i + RI + 1).min(g.ntau) {
                        for dj in 0..(2 * RJ + 1) {
                            let jj = (j + g.nt + dj - RJ) % g.nt;
                            let row = g.idx(ii, jj);
                            for c in 0..3 {
                                let r = 3 * row + c;
                                let v = Vector3::new(cols[0][r], cols[1][r], cols[2][r]);
                                b += v * v.transpose();
                            }
                        }
                    }
                    (m, b)
                })
                .collect()
        })
        .collect();
    for part in parts {
        for (m, b) in part {
            let bd = b + Matrix3::identity() * (damping + 1e-14 * b.trace());
            blocks[m] = bd.try_inverse().unwrap_or_else(Matrix3::identity);
        }
    }
    blocks
}

/// Preconditioned CG on `(JᵀJ + μ) x = b` in reduced coordinates.
fn pcg(lin: &Linearization, red: &Reduced, b: &[f64], damping: f64, rtol: f64, max_iter: usize) -> Vec<f64> {
    let n = lin.grid.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        let jx = lin.jvp(&red.lift(x, n));
        let mut y = red.restrict(&lin.vjp(&jx));
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += damping * xi;
        }
        y
    };
    let blocks = block_jacobi(lin, red, damping);
    let prec = |r: &[f64]| -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        for (m, bl) in blocks.iter().enumerate() {
            let v = bl * Vector3::new(r[3 * m], r[3 * m + 1], r[3 * m + 2]);
            z[3 * m..3 * m + 3].copy_from_slice(v.as_slice());
        }
        z
    };
    let dim = b.len();
    let mut x = vec![0.0; dim];
    let mut r = b.to_vec();
    let bnorm = sum::norm(b);
    if bnorm == 0.0 {
        return x;
    }
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = sum::dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = sum::dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if sum::norm(&r) <= rtol * bnorm {
            break;
        }
        z = prec(&r);
        let rz_new = sum::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn retract(triad: &Triad, w: &MapField, red: &Reduced, x: &[f64], t: f64) -> MapField {
    let mut out = w.clone();
    let upd: Vec<(usize, V4)> = red
        .interior
        .par_iter()
        .enumerate()
        .map(|(m, &k)| {
            let b = &red.basis[m];
            let d = b[0] * x[3 * m] + b[1] * x[3 * m + 1] + b[2] * x[3 * m + 2];
            (k, triad.project_point(&(w.nodes[k] + d * t)))
        })
        .collect();
    for (k, p) in upd {
        out.nodes[k] = p;
    }
    out
}

fn row(triad: &Triad, w: &MapField, iter: usize, f: f64, grad: &[f64]) -> (HistoryRow, EnergyReport) {
    let rep = cylfield::energies(triad, w);
    (
        HistoryRow {
            iter,
            f,
            grad_norm: sum::norm(grad),
            res_dbar: rep.res_dbar,
            res_closed: rep.res_closed,
        },
        rep,
    )
}

/// Minimize `F` from `w0` with Dirichlet rows held at `cfg.bc`.
pub fn solve(triad: &Triad, w0: &MapField, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate(triad)?;
    let mm = cfg.bc.mismatch(w0);
    if mm > 1e-12 {
        return Err(Error::Precondition(format!(
            "initial field violates boundary data by {mm:e}"
        )));
    }
    const C_ARMIJO: f64 = 1e-4;
    const SHRINK: f64 = 0.5;
    let tol2 = cfg.tol_residual * cfg.tol_residual;
    let mut w = w0.clone();
    let mut history = Vec::new();
    let mut f = functional(triad, &w);
    let mut gd_step = 1.0;
    let mut damping = 0.0;
    let mut iter = 0;
    loop {
        let lin = Linearization::new(triad, &w, cfg.fd_step);
        let red = Reduced::new(triad, &w);
        let r = residual(triad, &w);
        let grad = red.restrict(&lin.vjp(&r));
        let (hrow, rep) = row(triad, &w, iter, f, &grad);
        history.push(hrow);
        if rep.res_dbar.powi(2) + rep.res_closed.powi(2) <= tol2 {
            return Ok(SolveResult {
                w,
                history,
                converged: true,
                report: rep,
            });
        }
        if iter >= cfg.max_iters {
            return Ok(SolveResult {
                w,
                history,
                converged: false,
                report: rep,
            });
        }
        let gnorm = sum::norm(&grad);
        let neg: Vec<f64> = grad.iter().map(|x| -x).collect();

        let mut accepted = None;
        if cfg.method == Method::GaussNewton {
            let rtol = (0.5 * gnorm.sqrt()).clamp(1e-10, 1e-3);
            let x = pcg(&lin, &red, &neg, damping, rtol, 4000);
            let slope = sum::dot(&grad, &x);
            if slope < 0.0 {
                let mut t = 1.0;
                while t > 1e-8 {
                    let cand = retract(triad, &w, &red, &x, t);
                    let fc = functional(triad, &cand);
                    if fc <= f + C_ARMIJO * t * slope {
                        accepted = Some((cand, fc));
                        break;
                    }
                    t *= SHRINK;
                }
            }
            damping = if accepted.is_some() {
                damping * 0.1
            } else {
                (damping * 10.0).max(1e-8 * gnorm)
            };
        }
        if accepted.is_none() {
            // steepest descent with Armijo backtracking
            let slope = -gnorm * gnorm;
            let mut t = gd_step * 2.0;
            while t * gnorm > 1e-16 {
                let cand = retract(triad, &w, &red, &neg, t);
                let fc = functional(triad, &cand);
                if fc <= f + C_ARMIJO * t * slope {
                    gd_step = t;
                    accepted = Some((cand, fc));
                    break;
                }
                t *= SHRINK;
            }
        }
        match accepted {
            Some((cand, fc)) => {
                w = cand;
                f = fc;
            }
            None => {
                return Err(Error::Stall {
                    iters: iter,
                    value: f,
                    last: Box::new(w),
                })
            }
        }
        iter += 1;
    }
}

/// Ambient straight-line interpolation between the boundary loops, projected.
pub fn initial_guess(triad: &Triad, grid: CylinderGrid, bc: &BoundaryData) -> Result<MapField> {
    if bc.left.len() != grid.nt || bc.right.len() != grid.nt {
        return Err(Error::Argument("boundary loops need Nt points".into()));
    }
    let mut w = MapField::from_fn(grid, triad, |tau, t| {
        let j = ((t * grid.nt as f64).round() as usize) % grid.nt;
        let s = tau / grid.l;
        bc.left[j] * (1.0 - s) + bc.right[j] * s
    });
    for j in 0..grid.nt {
        w.nodes[grid.idx(0, j)] = bc.left[j];
        w.nodes[grid.idx(grid.ntau - 1, j)] = bc.right[j];
    }
    Ok(w)
}

/// Discrete `∂τ f + J ∂t f` of planar data, `J` the quarter turn.
pub fn cr_defect(grid: &CylinderGrid, f: &[V2]) -> Vec<V2> {
    (0..grid.len())
        .map(|k| grid.dtau(f, k) + j0() * grid.dt(f, k))
        .collect()
}

fn l2(grid: &CylinderGrid, f: &[V2]) -> f64 {
    let sq: Vec<f64> = f.iter().map(|v| v.norm_squared()).collect();
    grid.integrate(&sq).sqrt()
}

/// Flat-model instanton over planar holomorphic data `f = (x, y)`.
///
/// `z` solves `(Dτ² + Dt²) z = Dτ(y Dτx) + Dt(y Dt x)` with the cylinder
/// stencils, so `d(w*λ∘j)` vanishes to roundoff and `∂̄^π w` reduces to the
/// Cauchy-Riemann defect of `f`. `z0` holds the loops at `τ = 0` and `τ = L`.
pub fn oracle_flat(grid: CylinderGrid, f: &[V2], z0: (&[f64], &[f64]), cr_tol: f64) -> Result<MapField> {
    let n = grid.len();
    if f.len() != n || z0.0.len() != grid.nt || z0.1.len() != grid.nt {
        return Err(Error::Argument("oracle data does not match the grid".into()));
    }
    let df: Vec<V2> = (0..n).flat_map(|k| [grid.dtau(f, k), grid.dt(f, k)]).collect();
    let dnorm = {
        let sq: Vec<f64> = (0..n)
            .map(|k| df[2 * k].norm_squared() + df[2 * k + 1].norm_squared())
            .collect();
        grid.integrate(&sq).sqrt()
    };
    let cr = l2(&grid, &cr_defect(&grid, f));
    if cr > cr_tol * dnorm + 1e-12 {
        return Err(Error::Precondition(format!(
            "planar data is not holomorphic: CR residual {cr:e}"
        )));
    }
    let x: Vec<f64> = f.iter().map(|v| v[0]).collect();
    let y: Vec<f64> = f.iter().map(|v| v[1]).collect();
    let gx: Vec<f64> = (0..n).map(|k| y[k] * grid.dtau(&x, k)).collect();
    let hx: Vec<f64> = (0..n).map(|k| y[k] * grid.dt(&x, k)).collect();
    let rhs: Vec<f64> = (0..n).map(|k| grid.dtau(&gx, k) + grid.dt(&hx, k)).collect();
    let z = poisson_wide(&grid, &rhs, z0)?;
    let nodes = (0..n).map(|k| V4::new(x[k], y[k], z[k], 0.0)).collect();
    Ok(MapField {
        grid,
        triad_id: "r3-standard".into(),
        nodes,
    })
}

/// Solve `(Dτ Dτ + Dt Dt) z = rhs` at interior rows with Dirichlet rows,
/// mode by mode in `t`.
pub fn poisson_wide(grid: &CylinderGrid, rhs: &[f64], z0: (&[f64], &[f64])) -> Result<Vec<f64>> {
    let (nr, nt) = (grid.ntau, grid.nt);
    // τ-derivative matrix with one-sided end rows
    let mut d = DMatrix::<f64>::zeros(nr, nr);
    for i in 0..nr {
        for (ii, c) in grid.dtau_stencil(i) {
            d[(i, ii)] += c;
        }
    }
    let d2 = &d * &d;
    let m = nr - 2;
    // boundary contribution of the τ part, then transform rows in t
    let mut b = vec![0.0; m * nt];
    for i in 1..nr - 1 {
        for j in 0..nt {
            b[(i - 1) * nt + j] = rhs[grid.idx(i, j)] - d2[(i, 0)] * z0.0[j] - d2[(i, nr - 1)] * z0.1[j];
        }
    }
    // Dt Dt acts on the interior rows only; boundary rows are known but
    // their t-derivatives do not enter interior equations.
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nt);
    let inv = planner.plan_fft_inverse(nt);
    let mut bh: Vec<Vec<Complex64>> = (0..m)
        .map(|i| {
            let mut row: Vec<Complex64> = (0..nt).map(|j| Complex64::new(b[i * nt + j], 0.0)).collect();
            fwd.process(&mut row);
            row
        })
        .collect();
    let ht = grid.ht();
    let inner = d2.view((1, 1), (m, m)).into_owned();
    for k in 0..nt {
        let s = (2.0 * std::f64::consts::PI * k as f64 / nt as f64).sin() / ht;
        let a = &inner - DMatrix::<f64>::identity(m, m) * (s * s);
        let lu = a.lu();
        let re = DVector::from_iterator(m, (0..m).map(|i| bh[i][k].re));
        let im = DVector::from_iterator(m, (0..m).map(|i| bh[i][k].im));
        let (xr, xi) = match (lu.solve(&re), lu.solve(&im)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Singular(format!("wide Laplacian singular at mode {k}"))),
        };
        for i in 0..m {
            bh[i][k] = Complex64::new(xr[i], xi[i]);
        }
    }
    let mut z = vec![0.0; grid.len()];
    for j in 0..nt {
        z[grid.idx(0, j)] = z0.0[j];
        z[grid.idx(nr - 1, j)] = z0.1[j];
    }
    for (i, row) in bh.iter_mut().enumerate() {
        inv.process(row);
        for j in 0..nt {
            z[grid.idx(i + 1, j)] = row[j].re / nt as f64;
        }
    }
    Ok(z)
}

/// Planar data `ε e^{-2π(τ + i t)}`.
pub fn decaying_mode(grid: &CylinderGrid, eps: f64) -> Vec<V2> {
    let tp = 2.0 * std::f64::consts::PI;
    (0..grid.len())
        .map(|k| {
            let (tau, t) = (grid.tau(k / grid.nt), grid.t(k % grid.nt));
            let r = eps * (-tp * tau).exp();
            V2::new(r * (tp * t).cos(), -r * (tp * t).sin())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triad::GOLDEN;
    use rand::Rng;

    fn circle(s: f64) -> V4 {
        V4::new((2.0 * s).cos(), (2.0 * s).sin(), 0.0, 0.0)
    }

    fn bumpy(triad: &Triad, grid: CylinderGrid, amp: f64, seed: u64) -> MapField {
        let mut rng = crate::rng::stream(seed, "test.bumpy");
        let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l = grid.l;
        let mut w = cylfield::trivial_cylinder(grid, triad, circle, std::f64::consts::PI);
        for k in 0..grid.len() {
            if grid.is_boundary(k) {
                continue;
            }
            let (tau, t) = (grid.tau(k / grid.nt), grid.t(k % grid.nt));
            let s = (std::f64::consts::PI * tau / l).sin();
            let tp = 2.0 * std::f64::consts::PI * t;
            let d = V4::new(
                c[0] + c[1] * tp.cos(),
                c[2] * tp.sin(),
                c[3] + c[4] * tp.cos(),
                c[5] + c[6] * tp.sin(),
            );
            w.nodes[k] = triad.project_point(&(w.nodes[k] + d * (amp * s)));
        }
        w
    }

    #[test]
    fn jvp_and_vjp_are_adjoint() {
        let t = Triad::ellipsoid_perturbed(3, 1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 10, 8).unwrap();
        let w = bumpy(&t, g, 0.1, 1);
        let lin = Linearization::new(&t, &w, 1e-5);
        let mut rng = crate::rng::stream(5, "test.adj");
        let dp: Vec<V4> = (0..g.len())
            .map(|_| V4::from_fn(|_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let rb: Vec<f64> = (0..3 * g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = sum::dot(&lin.jvp(&dp), &rb);
        let vj = lin.vjp(&rb);
        let rhs: f64 = dp.iter().zip(&vj).map(|(a, b)| a.dot(b)).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let t = Triad::ellipsoid_perturbed(3, 1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 10, 8).unwrap();
        let w = bumpy(&t, g, 0.1, 2);
        let gr = gradient(&t, &w);
        let mut rng = crate::rng::stream(6, "test.fd");
        for _ in 0..5 {
            let k = loop {
                let k = rng.random_range(0..g.len());
                if !g.is_boundary(k) {
                    break k;
                }
            };
            let d = t.tangent_proj(&w.nodes[k]) * V4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let h = 1e-6;
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.nodes[k] += d * h;
            wm.nodes[k] -= d * h;
            let fd = (functional(&t, &wp) - functional(&t, &wm)) / (2.0 * h);
            let an = gr[k].dot(&d);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-8), "{fd} {an}");
        }
    }

    #[test]
    fn trivial_cylinder_is_a_minimizer() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 12, 16).unwrap();
        let w = cylfield::trivial_cylinder(g, &t, circle, std::f64::consts::PI);
        assert!(functional(&t, &w) < 1e-24);
        let gn: f64 = gradient(&t, &w).iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        assert!(gn < 1e-10);
    }

    #[test]
    fn gradient_is_local() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(2.0, 20, 16).unwrap();
        let mut w = cylfield::trivial_cylinder(g, &t, circle, std::f64::consts::PI);
        let (i0, j0) = (10, 8);
        let k0 = g.idx(i0, j0);
        w.nodes[k0] = t.project_point(&(w.nodes[k0] + V4::new(0.0, 0.0, 0.05, 0.02)));
        let gr = gradient(&t, &w);
        for k in 0..g.len() {
            let (i, j) = (k / g.nt, k % g.nt);
            let dj = (j as i64 - j0 as i64)
                .rem_euclid(16)
                .min((j0 as i64 - j as i64).rem_euclid(16));
            if (i as i64 - i0 as i64).abs() > 4 || dj > 4 {
                assert!(gr[k].norm() < 1e-12, "{i} {j} {}", gr[k].norm());
            }
        }
    }

    #[test]
    fn solve_recovers_trivial_cylinder() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 16, 16).unwrap();
        let exact = cylfield::trivial_cylinder(g, &t, circle, std::f64::consts::PI);
        let w0 = bumpy(&t, g, 1e-2, 3);
        let mut cfg = SolveConfig::new(BoundaryData::from_field(&exact));
        cfg.tol_residual = 1e-11;
        let res = solve(&t, &w0, &cfg).unwrap();
        assert!(res.converged);
        assert!(res.history.windows(2).all(|h| h[1].f <= h[0].f));
        let d = res
            .w
            .nodes
            .iter()
            .zip(&exact.nodes)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).amax()));
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn infeasible_tolerance_is_not_an_error() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 10, 8).unwrap();
        let w0 = bumpy(&t, g, 1e-2, 4);
        let mut cfg = SolveConfig::new(BoundaryData::from_field(&w0));
        cfg.tol_residual = 1e-30;
        cfg.max_iters = 3;
        match solve(&t, &w0, &cfg) {
            Ok(r) => assert!(!r.converged),
            Err(Error::Stall { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn oracle_flat_refines_at_second_order() {
        let t = Triad::flat();
        let mut res = vec![];
        for n in [32, 64] {
            let g = CylinderGrid::new(1.0, n + 1, n).unwrap();
            let f = decaying_mode(&g, 0.3);
            let z0 = vec![0.0; n];
            let w = oracle_flat(g, &f, (&z0, &z0), 0.25).unwrap();
            let e = cylfield::energies(&t, &w);
            assert!(e.res_closed < 1e-11, "{}", e.res_closed);
            res.push(e.res_dbar);
        }
        let ratio = res[0] / res[1];
        assert!((3.6..4.4).contains(&ratio), "{ratio}");
    }

    #[test]
    fn oracle_rejects_antiholomorphic_data() {
        let g = CylinderGrid::new(1.0, 17, 16).unwrap();
        let f: Vec<V2> = decaying_mode(&g, 0.3).iter().map(|v| V2::new(v[0], -v[1])).collect();
        let z0 = vec![0.0; 16];
        assert!(matches!(
            oracle_flat(g, &f, (&z0, &z0), 0.25),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn constant_planar_data_gives_constant_map() {
        let t = Triad::flat();
        let g = CylinderGrid::new(1.0, 9, 8).unwrap();
        let f = vec![V2::new(0.4, -0.2); g.len()];
        let z0 = vec![1.5; 8];
        let w = oracle_flat(g, &f, (&z0, &z0), 0.25).unwrap();
        assert!(w.nodes.iter().all(|p| (p[2] - 1.5).abs() < 1e-12));
        assert!(functional(&t, &w) < 1e-24);
    }
}
