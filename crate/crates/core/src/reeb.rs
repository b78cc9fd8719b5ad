//! Reeb flow, closed orbits and the asymptotic operator `A_z`.
//!
//! `A_z = J ∇^π_t - (T/2) (L_X J)` acts on sections of `z*ξ`, `z(t) = γ(T t)`.
//! It is assembled in a parallel-transported unitary frame that is unwound by
//! the holonomy angle `φ`, so the frame closes up and `∇^π_t` becomes
//! `d/dt - φ J`. With `f = f1 + i f2` the derivative is Fourier
//! differentiation on `N` nodes (wavenumbers `-N/2..N/2-1`), which is
//! Hermitian, commutes with constant frame rotations and has no spurious
//! zero modes.

use crate::error::{Error, Result};
use crate::instanton::BoundaryData;
use crate::la::{j0, M2, V2, V4};
use crate::triad::Triad;
use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// RK4 steps per unit flow time.
pub const STEPS_PER_UNIT: f64 = 2000.0;

/// `φ^time(p)` with `steps` RK4 steps and re-projection after each step.
pub fn flow_steps(triad: &Triad, p: &V4, time: f64, steps: usize) -> Result<V4> {
    if !time.is_finite() {
        return Err(Error::Integration(format!("non-finite flow time {time}")));
    }
    if time == 0.0 {
        return Ok(*p);
    }
    let h = time / steps.max(1) as f64;
    if steps == 0 || h.abs() < 1e-14 * time.abs().max(1.0) {
        return Err(Error::Integration(format!(
            "step underflow ({steps} steps for time {time})"
        )));
    }
    let mut x = *p;
    for _ in 0..steps {
        let k1 = triad.reeb(&x);
        let k2 = triad.reeb(&(x + k1 * (0.5 * h)));
        let k3 = triad.reeb(&(x + k2 * (0.5 * h)));
        let k4 = triad.reeb(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        x = triad.project_point(&x);
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::Integration("flow left the finite range".into()));
        }
    }
    Ok(x)
}

/// Reeb flow for `time` at the default resolution.
pub fn flow(triad: &Triad, p: &V4, time: f64) -> Result<V4> {
    let steps = ((time.abs() * STEPS_PER_UNIT).ceil() as usize).max(1);
    flow_steps(triad, p, time, steps)
}

#[derive(Clone, Debug)]
pub struct ClosedOrbit {
    pub triad_id: String,
    pub p: V4,
    pub period: f64,
    /// `z(t_i) = γ(T t_i)`, `t_i = i/N`
    pub samples: Vec<V4>,
    /// `dφ^T(p)|ξ` in the unitary frame at `p`
    pub return_map: M2,
    pub floquet: [Complex64; 2],
}

impl ClosedOrbit {
    /// Orbit through `p` with the given period, sampled at `n` points.
    pub fn from_point(triad: &Triad, p: V4, period: f64, n: usize) -> Result<Self> {
        let steps = ((period * STEPS_PER_UNIT).ceil() as usize).max(16);
        let (_, phi) = triad.flow_with_jacobian(&p, period, steps);
        let fr = triad.frame(&p);
        let c1 = triad.xi_coords_in(&fr, &(phi * fr.e1));
        let c2 = triad.xi_coords_in(&fr, &(phi * fr.e2));
        let return_map = M2::new(c1[0], c2[0], c1[1], c2[1]);
        let samples = sample_orbit(triad, &p, period, n)?;
        Ok(Self {
            triad_id: triad.id().to_string(),
            p,
            period,
            samples,
            return_map,
            floquet: eig2(&return_map),
        })
    }

    /// Same orbit based at `z(θ)`.
    pub fn shifted(&self, triad: &Triad, theta: f64) -> Result<Self> {
        let q = flow(triad, &self.p, theta * self.period)?;
        Self::from_point(triad, q, self.period, self.samples.len())
    }

    pub fn samples_csv(&self) -> String {
        let mut s = String::from("i,t,x1,x2,x3,x4\n");
        let n = self.samples.len();
        for (i, p) in self.samples.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                i as f64 / n as f64,
                p[0],
                p[1],
                p[2],
                p[3]
            );
        }
        s
    }

    pub fn summary(&self, nd: &Nondegeneracy) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "triad = {}", self.triad_id);
        let _ = writeln!(s, "period = {:.16e}", self.period);
        for (k, m) in self.floquet.iter().enumerate() {
            let _ = writeln!(s, "floquet_{} = {:.16e} {:+.16e}i", k + 1, m.re, m.im);
        }
        let _ = writeln!(s, "margin = {:.6e}", nd.margin);
        let _ = writeln!(
            s,
            "verdict = {}",
            if nd.nondegenerate {
                "nondegenerate"
            } else {
                "degenerate"
            }
        );
        s
    }
}

fn sample_orbit(triad: &Triad, p: &V4, period: f64, n: usize) -> Result<Vec<V4>> {
    let dt = period / n as f64;
    let sub = ((dt * STEPS_PER_UNIT).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(n);
    let mut x = *p;
    for _ in 0..n {
        out.push(x);
        x = flow_steps(triad, &x, dt, sub)?;
    }
    Ok(out)
}

fn eig2(m: &M2) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    let h = Complex64::new(tr / 2.0, 0.0);
    [h + disc, h - disc]
}

#[derive(Clone, Copy, Debug)]
pub struct OrbitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub samples: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 40,
            samples: 128,
        }
    }
}

/// Newton iteration for `φ^T(q) = q` with `q` on the hyperplane through the
/// seed orthogonal to `X_λ`, unknowns `(q, T)`. Least-squares steps through
/// an SVD keep degenerate families (every nearby point periodic) solvable.
pub fn find_closed_orbit(triad: &Triad, seed: &V4, t_guess: f64) -> Result<ClosedOrbit> {
    find_closed_orbit_with(triad, seed, t_guess, OrbitOptions::default())
}

pub fn find_closed_orbit_with(triad: &Triad, seed: &V4, t_guess: f64, opt: OrbitOptions) -> Result<ClosedOrbit> {
    if !(t_guess > 0.0) {
        return Err(Error::Argument(format!(
            "period guess must be positive (got {t_guess})"
        )));
    }
    let p0 = triad.project_point(seed);
    let f0 = triad.frame3(&p0);
    let point = |c: &[f64; 2]| triad.project_point(&(p0 + f0.e[1] * c[0] + f0.e[2] * c[1]));
    let coords = |v: &V4| -> [f64; 3] { triad.frame3_coords(&f0, v) };
    let mut c = [0.0, 0.0];
    let mut period = t_guess;
    let mut last = f64::INFINITY;
    for _ in 0..opt.max_iter {
        let q = point(&c);
        let steps = ((period * STEPS_PER_UNIT).ceil() as usize).max(16);
        let (end, phi) = triad.flow_with_jacobian(&q, period, steps);
        let r = coords(&(end - q));
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        last = rn;
        if rn < opt.tol {
            return ClosedOrbit::from_point(triad, q, period, opt.samples);
        }
        // columns: dq/dc_a through phi, and X at the endpoint
        let mut jac = DMatrix::<f64>::zeros(3, 3);
        let h = 1e-7;
        for a in 0..2 {
            let mut cp = c;
            let mut cm = c;
            cp[a] += h;
            cm[a] -= h;
            let dq = (point(&cp) - point(&cm)) / (2.0 * h);
            let col = coords(&(phi * dq - dq));
            for b in 0..3 {
                jac[(b, a)] = col[b];
            }
        }
        let xcol = coords(&triad.reeb(&end));
        for b in 0..3 {
            jac[(b, 2)] = xcol[b];
        }
        let svd = SVD::new(jac, true, true);
        let smax = svd.singular_values.max();
        let rhs = DVector::from_vec(vec![-r[0], -r[1], -r[2]]);
        let step = svd
            .solve(&rhs, 1e-8 * smax)
            .map_err(|e| Error::NoOrbit(format!("singular Newton system: {e}")))?;
        c[0] += step[0];
        c[1] += step[1];
        period += step[2];
        if !(period > 1e-6) || !period.is_finite() || c[0].abs() + c[1].abs() > 1e3 {
            return Err(Error::NoOrbit(format!(
                "Newton diverged (T = {period:e}, residual {rn:e}, point {:?})",
                point(&c).as_slice()
            )));
        }
    }
    Err(Error::NoOrbit(format!(
        "no convergence after {} iterations (residual {last:e})",
        opt.max_iter
    )))
}

#[derive(Clone, Copy, Debug)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    pub margin: f64,
}

pub fn nondegeneracy(orbit: &ClosedOrbit) -> Nondegeneracy {
    nondegeneracy_with(orbit, 1e-6)
}

pub fn nondegeneracy_with(orbit: &ClosedOrbit, threshold: f64) -> Nondegeneracy {
    let one = Complex64::new(1.0, 0.0);
    let margin = orbit
        .floquet
        .iter()
        .map(|m| (m - one).norm())
        .fold(f64::INFINITY, f64::min);
    Nondegeneracy {
        nondegenerate: margin > threshold,
        margin,
    }
}

/// Eigendata of the discretized `A_z`.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub orbit: ClosedOrbit,
    pub nt: usize,
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// columns ordered as `eigenvalues`; rows `2i`, `2i+1` are the frame
    /// coordinates at `t_i`
    pub eigenvectors: DMatrix<f64>,
    /// `min |μ|`
    pub gap: f64,
    /// smallest positive eigenvalue
    pub positive_gap: f64,
    /// `|μ|` of the largest negative eigenvalue
    pub negative_gap: f64,
    /// holonomy angle of `∇^π` around the orbit, in `(-π, π]`
    pub holonomy: f64,
    /// `max |M - Mᵀ|` before symmetrization
    pub asymmetry: f64,
    /// unwound frames `(F1, F2 = J F1)` at `t_i`
    pub frames: Vec<(V4, V4)>,
    /// `z(t_i)`
    pub points: Vec<V4>,
    matrix: DMatrix<f64>,
}

impl SpectrumResult {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn h(&self) -> f64 {
        1.0 / self.nt as f64
    }

    /// Eigenvector `k` as ambient vectors in `ξ` at the nodes `t_i`.
    pub fn eigen_section(&self, k: usize) -> Vec<V4> {
        let v = self.eigenvectors.column(k);
        (0..self.nt)
            .map(|i| {
                let (e1, e2) = self.frames[i];
                e1 * v[2 * i] + e2 * v[2 * i + 1]
            })
            .collect()
    }

    /// Random coefficient vector; with `positive_only` it is restricted to
    /// the span of the eigenvectors with positive eigenvalue.
    pub fn random_section<R: Rng>(&self, rng: &mut R, positive_only: bool) -> DVector<f64> {
        let n = self.eigenvalues.len();
        let raw = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if !positive_only {
            return raw;
        }
        let coef = self.eigenvectors.transpose() * &raw;
        let mut out = DVector::zeros(n);
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            if mu > 0.0 {
                out += self.eigenvectors.column(k) * coef[k];
            }
        }
        out
    }

    /// Random combination of the eigenvectors with eigenvalue in `(lo, hi]`.
    pub fn random_section_in<R: Rng>(&self, rng: &mut R, lo: f64, hi: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.eigenvalues.len());
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            if mu > lo && mu <= hi {
                out += self.eigenvectors.column(k) * rng.random_range(-1.0..1.0);
            }
        }
        out
    }

    /// Ambient vectors of a coefficient vector.
    pub fn section_vectors(&self, c: &DVector<f64>) -> Vec<V4> {
        (0..self.nt)
            .map(|i| {
                let (e1, e2) = self.frames[i];
                e1 * c[2 * i] + e2 * c[2 * i + 1]
            })
            .collect()
    }

    /// `e^{-τ A} c`. Modal coefficients at rounding level are dropped so
    /// that growing modes do not amplify roundoff.
    pub fn propagate(&self, c: &DVector<f64>, tau: f64) -> DVector<f64> {
        let coef = self.eigenvectors.transpose() * c;
        let cut = 1e3 * f64::EPSILON * coef.amax() * (c.len() as f64).sqrt();
        let mut out = DVector::zeros(c.len());
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            if coef[k].abs() > cut {
                out += self.eigenvectors.column(k) * (coef[k] * (-mu * tau).exp());
            }
        }
        out
    }

    /// Projection onto the span of the eigenvectors with positive eigenvalue.
    pub fn positive_part(&self, c: &DVector<f64>) -> DVector<f64> {
        let coef = self.eigenvectors.transpose() * c;
        let mut out = DVector::zeros(c.len());
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            if mu > 0.0 {
                out += self.eigenvectors.column(k) * coef[k];
            }
        }
        out
    }

    /// Dirichlet loops `z + ε c⁺` at `τ = 0` and `z + ε e^{-LA} c⁺` at
    /// `τ = L`, projected to the triad, where `c⁺` is the positive part of
    /// `c`. Such data is compatible with the linearized equation.
    pub fn near_orbit_loops(&self, triad: &Triad, c: &DVector<f64>, eps: f64, l: f64) -> BoundaryData {
        let c = &self.positive_part(c);
        let far = self.propagate(c, l);
        let mk = |c: &DVector<f64>| -> Vec<V4> {
            self.section_vectors(c)
                .iter()
                .zip(&self.points)
                .map(|(v, z)| triad.project_point(&(z + v * eps)))
                .collect()
        };
        BoundaryData {
            left: mk(c),
            right: mk(&far),
        }
    }

    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("k,eigenvalue\n");
        for (k, m) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{k},{m:.16e}");
        }
        s
    }

    pub fn near_kernel(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|m| m.abs() < threshold).count()
    }
}

/// Default near-kernel threshold `10 h² · 2π`.
pub fn kernel_threshold(nt: usize) -> f64 {
    let h = 1.0 / nt as f64;
    10.0 * h * h * 2.0 * PI
}

fn angle_between(triad: &Triad, p: &V4, from: &V4, to: &V4) -> f64 {
    let fr = triad.frame(p);
    let a = triad.xi_coords_in(&fr, from);
    let b = triad.xi_coords_in(&fr, to);
    (a[0] * b[1] - a[1] * b[0]).atan2(a.dot(&b))
}

/// Orbit points, unwound transported frames at `t_i = i/N` and the holonomy
/// angle `φ` with `E1(1) = e^{φJ} E1(0)`.
fn transported_frames(
    triad: &Triad,
    orbit: &ClosedOrbit,
    nt: usize,
    substeps: usize,
) -> Result<(Vec<V4>, Vec<(V4, V4)>, f64)> {
    let dt = 1.0 / nt as f64;
    let period = orbit.period;
    let fsub = ((period * dt * STEPS_PER_UNIT).ceil() as usize).max(4);
    let mut pts = Vec::with_capacity(nt + 1);
    let mut x = orbit.p;
    for _ in 0..=nt {
        pts.push(x);
        x = flow_steps(triad, &x, period * dt, fsub)?;
    }
    let e0 = triad.frame(&orbit.p).e1;
    let mut e1s = vec![e0];
    let mut cur = e0;
    for s in 0..nt {
        let base = pts[s];
        let curve = |u: f64| -> (V4, V4) {
            let q = if u == 0.0 {
                base
            } else {
                flow_steps(
                    triad,
                    &base,
                    period * dt * u,
                    ((fsub as f64 * u).ceil() as usize).max(1),
                )
                .expect("finite flow")
            };
            (q, triad.reeb(&q) * (period * dt))
        };
        cur = triad.parallel_transport(&curve, &cur, substeps)?;
        e1s.push(cur);
    }
    let end = pts[nt];
    let hol = angle_between(triad, &end, &triad.frame(&end).e1, &e1s[nt]);
    let hol = PI - (PI - hol).rem_euclid(2.0 * PI);
    let frames = (0..nt)
        .map(|s| {
            let t = s as f64 * dt;
            let q = pts[s];
            let e1 = e1s[s];
            let e2 = triad.apply_j(&q, &e1);
            let (c, sn) = ((hol * t).cos(), (hol * t).sin());
            // F1 = e^{-φ t J} E1
            (e1 * c - e2 * sn, e2 * c + e1 * sn)
        })
        .collect();
    pts.truncate(nt);
    Ok((pts, frames, hol))
}

/// `(L_X J)` in the frame `(f1, f2)` at `q`.
fn lie_in_frame(triad: &Triad, q: &V4, f1: &V4, f2: &V4) -> M2 {
    let fr = triad.frame(q);
    let l = triad.lie_j(q);
    let a = triad.xi_coords_in(&fr, f1);
    let b = triad.xi_coords_in(&fr, f2);
    let basis = M2::new(a[0], b[0], a[1], b[1]);
    // coordinates of (f1, f2) are orthonormal, so the inverse is the transpose
    basis.transpose() * l * basis
}

/// Which zero-order term enters the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroOrder {
    /// `- (T/2) L`
    Plain,
    /// `- (T/2) J L`, the `J`-multiplied form of `∇_t η - (T/2) L η`
    JMultiplied,
}

/// Fourier differentiation on `C^N`, period one: `(re, im)` of `D_{jk}`.
fn fourier_derivative(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut p = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        col[k] = Complex64::new(1.0, 0.0);
        fwd.process(&mut col);
        for (m, c) in col.iter_mut().enumerate() {
            // wavenumbers -N/2 .. N/2-1
            let kk = if m >= n / 2 { m as f64 - n as f64 } else { m as f64 };
            *c *= Complex64::new(0.0, 2.0 * PI * kk);
        }
        inv.process(&mut col);
        for j in 0..n {
            p[(j, k)] = col[j].re / n as f64;
            q[(j, k)] = col[j].im / n as f64;
        }
    }
    (p, q)
}

pub fn assemble_az(triad: &Triad, orbit: &ClosedOrbit, nt: usize) -> Result<SpectrumResult> {
    assemble_az_with(triad, orbit, nt, ZeroOrder::Plain, 1e-8)
}

pub fn assemble_az_with(
    triad: &Triad,
    orbit: &ClosedOrbit,
    nt: usize,
    zero: ZeroOrder,
    sym_tol: f64,
) -> Result<SpectrumResult> {
    if nt < 16 {
        return Err(Error::Argument(format!("A_z needs Nt >= 16 (got {nt})")));
    }
    let (pts, frames, hol) = transported_frames(triad, orbit, nt, 8)?;
    let n2 = 2 * nt;
    let half = orbit.period / 2.0;
    // with f = f1 + i f2, J ∇_t = i (d/dt - φ i) = i d/dt + φ
    let (p, q) = fourier_derivative(nt);
    let mut m = DMatrix::<f64>::zeros(n2, n2);
    for j in 0..nt {
        for k in 0..nt {
            // i D = -Q + i P in (re, im) blocks
            m[(2 * j, 2 * k)] = -q[(j, k)];
            m[(2 * j, 2 * k + 1)] = -p[(j, k)];
            m[(2 * j + 1, 2 * k)] = p[(j, k)];
            m[(2 * j + 1, 2 * k + 1)] = -q[(j, k)];
        }
        m[(2 * j, 2 * j)] += hol;
        m[(2 * j + 1, 2 * j + 1)] += hol;
    }
    if triad.is_perturbed() {
        for j in 0..nt {
            let (f1, f2) = frames[j];
            let l = lie_in_frame(triad, &pts[j], &f1, &f2);
            let l = match zero {
                ZeroOrder::Plain => l,
                ZeroOrder::JMultiplied => j0() * l,
            };
            for a in 0..2 {
                for b in 0..2 {
                    m[(2 * j + a, 2 * j + b)] -= half * l[(a, b)];
                }
            }
        }
    }
    let asym = (&m - m.transpose()).amax();
    if asym > sym_tol {
        return Err(Error::Assembly(format!("A_z is not symmetric (asymmetry {asym:e})")));
    }
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n2, n2, |r, c| eig.eigenvectors[(r, order[c])]);
    let gap = eigenvalues.iter().fold(f64::INFINITY, |a, m| a.min(m.abs()));
    let positive_gap = eigenvalues
        .iter()
        .copied()
        .filter(|&m| m > 0.0)
        .fold(f64::INFINITY, f64::min);
    let negative_gap = eigenvalues
        .iter()
        .copied()
        .filter(|&m| m < 0.0)
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min);
    Ok(SpectrumResult {
        orbit: orbit.clone(),
        nt,
        eigenvalues,
        eigenvectors,
        gap,
        positive_gap,
        negative_gap,
        holonomy: hol,
        asymmetry: asym,
        frames,
        points: pts[..nt].to_vec(),
        matrix: sym,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct KernelReport {
    pub threshold: f64,
    pub kernel_dim: usize,
    pub eigenvalue_one: usize,
    pub agree: bool,
    /// near-kernel dimension with the `J`-multiplied zero-order term
    pub kernel_dim_alt: usize,
    pub conventions_differ: bool,
}

pub fn kernel_correspondence_check(triad: &Triad, orbit: &ClosedOrbit, nt: usize) -> Result<KernelReport> {
    let thr = kernel_threshold(nt);
    let a = assemble_az(triad, orbit, nt)?;
    let b = assemble_az_with(triad, orbit, nt, ZeroOrder::JMultiplied, 1e-8)?;
    let one = Complex64::new(1.0, 0.0);
    let e1 = orbit.floquet.iter().filter(|m| (*m - one).norm() < thr).count();
    let k = a.near_kernel(thr);
    let k_alt = b.near_kernel(thr);
    Ok(KernelReport {
        threshold: thr,
        kernel_dim: k,
        eigenvalue_one: e1,
        agree: k == e1,
        kernel_dim_alt: k_alt,
        conventions_differ: k != k_alt,
    })
}

/// Closed-form spectrum `{φ + 2πk}` of `J d/dt + φ` truncated to the `2N`
/// values of smallest modulus, each with multiplicity two.
pub fn rotation_spectrum(phi: f64, nt: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (-(nt as i64)..=(nt as i64))
        .map(|k| phi + 2.0 * PI * k as f64)
        .collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    v.truncate(nt);
    let mut out: Vec<f64> = v.iter().flat_map(|&x| [x, x]).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Coefficients in the `(f1, f2)` frame of a `ξ` vector at `q`.
pub fn frame_coords(triad: &Triad, q: &V4, f: &(V4, V4), v: &V4) -> V2 {
    let fr = triad.frame(q);
    let a = triad.xi_coords_in(&fr, &f.0);
    let b = triad.xi_coords_in(&fr, &f.1);
    let c = triad.xi_coords_in(&fr, v);
    V2::new(a.dot(&c), b.dot(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triad::GOLDEN;

    fn golden() -> Triad {
        Triad::ellipsoid(1.0, GOLDEN)
    }

    #[test]
    fn flat_flow_is_exact() {
        let q = flow(&Triad::flat(), &V4::zeros(), 2.5).unwrap();
        assert!((q - V4::new(0.0, 0.0, 2.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ellipsoid_flow_matches_rotation() {
        let t = golden();
        let p = t.project_point(&V4::new(0.6, 0.2, 0.5, -0.4));
        let q = flow_steps(&t, &p, 1.0, 10_000).unwrap();
        let (r1, r2) = (p[0].hypot(p[1]), p[2].hypot(p[3]));
        assert!((q[0].hypot(q[1]) - r1).abs() < 1e-10);
        assert!((q[2].hypot(q[3]) - r2).abs() < 1e-10);
        // closed form: z_k ↦ e^{2 i t / a_k} z_k
        let rot = |x: f64, y: f64, w: f64| (x * w.cos() - y * w.sin(), x * w.sin() + y * w.cos());
        let (x1, y1) = rot(p[0], p[1], 2.0);
        let (x2, y2) = rot(p[2], p[3], 2.0 / GOLDEN);
        assert!((q - V4::new(x1, y1, x2, y2)).norm() < 1e-10);
    }

    #[test]
    fn flow_is_fourth_order() {
        let t = golden();
        let p = t.project_point(&V4::new(0.6, 0.2, 0.5, -0.4));
        let rot = |x: f64, y: f64, w: f64| (x * w.cos() - y * w.sin(), x * w.sin() + y * w.cos());
        let (x1, y1) = rot(p[0], p[1], 6.0);
        let (x2, y2) = rot(p[2], p[3], 6.0 / GOLDEN);
        let exact = V4::new(x1, y1, x2, y2);
        let e1 = (flow_steps(&t, &p, 3.0, 20).unwrap() - exact).norm();
        let e2 = (flow_steps(&t, &p, 3.0, 40).unwrap() - exact).norm();
        let order = (e1 / e2).log2();
        assert!((3.6..4.6).contains(&order), "{order}");
    }

    #[test]
    fn reeb_parametrization() {
        let t = golden();
        let p = t.project_point(&V4::new(0.3, 0.7, -0.2, 0.4));
        let q = flow(&t, &p, 0.8).unwrap();
        assert!((t.lambda(&q, &t.reeb(&q)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_orbit_period() {
        let t = golden();
        let o = find_closed_orbit(&t, &V4::new(1.0, 0.01, 0.02, 0.0), 3.0).unwrap();
        assert!((o.period - PI).abs() < 1e-8, "{}", o.period);
        assert!((o.return_map.determinant() - 1.0).abs() < 1e-8);
        let prod = o.floquet[0] * o.floquet[1];
        assert!((prod - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        let nd = nondegeneracy(&o);
        assert!(nd.nondegenerate && nd.margin > 0.1, "{nd:?}");
        let back = flow(&t, &o.p, o.period).unwrap();
        assert!((back - o.p).norm() < 1e-8);
    }

    #[test]
    fn round_orbit_is_degenerate() {
        let t = Triad::ellipsoid(1.0, 1.0);
        let o = find_closed_orbit(&t, &V4::new(0.8, 0.0, 0.6, 0.0), 3.1).unwrap();
        assert!((o.period - PI).abs() < 1e-8);
        assert!((o.return_map - M2::identity()).amax() < 1e-8);
        assert!(nondegeneracy(&o).margin < 1e-6);
    }

    #[test]
    fn flat_model_has_no_orbits() {
        let r = find_closed_orbit(&Triad::flat(), &V4::new(0.1, 0.2, 0.0, 0.0), 1.0);
        assert!(matches!(r, Err(Error::NoOrbit(_))), "{r:?}");
    }

    #[test]
    fn sasakian_spectrum_is_a_shifted_lattice() {
        let t = golden();
        let o = ClosedOrbit::from_point(&t, V4::new(1.0, 0.0, 0.0, 0.0), PI, 64).unwrap();
        let s = assemble_az(&t, &o, 64).unwrap();
        // linearized flow rotates ξ = z2-plane by 2T/a2 per unit t
        let theta = 2.0 * PI / GOLDEN;
        let low = |v: &[f64]| -> Vec<f64> { v.iter().copied().filter(|x| x.abs() < 40.0).collect() };
        let expect = low(&rotation_spectrum(theta, 64));
        let got = low(&s.eigenvalues);
        assert_eq!(got.len(), expect.len());
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
        assert!((s.negative_gap - (2.0 * PI - theta)).abs() < 1e-3);
        assert!((s.positive_gap - theta).abs() < 1e-2);
    }

    #[test]
    fn spectrum_is_invariant_under_base_point_shift() {
        let t = Triad::ellipsoid_perturbed(11, 1.0, GOLDEN);
        let o = find_closed_orbit(&t, &V4::new(1.0, 0.0, 0.0, 0.0), PI).unwrap();
        let a = assemble_az(&t, &o, 32).unwrap();
        let b = assemble_az(&t, &o.shifted(&t, 0.25).unwrap(), 32).unwrap();
        let d = a
            .eigenvalues
            .iter()
            .zip(&b.eigenvalues)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(
            d < 1e-10 * a.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            "{d}"
        );
    }

    #[test]
    fn kernel_counts() {
        let g = golden();
        let o = find_closed_orbit(&g, &V4::new(1.0, 0.0, 0.0, 0.0), PI).unwrap();
        let r = kernel_correspondence_check(&g, &o, 64).unwrap();
        assert_eq!((r.kernel_dim, r.eigenvalue_one, r.agree), (0, 0, true));
        let round = Triad::ellipsoid(1.0, 1.0);
        let o = ClosedOrbit::from_point(&round, V4::new(1.0, 0.0, 0.0, 0.0), PI, 64).unwrap();
        let r = kernel_correspondence_check(&round, &o, 64).unwrap();
        assert_eq!((r.kernel_dim, r.eigenvalue_one, r.agree), (2, 2, true));
        let pert = Triad::ellipsoid_perturbed(5, 1.0, GOLDEN);
        let o = find_closed_orbit(&pert, &V4::new(1.0, 0.0, 0.0, 0.0), PI).unwrap();
        let r = kernel_correspondence_check(&pert, &o, 32).unwrap();
        assert!(r.agree, "{r:?}");
    }
}
