//! Asymptotic analysis of instantons on `[0, L] × S¹`.
//!
//! Windowed energies `x_k = ‖π ∂τ w‖²` over `[k+1, k+2] × S¹` feed the
//! three-interval bound and a log-linear fit. Rates are reported for `‖ζ‖`,
//! so the fitted slope of `log x_k` is halved.
//!
//! The symplectization coordinate `a` is integrated on the dual grid (cell
//! corners `(τ_{i+½}, t_{j+½})`). Dual edge values are averages of
//! neighbouring nodal values, so the circulation of `w*λ∘j` around a dual
//! cell equals `h_τ h_t` times the central-difference closedness residual at
//! the enclosed node; path dependence is then exactly the solver residual.

use crate::cylfield::{closedness, node_data, CylinderGrid, MapField, NodeData};
use crate::error::{Error, Result};
use crate::la::{V2, V4};
use crate::reeb::{flow_steps, kernel_threshold, ClosedOrbit, SpectrumResult};
use crate::triad::Triad;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Windows below this energy are treated as the noise floor.
pub const FIT_FLOOR: f64 = 100.0 * f64::EPSILON;

/// `ξ(γ) = (1 + √(1 - 4γ²)) / (2γ)`, evaluated as `u + √(u² - 1)` with
/// `u = 1/(2γ)`.
pub fn xi_of_gamma(gamma: f64) -> f64 {
    let u = 1.0 / (2.0 * gamma);
    u + (u * u - 1.0).sqrt()
}

/// `γ(c) = 1 / (e^c + e^{-c})`; sequences `e^{-c' k}` with `c' ≥ c` satisfy the
/// hypothesis for this `γ`.
pub fn gamma_of_rate(c: f64) -> f64 {
    1.0 / (c.exp() + (-c).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThreeInterval {
    pub gamma: f64,
    pub xi: f64,
    /// interior indices with `x_k > γ (x_{k-1} + x_{k+1})`
    pub violations: Vec<usize>,
    /// `x_0 ξ^{-k} + x_N ξ^{-(N-k)}`, only when the hypothesis holds everywhere
    pub bound: Option<Vec<f64>>,
}

impl ThreeInterval {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative slack on the hypothesis so that sequences satisfying it with
/// equality are not rejected by rounding.
const HYP_SLACK: f64 = 1e-12;

fn hypothesis_at(xs: &[f64], k: usize, gamma: f64) -> bool {
    let rhs = gamma * (xs[k - 1] + xs[k + 1]);
    xs[k] <= rhs + HYP_SLACK * rhs.abs().max(xs[k].abs())
}

pub fn three_interval_bound(xs: &[f64], gamma: f64) -> Result<ThreeInterval> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Argument(format!("gamma must lie in (0, 1/2) (got {gamma})")));
    }
    if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Argument(format!(
            "sequence entries must be finite and nonnegative (got {x})"
        )));
    }
    let xi = xi_of_gamma(gamma);
    let n = xs.len();
    let violations: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&k| !hypothesis_at(xs, k, gamma))
        .collect();
    let bound = if violations.is_empty() && n > 0 {
        let (x0, xn) = (xs[0], xs[n - 1]);
        let last = (n - 1) as i32;
        Some(
            (0..n)
                .map(|k| x0 * xi.powi(-(k as i32)) + xn * xi.powi(-(last - k as i32)))
                .collect(),
        )
    } else {
        None
    };
    Ok(ThreeInterval {
        gamma,
        xi,
        violations,
        bound,
    })
}

/// Least-squares line `y = a + b x`: `(b, a, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, icpt, r2)
}

/// `∫_a^b s(τ) dτ` for the piecewise-linear interpolant of row samples.
fn interval_integral(grid: &CylinderGrid, s: &[f64], a: f64, b: f64) -> f64 {
    let h = grid.htau();
    let at = |tau: f64| -> f64 {
        let x = (tau / h).clamp(0.0, (grid.ntau - 1) as f64);
        let i = (x.floor() as usize).min(grid.ntau - 2);
        let f = x - i as f64;
        s[i] * (1.0 - f) + s[i + 1] * f
    };
    let mut knots = vec![a];
    let first = (a / h).floor() as usize + 1;
    for i in first..grid.ntau {
        let tau = grid.tau(i);
        if tau >= b {
            break;
        }
        if tau > a {
            knots.push(tau);
        }
    }
    knots.push(b);
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (at(w[0]) + at(w[1])))
        .sum()
}

/// Per-row circle integrals of a nodal quantity.
fn row_integrals(grid: &CylinderGrid, f: &[f64]) -> Vec<f64> {
    (0..grid.ntau).map(|i| grid.slice_integral(f, i)).collect()
}

/// `x_k = ∫_{[k+1, k+2]×S¹} |π ∂τ w|²` for every window inside `[0, L]`.
pub fn window_energies(grid: &CylinderGrid, nd: &[NodeData]) -> Vec<f64> {
    let z2: Vec<f64> = nd.iter().map(|n| n.zeta.norm_squared()).collect();
    let rows = row_integrals(grid, &z2);
    let count = (grid.l + 1e-9).floor() as usize;
    (0..count.saturating_sub(1))
        .map(|k| interval_integral(grid, &rows, (k + 1) as f64, (k + 2) as f64).max(0.0))
        .collect()
}

/// Tail selection: the last half of the windows above the noise floor.
pub fn tail_windows(xs: &[f64]) -> Vec<usize> {
    let live: Vec<usize> = (0..xs.len()).filter(|&k| xs[k] > FIT_FLOOR).collect();
    let keep = live.len().div_ceil(2).max(live.len().min(2));
    live[live.len() - keep..].to_vec()
}

#[derive(Clone, Copy, Debug)]
pub struct DecayOptions {
    pub gamma: f64,
    /// `|Q|` above this rejects the charge-vanishing analyses
    pub charge_tol: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            charge_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub xk: Vec<f64>,
    pub gamma_used: f64,
    pub three_interval: ThreeInterval,
    pub three_interval_violations: Vec<usize>,
    /// windows entering the fit
    pub tail: Vec<usize>,
    /// rate of `‖ζ‖`; zero when no window is above the noise floor
    pub delta_fit: f64,
    pub r2: f64,
    /// every window below the noise floor
    pub already_asymptotic: bool,
    pub q_limit: f64,
    pub t_limit: f64,
    /// sup-distance of the final slice to the orbit
    pub orbit_distance: Option<f64>,
}

impl DecayReport {
    /// Hypothesis verdict restricted to the given windows.
    pub fn hypothesis_on(&self, windows: &[usize], gamma: f64) -> bool {
        windows
            .iter()
            .filter(|&&k| k > 0 && k + 1 < self.xk.len())
            .all(|&k| hypothesis_at(&self.xk, k, gamma))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,xk,bound_k,hypothesis_ok\n");
        let n = self.xk.len();
        for (k, x) in self.xk.iter().enumerate() {
            let b = match &self.three_interval.bound {
                Some(b) => format!("{:.16e}", b[k]),
                None => String::new(),
            };
            let ok = if k == 0 || k + 1 == n {
                String::new()
            } else {
                (hypothesis_at(&self.xk, k, self.gamma_used) as u8).to_string()
            };
            let _ = writeln!(s, "{k},{x:.16e},{b},{ok}");
        }
        s
    }

    pub fn summary(&self, gap: Option<f64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "windows = {}", self.xk.len());
        let _ = writeln!(s, "gamma = {}", self.gamma_used);
        let _ = writeln!(
            s,
            "three_interval = {}",
            if self.three_interval.holds() {
                "holds"
            } else {
                "violated"
            }
        );
        let _ = writeln!(s, "violations = {:?}", self.three_interval_violations);
        let _ = writeln!(s, "already_asymptotic = {}", self.already_asymptotic);
        let _ = writeln!(s, "delta_fit = {:.10e}", self.delta_fit);
        let _ = writeln!(s, "r2 = {:.10}", self.r2);
        let _ = writeln!(s, "Q_limit = {:.10e}", self.q_limit);
        let _ = writeln!(s, "T_limit = {:.10e}", self.t_limit);
        if let Some(d) = self.orbit_distance {
            let _ = writeln!(s, "orbit_distance = {d:.6e}");
        }
        if let Some(g) = gap {
            let _ = writeln!(s, "gap = {g:.10e}");
            let _ = writeln!(s, "delta_fit/gap = {:.6}", self.delta_fit / g);
        }
        s
    }
}

pub fn analyze_decay(
    triad: &Triad,
    w: &MapField,
    orbit: Option<&ClosedOrbit>,
    opt: &DecayOptions,
) -> Result<DecayReport> {
    let g = &w.grid;
    let nd = node_data(triad, w);
    let xk = window_energies(g, &nd);
    if xk.len() < 4 {
        return Err(Error::InsufficientLength(format!(
            "{} unit windows in [1, L] (need 4, L = {})",
            xk.len(),
            g.l
        )));
    }
    let ti = three_interval_bound(&xk, opt.gamma)?;
    let tail = tail_windows(&xk);
    let (delta_fit, r2) = if tail.len() >= 2 {
        let x: Vec<f64> = tail.iter().map(|&k| k as f64 + 1.5).collect();
        let y: Vec<f64> = tail.iter().map(|&k| xk[k].ln()).collect();
        let (slope, _, r2) = linear_fit(&x, &y);
        (-slope / 2.0, r2)
    } else {
        (0.0, 0.0)
    };
    // slice averages over the last window
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let a_t: Vec<f64> = nd.iter().map(|n| n.a_t).collect();
    let q_rows: Vec<f64> = row_integrals(g, &a_tau).iter().map(|x| -x).collect();
    let t_rows = row_integrals(g, &a_t);
    let last = xk.len() - 1;
    let (a, b) = ((last + 1) as f64, (last + 2) as f64);
    let q_limit = interval_integral(g, &q_rows, a, b) / (b - a);
    let t_limit = interval_integral(g, &t_rows, a, b) / (b - a);
    let orbit_distance = match orbit {
        Some(o) => limit_orbit_distance(triad, w, o)?.last().copied(),
        None => None,
    };
    Ok(DecayReport {
        three_interval_violations: ti.violations.clone(),
        already_asymptotic: xk.iter().all(|&x| x <= FIT_FLOOR),
        xk,
        gamma_used: opt.gamma,
        three_interval: ti,
        tail,
        delta_fit,
        r2,
        q_limit,
        t_limit,
        orbit_distance,
    })
}

/// Rate of `log ‖η(τ)‖` for `dη/dτ + A η = 0`, fitted over the second half
/// of `[0, horizon]`. Positive for decay, negative for growth.
///
/// The flow is evaluated modally, `η(τ) = Σ c_i e^{-μ_i τ} v_i`, with
/// `log ‖η‖²` accumulated by log-sum-exp so growing modes do not overflow.
/// Modal coefficients at the rounding level of `‖η0‖` are dropped: forward
/// evolution amplifies them by up to `e^{|μ_min| τ}`, which would otherwise
/// turn a decaying datum into a spurious growing one.
pub fn evolve_modal_rate(
    eigenvalues: &[f64],
    vectors: &DMatrix<f64>,
    eta0: &DVector<f64>,
    horizon: f64,
) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Argument(format!("horizon must be positive (got {horizon})")));
    }
    if eta0.len() != vectors.nrows() {
        return Err(Error::Argument(format!(
            "initial datum has length {} (need {})",
            eta0.len(),
            vectors.nrows()
        )));
    }
    let c = vectors.transpose() * eta0;
    let cmax = c.amax();
    if cmax == 0.0 {
        return Err(Error::Argument("initial datum is zero".into()));
    }
    let cut = 1e3 * f64::EPSILON * cmax * (eigenvalues.len() as f64).sqrt();
    let modes: Vec<(f64, f64)> = c
        .iter()
        .zip(eigenvalues)
        .filter(|(ci, _)| ci.abs() > cut)
        .map(|(ci, mu)| (2.0 * ci.abs().ln(), *mu))
        .collect();
    let samples = 200;
    let x: Vec<f64> = (samples / 2..=samples)
        .map(|s| horizon * s as f64 / samples as f64)
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&tau| {
            let terms: Vec<f64> = modes.iter().map(|(lc, mu)| lc - 2.0 * mu * tau).collect();
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
        })
        .collect();
    let (slope, _, _) = linear_fit(&x, &y);
    Ok(-slope)
}

pub fn linear_evolution_rate(sr: &SpectrumResult, eta0: &DVector<f64>, horizon: f64) -> Result<f64> {
    if sr.gap <= kernel_threshold(sr.nt) {
        return Err(Error::DegenerateSpectrum(format!(
            "A_z has near-kernel (gap {:e})",
            sr.gap
        )));
    }
    evolve_modal_rate(&sr.eigenvalues, &sr.eigenvectors, eta0, horizon)
}

/// Same for an arbitrary symmetric matrix.
pub fn linear_evolution_rate_matrix(a: &DMatrix<f64>, eta0: &DVector<f64>, horizon: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Argument("matrix must be square".into()));
    }
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let gap = eig.eigenvalues.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if gap <= 1e-12 * eig.eigenvalues.amax().max(1.0) {
        return Err(Error::DegenerateSpectrum(format!("matrix has a kernel (gap {gap:e})")));
    }
    let mu: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evolve_modal_rate(&mu, &eig.eigenvectors, eta0, horizon)
}

#[derive(Clone, Debug)]
pub struct ThetaReport {
    pub t_used: f64,
    /// `θ = (a_t - T) + i a_τ` per node as `(re, im)`
    pub theta: Vec<V2>,
    /// max over interior nodes of `|∂̄θ - ½|ζ|²|`, `∂̄ = ½(∂τ + i ∂t)`
    pub identity_residual: f64,
    pub slice_norms: Vec<f64>,
    pub tail: Vec<usize>,
    pub rate: f64,
    pub r2: f64,
    /// the tail neither decays nor grows
    pub constant_tail: bool,
}

impl ThetaReport {
    pub fn to_csv(&self, grid: &CylinderGrid) -> String {
        let mut s = String::from("i,tau,theta_norm\n");
        for (i, n) in self.slice_norms.iter().enumerate() {
            let _ = writeln!(s, "{i},{:.16e},{n:.16e}", grid.tau(i));
        }
        s
    }
}

/// Row indices used for slice fits: `τ ∈ [1, L - 1]`, norm above the floor,
/// last half.
fn slice_tail(grid: &CylinderGrid, norms: &[f64]) -> Vec<usize> {
    let live: Vec<usize> = (0..grid.ntau)
        .filter(|&i| grid.tau(i) >= 1.0 - 1e-12 && grid.tau(i) <= grid.l - 1.0 + 1e-12 && norms[i] > FIT_FLOOR.sqrt())
        .collect();
    let keep = live.len().div_ceil(2).max(live.len().min(2));
    live[live.len() - keep..].to_vec()
}

fn fit_slices(grid: &CylinderGrid, norms: &[f64]) -> (Vec<usize>, f64, f64) {
    let tail = slice_tail(grid, norms);
    if tail.len() < 2 {
        return (tail, 0.0, 0.0);
    }
    let x: Vec<f64> = tail.iter().map(|&i| grid.tau(i)).collect();
    let y: Vec<f64> = tail.iter().map(|&i| norms[i].ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    (tail, -slope, r2)
}

pub fn theta_component(triad: &Triad, w: &MapField, t: f64, opt: &DecayOptions) -> Result<ThetaReport> {
    let g = &w.grid;
    let nd = node_data(triad, w);
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let q = (0..g.ntau)
        .map(|i| g.slice_integral(&a_tau, i).abs())
        .fold(0.0, f64::max);
    if q > opt.charge_tol {
        return Err(Error::ChargeNotVanishing(q));
    }
    let theta: Vec<V2> = nd.iter().map(|n| V2::new(n.a_t - t, n.a_tau)).collect();
    let identity_residual = (0..g.len())
        .into_par_iter()
        .filter(|&k| !g.is_boundary(k))
        .map(|k| {
            let dt = g.dtau(&theta, k);
            let ds = g.dt(&theta, k);
            // (∂τ + i ∂t)(f + i g) = (f_τ - g_t) + i (g_τ + f_t)
            let re = 0.5 * (dt[0] - ds[1]) - 0.5 * nd[k].zeta.norm_squared();
            let im = 0.5 * (dt[1] + ds[0]);
            re.abs().max(im.abs())
        })
        .reduce(|| 0.0, f64::max);
    let sq: Vec<f64> = theta.iter().map(|v| v.norm_squared()).collect();
    let slice_norms: Vec<f64> = row_integrals(g, &sq).iter().map(|x| x.max(0.0).sqrt()).collect();
    let (tail, rate, r2) = fit_slices(g, &slice_norms);
    let constant_tail = tail.len() >= 2 && rate.abs() < 1e-3;
    Ok(ThetaReport {
        t_used: t,
        theta,
        identity_residual,
        slice_norms,
        tail,
        rate,
        r2,
        constant_tail,
    })
}

#[derive(Clone, Debug)]
pub struct AReport {
    /// `a` at dual nodes `(τ_{i+½}, t_{j+½})`, `(Ntau - 1) × Nt` values
    pub a: Vec<f64>,
    pub dual_tau: Vec<f64>,
    /// slope used for `b = a - T τ`
    pub t_used: f64,
    /// circle charges on the dual rows
    pub charges: Vec<f64>,
    /// largest circulation of `w*λ∘j` around a closed dual loop
    pub loop_residual: f64,
    /// `α(τ) = ∫ b dt` per dual row
    pub alpha: Vec<f64>,
    pub c0: f64,
    /// `sup_t |a - T τ - C0|` per dual row
    pub deviation: Vec<f64>,
}

impl AReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,tau,alpha,deviation\n");
        for (r, tau) in self.dual_tau.iter().enumerate() {
            let _ = writeln!(s, "{r},{tau:.16e},{:.16e},{:.16e}", self.alpha[r], self.deviation[r]);
        }
        s
    }

    /// Deviation is nonincreasing over the last half of the dual rows with
    /// `τ ≤ L - 1`, allowing `slack` relative increase.
    pub fn tail_decreasing(&self, l: f64, slack: f64) -> bool {
        let rows: Vec<usize> = (0..self.dual_tau.len())
            .filter(|&r| self.dual_tau[r] <= l - 1.0)
            .collect();
        let tail = &rows[rows.len() / 2..];
        tail.windows(2)
            .all(|w| self.deviation[w[1]] <= self.deviation[w[0]] * (1.0 + slack) + 1e-14)
    }
}

/// Integrates `da = w*λ∘j` from the dual node `(τ_½, t_½)` along its circle,
/// then in `τ`.
pub fn reconstruct_a(triad: &Triad, w: &MapField, opt: &DecayOptions) -> Result<AReport> {
    let g = &w.grid;
    let (nr, nt) = (g.ntau - 1, g.nt);
    let nd = node_data(triad, w);
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let a_t: Vec<f64> = nd.iter().map(|n| n.a_t).collect();
    let (hs, ht) = (g.htau(), g.ht());
    // w*λ∘j = a_t dτ - a_τ dt
    let edge_t = |r: usize, j: usize| -> f64 { -0.5 * (a_tau[g.idx(r, j)] + a_tau[g.idx(r + 1, j)]) * ht };
    let edge_tau = |i: usize, j: usize| -> f64 { 0.5 * (a_t[g.idx(i, j)] + a_t[g.idx(i, (j + 1) % nt)]) * hs };
    let charges: Vec<f64> = (0..nr).map(|r| (0..nt).map(|j| edge_t(r, j)).sum()).collect();
    let qmax = charges.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    if qmax > opt.charge_tol {
        return Err(Error::NotExact(format!(
            "circle charge {qmax:e} exceeds {:e}",
            opt.charge_tol
        )));
    }
    // dual node (r, j) sits at (τ_{r+½}, t_{j+½}); the t-edge from j to j+1
    // on row r crosses node column j+1
    let mut a = vec![0.0; nr * nt];
    for j in 1..nt {
        a[j] = a[j - 1] + edge_t(0, j);
    }
    for r in 1..nr {
        for j in 0..nt {
            a[r * nt + j] = a[(r - 1) * nt + j] + edge_tau(r, j);
        }
    }
    // every dual face circulation, plus the circles closed by the path
    let mut loop_residual = qmax;
    let rc = closedness(g, &a_tau, &a_t);
    for r in 1..nr {
        for j in 0..nt {
            let jn = (j + 1) % nt;
            // counterclockwise around the dual cell centred at node (r, jn)
            let circ = edge_tau(r, j) + edge_t(r, jn) - edge_tau(r, jn) - edge_t(r - 1, jn);
            loop_residual = loop_residual.max(circ.abs());
            debug_assert!((circ - rc[g.idx(r, jn)] * hs * ht).abs() < 1e-9 * (1.0 + circ.abs()));
        }
    }
    let dual_tau: Vec<f64> = (0..nr).map(|r| (r as f64 + 0.5) * hs).collect();
    let t_used = (0..nt).map(|j| a_t[g.idx(nr - 1, j)]).sum::<f64>() * ht;
    let alpha: Vec<f64> = (0..nr)
        .map(|r| (0..nt).map(|j| a[r * nt + j] - t_used * dual_tau[r]).sum::<f64>() * ht)
        .collect();
    let c0 = alpha[nr - 1];
    let deviation: Vec<f64> = (0..nr)
        .map(|r| {
            (0..nt)
                .map(|j| (a[r * nt + j] - t_used * dual_tau[r] - c0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(AReport {
        a,
        dual_tau,
        t_used,
        charges,
        loop_residual,
        alpha,
        c0,
        deviation,
    })
}

/// Distance from `x` to the orbit, refined from the nearest sample by
/// Gauss-Newton on the flow parameter.
fn distance_to_orbit(triad: &Triad, orbit: &ClosedOrbit, x: &V4) -> Result<f64> {
    let (k, _) = orbit
        .samples
        .iter()
        .enumerate()
        .map(|(k, z)| (k, (z - x).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Argument("orbit has no samples".into()))?;
    let z = orbit.samples[k];
    let span = orbit.period / orbit.samples.len() as f64;
    let mut s = 0.0;
    let mut y = z;
    for _ in 0..8 {
        let xv = triad.reeb(&y);
        let ds = (x - y).dot(&xv) / xv.norm_squared();
        s = (s + ds).clamp(-span, span);
        y = if s.abs() < 1e-9 {
            triad.project_point(&(z + triad.reeb(&z) * s))
        } else {
            flow_steps(triad, &z, s, 16)?
        };
        if ds.abs() < 1e-15 {
            break;
        }
    }
    Ok((x - y).norm())
}

/// `max_t min_θ |w(τ, t) - z(t - θ)|` per slice, ambient distance.
pub fn limit_orbit_distance(triad: &Triad, w: &MapField, orbit: &ClosedOrbit) -> Result<Vec<f64>> {
    let g = &w.grid;
    let d: Vec<f64> = w
        .nodes
        .par_iter()
        .map(|x| distance_to_orbit(triad, orbit, x))
        .collect::<Result<_>>()?;
    Ok((0..g.ntau)
        .map(|i| (0..g.nt).map(|j| d[g.idx(i, j)]).fold(0.0, f64::max))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylfield::{massless, trivial_cylinder};
    use crate::reeb::{assemble_az, find_closed_orbit};
    use crate::triad::GOLDEN;
    use std::f64::consts::PI;

    fn circle(s: f64) -> V4 {
        V4::new((2.0 * s).cos(), (2.0 * s).sin(), 0.0, 0.0)
    }

    #[test]
    fn planted_three_interval_example() {
        let r = three_interval_bound(&[1.0, 0.3, 0.1, 0.02], 0.4).unwrap();
        assert_eq!(r.xi, 2.0);
        assert!(r.holds());
        let b = r.bound.unwrap();
        assert!((b[1] - 0.505).abs() < 1e-15);
        assert!(three_interval_bound(&[1.0], 0.5).is_err());
        assert!(three_interval_bound(&[1.0], 0.0).is_err());
        let z = three_interval_bound(&[0.0; 6], 0.2).unwrap();
        assert!(z.bound.unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn geometric_sequence_is_the_equality_case() {
        let c = 0.7;
        let gamma = gamma_of_rate(c);
        assert!((xi_of_gamma(gamma) - c.exp()).abs() < 1e-12);
        let xs: Vec<f64> = (0..20).map(|k| (-c * k as f64).exp()).collect();
        let r = three_interval_bound(&xs, gamma).unwrap();
        assert!(r.holds());
        for (x, b) in xs.iter().zip(r.bound.unwrap()) {
            assert!(b >= x - 1e-15);
        }
    }

    #[test]
    fn violations_are_reported() {
        let r = three_interval_bound(&[1.0, 2.0, 1.0, 0.5], 0.3).unwrap();
        assert_eq!(r.violations, vec![1, 2]);
        assert!(r.bound.is_none());
    }

    #[test]
    fn synthetic_rate_is_recovered() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(16.0, 513, 32).unwrap();
        let d0 = 0.5;
        let w = MapField::from_fn(g, &t, |tau, s| {
            let base = circle(PI * s);
            let amp = 1e-3 * (-d0 * tau).exp();
            base + V4::new(0.0, 0.0, amp * (2.0 * PI * s).cos(), amp * (2.0 * PI * s).sin())
        });
        let r = analyze_decay(&t, &w, None, &DecayOptions::default()).unwrap();
        assert!(r.tail.len() >= 6);
        assert!((r.delta_fit / d0 - 1.0).abs() < 0.02, "{}", r.delta_fit);
    }

    #[test]
    fn trivial_cylinder_is_already_asymptotic() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(6.0, 97, 64).unwrap();
        let w = trivial_cylinder(g, &t, circle, PI);
        let r = analyze_decay(&t, &w, None, &DecayOptions::default()).unwrap();
        assert!(r.xk.iter().all(|&x| x < 1e-20));
        assert!(r.already_asymptotic);
        let h = 1.0 / 64.0;
        assert!((r.t_limit - PI).abs() < 25.0 * h * h);
        assert!(r.q_limit.abs() < 1e-12);
        let short = CylinderGrid::new(4.0, 33, 16).unwrap();
        let w = trivial_cylinder(short, &t, circle, PI);
        assert!(matches!(
            analyze_decay(&t, &w, None, &DecayOptions::default()),
            Err(Error::InsufficientLength(_))
        ));
    }

    #[test]
    fn massless_charge_is_read_off() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let q = 0.5;
        let mut errs = vec![];
        for n in [32, 64] {
            let g = CylinderGrid::new(6.0, 6 * n / 2 + 1, n).unwrap();
            let w = massless(g, &t, circle, q, PI);
            let r = analyze_decay(&t, &w, None, &DecayOptions::default()).unwrap();
            assert!(r.xk.iter().all(|&x| x < 1e-20));
            errs.push((r.q_limit - q).abs());
            assert!(matches!(
                reconstruct_a(&t, &w, &DecayOptions::default()),
                Err(Error::NotExact(_))
            ));
            assert!(matches!(
                theta_component(&t, &w, PI, &DecayOptions::default()),
                Err(Error::ChargeNotVanishing(_))
            ));
        }
        assert!(errs[1] < errs[0] / 3.5, "{errs:?}");
    }

    #[test]
    fn linear_rate_on_a_known_spectrum() {
        let q = nalgebra::linalg::QR::new(DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64).sin())).q();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])) * q.transpose();
        let eta0 = DVector::from_vec(vec![0.3, -0.8, 0.5]);
        let r = linear_evolution_rate_matrix(&a, &eta0, 10.0).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        assert!(matches!(
            linear_evolution_rate_matrix(&z, &DVector::from_vec(vec![1.0, 1.0]), 1.0),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn eigenvector_rates_have_the_eigenvalue_sign() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let o = find_closed_orbit(&t, &V4::new(1.0, 0.0, 0.0, 0.0), 3.0).unwrap();
        let s = assemble_az(&t, &o, 64).unwrap();
        let kpos = s.eigenvalues.iter().position(|&m| m > 0.0).unwrap();
        let r = linear_evolution_rate(&s, &s.eigenvectors.column(kpos).into_owned(), 3.0).unwrap();
        assert!((r / s.eigenvalues[kpos] - 1.0).abs() < 0.005);
        let r = linear_evolution_rate(&s, &s.eigenvectors.column(kpos - 1).into_owned(), 3.0).unwrap();
        assert!(r < 0.0);
        assert!((r - s.eigenvalues[kpos - 1]).abs() < 1e-6);
    }

    #[test]
    fn theta_on_trivial_cylinders() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(6.0, 97, 64).unwrap();
        let w = trivial_cylinder(g, &t, circle, PI);
        let r = theta_component(&t, &w, PI, &DecayOptions::default()).unwrap();
        let h = 1.0 / 64.0;
        assert!(r.theta.iter().all(|v| v.norm() < 25.0 * h * h));
        assert!(r.identity_residual < 1e-10);
        let r = theta_component(&t, &w, PI - 0.1, &DecayOptions::default()).unwrap();
        assert!(r.constant_tail);
        assert!(r.slice_norms.iter().all(|n| (n - 0.1).abs() < 25.0 * h * h));
    }

    #[test]
    fn reconstruction_on_the_trivial_cylinder() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(6.0, 97, 64).unwrap();
        let w = trivial_cylinder(g, &t, circle, PI);
        let r = reconstruct_a(&t, &w, &DecayOptions::default()).unwrap();
        assert!(r.loop_residual < 1e-12);
        assert!(r.deviation.iter().all(|&d| d < 1e-12));
        let h = 1.0 / 64.0;
        assert!((r.t_used - PI).abs() < 25.0 * h * h);
    }

    #[test]
    fn orbit_distance_is_rotation_invariant() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let o = find_closed_orbit(&t, &V4::new(1.0, 0.0, 0.0, 0.0), 3.0).unwrap();
        let g = CylinderGrid::new(4.0, 17, 32).unwrap();
        for th in [0.0, 0.123] {
            let w = trivial_cylinder(g, &t, |s| circle(s + th), PI);
            let d = limit_orbit_distance(&t, &w, &o).unwrap();
            assert!(d.iter().all(|&x| x < 1e-10), "{d:?}");
        }
    }
}
