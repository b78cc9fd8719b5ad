//! Maps `w: [0, L] × S¹ → M` on a rectangular grid.
//!
//! Nodes are indexed `k = i·Nt + j` with `i` along `τ` (Ntau nodes, both ends
//! included) and `j` along the periodic `t` direction (Nt nodes, `t_j = j/Nt`).
//! Derivatives are second-order: central in the interior, one-sided at
//! `τ = 0, L`, periodic in `t`. Quadrature is trapezoid in `τ` times the
//! uniform rule in `t`. The domain carries `dτ² + dt²` with `(τ, t)` positively
//! oriented and `j ∂τ = ∂t`.

use crate::error::{Error, Result};
use crate::la::{j0, V2, V4};
use crate::sum::pairwise;
use crate::triad::Triad;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderGrid {
    pub l: f64,
    pub ntau: usize,
    pub nt: usize,
}

impl CylinderGrid {
    pub fn new(l: f64, ntau: usize, nt: usize) -> Result<Self> {
        if ntau < 8 || nt < 8 {
            return Err(Error::Argument(format!("grid needs Ntau, Nt >= 8 (got {ntau}, {nt})")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Argument(format!("cylinder length must be positive (got {l})")));
        }
        Ok(Self { l, ntau, nt })
    }

    pub fn htau(&self) -> f64 {
        self.l / (self.ntau - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        1.0 / self.nt as f64
    }

    pub fn len(&self) -> usize {
        self.ntau * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    pub fn tau(&self, i: usize) -> f64 {
        i as f64 * self.htau()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.ht()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let i = k / self.nt;
        i == 0 || i + 1 == self.ntau
    }

    /// Quadrature weight of each node.
    pub fn weights(&self) -> Vec<f64> {
        let (ht, hs) = (self.ht(), self.htau());
        (0..self.len())
            .map(|k| {
                let i = k / self.nt;
                let wt = if i == 0 || i + 1 == self.ntau { 0.5 } else { 1.0 };
                wt * hs * ht
            })
            .collect()
    }

    /// Weights with the Dirichlet rows removed; the equations live on
    /// interior nodes.
    pub fn interior_weights(&self) -> Vec<f64> {
        let h = self.htau() * self.ht();
        (0..self.len())
            .map(|k| if self.is_boundary(k) { 0.0 } else { h })
            .collect()
    }

    /// `∂τ` stencil at row `i`: node rows and coefficients.
    ///
    /// The end rows use a four-point one-sided formula whose leading error
    /// `h² f'''/6` equals that of the central difference. The truncation
    /// error is then smooth up to the ends, and central differences of
    /// derived quantities stay second order on the rows next to them.
    #[inline]
    pub fn dtau_stencil(&self, i: usize) -> [(usize, f64); 4] {
        let h = self.htau();
        let n = self.ntau;
        if i == 0 {
            [(0, -2.0 / h), (1, 3.5 / h), (2, -2.0 / h), (3, 0.5 / h)]
        } else if i + 1 == n {
            [(n - 1, 2.0 / h), (n - 2, -3.5 / h), (n - 3, 2.0 / h), (n - 4, -0.5 / h)]
        } else {
            [(i + 1, 0.5 / h), (i - 1, -0.5 / h), (i, 0.0), (i, 0.0)]
        }
    }

    /// `∂t` stencil at column `j`.
    #[inline]
    pub fn dt_stencil(&self, j: usize) -> [(usize, f64); 2] {
        let h2 = 2.0 * self.ht();
        let n = self.nt;
        [((j + 1) % n, 1.0 / h2), ((j + n - 1) % n, -1.0 / h2)]
    }

    /// `∂τ` of a nodal quantity.
    pub fn dtau<T>(&self, f: &[T], k: usize) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let (i, j) = (k / self.nt, k % self.nt);
        let s = self.dtau_stencil(i);
        f[self.idx(s[0].0, j)] * s[0].1
            + f[self.idx(s[1].0, j)] * s[1].1
            + f[self.idx(s[2].0, j)] * s[2].1
            + f[self.idx(s[3].0, j)] * s[3].1
    }

    pub fn dt<T>(&self, f: &[T], k: usize) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let (i, j) = (k / self.nt, k % self.nt);
        let s = self.dt_stencil(j);
        f[self.idx(i, s[0].0)] * s[0].1 + f[self.idx(i, s[1].0)] * s[1].1
    }

    /// Weighted sum `Σ w_k f_k`, pairwise.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        crate::sum::dot(&self.weights(), f)
    }

    /// `∫_{s}×S¹ f dt` for the slice `i`.
    pub fn slice_integral(&self, f: &[f64], i: usize) -> f64 {
        let row: Vec<f64> = (0..self.nt).map(|j| f[self.idx(i, j)]).collect();
        pairwise(&row) * self.ht()
    }
}

/// Discretized map; nodes are ambient points on the triad's model.
#[derive(Clone, Debug, PartialEq)]
pub struct MapField {
    pub grid: CylinderGrid,
    pub triad_id: String,
    pub nodes: Vec<V4>,
}

impl MapField {
    /// Sample `f(τ, t)` at the nodes and project onto `M`.
    pub fn from_fn(grid: CylinderGrid, triad: &Triad, f: impl Fn(f64, f64) -> V4 + Sync) -> Self {
        let nodes = (0..grid.len())
            .into_par_iter()
            .map(|k| triad.project_point(&f(grid.tau(k / grid.nt), grid.t(k % grid.nt))))
            .collect();
        Self {
            grid,
            triad_id: triad.id().to_string(),
            nodes,
        }
    }

    pub fn constant(grid: CylinderGrid, triad: &Triad, p: V4) -> Self {
        Self::from_fn(grid, triad, |_, _| p)
    }

    /// `(i, j) ↦ (j, i)` on a square grid of matching spacing.
    pub fn swap_tau_t(&self) -> Result<Self> {
        let g = self.grid;
        if g.ntau != g.nt {
            return Err(Error::Argument("swap needs Ntau = Nt".into()));
        }
        let nodes = (0..g.len()).map(|k| self.nodes[g.idx(k % g.nt, k / g.nt)]).collect();
        Ok(Self {
            grid: g,
            triad_id: self.triad_id.clone(),
            nodes,
        })
    }

    pub fn max_constraint(&self, triad: &Triad) -> f64 {
        self.nodes.iter().fold(0.0_f64, |a, p| a.max(triad.constraint(p).abs()))
    }

    /// Plain-text serialization: header then `i j x1 x2 x3 [x4]` rows.
    pub fn to_text(&self, dim: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ctwork map field");
        let _ = writeln!(s, "triad {}", self.triad_id);
        let _ = writeln!(s, "L {:.16e}", self.grid.l);
        let _ = writeln!(s, "Ntau {}", self.grid.ntau);
        let _ = writeln!(s, "Nt {}", self.grid.nt);
        for (k, p) in self.nodes.iter().enumerate() {
            let _ = write!(s, "{} {}", k / self.grid.nt, k % self.grid.nt);
            for c in p.iter().take(dim) {
                let _ = write!(s, " {c:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut triad_id = None;
        let mut l = None;
        let mut ntau = None;
        let mut nt = None;
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: `{line}`", ln + 1));
            let mut it = line.split_whitespace();
            let head = it.next().ok_or_else(bad)?;
            match head {
                "triad" => triad_id = Some(it.next().ok_or_else(bad)?.to_string()),
                "L" => l = Some(it.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?),
                "Ntau" => ntau = Some(it.next().ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?),
                "Nt" => nt = Some(it.next().ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?),
                _ => {
                    let i: usize = head.parse().map_err(|_| bad())?;
                    let j: usize = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                    let xs: Vec<f64> = it
                        .map(|x| x.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad())?;
                    if !(3..=4).contains(&xs.len()) {
                        return Err(bad());
                    }
                    let mut p = V4::zeros();
                    for (c, x) in xs.iter().enumerate() {
                        p[c] = *x;
                    }
                    rows.push((i, j, p));
                }
            }
        }
        let miss = |w: &str| Error::Parse(format!("missing header field `{w}`"));
        let grid = CylinderGrid::new(
            l.ok_or_else(|| miss("L"))?,
            ntau.ok_or_else(|| miss("Ntau"))?,
            nt.ok_or_else(|| miss("Nt"))?,
        )?;
        if rows.len() != grid.len() {
            return Err(Error::Parse(format!(
                "expected {} nodes, found {}",
                grid.len(),
                rows.len()
            )));
        }
        let mut nodes = vec![V4::zeros(); grid.len()];
        let mut seen = vec![false; grid.len()];
        for (i, j, p) in rows {
            if i >= grid.ntau || j >= grid.nt || seen[grid.idx(i, j)] {
                return Err(Error::Parse(format!("bad node index ({i}, {j})")));
            }
            seen[grid.idx(i, j)] = true;
            nodes[grid.idx(i, j)] = p;
        }
        Ok(Self {
            grid,
            triad_id: triad_id.ok_or_else(|| miss("triad"))?,
            nodes,
        })
    }

    pub fn write(&self, path: &Path, dim: usize) -> Result<()> {
        std::fs::write(path, self.to_text(dim))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Components of a one-form against `dτ`, `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    pub a_tau: Vec<f64>,
    pub a_t: Vec<f64>,
}

impl OneForm {
    /// `β ∘ j`: `(β∘j)(∂τ) = β(∂t)`, `(β∘j)(∂t) = -β(∂τ)`.
    pub fn compose_j(&self) -> OneForm {
        OneForm {
            a_tau: self.a_t.clone(),
            a_t: self.a_tau.iter().map(|x| -x).collect(),
        }
    }

    /// `dβ(∂τ, ∂t)` by the curl stencil.
    pub fn d(&self, grid: &CylinderGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|k| grid.dtau(&self.a_t, k) - grid.dt(&self.a_tau, k))
            .collect()
    }
}

/// Section of `w*ξ`: one ambient vector per node plus its frame coordinates.
#[derive(Clone, Debug)]
pub struct XiSection {
    pub vecs: Vec<V4>,
    pub coords: Vec<V2>,
}

/// Per-node first-order data of a map.
#[derive(Clone, Copy, Debug)]
pub struct NodeData {
    pub p: V4,
    /// raw (unprojected) stencil derivatives
    pub u: V4,
    pub v: V4,
    /// `ξ`-coordinates of `π ∂τ w` and `π ∂t w`
    pub zeta: V2,
    pub eta: V2,
    pub a_tau: f64,
    pub a_t: f64,
}

impl NodeData {
    /// `∂̄^π w(∂τ) = ½(ζ + Jη)`.
    pub fn dbar_tau(&self) -> V2 {
        (self.zeta + j0() * self.eta) * 0.5
    }

    /// `∂^π w(∂τ) = ½(ζ - Jη)`.
    pub fn del_tau(&self) -> V2 {
        (self.zeta - j0() * self.eta) * 0.5
    }

    /// `|∂̄^π w|² = |∂̄(∂τ)|² + |∂̄(∂t)|²`.
    pub fn dbar_sq(&self) -> f64 {
        2.0 * self.dbar_tau().norm_squared()
    }

    pub fn del_sq(&self) -> f64 {
        2.0 * self.del_tau().norm_squared()
    }

    pub fn e_pi(&self) -> f64 {
        self.zeta.norm_squared() + self.eta.norm_squared()
    }

    /// `w*dλ(∂τ, ∂t) = dλ(ζ, η)`.
    pub fn pull_dlambda(&self) -> f64 {
        self.zeta[0] * self.eta[1] - self.zeta[1] * self.eta[0]
    }
}

/// Raw stencil derivatives of all nodes.
pub fn raw_derivatives(w: &MapField) -> (Vec<V4>, Vec<V4>) {
    let g = &w.grid;
    let u = (0..g.len()).into_par_iter().map(|k| g.dtau(&w.nodes, k)).collect();
    let v = (0..g.len()).into_par_iter().map(|k| g.dt(&w.nodes, k)).collect();
    (u, v)
}

pub fn node_data(triad: &Triad, w: &MapField) -> Vec<NodeData> {
    let (u, v) = raw_derivatives(w);
    (0..w.grid.len())
        .into_par_iter()
        .map(|k| {
            let p = w.nodes[k];
            let c = triad.pullback_coef(&p);
            NodeData {
                p,
                u: u[k],
                v: v[k],
                zeta: V2::new(c[0].dot(&u[k]), c[1].dot(&u[k])),
                eta: V2::new(c[0].dot(&v[k]), c[1].dot(&v[k])),
                a_tau: c[2].dot(&u[k]),
                a_t: c[2].dot(&v[k]),
            }
        })
        .collect()
}

/// `w*λ`.
pub fn pullback_lambda(triad: &Triad, w: &MapField) -> OneForm {
    let nd = node_data(triad, w);
    OneForm {
        a_tau: nd.iter().map(|n| n.a_tau).collect(),
        a_t: nd.iter().map(|n| n.a_t).collect(),
    }
}

/// `d(w*λ∘j)(∂τ, ∂t) = -(∂τ a_τ + ∂t a_t)`.
pub fn closedness(grid: &CylinderGrid, a_tau: &[f64], a_t: &[f64]) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| -(grid.dtau(a_tau, k) + grid.dt(a_t, k)))
        .collect()
}

/// `π ∂τ w` as a section of `w*ξ`.
pub fn zeta_section(triad: &Triad, w: &MapField) -> XiSection {
    section_from(triad, w, |n| n.zeta)
}

fn section_from(triad: &Triad, w: &MapField, f: impl Fn(&NodeData) -> V2 + Sync) -> XiSection {
    let nd = node_data(triad, w);
    let pairs: Vec<(V4, V2)> = nd
        .par_iter()
        .map(|n| {
            let c = f(n);
            (Triad::from_xi_coords(&triad.frame(&n.p), &c), c)
        })
        .collect();
    XiSection {
        vecs: pairs.iter().map(|x| x.0).collect(),
        coords: pairs.iter().map(|x| x.1).collect(),
    }
}

/// `∂̄^π w` evaluated on `∂τ` and `∂t`.
#[derive(Clone, Debug)]
pub struct DbarField {
    pub on_tau: XiSection,
    pub on_t: XiSection,
}

impl DbarField {
    /// Pointwise `|∂̄^π w|²`.
    pub fn norm_sq(&self) -> Vec<f64> {
        self.on_tau
            .coords
            .iter()
            .zip(&self.on_t.coords)
            .map(|(a, b)| a.norm_squared() + b.norm_squared())
            .collect()
    }
}

pub fn dbar_pi(triad: &Triad, w: &MapField) -> DbarField {
    let on_tau = section_from(triad, w, |n| n.dbar_tau());
    // ∂̄(∂t) = ½(η - Jζ) = -J ∂̄(∂τ)
    let on_t = section_from(triad, w, |n| -(j0() * n.dbar_tau()));
    DbarField { on_tau, on_t }
}

/// `∂^π w` evaluated on `∂τ` and `∂t`.
pub fn del_pi(triad: &Triad, w: &MapField) -> DbarField {
    let on_tau = section_from(triad, w, |n| n.del_tau());
    let on_t = section_from(triad, w, |n| j0() * n.del_tau());
    DbarField { on_tau, on_t }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    pub e_pi: f64,
    pub t: f64,
    pub q: f64,
    pub res_dbar: f64,
    pub res_closed: f64,
}

pub fn energies(triad: &Triad, w: &MapField) -> EnergyReport {
    let nd = node_data(triad, w);
    energies_from(&w.grid, &nd)
}

pub fn energies_from(grid: &CylinderGrid, nd: &[NodeData]) -> EnergyReport {
    let wts = grid.weights();
    let e: Vec<f64> = nd.iter().map(|n| 0.5 * n.e_pi()).collect();
    let e_pi = crate::sum::dot(&wts, &e);
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let a_t: Vec<f64> = nd.iter().map(|n| n.a_t).collect();
    let t = e_pi + grid.slice_integral(&a_t, 0);
    let q = -grid.slice_integral(&a_tau, 0);
    let db: Vec<f64> = nd.iter().map(|n| n.dbar_sq()).collect();
    let rc = closedness(grid, &a_tau, &a_t);
    let rc2: Vec<f64> = rc.iter().map(|x| x * x).collect();
    let wi = grid.interior_weights();
    EnergyReport {
        e_pi,
        t,
        q,
        res_dbar: crate::sum::dot(&wi, &db).sqrt(),
        res_closed: crate::sum::dot(&wi, &rc2).sqrt(),
    }
}

/// Maximum nodal residuals of the energy identities.
#[derive(Clone, Copy, Debug)]
pub struct EnergyIdentities {
    /// `e^π - |∂^π w|² - |∂̄^π w|²`
    pub density_split: f64,
    /// `2 w*dλ - (|∂^π w|² - |∂̄^π w|²)` with `w*dλ = dλ(ζ, η)`
    pub area_form: f64,
    /// same with `w*dλ` replaced by the curl of `w*λ`
    pub area_form_curl: f64,
    /// `w*λ ∧ w*λ∘j + |w*λ|²`
    pub lambda_wedge: f64,
    /// `w*dλ - ½ e^π`, only meaningful on Cauchy-Riemann maps
    pub on_shell: f64,
    pub on_shell_curl: f64,
    pub res_dbar: f64,
}

pub fn check_energy_identities(triad: &Triad, w: &MapField) -> EnergyIdentities {
    let g = &w.grid;
    let nd = node_data(triad, w);
    let lam = OneForm {
        a_tau: nd.iter().map(|n| n.a_tau).collect(),
        a_t: nd.iter().map(|n| n.a_t).collect(),
    };
    let curl = lam.d(g);
    let lj = lam.compose_j();
    let mut r = EnergyIdentities {
        density_split: 0.0,
        area_form: 0.0,
        area_form_curl: 0.0,
        lambda_wedge: 0.0,
        on_shell: 0.0,
        on_shell_curl: 0.0,
        res_dbar: energies_from(g, &nd).res_dbar,
    };
    for (k, n) in nd.iter().enumerate() {
        let (del, dbar) = (n.del_sq(), n.dbar_sq());
        r.density_split = r.density_split.max((n.e_pi() - del - dbar).abs());
        r.area_form = r.area_form.max((2.0 * n.pull_dlambda() - (del - dbar)).abs());
        r.area_form_curl = r.area_form_curl.max((2.0 * curl[k] - (del - dbar)).abs());
        let wedge = lam.a_tau[k] * lj.a_t[k] - lam.a_t[k] * lj.a_tau[k];
        let norm = lam.a_tau[k].powi(2) + lam.a_t[k].powi(2);
        r.lambda_wedge = r.lambda_wedge.max((wedge + norm).abs());
        r.on_shell = r.on_shell.max((n.pull_dlambda() - 0.5 * n.e_pi()).abs());
        r.on_shell_curl = r.on_shell_curl.max((curl[k] - 0.5 * n.e_pi()).abs());
    }
    r
}

/// Per-slice circle integrals.
#[derive(Clone, Copy, Debug)]
pub struct SliceRow {
    pub tau: f64,
    /// `∫ w*λ` over `{τ}×S¹`
    pub action: f64,
    /// `∫ w*λ∘j` over `{τ}×S¹`
    pub charge: f64,
    /// `½ ∫_{[τ,L]×S¹} |d^π w|² + action`
    pub t_balance: f64,
}

pub fn charge_action_slices(triad: &Triad, w: &MapField) -> Vec<SliceRow> {
    let g = &w.grid;
    let nd = node_data(triad, w);
    let a_tau: Vec<f64> = nd.iter().map(|n| n.a_tau).collect();
    let a_t: Vec<f64> = nd.iter().map(|n| n.a_t).collect();
    let e: Vec<f64> = nd.iter().map(|n| 0.5 * n.e_pi()).collect();
    let slice_e: Vec<f64> = (0..g.ntau).map(|i| g.slice_integral(&e, i)).collect();
    // tail energy by trapezoid from the right
    let mut tail = vec![0.0; g.ntau];
    for i in (0..g.ntau - 1).rev() {
        tail[i] = tail[i + 1] + 0.5 * g.htau() * (slice_e[i] + slice_e[i + 1]);
    }
    (0..g.ntau)
        .map(|i| {
            let action = g.slice_integral(&a_t, i);
            SliceRow {
                tau: g.tau(i),
                action,
                charge: -g.slice_integral(&a_tau, i),
                t_balance: tail[i] + action,
            }
        })
        .collect()
}

/// Trivial cylinder `w(τ, t) = γ(T t)` from a sampler of the Reeb trajectory.
pub fn trivial_cylinder(grid: CylinderGrid, triad: &Triad, gamma: impl Fn(f64) -> V4 + Sync, period: f64) -> MapField {
    MapField::from_fn(grid, triad, |_, t| gamma(period * t))
}

/// Massless instanton `w(τ, t) = γ(-Q τ + T t)`.
pub fn massless(grid: CylinderGrid, triad: &Triad, gamma: impl Fn(f64) -> V4 + Sync, q: f64, period: f64) -> MapField {
    MapField::from_fn(grid, triad, |tau, t| gamma(-q * tau + period * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triad::GOLDEN;

    fn circle(a1: f64) -> impl Fn(f64) -> V4 + Sync {
        move |s: f64| {
            let th = 2.0 * s / a1;
            V4::new(a1.sqrt() * th.cos(), a1.sqrt() * th.sin(), 0.0, 0.0)
        }
    }

    #[test]
    fn grid_contract() {
        assert!(CylinderGrid::new(1.0, 7, 8).is_err());
        let g = CylinderGrid::new(2.0, 9, 8).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn stencils_are_second_order_exact_on_quadratics() {
        let g = CylinderGrid::new(1.0, 11, 8).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| g.tau(k / g.nt).powi(2)).collect();
        for k in 0..g.len() {
            assert!((g.dtau(&f, k) - 2.0 * g.tau(k / g.nt)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_map_is_zero() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.0, 9, 8).unwrap();
        let w = MapField::constant(g, &t, t.project_point(&V4::new(0.3, 0.1, 0.8, 0.2)));
        let e = energies(&t, &w);
        // end-row stencil weights do not cancel exactly in floating point
        assert!(e.e_pi.abs().max(e.t.abs()).max(e.q.abs()) < 1e-14);
    }

    #[test]
    fn trivial_cylinder_action() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let period = std::f64::consts::PI;
        let mut errs = vec![];
        for n in [16, 32] {
            let g = CylinderGrid::new(1.0, n, n).unwrap();
            let w = trivial_cylinder(g, &t, circle(1.0), period);
            let e = energies(&t, &w);
            assert!(e.e_pi < 1e-24 && e.q.abs() < 1e-14 && e.res_dbar < 1e-12);
            errs.push((e.t - period).abs());
        }
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.1);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let t = Triad::ellipsoid(1.0, GOLDEN);
        let g = CylinderGrid::new(1.5, 8, 8).unwrap();
        let w = MapField::from_fn(g, &t, |a, b| V4::new(1.0 + a, b.sin(), 0.3, a * b));
        let back = MapField::parse(&w.to_text(4)).unwrap();
        assert_eq!(w, back);
    }
}
