use std::fmt::{self, Write as _};
use std::fs;
use std::path::PathBuf;

use ctwork::config::{BoundaryKind, RunConfig};
use ctwork::cylfield::{energies, trivial_cylinder, CylinderGrid, MapField};
use ctwork::decay::{analyze_decay, reconstruct_a, theta_component, DecayOptions};
use ctwork::identities::{flat_oracle_family, near_orbit_family, run_suite};
use ctwork::instanton::{decaying_mode, history_csv, initial_guess, oracle_flat, BoundaryData, SolveConfig};
use ctwork::la::V4;
use ctwork::reeb::{
    assemble_az, find_closed_orbit, kernel_correspondence_check, kernel_threshold, nondegeneracy_with, ClosedOrbit,
};
use ctwork::triad::{axiom_check, invariant_check, Triad};
use ctwork::Error;
use rand::Rng;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    NotConverged(String),
    IdentityFailed(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::IdentityFailed(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::NotConverged(m) => write!(f, "not converged: {m}"),
            Failure::IdentityFailed(m) => write!(f, "check failed: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoOrbit(_) | Error::NotConverged(_) | Error::Stall { .. } => Failure::NotConverged(e.to_string()),
            Error::InsufficientLength(_) | Error::ChargeNotVanishing(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub triad: Triad,
    pub grid: CylinderGrid,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, Failure> {
        let triad = cfg.triad().map_err(usage)?;
        let grid = cfg.grid().map_err(usage)?;
        fs::create_dir_all(&cfg.out).map_err(|e| Failure::Usage(format!("{}: {e}", cfg.out.display())))?;
        Ok(Self { cfg, triad, grid })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn write(&self, name: &str, body: &str) -> Result<(), Failure> {
        fs::write(self.path(name), body).map_err(|e| Failure::Runtime(format!("{name}: {e}")))
    }

    fn period(&self) -> Result<f64, Failure> {
        self.cfg
            .period_guess(&self.triad)
            .ok_or_else(|| Failure::Usage(format!("triad `{}` has no closed Reeb orbits", self.triad.id())))
    }

    fn orbit(&self, n: usize) -> Result<ClosedOrbit, Failure> {
        let t = self.period()?;
        let o = find_closed_orbit(&self.triad, &self.cfg.orbit_p, t)?;
        Ok(ClosedOrbit::from_point(&self.triad, o.p, o.period, n)?)
    }

    fn dim(&self) -> usize {
        self.triad.ambient_dim()
    }
}

pub fn triad_info(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.cfg;
    let inv = invariant_check(&ctx.triad, c.axiom_samples, c.seed);
    let ax = axiom_check(&ctx.triad, c.axiom_samples, c.axiom_step, c.seed);
    let inv_ok = inv.passes(1e-10);
    let ax_ok = ax.passes(c.axiom_tol);
    let mut csv = String::from("group,name,max_residual\n");
    for (g, r) in [("invariant", &inv), ("axiom", &ax)] {
        for row in &r.rows {
            let _ = writeln!(csv, "{g},{},{:.6e}", row.name, row.max_residual);
        }
    }
    ctx.write("triad_info.csv", &csv)?;
    let mut s = String::new();
    let _ = writeln!(s, "triad = {}", ctx.triad.id());
    let _ = writeln!(s, "samples = {}", c.axiom_samples);
    let _ = writeln!(s, "fd_step = {:e}", c.axiom_step);
    let _ = writeln!(s, "invariants_max = {:.6e}", inv.max());
    let _ = writeln!(s, "axioms_max = {:.6e}", ax.max());
    let _ = writeln!(s, "axioms_tol = {:e}", c.axiom_tol);
    let _ = writeln!(s, "status = {}", status(inv_ok && ax_ok));
    ctx.write("triad_info_summary.txt", &s)?;
    if inv_ok && ax_ok {
        Ok(())
    } else {
        Err(Failure::IdentityFailed(format!(
            "triad checks exceed tolerance (invariants {:.3e}, axioms {:.3e})",
            inv.max(),
            ax.max()
        )))
    }
}

/// Boundary loops and initial field for the configured problem.
fn problem(ctx: &Context) -> Result<(BoundaryData, MapField), Failure> {
    let (c, g, t) = (&ctx.cfg, ctx.grid, &ctx.triad);
    let bc = match c.boundary {
        BoundaryKind::Oracle => {
            if !t.is_flat() {
                return Err(Failure::Usage("boundary.kind = oracle needs the flat triad".into()));
            }
            let z = vec![0.0; g.nt];
            let w = oracle_flat(g, &decaying_mode(&g, c.boundary_eps), (&z, &z), 1e-1)?;
            BoundaryData::from_field(&w)
        }
        BoundaryKind::Trivial => {
            let o = ctx.orbit(g.nt)?;
            let w = trivial_cylinder(
                g,
                t,
                |s| o.samples[((s / o.period * g.nt as f64).round() as usize) % g.nt],
                o.period,
            );
            BoundaryData::from_field(&w)
        }
        BoundaryKind::NearOrbit => {
            let o = ctx.orbit(g.nt)?;
            let sr = assemble_az(t, &o, g.nt)?;
            let mut rng = ctwork::rng::stream(c.seed, "cli.boundary");
            let top = sr.positive_gap * (1.0 + 1e-8);
            let raw = sr.random_section_in(&mut rng, 0.0, top);
            let m = raw.amax();
            if m == 0.0 {
                return Err(Failure::Runtime("A_z has no positive eigenspace".into()));
            }
            sr.near_orbit_loops(t, &(raw / m), c.boundary_eps, g.l)
        }
    };
    let mut w0 = initial_guess(t, g, &bc)?;
    if c.perturb != 0.0 {
        let mut rng = ctwork::rng::stream(c.seed, "cli.perturb");
        let dim = ctx.dim();
        let v: Vec<V4> = (0..g.nt)
            .map(|_| V4::from_fn(|r, _| if r < dim { rng.random_range(-1.0..1.0) } else { 0.0 }))
            .collect();
        for i in 1..g.ntau - 1 {
            let s = (std::f64::consts::PI * g.tau(i) / g.l).sin();
            for j in 0..g.nt {
                let k = g.idx(i, j);
                w0.nodes[k] = t.project_point(&(w0.nodes[k] + v[j] * (c.perturb * s)));
            }
        }
    }
    Ok((bc, w0))
}

pub fn solve(ctx: &Context) -> Result<MapField, Failure> {
    let c = &ctx.cfg;
    let (bc, w0) = problem(ctx)?;
    let mut sc = SolveConfig::new(bc);
    sc.tol_residual = c.tol_residual;
    sc.max_iters = c.max_iters;
    sc.method = c.method;
    sc.fd_step = c.fd_step;
    sc.seed = c.seed;
    sc.validate(&ctx.triad).map_err(usage)?;
    ctx.write("config.txt", &c.to_text())?;
    let r = match ctwork::instanton::solve(&ctx.triad, &w0, &sc) {
        Ok(r) => r,
        Err(Error::Stall { iters, value, last }) => {
            last.write(&ctx.path("solve_field.txt"), ctx.dim())?;
            let s = format!("iters = {iters}\nF = {value:.10e}\nconverged = false\nstatus = FAIL\n");
            ctx.write("solve_summary.txt", &s)?;
            return Err(Failure::NotConverged(format!(
                "line search stalled after {iters} iterations"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    ctx.write("solve_history.csv", &history_csv(&r.history))?;
    r.w.write(&ctx.path("solve_field.txt"), ctx.dim())?;
    let last = r.history.last().expect("history has the initial row");
    let mut s = String::new();
    let _ = writeln!(s, "triad = {}", ctx.triad.id());
    let _ = writeln!(s, "grid = {} x {} on L = {}", ctx.grid.ntau, ctx.grid.nt, ctx.grid.l);
    let _ = writeln!(s, "iters = {}", last.iter);
    let _ = writeln!(s, "F = {:.10e}", last.f);
    let _ = writeln!(s, "res_dbar = {:.10e}", r.report.res_dbar);
    let _ = writeln!(s, "res_closed = {:.10e}", r.report.res_closed);
    let _ = writeln!(s, "E_pi = {:.10e}", r.report.e_pi);
    let _ = writeln!(s, "T = {:.10e}", r.report.t);
    let _ = writeln!(s, "Q = {:.10e}", r.report.q);
    let _ = writeln!(s, "converged = {}", r.converged);
    let _ = writeln!(s, "status = {}", status(r.converged));
    ctx.write("solve_summary.txt", &s)?;
    if r.converged {
        Ok(r.w)
    } else {
        Err(Failure::NotConverged(format!(
            "residual {:.3e} after {} iterations",
            r.report.res_dbar, last.iter
        )))
    }
}

pub fn orbits(ctx: &Context) -> Result<(), Failure> {
    let o = ctx.orbit(ctx.cfg.spectrum_nt())?;
    let nd = nondegeneracy_with(&o, ctx.cfg.nondegeneracy_threshold);
    ctx.write("orbit_samples.csv", &o.samples_csv())?;
    let mut s = o.summary(&nd);
    let _ = writeln!(s, "status = PASS");
    ctx.write("orbit_summary.txt", &s)
}

pub fn spectrum(ctx: &Context) -> Result<(), Failure> {
    let nt = ctx.cfg.spectrum_nt();
    let o = ctx.orbit(nt)?;
    let nd = nondegeneracy_with(&o, ctx.cfg.nondegeneracy_threshold);
    let sr = assemble_az(&ctx.triad, &o, nt)?;
    let kc = kernel_correspondence_check(&ctx.triad, &o, nt)?;
    ctx.write("spectrum_eigenvalues.csv", &sr.eigenvalues_csv())?;
    let mut s = String::new();
    let _ = writeln!(s, "triad = {}", ctx.triad.id());
    let _ = writeln!(s, "period = {:.16e}", o.period);
    let _ = writeln!(s, "nt = {nt}");
    let _ = writeln!(s, "gap = {:.10e}", sr.gap);
    let _ = writeln!(s, "positive_gap = {:.10e}", sr.positive_gap);
    let _ = writeln!(s, "negative_gap = {:.10e}", sr.negative_gap);
    let _ = writeln!(s, "holonomy = {:.10e}", sr.holonomy);
    let _ = writeln!(s, "asymmetry = {:.3e}", sr.asymmetry);
    let _ = writeln!(s, "kernel_threshold = {:.6e}", kernel_threshold(nt));
    let _ = writeln!(s, "near_kernel = {}", kc.kernel_dim);
    let _ = writeln!(s, "eigenvalue_one = {}", kc.eigenvalue_one);
    let _ = writeln!(s, "nondegenerate = {}", nd.nondegenerate);
    let _ = writeln!(s, "kernel_agrees = {}", kc.agree);
    let _ = writeln!(s, "status = {}", status(kc.agree));
    ctx.write("spectrum_summary.txt", &s)?;
    if kc.agree {
        Ok(())
    } else {
        Err(Failure::IdentityFailed(
            "near-kernel of A_z disagrees with the return map".into(),
        ))
    }
}

pub fn decay(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.cfg;
    let w = match &c.input {
        Some(p) => {
            let w = MapField::read(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            if w.triad_id != ctx.triad.id() {
                return Err(Failure::Usage(format!(
                    "input field lives on `{}`, config names `{}`",
                    w.triad_id,
                    ctx.triad.id()
                )));
            }
            w
        }
        None => solve(ctx)?,
    };
    let opt = DecayOptions {
        gamma: c.gamma,
        charge_tol: c.charge_tol,
    };
    let orbit = match c.period_guess(&ctx.triad) {
        Some(_) => Some(ctx.orbit(w.grid.nt)?),
        None => None,
    };
    let gap = match &orbit {
        Some(o) => Some(assemble_az(&ctx.triad, o, w.grid.nt)?.gap),
        None => None,
    };
    let rep = analyze_decay(&ctx.triad, &w, orbit.as_ref(), &opt)?;
    ctx.write("decay_windows.csv", &rep.to_csv())?;
    let en = energies(&ctx.triad, &w);
    let mut s = String::new();
    let _ = writeln!(s, "triad = {}", ctx.triad.id());
    let _ = writeln!(s, "res_dbar = {:.6e}", en.res_dbar);
    s.push_str(&rep.summary(gap));
    match theta_component(&ctx.triad, &w, rep.t_limit, &opt) {
        Ok(th) => {
            ctx.write("decay_theta.csv", &th.to_csv(&w.grid))?;
            let _ = writeln!(s, "theta_rate = {:.10e}", th.rate);
            let _ = writeln!(s, "theta_identity_residual = {:.6e}", th.identity_residual);
        }
        Err(Error::ChargeNotVanishing(q)) => {
            let _ = writeln!(s, "theta = skipped (|Q| = {q:.3e})");
        }
        Err(e) => return Err(e.into()),
    }
    match reconstruct_a(&ctx.triad, &w, &opt) {
        Ok(a) => {
            ctx.write("decay_a.csv", &a.to_csv())?;
            let _ = writeln!(s, "a_loop_residual = {:.6e}", a.loop_residual);
            let _ = writeln!(s, "a_C0 = {:.10e}", a.c0);
            let _ = writeln!(s, "a_tail_decreasing = {}", a.tail_decreasing(w.grid.l, 0.0));
        }
        Err(Error::ChargeNotVanishing(q)) => {
            let _ = writeln!(s, "a = skipped (|Q| = {q:.3e})");
        }
        Err(e) => return Err(e.into()),
    }
    let pass = rep.hypothesis_on(&rep.tail, rep.gamma_used);
    let _ = writeln!(s, "status = {}", status(pass));
    ctx.write("decay_summary.txt", &s)
}

pub fn verify(ctx: &Context) -> Result<(), Failure> {
    let c = &ctx.cfg;
    let fields = if ctx.triad.is_flat() {
        flat_oracle_family(&c.verify_resolutions, c.verify_eps)?
    } else {
        let t = ctx.period()?;
        let o = find_closed_orbit(&ctx.triad, &c.orbit_p, t)?;
        near_orbit_family(
            &ctx.triad,
            o.p,
            o.period,
            &c.verify_resolutions,
            c.verify_eps,
            c.tol_residual,
        )?
    };
    let suite = run_suite(&ctx.triad, &fields, c.seed)?;
    ctx.write("verify_identities.csv", &suite.to_csv())?;
    let mut s = format!("triad = {}\n", ctx.triad.id());
    s.push_str(&suite.summary());
    ctx.write("verify_summary.txt", &s)?;
    if suite.all_pass() {
        Ok(())
    } else {
        let bad: Vec<&str> = suite
            .reports
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect();
        Err(Failure::IdentityFailed(bad.join(", ")))
    }
}
