//! Run configuration: UTF-8 text, one `key = value` per line, `#` comments,
//! nested keys dotted (`solver.tol_residual`).
//!
//! Parsing starts from [`RunConfig::default`] and overrides the keys that
//! appear; unknown keys and malformed values are errors. [`RunConfig::validate`]
//! checks every module precondition that can be decided without computing.

use std::path::PathBuf;
use std::str::FromStr;

use crate::cylfield::CylinderGrid;
use crate::error::{Error, Result};
use crate::instanton::Method;
use crate::la::V4;
use crate::triad::{Model, Triad};

/// How `solve` builds its Dirichlet loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// both loops on the closed orbit
    Trivial,
    /// orbit pushed along the lowest positive mode of `A_z`
    NearOrbit,
    /// flat model, exact decaying solution
    Oracle,
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(Self::Trivial),
            "near-orbit" => Ok(Self::NearOrbit),
            "oracle" => Ok(Self::Oracle),
            _ => Err(Error::Parse(format!("unknown boundary kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub triad: String,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// existing field for `decay`; `solve` output is used when absent
    pub input: Option<PathBuf>,
    pub grid_l: f64,
    pub grid_ntau: usize,
    pub grid_nt: usize,
    pub tol_residual: f64,
    pub max_iters: usize,
    pub method: Method,
    pub fd_step: f64,
    pub boundary: BoundaryKind,
    pub boundary_eps: f64,
    /// amplitude of the interior perturbation added to the initial guess
    pub perturb: f64,
    pub orbit_p: V4,
    /// period guess; defaults to the model's short orbit
    pub orbit_period: Option<f64>,
    pub nondegeneracy_threshold: f64,
    /// circle resolution of `A_z`; defaults to `grid.nt`
    pub spectrum_nt: Option<usize>,
    pub gamma: f64,
    pub charge_tol: f64,
    pub horizon: f64,
    pub axiom_samples: usize,
    pub axiom_step: f64,
    pub axiom_tol: f64,
    pub verify_resolutions: Vec<usize>,
    pub verify_eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            triad: "r3-standard".into(),
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            input: None,
            grid_l: 2.0,
            grid_ntau: 33,
            grid_nt: 32,
            tol_residual: 1e-10,
            max_iters: 50,
            method: Method::GaussNewton,
            fd_step: 1e-5,
            boundary: BoundaryKind::Trivial,
            boundary_eps: 0.05,
            perturb: 0.0,
            orbit_p: V4::new(1.0, 0.0, 0.0, 0.0),
            orbit_period: None,
            nondegeneracy_threshold: 1e-6,
            spectrum_nt: None,
            gamma: 0.4,
            charge_tol: 1e-6,
            horizon: 4.0,
            axiom_samples: 20,
            axiom_step: 1e-4,
            axiom_tol: 1e-6,
            verify_resolutions: vec![32, 64, 128],
            verify_eps: 0.1,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| num(key, x.trim())).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", ln + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "triad" => self.triad = v.to_string(),
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = Some(num(key, v)?),
            "input" => self.input = Some(PathBuf::from(v)),
            "grid.l" => self.grid_l = num(key, v)?,
            "grid.ntau" => self.grid_ntau = num(key, v)?,
            "grid.nt" => self.grid_nt = num(key, v)?,
            "solver.tol_residual" => self.tol_residual = num(key, v)?,
            "solver.max_iters" => self.max_iters = num(key, v)?,
            "solver.method" => self.method = v.parse().map_err(|e: Error| Error::Parse(e.to_string()))?,
            "solver.fd_step" => self.fd_step = num(key, v)?,
            "boundary.kind" => self.boundary = v.parse()?,
            "boundary.eps" => self.boundary_eps = num(key, v)?,
            "boundary.perturb" => self.perturb = num(key, v)?,
            "orbit.p" => {
                let p: Vec<f64> = list(key, v)?;
                if p.len() != 4 {
                    return Err(Error::Parse("`orbit.p` needs four components".into()));
                }
                self.orbit_p = V4::new(p[0], p[1], p[2], p[3]);
            }
            "orbit.period" => self.orbit_period = Some(num(key, v)?),
            "orbit.threshold" => self.nondegeneracy_threshold = num(key, v)?,
            "spectrum.nt" => self.spectrum_nt = Some(num(key, v)?),
            "analysis.gamma" => self.gamma = num(key, v)?,
            "analysis.charge_tol" => self.charge_tol = num(key, v)?,
            "analysis.horizon" => self.horizon = num(key, v)?,
            "axioms.samples" => self.axiom_samples = num(key, v)?,
            "axioms.step" => self.axiom_step = num(key, v)?,
            "axioms.tol" => self.axiom_tol = num(key, v)?,
            "verify.resolutions" => self.verify_resolutions = list(key, v)?,
            "verify.eps" => self.verify_eps = num(key, v)?,
            _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn triad(&self) -> Result<Triad> {
        Triad::from_id(&self.triad)
    }

    pub fn grid(&self) -> Result<CylinderGrid> {
        CylinderGrid::new(self.grid_l, self.grid_ntau, self.grid_nt)
    }

    /// Period guess: the configured value or `π a1` on ellipsoids.
    pub fn period_guess(&self, triad: &Triad) -> Option<f64> {
        self.orbit_period.or(match triad.model() {
            Model::Flat => None,
            Model::Ellipsoid { a1, .. } => Some(std::f64::consts::PI * a1),
        })
    }

    pub fn spectrum_nt(&self) -> usize {
        self.spectrum_nt.unwrap_or(self.grid_nt)
    }

    /// Checks that do not depend on which command runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        self.triad()?;
        self.grid()?;
        if !(self.tol_residual > 0.0) {
            return bad(format!(
                "solver.tol_residual must be positive (got {})",
                self.tol_residual
            ));
        }
        if !(self.fd_step > 0.0 && self.axiom_step > 0.0 && self.axiom_tol > 0.0) {
            return bad("difference steps must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return bad(format!("analysis.gamma must lie in (0, 1/2) (got {})", self.gamma));
        }
        if !(self.charge_tol > 0.0 && self.horizon > 0.0 && self.nondegeneracy_threshold > 0.0) {
            return bad("analysis tolerances and horizon must be positive".into());
        }
        if !self.boundary_eps.is_finite() || !self.perturb.is_finite() || self.boundary_eps < 0.0 {
            return bad("boundary.eps must be finite and nonnegative".into());
        }
        if self.threads == Some(0) || self.axiom_samples == 0 {
            return bad("threads and axioms.samples must be positive".into());
        }
        if let Some(p) = self.orbit_period {
            if !(p > 0.0) {
                return bad(format!("orbit.period must be positive (got {p})"));
            }
        }
        if self.spectrum_nt() < 4 {
            return bad("spectrum.nt must be at least 4".into());
        }
        if self.verify_resolutions.len() < 2 || self.verify_resolutions.iter().any(|&n| n < 8) {
            return bad("verify.resolutions needs at least two entries, each ≥ 8".into());
        }
        if !self.verify_resolutions.windows(2).all(|w| w[1] > w[0]) {
            return bad("verify.resolutions must increase".into());
        }
        if !(self.verify_eps > 0.0) {
            return bad("verify.eps must be positive".into());
        }
        Ok(())
    }

    /// `key = value` rendering that parses back to the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("triad", self.triad.clone());
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        if let Some(t) = self.threads {
            kv("threads", t.to_string());
        }
        if let Some(i) = &self.input {
            kv("input", i.display().to_string());
        }
        kv("grid.l", format!("{:?}", self.grid_l));
        kv("grid.ntau", self.grid_ntau.to_string());
        kv("grid.nt", self.grid_nt.to_string());
        kv("solver.tol_residual", format!("{:?}", self.tol_residual));
        kv("solver.max_iters", self.max_iters.to_string());
        kv(
            "solver.method",
            match self.method {
                Method::GaussNewton => "gauss-newton",
                Method::GradientDescent => "gradient-descent",
            }
            .into(),
        );
        kv("solver.fd_step", format!("{:?}", self.fd_step));
        kv(
            "boundary.kind",
            match self.boundary {
                BoundaryKind::Trivial => "trivial",
                BoundaryKind::NearOrbit => "near-orbit",
                BoundaryKind::Oracle => "oracle",
            }
            .into(),
        );
        kv("boundary.eps", format!("{:?}", self.boundary_eps));
        kv("boundary.perturb", format!("{:?}", self.perturb));
        let p = self.orbit_p;
        kv("orbit.p", format!("{:?},{:?},{:?},{:?}", p[0], p[1], p[2], p[3]));
        if let Some(t) = self.orbit_period {
            kv("orbit.period", format!("{t:?}"));
        }
        kv("orbit.threshold", format!("{:?}", self.nondegeneracy_threshold));
        if let Some(n) = self.spectrum_nt {
            kv("spectrum.nt", n.to_string());
        }
        kv("analysis.gamma", format!("{:?}", self.gamma));
        kv("analysis.charge_tol", format!("{:?}", self.charge_tol));
        kv("analysis.horizon", format!("{:?}", self.horizon));
        kv("axioms.samples", self.axiom_samples.to_string());
        kv("axioms.step", format!("{:?}", self.axiom_step));
        kv("axioms.tol", format!("{:?}", self.axiom_tol));
        let r: Vec<String> = self.verify_resolutions.iter().map(|n| n.to_string()).collect();
        kv("verify.resolutions", r.join(","));
        kv("verify.eps", format!("{:?}", self.verify_eps));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_dotted_keys_and_comments() {
        let c = RunConfig::parse(
            "# golden ellipsoid\ntriad = ellipsoid:a1=1,a2=1.618033988749895\n\
             grid.l = 12   # long cylinder\nsolver.method = gd\norbit.p = 1, 0, 0, 0\n\
             verify.resolutions = 16,32\n\n",
        )
        .unwrap();
        assert_eq!(c.grid_l, 12.0);
        assert_eq!(c.method, Method::GradientDescent);
        assert_eq!(c.verify_resolutions, vec![16, 32]);
        assert!((c.period_guess(&c.triad().unwrap()).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("grid.q = 1"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::parse("grid.nt 3"), Err(Error::Parse(_))));
        assert!(matches!(RunConfig::parse("grid.nt = x"), Err(Error::Parse(_))));
        assert!(matches!(
            RunConfig::parse("boundary.kind = wobble"),
            Err(Error::Parse(_))
        ));
        let c = RunConfig::parse("triad = bogus").unwrap();
        assert!(matches!(c.validate(), Err(Error::UnknownTriad(_))));
        for bad in [
            "analysis.gamma = 0.5",
            "grid.ntau = 3",
            "verify.resolutions = 64,32",
            "solver.tol_residual = 0",
        ] {
            assert!(RunConfig::parse(bad).unwrap().validate().is_err(), "{bad}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::parse("triad = ellipsoid-perturbed:seed=3\norbit.period = 3.2\nthreads = 2").unwrap();
        c.input = Some(PathBuf::from("a/b.txt"));
        c.tol_residual = 1.0 / 3.0 * 1e-9;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }
}
