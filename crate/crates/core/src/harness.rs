//! Manufactured solutions, convergence studies and their CSV/SVG output.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::dofs::interpolate_dofs;
use crate::forms::{ConvectionForm, ProblemSpec, ScalarField, StabKind, VectorField, DEFAULT_TAU_SAFETY};
use crate::mesh::{gen_quad, gen_tria, gen_voronoi, MeshError, PolyMesh};
use crate::norms::{cell_error_contributions, combine_convective, supg_norm};
use crate::real::{Point, Real};
use crate::system::{apply_dirichlet, assemble, solve, Discretization, SystemError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("interpolation failed: {0}")]
    Interpolation(String),
}

/// An exact solution with its data: `f = −εΔu + β·∇u`, `g = u` on `∂Ω`.
#[derive(Clone)]
pub struct ManufacturedCase<T> {
    pub name: String,
    pub u: ScalarField<T>,
    pub grad_u: VectorField<T>,
    pub lap_u: ScalarField<T>,
    pub beta: VectorField<T>,
    pub epsilon: T,
}

impl<T: Real> ManufacturedCase<T> {
    /// `u = sin(πx) sin(πy)`, `β = π sin(π(x + 2y)) (−2, 1)`.
    pub fn paper(epsilon: T) -> Self {
        let pi = T::pi();
        let two = T::lit(2.0);
        Self {
            name: "paper".into(),
            u: Arc::new(move |p: Point<T>| (pi * p[0]).sin() * (pi * p[1]).sin()),
            grad_u: Arc::new(move |p: Point<T>| {
                [pi * (pi * p[0]).cos() * (pi * p[1]).sin(), pi * (pi * p[0]).sin() * (pi * p[1]).cos()]
            }),
            lap_u: Arc::new(move |p: Point<T>| -two * pi * pi * (pi * p[0]).sin() * (pi * p[1]).sin()),
            beta: Arc::new(move |p: Point<T>| {
                let s = (pi * (p[0] + two * p[1])).sin();
                [-two * pi * s, pi * s]
            }),
            epsilon,
        }
    }

    /// Weighted sum of monomials `Σ c x^a y^b` with a constant `β`.
    pub fn polynomial(terms: Vec<(usize, usize, T)>, epsilon: T, beta: [T; 2]) -> Self {
        let terms = Arc::new(terms);
        let pw = |x: T, n: usize| if n == 0 { T::one() } else { x.powi(n as i32) };
        let (t1, t2, t3) = (terms.clone(), terms.clone(), terms.clone());
        Self {
            name: "patch".into(),
            u: Arc::new(move |p: Point<T>| t1.iter().fold(T::zero(), |s, &(a, b, c)| s + c * pw(p[0], a) * pw(p[1], b))),
            grad_u: Arc::new(move |p: Point<T>| {
                let mut g = [T::zero(), T::zero()];
                for &(a, b, c) in t2.iter() {
                    if a > 0 {
                        g[0] += c * T::from_usize_lossy(a) * pw(p[0], a - 1) * pw(p[1], b);
                    }
                    if b > 0 {
                        g[1] += c * T::from_usize_lossy(b) * pw(p[0], a) * pw(p[1], b - 1);
                    }
                }
                g
            }),
            lap_u: Arc::new(move |p: Point<T>| {
                let mut l = T::zero();
                for &(a, b, c) in t3.iter() {
                    if a > 1 {
                        l += c * T::from_usize_lossy(a * (a - 1)) * pw(p[0], a - 2) * pw(p[1], b);
                    }
                    if b > 1 {
                        l += c * T::from_usize_lossy(b * (b - 1)) * pw(p[0], a) * pw(p[1], b - 2);
                    }
                }
                l
            }),
            beta: Arc::new(move |_| beta),
            epsilon,
        }
    }

    /// `x^a y^b`.
    pub fn monomial(a: usize, b: usize, epsilon: T, beta: [T; 2]) -> Self {
        Self::polynomial(vec![(a, b, T::one())], epsilon, beta)
    }

    /// All monomials of degree `≤ k` with unit coefficients, `β = (1, 2)`.
    pub fn patch(k: usize, epsilon: T) -> Self {
        let terms = crate::basis::multi_indices(k).into_iter().map(|(a, b)| (a, b, T::one())).collect();
        Self::polynomial(terms, epsilon, [T::one(), T::lit(2.0)])
    }

    pub fn source(&self) -> ScalarField<T> {
        let (eps, g, l, b) = (self.epsilon, self.grad_u.clone(), self.lap_u.clone(), self.beta.clone());
        Arc::new(move |p| {
            let gr = g(p);
            let be = b(p);
            -eps * l(p) + be[0] * gr[0] + be[1] * gr[1]
        })
    }

    pub fn spec(&self) -> ProblemSpec<T> {
        ProblemSpec::new(self.epsilon, self.beta.clone(), self.source(), self.u.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeshFamily {
    Quad,
    Tria,
    Voro,
    Rand,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 4] = [Self::Quad, Self::Tria, Self::Voro, Self::Rand];

    pub fn name(self) -> &'static str {
        match self {
            Self::Quad => "quad",
            Self::Tria => "tria",
            Self::Voro => "voro",
            Self::Rand => "rand",
        }
    }

    /// `n` per side for structured families, number of seeds otherwise.
    pub fn default_levels(self) -> Vec<usize> {
        match self {
            Self::Quad | Self::Tria => vec![8, 16, 32, 64],
            Self::Voro | Self::Rand => vec![64, 256, 1024, 4096],
        }
    }

    pub fn generate<T: Real>(self, level: usize, rng_seed: u64, lloyd_iters: usize) -> Result<PolyMesh<T>, MeshError> {
        match self {
            Self::Quad => gen_quad(level),
            Self::Tria => gen_tria(level, T::zero(), rng_seed),
            Self::Voro => gen_voronoi(level, lloyd_iters, rng_seed),
            Self::Rand => gen_voronoi(level, 0, rng_seed),
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ConfigError::BadValue { key: "family".into(), value: s.into() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseKind {
    Paper,
    Patch,
}

impl FromStr for CaseKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "patch" => Ok(Self::Patch),
            _ => Err(ConfigError::BadValue { key: "case".into(), value: s.into() }),
        }
    }
}

impl CaseKind {
    pub fn build<T: Real>(self, k: usize, epsilon: T) -> ManufacturedCase<T> {
        match self {
            Self::Paper => ManufacturedCase::paper(epsilon),
            Self::Patch => ManufacturedCase::patch(k, epsilon),
        }
    }
}

pub const DEFAULT_LLOYD_ITERS: usize = 100;
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// One convergence study: a mesh ladder with fixed discretization and data.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub family: MeshFamily,
    pub levels: Vec<usize>,
    pub k: usize,
    pub epsilon: f64,
    pub form: ConvectionForm,
    pub supg: bool,
    pub stab: StabKind,
    pub tau_safety: f64,
    pub tol: f64,
    pub rng_seed: u64,
    pub lloyd_iters: usize,
    pub case: CaseKind,
}

impl StudyConfig {
    pub fn new(family: MeshFamily, k: usize, epsilon: f64, form: ConvectionForm) -> Self {
        Self {
            family,
            levels: family.default_levels(),
            k,
            epsilon,
            form,
            supg: true,
            stab: StabKind::DofiDofi,
            tau_safety: DEFAULT_TAU_SAFETY,
            tol: DEFAULT_SOLVER_TOL,
            rng_seed: 1,
            lloyd_iters: DEFAULT_LLOYD_ITERS,
            case: CaseKind::Paper,
        }
    }

    /// File stem such as `quad_k2_eps1e-6_bounSkew_supg`.
    pub fn name(&self) -> String {
        format!(
            "{}_k{}_eps{:e}_{}_{}",
            self.family,
            self.k,
            self.epsilon,
            self.form,
            if self.supg { "supg" } else { "none" }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub ndofs: usize,
    pub e_h1: f64,
    pub e_c: f64,
    /// supg norm of `u_I − u_h` with `u_I` the interpolant.
    pub e_supg: f64,
    /// `e_H1` of the interpolant itself.
    pub e_h1_interp: f64,
    pub residual: f64,
    pub assemble_ms: f64,
    pub solve_ms: f64,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn csv_header() -> &'static str {
        "level,h,ndofs,eH1,eC,assemble_ms,solve_ms"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{},{:.16e},{:.16e},{:.3},{:.3}",
            self.level, self.h, self.ndofs, self.e_h1, self.e_c, self.assemble_ms, self.solve_ms
        )
    }
}

/// Solution of one discrete problem with the quantities a study reports.
#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub solution: Vec<T>,
    pub residual: f64,
    pub e_h1: T,
    pub e_c: T,
    pub e_supg: T,
    pub e_h1_interp: T,
    pub tau: Vec<T>,
    pub tau_nominal: Vec<T>,
    pub assemble_ms: f64,
    pub solve_ms: f64,
}

/// Assembles, applies `g = u` on `∂Ω`, solves and measures errors. `e_C` always uses the
/// nominal τ_E, so that SUPG-off runs are measured in the same norm.
pub fn solve_case<T: Real>(
    disc: &Discretization<'_, T>,
    case: &ManufacturedCase<T>,
    spec: &ProblemSpec<T>,
    tol: f64,
) -> Result<SolveOutcome<T>, HarnessError> {
    let t0 = Instant::now();
    let (system, infos) = assemble(disc, spec)?;
    let (mask, values) = disc.boundary_values(&*case.u);
    let system = apply_dirichlet(&system, &mask, &values);
    let assemble_ms = t0.elapsed().as_secs_f64() * 1e3;
    let t1 = Instant::now();
    let (solution, stats) = solve(&system, tol)?;
    let solve_ms = t1.elapsed().as_secs_f64() * 1e3;

    let tau: Vec<T> = infos.iter().map(|i| i.tau).collect();
    let tau_nominal: Vec<T> = infos.iter().map(|i| i.tau_nominal).collect();
    let beta_e: Vec<T> = infos.iter().map(|i| i.beta_e).collect();
    let cells = cell_error_contributions(disc, &solution, &*case.grad_u, &*case.beta);
    let e_h1 = cells.iter().fold(T::zero(), |s, c| s + c.grad_sq).sqrt();
    let e_c = combine_convective(&cells, case.epsilon, &tau_nominal);

    let interp = interpolate_dofs(disc.mesh, &disc.dofs, &*case.u, 2 * disc.k + 2)
        .map_err(|e| HarnessError::Interpolation(e.to_string()))?;
    let diff: Vec<T> = interp.iter().zip(&solution).map(|(&a, &b)| a - b).collect();
    let e_supg = supg_norm(disc, &diff, &*case.beta, case.epsilon, &tau_nominal, &beta_e);
    let zero = |_: Point<T>| [T::zero(), T::zero()];
    let e_h1_interp = cell_error_contributions(disc, &interp, &*case.grad_u, &zero)
        .iter()
        .fold(T::zero(), |s, c| s + c.grad_sq)
        .sqrt();
    Ok(SolveOutcome {
        solution,
        residual: stats.relative_residual,
        e_h1,
        e_c,
        e_supg,
        e_h1_interp,
        tau,
        tau_nominal,
        assemble_ms,
        solve_ms,
    })
}

fn study_spec<T: Real>(cfg: &StudyConfig, case: &ManufacturedCase<T>) -> ProblemSpec<T> {
    case.spec()
        .with_form(cfg.form)
        .with_supg(cfg.supg)
        .with_stab(cfg.stab)
        .with_tau_safety(T::lit(cfg.tau_safety))
}

/// One level of a study; failures are recorded in the row rather than returned.
pub fn run_level<T: Real>(cfg: &StudyConfig, level_index: usize) -> ConvergenceRow {
    let level = cfg.levels[level_index];
    let failed = |h: f64, ndofs: usize, msg: String| ConvergenceRow {
        level: level_index,
        h,
        ndofs,
        e_h1: f64::NAN,
        e_c: f64::NAN,
        e_supg: f64::NAN,
        e_h1_interp: f64::NAN,
        residual: f64::NAN,
        assemble_ms: 0.0,
        solve_ms: 0.0,
        failure: Some(msg),
    };
    let mesh = match cfg.family.generate::<T>(level, cfg.rng_seed, cfg.lloyd_iters) {
        Ok(m) => m,
        Err(e) => return failed(f64::NAN, 0, e.to_string()),
    };
    let h = mesh.h().as_f64();
    let disc = match Discretization::new(&mesh, cfg.k) {
        Ok(d) => d,
        Err(e) => return failed(h, 0, e.to_string()),
    };
    let case = cfg.case.build::<T>(cfg.k, T::lit(cfg.epsilon));
    let spec = study_spec(cfg, &case);
    match solve_case(&disc, &case, &spec, cfg.tol) {
        Ok(o) => ConvergenceRow {
            level: level_index,
            h,
            ndofs: disc.n_dofs(),
            e_h1: o.e_h1.as_f64(),
            e_c: o.e_c.as_f64(),
            e_supg: o.e_supg.as_f64(),
            e_h1_interp: o.e_h1_interp.as_f64(),
            residual: o.residual,
            assemble_ms: o.assemble_ms,
            solve_ms: o.solve_ms,
            failure: None,
        },
        Err(e) => failed(h, disc.n_dofs(), e.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<ConvergenceRow>,
    pub rate_h1: Option<f64>,
    pub rate_c: Option<f64>,
}

impl StudyResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(ConvergenceRow::csv_header());
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> String {
        let fmt = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        format!("{}: rate eH1 {} eC {}", self.config.name(), fmt(self.rate_h1), fmt(self.rate_c))
    }

    pub fn to_svg(&self) -> String {
        let series: Vec<(&str, &str, Vec<(f64, f64)>)> = vec![
            ("eH1", "#1f77b4", self.rows.iter().map(|r| (r.h, r.e_h1)).collect()),
            ("eC", "#d62728", self.rows.iter().map(|r| (r.h, r.e_c)).collect()),
        ];
        loglog_svg(&self.config.name(), &series)
    }
}

/// Runs every level; `on_row` sees each row as soon as it is computed.
pub fn run_convergence_with<T: Real>(cfg: &StudyConfig, mut on_row: impl FnMut(&ConvergenceRow)) -> StudyResult {
    let mut rows = Vec::with_capacity(cfg.levels.len());
    for i in 0..cfg.levels.len() {
        let row = run_level::<T>(cfg, i);
        on_row(&row);
        rows.push(row);
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let rate_h1 = fitted_rate(&hs, &rows.iter().map(|r| r.e_h1).collect::<Vec<_>>());
    let rate_c = fitted_rate(&hs, &rows.iter().map(|r| r.e_c).collect::<Vec<_>>());
    StudyResult { config: cfg.clone(), rows, rate_h1, rate_c }
}

pub fn run_convergence<T: Real>(cfg: &StudyConfig) -> StudyResult {
    run_convergence_with::<T>(cfg, |_| {})
}

/// Least-squares slope of `log e` against `log h` over the finest three levels.
/// `None` when fewer than two usable points remain or errors are at round-off.
pub fn fitted_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| h.is_finite() && e.is_finite() && **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let pts = &pts[pts.len().saturating_sub(3)..];
    if pts.len() < 2 || pts.iter().all(|p| p.1 < (1e-13f64).ln()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Minimal log-log line plot.
pub fn loglog_svg(title: &str, series: &[(&str, &str, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())
        .map(|p| (p.0.log10(), p.1.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (dx, dy) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
    let sx = |x: f64| m + (x.log10() - x0) / dx * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y.log10() - y0) / dy * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{m}\" y=\"20\" font-size=\"13\">{title}</text>\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * m,
        h - 2.0 * m
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">log10 h: [{x0:.2}, {x1:.2}]  log10 e: [{y0:.2}, {y1:.2}]</text>\n",
        m,
        h - 15.0
    ));
    for (i, (label, colour, data)) in series.iter().enumerate() {
        let coords: Vec<String> = data
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{colour}\">{label}</text>\n",
            w - m + 5.0,
            m + 15.0 * (i as f64 + 1.0)
        ));
    }
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("configuration is empty")]
    Empty,
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}'")]
    BadValue { key: String, value: String },
}

const KEYS: [&str; 15] = [
    "preset", "family", "levels", "k", "eps", "form", "supg", "stab", "tau_safety", "tol", "rng", "lloyd", "case",
    "out_dir", "svg",
];

/// Flat `key = value` configuration; list values are comma separated and studies are the
/// product of all lists.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvConfig {
    entries: BTreeMap<String, String>,
}

impl ConvConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey(k.to_string()));
            }
            entries.insert(k.to_string(), v.to_string());
        }
        if entries.is_empty() {
            return Err(ConfigError::Empty);
        }
        Ok(Self { entries })
    }

    /// Overrides (or adds) one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn list<V: FromStr>(&self, key: &str, default: &str) -> Result<Vec<V>, ConfigError> {
        let raw = self.get(key).unwrap_or(default);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<V>().map_err(|_| ConfigError::BadValue { key: key.into(), value: s.into() }))
            .collect::<Result<Vec<V>, _>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err(ConfigError::BadValue { key: key.into(), value: raw.into() })
                } else {
                    Ok(v)
                }
            })
    }

    fn one<V: FromStr>(&self, key: &str, default: &str) -> Result<V, ConfigError> {
        let raw = self.get(key).unwrap_or(default);
        raw.trim().parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: raw.into() })
    }

    pub fn out_dir(&self) -> &str {
        self.get("out_dir").unwrap_or(".")
    }

    pub fn svg(&self) -> Result<bool, ConfigError> {
        parse_switch("svg", self.get("svg").unwrap_or("off"))
    }

    /// All studies, in family-major order.
    pub fn studies(&self) -> Result<Vec<StudyConfig>, ConfigError> {
        let paper = match self.get("preset") {
            None => false,
            Some("paper") => true,
            Some(v) => return Err(ConfigError::BadValue { key: "preset".into(), value: v.into() }),
        };
        let (fam_d, k_d, eps_d, form_d) = if paper {
            ("quad,tria,voro,rand", "1,2,3", "1e-3,1e-6", "orig,boun,origSkew,bounSkew")
        } else {
            ("quad", "1", "1e-3", "bounSkew")
        };
        let families: Vec<MeshFamily> = self.list("family", fam_d)?;
        let ks: Vec<usize> = self.list("k", k_d)?;
        if ks.contains(&0) {
            return Err(ConfigError::BadValue { key: "k".into(), value: "0".into() });
        }
        let eps: Vec<f64> = self.list("eps", eps_d)?;
        if eps.iter().any(|&e| !(e > 0.0)) {
            return Err(ConfigError::BadValue { key: "eps".into(), value: self.get("eps").unwrap_or("").into() });
        }
        let forms: Vec<ConvectionForm> = self.list("form", form_d)?;
        let supgs: Vec<bool> = self
            .get("supg")
            .unwrap_or("on")
            .split(',')
            .map(|s| parse_switch("supg", s.trim()))
            .collect::<Result<_, _>>()?;
        let stab: StabKind = self.one("stab", "dofiDofi")?;
        let tau_safety: f64 = self.one("tau_safety", "0.5")?;
        if !(tau_safety > 0.0 && tau_safety <= 1.0) {
            return Err(ConfigError::BadValue { key: "tau_safety".into(), value: tau_safety.to_string() });
        }
        let tol: f64 = self.one("tol", "1e-12")?;
        let rng_seed: u64 = self.one("rng", "1")?;
        let lloyd_iters: usize = self.one("lloyd", "100")?;
        let case: CaseKind = self.one("case", "paper")?;
        let levels: Option<Vec<usize>> = match self.get("levels") {
            Some(_) => Some(self.list("levels", "")?),
            None => None,
        };
        let mut out = Vec::new();
        for &family in &families {
            for &k in &ks {
                for &e in &eps {
                    for &form in &forms {
                        for &supg in &supgs {
                            out.push(StudyConfig {
                                family,
                                levels: levels.clone().unwrap_or_else(|| family.default_levels()),
                                k,
                                epsilon: e,
                                form,
                                supg,
                                stab,
                                tau_safety,
                                tol,
                                rng_seed,
                                lloyd_iters,
                                case,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn parse_switch(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), value: s.into() }),
    }
}
