//! Local bilinear forms and load of the SUPG-stabilized scheme.
//!
//! Every matrix `M` here is stored so that `M[i][j] = form(φ_j, φ_i)`: column = trial,
//! row = test, ready for `A u = F`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::basis::poly_dim;
use crate::element::LocalElement;
use crate::linalg::{DMat, LinalgError};
use crate::projectors::{ElementProjectors, ProjectorError};
use crate::real::{Point, Real};

pub type ScalarField<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(Point<T>) -> [T; 2] + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error(transparent)]
    Projector(#[from] ProjectorError),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("unknown {what} '{value}'")]
    UnknownName { what: &'static str, value: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvectionForm {
    Orig,
    Boun,
    OrigSkew,
    BounSkew,
}

impl ConvectionForm {
    pub const ALL: [ConvectionForm; 4] = [Self::Orig, Self::Boun, Self::OrigSkew, Self::BounSkew];

    pub fn is_skew(self) -> bool {
        matches!(self, Self::OrigSkew | Self::BounSkew)
    }

    pub fn uses_boundary_form(self) -> bool {
        matches!(self, Self::Boun | Self::BounSkew)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Orig => "orig",
            Self::Boun => "boun",
            Self::OrigSkew => "origSkew",
            Self::BounSkew => "bounSkew",
        }
    }
}

impl fmt::Display for ConvectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvectionForm {
    type Err = FormsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FormsError::UnknownName { what: "convection form", value: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum StabKind {
    #[default]
    DofiDofi,
    DRecipe,
}

impl StabKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::DofiDofi => "dofiDofi",
            Self::DRecipe => "dRecipe",
        }
    }
}

impl fmt::Display for StabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StabKind {
    type Err = FormsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dofiDofi" | "dofi-dofi" => Ok(Self::DofiDofi),
            "dRecipe" | "d-recipe" => Ok(Self::DRecipe),
            _ => Err(FormsError::UnknownName { what: "stabilization", value: s.to_string() }),
        }
    }
}

pub const DEFAULT_TAU_SAFETY: f64 = 0.5;

/// Coefficients, data and discretization switches of one problem.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    pub epsilon: T,
    pub beta: VectorField<T>,
    pub f: ScalarField<T>,
    pub dirichlet: ScalarField<T>,
    pub convection_form: ConvectionForm,
    pub supg_enabled: bool,
    pub stab_kind: StabKind,
    pub tau_safety: T,
}

impl<T: Real> ProblemSpec<T> {
    /// `bounSkew`, SUPG on, dofi-dofi, default τ safety.
    pub fn new(epsilon: T, beta: VectorField<T>, f: ScalarField<T>, dirichlet: ScalarField<T>) -> Self {
        Self {
            epsilon,
            beta,
            f,
            dirichlet,
            convection_form: ConvectionForm::BounSkew,
            supg_enabled: true,
            stab_kind: StabKind::DofiDofi,
            tau_safety: T::lit(DEFAULT_TAU_SAFETY),
        }
    }

    pub fn with_form(mut self, form: ConvectionForm) -> Self {
        self.convection_form = form;
        self
    }

    pub fn with_supg(mut self, on: bool) -> Self {
        self.supg_enabled = on;
        self
    }

    pub fn with_stab(mut self, kind: StabKind) -> Self {
        self.stab_kind = kind;
        self
    }

    pub fn with_tau_safety(mut self, s: T) -> Self {
        self.tau_safety = s;
        self
    }

    pub fn validate(&self) -> Result<(), FormsError> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(FormsError::InvalidSpec(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tau_safety > T::zero() && self.tau_safety <= T::one()) {
            return Err(FormsError::InvalidSpec(format!("tau safety must lie in (0, 1], got {}", self.tau_safety)));
        }
        Ok(())
    }
}

impl<T: fmt::Debug> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("epsilon", &self.epsilon)
            .field("convection_form", &self.convection_form)
            .field("supg_enabled", &self.supg_enabled)
            .field("stab_kind", &self.stab_kind)
            .field("tau_safety", &self.tau_safety)
            .finish_non_exhaustive()
    }
}

/// All local matrices of one cell.
#[derive(Clone, Debug)]
pub struct ElementForms<T> {
    /// Consistency part of `a_h`.
    pub ah_consistency: DMat<T>,
    pub stab: DMat<T>,
    /// `a_h = consistency + stabilization` (not multiplied by ε).
    pub ah: DMat<T>,
    /// Convection matrix of the chosen variant, skew-symmetrized if requested.
    pub bh: DMat<T>,
    pub bsupg: DMat<T>,
    pub lsupg: DMat<T>,
    pub asupg: DMat<T>,
    pub fsupg: Vec<T>,
    /// τ used in assembly (zero with SUPG off).
    pub tau: T,
    /// τ from the formula regardless of the SUPG switch.
    pub tau_nominal: T,
    pub beta_e: T,
    pub h_e: T,
    pub gamma_hat: T,
}

/// Values at one quadrature point of the projected images of all local shape functions.
struct PointImages<T> {
    /// `Π0_k φ_j`.
    p0: Vec<T>,
    /// `Π0_{k−1}∇φ_j`, components.
    gx: Vec<T>,
    gy: Vec<T>,
    /// `div Π0_{k−1}∇φ_j`.
    div: Vec<T>,
}

fn point_images<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>, p: Point<T>) -> PointImages<T> {
    let n = elem.n_dofs();
    let m = elem.basis.eval(p);
    let (dmx, dmy) = elem.basis.eval_grad(p);
    let nn = poly_dim(elem.k as isize - 1);
    let mut p0 = vec![T::zero(); n];
    let mut gx = vec![T::zero(); n];
    let mut gy = vec![T::zero(); n];
    let mut div = vec![T::zero(); n];
    for (a, &ma) in m.iter().enumerate() {
        for (o, &c) in p0.iter_mut().zip(proj.pi0_k.row(a)) {
            *o += ma * c;
        }
    }
    let g = &proj.pi0_grad_km1;
    for c in 0..nn {
        let (rx, ry) = (g.row(c), g.row(nn + c));
        for j in 0..n {
            gx[j] += m[c] * rx[j];
            gy[j] += m[c] * ry[j];
            div[j] += dmx[c] * rx[j] + dmy[c] * ry[j];
        }
    }
    PointImages { p0, gx, gy, div }
}

/// `Π0_k∇φ_j` at `p`.
fn grad_k_images<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>, p: Point<T>) -> (Vec<T>, Vec<T>) {
    let n = elem.n_dofs();
    let m = elem.basis.eval(p);
    let nk = m.len();
    let g = &proj.pi0_grad_k;
    let mut gx = vec![T::zero(); n];
    let mut gy = vec![T::zero(); n];
    for c in 0..nk {
        let (rx, ry) = (g.row(c), g.row(nk + c));
        for j in 0..n {
            gx[j] += m[c] * rx[j];
            gy[j] += m[c] * ry[j];
        }
    }
    (gx, gy)
}

/// `∇Π0_k φ_j` at `p`.
fn grad_of_pi0<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>, p: Point<T>) -> (Vec<T>, Vec<T>) {
    let n = elem.n_dofs();
    let (dx, dy) = elem.basis.eval_grad(p);
    let mut gx = vec![T::zero(); n];
    let mut gy = vec![T::zero(); n];
    for a in 0..dx.len() {
        for (j, &c) in proj.pi0_k.row(a).iter().enumerate() {
            gx[j] += dx[a] * c;
            gy[j] += dy[a] * c;
        }
    }
    (gx, gy)
}

fn add_outer<T: Real>(m: &mut DMat<T>, w: T, test: &[T], trial: &[T]) {
    for (i, &ti) in test.iter().enumerate() {
        let s = w * ti;
        if s == T::zero() {
            continue;
        }
        for (o, &tj) in m.row_mut(i).iter_mut().zip(trial) {
            *o += s * tj;
        }
    }
}

fn dot_beta<T: Real>(b: [T; 2], gx: &[T], gy: &[T]) -> Vec<T> {
    gx.iter().zip(gy).map(|(&x, &y)| b[0] * x + b[1] * y).collect()
}

/// Sampled `‖β‖_{L∞(E)}` over the volume and edge quadrature points.
pub fn compute_beta_e<T: Real>(elem: &LocalElement<T>, beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync)) -> T {
    let norm = |p: Point<T>| {
        let b = beta(p);
        (b[0] * b[0] + b[1] * b[1]).sqrt()
    };
    let mut m = T::zero();
    for &p in &elem.volume_rule.points {
        m = m.max(norm(p));
    }
    for e in &elem.edges {
        for &p in e.gauss.points.iter().chain(&e.lobatto_points) {
            m = m.max(norm(p));
        }
    }
    m
}

/// `γ̂ = h_E² λ_max` of `∫ div p div q` against the `L²` Gram on `[P_{k−1}]²`.
pub fn inverse_constant<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>) -> Result<T, FormsError> {
    let nn = poly_dim(elem.k as isize - 1);
    if nn <= 1 {
        return Ok(T::zero());
    }
    let mut kmat = DMat::zeros(2 * nn, 2 * nn);
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let (dx, dy) = elem.basis.eval_grad(p);
        let d: Vec<T> = dx[..nn].iter().chain(&dy[..nn]).copied().collect();
        add_outer(&mut kmat, w, &d, &d);
    }
    let mut mass = DMat::zeros(2 * nn, 2 * nn);
    for a in 0..nn {
        for b in 0..nn {
            mass[(a, b)] = proj.h[(a, b)];
            mass[(nn + a, nn + b)] = proj.h[(a, b)];
        }
    }
    let reduced = mass.cholesky()?.reduce(&kmat);
    let lmax = reduced.symmetric_eigen().values.last().copied().unwrap_or(T::zero());
    Ok(lmax.max(T::zero()) * elem.diameter * elem.diameter)
}

/// `τ_E = safety · min{h/β_E, h²/ε}`, clamped to `h²/(ε γ̂)` when `γ̂ > 0`.
pub fn compute_tau<T: Real>(h_e: T, epsilon: T, beta_e: T, tau_safety: T, gamma_hat: T) -> T {
    let h2 = h_e * h_e;
    let mut tau = h2 / epsilon;
    if beta_e > T::zero() {
        tau = tau.min(h_e / beta_e);
    }
    tau = tau * tau_safety;
    if gamma_hat > T::zero() {
        tau = tau.min(h2 / (epsilon * gamma_hat));
    }
    tau
}

/// `I − Π∇_dof`.
pub fn complement<T: Real>(proj: &ElementProjectors<T>) -> DMat<T> {
    let n = proj.pi_nabla_dof.nrows();
    DMat::identity(n).sub(&proj.pi_nabla_dof)
}

/// Dofi-dofi energy of the non-polynomial part, `(I − Π∇)ᵀ(I − Π∇)`.
pub fn dofi_energy<T: Real>(proj: &ElementProjectors<T>) -> DMat<T> {
    let q = complement(proj);
    q.tr_matmul(&q)
}

pub fn stab_matrix<T: Real>(proj: &ElementProjectors<T>, kind: StabKind, ah_consistency: &DMat<T>) -> DMat<T> {
    let q = complement(proj);
    match kind {
        StabKind::DofiDofi => q.tr_matmul(&q),
        StabKind::DRecipe => {
            let n = q.nrows();
            let trace = (0..n).fold(T::zero(), |s, i| s + ah_consistency[(i, i)]);
            let floor = T::lit(1e-12) * trace;
            let mut wq = q.clone();
            for i in 0..n {
                let w = ah_consistency[(i, i)].max(floor);
                for v in wq.row_mut(i) {
                    *v *= w;
                }
            }
            q.tr_matmul(&wq)
        }
    }
}

/// `∫ Π0_{k−1}∇φ_j · Π0_{k−1}∇φ_i` through the mass matrix.
pub fn diffusion_consistency<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>) -> DMat<T> {
    let nn = poly_dim(elem.k as isize - 1);
    let h = proj.h.leading_block(nn);
    let gx = proj.pi0_grad_km1.rows_range(0, nn);
    let gy = proj.pi0_grad_km1.rows_range(nn, 2 * nn);
    let mut a = gx.tr_matmul(&h.matmul(&gx));
    a.add_assign_scaled(&gy.tr_matmul(&h.matmul(&gy)), T::one());
    a
}

pub fn diffusion_matrix<T: Real>(elem: &LocalElement<T>, proj: &ElementProjectors<T>, kind: StabKind) -> DMat<T> {
    let c = diffusion_consistency(elem, proj);
    let s = stab_matrix(proj, kind, &c);
    c.add(&s)
}

/// `b_o(u, v) = ∫ β·Π0_k∇u Π0_k v`.
pub fn convection_orig<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
) -> DMat<T> {
    let n = elem.n_dofs();
    let mut m = DMat::zeros(n, n);
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let img = point_images(elem, proj, p);
        let (gx, gy) = grad_k_images(elem, proj, p);
        add_outer(&mut m, w, &img.p0, &dot_beta(beta(p), &gx, &gy));
    }
    m
}

/// `b_∂(u, v) = ∫ β·∇Π0_k u Π0_k v + ∫_∂E (β·n)(u − Π0_k u) Π0_k v`.
pub fn convection_boun<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
) -> DMat<T> {
    let n = elem.n_dofs();
    let mut m = DMat::zeros(n, n);
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let img = point_images(elem, proj, p);
        let (gx, gy) = grad_of_pi0(elem, proj, p);
        add_outer(&mut m, w, &img.p0, &dot_beta(beta(p), &gx, &gy));
    }
    for (ei, e) in elem.edges.iter().enumerate() {
        let trace = elem.trace_at_gauss(ei);
        for (g, (&p, &w)) in e.gauss.points.iter().zip(&e.gauss.weights).enumerate() {
            let b = beta(p);
            let bn = b[0] * e.normal[0] + b[1] * e.normal[1];
            let img = point_images(elem, proj, p);
            let jump: Vec<T> = trace.row(g).iter().zip(&img.p0).map(|(&t, &q)| t - q).collect();
            add_outer(&mut m, w * bn, &img.p0, &jump);
        }
    }
    m
}

pub fn skew_symmetrize<T: Real>(b: &DMat<T>) -> DMat<T> {
    let half = T::lit(0.5);
    DMat::from_fn(b.nrows(), b.ncols(), |i, j| half * (b[(i, j)] - b[(j, i)]))
}

/// `∫ (β·Π0_{k−1}∇φ_j)(β·Π0_{k−1}∇φ_i)`, the consistency part of `B^E` without τ.
pub fn streamline_matrix<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
) -> DMat<T> {
    let n = elem.n_dofs();
    let mut m = DMat::zeros(n, n);
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let img = point_images(elem, proj, p);
        let bg = dot_beta(beta(p), &img.gx, &img.gy);
        add_outer(&mut m, w, &bg, &bg);
    }
    m
}

/// `B^E = τ ∫ (β·Π0∇u)(β·Π0∇v) + τ β_E² S(u, v)`.
pub fn supg_convection<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
    tau: T,
    beta_e: T,
    stab: &DMat<T>,
) -> DMat<T> {
    let mut m = streamline_matrix(elem, proj, beta).scaled(tau);
    m.add_assign_scaled(stab, tau * beta_e * beta_e);
    m
}

/// `L^E = τ ∫ −ε div(Π0_{k−1}∇u) β·Π0_{k−1}∇v`.
pub fn supg_diffusion_coupling<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
    tau: T,
    epsilon: T,
) -> DMat<T> {
    let n = elem.n_dofs();
    let mut m = DMat::zeros(n, n);
    if elem.k == 1 || tau == T::zero() {
        return m;
    }
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let img = point_images(elem, proj, p);
        let bg = dot_beta(beta(p), &img.gx, &img.gy);
        add_outer(&mut m, -w * tau * epsilon, &bg, &img.div);
    }
    m
}

/// `F_i = ∫ f Π0_k φ_i + τ ∫ f β·Π0_{k−1}∇φ_i`.
pub fn element_load<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    f: &(dyn Fn(Point<T>) -> T + Sync),
    beta: &(dyn Fn(Point<T>) -> [T; 2] + Sync),
    tau: T,
) -> Vec<T> {
    let n = elem.n_dofs();
    let mut out = vec![T::zero(); n];
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let fw = f(p) * w;
        if fw == T::zero() {
            continue;
        }
        let img = point_images(elem, proj, p);
        let b = beta(p);
        for j in 0..n {
            let mut v = img.p0[j];
            if tau != T::zero() {
                v += tau * (b[0] * img.gx[j] + b[1] * img.gy[j]);
            }
            out[j] += fw * v;
        }
    }
    out
}

/// Smallest ratio `S(v, v) / R(v, v)` over `v ∈ range(I − Π∇)`, with `R` the dofi-dofi energy.
pub fn stability_constant<T: Real>(proj: &ElementProjectors<T>, stab: &DMat<T>) -> Result<T, FormsError> {
    let r = dofi_energy(proj);
    let eig = r.symmetric_eigen();
    let n = r.nrows();
    let vmax = eig.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > T::lit(1e-10) * vmax).collect();
    if keep.is_empty() {
        return Ok(T::one());
    }
    let v = DMat::from_fn(n, keep.len(), |i, c| eig.vectors[(i, keep[c])]);
    let rr = v.tr_matmul(&r.matmul(&v));
    let sr = v.tr_matmul(&stab.matmul(&v));
    let reduced = rr.cholesky()?.reduce(&sr);
    Ok(reduced.symmetric_eigen().values[0])
}

/// Everything a cell contributes to the global system.
pub fn element_supg<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    spec: &ProblemSpec<T>,
) -> Result<ElementForms<T>, FormsError> {
    let beta = &*spec.beta;
    let h_e = elem.diameter;
    let beta_e = compute_beta_e(elem, beta);
    let gamma_hat = inverse_constant(elem, proj)?;
    let tau_nominal = compute_tau(h_e, spec.epsilon, beta_e, spec.tau_safety, gamma_hat);
    let tau = if spec.supg_enabled { tau_nominal } else { T::zero() };

    let ah_consistency = diffusion_consistency(elem, proj);
    let stab = stab_matrix(proj, spec.stab_kind, &ah_consistency);
    let ah = ah_consistency.add(&stab);

    let raw = if beta_e == T::zero() {
        DMat::zeros(elem.n_dofs(), elem.n_dofs())
    } else if spec.convection_form.uses_boundary_form() {
        convection_boun(elem, proj, beta)
    } else {
        convection_orig(elem, proj, beta)
    };
    let bh = if spec.convection_form.is_skew() { skew_symmetrize(&raw) } else { raw };

    let n = elem.n_dofs();
    let (bsupg, lsupg) = if tau == T::zero() {
        (DMat::zeros(n, n), DMat::zeros(n, n))
    } else {
        (
            supg_convection(elem, proj, beta, tau, beta_e, &stab),
            supg_diffusion_coupling(elem, proj, beta, tau, spec.epsilon),
        )
    };
    let mut asupg = ah.scaled(spec.epsilon);
    asupg.add_assign_scaled(&bh, T::one());
    asupg.add_assign_scaled(&bsupg, T::one());
    asupg.add_assign_scaled(&lsupg, T::one());
    let fsupg = element_load(elem, proj, &*spec.f, beta, tau);
    Ok(ElementForms {
        ah_consistency,
        stab,
        ah,
        bh,
        bsupg,
        lsupg,
        asupg,
        fsupg,
        tau,
        tau_nominal,
        beta_e,
        h_e,
        gamma_hat,
    })
}
