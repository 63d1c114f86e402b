//! Finite-difference integration of the coupled revealed/latent system
//!
//! ```text
//!   dt rho_r = D_r(t) dxx rho_r + s(x,t) rho_l - c(x,t) rho_r
//!   dt rho_l = D_l    dxx rho_l - s(x,t) rho_l + c(x,t) rho_r
//! ```
//!
//! on a bounded log-price grid. Strang splitting: half-step reaction,
//! full-step diffusion, half-step reaction. The linear reaction pair is
//! updated exactly per node with rates frozen at the sub-step midpoint,
//! which conserves `rho_r + rho_l` to round-off and is unconditionally
//! stable; diffusion uses Crank-Nicolson by default (an explicit Euler
//! sub-step is available and then subject to `D dt/dx^2 <= 1/2`).
//!
//! Boundary conditions: revealed edges are zero-flux Neumann (the revealed
//! book must not diverge and pure diffusion conserves its mass), the latent
//! left edge is held at a fixed value (the baseline `b` in standard runs)
//! and the latent right edge has a fixed slope `a`.
//!
//! One integration is single-threaded and deterministic; independent
//! integrations may run concurrently.

use crate::error::{Error, Result};
use crate::model::{DiffusionSchedule, RateModel};

/// Uniform log-price grid spanning the indicative price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl PriceGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min < 0.0 && 0.0 < x_max) {
            return Err(Error::Config(format!(
                "grid must straddle the indicative price: [{x_min}, {x_max}]"
            )));
        }
        if n < 3 {
            return Err(Error::Config(format!("grid needs at least 3 points, got {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Default grid: 1 bp spacing over +/- 5%.
    pub fn default_grid() -> Self {
        Self { x_min: -0.05, x_max: 0.05, n: 1001 }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round();
        (i.max(0.0) as usize).min(self.n - 1)
    }
}

/// Revealed and latent densities on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: PriceGrid,
    pub rho_r: Vec<f64>,
    pub rho_l: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    /// Null revealed book over the latent profile `max(a x + b, b)`.
    pub fn from_latent(grid: PriceGrid, latent: &crate::model::LatentBookParams, t: f64) -> Self {
        let rho_l = (0..grid.n).map(|i| latent.eval(grid.x(i))).collect();
        Self { grid, rho_r: vec![0.0; grid.n], rho_l, t }
    }

    pub fn new(grid: PriceGrid, rho_r: Vec<f64>, rho_l: Vec<f64>, t: f64) -> Result<Self> {
        if rho_r.len() != grid.n || rho_l.len() != grid.n {
            return Err(Error::Config(format!(
                "field length {}/{} does not match grid n = {}",
                rho_r.len(),
                rho_l.len(),
                grid.n
            )));
        }
        Ok(Self { grid, rho_r, rho_l, t })
    }

    /// One-sided slope of the latent book at the right edge.
    pub fn latent_right_slope(&self) -> f64 {
        let n = self.grid.n;
        (self.rho_l[n - 1] - self.rho_l[n - 2]) / self.grid.dx()
    }
}

/// Diffusion sub-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionStep {
    #[default]
    CrankNicolson,
    /// Forward Euler; requires `max(D) dt / dx^2 <= 1/2`.
    ExplicitEuler,
}

/// Boundary data for the latent field. The revealed field is always
/// zero-flux at both edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    /// Dirichlet value at `x_min` (the latent baseline in standard runs).
    pub latent_left_value: f64,
    /// Neumann slope at `x_max` (the latent slope `a`).
    pub latent_right_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: DiffusionStep,
    /// Defaults to the initial field's left latent value and right slope.
    pub boundary: Option<BoundarySpec>,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        Self { dt, scheme: DiffusionStep::CrankNicolson, boundary: None }
    }
}

/// Density below which a step is declared a numerical failure.
const NEGATIVE_FAILURE: f64 = -1e-9;
/// Round-off negatives above this are clipped to zero after each step.
const NEGATIVE_CLIP: f64 = -1e-12;

/// Integrate from `initial` to `t_end` and return the field at each of
/// `snapshot_times` (which must be non-decreasing and lie within
/// `[initial.t, t_end]`).
pub fn integrate(
    initial: &DensityField,
    rates: &RateModel,
    diffusion: &DiffusionSchedule,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<DensityField>> {
    integrate_with(initial, rates, diffusion, t_end, &SolverConfig::new(dt), snapshot_times)
}

pub fn integrate_with(
    initial: &DensityField,
    rates: &RateModel,
    diffusion: &DiffusionSchedule,
    t_end: f64,
    config: &SolverConfig,
    snapshot_times: &[f64],
) -> Result<Vec<DensityField>> {
    let dt = config.dt;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt = {dt}, need dt > 0")));
    }
    if t_end < initial.t {
        return Err(Error::Config(format!("t_end = {t_end} < initial t = {}", initial.t)));
    }
    rates.validate()?;
    diffusion.validate()?;
    let grid = initial.grid;
    let dx = grid.dx();
    let eps = 1e-9 * dt.max(1.0);
    for w in snapshot_times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Config("snapshot times must be non-decreasing".into()));
        }
    }
    if let (Some(&first), Some(&last)) = (snapshot_times.first(), snapshot_times.last()) {
        if first < initial.t - eps || last > t_end + eps {
            return Err(Error::Config(format!(
                "snapshot times [{first}, {last}] outside [{}, {t_end}]",
                initial.t
            )));
        }
    }
    if config.scheme == DiffusionStep::ExplicitEuler {
        let cfl = diffusion.max_coefficient() * dt / (dx * dx);
        if cfl > 0.5 {
            return Err(Error::Config(format!(
                "explicit diffusion unstable: max(D) dt/dx^2 = {cfl:.3} > 0.5"
            )));
        }
    }

    let boundary = config.boundary.unwrap_or(BoundarySpec {
        latent_left_value: initial.rho_l[0],
        latent_right_slope: initial.latent_right_slope(),
    });

    let mut field = initial.clone();
    let mut out = Vec::with_capacity(snapshot_times.len());
    let mut pending = snapshot_times.iter().copied().peekable();
    let mut scratch = Workspace::new(grid.n);

    // Emit any snapshots at or before the initial time.
    while let Some(&ts) = pending.peek() {
        if ts <= field.t + eps {
            let mut snap = field.clone();
            snap.t = ts;
            out.push(snap);
            pending.next();
        } else {
            break;
        }
    }

    while field.t < t_end - eps {
        let target = pending.peek().copied().unwrap_or(t_end).min(t_end);
        let h = dt.min(target - field.t);
        if h <= eps {
            // Already at the target up to round-off.
            field.t = target;
        } else {
            step(&mut field, rates, diffusion, h, &boundary, config.scheme, &mut scratch)?;
        }
        while let Some(&ts) = pending.peek() {
            if ts <= field.t + eps {
                let mut snap = field.clone();
                snap.t = ts;
                out.push(snap);
                pending.next();
            } else {
                break;
            }
        }
    }
    // Snapshots exactly at t_end.
    for ts in pending {
        let mut snap = field.clone();
        snap.t = ts;
        out.push(snap);
    }
    Ok(out)
}

struct Workspace {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// One Strang step of size `h` starting at `field.t`.
fn step(
    field: &mut DensityField,
    rates: &RateModel,
    diffusion: &DiffusionSchedule,
    h: f64,
    boundary: &BoundarySpec,
    scheme: DiffusionStep,
    ws: &mut Workspace,
) -> Result<()> {
    let t = field.t;
    let half = 0.5 * h;
    reaction_substep(field, rates, t + 0.25 * h, half);

    let d_r = diffusion.revealed(t + half);
    let d_l = diffusion.latent();
    if d_r > 0.0 {
        diffuse(
            &mut field.rho_r,
            field.grid.dx(),
            d_r * h,
            FieldBoundary::ZeroFlux,
            scheme,
            ws,
        );
    }
    if d_l > 0.0 {
        diffuse(
            &mut field.rho_l,
            field.grid.dx(),
            d_l * h,
            FieldBoundary::DirichletNeumann {
                left_value: boundary.latent_left_value,
                right_slope: boundary.latent_right_slope,
            },
            scheme,
            ws,
        );
    }

    reaction_substep(field, rates, t + 0.75 * h, half);
    field.t = t + h;

    let mut min = 0.0f64;
    for v in field.rho_r.iter_mut().chain(field.rho_l.iter_mut()) {
        if *v < 0.0 {
            min = min.min(*v);
            if *v >= NEGATIVE_CLIP {
                *v = 0.0;
            }
        }
    }
    if min < NEGATIVE_FAILURE {
        return Err(Error::Numerical(format!(
            "negative density {min:.3e} at t = {:.3}",
            field.t
        )));
    }
    Ok(())
}

/// Exact update of the linear reaction pair with rates frozen at `t_mid`.
fn reaction_substep(field: &mut DensityField, rates: &RateModel, t_mid: f64, h: f64) {
    let grid = field.grid;
    for i in 0..grid.n {
        let x = grid.x(i);
        let s = rates.submission_at(x, t_mid);
        let c = rates.cancellation_at(x, t_mid);
        let total = s + c;
        if total <= 0.0 {
            continue;
        }
        let r = field.rho_r[i];
        let l = field.rho_l[i];
        let sigma = r + l;
        let r_eq = s * sigma / total;
        let r_new = r_eq + (r - r_eq) * (-total * h).exp();
        field.rho_r[i] = r_new;
        field.rho_l[i] = sigma - r_new;
    }
}

enum FieldBoundary {
    /// Zero-flux Neumann at both edges.
    ZeroFlux,
    /// Fixed value on the left, fixed slope on the right.
    DirichletNeumann { left_value: f64, right_slope: f64 },
}

/// Advance `u` by one diffusion step with `integral = D * h`.
fn diffuse(
    u: &mut [f64],
    dx: f64,
    integral: f64,
    boundary: FieldBoundary,
    scheme: DiffusionStep,
    ws: &mut Workspace,
) {
    let n = u.len();
    let lam = integral / (dx * dx);
    match scheme {
        DiffusionStep::ExplicitEuler => {
            let out = &mut ws.tmp;
            match boundary {
                FieldBoundary::ZeroFlux => {
                    out[0] = u[0] + lam * (u[1] - u[0]);
                    out[n - 1] = u[n - 1] + lam * (u[n - 2] - u[n - 1]);
                }
                FieldBoundary::DirichletNeumann { left_value, right_slope } => {
                    out[0] = left_value;
                    out[n - 1] = u[n - 1] + lam * (u[n - 2] - u[n - 1] + right_slope * dx);
                }
            }
            for i in 1..n - 1 {
                out[i] = u[i] + lam * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
            }
            u.copy_from_slice(out);
        }
        DiffusionStep::CrankNicolson => {
            let half = 0.5 * lam;
            for i in 1..n - 1 {
                ws.lower[i] = -half;
                ws.diag[i] = 1.0 + lam;
                ws.upper[i] = -half;
                ws.rhs[i] = half * u[i - 1] + (1.0 - lam) * u[i] + half * u[i + 1];
            }
            match boundary {
                FieldBoundary::ZeroFlux => {
                    ws.diag[0] = 1.0 + half;
                    ws.upper[0] = -half;
                    ws.rhs[0] = (1.0 - half) * u[0] + half * u[1];
                    ws.lower[n - 1] = -half;
                    ws.diag[n - 1] = 1.0 + half;
                    ws.rhs[n - 1] = half * u[n - 2] + (1.0 - half) * u[n - 1];
                }
                FieldBoundary::DirichletNeumann { left_value, right_slope } => {
                    ws.diag[0] = 1.0;
                    ws.upper[0] = 0.0;
                    ws.rhs[0] = left_value;
                    ws.lower[n - 1] = -half;
                    ws.diag[n - 1] = 1.0 + half;
                    ws.rhs[n - 1] =
                        half * u[n - 2] + (1.0 - half) * u[n - 1] + lam * right_slope * dx;
                }
            }
            thomas_solve(&ws.lower, &mut ws.diag, &ws.upper, &mut ws.rhs, u, &mut ws.tmp);
        }
    }
}

/// Tridiagonal solve; `diag` and `rhs` are consumed as scratch.
fn thomas_solve(
    lower: &[f64],
    diag: &mut [f64],
    upper: &[f64],
    rhs: &mut [f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    out[n - 1] = rhs[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = rhs[i] - scratch[i] * out[i + 1];
    }
}

/// Deadline-regime ODE for the revealed density at a single price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeadlineOdeVariant {
    /// Submission and cancellation both accelerate, with distinct offsets.
    DistinctGammas { c_r: f64, gamma_r: f64, c_l: f64, gamma_l: f64 },
    /// Accelerating submission against a constant cancellation rate.
    ConstantCancel { c_r: f64, gamma_r: f64, nu_l: f64 },
}

/// Pointwise ODE `d rho/dt = s(t) (rho_total - rho) - c(t) rho` with the
/// deadline rate forms; price profiles are already folded into the
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineOde {
    pub variant: DeadlineOdeVariant,
    pub t_end: f64,
    pub rho_total: f64,
}

impl DeadlineOde {
    fn rates(&self, t: f64) -> (f64, f64) {
        match self.variant {
            DeadlineOdeVariant::DistinctGammas { c_r, gamma_r, c_l, gamma_l } => (
                c_r / (gamma_r + self.t_end - t),
                c_l / (gamma_l + self.t_end - t),
            ),
            DeadlineOdeVariant::ConstantCancel { c_r, gamma_r, nu_l } => {
                (c_r / (gamma_r + self.t_end - t), nu_l)
            }
        }
    }

    fn singular_time(&self) -> f64 {
        match self.variant {
            DeadlineOdeVariant::DistinctGammas { gamma_r, gamma_l, .. } => {
                self.t_end + gamma_r.min(gamma_l)
            }
            DeadlineOdeVariant::ConstantCancel { gamma_r, .. } => self.t_end + gamma_r,
        }
    }
}

/// Classic fourth-order Runge-Kutta trajectory of the deadline ODE over
/// `t_span`, sampled every `dt` (plus the endpoint). Errors when the span
/// reaches the singular time `t_end + gamma`.
pub fn integrate_ode_pointwise(
    ode: &DeadlineOde,
    t_span: (f64, f64),
    dt: f64,
    rho_init: f64,
) -> Result<Vec<(f64, f64)>> {
    let (t0, t1) = t_span;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt = {dt}, need dt > 0")));
    }
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(Error::Config(format!("bad t_span [{t0}, {t1}]")));
    }
    if t1 >= ode.singular_time() {
        return Err(Error::Domain(format!(
            "t_span reaches the singular denominator at t = {}",
            ode.singular_time()
        )));
    }
    let rhs = |t: f64, rho: f64| {
        let (s, c) = ode.rates(t);
        s * (ode.rho_total - rho) - c * rho
    };
    let mut out = Vec::with_capacity(((t1 - t0) / dt) as usize + 2);
    let mut t = t0;
    let mut rho = rho_init;
    out.push((t, rho));
    while t < t1 - 1e-12 {
        let h = dt.min(t1 - t);
        let k1 = rhs(t, rho);
        let k2 = rhs(t + 0.5 * h, rho + 0.5 * h * k1);
        let k3 = rhs(t + 0.5 * h, rho + 0.5 * h * k2);
        let k4 = rhs(t + h, rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        out.push((t, rho));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CancellationRate, DeadlineSolutionParams, LatentBookParams, PriceProfile, SubmissionRate,
        eval_deadline_solution,
    };
    use approx::assert_relative_eq;

    #[test]
    fn grid_validation() {
        assert!(PriceGrid::new(0.01, 0.05, 11).is_err());
        assert!(PriceGrid::new(-0.05, 0.05, 2).is_err());
        let g = PriceGrid::new(-0.05, 0.05, 101).unwrap();
        assert_relative_eq!(g.dx(), 0.001, max_relative = 1e-12);
        assert_eq!(g.nearest(0.0), 50);
    }

    #[test]
    fn linear_latent_profile_is_diffusion_invariant() {
        // dxx of a linear profile vanishes, so with no reactions the field
        // must not move under latent diffusion.
        let grid = PriceGrid::new(-0.05, 0.05, 201).unwrap();
        let (a, b) = (3.0, 0.02);
        let rho_l: Vec<f64> = grid.xs().iter().map(|&x| a * x + b).collect();
        let initial = DensityField::new(grid, vec![0.0; grid.n], rho_l.clone(), 0.0).unwrap();
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent { nu_r: 0.0, profile: PriceProfile::One },
            cancellation: CancellationRate::Constant { nu_l: 0.0 },
        };
        let diff = DiffusionSchedule::Constant { d_r: 0.0, d_l: 1e-5 };
        let out = integrate(&initial, &rates, &diff, 100.0, 0.05, &[100.0]).unwrap();
        for (got, want) in out[0].rho_l.iter().zip(&rho_l) {
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
        assert_relative_eq!(out[0].latent_right_slope(), a, max_relative = 1e-9);
    }

    #[test]
    fn explicit_scheme_rejects_unstable_step() {
        let grid = PriceGrid::new(-0.05, 0.05, 1001).unwrap();
        let latent = LatentBookParams::new(1.0, 0.01).unwrap();
        let initial = DensityField::from_latent(grid, &latent, 0.0);
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent { nu_r: 0.0, profile: PriceProfile::One },
            cancellation: CancellationRate::Constant { nu_l: 0.0 },
        };
        let diff = DiffusionSchedule::Constant { d_r: 1e-4, d_l: 0.0 };
        let cfg = SolverConfig {
            dt: 0.1,
            scheme: DiffusionStep::ExplicitEuler,
            boundary: None,
        };
        // dx = 1e-4, so D dt/dx^2 = 1e-4 * 0.1 / 1e-8 = 1000 >> 0.5.
        let err = integrate_with(&initial, &rates, &diff, 1.0, &cfg, &[1.0]);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn ode_matches_deadline_closed_form_for_equal_gammas() {
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let p = DeadlineSolutionParams {
            c_r: 0.4,
            c_l: 0.4,
            gamma: 10.0,
            t0: 150.0,
            t_end: 300.0,
            profile_r: PriceProfile::One,
            profile_l: PriceProfile::One,
        };
        let x = 0.002;
        let rho0 = {
            let rates = RateModel {
                submission: SubmissionRate::TimeIndependent {
                    nu_r: p.c_r / (p.gamma + p.t_end - p.t0),
                    profile: PriceProfile::One,
                },
                cancellation: CancellationRate::Constant {
                    nu_l: p.c_l / (p.gamma + p.t_end - p.t0),
                },
            };
            crate::model::eval_time_independent_dynamic(x, p.t0, &rates, &latent).unwrap()
        };
        let ode = DeadlineOde {
            variant: DeadlineOdeVariant::DistinctGammas {
                c_r: p.c_r,
                gamma_r: p.gamma,
                c_l: p.c_l,
                gamma_l: p.gamma,
            },
            t_end: p.t_end,
            rho_total: latent.eval(x),
        };
        let traj = integrate_ode_pointwise(&ode, (p.t0, 299.0), 0.05, rho0).unwrap();
        for &(t, rho) in traj.iter().step_by(200) {
            let closed = eval_deadline_solution(x, t, &p, &latent).unwrap();
            assert_relative_eq!(rho, closed, max_relative = 1e-6);
        }
        // Midpoint check of the closed form against the integration.
        let mid = 0.5 * (p.t0 + p.t_end);
        let (_, rho_mid) = *traj
            .iter()
            .min_by(|a, b| (a.0 - mid).abs().total_cmp(&(b.0 - mid).abs()))
            .unwrap();
        let closed_mid = eval_deadline_solution(x, mid, &p, &latent).unwrap();
        assert_relative_eq!(rho_mid, closed_mid, max_relative = 1e-6);
    }

    #[test]
    fn ode_full_revelation_without_cancellation() {
        // nu_l = 0: everything reveals by the perceived deadline.
        let ode = DeadlineOde {
            variant: DeadlineOdeVariant::ConstantCancel { c_r: 2.0, gamma_r: 1.0, nu_l: 0.0 },
            t_end: 300.0,
            rho_total: 0.7,
        };
        let traj = integrate_ode_pointwise(&ode, (0.0, 300.999), 0.002, 0.0).unwrap();
        let (_, last) = *traj.last().unwrap();
        assert_relative_eq!(last, 0.7, max_relative = 1e-5);
        assert!(integrate_ode_pointwise(&ode, (0.0, 301.0), 0.05, 0.0).is_err());
    }

    #[test]
    fn ode_convex_near_deadline_with_later_cancellation_deadline() {
        // c_r = c_l = 2 > 1 still gives a convex approach when gamma_l > gamma_r.
        let ode = DeadlineOde {
            variant: DeadlineOdeVariant::DistinctGammas {
                c_r: 2.0,
                gamma_r: 1.0,
                c_l: 2.0,
                gamma_l: 20.0,
            },
            t_end: 300.0,
            rho_total: 1.0,
        };
        let traj = integrate_ode_pointwise(&ode, (0.0, 299.5), 0.05, 0.0).unwrap();
        let vals: Vec<f64> = traj.iter().map(|&(_, r)| r).collect();
        let start = vals.len() * 9 / 10;
        for i in start..vals.len() - 1 {
            let second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            assert!(second > 0.0, "not convex at index {i}");
        }
    }

    #[test]
    fn reaction_conserves_node_mass() {
        let grid = PriceGrid::new(-0.02, 0.02, 81).unwrap();
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let initial = DensityField::from_latent(grid, &latent, 0.0);
        let rates = RateModel {
            submission: SubmissionRate::Deadline {
                c_r: 0.9,
                gamma_r: 3.0,
                t_r0: 100.0,
                t_end: 300.0,
                profile: PriceProfile::Exp { scale: 0.003 },
            },
            cancellation: CancellationRate::Constant { nu_l: 0.02 },
        };
        let out =
            integrate(&initial, &rates, &DiffusionSchedule::Zero, 300.0, 0.05, &[300.0]).unwrap();
        for i in 0..grid.n {
            let sigma0 = initial.rho_r[i] + initial.rho_l[i];
            let sigma1 = out[0].rho_r[i] + out[0].rho_l[i];
            assert_relative_eq!(sigma1, sigma0, max_relative = 1e-10);
        }
    }
}
