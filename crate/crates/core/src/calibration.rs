//! Multi-start least-squares calibration.
//!
//! Two fits are provided: the stationary two-exponential ansatz against an
//! average book at auction time, and the full dynamic model against a
//! sequence of revealed-density snapshots, for the zero-, constant-, and
//! time-varying-diffusion variants. The diffusion variants freeze the
//! zero-diffusion parameters and fit only the coefficients.
//!
//! Every fit runs a bounded derivative-free simplex search from several
//! starts drawn log-uniformly around data-driven seeds; internal
//! coordinates are unconstrained (log for positive parameters, logit for
//! weights, square-root for coefficients that may sit at zero). Starts are
//! evaluated in parallel and reduced deterministically: best objective,
//! ties broken by the lexicographically smaller parameter vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    CancellationRate, DiffusionSchedule, LatentBookParams, RateModel, StationaryFitParams,
    SubmissionRate, SubmissionRateParams, eval_stationary_revealed,
};
use crate::solver::{integrate_with, DensityField, DiffusionStep, PriceGrid, SolverConfig};

// ---------------------------------------------------------------------------
// Simplex search on unconstrained internal coordinates.

/// Map between a natural parameter and its unconstrained internal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// v = exp(u), v > 0.
    Log,
    /// v = 1/(1+exp(-u)), v in (0, 1).
    Logit,
    /// v = 1 + exp(u), v > 1.
    OnePlusLog,
    /// v = u^2, v >= 0.
    Square,
}

impl Transform {
    fn to_internal(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.max(1e-300).ln(),
            Transform::Logit => {
                let v = v.clamp(1e-12, 1.0 - 1e-12);
                (v / (1.0 - v)).ln()
            }
            Transform::OnePlusLog => (v - 1.0).max(1e-12).ln(),
            Transform::Square => v.max(0.0).sqrt(),
        }
    }

    fn from_internal(self, u: f64) -> f64 {
        match self {
            Transform::Log => u.exp(),
            Transform::Logit => 1.0 / (1.0 + (-u).exp()),
            Transform::OnePlusLog => 1.0 + u.exp(),
            Transform::Square => u * u,
        }
    }
}

/// One optimizer start: initial natural parameters and the reached optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct StartTrace {
    pub init: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct SimplexOptions {
    max_iter: usize,
    f_tol: f64,
    x_tol: f64,
    /// Shrunk-simplex restarts from the incumbent after convergence.
    restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iter: 4000, f_tol: 1e-14, x_tol: 1e-11, restarts: 2 }
    }
}

/// Nelder-Mead with adaptive coefficients; returns (point, value, converged).
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: &[f64],
    opts: &SimplexOptions,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let f_spread = (values[worst] - values[best]).abs();
        let f_scale = values[best].abs().max(values[worst].abs()).max(1e-300);
        let x_spread = (0..n)
            .map(|i| (simplex[worst][i] - simplex[best][i]).abs())
            .fold(0.0f64, f64::max);
        if f_spread <= opts.f_tol * f_scale && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (k, v) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for i in 0..n {
                centroid[i] += v[i] / nf;
            }
        }

        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - simplex[worst][i]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[order[0]] {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + beta * (reflect[i] - centroid[i]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let (contract, f_contract) = if f_reflect < values[worst] {
                let c: Vec<f64> = (0..n)
                    .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                    .collect();
                let fc = f(&c);
                (c, fc)
            } else {
                let c: Vec<f64> = (0..n)
                    .map(|i| centroid[i] - gamma * (centroid[i] - simplex[worst][i]))
                    .collect();
                let fc = f(&c);
                (c, fc)
            };
            if f_contract < values[worst].min(f_reflect) {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                // Shrink toward the best vertex.
                let best_point = simplex[best].clone();
                for (k, v) in simplex.iter_mut().enumerate() {
                    if k == best {
                        continue;
                    }
                    for i in 0..n {
                        v[i] = best_point[i] + delta * (v[i] - best_point[i]);
                    }
                    values[k] = f(v);
                }
            }
        }
    }

    let mut best_i = 0;
    for i in 1..=n {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    (simplex[best_i].clone(), values[best_i], converged)
}

/// Nelder-Mead with shrinking restarts from the incumbent.
fn polished_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: &[f64],
    opts: &SimplexOptions,
) -> (Vec<f64>, f64, bool) {
    let (mut x, mut v, mut conv) = nelder_mead(f, x0, step, opts);
    let mut shrink = 0.1;
    for _ in 0..opts.restarts {
        let restep: Vec<f64> = step.iter().map(|s| s * shrink).collect();
        let (x2, v2, c2) = nelder_mead(f, &x, &restep, opts);
        if v2 < v {
            x = x2;
            v = v2;
            conv = c2;
        }
        shrink *= 0.1;
    }
    (x, v, conv)
}

/// Deterministic best-of-starts reduction: minimal objective, ties broken
/// by the lexicographically smaller natural parameter vector.
fn pick_best(results: Vec<(Vec<f64>, f64, bool, Vec<f64>)>) -> Option<(Vec<f64>, f64, Vec<StartTrace>)> {
    let traces: Vec<StartTrace> = results
        .iter()
        .map(|(_, v, c, init)| StartTrace { init: init.clone(), objective: *v, converged: *c })
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (params, value, _, _) in results {
        if !value.is_finite() {
            continue;
        }
        let replace = match &best {
            None => true,
            Some((bp, bv)) => {
                value < *bv
                    || (value == *bv
                        && params
                            .iter()
                            .zip(bp)
                            .find_map(|(a, b)| (a != b).then(|| a < b))
                            .unwrap_or(false))
            }
        };
        if replace {
            best = Some((params, value));
        }
    }
    best.map(|(p, v)| (p, v, traces))
}

// ---------------------------------------------------------------------------
// Static fit.

#[derive(Debug, Clone, Copy)]
pub struct StaticFitConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for StaticFitConfig {
    fn default() -> Self {
        Self { n_starts: 18, seed: 0, max_iter: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct StaticFitResult {
    pub params: StationaryFitParams,
    pub objective: f64,
    pub trace: Vec<StartTrace>,
}

fn static_objective(xs: &[f64], ys: &[f64], p: &[f64]) -> f64 {
    // p := [scaled_a, scaled_b, x_r, k, w] in natural coordinates.
    let Ok(fit) = StationaryFitParams::new(p[0], p[1], p[2], p[3], p[4]) else {
        return f64::INFINITY;
    };
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let d = eval_stationary_revealed(x, &fit) - y;
        sse += d * d;
    }
    if sse.is_finite() {
        sse
    } else {
        f64::INFINITY
    }
}

/// Fit the stationary two-exponential ansatz to an averaged book
/// (density `ys` per log-price `xs`). Needs at least 50 buckets.
pub fn fit_static(xs: &[f64], ys: &[f64], cfg: &StaticFitConfig) -> Result<StaticFitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Config("xs and ys lengths differ".into()));
    }
    if xs.len() < 50 {
        return Err(Error::InsufficientData(format!(
            "static fit needs >= 50 buckets, got {}",
            xs.len()
        )));
    }

    // Data-driven seeds.
    let (mut peak_y, mut peak_x) = (0.0f64, 1e-3f64);
    let mut b0 = 0.0f64;
    let mut nearest = f64::MAX;
    for (&x, &y) in xs.iter().zip(ys) {
        if y > peak_y && x > 0.0 {
            peak_y = y;
            peak_x = x;
        }
        if x.abs() < nearest {
            nearest = x.abs();
            b0 = y.max(0.0);
        }
    }
    let b_seed = b0.max(1e-6);
    let a_seed = ((peak_y - b0).max(1e-6) / peak_x.max(1e-4)).max(1e-4);
    // e-folding scale of the decay past the peak.
    let mut xr_seed = 2e-3;
    for (&x, &y) in xs.iter().zip(ys) {
        if x > peak_x && y < peak_y / std::f64::consts::E {
            xr_seed = (x - peak_x).clamp(2e-4, 0.02);
            break;
        }
    }

    let transforms = [
        Transform::Log,    // scaled_a
        Transform::Square, // scaled_b (may vanish)
        Transform::Log,    // x_r
        Transform::OnePlusLog, // k
        Transform::Logit,  // w
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts: Vec<Vec<f64>> = vec![vec![a_seed, b_seed, xr_seed, 5.0, 0.9]];
    for _ in 1..cfg.n_starts {
        let jitter = |rng: &mut ChaCha8Rng, v: f64| v * 10f64.powf(rng.gen_range(-1.0..1.0));
        starts.push(vec![
            jitter(&mut rng, a_seed),
            jitter(&mut rng, b_seed),
            jitter(&mut rng, xr_seed).clamp(5e-5, 0.03),
            (5.0 * 10f64.powf(rng.gen_range(-0.5..0.5))).max(1.01),
            rng.gen_range(0.1..0.98),
        ]);
    }

    let opts = SimplexOptions { max_iter: cfg.max_iter, ..SimplexOptions::default() };
    let results: Vec<(Vec<f64>, f64, bool, Vec<f64>)> = starts
        .par_iter()
        .map(|start| {
            let u0: Vec<f64> = start
                .iter()
                .zip(&transforms)
                .map(|(&v, t)| t.to_internal(v))
                .collect();
            let obj = |u: &[f64]| {
                let p: Vec<f64> = u
                    .iter()
                    .zip(&transforms)
                    .map(|(&ui, t)| t.from_internal(ui))
                    .collect();
                static_objective(xs, ys, &p)
            };
            let step = vec![0.4; u0.len()];
            let (u_best, v_best, conv) = polished_search(&obj, &u0, &step, &opts);
            let p_best: Vec<f64> = u_best
                .iter()
                .zip(&transforms)
                .map(|(&ui, t)| t.from_internal(ui))
                .collect();
            (p_best, v_best, conv, start.clone())
        })
        .collect();

    let (p, objective, trace) = pick_best(results).ok_or_else(|| {
        Error::NoConvergence("every static-fit start diverged".into())
    })?;
    let params = StationaryFitParams::new(p[0], p[1], p[2], p[3], p[4])?;
    Ok(StaticFitResult { params, objective, trace })
}

// ---------------------------------------------------------------------------
// Dynamic fit.

/// Free parameters of the zero-diffusion dynamic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicParams {
    pub c_r: f64,
    pub x_r: f64,
    pub k: f64,
    pub w: f64,
    pub nu_l: f64,
    pub x_0: f64,
    pub m: f64,
}

impl DynamicParams {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.c_r, self.x_r, self.k, self.w, self.nu_l, self.x_0, self.m]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self { c_r: p[0], x_r: p[1], k: p[2], w: p[3], nu_l: p[4], x_0: p[5], m: p[6] }
    }
}

/// Everything the dynamic objective needs besides the free parameters.
#[derive(Debug, Clone)]
pub struct DynamicFitContext {
    pub latent: LatentBookParams,
    /// Deadline offset and cut-off measured beforehand from tick data.
    pub gamma_r: f64,
    pub t_r0: f64,
    pub t_end: f64,
    /// Saturation time of the time-varying diffusion schedule.
    pub t_s: f64,
    pub grid: PriceGrid,
    pub dt: f64,
    /// Sum-of-squares window in log-price.
    pub fit_window: (f64, f64),
}

impl DynamicFitContext {
    pub fn new(latent: LatentBookParams, gamma_r: f64, t_r0: f64, t_end: f64) -> Self {
        Self {
            latent,
            gamma_r,
            t_r0,
            t_end,
            t_s: 180.0,
            grid: PriceGrid { x_min: -0.025, x_max: 0.025, n: 501 },
            dt: 0.1,
            fit_window: (-0.02, 0.02),
        }
    }

    pub fn rate_model(&self, p: &DynamicParams) -> Result<RateModel> {
        let submission = SubmissionRateParams::new(
            p.c_r, p.x_r, p.k, p.w, self.gamma_r, self.t_r0, p.x_0, p.m, self.t_end,
        )?;
        Ok(RateModel {
            submission: SubmissionRate::Parametric(submission),
            cancellation: CancellationRate::Constant { nu_l: p.nu_l },
        })
    }
}

/// Observed revealed densities on the fit grid at the given times.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub grid: PriceGrid,
    pub times: Vec<f64>,
    /// One row of `grid.n` densities per time.
    pub rho_r: Vec<Vec<f64>>,
}

impl SnapshotSet {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.rho_r.len() {
            return Err(Error::Config("times and rows differ in length".into()));
        }
        if self.rho_r.iter().any(|r| r.len() != self.grid.n) {
            return Err(Error::Config("snapshot row does not match the grid".into()));
        }
        Ok(())
    }

    /// Standard observation times: every 10 s up to the deadline.
    pub fn default_times(t_end: f64) -> Vec<f64> {
        let n = (t_end / 10.0).round() as usize;
        (1..=n).map(|i| i as f64 * 10.0).collect()
    }
}

/// Run the model and return the sum of squared errors against the
/// snapshots over the fit window.
pub fn objective_dynamic(
    params: &DynamicParams,
    diffusion: &DiffusionSchedule,
    snapshots: &SnapshotSet,
    ctx: &DynamicFitContext,
) -> Result<f64> {
    snapshots.validate()?;
    if snapshots.grid != ctx.grid {
        return Err(Error::Config("snapshots are not on the fit grid".into()));
    }
    let rates = ctx.rate_model(params)?;
    let initial = DensityField::from_latent(ctx.grid, &ctx.latent, 0.0);
    let config = SolverConfig { dt: ctx.dt, scheme: DiffusionStep::CrankNicolson, boundary: None };
    let t_last = snapshots.times.last().copied().unwrap_or(ctx.t_end);
    let fields = integrate_with(&initial, &rates, diffusion, t_last, &config, &snapshots.times)
        .map_err(|e| {
            Error::Numerical(format!("solver failed at params {params:?}: {e}"))
        })?;
    let mut sse = 0.0;
    for (field, data) in fields.iter().zip(&snapshots.rho_r) {
        for i in 0..ctx.grid.n {
            let x = ctx.grid.x(i);
            if x < ctx.fit_window.0 || x > ctx.fit_window.1 {
                continue;
            }
            let d = field.rho_r[i] - data[i];
            sse += d * d;
        }
    }
    Ok(sse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitVariant {
    ZeroDiffusion,
    ConstantDiffusion,
    TimeDiffusion,
}

#[derive(Debug, Clone, Copy)]
pub struct DynamicFitConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for DynamicFitConfig {
    fn default() -> Self {
        Self { n_starts: 18, seed: 0, max_iter: 3000 }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicFitResult {
    pub params: DynamicParams,
    pub diffusion: DiffusionSchedule,
    pub objective: f64,
    pub variant: FitVariant,
    pub trace: Vec<StartTrace>,
}

fn schedule_from(variant: FitVariant, d: &[f64], t_s: f64) -> DiffusionSchedule {
    match variant {
        FitVariant::ZeroDiffusion => DiffusionSchedule::Zero,
        FitVariant::ConstantDiffusion => DiffusionSchedule::Constant { d_r: d[0], d_l: d[1] },
        FitVariant::TimeDiffusion => {
            DiffusionSchedule::TimeVarying { d_0: d[0], d_t: d[1], t_s, d_l: d[2] }
        }
    }
}

/// Fit the dynamic model to snapshots.
///
/// The zero-diffusion variant fits the seven rate parameters. The
/// diffusion variants require those as `frozen` and fit only the
/// diffusivities.
pub fn fit_dynamic(
    snapshots: &SnapshotSet,
    variant: FitVariant,
    ctx: &DynamicFitContext,
    frozen: Option<&DynamicParams>,
    cfg: &DynamicFitConfig,
) -> Result<DynamicFitResult> {
    snapshots.validate()?;
    match variant {
        FitVariant::ZeroDiffusion => fit_dynamic_zero(snapshots, ctx, cfg),
        FitVariant::ConstantDiffusion | FitVariant::TimeDiffusion => {
            let base = frozen.ok_or_else(|| {
                Error::Config("diffusion variants need the zero-diffusion parameters".into())
            })?;
            fit_dynamic_diffusion(snapshots, variant, ctx, base, cfg)
        }
    }
}

fn fit_dynamic_zero(
    snapshots: &SnapshotSet,
    ctx: &DynamicFitContext,
    cfg: &DynamicFitConfig,
) -> Result<DynamicFitResult> {
    let transforms = [
        Transform::Log,        // c_r
        Transform::Log,        // x_r
        Transform::OnePlusLog, // k
        Transform::Logit,      // w
        Transform::Log,        // nu_l
        Transform::Log,        // x_0
        Transform::Log,        // m
    ];
    // Seed x_r from the e-folding decay of the last snapshot.
    let last = snapshots.rho_r.last().ok_or_else(|| {
        Error::InsufficientData("no snapshots to fit".into())
    })?;
    let i0 = ctx.grid.nearest(0.0);
    let peak = last[i0..].iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut xr_seed = 2e-3;
    for i in i0..ctx.grid.n {
        if last[i] < peak / std::f64::consts::E && ctx.grid.x(i) > 0.0 {
            xr_seed = ctx.grid.x(i).clamp(3e-4, 0.02);
            break;
        }
    }
    let seed_params = [0.5, xr_seed, 5.0, 0.9, 0.02, 3e-3, 0.02];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts: Vec<Vec<f64>> = vec![seed_params.to_vec()];
    for _ in 1..cfg.n_starts {
        let mut s = Vec::with_capacity(7);
        for (i, &v) in seed_params.iter().enumerate() {
            let vv = match i {
                3 => rng.gen_range(0.3..0.98),                       // w
                2 => (v * 10f64.powf(rng.gen_range(-0.4..0.4))).max(1.05), // k
                _ => v * 10f64.powf(rng.gen_range(-1.0..1.0)),
            };
            s.push(vv);
        }
        starts.push(s);
    }

    let opts = SimplexOptions { max_iter: cfg.max_iter, ..SimplexOptions::default() };
    let results: Vec<(Vec<f64>, f64, bool, Vec<f64>)> = starts
        .par_iter()
        .map(|start| {
            let u0: Vec<f64> = start
                .iter()
                .zip(&transforms)
                .map(|(&v, t)| t.to_internal(v))
                .collect();
            let obj = |u: &[f64]| {
                let p: Vec<f64> = u
                    .iter()
                    .zip(&transforms)
                    .map(|(&ui, t)| t.from_internal(ui))
                    .collect();
                let params = DynamicParams::from_slice(&p);
                objective_dynamic(&params, &DiffusionSchedule::Zero, snapshots, ctx)
                    .unwrap_or(f64::INFINITY)
            };
            let step = vec![0.35; u0.len()];
            let (u_best, v_best, conv) = polished_search(&obj, &u0, &step, &opts);
            let p_best: Vec<f64> = u_best
                .iter()
                .zip(&transforms)
                .map(|(&ui, t)| t.from_internal(ui))
                .collect();
            (p_best, v_best, conv, start.clone())
        })
        .collect();

    let (p, objective, trace) = pick_best(results)
        .ok_or_else(|| Error::NoConvergence("every dynamic-fit start diverged".into()))?;
    Ok(DynamicFitResult {
        params: DynamicParams::from_slice(&p),
        diffusion: DiffusionSchedule::Zero,
        objective,
        variant: FitVariant::ZeroDiffusion,
        trace,
    })
}

fn fit_dynamic_diffusion(
    snapshots: &SnapshotSet,
    variant: FitVariant,
    ctx: &DynamicFitContext,
    base: &DynamicParams,
    cfg: &DynamicFitConfig,
) -> Result<DynamicFitResult> {
    let n_d = if variant == FitVariant::ConstantDiffusion { 2 } else { 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts: Vec<Vec<f64>> = vec![match variant {
        FitVariant::ConstantDiffusion => vec![5e-9, 5e-9],
        _ => vec![1e-5, 1e-8, 5e-9],
    }];
    for _ in 1..cfg.n_starts {
        let s: Vec<f64> = starts[0]
            .iter()
            .map(|&v| v * 10f64.powf(rng.gen_range(-1.5..1.5)))
            .collect();
        starts.push(s);
    }

    let opts = SimplexOptions { max_iter: cfg.max_iter, ..SimplexOptions::default() };
    let results: Vec<(Vec<f64>, f64, bool, Vec<f64>)> = starts
        .par_iter()
        .map(|start| {
            let u0: Vec<f64> = start.iter().map(|&v| Transform::Square.to_internal(v)).collect();
            let obj = |u: &[f64]| {
                let d: Vec<f64> = u.iter().map(|&ui| Transform::Square.from_internal(ui)).collect();
                let schedule = schedule_from(variant, &d, ctx.t_s);
                if schedule.validate().is_err() {
                    return f64::INFINITY;
                }
                objective_dynamic(base, &schedule, snapshots, ctx).unwrap_or(f64::INFINITY)
            };
            let step = vec![0.3 * u0.iter().cloned().fold(0.0f64, f64::max).max(1e-6); n_d];
            let (u_best, v_best, conv) = polished_search(&obj, &u0, &step, &opts);
            let d_best: Vec<f64> =
                u_best.iter().map(|&ui| Transform::Square.from_internal(ui)).collect();
            (d_best, v_best, conv, start.clone())
        })
        .collect();

    let (d, objective, trace) = pick_best(results)
        .ok_or_else(|| Error::NoConvergence("every diffusion-fit start diverged".into()))?;
    Ok(DynamicFitResult {
        params: *base,
        diffusion: schedule_from(variant, &d, ctx.t_s),
        objective,
        variant,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transforms_round_trip() {
        for (t, v) in [
            (Transform::Log, 0.37),
            (Transform::Logit, 0.87),
            (Transform::OnePlusLog, 4.9),
            (Transform::Square, 1.2e-5),
        ] {
            let u = t.to_internal(v);
            assert_relative_eq!(t.from_internal(u), v, max_relative = 1e-12);
        }
        assert_eq!(Transform::Square.from_internal(0.0), 0.0);
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let (x, v, conv) = polished_search(&f, &[0.0, 0.0], &[0.5, 0.5], &SimplexOptions::default());
        assert!(conv);
        assert_relative_eq!(x[0], 1.5, epsilon = 1e-8);
        assert_relative_eq!(x[1], -0.5, epsilon = 1e-8);
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn static_fit_recovers_planted_parameters() {
        let truth = StationaryFitParams::new(6.77, 0.0058, 0.003, 5.1, 0.969).unwrap();
        let xs: Vec<f64> = (0..=500).map(|i| -0.05 + i as f64 * 2e-4).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| eval_stationary_revealed(x, &truth)).collect();
        let fit = fit_static(&xs, &ys, &StaticFitConfig::default()).unwrap();
        assert!(fit.objective < 1e-12, "objective = {}", fit.objective);
        assert_relative_eq!(fit.params.scaled_a, truth.scaled_a, max_relative = 0.01);
        assert_relative_eq!(fit.params.scaled_b, truth.scaled_b, max_relative = 0.01);
        assert_relative_eq!(fit.params.x_r, truth.x_r, max_relative = 0.01);
        assert_relative_eq!(fit.params.k, truth.k, max_relative = 0.01);
        assert_relative_eq!(fit.params.w, truth.w, max_relative = 0.01);
        // The optimum never exceeds the objective at the planted truth.
        let truth_obj = {
            let p = [truth.scaled_a, truth.scaled_b, truth.x_r, truth.k, truth.w];
            super::static_objective(&xs, &ys, &p)
        };
        assert!(fit.objective <= truth_obj + 1e-18);
    }

    #[test]
    fn static_fit_single_exponential_degeneracy() {
        // w = 1 planted: parameters are degenerate, so only the objective
        // is contracted.
        let truth = StationaryFitParams::new(6.0, 0.005, 0.003, 3.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..=300).map(|i| -0.03 + i as f64 * 2e-4).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| eval_stationary_revealed(x, &truth)).collect();
        let fit = fit_static(&xs, &ys, &StaticFitConfig::default()).unwrap();
        let truth_obj = static_objective(&xs, &ys, &[6.0, 0.005, 0.003, 3.0, 1.0]);
        assert!(fit.objective <= truth_obj + 1e-15, "{} > {}", fit.objective, truth_obj);
    }

    #[test]
    fn static_fit_flat_zero_book() {
        let xs: Vec<f64> = (0..=200).map(|i| -0.02 + i as f64 * 2e-4).collect();
        let ys = vec![0.0; xs.len()];
        let fit = fit_static(&xs, &ys, &StaticFitConfig::default()).unwrap();
        assert!(fit.objective <= 1e-12);
    }

    #[test]
    fn static_fit_needs_enough_buckets() {
        let xs = vec![0.0; 10];
        let ys = vec![0.0; 10];
        assert!(fit_static(&xs, &ys, &StaticFitConfig::default()).is_err());
    }

    #[test]
    fn best_of_starts_is_monotone_in_start_count() {
        let truth = StationaryFitParams::new(4.0, 0.004, 0.004, 6.0, 0.9).unwrap();
        let xs: Vec<f64> = (0..=200).map(|i| -0.02 + i as f64 * 2e-4).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| eval_stationary_revealed(x, &truth)).collect();
        let few = fit_static(&xs, &ys, &StaticFitConfig { n_starts: 4, seed: 9, max_iter: 600 })
            .unwrap();
        let more = fit_static(&xs, &ys, &StaticFitConfig { n_starts: 9, seed: 9, max_iter: 600 })
            .unwrap();
        assert!(more.objective <= few.objective + 1e-18);
    }

    #[test]
    fn dynamic_objective_is_zero_at_truth_and_order_free() {
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let mut ctx = DynamicFitContext::new(latent, 3.1, 210.0, 300.0);
        ctx.grid = PriceGrid { x_min: -0.02, x_max: 0.02, n: 81 };
        ctx.dt = 0.5;
        let truth = DynamicParams {
            c_r: 0.93,
            x_r: 2.3e-3,
            k: 4.9,
            w: 0.87,
            nu_l: 0.023,
            x_0: 3.2e-3,
            m: 0.016,
        };
        let rates = ctx.rate_model(&truth).unwrap();
        let initial = DensityField::from_latent(ctx.grid, &ctx.latent, 0.0);
        let times = vec![60.0, 150.0, 300.0];
        let fields = crate::solver::integrate_with(
            &initial,
            &rates,
            &DiffusionSchedule::Zero,
            300.0,
            &SolverConfig { dt: ctx.dt, scheme: DiffusionStep::CrankNicolson, boundary: None },
            &times,
        )
        .unwrap();
        let snaps = SnapshotSet {
            grid: ctx.grid,
            times,
            rho_r: fields.iter().map(|f| f.rho_r.clone()).collect(),
        };
        let sse = objective_dynamic(&truth, &DiffusionSchedule::Zero, &snaps, &ctx).unwrap();
        assert!(sse < 1e-24, "sse = {sse}");
        // Perturbing each parameter strictly increases the objective.
        for i in 0..7 {
            let mut p = truth.to_vec();
            p[i] *= 1.05;
            if i == 3 {
                p[i] = (p[i]).min(0.999);
            }
            let perturbed = DynamicParams::from_slice(&p);
            let s = objective_dynamic(&perturbed, &DiffusionSchedule::Zero, &snaps, &ctx).unwrap();
            assert!(s > sse, "parameter {i} not identifiable: {s} <= {sse}");
        }
    }
}
