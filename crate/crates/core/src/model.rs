//! Model parameters and closed-form solutions.
//!
//! Prices are always centered log-prices `x = ln(p / p_indicative)`, times
//! are seconds since the start of the accumulation period, and `t_end` is
//! the auction deadline (300 s for a five-minute closing auction). The
//! revealed book grows out of a latent book `max(a·x + b, b)` through a
//! submission rate and shrinks through a cancellation rate; both rates may
//! accelerate as `1/(gamma + t_end - t)` once a cut-off time is passed.

use crate::error::{Error, Result};

/// Latent book profile `rho_l(x) = max(a*x + b, b)`: linear above the knee
/// at `x = -b/a`, flat at the baseline `b` below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentBookParams {
    /// Slope of the latent density per unit log-price. Must be positive.
    pub a: f64,
    /// Baseline latent density far below the indicative price.
    pub b: f64,
}

impl LatentBookParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("latent slope a = {a}, need a > 0")));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("latent baseline b = {b}, need b >= 0")));
        }
        Ok(Self { a, b })
    }

    /// Density of the latent book at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b).max(self.b)
    }

    /// Log-price of the knee where the linear branch meets the baseline.
    #[inline]
    pub fn knee(&self) -> f64 {
        -self.b / self.a
    }
}

/// Initial latent order density `max(a*x + b, b)`.
#[inline]
pub fn eval_latent_initial(x: f64, p: &LatentBookParams) -> f64 {
    p.eval(x)
}

/// Price profile `Gamma(x)` multiplying a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceProfile {
    /// Constant 1.
    One,
    /// `exp(-|x| / scale)`.
    Exp { scale: f64 },
    /// `w * exp(-|x|/x_r) + (1-w) * exp(-|x|/(k*x_r))`, two agent
    /// populations with price scales `x_r` (fast) and `k*x_r` (slow).
    TwoExp { x_r: f64, k: f64, w: f64 },
}

impl PriceProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriceProfile::One => Ok(()),
            PriceProfile::Exp { scale } => {
                if scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("profile scale = {scale}, need > 0")))
                }
            }
            PriceProfile::TwoExp { x_r, k, w } => {
                if !(x_r > 0.0 && x_r.is_finite()) {
                    return Err(Error::InvalidParameter(format!("x_r = {x_r}, need > 0")));
                }
                if !(k >= 1.0 && k.is_finite()) {
                    return Err(Error::InvalidParameter(format!("k = {k}, need k >= 1")));
                }
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidParameter(format!("w = {w}, need 0 <= w <= 1")));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PriceProfile::One => 1.0,
            PriceProfile::Exp { scale } => (-x.abs() / scale).exp(),
            PriceProfile::TwoExp { x_r, k, w } => {
                w * (-x.abs() / x_r).exp() + (1.0 - w) * (-x.abs() / (k * x_r)).exp()
            }
        }
    }
}

/// Parametric submission rate: two exponential price scales above the
/// indicative price, an exponential bridge on `[-x_0, 0)`, and a constant
/// plateau below `-x_0`.
///
/// For `x >= 0` the fast term accelerates as `1/(gamma_r + t_end - t)` once
/// `t > t_r0`; the slow term stays frozen at its `t_r0` denominator. Both
/// terms are constant before `t_r0`. The bridge amplitude `A*` and scale
/// `x_r*` follow from continuity at `x = 0` and `x = -x_0` at each instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmissionRateParams {
    /// Dimensionless deadline intensity.
    pub c_r: f64,
    /// Fast price scale (log-price).
    pub x_r: f64,
    /// Slow/fast price-scale ratio, `>= 1`.
    pub k: f64,
    /// Fast-agent weight in `[0, 1]`.
    pub w: f64,
    /// Deadline offset in seconds; the perceived deadline is `t_end + gamma_r`.
    pub gamma_r: f64,
    /// Activation time of the deadline acceleration, in `(0, t_end)`.
    pub t_r0: f64,
    /// Knee on the negative side, `> 0`.
    pub x_0: f64,
    /// Far-negative plateau factor: the rate below `-x_0` is `m * c_r / gamma_r`.
    pub m: f64,
    /// Auction deadline in seconds.
    pub t_end: f64,
}

impl SubmissionRateParams {
    pub fn new(
        c_r: f64,
        x_r: f64,
        k: f64,
        w: f64,
        gamma_r: f64,
        t_r0: f64,
        x_0: f64,
        m: f64,
        t_end: f64,
    ) -> Result<Self> {
        let p = Self { c_r, x_r, k, w, gamma_r, t_r0, x_0, m, t_end };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let chk = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::InvalidParameter(msg)) };
        chk(self.c_r > 0.0, format!("c_r = {}, need > 0", self.c_r))?;
        chk(self.x_r > 0.0, format!("x_r = {}, need > 0", self.x_r))?;
        chk(self.k >= 1.0, format!("k = {}, need >= 1", self.k))?;
        chk((0.0..=1.0).contains(&self.w), format!("w = {}, need in [0,1]", self.w))?;
        // The plateau m*c_r/gamma_r requires a strictly positive offset.
        chk(self.gamma_r > 0.0, format!("gamma_r = {}, need > 0", self.gamma_r))?;
        chk(
            self.t_r0 > 0.0 && self.t_r0 < self.t_end,
            format!("t_r0 = {}, need in (0, t_end = {})", self.t_r0, self.t_end),
        )?;
        chk(self.x_0 > 0.0, format!("x_0 = {}, need > 0", self.x_0))?;
        chk(self.m > 0.0, format!("m = {}, need > 0", self.m))?;
        chk(self.t_end > 0.0, format!("t_end = {}, need > 0", self.t_end))
    }

    /// Bridge amplitude `A*(t)`: the rate at `x = 0`.
    #[inline]
    pub fn a_star(&self, t: f64) -> f64 {
        let fast_den = self.gamma_r + self.t_end - t.max(self.t_r0);
        let slow_den = self.gamma_r + self.t_end - self.t_r0;
        self.c_r * (self.w / fast_den + (1.0 - self.w) / slow_den)
    }

    /// Bridge price scale `x_r*(t)` from continuity at `-x_0`. Infinite when
    /// the rate at `x = 0` already equals the plateau.
    #[inline]
    pub fn x_r_star(&self, t: f64) -> f64 {
        let ratio = self.gamma_r * self.a_star(t) / (self.m * self.c_r);
        self.x_0 / ratio.ln()
    }

    /// Plateau value `m * c_r / gamma_r` for `x < -x_0`.
    #[inline]
    pub fn plateau(&self) -> f64 {
        self.m * self.c_r / self.gamma_r
    }

    /// Rate at `(x, t)` without the domain check on `t`.
    #[inline]
    pub fn eval_unchecked(&self, x: f64, t: f64) -> f64 {
        if x >= 0.0 {
            let fast_den = self.gamma_r + self.t_end - t.max(self.t_r0);
            let slow_den = self.gamma_r + self.t_end - self.t_r0;
            self.w * self.c_r / fast_den * (-x / self.x_r).exp()
                + (1.0 - self.w) * self.c_r / slow_den * (-x / (self.k * self.x_r)).exp()
        } else if x >= -self.x_0 {
            // Geometric interpolation between A*(t) at 0 and the plateau at
            // -x_0; equals A* exp(x / x_r*) and stays finite when the two
            // levels coincide.
            let a_star = self.a_star(t);
            let ratio = self.gamma_r * a_star / (self.m * self.c_r);
            a_star * (x / self.x_0 * ratio.ln()).exp()
        } else {
            self.plateau()
        }
    }
}

/// Submission rate `(nu_r Gamma_r)(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubmissionRate {
    /// `nu_r * Gamma_r(x)`, no time dependence.
    TimeIndependent { nu_r: f64, profile: PriceProfile },
    /// `C_r * Gamma_r(x) / (gamma_r + t_end - max(t, t_r0))`: constant
    /// before the cut-off, accelerating after it.
    Deadline {
        c_r: f64,
        gamma_r: f64,
        t_r0: f64,
        t_end: f64,
        profile: PriceProfile,
    },
    /// The full parametric form.
    Parametric(SubmissionRateParams),
}

impl SubmissionRate {
    pub fn validate(&self) -> Result<()> {
        match self {
            SubmissionRate::TimeIndependent { nu_r, profile } => {
                if !(*nu_r >= 0.0) || !nu_r.is_finite() {
                    return Err(Error::InvalidParameter(format!("nu_r = {nu_r}, need >= 0")));
                }
                profile.validate()
            }
            SubmissionRate::Deadline { c_r, gamma_r, t_r0, t_end, profile } => {
                if !(*c_r > 0.0) {
                    return Err(Error::InvalidParameter(format!("c_r = {c_r}, need > 0")));
                }
                if !(*gamma_r >= 0.0) {
                    return Err(Error::InvalidParameter(format!("gamma_r = {gamma_r}, need >= 0")));
                }
                if !(*t_r0 >= 0.0 && t_r0 < t_end) {
                    return Err(Error::InvalidParameter(format!(
                        "t_r0 = {t_r0}, need in [0, t_end = {t_end})"
                    )));
                }
                profile.validate()
            }
            SubmissionRate::Parametric(p) => p.validate(),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        matches!(self, SubmissionRate::TimeIndependent { .. })
    }

    /// Rate value with `t` clamped into `[0, t_end]` where applicable.
    #[inline]
    pub fn eval_unchecked(&self, x: f64, t: f64) -> f64 {
        match self {
            SubmissionRate::TimeIndependent { nu_r, profile } => nu_r * profile.eval(x),
            SubmissionRate::Deadline { c_r, gamma_r, t_r0, t_end, profile } => {
                let t = t.clamp(0.0, *t_end);
                c_r * profile.eval(x) / (gamma_r + t_end - t.max(*t_r0))
            }
            SubmissionRate::Parametric(p) => p.eval_unchecked(x, t.clamp(0.0, p.t_end)),
        }
    }
}

/// Cancellation rate `(nu_l Gamma_l)(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CancellationRate {
    /// Constant `nu_l` at all prices and times.
    Constant { nu_l: f64 },
    /// `C_l * Gamma_l(x) / (gamma_l + t_end - max(t, t_l0))`.
    Deadline {
        c_l: f64,
        gamma_l: f64,
        t_l0: f64,
        t_end: f64,
        profile: PriceProfile,
    },
}

impl CancellationRate {
    pub fn validate(&self) -> Result<()> {
        match self {
            CancellationRate::Constant { nu_l } => {
                if !(*nu_l >= 0.0) || !nu_l.is_finite() {
                    return Err(Error::InvalidParameter(format!("nu_l = {nu_l}, need >= 0")));
                }
                Ok(())
            }
            CancellationRate::Deadline { c_l, gamma_l, t_l0, t_end, profile } => {
                if !(*c_l > 0.0) {
                    return Err(Error::InvalidParameter(format!("c_l = {c_l}, need > 0")));
                }
                if !(*gamma_l >= 0.0) {
                    return Err(Error::InvalidParameter(format!("gamma_l = {gamma_l}, need >= 0")));
                }
                if !(*t_l0 >= 0.0 && t_l0 < t_end) {
                    return Err(Error::InvalidParameter(format!(
                        "t_l0 = {t_l0}, need in [0, t_end = {t_end})"
                    )));
                }
                profile.validate()
            }
        }
    }

    pub fn is_time_independent(&self) -> bool {
        matches!(self, CancellationRate::Constant { .. })
    }

    #[inline]
    pub fn eval_unchecked(&self, x: f64, t: f64) -> f64 {
        match self {
            CancellationRate::Constant { nu_l } => *nu_l,
            CancellationRate::Deadline { c_l, gamma_l, t_l0, t_end, profile } => {
                let t = t.clamp(0.0, *t_end);
                c_l * profile.eval(x) / (gamma_l + t_end - t.max(*t_l0))
            }
        }
    }
}

/// Submission and cancellation rates evaluated together by the solver and
/// the flow simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub submission: SubmissionRate,
    pub cancellation: CancellationRate,
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        self.submission.validate()?;
        self.cancellation.validate()
    }

    pub fn is_time_independent(&self) -> bool {
        self.submission.is_time_independent() && self.cancellation.is_time_independent()
    }

    #[inline]
    pub fn submission_at(&self, x: f64, t: f64) -> f64 {
        self.submission.eval_unchecked(x, t)
    }

    #[inline]
    pub fn cancellation_at(&self, x: f64, t: f64) -> f64 {
        self.cancellation.eval_unchecked(x, t)
    }
}

fn check_time_domain(t: f64, t_end: f64) -> Result<()> {
    if t < 0.0 || t > t_end || !t.is_finite() {
        Err(Error::Domain(format!("t = {t} outside [0, {t_end}]")))
    } else {
        Ok(())
    }
}

/// Parametric submission rate at `(x, t)`; `t` must lie in `[0, t_end]`.
pub fn eval_submission_rate(x: f64, t: f64, p: &SubmissionRateParams) -> Result<f64> {
    check_time_domain(t, p.t_end)?;
    Ok(p.eval_unchecked(x, t))
}

/// Cancellation rate at `(x, t)`; `t` must lie in `[0, t_end]` for the
/// deadline variant.
pub fn eval_cancellation_rate(x: f64, t: f64, p: &CancellationRate) -> Result<f64> {
    if let CancellationRate::Deadline { t_end, .. } = p {
        check_time_domain(t, *t_end)?;
    }
    Ok(p.eval_unchecked(x, t))
}

/// Stationary two-exponential ansatz, with the latent slope and baseline
/// absorbed into the submission/cancellation rate ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryFitParams {
    /// `nu_r/nu_l * a`.
    pub scaled_a: f64,
    /// `nu_r/nu_l * b`.
    pub scaled_b: f64,
    pub x_r: f64,
    pub k: f64,
    pub w: f64,
}

impl StationaryFitParams {
    pub fn new(scaled_a: f64, scaled_b: f64, x_r: f64, k: f64, w: f64) -> Result<Self> {
        let p = Self { scaled_a, scaled_b, x_r, k, w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scaled_a > 0.0) {
            return Err(Error::InvalidParameter(format!("scaled_a = {}, need > 0", self.scaled_a)));
        }
        if !(self.scaled_b >= 0.0) {
            return Err(Error::InvalidParameter(format!("scaled_b = {}, need >= 0", self.scaled_b)));
        }
        PriceProfile::TwoExp { x_r: self.x_r, k: self.k, w: self.w }.validate()
    }

    #[inline]
    pub fn profile(&self) -> PriceProfile {
        PriceProfile::TwoExp { x_r: self.x_r, k: self.k, w: self.w }
    }
}

/// Stationary revealed book `max(scaled_a*x + scaled_b, scaled_b) * Gamma(x)`
/// with the two-exponential profile.
pub fn eval_stationary_revealed(x: f64, f: &StationaryFitParams) -> f64 {
    (f.scaled_a * x + f.scaled_b).max(f.scaled_b) * f.profile().eval(x)
}

/// `(1 - exp(-z)) / z`, continuous at `z = 0`.
#[inline]
fn one_minus_exp_over(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// Revealed book under time-independent rates with a null initial revealed
/// book: `rho_inf * (1 - exp(-(s + c) t))` where
/// `rho_inf = s * rho_total / (s + c)`.
///
/// Rates are evaluated at `t = 0`; they must not depend on time. Where both
/// rates vanish the limit value `s * rho_total * t = 0` is returned rather
/// than an error.
pub fn eval_time_independent_dynamic(
    x: f64,
    t: f64,
    rates: &RateModel,
    latent: &LatentBookParams,
) -> Result<f64> {
    if !rates.is_time_independent() {
        return Err(Error::Domain("rates must be time-independent".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t = {t}, need t >= 0")));
    }
    let s = rates.submission_at(x, 0.0);
    let c = rates.cancellation_at(x, 0.0);
    let rho_total = latent.eval(x);
    // s * rho_total * t * phi((s+c) t) stays finite as s + c -> 0.
    Ok(s * rho_total * t * one_minus_exp_over((s + c) * t))
}

/// Deadline-regime closed form: shared offset `gamma` and cut-off `t0` for
/// both rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadlineSolutionParams {
    pub c_r: f64,
    pub c_l: f64,
    pub gamma: f64,
    pub t0: f64,
    pub t_end: f64,
    pub profile_r: PriceProfile,
    pub profile_l: PriceProfile,
}

impl DeadlineSolutionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_r > 0.0 && self.c_l >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c_r = {}, c_l = {}: need c_r > 0, c_l >= 0",
                self.c_r, self.c_l
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {}, need >= 0", self.gamma)));
        }
        if !(self.t0 > 0.0 && self.t0 < self.t_end) {
            return Err(Error::InvalidParameter(format!(
                "t0 = {}, need in (0, t_end = {})",
                self.t0, self.t_end
            )));
        }
        self.profile_r.validate()?;
        self.profile_l.validate()
    }
}

/// Revealed book in the deadline regime:
/// `rho_T - (rho_T - rho_0) * ((gamma + t_end - t)/(gamma + t_end - t0))^E`
/// with `E = C_r Gamma_r + C_l Gamma_l`, `rho_T = C_r Gamma_r rho_total / E`,
/// and `rho_0` the time-independent solution at `t0`.
///
/// Valid for `t0 <= t <= t_end + gamma`; use
/// [`eval_time_independent_dynamic`] before `t0`.
pub fn eval_deadline_solution(
    x: f64,
    t: f64,
    p: &DeadlineSolutionParams,
    latent: &LatentBookParams,
) -> Result<f64> {
    if t < p.t0 {
        return Err(Error::Domain(format!(
            "t = {t} < t0 = {}; the deadline form starts at t0",
            p.t0
        )));
    }
    if t > p.t_end + p.gamma {
        return Err(Error::Domain(format!(
            "t = {t} beyond the perceived deadline {}",
            p.t_end + p.gamma
        )));
    }
    let gr = p.profile_r.eval(x);
    let gl = p.profile_l.eval(x);
    let exponent = p.c_r * gr + p.c_l * gl;
    let rho_total = latent.eval(x);
    if exponent == 0.0 {
        return Ok(0.0);
    }
    let rho_deadline = p.c_r * gr * rho_total / exponent;
    // Before t0 the rates are frozen at their t0 denominators, so the
    // pre-deadline solution has the same equilibrium rho_deadline.
    let den0 = p.gamma + p.t_end - p.t0;
    let rho_0 = rho_deadline * (1.0 - (-exponent * p.t0 / den0).exp());
    let u = (p.gamma + p.t_end - t) / den0;
    Ok(rho_deadline - (rho_deadline - rho_0) * u.powf(exponent))
}

/// Diffusion coefficients for the revealed and latent books.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionSchedule {
    Zero,
    Constant { d_r: f64, d_l: f64 },
    /// Revealed coefficient `d_0` up to 1 s, decaying as a power law with
    /// exponent -1 down to `d_t` at the saturation time `t_s`, constant
    /// afterwards. Latent coefficient constant `d_l`.
    TimeVarying { d_0: f64, d_t: f64, t_s: f64, d_l: f64 },
}

impl DiffusionSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffusionSchedule::Zero => Ok(()),
            DiffusionSchedule::Constant { d_r, d_l } => {
                if d_r >= 0.0 && d_l >= 0.0 && d_r.is_finite() && d_l.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("d_r = {d_r}, d_l = {d_l}: need >= 0")))
                }
            }
            DiffusionSchedule::TimeVarying { d_0, d_t, t_s, d_l } => {
                if !(d_0 >= 0.0 && d_t >= 0.0 && d_l >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "d_0 = {d_0}, d_t = {d_t}, d_l = {d_l}: need >= 0"
                    )));
                }
                if !(d_t <= d_0) {
                    return Err(Error::InvalidParameter(format!("d_t = {d_t} > d_0 = {d_0}")));
                }
                if !(t_s > 1.0) {
                    return Err(Error::InvalidParameter(format!("t_s = {t_s}, need > 1")));
                }
                Ok(())
            }
        }
    }

    /// Revealed-book coefficient `D_r(t)`.
    #[inline]
    pub fn revealed(&self, t: f64) -> f64 {
        match *self {
            DiffusionSchedule::Zero => 0.0,
            DiffusionSchedule::Constant { d_r, .. } => d_r,
            DiffusionSchedule::TimeVarying { d_0, d_t, t_s, .. } => {
                if t <= 1.0 {
                    d_0
                } else if t >= t_s {
                    d_t
                } else {
                    (d_t - d_0) * (t.recip() - 1.0) / (t_s.recip() - 1.0) + d_0
                }
            }
        }
    }

    /// Latent-book coefficient `D_l` (time-constant in every variant).
    #[inline]
    pub fn latent(&self) -> f64 {
        match *self {
            DiffusionSchedule::Zero => 0.0,
            DiffusionSchedule::Constant { d_l, .. } => d_l,
            DiffusionSchedule::TimeVarying { d_l, .. } => d_l,
        }
    }

    /// Largest revealed/latent coefficient over `t > 0`, for stability checks.
    pub fn max_coefficient(&self) -> f64 {
        match *self {
            DiffusionSchedule::Zero => 0.0,
            DiffusionSchedule::Constant { d_r, d_l } => d_r.max(d_l),
            DiffusionSchedule::TimeVarying { d_0, d_l, .. } => d_0.max(d_l),
        }
    }
}

/// Revealed diffusion coefficient `D_r(t)`; the schedule starts at `t = 0+`.
#[inline]
pub fn eval_diffusion_schedule(t: f64, d: &DiffusionSchedule) -> f64 {
    d.revealed(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn table2_submission() -> SubmissionRateParams {
        SubmissionRateParams::new(0.93, 2.3e-3, 4.9, 0.87, 3.1, 210.0, 3.2e-3, 0.016, 300.0)
            .unwrap()
    }

    #[test]
    fn latent_initial_values() {
        let p = LatentBookParams::new(1.0, 0.01).unwrap();
        assert_eq!(eval_latent_initial(0.0, &p), 0.01);
        let p = LatentBookParams::new(3.0, 0.2).unwrap();
        assert_eq!(eval_latent_initial(-5.0, &p), 0.2);
        // High-precision evaluation at TotalEnergies-like parameters.
        let p = LatentBookParams::new(6.77, 0.0058).unwrap();
        assert_abs_diff_eq!(eval_latent_initial(0.01, &p), 0.0735, epsilon = 1e-6);
    }

    #[test]
    fn latent_rejects_bad_params() {
        assert!(LatentBookParams::new(0.0, 0.1).is_err());
        assert!(LatentBookParams::new(-1.0, 0.1).is_err());
        assert!(LatentBookParams::new(1.0, -0.1).is_err());
    }

    #[test]
    fn submission_rate_at_origin_and_activation() {
        let p = table2_submission();
        // At x = 0, t = t_r0 both denominators coincide.
        let expect = p.c_r / (p.gamma_r + p.t_end - p.t_r0);
        assert_relative_eq!(p.eval_unchecked(0.0, p.t_r0), expect, max_relative = 1e-14);
        // At x = -x_0 the rate equals the plateau at every time.
        for &t in &[0.0, 100.0, 210.0, 299.0, 300.0] {
            assert_relative_eq!(
                p.eval_unchecked(-p.x_0, t),
                p.m * p.c_r / p.gamma_r,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn submission_rate_matches_independent_evaluation() {
        let p = table2_submission();
        let (x, t) = (0.003, 100.0);
        // Independent evaluation of the x >= 0 branch, written out directly.
        let frozen = 3.1 + 300.0 - 210.0;
        let expected = 0.87 * 0.93 / frozen * (-0.003f64 / 2.3e-3).exp()
            + 0.13 * 0.93 / frozen * (-0.003f64 / (4.9 * 2.3e-3)).exp();
        let got = eval_submission_rate(x, t, &p).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn submission_rate_time_domain() {
        let p = table2_submission();
        assert!(eval_submission_rate(0.0, -1.0, &p).is_err());
        assert!(eval_submission_rate(0.0, 301.0, &p).is_err());
        assert!(eval_submission_rate(0.0, 300.0, &p).is_ok());
    }

    #[test]
    fn submission_rate_continuity() {
        let p = table2_submission();
        for &t in &[0.0, 55.0, 210.0, 250.0, 300.0] {
            let at0 = p.eval_unchecked(0.0, t);
            let left0 = p.eval_unchecked(-1e-13, t);
            assert_relative_eq!(left0, at0, max_relative = 1e-9);
            let at_knee = p.eval_unchecked(-p.x_0, t);
            let below = p.eval_unchecked(-p.x_0 - 1e-13, t);
            assert_relative_eq!(below, at_knee, max_relative = 1e-9);
        }
    }

    #[test]
    fn submission_rate_monotone_after_activation() {
        let p = table2_submission();
        for &x in &[0.0, 0.001, 0.01] {
            let mut prev = p.eval_unchecked(x, p.t_r0);
            let mut t = p.t_r0;
            while t < p.t_end {
                t += 1.0;
                let v = p.eval_unchecked(x, t.min(p.t_end));
                assert!(v >= prev - 1e-15, "rate decreased at x={x}, t={t}");
                prev = v;
            }
        }
    }

    #[test]
    fn submission_rate_nonnegative_everywhere() {
        let p = table2_submission();
        let mut x = -0.06;
        while x <= 0.06 {
            for &t in &[0.0, 150.0, 280.0, 300.0] {
                assert!(p.eval_unchecked(x, t) >= 0.0);
            }
            x += 1e-3;
        }
    }

    #[test]
    fn cancellation_rate_variants() {
        let c = CancellationRate::Constant { nu_l: 0.023 };
        assert_eq!(eval_cancellation_rate(0.5, 10.0, &c).unwrap(), 0.023);
        assert_eq!(eval_cancellation_rate(-0.5, 299.0, &c).unwrap(), 0.023);

        let d = CancellationRate::Deadline {
            c_l: 2.38,
            gamma_l: 16.0,
            t_l0: 202.0,
            t_end: 300.0,
            profile: PriceProfile::One,
        };
        // At t = t_end the denominator reduces to gamma_l.
        assert_relative_eq!(
            eval_cancellation_rate(0.0, 300.0, &d).unwrap(),
            2.38 / 16.0,
            max_relative = 1e-14
        );
        // Constant before activation.
        let at_t0 = eval_cancellation_rate(0.0, 202.0, &d).unwrap();
        assert_eq!(eval_cancellation_rate(0.0, 0.0, &d).unwrap(), at_t0);
        assert!(eval_cancellation_rate(0.0, 301.0, &d).is_err());
    }

    #[test]
    fn stationary_revealed_values() {
        let f = StationaryFitParams::new(6.77, 0.0058, 0.003, 5.1, 0.969).unwrap();
        // Weights sum to one at x = 0.
        assert_relative_eq!(eval_stationary_revealed(0.0, &f), 0.0058, max_relative = 1e-14);
        let expected = 0.02611 * (0.969 * (-1.0f64).exp() + 0.031 * (-1.0f64 / 5.1).exp());
        assert_abs_diff_eq!(eval_stationary_revealed(0.003, &f), expected, epsilon = 1e-8);
        // Flat latent branch times a decaying exponential vanishes far below.
        assert!(eval_stationary_revealed(-5.0, &f) < 1e-300);
    }

    #[test]
    fn time_independent_dynamic_limits() {
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent {
                nu_r: 0.01,
                profile: PriceProfile::Exp { scale: 0.003 },
            },
            cancellation: CancellationRate::Constant { nu_l: 0.023 },
        };
        for &x in &[-0.01, 0.0, 0.004, 0.02] {
            assert_eq!(eval_time_independent_dynamic(x, 0.0, &rates, &latent).unwrap(), 0.0);
            let s = rates.submission_at(x, 0.0);
            let c = rates.cancellation_at(x, 0.0);
            let rho_inf = s * latent.eval(x) / (s + c);
            let v = eval_time_independent_dynamic(x, 1e9, &rates, &latent).unwrap();
            assert_relative_eq!(v, rho_inf, max_relative = 1e-12);
        }
    }

    #[test]
    fn time_independent_dynamic_small_rate_asymptote() {
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        // Choose (x, t) so that (s + c) * t = 1e-4.
        let nu_r = 1e-6;
        let nu_l = 0.0;
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent { nu_r, profile: PriceProfile::One },
            cancellation: CancellationRate::Constant { nu_l },
        };
        let t = 1e-4 / nu_r;
        let x = 0.01;
        let asymptote = nu_r * latent.eval(x) * t;
        let v = eval_time_independent_dynamic(x, t, &rates, &latent).unwrap();
        assert_relative_eq!(v, asymptote, max_relative = 1e-4);
    }

    #[test]
    fn time_independent_dynamic_zero_rates() {
        let latent = LatentBookParams::new(1.0, 0.0).unwrap();
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent { nu_r: 0.0, profile: PriceProfile::One },
            cancellation: CancellationRate::Constant { nu_l: 0.0 },
        };
        assert_eq!(eval_time_independent_dynamic(1.0, 5.0, &rates, &latent).unwrap(), 0.0);
    }

    #[test]
    fn time_independent_dynamic_bounded_by_equilibrium() {
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent {
                nu_r: 0.01,
                profile: PriceProfile::Exp { scale: 0.003 },
            },
            cancellation: CancellationRate::Constant { nu_l: 0.023 },
        };
        let mut x = -0.05;
        while x <= 0.05 {
            let s = rates.submission_at(x, 0.0);
            let c = rates.cancellation_at(x, 0.0);
            let rho_inf = s * latent.eval(x) / (s + c);
            let mut t = 0.0;
            while t <= 600.0 {
                let v = eval_time_independent_dynamic(x, t, &rates, &latent).unwrap();
                assert!(v >= 0.0 && v <= rho_inf * (1.0 + 1e-12));
                t += 37.0;
            }
            x += 0.005;
        }
    }

    #[test]
    fn deadline_solution_endpoints() {
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
        p.validate().unwrap();
        let x = 0.002;
        let rho_total = latent.eval(x);
        let rho_deadline = 0.4 * rho_total / 0.8;
        let rho_0 = rho_deadline * (1.0 - (-0.8f64 * 150.0 / 160.0).exp());
        assert_relative_eq!(
            eval_deadline_solution(x, 150.0, &p, &latent).unwrap(),
            rho_0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            eval_deadline_solution(x, 310.0, &p, &latent).unwrap(),
            rho_deadline,
            max_relative = 1e-13
        );
        assert!(eval_deadline_solution(x, 149.0, &p, &latent).is_err());
        assert!(eval_deadline_solution(x, 311.0, &p, &latent).is_err());
    }

    #[test]
    fn deadline_solution_convex_below_unit_exponent() {
        // Second differences on a grid; exponent C_r + C_l < 1.
        let latent = LatentBookParams::new(2.0, 0.01).unwrap();
        let p = DeadlineSolutionParams {
            c_r: 0.3,
            c_l: 0.4,
            gamma: 5.0,
            t0: 100.0,
            t_end: 300.0,
            profile_r: PriceProfile::One,
            profile_l: PriceProfile::One,
        };
        let x = 0.001;
        let n = 200;
        let h = (p.t_end + p.gamma - p.t0) / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| eval_deadline_solution(x, p.t0 + i as f64 * h, &p, &latent).unwrap())
            .collect();
        for i in 1..n {
            let second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            assert!(second >= -1e-12, "not convex at i = {i}: {second}");
        }
    }

    #[test]
    fn stationary_matches_long_time_limit_single_exponential() {
        // With one exponential (w = 1) and a constant cancellation profile,
        // the t -> inf limit of the dynamic solution matches the ansatz.
        let latent = LatentBookParams::new(6.77, 0.0058).unwrap();
        let (nu_r, nu_l, x_r) = (0.012, 0.023, 0.003);
        let rates = RateModel {
            submission: SubmissionRate::TimeIndependent {
                nu_r,
                profile: PriceProfile::Exp { scale: x_r },
            },
            cancellation: CancellationRate::Constant { nu_l },
        };
        let fit = StationaryFitParams::new(
            nu_r / nu_l * 6.77,
            nu_r / nu_l * 0.0058,
            x_r,
            1.0,
            1.0,
        )
        .unwrap();
        let mut x = -0.02;
        while x <= 0.02 {
            let ansatz = eval_stationary_revealed(x, &fit);
            let s = rates.submission_at(x, 0.0);
            let c = nu_l;
            let limit = eval_time_independent_dynamic(x, 1e12, &rates, &latent).unwrap();
            // The ansatz equals s/(c) * rho_total, the limit s/(s+c) * rho_total;
            // they agree only where s << c, so compare the exact expressions.
            let expected = s * latent.eval(x) / (s + c);
            assert_relative_eq!(limit, expected, max_relative = 1e-12);
            // Ansatz consistency: nu_r/nu_l * Gamma_r * rho_total.
            assert_relative_eq!(
                ansatz,
                nu_r / nu_l * (-x.abs() / x_r).exp() * latent.eval(x),
                max_relative = 1e-12
            );
            x += 0.004;
        }
    }

    #[test]
    fn diffusion_schedule_values() {
        let d = DiffusionSchedule::TimeVarying { d_0: 1.2e-5, d_t: 2.2e-8, t_s: 180.0, d_l: 4.8e-9 };
        d.validate().unwrap();
        assert_eq!(eval_diffusion_schedule(0.5, &d), 1.2e-5);
        assert_eq!(eval_diffusion_schedule(200.0, &d), 2.2e-8);
        let v = eval_diffusion_schedule(2.0, &d);
        assert_relative_eq!(v, 5.98e-6, max_relative = 0.01);
        // Monotone non-increasing between 1 and t_s.
        let mut prev = eval_diffusion_schedule(1.0, &d);
        let mut t = 1.0;
        while t < 180.0 {
            t += 0.5;
            let v = eval_diffusion_schedule(t, &d);
            assert!(v <= prev + 1e-20);
            prev = v;
        }
        assert_eq!(d.latent(), 4.8e-9);
        assert!(DiffusionSchedule::TimeVarying { d_0: 1e-9, d_t: 1e-5, t_s: 180.0, d_l: 0.0 }
            .validate()
            .is_err());
    }
}
