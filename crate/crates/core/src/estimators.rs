//! Tick-level estimators for the cancellation, submission, and price-update
//! rates, the submission/cancellation count ratio, realized volatility, and
//! the deadline-law change-point fit.
//!
//! Events are aggregated over time bins of `dt_bin` seconds and log-price
//! buckets of width `dx` around the running indicative price. Price-update
//! (UPDATE) events are diffusion and are excluded from the cancellation and
//! submission estimators.

use crate::auction::{EventKind, Replay, ReplayConfig, Side, TickStream};
use crate::error::{Error, Result};
use crate::model::LatentBookParams;

/// Binning and filtering choices shared by the estimators.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig {
    /// Log-price bucket width; 2 basis points by default.
    pub dx: f64,
    /// Time bin length in seconds.
    pub dt_bin: f64,
    /// Price window `[x_lo, x_hi)` around the indicative price.
    pub x_window: (f64, f64),
    /// End of the estimation window (the auction deadline).
    pub t_end: f64,
    pub side: Side,
    pub agent_filter: Option<crate::auction::AgentClass>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            dx: 2e-4,
            dt_bin: 2.0,
            x_window: (-0.02, 0.02),
            t_end: 300.0,
            side: Side::Sell,
            agent_filter: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dt_bin > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "dx = {}, dt_bin = {}, t_end = {}: need > 0",
                self.dx, self.dt_bin, self.t_end
            )));
        }
        if !(self.x_window.0 < self.x_window.1) {
            return Err(Error::Config(format!("empty price window {:?}", self.x_window)));
        }
        Ok(())
    }

    fn n_t(&self) -> usize {
        (self.t_end / self.dt_bin).ceil() as usize
    }

    fn n_x(&self) -> usize {
        ((self.x_window.1 - self.x_window.0) / self.dx).round().max(1.0) as usize
    }

    fn x_index(&self, x: f64) -> Option<usize> {
        if x < self.x_window.0 {
            return None;
        }
        let i = ((x - self.x_window.0) / self.dx).floor() as usize;
        (i < self.n_x()).then_some(i)
    }

    fn t_index(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.t_end {
            return None;
        }
        Some(((t / self.dt_bin).floor() as usize).min(self.n_t() - 1))
    }
}

/// Rate values on (time bin, price bucket) cells. `NaN` marks cells where
/// the rate is undefined because no volume rested there during the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrid {
    pub t0: f64,
    pub dt: f64,
    pub x0: f64,
    pub dx: f64,
    pub n_t: usize,
    pub n_x: usize,
    values: Vec<f64>,
}

impl RateGrid {
    pub fn zeros(cfg: &EstimatorConfig) -> Self {
        Self {
            t0: 0.0,
            dt: cfg.dt_bin,
            x0: cfg.x_window.0,
            dx: cfg.dx,
            n_t: cfg.n_t(),
            n_x: cfg.n_x(),
            values: vec![0.0; cfg.n_t() * cfg.n_x()],
        }
    }

    #[inline]
    pub fn get(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.n_x + ix]
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, v: f64) {
        self.values[it * self.n_x + ix] = v;
    }

    #[inline]
    fn add(&mut self, it: usize, ix: usize, v: f64) {
        self.values[it * self.n_x + ix] += v;
    }

    pub fn t_center(&self, it: usize) -> f64 {
        self.t0 + (it as f64 + 0.5) * self.dt
    }

    pub fn x_center(&self, ix: usize) -> f64 {
        self.x0 + (ix as f64 + 0.5) * self.dx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n_t == other.n_t
            && self.n_x == other.n_x
            && (self.t0 - other.t0).abs() < 1e-12
            && (self.x0 - other.x0).abs() < 1e-12
            && (self.dt - other.dt).abs() < 1e-12
            && (self.dx - other.dx).abs() < 1e-12
    }

    /// Mean value of non-NaN cells with bucket center in `[x_lo, x_hi)`,
    /// one point per time bin.
    pub fn band_series(&self, x_lo: f64, x_hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_t);
        for it in 0..self.n_t {
            let mut sum = 0.0;
            let mut n = 0usize;
            for ix in 0..self.n_x {
                let xc = self.x_center(ix);
                if xc < x_lo || xc >= x_hi {
                    continue;
                }
                let v = self.get(it, ix);
                if v.is_finite() {
                    sum += v;
                    n += 1;
                }
            }
            if n > 0 {
                out.push((self.t_center(it), sum / n as f64));
            }
        }
        out
    }
}

/// Cell-wise mean of several grids, ignoring NaN cells.
pub fn average_rate_grids(grids: &[RateGrid]) -> Result<RateGrid> {
    let first = grids.first().ok_or_else(|| Error::InsufficientData("no grids".into()))?;
    for g in grids {
        if !g.same_shape(first) {
            return Err(Error::Config("rate grids have mismatched shapes".into()));
        }
    }
    let mut out = first.clone();
    for i in 0..out.values.len() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for g in grids {
            let v = g.values[i];
            if v.is_finite() {
                sum += v;
                n += 1;
            }
        }
        out.values[i] = if n > 0 { sum / n as f64 } else { f64::NAN };
    }
    Ok(out)
}

/// Scan the book at a bin boundary and mark occupied buckets.
fn mark_occupancy(replay: &Replay, cfg: &EstimatorConfig, occ: &mut [bool], it: usize) {
    let ind = replay.ind_ticks as f64;
    for (&price, level) in &replay.book.levels {
        let vol = match cfg.side {
            Side::Sell => level.sell,
            Side::Buy => level.buy,
        };
        if vol == 0 {
            continue;
        }
        let x = (price as f64 / ind).ln();
        if let Some(ix) = cfg.x_index(x) {
            occ[it * cfg.n_x() + ix] = true;
        }
    }
}

fn accepts(cfg: &EstimatorConfig, side: Side, class: crate::auction::AgentClass) -> bool {
    side == cfg.side && cfg.agent_filter.map_or(true, |f| f == class)
}

/// Cancellation rate per Eq.-(28)-style aggregation: minus the summed
/// relative volume removals per bin, divided by the bin length. UPDATE
/// moves are excluded. Cells whose bucket never held volume during the bin
/// are NaN.
pub fn estimate_cancel_rate(
    stream: &TickStream,
    replay_cfg: &ReplayConfig,
    cfg: &EstimatorConfig,
) -> Result<RateGrid> {
    cfg.validate()?;
    let mut grid = RateGrid::zeros(cfg);
    let n_t = cfg.n_t();
    let n_x = cfg.n_x();
    let mut occ = vec![false; n_t * n_x];
    let mut replay = Replay::new(stream, replay_cfg)?;
    mark_occupancy(&replay, cfg, &mut occ, 0);
    let mut current_bin = 0usize;
    loop {
        let Some(tn) = replay.t_next() else { break };
        if tn > cfg.t_end {
            break;
        }
        let it = cfg.t_index(tn).expect("within window");
        // Mark book occupancy at each bin boundary before the next event.
        while current_bin < it {
            current_bin += 1;
            mark_occupancy(&replay, cfg, &mut occ, current_bin);
        }
        let ev = replay.step().expect("event exists")?;
        if let Some(ix) = cfg.x_index(ev.x_pre) {
            if ev.level_volume_pre > 0 {
                occ[it * n_x + ix] = true;
            }
            if ev.kind == EventKind::Cancel && accepts(cfg, ev.side, ev.agent_class) {
                grid.add(it, ix, ev.qty as f64 / ev.level_volume_pre as f64);
            }
        }
        // Volume created mid-bin makes the bucket defined for this bin.
        if ev.kind == EventKind::Submit && ev.side == cfg.side {
            let x_now = (ev.price_ticks as f64 / replay.ind_ticks as f64).ln();
            if let Some(ix) = cfg.x_index(x_now) {
                occ[it * n_x + ix] = true;
            }
        }
    }
    while current_bin + 1 < n_t {
        current_bin += 1;
        mark_occupancy(&replay, cfg, &mut occ, current_bin);
    }
    for it in 0..grid.n_t {
        for ix in 0..grid.n_x {
            if occ[it * grid.n_x + ix] {
                let v = grid.get(it, ix) / cfg.dt_bin;
                grid.set(it, ix, v);
            } else {
                grid.set(it, ix, f64::NAN);
            }
        }
    }
    Ok(grid)
}

/// Submitted volume flux per Eq.-(29)-style aggregation: summed submitted
/// shares per bin scaled by `1/(dx * q_a * dt_bin)`. UPDATE moves excluded.
pub fn estimate_submit_flux(
    stream: &TickStream,
    replay_cfg: &ReplayConfig,
    cfg: &EstimatorConfig,
    q_a: f64,
) -> Result<RateGrid> {
    cfg.validate()?;
    if !(q_a > 0.0) {
        return Err(Error::Config(format!("q_a = {q_a}, need > 0")));
    }
    let mut grid = RateGrid::zeros(cfg);
    let mut replay = Replay::new(stream, replay_cfg)?;
    while let Some(step) = replay.step() {
        let ev = step?;
        let Some(it) = cfg.t_index(ev.t) else {
            if ev.t > cfg.t_end {
                break;
            }
            continue;
        };
        if ev.kind != EventKind::Submit || !accepts(cfg, ev.side, ev.agent_class) {
            continue;
        }
        if let Some(ix) = cfg.x_index(ev.x_pre) {
            grid.add(it, ix, ev.qty as f64);
        }
    }
    let scale = 1.0 / (cfg.dx * q_a * cfg.dt_bin);
    for v in grid.values.iter_mut() {
        *v *= scale;
    }
    Ok(grid)
}

/// Divide a submitted-volume flux by the latent density to recover the
/// submission rate. Buckets with zero latent density become NaN.
pub fn infer_submission_rate(flux: &RateGrid, latent: &LatentBookParams) -> RateGrid {
    let mut out = flux.clone();
    let mut warned = false;
    for ix in 0..out.n_x {
        let rho = latent.eval(out.x_center(ix));
        for it in 0..out.n_t {
            let v = out.get(it, ix);
            if rho > 0.0 {
                out.set(it, ix, v / rho);
            } else {
                if !warned && v != 0.0 {
                    log::warn!(
                        "latent density vanishes at x = {:.4e}; inferred rate is NaN",
                        out.x_center(ix)
                    );
                    warned = true;
                }
                out.set(it, ix, f64::NAN);
            }
        }
    }
    out
}

/// Price-update rate `Gamma_D(x, y)` (a density in the destination `y`)
/// and the idiosyncratic diffusion term `1/2 sum_y (x-y)^2 Gamma_D dx_y`.
#[derive(Debug, Clone)]
pub struct UpdateRateEstimate {
    pub x0: f64,
    pub dx: f64,
    pub n_x: usize,
    /// Row-major (x bucket, y bucket) rate density, averaged over `[0, t_end]`.
    pub gamma_d: Vec<f64>,
    /// `update_term(x)` per x bucket.
    pub update_term: Vec<f64>,
}

impl UpdateRateEstimate {
    pub fn x_center(&self, ix: usize) -> f64 {
        self.x0 + (ix as f64 + 0.5) * self.dx
    }

    pub fn gamma(&self, ix: usize, iy: usize) -> f64 {
        self.gamma_d[ix * self.n_x + iy]
    }

    /// Median update term over buckets with `|x| <= band`.
    pub fn typical_update_term(&self, band: f64) -> f64 {
        let mut vals: Vec<f64> = (0..self.n_x)
            .filter(|&ix| self.x_center(ix).abs() <= band)
            .map(|ix| self.update_term[ix])
            .collect();
        if vals.is_empty() {
            return f64::NAN;
        }
        vals.sort_by(f64::total_cmp);
        vals[vals.len() / 2]
    }
}

/// Estimate the price-update kernel from UPDATE events.
pub fn estimate_update_rate(
    stream: &TickStream,
    replay_cfg: &ReplayConfig,
    cfg: &EstimatorConfig,
) -> Result<UpdateRateEstimate> {
    cfg.validate()?;
    let n_x = cfg.n_x();
    let mut gamma = vec![0.0f64; n_x * n_x];
    let mut replay = Replay::new(stream, replay_cfg)?;
    while let Some(step) = replay.step() {
        let ev = step?;
        if ev.t > cfg.t_end {
            break;
        }
        if ev.kind != EventKind::Update || !accepts(cfg, ev.side, ev.agent_class) {
            continue;
        }
        let (Some(ix), Some(iy)) = (
            cfg.x_index(ev.x_pre),
            ev.y_post.and_then(|y| cfg.x_index(y)),
        ) else {
            continue;
        };
        if ev.level_volume_pre > 0 {
            gamma[ix * n_x + iy] += ev.qty as f64 / ev.level_volume_pre as f64;
        }
    }
    // Average over the window and convert counts into a density in y.
    let scale = 1.0 / (cfg.t_end * cfg.dx);
    for g in gamma.iter_mut() {
        *g *= scale;
    }
    let mut update_term = vec![0.0f64; n_x];
    let est = UpdateRateEstimate { x0: cfg.x_window.0, dx: cfg.dx, n_x, gamma_d: gamma, update_term: vec![] };
    for ix in 0..n_x {
        let xc = est.x_center(ix);
        let mut acc = 0.0;
        for iy in 0..n_x {
            let yc = est.x_center(iy);
            acc += (xc - yc).powi(2) * est.gamma(ix, iy) * cfg.dx;
        }
        update_term[ix] = 0.5 * acc;
    }
    Ok(UpdateRateEstimate { update_term, ..est })
}

/// Diffusion coefficient decomposition per the latent-book definition:
/// `D = 1/2 Var(beta) sigma^2 + update_term`.
#[derive(Debug, Clone)]
pub struct DiffusionEstimate {
    /// One-second realized volatility of the indicative price.
    pub sigma: f64,
    /// Reaction-heterogeneity prefactor; unit by default.
    pub var_beta: f64,
    /// Typical (median over central buckets) idiosyncratic update term.
    pub update_term_typical: f64,
    pub update_term: Vec<(f64, f64)>,
}

impl DiffusionEstimate {
    pub fn from_parts(sigma: f64, var_beta: f64, updates: &UpdateRateEstimate, band: f64) -> Self {
        Self {
            sigma,
            var_beta,
            update_term_typical: updates.typical_update_term(band),
            update_term: (0..updates.n_x)
                .map(|ix| (updates.x_center(ix), updates.update_term[ix]))
                .collect(),
        }
    }

    /// Total coefficient at a central price.
    pub fn d_total(&self) -> f64 {
        0.5 * self.var_beta * self.sigma * self.sigma + self.update_term_typical.max(0.0)
    }
}

/// Root mean square of one-step log returns of a price series.
pub fn realized_volatility(prices: &[f64]) -> Result<f64> {
    if prices.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 returns, got {}",
            prices.len().saturating_sub(1)
        )));
    }
    let n = prices.len() - 1;
    let mut acc = 0.0;
    for w in prices.windows(2) {
        let r = (w[1] / w[0]).ln();
        acc += r * r;
    }
    Ok((acc / n as f64).sqrt())
}

/// Ratio of SUBMIT to CANCEL event counts with `|x| <= x_band` in the last
/// `window_seconds` before `t_end`. Infinite (with a warning) when no
/// cancellation falls in the window.
pub fn nu_ratio(
    stream: &TickStream,
    replay_cfg: &ReplayConfig,
    window_seconds: f64,
    x_band: f64,
    t_end: f64,
    side: Option<Side>,
) -> Result<f64> {
    if !(window_seconds > 0.0 && x_band > 0.0) {
        return Err(Error::Config(format!(
            "window = {window_seconds}, band = {x_band}: need > 0"
        )));
    }
    let t_start = t_end - window_seconds;
    let mut submits = 0u64;
    let mut cancels = 0u64;
    let mut replay = Replay::new(stream, replay_cfg)?;
    while let Some(step) = replay.step() {
        let ev = step?;
        if ev.t > t_end {
            break;
        }
        if ev.t < t_start || ev.x_pre.abs() > x_band {
            continue;
        }
        if let Some(s) = side {
            if ev.side != s {
                continue;
            }
        }
        match ev.kind {
            EventKind::Submit => submits += 1,
            EventKind::Cancel => cancels += 1,
            EventKind::Update => {}
        }
    }
    if cancels == 0 {
        log::warn!("no cancellations in the ratio window; reporting +inf");
        return Ok(f64::INFINITY);
    }
    Ok(submits as f64 / cancels as f64)
}

/// Which deadline-rate series is being fitted; this fixes the admissible
/// change-point range (cancellations exclude the first minute).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeadlineSeriesKind {
    Cancellation,
    Submission,
}

/// Result of the change-point fit of `C / (gamma + t_end - t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineFit {
    pub c: f64,
    pub gamma: f64,
    pub t0: f64,
    /// Total L1 error at the optimum.
    pub l1_error: f64,
}

/// L1 slope through the origin: minimize `sum_i |r_i - c * u_i|` over `c`,
/// which is the weighted median of `r_i / u_i` with weights `u_i`.
fn l1_slope(rs: &[f64], us: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = rs
        .iter()
        .zip(us)
        .map(|(&r, &u)| (r / u, u))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * pairs.iter().map(|p| p.1).sum::<f64>();
    let mut acc = 0.0;
    for (z, w) in &pairs {
        acc += w;
        if acc >= half {
            return *z;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Post-change L1 error for a given gamma, with the L1-optimal slope.
fn post_fit(ts: &[f64], rs: &[f64], t_end: f64, gamma: f64) -> (f64, f64) {
    let us: Vec<f64> = ts.iter().map(|&t| 1.0 / (gamma + t_end - t)).collect();
    let c = l1_slope(rs, &us);
    let err = rs
        .iter()
        .zip(&us)
        .map(|(&r, &u)| (r - c * u).abs())
        .sum::<f64>();
    (err, c)
}

/// Fit the deadline law to a bucket-averaged rate series by change-point
/// detection: a constant (L1: median) model before `t0`, an L1 linear fit
/// in `1/(gamma + t_end - t)` after it. Candidate change points are the
/// integer seconds in `[60, t_end - 10]` for cancellations and
/// `[0, t_end - 10]` for submissions; candidates with fewer than 10 points
/// after them are skipped. Among candidates within 1% of the minimal error
/// the median one is returned, which stabilizes the selection when the
/// planted transition is smooth.
pub fn fit_deadline_rate(
    series: &[(f64, f64)],
    t_end: f64,
    kind: DeadlineSeriesKind,
) -> Result<DeadlineFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, r)| t.is_finite() && r.is_finite() && *t <= t_end)
        .collect();
    if pts.len() < 12 {
        return Err(Error::InsufficientData(format!(
            "deadline fit needs at least 12 points, got {}",
            pts.len()
        )));
    }
    let lo = match kind {
        DeadlineSeriesKind::Cancellation => 60,
        DeadlineSeriesKind::Submission => 0,
    };
    let hi = (t_end - 10.0).floor() as i64;

    // Log-spaced gamma grid plus zero; each candidate refines the best cell
    // by golden section.
    let mut gammas = vec![0.0];
    let (g_lo, g_hi, n_g) = (0.01f64, 400.0f64, 57);
    for i in 0..=n_g {
        gammas.push(g_lo * (g_hi / g_lo).powf(i as f64 / n_g as f64));
    }

    let mut candidates: Vec<(f64, DeadlineFit)> = Vec::new();
    for t0 in lo..=hi {
        let t0 = t0 as f64;
        let split = pts.partition_point(|&(t, _)| t <= t0);
        let post = &pts[split..];
        if post.len() < 10 {
            continue;
        }
        let pre = &pts[..split];
        let pre_err = if pre.is_empty() {
            0.0
        } else {
            let mut vals: Vec<f64> = pre.iter().map(|p| p.1).collect();
            let m = median(&mut vals);
            pre.iter().map(|p| (p.1 - m).abs()).sum::<f64>()
        };
        let post_t: Vec<f64> = post.iter().map(|p| p.0).collect();
        let post_r: Vec<f64> = post.iter().map(|p| p.1).collect();
        let errs: Vec<f64> = gammas
            .iter()
            .map(|&g| post_fit(&post_t, &post_r, t_end, g).0)
            .collect();
        let best_i = errs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let mut a = gammas[best_i.saturating_sub(1)];
        let mut b = gammas[(best_i + 1).min(gammas.len() - 1)];
        for _ in 0..40 {
            let m1 = a + 0.381966 * (b - a);
            let m2 = a + 0.618034 * (b - a);
            if post_fit(&post_t, &post_r, t_end, m1).0 < post_fit(&post_t, &post_r, t_end, m2).0 {
                b = m2;
            } else {
                a = m1;
            }
        }
        let gamma = 0.5 * (a + b);
        let (post_err, c) = post_fit(&post_t, &post_r, t_end, gamma);
        candidates.push((
            pre_err + post_err,
            DeadlineFit { c, gamma, t0, l1_error: pre_err + post_err },
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InsufficientData(
            "fewer than 10 points after every admissible change point".into(),
        ));
    }
    let min_err = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::INFINITY, f64::min);
    let mut plateau: Vec<&(f64, DeadlineFit)> = candidates
        .iter()
        .filter(|c| c.0 <= min_err * 1.01 + 1e-300)
        .collect();
    plateau.sort_by(|a, b| a.1.t0.total_cmp(&b.1.t0));
    Ok(plateau[plateau.len() / 2].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{AgentClass, TickEvent};
    use approx::assert_relative_eq;

    fn ev(
        ts_us: u64,
        kind: EventKind,
        price: i64,
        qty: u64,
        id: u64,
        new_price: Option<i64>,
    ) -> TickEvent {
        TickEvent {
            ts_us,
            kind,
            side: Side::Sell,
            price_ticks: price,
            qty,
            new_price_ticks: new_price,
            agent_class: AgentClass::Hft,
            order_id: id,
        }
    }

    fn cfg() -> EstimatorConfig {
        EstimatorConfig { t_end: 10.0, ..EstimatorConfig::default() }
    }

    #[test]
    fn single_cancel_rate_value() {
        // One cancel of 50 out of 200 resting in a 2-second bin: 0.125/s.
        let stream = TickStream {
            events: vec![
                ev(0, EventKind::Submit, 9001, 200, 1, None),
                ev(1_000_000, EventKind::Cancel, 9001, 50, 1, None),
            ],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        let grid = estimate_cancel_rate(&stream, &rc, &cfg()).unwrap();
        let x = (9001f64 / 9000f64).ln();
        let ix = cfg().x_index(x).unwrap();
        assert_relative_eq!(grid.get(0, ix), 0.125, max_relative = 1e-12);
        // No cancels later, but volume rests there: zero, not NaN.
        assert_eq!(grid.get(1, ix), 0.0);
    }

    #[test]
    fn empty_bucket_is_nan() {
        let stream = TickStream {
            events: vec![ev(0, EventKind::Submit, 9001, 200, 1, None)],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        let grid = estimate_cancel_rate(&stream, &rc, &cfg()).unwrap();
        // A far bucket never holds volume.
        let ix_far = cfg().x_index(0.01).unwrap();
        assert!(grid.get(0, ix_far).is_nan());
    }

    #[test]
    fn single_submit_flux_value() {
        // delta_v = 30, dx = 2e-4, q_a = 10000, dt = 2 -> 7.5.
        let stream = TickStream {
            events: vec![ev(500_000, EventKind::Submit, 9001, 30, 1, None)],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        let grid = estimate_submit_flux(&stream, &rc, &cfg(), 10_000.0).unwrap();
        let ix = cfg().x_index((9001f64 / 9000f64).ln()).unwrap();
        assert_relative_eq!(grid.get(0, ix), 7.5, max_relative = 1e-12);
        // No submissions elsewhere.
        assert_eq!(grid.get(1, ix), 0.0);
    }

    #[test]
    fn update_events_count_for_neither_cancel_nor_submit() {
        let stream = TickStream {
            events: vec![
                ev(0, EventKind::Submit, 9001, 100, 1, None),
                ev(2_500_000, EventKind::Update, 9001, 100, 1, Some(9005)),
                ev(4_500_000, EventKind::Update, 9005, 100, 1, Some(9001)),
            ],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        let cancel = estimate_cancel_rate(&stream, &rc, &cfg()).unwrap();
        let flux = estimate_submit_flux(&stream, &rc, &cfg(), 100.0).unwrap();
        for it in 1..cancel.n_t {
            for ix in 0..cancel.n_x {
                let c = cancel.get(it, ix);
                assert!(c.is_nan() || c == 0.0);
                assert_eq!(flux.get(it, ix), 0.0);
            }
        }
        // The day's only submit is in bin 0.
        let ix = cfg().x_index((9001f64 / 9000f64).ln()).unwrap();
        assert!(flux.get(0, ix) > 0.0);
    }

    #[test]
    fn update_term_single_move() {
        // All volume moves from x to roughly x + 1e-3 once per 10 s at rate
        // 0.1/s; update_term ~ 0.5 * (1e-3)^2 * 0.1.
        let stream = TickStream {
            events: vec![
                ev(0, EventKind::Submit, 9000, 100, 1, None),
                ev(5_000_000, EventKind::Update, 9000, 100, 1, Some(9009)),
            ],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        let est = estimate_update_rate(&stream, &rc, &cfg()).unwrap();
        let ix = cfg().x_index(0.0).unwrap();
        let dx_move = (9009f64 / 9000f64).ln();
        let expected = 0.5 * dx_move * dx_move * (1.0 / 10.0);
        // Bucketing coarsens the displacement; allow 25%.
        assert_relative_eq!(est.update_term[ix], expected, max_relative = 0.25);
        // No updates elsewhere.
        let no = est.update_term[cfg().x_index(-0.01).unwrap()];
        assert_eq!(no, 0.0);
    }

    #[test]
    fn realized_volatility_values() {
        assert_eq!(realized_volatility(&[10.0, 10.0, 10.0, 10.0]).unwrap(), 0.0);
        let r = 1e-3f64;
        let mut p = vec![100.0];
        for i in 0..10 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let last = *p.last().unwrap();
            p.push(last * (sign * r).exp());
        }
        assert_relative_eq!(realized_volatility(&p).unwrap(), r, max_relative = 1e-12);
        assert!(realized_volatility(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn nu_ratio_counts() {
        let mut events = Vec::new();
        let mut id = 0;
        for i in 0..7 {
            events.push(ev(1_000_000 + i, EventKind::Submit, 9000, 10, id, None));
            id += 1;
        }
        // 5 cancels of earlier orders.
        for i in 0..5 {
            events.push(ev(2_000_000 + i, EventKind::Cancel, 9000, 10, i, None));
        }
        let stream = TickStream { events };
        let rc = ReplayConfig::new(0.005, 9000);
        let r = nu_ratio(&stream, &rc, 10.0, 1e-3, 10.0, None).unwrap();
        assert_relative_eq!(r, 1.4, max_relative = 1e-12);
        // Equal counts give exactly one.
        let r2 = nu_ratio(&stream, &rc, 10.0, 1e-3, 10.0, Some(Side::Sell)).unwrap();
        assert_relative_eq!(r2, 1.4, max_relative = 1e-12);
    }

    #[test]
    fn nu_ratio_without_cancels_is_infinite() {
        let stream = TickStream {
            events: vec![ev(1_000_000, EventKind::Submit, 9000, 10, 1, None)],
        };
        let rc = ReplayConfig::new(0.005, 9000);
        assert!(nu_ratio(&stream, &rc, 10.0, 1e-3, 10.0, None)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn deadline_fit_on_constant_series() {
        let t_end = 300.0;
        let c0 = 0.02;
        let series: Vec<(f64, f64)> = (30..150).map(|i| (i as f64 * 2.0, c0)).collect();
        let fit = fit_deadline_rate(&series, t_end, DeadlineSeriesKind::Cancellation).unwrap();
        // Degenerate change point: the last admissible candidate, with the
        // fitted curve flat at the constant level.
        assert_eq!(fit.t0, 290.0);
        let at_end = fit.c / fit.gamma;
        assert_relative_eq!(at_end, c0, max_relative = 0.05);
    }

    #[test]
    fn deadline_fit_needs_post_points() {
        let series: Vec<(f64, f64)> = (0..5).map(|i| (290.0 + i as f64, 0.01)).collect();
        assert!(fit_deadline_rate(&series, 300.0, DeadlineSeriesKind::Cancellation).is_err());
    }

    #[test]
    fn additivity_over_disjoint_time_bins() {
        // Two pieces whose books do not overlap in time: the estimate on the
        // concatenation equals the bin-wise combination.
        let part1 = vec![
            ev(0, EventKind::Submit, 9001, 100, 1, None),
            ev(1_000_000, EventKind::Cancel, 9001, 100, 1, None),
        ];
        let part2 = vec![
            ev(4_000_000, EventKind::Submit, 9002, 80, 2, None),
            ev(5_000_000, EventKind::Cancel, 9002, 40, 2, None),
        ];
        let rc = ReplayConfig::new(0.005, 9000);
        let c = cfg();
        let mut concat = part1.clone();
        concat.extend(part2.clone());
        let g_all = estimate_cancel_rate(&TickStream { events: concat }, &rc, &c).unwrap();
        let g1 = estimate_cancel_rate(&TickStream { events: part1 }, &rc, &c).unwrap();
        let g2 = estimate_cancel_rate(&TickStream { events: part2 }, &rc, &c).unwrap();
        for it in 0..g_all.n_t {
            for ix in 0..g_all.n_x {
                let a = g_all.get(it, ix);
                let b1 = g1.get(it, ix);
                let b2 = g2.get(it, ix);
                let combined = if b1.is_nan() { b2 } else { b1 };
                assert!(
                    (a.is_nan() && combined.is_nan()) || (a - combined).abs() < 1e-12,
                    "bin {it} bucket {ix}: {a} vs {combined}"
                );
            }
        }
    }

    #[test]
    fn scale_covariance() {
        let events = vec![
            ev(0, EventKind::Submit, 9001, 100, 1, None),
            ev(1_000_000, EventKind::Cancel, 9001, 25, 1, None),
            ev(3_000_000, EventKind::Submit, 9002, 60, 2, None),
        ];
        let rc = ReplayConfig::new(0.005, 9000);
        let c = cfg();
        let scaled: Vec<TickEvent> = events
            .iter()
            .map(|e| TickEvent { qty: e.qty * 7, ..*e })
            .collect();
        // Submit flux with q_a scaled alongside quantities is unchanged.
        let f1 =
            estimate_submit_flux(&TickStream { events: events.clone() }, &rc, &c, 500.0).unwrap();
        let f2 = estimate_submit_flux(&TickStream { events: scaled.clone() }, &rc, &c, 3500.0)
            .unwrap();
        // Cancel rate is scale-free in the volumes.
        let c1 = estimate_cancel_rate(&TickStream { events }, &rc, &c).unwrap();
        let c2 = estimate_cancel_rate(&TickStream { events: scaled }, &rc, &c).unwrap();
        for i in 0..f1.values().len() {
            let (a, b) = (f1.values()[i], f2.values()[i]);
            assert!((a.is_nan() && b.is_nan()) || (a - b).abs() < 1e-12);
            let (a, b) = (c1.values()[i], c2.values()[i]);
            assert!((a.is_nan() && b.is_nan()) || (a - b).abs() < 1e-12);
        }
    }
}
