//! Anomalous-scaling exponents of the indicative price.
//!
//! The closing auction is segmented into regimes; within each regime the
//! log indicative price is re-centered at the regime start and four
//! exponents are estimated over an ensemble of days:
//!
//! - Hurst `H` from the time-and-ensemble averaged mean square
//!   displacement, `MSD(tau) ~ tau^(2H)`;
//! - Joseph `J` from the rescaled-range statistic, `<R_t/S_t> ~ t^J`
//!   (long-range dependence);
//! - Moses `M` from the median summed absolute increment,
//!   `median sum |dX| ~ t^(M + 1/2)` (increment non-stationarity);
//! - Noah `L` from the median summed squared increment,
//!   `median sum dX^2 ~ t^(2L + 2M - 1)` (heavy tails).
//!
//! They satisfy `H = J + L + M - 1` for self-affine processes; the report
//! carries the residual rather than forcing it to zero.
//!
//! The raw rescaled-range slope has a strong finite-sample bias at auction
//! lengths (the expected `R/S` of an uncorrelated series is not a pure
//! power law below a few hundred samples), so `J` is corrected by the
//! Anis-Lloyd expectation by default.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Regime boundaries in seconds from the start of the accumulation period.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSegmentation {
    pub boundaries: Vec<f64>,
}

impl RegimeSegmentation {
    /// The default closing-auction segmentation:
    /// 0-30, 30-60, 60-120, 120-240, 240-300 seconds.
    pub fn default_closing() -> Self {
        Self { boundaries: vec![0.0, 30.0, 60.0, 120.0, 240.0, 300.0] }
    }

    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0.0 {
            return Err(Error::Config("segmentation must start at 0".into()));
        }
        for w in boundaries.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("segmentation must be strictly increasing".into()));
            }
        }
        Ok(Self { boundaries })
    }

    pub fn regimes(&self) -> Vec<(f64, f64)> {
        self.boundaries.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Per-day 1-second indicative price series of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceEnsemble {
    days: Vec<Vec<f64>>,
    len: usize,
}

impl PriceEnsemble {
    pub fn new(days: Vec<Vec<f64>>) -> Result<Self> {
        let len = days.first().map_or(0, |d| d.len());
        if len < 2 {
            return Err(Error::InsufficientData("price series too short".into()));
        }
        if days.iter().any(|d| d.len() != len) {
            return Err(Error::Config("price series have unequal lengths".into()));
        }
        if days
            .iter()
            .any(|d| d.iter().any(|p| !p.is_finite() || *p <= 0.0))
        {
            return Err(Error::Config("prices must be positive and finite".into()));
        }
        Ok(Self { days, len })
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Samples per day.
    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn day(&self, d: usize) -> &[f64] {
        &self.days[d]
    }

    /// Ensemble restricted to (possibly repeated) day indices.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            days: idx.iter().map(|&i| self.days[i].clone()).collect(),
            len: self.len,
        }
    }

    /// Re-centered log-price path of one day within a regime:
    /// `X_t = ln(p_(a+t) / p_a)` for `t = 0..=len`.
    fn regime_path(&self, day: usize, regime: (f64, f64)) -> Result<Vec<f64>> {
        let a = regime.0.round() as usize;
        let b = regime.1.round() as usize;
        if b >= self.len || a >= b {
            return Err(Error::Config(format!(
                "regime ({}, {}] outside the sampled series of length {}",
                regime.0, regime.1, self.len
            )));
        }
        let p0 = self.days[day][a];
        Ok((0..=(b - a)).map(|t| (self.days[day][a + t] / p0).ln()).collect())
    }
}

/// Shared estimation options.
#[derive(Debug, Clone, Copy)]
pub struct ScalingConfig {
    /// Leading samples of each log-log fit to drop (regime transient).
    pub skip: usize,
    /// Debias the Joseph slope by the Anis-Lloyd expectation.
    pub anis_lloyd: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { skip: 2, anis_lloyd: true }
    }
}

/// Least-squares slope of `ln y` against `ln x` over positive finite points.
fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        if !(x > 0.0) || !(y > 0.0) || !y.is_finite() {
            continue;
        }
        let (lx, ly) = (x.ln(), y.ln());
        n += 1.0;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    if n < 3.0 {
        return Err(Error::InsufficientData(
            "fewer than 3 usable points for a log-log fit".into(),
        ));
    }
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::InsufficientData("degenerate abscissa in log-log fit".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Hurst exponent from the double-averaged mean square displacement over
/// lags `tau in [1, max(len/4, 8)]`.
pub fn hurst_msd(ensemble: &PriceEnsemble, regime: (f64, f64), cfg: &ScalingConfig) -> Result<f64> {
    let len = (regime.1 - regime.0).round() as usize;
    let tau_max = (len / 4).max(8).min(len.saturating_sub(1));
    if tau_max < 8 {
        return Err(Error::InsufficientData(format!(
            "regime of {len} s leaves fewer than 8 lags"
        )));
    }
    let mut msd = vec![0.0f64; tau_max + 1];
    for d in 0..ensemble.n_days() {
        let x = ensemble.regime_path(d, regime)?;
        for tau in 1..=tau_max {
            let mut acc = 0.0;
            for t in 0..=(len - tau) {
                let diff = x[t + tau] - x[t];
                acc += diff * diff;
            }
            msd[tau] += acc / (len - tau + 1) as f64;
        }
    }
    let n_days = ensemble.n_days() as f64;
    if msd.iter().all(|&v| v == 0.0) {
        return Err(Error::InsufficientData("zero displacement at every lag".into()));
    }
    let slope = loglog_slope(
        (cfg.skip + 1..=tau_max).map(|tau| (tau as f64, msd[tau] / n_days)),
    )?;
    Ok(0.5 * slope)
}

/// Bridge-adjusted range and increment deviation of a re-centered path at
/// its full length: `R_t = max_s [X_s - s/t X_t] - min_s [...]`,
/// `S_t^2 = Z_t / t - (X_t / t)^2`. Returns `None` when `S_t` vanishes.
pub fn rescaled_range(x: &[f64]) -> Option<(f64, f64)> {
    let t = x.len() - 1;
    if t < 1 {
        return None;
    }
    let xt = x[t];
    let mut dev_max = f64::MIN;
    let mut dev_min = f64::MAX;
    let mut z = 0.0;
    for s in 1..=t {
        let dev = x[s] - (s as f64 / t as f64) * xt;
        dev_max = dev_max.max(dev);
        dev_min = dev_min.min(dev);
        let inc = x[s] - x[s - 1];
        z += inc * inc;
    }
    let s2 = z / t as f64 - (xt / t as f64).powi(2);
    if s2 <= 0.0 {
        return None;
    }
    Some((dev_max - dev_min, s2.sqrt()))
}

/// Expected `R_t/S_t` of an uncorrelated Gaussian series (Anis-Lloyd with
/// the usual large-`n` continuation).
pub fn anis_lloyd_expectation(n: usize) -> f64 {
    let nf = n as f64;
    let front = if n <= 340 {
        (ln_gamma((nf - 1.0) / 2.0) - ln_gamma(nf / 2.0)).exp() / std::f64::consts::PI.sqrt()
    } else {
        1.0 / (nf * std::f64::consts::FRAC_PI_2).sqrt()
    };
    let sum: f64 = (1..n).map(|i| ((nf - i as f64) / i as f64).sqrt()).sum();
    front * sum
}

/// Joseph exponent from the scaling of the ensemble-averaged rescaled
/// range. Days with vanishing `S_t` are excluded from that `t`'s average.
pub fn joseph(ensemble: &PriceEnsemble, regime: (f64, f64), cfg: &ScalingConfig) -> Result<f64> {
    let len = (regime.1 - regime.0).round() as usize;
    if len < 16 {
        return Err(Error::InsufficientData(format!(
            "regime of {len} s is too short for the rescaled range"
        )));
    }
    let mut rs_sum = vec![0.0f64; len + 1];
    let mut rs_count = vec![0usize; len + 1];
    let mut skipped = 0usize;
    for d in 0..ensemble.n_days() {
        let x = ensemble.regime_path(d, regime)?;
        for t in 2..=len {
            match rescaled_range(&x[..=t]) {
                Some((r, s)) => {
                    rs_sum[t] += r / s;
                    rs_count[t] += 1;
                }
                None => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        log::warn!("rescaled range undefined on {skipped} (day, t) pairs; excluded");
    }
    let points = (cfg.skip + 1..=len).filter_map(|t| {
        (rs_count[t] > 0).then(|| {
            let mean = rs_sum[t] / rs_count[t] as f64;
            let y = if cfg.anis_lloyd { mean / anis_lloyd_expectation(t) } else { mean };
            (t as f64, y)
        })
    });
    let slope = loglog_slope(points)?;
    Ok(if cfg.anis_lloyd { 0.5 + slope } else { slope })
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn median_curve(
    ensemble: &PriceEnsemble,
    regime: (f64, f64),
    power: i32,
) -> Result<Vec<f64>> {
    let len = (regime.1 - regime.0).round() as usize;
    let n_days = ensemble.n_days();
    if n_days < 30 {
        return Err(Error::InsufficientData(format!(
            "robust exponent estimation needs >= 30 days, got {n_days}"
        )));
    }
    // sums[t][d]: running sum of |dX|^power from the regime origin.
    let mut per_day: Vec<Vec<f64>> = Vec::with_capacity(n_days);
    for d in 0..n_days {
        let x = ensemble.regime_path(d, regime)?;
        let mut acc = 0.0;
        let mut sums = Vec::with_capacity(len);
        for t in 1..=len {
            let inc = (x[t] - x[t - 1]).abs();
            acc += if power == 1 { inc } else { inc * inc };
            sums.push(acc);
        }
        per_day.push(sums);
    }
    Ok((0..len)
        .map(|i| median_of(per_day.iter().map(|s| s[i]).collect()))
        .collect())
}

/// Moses exponent from the median summed absolute increment:
/// `median ~ t^(M + 1/2)`.
pub fn moses(ensemble: &PriceEnsemble, regime: (f64, f64), cfg: &ScalingConfig) -> Result<f64> {
    let med = median_curve(ensemble, regime, 1)?;
    if med.iter().all(|&v| v == 0.0) {
        return Err(Error::InsufficientData("zero increments throughout".into()));
    }
    let slope = loglog_slope(
        med.iter().enumerate().skip(cfg.skip).map(|(i, &v)| ((i + 1) as f64, v)),
    )?;
    Ok(slope - 0.5)
}

/// Noah exponent from the median summed squared increment:
/// `median ~ t^(2L + 2M - 1)`, given the Moses exponent of the same
/// ensemble and regime.
pub fn noah(
    ensemble: &PriceEnsemble,
    regime: (f64, f64),
    m_exponent: f64,
    cfg: &ScalingConfig,
) -> Result<f64> {
    let med = median_curve(ensemble, regime, 2)?;
    if med.iter().all(|&v| v == 0.0) {
        return Err(Error::InsufficientData("zero increments throughout".into()));
    }
    let slope = loglog_slope(
        med.iter().enumerate().skip(cfg.skip).map(|(i, &v)| ((i + 1) as f64, v)),
    )?;
    Ok((slope - 2.0 * m_exponent + 1.0) / 2.0)
}

/// Tail-exponent view of the Noah exponent: Hill estimate of the increment
/// tail index over the pooled ensemble, mapped to `L = max(1/2, 1/gamma)`.
pub fn noah_tail(ensemble: &PriceEnsemble, regime: (f64, f64), tail_fraction: f64) -> Result<f64> {
    let mut incs: Vec<f64> = Vec::new();
    for d in 0..ensemble.n_days() {
        let x = ensemble.regime_path(d, regime)?;
        incs.extend(x.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|v| *v > 0.0));
    }
    if incs.len() < 100 {
        return Err(Error::InsufficientData("too few increments for a tail fit".into()));
    }
    incs.sort_by(|a, b| b.total_cmp(a));
    let k = ((incs.len() as f64 * tail_fraction) as usize).max(10).min(incs.len() - 1);
    let log_k = incs[k].ln();
    let mean_excess = incs[..k].iter().map(|v| v.ln() - log_k).sum::<f64>() / k as f64;
    let gamma = 1.0 / mean_excess;
    Ok((1.0 / gamma).max(0.5))
}

/// Normalized indicative-price trajectory between a reference price and
/// the auction price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpRatioMode {
    /// `J(t) = (p_t - p_ref) / (p_auction - p_ref)`.
    Reference,
    /// `J~(t) = (p_t - p_0) / (p_auction - p_0)`.
    FirstIndicative,
}

pub fn jump_ratio(
    series: &[f64],
    p_ref: f64,
    p_auction: f64,
    mode: JumpRatioMode,
) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InsufficientData("empty price series".into()));
    }
    let anchor = match mode {
        JumpRatioMode::Reference => p_ref,
        JumpRatioMode::FirstIndicative => series[0],
    };
    let denom = p_auction - anchor;
    if denom == 0.0 {
        return Err(Error::Domain("auction price equals the anchor price".into()));
    }
    Ok(series.iter().map(|&p| (p - anchor) / denom).collect())
}

/// Two-sided significance of an exponent estimate against 1/2, using the
/// bootstrap standard error of day-resampled replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Significance {
    pub se: f64,
    pub p_value: f64,
    /// 0 (none), 1 (5%), 2 (1%), 3 (0.1%).
    pub stars: u8,
}

pub fn significance(estimate: f64, replicates: &[f64]) -> Result<Option<Significance>> {
    if replicates.len() < 30 {
        return Err(Error::InsufficientData(format!(
            "need >= 30 bootstrap replicates, got {}",
            replicates.len()
        )));
    }
    let n = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / n;
    let var = replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) || !var.is_finite() {
        return Ok(None);
    }
    let se = var.sqrt();
    let z = (estimate - 0.5) / se;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    use statrs::distribution::ContinuousCDF;
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    let stars = if p <= 0.001 {
        3
    } else if p <= 0.01 {
        2
    } else if p <= 0.05 {
        1
    } else {
        0
    };
    Ok(Some(Significance { se, p_value: p, stars }))
}

/// Day-resampled bootstrap replicates of any ensemble statistic.
pub fn bootstrap_replicates<F>(
    ensemble: &PriceEnsemble,
    n_replicates: usize,
    seed: u64,
    stat: F,
) -> Vec<f64>
where
    F: Fn(&PriceEnsemble) -> Result<f64> + Sync,
{
    let n = ensemble.n_days();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<usize>> = (0..n_replicates)
        .map(|_| (0..n).map(|_| rng.gen_range(0..n)).collect())
        .collect();
    use rayon::prelude::*;
    samples
        .par_iter()
        .filter_map(|idx| stat(&ensemble.subset(idx)).ok())
        .collect()
}

/// One exponent with its bootstrap significance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentReport {
    pub value: f64,
    pub significance: Option<Significance>,
}

/// Per-regime exponent estimates; `H` is omitted in the first regime and
/// `J` in the last one by default (both are not power laws there).
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime_index: usize,
    pub t_range: (f64, f64),
    pub h: Option<ExponentReport>,
    pub j: Option<ExponentReport>,
    pub l: Option<ExponentReport>,
    pub m: Option<ExponentReport>,
    /// `H - (J + L + M - 1)` where all four are present.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportConfig {
    pub scaling: ScalingConfig,
    /// Compute H in the first regime and J in the last despite the defaults.
    pub force_all: bool,
    /// Bootstrap replicates per exponent; 0 disables significance.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { scaling: ScalingConfig::default(), force_all: false, bootstrap: 0, seed: 0 }
    }
}

/// Estimate all exponents for every regime of the segmentation.
pub fn analyze(
    ensemble: &PriceEnsemble,
    segmentation: &RegimeSegmentation,
    cfg: &ReportConfig,
) -> Result<Vec<RegimeReport>> {
    let regimes = segmentation.regimes();
    let last = regimes.len() - 1;
    let mut out = Vec::with_capacity(regimes.len());
    for (i, &regime) in regimes.iter().enumerate() {
        let sc = cfg.scaling;
        let want_h = cfg.force_all || i != 0;
        let want_j = cfg.force_all || i != last;

        let h = if want_h { hurst_msd(ensemble, regime, &sc).ok() } else { None };
        let j = if want_j { joseph(ensemble, regime, &sc).ok() } else { None };
        let m = moses(ensemble, regime, &sc).ok();
        let l = m.and_then(|mv| noah(ensemble, regime, mv, &sc).ok());

        let attach = |value: Option<f64>, which: usize| -> Option<ExponentReport> {
            let value = value?;
            let significance = if cfg.bootstrap > 0 {
                let reps = bootstrap_replicates(
                    ensemble,
                    cfg.bootstrap,
                    cfg.seed ^ ((i as u64) << 8) ^ which as u64,
                    |sub| match which {
                        0 => hurst_msd(sub, regime, &sc),
                        1 => joseph(sub, regime, &sc),
                        2 => moses(sub, regime, &sc),
                        _ => {
                            let mv = moses(sub, regime, &sc)?;
                            noah(sub, regime, mv, &sc)
                        }
                    },
                );
                significance(value, &reps).unwrap_or(None)
            } else {
                None
            };
            Some(ExponentReport { value, significance })
        };

        let h = attach(h, 0);
        let j = attach(j, 1);
        let m_rep = attach(m, 2);
        let l_rep = attach(l, 3);
        let residual = match (&h, &j, &l_rep, &m_rep) {
            (Some(h), Some(j), Some(l), Some(m)) => {
                Some(h.value - (j.value + l.value + m.value - 1.0))
            }
            _ => None,
        };
        out.push(RegimeReport {
            regime_index: i + 1,
            t_range: regime,
            h,
            j,
            l: l_rep,
            m: m_rep,
            residual,
        });
    }
    Ok(out)
}
