//! Deterministic replay of a tick stream: book state, running indicative
//! price, and per-event context for the rate estimators.

use super::book::{indicative_price, OrderBookState};
use super::{EventKind, Side, TickEvent, TickStream};
use crate::error::{Error, Result};

/// Static context a stream does not carry itself.
#[derive(Debug, Clone, Copy)]
pub struct ReplayConfig {
    pub tick_size: f64,
    /// Indicative price before any crossing exists.
    pub ref_ticks: i64,
    pub mo_buy: u64,
    pub mo_sell: u64,
}

impl ReplayConfig {
    pub fn new(tick_size: f64, ref_ticks: i64) -> Self {
        Self { tick_size, ref_ticks, mo_buy: 0, mo_sell: 0 }
    }
}

/// One applied event enriched with the state it saw.
#[derive(Debug, Clone, Copy)]
pub struct ReplayedEvent {
    pub t: f64,
    pub kind: EventKind,
    pub side: Side,
    pub agent_class: super::AgentClass,
    pub price_ticks: i64,
    pub new_price_ticks: Option<i64>,
    pub qty: u64,
    /// Centered log-price of the event's level just before the event.
    pub x_pre: f64,
    /// Destination log-price just after the event (UPDATE only).
    pub y_post: Option<f64>,
    /// Same-side resting volume at the event's level before the event.
    pub level_volume_pre: u64,
    pub ind_pre_ticks: i64,
    pub ind_post_ticks: i64,
}

/// Event-by-event replay with the clearing rule applied after each event.
pub struct Replay<'a> {
    events: &'a [TickEvent],
    next: usize,
    pub book: OrderBookState,
    pub ind_ticks: i64,
}

impl<'a> Replay<'a> {
    pub fn new(stream: &'a TickStream, cfg: &ReplayConfig) -> Result<Self> {
        stream.check_sorted()?;
        let mut book = OrderBookState::new(cfg.tick_size, cfg.ref_ticks);
        book.mo_buy = cfg.mo_buy;
        book.mo_sell = cfg.mo_sell;
        Ok(Self { events: &stream.events, next: 0, book, ind_ticks: cfg.ref_ticks })
    }

    /// Timestamp of the next unapplied event.
    pub fn t_next(&self) -> Option<f64> {
        self.events.get(self.next).map(|e| e.t())
    }

    /// Apply the next event and return it with its pre-event context.
    pub fn step(&mut self) -> Option<Result<ReplayedEvent>> {
        let ev = *self.events.get(self.next)?;
        self.next += 1;
        Some(self.apply(ev))
    }

    fn apply(&mut self, ev: TickEvent) -> Result<ReplayedEvent> {
        let ind_pre = self.ind_ticks;
        let x_pre = (ev.price_ticks as f64 / ind_pre as f64).ln();
        let level_volume_pre = self.book.level_volume(ev.price_ticks, ev.side);
        self.book.apply(&ev)?;
        self.ind_ticks = match indicative_price(&self.book) {
            Ok(r) => r.price_ticks,
            Err(_) => self.ind_ticks,
        };
        let y_post = ev
            .new_price_ticks
            .map(|np| (np as f64 / self.ind_ticks as f64).ln());
        Ok(ReplayedEvent {
            t: ev.t(),
            kind: ev.kind,
            side: ev.side,
            agent_class: ev.agent_class,
            price_ticks: ev.price_ticks,
            new_price_ticks: ev.new_price_ticks,
            qty: ev.qty,
            x_pre,
            y_post,
            level_volume_pre,
            ind_pre_ticks: ind_pre,
            ind_post_ticks: self.ind_ticks,
        })
    }

    /// Apply every event with timestamp `<= t` (seconds).
    pub fn advance_until(&mut self, t: f64) -> Result<()> {
        while let Some(tn) = self.t_next() {
            if tn > t {
                break;
            }
            self.step().expect("event exists")?;
        }
        Ok(())
    }
}

/// One snapshot record: revealed density in the indicative-price frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub t: f64,
    /// Bucket center in centered log-price.
    pub x: f64,
    /// Resting volume scaled by `1 / (dx * q_a)`.
    pub density: f64,
}

/// Replay the stream and emit the revealed density of `side` at each of
/// `times`, bucketed at width `dx` around the running indicative price.
/// Buckets with no volume are omitted (density zero).
///
/// `q_a` is the final auction volume used for scaling; when `None` it is
/// taken from clearing the final book, which errors if nothing crosses.
pub fn snapshot_stream(
    stream: &TickStream,
    cfg: &ReplayConfig,
    times: &[f64],
    dx: f64,
    q_a: Option<f64>,
    side: Side,
) -> Result<Vec<SnapshotRow>> {
    if !(dx > 0.0) {
        return Err(Error::Config(format!("bucket width dx = {dx}, need > 0")));
    }
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Config("snapshot times must be sorted".into()));
        }
    }
    let q_a = match q_a {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(Error::Config(format!("q_a = {v}, need > 0"))),
        None => {
            let mut replay = Replay::new(stream, cfg)?;
            replay.advance_until(f64::INFINITY)?;
            indicative_price(&replay.book)?.matched_volume as f64
        }
    };

    let mut replay = Replay::new(stream, cfg)?;
    let mut out = Vec::new();
    for &t in times {
        replay.advance_until(t)?;
        let ind = replay.ind_ticks as f64;
        let mut buckets: std::collections::BTreeMap<i64, u64> = std::collections::BTreeMap::new();
        for (&price, level) in &replay.book.levels {
            let vol = match side {
                Side::Sell => level.sell,
                Side::Buy => level.buy,
            };
            if vol == 0 {
                continue;
            }
            let x = (price as f64 / ind).ln();
            let idx = (x / dx).floor() as i64;
            *buckets.entry(idx).or_insert(0) += vol;
        }
        for (idx, vol) in buckets {
            out.push(SnapshotRow {
                t,
                x: (idx as f64 + 0.5) * dx,
                density: vol as f64 / (dx * q_a),
            });
        }
    }
    Ok(out)
}

/// Indicative price (in ticks) sampled every `step` seconds on
/// `0, step, 2*step, ..., t_max`.
pub fn indicative_series(
    stream: &TickStream,
    cfg: &ReplayConfig,
    step: f64,
    t_max: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t_max >= 0.0) {
        return Err(Error::Config(format!("step = {step}, t_max = {t_max}")));
    }
    let mut replay = Replay::new(stream, cfg)?;
    let n = (t_max / step).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * step;
        replay.advance_until(t)?;
        out.push(replay.ind_ticks as f64);
    }
    Ok(out)
}
