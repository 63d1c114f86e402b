//! Order-book state and the call-auction clearing rule.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{AgentClass, EventKind, Side, TickEvent};
use crate::error::{Error, Result};

/// Volumes and order queue at one price level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Level {
    pub sell: u64,
    pub buy: u64,
    /// Order ids in arrival order.
    pub queue: VecDeque<u64>,
}

impl Level {
    fn volume(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy,
            Side::Sell => self.sell,
        }
    }

    fn is_empty(&self) -> bool {
        self.sell == 0 && self.buy == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestingOrder {
    pub side: Side,
    pub price_ticks: i64,
    pub qty: u64,
    pub agent_class: AgentClass,
}

/// Side holding the surplus at the clearing price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurplusSide {
    Buy,
    Sell,
    None,
}

impl SurplusSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            SurplusSide::Buy => "BUY",
            SurplusSide::Sell => "SELL",
            SurplusSide::None => "NONE",
        }
    }
}

/// Outcome of the clearing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingResult {
    pub price_ticks: i64,
    /// Matched volume `min(S + MO_S, D + MO_B)` at the clearing price.
    pub matched_volume: u64,
    /// Residual imbalance `|S + MO_S - D - MO_B|` at the clearing price.
    pub surplus: u64,
    pub surplus_side: SurplusSide,
}

/// Resting limit-order volumes per price plus auction market-order volume.
///
/// Market orders participate in clearing but are not part of the per-price
/// densities.
#[derive(Debug, Clone)]
pub struct OrderBookState {
    pub levels: BTreeMap<i64, Level>,
    pub orders: HashMap<u64, RestingOrder>,
    pub mo_buy: u64,
    pub mo_sell: u64,
    pub tick_size: f64,
    pub ref_price_ticks: i64,
}

impl OrderBookState {
    pub fn new(tick_size: f64, ref_price_ticks: i64) -> Self {
        Self {
            levels: BTreeMap::new(),
            orders: HashMap::new(),
            mo_buy: 0,
            mo_sell: 0,
            tick_size,
            ref_price_ticks,
        }
    }

    pub fn level_volume(&self, price_ticks: i64, side: Side) -> u64 {
        self.levels.get(&price_ticks).map_or(0, |l| l.volume(side))
    }

    /// Total resting volume on one side.
    pub fn total_volume(&self, side: Side) -> u64 {
        self.levels.values().map(|l| l.volume(side)).sum()
    }

    fn add_volume(&mut self, price_ticks: i64, side: Side, qty: u64) {
        let level = self.levels.entry(price_ticks).or_default();
        match side {
            Side::Buy => level.buy += qty,
            Side::Sell => level.sell += qty,
        }
    }

    fn remove_volume(&mut self, price_ticks: i64, side: Side, qty: u64) -> Result<()> {
        let level = self.levels.get_mut(&price_ticks).ok_or_else(|| {
            Error::InvalidParameter(format!("no volume at price {price_ticks}"))
        })?;
        let v = match side {
            Side::Buy => &mut level.buy,
            Side::Sell => &mut level.sell,
        };
        if *v < qty {
            return Err(Error::InvalidParameter(format!(
                "removing {qty} from {} at price {price_ticks}",
                *v
            )));
        }
        *v -= qty;
        if level.is_empty() {
            self.levels.remove(&price_ticks);
        }
        Ok(())
    }

    /// Apply one event, checking its invariants against the current state.
    pub fn apply(&mut self, ev: &TickEvent) -> Result<()> {
        ev.validate()?;
        match ev.kind {
            EventKind::Submit => {
                if self.orders.contains_key(&ev.order_id) {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate order id {}",
                        ev.order_id
                    )));
                }
                self.orders.insert(
                    ev.order_id,
                    RestingOrder {
                        side: ev.side,
                        price_ticks: ev.price_ticks,
                        qty: ev.qty,
                        agent_class: ev.agent_class,
                    },
                );
                self.add_volume(ev.price_ticks, ev.side, ev.qty);
                self.levels
                    .get_mut(&ev.price_ticks)
                    .expect("level just created")
                    .queue
                    .push_back(ev.order_id);
            }
            EventKind::Cancel => {
                let order = *self.orders.get(&ev.order_id).ok_or_else(|| {
                    Error::InvalidParameter(format!("cancel of unknown order {}", ev.order_id))
                })?;
                if ev.qty > order.qty {
                    return Err(Error::InvalidParameter(format!(
                        "cancel {} exceeds resting {} for order {}",
                        ev.qty, order.qty, ev.order_id
                    )));
                }
                self.remove_volume(order.price_ticks, order.side, ev.qty)?;
                if ev.qty == order.qty {
                    self.orders.remove(&ev.order_id);
                    if let Some(level) = self.levels.get_mut(&order.price_ticks) {
                        level.queue.retain(|&id| id != ev.order_id);
                    }
                } else {
                    self.orders.get_mut(&ev.order_id).expect("present").qty -= ev.qty;
                }
            }
            EventKind::Update => {
                let order = *self.orders.get(&ev.order_id).ok_or_else(|| {
                    Error::InvalidParameter(format!("update of unknown order {}", ev.order_id))
                })?;
                let new_price = ev.new_price_ticks.expect("validated");
                if ev.qty != order.qty {
                    return Err(Error::InvalidParameter(format!(
                        "update must move the full order: {} != {}",
                        ev.qty, order.qty
                    )));
                }
                self.remove_volume(order.price_ticks, order.side, order.qty)?;
                if let Some(level) = self.levels.get_mut(&order.price_ticks) {
                    level.queue.retain(|&id| id != ev.order_id);
                }
                self.add_volume(new_price, order.side, order.qty);
                self.levels
                    .get_mut(&new_price)
                    .expect("level just created")
                    .queue
                    .push_back(ev.order_id);
                self.orders.get_mut(&ev.order_id).expect("present").price_ticks = new_price;
            }
        }
        Ok(())
    }
}

/// Cumulative sell volume at limits `<= p`, excluding market orders.
pub fn supply(book: &OrderBookState, p: i64) -> u64 {
    book.levels.range(..=p).map(|(_, l)| l.sell).sum()
}

/// Cumulative buy volume at limits `>= p`, excluding market orders.
pub fn demand(book: &OrderBookState, p: i64) -> u64 {
    book.levels.range(p..).map(|(_, l)| l.buy).sum()
}

/// Clearing price by the auction rule: among occupied levels, maximize the
/// matched volume `min(S + MO_S, D + MO_B)`, break ties by minimal surplus,
/// then by distance to the reference price, then by the lower price.
pub fn indicative_price(book: &OrderBookState) -> Result<ClearingResult> {
    if book.levels.is_empty() {
        return Err(Error::NoClearing("empty book".into()));
    }
    // Prefix sell volumes ascending and suffix buy volumes descending over
    // the occupied levels.
    let prices: Vec<i64> = book.levels.keys().copied().collect();
    let n = prices.len();
    let mut cum_sell = Vec::with_capacity(n);
    let mut acc = 0u64;
    for p in &prices {
        acc += book.levels[p].sell;
        cum_sell.push(acc);
    }
    let mut cum_buy = vec![0u64; n];
    let mut acc = 0u64;
    for i in (0..n).rev() {
        acc += book.levels[&prices[i]].buy;
        cum_buy[i] = acc;
    }

    let mut best: Option<(ClearingResult, u64, i64)> = None;
    for i in 0..n {
        let s = cum_sell[i] + book.mo_sell;
        let d = cum_buy[i] + book.mo_buy;
        let matched = s.min(d);
        let surplus = s.abs_diff(d);
        let dist = (prices[i] - book.ref_price_ticks).abs();
        let cand = ClearingResult {
            price_ticks: prices[i],
            matched_volume: matched,
            surplus,
            surplus_side: if s > d {
                SurplusSide::Sell
            } else if d > s {
                SurplusSide::Buy
            } else {
                SurplusSide::None
            },
        };
        let better = match &best {
            None => true,
            Some((b, b_dist_key, b_price)) => {
                (cand.matched_volume, std::cmp::Reverse(cand.surplus), std::cmp::Reverse(dist as u64), std::cmp::Reverse(cand.price_ticks))
                    > (b.matched_volume, std::cmp::Reverse(b.surplus), std::cmp::Reverse(*b_dist_key), std::cmp::Reverse(*b_price))
            }
        };
        if better {
            best = Some((cand, dist as u64, cand.price_ticks));
        }
    }
    let (result, _, _) = best.expect("book has levels");
    if result.matched_volume == 0 {
        return Err(Error::NoClearing("no crossing volume".into()));
    }
    Ok(result)
}
