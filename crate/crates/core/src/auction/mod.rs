//! Synthetic auction order flow, order-book state, and clearing.
//!
//! The book lives on an integer tick grid. Log-prices are always measured
//! against the running indicative price, which is recomputed after every
//! event with the max-matched-volume / min-surplus rule.

mod book;
mod replay;
mod sim;

pub use book::{
    demand, indicative_price, supply, ClearingResult, Level, OrderBookState, SurplusSide,
};
pub use replay::{indicative_series, snapshot_stream, Replay, ReplayConfig, ReplayedEvent, SnapshotRow};
pub use sim::{simulate_flow, SimConfig, SimMode, SimResult, UpdateKernel};

use crate::error::{Error, Result};

/// Order side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "BUY" | "buy" | "B" => Some(Side::Buy),
            "SELL" | "sell" | "S" => Some(Side::Sell),
            _ => None,
        }
    }
}

/// Event kind in a tick stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Submit,
    Cancel,
    Update,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Submit => "SUBMIT",
            EventKind::Cancel => "CANCEL",
            EventKind::Update => "UPDATE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SUBMIT" => Some(EventKind::Submit),
            "CANCEL" => Some(EventKind::Cancel),
            "UPDATE" => Some(EventKind::Update),
            _ => None,
        }
    }
}

/// Latency class carried as a label on events; classification itself is an
/// input, not something this crate computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentClass {
    Hft,
    Mix,
    Non,
}

impl AgentClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentClass::Hft => "HFT",
            AgentClass::Mix => "MIX",
            AgentClass::Non => "NON",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "HFT" => Some(AgentClass::Hft),
            "MIX" => Some(AgentClass::Mix),
            "NON" => Some(AgentClass::Non),
            _ => None,
        }
    }
}

/// One auction event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickEvent {
    /// Microseconds since the start of the accumulation period.
    pub ts_us: u64,
    pub kind: EventKind,
    pub side: Side,
    /// Limit price in ticks.
    pub price_ticks: i64,
    /// Shares; for UPDATE this is the moved quantity (the full order).
    pub qty: u64,
    /// Destination price for UPDATE events, absent otherwise.
    pub new_price_ticks: Option<i64>,
    pub agent_class: AgentClass,
    pub order_id: u64,
}

impl TickEvent {
    pub fn t(&self) -> f64 {
        self.ts_us as f64 * 1e-6
    }

    pub fn validate(&self) -> Result<()> {
        if self.qty == 0 {
            return Err(Error::InvalidParameter(format!(
                "event {} has zero quantity",
                self.order_id
            )));
        }
        match self.kind {
            EventKind::Update => match self.new_price_ticks {
                None => Err(Error::InvalidParameter(format!(
                    "UPDATE {} lacks new_price_ticks",
                    self.order_id
                ))),
                Some(np) if np == self.price_ticks => Err(Error::InvalidParameter(format!(
                    "UPDATE {} does not move the price",
                    self.order_id
                ))),
                Some(_) => Ok(()),
            },
            _ => {
                if self.new_price_ticks.is_some() {
                    Err(Error::InvalidParameter(format!(
                        "{} {} carries new_price_ticks",
                        self.kind.as_str(),
                        self.order_id
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// A time-sorted sequence of auction events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickStream {
    pub events: Vec<TickEvent>,
}

impl TickStream {
    pub fn new(events: Vec<TickEvent>) -> Result<Self> {
        let s = Self { events };
        s.check_sorted()?;
        Ok(s)
    }

    pub fn check_sorted(&self) -> Result<()> {
        for w in self.events.windows(2) {
            if w[1].ts_us < w[0].ts_us {
                return Err(Error::InvalidParameter(format!(
                    "stream not sorted at ts {} -> {}",
                    w[0].ts_us, w[1].ts_us
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
