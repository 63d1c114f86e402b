//! Plain-text file formats.
//!
//! Three families of files cross the CLI boundary:
//!
//! - key-value parameter files: one `name = value` per line, `#` comments;
//! - delimited tables (tick streams, density snapshots, rate grids, price
//!   series, scaling reports): a header line then one record per line,
//!   comma-delimited on output, comma or tab accepted on input;
//! - run manifests echoing the fully resolved configuration.
//!
//! Numeric output is shortest-round-trip scientific notation. Parse errors
//! carry 1-based line and (byte) column positions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::auction::{AgentClass, EventKind, Side, TickEvent, TickStream};
use crate::error::{Error, Result};
use crate::model::{
    CancellationRate, DiffusionSchedule, LatentBookParams, PriceProfile, RateModel,
    StationaryFitParams, SubmissionRate, SubmissionRateParams,
};
use crate::scaling::RegimeReport;
use crate::solver::DensityField;

/// Format a float in shortest round-trip scientific notation.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:e}")
    }
}

fn parse_num(s: &str, line: usize, column: usize) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| Error::parse(line, column, format!("not a number: {t:?}")))
}

// ---------------------------------------------------------------------------
// Key-value parameter files.

/// Ordered `name = value` file with `#` comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String)>,
    index: BTreeMap<String, (usize, usize)>, // key -> (entry idx, line)
}

impl KvFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut out = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some(eq) = raw.find('=') else {
                return Err(Error::parse(line_no, raw.len() + 1, "expected `name = value`"));
            };
            let key = raw[..eq].trim();
            let value = raw[eq + 1..].trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, 1, "empty key"));
            }
            if key.contains(char::is_whitespace) {
                return Err(Error::parse(line_no, 1, format!("key {key:?} contains whitespace")));
            }
            if out.index.contains_key(key) {
                return Err(Error::parse(line_no, 1, format!("duplicate key {key:?}")));
            }
            out.insert_with_line(key, value, line_no);
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    fn insert_with_line(&mut self, key: &str, value: &str, line: usize) {
        self.index.insert(key.to_string(), (self.entries.len(), line));
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.index.get(key) {
            Some(&(idx, _)) => self.entries[idx].1 = value,
            None => self.insert_with_line(key, &value, 0),
        }
    }

    pub fn set_num(&mut self, key: &str, value: f64) {
        self.set(key, fmt_num(value));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.index
            .get(key)
            .map(|&(idx, _)| self.entries[idx].1.as_str())
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn get_opt_str(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&(idx, _)| self.entries[idx].1.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let &(idx, line) = self
            .index
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        parse_num(&self.entries[idx].1, line, 1)
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.contains(key) {
            self.get_f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let &(idx, line) = self
            .index
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))?;
        self.entries[idx]
            .1
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line, 1, format!("not an integer: {:?}", self.entries[idx].1)))
    }

    pub fn to_string_pretty(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_string_pretty())?)
    }
}

// ---------------------------------------------------------------------------
// Model parameter schemas.

fn read_profile(kv: &KvFile, prefix: &str) -> Result<PriceProfile> {
    let kind_key = format!("{prefix}.kind");
    let profile = match kv.get_opt_str(&kind_key) {
        None | Some("one") => PriceProfile::One,
        Some("exp") => PriceProfile::Exp { scale: kv.get_f64(&format!("{prefix}.scale"))? },
        Some("two_exp") => PriceProfile::TwoExp {
            x_r: kv.get_f64(&format!("{prefix}.x_r"))?,
            k: kv.get_f64(&format!("{prefix}.k"))?,
            w: kv.get_f64(&format!("{prefix}.w"))?,
        },
        Some(other) => {
            return Err(Error::Config(format!("unknown profile kind `{other}` for {prefix}")))
        }
    };
    profile.validate()?;
    Ok(profile)
}

fn write_profile(kv: &mut KvFile, prefix: &str, p: &PriceProfile) {
    match p {
        PriceProfile::One => kv.set(format!("{prefix}.kind").as_str(), "one"),
        PriceProfile::Exp { scale } => {
            kv.set(format!("{prefix}.kind").as_str(), "exp");
            kv.set_num(&format!("{prefix}.scale"), *scale);
        }
        PriceProfile::TwoExp { x_r, k, w } => {
            kv.set(format!("{prefix}.kind").as_str(), "two_exp");
            kv.set_num(&format!("{prefix}.x_r"), *x_r);
            kv.set_num(&format!("{prefix}.k"), *k);
            kv.set_num(&format!("{prefix}.w"), *w);
        }
    }
}

pub fn read_latent(kv: &KvFile) -> Result<LatentBookParams> {
    LatentBookParams::new(kv.get_f64("latent.a")?, kv.get_f64("latent.b")?)
}

pub fn write_latent(kv: &mut KvFile, p: &LatentBookParams) {
    kv.set_num("latent.a", p.a);
    kv.set_num("latent.b", p.b);
}

pub fn read_submission(kv: &KvFile, t_end: f64) -> Result<SubmissionRate> {
    let rate = match kv.get_str("submission.kind")? {
        "constant" => SubmissionRate::TimeIndependent {
            nu_r: kv.get_f64("submission.nu_r")?,
            profile: read_profile(kv, "submission.profile")?,
        },
        "deadline" => SubmissionRate::Deadline {
            c_r: kv.get_f64("submission.c_r")?,
            gamma_r: kv.get_f64("submission.gamma_r")?,
            t_r0: kv.get_f64("submission.t_r0")?,
            t_end,
            profile: read_profile(kv, "submission.profile")?,
        },
        "parametric" => SubmissionRate::Parametric(SubmissionRateParams::new(
            kv.get_f64("submission.c_r")?,
            kv.get_f64("submission.x_r")?,
            kv.get_f64("submission.k")?,
            kv.get_f64("submission.w")?,
            kv.get_f64("submission.gamma_r")?,
            kv.get_f64("submission.t_r0")?,
            kv.get_f64("submission.x_0")?,
            kv.get_f64("submission.m")?,
            t_end,
        )?),
        other => return Err(Error::Config(format!("unknown submission.kind `{other}`"))),
    };
    rate.validate()?;
    Ok(rate)
}

pub fn write_submission(kv: &mut KvFile, rate: &SubmissionRate) {
    match rate {
        SubmissionRate::TimeIndependent { nu_r, profile } => {
            kv.set("submission.kind", "constant");
            kv.set_num("submission.nu_r", *nu_r);
            write_profile(kv, "submission.profile", profile);
        }
        SubmissionRate::Deadline { c_r, gamma_r, t_r0, profile, .. } => {
            kv.set("submission.kind", "deadline");
            kv.set_num("submission.c_r", *c_r);
            kv.set_num("submission.gamma_r", *gamma_r);
            kv.set_num("submission.t_r0", *t_r0);
            write_profile(kv, "submission.profile", profile);
        }
        SubmissionRate::Parametric(p) => {
            kv.set("submission.kind", "parametric");
            kv.set_num("submission.c_r", p.c_r);
            kv.set_num("submission.x_r", p.x_r);
            kv.set_num("submission.k", p.k);
            kv.set_num("submission.w", p.w);
            kv.set_num("submission.gamma_r", p.gamma_r);
            kv.set_num("submission.t_r0", p.t_r0);
            kv.set_num("submission.x_0", p.x_0);
            kv.set_num("submission.m", p.m);
        }
    }
}

pub fn read_cancellation(kv: &KvFile, t_end: f64) -> Result<CancellationRate> {
    let rate = match kv.get_str("cancellation.kind")? {
        "constant" => CancellationRate::Constant { nu_l: kv.get_f64("cancellation.nu_l")? },
        "deadline" => CancellationRate::Deadline {
            c_l: kv.get_f64("cancellation.c_l")?,
            gamma_l: kv.get_f64("cancellation.gamma_l")?,
            t_l0: kv.get_f64("cancellation.t_l0")?,
            t_end,
            profile: read_profile(kv, "cancellation.profile")?,
        },
        other => return Err(Error::Config(format!("unknown cancellation.kind `{other}`"))),
    };
    rate.validate()?;
    Ok(rate)
}

pub fn write_cancellation(kv: &mut KvFile, rate: &CancellationRate) {
    match rate {
        CancellationRate::Constant { nu_l } => {
            kv.set("cancellation.kind", "constant");
            kv.set_num("cancellation.nu_l", *nu_l);
        }
        CancellationRate::Deadline { c_l, gamma_l, t_l0, profile, .. } => {
            kv.set("cancellation.kind", "deadline");
            kv.set_num("cancellation.c_l", *c_l);
            kv.set_num("cancellation.gamma_l", *gamma_l);
            kv.set_num("cancellation.t_l0", *t_l0);
            write_profile(kv, "cancellation.profile", profile);
        }
    }
}

pub fn read_diffusion(kv: &KvFile) -> Result<DiffusionSchedule> {
    let d = match kv.get_opt_str("diffusion.kind") {
        None | Some("zero") => DiffusionSchedule::Zero,
        Some("constant") => DiffusionSchedule::Constant {
            d_r: kv.get_f64("diffusion.d_r")?,
            d_l: kv.get_f64("diffusion.d_l")?,
        },
        Some("time") => DiffusionSchedule::TimeVarying {
            d_0: kv.get_f64("diffusion.d_0")?,
            d_t: kv.get_f64("diffusion.d_t")?,
            t_s: kv.get_f64_or("diffusion.t_s", 180.0)?,
            d_l: kv.get_f64("diffusion.d_l")?,
        },
        Some(other) => return Err(Error::Config(format!("unknown diffusion.kind `{other}`"))),
    };
    d.validate()?;
    Ok(d)
}

pub fn write_diffusion(kv: &mut KvFile, d: &DiffusionSchedule) {
    match d {
        DiffusionSchedule::Zero => kv.set("diffusion.kind", "zero"),
        DiffusionSchedule::Constant { d_r, d_l } => {
            kv.set("diffusion.kind", "constant");
            kv.set_num("diffusion.d_r", *d_r);
            kv.set_num("diffusion.d_l", *d_l);
        }
        DiffusionSchedule::TimeVarying { d_0, d_t, t_s, d_l } => {
            kv.set("diffusion.kind", "time");
            kv.set_num("diffusion.d_0", *d_0);
            kv.set_num("diffusion.d_t", *d_t);
            kv.set_num("diffusion.t_s", *t_s);
            kv.set_num("diffusion.d_l", *d_l);
        }
    }
}

pub fn read_rate_model(kv: &KvFile, t_end: f64) -> Result<RateModel> {
    Ok(RateModel {
        submission: read_submission(kv, t_end)?,
        cancellation: read_cancellation(kv, t_end)?,
    })
}

pub fn read_stationary(kv: &KvFile) -> Result<StationaryFitParams> {
    StationaryFitParams::new(
        kv.get_f64("stationary.scaled_a")?,
        kv.get_f64("stationary.scaled_b")?,
        kv.get_f64("stationary.x_r")?,
        kv.get_f64("stationary.k")?,
        kv.get_f64("stationary.w")?,
    )
}

pub fn write_stationary(kv: &mut KvFile, p: &StationaryFitParams) {
    kv.set_num("stationary.scaled_a", p.scaled_a);
    kv.set_num("stationary.scaled_b", p.scaled_b);
    kv.set_num("stationary.x_r", p.x_r);
    kv.set_num("stationary.k", p.k);
    kv.set_num("stationary.w", p.w);
}

// ---------------------------------------------------------------------------
// Delimited tables.

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

fn split_line(line: &str, delim: char) -> Vec<&str> {
    line.split(delim).collect()
}

/// Write a numeric table with a comma-delimited header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = String::with_capacity(rows.len() * 32 + 64);
    let _ = writeln!(s, "{}", header.join(","));
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            s.push_str(&fmt_num(*v));
            first = false;
        }
        s.push('\n');
    }
    Ok(std::fs::write(path, s)?)
}

/// Parse a numeric table; returns the header names and rows. Empty cells
/// and `nan` parse to NaN.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty table"))?;
    let delim = detect_delimiter(header);
    let names: Vec<String> = split_line(header, delim)
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_line(line, delim);
        if cells.len() != names.len() {
            return Err(Error::parse(
                line_no,
                1,
                format!("expected {} cells, found {}", names.len(), cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(cells.len());
        let mut col = 1usize;
        for cell in cells {
            row.push(parse_num(cell, line_no, col)?);
            col += cell.len() + 1;
        }
        rows.push(row);
    }
    Ok((names, rows))
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    parse_table(&std::fs::read_to_string(path)?)
}

/// Write solver snapshots as `t,x,rho_r,rho_l` rows.
pub fn write_density_fields(path: &Path, fields: &[DensityField]) -> Result<()> {
    let mut rows = Vec::new();
    for f in fields {
        for i in 0..f.grid.n {
            rows.push(vec![f.t, f.grid.x(i), f.rho_r[i], f.rho_l[i]]);
        }
    }
    write_table(path, &["t", "x", "rho_r", "rho_l"], &rows)
}

// ---------------------------------------------------------------------------
// Tick streams.

pub const TICK_HEADER: [&str; 8] = [
    "ts_us",
    "kind",
    "side",
    "price_ticks",
    "qty",
    "new_price_ticks",
    "agent_class",
    "order_id",
];

pub fn tick_stream_to_string(stream: &TickStream) -> String {
    let mut s = String::with_capacity(stream.len() * 40 + 80);
    let _ = writeln!(s, "{}", TICK_HEADER.join(","));
    for e in &stream.events {
        let np = e.new_price_ticks.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            e.ts_us,
            e.kind.as_str(),
            e.side.as_str(),
            e.price_ticks,
            e.qty,
            np,
            e.agent_class.as_str(),
            e.order_id
        );
    }
    s
}

pub fn write_tick_stream(path: &Path, stream: &TickStream) -> Result<()> {
    Ok(std::fs::write(path, tick_stream_to_string(stream))?)
}

pub fn parse_tick_stream(text: &str) -> Result<TickStream> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, 1, "empty tick file"))?;
    let delim = detect_delimiter(header);
    let names = split_line(header, delim);
    if names.len() != TICK_HEADER.len() {
        return Err(Error::parse(
            1,
            1,
            format!("expected {} columns, found {}", TICK_HEADER.len(), names.len()),
        ));
    }
    for (want, got) in TICK_HEADER.iter().zip(&names) {
        if !got.trim().eq_ignore_ascii_case(want) {
            return Err(Error::parse(1, 1, format!("expected column `{want}`, found `{got}`")));
        }
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_line(line, delim);
        if cells.len() != TICK_HEADER.len() {
            return Err(Error::parse(
                line_no,
                1,
                format!("expected {} cells, found {}", TICK_HEADER.len(), cells.len()),
            ));
        }
        let col = |k: usize| -> usize { cells[..k].iter().map(|c| c.len() + 1).sum::<usize>() + 1 };
        let ts_us = cells[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line_no, col(0), "bad ts_us"))?;
        let kind = EventKind::parse(cells[1].trim())
            .ok_or_else(|| Error::parse(line_no, col(1), format!("bad kind {:?}", cells[1])))?;
        let side = Side::parse(cells[2].trim())
            .ok_or_else(|| Error::parse(line_no, col(2), format!("bad side {:?}", cells[2])))?;
        let price_ticks = cells[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::parse(line_no, col(3), "bad price_ticks"))?;
        let qty = cells[4]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line_no, col(4), "bad qty"))?;
        let new_price_ticks = {
            let c = cells[5].trim();
            if c.is_empty() {
                None
            } else {
                Some(
                    c.parse::<i64>()
                        .map_err(|_| Error::parse(line_no, col(5), "bad new_price_ticks"))?,
                )
            }
        };
        let agent_class = AgentClass::parse(cells[6].trim())
            .ok_or_else(|| Error::parse(line_no, col(6), format!("bad agent class {:?}", cells[6])))?;
        let order_id = cells[7]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(line_no, col(7), "bad order_id"))?;
        let ev = TickEvent {
            ts_us,
            kind,
            side,
            price_ticks,
            qty,
            new_price_ticks,
            agent_class,
            order_id,
        };
        ev.validate().map_err(|e| Error::parse(line_no, 1, e.to_string()))?;
        events.push(ev);
    }
    TickStream::new(events)
}

pub fn read_tick_stream(path: &Path) -> Result<TickStream> {
    parse_tick_stream(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Price series (one day of 1-second indicative prices).

pub fn write_price_series(path: &Path, prices: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = prices
        .iter()
        .enumerate()
        .map(|(t, &p)| vec![t as f64, p])
        .collect();
    write_table(path, &["t", "price"], &rows)
}

pub fn parse_price_series(text: &str) -> Result<Vec<f64>> {
    let (names, rows) = parse_table(text)?;
    let p_col = names
        .iter()
        .position(|n| n == "price")
        .ok_or_else(|| Error::parse(1, 1, "missing `price` column"))?;
    Ok(rows.iter().map(|r| r[p_col]).collect())
}

pub fn read_price_series(path: &Path) -> Result<Vec<f64>> {
    parse_price_series(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Rate grids and scaling reports.

pub fn write_rate_grid(path: &Path, grid: &crate::estimators::RateGrid) -> Result<()> {
    let mut rows = Vec::with_capacity(grid.n_t * grid.n_x);
    for it in 0..grid.n_t {
        for ix in 0..grid.n_x {
            rows.push(vec![grid.t_center(it), grid.x_center(ix), grid.get(it, ix)]);
        }
    }
    write_table(path, &["t_bin", "x_bucket", "value"], &rows)
}

fn push_exponent(cells: &mut Vec<String>, e: &Option<crate::scaling::ExponentReport>) {
    match e {
        Some(r) => cells.push(fmt_num(r.value)),
        None => cells.push(String::new()),
    }
}

fn push_se_stars(ses: &mut Vec<String>, stars: &mut Vec<String>, e: &Option<crate::scaling::ExponentReport>) {
    match e.as_ref().and_then(|r| r.significance) {
        Some(s) => {
            ses.push(fmt_num(s.se));
            stars.push("*".repeat(s.stars as usize));
        }
        None => {
            ses.push(String::new());
            stars.push(String::new());
        }
    }
}

/// Scaling report table:
/// `regime,stock,H,J,L,M,residual,se_H,se_J,se_L,se_M,stars_H,stars_J,stars_L,stars_M`.
pub fn scaling_report_to_string(stock: &str, reports: &[RegimeReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "regime,stock,H,J,L,M,residual,se_H,se_J,se_L,se_M,stars_H,stars_J,stars_L,stars_M"
    );
    for r in reports {
        let mut cells: Vec<String> = vec![r.regime_index.to_string(), stock.to_string()];
        push_exponent(&mut cells, &r.h);
        push_exponent(&mut cells, &r.j);
        push_exponent(&mut cells, &r.l);
        push_exponent(&mut cells, &r.m);
        cells.push(r.residual.map(fmt_num).unwrap_or_default());
        let mut ses = Vec::new();
        let mut stars = Vec::new();
        for e in [&r.h, &r.j, &r.l, &r.m] {
            push_se_stars(&mut ses, &mut stars, e);
        }
        cells.extend(ses);
        cells.extend(stars);
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_scaling_report(path: &Path, stock: &str, reports: &[RegimeReport]) -> Result<()> {
    Ok(std::fs::write(path, scaling_report_to_string(stock, reports))?)
}

// ---------------------------------------------------------------------------
// Run manifests.

/// Write `<out>.manifest` echoing the resolved configuration. The manifest
/// is itself a key-value file and contains no timestamps, so reruns are
/// byte-identical.
pub fn write_manifest(out_path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut kv = KvFile::new();
    kv.set("version", crate::VERSION);
    for (k, v) in entries {
        kv.set(k, v.clone());
    }
    let path = manifest_path(out_path);
    kv.write(&path)
}

pub fn manifest_path(out_path: &Path) -> std::path::PathBuf {
    let mut os = out_path.as_os_str().to_owned();
    os.push(".manifest");
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{AgentClass, EventKind, Side};

    #[test]
    fn kv_parse_and_diagnostics() {
        let kv = KvFile::parse_str("# comment\nlatent.a = 6.77\n\nlatent.b = 0.0058\n").unwrap();
        assert_eq!(kv.get_f64("latent.a").unwrap(), 6.77);
        assert_eq!(kv.get_f64("latent.b").unwrap(), 0.0058);
        let err = KvFile::parse_str("latent.a 6.77").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }
        let err = KvFile::parse_str("a = 1\nb = x\n").and_then(|kv| kv.get_f64("b")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        assert!(KvFile::parse_str("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut kv = KvFile::new();
        write_latent(&mut kv, &LatentBookParams::new(6.77, 0.0058).unwrap());
        write_diffusion(
            &mut kv,
            &DiffusionSchedule::TimeVarying { d_0: 1.2e-5, d_t: 2.2e-8, t_s: 180.0, d_l: 4.8e-9 },
        );
        let text = kv.to_string_pretty();
        let back = KvFile::parse_str(&text).unwrap();
        let latent = read_latent(&back).unwrap();
        assert_eq!(latent.a, 6.77);
        assert_eq!(latent.b, 0.0058);
        let d = read_diffusion(&back).unwrap();
        assert_eq!(
            d,
            DiffusionSchedule::TimeVarying { d_0: 1.2e-5, d_t: 2.2e-8, t_s: 180.0, d_l: 4.8e-9 }
        );
    }

    #[test]
    fn rate_model_round_trip() {
        let mut kv = KvFile::new();
        let rates = RateModel {
            submission: SubmissionRate::Parametric(
                SubmissionRateParams::new(
                    0.93, 2.3e-3, 4.9, 0.87, 3.1, 210.0, 3.2e-3, 0.016, 300.0,
                )
                .unwrap(),
            ),
            cancellation: CancellationRate::Constant { nu_l: 0.023 },
        };
        write_submission(&mut kv, &rates.submission);
        write_cancellation(&mut kv, &rates.cancellation);
        let back = read_rate_model(&KvFile::parse_str(&kv.to_string_pretty()).unwrap(), 300.0)
            .unwrap();
        assert_eq!(back, rates);
    }

    #[test]
    fn tick_stream_round_trip_and_errors() {
        let stream = TickStream {
            events: vec![
                TickEvent {
                    ts_us: 12,
                    kind: EventKind::Submit,
                    side: Side::Sell,
                    price_ticks: 9001,
                    qty: 5,
                    new_price_ticks: None,
                    agent_class: AgentClass::Hft,
                    order_id: 1,
                },
                TickEvent {
                    ts_us: 99,
                    kind: EventKind::Update,
                    side: Side::Sell,
                    price_ticks: 9001,
                    qty: 5,
                    new_price_ticks: Some(9003),
                    agent_class: AgentClass::Mix,
                    order_id: 1,
                },
            ],
        };
        let text = tick_stream_to_string(&stream);
        let back = parse_tick_stream(&text).unwrap();
        assert_eq!(back, stream);
        // Tab-delimited input is accepted too.
        let tabbed = text.replace(',', "\t");
        assert_eq!(parse_tick_stream(&tabbed).unwrap(), stream);
        // Malformed rows carry line numbers.
        let bad = format!("{}{}", text, "not,a,row\n");
        match parse_tick_stream(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![vec![1.0, 2.5e-3, f64::NAN], vec![2.0, -1.0, 0.5]];
        write_table(&path, &["a", "b", "c"], &rows).unwrap();
        let (names, back) = read_table(&path).unwrap();
        assert_eq!(names, vec!["a", "b", "c"]);
        assert_eq!(back[0][1], 2.5e-3);
        assert!(back[0][2].is_nan());
        assert_eq!(back[1], rows[1]);
    }

    #[test]
    fn price_series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let prices = vec![45.0, 45.005, 44.995];
        write_price_series(&path, &prices).unwrap();
        assert_eq!(read_price_series(&path).unwrap(), prices);
    }
}
