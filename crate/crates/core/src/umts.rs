//! NodeB downlink model with saturated cell load.
//!
//! The cell always runs at load `eta_max`, split evenly over `N` mobiles, so
//! the state of the NodeB is the load per user `eta = eta_max / N`. The
//! per-mobile throughput for each `N` comes from a lookup table; the
//! closed-form relations between throughput, SINR and Eb/N0 are provided
//! as calculators and consistency checks.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UmtsParams {
    /// WCDMA chip rate, chips/s.
    pub w: f64,
    /// Average orthogonality factor.
    pub alpha_bar: f64,
    /// Average inter- to intra-cell interference ratio.
    pub i_bar: f64,
    /// Maximum downlink cell load.
    pub eta_max: f64,
    /// Minimum per-mobile throughput, bits/s.
    pub theta_min: f64,
    /// Inverse of the mean file size, 1/bits.
    pub zeta: f64,
    /// Pole capacity (number of table rows in use).
    pub m_3g: usize,
}

impl Default for UmtsParams {
    fn default() -> Self {
        Self {
            w: 3.84e6,
            alpha_bar: 0.9,
            i_bar: 0.7,
            eta_max: 0.9,
            theta_min: 46e3,
            zeta: 1e-6,
            m_3g: 18,
        }
    }
}

impl UmtsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max > 0.0 && self.eta_max <= 1.0) {
            return Err(Error::Config(format!("umts.eta_max must lie in (0, 1], got {}", self.eta_max)));
        }
        if !(self.interference_factor() > 0.0) {
            return Err(Error::Config("umts: 1 - alpha_bar + i_bar must be positive".into()));
        }
        for (name, v) in [("w", self.w), ("theta_min", self.theta_min), ("zeta", self.zeta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("umts.{name} must be positive, got {v}")));
            }
        }
        if self.m_3g == 0 {
            return Err(Error::Config("umts.m_3g must be at least 1".into()));
        }
        Ok(())
    }

    /// `1 - alpha_bar + i_bar`.
    pub fn interference_factor(&self) -> f64 {
        1.0 - self.alpha_bar + self.i_bar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UmtsRow {
    pub eta: f64,
    pub log_eta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub sinr_db: f64,
    pub theta_kbps: f64,
    pub ebno_db: f64,
}

impl UmtsRow {
    pub fn theta_bps(&self) -> f64 {
        self.theta_kbps * 1e3
    }
}

const fn row(eta: f64, log_eta: f64, n: usize, sinr_db: f64, theta_kbps: f64, ebno_db: f64) -> UmtsRow {
    UmtsRow { eta, log_eta, n, sinr_db, theta_kbps, ebno_db }
}

/// Per-mobile throughput against load per user for a fully loaded cell
/// (`eta_max = 0.9`) with fast closed-loop power control.
#[allow(clippy::approx_constant)]
pub const BUILTIN_ROWS: [UmtsRow; 18] = [
    row(0.9, -0.10536, 1, 0.8423, 572.0, 9.0612),
    row(0.45, -0.79851, 2, -2.1804, 465.0, 6.9503),
    row(0.3, -1.204, 3, -3.7341, 405.0, 5.7894),
    row(0.225, -1.4917, 4, -5.1034, 360.0, 5.0515),
    row(0.18, -1.7148, 5, -6.0327, 322.0, 4.5669),
    row(0.15, -1.8971, 6, -6.5093, 285.0, 4.3052),
    row(0.1286, -2.0513, 7, -7.2075, 242.0, 4.3460),
    row(0.1125, -2.1848, 8, -8.8312, 191.0, 4.7939),
    row(0.1, -2.3026, 9, -8.9641, 144.0, 5.5091),
    row(0.09, -2.4079, 10, -9.1832, 115.0, 6.0281),
    row(0.0818, -2.5033, 11, -9.9324, 96.0, 6.3985),
    row(0.0750, -2.5903, 12, -10.1847, 83.0, 6.6525),
    row(0.0692, -2.6703, 13, -10.7294, 73.0, 6.8625),
    row(0.0643, -2.7444, 14, -10.9023, 65.0, 7.0447),
    row(0.06, -2.8134, 15, -10.9983, 60.0, 7.0927),
    row(0.0563, -2.8779, 16, -11.1832, 55.0, 7.1903),
    row(0.0529, -2.9386, 17, -11.3802, 51.0, 7.2549),
    row(0.05, -2.9957, 18, -11.9231, 47.0, 7.3614),
];

pub const TABLE_HEADER: [&str; 6] = ["eta", "log_eta", "N", "sinr_db", "theta_kbps", "ebno_db"];

/// Lookup table indexed by mobile count, `N = 1, 2, ...` in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct UmtsTable {
    rows: Vec<UmtsRow>,
}

impl Default for UmtsTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl UmtsTable {
    pub fn builtin() -> Self {
        Self { rows: BUILTIN_ROWS.to_vec() }
    }

    /// Builds a table after checking the structural invariants: rows are
    /// numbered `1..=len`, `eta` and throughput strictly decrease.
    pub fn new(rows: Vec<UmtsRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Table("table has no rows".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.n != i + 1 {
                return Err(Error::Table(format!("row {} has N = {}, expected {}", i + 1, r.n, i + 1)));
            }
            if !(r.eta > 0.0 && r.theta_kbps > 0.0) {
                return Err(Error::Table(format!("row N = {} has non-positive eta or throughput", r.n)));
            }
        }
        for w in rows.windows(2) {
            if !(w[1].eta < w[0].eta) {
                return Err(Error::Table(format!("eta not strictly decreasing at N = {}", w[1].n)));
            }
            if !(w[1].theta_kbps < w[0].theta_kbps) {
                return Err(Error::Table(format!("throughput not strictly decreasing at N = {}", w[1].n)));
            }
        }
        Ok(Self { rows })
    }

    /// Reads a CSV override with header `eta,log_eta,N,sinr_db,theta_kbps,ebno_db`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != TABLE_HEADER {
            return Err(Error::Table(format!("unexpected header {header:?}, expected {TABLE_HEADER:?}")));
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<UmtsRow>, _>>()?;
        Self::new(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn rows(&self) -> &[UmtsRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row for `n` mobiles (`1 <= n <= len`).
    pub fn row(&self, n: usize) -> Option<&UmtsRow> {
        n.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (self.rows[self.rows.len() - 1].eta, self.rows[0].eta)
    }

    /// Index of the row whose `eta` is nearest; ties go to the smaller `N`.
    pub fn nearest_index(&self, eta: f64) -> Result<usize> {
        let (lo, hi) = self.eta_range();
        if !(eta >= lo && eta <= hi) {
            return Err(Error::Domain(format!("load per user {eta} outside [{lo}, {hi}]")));
        }
        let mut best = 0;
        for (i, r) in self.rows.iter().enumerate() {
            if (r.eta - eta).abs() < (self.rows[best].eta - eta).abs() {
                best = i;
            }
        }
        Ok(best)
    }

    /// Rows violating `eta * N = eta_max` (within 1e-3) or the Eb/N0
    /// relation (within `ebno_tolerance_db`).
    pub fn consistency_violations(&self, params: &UmtsParams, ebno_tolerance_db: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| {
                let load = (r.eta * r.n as f64 - params.eta_max).abs() > 1e-3;
                let ebno = (ebno_from(r.theta_bps(), r.sinr_db, params) - r.ebno_db).abs() > ebno_tolerance_db;
                load || ebno
            })
            .map(|r| r.n)
            .collect()
    }
}

/// Direction of a change in NodeB occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadChange {
    Connect,
    Depart,
}

/// `theta = eta W / (EbN0 (1 - alpha + i))`, bits/s.
pub fn theta_3g_closed_form(eta: f64, ebno_linear: f64, params: &UmtsParams) -> f64 {
    eta * params.w / (ebno_linear * params.interference_factor())
}

/// Required Eb/N0 in dB for throughput `theta` at the given SINR.
pub fn ebno_from(theta: f64, sinr_db: f64, params: &UmtsParams) -> f64 {
    10.0 * (params.w / theta * db_to_linear(sinr_db)).log10()
}

/// Number of mobiles a fully loaded cell can hold at `theta_min` each.
pub fn pole_capacity(params: &UmtsParams, ebno_linear: f64) -> usize {
    let raw = params.eta_max * params.w / (params.theta_min * ebno_linear * params.interference_factor());
    raw.floor() as usize
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Table plus parameters; every state-valued query takes `eta` and
/// resolves it to a table row.
#[derive(Debug, Clone)]
pub struct UmtsModel {
    params: UmtsParams,
    table: UmtsTable,
}

impl UmtsModel {
    pub fn new(params: UmtsParams, table: UmtsTable) -> Result<Self> {
        params.validate()?;
        if params.m_3g > table.len() {
            return Err(Error::Config(format!(
                "umts.m_3g = {} exceeds the {} table rows",
                params.m_3g,
                table.len()
            )));
        }
        Ok(Self { params, table })
    }

    pub fn params(&self) -> &UmtsParams {
        &self.params
    }

    pub fn table(&self) -> &UmtsTable {
        &self.table
    }

    pub fn n_of_eta(&self, eta: f64) -> Result<usize> {
        Ok(self.table.nearest_index(eta)? + 1)
    }

    pub fn theta_3g(&self, eta: f64) -> Result<f64> {
        let i = self.table.nearest_index(eta)?;
        Ok(self.table.rows()[i].theta_bps())
    }

    /// Load per user after one mobile connects or departs, clamped to the
    /// table range.
    pub fn delta_eta(&self, eta: f64, change: LoadChange) -> Result<f64> {
        let i = self.table.nearest_index(eta)?;
        let j = match change {
            LoadChange::Connect => (i + 1).min(self.table.len() - 1),
            LoadChange::Depart => i.saturating_sub(1),
        };
        Ok(self.table.rows()[j].eta)
    }

    pub fn mu_3g(&self, eta: f64) -> Result<f64> {
        Ok(self.params.zeta * self.theta_3g(eta)?)
    }

    /// Smallest service rate over the rows in use, attained at `N = m_3g`.
    pub fn min_service_rate(&self) -> f64 {
        self.table.rows()[..self.params.m_3g]
            .iter()
            .map(|r| self.params.zeta * r.theta_bps())
            .fold(f64::INFINITY, f64::min)
    }
}
