use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced real-valued samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
    origin: f64,
}

impl TimeSeries {
    /// Builds a series with spacing `dt` seconds starting at `origin`.
    ///
    /// Values must be finite, the series nonempty and `dt > 0`.
    pub fn new(values: Vec<f64>, dt: f64, origin: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sample spacing must be > 0, got {dt}")));
        }
        if !origin.is_finite() {
            return Err(Error::invalid("origin must be finite"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { values, dt, origin })
    }

    /// Series with one-second spacing starting at zero.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1.0, 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same spacing and origin, new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.dt, self.origin)
    }

    /// Writes the series in the format read by [`crate::ingest::load_series_csv`].
    ///
    /// Metadata goes into leading `#` lines; values use the shortest decimal
    /// representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# dt={}", self.dt)?;
        if self.origin != 0.0 {
            writeln!(out, "# origin={}", self.origin)?;
        }
        writeln!(out, "value")?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
