//! Stationarizing transforms for packet-rate series.
//!
//! The default recipe is `ln(1+x)`, then box centering over 10-sample
//! rectangular frames with 50% overlap, then z-scoring.
//!
//! Box centering subtracts each frame's mean from the samples in that frame
//! and averages the overlapping contributions per sample (overlap-add with
//! count normalization). Samples past the last full frame are dropped, so an
//! input of length `n` yields `hop·(n_frames−1) + window` samples with
//! `n_frames = floor((n − window)/hop) + 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Zscore,
    None,
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zscore" => Ok(ScaleMode::Zscore),
            "none" => Ok(ScaleMode::None),
            other => Err(Error::invalid(format!("unknown scale mode {other:?}"))),
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::Zscore => "zscore",
            ScaleMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub window_len: usize,
    pub overlap_fraction: f64,
    pub log_enabled: bool,
    pub scale_mode: ScaleMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window_len: 10,
            overlap_fraction: 0.5,
            log_enabled: true,
            scale_mode: ScaleMode::Zscore,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::invalid(format!(
                "window length must be >= 2, got {}",
                self.window_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::invalid(format!(
                "overlap fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        if self.raw_hop() < 1.0 {
            return Err(Error::invalid(format!(
                "window {} with overlap {} leaves a hop below one sample",
                self.window_len, self.overlap_fraction
            )));
        }
        Ok(())
    }

    fn raw_hop(&self) -> f64 {
        (self.window_len as f64 * (1.0 - self.overlap_fraction)).round()
    }

    /// Frame stride in samples.
    pub fn hop(&self) -> usize {
        self.raw_hop() as usize
    }
}

/// Number of full frames and the resulting output length for an input of
/// `n` samples. `None` if not even one frame fits.
pub fn framing(n: usize, window_len: usize, hop: usize) -> Option<(usize, usize)> {
    if n < window_len || hop == 0 {
        return None;
    }
    let n_frames = (n - window_len) / hop + 1;
    Some((n_frames, hop * (n_frames - 1) + window_len))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub mean: f64,
    pub std: f64,
}

impl ScaleParams {
    pub const IDENTITY: ScaleParams = ScaleParams { mean: 0.0, std: 1.0 };
}

/// A preprocessed series ready for the predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySeries {
    series: TimeSeries,
    scale: ScaleParams,
    config: Option<PreprocessConfig>,
}

impl StationarySeries {
    /// Wraps an already-stationary series without transforming it.
    pub fn unscaled(series: TimeSeries) -> Self {
        Self {
            series,
            scale: ScaleParams::IDENTITY,
            config: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        self.series.values()
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn scale_params(&self) -> ScaleParams {
        self.scale
    }

    /// Preprocessing applied to produce this series, if it came from [`pipeline`].
    pub fn config(&self) -> Option<&PreprocessConfig> {
        self.config.as_ref()
    }

    /// Maps values on the scaled axis back to the centered (pre-scaling) axis.
    pub fn unscale(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|v| v * self.scale.std + self.scale.mean)
            .collect()
    }
}

impl AsRef<[f64]> for StationarySeries {
    fn as_ref(&self) -> &[f64] {
        self.values()
    }
}

/// `ln(1 + x)` on each sample. Inputs must be nonnegative.
pub fn log_transform(series: &TimeSeries) -> Result<TimeSeries> {
    if let Some((i, v)) = series.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Domain(format!(
            "log transform needs nonnegative values, got {v} at index {i}"
        )));
    }
    series.with_values(series.values().iter().map(|v| v.ln_1p()).collect())
}

// Mean taken relative to the first sample: a constant frame gets exactly its
// own value back, so centering it yields exact zeros.
fn frame_mean(frame: &[f64]) -> f64 {
    let pivot = frame[0];
    pivot + frame.iter().map(|v| v - pivot).sum::<f64>() / frame.len() as f64
}

/// Per-frame mean removal with overlap-averaged reconstruction.
pub fn box_center(series: &TimeSeries, cfg: &PreprocessConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    let window = cfg.window_len;
    let hop = cfg.hop();
    let x = series.values();
    let (n_frames, n_out) = framing(x.len(), window, hop).ok_or_else(|| {
        Error::invalid(format!(
            "series of length {} is shorter than the window length {window}",
            x.len()
        ))
    })?;

    let mut acc = vec![0.0; n_out];
    let mut hits = vec![0u32; n_out];
    for f in 0..n_frames {
        let start = f * hop;
        let frame = &x[start..start + window];
        let mean = frame_mean(frame);
        for (j, v) in frame.iter().enumerate() {
            acc[start + j] += v - mean;
            hits[start + j] += 1;
        }
    }
    let out = acc
        .iter()
        .zip(&hits)
        .map(|(a, &c)| a / f64::from(c))
        .collect();
    series.with_values(out)
}

/// Applies `mode`, recording the parameters used.
pub fn scale(series: &TimeSeries, mode: ScaleMode) -> Result<StationarySeries> {
    match mode {
        ScaleMode::None => Ok(StationarySeries::unscaled(series.clone())),
        ScaleMode::Zscore => {
            let x = series.values();
            if x.len() < 2 {
                return Err(Error::invalid("z-score needs at least two samples"));
            }
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let std = (ss / (n - 1.0)).sqrt();
            if !(std > 0.0) {
                return Err(Error::invalid("zero variance series cannot be z-scored"));
            }
            let values = x.iter().map(|v| (v - mean) / std).collect();
            Ok(StationarySeries {
                series: series.with_values(values)?,
                scale: ScaleParams { mean, std },
                config: None,
            })
        }
    }
}

/// Every intermediate product of [`pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineStages {
    /// Output of the log stage (the input itself when logging is disabled).
    pub logged: TimeSeries,
    pub centered: TimeSeries,
    pub stationary: StationarySeries,
}

/// Log transform, box centering and scaling, in that order.
///
/// Errors carry the name of the failing stage.
pub fn pipeline(series: &TimeSeries, cfg: &PreprocessConfig) -> Result<StationarySeries> {
    pipeline_stages(series, cfg).map(|s| s.stationary)
}

/// [`pipeline`], keeping the intermediate series.
pub fn pipeline_stages(series: &TimeSeries, cfg: &PreprocessConfig) -> Result<PipelineStages> {
    cfg.validate().stage("config")?;
    let logged = if cfg.log_enabled {
        log_transform(series).stage("log_transform")?
    } else {
        series.clone()
    };
    let centered = box_center(&logged, cfg).stage("box_center")?;
    let mut stationary = scale(&centered, cfg.scale_mode).stage("scale")?;
    stationary.config = Some(*cfg);
    Ok(PipelineStages {
        logged,
        centered,
        stationary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_seasonal_traffic, SeasonalSpec};
    use proptest::prelude::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_values(values).unwrap()
    }

    fn cfg(window_len: usize, overlap_fraction: f64) -> PreprocessConfig {
        PreprocessConfig {
            window_len,
            overlap_fraction,
            ..Default::default()
        }
    }

    /// Straightforward overlap-add: list the frames, subtract their means,
    /// and average the contributions each sample received.
    fn reference_box_center(x: &[f64], window: usize, hop: usize) -> Vec<f64> {
        let mut frames = Vec::new();
        let mut start = 0;
        while start + window <= x.len() {
            frames.push(start);
            start += hop;
        }
        let n_out = frames.last().unwrap() + window;
        (0..n_out)
            .map(|i| {
                let parts: Vec<f64> = frames
                    .iter()
                    .filter(|&&s| s <= i && i < s + window)
                    .map(|&s| {
                        let mean = x[s..s + window].iter().sum::<f64>() / window as f64;
                        x[i] - mean
                    })
                    .collect();
                parts.iter().sum::<f64>() / parts.len() as f64
            })
            .collect()
    }

    #[test]
    fn log_transform_examples() {
        assert_eq!(log_transform(&ts(vec![0.0; 3])).unwrap().values(), &[0.0; 3]);
        let e = log_transform(&ts(vec![std::f64::consts::E - 1.0])).unwrap();
        assert!((e.values()[0] - 1.0).abs() < 1e-15);
        assert!(matches!(log_transform(&ts(vec![-1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn log_transform_keeps_spacing() {
        let s = TimeSeries::new(vec![1.0, 2.0], 0.5, 10.0).unwrap();
        let l = log_transform(&s).unwrap();
        assert_eq!((l.dt(), l.origin(), l.len()), (0.5, 10.0, 2));
    }

    #[test]
    fn constant_series_centers_to_zero() {
        let out = box_center(&ts(vec![5.0; 20]), &cfg(10, 0.5)).unwrap();
        assert_eq!(out.values(), &[0.0; 20]);
    }

    #[test]
    fn framing_arithmetic() {
        assert_eq!(framing(100, 10, 5), Some((19, 100)));
        assert_eq!(framing(9, 10, 5), None);
        assert_eq!(framing(10, 10, 5), Some((1, 10)));
        assert_eq!(framing(23, 10, 5), Some((3, 20)));
        let out = box_center(&ts((0..100).map(f64::from).collect()), &cfg(10, 0.5)).unwrap();
        assert_eq!(out.len(), 100);
    }

    #[test]
    fn ramp_matches_reference() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let out = box_center(&ts(x.clone()), &cfg(10, 0.5)).unwrap();
        let expected = reference_box_center(&x, 10, 5);
        assert_eq!(out.len(), expected.len());
        for (a, b) in out.values().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // first frame alone covers samples 0..5: ramp minus mean 4.5
        assert!((out.values()[0] + 4.5).abs() < 1e-12);
        // samples 5..10 are covered by frames [0,10) and [5,15): means 4.5 and 9.5
        assert!((out.values()[5] - (5.0 - 7.0)).abs() < 1e-12);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(box_center(&ts(vec![1.0; 9]), &cfg(10, 0.5)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1, 0.5).validate().is_err());
        assert!(cfg(10, 1.0).validate().is_err());
        assert!(cfg(10, -0.1).validate().is_err());
        assert!(cfg(2, 0.9).validate().is_err());
        assert_eq!(cfg(10, 0.5).hop(), 5);
        assert_eq!(cfg(10, 0.0).hop(), 10);
    }

    #[test]
    fn zscore_example() {
        let s = scale(&ts(vec![1.0, 2.0, 3.0]), ScaleMode::Zscore).unwrap();
        assert_eq!(s.scale_params(), ScaleParams { mean: 2.0, std: 1.0 });
        assert_eq!(s.values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.unscale(s.values()), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zscore_rejects_constant() {
        assert!(scale(&ts(vec![7.0; 3]), ScaleMode::Zscore).is_err());
    }

    #[test]
    fn scale_none_is_identity() {
        let s = scale(&ts(vec![4.0, -2.0, 0.5]), ScaleMode::None).unwrap();
        assert_eq!(s.values(), &[4.0, -2.0, 0.5]);
        assert_eq!(s.scale_params(), ScaleParams::IDENTITY);
    }

    #[test]
    fn pipeline_on_constant_series_is_zero() {
        // z-scoring an all-zero series is a zero-variance error, so the
        // constant case runs without the scaling stage
        let c = PreprocessConfig {
            scale_mode: ScaleMode::None,
            ..Default::default()
        };
        let out = pipeline(&ts(vec![42.0; 50]), &c).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));

        let err = pipeline(&ts(vec![42.0; 50]), &PreprocessConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some("scale"));
    }

    #[test]
    fn pipeline_names_failing_stage() {
        let err = pipeline(&ts(vec![1.0; 9]), &PreprocessConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some("box_center"));
        assert!(err.to_string().contains("box_center"));

        let err = pipeline(&ts(vec![-1.0; 20]), &PreprocessConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some("log_transform"));
    }

    #[test]
    fn pipeline_on_seasonal_series() {
        let raw = gen_seasonal_traffic(&SeasonalSpec {
            n: 1000,
            period: 50,
            ..Default::default()
        })
        .unwrap();
        let stages = pipeline_stages(&raw, &PreprocessConfig::default()).unwrap();
        let v = stages.stationary.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.05);
        assert!((std - 1.0).abs() < 0.1);
        assert_eq!(stages.logged.len(), 1000);
        assert_eq!(stages.centered.len(), 1000);
        assert_eq!(stages.stationary.config(), Some(&PreprocessConfig::default()));
    }

    proptest! {
        #[test]
        fn constant_input_always_centers_to_zero(
            c in -1e6f64..1e6,
            n in 10usize..200,
            window in 2usize..10,
            overlap in 0.0f64..0.5,
        ) {
            let out = box_center(&ts(vec![c; n]), &cfg(window, overlap)).unwrap();
            prop_assert!(out.values().iter().all(|&v| v == 0.0));
        }

        #[test]
        fn centering_is_shift_invariant(
            x in prop::collection::vec(-100.0f64..100.0, 20..120),
            shift in -1000.0f64..1000.0,
        ) {
            let c = PreprocessConfig::default();
            let a = box_center(&ts(x.clone()), &c).unwrap();
            let b = box_center(&ts(x.iter().map(|v| v + shift).collect()), &c).unwrap();
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }

        #[test]
        fn frame_count_law(n in 2usize..5000, window in 2usize..64, overlap in 0.0f64..0.95) {
            let c = cfg(window, overlap);
            prop_assume!(c.validate().is_ok() && n >= window);
            let hop = c.hop();
            let (n_frames, n_out) = framing(n, window, hop).unwrap();
            prop_assert_eq!(n_frames, (n - window) / hop + 1);
            prop_assert!(n_out <= n && n - n_out < hop);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            prop_assert_eq!(box_center(&ts(x), &c).unwrap().len(), n_out);
        }

        #[test]
        fn zscore_moments(x in prop::collection::vec(-1e3f64..1e3, 3..300)) {
            let s = match scale(&ts(x), ScaleMode::Zscore) {
                Ok(s) => s,
                Err(_) => return Ok(()),
            };
            let v = s.values();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-12 * n);
            prop_assert!((std - 1.0).abs() < 1e-12);
        }

        #[test]
        fn centered_ramp_matches_reference(
            x in prop::collection::vec(-50.0f64..50.0, 10..80),
            window in 2usize..10,
            overlap in 0.0f64..0.8,
        ) {
            let c = cfg(window, overlap);
            prop_assume!(c.validate().is_ok());
            let out = box_center(&ts(x.clone()), &c).unwrap();
            let expected = reference_box_center(&x, window, c.hop());
            prop_assert_eq!(out.len(), expected.len());
            for (a, b) in out.values().iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
