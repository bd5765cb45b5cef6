//! Raw scores, log scores, and the scale that converts between them.
//!
//! A raw score `S` lives on a bounded scale `[s_min, s_max]` (a GPA band,
//! say). The model works on the log score
//!
//! ```text
//! Q = -ln((S - s_min) / (s_max - s_min))
//! ```
//!
//! which maps `s_max` to 0 and decays toward `s_min`, so *smaller* `q` means
//! a stronger applicant. `s_min` itself is unattainable: it corresponds to
//! `q = +inf` and is rejected on conversion.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Score on the raw reporting scale. Plain newtype; range checking happens
/// against a [`ScoreScale`] at conversion time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RawScore<T>(pub T);

/// Nonnegative log score. `+inf` is allowed (it is the image of `s_min` and
/// shows up as an "admit everyone" threshold); NaN and negatives are not.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogScore<T>(T);

impl<T: Real> LogScore<T> {
    pub fn new(q: T) -> Result<Self> {
        if q.is_nan() || q < T::zero() {
            return Err(Error::Domain(format!(
                "log score must be >= 0 (smaller = stronger), got {q}"
            )));
        }
        Ok(LogScore(q))
    }

    pub fn zero() -> Self {
        LogScore(T::zero())
    }

    pub fn infinity() -> Self {
        LogScore(T::infinity())
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<T: fmt::Display> fmt::Display for LogScore<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Affine-log scale between raw scores and log scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreScale<T> {
    s_min: T,
    s_max: T,
}

impl<T: Real> ScoreScale<T> {
    pub fn new(s_min: T, s_max: T) -> Result<Self> {
        if !s_min.is_finite() || !s_max.is_finite() || !(s_min < s_max) {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("need finite s_min < s_max, got [{s_min}, {s_max}]"),
            });
        }
        Ok(ScoreScale { s_min, s_max })
    }

    pub fn s_min(&self) -> T {
        self.s_min
    }

    pub fn s_max(&self) -> T {
        self.s_max
    }

    /// `Q = -ln((S - s_min) / (s_max - s_min))`.
    ///
    /// Defined on `(s_min, s_max]`; `s_max` maps to exactly 0, and `s_min`
    /// (image `+inf`) or anything outside the band is a domain error.
    pub fn to_log_score(&self, s: RawScore<T>) -> Result<LogScore<T>> {
        let v = s.0;
        if !v.is_finite() || v <= self.s_min || v > self.s_max {
            return Err(Error::Domain(format!(
                "raw score {v} outside the convertible band ({}, {}]",
                self.s_min, self.s_max
            )));
        }
        let frac = (v - self.s_min) / (self.s_max - self.s_min);
        // frac = 1 must land exactly on q = 0.
        LogScore::new(-frac.ln())
    }

    /// Inverse map `S = s_min + (s_max - s_min) e^{-q}`. Total: `q = 0`
    /// gives `s_max`, `q = +inf` gives `s_min`.
    pub fn from_log_score(&self, q: LogScore<T>) -> RawScore<T> {
        RawScore(self.s_min + (self.s_max - self.s_min) * (-q.0).exp())
    }
}
