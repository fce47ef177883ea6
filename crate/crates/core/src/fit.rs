//! Least-squares fits used to read rates, slopes and frequencies off sampled
//! data.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect line.
    pub r_squared: f64,
    /// Standard error of the slope; 0 with only two points.
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Fit("a line needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, r_squared, slope_stderr, rms_residual: (ssr / n).sqrt() })
}

/// `y ≈ C x^p` fitted on `log y` against `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub exponent_stderr: f64,
    /// RMS residual of `log y`.
    pub log_residual: f64,
}

pub fn power_law_fit(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
        exponent_stderr: line.slope_stderr,
        log_residual: line.rms_residual,
    })
}

/// Angular frequency of an oscillating signal from its zero crossings,
/// located by linear interpolation. The mean is not removed.
pub fn zero_crossing_frequency(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::Fit("times and values differ in length".into()));
    }
    let mut crossings = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a == 0.0 {
            crossings.push(times[i - 1]);
        } else if a * b < 0.0 {
            let s = a / (a - b);
            crossings.push(times[i - 1] + s * (times[i] - times[i - 1]));
        }
    }
    crossings.dedup();
    if crossings.len() < 3 {
        return Err(Error::Fit(format!("found {} zero crossings; need at least 3", crossings.len())));
    }
    let index: Vec<f64> = (0..crossings.len()).map(|i| i as f64).collect();
    let line = linear_fit(&index, &crossings)?;
    Ok(std::f64::consts::PI / line.slope)
}
