use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of samples `<= x` for every grid point.
pub fn rate_cdf(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("CDF needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| sorted.partition_point(|&s| s <= x) as f64 / n)
        .collect())
}

/// Fixed-width histogram starting at zero, normalized to a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

pub fn rate_pdf(samples: &[f64], bin_width: f64) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Domain("PDF needs at least one sample".into()));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Domain(format!("bin width must be positive, got {bin_width}")));
    }
    let max = samples.iter().copied().fold(0.0, f64::max);
    let bins = (max / bin_width).floor() as usize + 1;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        counts[((s.max(0.0) / bin_width).floor() as usize).min(bins - 1)] += 1;
    }
    let norm = samples.len() as f64 * bin_width;
    let density = counts.iter().map(|&c| c as f64 / norm).collect();
    Ok(Histogram {
        bin_width,
        counts,
        density,
    })
}

/// Least-squares coefficients and coefficient of determination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

/// Fits `y ~ sum_i c_i * basis_i(x)`. Needs at least as many points as
/// basis functions.
pub fn least_squares(x: &[f64], y: &[f64], basis: &[fn(f64) -> f64]) -> Result<Fit> {
    if x.len() != y.len() || x.len() < basis.len() || basis.is_empty() {
        return Err(Error::Domain(format!(
            "cannot fit {} coefficients to {} points",
            basis.len(),
            x.len()
        )));
    }
    let a = DMatrix::from_fn(x.len(), basis.len(), |r, c| basis[c](x[r]));
    let b = DVector::from_column_slice(y);
    let coefficients = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let fitted = &a * &coefficients;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(v, f)| (v - f).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(Fit {
        coefficients: coefficients.iter().copied().collect(),
        r_squared,
    })
}

/// `a * x + b`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<Fit> {
    least_squares(x, y, &[|k| k, |_| 1.0])
}

/// `a * K^2 log K + b * K^2 + c * K + d`.
pub fn complexity_fit(x: &[f64], y: &[f64]) -> Result<Fit> {
    least_squares(x, y, &[|k| k * k * k.ln(), |k| k * k, |k| k, |_| 1.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(rate_cdf(&[1.0, 2.0, 3.0], &[2.0]).unwrap(), vec![2.0 / 3.0]);
        assert_eq!(rate_cdf(&[1.0, 2.0, 3.0], &[9.0]).unwrap(), vec![1.0]);
        assert_eq!(rate_cdf(&[1.0, 2.0, 3.0], &[0.5]).unwrap(), vec![0.0]);
        assert!(rate_cdf(&[], &[1.0]).is_err());
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let cdf = rate_cdf(&[0.3, 1.7, 1.7, 2.2, 3.0], &grid).unwrap();
        assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn histogram_integrates_to_one() {
        let h = rate_pdf(&[0.1, 0.2, 0.7, 1.4, 3.0], 0.5).unwrap();
        assert_eq!(h.counts, vec![2, 1, 1, 0, 0, 0, 1]);
        let area: f64 = h.density.iter().sum::<f64>() * h.bin_width;
        assert!((area - 1.0).abs() < 1e-12);
        assert!(rate_pdf(&[1.0], 0.0).is_err());
    }

    #[test]
    fn exact_models_are_recovered() {
        let x = [6.0, 12.0, 18.0, 24.0, 30.0];
        let y: Vec<f64> = x.iter().map(|k| 2.5 * k - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.coefficients[0] - 2.5).abs() < 1e-9 && (f.coefficients[1] + 1.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let y: Vec<f64> = x.iter().map(|k| 1e-3 * k * k * k.ln() + 2e-3 * k * k - 0.01 * k + 0.5).collect();
        let f = complexity_fit(&x, &y).unwrap();
        assert!((f.coefficients[0] - 1e-3).abs() < 1e-8);
        assert!(f.r_squared > 1.0 - 1e-9);
        assert!(complexity_fit(&x[..3], &y[..3]).is_err());
    }

    #[test]
    fn noise_lowers_r_squared() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let f = linear_fit(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(f.r_squared < 1.0 && f.r_squared > 0.0);
    }
}
