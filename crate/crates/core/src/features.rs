//! The 23 time functions computed from a pen trajectory.
//!
//! | col | function |
//! |-----|----------|
//! | 1-3 | x, y, pressure |
//! | 4 | path-tangent angle `theta = atan2(y', x')` |
//! | 5 | path velocity `v = sqrt(x'^2 + y'^2)` |
//! | 6 | log curvature radius `rho = ln((v + eps) / (abs(theta') + eps))` |
//! | 7 | total acceleration `a = sqrt(v'^2 + (v theta')^2)` |
//! | 8-14 | first derivatives of columns 1-7 |
//! | 15-16 | second derivatives of x, y |
//! | 17 | min/max speed ratio over a centered 5-sample window |
//! | 18-19 | angle `alpha` between consecutive samples and its derivative |
//! | 20-21 | `sin(alpha)`, `cos(alpha)` |
//! | 22-23 | stroke length over bounding-box width, 5- and 7-sample windows |
//!
//! Angle derivatives are taken on the unwrapped angle so that crossing
//! `+-pi` does not produce spikes.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{SignatureKey, SignatureRecord};

pub const N_FEATURES: usize = 23;
/// Shortest record accepted by [`extract_features`] (widest window).
pub const MIN_LENGTH: usize = 7;
pub const EPS: f64 = 1e-8;

/// Column headers, in column order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "1:x", "2:y", "3:z", "4:theta", "5:v", "6:rho", "7:a", "8:dx", "9:dy", "10:dz", "11:dtheta", "12:dv",
    "13:drho", "14:da", "15:ddx", "16:ddy", "17:vr", "18:alpha", "19:dalpha", "20:sin", "21:cos", "22:r5",
    "23:r7",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Z-score every column of each signature.
    pub normalize: bool,
    /// Differentiate against timestamps instead of sample index.
    pub timestamp_derivatives: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            normalize: true,
            timestamp_derivatives: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    /// `T x 23`, columns in table order.
    pub values: Array2<f64>,
    pub source: SignatureKey,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Column by its 1-based table number.
    pub fn column(&self, number: usize) -> Vec<f64> {
        self.values.column(number - 1).to_vec()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FEATURE_NAMES)?;
        for row in self.values.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }
}

/// Second-order regression derivative
/// `d_n = (s[n+1] - s[n-1] + 2 (s[n+2] - s[n-2])) / 10`
/// with the two boundary samples at each end copying the nearest interior
/// value. Signals shorter than 5 use central differences inside and
/// one-sided differences at the ends.
pub fn derivative(signal: &[f64]) -> Result<Vec<f64>> {
    let t = signal.len();
    if t < 2 {
        return Err(Error::TooShort { len: t, min: 2 });
    }
    let mut d = vec![0.0; t];
    if t < 5 {
        d[0] = signal[1] - signal[0];
        d[t - 1] = signal[t - 1] - signal[t - 2];
        for n in 1..t - 1 {
            d[n] = (signal[n + 1] - signal[n - 1]) / 2.0;
        }
        return Ok(d);
    }
    for n in 2..t - 2 {
        d[n] = (signal[n + 1] - signal[n - 1] + 2.0 * (signal[n + 2] - signal[n - 2])) / 10.0;
    }
    d[0] = d[2];
    d[1] = d[2];
    d[t - 1] = d[t - 3];
    d[t - 2] = d[t - 3];
    Ok(d)
}

/// Regression derivative against a time axis: the same weights applied to
/// both the signal and the time differences. Falls back to the index-based
/// operator where time does not advance.
fn derivative_in_time(signal: &[f64], time: &[f64]) -> Result<Vec<f64>> {
    let t = signal.len();
    let plain = derivative(signal)?;
    let dt = derivative(time)?;
    Ok((0..t)
        .map(|n| if dt[n] > 0.0 { plain[n] / dt[n] } else { plain[n] })
        .collect())
}

fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (n, &a) in angles.iter().enumerate() {
        if n > 0 {
            let delta = a - angles[n - 1];
            if delta > PI {
                offset -= TAU;
            } else if delta < -PI {
                offset += TAU;
            }
        }
        out.push(a + offset);
    }
    out
}

fn window(n: usize, half: usize, len: usize) -> std::ops::Range<usize> {
    n.saturating_sub(half)..(n + half + 1).min(len)
}

/// Path length over the window divided by the window's horizontal extent.
fn length_to_width(x: &[f64], y: &[f64], half: usize) -> Vec<f64> {
    let t = x.len();
    (0..t)
        .map(|n| {
            let w = window(n, half, t);
            let length: f64 = (w.start..w.end - 1)
                .map(|k| (x[k + 1] - x[k]).hypot(y[k + 1] - y[k]))
                .sum();
            let (lo, hi) = x[w].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            length / (hi - lo + EPS)
        })
        .collect()
}

/// Z-scores a column in place; near-constant columns become all zero.
fn standardize(col: &mut [f64]) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= 1e-10 * (1.0 + mean.abs()) {
        col.iter_mut().for_each(|v| *v = 0.0);
    } else {
        col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
}

pub fn extract_features(record: &SignatureRecord, cfg: &FeatureConfig) -> Result<FeatureSequence> {
    let t = record.samples.len();
    if t < MIN_LENGTH {
        return Err(Error::TooShort { len: t, min: MIN_LENGTH });
    }
    let x: Vec<f64> = record.samples.iter().map(|s| s.x as f64).collect();
    let y: Vec<f64> = record.samples.iter().map(|s| s.y as f64).collect();
    let z: Vec<f64> = record.samples.iter().map(|s| f64::from(s.pressure)).collect();
    let time: Vec<f64> = record.samples.iter().map(|s| s.timestamp as f64 / 10.0).collect();
    let diff = |s: &[f64]| -> Result<Vec<f64>> {
        if cfg.timestamp_derivatives {
            derivative_in_time(s, &time)
        } else {
            derivative(s)
        }
    };

    let dx = diff(&x)?;
    let dy = diff(&y)?;
    let dz = if record.pressure_free { vec![0.0; t] } else { diff(&z)? };
    let theta: Vec<f64> = dy.iter().zip(&dx).map(|(b, a)| b.atan2(*a)).collect();
    let v: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let dtheta = diff(&unwrap_angles(&theta))?;
    let rho: Vec<f64> = v
        .iter()
        .zip(&dtheta)
        .map(|(v, w)| ((v + EPS) / (w.abs() + EPS)).ln())
        .collect();
    let dv = diff(&v)?;
    let acc: Vec<f64> = (0..t).map(|n| dv[n].hypot(v[n] * dtheta[n])).collect();
    let drho = diff(&rho)?;
    let dacc = diff(&acc)?;
    let ddx = diff(&dx)?;
    let ddy = diff(&dy)?;
    let speed_ratio: Vec<f64> = (0..t)
        .map(|n| {
            let w = &v[window(n, 2, t)];
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(0.0, f64::max);
            lo / (hi + EPS)
        })
        .collect();
    let mut alpha: Vec<f64> = (0..t - 1).map(|n| (y[n + 1] - y[n]).atan2(x[n + 1] - x[n])).collect();
    alpha.push(alpha[t - 2]);
    let dalpha = diff(&unwrap_angles(&alpha))?;
    let sin: Vec<f64> = alpha.iter().map(|a| a.sin()).collect();
    let cos: Vec<f64> = alpha.iter().map(|a| a.cos()).collect();
    let r5 = length_to_width(&x, &y, 2);
    let r7 = length_to_width(&x, &y, 3);

    let columns: [&[f64]; N_FEATURES] = [
        &x, &y, &z, &theta, &v, &rho, &acc, &dx, &dy, &dz, &dtheta, &dv, &drho, &dacc, &ddx, &ddy,
        &speed_ratio, &alpha, &dalpha, &sin, &cos, &r5, &r7,
    ];
    let mut values = Array2::zeros((t, N_FEATURES));
    for (c, col) in columns.iter().enumerate() {
        let mut col = col.to_vec();
        if cfg.normalize {
            standardize(&mut col);
        }
        if let Some(bad) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!(
                "{}: non-finite value in column {} at sample {bad}",
                record.key,
                c + 1
            )));
        }
        values.column_mut(c).assign(&ndarray::ArrayView1::from(&col[..]));
    }
    Ok(FeatureSequence {
        values,
        source: record.key.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{Sample, SignatureKind, DEFAULT_PRESSURE};

    fn record_from(points: &[(i64, i64, u16)], pressure_free: bool) -> SignatureRecord {
        let samples = points
            .iter()
            .enumerate()
            .map(|(n, &(x, y, p))| Sample {
                x,
                y,
                pressure: p,
                timestamp: 10 * n as i64,
                pen_down: true,
            })
            .collect();
        SignatureRecord::new(
            SignatureKey {
                user: "u".into(),
                kind: SignatureKind::Genuine,
                session: 1,
                index: 1,
            },
            samples,
            pressure_free,
        )
        .unwrap()
    }

    fn wavy(n: usize) -> Vec<(i64, i64, u16)> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.11;
                (
                    (300.0 * t + 80.0 * (2.3 * t).sin()) as i64,
                    (150.0 * (1.7 * t).cos() + 40.0 * (5.1 * t).sin()) as i64,
                    (500.0 + 300.0 * (0.9 * t).sin()) as u16,
                )
            })
            .collect()
    }

    #[test]
    fn derivative_of_constant_and_ramp() {
        assert_eq!(derivative(&[5.0; 6]).unwrap(), vec![0.0; 6]);
        let ramp: Vec<f64> = (0..10).map(|n| 2.0 * n as f64).collect();
        assert_eq!(derivative(&ramp).unwrap(), vec![2.0; 10]);
        assert_eq!(derivative(&[1.0, 4.0, 5.0]).unwrap(), vec![3.0, 2.0, 1.0]);
        assert!(derivative(&[1.0]).is_err());
    }

    #[test]
    fn derivative_of_squares() {
        // independent evaluation of the regression weights, -2..=2
        let s: Vec<f64> = (0..7).map(|n| (n * n) as f64).collect();
        let d = derivative(&s).unwrap();
        let manual = |n: usize| (s[n + 1] - s[n - 1] + 2.0 * (s[n + 2] - s[n - 2])) / 10.0;
        assert_eq!(d[2], manual(2));
        assert_eq!(d[3], manual(3));
        assert_eq!(d[4], manual(4));
        // for s = n^2 the regression derivative is exactly 2n
        assert_eq!(&d[2..5], &[4.0, 6.0, 8.0]);
        assert_eq!((d[0], d[1], d[5], d[6]), (4.0, 4.0, 8.0, 8.0));
    }

    #[test]
    fn horizontal_line_geometry() {
        let pts: Vec<_> = (0..20).map(|n| (100 + 7 * n, 50, 400)).collect();
        let f = extract_features(&record_from(&pts, false), &FeatureConfig { normalize: false, ..Default::default() })
            .unwrap();
        assert_eq!(f.values.ncols(), N_FEATURES);
        assert!(f.column(4).iter().all(|&v| v == 0.0));
        assert!(f.column(5).iter().all(|&v| (v - 7.0).abs() < 1e-12));
        assert!(f.column(20).iter().all(|&v| v == 0.0));
        assert!(f.column(21).iter().all(|&v| v == 1.0));
        assert!(f.column(22).iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn too_short() {
        let pts: Vec<_> = (0..6).map(|n| (n, n, 1)).collect();
        assert!(matches!(
            extract_features(&record_from(&pts, false), &FeatureConfig::default()),
            Err(Error::TooShort { len: 6, min: 7 })
        ));
    }

    #[test]
    fn normalized_columns_are_standard() {
        let f = extract_features(&record_from(&wavy(150), false), &FeatureConfig::default()).unwrap();
        for c in 0..N_FEATURES {
            let col = f.values.column(c);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-6, "column {} mean {mean}", c + 1);
            assert!(
                (sd - 1.0).abs() < 1e-6 || col.iter().all(|&v| v == 0.0),
                "column {} sd {sd}",
                c + 1
            );
        }
    }

    #[test]
    fn pressure_free_channels_zero() {
        let pts: Vec<_> = wavy(80).into_iter().map(|(x, y, _)| (x, y, DEFAULT_PRESSURE)).collect();
        let f = extract_features(&record_from(&pts, true), &FeatureConfig::default()).unwrap();
        assert!(f.column(3).iter().all(|&v| v == 0.0));
        assert!(f.column(10).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_invariance() {
        let base = wavy(90);
        let moved: Vec<_> = base.iter().map(|&(x, y, p)| (x + 12_345, y - 777, p)).collect();
        for normalize in [false, true] {
            let cfg = FeatureConfig { normalize, ..Default::default() };
            let a = extract_features(&record_from(&base, false), &cfg).unwrap();
            let b = extract_features(&record_from(&moved, false), &cfg).unwrap();
            let first = if normalize { 0 } else { 3 };
            for c in first..N_FEATURES {
                for (u, v) in a.values.column(c).iter().zip(b.values.column(c)) {
                    assert!((u - v).abs() < 1e-9, "column {} differs: {u} vs {v}", c + 1);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_speed_ratio_bounded() {
        let rec = record_from(&wavy(120), false);
        let cfg = FeatureConfig { normalize: false, ..Default::default() };
        let a = extract_features(&rec, &cfg).unwrap();
        let b = extract_features(&rec, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.column(17).iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn timestamp_derivatives_match_uniform_sampling() {
        let rec = record_from(&wavy(60), false);
        let a = extract_features(&rec, &FeatureConfig { normalize: false, timestamp_derivatives: false }).unwrap();
        let b = extract_features(&rec, &FeatureConfig { normalize: false, timestamp_derivatives: true }).unwrap();
        for (u, v) in a.values.iter().zip(b.values.iter()) {
            assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn csv_dump_has_header() {
        let f = extract_features(&record_from(&wavy(10), false), &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("1:x,2:y,3:z,4:theta"));
        assert_eq!(text.lines().count(), 11);
    }
}
