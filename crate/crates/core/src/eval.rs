//! Score sets, equal error rate, DET curves and result tables.
//!
//! Convention: higher score means more genuine. At threshold θ an impostor
//! score `s >= θ` is a false accept and a genuine score `s < θ` a false
//! reject.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "1vs1")]
    OneVsOne,
    #[serde(rename = "4vs1")]
    FourVsOne,
}

impl Protocol {
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::OneVsOne => "1vs1",
            Protocol::FourVsOne => "4vs1",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.tag())
    }
}

/// Published BiosecurID skilled-forgery EERs (percent) for the two systems.
/// Carried in result tables for orientation only; desk-scale runs on other
/// data are not expected to match them.
pub const REFERENCE_EER: [(&str, Protocol, f64); 4] = [
    ("siamese", Protocol::OneVsOne, 6.44),
    ("siamese", Protocol::FourVsOne, 5.58),
    ("dtw", Protocol::OneVsOne, 10.17),
    ("dtw", Protocol::FourVsOne, 7.75),
];

pub fn reference_eer(system: &str, protocol: Protocol) -> Option<f64> {
    REFERENCE_EER
        .iter()
        .find(|(s, p, _)| *s == system && *p == protocol)
        .map(|r| r.2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    pub system: String,
    pub protocol: Protocol,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn new(system: impl Into<String>, protocol: Protocol, genuine: Vec<f64>, impostor: Vec<f64>) -> Self {
        ScoreSet {
            system: system.into(),
            protocol,
            genuine,
            impostor,
        }
    }

    fn check(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::Degenerate(format!(
                "{} {}: need both classes, got {} genuine and {} impostor scores",
                self.system,
                self.protocol,
                self.genuine.len(),
                self.impostor.len()
            )));
        }
        if let Some(s) = self.genuine.iter().chain(&self.impostor).find(|s| s.is_nan()) {
            return Err(Error::Degenerate(format!("{} {}: score {s}", self.system, self.protocol)));
        }
        Ok(())
    }
}

/// Score of one enrollment-versus-probe comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub user: String,
    pub enrollment_index: usize,
    pub probe_index: usize,
    pub label: u8,
    pub score: f64,
}

/// Every pair score as its own trial.
pub fn one_vs_one(system: &str, scores: &[PairScore]) -> ScoreSet {
    let (genuine, impostor): (Vec<_>, Vec<_>) = scores.iter().partition(|s| s.label == 1);
    ScoreSet::new(
        system,
        Protocol::OneVsOne,
        genuine.iter().map(|s| s.score).collect(),
        impostor.iter().map(|s| s.score).collect(),
    )
}

/// One trial per (user, probe): the mean over its `n_enrollment` enrollment
/// scores. Output order is sorted by user, then probe index.
pub fn aggregate_4vs1(system: &str, scores: &[PairScore], n_enrollment: usize) -> Result<ScoreSet> {
    if n_enrollment == 0 {
        return Err(Error::Protocol("aggregation needs at least one enrollment signature".into()));
    }
    let mut groups: BTreeMap<(&str, usize), (u8, Vec<Option<f64>>)> = BTreeMap::new();
    for s in scores {
        if s.enrollment_index >= n_enrollment {
            return Err(Error::Protocol(format!(
                "user {} probe {}: enrollment index {} outside 0..{}",
                s.user, s.probe_index, s.enrollment_index, n_enrollment
            )));
        }
        let (label, slots) = groups
            .entry((s.user.as_str(), s.probe_index))
            .or_insert_with(|| (s.label, vec![None; n_enrollment]));
        if *label != s.label {
            return Err(Error::Protocol(format!("user {} probe {}: mixed labels", s.user, s.probe_index)));
        }
        if slots[s.enrollment_index].replace(s.score).is_some() {
            return Err(Error::Protocol(format!(
                "user {} probe {}: duplicate score for enrollment {}",
                s.user, s.probe_index, s.enrollment_index
            )));
        }
    }
    let mut set = ScoreSet::new(system, Protocol::FourVsOne, Vec::new(), Vec::new());
    for ((user, probe), (label, slots)) in groups {
        let mut sum = 0.0;
        for (e, v) in slots.iter().enumerate() {
            sum += v.ok_or_else(|| {
                Error::Protocol(format!("user {user} probe {probe}: missing score for enrollment {e}"))
            })?;
        }
        let mean = sum / n_enrollment as f64;
        if label == 1 {
            set.genuine.push(mean);
        } else {
            set.impostor.push(mean);
        }
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EerResult {
    pub eer_percent: f64,
    pub threshold: f64,
}

/// Operating points of the threshold sweep: thresholds are the distinct
/// scores in ascending order followed by +inf. `accepted[k]` counts impostor
/// scores `>= θ_k`, `rejected[k]` genuine scores `< θ_k`.
struct Sweep {
    thresholds: Vec<f64>,
    accepted: Vec<u64>,
    rejected: Vec<u64>,
    n_genuine: u64,
    n_impostor: u64,
}

impl Sweep {
    fn new(set: &ScoreSet) -> Result<Sweep> {
        set.check()?;
        let mut gen = set.genuine.clone();
        let mut imp = set.impostor.clone();
        gen.sort_by(f64::total_cmp);
        imp.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup_by(|a, b| a == b);
        thresholds.push(f64::INFINITY);
        let (mut gi, mut ii) = (0, 0);
        let mut accepted = Vec::with_capacity(thresholds.len());
        let mut rejected = Vec::with_capacity(thresholds.len());
        for &t in &thresholds {
            while gi < gen.len() && gen[gi] < t {
                gi += 1;
            }
            while ii < imp.len() && imp[ii] < t {
                ii += 1;
            }
            rejected.push(gi as u64);
            accepted.push((imp.len() - ii) as u64);
        }
        Ok(Sweep {
            thresholds,
            accepted,
            rejected,
            n_genuine: gen.len() as u64,
            n_impostor: imp.len() as u64,
        })
    }

    fn far(&self, k: usize) -> f64 {
        self.accepted[k] as f64 / self.n_impostor as f64
    }

    fn frr(&self, k: usize) -> f64 {
        self.rejected[k] as f64 / self.n_genuine as f64
    }

    /// (FAR - FRR) scaled by n_genuine * n_impostor, exact.
    fn gap(&self, k: usize) -> i128 {
        self.accepted[k] as i128 * self.n_genuine as i128 - self.rejected[k] as i128 * self.n_impostor as i128
    }

    /// Index k with gap(k) > 0 and gap(k + 1) <= 0. The first point always
    /// has FAR = 1, FRR = 0 and the last FAR = 0, FRR = 1.
    fn crossing(&self) -> usize {
        (0..self.thresholds.len() - 1)
            .find(|&k| self.gap(k + 1) <= 0)
            .expect("sweep ends with FAR = 0, FRR = 1")
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Equal error rate with linear interpolation between the two operating
/// points that bracket FAR = FRR. The interpolated rate is formed as an
/// exact integer ratio before the single final division.
///
/// The returned threshold is interpolated the same way; when the crossing
/// lies above the largest score it is that largest score.
pub fn compute_eer(set: &ScoreSet) -> Result<EerResult> {
    let sweep = Sweep::new(set)?;
    let k = sweep.crossing();
    let (d0, d1) = (sweep.gap(k), sweep.gap(k + 1));
    let (a0, a1) = (sweep.accepted[k] as i128, sweep.accepted[k + 1] as i128);
    // EER = (a1 d0 - a0 d1) / (N_i (d0 - d1))
    let mut num = 100 * (a1 * d0 - a0 * d1);
    let mut den = sweep.n_impostor as i128 * (d0 - d1);
    let g = gcd(num, den).max(1);
    num /= g;
    den /= g;
    let eer_percent = num as f64 / den as f64;
    let t = d0 as f64 / (d0 - d1) as f64;
    let (lo, hi) = (sweep.thresholds[k], sweep.thresholds[k + 1]);
    let threshold = if hi.is_finite() { lo + t * (hi - lo) } else { lo };
    Ok(EerResult { eer_percent, threshold })
}

/// (FAR, FRR) operating points of the full threshold sweep, FAR descending
/// and FRR ascending. With `n_points` smaller than the sweep the curve is
/// thinned evenly, always keeping both end points and the two points that
/// bracket the equal-error crossing.
pub fn det_curve(set: &ScoreSet, n_points: usize) -> Result<Vec<(f64, f64)>> {
    let sweep = Sweep::new(set)?;
    let n = sweep.thresholds.len();
    let keep: Vec<usize> = if n_points >= n {
        (0..n).collect()
    } else {
        let k = sweep.crossing();
        let slots = n_points.max(4);
        let mut idx: Vec<usize> = (0..slots).map(|i| i * (n - 1) / (slots - 1)).collect();
        idx.extend([k, k + 1]);
        idx.sort_unstable();
        idx.dedup();
        idx
    };
    Ok(keep.into_iter().map(|k| (sweep.far(k), sweep.frr(k))).collect())
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub system: String,
    pub protocol: Protocol,
    pub eer_percent: f64,
    pub threshold: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    /// Published figure for the analogous system, empty when none exists.
    pub reference_eer_percent: Option<f64>,
}

pub fn result_row(set: &ScoreSet) -> Result<ResultRow> {
    let eer = compute_eer(set)?;
    Ok(ResultRow {
        system: set.system.clone(),
        protocol: set.protocol,
        eer_percent: eer.eer_percent,
        threshold: eer.threshold,
        n_genuine: set.genuine.len(),
        n_impostor: set.impostor.len(),
        reference_eer_percent: reference_eer(&set.system, set.protocol),
    })
}

pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "system",
            "protocol",
            "eer_percent",
            "threshold",
            "n_genuine",
            "n_impostor",
            "reference_eer_percent",
        ])?;
    }
    w.flush().map_err(|e| Error::io("<results csv>", e))
}

pub fn read_results_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn write_det_csv<W: Write>(out: W, curves: &[(&ScoreSet, Vec<(f64, f64)>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["system", "protocol", "far", "frr"])?;
    for (set, points) in curves {
        for (far, frr) in points {
            w.write_record([
                set.system.as_str(),
                set.protocol.tag(),
                &far.to_string(),
                &frr.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<det csv>", e))
}
