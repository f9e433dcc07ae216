//! Signature records and the SVC text format.
//!
//! An SVC file starts with the sample count on its own line, followed by one
//! sample per line: `x y timestamp button` with optional trailing
//! `azimuth altitude pressure` columns. Azimuth and altitude are read and
//! discarded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_PRESSURE: u16 = 1023;
/// Pressure assigned to every sample of a file without a pressure column.
pub const DEFAULT_PRESSURE: u16 = 512;
pub const MIN_SAMPLES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub x: i64,
    pub y: i64,
    pub pressure: u16,
    /// Milliseconds.
    pub timestamp: i64,
    pub pen_down: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignatureKind {
    Genuine,
    SkilledForgery,
}

impl SignatureKind {
    /// File-name tag used by the dataset directory layout.
    pub fn tag(self) -> &'static str {
        match self {
            SignatureKind::Genuine => "genuine",
            SignatureKind::SkilledForgery => "forgery",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "genuine" | "g" => Some(SignatureKind::Genuine),
            "forgery" | "skilled" | "f" => Some(SignatureKind::SkilledForgery),
            _ => None,
        }
    }
}

/// Identity of one captured signature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignatureKey {
    pub user: String,
    pub kind: SignatureKind,
    pub session: u8,
    pub index: u32,
}

impl fmt::Display for SignatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}_{}_{}", self.user, self.kind.tag(), self.session, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub key: SignatureKey,
    pub samples: Vec<Sample>,
    /// Set when the source had no pressure column; pressures are then all
    /// [`DEFAULT_PRESSURE`].
    pub pressure_free: bool,
}

impl SignatureRecord {
    pub fn new(key: SignatureKey, samples: Vec<Sample>, pressure_free: bool) -> Result<Self> {
        let rec = SignatureRecord {
            key,
            samples,
            pressure_free,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < MIN_SAMPLES {
            return Err(Error::InvalidRecord(format!(
                "{}: {} samples, need at least {MIN_SAMPLES}",
                self.key,
                self.samples.len()
            )));
        }
        if !(1..=4).contains(&self.key.session) {
            return Err(Error::InvalidRecord(format!("{}: session must be 1-4", self.key)));
        }
        for (n, w) in self.samples.windows(2).enumerate() {
            if w[1].timestamp < w[0].timestamp {
                return Err(Error::InvalidRecord(format!(
                    "{}: timestamp decreases at sample {}",
                    self.key,
                    n + 1
                )));
            }
        }
        if let Some(n) = self.samples.iter().position(|s| s.pressure > MAX_PRESSURE) {
            return Err(Error::InvalidRecord(format!(
                "{}: pressure out of range at sample {n}",
                self.key
            )));
        }
        if self.pressure_free && self.samples.iter().any(|s| s.pressure != DEFAULT_PRESSURE) {
            return Err(Error::InvalidRecord(format!(
                "{}: pressure-free record with non-default pressure",
                self.key
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Copy of the record keeping only pen-down samples.
    pub fn without_pen_up(&self) -> Result<Self> {
        let samples: Vec<Sample> = self.samples.iter().copied().filter(|s| s.pen_down).collect();
        SignatureRecord::new(self.key.clone(), samples, self.pressure_free)
    }
}

fn parse_int(tok: &str, line: usize, what: &str) -> Result<i64> {
    tok.parse::<i64>().map_err(|_| Error::Parse {
        line,
        message: format!("non-numeric {what} {tok:?}"),
    })
}

/// Parses SVC text into a record carrying `key`.
pub fn parse_svc(bytes: &[u8], key: SignatureKey) -> Result<SignatureRecord> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let count: usize = header.parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("malformed header {header:?}, expected sample count"),
    })?;

    let mut samples = Vec::with_capacity(count);
    let mut has_pressure: Option<bool> = None;
    for n in 0..count {
        let line_no = n + 2;
        let line = match lines.next() {
            Some((_, l)) if !l.is_empty() => l,
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("header declares {count} samples, found {n}"),
                })
            }
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let with_pressure = match toks.len() {
            4 => false,
            7 => true,
            k => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 or 7 columns, found {k}"),
                })
            }
        };
        match has_pressure {
            None => has_pressure = Some(with_pressure),
            Some(p) if p != with_pressure => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "column count changes within file".into(),
                })
            }
            _ => {}
        }
        let x = parse_int(toks[0], line_no, "x")?;
        let y = parse_int(toks[1], line_no, "y")?;
        let timestamp = parse_int(toks[2], line_no, "timestamp")?;
        let button = parse_int(toks[3], line_no, "button status")?;
        let pressure = if with_pressure {
            parse_int(toks[4], line_no, "azimuth")?;
            parse_int(toks[5], line_no, "altitude")?;
            let p = parse_int(toks[6], line_no, "pressure")?;
            if !(0..=MAX_PRESSURE as i64).contains(&p) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("pressure {p} outside [0, {MAX_PRESSURE}]"),
                });
            }
            p as u16
        } else {
            DEFAULT_PRESSURE
        };
        if let Some(prev) = samples.last() {
            let prev: &Sample = prev;
            if timestamp < prev.timestamp {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("timestamp {timestamp} decreases (previous {})", prev.timestamp),
                });
            }
        }
        samples.push(Sample {
            x,
            y,
            pressure,
            timestamp,
            pen_down: button != 0,
        });
    }
    for (line_no, rest) in lines {
        if !rest.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("more samples than the declared {count}"),
            });
        }
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Parse {
            line: 1,
            message: format!("{} samples, need at least {MIN_SAMPLES}", samples.len()),
        });
    }
    SignatureRecord::new(key, samples, has_pressure == Some(false))
}

/// Serializes a record as SVC text. Pressure-free records are written with
/// four columns, all others with seven (azimuth and altitude as 0).
pub fn emit_svc(record: &SignatureRecord) -> Vec<u8> {
    use std::fmt::Write;
    let mut out = String::with_capacity(record.samples.len() * 24 + 8);
    writeln!(out, "{}", record.samples.len()).unwrap();
    for s in &record.samples {
        let button = u8::from(s.pen_down);
        if record.pressure_free {
            writeln!(out, "{} {} {} {}", s.x, s.y, s.timestamp, button).unwrap();
        } else {
            writeln!(out, "{} {} {} {} 0 0 {}", s.x, s.y, s.timestamp, button, s.pressure).unwrap();
        }
    }
    out.into_bytes()
}
