//! Synthetic signature corpora.
//!
//! Every user owns a smooth base trajectory (Catmull-Rom spline through
//! random control points) with a pressure profile and pen-up gaps. Genuine
//! signatures perturb the control points and timing per session and per
//! signature; skilled forgeries add a larger shape distortion, an
//! independent and slower timing warp, and tremor, all scaled by
//! `forgery_noise`. With `forgery_noise = 0` a forgery is drawn exactly like
//! a genuine signature from a fresh session.
//!
//! Each user draws from its own random stream derived from the seed and the
//! user number, so users can be generated in parallel.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::write_corpus;
use crate::error::{Error, Result};
use crate::rng_for;
use crate::signature::{Sample, SignatureKey, SignatureKind, SignatureRecord, MAX_PRESSURE};

/// Samples per second of generated signatures.
pub const SAMPLE_RATE: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_sessions: usize,
    pub genuine_per_session: usize,
    pub forgeries_per_user: usize,
    pub seed: u64,
    /// Scale of the per-session shape and timing variation of genuine
    /// signatures.
    pub session_jitter: f64,
    /// Standard deviation of per-sample position noise, in tablet units.
    pub sample_jitter: f64,
    /// Scale of the forgery-specific distortion, timing warp and tremor.
    pub forgery_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 40,
            n_sessions: 4,
            genuine_per_session: 4,
            forgeries_per_user: 12,
            seed: 20170101,
            session_jitter: 1.0,
            sample_jitter: 1.5,
            forgery_noise: 1.5,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_users", self.n_users),
            ("genuine_per_session", self.genuine_per_session),
            ("forgeries_per_user", self.forgeries_per_user),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(1..=4).contains(&self.n_sessions) {
            return Err(Error::Config(format!("n_sessions must be 1-4, got {}", self.n_sessions)));
        }
        if self.n_users > 9999 {
            return Err(Error::Config("at most 9999 users".into()));
        }
        for (name, v) in [
            ("session_jitter", self.session_jitter),
            ("sample_jitter", self.sample_jitter),
            ("forgery_noise", self.forgery_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }
}

pub fn user_id(index: usize) -> String {
    format!("u{:04}", index + 1)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform Catmull-Rom spline through `pts` at parameter
/// `u` in `[0, pts.len() - 1]`; end points are duplicated.
fn catmull_rom(pts: &[f64], u: f64) -> f64 {
    let n = pts.len();
    let seg = (u.floor() as usize).min(n - 2);
    let t = u - seg as f64;
    let p = |i: isize| pts[i.clamp(0, n as isize - 1) as usize];
    let s = seg as isize;
    let (p0, p1, p2, p3) = (p(s - 1), p(s), p(s + 1), p(s + 2));
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

/// Monotone warp of [0, 1] onto itself: identity plus two sine harmonics.
/// Amplitudes are clamped so the derivative stays positive.
#[derive(Clone, Copy, Debug)]
struct TimeWarp {
    a1: f64,
    a2: f64,
}

impl TimeWarp {
    fn random(rng: &mut ChaCha8Rng, scale: f64) -> TimeWarp {
        let a1 = (normal(rng) * scale).clamp(-0.45, 0.45);
        let a2 = (normal(rng) * scale).clamp(-0.45, 0.45);
        TimeWarp { a1, a2 }
    }

    fn compose(self, other: TimeWarp) -> TimeWarp {
        TimeWarp {
            a1: (self.a1 + other.a1).clamp(-0.45, 0.45),
            a2: (self.a2 + other.a2).clamp(-0.45, 0.45),
        }
    }

    fn apply(self, tau: f64) -> f64 {
        tau + self.a1 * (PI * tau).sin() / PI + self.a2 * (2.0 * PI * tau).sin() / (2.0 * PI)
    }
}

#[derive(Clone, Debug)]
struct UserModel {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ps: Vec<f64>,
    /// Control-point spacing, the unit of shape perturbations.
    spacing: f64,
    duration: f64,
    /// Pen-up intervals as fractions of the spline parameter range.
    gaps: Vec<(f64, f64)>,
}

impl UserModel {
    fn random(rng: &mut ChaCha8Rng) -> UserModel {
        let n = rng.gen_range(9..=16);
        let width = rng.gen_range(3000.0..7000.0);
        let height = width * rng.gen_range(0.15..0.35);
        let spacing = width / (n - 1) as f64;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut ps = Vec::with_capacity(n);
        for i in 0..n {
            // Occasional backward strokes make loops and retraces.
            let back = if rng.gen_bool(0.25) { -1.2 * spacing } else { 0.0 };
            xs.push(spacing * i as f64 + back + 0.3 * spacing * normal(rng));
            ys.push(height * normal(rng));
            ps.push(rng.gen_range(250.0..950.0));
        }
        let n_gaps = rng.gen_range(1..=3);
        let mut gaps: Vec<(f64, f64)> = (0..n_gaps)
            .map(|g| {
                let centre = (g as f64 + rng.gen_range(0.3..0.7)) / n_gaps as f64;
                let half = rng.gen_range(0.012..0.03);
                ((centre - half).max(0.05), (centre + half).min(0.95))
            })
            .collect();
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        UserModel {
            xs,
            ys,
            ps,
            spacing,
            duration: rng.gen_range(1.5..4.0),
            gaps,
        }
    }
}

/// Systematic variation shared by all signatures of one session.
#[derive(Clone, Debug)]
struct Session {
    dx: Vec<f64>,
    dy: Vec<f64>,
    warp: TimeWarp,
    speed: f64,
    slant: f64,
}

impl Session {
    fn random(rng: &mut ChaCha8Rng, n: usize, spacing: f64, jitter: f64) -> Session {
        let s = 0.06 * spacing * jitter;
        Session {
            dx: (0..n).map(|_| s * normal(rng)).collect(),
            dy: (0..n).map(|_| s * normal(rng)).collect(),
            warp: TimeWarp::random(rng, 0.08 * jitter),
            speed: (1.0 + 0.05 * jitter * normal(rng)).clamp(0.8, 1.2),
            slant: 0.03 * jitter * normal(rng),
        }
    }
}

struct Forgery {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dp: Vec<f64>,
    warp: TimeWarp,
    slowdown: f64,
    tremor_amp: f64,
    tremor_hz: f64,
    tremor_phase: f64,
}

fn draw_forgery(rng: &mut ChaCha8Rng, n: usize, spacing: f64, noise: f64) -> Forgery {
    let s = 0.22 * spacing * noise;
    Forgery {
        dx: (0..n).map(|_| s * normal(rng)).collect(),
        dy: (0..n).map(|_| s * normal(rng)).collect(),
        dp: (0..n).map(|_| 90.0 * noise * normal(rng)).collect(),
        warp: TimeWarp::random(rng, 0.2 * noise),
        slowdown: 1.0 + noise * rng.gen_range(0.15..0.6),
        tremor_amp: 0.012 * spacing * noise,
        tremor_hz: rng.gen_range(6.0..11.0),
        tremor_phase: rng.gen_range(0.0..2.0 * PI),
    }
}

fn render(
    user: &UserModel,
    session: &Session,
    forgery: Option<&Forgery>,
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    key: SignatureKey,
) -> SignatureRecord {
    let n = user.xs.len();
    // Per-signature variation, smaller than the session one.
    let sig = 0.035 * user.spacing * cfg.session_jitter;
    let dx: Vec<f64> = (0..n).map(|_| sig * normal(rng)).collect();
    let dy: Vec<f64> = (0..n).map(|_| sig * normal(rng)).collect();
    let sig_warp = TimeWarp::random(rng, 0.04 * cfg.session_jitter);
    let sig_speed = (1.0 + 0.03 * cfg.session_jitter * normal(rng)).clamp(0.9, 1.1);

    let mut warp = session.warp.compose(sig_warp);
    let mut duration = user.duration * session.speed * sig_speed;
    let mut xs: Vec<f64> = (0..n).map(|i| user.xs[i] + session.dx[i] + dx[i]).collect();
    let mut ys: Vec<f64> = (0..n).map(|i| user.ys[i] + session.dy[i] + dy[i]).collect();
    let mut ps = user.ps.clone();
    if let Some(f) = forgery {
        warp = warp.compose(f.warp);
        duration *= f.slowdown;
        for i in 0..n {
            xs[i] += f.dx[i];
            ys[i] += f.dy[i];
            ps[i] += f.dp[i];
        }
    }

    let t = ((duration * SAMPLE_RATE).round() as usize).max(16);
    let last = (n - 1) as f64;
    let mut samples = Vec::with_capacity(t);
    for k in 0..t {
        let tau = k as f64 / (t - 1) as f64;
        let u = warp.apply(tau).clamp(0.0, 1.0);
        let mut x = catmull_rom(&xs, u * last);
        let mut y = catmull_rom(&ys, u * last);
        let p = catmull_rom(&ps, u * last);
        x += session.slant * y;
        if let Some(f) = forgery {
            let secs = k as f64 / SAMPLE_RATE;
            let phase = 2.0 * PI * f.tremor_hz * secs + f.tremor_phase;
            x += f.tremor_amp * phase.sin();
            y += f.tremor_amp * (1.3 * phase).cos();
        }
        x += cfg.sample_jitter * normal(rng);
        y += cfg.sample_jitter * normal(rng);
        let pen_down = !user.gaps.iter().any(|&(a, b)| u > a && u < b);
        let pressure = if pen_down {
            p.round().clamp(1.0, f64::from(MAX_PRESSURE)) as u16
        } else {
            0
        };
        samples.push(Sample {
            x: x.round() as i64,
            y: y.round() as i64,
            pressure,
            timestamp: 10 * k as i64,
            pen_down,
        });
    }
    SignatureRecord::new(key, samples, false).expect("generated records are valid")
}

fn generate_user(cfg: &SynthConfig, index: usize) -> Vec<SignatureRecord> {
    let mut rng = rng_for(cfg.seed, index as u64 + 1);
    let user = UserModel::random(&mut rng);
    let n = user.xs.len();
    let id = user_id(index);
    let sessions: Vec<Session> = (0..cfg.n_sessions)
        .map(|_| Session::random(&mut rng, n, user.spacing, cfg.session_jitter))
        .collect();
    let mut out = Vec::with_capacity(cfg.n_sessions * cfg.genuine_per_session + cfg.forgeries_per_user);
    for (s, session) in sessions.iter().enumerate() {
        for i in 0..cfg.genuine_per_session {
            let key = SignatureKey {
                user: id.clone(),
                kind: SignatureKind::Genuine,
                session: s as u8 + 1,
                index: i as u32 + 1,
            };
            out.push(render(&user, session, None, &mut rng, cfg, key));
        }
    }
    for i in 0..cfg.forgeries_per_user {
        // The forger's own session; every forgery is an independent attempt.
        let session = Session::random(&mut rng, n, user.spacing, cfg.session_jitter);
        let forgery = draw_forgery(&mut rng, n, user.spacing, cfg.forgery_noise);
        let key = SignatureKey {
            user: id.clone(),
            kind: SignatureKind::SkilledForgery,
            session: (i % cfg.n_sessions) as u8 + 1,
            index: (i / cfg.n_sessions) as u32 + 1,
        };
        out.push(render(&user, &session, Some(&forgery), &mut rng, cfg, key));
    }
    out
}

/// All records of the corpus, sorted by key.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SignatureRecord>> {
    cfg.validate()?;
    let per_user: Vec<Vec<SignatureRecord>> = (0..cfg.n_users).into_par_iter().map(|u| generate_user(cfg, u)).collect();
    let mut records: Vec<SignatureRecord> = per_user.into_iter().flatten().collect();
    records.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(records)
}

/// Generates the corpus and writes it under `root`; returns the file count.
pub fn generate_to(cfg: &SynthConfig, root: &Path) -> Result<usize> {
    write_corpus(root, &generate(cfg)?)
}
