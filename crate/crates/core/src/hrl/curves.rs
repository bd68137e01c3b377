//! Learning curves and sample-efficiency comparison.

use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::task::EpisodeLog;
use crate::error::{Error, Result};

pub const NOT_REACHED: &str = "not reached";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_steps: u64,
    /// Mean episode reward over the most recent completed episodes.
    pub reward: f64,
    pub success_rate: f64,
    /// Episodes the means cover.
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub scheme: String,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// Running maximum of the reward, for plotting.
    pub fn monotone_reward(&self) -> Vec<f64> {
        self.points
            .iter()
            .scan(f64::NEG_INFINITY, |m, p| {
                *m = m.max(p.reward);
                Some(*m)
            })
            .collect()
    }

    /// First recorded step count at which the success rate reaches `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<u64> {
        self.points
            .iter()
            .find(|p| p.episodes > 0 && p.success_rate >= threshold)
            .map(|p| p.env_steps)
    }
}

/// Records a curve point every `interval` environment steps from a trailing
/// window of finished episodes.
#[derive(Debug, Clone)]
pub struct CurveRecorder {
    interval: u64,
    window: usize,
    recent: VecDeque<EpisodeLog>,
    next: u64,
    points: Vec<CurvePoint>,
    episodes: usize,
}

impl CurveRecorder {
    pub fn new(interval: u64, window: usize) -> Self {
        CurveRecorder {
            interval,
            window,
            recent: VecDeque::with_capacity(window),
            next: interval,
            points: Vec::new(),
            episodes: 0,
        }
    }

    pub fn episode(&mut self, log: &EpisodeLog) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(*log);
        self.episodes += 1;
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    fn point(&self, env_steps: u64) -> CurvePoint {
        let n = self.recent.len();
        let (r, s) = self
            .recent
            .iter()
            .fold((0.0, 0usize), |(r, s), l| (r + l.reward, s + usize::from(l.success)));
        let d = n.max(1) as f64;
        CurvePoint {
            env_steps,
            reward: r / d,
            success_rate: s as f64 / d,
            episodes: n,
        }
    }

    /// Emits every grid point at or below `env_steps`.
    pub fn advance(&mut self, env_steps: u64) {
        while env_steps >= self.next {
            let p = self.point(self.next);
            self.points.push(p);
            self.next += self.interval;
        }
    }

    pub fn finish(self, scheme: &str, seed: u64) -> LearningCurve {
        LearningCurve {
            scheme: scheme.to_string(),
            seed,
            points: self.points,
        }
    }
}

/// Median of step counts where `None` means never reached and sorts last.
pub fn median_steps(values: &[Option<u64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|s| s.map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub scheme: String,
    pub threshold: f64,
    pub seeds: usize,
    pub median_steps: Option<f64>,
    /// `median_steps / reference median`; `None` when this scheme never
    /// reached the threshold.
    pub ratio: Option<f64>,
}

/// Median steps to `threshold` success per scheme and the ratio to the
/// `reference` scheme. Schemes keep their order of first appearance.
pub fn compare_sample_efficiency(curves: &[LearningCurve], threshold: f64, reference: &str) -> Result<Vec<RatioRow>> {
    let mut schemes: Vec<&str> = Vec::new();
    for c in curves {
        if !schemes.contains(&c.scheme.as_str()) {
            schemes.push(&c.scheme);
        }
    }
    let median_of = |s: &str| {
        let steps: Vec<Option<u64>> = curves
            .iter()
            .filter(|c| c.scheme == s)
            .map(|c| c.steps_to_threshold(threshold))
            .collect();
        (median_steps(&steps), steps.len())
    };
    if !schemes.contains(&reference) {
        return Err(Error::InvalidArgument(format!("no curves for reference scheme {reference:?}")));
    }
    let (ref_median, _) = median_of(reference);
    Ok(schemes
        .into_iter()
        .map(|s| {
            let (m, seeds) = median_of(s);
            let ratio = match (m, ref_median) {
                (Some(m), Some(r)) => Some(m / r),
                (Some(_), None) => Some(0.0),
                (None, _) => None,
            };
            RatioRow {
                scheme: s.to_string(),
                threshold,
                seeds,
                median_steps: m,
                ratio,
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct CurveCsvRow {
    scheme: String,
    seed: u64,
    env_steps: u64,
    reward: f64,
    success_rate: f64,
}

#[derive(Serialize)]
struct RatioCsvRow<'a> {
    scheme: &'a str,
    threshold: f64,
    seeds: usize,
    median_steps: String,
    ratio: String,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display().to_string(), e.to_string())
}

pub fn write_curves_csv(curves: &[LearningCurve], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for c in curves {
        for p in &c.points {
            w.serialize(CurveCsvRow {
                scheme: c.scheme.clone(),
                seed: c.seed,
                env_steps: p.env_steps,
                reward: p.reward,
                success_rate: p.success_rate,
            })
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads curves back; episode counts are not stored and come back as 1.
pub fn read_curves_csv(path: &Path) -> Result<Vec<LearningCurve>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out: Vec<LearningCurve> = Vec::new();
    for row in r.deserialize::<CurveCsvRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let p = CurvePoint {
            env_steps: row.env_steps,
            reward: row.reward,
            success_rate: row.success_rate,
            episodes: 1,
        };
        match out.last_mut() {
            Some(c) if c.scheme == row.scheme && c.seed == row.seed => c.points.push(p),
            _ => out.push(LearningCurve {
                scheme: row.scheme,
                seed: row.seed,
                points: vec![p],
            }),
        }
    }
    Ok(out)
}

pub fn write_ratio_csv(rows: &[RatioRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let fmt = |v: Option<f64>| v.map_or_else(|| NOT_REACHED.to_string(), |x| format!("{x}"));
    for r in rows {
        w.serialize(RatioCsvRow {
            scheme: &r.scheme,
            threshold: r.threshold,
            seeds: r.seeds,
            median_steps: fmt(r.median_steps),
            ratio: fmt(r.ratio),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
