//! Pseudo-labeling expert videos with the inverse model, and slicing the
//! labeled videos into fixed-length training clips.
//!
//! `labeled.bin` mirrors `videos.bin`, with `frame_count − 1` action codes
//! (one byte each) appended to every record.

use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inverse::InverseModel;
use crate::error::{Error, Result};
use crate::expert::dataset::{read_json, read_record, write_json, write_record, DatasetManifest, RecordEntry};
use crate::expert::{VideoClip, VideoDataset};
use crate::sim::{Action, Observation};

pub const LABELED_FORMAT: &str = "LABELED v1";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVideo {
    pub video_id: u32,
    pub observations: Vec<Observation>,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledClip {
    pub video_id: u32,
    pub observations: Vec<Observation>,
    pub pseudo_actions: Vec<Action>,
}

/// Labels each consecutive frame pair with the inverse model's argmax.
pub fn pseudo_label(model: &InverseModel, video: &VideoClip, video_id: u32) -> Result<LabeledVideo> {
    if video.observations.len() < 2 {
        return Err(Error::InvalidArgument("pseudo-labeling needs at least two frames".into()));
    }
    let actions = video
        .observations
        .windows(2)
        .map(|w| model.predict(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledVideo {
        video_id,
        observations: video.observations.clone(),
        actions,
    })
}

pub fn pseudo_label_dataset(model: &InverseModel, videos: &VideoDataset) -> Result<Vec<LabeledVideo>> {
    videos
        .clips
        .par_iter()
        .enumerate()
        .map(|(i, v)| pseudo_label(model, v, i as u32))
        .collect()
}

/// Clips of `horizon` frames every `stride` frames; a video shorter than the
/// horizon yields none.
pub fn slice_clips(video: &LabeledVideo, horizon: usize, stride: usize) -> Vec<PseudoLabeledClip> {
    let len = video.observations.len();
    if horizon < 2 || stride == 0 || len < horizon {
        return Vec::new();
    }
    (0..=(len - horizon) / stride)
        .map(|k| {
            let s = k * stride;
            PseudoLabeledClip {
                video_id: video.video_id,
                observations: video.observations[s..s + horizon].to_vec(),
                pseudo_actions: video.actions[s..s + horizon - 1].to_vec(),
            }
        })
        .collect()
}

pub fn slice_all(videos: &[LabeledVideo], horizon: usize, stride: usize) -> Vec<PseudoLabeledClip> {
    videos.iter().flat_map(|v| slice_clips(v, horizon, stride)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelStats {
    /// Fraction of labels per action code.
    pub fractions: [f64; 4],
    pub total: usize,
}

pub fn label_stats(videos: &[LabeledVideo]) -> LabelStats {
    let mut counts = [0usize; 4];
    for a in videos.iter().flat_map(|v| &v.actions) {
        counts[a.index()] += 1;
    }
    let total: usize = counts.iter().sum();
    let mut fractions = [0.0; 4];
    if total > 0 {
        for (f, c) in fractions.iter_mut().zip(counts) {
            *f = c as f64 / total as f64;
        }
    }
    LabelStats { fractions, total }
}

/// Writes `labeled.bin` and `labeled.json`; provenance comes from `source`.
pub fn save_labeled(videos: &[LabeledVideo], source: &VideoDataset, dir: &Path) -> Result<()> {
    let bin = dir.join("labeled.bin");
    let file = std::fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    let mut out = BufWriter::new(file);
    let mut offset = 0u64;
    let mut records = Vec::with_capacity(videos.len());
    for v in videos {
        let meta = source
            .clips
            .get(v.video_id as usize)
            .ok_or_else(|| Error::Contract(format!("labeled video {} has no source clip", v.video_id)))?
            .meta;
        records.push(RecordEntry {
            offset,
            frames: v.observations.len() as u32,
            meta,
        });
        let codes: Vec<u8> = v.actions.iter().map(|a| a.code()).collect();
        offset += write_record(&mut out, meta.map_id, &v.observations, Some(&codes)).map_err(|e| Error::io(&bin, e))?;
    }
    out.flush().map_err(|e| Error::io(&bin, e))?;
    write_json(
        &dir.join("labeled.json"),
        &DatasetManifest {
            format: LABELED_FORMAT.into(),
            seed: source.seed,
            ray_count: source.ray_count,
            map_seeds: source.map_seeds.clone(),
            records,
        },
    )
}

pub fn load_labeled(dir: &Path) -> Result<Vec<LabeledVideo>> {
    let manifest: DatasetManifest = read_json(&dir.join("labeled.json"))?;
    if manifest.format != LABELED_FORMAT {
        return Err(Error::format("labeled.json", format!("unexpected format {:?}", manifest.format)));
    }
    let bin = dir.join("labeled.bin");
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    manifest
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (_, observations, codes) = read_record(&bytes, r.offset, manifest.ray_count, true)?;
            let actions = codes.into_iter().map(Action::from_code).collect::<Result<Vec<_>>>()?;
            Ok(LabeledVideo {
                video_id: i as u32,
                observations,
                actions,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(len: usize) -> LabeledVideo {
        LabeledVideo {
            video_id: 0,
            observations: (0..len).map(|i| Observation { depths: vec![i as f32; 2] }).collect(),
            actions: (0..len.saturating_sub(1)).map(|i| Action::ALL[i % 4]).collect(),
        }
    }

    #[test]
    fn clip_counts() {
        assert_eq!(slice_clips(&video(40), 10, 5).len(), 7);
        assert_eq!(slice_clips(&video(10), 10, 5).len(), 1);
        assert_eq!(slice_clips(&video(9), 10, 5).len(), 0);
    }

    #[test]
    fn clip_windows_cover_expected_frames() {
        let clips = slice_clips(&video(40), 10, 5);
        for (k, c) in clips.iter().enumerate() {
            assert_eq!(c.observations.len(), 10);
            assert_eq!(c.pseudo_actions.len(), 9);
            assert_eq!(c.observations[0].depths[0], (k * 5) as f32);
            assert_eq!(c.pseudo_actions[0], Action::ALL[(k * 5) % 4]);
        }
    }

    #[test]
    fn label_fractions_sum_to_one() {
        let s = label_stats(&[video(40)]);
        assert_eq!(s.total, 39);
        assert!((s.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
