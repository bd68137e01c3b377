//! Video dataset generation and its on-disk format.
//!
//! `videos.bin` holds one record per clip: map id (u32), frame count (u32),
//! then `frame_count × ray_count` `f32` depths, all little-endian. The JSON
//! manifest next to it lists each record's byte offset with provenance.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::planner::{goal_field, plan_expert_path, render_video, ExpertConfig};
use crate::error::{Error, Result};
use crate::rng::{rng_from, tag};
use crate::sim::agent::random_pose;
use crate::sim::{geodesic_field, AgentConfig, Cell, MazeMap, Observation, Pose};

pub const VIDEO_FORMAT: &str = "VIDEO v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoDatasetSpec {
    pub n_videos: usize,
    pub clip_frames: usize,
    /// Minimum start–goal geodesic distance in expert steps.
    pub min_goal_steps: usize,
    /// Start/goal draws per video before giving up.
    pub max_attempts: usize,
}

impl Default for VideoDatasetSpec {
    fn default() -> Self {
        VideoDatasetSpec {
            n_videos: 2000,
            clip_frames: 40,
            min_goal_steps: 20,
            max_attempts: 500,
        }
    }
}

/// Where a clip came from. Never part of any training input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub map_id: u32,
    pub start: Pose,
    pub goal: Cell,
    pub expert: ExpertConfig,
}

/// Observations only; there is deliberately no action field.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub meta: ClipMeta,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoDataset {
    pub seed: u64,
    pub ray_count: usize,
    /// Generation seeds of the source maps, indexed by `ClipMeta::map_id`.
    pub map_seeds: Vec<u64>,
    pub clips: Vec<VideoClip>,
}

struct PreparedMap<'a> {
    map: &'a MazeMap,
    inflated: MazeMap,
    clear: Vec<Cell>,
}

pub fn generate_video_dataset(
    maps: &[MazeMap],
    spec: &VideoDatasetSpec,
    view: &AgentConfig,
    seed: u64,
) -> Result<VideoDataset> {
    if spec.n_videos == 0 || maps.is_empty() {
        return Err(Error::InvalidArgument("need at least one video and one map".into()));
    }
    if spec.clip_frames < 2 {
        return Err(Error::InvalidArgument("clips need at least 2 frames".into()));
    }
    let prepared: Vec<PreparedMap> = maps
        .iter()
        .map(|map| PreparedMap {
            map,
            inflated: map.inflated(view.body_radius),
            clear: map.clear_cells(view.body_radius),
        })
        .collect();
    let clips = (0..spec.n_videos)
        .into_par_iter()
        .map(|i| generate_one(&prepared, spec, view, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoDataset {
        seed,
        ray_count: view.ray_count,
        map_seeds: maps.iter().map(|m| m.seed()).collect(),
        clips,
    })
}

fn generate_one(
    maps: &[PreparedMap],
    spec: &VideoDatasetSpec,
    view: &AgentConfig,
    seed: u64,
    index: usize,
) -> Result<VideoClip> {
    let mut rng = rng_from(seed, &[tag("video"), index as u64]);
    let map_id = rng.random_range(0..maps.len());
    let pm = &maps[map_id];
    let expert = ExpertConfig::sample(&mut rng);
    let min_dist = spec.min_goal_steps as f64 * expert.step_size;
    for _ in 0..spec.max_attempts {
        let start = random_pose(&pm.clear, pm.map, &mut rng);
        let from_start = geodesic_field(&pm.inflated, &[pm.map.cell_at(start.x, start.y).expect("clear cell")])?;
        let goals: Vec<Cell> = pm
            .clear
            .iter()
            .copied()
            .filter(|&c| {
                let d = from_start.get(c);
                d.is_finite() && d >= min_dist
            })
            .collect();
        if goals.is_empty() {
            continue;
        }
        let goal = goals[rng.random_range(0..goals.len())];
        let field = goal_field(&pm.inflated, goal)?;
        let Ok(mut path) = plan_expert_path(pm.map, &field, start, goal, &expert, view.body_radius) else {
            continue;
        };
        if path.len() < spec.clip_frames {
            continue;
        }
        path.truncate(spec.clip_frames);
        return Ok(VideoClip {
            meta: ClipMeta {
                map_id: map_id as u32,
                start,
                goal,
                expert,
            },
            observations: render_video(&path, pm.map, view),
        });
    }
    Err(Error::Generation {
        attempts: spec.max_attempts,
        reason: format!("no expert path of {} frames for video {index}", spec.clip_frames),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub offset: u64,
    pub frames: u32,
    #[serde(flatten)]
    pub meta: ClipMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub seed: u64,
    pub ray_count: usize,
    pub map_seeds: Vec<u64>,
    pub records: Vec<RecordEntry>,
}

/// Appends one record; `actions` (codes) follow the frames when present.
pub(crate) fn write_record(
    out: &mut impl Write,
    map_id: u32,
    frames: &[Observation],
    actions: Option<&[u8]>,
) -> std::io::Result<u64> {
    let mut n = 8u64;
    out.write_all(&map_id.to_le_bytes())?;
    out.write_all(&(frames.len() as u32).to_le_bytes())?;
    for f in frames {
        for d in &f.depths {
            out.write_all(&d.to_le_bytes())?;
            n += 4;
        }
    }
    if let Some(a) = actions {
        out.write_all(a)?;
        n += a.len() as u64;
    }
    Ok(n)
}

/// Parses the record at `offset`, returning map id, frames and `n_actions`
/// trailing action codes.
pub(crate) fn read_record(
    bytes: &[u8],
    offset: u64,
    ray_count: usize,
    with_actions: bool,
) -> Result<(u32, Vec<Observation>, Vec<u8>)> {
    let bad = |r: &str| Error::format("dataset record", r);
    let at = |pos: usize, n: usize| bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"));
    let mut pos = offset as usize;
    let map_id = u32::from_le_bytes(at(pos, 4)?.try_into().expect("4 bytes"));
    let frames = u32::from_le_bytes(at(pos + 4, 4)?.try_into().expect("4 bytes")) as usize;
    pos += 8;
    let payload = at(pos, frames * ray_count * 4)?;
    pos += payload.len();
    let observations = payload
        .chunks_exact(ray_count * 4)
        .map(|frame| Observation {
            depths: frame
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        })
        .collect();
    let actions = if with_actions {
        at(pos, frames.saturating_sub(1))?.to_vec()
    } else {
        Vec::new()
    };
    Ok((map_id, observations, actions))
}

impl VideoDataset {
    /// Writes `videos.bin` and `videos.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let bin = dir.join("videos.bin");
        let file = std::fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
        let mut out = BufWriter::new(file);
        let mut offset = 0u64;
        let mut records = Vec::with_capacity(self.clips.len());
        for clip in &self.clips {
            records.push(RecordEntry {
                offset,
                frames: clip.observations.len() as u32,
                meta: clip.meta,
            });
            offset += write_record(&mut out, clip.meta.map_id, &clip.observations, None)
                .map_err(|e| Error::io(&bin, e))?;
        }
        out.flush().map_err(|e| Error::io(&bin, e))?;
        let manifest = DatasetManifest {
            format: VIDEO_FORMAT.into(),
            seed: self.seed,
            ray_count: self.ray_count,
            map_seeds: self.map_seeds.clone(),
            records,
        };
        write_json(&dir.join("videos.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = read_json(&dir.join("videos.json"))?;
        if manifest.format != VIDEO_FORMAT {
            return Err(Error::format("videos.json", format!("unexpected format {:?}", manifest.format)));
        }
        let bin = dir.join("videos.bin");
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        let clips = manifest
            .records
            .iter()
            .map(|r| {
                let (map_id, observations, _) = read_record(&bytes, r.offset, manifest.ray_count, false)?;
                if map_id != r.meta.map_id || observations.len() != r.frames as usize {
                    return Err(Error::format("videos.bin", "record disagrees with manifest"));
                }
                Ok(VideoClip { meta: r.meta, observations })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VideoDataset {
            seed: manifest.seed,
            ray_count: manifest.ray_count,
            map_seeds: manifest.map_seeds,
            clips,
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_maze, MazeSpec};

    fn small_maps() -> Vec<MazeMap> {
        let spec = MazeSpec { width: 80, height: 80, room_count: 4, ..MazeSpec::default() };
        (0..2).map(|s| generate_maze(s, &spec).unwrap()).collect()
    }

    fn small_spec() -> VideoDatasetSpec {
        VideoDatasetSpec { n_videos: 12, clip_frames: 20, min_goal_steps: 5, max_attempts: 500 }
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let maps = small_maps();
        let view = AgentConfig::default();
        let a = generate_video_dataset(&maps, &small_spec(), &view, 9).unwrap();
        let b = generate_video_dataset(&maps, &small_spec(), &view, 9).unwrap();
        assert_eq!(a, b);
        for clip in &a.clips {
            assert_eq!(clip.observations.len(), 20);
            assert!(clip.meta.expert.is_listed());
            let map = &maps[clip.meta.map_id as usize];
            assert!(clip.meta.start.is_valid(map));
            assert!(map.is_free(clip.meta.goal));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let maps = small_maps();
        let spec = VideoDatasetSpec { n_videos: 3, ..small_spec() };
        let ds = generate_video_dataset(&maps, &spec, &AgentConfig::default(), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        assert_eq!(VideoDataset::load(dir.path()).unwrap(), ds);
    }
}
