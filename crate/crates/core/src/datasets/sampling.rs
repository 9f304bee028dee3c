//! Frame-sampling protocols and temporal positive groups.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::VideoClip;
use crate::error::{Error, Result};
use crate::seed;

/// `k` indices evenly spaced over an `n`-frame clip: `floor(i * n / k)`.
///
/// The spacing is deterministic; `_seed` is accepted for protocol symmetry with
/// [`sample_test_frames`].
pub fn sample_training_frames(n: usize, k: usize, _seed: u64) -> Result<Vec<usize>> {
    if k == 0 || n < k {
        return Err(Error::Sampling(format!("cannot take {k} evenly spaced frames from a {n}-frame clip")));
    }
    Ok((0..k).map(|i| i * n / k).collect())
}

/// `k` distinct indices drawn uniformly without replacement, returned in temporal order.
pub fn sample_test_frames(n: usize, k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if n < k {
        return Err(Error::Sampling(format!("cannot draw {k} distinct frames from a {n}-frame clip")));
    }
    let mut v = index::sample(&mut seed::rng(rng_seed), n, k).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Cuts a timestamped stream into `clip_seconds` clips at `fps`, one starting at every
/// `stride_seconds` boundary. Trailing partial clips are dropped.
pub fn subsample_egocentric(stream: &VideoClip, clip_seconds: f64, stride_seconds: f64, fps: f64) -> Result<Vec<VideoClip>> {
    let t0 = stream.times[0];
    let dt = (stream.times[stream.len() - 1] - t0) / (stream.len() - 1) as f64;
    let duration = stream.times[stream.len() - 1] - t0 + dt;
    let per_clip = (clip_seconds * fps).round() as usize;
    let mut clips = Vec::new();
    let mut start = 0.0;
    while start + clip_seconds <= duration + 1e-9 {
        let mut frames = Vec::with_capacity(per_clip);
        let mut times = Vec::with_capacity(per_clip);
        for j in 0..per_clip {
            let t = t0 + start + j as f64 / fps;
            let i = stream.times.partition_point(|&s| s < t - 1e-9).min(stream.len() - 1);
            frames.push(stream.frames[i].clone());
            times.push(t);
        }
        clips.push(VideoClip::new(format!("{}@{:.0}s", stream.id, start), stream.label, frames, times)?);
        start += stride_seconds;
    }
    Ok(clips)
}

/// Consecutive sampled frames grouped as mutual positives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveGroup {
    pub group_id: usize,
    /// Indices into the sampled-frame list.
    pub members: Vec<usize>,
}

/// Greedy partition of `n` ordered frames into runs of `window + 1`; `window = 0` gives
/// singletons. A short tail forms its own group.
pub fn make_positive_groups(n: usize, window: usize) -> Vec<PositiveGroup> {
    (0..n)
        .step_by(window + 1)
        .enumerate()
        .map(|(g, start)| PositiveGroup { group_id: g, members: (start..(start + window + 1).min(n)).collect() })
        .collect()
}
