//! Datasets: clip and image containers, frame-sampling protocols, positive groups,
//! procedural generators, and on-disk ingestion.

pub mod ingest;
pub mod raster;
pub mod sampling;
pub mod shapes;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub use ingest::{ingest_image_folder, write_image_dataset, write_video_dataset, IngestedDataset, ManifestRow};
pub use sampling::{make_positive_groups, sample_test_frames, sample_training_frames, subsample_egocentric, PositiveGroup};
pub use synth::{
    gen_cliff_views, gen_cue_conflict, gen_depth_dataset, gen_depth_scene, gen_rotation_videos, gen_silhouettes, CliffConfig, SceneKind, SceneSpec,
};

/// Ordered frames of one video. `times` holds azimuth in degrees for turntable clips and
/// seconds for streams; strictly increasing either way.
#[derive(Clone, Debug)]
pub struct VideoClip {
    pub id: String,
    pub label: Option<usize>,
    pub frames: Vec<Image>,
    pub times: Vec<f64>,
}

impl VideoClip {
    pub fn new(id: impl Into<String>, label: Option<usize>, frames: Vec<Image>, times: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if frames.len() < 2 {
            return Err(Error::Data(format!("clip `{id}` has {} frame(s); at least 2 required", frames.len())));
        }
        if times.len() != frames.len() {
            return Err(Error::Data(format!("clip `{id}`: {} frames but {} timestamps", frames.len(), times.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!("clip `{id}`: timestamps must be strictly increasing")));
        }
        Ok(Self { id, label, frames, times })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub id: String,
    pub image: Image,
    pub label: usize,
    /// Second label for cue-conflict images (the texture class).
    pub texture_label: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct VideoDataset {
    pub name: String,
    pub class_names: Vec<String>,
    pub clips: Vec<VideoClip>,
}

#[derive(Clone, Debug)]
pub struct ImageDataset {
    pub name: String,
    pub class_names: Vec<String>,
    pub items: Vec<LabeledImage>,
}

impl ImageDataset {
    pub fn images(&self) -> Vec<&Image> {
        self.items.iter().map(|i| &i.image).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }
}

/// Depth-order answer for a scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthAnswer {
    Yes,
    No,
}

impl DepthAnswer {
    pub fn from_bool(arrow_closer: bool) -> Self {
        if arrow_closer {
            Self::Yes
        } else {
            Self::No
        }
    }

    /// Class index used by the binary depth probe (`no` = 0, `yes` = 1).
    pub fn index(self) -> usize {
        match self {
            Self::No => 0,
            Self::Yes => 1,
        }
    }
}

pub const DEPTH_CLASSES: [&str; 2] = ["no", "yes"];
