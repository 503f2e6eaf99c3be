use serde::{Deserialize, Serialize};

use crate::rect::{BoxRect, ClassId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Intensity,
    Event,
}

impl Source {
    /// Feature encoding: 0 for intensity, 1 for events.
    pub fn flag(self) -> u8 {
        match self {
            Source::Intensity => 0,
            Source::Event => 1,
        }
    }
}

/// Raw detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: BoxRect,
    pub class: ClassId,
    pub score: f64,
}

/// A tracked or fused box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub rect: BoxRect,
    pub class: ClassId,
    pub score: f64,
    pub source: Source,
    /// Track id, unique per tracker; fused boxes carry a source-tagged id.
    pub id: u64,
}

impl BoundingBox {
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        self.rect.iou(&other.rect)
    }

    /// Id unique across both trackers: intensity ids even, event ids odd.
    pub fn tagged_id(&self) -> u64 {
        self.id * 2 + self.source.flag() as u64
    }
}
