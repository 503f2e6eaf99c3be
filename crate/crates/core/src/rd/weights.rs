use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rect::BoxRect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub rect: BoxRect,
    pub weight: f64,
}

/// Region weights `w_i` over boxes of area `A_i`, a background weight and a
/// global event weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionWeights {
    pub regions: Vec<Region>,
    pub event_weight: f64,
    pub background_weight: f64,
}

impl DistortionWeights {
    pub fn uniform(background_weight: f64, event_weight: f64) -> Self {
        Self { regions: Vec::new(), event_weight, background_weight }
    }

    pub fn with_rois(mut self, boxes: impl IntoIterator<Item = BoxRect>, weight: f64) -> Self {
        self.regions.extend(boxes.into_iter().map(|rect| Region { rect, weight }));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.event_weight) || !ok(self.background_weight) || self.regions.iter().any(|r| !ok(r.weight)) {
            return Err(Error::InvalidArgument("distortion weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Integer per-pixel weights in units of `1 / side^2`, so that a region of
/// area `A` and weight `w` contributes `round(w * side^2 / A)` per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMap {
    side: u32,
    pixel: Vec<u64>,
    event: u64,
}

impl WeightMap {
    /// Pixels outside `active` (the unpadded extent) weigh nothing.
    pub fn new(weights: &DistortionWeights, side: u32, active: (u32, u32)) -> Result<Self> {
        weights.validate()?;
        let scale = side as f64 * side as f64;
        let bg = (weights.background_weight).round() as u64;
        let mut pixel = vec![0u64; side as usize * side as usize];
        let mut covered = vec![false; pixel.len()];
        for r in &weights.regions {
            let Some(rect) = r.rect.clamp_to(side as f64) else { continue };
            let w = (r.weight * scale / rect.area().max(1.0)).round() as u64;
            // pixels whose centre lies in the box
            let x0 = (rect.x - 0.5).ceil().max(0.0) as u32;
            let y0 = (rect.y - 0.5).ceil().max(0.0) as u32;
            let x1 = ((rect.right() - 0.5).ceil().max(0.0) as u32).min(side);
            let y1 = ((rect.bottom() - 0.5).ceil().max(0.0) as u32).min(side);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = (y * side + x) as usize;
                    pixel[i] = if covered[i] { pixel[i].max(w) } else { w };
                    covered[i] = true;
                }
            }
        }
        for (i, (p, c)) in pixel.iter_mut().zip(&covered).enumerate() {
            let (x, y) = (i as u32 % side, i as u32 / side);
            if x >= active.0 || y >= active.1 {
                *p = 0;
            } else if !c {
                *p = bg;
            }
        }
        Ok(Self { side, pixel, event: (weights.event_weight * scale).round() as u64 })
    }

    pub fn uniform(side: u32, pixel_weight: u64, event_weight: u64) -> Self {
        Self { side, pixel: vec![pixel_weight; side as usize * side as usize], event: event_weight }
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u64 {
        self.pixel[(y * self.side + x) as usize]
    }

    pub fn event_weight(&self) -> u64 {
        self.event
    }

    pub fn without_events(mut self) -> Self {
        self.event = 0;
        self
    }
}
