use serde::{Deserialize, Serialize};

/// Object class label. Detectors with a single vocabulary use [`ClassId::OBJECT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u16);

impl ClassId {
    pub const OBJECT: ClassId = ClassId(0);
}

/// Axis-aligned box in pixel units, `[x, x+w) x [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    pub fn intersection(&self, o: &BoxRect) -> Option<BoxRect> {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.right().min(o.right());
        let y1 = self.bottom().min(o.bottom());
        (x1 > x0 && y1 > y0).then(|| BoxRect::from_corners(x0, y0, x1, y1))
    }

    /// Smallest box containing both.
    pub fn hull(&self, o: &BoxRect) -> BoxRect {
        BoxRect::from_corners(
            self.x.min(o.x),
            self.y.min(o.y),
            self.right().max(o.right()),
            self.bottom().max(o.bottom()),
        )
    }

    pub fn iou(&self, o: &BoxRect) -> f64 {
        let inter = self.intersection(o).map_or(0.0, |r| r.area());
        let union = self.area() + o.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    /// Clips to `[0, side)`; `None` if nothing is left.
    pub fn clamp_to(&self, side: f64) -> Option<BoxRect> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(side);
        let y1 = self.bottom().min(side);
        (x1 > x0 && y1 > y0).then(|| BoxRect::from_corners(x0, y0, x1, y1))
    }

    pub fn contains(&self, o: &BoxRect) -> bool {
        const EPS: f64 = 1e-9;
        o.x >= self.x - EPS && o.y >= self.y - EPS && o.right() <= self.right() + EPS && o.bottom() <= self.bottom() + EPS
    }
}
