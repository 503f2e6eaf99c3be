use serde::{Deserialize, Serialize};

/// Square, axis-aligned pixel block `[x, x+side) x [y, y+side)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub x: u32,
    pub y: u32,
    pub side: u32,
}

impl Block {
    pub fn new(x: u32, y: u32, side: u32) -> Self {
        Self { x, y, side }
    }

    pub fn area(&self) -> u64 {
        self.side as u64 * self.side as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.side && y < self.y + self.side
    }

    /// Z-order children: top-left, top-right, bottom-left, bottom-right.
    pub fn children(&self) -> [Block; 4] {
        let h = self.side / 2;
        [
            Block::new(self.x, self.y, h),
            Block::new(self.x + h, self.y, h),
            Block::new(self.x, self.y + h, h),
            Block::new(self.x + h, self.y + h, h),
        ]
    }

    pub fn within(&self, frame_side: u32) -> bool {
        self.side > 0 && self.x + self.side <= frame_side && self.y + self.side <= frame_side
    }

    /// Row-major pixel coordinates inside the block.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.y..self.y + self.side).flat_map(move |y| (self.x..self.x + self.side).map(move |x| (x, y)))
    }
}
