use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::block::Block;
use crate::error::{Error, Result};

/// 8-bit grayscale raster with a square power-of-two side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    side: u32,
    pixels: Vec<u8>,
    pub timestamp_index: u64,
}

impl Frame {
    pub fn new(side: u32, pixels: Vec<u8>, timestamp_index: u64) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("frame side {side} is not a power of two")));
        }
        let expected = side as usize * side as usize;
        if pixels.len() != expected {
            return Err(Error::SizeMismatch {
                expected: format!("{expected} pixels"),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        Ok(Self { side, pixels, timestamp_index })
    }

    pub fn filled(side: u32, value: u8, timestamp_index: u64) -> Result<Self> {
        Self::new(side, vec![value; side as usize * side as usize], timestamp_index)
    }

    /// Edge-replicate pads an arbitrary `width x height` raster up to the next
    /// power-of-two square. The returned block-free extent marks the pixels
    /// that carry distortion weight.
    pub fn from_raw_padded(width: u32, height: u32, data: &[u8], timestamp_index: u64) -> Result<PaddedFrame> {
        if width == 0 || height == 0 || data.len() != width as usize * height as usize {
            return Err(Error::SizeMismatch {
                expected: format!("{width}x{height} raster"),
                actual: format!("{} bytes", data.len()),
            });
        }
        let side = width.max(height).next_power_of_two();
        let mut pixels = Vec::with_capacity(side as usize * side as usize);
        for y in 0..side {
            let sy = y.min(height - 1) as usize;
            for x in 0..side {
                let sx = x.min(width - 1) as usize;
                pixels.push(data[sy * width as usize + sx]);
            }
        }
        Ok(PaddedFrame { frame: Self { side, pixels, timestamp_index }, active_width: width, active_height: height })
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn width(&self) -> u32 {
        self.side
    }

    pub fn height(&self) -> u32 {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.side as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let s = self.side as usize;
        self.pixels[y as usize * s + x as usize] = v;
    }

    pub fn fill_block(&mut self, block: Block, v: u8) {
        let s = self.side as usize;
        for y in block.y..block.y + block.side {
            let row = y as usize * s;
            self.pixels[row + block.x as usize..row + (block.x + block.side) as usize].fill(v);
        }
    }

    pub fn copy_block_from(&mut self, src: &Frame, block: Block) {
        let s = self.side as usize;
        for y in block.y..block.y + block.side {
            let a = y as usize * s + block.x as usize;
            let b = a + block.side as usize;
            self.pixels[a..b].copy_from_slice(&src.pixels[a..b]);
        }
    }

    pub fn ensure_same_size(&self, other: &Frame) -> Result<()> {
        if self.side != other.side {
            return Err(Error::SizeMismatch {
                expected: format!("{0}x{0}", self.side),
                actual: format!("{0}x{0}", other.side),
            });
        }
        Ok(())
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.side, self.side)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_pgm(std::io::BufWriter::new(f))
    }

    /// Reads a P5 PGM; non-square or non-power-of-two rasters are padded.
    pub fn read_pgm<R: Read>(r: R, timestamp_index: u64) -> Result<PaddedFrame> {
        let mut r = BufReader::new(r);
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse { line: 0, reason: "truncated PGM header".into() });
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header[0] != "P5" {
            return Err(Error::Parse { line: 1, reason: format!("unsupported PGM magic {}", header[0]) });
        }
        let num = |i: usize| -> Result<u32> {
            header[i].parse().map_err(|_| Error::Parse { line: 1, reason: format!("bad PGM field {}", header[i]) })
        };
        let (w, h, maxval) = (num(1)?, num(2)?, num(3)?);
        if maxval != 255 {
            return Err(Error::Parse { line: 1, reason: format!("maxval {maxval} unsupported") });
        }
        let mut data = vec![0u8; w as usize * h as usize];
        r.read_exact(&mut data)?;
        Frame::from_raw_padded(w, h, &data, timestamp_index)
    }

    pub fn load_pgm(path: impl AsRef<Path>, timestamp_index: u64) -> Result<PaddedFrame> {
        Self::read_pgm(std::fs::File::open(path)?, timestamp_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedFrame {
    pub frame: Frame,
    pub active_width: u32,
    pub active_height: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Frame::new(6, vec![0; 36], 0).is_err());
        assert!(Frame::new(8, vec![0; 63], 0).is_err());
    }

    #[test]
    fn pads_by_edge_replication() {
        let data = [1, 2, 3, 4, 5, 6];
        let p = Frame::from_raw_padded(3, 2, &data, 0).unwrap();
        assert_eq!(p.frame.side(), 4);
        assert_eq!((p.active_width, p.active_height), (3, 2));
        assert_eq!(p.frame.get(3, 0), 3);
        assert_eq!(p.frame.get(0, 3), 4);
        assert_eq!(p.frame.get(3, 3), 6);
    }

    #[test]
    fn pgm_round_trip() {
        let f = Frame::new(4, (0..16).map(|v| v * 10).collect(), 3).unwrap();
        let mut buf = Vec::new();
        f.write_pgm(&mut buf).unwrap();
        let back = Frame::read_pgm(&buf[..], 3).unwrap();
        assert_eq!(back.frame, f);
    }
}
