use crate::{Error, Result};

/// `F x d` trajectory of frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    n_frames: usize,
    width: usize,
    values: Vec<f64>,
}

impl Segment {
    pub fn new(n_frames: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if n_frames < 2 {
            return Err(Error::Shape(format!("a segment needs at least 2 frames, got {n_frames}")));
        }
        if values.len() != n_frames * width {
            return Err(Error::Shape(format!(
                "{n_frames} x {width} segment needs {} values, got {}",
                n_frames * width,
                values.len()
            )));
        }
        Ok(Self { n_frames, width, values })
    }

    pub fn from_frames(frames: &[Vec<f64>]) -> Result<Self> {
        let width = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != width) {
            return Err(Error::Shape("ragged frames".into()));
        }
        Self::new(frames.len(), width, frames.concat())
    }

    /// Segment whose every frame equals `frame`.
    pub fn frozen(frame: &[f64], n_frames: usize) -> Result<Self> {
        Self::new(n_frames, frame.len(), frame.repeat(n_frames))
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        &self.values[f * self.width..(f + 1) * self.width]
    }

    pub fn frame_mut(&mut self, f: usize) -> &mut [f64] {
        &mut self.values[f * self.width..(f + 1) * self.width]
    }

    pub fn first_frame(&self) -> &[f64] {
        self.frame(0)
    }

    pub fn last_frame(&self) -> &[f64] {
        self.frame(self.n_frames - 1)
    }

    /// Copy with every value clipped to [0, 1].
    pub fn clipped(&self) -> Segment {
        Segment {
            n_frames: self.n_frames,
            width: self.width,
            values: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}
