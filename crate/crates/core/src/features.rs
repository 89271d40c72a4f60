//! Per-video frame-feature matrices.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One video's `N × D` frame features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    frames: Tensor,
}

impl VideoFeatures {
    pub fn new(video_id: impl Into<String>, frames: Tensor) -> Result<Self> {
        if frames.rank() != 2 {
            return Err(Error::ShapeMismatch {
                op: "video features",
                left: frames.shape().to_vec(),
                right: alloc::vec![0, 0],
            });
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite(alloc::format!(
                "frame features of `{}`",
                video_id.into()
            )));
        }
        Ok(Self {
            video_id: video_id.into(),
            frames,
        })
    }

    pub fn from_rows(video_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("ragged frame rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(video_id, Tensor::new(alloc::vec![n, d], data)?)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.frames.data()[i * d..(i + 1) * d]
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    /// Equal-interval selection of `target` frames: indices
    /// `floor(i · N / target)`. Identity when `N == target`.
    pub fn resample(&self, target: usize) -> Result<Self> {
        if target == 0 {
            return Err(Error::Empty("resample"));
        }
        let n = self.num_frames();
        if n == target {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(target * self.dim());
        for i in 0..target {
            data.extend_from_slice(self.frame(i * n / target));
        }
        Self::new(
            self.video_id.clone(),
            Tensor::new(alloc::vec![target, self.dim()], data)?,
        )
    }

    /// Frames `[start, end)` as a new video with the same id.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.num_frames() {
            return Err(Error::OutOfRange {
                what: "frame window",
                index: end,
                len: self.num_frames(),
            });
        }
        let d = self.dim();
        let data = self.frames.data()[start * d..end * d].to_vec();
        Self::new(
            self.video_id.clone(),
            Tensor::new(alloc::vec![end - start, d], data)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn indexed(n: usize) -> VideoFeatures {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, -(i as f64)]).collect();
        VideoFeatures::from_rows("v", &rows).unwrap()
    }

    #[test]
    fn downsample_picks_equal_interval() {
        let v = indexed(40).resample(20).unwrap();
        let picked: Vec<f64> = (0..20).map(|i| v.frame(i)[0]).collect();
        let expected: Vec<f64> = (0..20).map(|i| (2 * i) as f64).collect();
        assert_eq!(picked, expected);
    }

    #[test]
    fn resample_is_idempotent() {
        let v = indexed(20);
        assert_eq!(v.resample(20).unwrap(), v);
        let once = indexed(37).resample(20).unwrap();
        assert_eq!(once.resample(20).unwrap(), once);
    }

    #[test]
    fn rejects_non_finite() {
        let rows = vec![vec![1.0, f64::NAN]];
        assert!(matches!(
            VideoFeatures::from_rows("bad", &rows),
            Err(Error::NonFinite(_))
        ));
    }
}
