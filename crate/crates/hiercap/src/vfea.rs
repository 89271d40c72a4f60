//! VFEA frame-feature files: `"VFEA" | u32 version=1 | u32 N | u32 D |
//! N·D f32`, all little-endian, row-major.

use std::path::Path;

use hiercap_core::features::VideoFeatures;
use hiercap_core::Tensor;

use crate::bytes::Reader;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VFEA";
pub const VERSION: u32 = 1;

pub fn encode(features: &VideoFeatures) -> Vec<u8> {
    let (n, d) = (features.num_frames(), features.dim());
    let mut out = Vec::with_capacity(16 + 4 * n * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &x in features.frames().data() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

/// Parses a feature matrix, widening to f64. Values must be finite.
pub fn decode(bytes: &[u8], video_id: &str) -> Result<VideoFeatures> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let n = r.u32("frame count")? as usize;
    let d = r.u32("feature dim")? as usize;
    if n == 0 || d == 0 {
        return Err(Error::format(format!("empty feature matrix {n}x{d}"), 8));
    }
    let count = n
        .checked_mul(d)
        .filter(|c| c.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(format!("dimensions {n}x{d} overflow"), 8))?;
    if r.remaining() < count * 4 {
        return Err(Error::format(
            format!(
                "truncated payload: {n}x{d} needs {} bytes, {} left",
                count * 4,
                r.remaining()
            ),
            r.pos(),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.pos();
        let x = r.f32("value")?;
        if !x.is_finite() {
            return Err(Error::format(format!("non-finite value {x}"), at));
        }
        data.push(f64::from(x));
    }
    r.finish()?;
    Ok(VideoFeatures::new(video_id, Tensor::new(vec![n, d], data)?)?)
}

pub fn write(path: &Path, features: &VideoFeatures) -> Result<()> {
    std::fs::write(path, encode(features)).map_err(|e| Error::io(path, e))
}

/// Reads a VFEA file, naming the video after the file stem, and resamples
/// to `frames` by equal-interval selection when given.
pub fn read(path: &Path, video_id: &str, frames: Option<usize>) -> Result<VideoFeatures> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let feats = decode(&bytes, video_id).map_err(|e| match e {
        Error::Format { what, offset } => Error::Format {
            what: format!("{}: {what}", path.display()),
            offset,
        },
        other => other,
    })?;
    match frames {
        Some(n) => Ok(feats.resample(n)?),
        None => Ok(feats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VideoFeatures {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64, 0.5, -1.25]).collect();
        VideoFeatures::from_rows("v", &rows).unwrap()
    }

    #[test]
    fn header_layout() {
        let b = encode(&sample());
        assert_eq!(&b[..4], b"VFEA");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 3);
        assert_eq!(b.len(), 16 + 9 * 4);
        assert_eq!(decode(&b, "v").unwrap(), sample());
    }

    #[test]
    fn rejects_with_offsets() {
        let good = encode(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, "v"), Err(Error::Format { offset: 0, .. })));
        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2, "v"), Err(Error::Format { offset: 4, .. })));
        let cut = &good[..good.len() - 3];
        assert!(matches!(decode(cut, "v"), Err(Error::Format { offset: 16, .. })));
        let mut huge = good.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&huge, "v").is_err());
        let mut nan = good;
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan, "v"), Err(Error::Format { offset: 20, .. })));
    }
}
