//! Slice rasters: windowed 8-bit PNG for intensities, run-length rows for masks.

use serde::{Deserialize, Serialize};

/// Maps `value` through a window of center `wc` and width `ww` onto 0..=255.
pub fn window(value: f32, wc: f64, ww: f64) -> u8 {
    let t = (value as f64 - (wc - ww / 2.0)) / ww;
    (t * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_png(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(gray)?;
    }
    Ok(out)
}

/// Mask slice as runs of set pixels per row: `[start, length]` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlay {
    pub width: usize,
    pub height: usize,
    pub set_pixels: usize,
    pub rows: Vec<Vec<[usize; 2]>>,
}

impl Overlay {
    pub fn encode(width: usize, height: usize, pixels: &[bool]) -> Self {
        let rows: Vec<Vec<[usize; 2]>> = pixels
            .chunks(width.max(1))
            .take(height)
            .map(|row| {
                let mut runs = Vec::new();
                let mut i = 0;
                while i < row.len() {
                    if row[i] {
                        let start = i;
                        while i < row.len() && row[i] {
                            i += 1;
                        }
                        runs.push([start, i - start]);
                    } else {
                        i += 1;
                    }
                }
                runs
            })
            .collect();
        Self {
            width,
            height,
            set_pixels: pixels.iter().filter(|&&b| b).count(),
            rows,
        }
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut out = vec![false; self.width * self.height];
        for (j, runs) in self.rows.iter().enumerate() {
            for &[s, n] in runs {
                out[j * self.width + s..j * self.width + s + n].fill(true);
            }
        }
        out
    }
}
