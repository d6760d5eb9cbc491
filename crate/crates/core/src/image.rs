//! Row-major 8-bit rasters and binary PPM (P6) / PGM (P5) IO.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InputShape(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        })
    }

    pub fn gray(width: usize, height: usize) -> Self {
        Self::new(width, height, 1).expect("1 channel is valid")
    }

    pub fn rgb(width: usize, height: usize) -> Self {
        Self::new(width, height, 3).expect("3 channels is valid")
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        let mut img = Self::new(0, 0, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::InputShape(format!(
                "buffer of {} bytes does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        img.width = width;
        img.height = height;
        img.data = data;
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        assert!(
            row < self.height && col < self.width,
            "pixel ({row}, {col}) out of bounds for {}x{}",
            self.width,
            self.height
        );
        (row * self.width + col) * self.channels
    }

    /// Channel values of pixel `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let o = self.offset(row, col);
        &self.data[o..o + self.channels]
    }

    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [u8] {
        let o = self.offset(row, col);
        &mut self.data[o..o + self.channels]
    }

    pub fn get_gray(&self, row: usize, col: usize) -> u8 {
        self.pixel(row, col)[0]
    }

    pub fn set_gray(&mut self, row: usize, col: usize, v: u8) {
        self.pixel_mut(row, col)[0] = v;
    }

    pub fn get_rgb(&self, row: usize, col: usize) -> [u8; 3] {
        let p = self.pixel(row, col);
        [p[0], p[1], p[2]]
    }

    pub fn set_rgb(&mut self, row: usize, col: usize, v: [u8; 3]) {
        self.pixel_mut(row, col).copy_from_slice(&v);
    }

    /// Left-right mirror.
    pub fn mirrored(&self) -> ImageBuffer {
        let mut out = self.clone();
        let c = self.channels;
        for row in 0..self.height {
            for col in 0..self.width {
                let src = self.offset(row, col);
                let dst = self.offset(row, self.width - 1 - col);
                out.data[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        out
    }

    /// Binary PNM encoding: P6 for RGB, P5 for gray, maxval 255.
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pnm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
        let channels = match magic.as_slice() {
            b"P5" => 1,
            b"P6" => 3,
            other => {
                return Err(format!(
                    "unsupported magic `{}` (only binary P5/P6)",
                    String::from_utf8_lossy(other)
                ))
            }
        };
        let mut header = [0usize; 3];
        for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
            let tok = next_token(bytes, &mut pos).ok_or(format!("missing {name}"))?;
            header[i] = std::str::from_utf8(&tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(format!("invalid {name}"))?;
        }
        let [width, height, maxval] = header;
        if maxval != 255 {
            return Err(format!("maxval {maxval} unsupported (expected 255)"));
        }
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err("missing raster".into());
        }
        pos += 1;
        let need = width * height * channels;
        let raster = &bytes[pos..];
        if raster.len() < need {
            return Err(format!(
                "truncated raster: {} of {need} bytes",
                raster.len()
            ));
        }
        ImageBuffer::from_raw(width, height, channels, raster[..need].to_vec())
            .map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pnm()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pnm(&bytes).map_err(|msg| Error::MalformedImage {
            path: path.to_path_buf(),
            msg,
        })
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| bytes[start..*pos].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pnm_header_is_exact() {
        let mut img = ImageBuffer::gray(3, 2);
        img.set_gray(1, 2, 7);
        let bytes = img.to_pnm();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(bytes.len(), 11 + 6);
        assert_eq!(bytes[11 + 5], 7);

        let rgb = ImageBuffer::rgb(2, 1);
        assert_eq!(&rgb.to_pnm()[..11], b"P6\n2 1\n255\n");
    }

    #[test]
    fn reads_header_comments() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x01\x02";
        let img = ImageBuffer::from_pnm(bytes).unwrap();
        assert_eq!(img.data(), &[1, 2]);
    }

    #[test]
    fn rejects_truncated_and_ascii() {
        assert!(ImageBuffer::from_pnm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(ImageBuffer::from_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(ImageBuffer::from_pnm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn from_raw_checks_length() {
        assert!(ImageBuffer::from_raw(2, 2, 3, vec![0; 11]).is_err());
        assert!(ImageBuffer::new(1, 1, 2).is_err());
    }

    proptest! {
        #[test]
        fn pnm_roundtrip(w in 1usize..9, h in 1usize..9, rgb in any::<bool>(), seed in any::<u64>()) {
            let c = if rgb { 3 } else { 1 };
            let data: Vec<u8> = (0..w * h * c).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let img = ImageBuffer::from_raw(w, h, c, data).unwrap();
            prop_assert_eq!(ImageBuffer::from_pnm(&img.to_pnm()).unwrap(), img);
        }
    }
}
