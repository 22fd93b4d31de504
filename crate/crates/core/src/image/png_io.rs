use std::cell::Cell;
use std::io::{BufRead, Cursor, Read, Seek, SeekFrom};

use super::{GrayImage, ImageError, VectorImage};

/// Result of decoding a PNG stream.
#[derive(Clone, Debug, PartialEq)]
pub enum DecodedImage {
    Gray(GrayImage),
    Rgb(VectorImage),
}

impl DecodedImage {
    /// Grayscale view of the decoded content (luminance for RGB).
    pub fn into_gray(self) -> GrayImage {
        match self {
            DecodedImage::Gray(g) => g,
            DecodedImage::Rgb(rgb) => rgb.to_gray(),
        }
    }
}

// Tracks the furthest byte the decoder has consumed so errors can report an offset.
struct TrackingReader<'a> {
    inner: Cursor<&'a [u8]>,
    furthest: &'a Cell<usize>,
}

impl TrackingReader<'_> {
    fn note(&self) {
        let pos = self.inner.position() as usize;
        if pos > self.furthest.get() {
            self.furthest.set(pos);
        }
    }
}

impl Read for TrackingReader<'_> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.note();
        Ok(n)
    }
}

impl BufRead for TrackingReader<'_> {
    fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
        self.inner.fill_buf()
    }

    fn consume(&mut self, amt: usize) {
        self.inner.consume(amt);
        self.note();
    }
}

impl Seek for TrackingReader<'_> {
    fn seek(&mut self, pos: SeekFrom) -> std::io::Result<u64> {
        let p = self.inner.seek(pos)?;
        self.note();
        Ok(p)
    }
}

/// Decodes 8/16-bit grayscale and 8-bit RGB PNGs (palette and low bit depths are
/// expanded, alpha is composited over white). Values map linearly onto `[0, 1]`.
pub fn read_png(bytes: &[u8]) -> Result<DecodedImage, ImageError> {
    let furthest = Cell::new(0usize);
    let decode_err = |e: png::DecodingError, at: &Cell<usize>| ImageError::Decode {
        offset: at.get(),
        message: e.to_string(),
    };
    let reader = TrackingReader { inner: Cursor::new(bytes), furthest: &furthest };
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| decode_err(e, &furthest))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Unsupported("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| decode_err(e, &furthest))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let sixteen = info.bit_depth == png::BitDepth::Sixteen;
    let sample = |i: usize| -> f32 {
        if sixteen {
            u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f32 / 65535.0
        } else {
            buf[i] as f32 / 255.0
        }
    };
    let stride = info.line_size / if sixteen { 2 } else { 1 };
    let px = |x: usize, y: usize, c: usize| sample(y * stride + x * channels + c);
    let over_white = |v: f32, a: f32| v * a + (1.0 - a);

    match info.color_type {
        png::ColorType::Grayscale => Ok(DecodedImage::Gray(GrayImage::from_fn(w, h, |x, y| px(x, y, 0)))),
        png::ColorType::GrayscaleAlpha => Ok(DecodedImage::Gray(GrayImage::from_fn(w, h, |x, y| {
            over_white(px(x, y, 0), px(x, y, 1))
        }))),
        png::ColorType::Rgb | png::ColorType::Rgba => {
            let mut data = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let a = if channels == 4 { px(x, y, 3) } else { 1.0 };
                    data.push([0, 1, 2].map(|c| over_white(px(x, y, c), a)));
                }
            }
            Ok(DecodedImage::Rgb(VectorImage::from_vec(w, h, data)?))
        }
        other => Err(ImageError::Unsupported(format!("{other:?}"))),
    }
}

fn encode(w: usize, h: usize, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().map_err(|e| ImageError::Encode(e.to_string()))?;
        writer.write_image_data(data).map_err(|e| ImageError::Encode(e.to_string()))?;
    }
    Ok(out)
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

pub fn write_png_gray8(img: &GrayImage) -> Result<Vec<u8>, ImageError> {
    let data: Vec<u8> = img.data().iter().map(|&v| quantize(v, 255.0) as u8).collect();
    encode(img.width(), img.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &data)
}

pub fn write_png_gray16(img: &GrayImage) -> Result<Vec<u8>, ImageError> {
    let data: Vec<u8> =
        img.data().iter().flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes()).collect();
    encode(img.width(), img.height(), png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
}

/// Writes an RGB image whose channels are in `[0, 1]`; see [`VectorImage::normals_to_rgb`].
pub fn write_png_rgb8(img: &VectorImage) -> Result<Vec<u8>, ImageError> {
    let data: Vec<u8> = img.data().iter().flat_map(|p| p.map(|c| quantize(c, 255.0) as u8)).collect();
    encode(img.width(), img.height(), png::ColorType::Rgb, png::BitDepth::Eight, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn gray8_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let img = GrayImage::from_fn(w, h, |x, y| ((x * 31 + y * 17 + seed as usize) % 256) as f32 / 255.0);
            let back = read_png(&write_png_gray8(&img).unwrap()).unwrap().into_gray();
            for (a, b) in img.data().iter().zip(back.data()) {
                prop_assert!((a - b).abs() <= 0.5 / 255.0);
            }
        }

        #[test]
        fn gray16_round_trip(vals in proptest::collection::vec(0.0f32..=1.0, 12)) {
            let img = GrayImage::from_vec(4, 3, vals).unwrap();
            let back = read_png(&write_png_gray16(&img).unwrap()).unwrap().into_gray();
            for (a, b) in img.data().iter().zip(back.data()) {
                prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
            }
        }
    }

    #[test]
    fn rgb_round_trip() {
        let data: Vec<[f32; 3]> = (0..6).map(|i| [i as f32 / 5.0, 1.0 - i as f32 / 5.0, 0.5]).collect();
        let img = VectorImage::from_vec(3, 2, data).unwrap();
        match read_png(&write_png_rgb8(&img).unwrap()).unwrap() {
            DecodedImage::Rgb(back) => {
                for (a, b) in img.data().iter().zip(back.data()) {
                    for c in 0..3 {
                        assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-6);
                    }
                }
            }
            other => panic!("expected rgb, got {other:?}"),
        }
    }

    #[test]
    fn truncated_stream_reports_offset() {
        let img = GrayImage::from_fn(32, 32, |x, y| ((x ^ y) & 1) as f32);
        let bytes = write_png_gray8(&img).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        match read_png(cut) {
            Err(ImageError::Decode { offset, .. }) => assert!(offset <= cut.len()),
            other => panic!("expected decode error, got {other:?}"),
        }
        assert!(matches!(read_png(b"not a png"), Err(ImageError::Decode { .. })));
    }
}
