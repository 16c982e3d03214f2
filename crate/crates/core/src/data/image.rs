//! Grayscale images and 8-bit PGM / PNG codecs.

use std::io::Cursor;
use std::path::Path;

use crate::nn::{Shape, Tensor};
use crate::{Error, Result};

/// Single-channel image with `f32` pixels.
///
/// Decoded images lie in `[0, 1]`. Noisy images and network outputs may
/// overshoot; they are clipped only when written out or measured.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!("image dimensions must be >= 1, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Copy with every pixel clamped to `[0, 1]`.
    pub fn clipped(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Bytes `round(clip(v) * 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        GrayImage::new(width, height, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// `1 x 1 x h x w` tensor.
    pub fn to_tensor(&self) -> Tensor {
        let shape = Shape::new(1, 1, self.height, self.width).expect("image dims are >= 1");
        Tensor::from_vec(shape, self.data.clone()).expect("sizes agree")
    }

    /// Image from channel 0 of batch sample `n`.
    pub fn from_tensor(t: &Tensor, n: usize) -> Result<Self> {
        let s = t.shape();
        if s.c != 1 || n >= s.n {
            return Err(Error::shape(format!("cannot take image {n} from a {s} tensor")));
        }
        GrayImage::new(s.w, s.h, t.sample(n).to_vec())
    }

    /// Side-by-side concatenation of equally tall images.
    pub fn hconcat(images: &[&GrayImage]) -> Result<GrayImage> {
        let first = images.first().ok_or_else(|| Error::Empty("no images to concatenate".into()))?;
        let h = first.height;
        if images.iter().any(|im| im.height != h) {
            return Err(Error::shape("images to concatenate differ in height"));
        }
        let width: usize = images.iter().map(|im| im.width).sum();
        let mut data = Vec::with_capacity(width * h);
        for y in 0..h {
            for im in images {
                data.extend_from_slice(&im.data[y * im.width..(y + 1) * im.width]);
            }
        }
        GrayImage::new(width, h, data)
    }
}

#[inline]
pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads an 8-bit P5 PGM or an 8-bit PNG (gray, gray+alpha, RGB, RGBA or
/// palette). Color is reduced with `0.299 R + 0.587 G + 0.114 B`.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).at_path(path))?;
    decode(&bytes).map_err(|e| e.at_path(path))
}

/// Writes PNG when the extension is `.png`, P5 PGM otherwise. Pixels are
/// clipped to `[0, 1]` and quantized to `round(v * 255)`.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img)? } else { encode_pgm(img) };
    std::fs::write(path, bytes).map_err(|e| Error::from(e).at_path(path))
}

/// Sniffs the format from the leading bytes.
pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"P2") {
        Err(Error::UnsupportedImage("ASCII (P2) PGM is not supported".into()))
    } else {
        Err(Error::UnsupportedImage("expected a P5 PGM or PNG file".into()))
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    let magic = next_token(bytes, &mut pos).ok_or_else(|| Error::MalformedHeader("empty file".into()))?;
    if magic != b"P5" {
        return Err(Error::MalformedHeader("missing P5 magic".into()));
    }
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| Error::MalformedHeader(format!("missing {name}")))?;
        fields[i] = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("bad {name} {:?}", String::from_utf8_lossy(tok))))?;
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {w}x{h}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedImage(format!("maxval {maxval}; only 8-bit (255) PGM is supported")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Truncated("PGM header is not followed by pixel data".into()));
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() < w * h {
        return Err(Error::Truncated(format!(
            "PGM raster has {} of {} bytes",
            raster.len(),
            w * h
        )));
    }
    GrayImage::from_bytes(w, h, &raster[..w * h])
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Truncated("PNG stream ended early".into())
        }
        png::DecodingError::Format(f) => Error::MalformedHeader(format!("PNG: {f}")),
        other => Error::UnsupportedImage(format!("PNG: {other}")),
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_error)?;
    if reader.info().bit_depth == png::BitDepth::Sixteen {
        return Err(Error::UnsupportedImage("16-bit PNG is not supported".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedImage("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!("PNG bit depth {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = info.line_size;
    let channels = info.color_type.samples();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = &buf[y * stride..y * stride + w * channels];
        for px in row.chunks_exact(channels) {
            let v = match channels {
                1 | 2 => px[0] as f32,
                _ => 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32,
            };
            data.push(v / 255.0);
        }
    }
    GrayImage::new(w, h, data)
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidArgument(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(&img.to_bytes())
            .map_err(|e| Error::InvalidArgument(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}
