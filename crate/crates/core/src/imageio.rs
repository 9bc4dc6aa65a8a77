//! Grayscale image and label-mask files: 8/16-bit PNG, binary PGM,
//! indexed-PNG masks and their JSON label tables.

use crate::anatomy::Label;
use crate::view::LabelMap;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageIoError + '_ {
    move |source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> ImageIoError {
    ImageIoError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png8,
    Png16,
    Pgm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png8 | ImageFormat::Png16 => "png",
            ImageFormat::Pgm => "pgm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png" | "png8" => Some(ImageFormat::Png8),
            "png16" => Some(ImageFormat::Png16),
            "pgm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }
}

/// Grayscale raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

fn png_encoder<'a, W: Write>(w: W, width: usize, height: usize) -> png::Encoder<'a, W> {
    png::Encoder::new(w, width as u32, height as u32)
}

/// Encodes a grayscale PNG in memory (8-bit unless `sixteen`).
pub fn encode_gray_png(width: usize, height: usize, data: &[f64], sixteen: bool) -> Vec<u8> {
    assert_eq!(data.len(), width * height, "pixel buffer size");
    let mut out = Vec::new();
    let mut enc = png_encoder(&mut out, width, height);
    enc.set_color(png::ColorType::Grayscale);
    let bytes: Vec<u8> = if sixteen {
        enc.set_depth(png::BitDepth::Sixteen);
        data.iter()
            .flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes())
            .collect()
    } else {
        enc.set_depth(png::BitDepth::Eight);
        data.iter().map(|&v| quantize(v, 255.0) as u8).collect()
    };
    let mut writer = enc.write_header().expect("in-memory PNG header");
    writer.write_image_data(&bytes).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG");
    out
}

pub fn write_gray(path: &Path, width: usize, height: usize, data: &[f64], format: ImageFormat) -> Result<(), ImageIoError> {
    let bytes = match format {
        ImageFormat::Pgm => {
            assert_eq!(data.len(), width * height, "pixel buffer size");
            let mut b = format!("P5\n{width} {height}\n255\n").into_bytes();
            b.extend(data.iter().map(|&v| quantize(v, 255.0) as u8));
            b
        }
        ImageFormat::Png8 => encode_gray_png(width, height, data, false),
        ImageFormat::Png16 => encode_gray_png(width, height, data, true),
    };
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// Reads PNG (any color type, converted to luminance) or PGM (P2/P5).
pub fn read_gray(path: &Path) -> Result<GrayImage, ImageIoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let magic = reader.fill_buf().map_err(io_err(path))?;
    if magic.starts_with(b"P5") || magic.starts_with(b"P2") {
        return read_pgm(path, reader);
    }
    let mut dec = png::Decoder::new(reader);
    dec.set_transformations(png::Transformations::EXPAND);
    let mut r = dec.read_info().map_err(|e| format_err(path, e))?;
    let mut buf = vec![0; r.output_buffer_size().ok_or_else(|| format_err(path, "image too large"))?];
    let info = r.next_frame(&mut buf).map_err(|e| format_err(path, e))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let samples: Vec<f64> = match info.bit_depth {
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect(),
        png::BitDepth::Eight => buf[..info.buffer_size()].iter().map(|&b| b as f64 / 255.0).collect(),
        d => return Err(format_err(path, format!("unsupported bit depth {d:?} after expansion"))),
    };
    let channels = info.color_type.samples();
    let data = samples
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => px[0],
            _ => 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2],
        })
        .collect();
    Ok(GrayImage { width, height, data })
}

fn read_pgm(path: &Path, mut reader: impl Read) -> Result<GrayImage, ImageIoError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io_err(path))?;
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (start < pos).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token().ok_or_else(|| format_err(path, "empty file"))?;
    let mut num = |what: &str| -> Result<usize, ImageIoError> {
        token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format_err(path, format!("bad PGM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(path, "PGM maxval out of range"));
    }
    let n = width * height;
    let data = if magic == "P2" {
        (0..n)
            .map(|_| num("sample").map(|v| v as f64 / maxval as f64))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        drop(num);
        let body = bytes.get(pos + 1..).unwrap_or(&[]);
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if body.len() < need {
            return Err(format_err(path, "truncated PGM data"));
        }
        if wide {
            body[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64)
                .collect()
        } else {
            body[..n].iter().map(|&b| b as f64 / maxval as f64).collect()
        }
    };
    Ok(GrayImage { width, height, data })
}

/// Distinct, deterministic display color per label; 0 is black.
fn label_color(label: usize) -> [u8; 3] {
    if label == 0 {
        return [0, 0, 0];
    }
    let h = (label as u32).wrapping_mul(2_654_435_761);
    [(h >> 24) as u8 | 0x40, (h >> 16) as u8 | 0x40, (h >> 8) as u8 | 0x40]
}

/// Writes a label map as an indexed PNG, or as 16-bit grayscale when some
/// label exceeds 255. Pixel values are the labels themselves either way.
pub fn write_mask_png(path: &Path, map: &LabelMap) -> Result<(), ImageIoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = png_encoder(BufWriter::new(file), map.width, map.height);
    let max = map.labels.iter().copied().max().unwrap_or(0);
    let bytes: Vec<u8> = if max <= 255 {
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette((0..=max as usize).flat_map(label_color).collect::<Vec<u8>>());
        map.labels.iter().map(|&l| l as u8).collect()
    } else {
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        map.labels.iter().flat_map(|l| l.to_be_bytes()).collect()
    };
    let mut writer = enc.write_header().map_err(|e| format_err(path, e))?;
    writer.write_image_data(&bytes).map_err(|e| format_err(path, e))?;
    writer.finish().map_err(|e| format_err(path, e))
}

/// Integer mask: indexed PNG indices or raw grayscale values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Label>,
}

pub fn read_mask(path: &Path) -> Result<MaskImage, ImageIoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut r = dec.read_info().map_err(|e| format_err(path, e))?;
    let mut buf = vec![0; r.output_buffer_size().ok_or_else(|| format_err(path, "image too large"))?];
    let info = r.next_frame(&mut buf).map_err(|e| format_err(path, e))?;
    let (width, height) = (info.width as usize, info.height as usize);
    let labels: Vec<Label> = match (info.color_type, info.bit_depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => {
            buf[..width * height].iter().map(|&b| b as Label).collect()
        }
        (png::ColorType::Grayscale, png::BitDepth::Sixteen) => buf[..2 * width * height]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
        (c, d) => return Err(format_err(path, format!("unsupported mask encoding {c:?}/{d:?}"))),
    };
    Ok(MaskImage { width, height, labels })
}

/// Label → structure-name table stored next to each mask.
pub fn write_label_table(path: &Path, names: &BTreeMap<Label, String>) -> Result<(), ImageIoError> {
    let json = serde_json::json!({ "labels": names });
    std::fs::write(path, serde_json::to_string_pretty(&json).expect("serializable"))
        .map_err(io_err(path))
}

pub fn read_label_table(path: &Path) -> Result<BTreeMap<Label, String>, ImageIoError> {
    #[derive(serde::Deserialize)]
    struct Table {
        labels: BTreeMap<Label, String>,
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let t: Table = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    Ok(t.labels)
}
