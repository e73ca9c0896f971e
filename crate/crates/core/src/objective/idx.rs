//! IDX file format (the MNIST distribution format): a big-endian magic word
//! whose low byte is the rank, one big-endian `u32` per dimension, then the
//! raw unsigned bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!("bad image magic {magic:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    let expected = count * rows * cols;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "image payload has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!("bad label magic {magic:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format(format!(
            "label payload has {} bytes, header implies {count}",
            body.len()
        )));
    }
    Ok(body.to_vec())
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for word in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_images(path: &Path, images: &IdxImages) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_images(images))?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_labels(labels))?;
    Ok(())
}

/// Loads an image/label file pair into a dataset of flattened pixels scaled
/// to `[0, 1]`.
pub fn load_idx_dataset(images: &Path, labels: &Path, num_classes: usize) -> Result<Dataset> {
    let img = parse_images(&read_all(images)?)?;
    let lab = parse_labels(&read_all(labels)?)?;
    if img.count != lab.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            img.count,
            lab.len()
        )));
    }
    let stride = img.rows * img.cols;
    let samples = lab
        .iter()
        .enumerate()
        .map(|(i, &y)| LabeledSample {
            x: img.pixels[i * stride..(i + 1) * stride]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect(),
            y: y as usize,
        })
        .collect();
    Dataset::new(samples, num_classes)
}
