//! Frame sequences on disk.
//!
//! A sequence directory holds `000.png`, `001.png`, ... (any zero-padding,
//! numbered contiguously from 0). Each frame may have sidecars next to it:
//!
//! * `NNN.depth`: 16-byte header (`b"FDEP"`, u32 width, u32 height, u32
//!   reserved = 0) followed by `width * height` f32 values.
//! * `NNN.motion`: same header with magic `b"FMOT"`, followed by the x plane
//!   and then the y plane, each `width * height` f32 values.
//!
//! All integers and floats are little-endian. Missing sidecars mean constant
//! depth 1.0 and zero motion.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{to_u16, to_u8, DepthMap, Image, MotionField};
use crate::scene::FrameBundle;

pub const DEPTH_MAGIC: &[u8; 4] = b"FDEP";
pub const MOTION_MAGIC: &[u8; 4] = b"FMOT";
const HEADER_LEN: usize = 16;

fn load_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| load_err(path, e.to_string()))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| load_err(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| load_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| load_err(path, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let bytes = &buf[..info.buffer_size()];
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => bytes.to_vec(),
        png::ColorType::Rgba => bytes
            .chunks_exact(4)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect(),
        png::ColorType::Grayscale => bytes.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => bytes
            .chunks_exact(2)
            .flat_map(|p| [p[0], p[0], p[0]])
            .collect(),
        png::ColorType::Indexed => {
            return Err(load_err(path, "indexed PNG was not expanded"));
        }
    };
    Image::from_rgb8(w, h, &rgb).map_err(|e| load_err(path, e.to_string()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PngDepth {
    #[default]
    Eight,
    Sixteen,
}

pub fn write_png(path: &Path, image: &Image, depth: PngDepth) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, image.width() as u32, image.height() as u32);
    encoder.set_color(png::ColorType::Rgb);
    let data: Vec<u8> = match depth {
        PngDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            image.as_slice().iter().flat_map(|p| p.map(to_u8)).collect()
        }
        PngDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            image
                .as_slice()
                .iter()
                .flat_map(|p| p.map(to_u16))
                .flat_map(u16::to_be_bytes)
                .collect()
        }
    };
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_image_data(&data)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .finish()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn write_header(out: &mut impl Write, magic: &[u8; 4], w: usize, h: usize) -> Result<()> {
    out.write_all(magic)?;
    out.write_all(&(w as u32).to_le_bytes())?;
    out.write_all(&(h as u32).to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    Ok(())
}

fn read_sidecar(path: &Path, magic: &[u8; 4], planes: usize) -> Result<(usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| load_err(path, e.to_string()))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != magic {
        return Err(load_err(
            path,
            format!("missing {} header", String::from_utf8_lossy(magic)),
        ));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    let expected = HEADER_LEN + planes * w * h * 4;
    if bytes.len() != expected {
        return Err(load_err(
            path,
            format!(
                "expected {expected} bytes for {w}x{h}, found {}",
                bytes.len()
            ),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, values))
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, DEPTH_MAGIC, depth.width(), depth.height())?;
    for v in depth.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let (w, h, values) = read_sidecar(path, DEPTH_MAGIC, 1)?;
    DepthMap::from_vec(w, h, values)
}

pub fn write_motion(path: &Path, motion: &MotionField) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, MOTION_MAGIC, motion.width(), motion.height())?;
    for axis in 0..2 {
        for v in motion.as_slice() {
            out.write_all(&v[axis].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_motion(path: &Path) -> Result<MotionField> {
    let (w, h, values) = read_sidecar(path, MOTION_MAGIC, 2)?;
    let n = w * h;
    let data = (0..n).map(|i| [values[i], values[n + i]]).collect();
    MotionField::from_vec(w, h, data)
}

/// Writes `bundle` as `dir/NNN.png` plus both sidecars.
pub fn write_frame(dir: &Path, index: usize, bundle: &FrameBundle) -> Result<()> {
    let stem = format!("{index:03}");
    write_png(
        &dir.join(format!("{stem}.png")),
        &bundle.color,
        PngDepth::Eight,
    )?;
    write_depth(&dir.join(format!("{stem}.depth")), &bundle.depth)?;
    write_motion(&dir.join(format!("{stem}.motion")), &bundle.motion)?;
    Ok(())
}

/// Loads every numbered PNG in `dir`, with sidecars where present.
pub fn load_sequence(dir: &Path) -> Result<Vec<FrameBundle>> {
    let entries = fs::read_dir(dir).map_err(|e| load_err(dir, e.to_string()))?;
    let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| load_err(dir, e.to_string()))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let index = stem
            .parse::<u64>()
            .map_err(|e| load_err(&path, e.to_string()))?;
        numbered.push((index, path));
    }
    if numbered.is_empty() {
        return Err(load_err(dir, "no numbered PNG frames"));
    }
    numbered.sort();

    let mut frames: Vec<FrameBundle> = Vec::with_capacity(numbered.len());
    for (expected, (index, path)) in numbered.iter().enumerate() {
        if *index != expected as u64 {
            return Err(load_err(
                path,
                format!("frame numbering gap: expected index {expected}, found {index}"),
            ));
        }
        let color = read_png(path)?;
        let (w, h) = color.dims();
        if let Some(first) = frames.first() {
            if first.dims() != (w, h) {
                return Err(load_err(
                    path,
                    format!(
                        "dimensions {w}x{h} differ from frame 0 ({:?})",
                        first.dims()
                    ),
                ));
            }
        }
        let depth_path = path.with_extension("depth");
        let depth = if depth_path.exists() {
            read_depth(&depth_path)?
        } else {
            DepthMap::filled(w, h, 1.0)
        };
        let motion_path = path.with_extension("motion");
        let motion = if motion_path.exists() {
            read_motion(&motion_path)?
        } else {
            MotionField::filled(w, h, [0.0, 0.0])
        };
        if depth.dims() != (w, h) {
            return Err(load_err(&depth_path, "depth dimensions differ from color"));
        }
        if motion.dims() != (w, h) {
            return Err(load_err(
                &motion_path,
                "motion dimensions differ from color",
            ));
        }
        if expected == 0 && motion.as_slice().iter().any(|m| *m != [0.0, 0.0]) {
            return Err(load_err(&motion_path, "frame 0 must have zero motion"));
        }
        frames.push(FrameBundle {
            color,
            depth,
            motion,
        });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            [x as f32 / w as f32, y as f32 / h as f32, 0.25]
        })
    }

    #[test]
    fn loads_three_frames() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_png(
                &dir.path().join(format!("{i:03}.png")),
                &gradient(8, 6),
                PngDepth::Eight,
            )
            .unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        assert_eq!(seq.len(), 3);
        assert!(seq[1].depth.as_slice().iter().all(|&d| d == 1.0));
        assert!(seq[2].motion.as_slice().iter().all(|m| *m == [0.0, 0.0]));
        assert_eq!(seq[0].color.to_rgb8(), gradient(8, 6).to_rgb8());
    }

    #[test]
    fn mismatched_resolution_names_file() {
        let dir = tempfile::tempdir().unwrap();
        write_png(
            &dir.path().join("000.png"),
            &gradient(8, 6),
            PngDepth::Eight,
        )
        .unwrap();
        write_png(
            &dir.path().join("001.png"),
            &gradient(9, 6),
            PngDepth::Eight,
        )
        .unwrap();
        write_png(
            &dir.path().join("002.png"),
            &gradient(8, 6),
            PngDepth::Eight,
        )
        .unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("001.png"), "{err}");
    }

    #[test]
    fn gap_names_file() {
        let dir = tempfile::tempdir().unwrap();
        write_png(
            &dir.path().join("000.png"),
            &gradient(4, 4),
            PngDepth::Eight,
        )
        .unwrap();
        write_png(
            &dir.path().join("002.png"),
            &gradient(4, 4),
            PngDepth::Eight,
        )
        .unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("002.png"), "{err}");
    }

    #[test]
    fn unreadable_png_names_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("000.png"), b"not a png").unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("000.png"), "{err}");
    }

    #[test]
    fn sidecars_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (7, 5);
        for i in 0..2 {
            let motion = MotionField::from_fn(w, h, |x, y| {
                if i == 0 {
                    [0.0, 0.0]
                } else {
                    [x as f32 * 0.37 - 1.0, -(y as f32) * 1.5e-3]
                }
            });
            let depth = DepthMap::from_fn(w, h, |x, y| 1.0 + x as f32 * 0.1 + y as f32);
            let bundle = FrameBundle::new(gradient(w, h), depth, motion).unwrap();
            write_frame(dir.path(), i, &bundle).unwrap();
        }
        let seq = load_sequence(dir.path()).unwrap();
        let expected_motion =
            MotionField::from_fn(w, h, |x, y| [x as f32 * 0.37 - 1.0, -(y as f32) * 1.5e-3]);
        let got: Vec<[u32; 2]> = seq[1]
            .motion
            .as_slice()
            .iter()
            .map(|m| m.map(f32::to_bits))
            .collect();
        let want: Vec<[u32; 2]> = expected_motion
            .as_slice()
            .iter()
            .map(|m| m.map(f32::to_bits))
            .collect();
        assert_eq!(got, want);
        assert_eq!(*seq[1].depth.get(3, 2), 1.0 + 3.0 * 0.1 + 2.0);
    }

    #[test]
    fn sidecar_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.depth");
        write_depth(&path, &DepthMap::filled(3, 2, 0.5)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"FDEP");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &[0; 4]);
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
    }

    #[test]
    fn truncated_sidecar_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.motion");
        write_motion(&path, &MotionField::filled(3, 2, [1.0, 2.0])).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(read_motion(&path).is_err());
        assert!(read_depth(&path).is_err()); // wrong magic
    }

    #[test]
    fn sixteen_bit_png_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("000.png");
        write_png(&path, &gradient(5, 5), PngDepth::Sixteen).unwrap();
        let img = read_png(&path).unwrap();
        assert_eq!(img.dims(), (5, 5));
        assert!((img.get(4, 0)[0] - 0.8).abs() < 1.0 / 255.0);
    }
}
