//! Image and depth-map files.
//!
//! Images: binary PGM (`P5`, maxval up to 255) and 8-bit PNG (gray, gray+alpha,
//! RGB, RGBA, palette). Color is reduced to luminance on load.
//!
//! Depth maps are UTF-8 text: a `rows cols` header line, then `rows` lines of
//! `cols` whitespace-separated decimals, top row first. Values are written in
//! shortest round-trip form so a save/load cycle is exact.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::image::GrayImage;
use crate::pipeline::DepthMap;
use crate::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// I/O error that names the file.
pub(crate) fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(with_path(path))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(path)
    } else {
        Err(Error::UnsupportedFormat(path.to_path_buf()))
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    // header: magic, width, height, maxval separated by whitespace, with
    // '#' comments running to end of line
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    let mut line = 1;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                if bytes[pos] == b'\n' {
                    line += 1;
                }
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_error(path, line, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let num = |i: usize, what: &str| -> Result<usize> {
        fields[i]
            .parse::<usize>()
            .map_err(|_| parse_error(path, line, format!("bad PGM {what} `{}`", fields[i])))
    };
    let (width, height, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval == 0 || maxval > 255 {
        return Err(parse_error(path, line, format!("PGM maxval {maxval} is not 8-bit")));
    }
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n)
        .ok_or_else(|| parse_error(path, line, format!("PGM raster holds fewer than {n} bytes")))?;
    let scale = maxval as f64;
    let data = raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    GrayImage::new(width, height, data)
}

fn decode_png(path: &Path) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path).map_err(with_path(path))?));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| parse_error(path, 0, "PNG too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let channels = info.color_type.samples();
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Grayscale => return GrayImage::from_gray8(w, h, buf),
        png::ColorType::GrayscaleAlpha => {
            return GrayImage::from_gray8(w, h, &buf.iter().step_by(2).copied().collect::<Vec<_>>())
        }
        png::ColorType::Rgb => buf.to_vec(),
        png::ColorType::Rgba | png::ColorType::Indexed => {
            buf.chunks_exact(channels).flat_map(|p| [p[0], p[1], p[2]]).collect()
        }
    };
    GrayImage::from_rgb8(w, h, &pixels)
}

/// Writes PNG when the extension is `.png`, binary PGM otherwise.
pub fn save_image(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = img.to_gray8();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let file = BufWriter::new(File::create(path).map_err(with_path(path))?);
        let mut encoder = png::Encoder::new(file, img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&bytes)?;
        writer.finish()?;
        Ok(())
    } else {
        write_pgm(path, img.width(), img.height(), &bytes)
    }
}

fn write_pgm(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(with_path(path))?);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

/// Depth rendered as 8-bit gray, `d_min -> 0` and `d_max -> 255`.
pub fn save_pgm_visualization(path: impl AsRef<Path>, depth: &DepthMap, d_min: f64, d_max: f64) -> Result<()> {
    let span = d_max - d_min;
    let bytes: Vec<u8> = depth
        .values()
        .iter()
        .map(|&v| {
            let t = if span > 0.0 { (v - d_min) / span } else { 1.0 };
            (t.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    write_pgm(path.as_ref(), depth.cols(), depth.rows(), &bytes)
}

pub fn depth_to_text(depth: &DepthMap) -> String {
    let mut s = format!("{} {}\n", depth.rows(), depth.cols());
    for row in depth.values().chunks(depth.cols()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn save_depth(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, depth_to_text(depth)).map_err(with_path(path))?;
    Ok(())
}

/// Reads a depth file as written by [`save_depth`]. Values must be finite;
/// nonpositive cells are kept so callers can decide how to clamp them.
pub fn load_depth_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(with_path(path))?;
    parse_depth_text(&text, path)
}

pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let (rows, cols, values) = load_depth_raw(path)?;
    DepthMap::new(rows, cols, values).map_err(|e| parse_error(path, 0, e.to_string()))
}

pub fn parse_depth_text(text: &str, path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_error(path, 1, "empty depth file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => (
            r.parse::<usize>()
                .map_err(|_| parse_error(path, hline, format!("bad row count `{r}`")))?,
            c.parse::<usize>()
                .map_err(|_| parse_error(path, hline, format!("bad column count `{c}`")))?,
        ),
        _ => return Err(parse_error(path, hline, "header must be `rows cols`")),
    };
    if rows == 0 || cols == 0 {
        return Err(parse_error(path, hline, "depth map must have at least one cell"));
    }
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (lineno, line) in lines {
        if seen_rows == rows {
            return Err(parse_error(path, lineno, format!("more than {rows} rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad number `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_error(path, lineno, format!("non-finite depth `{tok}`")));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(parse_error(
                path,
                lineno,
                format!("expected {cols} values, found {}", values.len() - before),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_error(
            path,
            text.lines().count(),
            format!("expected {rows} rows, found {seen_rows}"),
        ));
    }
    Ok((rows, cols, values))
}

/// Creates `dir` and returns it, mapping failures to I/O errors with the path.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(with_path(dir))?;
    Ok(dir.to_path_buf())
}
