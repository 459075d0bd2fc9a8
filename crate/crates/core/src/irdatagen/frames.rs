//! Frame folders: `frames/frame_XXXX.txt` in the patch text layout plus a
//! `truths.csv` with header `frame,row,col`. Works for generated scenes and
//! for user-supplied frames alike.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch::Patch;

use super::scene::Scene;

pub const FRAMES_DIR: &str = "frames";
pub const TRUTHS_FILE: &str = "truths.csv";
const TRUTHS_HEADER: &str = "frame,row,col";

/// A full frame with its annotated target centres.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub image: Patch,
    pub truths: Vec<(usize, usize)>,
}

impl From<Scene> for Frame {
    fn from(s: Scene) -> Self {
        Frame {
            image: s.image,
            truths: s.truths,
        }
    }
}

impl From<&Scene> for Frame {
    fn from(s: &Scene) -> Self {
        Frame {
            image: s.image.clone(),
            truths: s.truths.clone(),
        }
    }
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:04}.txt")
}

pub fn write_frames(frames: &[Frame], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let frames_dir = dir.join(FRAMES_DIR);
    std::fs::create_dir_all(&frames_dir)?;
    let mut csv = String::from(TRUTHS_HEADER);
    csv.push('\n');
    for (i, f) in frames.iter().enumerate() {
        std::fs::write(frames_dir.join(frame_name(i)), f.image.to_text())?;
        for &(r, c) in &f.truths {
            let _ = writeln!(csv, "{i},{r},{c}");
        }
    }
    std::fs::write(dir.join(TRUTHS_FILE), csv)?;
    Ok(())
}

/// Reads `frame_0000.txt`, `frame_0001.txt`, … until the first gap. A
/// missing truths file means no annotated targets.
pub fn read_frames(dir: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let dir = dir.as_ref();
    let frames_dir = dir.join(FRAMES_DIR);
    if !frames_dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", frames_dir.display()),
        )));
    }
    let mut frames = Vec::new();
    loop {
        let path = frames_dir.join(frame_name(frames.len()));
        if !path.exists() {
            break;
        }
        let text = std::fs::read_to_string(&path)?;
        let image: Patch = text.parse().map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        frames.push(Frame {
            image,
            truths: Vec::new(),
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let truths_path = dir.join(TRUTHS_FILE);
    if truths_path.exists() {
        let text = std::fs::read_to_string(truths_path)?;
        parse_truths(&text, &mut frames)?;
    }
    Ok(frames)
}

fn parse_truths(text: &str, frames: &mut [Frame]) -> Result<()> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == TRUTHS_HEADER => {}
        Some((i, _)) => return Err(Error::parse(i + 1, format!("expected header `{TRUTHS_HEADER}`"))),
        None => return Ok(()),
    }
    for (i, line) in lines {
        let fields: Vec<usize> = line
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let [frame, row, col] = fields[..] else {
            return Err(Error::parse(i + 1, "expected `frame,row,col`"));
        };
        let f = frames
            .get_mut(frame)
            .ok_or_else(|| Error::parse(i + 1, format!("frame {frame} does not exist")))?;
        if row >= f.image.height() || col >= f.image.width() {
            return Err(Error::parse(
                i + 1,
                format!("truth ({row}, {col}) lies outside frame {frame}"),
            ));
        }
        f.truths.push((row, col));
    }
    Ok(())
}
