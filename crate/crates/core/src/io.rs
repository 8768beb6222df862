//! Files: PGM frames, pattern JSON, JSONL histories.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rules::{load_preset, RuleParams};

/// Grayscale byte for a cell value in `[0, 1]`.
pub fn cell_byte(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM (P5) encoding of `grid`.
pub fn pgm_bytes(grid: &Grid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.cells().iter().map(|&v| cell_byte(v)));
    out
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

pub fn write_frame(dir: &Path, index: usize, grid: &Grid) -> Result<PathBuf> {
    let path = dir.join(frame_name(index));
    fs::write(&path, pgm_bytes(grid)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `frame_000000.pgm`, `frame_000001.pgm`, ... into `dir`, creating it.
pub fn write_frames<'a>(
    grids: impl IntoIterator<Item = &'a Grid>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    grids
        .into_iter()
        .enumerate()
        .map(|(i, g)| write_frame(dir, i, g))
        .collect()
}

/// A rule referenced by preset name or spelled out inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleRef {
    Preset(String),
    Inline(Box<RuleParams>),
}

impl RuleRef {
    /// Preset name when `rule` is identical to the shipped preset of that name.
    pub fn for_rule(rule: &RuleParams) -> Self {
        match load_preset(&rule.name) {
            Ok(preset) if preset == *rule => RuleRef::Preset(rule.name.clone()),
            _ => RuleRef::Inline(Box::new(rule.clone())),
        }
    }

    pub fn resolve(&self) -> Result<RuleParams> {
        match self {
            RuleRef::Preset(name) => load_preset(name),
            RuleRef::Inline(rule) => {
                rule.validate()?;
                Ok((**rule).clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub name: String,
    pub rule: RuleRef,
    pub height: usize,
    pub width: usize,
    /// Row-major cell values.
    pub cells: Vec<f64>,
}

impl PatternFile {
    pub fn new(name: impl Into<String>, rule: &RuleParams, grid: &Grid) -> Self {
        Self {
            name: name.into(),
            rule: RuleRef::for_rule(rule),
            height: grid.height(),
            width: grid.width(),
            cells: grid.cells().to_vec(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_cells(self.height, self.width, self.cells.clone())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        file.grid()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{GaussianBump, KernelSpec};

    #[test]
    fn zero_grid_pgm_is_fifteen_bytes() {
        let bytes = pgm_bytes(&Grid::zeros(2, 2).unwrap());
        assert_eq!(bytes.len(), 15);
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert!(bytes[11..].iter().all(|b| *b == 0));
    }

    #[test]
    fn byte_rounding() {
        assert_eq!(cell_byte(1.0), 255);
        assert_eq!(cell_byte(0.5), 128);
        assert_eq!(cell_byte(0.0), 0);
        assert_eq!(cell_byte(1.0 / 255.0), 1);
        let g = Grid::from_cells(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(pgm_bytes(&g), b"P5\n3 1\n255\n\x00\x80\xff");
    }

    #[test]
    fn frames_are_numbered() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::zeros(3, 4).unwrap();
        let files = write_frames([&g, &g, &g], &dir.path().join("f")).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_owned())
            .collect();
        assert_eq!(
            names,
            ["frame_000000.pgm", "frame_000001.pgm", "frame_000002.pgm"]
        );
        assert_eq!(fs::read(&files[2]).unwrap(), pgm_bytes(&g));
    }

    #[test]
    fn unwritable_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let g = Grid::zeros(2, 2).unwrap();
        assert!(matches!(
            write_frames([&g], &blocker.join("sub")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn pattern_file_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cells: Vec<f64> = (0..12)
            .map(|i| (i as f64 * 0.1234567890123).sin().abs() / 3.0)
            .collect();
        let grid = Grid::from_cells(3, 4, cells).unwrap();
        let preset = load_preset("Orbium").unwrap();
        let custom = RuleParams::lenia(
            "mine",
            KernelSpec::orbium(),
            GaussianBump::new(0.1, 0.01).unwrap(),
            0.2,
        )
        .unwrap();
        for rule in [preset, custom] {
            let file = PatternFile::new("p", &rule, &grid);
            let path = dir.path().join(format!("{}.json", rule.name));
            file.save(&path).unwrap();
            let back = PatternFile::load(&path).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.grid().unwrap().checksum(), grid.checksum());
            assert_eq!(back.rule.resolve().unwrap(), rule);
        }
        let text = fs::read_to_string(dir.path().join("Orbium.json")).unwrap();
        assert!(text.contains("\"rule\": \"Orbium\""));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        write_jsonl(&path, &[1.5f64, -2.0]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "1.5\n-2.0\n");
        assert_eq!(read_jsonl::<f64>(&path).unwrap(), vec![1.5, -2.0]);
    }
}
