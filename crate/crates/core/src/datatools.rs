//! Dataset preparation for the class-folder layout `root/<class>/<file>`:
//! seeded train/val/test splits and single-pass per-channel statistics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrity::FOOTPRINT_FILE;
use crate::provenance::derive_component_seed;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::stats::Welford;

/// Guards `floor(n * ratio)` against products such as `0.57 * 100 = 56.999...`.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, val_ratio: f64, test_ratio: f64) -> Result<Self> {
        let spec = Self {
            train_ratio,
            val_ratio,
            test_ratio,
        };
        for r in [train_ratio, val_ratio, test_ratio] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Spec(format!("split ratio {r} outside [0, 1]")));
            }
        }
        let sum = train_ratio + val_ratio + test_ratio;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(spec)
    }

    /// `(n_train, n_val, n_test)` for a class with `n` files.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let portion = |r: f64| ((n as f64 * r + FLOOR_SLACK).floor() as usize).min(n);
        let n_val = portion(self.val_ratio);
        let n_test = portion(self.test_ratio).min(n - n_val);
        (n - n_val - n_test, n_val, n_test)
    }
}

impl std::str::FromStr for SplitSpec {
    type Err = Error;

    /// Parses `train,val,test`, e.g. `0.6,0.2,0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Spec(format!("bad ratios {s:?}: {e}")))?;
        match parts.as_slice() {
            [t, v, te] => Self::new(*t, *v, *te),
            _ => Err(Error::Spec(format!("expected three ratios, got {s:?}"))),
        }
    }
}

/// Per-class assignment of file names to the three splits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SplitLayout {
    pub classes: BTreeMap<String, ClassSplit>,
}

impl SplitLayout {
    pub fn totals(&self) -> (usize, usize, usize) {
        self.classes.values().fold((0, 0, 0), |acc, c| {
            (acc.0 + c.train.len(), acc.1 + c.val.len(), acc.2 + c.test.len())
        })
    }
}

/// Class name to sorted file list. The root may additionally hold a
/// `footprint.json`; any other loose file or nested directory is a layout error.
pub fn scan_class_folders(root: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::Layout(format!("{} is not a directory", root.display())));
    }
    let mut classes = BTreeMap::new();
    for entry in read_dir_sorted(root)? {
        let name = file_name(&entry);
        if entry.is_dir() {
            let mut files = Vec::new();
            for item in read_dir_sorted(&entry)? {
                if !item.is_file() {
                    return Err(Error::Layout(format!(
                        "{} is not a regular file (classes must be flat folders)",
                        item.display()
                    )));
                }
                files.push(file_name(&item));
            }
            files.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            classes.insert(name, files);
        } else if name != FOOTPRINT_FILE {
            return Err(Error::Layout(format!("loose file {} at dataset root", entry.display())));
        }
    }
    if classes.is_empty() {
        return Err(Error::Layout(format!("no class folders under {}", root.display())));
    }
    Ok(classes)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

/// Deterministic assignment of a class-folder listing to splits. Each class
/// is sorted bytewise, shuffled with a SplitMix64 stream seeded by
/// `derive_component_seed(seed, "split:" + class)`, then cut into
/// train, val, test in that order.
pub fn plan_split(classes: &BTreeMap<String, Vec<String>>, spec: &SplitSpec, seed: u64) -> Result<SplitLayout> {
    let mut layout = SplitLayout::default();
    for (class, files) in classes {
        let mut files = files.clone();
        files.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
        let mut rng = SplitMix64::new(derive_component_seed(seed, &format!("split:{class}"))?);
        rng.shuffle(&mut files);
        let (n_train, n_val, _) = spec.counts(files.len());
        let test = files.split_off(n_train + n_val);
        let val = files.split_off(n_train);
        layout.classes.insert(
            class.clone(),
            ClassSplit {
                train: files,
                val,
                test,
            },
        );
    }
    Ok(layout)
}

/// Splits `root` into `out/{train,val,test}/<class>/` by copying files.
pub fn split_dataset(root: &Path, spec: &SplitSpec, seed: u64, out: &Path) -> Result<SplitLayout> {
    let classes = scan_class_folders(root)?;
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::Exists(out.to_path_buf()));
        }
    }
    let layout = plan_split(&classes, spec, seed)?;
    for (class, split) in &layout.classes {
        for (part, files) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
            let dest = out.join(part).join(class);
            fs::create_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
            for f in files {
                let from = root.join(class).join(f);
                fs::copy(&from, dest.join(f)).map_err(|e| Error::io(&from, e))?;
            }
        }
    }
    Ok(layout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats<T = f64> {
    #[serde(rename = "mean")]
    pub per_channel_mean: Vec<T>,
    #[serde(rename = "std")]
    pub per_channel_std: Vec<T>,
    pub class_counts: BTreeMap<String, u64>,
    pub n_samples: u64,
    #[serde(skip)]
    pub n_values_per_channel: u64,
}

/// Decoded sample: values interleaved by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub channels: usize,
    pub values: Vec<f64>,
}

/// Reads a PGM (P5), PPM (P6) or numeric CSV file. Image bytes are scaled by
/// 1/255. CSV rows are observations and columns are channels; a non-numeric
/// first row is treated as a header.
pub fn read_sample(path: &Path) -> Result<Sample> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        return parse_netpbm(&bytes).map_err(fmt_err);
    }
    if ext == "csv" {
        return parse_csv(&bytes).map_err(fmt_err);
    }
    Err(fmt_err("expected binary PGM/PPM or .csv".into()))
}

fn parse_netpbm(bytes: &[u8]) -> std::result::Result<Sample, String> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| "malformed header".to_owned())?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("malformed header".into());
    }
    pos += 1;
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}; only 8-bit images are supported"));
    }
    let expected = width * height * channels;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(format!("expected {expected} pixel bytes, found {}", data.len()));
    }
    Ok(Sample {
        channels,
        values: data[..expected].iter().map(|&b| f64::from(b) / 255.0).collect(),
    })
}

fn parse_csv(bytes: &[u8]) -> std::result::Result<Sample, String> {
    let text = std::str::from_utf8(bytes).map_err(|_| "not UTF-8".to_owned())?;
    let mut channels = 0;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = match row {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        };
        if row.iter().any(|x| !x.is_finite()) {
            return Err(format!("line {}: non-finite value", i + 1));
        }
        if channels == 0 {
            channels = row.len();
        } else if row.len() != channels {
            return Err(format!("line {}: expected {channels} columns, found {}", i + 1, row.len()));
        }
        values.extend(row);
    }
    if channels == 0 {
        return Err("no numeric rows".into());
    }
    Ok(Sample { channels, values })
}

/// Single-pass per-channel mean and population std over every file of a
/// class-folder dataset. Files are visited in bytewise path order so the
/// result does not depend on directory listing order.
pub fn compute_stats<T: Scalar>(root: &Path) -> Result<DatasetStats<T>> {
    let classes = scan_class_folders(root)?;
    let mut accumulators: Vec<Welford<T>> = Vec::new();
    let mut class_counts = BTreeMap::new();
    let mut n_samples = 0;
    for (class, files) in &classes {
        class_counts.insert(class.clone(), files.len() as u64);
        for f in files {
            let path = root.join(class).join(f);
            let sample = read_sample(&path)?;
            if accumulators.is_empty() {
                accumulators = vec![Welford::new(); sample.channels];
            } else if accumulators.len() != sample.channels {
                return Err(Error::Format {
                    path,
                    message: format!("{} channels, dataset has {}", sample.channels, accumulators.len()),
                });
            }
            for chunk in sample.values.chunks_exact(sample.channels) {
                for (acc, &x) in accumulators.iter_mut().zip(chunk) {
                    acc.push(T::lit(x));
                }
            }
            n_samples += 1;
        }
    }
    if n_samples == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(DatasetStats {
        per_channel_mean: accumulators.iter().map(Welford::mean).collect(),
        per_channel_std: accumulators.iter().map(Welford::population_std).collect(),
        class_counts,
        n_samples,
        n_values_per_channel: accumulators.first().map(Welford::count).unwrap_or(0),
    })
}
