use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;

use super::idx::{read_idx, MAGIC_IMAGES, MAGIC_LABELS};
use crate::error::{Result, SnnError};
use crate::{IMAGE_PIXELS, IMAGE_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetName {
    Mnist,
    EmnistLetters,
}

impl DatasetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::EmnistLetters => "emnist-letters",
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            DatasetName::Mnist => 10,
            DatasetName::EmnistLetters => 26,
        }
    }

    /// Published (train, test) sizes.
    pub fn expected_sizes(&self) -> (usize, usize) {
        match self {
            DatasetName::Mnist => (60_000, 10_000),
            DatasetName::EmnistLetters => (124_800, 20_800),
        }
    }

    fn file_stem(&self, split: Split) -> &'static str {
        match (self, split) {
            (DatasetName::Mnist, Split::Train) => "train",
            (DatasetName::Mnist, Split::Test) => "t10k",
            (DatasetName::EmnistLetters, Split::Train) => "emnist-letters-train",
            (DatasetName::EmnistLetters, Split::Test) => "emnist-letters-test",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "emnist-letters" | "emnist" => Ok(DatasetName::EmnistLetters),
            other => Err(SnnError::Config(format!(
                "unknown dataset '{other}' (expected mnist or emnist-letters)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(SnnError::Config(format!("unknown split '{other}' (expected train or test)"))),
        }
    }
}

/// Labelled 28×28 images with raw 0–255 intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    images: Vec<u8>,
    labels: Vec<u8>,
    classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, classes: usize) -> Result<Self> {
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(SnnError::Input(format!(
                "{} image bytes do not match {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(SnnError::Input(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self { images, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// First `n` samples (all of them if `n` exceeds the length).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n * IMAGE_PIXELS].to_vec(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
        }
    }

    /// Relative frequency of each class.
    pub fn class_frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.classes];
        for &l in &self.labels {
            f[l as usize] += 1.0;
        }
        let n = self.len().max(1) as f64;
        f.iter_mut().for_each(|x| *x /= n);
        f
    }
}

/// Paths of the image and label files of one split inside `dir`.
pub fn split_paths(name: DatasetName, split: Split, dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let stem = name.file_stem(split);
    (
        dir.join(format!("{stem}-images-idx3-ubyte")),
        dir.join(format!("{stem}-labels-idx1-ubyte")),
    )
}

/// Loads one split. EMNIST images are transposed to MNIST orientation and
/// their 1-based labels shifted to start at 0.
pub fn load_dataset(name: DatasetName, split: Split, dir: &Path) -> Result<Dataset> {
    let (img_path, lbl_path) = split_paths(name, split, dir);
    let images = read_idx(&img_path)?;
    let labels = read_idx(&lbl_path)?;
    if images.magic() != MAGIC_IMAGES {
        return Err(SnnError::Parse {
            path: img_path,
            field: "magic",
            detail: "expected an image file".into(),
        });
    }
    if labels.magic() != MAGIC_LABELS {
        return Err(SnnError::Parse {
            path: lbl_path,
            field: "magic",
            detail: "expected a label file".into(),
        });
    }
    if images.dims[0] != labels.dims[0] {
        return Err(SnnError::Parse {
            path: lbl_path,
            field: "dimensions",
            detail: format!("{} labels for {} images", labels.dims[0], images.dims[0]),
        });
    }
    let n = images.dims[0];
    let (mut pixels, mut lbls) = (images.data, labels.data);
    if name == DatasetName::EmnistLetters {
        pixels = transpose_images(&pixels);
        for l in &mut lbls {
            if *l == 0 || *l > 26 {
                return Err(SnnError::Parse {
                    path: lbl_path,
                    field: "labels",
                    detail: format!("EMNIST letter label {l} outside 1..=26"),
                });
            }
            *l -= 1;
        }
    }
    let (train, test) = name.expected_sizes();
    let expected = if split == Split::Train { train } else { test };
    if n != expected {
        warn!("{name} {} split has {n} images; the published size is {expected}", split.as_str());
    }
    Dataset::new(pixels, lbls, name.classes()).map_err(|e| match e {
        SnnError::Input(detail) => SnnError::Parse {
            path: lbl_path.clone(),
            field: "labels",
            detail,
        },
        other => other,
    })
}

fn transpose_images(pixels: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; pixels.len()];
    for (src, dst) in pixels.chunks_exact(IMAGE_PIXELS).zip(out.chunks_exact_mut(IMAGE_PIXELS)) {
        for r in 0..IMAGE_SIDE {
            for c in 0..IMAGE_SIDE {
                dst[r * IMAGE_SIDE + c] = src[c * IMAGE_SIDE + r];
            }
        }
    }
    out
}
