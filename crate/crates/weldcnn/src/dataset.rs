//! Two-class dataset directories.
//!
//! ```text
//! <root>/ge80/*.{png,ppm,pgm}   label 1, welding efficiency ≥ 80%
//! <root>/lt80/*.{png,ppm,pgm}   label 0, welding efficiency < 80%
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use weldcnn_core::data::{resize_bilinear, Dataset, Label, Sample, IMAGE_SHAPE};
use weldcnn_core::{rng, Tensor};

use crate::image_io::{decode_image, write_ppm, ImageFormat};
use crate::{Error, Result};

/// A file that was found but could not be turned into a sample.
#[derive(Debug)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: Error,
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub skipped: Vec<Skipped>,
}

/// Resizes to the canonical `40 × 40` if needed.
pub fn to_model_input(img: Tensor) -> Result<Tensor> {
    let [h, w, _] = IMAGE_SHAPE;
    if img.shape()[..2] == [h, w] {
        Ok(img)
    } else {
        Ok(resize_bilinear(&img, h, w)?)
    }
}

fn load_file(path: &Path, format: ImageFormat) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    to_model_input(decode_image(&bytes, format)?)
}

/// Loads every image under `ge80/` and `lt80/`, ordered by class (lt80
/// first) and then by file name. Undecodable files are skipped and
/// reported; files with other extensions are ignored.
pub fn load_dataset(root: &Path) -> Result<LoadedDataset> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for label in Label::ALL {
        let dir = root.join(label.dir_name());
        if !dir.is_dir() {
            return Err(Error::Layout(format!(
                "missing class directory {}",
                dir.display()
            )));
        }
        let mut files: Vec<(PathBuf, ImageFormat)> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .filter_map(|p| ImageFormat::from_path(&p).map(|f| (p, f)))
            .collect();
        files.sort_by(|a, b| a.0.file_name().cmp(&b.0.file_name()));
        for (path, format) in files {
            let id = format!(
                "{}/{}",
                label.dir_name(),
                path.file_name().unwrap_or_default().to_string_lossy()
            );
            match load_file(&path, format)
                .and_then(|img| Sample::new(img, label, id).map_err(Error::from))
            {
                Ok(sample) => samples.push(sample),
                Err(reason) => skipped.push(Skipped { path, reason }),
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(samples),
        skipped,
    })
}

/// File name of the `index`-th synthetic image of a class.
pub fn synth_file_name(label: Label, index: usize) -> String {
    format!("synth_{}_{index}.ppm", label.index())
}

/// Writes `per_class` synthetic PPM images per class in the dataset layout;
/// image `i` of either class uses seed `derive_seed(seed, i)`.
pub fn write_synthetic(root: &Path, per_class: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(2 * per_class);
    for label in Label::ALL {
        let dir = root.join(label.dir_name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for i in 0..per_class {
            let sample =
                weldcnn_core::data::synth_generate(label, rng::derive_seed(seed, i as u64));
            let path = dir.join(synth_file_name(label, i));
            write_ppm(&path, &sample.image)?;
            written.push(path);
        }
    }
    Ok(written)
}
