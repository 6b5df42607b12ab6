//! CIFAR binary format: fixed-size records of one (or two) label bytes
//! followed by 3072 pixel bytes in channel-planar RGB order.

use std::fs;
use std::path::Path;

use super::{DataError, Dataset, Split};
use crate::Real;

const PIXELS: usize = 3 * 32 * 32;

fn read_records(
    path: &Path,
    label_bytes: usize,
) -> Result<(Vec<Real>, Vec<usize>), DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let record = label_bytes + PIXELS;
    if bytes.len() % record != 0 {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            expected: (bytes.len() / record + 1) * record,
            found: bytes.len(),
        });
    }
    let n = bytes.len() / record;
    let mut images = Vec::with_capacity(n * PIXELS);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let rec = &bytes[r * record..(r + 1) * record];
        // the fine label is the last label byte
        labels.push(rec[label_bytes - 1] as usize);
        images.extend(rec[label_bytes..].iter().map(|&p| p as Real / 255.0));
    }
    Ok((images, labels))
}

/// One CIFAR-10 batch file: 3073-byte records.
pub fn load_cifar10_batch(path: &Path) -> Result<(Vec<Real>, Vec<usize>), DataError> {
    read_records(path, 1)
}

/// CIFAR-10 from the standard binary layout: `data_batch_{1..5}.bin` for
/// train, `test_batch.bin` for test.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Dataset, DataError> {
    let files: Vec<String> = match split {
        Split::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
        Split::Test => vec!["test_batch.bin".to_string()],
    };
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for f in files {
        let (mut i, mut l) = load_cifar10_batch(&dir.join(f))?;
        images.append(&mut i);
        labels.append(&mut l);
    }
    let ds = Dataset {
        name: "cifar10".into(),
        split,
        shape: (3, 32, 32),
        images,
        labels,
        num_classes: 10,
    };
    ds.validate()?;
    Ok(ds)
}

/// CIFAR-100 (`train.bin` / `test.bin`): 3074-byte records with coarse and
/// fine label bytes; the fine label is kept.
pub fn load_cifar100(dir: &Path, split: Split) -> Result<Dataset, DataError> {
    let file = match split {
        Split::Train => "train.bin",
        Split::Test => "test.bin",
    };
    let (images, labels) = read_records(&dir.join(file), 2)?;
    let ds = Dataset {
        name: "cifar100".into(),
        split,
        shape: (3, 32, 32),
        images,
        labels,
        num_classes: 100,
    };
    ds.validate()?;
    Ok(ds)
}
