//! IDX file parsing (big-endian), the MNIST container format.

use std::fs;
use std::path::Path;

use super::{DataError, Dataset, Split};
use crate::Real;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    if bytes.len() < offset + 4 {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            expected: offset + 4,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an unsigned-byte IDX file: magic `[0, 0, 0x08, ndims]`, `ndims`
/// big-endian u32 dimensions, then the raw data. Returns (data, dims).
pub fn load_idx_u8(path: &Path) -> Result<(Vec<u8>, Vec<usize>), DataError> {
    let bytes = read_file(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    let ndims = (magic & 0xff) as usize;
    if magic >> 16 != 0 || (magic >> 8) & 0xff != 0x08 || ndims == 0 || ndims > 4 {
        return Err(DataError::BadMagic {
            path: path.display().to_string(),
            offset: 0,
            found: magic,
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        dims.push(be_u32(&bytes, 4 + 4 * d, path)? as usize);
    }
    let header = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let data = &bytes[header..];
    if data.len() != expected {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            expected: header + expected,
            found: bytes.len(),
        });
    }
    Ok((data.to_vec(), dims))
}

/// Serialize an unsigned-byte IDX file; inverse of [`load_idx_u8`].
pub fn write_idx_u8(path: &Path, dims: &[usize], data: &[u8]) -> Result<(), DataError> {
    assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut bytes = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    bytes.extend_from_slice(&[0, 0, 0x08, dims.len() as u8]);
    for &d in dims {
        bytes.extend_from_slice(&(d as u32).to_be_bytes());
    }
    bytes.extend_from_slice(data);
    fs::write(path, bytes).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Load an MNIST-style split from `<dir>/<prefix>-images-idx3-ubyte` and
/// `<dir>/<prefix>-labels-idx1-ubyte`; pixels scaled to [0, 1].
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset, DataError> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let (pixels, img_dims) = load_idx_u8(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
    let (labels, label_dims) = load_idx_u8(&dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
    if img_dims.len() != 3 {
        return Err(DataError::Malformed(format!(
            "image file has {} dimensions, expected 3",
            img_dims.len()
        )));
    }
    if label_dims != [img_dims[0]] {
        return Err(DataError::Malformed(format!(
            "{} labels for {} images",
            label_dims[0], img_dims[0]
        )));
    }
    let ds = Dataset {
        name: "mnist".into(),
        split,
        shape: (1, img_dims[1], img_dims[2]),
        images: pixels.iter().map(|&p| p as Real / 255.0).collect(),
        labels: labels.iter().map(|&l| l as usize).collect(),
        num_classes: 10,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic-idx");
        let data: Vec<u8> = (0..24).collect();
        write_idx_u8(&path, &[2, 3, 4], &data).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 0x08, 3]);
        let (back, dims) = load_idx_u8(&path).unwrap();
        assert_eq!(dims, vec![2, 3, 4]);
        assert_eq!(back, data);
        // writing again yields identical bytes
        let path2 = dir.path().join("again");
        write_idx_u8(&path2, &dims, &back).unwrap();
        assert_eq!(std::fs::read(&path2).unwrap(), raw);
    }

    #[test]
    fn corrupt_magic_is_reported_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        std::fs::write(&path, [9u8, 9, 9, 9, 0, 0, 0, 1, 42]).unwrap();
        let err = load_idx_u8(&path).unwrap_err();
        match err {
            DataError::BadMagic { offset, found, .. } => {
                assert_eq!(offset, 0);
                assert_eq!(found, 0x09090909);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short");
        // claims 2x3 = 6 bytes of data, provides 5
        let mut bytes = vec![0, 0, 0x08, 2];
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&3u32.to_be_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 4, 5]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_idx_u8(&path).unwrap_err(),
            DataError::Truncated { .. }
        ));
    }

    #[test]
    fn mnist_loader_scales_and_shapes() {
        let dir = tempfile::tempdir().unwrap();
        // two 2x2 "images"
        write_idx_u8(
            &dir.path().join("train-images-idx3-ubyte"),
            &[2, 2, 2],
            &[0, 51, 102, 153, 204, 255, 0, 255],
        )
        .unwrap();
        write_idx_u8(&dir.path().join("train-labels-idx1-ubyte"), &[2], &[7, 3]).unwrap();
        let ds = load_mnist(dir.path(), Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.shape, (1, 2, 2));
        assert_eq!(ds.labels, vec![7, 3]);
        assert!((ds.images[1] - 0.2).abs() < 1e-12);
        assert!((ds.images[5] - 1.0).abs() < 1e-12);
    }
}
