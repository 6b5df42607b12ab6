//! Convolution as a batched feedforward layer.
//!
//! A conv weight lives on the flattened (in_channels * kernel_h * kernel_w)
//! by out_channels matrix; im2col turns each spatial output position into an
//! extra batch column, so the sparse matmul kernels apply unchanged.

use super::NnError;
use crate::{Mat, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    /// Row count of the patch matrix: in_channels * kernel area.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Spatial output positions per sample.
    pub fn n_patches(&self) -> usize {
        self.out_h() * self.out_w()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(NnError::InvalidModel("conv with zero channels".into()));
        }
        if self.stride == 0 {
            return Err(NnError::InvalidModel("conv stride must be >= 1".into()));
        }
        if self.kernel_h == 0
            || self.kernel_w == 0
            || self.kernel_h > self.in_h + 2 * self.padding
            || self.kernel_w > self.in_w + 2 * self.padding
        {
            return Err(NnError::InvalidModel(format!(
                "kernel {}x{} does not fit padded input {}x{}",
                self.kernel_h,
                self.kernel_w,
                self.in_h + 2 * self.padding,
                self.in_w + 2 * self.padding
            )));
        }
        Ok(())
    }
}

/// Unroll the input (in_channels*H*W rows, B columns) into the patch matrix
/// (patch_len rows, B * n_patches columns). Column `j * n_patches + p` holds
/// patch `p` of sample `j`; padding positions contribute zero.
pub fn im2col(input: &Mat, geom: &ConvGeometry) -> Result<Mat, NnError> {
    let units = geom.in_channels * geom.in_h * geom.in_w;
    if input.nrows() != units {
        return Err(NnError::Shape(format!(
            "im2col: expected {units} input rows, got {}",
            input.nrows()
        )));
    }
    let batch = input.ncols();
    let (out_h, out_w) = (geom.out_h(), geom.out_w());
    let patches = out_h * out_w;
    let mut cols = Mat::zeros((geom.patch_len(), batch * patches));
    for c in 0..geom.in_channels {
        for ky in 0..geom.kernel_h {
            for kx in 0..geom.kernel_w {
                let row = (c * geom.kernel_h + ky) * geom.kernel_w + kx;
                for oy in 0..out_h {
                    let iy = (oy * geom.stride + ky) as isize - geom.padding as isize;
                    if iy < 0 || iy >= geom.in_h as isize {
                        continue;
                    }
                    for ox in 0..out_w {
                        let ix = (ox * geom.stride + kx) as isize - geom.padding as isize;
                        if ix < 0 || ix >= geom.in_w as isize {
                            continue;
                        }
                        let in_row = (c * geom.in_h + iy as usize) * geom.in_w + ix as usize;
                        let p = oy * out_w + ox;
                        for j in 0..batch {
                            cols[[row, j * patches + p]] = input[[in_row, j]];
                        }
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// Adjoint of [`im2col`]: scatter-accumulate patch-matrix gradients back onto
/// the input layout. Entries that came from padding are dropped.
pub fn col2im(cols: &Mat, geom: &ConvGeometry) -> Result<Mat, NnError> {
    let (out_h, out_w) = (geom.out_h(), geom.out_w());
    let patches = out_h * out_w;
    if cols.nrows() != geom.patch_len() || cols.ncols() % patches != 0 {
        return Err(NnError::Shape(format!(
            "col2im: got {}x{}, expected {} rows and a multiple of {patches} columns",
            cols.nrows(),
            cols.ncols(),
            geom.patch_len()
        )));
    }
    let batch = cols.ncols() / patches;
    let mut input = Mat::zeros((geom.in_channels * geom.in_h * geom.in_w, batch));
    for c in 0..geom.in_channels {
        for ky in 0..geom.kernel_h {
            for kx in 0..geom.kernel_w {
                let row = (c * geom.kernel_h + ky) * geom.kernel_w + kx;
                for oy in 0..out_h {
                    let iy = (oy * geom.stride + ky) as isize - geom.padding as isize;
                    if iy < 0 || iy >= geom.in_h as isize {
                        continue;
                    }
                    for ox in 0..out_w {
                        let ix = (ox * geom.stride + kx) as isize - geom.padding as isize;
                        if ix < 0 || ix >= geom.in_w as isize {
                            continue;
                        }
                        let in_row = (c * geom.in_h + iy as usize) * geom.in_w + ix as usize;
                        let p = oy * out_w + ox;
                        for j in 0..batch {
                            input[[in_row, j]] += cols[[row, j * patches + p]];
                        }
                    }
                }
            }
        }
    }
    Ok(input)
}

/// Reshape the patch-major conv output (out_channels x B*P) into the unit
/// layout (out_channels*P x B), adding the per-channel bias.
pub fn fold_conv_output(out_eff: &Mat, bias: &[Real], patches: usize) -> Mat {
    let channels = out_eff.nrows();
    let batch = out_eff.ncols() / patches;
    let mut out = Mat::zeros((channels * patches, batch));
    for c in 0..channels {
        let b = if bias.is_empty() { 0.0 } else { bias[c] };
        for j in 0..batch {
            for p in 0..patches {
                out[[c * patches + p, j]] = out_eff[[c, j * patches + p]] + b;
            }
        }
    }
    out
}

/// Inverse of [`fold_conv_output`] for gradients: unit layout
/// (out_channels*P x B) back to patch-major (out_channels x B*P).
pub fn unfold_conv_delta(delta: &Mat, channels: usize, patches: usize) -> Mat {
    let batch = delta.ncols();
    let mut eff = Mat::zeros((channels, batch * patches));
    for c in 0..channels {
        for j in 0..batch {
            for p in 0..patches {
                eff[[c, j * patches + p]] = delta[[c * patches + p, j]];
            }
        }
    }
    eff
}
