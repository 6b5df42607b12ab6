//! Portable binary sidecar holding the final topology and weights:
//! versioned, little-endian, with an explicit layer table.

use std::io::{Read, Write};

use super::ExpError;
use crate::nn::{ConvGeometry, LayerSpec, ModelParams, ModelSpec};
use crate::sparse::{ConnectionIndex, ConnectionSet};
use crate::Real;

const MAGIC: &[u8; 4] = b"SGRW";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ExpError> {
        if self.pos + n > self.bytes.len() {
            return Err(ExpError::Io(format!(
                "sidecar truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ExpError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ExpError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ExpError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ExpError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Serialize the model spec and parameters.
pub fn encode_model(spec: &ModelSpec, params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u64(&mut out, spec.input_shape.0 as u64);
    put_u64(&mut out, spec.input_shape.1 as u64);
    put_u64(&mut out, spec.input_shape.2 as u64);
    put_f64(&mut out, spec.label_smoothing as f64);
    put_u32(&mut out, spec.layers.len() as u32);
    for layer in &spec.layers {
        match layer {
            LayerSpec::Feedforward { n_in, n_out, has_bias } => {
                out.push(0);
                put_u64(&mut out, *n_in as u64);
                put_u64(&mut out, *n_out as u64);
                out.push(*has_bias as u8);
            }
            LayerSpec::Conv2d { geom, has_bias } => {
                out.push(1);
                for v in [
                    geom.in_channels,
                    geom.in_h,
                    geom.in_w,
                    geom.out_channels,
                    geom.kernel_h,
                    geom.kernel_w,
                    geom.stride,
                    geom.padding,
                ] {
                    put_u64(&mut out, v as u64);
                }
                out.push(*has_bias as u8);
            }
            LayerSpec::Relu => out.push(2),
            LayerSpec::AvgPool { pool } => {
                out.push(3);
                put_u64(&mut out, *pool as u64);
            }
            LayerSpec::Flatten => out.push(4),
        }
    }
    for p in params.layers.iter().flatten() {
        put_u64(&mut out, p.conn.len() as u64);
        for (c, &w) in p.conn.connections().iter().zip(p.conn.weights()) {
            put_u32(&mut out, c.in_unit as u32);
            put_u32(&mut out, c.out_unit as u32);
            put_f64(&mut out, w as f64);
        }
        put_u64(&mut out, p.bias.len() as u64);
        for &b in &p.bias {
            put_f64(&mut out, b as f64);
        }
    }
    out
}

/// Parse a sidecar back into the spec and parameters (momentum zeroed).
pub fn decode_model(bytes: &[u8]) -> Result<(ModelSpec, ModelParams), ExpError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(ExpError::Io("sidecar magic mismatch".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(ExpError::Io(format!("unsupported sidecar version {version}")));
    }
    let input_shape = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
    let smoothing = r.f64()? as Real;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let kind = r.u8()?;
        layers.push(match kind {
            0 => LayerSpec::Feedforward {
                n_in: r.u64()? as usize,
                n_out: r.u64()? as usize,
                has_bias: r.u8()? != 0,
            },
            1 => {
                let vals: Vec<usize> = (0..8)
                    .map(|_| r.u64().map(|v| v as usize))
                    .collect::<Result<_, _>>()?;
                LayerSpec::Conv2d {
                    geom: ConvGeometry {
                        in_channels: vals[0],
                        in_h: vals[1],
                        in_w: vals[2],
                        out_channels: vals[3],
                        kernel_h: vals[4],
                        kernel_w: vals[5],
                        stride: vals[6],
                        padding: vals[7],
                    },
                    has_bias: r.u8()? != 0,
                }
            }
            2 => LayerSpec::Relu,
            3 => LayerSpec::AvgPool { pool: r.u64()? as usize },
            4 => LayerSpec::Flatten,
            other => return Err(ExpError::Io(format!("unknown layer kind {other}"))),
        });
    }
    let spec = ModelSpec::new(input_shape, layers).with_label_smoothing(smoothing);
    spec.validate()?;

    let mut sets = Vec::new();
    let mut biases = Vec::new();
    for layer in &spec.layers {
        let Some((n_in, n_out)) = layer.weight_dims() else { continue };
        let nnz = r.u64()? as usize;
        let mut conns = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let a = r.u32()? as usize;
            let b = r.u32()? as usize;
            conns.push(ConnectionIndex::new(a, b));
            weights.push(r.f64()? as Real);
        }
        let mut set = ConnectionSet::from_connections(n_in, n_out, conns.clone())
            .map_err(|e| ExpError::Io(format!("sidecar connections: {e}")))?;
        for (c, w) in conns.into_iter().zip(weights) {
            let pos = set.position(c).unwrap();
            set.set_weight(pos, w);
        }
        let bias_len = r.u64()? as usize;
        let mut bias = Vec::with_capacity(bias_len);
        for _ in 0..bias_len {
            bias.push(r.f64()? as Real);
        }
        sets.push(set);
        biases.push(bias);
    }
    if r.pos != bytes.len() {
        return Err(ExpError::Io(format!(
            "sidecar has {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let mut params = ModelParams::from_connection_sets(&spec, sets)?;
    let mut bias_iter = biases.into_iter();
    for p in params.layers.iter_mut().flatten() {
        let bias = bias_iter.next().unwrap();
        if bias.len() == p.bias.len() {
            p.bias = bias;
        } else {
            return Err(ExpError::Io("sidecar bias length mismatch".into()));
        }
    }
    Ok((spec, params))
}

pub fn write_model(
    path: &std::path::Path,
    spec: &ModelSpec,
    params: &ModelParams,
) -> Result<(), ExpError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| ExpError::Io(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(&encode_model(spec, params))
        .map_err(|e| ExpError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn read_model(path: &std::path::Path) -> Result<(ModelSpec, ModelParams), ExpError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| ExpError::Io(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)
        .map_err(|e| ExpError::Io(format!("cannot read {}: {e}", path.display())))?;
    decode_model(&bytes)
}
