use std::fs;
use std::path::Path;

use super::bytes::{Reader, Writer};
use crate::error::Result;
use crate::neural::{LayerKind, NetworkParams, NetworkSpec, Tensor4};

const MAGIC: &[u8; 4] = b"RDW1";
const VERSION: u32 = 1;

/// Parameters plus optional momentum state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams<f32>,
    pub momentum: Option<NetworkParams<f32>>,
}

fn write_blobs(w: &mut Writer, params: &NetworkParams<f32>) -> Result<()> {
    for layer in &params.layers {
        for d in layer.weight.shape() {
            w.len(d)?;
        }
        w.f32s(layer.weight.data());
        w.len(layer.bias.len())?;
        w.f32s(&layer.bias);
    }
    Ok(())
}

fn read_blobs(r: &mut Reader, spec: &NetworkSpec) -> Result<NetworkParams<f32>> {
    let mut params = NetworkParams::zeros(spec);
    for layer in &mut params.layers {
        let shape = [r.len()?, r.len()?, r.len()?, r.len()?];
        if shape != layer.weight.shape() {
            return Err(r.err(format!("{}: weight shape {shape:?}", layer.def.name)));
        }
        let n = layer.weight.len();
        layer.weight = Tensor4::from_vec(shape, r.f32s(n)?)?;
        let b = r.len()?;
        if b != layer.bias.len() {
            return Err(r.err(format!("{}: bias length {b}", layer.def.name)));
        }
        layer.bias = r.f32s(b)?;
    }
    Ok(params)
}

pub fn encode_checkpoint(params: &NetworkParams<f32>, momentum: Option<&NetworkParams<f32>>) -> Result<Vec<u8>> {
    let spec = &params.spec;
    let mut w = Writer::new(MAGIC, VERSION);
    w.len(spec.in_channels)?;
    w.len(spec.widths.len())?;
    for &c in &spec.widths {
        w.len(c)?;
    }
    w.len(params.layers.len())?;
    for layer in &params.layers {
        let def = &layer.def;
        w.len(def.name.len())?;
        w.buf.extend_from_slice(def.name.as_bytes());
        w.u8(def.kind.code());
        w.len(def.in_channels)?;
        w.len(def.out_channels)?;
    }
    write_blobs(&mut w, params)?;
    match momentum {
        Some(v) => {
            if v.spec != *spec {
                return Err(crate::error::shape_err("momentum spec differs from params"));
            }
            w.u8(1);
            write_blobs(&mut w, v)?;
        }
        None => w.u8(0),
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::open("RDW1", bytes, MAGIC, VERSION)?;
    let in_channels = r.len()?;
    let levels = r.len()?;
    let widths = (0..levels).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
    let spec = NetworkSpec::new(in_channels, &widths)?;
    let expected = spec.layers();
    let count = r.len()?;
    if count != expected.len() {
        return Err(r.err(format!("{count} layers, spec implies {}", expected.len())));
    }
    for def in &expected {
        let name_len = r.len()?;
        let name = r.bytes(name_len)?;
        let kind = LayerKind::from_code(r.u8()?);
        let (cin, cout) = (r.len()?, r.len()?);
        if name != def.name.as_bytes() || kind != Some(def.kind) || cin != def.in_channels || cout != def.out_channels {
            return Err(r.err(format!("layer table disagrees with spec at {}", def.name)));
        }
    }
    let params = read_blobs(&mut r, &spec)?;
    let momentum = match r.u8()? {
        0 => None,
        1 => Some(read_blobs(&mut r, &spec)?),
        other => return Err(r.err(format!("momentum flag {other}"))),
    };
    r.finish()?;
    Ok(Checkpoint { params, momentum })
}

pub fn write_checkpoint(path: &Path, params: &NetworkParams<f32>, momentum: Option<&NetworkParams<f32>>) -> Result<()> {
    fs::write(path, encode_checkpoint(params, momentum)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}
