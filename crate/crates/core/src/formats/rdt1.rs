use std::fs;
use std::path::Path;

use super::bytes::{Reader, Writer};
use crate::dataset::{Dataset, Sample, SampleMeta};
use crate::error::Result;
use crate::preprocess::TargetMaps;

const MAGIC: &[u8; 4] = b"RDT1";
const VERSION: u32 = 1;

pub fn encode_dataset(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC, VERSION);
    for v in [data.channels, data.range_bins, data.doppler_bins, data.len()] {
        w.len(v)?;
    }
    for s in &data.samples {
        w.f32s(&s.input);
        w.f32s(&s.targets.presence);
        w.f32s(&s.targets.coord_x);
        w.f32s(&s.targets.coord_y);
        let m = &s.meta;
        w.u8(u8::from(m.present));
        w.f32s(&[m.range, m.velocity, m.x_im, m.y_im, m.k, m.m]);
    }
    Ok(w.buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::open("RDT1", bytes, MAGIC, VERSION)?;
    let (c, k, m, count) = (r.len()?, r.len()?, r.len()?, r.len()?);
    let mut data = Dataset::new(c, k, m);
    for _ in 0..count {
        let input = r.f32s(c * k * m)?;
        let mut targets = TargetMaps::empty(k, m);
        targets.presence = r.f32s(k * m)?;
        targets.coord_x = r.f32s(k * m)?;
        targets.coord_y = r.f32s(k * m)?;
        let present = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(r.err(format!("presence flag {other}"))),
        };
        let v = r.f32s(6)?;
        let meta = SampleMeta {
            present,
            range: v[0],
            velocity: v[1],
            x_im: v[2],
            y_im: v[3],
            k: v[4],
            m: v[5],
        };
        data.samples.push(Sample { input, targets, meta });
    }
    r.finish()?;
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, encode_dataset(data)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}
