//! Little-endian binary containers: RDR1 recordings, RDT1 datasets and
//! RDW1 checkpoints.

mod bytes;
mod rdr1;
mod rdt1;
mod rdw1;

pub use rdr1::{
    decode_recording, encode_recording, read_recording, sidecar_path, write_recording,
    RecordingSidecar,
};
pub use rdt1::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use rdw1::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
};
