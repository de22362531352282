use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{CheckpointError, Tensor, TensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteSummary {
    pub tensor_count: usize,
    pub data_bytes: u64,
}

/// Streaming container writer. Tensor data is spooled to a sidecar file as it
/// arrives, so writing never holds more than one tensor in memory; `finish`
/// assembles the final `[len][header][data]` layout and removes the sidecar.
pub struct CheckpointWriter {
    path: PathBuf,
    spool_path: PathBuf,
    spool: Option<BufWriter<File>>,
    specs: Vec<TensorSpec>,
    names: BTreeSet<String>,
    cursor: u64,
}

impl CheckpointWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref().to_path_buf();
        let mut spool_name = path.file_name().unwrap_or_default().to_os_string();
        spool_name.push(".data.tmp");
        let spool_path = path.with_file_name(spool_name);
        let spool = BufWriter::new(File::create(&spool_path)?);
        Ok(CheckpointWriter {
            path,
            spool_path,
            spool: Some(spool),
            specs: Vec::new(),
            names: BTreeSet::new(),
            cursor: 0,
        })
    }

    /// Append one tensor; data is laid out in call order with no padding.
    pub fn add_tensor(&mut self, tensor: &Tensor) -> Result<(), CheckpointError> {
        if !self.names.insert(tensor.spec.name.clone()) {
            return Err(CheckpointError::DuplicateName {
                name: tensor.spec.name.clone(),
            });
        }
        let begin = self.cursor;
        let end = begin + tensor.data.len() as u64;
        self.spool
            .as_mut()
            .expect("writer already finished")
            .write_all(&tensor.data)?;
        self.specs.push(TensorSpec {
            data_offsets: (begin, end),
            ..tensor.spec.clone()
        });
        self.cursor = end;
        Ok(())
    }

    pub fn finish(
        mut self,
        metadata: Option<&BTreeMap<String, String>>,
    ) -> Result<WriteSummary, CheckpointError> {
        let mut spool = self.spool.take().expect("writer already finished");
        spool.flush()?;
        drop(spool);

        let mut header = serde_json::Map::new();
        if let Some(meta) = metadata {
            header.insert("__metadata__".into(), serde_json::to_value(meta).unwrap());
        }
        for spec in &self.specs {
            header.insert(
                spec.name.clone(),
                serde_json::json!({
                    "dtype": spec.dtype.as_str(),
                    "shape": spec.shape,
                    "data_offsets": [spec.data_offsets.0, spec.data_offsets.1],
                }),
            );
        }
        let header_bytes = serde_json::to_vec(&serde_json::Value::Object(header)).unwrap();

        let result = (|| -> Result<WriteSummary, CheckpointError> {
            let mut out = BufWriter::new(File::create(&self.path)?);
            out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
            out.write_all(&header_bytes)?;
            let mut spool = File::open(&self.spool_path)?;
            spool.seek(SeekFrom::Start(0))?;
            let copied = copy_all(&mut spool, &mut out)?;
            out.flush()?;
            Ok(WriteSummary {
                tensor_count: self.specs.len(),
                data_bytes: copied,
            })
        })();
        let _ = std::fs::remove_file(&self.spool_path);
        if result.is_err() {
            let _ = std::fs::remove_file(&self.path);
        }
        result
    }
}

impl Drop for CheckpointWriter {
    fn drop(&mut self) {
        if self.spool.is_some() {
            // abandoned without finish: clean up the sidecar
            self.spool = None;
            let _ = std::fs::remove_file(&self.spool_path);
        }
    }
}

fn copy_all(src: &mut File, dst: &mut impl Write) -> Result<u64, CheckpointError> {
    let mut buf = vec![0u8; 1 << 20];
    let mut total = 0u64;
    loop {
        let n = src.read(&mut buf)?;
        if n == 0 {
            return Ok(total);
        }
        dst.write_all(&buf[..n])?;
        total += n as u64;
    }
}

/// Write a whole container from an ordered tensor stream.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    tensors: impl IntoIterator<Item = Tensor>,
    metadata: Option<&BTreeMap<String, String>>,
) -> Result<WriteSummary, CheckpointError> {
    let mut writer = CheckpointWriter::create(path)?;
    for tensor in tensors {
        writer.add_tensor(&tensor)?;
    }
    writer.finish(metadata)
}
