use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{CheckpointError, DType, Tensor, TensorSpec};

#[derive(Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    data_offsets: (u64, u64),
}

#[derive(Deserialize)]
struct ShardIndex {
    weight_map: BTreeMap<String, String>,
}

/// Validated view of a checkpoint container (single file or sharded).
///
/// Opening parses and validates the header only; tensor data stays on disk
/// until [`CheckpointReader::read_tensor`]. Readers hold no open file handle,
/// so they are safe to share across threads.
#[derive(Debug)]
pub struct CheckpointReader {
    index: BTreeMap<String, TensorSpec>,
    metadata: Option<BTreeMap<String, String>>,
    /// Tensor name -> (shard path, data region start within that file).
    placement: BTreeMap<String, (PathBuf, u64)>,
}

impl CheckpointReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let (specs, metadata, data_start) = read_header(path)?;
        let mut index = BTreeMap::new();
        let mut placement = BTreeMap::new();
        for spec in specs {
            placement.insert(spec.name.clone(), (path.to_path_buf(), data_start));
            if index.insert(spec.name.clone(), spec).is_some() {
                unreachable!("duplicate rejected during header parse");
            }
        }
        Ok(CheckpointReader {
            index,
            metadata,
            placement,
        })
    }

    /// Open a sharded checkpoint via its `weight_map` index file. Shard paths
    /// are resolved relative to the index file's directory and every mapped
    /// tensor must exist in its assigned shard.
    pub fn open_sharded(index_path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let index_path = index_path.as_ref();
        let text = std::fs::read_to_string(index_path)?;
        let shard_index: ShardIndex =
            serde_json::from_str(&text).map_err(|e| CheckpointError::MalformedHeader {
                detail: format!("shard index: {e}"),
            })?;
        let dir = index_path.parent().unwrap_or_else(|| Path::new("."));

        let mut shards: BTreeMap<String, CheckpointReader> = BTreeMap::new();
        for shard_file in shard_index.weight_map.values() {
            if !shards.contains_key(shard_file) {
                shards.insert(shard_file.clone(), CheckpointReader::open(dir.join(shard_file))?);
            }
        }

        let mut index = BTreeMap::new();
        let mut placement = BTreeMap::new();
        let mut metadata = None;
        for (name, shard_file) in &shard_index.weight_map {
            let shard = &shards[shard_file];
            let spec = shard
                .spec(name)
                .ok_or_else(|| CheckpointError::MalformedHeader {
                    detail: format!("shard index maps {name:?} to {shard_file:?} but the shard lacks it"),
                })?
                .clone();
            placement.insert(name.clone(), shard.placement[name].clone());
            index.insert(name.clone(), spec);
        }
        for shard in shards.values() {
            if metadata.is_none() {
                metadata = shard.metadata.clone();
            }
        }
        Ok(CheckpointReader {
            index,
            metadata,
            placement,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Tensor names in ascending order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(|s| s.as_str())
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.index.get(name)
    }

    pub fn specs(&self) -> impl Iterator<Item = &TensorSpec> {
        self.index.values()
    }

    pub fn metadata(&self) -> Option<&BTreeMap<String, String>> {
        self.metadata.as_ref()
    }

    /// Read one tensor's bytes from disk.
    pub fn read_tensor(&self, name: &str) -> Result<Tensor, CheckpointError> {
        let spec = self
            .index
            .get(name)
            .ok_or_else(|| CheckpointError::UnknownTensor {
                name: name.to_string(),
            })?;
        let (path, data_start) = &self.placement[name];
        let mut file = File::open(path)?;
        file.seek(SeekFrom::Start(data_start + spec.data_offsets.0))?;
        let mut data = vec![0u8; spec.byte_len()];
        file.read_exact(&mut data)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => CheckpointError::TruncatedFile {
                    detail: format!("tensor {name:?} extends past end of file"),
                },
                _ => CheckpointError::Io(e),
            })?;
        Ok(Tensor {
            spec: spec.clone(),
            data,
        })
    }
}

/// Specs, optional metadata, and the file offset where the data region
/// starts.
type ParsedHeader = (Vec<TensorSpec>, Option<BTreeMap<String, String>>, u64);

/// Parse and validate a container header.
fn read_header(path: &Path) -> Result<ParsedHeader, CheckpointError> {
    let mut file = File::open(path)?;
    let file_len = file.metadata()?.len();
    if file_len < 8 {
        return Err(CheckpointError::TruncatedFile {
            detail: format!("file is {file_len} bytes, need at least 8 for the length prefix"),
        });
    }
    let mut prefix = [0u8; 8];
    file.read_exact(&mut prefix)?;
    let header_len = u64::from_le_bytes(prefix);
    if header_len > file_len - 8 {
        return Err(CheckpointError::TruncatedFile {
            detail: format!(
                "length prefix claims {header_len} header bytes but only {} remain",
                file_len - 8
            ),
        });
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    file.read_exact(&mut header_bytes)?;
    let data_start = 8 + header_len;
    let data_len = file_len - data_start;

    let header: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(&header_bytes).map_err(|e| CheckpointError::MalformedHeader {
            detail: format!("header is not a JSON object: {e}"),
        })?;

    let mut metadata = None;
    let mut specs = Vec::new();
    for (name, value) in header {
        if name == "__metadata__" {
            let map: BTreeMap<String, String> = serde_json::from_value(value).map_err(|e| {
                CheckpointError::MalformedHeader {
                    detail: format!("__metadata__ must map strings to strings: {e}"),
                }
            })?;
            metadata = Some(map);
            continue;
        }
        let entry: HeaderEntry =
            serde_json::from_value(value).map_err(|e| CheckpointError::MalformedHeader {
                detail: format!("tensor {name:?}: {e}"),
            })?;
        let spec = TensorSpec {
            name,
            dtype: DType::from_header_str(&entry.dtype)?,
            shape: entry.shape,
            data_offsets: entry.data_offsets,
        };
        spec.check_span()?;
        if spec.data_offsets.1 > data_len {
            return Err(CheckpointError::TruncatedFile {
                detail: format!(
                    "tensor {:?} ends at data offset {} but the data region is {data_len} bytes",
                    spec.name, spec.data_offsets.1
                ),
            });
        }
        specs.push(spec);
    }

    // JSON object keys are unique by construction of serde_json's map, but a
    // duplicated key in the raw text silently keeps the last entry; detect
    // that by comparing counts.
    let raw_keys = count_top_level_keys(&header_bytes);
    let parsed = specs.len() + metadata.is_some() as usize;
    if raw_keys > parsed {
        return Err(CheckpointError::MalformedHeader {
            detail: "header contains duplicate tensor names".to_string(),
        });
    }

    // offsets must not overlap
    let mut by_begin: Vec<&TensorSpec> = specs.iter().collect();
    by_begin.sort_by_key(|s| s.data_offsets);
    for pair in by_begin.windows(2) {
        if pair[1].data_offsets.0 < pair[0].data_offsets.1 {
            return Err(CheckpointError::OffsetOverlap {
                first: pair[0].name.clone(),
                second: pair[1].name.clone(),
            });
        }
    }

    Ok((specs, metadata, data_start))
}

/// Count keys of the top-level JSON object without deduplicating.
fn count_top_level_keys(bytes: &[u8]) -> usize {
    #[derive(Deserialize)]
    struct KeyCounter(#[serde(deserialize_with = "count_keys")] usize);

    fn count_keys<'de, D: serde::Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = usize;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> Result<usize, A::Error> {
                let mut n = 0;
                while map
                    .next_entry::<String, serde::de::IgnoredAny>()?
                    .is_some()
                {
                    n += 1;
                }
                Ok(n)
            }
        }
        d.deserialize_map(V)
    }

    serde_json::from_slice::<KeyCounter>(bytes).map(|k| k.0).unwrap_or(0)
}
