use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    clean_text, detect_format, extract_text, CorpusError, DocFormat, DocumentRecord, DropReason,
    PipelinePolicy, PipelineStats, TokenEstimator, WordCountEstimator,
};

/// An unprocessed document from a source.
#[derive(Debug, Clone)]
pub struct RawDocument {
    pub id: String,
    pub source: String,
    pub raw: Vec<u8>,
}

/// One output row of a cleaned shard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardRecord {
    pub id: String,
    pub source: String,
    pub text: String,
    pub token_estimate: u64,
}

/// Yields raw documents. Implementations decide ordering; the filesystem
/// source yields path-sorted documents so runs are reproducible.
pub trait DocumentSource: Send {
    fn next_document(&mut self) -> std::io::Result<Option<RawDocument>>;
}

/// Receives cleaned records. The pipeline writes from a single thread.
pub trait DocumentSink {
    /// Returns the number of output bytes the record occupied.
    fn write_record(&mut self, record: &ShardRecord) -> std::io::Result<u64>;
    fn finish(&mut self) -> std::io::Result<()>;
    /// Remove partial output after a failed run.
    fn abort(&mut self) -> std::io::Result<()>;
}

/// Recursive directory source; documents are ordered by relative path and the
/// id is that relative path.
pub struct FsSource {
    root: PathBuf,
    files: std::vec::IntoIter<PathBuf>,
}

impl FsSource {
    pub fn new(root: impl AsRef<Path>) -> std::io::Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mut files = Vec::new();
        collect_files(&root, &mut files)?;
        files.sort();
        Ok(FsSource {
            root,
            files: files.into_iter(),
        })
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

impl DocumentSource for FsSource {
    fn next_document(&mut self) -> std::io::Result<Option<RawDocument>> {
        let Some(path) = self.files.next() else {
            return Ok(None);
        };
        let raw = std::fs::read(&path)?;
        let id = path
            .strip_prefix(&self.root)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        Ok(Some(RawDocument {
            id,
            source: path.to_string_lossy().into_owned(),
            raw,
        }))
    }
}

/// JSON-lines shard writer: `shard-00000.jsonl`, `shard-00001.jsonl`, …
/// rolled when a shard would exceed the byte cap.
pub struct JsonlShardSink {
    dir: PathBuf,
    shard_bytes: u64,
    current: Option<BufWriter<File>>,
    current_bytes: u64,
    shard_index: usize,
    written_paths: Vec<PathBuf>,
}

impl JsonlShardSink {
    pub const DEFAULT_SHARD_BYTES: u64 = 256 * 1024 * 1024;

    pub fn new(dir: impl AsRef<Path>, shard_bytes: u64) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(JsonlShardSink {
            dir: dir.as_ref().to_path_buf(),
            shard_bytes: shard_bytes.max(1),
            current: None,
            current_bytes: 0,
            shard_index: 0,
            written_paths: Vec::new(),
        })
    }

    pub fn shard_paths(&self) -> &[PathBuf] {
        &self.written_paths
    }

    fn open_next(&mut self) -> std::io::Result<()> {
        let path = self.dir.join(format!("shard-{:05}.jsonl", self.shard_index));
        self.shard_index += 1;
        self.current = Some(BufWriter::new(File::create(&path)?));
        self.current_bytes = 0;
        self.written_paths.push(path);
        Ok(())
    }
}

impl DocumentSink for JsonlShardSink {
    fn write_record(&mut self, record: &ShardRecord) -> std::io::Result<u64> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let line_bytes = line.len() as u64;
        if self.current.is_none()
            || (self.current_bytes > 0 && self.current_bytes + line_bytes > self.shard_bytes)
        {
            if let Some(mut w) = self.current.take() {
                w.flush()?;
            }
            self.open_next()?;
        }
        self.current
            .as_mut()
            .unwrap()
            .write_all(line.as_bytes())?;
        self.current_bytes += line_bytes;
        Ok(line_bytes)
    }

    fn finish(&mut self) -> std::io::Result<()> {
        if self.current.is_none() && self.written_paths.is_empty() {
            self.open_next()?; // an empty run still produces a valid shard
        }
        if let Some(mut w) = self.current.take() {
            w.flush()?;
        }
        Ok(())
    }

    fn abort(&mut self) -> std::io::Result<()> {
        self.current = None;
        for path in self.written_paths.drain(..) {
            let _ = std::fs::remove_file(path);
        }
        Ok(())
    }
}

/// Read shard files back as records, e.g. for mixing.
pub fn read_shard_records(path: &Path) -> Result<Vec<ShardRecord>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ShardRecord = serde_json::from_str(line).map_err(|e| {
            CorpusError::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            ))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Run detect → extract → clean on one document.
pub fn process_document(doc: RawDocument, policy: &PipelinePolicy) -> DocumentRecord {
    let format = detect_format(&doc.raw, &doc.id);
    let mut record = DocumentRecord {
        id: doc.id,
        source: doc.source,
        raw: doc.raw,
        format,
        text: None,
        drop_reason: None,
        token_estimate: 0,
    };
    if !policy.accepted.contains(&format) {
        record.drop_reason = Some(DropReason::RejectedFormat(format));
        return record;
    }
    let text = match format {
        DocFormat::Html => match extract_text(&record.raw) {
            Ok(t) => t,
            Err(_) => {
                record.drop_reason = Some(DropReason::RejectedFormat(DocFormat::Unknown));
                return record;
            }
        },
        _ => String::from_utf8_lossy(&record.raw).into_owned(),
    };
    match clean_text(&text, policy.min_chars) {
        Ok(cleaned) => {
            record.token_estimate = WordCountEstimator.estimate(&cleaned);
            record.text = Some(cleaned);
        }
        Err(reason) => record.drop_reason = Some(reason),
    }
    record
}

/// Read every source document exactly once; write it cleaned or count it
/// under one drop reason. Documents are processed concurrently but written
/// in source order, so output shards are deterministic for a fixed source
/// order at any worker count.
pub fn run_pipeline(
    source: &mut dyn DocumentSource,
    sink: &mut dyn DocumentSink,
    policy: &PipelinePolicy,
    workers: usize,
) -> Result<PipelineStats, CorpusError> {
    let started = Instant::now();
    let mut stats = PipelineStats::default();

    let result = pump(source, sink, policy, workers.max(1), &mut stats);
    match result {
        Ok(()) => {
            sink.finish()?;
            stats.elapsed_ms = started.elapsed().as_millis() as u64;
            Ok(stats)
        }
        Err(err) => {
            let _ = sink.abort();
            Err(err)
        }
    }
}

fn account(
    record: DocumentRecord,
    sink: &mut dyn DocumentSink,
    stats: &mut PipelineStats,
) -> Result<(), CorpusError> {
    stats.read += 1;
    stats.bytes_in += record.raw.len() as u64;
    if record.format == DocFormat::Html && record.text.is_some() {
        stats.extracted += 1;
    }
    match record.drop_reason {
        Some(reason) => {
            *stats.dropped.entry(reason.label().to_string()).or_insert(0) += 1;
        }
        None => {
            let out = ShardRecord {
                id: record.id,
                source: record.source,
                text: record.text.expect("kept records carry text"),
                token_estimate: record.token_estimate,
            };
            stats.bytes_out += sink.write_record(&out)?;
            stats.written += 1;
        }
    }
    Ok(())
}

fn pump(
    source: &mut dyn DocumentSource,
    sink: &mut dyn DocumentSink,
    policy: &PipelinePolicy,
    workers: usize,
    stats: &mut PipelineStats,
) -> Result<(), CorpusError> {
    if workers == 1 {
        while let Some(doc) = source.next_document()? {
            account(process_document(doc, policy), sink, stats)?;
        }
        return Ok(());
    }

    let capacity = workers * 2;
    let (job_tx, job_rx) = crossbeam_channel::bounded::<(u64, RawDocument)>(capacity);
    let (result_tx, result_rx) = crossbeam_channel::bounded::<(u64, DocumentRecord)>(capacity);

    std::thread::scope(|scope| -> Result<(), CorpusError> {
        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let result_tx = result_tx.clone();
            scope.spawn(move || {
                while let Ok((seq, doc)) = job_rx.recv() {
                    if result_tx.send((seq, process_document(doc, policy))).is_err() {
                        break;
                    }
                }
            });
        }
        drop(job_rx);
        drop(result_tx);

        // feed from the source on its own thread; the first send error means
        // every worker has stopped
        let feeder = scope.spawn(move || -> std::io::Result<u64> {
            let mut seq = 0u64;
            while let Some(doc) = source.next_document()? {
                if job_tx.send((seq, doc)).is_err() {
                    break;
                }
                seq += 1;
            }
            Ok(seq)
        });

        // single writer restores source order (the filesystem source yields
        // ascending ids, so this is id order for tree inputs)
        let mut drain = |result_rx: crossbeam_channel::Receiver<(u64, DocumentRecord)>| {
            let mut pending: BTreeMap<u64, DocumentRecord> = BTreeMap::new();
            let mut next = 0u64;
            for (seq, record) in result_rx.iter() {
                pending.insert(seq, record);
                while let Some(record) = pending.remove(&next) {
                    account(record, sink, stats)?;
                    next += 1;
                }
            }
            debug_assert!(pending.is_empty());
            Ok::<(), CorpusError>(())
        };
        let drained = drain(result_rx);
        let fed = feeder.join().expect("feeder does not panic");
        drained?;
        fed?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, raw: &[u8]) -> RawDocument {
        RawDocument {
            id: id.to_string(),
            source: format!("mem:{id}"),
            raw: raw.to_vec(),
        }
    }

    struct VecSource(std::vec::IntoIter<RawDocument>);
    impl DocumentSource for VecSource {
        fn next_document(&mut self) -> std::io::Result<Option<RawDocument>> {
            Ok(self.0.next())
        }
    }

    #[derive(Default)]
    struct VecSink {
        records: Vec<ShardRecord>,
        finished: bool,
        aborted: bool,
    }
    impl DocumentSink for VecSink {
        fn write_record(&mut self, record: &ShardRecord) -> std::io::Result<u64> {
            self.records.push(record.clone());
            Ok(record.text.len() as u64)
        }
        fn finish(&mut self) -> std::io::Result<()> {
            self.finished = true;
            Ok(())
        }
        fn abort(&mut self) -> std::io::Result<()> {
            self.aborted = true;
            Ok(())
        }
    }

    #[test]
    fn three_document_example() {
        let docs = vec![
            doc("a.html", b"<h1>T</h1><p>Hello filing world.</p>"),
            doc("b.pdf", b"%PDF-1.4 binary"),
            doc("c.txt", b"plain body text"),
        ];
        let mut source = VecSource(docs.into_iter());
        let mut sink = VecSink::default();
        let stats = run_pipeline(&mut source, &mut sink, &PipelinePolicy::default(), 1).unwrap();
        assert_eq!(stats.read, 3);
        assert_eq!(stats.written, 2);
        assert_eq!(stats.extracted, 1);
        assert_eq!(stats.dropped.get("pdf"), Some(&1));
        assert_eq!(stats.read, stats.written + stats.dropped_total());
        assert_eq!(sink.records[0].text, "# T\n\nHello filing world.");
        assert!(sink.finished);
    }

    #[test]
    fn empty_source_yields_zero_stats_and_valid_empty_shard() {
        let dir = tempfile::tempdir().unwrap();
        let mut source = VecSource(Vec::new().into_iter());
        let mut sink = JsonlShardSink::new(dir.path(), 1024).unwrap();
        let stats = run_pipeline(&mut source, &mut sink, &PipelinePolicy::default(), 1).unwrap();
        assert_eq!(stats.read, 0);
        assert_eq!(stats.written, 0);
        let shard = dir.path().join("shard-00000.jsonl");
        assert!(shard.exists());
        assert_eq!(std::fs::read(&shard).unwrap(), b"");
    }

    #[test]
    fn too_short_documents_are_dropped() {
        let docs = vec![doc("a.txt", b"tiny"), doc("b.txt", b"long enough body")];
        let mut source = VecSource(docs.into_iter());
        let mut sink = VecSink::default();
        let policy = PipelinePolicy {
            min_chars: 10,
            ..PipelinePolicy::default()
        };
        let stats = run_pipeline(&mut source, &mut sink, &policy, 1).unwrap();
        assert_eq!(stats.written, 1);
        assert_eq!(stats.dropped.get("too_short"), Some(&1));
    }

    #[test]
    fn conservation_and_worker_determinism_on_mixed_corpus() {
        let mut docs = Vec::new();
        for i in 0..120 {
            let raw: Vec<u8> = match i % 5 {
                0 => format!("<p>Filing {i} discusses quarterly results at length.</p>")
                    .into_bytes(),
                1 => format!("Plain disclosure text number {i} with enough words.").into_bytes(),
                2 => b"%PDF-1.5 not text".to_vec(),
                3 => b"PK\x03\x04zipped".to_vec(),
                _ => format!("<div>Summary {i}</div><script>skip()</script>").into_bytes(),
            };
            docs.push(doc(&format!("doc-{i:04}"), &raw));
        }

        let run = |workers: usize| {
            let mut source = VecSource(docs.clone().into_iter());
            let mut sink = VecSink::default();
            let stats =
                run_pipeline(&mut source, &mut sink, &PipelinePolicy::default(), workers).unwrap();
            (stats, sink.records)
        };
        let (stats1, records1) = run(1);
        let (stats8, records8) = run(8);

        assert_eq!(stats1.read, 120);
        assert_eq!(stats1.read, stats1.written + stats1.dropped_total());
        assert_eq!(stats8.read, stats8.written + stats8.dropped_total());
        assert_eq!(stats1.written, stats8.written);
        assert_eq!(stats1.dropped, stats8.dropped);
        assert_eq!(records1, records8, "worker count changed the output");
        for r in &records1 {
            assert!(!r.text.contains("<script"));
            assert!(!r.text.contains("<style"));
        }
    }

    #[test]
    fn fs_source_reads_sorted_relative_ids() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("z.txt"), "zz").unwrap();
        std::fs::write(dir.path().join("sub/a.txt"), "aa").unwrap();
        let mut source = FsSource::new(dir.path()).unwrap();
        let first = source.next_document().unwrap().unwrap();
        let second = source.next_document().unwrap().unwrap();
        assert!(source.next_document().unwrap().is_none());
        assert_eq!(first.id, "sub/a.txt");
        assert_eq!(second.id, "z.txt");
    }

    #[test]
    fn shard_sink_rolls_at_byte_cap() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = JsonlShardSink::new(dir.path(), 120).unwrap();
        for i in 0..6 {
            let record = ShardRecord {
                id: format!("d{i}"),
                source: "s".into(),
                text: "x".repeat(40),
                token_estimate: 1,
            };
            sink.write_record(&record).unwrap();
        }
        sink.finish().unwrap();
        assert!(sink.shard_paths().len() > 1, "expected roll-over");
        // every shard parses back and lines arrive in write order
        let mut ids = Vec::new();
        for path in sink.shard_paths() {
            for record in read_shard_records(path).unwrap() {
                ids.push(record.id);
            }
        }
        assert_eq!(ids, (0..6).map(|i| format!("d{i}")).collect::<Vec<_>>());
    }

    #[test]
    fn failing_source_aborts_and_cleans_sink() {
        struct FailingSource(u32);
        impl DocumentSource for FailingSource {
            fn next_document(&mut self) -> std::io::Result<Option<RawDocument>> {
                self.0 += 1;
                if self.0 > 3 {
                    Err(std::io::Error::other("backing store vanished"))
                } else {
                    Ok(Some(RawDocument {
                        id: format!("d{}", self.0),
                        source: "s".into(),
                        raw: b"some acceptable text".to_vec(),
                    }))
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        for workers in [1, 4] {
            let mut source = FailingSource(0);
            let mut sink = JsonlShardSink::new(dir.path().join(workers.to_string()), 64).unwrap();
            let err =
                run_pipeline(&mut source, &mut sink, &PipelinePolicy::default(), workers)
                    .unwrap_err();
            assert!(matches!(err, CorpusError::Io(_)));
            assert!(sink.shard_paths().is_empty(), "partial shards left behind");
        }
    }
}
