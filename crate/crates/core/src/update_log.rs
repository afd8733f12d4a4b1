//! Per-batch parameter deltas recorded during SGD.
//!
//! The record index (epoch, batch, sample indices, consumed flag) is always
//! held in memory. Deltas are either kept in memory, for small models and
//! tests, or streamed to an append-only file and read back on demand: at the
//! default MNIST scale a full log is several gigabytes.
//!
//! File layout after the common header (see [`crate::format`]), per record:
//!
//! ```text
//! epoch u32, batch u32, index count u32, indices u32 × count, delta f32 × |θ|
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::format::{encode_header, f32s_to_le, read_full, read_header};
use crate::nn::Architecture;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateRecord {
    pub epoch: u32,
    pub batch: u32,
    pub sample_indices: Vec<u32>,
    pub consumed: bool,
    /// Slot in a memory store, or byte offset of the delta in a file store.
    delta_pos: u64,
}

#[derive(Debug)]
enum DeltaStore {
    Memory(Vec<Vec<f32>>),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct UpdateLog {
    arch: Architecture,
    records: Vec<UpdateRecord>,
    store: Arc<DeltaStore>,
}

impl UpdateLog {
    pub fn empty(arch: &Architecture) -> Self {
        Self {
            arch: arch.clone(),
            records: Vec::new(),
            store: Arc::new(DeltaStore::Memory(Vec::new())),
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    pub fn records(&self) -> &[UpdateRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_file_backed(&self) -> bool {
        matches!(*self.store, DeltaStore::File(_))
    }

    pub(crate) fn mark_consumed(&mut self, record: usize) {
        self.records[record].consumed = true;
    }

    /// Delta of a single record.
    pub fn delta(&self, record: usize) -> Result<Vec<f32>> {
        let mut out = None;
        self.visit_deltas(&[record], |_, d| {
            out = Some(d.to_vec());
            Ok(())
        })?;
        Ok(out.expect("visited"))
    }

    /// Calls `f(record_index, delta)` for each listed record, in the given
    /// order. File-backed logs read sequentially with one open handle, so
    /// the list should be ascending.
    pub fn visit_deltas<F>(&self, records: &[usize], mut f: F) -> Result<()>
    where
        F: FnMut(usize, &[f32]) -> Result<()>,
    {
        match &*self.store {
            DeltaStore::Memory(deltas) => {
                for &r in records {
                    f(r, &deltas[self.records[r].delta_pos as usize])?;
                }
            }
            DeltaStore::File(path) => {
                let disp = path.display().to_string();
                let file = File::open(path).map_err(|e| Error::io(&disp, e))?;
                let mut reader = BufReader::with_capacity(1 << 20, file);
                let n = self.param_count();
                let mut raw = vec![0u8; n * 4];
                let mut delta = vec![0.0f32; n];
                let mut pos = 0u64;
                for &r in records {
                    let target = self.records[r].delta_pos;
                    if target >= pos {
                        reader
                            .seek_relative((target - pos) as i64)
                            .map_err(|e| Error::io(&disp, e))?;
                    } else {
                        reader
                            .seek(SeekFrom::Start(target))
                            .map_err(|e| Error::io(&disp, e))?;
                    }
                    read_full(&mut reader, &mut raw, "update log delta")?;
                    pos = target + raw.len() as u64;
                    for (d, b) in delta.iter_mut().zip(raw.chunks_exact(4)) {
                        *d = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                    }
                    f(r, &delta)?;
                }
            }
        }
        Ok(())
    }

    /// Elementwise sum of every recorded delta (consumed or not), in `f64`.
    pub fn sum_deltas(&self) -> Result<Vec<f64>> {
        let mut acc = vec![0.0f64; self.param_count()];
        let all: Vec<usize> = (0..self.records.len()).collect();
        self.visit_deltas(&all, |_, d| {
            for (a, &v) in acc.iter_mut().zip(d) {
                *a += v as f64;
            }
            Ok(())
        })?;
        Ok(acc)
    }

    /// Copy of the log without consumed records. Deltas stay shared.
    pub fn pruned(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            records: self
                .records
                .iter()
                .filter(|r| !r.consumed)
                .cloned()
                .collect(),
            store: Arc::clone(&self.store),
        }
    }

    /// Streams the non-consumed records to a log file.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut writer = UpdateLogWriter::create(&self.arch, path)?;
        let live: Vec<usize> = (0..self.records.len())
            .filter(|&i| !self.records[i].consumed)
            .collect();
        self.visit_deltas(&live, |i, d| {
            let r = &self.records[i];
            writer.append(r.epoch, r.batch, &r.sample_indices, d)
        })?;
        writer.finish()?;
        Ok(())
    }

    /// Indexes a log file without loading its deltas.
    pub fn open(path: &Path) -> Result<Self> {
        let disp = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&disp, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&disp, e))?.len();
        let mut reader = BufReader::new(file);
        let (arch, header_len) = read_header(&mut reader, "update log")?;
        let delta_bytes = arch.param_count() as u64 * 4;
        let mut pos = header_len;
        let mut records: Vec<UpdateRecord> = Vec::new();
        while pos < file_len {
            let mut head = [0u8; 12];
            read_full(&mut reader, &mut head, "update log record")?;
            let epoch = u32::from_le_bytes(head[0..4].try_into().unwrap());
            let batch = u32::from_le_bytes(head[4..8].try_into().unwrap());
            let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
            let mut idx_raw = vec![0u8; count * 4];
            read_full(&mut reader, &mut idx_raw, "update log record")?;
            let sample_indices = idx_raw
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            pos += 12 + idx_raw.len() as u64;
            if pos + delta_bytes > file_len {
                return Err(Error::Truncated {
                    what: "update log delta",
                    needed: delta_bytes as usize,
                    found: (file_len - pos) as usize,
                });
            }
            if let Some(last) = records.last() {
                if (epoch, batch) <= (last.epoch, last.batch) {
                    return Err(Error::LogMismatch(format!(
                        "record ({epoch}, {batch}) out of order"
                    )));
                }
            }
            records.push(UpdateRecord {
                epoch,
                batch,
                sample_indices,
                consumed: false,
                delta_pos: pos,
            });
            reader
                .seek_relative(delta_bytes as i64)
                .map_err(|e| Error::io(&disp, e))?;
            pos += delta_bytes;
        }
        Ok(Self {
            arch,
            records,
            store: Arc::new(DeltaStore::File(path.to_path_buf())),
        })
    }

    /// Loads every delta into memory. Intended for small models.
    pub fn read_all(path: &Path) -> Result<Self> {
        let indexed = Self::open(path)?;
        let mut deltas = Vec::with_capacity(indexed.len());
        let all: Vec<usize> = (0..indexed.len()).collect();
        indexed.visit_deltas(&all, |_, d| {
            deltas.push(d.to_vec());
            Ok(())
        })?;
        let records = indexed
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| UpdateRecord {
                delta_pos: i as u64,
                ..r.clone()
            })
            .collect();
        Ok(Self {
            arch: indexed.arch,
            records,
            store: Arc::new(DeltaStore::Memory(deltas)),
        })
    }
}

enum Sink {
    Memory(Vec<Vec<f32>>),
    File {
        path: PathBuf,
        writer: BufWriter<File>,
        pos: u64,
    },
}

/// Append-only builder for an [`UpdateLog`].
pub struct UpdateLogWriter {
    arch: Architecture,
    records: Vec<UpdateRecord>,
    sink: Sink,
    scratch: Vec<u8>,
}

impl UpdateLogWriter {
    pub fn in_memory(arch: &Architecture) -> Self {
        Self {
            arch: arch.clone(),
            records: Vec::new(),
            sink: Sink::Memory(Vec::new()),
            scratch: Vec::new(),
        }
    }

    pub fn create(arch: &Architecture, path: &Path) -> Result<Self> {
        let disp = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&disp, e))?;
        let mut writer = BufWriter::with_capacity(1 << 20, file);
        let mut header = Vec::new();
        encode_header(arch, &mut header);
        writer.write_all(&header).map_err(|e| Error::io(&disp, e))?;
        Ok(Self {
            arch: arch.clone(),
            records: Vec::new(),
            sink: Sink::File {
                path: path.to_path_buf(),
                writer,
                pos: header.len() as u64,
            },
            scratch: Vec::new(),
        })
    }

    pub fn append(&mut self, epoch: u32, batch: u32, indices: &[u32], delta: &[f32]) -> Result<()> {
        if delta.len() != self.arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.param_count(),
                actual: delta.len(),
            });
        }
        let delta_pos = match &mut self.sink {
            Sink::Memory(deltas) => {
                deltas.push(delta.to_vec());
                (deltas.len() - 1) as u64
            }
            Sink::File { path, writer, pos } => {
                let buf = &mut self.scratch;
                buf.clear();
                buf.extend_from_slice(&epoch.to_le_bytes());
                buf.extend_from_slice(&batch.to_le_bytes());
                buf.extend_from_slice(&(indices.len() as u32).to_le_bytes());
                for i in indices {
                    buf.extend_from_slice(&i.to_le_bytes());
                }
                let delta_pos = *pos + buf.len() as u64;
                f32s_to_le(delta, buf);
                writer
                    .write_all(buf)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                *pos += buf.len() as u64;
                delta_pos
            }
        };
        self.records.push(UpdateRecord {
            epoch,
            batch,
            sample_indices: indices.to_vec(),
            consumed: false,
            delta_pos,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<UpdateLog> {
        let store = match self.sink {
            Sink::Memory(deltas) => DeltaStore::Memory(deltas),
            Sink::File { path, writer, .. } => {
                let disp = path.display().to_string();
                let file = writer
                    .into_inner()
                    .map_err(|e| Error::io(&disp, e.into_error()))?;
                file.sync_all().map_err(|e| Error::io(&disp, e))?;
                DeltaStore::File(path)
            }
        };
        Ok(UpdateLog {
            arch: self.arch,
            records: self.records,
            store: Arc::new(store),
        })
    }
}
