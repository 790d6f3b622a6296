//! Checkpoint file.
//!
//! Layout:
//!
//! ```text
//! DGRAIN1 token_table=256x32 pe=248x32 wq=32x32 ... log_tau=1x1\n
//! <f64 little-endian values of every tensor, row-major, in header order>
//! ```
//!
//! The header is one ASCII line of space-separated `name=ROWSxCOLS` fields
//! after the magic word. The body holds exactly `sum(rows * cols) * 8` bytes;
//! trailing bytes are rejected.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &str = "DGRAIN1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn header(&self) -> String {
        let mut h = String::from(CHECKPOINT_MAGIC);
        for (name, t) in &self.tensors {
            h.push_str(&format!(" {name}={}x{}", t.rows(), t.cols()));
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        out.push(b'\n');
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let shapes = parse_header(header.trim_end_matches('\n'))?;
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut buf = [0u8; 8];
        for (name, rows, cols) in shapes {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                r.read_exact(&mut buf).map_err(|_| Error::Parse {
                    line: 2,
                    msg: format!("truncated body while reading {name}"),
                })?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push((name, Tensor::from_vec(rows, cols, data)?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| Error::Parse {
            line: 2,
            msg: e.to_string(),
        })?;
        if !rest.is_empty() {
            return Err(Error::Parse {
                line: 2,
                msg: format!("{} trailing bytes after last tensor", rest.len()),
            });
        }
        Ok(Self { tensors })
    }

    pub fn read_header(path: &Path) -> Result<String> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut line = String::new();
        BufReader::new(f)
            .read_line(&mut line)
            .map_err(|e| Error::io(path, e))?;
        parse_header(line.trim_end())?;
        Ok(line.trim_end().to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Result<Vec<(String, usize, usize)>> {
    let mut fields = line.split(' ');
    match fields.next() {
        Some(CHECKPOINT_MAGIC) => {}
        other => {
            return Err(Error::Version {
                found: other.unwrap_or("").to_string(),
                expected: CHECKPOINT_MAGIC,
            })
        }
    }
    let bad = |f: &str| Error::Parse {
        line: 1,
        msg: format!("malformed tensor field {f:?}"),
    };
    fields
        .map(|f| {
            let (name, shape) = f.split_once('=').ok_or_else(|| bad(f))?;
            let (r, c) = shape.split_once('x').ok_or_else(|| bad(f))?;
            let rows = r.parse().map_err(|_| bad(f))?;
            let cols = c.parse().map_err(|_| bad(f))?;
            if name.is_empty() {
                return Err(bad(f));
            }
            Ok((name.to_string(), rows, cols))
        })
        .collect()
}
