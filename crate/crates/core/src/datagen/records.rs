//! Dataset file: one newline-terminated record per line, tab-separated
//! `name=value` fields in this fixed order:
//!
//! | # | field       | value                                                  |
//! |---|-------------|--------------------------------------------------------|
//! | 0 | (tag)       | literal `dgrec1` (schema version)                      |
//! | 1 | `id`        | record id, no tabs                                     |
//! | 2 | `split`     | `train` or `test`                                      |
//! | 3 | `h`         | grid height                                            |
//! | 4 | `w`         | grid width                                             |
//! | 5 | `grid`      | `h*w` comma-separated cell codes, row-major            |
//! | 6 | `gt`        | `r0,c0,r1,c1` half-open localization box               |
//! | 7 | `long`      | comma-separated token ids                              |
//! | 8 | `short`     | comma-separated token ids                              |
//! | 9 | `bg`        | background index                                       |
//! |10 | `objects`   | `;`-separated `cat:attr:r0:c0:r1:c1:count`             |
//! |11 | `relations` | `;`-separated `subject:kind:object[:object]` (kind id) |
//!
//! Reading is streaming: [`RecordReader`] holds one line at a time.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{BBox, CellCode, Grid};
use crate::model::TokenId;

use super::scene::{Relation, RelationKind, Scene, SceneObject};

pub const RECORD_VERSION: &str = "dgrec1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneRecord {
    pub id: String,
    pub split: Split,
    pub scene: Scene,
    pub long_tokens: Vec<TokenId>,
    pub short_tokens: Vec<TokenId>,
    pub gt_region: BBox,
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>, sep: &str) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

pub fn format_record(r: &SceneRecord) -> String {
    let g = &r.scene.grid;
    let b = r.gt_region;
    let mut line = String::new();
    let _ = write!(
        line,
        "{RECORD_VERSION}\tid={}\tsplit={}\th={}\tw={}\tgrid={}\tgt={},{},{},{}\tlong={}\tshort={}\tbg={}\tobjects=",
        r.id,
        r.split.as_str(),
        g.height(),
        g.width(),
        join(g.cells(), ","),
        b.r0,
        b.c0,
        b.r1,
        b.c1,
        join(&r.long_tokens, ","),
        join(&r.short_tokens, ","),
        r.scene.background,
    );
    line.push_str(&join(
        r.scene.objects.iter().map(|o| {
            format!(
                "{}:{}:{}:{}:{}:{}:{}",
                o.category, o.attribute, o.bbox.r0, o.bbox.c0, o.bbox.r1, o.bbox.c1, o.count
            )
        }),
        ";",
    ));
    line.push_str("\trelations=");
    line.push_str(&join(
        r.scene.relations.iter().map(|rel| {
            let mut s = format!("{}:{}", rel.subject, rel.kind.id());
            for o in &rel.objects {
                let _ = write!(s, ":{o}");
            }
            s
        }),
        ";",
    ));
    line
}

struct LineParser<'a> {
    line_no: usize,
    fields: std::str::Split<'a, char>,
}

impl<'a> LineParser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn field(&mut self, name: &str) -> Result<&'a str> {
        let f = self
            .fields
            .next()
            .ok_or_else(|| self.err(format!("missing field {name:?}")))?;
        match f.split_once('=') {
            Some((k, v)) if k == name => Ok(v),
            _ => Err(self.err(format!("expected field {name:?}, found {f:?}"))),
        }
    }

    fn num<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("bad {what} value {s:?}")))
    }

    fn num_field<T: std::str::FromStr>(&mut self, name: &str) -> Result<T> {
        let v = self.field(name)?;
        self.num(v, name)
    }

    fn list_field<T: std::str::FromStr>(&mut self, name: &str) -> Result<Vec<T>> {
        let v = self.field(name)?;
        self.list(v, ',', name)
    }

    fn list<T: std::str::FromStr>(&self, s: &str, sep: char, what: &str) -> Result<Vec<T>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(sep).map(|x| self.num(x, what)).collect()
    }
}

pub fn parse_record(line: &str, line_no: usize) -> Result<SceneRecord> {
    let mut p = LineParser {
        line_no,
        fields: line.split('\t'),
    };
    let tag = p.fields.next().unwrap_or("");
    if tag != RECORD_VERSION {
        return Err(Error::Version {
            found: tag.to_string(),
            expected: RECORD_VERSION,
        });
    }
    let id = p.field("id")?.to_string();
    let split = match p.field("split")? {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(p.err(format!("unknown split {other:?}"))),
    };
    let h: usize = p.num_field("h")?;
    let w: usize = p.num_field("w")?;
    let cells: Vec<CellCode> = p.list_field("grid")?;
    let grid = Grid::new(h, w, cells).map_err(|e| p.err(e.to_string()))?;
    let gt: Vec<usize> = p.list_field("gt")?;
    let [r0, c0, r1, c1] = gt[..] else {
        return Err(p.err("gt needs four values"));
    };
    let gt_region = BBox::new(r0, c0, r1, c1);
    if !gt_region.fits(h, w) {
        return Err(p.err("gt box outside grid"));
    }
    let long_tokens = p.list_field("long")?;
    let short_tokens = p.list_field("short")?;
    let background = p.num_field("bg")?;

    let mut objects = Vec::new();
    let obj_field = p.field("objects")?;
    for o in obj_field.split(';').filter(|s| !s.is_empty()) {
        let v: Vec<usize> = p.list(o, ':', "object")?;
        let [category, attribute, r0, c0, r1, c1, count] = v[..] else {
            return Err(p.err(format!("object needs seven values, got {o:?}")));
        };
        objects.push(SceneObject {
            category,
            attribute,
            bbox: BBox::new(r0, c0, r1, c1),
            count,
        });
    }
    let mut relations = Vec::new();
    let rel_field = p.field("relations")?;
    for r in rel_field.split(';').filter(|s| !s.is_empty()) {
        let v: Vec<usize> = p.list(r, ':', "relation")?;
        if v.len() < 3 {
            return Err(p.err(format!("relation too short: {r:?}")));
        }
        let kind = u8::try_from(v[1])
            .ok()
            .and_then(RelationKind::from_id)
            .ok_or_else(|| p.err(format!("unknown relation kind {}", v[1])))?;
        let rel = Relation {
            subject: v[0],
            kind,
            objects: v[2..].to_vec(),
        };
        if rel.subject >= objects.len() || rel.objects.iter().any(|&o| o >= objects.len()) {
            return Err(p.err(format!("relation {r:?} references a missing object")));
        }
        relations.push(rel);
    }
    if let Some(extra) = p.fields.next() {
        return Err(p.err(format!("unexpected trailing field {extra:?}")));
    }
    Ok(SceneRecord {
        id,
        split,
        scene: Scene {
            grid,
            background,
            objects,
            relations,
        },
        long_tokens,
        short_tokens,
        gt_region,
    })
}

/// Single appender for a dataset file.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl RecordWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            out: BufWriter::new(f),
        })
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, r: &SceneRecord) -> std::io::Result<()> {
        self.out.write_all(format_record(r).as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader yielding one record per line.
pub struct RecordReader<R: BufRead> {
    input: R,
    line_no: usize,
    buf: String,
}

impl RecordReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(f)))
    }
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<SceneRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        self.line_no += 1;
        match self.input.read_line(&mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                let Some(line) = self.buf.strip_suffix('\n') else {
                    return Some(Err(Error::Parse {
                        line: self.line_no,
                        msg: "truncated record (no line terminator)".into(),
                    }));
                };
                Some(parse_record(line, self.line_no))
            }
            Err(e) => Some(Err(Error::Parse {
                line: self.line_no,
                msg: e.to_string(),
            })),
        }
    }
}

pub fn write_records<'a>(
    records: impl IntoIterator<Item = &'a SceneRecord>,
    path: &Path,
) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r).map_err(|e| Error::io(path, e))?;
    }
    w.finish().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SceneRecord>> {
    RecordReader::open(path)?.collect()
}
