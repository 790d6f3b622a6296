//! Positional-embedding tables and knowledge-preserving stretching.
//!
//! Stretching keeps the first `theta + 1` positions (`0..=theta`) verbatim and
//! fills every later position with a linear blend of two neighbouring original
//! entries, growing the table from `L` to `theta + lambda * (L - theta)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default preserved-prefix threshold.
pub const DEFAULT_THETA: usize = 20;
/// Default stretch ratio.
pub const DEFAULT_LAMBDA: usize = 4;

/// How a stretched position `p > theta` maps back onto the original table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StretchMode {
    /// `m(p) = p / lambda`, exactly as the interpolation rule is usually
    /// written. Sources for small `p` fall back inside the preserved prefix.
    Literal,
    /// `m(p) = theta + (p - theta) / lambda`: the inverse of the length
    /// formula, interpolating only across the original tail.
    #[default]
    OffsetMapped,
}

impl fmt::Display for StretchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StretchMode::Literal => "literal",
            StretchMode::OffsetMapped => "offset-mapped",
        })
    }
}

impl FromStr for StretchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(StretchMode::Literal),
            "offset-mapped" | "offset" => Ok(StretchMode::OffsetMapped),
            other => Err(Error::Param(format!("unknown stretch mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PETable {
    entries: Tensor,
    theta: usize,
    lambda: usize,
}

/// Interpolation source for one stretched position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceIndex {
    pub mapped: f64,
    pub lo: usize,
    pub hi: usize,
    pub omega: f64,
}

impl PETable {
    /// Wraps an unstretched `length x dim` table.
    pub fn new(entries: Tensor, theta: usize) -> Result<Self> {
        if theta >= entries.rows() {
            return Err(Error::Param(format!(
                "theta {theta} must be below table length {}",
                entries.rows()
            )));
        }
        Ok(Self {
            entries,
            theta,
            lambda: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.entries.cols()
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn entries(&self) -> &Tensor {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Tensor {
        &mut self.entries
    }

    pub(crate) fn set_lambda(&mut self, lambda: usize) {
        self.lambda = lambda;
    }

    pub fn entry(&self, p: usize) -> &[f64] {
        self.entries.row(p)
    }
}

/// Stretched length `theta + lambda * (len - theta)`.
pub fn stretched_len(len: usize, theta: usize, lambda: usize) -> usize {
    theta + lambda * (len - theta)
}

/// Source position for stretched index `p > theta` of a table of original length `len`.
pub fn source_index(
    p: usize,
    len: usize,
    theta: usize,
    lambda: usize,
    mode: StretchMode,
) -> SourceIndex {
    let mapped = match mode {
        StretchMode::Literal => p as f64 / lambda as f64,
        StretchMode::OffsetMapped => theta as f64 + (p - theta) as f64 / lambda as f64,
    };
    let last = len - 1;
    let lo = (mapped.floor() as usize).min(last);
    // The final lambda-1 positions map past the last original entry; they
    // collapse onto it.
    let hi = (mapped.ceil() as usize).min(last);
    let omega = if hi == lo { 0.0 } else { mapped - lo as f64 };
    SourceIndex {
        mapped,
        lo,
        hi,
        omega,
    }
}

pub fn kps_stretch(
    pe: &PETable,
    theta: usize,
    lambda: usize,
    mode: StretchMode,
) -> Result<PETable> {
    let len = pe.len();
    if theta >= len {
        return Err(Error::Param(format!(
            "theta {theta} must be below table length {len}"
        )));
    }
    if lambda < 1 {
        return Err(Error::Param("stretch ratio must be >= 1".into()));
    }
    let out_len = stretched_len(len, theta, lambda);
    let dim = pe.dim();
    let mut data = Vec::with_capacity(out_len * dim);
    for p in 0..out_len {
        if p <= theta {
            data.extend_from_slice(pe.entry(p));
            continue;
        }
        let src = source_index(p, len, theta, lambda, mode);
        let (a, b) = (pe.entry(src.lo), pe.entry(src.hi));
        data.extend(
            a.iter()
                .zip(b)
                .map(|(x, y)| (1.0 - src.omega) * x + src.omega * y),
        );
    }
    Ok(PETable {
        entries: Tensor::from_vec(out_len, dim, data)?,
        theta,
        lambda: pe.lambda * lambda,
    })
}
