use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::PhotonCounts;
use crate::error::{Error, Result};
use crate::spin::BlochVector;

/// Input state of the tomography protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Prep {
    #[serde(rename = "+Z")]
    PlusZ,
    X,
    Y,
    #[serde(rename = "-Z")]
    MinusZ,
}

impl Prep {
    pub const ALL: [Prep; 4] = [Prep::PlusZ, Prep::X, Prep::Y, Prep::MinusZ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bloch(self) -> BlochVector {
        match self {
            Prep::PlusZ => BlochVector::PLUS_Z,
            Prep::X => BlochVector::PLUS_X,
            Prep::Y => BlochVector::PLUS_Y,
            Prep::MinusZ => BlochVector::MINUS_Z,
        }
    }
}

impl fmt::Display for Prep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prep::PlusZ => "+Z",
            Prep::X => "X",
            Prep::Y => "Y",
            Prep::MinusZ => "-Z",
        })
    }
}

/// Spin component measured in the excited state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasAxis {
    X,
    Y,
    Z,
}

impl MeasAxis {
    pub const ALL: [MeasAxis; 3] = [MeasAxis::X, MeasAxis::Y, MeasAxis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    /// ⟨σ⟩ = sign · (2 p0 − 1). The X and Y readout pulses, π/2(Y) and
    /// π/2(−X), both carry the positive axis to −Z.
    pub fn readout_sign(self) -> f64 {
        match self {
            MeasAxis::X | MeasAxis::Y => -1.0,
            MeasAxis::Z => 1.0,
        }
    }
}

impl fmt::Display for MeasAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptEntry {
    pub prep: Prep,
    pub axis: MeasAxis,
    pub expectation: f64,
    pub counts_signal: u64,
    pub counts_ref_hi: u64,
    pub counts_ref_lo: u64,
}

impl QptEntry {
    pub fn from_counts(prep: Prep, axis: MeasAxis, counts: PhotonCounts) -> Self {
        Self {
            prep,
            axis,
            expectation: axis.readout_sign() * (2.0 * counts.normalized_p0() - 1.0),
            counts_signal: counts.signal,
            counts_ref_hi: counts.ref_hi,
            counts_ref_lo: counts.ref_lo,
        }
    }

    pub fn counts(&self) -> PhotonCounts {
        PhotonCounts {
            signal: self.counts_signal,
            ref_hi: self.counts_ref_hi,
            ref_lo: self.counts_ref_lo,
        }
    }

    /// Shot-noise σ of the expectation; `None` without counts.
    pub fn sigma(&self) -> Option<f64> {
        let c = self.counts();
        if c.is_empty() || c.ref_hi <= c.ref_lo {
            None
        } else {
            Some(2.0 * c.p0_sigma())
        }
    }
}

/// Twelve expectation values (4 preparations × 3 axes) at one readout delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptDataset {
    pub t_es_ns: f64,
    pub entries: Vec<QptEntry>,
}

/// Slack on |expectation| ≤ 1 for normalization noise (p0 margin of ±0.2);
/// widened to five shot-noise σ for low-count entries.
pub const EXPECTATION_SLACK: f64 = 0.4;

impl QptDataset {
    pub fn new(t_es_ns: f64, entries: Vec<QptEntry>) -> Result<Self> {
        let d = Self { t_es_ns, entries };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_es_ns.is_finite() {
            return Err(Error::InvalidDataset("t_es_ns must be finite".into()));
        }
        if self.entries.len() != 12 {
            return Err(Error::InvalidDataset(format!(
                "expected 12 entries, found {}",
                self.entries.len()
            )));
        }
        let mut seen = [[false; 3]; 4];
        for e in &self.entries {
            let cell = &mut seen[e.prep.index()][e.axis.index()];
            if *cell {
                return Err(Error::InvalidDataset(format!("duplicate entry ({}, {})", e.prep, e.axis)));
            }
            *cell = true;
            let slack = EXPECTATION_SLACK.max(5.0 * e.sigma().unwrap_or(0.0));
            if !(e.expectation.abs() <= 1.0 + slack) {
                return Err(Error::InvalidDataset(format!(
                    "expectation {} for ({}, {}) is outside [-1, 1]",
                    e.expectation, e.prep, e.axis
                )));
            }
            let c = e.counts();
            if !c.is_empty() {
                if c.ref_hi <= c.ref_lo {
                    return Err(Error::InvalidDataset(format!(
                        "({}, {}): bright reference must exceed dark reference",
                        e.prep, e.axis
                    )));
                }
                let from_counts = e.axis.readout_sign() * (2.0 * c.normalized_p0() - 1.0);
                let tol = 4.0 / (c.ref_hi - c.ref_lo) as f64 + 1e-9;
                if (from_counts - e.expectation).abs() > tol {
                    return Err(Error::InvalidDataset(format!(
                        "({}, {}): expectation {} disagrees with counts ({from_counts})",
                        e.prep, e.axis, e.expectation
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, prep: Prep, axis: MeasAxis) -> &QptEntry {
        self.entries
            .iter()
            .find(|e| e.prep == prep && e.axis == axis)
            .expect("validated dataset has every cell")
    }

    /// Measured output Bloch vectors indexed by [`Prep::index`].
    pub fn outputs(&self) -> [[f64; 3]; 4] {
        let mut out = [[0.0; 3]; 4];
        for e in &self.entries {
            out[e.prep.index()][e.axis.index()] = e.expectation;
        }
        out
    }

    /// Per-cell σ of the expectation, `None` where no counts were recorded.
    pub fn sigmas(&self) -> [[Option<f64>; 3]; 4] {
        let mut out = [[None; 3]; 4];
        for e in &self.entries {
            out[e.prep.index()][e.axis.index()] = e.sigma();
        }
        out
    }

    pub fn has_counts(&self) -> bool {
        self.entries.iter().all(|e| !e.counts().is_empty())
    }

    /// Same dataset with the expectations recomputed from the counts.
    pub fn with_counts<F>(&self, mut counts: F) -> Result<Self>
    where
        F: FnMut(&QptEntry) -> PhotonCounts,
    {
        let entries = self
            .entries
            .iter()
            .map(|e| QptEntry::from_counts(e.prep, e.axis, counts(e)))
            .collect();
        Self::new(self.t_es_ns, entries)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(s)?;
        d.validate()?;
        Ok(d)
    }
}
