//! Correlator tallies and the two CHSH polynomials.
//!
//! `C₁ = <A2 B0> + <A2 B1> + <A3 B0> − <A3 B1>` and
//! `C₂ = <A0 B2> + <A1 B2> + <A0 B3> − <A1 B3>`, where each correlator is
//! `Pr(equal) − Pr(unequal)` over the check records with that input pair.

use serde::{Deserialize, Serialize};

use crate::boxes::{BoxInput, BoxOutcome, Side};
use crate::error::{QpcError, Result};

/// Both halves of one checked pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckRecord {
    pub pair: usize,
    pub announcer: Side,
    pub input_a: BoxInput,
    pub outcome_a: BoxOutcome,
    pub input_b: BoxInput,
    pub outcome_b: BoxOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellStats {
    pub count: u64,
    pub agreements: u64,
}

impl CellStats {
    pub fn correlator(&self) -> Option<f64> {
        (self.count > 0).then(|| (2.0 * self.agreements as f64 - self.count as f64) / self.count as f64)
    }

    /// `sqrt((1 − ĉ²)/N)`.
    pub fn std_err(&self) -> Option<f64> {
        self.correlator()
            .map(|c| ((1.0 - c * c).max(0.0) / self.count as f64).sqrt())
    }

    pub fn mismatches(&self) -> u64 {
        self.count - self.agreements
    }
}

/// Running per-input-pair tallies, indexed `[k_A][k_B]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub cells: [[CellStats; 4]; 4],
}

const C1_TERMS: [(u8, u8, f64); 4] = [(2, 0, 1.0), (2, 1, 1.0), (3, 0, 1.0), (3, 1, -1.0)];
const C2_TERMS: [(u8, u8, f64); 4] = [(0, 2, 1.0), (1, 2, 1.0), (0, 3, 1.0), (1, 3, -1.0)];

impl CorrelationTable {
    pub fn add(&mut self, record: &CheckRecord) {
        let cell = &mut self.cells[record.input_a.k() as usize][record.input_b.k() as usize];
        cell.count += 1;
        cell.agreements += (record.outcome_a == record.outcome_b) as u64;
    }

    pub fn cell(&self, k_a: u8, k_b: u8) -> CellStats {
        self.cells[k_a as usize][k_b as usize]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.count).sum()
    }

    /// Records and disagreements on the same-input cells `(0,0)` and `(1,1)`.
    pub fn same_input(&self) -> (u64, u64) {
        let cells = [self.cell(0, 0), self.cell(1, 1)];
        (
            cells.iter().map(|c| c.count).sum(),
            cells.iter().map(CellStats::mismatches).sum(),
        )
    }

    fn polynomial(&self, terms: &[(u8, u8, f64); 4]) -> Result<(f64, f64)> {
        let mut value = 0.0;
        let mut variance = 0.0;
        for &(k_a, k_b, sign) in terms {
            let cell = self.cell(k_a, k_b);
            let corr = cell.correlator().ok_or(QpcError::EmptyCell { k_a, k_b })?;
            value += sign * corr;
            variance += cell.std_err().unwrap_or(0.0).powi(2);
        }
        Ok((value, variance.sqrt()))
    }

    pub fn estimate(&self) -> Result<ChshEstimate> {
        let (c1, c1_std_err) = self.polynomial(&C1_TERMS)?;
        let (c2, c2_std_err) = self.polynomial(&C2_TERMS)?;
        Ok(ChshEstimate {
            c1,
            c2,
            c1_std_err,
            c2_std_err,
            cells: self.cells,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChshEstimate {
    pub c1: f64,
    pub c2: f64,
    pub c1_std_err: f64,
    pub c2_std_err: f64,
    pub cells: [[CellStats; 4]; 4],
}

impl ChshEstimate {
    pub fn correlator(&self, k_a: u8, k_b: u8) -> Option<f64> {
        self.cells[k_a as usize][k_b as usize].correlator()
    }

    pub fn passes(&self, c_min: f64) -> bool {
        self.c1 >= c_min && self.c2 >= c_min
    }
}

/// Estimate `C₁` and `C₂` from check records. Every cell the polynomials use
/// must hold at least one record.
pub fn estimate_chsh(records: &[CheckRecord]) -> Result<ChshEstimate> {
    let mut table = CorrelationTable::default();
    for record in records {
        table.add(record);
    }
    table.estimate()
}
