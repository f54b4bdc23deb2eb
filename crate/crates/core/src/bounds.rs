use crate::error::{Error, Result};

/// Global lower clamp on any transmission coefficient.
pub const MU_MIN: f64 = 0.1;
/// Global upper clamp on any transmission coefficient.
pub const MU_MAX: f64 = 0.9;

/// Per-region search interval for the transmission coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl BoundsTable {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if lb.len() != ub.len() || lb.is_empty() {
            return Err(Error::validation(format!(
                "bounds need one lb and one ub per region (got {} and {})",
                lb.len(),
                ub.len()
            )));
        }
        for (s, (&l, &u)) in lb.iter().zip(&ub).enumerate() {
            if !(MU_MIN..=MU_MAX).contains(&l) || !(MU_MIN..=MU_MAX).contains(&u) {
                return Err(Error::validation(format!(
                    "bounds of region {} must lie within [{MU_MIN}, {MU_MAX}] (got [{l}, {u}])",
                    s + 1
                )));
            }
            if l > u {
                return Err(Error::validation(format!(
                    "lower bound exceeds upper bound for region {} ({l} > {u})",
                    s + 1
                )));
            }
        }
        Ok(Self { lb, ub })
    }

    pub fn uniform(num_regions: usize, lb: f64, ub: f64) -> Result<Self> {
        Self::new(vec![lb; num_regions], vec![ub; num_regions])
    }

    pub fn num_regions(&self) -> usize {
        self.lb.len()
    }

    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    pub fn ub(&self) -> &[f64] {
        &self.ub
    }

    pub fn get(&self, region: usize) -> (f64, f64) {
        (self.lb[region], self.ub[region])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub(crate) fn set(&mut self, region: usize, lb: f64, ub: f64) {
        debug_assert!((MU_MIN..=MU_MAX).contains(&lb) && lb <= ub && ub <= MU_MAX);
        self.lb[region] = lb;
        self.ub[region] = ub;
    }
}
