use serde::{Deserialize, Serialize};

use super::UtilityError;

/// Tolerance on the total weight of a distribution.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Atoms whose times differ by less than this are treated as the same time
/// when a distribution is assembled from loose atoms.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// A finite discrete distribution over non-negative times in minutes.
///
/// Used for process-duration beliefs, deadline uncertainty and travel times.
/// Atoms are kept sorted by time with distinct times and strictly positive
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct TimeDistribution {
    support: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    support: Vec<(f64, f64)>,
}

impl TryFrom<RawDistribution> for TimeDistribution {
    type Error = UtilityError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        TimeDistribution::new(raw.support)
    }
}

impl From<TimeDistribution> for RawDistribution {
    fn from(dist: TimeDistribution) -> Self {
        RawDistribution {
            support: dist.support,
        }
    }
}

impl TimeDistribution {
    /// Builds a distribution from `(time, weight)` atoms that must already be
    /// sorted by strictly increasing time.
    pub fn new(support: Vec<(f64, f64)>) -> Result<Self, UtilityError> {
        if support.is_empty() {
            return Err(UtilityError::InvalidDistribution(
                "support is empty".to_string(),
            ));
        }
        let mut total = 0.0;
        let mut previous: Option<f64> = None;
        for &(time, weight) in &support {
            if !time.is_finite() || time < 0.0 {
                return Err(UtilityError::InvalidDistribution(format!(
                    "time {time} is not a non-negative finite number"
                )));
            }
            if !weight.is_finite() || weight <= 0.0 {
                return Err(UtilityError::InvalidDistribution(format!(
                    "weight {weight} at time {time} is not positive"
                )));
            }
            if let Some(prev) = previous {
                if time <= prev {
                    return Err(UtilityError::InvalidDistribution(format!(
                        "times must be distinct and ascending ({prev} then {time})"
                    )));
                }
            }
            previous = Some(time);
            total += weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(UtilityError::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(TimeDistribution { support })
    }

    /// Builds a distribution from unordered atoms, merging atoms whose times
    /// coincide within [`MERGE_TOLERANCE`]. Zero-weight atoms are dropped.
    pub fn from_atoms(
        atoms: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self, UtilityError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|&(_, w)| w != 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (time, weight) in atoms {
            match merged.last_mut() {
                Some(last) if (time - last.0).abs() < MERGE_TOLERANCE => last.1 += weight,
                _ => merged.push((time, weight)),
            }
        }
        TimeDistribution::new(merged)
    }

    pub fn point_mass(time: f64) -> Result<Self, UtilityError> {
        TimeDistribution::new(vec![(time, 1.0)])
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.support.iter().map(|&(_, w)| w).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(t, w)| t * w).sum()
    }

    /// Shifts every atom by `offset` minutes.
    pub fn shifted(&self, offset: f64) -> Result<Self, UtilityError> {
        TimeDistribution::new(self.support.iter().map(|&(t, w)| (t + offset, w)).collect())
    }

    /// Probability-weighted sum of `f` over the atoms.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.support.iter().map(|&(t, w)| w * f(t)).sum()
    }

    /// Like [`expect`](Self::expect) for fallible per-atom values.
    pub fn try_expect<E, F>(&self, mut f: F) -> Result<f64, E>
    where
        F: FnMut(f64) -> Result<f64, E>,
    {
        let mut acc = 0.0;
        for &(t, w) in &self.support {
            acc += w * f(t)?;
        }
        Ok(acc)
    }
}
