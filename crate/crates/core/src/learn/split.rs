//! Sorted stratification for regression targets.
//!
//! Samples are ordered by target, then each consecutive window of
//! `train + test + validate` samples is dealt out so that every partition
//! receives exactly its share of the window. Leftover samples at the top of
//! the order are each sent to a uniformly chosen partition.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Test,
    Validate,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Test, Partition::Validate];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
            Partition::Validate => "validate",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            "validate" | "validation" | "val" => Ok(Partition::Validate),
            other => Err(Error::Parse(format!("unknown partition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    pub train: u32,
    pub test: u32,
    pub validate: u32,
}

impl SplitRatios {
    pub const EIGHTY_TEN_TEN: SplitRatios = SplitRatios { train: 8, test: 1, validate: 1 };

    pub fn window(&self) -> usize {
        (self.train + self.test + self.validate) as usize
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios::EIGHTY_TEN_TEN
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    /// Parses `a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("ratios `{s}`: {e}")))?;
        match parts.as_slice() {
            &[train, test, validate] if train + test + validate > 0 => {
                Ok(SplitRatios { train, test, validate })
            }
            _ => Err(Error::Parse(format!("ratios `{s}`: expected three integers with a positive sum"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub partition_of: Vec<Partition>,
    pub ratios: SplitRatios,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn indices(&self, part: Partition) -> Vec<usize> {
        self.partition_of
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == part)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn size(&self, part: Partition) -> usize {
        self.partition_of.iter().filter(|p| **p == part).count()
    }

    pub fn labels(&self) -> Vec<&'static str> {
        self.partition_of.iter().map(|p| p.as_str()).collect()
    }
}

pub fn sorted_stratified_split(y: &[f64], ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    let k = ratios.window();
    if k == 0 {
        return Err(Error::Validation("split ratios sum to zero".into()));
    }
    if y.len() < k {
        return Err(Error::InsufficientData(format!(
            "need at least {k} samples for ratios {}/{}/{}, got {}",
            ratios.train,
            ratios.test,
            ratios.validate,
            y.len()
        )));
    }
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN target".into()));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));

    let mut deck = Vec::with_capacity(k);
    deck.extend(std::iter::repeat_n(Partition::Train, ratios.train as usize));
    deck.extend(std::iter::repeat_n(Partition::Test, ratios.test as usize));
    deck.extend(std::iter::repeat_n(Partition::Validate, ratios.validate as usize));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partition_of = vec![Partition::Train; y.len()];
    let mut windows = order.chunks_exact(k);
    for window in &mut windows {
        deck.shuffle(&mut rng);
        for (&idx, &part) in window.iter().zip(&deck) {
            partition_of[idx] = part;
        }
    }
    for &idx in windows.remainder() {
        partition_of[idx] = Partition::ALL[rng.random_range(0..Partition::ALL.len())];
    }
    Ok(SplitAssignment { partition_of, ratios, seed })
}
