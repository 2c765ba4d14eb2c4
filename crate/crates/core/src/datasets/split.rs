//! Iterative stratification for multi-label data.
//!
//! Labels are processed rarest first. Each example carrying the current label
//! goes to the split that most needs positives of that label, so rare labels
//! spread across all splits instead of landing in train by chance. Split
//! sizes are fixed up front by largest-remainder rounding and never exceeded.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledReport, NUM_LABELS};
use crate::seed::{self, stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| DatasetError::Config(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let f = self.as_array();
        if f.iter().any(|x| !x.is_finite() || *x < 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(DatasetError::Config(format!(
                "split fractions must be non-negative and sum to 1, got {f:?}"
            )));
        }
        Ok(())
    }

    /// Exact split sizes for `n` items by largest-remainder rounding.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let raw = self.as_array().map(|f| f * n as f64);
        let mut sizes = raw.map(|r| r.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = raw[a] - raw[a].floor();
            let fb = raw[b] - raw[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut left = n - sizes.iter().sum::<usize>();
        for &j in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[j] += 1;
            left -= 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignments: BTreeMap<String, Split>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignments
            .iter()
            .filter(move |(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn count(&self, split: Split) -> usize {
        self.ids(split).count()
    }

    /// Reports belonging to `split`, in their original order.
    pub fn select<'a>(&self, reports: &'a [LabeledReport], split: Split) -> Vec<&'a LabeledReport> {
        reports
            .iter()
            .filter(|r| self.assignments.get(&r.id) == Some(&split))
            .collect()
    }
}

pub fn stratified_split(
    reports: &[LabeledReport],
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitAssignment, DatasetError> {
    fractions.validate()?;
    let n = reports.len();
    let mut rng = seed::rng(seed, &[stage::SPLIT]);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let totals: [usize; NUM_LABELS] = std::array::from_fn(|l| {
        reports.iter().filter(|r| r.labels[l] == 1).count()
    });
    let frac = fractions.as_array();
    let mut capacity = fractions.sizes(n);
    let mut wanted: [[f64; NUM_LABELS]; 3] =
        std::array::from_fn(|j| std::array::from_fn(|l| frac[j] * totals[l] as f64));
    let mut held = [[0usize; NUM_LABELS]; 3];
    let mut remaining = totals;
    let mut assigned: Vec<Option<Split>> = vec![None; n];

    let place = |assigned: &mut Vec<Option<Split>>,
                     idx: usize,
                     j: usize,
                     capacity: &mut [usize; 3],
                     wanted: &mut [[f64; NUM_LABELS]; 3],
                     held: &mut [[usize; NUM_LABELS]; 3],
                     remaining: &mut [usize; NUM_LABELS]| {
        assigned[idx] = Some(Split::ALL[j]);
        capacity[j] -= 1;
        for l in 0..NUM_LABELS {
            if reports[idx].labels[l] == 1 {
                wanted[j][l] -= 1.0;
                held[j][l] += 1;
                remaining[l] -= 1;
            }
        }
    };

    loop {
        let Some(label) = (0..NUM_LABELS)
            .filter(|&l| remaining[l] > 0)
            .min_by_key(|&l| (remaining[l], l))
        else {
            break;
        };
        let carriers: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| reports[i].labels[label] == 1)
            .collect();
        for idx in carriers {
            if assigned[idx].is_some() {
                continue;
            }
            let covers = totals[label] >= 3;
            let key = |j: usize| {
                (
                    covers && held[j][label] == 0,
                    wanted[j][label],
                    capacity[j],
                )
            };
            let open: Vec<usize> = (0..3).filter(|&j| capacity[j] > 0).collect();
            let best = open
                .iter()
                .map(|&j| key(j))
                .max_by(|a, b| a.partial_cmp(b).unwrap())
                .expect("capacity remains while examples remain");
            let tied: Vec<usize> = open.into_iter().filter(|&j| key(j) == best).collect();
            let j = tied[rng.gen_range(0..tied.len())];
            place(&mut assigned, idx, j, &mut capacity, &mut wanted, &mut held, &mut remaining);
        }
    }

    for &idx in &order {
        if assigned[idx].is_none() {
            let j = (0..3)
                .max_by_key(|&j| (capacity[j], std::cmp::Reverse(j)))
                .unwrap();
            place(&mut assigned, idx, j, &mut capacity, &mut wanted, &mut held, &mut remaining);
        }
    }

    Ok(SplitAssignment {
        assignments: reports
            .iter()
            .zip(assigned)
            .map(|(r, s)| (r.id.clone(), s.expect("every report assigned")))
            .collect(),
        fractions,
        seed,
    })
}
