use super::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let a = ((fractions[0] * n as f64).round() as usize).min(n);
    let b = ((fractions[1] * n as f64).round() as usize).min(n - a);
    [a, b, n - a - b]
}

/// Seeded random split into train/validation/test. Stratified splits
/// apply the fractions within each class.
pub fn split(ds: &Dataset, fractions: [f64; 3], seed: u64, stratified: bool) -> Result<SplitIndices> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratified {
        let labels = ds.labels();
        let groups: Vec<Vec<usize>> = (0..ds.classes())
            .map(|c| (0..ds.len()).filter(|&i| labels[i] == c).collect())
            .collect();
        for (class, g) in groups.iter().enumerate() {
            if !g.is_empty() && g.len() < 3 {
                return Err(Error::ClassTooSmall {
                    class,
                    count: g.len(),
                });
            }
        }
        groups
    } else {
        vec![(0..ds.len()).collect()]
    };
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for mut g in groups {
        g.shuffle(&mut rng);
        let [a, b, _] = sizes(g.len(), fractions);
        out.train.extend_from_slice(&g[..a]);
        out.val.extend_from_slice(&g[a..a + b]);
        out.test.extend_from_slice(&g[a + b..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
