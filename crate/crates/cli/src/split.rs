//! Seeded, order-independent assignment of subjects to folds and splits.

use costregime::{Dataset, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Byte encoding of one record's features, treatment and outcome.
fn row_bytes(data: &Dataset<f64>, i: usize) -> Vec<u8> {
    let r = data.record(i);
    let mut out = Vec::with_capacity(9 * r.x.len() + 16);
    for v in &r.x {
        match *v {
            Value::Level(l) => {
                out.push(0);
                out.extend(l.to_le_bytes());
            }
            Value::Number(x) => {
                out.push(1);
                out.extend(x.to_bits().to_le_bytes());
            }
        }
    }
    out.extend((r.treatment.0 as u64).to_le_bytes());
    out.extend(r.outcome.to_bits().to_le_bytes());
    out
}

/// Subjects ranked by a keyed hash of their content, so the ranking does not
/// depend on row order.
pub fn ranked(data: &Dataset<f64>, seed: u64) -> Vec<usize> {
    let keyed: Vec<([u8; 32], Vec<u8>)> = (0..data.len())
        .map(|i| {
            let bytes = row_bytes(data, i);
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(&bytes);
            (h.finalize().into(), bytes)
        })
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| keyed[a].cmp(&keyed[b]));
    order
}

/// Fold index per subject, `rank mod k`.
pub fn fold_assignment(data: &Dataset<f64>, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > data.len() {
        return Err(CliError::config(format!(
            "{folds} folds requested for {} subjects; need 2 <= folds <= N",
            data.len()
        )));
    }
    let mut fold = vec![0; data.len()];
    for (rank, i) in ranked(data, seed).into_iter().enumerate() {
        fold[i] = rank % folds;
    }
    Ok(fold)
}

/// `(train, validation)` index sets, both sorted, with
/// `⌈fraction · N⌉` validation subjects.
pub fn train_validation(data: &Dataset<f64>, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = data.len();
    let k = (fraction * n as f64).ceil() as usize;
    if !(fraction > 0.0 && fraction < 1.0) || k == 0 || k >= n {
        return Err(CliError::config(format!("validation fraction {fraction} leaves an empty split of {n} subjects")));
    }
    let order = ranked(data, seed);
    let mut validation = order[..k].to_vec();
    let mut train = order[k..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok((train, validation))
}

/// Subset that keeps the cost tables, mapping a missing treatment to a
/// configuration error.
pub fn subset(data: &Dataset<f64>, indices: &[usize], what: &str) -> Result<Dataset<f64>> {
    let part = data.subset(indices)?;
    if let Some(t) = part.treatment_counts().iter().position(|&c| c == 0) {
        return Err(CliError::config(format!(
            "{what} split never observes treatment '{}'",
            data.treatments().name(costregime::TreatmentId(t))
        )));
    }
    Ok(part)
}
