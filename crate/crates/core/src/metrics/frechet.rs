use crate::error::{Error, Result};

/// Discrete Fréchet distance between two scalar sequences under `|a − b|`.
pub fn discrete_frechet(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Fréchet distance of an empty sequence".into()));
    }
    // rolling row of the coupling table
    let mut row = vec![0.0; b.len()];
    for (i, &x) in a.iter().enumerate() {
        let mut diag = 0.0;
        for (j, &y) in b.iter().enumerate() {
            let d = (x - y).abs();
            let up = row[j];
            row[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d.max(row[j - 1]),
                (_, 0) => d.max(up),
                _ => d.max(up.min(diag).min(row[j - 1])),
            };
            diag = up;
        }
    }
    Ok(row[b.len() - 1])
}
