use super::{Descriptor, DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};

/// Per-dimension standardization statistics pooled over several sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub mean: Vec<f64>,
    /// Population standard deviation plus 1e-8.
    pub std: Vec<f64>,
}

impl Whitening {
    /// Pools statistics over every non-zero descriptor of `sets`, which must
    /// share one L2 kind and dimension. Returns `None` when there is nothing
    /// to pool.
    pub fn fit(sets: &[&DescriptorSet]) -> Result<Option<Self>> {
        let Some(first) = sets.first() else {
            return Ok(None);
        };
        let (kind, dim) = (first.kind(), first.dim());
        if kind == DescriptorKind::ImportedHistogram {
            return Err(Error::DescriptorMismatch(
                "histogram descriptors are compared with chi2 and are not whitened".into(),
            ));
        }
        if let Some(s) = sets.iter().find(|s| s.kind() != kind || s.dim() != dim) {
            return Err(Error::DescriptorMismatch(format!(
                "cannot pool {} [{}] with {kind} [{dim}]",
                s.kind(),
                s.dim()
            )));
        }
        let pooled: Vec<&Descriptor> = sets
            .iter()
            .flat_map(|s| s.items())
            .filter(|d| !d.is_zero())
            .collect();
        if pooled.is_empty() {
            return Ok(None);
        }
        let n = pooled.len() as f64;
        let mut mean = vec![0.0; dim];
        for d in &pooled {
            for (m, v) in mean.iter_mut().zip(&d.values) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for d in &pooled {
            for ((s, v), m) in var.iter_mut().zip(&d.values).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt() + 1e-8).collect();
        Ok(Some(Whitening { mean, std }))
    }

    /// Standardized values before re-normalization.
    pub fn transform_raw(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Standardizes and L2-normalizes a descriptor; zero descriptors stay zero.
    pub fn apply(&self, d: &Descriptor) -> Descriptor {
        if d.is_zero() {
            return d.clone();
        }
        let mut out = Descriptor {
            kind: d.kind,
            values: self.transform_raw(&d.values),
        };
        out.normalize();
        out
    }
}

/// Diagonal whitening with statistics pooled over all given sets (normally
/// the two images of a pair), followed by re-normalization.
pub fn whiten(sets: &[&DescriptorSet]) -> Result<Vec<DescriptorSet>> {
    let Some(w) = Whitening::fit(sets)? else {
        return Ok(sets.iter().map(|s| (*s).clone()).collect());
    };
    Ok(sets
        .iter()
        .map(|s| {
            let mut out = (*s).clone();
            for d in out.items_mut() {
                *d = w.apply(d);
            }
            out
        })
        .collect())
}
