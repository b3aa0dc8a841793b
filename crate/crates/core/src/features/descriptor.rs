use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How a descriptor was produced; fixes its normalization and similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    Hog,
    /// Externally computed dense vector (e.g. a network activation), L2-normalized.
    ImportedDense,
    /// Externally computed histogram (e.g. a bag of words), L1-normalized.
    ImportedHistogram,
}

impl DescriptorKind {
    fn uses_l1(self) -> bool {
        self == DescriptorKind::ImportedHistogram
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DescriptorKind::Hog => "hog",
            DescriptorKind::ImportedDense => "imported-dense",
            DescriptorKind::ImportedHistogram => "imported-histogram",
        })
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hog" => Ok(DescriptorKind::Hog),
            "imported-dense" | "dense" => Ok(DescriptorKind::ImportedDense),
            "imported-histogram" | "histogram" => Ok(DescriptorKind::ImportedHistogram),
            other => Err(Error::InvalidArgument(format!("unknown descriptor kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub kind: DescriptorKind,
    pub values: Vec<f64>,
}

impl Descriptor {
    pub fn new(kind: DescriptorKind, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DescriptorMismatch("non-finite descriptor value".into()));
        }
        if kind.uses_l1() && values.iter().any(|&v| v < 0.0) {
            return Err(Error::DescriptorMismatch("negative histogram bin".into()));
        }
        let mut d = Descriptor { kind, values };
        d.normalize();
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// L1 (histogram) or L2 normalization; the zero vector stays zero.
    pub fn normalize(&mut self) {
        let norm = if self.kind.uses_l1() {
            self.values.iter().map(|v| v.abs()).sum::<f64>()
        } else {
            self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        if norm > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

/// Appearance-matching probability `p(f -> f')` in `[0, 1]`.
///
/// HOG and dense descriptors map the dot product through `(1 + <f, f'>) / 2`;
/// histograms use `1 - chi2 / 2`. A zero descriptor scores 0.5 against
/// anything in the dot-product kinds.
pub fn appearance_prob(f: &Descriptor, g: &Descriptor) -> Result<f64> {
    if f.kind != g.kind || f.dim() != g.dim() {
        return Err(Error::DescriptorMismatch(format!(
            "{} [{}] vs {} [{}]",
            f.kind,
            f.dim(),
            g.kind,
            g.dim()
        )));
    }
    Ok(similarity_unchecked(f, g))
}

pub(crate) fn similarity_unchecked(f: &Descriptor, g: &Descriptor) -> f64 {
    if f.kind.uses_l1() {
        let chi2: f64 = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| (a - b) * (a - b) / (a + b + 1e-12))
            .sum();
        (1.0 - 0.5 * chi2).clamp(0.0, 1.0)
    } else {
        let dot: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
        (0.5 * (1.0 + dot)).clamp(0.0, 1.0)
    }
}

/// Descriptors of one proposal set, indexed by proposal id.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    kind: DescriptorKind,
    dim: usize,
    items: Vec<Descriptor>,
}

impl DescriptorSet {
    pub fn new(kind: DescriptorKind, items: Vec<Descriptor>) -> Result<Self> {
        let dim = items.first().map_or(0, Descriptor::dim);
        if let Some((i, d)) = items
            .iter()
            .enumerate()
            .find(|(_, d)| d.kind != kind || d.dim() != dim)
        {
            return Err(Error::DescriptorMismatch(format!(
                "descriptor {i} is {} [{}], set is {kind} [{dim}]",
                d.kind,
                d.dim()
            )));
        }
        Ok(DescriptorSet { kind, dim, items })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Descriptor {
        &self.items[i]
    }

    pub fn items(&self) -> &[Descriptor] {
        &self.items
    }

    pub(crate) fn items_mut(&mut self) -> &mut [Descriptor] {
        &mut self.items
    }
}

/// Writes the import format: a `kind,dim,count` line, then one row per
/// descriptor.
pub fn write_descriptors(set: &DescriptorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "{},{},{}", set.kind, set.dim, set.len()).expect("vec write");
    for d in &set.items {
        let row: Vec<String> = d.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(",")).expect("vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads the descriptor import format. Each row is normalized for its kind.
/// A literal `kind,dim,count` line before the values line is tolerated.
pub fn read_descriptors(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e))?;
    let mut records = reader.records();
    let mut next = || -> Option<Result<(u64, csv::StringRecord)>> {
        records.next().map(|r| {
            r.map(|rec| (rec.position().map_or(0, |p| p.line()), rec))
                .map_err(|e| Error::io(path, e))
        })
    };

    let mut header = next().ok_or_else(|| Error::parse(path, 1, "empty file"))??;
    if header.1.iter().eq(["kind", "dim", "count"]) {
        header = next().ok_or_else(|| Error::parse(path, 2, "missing header values"))??;
    }
    let (line, rec) = header;
    if rec.len() != 3 {
        return Err(Error::parse(path, line, "expected kind,dim,count"));
    }
    let kind: DescriptorKind = rec[0]
        .parse()
        .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
    let dim: usize = rec[1]
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad dim '{}'", &rec[1])))?;
    let count: usize = rec[2]
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad count '{}'", &rec[2])))?;

    let mut items = Vec::with_capacity(count);
    while let Some(row) = next() {
        let (line, rec) = row?;
        if rec.len() != dim {
            return Err(Error::parse(
                path,
                line,
                format!("expected {dim} values, found {}", rec.len()),
            ));
        }
        let values = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("bad number '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let d = Descriptor::new(kind, values).map_err(|e| Error::parse(path, line, e.to_string()))?;
        items.push(d);
    }
    if items.len() != count {
        return Err(Error::parse(
            path,
            line,
            format!("header announces {count} rows, found {}", items.len()),
        ));
    }
    DescriptorSet::new(kind, items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: &[f64]) -> Descriptor {
        Descriptor::new(DescriptorKind::ImportedDense, v.to_vec()).unwrap()
    }

    #[test]
    fn dot_product_probability() {
        let f = dense(&[3.0, 4.0, 0.0]);
        assert!((appearance_prob(&f, &f).unwrap() - 1.0).abs() < 1e-15);
        let neg = dense(&[-3.0, -4.0, 0.0]);
        assert!(appearance_prob(&f, &neg).unwrap().abs() < 1e-15);
        let orth = dense(&[0.0, 0.0, 2.0]);
        assert_eq!(appearance_prob(&f, &orth).unwrap(), 0.5);
    }

    #[test]
    fn zero_descriptor_scores_half() {
        let z = dense(&[0.0, 0.0, 0.0]);
        assert!(z.is_zero());
        assert_eq!(appearance_prob(&z, &dense(&[1.0, 2.0, 3.0])).unwrap(), 0.5);
    }

    #[test]
    fn chi_square_probability() {
        let h = |v: &[f64]| Descriptor::new(DescriptorKind::ImportedHistogram, v.to_vec()).unwrap();
        let a = h(&[1.0, 1.0, 2.0]);
        assert!((a.values.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(appearance_prob(&a, &a).unwrap(), 1.0);
        // disjoint supports: chi2 = sum(a) + sum(b) = 2
        let b = h(&[1.0, 0.0, 0.0]);
        let c = h(&[0.0, 1.0, 0.0]);
        assert!(appearance_prob(&b, &c).unwrap().abs() < 1e-9);
        assert!(Descriptor::new(DescriptorKind::ImportedHistogram, vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn mismatches_are_errors() {
        let a = dense(&[1.0, 0.0]);
        let b = dense(&[1.0, 0.0, 0.0]);
        assert!(appearance_prob(&a, &b).is_err());
        let h = Descriptor::new(DescriptorKind::ImportedHistogram, vec![1.0, 0.0]).unwrap();
        assert!(appearance_prob(&a, &h).is_err());
    }

    #[test]
    fn import_format_round_trip() {
        let set = DescriptorSet::new(
            DescriptorKind::ImportedDense,
            vec![dense(&[1.0, 2.0, 2.0]), dense(&[0.1, -0.7, 0.2])],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_descriptors(&set, f.path()).unwrap();
        assert_eq!(read_descriptors(f.path()).unwrap(), set);
    }

    #[test]
    fn import_accepts_literal_header_and_checks_rows() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "kind,dim,count\nhistogram,2,2\n1,3\n2,2\n").unwrap();
        let set = read_descriptors(f.path()).unwrap();
        assert_eq!(set.kind(), DescriptorKind::ImportedHistogram);
        assert_eq!(set.get(0).values, vec![0.25, 0.75]);

        std::fs::write(f.path(), "dense,2,2\n1,3\n2\n").unwrap();
        assert!(matches!(
            read_descriptors(f.path()).unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
        std::fs::write(f.path(), "dense,2,3\n1,3\n2,1\n").unwrap();
        assert!(read_descriptors(f.path()).is_err());
    }
}
