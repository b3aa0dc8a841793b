use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Nam,
    Phm,
    Lom,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Nam => "nam",
            Strategy::Phm => "phm",
            Strategy::Lom => "lom",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nam" => Ok(Strategy::Nam),
            "phm" => Ok(Strategy::Phm),
            "lom" => Ok(Strategy::Lom),
            other => Err(Error::InvalidArgument(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Best match of one source proposal. `posterior = appearance * geometric`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMatch {
    pub src: usize,
    pub tgt: usize,
    pub posterior: f64,
    pub appearance: f64,
    pub geometric: f64,
}

/// One match per source proposal, ordered by source id.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    strategy: Strategy,
    matches: Vec<RegionMatch>,
}

impl Assignment {
    pub fn new(strategy: Strategy, matches: Vec<RegionMatch>) -> Self {
        debug_assert!(matches.iter().enumerate().all(|(i, m)| m.src == i));
        Assignment { strategy, matches }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn matches(&self) -> &[RegionMatch] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn target(&self, src: usize) -> usize {
        self.matches[src].tgt
    }

    pub fn targets(&self) -> Vec<usize> {
        self.matches.iter().map(|m| m.tgt).collect()
    }

    pub fn posterior(&self, src: usize) -> f64 {
        self.matches[src].posterior
    }

    /// Writes `src_id,tgt_id,posterior,appearance,geometric`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::io(path, e);
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["src_id", "tgt_id", "posterior", "appearance", "geometric"])
            .map_err(io)?;
        for m in &self.matches {
            w.write_record([
                m.src.to_string(),
                m.tgt.to_string(),
                m.posterior.to_string(),
                m.appearance.to_string(),
                m.geometric.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a matches CSV; rows must cover source ids `0..n` in order.
    pub fn read_csv(path: impl AsRef<Path>, strategy: Strategy) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::io(path, e))?;
        let mut matches = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::io(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 5 {
                return Err(Error::parse(path, line, "expected 5 fields"));
            }
            let int = |k: usize| -> Result<usize> {
                record[k]
                    .parse()
                    .map_err(|_| Error::parse(path, line, format!("bad id '{}'", &record[k])))
            };
            let real = |k: usize| -> Result<f64> {
                record[k]
                    .parse()
                    .map_err(|_| Error::parse(path, line, format!("bad number '{}'", &record[k])))
            };
            let m = RegionMatch {
                src: int(0)?,
                tgt: int(1)?,
                posterior: real(2)?,
                appearance: real(3)?,
                geometric: real(4)?,
            };
            if m.src != matches.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected src_id {}, found {}", matches.len(), m.src),
                ));
            }
            matches.push(m);
        }
        Ok(Assignment { strategy, matches })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let asg = Assignment::new(
            Strategy::Lom,
            (0..5)
                .map(|i| {
                    let (a, g) = (0.1 + 0.17 * i as f64, 1.0 / (1.0 + i as f64));
                    RegionMatch {
                        src: i,
                        tgt: (3 * i) % 5,
                        posterior: a * g,
                        appearance: a,
                        geometric: g,
                    }
                })
                .collect(),
        );
        let f = tempfile::NamedTempFile::new().unwrap();
        asg.write_csv(f.path()).unwrap();
        assert_eq!(Assignment::read_csv(f.path(), Strategy::Lom).unwrap(), asg);
    }

    #[test]
    fn out_of_order_rows_are_rejected() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            "src_id,tgt_id,posterior,appearance,geometric\n1,0,0.5,0.5,1\n",
        )
        .unwrap();
        assert!(matches!(
            Assignment::read_csv(f.path(), Strategy::Nam).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }

    #[test]
    fn strategy_names() {
        for s in [Strategy::Nam, Strategy::Phm, Strategy::Lom] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("hough".parse::<Strategy>().is_err());
    }
}
