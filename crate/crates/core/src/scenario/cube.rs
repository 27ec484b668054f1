use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CUBE_MAGIC: &[u8; 8] = b"MRSCUBE1";

/// S paths of M periods of N simple returns, stored row-major as
/// `returns[(s * m + t) * n + a]`, with the market regime of every
/// `(s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCube {
    pub s: usize,
    pub m: usize,
    pub n: usize,
    pub assets: Vec<String>,
    pub returns: Vec<f64>,
    pub regimes: Vec<u32>,
    pub seed: u64,
}

impl ScenarioCube {
    pub fn new(s: usize, m: usize, assets: Vec<String>, returns: Vec<f64>, regimes: Vec<u32>, seed: u64) -> Result<Self> {
        let n = assets.len();
        if returns.len() != s * m * n || regimes.len() != s * m {
            return Err(Error::Shape(format!(
                "cube {s} x {m} x {n} needs {} returns and {} regimes, got {} and {}",
                s * m * n,
                s * m,
                returns.len(),
                regimes.len()
            )));
        }
        if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite scenario return at flat index {i}")));
        }
        Ok(Self { s, m, n, assets, returns, regimes, seed })
    }

    pub fn get(&self, s: usize, t: usize, a: usize) -> f64 {
        self.returns[(s * self.m + t) * self.n + a]
    }

    pub fn regime(&self, s: usize, t: usize) -> usize {
        self.regimes[s * self.m + t] as usize
    }

    /// Return vector of all assets at `(s, t)`.
    pub fn row(&self, s: usize, t: usize) -> &[f64] {
        let i = (s * self.m + t) * self.n;
        &self.returns[i..i + self.n]
    }

    /// Uncompounded accumulated returns of one asset along path `s`.
    pub fn accumulated(&self, s: usize, a: usize) -> Vec<f64> {
        let mut acc = 0.0;
        (0..self.m)
            .map(|t| {
                acc += self.get(s, t, a);
                acc
            })
            .collect()
    }

    /// S x M per-period portfolio returns `x . r`.
    pub fn portfolio_returns(&self, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
        if weights.len() != self.n {
            return Err(Error::Shape(format!("{} weights for {} assets", weights.len(), self.n)));
        }
        Ok((0..self.s)
            .map(|s| (0..self.m).map(|t| self.row(s, t).iter().zip(weights).map(|(r, w)| r * w).sum()).collect())
            .collect())
    }

    /// S x M accumulated (prefix-summed) portfolio returns.
    pub fn portfolio_paths(&self, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .portfolio_returns(weights)?
            .into_iter()
            .map(|p| {
                let mut acc = 0.0;
                p.into_iter()
                    .map(|r| {
                        acc += r;
                        acc
                    })
                    .collect()
            })
            .collect())
    }

    /// S x N matrix of accumulated returns at the horizon.
    pub fn horizon_returns(&self) -> Vec<Vec<f64>> {
        (0..self.s).map(|s| (0..self.n).map(|a| (0..self.m).map(|t| self.get(s, t, a)).sum()).collect()).collect()
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(CUBE_MAGIC)?;
        for v in [self.s as u64, self.m as u64, self.n as u64, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for name in &self.assets {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        for a in 0..self.n {
            for i in 0..self.s * self.m {
                w.write_all(&self.returns[i * self.n + a].to_le_bytes())?;
            }
        }
        for r in &self.regimes {
            w.write_all(&r.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CUBE_MAGIC {
            return Err(Error::Parse("not a scenario cube file".into()));
        }
        let mut word = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [s, m, n, seed] = header;
        let (s, m, n) = (s as usize, m as usize, n as usize);
        let cells = s.checked_mul(m).and_then(|c| c.checked_mul(n)).ok_or_else(|| Error::Parse("cube dimensions overflow".into()))?;
        let mut assets = Vec::with_capacity(n);
        let mut len = [0u8; 4];
        for _ in 0..n {
            r.read_exact(&mut len)?;
            let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut buf)?;
            assets.push(String::from_utf8(buf).map_err(|e| Error::Parse(format!("asset name: {e}")))?);
        }
        let mut returns = vec![0.0; cells];
        for a in 0..n {
            for i in 0..s * m {
                r.read_exact(&mut word)?;
                returns[i * n + a] = f64::from_le_bytes(word);
            }
        }
        let mut regimes = Vec::with_capacity(s * m);
        for _ in 0..s * m {
            r.read_exact(&mut len)?;
            regimes.push(u32::from_le_bytes(len));
        }
        Self::new(s, m, assets, returns, regimes, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(File::open(path)?)
    }

    /// Long CSV: `path,period,regime,<asset>...` with 1-based path, period
    /// and regime.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "period".into(), "regime".into()];
        header.extend(self.assets.iter().cloned());
        out.write_record(&header)?;
        for s in 0..self.s {
            for t in 0..self.m {
                let mut rec = vec![(s + 1).to_string(), (t + 1).to_string(), (self.regime(s, t) + 1).to_string()];
                rec.extend(self.row(s, t).iter().map(|v| v.to_string()));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
