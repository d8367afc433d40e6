//! Binary snapshot of a solved state, little-endian throughout:
//! magic, version, `N`, the four model parameters, the residual, the sector
//! count, then per sector `2J`, a kind byte (0 dense complex block, 1 real
//! populations) and the block entries.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Block, DickeLayout, DickeState};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::lmg::LmgParams;

const MAGIC: &[u8; 8] = b"PDYNCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: LmgParams,
    pub residual: f64,
    pub state: DickeState,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io_err);
    put(MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    put(&(c.state.n() as u64).to_le_bytes())?;
    let p = c.params;
    for v in [p.coupling, p.field, p.collective_rate, p.local_rate, c.residual] {
        put(&v.to_le_bytes())?;
    }
    put(&(c.state.blocks().len() as u64).to_le_bytes())?;
    for (s, b) in c.state.layout().sectors().iter().zip(c.state.blocks()) {
        put(&(s.two_j as u64).to_le_bytes())?;
        match b {
            Block::Dense(m) => {
                put(&[0])?;
                for z in m.as_slice() {
                    put(&z.re.to_le_bytes())?;
                    put(&z.im.to_le_bytes())?;
                }
            }
            Block::Diagonal(d) => {
                put(&[1])?;
                for v in d {
                    put(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush().map_err(io_err)
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut buf = [0u8; K];
        self.0.read_exact(&mut buf).map_err(io_err)?;
        Ok(buf)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = Reader(BufReader::new(File::open(path).map_err(io_err)?));
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = r.u64()? as usize;
    let layout = DickeLayout::new(n).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let params = LmgParams {
        coupling: r.f64()?,
        field: r.f64()?,
        collective_rate: r.f64()?,
        local_rate: r.f64()?,
    };
    let residual = r.f64()?;
    let count = r.u64()? as usize;
    if count != layout.sectors().len() {
        return Err(Error::Checkpoint(format!("{count} sectors, expected {}", layout.sectors().len())));
    }
    let mut blocks = Vec::with_capacity(count);
    for s in layout.sectors() {
        let two_j = r.u64()? as usize;
        if two_j != s.two_j {
            return Err(Error::Checkpoint(format!("sector 2J = {two_j}, expected {}", s.two_j)));
        }
        let size = s.size();
        match r.bytes::<1>()?[0] {
            0 => {
                let mut data = Vec::with_capacity(size * size);
                for _ in 0..size * size {
                    data.push(Complex64::new(r.f64()?, r.f64()?));
                }
                blocks.push(Block::Dense(CMatrix::from_row_major(size, size, data)));
            }
            1 => {
                let d = (0..size).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                blocks.push(Block::Diagonal(d));
            }
            kind => return Err(Error::Checkpoint(format!("unknown block kind {kind}"))),
        }
    }
    let mut rest = Vec::new();
    r.0.read_to_end(&mut rest).map_err(io_err)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(Checkpoint {
        params,
        residual,
        state: DickeState::new(layout, blocks)?,
    })
}
