use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::{Architecture, QNetwork};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HXDQ";
pub const VERSION: u32 = 1;

/// A network plus the history length its input was built for.
///
/// Layout (little-endian): magic, version, trunk size count, input and hidden
/// sizes, history length, yaw and pitch grid sizes, parameter count (u64),
/// then the parameters as f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: QNetwork,
    pub history: usize,
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit the header")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<()> {
    let arch = ck.network.architecture();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u32(w, arch.hidden.len() + 1)?;
    put_u32(w, arch.input)?;
    for &h in &arch.hidden {
        put_u32(w, h)?;
    }
    put_u32(w, ck.history)?;
    put_u32(w, arch.k_yaw)?;
    put_u32(w, arch.k_pitch)?;
    w.write_all(&(ck.network.params().len() as u64).to_le_bytes())?;
    for p in ck.network.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_sizes = get_u32(r)?;
    if n_sizes == 0 || n_sizes > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes).map(|_| get_u32(r)).collect::<Result<Vec<_>>>()?;
    let history = get_u32(r)?;
    let k_yaw = get_u32(r)?;
    let k_pitch = get_u32(r)?;
    let arch = Architecture::new(sizes[0], sizes[1..].to_vec(), k_yaw, k_pitch).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut count = [0u8; 8];
    r.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    if count != arch.param_count() {
        return Err(Error::Checkpoint(format!("header implies {} parameters, block holds {count}", arch.param_count())));
    }
    let mut params = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameter block".into()));
    }
    Ok(Checkpoint {
        network: QNetwork::from_params(arch, params)?,
        history,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, ck)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
