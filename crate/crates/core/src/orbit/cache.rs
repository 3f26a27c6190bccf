use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::ball::WordBall;
use super::{divergence_diagnostic, enumerate_ball_with, GroupPreset, OrbitError};
use crate::cartan::{RootSubset, Tolerances};
use crate::scalar::{lit, to_f64, Real};

pub const CACHE_ENV: &str = "TD_CACHE_DIR";
const MAGIC: &[u8; 8] = b"TDBALL01";

/// Hex digest of (preset generators, radius, dedup tolerances).
pub fn ball_cache_key<T: Real>(preset: &GroupPreset<T>, radius: usize, tols: &Tolerances) -> String {
    let mut h = Sha256::new();
    h.update(preset.name.as_bytes());
    h.update((preset.dim() as u64).to_le_bytes());
    for g in &preset.generators {
        for &x in g.matrix().iter() {
            h.update(to_f64(x).to_le_bytes());
        }
    }
    h.update((radius as u64).to_le_bytes());
    h.update(tols.dedup.to_le_bytes());
    h.update(tols.dedup_quantum.to_le_bytes());
    h.update([preset.free as u8, std::mem::size_of::<T>() as u8]);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

pub fn save_ball<T: Real>(ball: &WordBall<T>, path: &Path) -> Result<(), OrbitError<T>> {
    let mut out = Vec::with_capacity(16 + ball.len() * (16 * ball.dim * ball.dim + 6));
    out.extend_from_slice(MAGIC);
    put_u64(&mut out, ball.dim as u64);
    put_u64(&mut out, ball.radius as u64);
    put_u64(&mut out, ball.len() as u64);
    put_u64(&mut out, ball.truncated as u64);
    for &o in &ball.offsets {
        put_u64(&mut out, o as u64);
    }
    for &x in ball.mats.iter().chain(&ball.invs) {
        out.extend_from_slice(&to_f64(x).to_le_bytes());
    }
    for &p in &ball.parent {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for &l in &ball.letter {
        out.extend_from_slice(&l.to_le_bytes());
    }
    let json = serde_json::to_vec(&ball.dedup).map_err(|e| OrbitError::Cache(e.to_string()))?;
    put_u64(&mut out, json.len() as u64);
    out.extend_from_slice(&json);
    let mut f = fs::File::create(path).map_err(|e| OrbitError::Cache(e.to_string()))?;
    f.write_all(&out).map_err(|e| OrbitError::Cache(e.to_string()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], String> {
        let s = self.buf.get(self.pos..self.pos + n).ok_or("truncated cache file")?;
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_ball<T: Real>(path: &Path) -> Result<WordBall<T>, OrbitError<T>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| OrbitError::Cache(e.to_string()))?;
    decode(&buf).map_err(OrbitError::Cache)
}

fn decode<T: Real>(buf: &[u8]) -> Result<WordBall<T>, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let dim = r.u64()? as usize;
    let radius = r.u64()? as usize;
    let len = r.u64()? as usize;
    let truncated = r.u64()? != 0;
    let offsets = (0..radius + 2).map(|_| r.u64().map(|x| x as usize)).collect::<Result<Vec<_>, _>>()?;
    let nn = dim * dim;
    let mut floats = Vec::with_capacity(2 * len * nn);
    for _ in 0..2 * len * nn {
        floats.push(lit::<T>(f64::from_le_bytes(r.take(8)?.try_into().unwrap())));
    }
    let invs = floats.split_off(len * nn);
    let parent = (0..len)
        .map(|_| r.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap())))
        .collect::<Result<Vec<_>, _>>()?;
    let letter = (0..len)
        .map(|_| r.take(2).map(|b| i16::from_le_bytes(b.try_into().unwrap())))
        .collect::<Result<Vec<_>, _>>()?;
    let jl = r.u64()? as usize;
    let dedup = serde_json::from_slice(r.take(jl)?).map_err(|e| e.to_string())?;
    Ok(WordBall {
        dim,
        radius,
        mats: floats,
        invs,
        parent,
        letter,
        offsets,
        dedup,
        truncated,
    })
}

/// Enumerates a ball, reading and writing the binary cache in `dir` (or in
/// `$TD_CACHE_DIR` when `dir` is `None`; no caching when neither is set).
pub fn cached_ball<T: Real>(
    preset: &GroupPreset<T>,
    radius: usize,
    budget: usize,
    tols: &Tolerances,
    dir: Option<&Path>,
) -> Result<WordBall<T>, OrbitError<T>> {
    let dir: Option<PathBuf> = dir
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from));
    let Some(dir) = dir else {
        return enumerate_ball_with(preset, radius, budget, tols);
    };
    let path = dir.join(format!("{}.tdball", ball_cache_key(preset, radius, tols)));
    if let Ok(ball) = load_ball::<T>(&path) {
        if ball.len() <= budget {
            return Ok(ball);
        }
    }
    let ball = enumerate_ball_with(preset, radius, budget, tols)?;
    fs::create_dir_all(&dir).map_err(|e| OrbitError::Cache(e.to_string()))?;
    save_ball(&ball, &path)?;
    Ok(ball)
}

/// Per-sphere statistics as CSV: word length, count and the extreme θ-gaps.
pub fn write_sphere_csv<T: Real, W: Write>(
    ball: &WordBall<T>,
    theta: &RootSubset,
    out: W,
) -> Result<(), OrbitError<T>> {
    let table = divergence_diagnostic(ball, theta)?;
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| OrbitError::Cache(e.to_string());
    w.write_record(["word_length", "count", "min_gap", "max_gap"]).map_err(err)?;
    w.write_record(["0", "1", "", ""]).map_err(err)?;
    for row in &table.rows {
        w.write_record([
            row.n.to_string(),
            row.count.to_string(),
            format!("{:.12e}", row.min_gap),
            format!("{:.12e}", row.max_gap),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| OrbitError::Cache(e.to_string()))
}
