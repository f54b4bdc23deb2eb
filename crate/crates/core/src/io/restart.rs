//! Binary restart files.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    4 bytes  "OSWR"
//! version  u32
//! length   u64      payload length in bytes
//! payload  length bytes
//! checksum u64      FNV-1a over everything before it
//! ```
//!
//! The payload holds the seed date, the restart week, the full simulator
//! state (compartments, delay queues and random stream position), the search
//! bounds, and the settled coefficient schedule preceding the restart week.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::seed_date;
use crate::bounds::BoundsTable;
use crate::error::{Error, Result};
use crate::model::{week_first_day, ModelParams, MuSchedule, SimState};

const MAGIC: &[u8; 4] = b"OSWR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RestartFile {
    pub format_version: u32,
    pub seed_date: NaiveDate,
    /// The state sits on the first day of this week.
    pub week: u32,
    pub state: SimState,
    pub bounds: BoundsTable,
    /// Coefficients of the weeks before `week`.
    pub history: MuSchedule,
}

impl RestartFile {
    pub fn new(week: u32, state: SimState, bounds: BoundsTable, history: MuSchedule) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed_date: seed_date(),
            week,
            state,
            bounds,
            history,
        }
    }

    /// Calendar date the restored simulation resumes on.
    pub fn start_date(&self) -> NaiveDate {
        self.seed_date + Duration::days(week_first_day(self.week) as i64)
    }

    /// Check that the stored state fits `params` and sits on `week`.
    pub fn validate_against(&self, params: &ModelParams) -> Result<()> {
        if self.state.day != week_first_day(self.week) {
            return Err(Error::Restart(format!(
                "state day {} is not the first day of week {}",
                self.state.day, self.week
            )));
        }
        let tolerance = if params.stochastic { 0.0 } else { 1e-6 };
        self.state
            .check_against(
                params,
                tolerance * params.population.iter().max().copied().unwrap_or(1) as f64,
            )
            .map_err(|e| Error::Restart(e.to_string()))?;
        if self.bounds.num_regions() != params.num_regions {
            return Err(Error::Restart(
                "bounds region count differs from the model".into(),
            ));
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_bits().to_le_bytes());
        }
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Restart("truncated payload".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_bits(self.u64()?))).collect()
    }
    fn len(&mut self, limit: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n > limit {
            return Err(Error::Restart(format!("implausible length {n}")));
        }
        Ok(n)
    }
}

fn encode_payload(rf: &RestartFile) -> Vec<u8> {
    let st = &rf.state;
    let n = st.num_regions();
    let mut e = Encoder(Vec::new());
    e.i32(rf.seed_date.num_days_from_ce());
    e.u32(rf.week);

    e.u32(st.day);
    e.len(n);
    let slots = |q: &[Vec<f64>]| q.first().map_or(0, Vec::len);
    for q in [&st.exposed, &st.infectious, &st.pre_icu, &st.icu] {
        e.len(slots(q));
    }
    e.f64s(&st.susceptible);
    e.f64s(&st.recovered);
    for q in [&st.exposed, &st.infectious, &st.pre_icu, &st.icu] {
        for region in q {
            e.f64s(region);
        }
    }
    e.0.extend_from_slice(&st.rng.get_seed());
    e.u64(st.rng.get_stream());
    e.u128(st.rng.get_word_pos());

    e.len(rf.bounds.num_regions());
    e.f64s(rf.bounds.lb());
    e.f64s(rf.bounds.ub());

    e.u32(rf.history.first_week());
    e.len(rf.history.weeks());
    e.len(rf.history.num_regions());
    for row in rf.history.rows() {
        e.f64s(row);
    }
    e.0
}

const MAX_LEN: usize = 1 << 20;

fn decode_payload(buf: &[u8], version: u32) -> Result<RestartFile> {
    let mut d = Decoder { buf, pos: 0 };
    let seed_date = NaiveDate::from_num_days_from_ce_opt(d.i32()?)
        .ok_or_else(|| Error::Restart("invalid seed date".into()))?;
    let week = d.u32()?;

    let day = d.u32()?;
    let n = d.len(MAX_LEN)?;
    let mut slots = [0usize; 4];
    for s in &mut slots {
        *s = d.len(MAX_LEN)?;
    }
    let susceptible = d.f64s(n)?;
    let recovered = d.f64s(n)?;
    let mut queues = Vec::with_capacity(4);
    for &len in &slots {
        queues.push((0..n).map(|_| d.f64s(len)).collect::<Result<Vec<_>>>()?);
    }
    let rng_seed: [u8; 32] = d.array()?;
    let stream = d.u64()?;
    let word_pos = d.u128()?;
    let mut rng = ChaCha8Rng::from_seed(rng_seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let mut queues = queues.into_iter();
    let mut next = || queues.next().expect("four queues decoded");
    let state = SimState {
        day,
        susceptible,
        exposed: next(),
        infectious: next(),
        pre_icu: next(),
        icu: next(),
        recovered,
        rng,
    };

    let nb = d.len(MAX_LEN)?;
    let lb = d.f64s(nb)?;
    let ub = d.f64s(nb)?;
    let bounds = BoundsTable::new(lb, ub).map_err(|e| Error::Restart(e.to_string()))?;

    let first_week = d.u32()?;
    let weeks = d.len(MAX_LEN)?;
    let cols = d.len(MAX_LEN)?;
    let rows = (0..weeks)
        .map(|_| d.f64s(cols))
        .collect::<Result<Vec<_>>>()?;
    let history = if rows.is_empty() {
        MuSchedule::empty(first_week.max(1))
    } else {
        MuSchedule::new(first_week, rows).map_err(|e| Error::Restart(e.to_string()))?
    };

    if d.pos != buf.len() {
        return Err(Error::Restart("trailing bytes after payload".into()));
    }
    Ok(RestartFile {
        format_version: version,
        seed_date,
        week,
        state,
        bounds,
        history,
    })
}

pub fn encode_restart(rf: &RestartFile) -> Vec<u8> {
    let payload = encode_payload(rf);
    let mut out = Vec::with_capacity(payload.len() + 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rf.format_version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn decode_restart(bytes: &[u8]) -> Result<RestartFile> {
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        return Err(Error::Restart("not a restart file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Restart(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body_end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&end| end + 8 == bytes.len())
        .ok_or_else(|| Error::Restart("length field does not match file size".into()))?;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().expect("8 bytes"));
    let computed = fnv1a(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    decode_payload(&bytes[16..body_end], version)
}

pub fn save_restart(rf: &RestartFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_restart(rf)).map_err(|e| Error::io(path, e))
}

pub fn load_restart(path: impl AsRef<Path>) -> Result<RestartFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_restart(&bytes)
}

#[cfg(test)]
mod tests {
    use rand::RngCore;

    use super::*;
    use crate::model::{init_state, step_day};

    fn sample() -> RestartFile {
        let params = ModelParams::with_population(vec![5000, 8000]);
        let mut st = init_state(&params, &[40, 3], 17).unwrap();
        for _ in 0..14 {
            step_day(&mut st, &[0.7, 0.4], &params);
        }
        st.rng.next_u32(); // leave the stream mid-block
        let history = MuSchedule::new(1, vec![vec![0.7, 0.4], vec![0.6, 0.5]]).unwrap();
        RestartFile::new(
            3,
            st,
            BoundsTable::new(vec![0.2, 0.3], vec![0.5, 0.9]).unwrap(),
            history,
        )
    }

    #[test]
    fn round_trip_is_exact() {
        let rf = sample();
        let back = decode_restart(&encode_restart(&rf)).unwrap();
        assert_eq!(back, rf);
        let mut a = rf.state.rng.clone();
        let mut b = back.state.rng.clone();
        assert_eq!(a.next_u64(), b.next_u64());
        assert_eq!(
            back.start_date(),
            NaiveDate::from_ymd_opt(2020, 3, 23).unwrap()
        );
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_restart(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(
            decode_restart(&bytes),
            Err(Error::Checksum { .. })
        ));

        let mut bytes = encode_restart(&sample());
        bytes[4] = 9;
        assert!(decode_restart(&bytes)
            .unwrap_err()
            .to_string()
            .contains("version"));

        let bytes = encode_restart(&sample());
        assert!(decode_restart(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn validates_against_model() {
        let rf = sample();
        rf.validate_against(&ModelParams::with_population(vec![5000, 8000]))
            .unwrap();
        assert!(rf
            .validate_against(&ModelParams::with_population(vec![5000, 8001]))
            .is_err());
    }
}
