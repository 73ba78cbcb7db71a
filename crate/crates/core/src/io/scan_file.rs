//! Binary container for one polar scan.
//!
//! Layout, all integers little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `RDOS` | 4 bytes |
//! | version | u16 |
//! | n_azimuths, n_bins | u32, u32 |
//! | bin size in micrometers | u32 |
//! | scan rate in millihertz | u32 |
//! | scan timestamp in microseconds | u64 |
//! | modulation bitfield (bit set = reversed) | `ceil(n_azimuths / 8)` bytes |
//! | per-azimuth timestamps in microseconds | `n_azimuths` × u64 |
//! | power, row-major per azimuth | `n_azimuths · n_bins` × f32 |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Modulation, PolarScan, RadarConfig};

pub const MAGIC: &[u8; 4] = b"RDOS";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanHeader {
    pub n_azimuths: usize,
    pub n_bins: usize,
    pub bin_size_um: u32,
    pub scan_rate_mhz: u32,
    pub scan_timestamp_us: u64,
}

impl ScanHeader {
    pub fn new(config: &RadarConfig, scan_timestamp_us: u64) -> Self {
        Self {
            n_azimuths: config.n_azimuths,
            n_bins: config.n_bins,
            bin_size_um: (config.bin_size * 1e6).round() as u32,
            scan_rate_mhz: (config.scan_rate * 1e3).round() as u32,
            scan_timestamp_us,
        }
    }

    pub fn bin_size(&self) -> f64 {
        self.bin_size_um as f64 / 1e6
    }

    pub fn scan_rate(&self) -> f64 {
        self.scan_rate_mhz as f64 / 1e3
    }

    /// `base` with the geometry stored in the file.
    pub fn radar_config(&self, base: &RadarConfig, modulation: &[Modulation]) -> RadarConfig {
        RadarConfig {
            n_azimuths: self.n_azimuths,
            n_bins: self.n_bins,
            bin_size: self.bin_size(),
            scan_rate: self.scan_rate(),
            modulation: modulation.to_vec(),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanFile {
    pub header: ScanHeader,
    pub scan: PolarScan,
}

pub fn encode(header: &ScanHeader, scan: &PolarScan) -> Result<Vec<u8>> {
    let (n_az, n_bins) = scan.power.dim();
    if (n_az, n_bins) != (header.n_azimuths, header.n_bins) {
        return Err(Error::ShapeMismatch {
            expected: (header.n_azimuths, header.n_bins),
            actual: (n_az, n_bins),
        });
    }
    scan.validate()?;
    let mut out = Vec::with_capacity(34 + n_az.div_ceil(8) + 8 * n_az + 4 * n_az * n_bins);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n_az as u32).to_le_bytes());
    out.extend_from_slice(&(n_bins as u32).to_le_bytes());
    out.extend_from_slice(&header.bin_size_um.to_le_bytes());
    out.extend_from_slice(&header.scan_rate_mhz.to_le_bytes());
    out.extend_from_slice(&header.scan_timestamp_us.to_le_bytes());
    let mut bits = vec![0u8; n_az.div_ceil(8)];
    for (i, m) in scan.modulation.iter().enumerate() {
        if *m == Modulation::Reversed {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bits);
    for t in &scan.timestamps_us {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for p in scan.power.iter() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "truncated scan file: need {n} bytes at offset {}",
                self.pos
            )));
        };
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(data: &[u8]) -> Result<ScanFile> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a scan file".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported scan file version {version}")));
    }
    let n_az = c.u32()? as usize;
    let n_bins = c.u32()? as usize;
    if n_az == 0 || n_bins == 0 {
        return Err(Error::Format("scan file declares an empty scan".into()));
    }
    let header = ScanHeader {
        n_azimuths: n_az,
        n_bins,
        bin_size_um: c.u32()?,
        scan_rate_mhz: c.u32()?,
        scan_timestamp_us: c.u64()?,
    };
    let bits = c.take(n_az.div_ceil(8))?;
    let modulation = (0..n_az)
        .map(|i| {
            if bits[i / 8] & (1 << (i % 8)) != 0 {
                Modulation::Reversed
            } else {
                Modulation::Standard
            }
        })
        .collect();
    let timestamps_us = (0..n_az).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    let expected = n_az
        .checked_mul(n_bins)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("scan dimensions overflow".into()))?;
    let payload = c.take(expected)?;
    if c.pos != data.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            data.len() - c.pos
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let power = Array2::from_shape_vec((n_az, n_bins), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    let scan = PolarScan {
        power,
        azimuth_angles: (0..n_az)
            .map(|i| std::f64::consts::TAU * i as f64 / n_az as f64)
            .collect(),
        modulation,
        timestamps_us,
    };
    scan.validate()?;
    Ok(ScanFile { header, scan })
}

pub fn write_scan(path: &Path, header: &ScanHeader, scan: &PolarScan) -> Result<()> {
    let bytes = encode(header, scan)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_scan(path: &Path) -> Result<ScanFile> {
    let mut data = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    decode(&data)
}
