//! ECE count series: CSV trace ingest and a synthetic ON/OFF generator.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::error::{PredictorError, Result};
use crate::simnet::{seeded_rng, SimTime};

/// ECE-marked packet counts per fixed-width interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EceSeries {
    pub interval: SimTime,
    pub counts: Vec<u64>,
}

impl EceSeries {
    pub fn new(interval: SimTime, counts: Vec<u64>) -> Self {
        EceSeries { interval, counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Writes `index,count` rows without a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])
                .map_err(|e| PredictorError::Trace { line: i as u64 + 1, msg: e.to_string() })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses a headerless `interval_index,ece_count` CSV. Indices must start at
/// 0 and be consecutive; counts must be nonnegative integers.
pub fn parse_trace<R: Read>(input: R, interval: SimTime) -> Result<EceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut counts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 1;
        let bad = |msg: String| PredictorError::Trace { line, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let idx: u64 = rec[0].parse().map_err(|_| bad(format!("bad interval index '{}'", &rec[0])))?;
        let count: i64 = rec[1].parse().map_err(|_| bad(format!("bad count '{}'", &rec[1])))?;
        if idx != counts.len() as u64 {
            return Err(bad(format!("interval index {idx}, expected {}", counts.len())));
        }
        if count < 0 {
            return Err(bad(format!("negative count {count}")));
        }
        counts.push(count as u64);
    }
    Ok(EceSeries::new(interval, counts))
}

pub fn ingest_trace(path: &Path, interval: SimTime) -> Result<EceSeries> {
    let f = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(f), interval)
}

/// Two-state Markov-modulated Poisson source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    /// Per-interval probability of switching OFF -> ON.
    pub p_on: f64,
    /// Per-interval probability of switching ON -> OFF.
    pub p_off: f64,
    /// Poisson mean of the count emitted in the ON state.
    pub rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            p_on: 0.02,
            p_off: 0.04,
            rate: 40.0,
        }
    }
}

impl SynthParams {
    /// Long-run fraction of intervals spent OFF.
    pub fn off_probability(&self) -> f64 {
        if self.p_on + self.p_off == 0.0 {
            1.0
        } else {
            self.p_off / (self.p_on + self.p_off)
        }
    }
}

/// Bursty counts: zeros while OFF, Poisson(rate) while ON. Starts OFF.
pub fn synth_trace(seed: u64, len: usize, params: SynthParams, interval: SimTime) -> Result<EceSeries> {
    for (name, p) in [("p_on", params.p_on), ("p_off", params.p_off)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(PredictorError::InvalidArgument(format!("{name} = {p} not in [0,1]")));
        }
    }
    if !(params.rate > 0.0 && params.rate.is_finite()) {
        return Err(PredictorError::InvalidArgument(format!("rate = {} must be positive", params.rate)));
    }
    let mut rng = seeded_rng(seed);
    let poisson = Poisson::new(params.rate).expect("validated rate");
    let mut on = false;
    let counts = (0..len)
        .map(|_| {
            let flip = if on { params.p_off } else { params.p_on };
            if rng.random_bool(flip) {
                on = !on;
            }
            if on {
                poisson.sample(&mut rng) as u64
            } else {
                0
            }
        })
        .collect();
    Ok(EceSeries::new(interval, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS100: SimTime = SimTime::from_millis(100);

    #[test]
    fn parses_documented_example() {
        let s = parse_trace("0,0\n1,3\n2,0".as_bytes(), MS100).unwrap();
        assert_eq!(s.counts, vec![0, 3, 0]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            parse_trace("0,1\n1,-2\n".as_bytes(), MS100),
            Err(PredictorError::Trace { line: 2, .. })
        ));
        assert!(parse_trace("0,1\n2,2\n".as_bytes(), MS100).is_err());
        assert!(parse_trace("0,1\n1\n".as_bytes(), MS100).is_err());
        assert!(parse_trace("0,x\n".as_bytes(), MS100).is_err());
        assert!(parse_trace("1,0\n".as_bytes(), MS100).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = synth_trace(3, 200, SynthParams::default(), MS100).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(parse_trace(buf.as_slice(), MS100).unwrap(), s);
    }

    #[test]
    fn never_on_means_all_zero() {
        let p = SynthParams { p_on: 0.0, ..SynthParams::default() };
        let s = synth_trace(1, 1000, p, MS100).unwrap();
        assert!(s.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn zero_fraction_tracks_off_probability() {
        let p = SynthParams::default();
        let a = synth_trace(7, 6000, p, MS100).unwrap();
        let b = synth_trace(7, 6000, p, MS100).unwrap();
        assert_eq!(a, b);
        let zeros = a.counts.iter().filter(|&&c| c == 0).count() as f64 / 6000.0;
        assert!((zeros - p.off_probability()).abs() <= 0.05, "zeros {zeros}");
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SynthParams { p_on: 1.5, ..SynthParams::default() };
        assert!(synth_trace(1, 10, p, MS100).is_err());
    }
}
