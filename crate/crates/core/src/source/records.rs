use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::AnalyzerSetting;

/// Coincidences and Alice triggers accumulated in one setting pair.
///
/// Counts are `f64` so that expected (noise-free) values can be carried in
/// the same type as sampled ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_a: AnalyzerSetting,
    pub setting_b: AnalyzerSetting,
    pub duration_s: f64,
    pub coincidences: f64,
    pub triggers: f64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        let finite = self.duration_s.is_finite() && self.coincidences.is_finite() && self.triggers.is_finite();
        if !finite || self.duration_s <= 0.0 || self.coincidences < 0.0 || self.triggers < 0.0 {
            return Err(Error::InvalidInput(format!("invalid count record {self:?}")));
        }
        if self.coincidences > self.triggers {
            return Err(Error::InvalidInput(format!(
                "{}{}: {} coincidences exceed {} triggers",
                self.setting_a, self.setting_b, self.coincidences, self.triggers
            )));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.coincidences / self.duration_s
    }

    /// Adds counts of another record with the same settings.
    pub fn merge(&mut self, other: &CountRecord) -> Result<()> {
        if (self.setting_a, self.setting_b) != (other.setting_a, other.setting_b) {
            return Err(Error::InvalidInput("cannot merge records of different settings".into()));
        }
        self.duration_s += other.duration_s;
        self.coincidences += other.coincidences;
        self.triggers += other.triggers;
        Ok(())
    }
}

pub fn write_records<W: Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let rec: CountRecord = row?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<CountRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(f)
}

fn find<'a>(records: &'a [CountRecord], a: AnalyzerSetting, b: AnalyzerSetting) -> Result<&'a CountRecord> {
    records
        .iter()
        .find(|r| r.setting_a == a && r.setting_b == b)
        .ok_or_else(|| Error::InvalidInput(format!("missing record for setting {a}{b}")))
}

/// Visibility (Max − Min)/(Max + Min) from four records covering (a,b),
/// (a,b⊥), (a⊥,b), (a⊥,b⊥), where (a,b) is the first record. `background`
/// (counts/s) is removed from every record before the rates are formed, and
/// each rate is floored at zero.
pub fn corrected_visibility(records: &[CountRecord], background: f64) -> Result<f64> {
    if records.len() != 4 {
        return Err(Error::InvalidInput(format!("expected 4 records, got {}", records.len())));
    }
    if !(background >= 0.0) {
        return Err(Error::InvalidInput(format!("negative background {background}")));
    }
    let (a, b) = (records[0].setting_a, records[0].setting_b);
    let rate = |x, y| -> Result<f64> {
        let r = find(records, x, y)?;
        r.validate()?;
        Ok(((r.coincidences - background * r.duration_s) / r.duration_s).max(0.0))
    };
    let max = rate(a, b)? + rate(a.orthogonal(), b.orthogonal())?;
    let min = rate(a, b.orthogonal())? + rate(a.orthogonal(), b)?;
    if max + min <= 0.0 {
        return Err(Error::Undefined("no coincidences left after background subtraction".into()));
    }
    Ok((max - min) / (max + min))
}

pub fn raw_visibility(records: &[CountRecord]) -> Result<f64> {
    corrected_visibility(records, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use AnalyzerSetting::*;

    fn rec(a: AnalyzerSetting, b: AnalyzerSetting, n: f64) -> CountRecord {
        CountRecord {
            setting_a: a,
            setting_b: b,
            duration_s: 10.0,
            coincidences: n,
            triggers: 1e6,
        }
    }

    fn set(bg_each: f64) -> Vec<CountRecord> {
        vec![rec(H, H, 1000.0 + bg_each), rec(H, V, 20.0 + bg_each), rec(V, H, 30.0 + bg_each), rec(V, V, 950.0 + bg_each)]
    }

    #[test]
    fn zero_background_is_raw() {
        let r = set(0.0);
        assert_eq!(corrected_visibility(&r, 0.0).unwrap(), raw_visibility(&r).unwrap());
        assert_eq!(raw_visibility(&r).unwrap(), (1950.0 - 50.0) / 2000.0);
    }

    #[test]
    fn subtracts_background_rate() {
        let r = set(50.0);
        let v = corrected_visibility(&r, 5.0).unwrap();
        assert!((v - 0.95).abs() < 1e-12);
        assert!(raw_visibility(&r).unwrap() < v);
    }

    #[test]
    fn all_background_is_undefined() {
        let r = set(0.0);
        assert!(matches!(corrected_visibility(&r, 1e6), Err(Error::Undefined(_))));
    }

    #[test]
    fn order_independent_and_validated() {
        let mut r = set(0.0);
        r.swap(1, 3);
        assert!((raw_visibility(&r).unwrap() - 0.95).abs() < 1e-12);
        let mut bad = set(0.0);
        bad[2].coincidences = 2e6;
        assert!(raw_visibility(&bad).is_err());
        assert!(raw_visibility(&r[..3]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = set(1.5);
        let mut buf = Vec::new();
        write_records(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("setting_a,setting_b,duration_s,coincidences,triggers\n"));
        assert_eq!(read_records(&buf[..]).unwrap(), r);
        let lab = "setting_a,setting_b,duration_s,coincidences,triggers\n+,-,10,3,100\n";
        let parsed = read_records(lab.as_bytes()).unwrap();
        assert_eq!((parsed[0].setting_a, parsed[0].setting_b), (D, A));
    }
}
