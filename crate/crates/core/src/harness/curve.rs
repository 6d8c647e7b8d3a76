use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub step: u64,
    pub mean_eval_return: f64,
    /// Sum of environment rewards collected in training so far (no bonus).
    pub cumulative_env_reward: f64,
    pub novel_state_count: u64,
    /// Bonus actually paid into stored rewards so far.
    pub cumulative_exploration_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<CurveRecord>,
}

pub(crate) const CURVE_HEADER: [&str; 5] = [
    "step",
    "mean_eval_return",
    "cumulative_env_reward",
    "novel_state_count",
    "cumulative_exploration_reward",
];

/// Scientific notation with 17 significant digits, enough to round-trip.
pub(crate) fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl LearningCurve {
    pub fn steps(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.step).collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_eval_return).collect()
    }

    pub fn last(&self) -> Option<&CurveRecord> {
        self.records.last()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CURVE_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.step.to_string(),
                fmt_float(r.mean_eval_return),
                fmt_float(r.cumulative_env_reward),
                r.novel_state_count.to_string(),
                fmt_float(r.cumulative_exploration_reward),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Parses CSV produced by [`LearningCurve::write_to`]; the header must
    /// match exactly.
    pub fn read_from<R: Read>(r: R) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(CURVE_HEADER) {
            return Err(csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
            )));
        }
        let records = rdr.deserialize().collect::<Result<Vec<CurveRecord>, _>>()?;
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|source| HarnessError::Csv {
                path: path.to_path_buf(),
                source,
            })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
    }
}
