use std::path::Path;

use chrono::NaiveDate;

use super::CorpusError;

/// Open prices for one asset, one row per market-open date, strictly
/// ascending in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub asset: String,
    pub entries: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(asset: String, mut entries: Vec<(NaiveDate, f64)>) -> Result<Self, CorpusError> {
        entries.sort_by_key(|(d, _)| *d);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(CorpusError::Malformed {
                    path: asset.clone(),
                    line: 0,
                    message: format!("duplicate date {}", pair[0].0),
                });
            }
        }
        if let Some((d, p)) = entries.iter().find(|(_, p)| *p <= 0.0) {
            return Err(CorpusError::Malformed {
                path: asset.clone(),
                line: 0,
                message: format!("non-positive open {p} on {d}"),
            });
        }
        Ok(PriceSeries { asset, entries })
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.entries.iter().map(|(d, _)| *d)
    }

    pub fn open_on(&self, date: NaiveDate) -> Option<f64> {
        self.entries
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Load a `date,open` CSV. Rows may arrive out of order and are sorted;
/// duplicate dates, non-positive prices, and unparseable rows are hard
/// errors naming the offending line.
pub fn load_prices(path: &Path) -> Result<PriceSeries, CorpusError> {
    let asset = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;

    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let record = record.map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| CorpusError::Malformed {
            path: path.display().to_string(),
            line,
            message,
        };
        if record.len() < 2 {
            return Err(bad(format!("expected `date,open`, got {} fields", record.len())));
        }
        let date: NaiveDate = record[0]
            .parse()
            .map_err(|e| bad(format!("bad date {:?}: {e}", &record[0])))?;
        let open: f64 = record[1]
            .parse()
            .map_err(|e| bad(format!("bad open {:?}: {e}", &record[1])))?;
        if open <= 0.0 {
            return Err(bad(format!("non-positive open {open}")));
        }
        entries.push((date, open));
    }
    let mut sorted = entries.clone();
    sorted.sort_by_key(|(d, _)| *d);
    for pair in sorted.windows(2) {
        if pair[0].0 == pair[1].0 {
            let line = entries.iter().position(|e| e.0 == pair[0].0).unwrap() + 2;
            return Err(CorpusError::Malformed {
                path: path.display().to_string(),
                line,
                message: format!("duplicate date {}", pair[0].0),
            });
        }
    }
    PriceSeries::new(asset, entries)
}
