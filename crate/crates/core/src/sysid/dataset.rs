use super::SysidError;
use crate::Error;
use std::path::Path;

/// Uniformly sampled time series with named channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    time: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

const TIME: &str = "time";

impl Dataset {
    pub fn new(time: Vec<f64>) -> Result<Self, SysidError> {
        check_time(&time)?;
        Ok(Self {
            time,
            names: Vec::new(),
            columns: Vec::new(),
        })
    }

    /// Evenly spaced time vector starting at zero.
    pub fn with_rate(samples: usize, rate_hz: f64) -> Result<Self, SysidError> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(SysidError::Invalid("sample rate must be positive".into()));
        }
        Self::new((0..samples).map(|k| k as f64 / rate_hz).collect())
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    /// Sample interval (s).
    pub fn dt(&self) -> f64 {
        if self.time.len() < 2 {
            return 0.0;
        }
        (self.time[self.time.len() - 1] - self.time[0]) / (self.time.len() - 1) as f64
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], SysidError> {
        self.channel(name)
            .ok_or_else(|| SysidError::MissingChannel(name.to_string()))
    }

    /// Adds or replaces a channel.
    pub fn set_channel(&mut self, name: &str, values: Vec<f64>) -> Result<(), SysidError> {
        if name == TIME || name.is_empty() {
            return Err(SysidError::Invalid(format!("invalid channel name {name:?}")));
        }
        if values.len() != self.time.len() {
            return Err(SysidError::Invalid(format!(
                "channel {name} has {} samples, expected {}",
                values.len(),
                self.time.len()
            )));
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = values,
            None => {
                self.names.push(name.to_string());
                self.columns.push(values);
            }
        }
        Ok(())
    }

    /// Samples `start..end` with time re-based to zero.
    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset, SysidError> {
        if start >= end || end > self.len() {
            return Err(SysidError::Invalid("empty or out-of-range slice".into()));
        }
        let t0 = self.time[start];
        let mut out = Dataset::new(self.time[start..end].iter().map(|t| t - t0).collect())?;
        for (n, c) in self.names.iter().zip(&self.columns) {
            out.set_channel(n, c[start..end].to_vec())?;
        }
        Ok(out)
    }

    pub fn to_csv_string(&self) -> Result<String, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![TIME.to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.time[k])];
            row.extend(self.columns.iter().map(|c| format!("{}", c[k])));
            w.write_record(&row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses CSV text with a `time` column first and one column per channel.
    pub fn parse_csv(text: &str) -> Result<Dataset, Error> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some(TIME) {
            return Err(SysidError::Invalid("first column must be `time`".into()).into());
        }
        for (i, h) in header.iter().enumerate() {
            if header[..i].contains(h) {
                return Err(SysidError::Invalid(format!("duplicate column {h}")).into());
            }
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(SysidError::Invalid("ragged row".into()).into());
            }
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| SysidError::Invalid(format!("bad number {field:?}")))?;
                if !v.is_finite() {
                    return Err(SysidError::Invalid("non-finite value".into()).into());
                }
                cols[i].push(v);
            }
        }
        let mut cols = cols.into_iter();
        let mut ds = Dataset::new(cols.next().unwrap_or_default())?;
        for (name, c) in header[1..].iter().zip(cols) {
            ds.set_channel(name, c)?;
        }
        Ok(ds)
    }

    pub fn read_csv(path: &Path) -> Result<Dataset, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }
}

fn check_time(time: &[f64]) -> Result<(), SysidError> {
    if time.len() < 2 {
        return Err(SysidError::Invalid("dataset needs at least two samples".into()));
    }
    if time.iter().any(|t| !t.is_finite()) {
        return Err(SysidError::Invalid("non-finite time stamp".into()));
    }
    let dt = (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(SysidError::Invalid("time must increase".into()));
    }
    for w in time.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt + 1e-9 {
            return Err(SysidError::Invalid("time vector is not uniformly sampled".into()));
        }
    }
    Ok(())
}
