//! Dataset container: CSV IO, fixed 70/10/20 chronological splits,
//! train-split standardization, and split-confined window extraction.

use crate::error::{io_data, Error, Result};
use crate::point::SeriesWindow;
use ndarray::Array2;
use std::fmt::Write as _;
use std::path::Path;

/// Raw multivariate series plus split boundaries and the standardization
/// statistics frozen from the training split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub timestamps: Vec<String>,
    /// Raw values, `(T, d)`.
    pub values: Array2<f64>,
    pub names: Vec<String>,
    /// Rows `[0, train_end)` train, `[train_end, val_end)` validation,
    /// `[val_end, T)` test.
    pub train_end: usize,
    pub val_end: usize,
    /// Per-variate mean over the training split.
    pub mean: Vec<f64>,
    /// Per-variate population standard deviation over the training split,
    /// floored at 1e-9.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Dataset {
    /// Build from raw values; computes splits and training statistics.
    pub fn from_values(
        timestamps: Vec<String>,
        names: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Dataset> {
        let (t, d) = values.dim();
        if d == 0 {
            return Err(Error::Data("dataset has no variates".into()));
        }
        if timestamps.len() != t {
            return Err(Error::Data(
                "timestamp count does not match row count".into(),
            ));
        }
        if names.len() != d {
            return Err(Error::Data(
                "variate name count does not match column count".into(),
            ));
        }
        let train_end = (t as f64 * 0.7).floor() as usize;
        let val_end = (t as f64 * 0.8).floor() as usize;
        if train_end < 2 {
            return Err(Error::Data(format!(
                "dataset too short: {t} rows leave a training split of {train_end}"
            )));
        }
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = (0..train_end).map(|i| values[[i, j]]).collect();
            mean[j] = crate::stats::mean(&col);
            std[j] = crate::stats::std_pop(&col).max(1e-9);
        }
        Ok(Dataset {
            timestamps,
            values,
            names,
            train_end,
            val_end,
            mean,
            std,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.dim().0
    }

    pub fn variates(&self) -> usize {
        self.values.dim().1
    }

    /// Raw values standardized by the training-split statistics.
    pub fn standardized(&self) -> Array2<f64> {
        let (t, d) = self.values.dim();
        Array2::from_shape_fn((t, d), |(i, j)| {
            (self.values[[i, j]] - self.mean[j]) / self.std[j]
        })
    }

    fn split_range(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => (0, self.train_end),
            Split::Val => (self.train_end, self.val_end),
            Split::Test => (self.val_end, self.rows()),
        }
    }

    /// Standardized windows fully contained in `split`; a window never
    /// straddles a split boundary.
    pub fn windows(
        &self,
        split: Split,
        history: usize,
        horizon: usize,
        stride: usize,
    ) -> Vec<SeriesWindow> {
        self.windows_using(&self.mean, &self.std, split, history, horizon, stride)
    }

    /// Like [`windows`](Self::windows) but standardizing with caller-supplied
    /// statistics. A fitted model carries the statistics of its own training
    /// split, and those must be applied to any series it later scores,
    /// not the statistics of the new file.
    pub fn windows_using(
        &self,
        mean: &[f64],
        std: &[f64],
        split: Split,
        history: usize,
        horizon: usize,
        stride: usize,
    ) -> Vec<SeriesWindow> {
        assert!(history >= 1 && horizon >= 1 && stride >= 1);
        assert_eq!(mean.len(), self.variates());
        assert_eq!(std.len(), self.variates());
        let (t, d) = self.values.dim();
        let z = Array2::from_shape_fn((t, d), |(i, j)| (self.values[[i, j]] - mean[j]) / std[j]);
        let (start, end) = self.split_range(split);
        let mut out = Vec::new();
        let span = history + horizon;
        if end < start + span {
            return out;
        }
        let mut t = start;
        while t + span <= end {
            let x = z.slice(ndarray::s![t..t + history, ..]).to_owned();
            let y = z.slice(ndarray::s![t + history..t + span, ..]).to_owned();
            out.push(SeriesWindow { x, y });
            t += stride;
        }
        out
    }

    /// Map a standardized value back to raw units for variate `j`.
    pub fn destandardize(&self, j: usize, v: f64) -> f64 {
        v * self.std[j] + self.mean[j]
    }

    /// Read a CSV with a timestamp column followed by numeric variate
    /// columns. A header row is detected by its second field failing to
    /// parse as a number.
    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| io_data(&format!("{}", path.display()), e))?;
        parse_csv(&text, &path.display().to_string())
    }

    /// Write the raw values back out; numbers use the shortest
    /// representation that round-trips exactly.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("timestamp");
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.rows() {
            out.push_str(&self.timestamps[i]);
            for j in 0..self.variates() {
                let _ = write!(out, ",{}", self.values[[i, j]]);
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| io_data(&format!("{}", path.display()), e))
    }
}

fn parse_csv(text: &str, origin: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().peekable();
    let Some(&(_, first)) = lines.peek() else {
        return Err(Error::Data(format!("{origin}: empty file")));
    };
    let first_fields: Vec<&str> = first.split(',').collect();
    if first_fields.len() < 2 {
        return Err(Error::Data(format!(
            "{origin}: need a timestamp column plus at least one variate column"
        )));
    }
    let has_header = first_fields[1].trim().parse::<f64>().is_err();
    let names: Vec<String> = if has_header {
        lines.next();
        first_fields[1..]
            .iter()
            .map(|s| s.trim().to_string())
            .collect()
    } else {
        (0..first_fields.len() - 1)
            .map(|j| format!("v{j}"))
            .collect()
    };
    let d = names.len();
    let mut timestamps = Vec::new();
    let mut flat: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::Data(format!(
                "{origin}: line {}: expected {} fields, found {}",
                lineno + 1,
                d + 1,
                fields.len()
            )));
        }
        timestamps.push(fields[0].trim().to_string());
        for (col, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{origin}: line {}: column {}: cannot parse '{}'",
                    lineno + 1,
                    col + 2,
                    field.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{origin}: line {}: column {}: non-finite value",
                    lineno + 1,
                    col + 2
                )));
            }
            flat.push(v);
        }
    }
    let t = timestamps.len();
    let values = Array2::from_shape_vec((t, d), flat).expect("row-major fill");
    Dataset::from_values(timestamps, names, values)
}
