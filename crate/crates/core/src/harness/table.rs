use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const RESULTS_HEADER: &str = "n_avg,m,n_osc,sup_w2,final_w2,max_fit_err,pieces,wall_s,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// Completed, but some window fit missed the tolerance δ.
    ToleranceMiss,
    Failed,
}

impl RowStatus {
    pub fn completed(self) -> bool {
        self != RowStatus::Failed
    }
}

/// One sweep point. Metric columns are empty for failed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n_avg: usize,
    pub m: usize,
    pub n_osc: usize,
    pub sup_w2: Option<f64>,
    pub final_w2: Option<f64>,
    pub max_fit_err: Option<f64>,
    pub pieces: Option<usize>,
    pub wall_s: f64,
    pub status: RowStatus,
}

impl ResultRow {
    pub fn coords(&self) -> (usize, usize, usize) {
        (self.n_avg, self.m, self.n_osc)
    }

    pub fn key(&self) -> String {
        row_key(self.coords())
    }

    pub fn failed(coords: (usize, usize, usize), wall_s: f64) -> Self {
        Self {
            n_avg: coords.0,
            m: coords.1,
            n_osc: coords.2,
            sup_w2: None,
            final_w2: None,
            max_fit_err: None,
            pieces: None,
            wall_s,
            status: RowStatus::Failed,
        }
    }
}

/// Directory name of a sweep point under `rows/`.
pub fn row_key((n_avg, m, n_osc): (usize, usize, usize)) -> String {
    format!("navg{n_avg}_m{m}_nosc{n_osc}")
}

/// Rows ordered by sweep coordinates, at most one per coordinate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = ResultRow>) -> Self {
        let mut t = Self::new();
        for r in rows {
            t.insert(r);
        }
        t
    }

    /// Inserts or replaces the row with the same coordinates.
    pub fn insert(&mut self, row: ResultRow) {
        match self.rows.binary_search_by_key(&row.coords(), ResultRow::coords) {
            Ok(i) => self.rows[i] = row,
            Err(i) => self.rows.insert(i, row),
        }
    }

    pub fn get(&self, coords: (usize, usize, usize)) -> Option<&ResultRow> {
        self.rows
            .binary_search_by_key(&coords, ResultRow::coords)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// 0 when every row completed, 2 when all failed, 3 when some failed.
    pub fn exit_code(&self) -> i32 {
        let failed = self.rows.iter().filter(|r| !r.status.completed()).count();
        if failed == 0 {
            0
        } else if failed == self.rows.len() {
            2
        } else {
            3
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(RESULTS_HEADER.split(','))?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| Error::Domain(format!("csv buffer: {e}")))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != RESULTS_HEADER {
            return Err(Error::Domain(format!("unexpected results header {:?}", header.join(","))));
        }
        let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, &self.to_csv()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&bytes)
    }
}

/// `results.csv` text with the wall-clock column blanked, for reproducibility checks.
pub fn strip_wall_clock(csv_text: &str) -> String {
    let col = RESULTS_HEADER.split(',').position(|c| c == "wall_s").unwrap();
    csv_text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                return line.to_string();
            }
            let mut cells: Vec<&str> = line.split(',').collect();
            if col < cells.len() {
                cells[col] = "";
            }
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: (usize, usize, usize), sup: f64) -> ResultRow {
        ResultRow {
            n_avg: c.0,
            m: c.1,
            n_osc: c.2,
            sup_w2: Some(sup),
            final_w2: Some(sup / 2.0),
            max_fit_err: Some(0.01),
            pieces: Some(c.0 * c.1 * c.2),
            wall_s: 0.25,
            status: RowStatus::Ok,
        }
    }

    #[test]
    fn rows_are_ordered_and_unique() {
        let mut t = ResultTable::from_rows([row((1, 8, 4), 0.1), row((1, 4, 16), 0.2), row((1, 8, 1), 0.3)]);
        t.insert(row((1, 8, 4), 0.05));
        let coords: Vec<_> = t.rows().iter().map(ResultRow::coords).collect();
        assert_eq!(coords, vec![(1, 4, 16), (1, 8, 1), (1, 8, 4)]);
        assert_eq!(t.get((1, 8, 4)).unwrap().sup_w2, Some(0.05));
    }

    #[test]
    fn csv_roundtrip_and_header() {
        let mut t = ResultTable::from_rows([row((2, 16, 8), 0.123456789012345)]);
        t.insert(ResultRow::failed((1, 1, 1), 0.5));
        let bytes = t.to_csv().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "1,1,1,,,,,0.5,failed");
        assert_eq!(ResultTable::from_csv(&bytes).unwrap(), t);
        assert!(ResultTable::from_csv(b"a,b\n1,2\n").is_err());
        let empty = ResultTable::new().to_csv().unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), RESULTS_HEADER);
    }

    #[test]
    fn exit_codes() {
        let ok = ResultTable::from_rows([row((1, 1, 1), 0.0)]);
        assert_eq!(ok.exit_code(), 0);
        let mut some = ok.clone();
        some.insert(ResultRow::failed((1, 1, 2), 0.0));
        assert_eq!(some.exit_code(), 3);
        let all = ResultTable::from_rows([ResultRow::failed((1, 1, 2), 0.0)]);
        assert_eq!(all.exit_code(), 2);
    }

    #[test]
    fn wall_clock_is_blanked() {
        let a = "n_avg,m,n_osc,sup_w2,final_w2,max_fit_err,pieces,wall_s,status\n1,2,3,0.1,0.2,0.3,6,1.5,ok\n";
        let b = a.replace("1.5", "9.75");
        assert_eq!(strip_wall_clock(a), strip_wall_clock(&b));
    }
}
