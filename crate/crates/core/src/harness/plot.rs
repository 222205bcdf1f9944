use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::table::{ResultRow, ResultTable};
use crate::error::{Error, Result};
use crate::io;

fn write_series(path: &Path, header: &str, points: &[(usize, f64)]) -> Result<()> {
    let mut text = format!("{header}\n");
    for (x, y) in points {
        text.push_str(&format!("{x},{y:?}\n"));
    }
    io::write_atomic(path, text.as_bytes())
}

/// Writes CSV series for external plotting under `dir`:
/// `n_osc/navg<a>_m<m>.csv` (n_osc vs sup_w2) for every (n_avg, m) and
/// `m/navg<a>_nosc<n>.csv` (m vs max_fit_err) for every (n_avg, n_osc).
/// Failed rows are left out. Returns the files written.
pub fn emit_plot_data(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(Error::Domain("cannot emit plot data for an empty table".into()));
    }
    let mut by_osc: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    let mut by_m: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for r in table.rows().iter().filter(|r| r.status.completed()) {
        let ResultRow { n_avg, m, n_osc, .. } = *r;
        if let Some(s) = r.sup_w2 {
            by_osc.entry((n_avg, m)).or_default().push((n_osc, s));
        }
        if let Some(e) = r.max_fit_err {
            by_m.entry((n_avg, n_osc)).or_default().push((m, e));
        }
    }
    let mut files = Vec::new();
    for ((a, m), mut pts) in by_osc {
        pts.sort_by_key(|p| p.0);
        let path = dir.join("n_osc").join(format!("navg{a}_m{m}.csv"));
        write_series(&path, "n_osc,sup_w2", &pts)?;
        files.push(path);
    }
    for ((a, n), mut pts) in by_m {
        pts.sort_by_key(|p| p.0);
        let path = dir.join("m").join(format!("navg{a}_nosc{n}.csv"));
        write_series(&path, "m,max_fit_err", &pts)?;
        files.push(path);
    }
    Ok(files)
}
