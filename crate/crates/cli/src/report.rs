//! One row per run; written as CSV and as an aligned text table.

use std::io::{Read, Write};

use anyhow::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub trace: String,
    pub n: usize,
    pub events: usize,
    /// Chains in the uniflow partition; empty for the other algorithms.
    pub n_u: Option<usize>,
    pub ranks: String,
    pub cuts_visited: u64,
    /// `cut@rank` of the first predicate match.
    pub first_match: Option<String>,
    pub wall_ms: f64,
    pub peak_stored: u64,
    pub partition_ms: Option<f64>,
    /// Lowest rank at which the algorithm did any work.
    pub lowest_rank_touched: Option<usize>,
    /// `ok`, `out-of-memory`, `too-large`, or `error: <message>`.
    pub status: String,
}

pub fn write_csv<W: Write>(out: W, rows: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunReport>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_table<W: Write>(mut out: W, rows: &[RunReport]) -> Result<()> {
    let header = [
        "trace",
        "algorithm",
        "ranks",
        "n",
        "|E|",
        "n_u",
        "cuts",
        "peak",
        "T_part ms",
        "T ms",
        "status",
    ];
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.trace.clone(),
                r.algorithm.clone(),
                r.ranks.clone(),
                r.n.to_string(),
                r.events.to_string(),
                opt(r.n_u.map(|v| v.to_string())),
                r.cuts_visited.to_string(),
                r.peak_stored.to_string(),
                opt(r.partition_ms.map(|v| format!("{v:.3}"))),
                format!("{:.3}", r.wall_ms),
                r.status.clone(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap()
        })
        .collect();
    let line = |vals: Vec<&str>| -> String {
        let padded: Vec<String> = vals
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for c in &cells {
        writeln!(out, "{}", line(c.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            RunReport {
                algorithm: "uniflow".into(),
                trace: "six, copy".into(),
                n: 2,
                events: 6,
                n_u: Some(2),
                ranks: "0..6".into(),
                cuts_visited: 12,
                first_match: Some("[2,2]@4".into()),
                wall_ms: 0.123456789,
                peak_stored: 3,
                partition_ms: Some(1e-3),
                lowest_rank_touched: Some(0),
                status: "ok".into(),
            },
            RunReport {
                algorithm: "traditional".into(),
                status: "out-of-memory".into(),
                ..Default::default()
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn table_has_a_row_per_report() {
        let mut buf = Vec::new();
        write_table(&mut buf, &[RunReport::default(), RunReport::default()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
