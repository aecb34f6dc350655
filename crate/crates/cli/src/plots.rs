//! Sweep tables to SVG charts.

use std::fs;
use std::path::{Path, PathBuf};

use fragrd_core::sweep::{format_number, SweepResult};

use crate::svg::{Chart, Series};
use crate::CliError;

/// One `s,intensity,t,P,R,flux` line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub s: u64,
    pub intensity: f64,
    pub t: f64,
    pub population: f64,
    pub annual_yield: Option<f64>,
}

pub fn rows_of(result: &SweepResult) -> Vec<Row> {
    result
        .rows
        .iter()
        .map(|r| Row {
            s: r.s,
            intensity: r.intensity,
            t: r.t,
            population: r.population,
            annual_yield: r.annual_yield,
        })
        .collect()
}

/// Reads a sweep CSV, skipping `#` lines.
pub fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (cs, ci, ct, cp, cr) = (column("s")?, column("intensity")?, column("t")?, column("P")?, column("R")?);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: `{}` is not a number", line + 1, field(i))))
        };
        rows.push(Row {
            s: field(cs)
                .parse()
                .map_err(|_| bad(format!("row {}: bad s `{}`", line + 1, field(cs))))?,
            intensity: num(ci)?,
            t: num(ct)?,
            population: num(cp)?,
            annual_yield: if field(cr).is_empty() { None } else { Some(num(cr)?) },
        });
    }
    if rows.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(rows)
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Per-landscape series at time `t`, in order of first appearance.
fn curves(rows: &[Row], t: f64, value: impl Fn(&Row) -> Option<(f64, f64)>) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for row in rows.iter().filter(|r| same_time(r.t, t)) {
        let Some(point) = value(row) else { continue };
        match out.iter_mut().find(|c| c.s == row.s) {
            Some(c) => c.points.push(point),
            None => out.push(Series {
                s: row.s,
                points: vec![point],
            }),
        }
    }
    out
}

fn distinct_times(rows: &[Row]) -> Vec<f64> {
    let mut times: Vec<f64> = Vec::new();
    for r in rows {
        if !times.iter().any(|&t| same_time(t, r.t)) {
            times.push(r.t);
        }
    }
    times
}

/// Writes `population_t*.svg`, `yield_t*.svg` and `pr_t*.svg` for every
/// observation time (the last two only where `R` is defined).
pub fn write_plots(rows: &[Row], intensity_label: &str, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for t in distinct_times(rows) {
        let tag = format_number(t);
        let mut charts = vec![(
            format!("population_t{tag}.svg"),
            Chart {
                title: format!("P({tag}) against {intensity_label}"),
                x_label: intensity_label.into(),
                y_label: format!("P({tag}) [individuals]"),
                series: curves(rows, t, |r| Some((r.intensity, r.population))),
            },
        )];
        let yields = curves(rows, t, |r| r.annual_yield.map(|y| (r.intensity, y)));
        if !yields.is_empty() {
            charts.push((
                format!("yield_t{tag}.svg"),
                Chart {
                    title: format!("R({tag}) against {intensity_label}"),
                    x_label: intensity_label.into(),
                    y_label: format!("R({tag}) [individuals/year]"),
                    series: yields,
                },
            ));
            charts.push((
                format!("pr_t{tag}.svg"),
                Chart {
                    title: format!("P({tag}) against R({tag})"),
                    x_label: format!("R({tag}) [individuals/year]"),
                    y_label: format!("P({tag}) [individuals]"),
                    series: curves(rows, t, |r| r.annual_yield.map(|y| (y, r.population))),
                },
            ));
        }
        for (name, chart) in charts {
            let path = dir.join(name);
            fs::write(&path, chart.render()).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_grouping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(
            &path,
            "# comment\ns,intensity,t,P,R,flux\n10,0,0.5,9,,1\n10,0,5,9,0,1\n20,0,5,8,1,1\n10,1,5,7,2,1\n",
        )
        .unwrap();
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].annual_yield, None);
        let c = curves(&rows, 5.0, |r| Some((r.intensity, r.population)));
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].points, vec![(0.0, 9.0), (1.0, 7.0)]);
        let files = write_plots(&rows, "quota", dir.path()).unwrap();
        // t = 0.5 has no yield column, t = 5 has all three charts.
        assert_eq!(files.len(), 4);
    }

    #[test]
    fn missing_column_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "s,intensity,t,P\n1,0,5,1\n").unwrap();
        assert!(matches!(read_csv(&path), Err(CliError::Config(_))));
    }
}
