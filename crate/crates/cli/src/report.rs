//! Merges result records of a directory into a text report and plot-data
//! CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use p2dyn::record::Record;

use crate::{io_err, CliError, CliResult, Output, ReportArgs};

pub const HISTOGRAM_BINS: usize = 40;

/// Records of every `*.jsonl` file in `dir`, files in name order.
pub fn read_records(dir: &Path) -> CliResult<Vec<(String, Record)>> {
    let mut files = list(dir, ".jsonl")?;
    files.sort();
    let mut records = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let source = file_name(&path);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r = Record::from_line(line)
                .map_err(|e| CliError::Usage(format!("malformed record {source}:{}: {e}", i + 1)))?;
            records.push((source.clone(), r));
        }
    }
    if records.is_empty() {
        return Err(CliError::Usage(format!("no result records in {}", dir.display())));
    }
    Ok(records)
}

fn list(dir: &Path, suffix: &str) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::Usage(e.to_string()))?.path();
        if path.is_file() && file_name(&path).ends_with(suffix) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// A CSV table kept in memory until written.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    fn write(&self, path: &Path) -> CliResult<()> {
        let csv_err = |e: csv::Error| CliError::Operation {
            op: format!("write {}", path.display()),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))
    }
}

fn s<T: ToString>(x: T) -> String {
    x.to_string()
}

/// Summary tables built from the records alone.
pub fn record_tables(records: &[(String, Record)]) -> BTreeMap<&'static str, Table> {
    let mut lyap = Table::new(&["source", "map", "lambda1", "se1", "lambda2", "se2", "sum_via_det", "n", "N", "seed"]);
    let mut decay = Table::new(&[
        "source",
        "map",
        "orbits",
        "n",
        "prefactor_slope",
        "prefactor_expected",
        "band_constant",
        "band_oscillation_median",
        "band_orbit_fraction",
        "band_ok",
        "ratio",
        "resonance",
        "floor_fraction",
    ]);
    let mut pairs = Table::new(&["source", "name", "test_function", "lhs", "lhs_error", "rhs", "rhs_error", "pass"]);
    let mut checks = Table::new(&["source", "name", "anchor", "passed", "detail"]);
    let mut green = Table::new(&["source", "map", "re0", "im0", "re1", "im1", "re2", "im2", "value", "residual"]);
    for (src, r) in records {
        match r {
            Record::Lyapunov(l) => lyap.push([
                src.clone(),
                l.map.clone(),
                s(l.lambda1),
                s(l.se1),
                s(l.lambda2),
                s(l.se2),
                s(l.sum_via_det),
                s(l.n),
                s(l.count),
                s(l.seed),
            ]),
            Record::Orbit(o) => decay.push([
                src.clone(),
                o.map.clone(),
                s(o.orbits),
                s(o.n),
                s(o.decay.prefactor_slope),
                s(o.decay.prefactor_expected),
                s(o.decay.band_constant),
                s(o.decay.band_oscillation_median),
                s(o.decay.band_orbit_fraction),
                s(o.decay.band_ok),
                s(o.decay.ratio),
                format!("{:?}", o.decay.resonance),
                s(o.floor_fraction),
            ]),
            Record::Verdict(v) => pairs.push([
                src.clone(),
                v.operation.clone(),
                v.test_function.clone(),
                s(v.verdict.lhs),
                s(v.verdict.lhs_error),
                s(v.verdict.rhs),
                s(v.verdict.rhs_error),
                s(v.verdict.pass),
            ]),
            Record::Pairing(p) => pairs.push([
                src.clone(),
                p.name.clone(),
                p.parameters.to_string(),
                s(p.value),
                s(p.error_estimate),
                String::new(),
                String::new(),
                String::new(),
            ]),
            Record::Check(c) => checks.push([src.clone(), c.name.clone(), c.anchor.clone(), s(c.passed), c.detail.clone()]),
            Record::Green(g) => {
                let mut row = vec![src.clone(), g.map.clone()];
                row.extend(g.point.iter().map(|x| s(x)));
                row.extend([s(g.value), s(g.residual)]);
                green.push(row)
            }
            Record::Cloud(_) => {}
        }
    }
    let mut out = BTreeMap::new();
    for (name, t) in [
        ("lyapunov_summary.csv", lyap),
        ("decay_summary.csv", decay),
        ("pairings.csv", pairs),
        ("checks.csv", checks),
        ("green_values.csv", green),
    ] {
        if !t.rows.is_empty() {
            out.insert(name, t);
        }
    }
    out
}

fn read_csv(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn malformed(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("malformed {}: {e}", path.display()))
}

/// Histogram of per-point exponents from every `*-points.csv`.
pub fn histogram_table(dir: &Path) -> CliResult<Table> {
    let mut t = Table::new(&["source", "exponent", "bin_lo", "bin_hi", "count"]);
    for path in list(dir, "-points.csv")? {
        let mut l1 = Vec::new();
        let mut l2 = Vec::new();
        for row in read_csv(&path)?.deserialize::<(usize, f64, f64)>() {
            let (_, a, b) = row.map_err(malformed(&path))?;
            l1.push(a);
            l2.push(b);
        }
        for (label, xs) in [("lambda1", &l1), ("lambda2", &l2)] {
            if xs.is_empty() {
                continue;
            }
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
            let mut counts = [0usize; HISTOGRAM_BINS];
            for x in xs {
                counts[(((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1)] += 1;
            }
            for (k, c) in counts.iter().enumerate() {
                let a = lo + k as f64 * width;
                t.push([file_name(&path), label.to_owned(), s(a), s(a + width), s(c)]);
            }
        }
    }
    Ok(t)
}

/// Mean `Log s_min` and `Log s_max` against `n` from every `*-profiles.csv`.
pub fn contraction_table(dir: &Path) -> CliResult<Table> {
    let mut t = Table::new(&["source", "n", "mean_log_s_min", "mean_log_s_max", "orbits"]);
    for path in list(dir, "-profiles.csv")? {
        let mut acc: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
        for row in read_csv(&path)?.deserialize::<(usize, usize, f64, f64)>() {
            let (_, n, a, b) = row.map_err(malformed(&path))?;
            let e = acc.entry(n).or_insert((0.0, 0.0, 0));
            e.0 += a.ln();
            e.1 += b.ln();
            e.2 += 1;
        }
        for (n, (a, b, k)) in acc {
            t.push([file_name(&path), s(n), s(a / k as f64), s(b / k as f64), s(k)]);
        }
    }
    Ok(t)
}

fn summary(records: &[(String, Record)], tables: &BTreeMap<&'static str, Table>) -> String {
    let mut text = String::new();
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, r) in records {
        let k = match r {
            Record::Green(_) => "green",
            Record::Cloud(_) => "cloud",
            Record::Lyapunov(_) => "lyapunov",
            Record::Orbit(_) => "orbit",
            Record::Pairing(_) => "pairing",
            Record::Verdict(_) => "verdict",
            Record::Check(_) => "check",
        };
        *kinds.entry(k).or_default() += 1;
    }
    let _ = writeln!(text, "records: {}", records.len());
    for (k, n) in &kinds {
        let _ = writeln!(text, "  {k}: {n}");
    }
    for (_, r) in records {
        match r {
            Record::Lyapunov(l) => {
                let _ = writeln!(
                    text,
                    "lyapunov {}: λ₁ = {:.6} ± {:.1e}, λ₂ = {:.6} ± {:.1e}, n = {}, N = {}",
                    l.map, l.lambda1, l.se1, l.lambda2, l.se2, l.n, l.count
                );
            }
            Record::Orbit(o) => {
                let _ = writeln!(
                    text,
                    "orbit {}: prefactor slope {:.4}, band C = {:.3}, {:?}, floor on {:.1}%",
                    o.map,
                    o.decay.prefactor_slope,
                    o.decay.band_constant,
                    o.decay.resonance,
                    100.0 * o.floor_fraction
                );
            }
            Record::Check(c) => {
                let _ = writeln!(
                    text,
                    "[{}] {} ({}): {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.anchor,
                    c.detail
                );
            }
            Record::Verdict(v) => {
                let _ = writeln!(
                    text,
                    "[{}] {}[{}]: lhs {:.8}, rhs {:.8}",
                    if v.verdict.pass { "PASS" } else { "FAIL" },
                    v.operation,
                    v.test_function,
                    v.verdict.lhs,
                    v.verdict.rhs
                );
            }
            _ => {}
        }
    }
    let _ = writeln!(text, "tables: {}", tables.keys().copied().collect::<Vec<_>>().join(", "));
    text
}

pub fn run(a: &ReportArgs, out: &Output) -> CliResult<()> {
    let records = read_records(&a.dir)?;
    let mut tables = record_tables(&records);
    for (name, t) in [
        ("exponent_histogram.csv", histogram_table(&a.dir)?),
        ("contraction_vs_n.csv", contraction_table(&a.dir)?),
    ] {
        if !t.rows.is_empty() {
            tables.insert(name, t);
        }
    }
    let dest = out.dir.clone().unwrap_or_else(|| a.dir.clone());
    std::fs::create_dir_all(&dest).map_err(io_err(&dest))?;
    for (name, t) in &tables {
        t.write(&dest.join(name))?;
    }
    let text = summary(&records, &tables);
    print!("{text}");
    let path = dest.join("report.txt");
    std::fs::write(&path, text).map_err(io_err(&path))
}
