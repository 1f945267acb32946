use super::{io_err, read_pairs, write_json, HarnessError, Stage};
use crate::metrics::{fairness_cells, EmptyPolicy, FairnessCell, Metric, Mode};
use crate::profiler::Strategy;
use crate::prompts::AttributeGroup;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "table" | "text" => Ok(ReportFormat::Table),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

type Row<'a> = BTreeMap<AttributeGroup, &'a FairnessCell>;

/// Cells of one (metric, mode), grouped into rows keyed by (strategy, scope).
fn rows(cells: &[FairnessCell], metric: Metric, mode: Mode) -> BTreeMap<(Strategy, usize), Row<'_>> {
    let mut out: BTreeMap<(Strategy, usize), Row<'_>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.metric == metric && c.mode == mode) {
        out.entry((c.strategy, c.n_profile)).or_default().insert(c.group, c);
    }
    out
}

fn header() -> String {
    let mut h = String::from("strategy,n_profile");
    for g in AttributeGroup::ALL {
        for c in g.conditions() {
            let _ = write!(h, ",{}", c.label());
        }
        let _ = write!(h, ",{0}_snsr,{0}_snsv", g.as_str());
    }
    h
}

/// Grouped layout: per row, each group's condition means, then SNSR, then SNSV.
pub fn render_table_csv(cells: &[FairnessCell], metric: Metric, mode: Mode) -> String {
    let mut out = header();
    out.push('\n');
    for ((strategy, n), row) in rows(cells, metric, mode) {
        let _ = write!(out, "{},{n}", strategy.as_str());
        for g in AttributeGroup::ALL {
            match row.get(&g) {
                Some(c) => {
                    for cond in g.conditions() {
                        match c.values.iter().find(|v| v.0 == cond) {
                            Some((_, v)) => {
                                let _ = write!(out, ",{v:.6}");
                            }
                            None => out.push(','),
                        }
                    }
                    let _ = write!(out, ",{:.6},{:.6}", c.snsr, c.snsv);
                }
                None => out.push_str(&",".repeat(g.conditions().len() + 2)),
            }
        }
        out.push('\n');
    }
    out
}

fn table_files(cells: &[FairnessCell], nonempty: &[FairnessCell]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for metric in Metric::ALL {
        for mode in Mode::ALL {
            files.push((format!("{}_{}.csv", metric.as_str(), mode.as_str()), render_table_csv(cells, metric, mode)));
        }
        let mode = Mode::PreferenceAligned;
        files.push((
            format!("{}_{}_nonempty.csv", metric.as_str(), mode.as_str()),
            render_table_csv(nonempty, metric, mode),
        ));
    }
    files
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(Stage::Write, dir))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io_err(Stage::Write, &path))?;
        written.push(path);
    }
    Ok(written)
}

pub(crate) fn write_tables(run_dir: &Path, cells: &[FairnessCell], nonempty: &[FairnessCell]) -> Result<Vec<PathBuf>, HarnessError> {
    write_files(&run_dir.join("tables"), &table_files(cells, nonempty))
}

/// Heatmap grids: `(similarity.csv, snsr.csv)`. The first has one row per
/// (scope, strategy, mode, metric, condition), the second one per
/// (scope, strategy, mode, metric, group).
pub fn heatmap_rows(cells: &[FairnessCell]) -> (String, String) {
    let mut sorted: Vec<&FairnessCell> = cells.iter().collect();
    sorted.sort_by_key(|c| (c.n_profile, c.strategy, c.mode, c.metric, c.group));
    let mut sim = String::from("n_profile,strategy,mode,metric,condition,similarity\n");
    let mut snsr = String::from("n_profile,strategy,mode,metric,group,snsr,snsv\n");
    for c in sorted {
        let key = format!("{},{},{},{}", c.n_profile, c.strategy.as_str(), c.mode.as_str(), c.metric.as_str());
        for (cond, v) in &c.values {
            let _ = writeln!(sim, "{key},{},{v:.6}", cond.label());
        }
        let _ = writeln!(snsr, "{key},{},{:.6},{:.6}", c.group.as_str(), c.snsr, c.snsv);
    }
    (sim, snsr)
}

pub(crate) fn write_heatmap(run_dir: &Path, cells: &[FairnessCell]) -> Result<Vec<PathBuf>, HarnessError> {
    let (sim, snsr) = heatmap_rows(cells);
    write_files(&run_dir.join("heatmap"), &[("similarity.csv".into(), sim), ("snsr.csv".into(), snsr)])
}

/// Plain-text rendering of every (metric, mode) table.
pub fn render_text_tables(cells: &[FairnessCell]) -> String {
    let mut out = String::new();
    for metric in Metric::ALL {
        for mode in Mode::ALL {
            let rows = rows(cells, metric, mode);
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{} / {}", metric.as_str(), mode.as_str());
            let mut top = format!("{:<14}", "");
            let mut sub = format!("{:<10}{:>4}", "strategy", "N");
            for g in AttributeGroup::ALL {
                let labels: Vec<String> = g.conditions().iter().map(|c| c.label()).chain(["SNSR".into(), "SNSV".into()]).collect();
                let width = labels.len() * 12;
                let _ = write!(top, " | {:<width$}", g.as_str());
                sub.push_str(" |");
                for l in labels {
                    let _ = write!(sub, " {l:>11}");
                }
                sub.push(' ');
            }
            let _ = writeln!(out, "{}", top.trim_end());
            let _ = writeln!(out, "{}", sub.trim_end());
            for ((strategy, n), row) in rows {
                let _ = write!(out, "{:<10}{n:>4}", strategy.as_str());
                for g in AttributeGroup::ALL {
                    out.push_str(" |");
                    if let Some(c) = row.get(&g) {
                        for cond in g.conditions() {
                            match c.values.iter().find(|v| v.0 == cond) {
                                Some((_, v)) => {
                                    let _ = write!(out, " {v:>11.4}");
                                }
                                None => {
                                    let _ = write!(out, " {:>11}", "-");
                                }
                            }
                        }
                        let _ = write!(out, " {:>11.4} {:>11.4}", c.snsr, c.snsv);
                    }
                    out.push(' ');
                }
                out.truncate(out.trim_end().len());
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    cells: &'a [FairnessCell],
    cells_nonempty: &'a [FairnessCell],
}

/// Recomputes the fairness cells from `<run_dir>/pairs.jsonl` and writes them
/// to `<run_dir>/report/` in `format`. Returns the files written.
pub fn emit_report(run_dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, HarnessError> {
    let pairs = read_pairs(&run_dir.join("pairs.jsonl"))?;
    if pairs.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let metric_err = |source| HarnessError::Metric { stage: Stage::Report, source };
    let cells = fairness_cells(&pairs, EmptyPolicy::Zero).map_err(metric_err)?;
    let nonempty = fairness_cells(&pairs, EmptyPolicy::Skip).map_err(metric_err)?;
    let dir = run_dir.join("report");
    match format {
        ReportFormat::Csv => write_files(&dir, &table_files(&cells, &nonempty)),
        ReportFormat::Json => {
            std::fs::create_dir_all(&dir).map_err(io_err(Stage::Write, &dir))?;
            let path = dir.join("report.json");
            write_json(&path, &JsonReport { cells: &cells, cells_nonempty: &nonempty })?;
            Ok(vec![path])
        }
        ReportFormat::Table => write_files(&dir, &[("report.txt".into(), render_text_tables(&cells))]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(group: AttributeGroup, values: &[f64]) -> FairnessCell {
        let conds = group.conditions();
        FairnessCell {
            group,
            strategy: Strategy::Random,
            n_profile: 10,
            mode: Mode::ItemSimilarity,
            metric: Metric::Jaccard,
            values: conds.into_iter().zip(values.iter().copied()).collect(),
            snsr: crate::metrics::snsr(values),
            snsv: crate::metrics::snsv(values),
        }
    }

    #[test]
    fn csv_layout() {
        let cells = [
            cell(AttributeGroup::Sex, &[0.1680, 0.1670]),
            cell(AttributeGroup::Age, &[0.1669, 0.1847, 0.1421]),
            cell(AttributeGroup::Intersectional, &[0.1; 6]),
        ];
        let csv = render_table_csv(&cells, Metric::Jaccard, Mode::ItemSimilarity);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "strategy,n_profile,male,female,sex_snsr,sex_snsv,teen,young,adult,age_snsr,age_snsv,\
             teen-male,young-male,adult-male,teen-female,young-female,adult-female,intersectional_snsr,intersectional_snsv"
        );
        assert!(lines[1].starts_with("random,10,0.168000,0.167000,0.001000,0.000500,0.166900,0.184700,0.142100,0.042600,0.017"));
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
        assert_eq!(render_table_csv(&cells, Metric::Jaccard, Mode::PreferenceAligned).lines().count(), 1);
    }

    #[test]
    fn heatmap_and_text() {
        let cells = [cell(AttributeGroup::Sex, &[0.5, 0.25])];
        let (sim, snsr) = heatmap_rows(&cells);
        assert_eq!(sim.lines().nth(1), Some("10,random,item-similarity,jaccard,male,0.500000"));
        assert_eq!(snsr.lines().nth(1), Some("10,random,item-similarity,jaccard,sex,0.250000,0.125000"));
        let text = render_text_tables(&cells);
        assert!(text.starts_with("jaccard / item-similarity\n"));
        assert!(text.contains("0.2500"));
    }

    #[test]
    fn report_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(dir.path(), ReportFormat::Csv), Err(HarnessError::MissingArtifact(_))));
        std::fs::write(dir.path().join("pairs.jsonl"), "").unwrap();
        assert!(matches!(emit_report(dir.path(), ReportFormat::Json), Err(HarnessError::EmptyResults)));
        assert_eq!("table".parse::<ReportFormat>(), Ok(ReportFormat::Table));
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
