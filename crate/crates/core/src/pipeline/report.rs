use std::path::Path;

use super::{PipelineOutput, PrescreenRuleSet, RankedFeature};
use crate::evaluation::EvalReport;

/// Left-aligned text table; numeric columns are right-aligned by the caller
/// passing them pre-formatted.
fn aligned(header: &[&str], rows: &[Vec<String>], right: &[bool]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate() {
            let pad = widths[i] - cell.chars().count();
            if i > 0 {
                out.push_str("  ");
            }
            if right[i] {
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            } else {
                out.push_str(cell);
                if i + 1 < cells.len() {
                    out.push_str(&" ".repeat(pad));
                }
            }
        }
        out.push('\n');
        out
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// One row per evaluated configuration, duplicates included.
pub fn eval_table_tsv(reports: &[EvalReport]) -> String {
    let k = reports.first().map_or(0, |r| r.k);
    let mut out = String::from("algorithm\tconfig");
    for f in 1..=k {
        out.push_str(&format!("\tfold_{f}"));
    }
    out.push_str("\tmean_f1\ttp\tfp\tfn\ttn\tconverged\tduplicate_of\n");
    for r in reports {
        for c in &r.per_config {
            out.push_str(&format!("{}\t{}", r.algorithm, c.config.describe()));
            for f1 in &c.fold_f1 {
                out.push_str(&format!("\t{f1:.6}"));
            }
            let dup = c.duplicate_of.map_or_else(|| "-".to_string(), |j| format!("{}", j + 1));
            out.push_str(&format!(
                "\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                c.mean_f1, c.confusion.tp, c.confusion.fp, c.confusion.fn_, c.confusion.tn, c.converged, dup
            ));
        }
    }
    out
}

/// Best configuration and mean F1 per algorithm, with the number of
/// configurations searched.
pub fn eval_summary_text(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let distinct = r.per_config.iter().filter(|c| c.duplicate_of.is_none()).count();
            let searched = if distinct == r.evaluated { r.evaluated.to_string() } else { format!("{} ({distinct} distinct)", r.evaluated) };
            vec![r.algorithm.title().to_string(), r.best_config.describe(), searched, format!("{:.3}", r.best_mean_f1)]
        })
        .collect();
    let k = reports.first().map_or(0, |r| r.k);
    aligned(&["Algorithm", "Configuration", "Configs", &format!("Mean {k}-fold F1")], &rows, &[false, false, true, true])
}

pub fn top_features_tsv(top: &[RankedFeature]) -> String {
    let mut out = String::from("rank\tkind\tname\tweight\n");
    for (i, f) in top.iter().enumerate() {
        out.push_str(&format!("{}\t{}\t{}\t{:.6}\n", i + 1, f.descriptor.kind, f.descriptor.name, f.weight));
    }
    out
}

pub fn top_features_text(top: &[RankedFeature]) -> String {
    let rows: Vec<Vec<String>> = top
        .iter()
        .enumerate()
        .map(|(i, f)| vec![(i + 1).to_string(), f.descriptor.kind.to_string(), f.descriptor.name.clone(), format!("{:+.4}", f.weight)])
        .collect();
    aligned(&["Rank", "Kind", "Feature", "Weight"], &rows, &[true, false, false, true])
}

pub fn prescreen_text(rules: &PrescreenRuleSet) -> String {
    let mut out = String::new();
    if rules.rules.is_empty() {
        out.push_str("pass everyone\n");
    }
    for (i, atom) in rules.rules.iter().enumerate() {
        out.push_str(if i == 0 { "pass if   " } else { "   or     " });
        out.push_str(&atom.to_string());
        out.push('\n');
    }
    out.push_str(&format!("target recall    {:.4}\n", rules.target_recall));
    out.push_str(&format!("measured recall  {:.4}\n", rules.measured_recall));
    out.push_str(&format!("filter fraction  {:.4}\n", rules.filter_fraction));
    if !rules.reached_target {
        out.push_str("target recall unreachable with the ranked features\n");
    }
    out
}

/// All report files of one run, as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: Vec<(&'static str, String)>,
}

impl ReportBundle {
    pub fn from_output(output: &PipelineOutput) -> Self {
        ReportBundle {
            files: vec![
                ("eval.tsv", eval_table_tsv(&output.reports)),
                ("eval.txt", eval_summary_text(&output.reports)),
                ("top_features.tsv", top_features_tsv(&output.top_features)),
                ("top_features.txt", top_features_text(&output.top_features)),
                ("prescreen.txt", prescreen_text(&output.prescreen)),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, t)| t.as_str())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::create_dir_all(dir.as_ref())?;
        for (name, text) in &self.files {
            std::fs::write(dir.as_ref().join(name), text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let t = aligned(&["a", "bb"], &[vec!["xyz".into(), "1".into()], vec!["q".into(), "22".into()]], &[false, true]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a    bb");
        assert_eq!(lines[1], "---  --");
        assert_eq!(lines[2], "xyz   1");
        assert_eq!(lines[3], "q    22");
    }
}
