//! TSV on stdout, a boxed table on stderr.

use std::io::Write;

pub struct Output {
    pub quiet: bool,
}

impl Output {
    /// Prints `tsv` and, unless quiet, its table rendering.
    pub fn tsv(&self, tsv: &str) {
        self.report(tsv, &render_table(tsv));
    }

    pub fn report(&self, tsv: &str, table: &str) {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(tsv.as_bytes());
        let _ = stdout.flush();
        if !self.quiet {
            eprintln!("{table}");
        }
    }
}

/// Boxes every blank-line separated TSV block. Numeric cells align right.
pub fn render_table(tsv: &str) -> String {
    tsv.split("\n\n")
        .filter(|block| !block.trim().is_empty())
        .map(render_block)
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_block(block: &str) -> String {
    let rows: Vec<Vec<&str>> = block
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split('\t').collect())
        .collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let rule = widths
        .iter()
        .map(|w| "-".repeat(w + 2))
        .collect::<Vec<_>>()
        .join("+");
    let rule = format!("+{rule}+");
    let mut out = vec![rule.clone()];
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..cols)
            .map(|c| {
                let cell = row.get(c).copied().unwrap_or("");
                let w = widths[c];
                if i > 0 && cell.parse::<f64>().is_ok() {
                    format!(" {cell:>w$} ")
                } else {
                    format!(" {cell:<w$} ")
                }
            })
            .collect();
        out.push(format!("|{}|", cells.join("|")));
        if i == 0 {
            out.push(rule.clone());
        }
    }
    out.push(rule);
    out.join("\n")
}
