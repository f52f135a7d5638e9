use std::io::Write;

use anyhow::Context;

use crate::OutputArgs;

/// A delimited table written to stdout or a file.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self, sep: char) -> String {
        let mut s = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            s.push_str(&r.join(&sep.to_string()));
            s.push('\n');
        }
        s
    }

    pub fn emit(&self, out: &OutputArgs) -> anyhow::Result<()> {
        let text = self.render(if out.tsv { '\t' } else { ',' });
        match &out.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => Ok(std::io::stdout().lock().write_all(text.as_bytes())?),
        }
    }
}

/// Parses a comma-separated list such as `0.5,0.9`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<T>().map_err(|_| anyhow::anyhow!("cannot parse {v:?} in list {s:?}")))
        .collect()
}
