//! Aligned text and CSV rendering of result tables.

use clap::ValueEnum;
use serde::Serialize;

use combicon::Rational;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cell {
    Text(String),
    Exact(Rational),
}

impl Cell {
    fn exact(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Exact(r) => r.to_string(),
        }
    }

    fn decimal(&self, digits: usize) -> String {
        match self {
            Cell::Text(_) => String::new(),
            Cell::Exact(r) => r.to_decimal_string(digits),
        }
    }
}

impl From<Rational> for Cell {
    fn from(r: Rational) -> Self {
        Cell::Exact(r)
    }
}

impl From<&Rational> for Cell {
    fn from(r: &Rational) -> Self {
        Cell::Exact(r.clone())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Exact strings only; the shape stored in run reports.
#[derive(Clone, Debug, Serialize)]
pub struct PlainTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Table { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// A two-column `field, value` table.
    pub fn fields(title: &str) -> Self {
        Table::new(title, &["field", "value"])
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the header");
        self.rows.push(cells);
        self
    }

    pub fn field(&mut self, name: &str, value: impl Into<Cell>) -> &mut Self {
        self.row(vec![Cell::Text(name.into()), value.into()])
    }

    pub fn plain(&self) -> PlainTable {
        PlainTable {
            title: self.title.clone(),
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(Cell::exact).collect()).collect(),
        }
    }

    /// Header and rows as strings, with a rounded column after every column
    /// holding a rational when `decimal` is set.
    fn grid(&self, decimal: Option<usize>) -> Vec<Vec<String>> {
        let numeric: Vec<bool> = (0..self.columns.len())
            .map(|j| decimal.is_some() && self.rows.iter().any(|r| matches!(r[j], Cell::Exact(_))))
            .collect();
        let mut header = Vec::new();
        for (name, &num) in self.columns.iter().zip(&numeric) {
            header.push(name.clone());
            if num {
                header.push(format!("{name}_decimal"));
            }
        }
        let mut grid = vec![header];
        for row in &self.rows {
            let mut line = Vec::new();
            for (cell, &num) in row.iter().zip(&numeric) {
                line.push(cell.exact());
                if let (true, Some(d)) = (num, decimal) {
                    line.push(cell.decimal(d));
                }
            }
            grid.push(line);
        }
        grid
    }

    fn render_text(&self, decimal: Option<usize>) -> String {
        let grid = self.grid(decimal);
        let mut widths = vec![0; grid[0].len()];
        for line in &grid {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = format!("{}\n", self.title);
        for line in &grid {
            let text: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(text.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    fn render_csv(&self, decimal: Option<usize>) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for line in self.grid(decimal) {
            writer.write_record(&line).expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }
}

/// Renders tables in order, separated by blank lines.
pub fn render(tables: &[Table], format: Format, decimal: Option<usize>) -> String {
    tables
        .iter()
        .map(|t| match format {
            Format::Table => t.render_text(decimal),
            Format::Csv => t.render_csv(decimal),
        })
        .collect::<Vec<_>>()
        .join("\n")
}
