//! Attention-gate dumps for plotting.
//!
//! One CSV row per (example, pass, fact):
//!
//! ```text
//! example_id,pass,fact,gate          text models
//! example_id,pass,fact,gate,row,col  image models
//! ```
//!
//! `example_id` is the 0-based position in the dataset, `pass` runs from 1
//! to T, `fact` is the 1-based position in the fact sequence and `row`/`col`
//! are the 0-based grid coordinates of that fact's patch.

use std::io::Write;

use crate::data::{Context, Example};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::visual::snake_order;

#[derive(Clone, Debug, PartialEq)]
pub struct GateRow {
    pub example: usize,
    pub pass: usize,
    pub fact: usize,
    pub gate: f64,
    pub cell: Option<(usize, usize)>,
}

pub fn gate_rows(model: &Model, examples: &[Example]) -> Result<Vec<GateRow>> {
    let mut rows = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        let cells = match &ex.context {
            Context::Grid { grid, .. } => Some(snake_order(grid.height, grid.width)),
            Context::Sentences(_) => None,
        };
        let gates = model.gates(&model.encode(ex)?)?;
        for (t, pass) in gates.iter().enumerate() {
            for (j, &gate) in pass.iter().enumerate() {
                rows.push(GateRow {
                    example: i,
                    pass: t + 1,
                    fact: j + 1,
                    gate,
                    cell: cells.as_ref().map(|c| c[j]),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_gate_csv<W: Write>(mut out: W, rows: &[GateRow]) -> Result<()> {
    let visual = rows.first().is_some_and(|r| r.cell.is_some());
    let io = |e| Error::io("<gate csv>", e);
    if visual {
        writeln!(out, "example_id,pass,fact,gate,row,col").map_err(io)?;
    } else {
        writeln!(out, "example_id,pass,fact,gate").map_err(io)?;
    }
    for r in rows {
        match r.cell {
            Some((row, col)) if visual => {
                writeln!(out, "{},{},{},{},{row},{col}", r.example, r.pass, r.fact, r.gate).map_err(io)?
            }
            _ => writeln!(out, "{},{},{},{}", r.example, r.pass, r.fact, r.gate).map_err(io)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use crate::model::{InputKind, Variant};
    use crate::visual::FeatureGrid;
    use crate::vocab::build_vocab;
    use std::path::PathBuf;
    use std::sync::Arc;

    #[test]
    fn one_row_per_example_pass_and_fact() {
        let data = vec![
            Example::text(
                vec![tokenize("Mary went to the kitchen."), tokenize("John went to the garden.")],
                tokenize("Where is Mary?"),
                "kitchen",
            ),
            Example::text(vec![tokenize("John went to the garden.")], tokenize("Where is John?"), "garden"),
        ];
        let (v, a) = build_vocab(&data);
        let m = Model::new(Variant::DmnPlus.config(4, 3, 70), v, a, 0).unwrap();
        let rows = gate_rows(&m, &data).unwrap();
        assert_eq!(rows.len(), 3 * (2 + 1));
        for ex in 0..2 {
            for pass in 1..=3 {
                let sum: f64 = rows
                    .iter()
                    .filter(|r| r.example == ex && r.pass == pass)
                    .map(|r| r.gate)
                    .sum();
                assert!((sum - 1.0).abs() < 1e-6);
            }
        }
        let mut csv = Vec::new();
        write_gate_csv(&mut csv, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("example_id,pass,fact,gate\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }

    #[test]
    fn image_rows_carry_snake_coordinates() {
        let grid = FeatureGrid::new(2, 2, 3, (0..12).map(|i| i as f32 / 12.0).collect()).unwrap();
        let ex = Example {
            context: Context::Grid {
                path: PathBuf::from("g.fgrd"),
                grid: Arc::new(grid),
            },
            question: tokenize("what is it?"),
            answer: "cat".into(),
            supporting: Vec::new(),
            human_answers: vec!["cat".into()],
        };
        let (v, a) = build_vocab([&ex]);
        let config = crate::model::ModelConfig {
            input: InputKind::Visual { channels: 3 },
            ..Variant::DmnPlus.config(4, 1, 70)
        };
        let m = Model::new(config, v, a, 0).unwrap();
        let rows = gate_rows(&m, &[ex]).unwrap();
        let cells: Vec<_> = rows.iter().map(|r| r.cell.unwrap()).collect();
        assert_eq!(cells, [(0, 0), (0, 1), (1, 1), (1, 0)]);
        let mut csv = Vec::new();
        write_gate_csv(&mut csv, &rows).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "example_id,pass,fact,gate,row,col");
        assert!(lines[3].starts_with("0,1,3,") && lines[3].ends_with(",1,1"));
    }
}
