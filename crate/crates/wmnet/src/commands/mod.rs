//! Subcommand implementations. Each writes the resolved configuration to
//! its output directory before doing any work.

pub mod eval;
mod gradcheck;
mod mask;
mod synth;
mod train;

pub use eval::cmd_eval;
pub use gradcheck::cmd_gradcheck;
pub use mask::cmd_mask;
pub use synth::cmd_synth;
pub use train::{cmd_finetune, cmd_pretrain};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{write_file, Result};

/// Tab-separated table with a header row.
pub(crate) struct Tsv(String);

impl Tsv {
    pub fn new(columns: &[&str]) -> Self {
        Tsv(columns.join("\t") + "\n")
    }

    pub fn row(&mut self, cells: &[&dyn std::fmt::Display]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.0.push('\t');
            }
            write!(self.0, "{c}").expect("string write");
        }
        self.0.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.0.as_bytes())
    }
}
