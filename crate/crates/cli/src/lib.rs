//! Library side of the `rbm` command-line tool, so the commands can be driven
//! from tests.

pub mod args;
pub mod commands;
pub mod grid;

use anyhow::Result;

use args::Command;

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => {
            let s = commands::cmd_train(a)?;
            println!("checkpoint: {}", s.checkpoint.display());
            println!("metrics:    {}", s.metrics_csv.display());
        }
        Command::Sample(a) => {
            let s = commands::cmd_sample(a)?;
            println!("wrote {} ({} x {} tiles)", s.path.display(), s.rows, s.cols);
        }
        Command::Reconstruct(a) => {
            let s = commands::cmd_reconstruct(a)?;
            println!(
                "wrote {} ({} x {} tiles), pixel disagreement {:.4}",
                s.grid.path.display(),
                s.grid.rows,
                s.grid.cols,
                s.disagreement
            );
        }
        Command::Eval(a) => {
            commands::cmd_eval(a)?;
        }
        Command::Weights(a) => {
            let s = commands::cmd_weights(a)?;
            println!("wrote {} ({} x {} tiles)", s.path.display(), s.rows, s.cols);
        }
    }
    Ok(())
}
