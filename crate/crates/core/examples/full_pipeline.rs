//! Run the demo config end to end into a scratch directory.

use std::path::Path;

use prodenv::pipeline::{run_pipeline, PipelineConfig};

fn main() -> prodenv::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/demo.toml");
    let mut cfg = PipelineConfig::load(&path)?;
    cfg.output_dir = std::env::temp_dir().join("prodenv-demo");
    let manifest = run_pipeline(&cfg)?;
    for s in &manifest.stages {
        println!("{:<9} {:>6} ms  {}  {}", s.stage.name(), s.wall_ms, s.artifact, &s.sha256[..12]);
    }
    let report = std::fs::read_to_string(cfg.output_dir.join("report.txt"))?;
    println!("\n{report}");
    Ok(())
}
