//! Third-central-moment capital allocation for the shipped four-asset
//! portfolio. Run from the workspace root:
//!
//! ```sh
//! cargo run -p nmvm-risk --example portfolio_allocation
//! ```

use nmvm_risk::allocation::AllocationEngine;
use nmvm_risk::model_file::load_model;
use std::path::Path;

fn main() -> nmvm_risk::Result<()> {
    let loaded = load_model(Path::new("data/portfolio.json"))?;
    let model = loaded.model.reweight(&[25.0, 25.0, 25.0, 25.0])?;
    let engine = AllocationEngine::new(&model, 0.95, 3)?;
    let report = engine.tcm_allocation(3)?;
    for (label, capital) in loaded.labels.iter().zip(&report.capitals) {
        println!("{label}: {capital:.3}");
    }
    println!("total: {:.3}", report.total);
    Ok(())
}
