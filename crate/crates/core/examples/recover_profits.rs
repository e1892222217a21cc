//! Recover each type's profit from noisy profits pooled across firms.

use prodenv::profit_id::{identify_profits, IdentifyConfig};
use prodenv::technology::{generate_dataset, profit_oracle, EntryRule, MarketConfig, PriceLaw, TechnologySpec};

fn main() -> prodenv::Result<()> {
    let tech = TechnologySpec::diewert(vec![
        vec![vec![1.0, -1.2], vec![-1.2, 1.0]],
        vec![vec![2.0, -1.2], vec![-1.2, 2.0]],
        vec![vec![3.0, -1.2], vec![-1.2, 3.0]],
    ])?;
    let prices: Vec<Vec<f64>> = [0.15, 0.5, 0.8, 1.1, 1.4].iter().map(|t: &f64| vec![t.cos(), t.sin()]).collect();
    let mut market = MarketConfig::new(200, 300, PriceLaw::Discrete { prices }, 0.2, 5);
    // Low types exit where they would lose money.
    market.entry_rule = EntryRule::NonnegativeProfit;
    let data = generate_dataset(&tech, &market)?;

    let cfg = IdentifyConfig {
        noise_width: 0.2,
        ..Default::default()
    };
    let table = identify_profits(&data, &cfg)?;
    println!("{} types; anchor type {} at {:.4?}", table.num_types, table.anchor.e_star, table.anchor.observables);
    for cell in &table.cells {
        let p = &cell.observables;
        print!("p = {p:.3?}:");
        for e in 1..=table.num_types {
            match cell.value(e) {
                Some(v) => print!("  e{e} {v:.4} (true {:.4})", profit_oracle(&tech, e, p, None)?.0),
                None => print!("  e{e} unidentified"),
            }
        }
        println!();
    }
    Ok(())
}
