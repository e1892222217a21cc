//! Three nested technologies whose optimal input is not monotone in the type.

use prodenv::pipeline::golden_table;
use prodenv::technology::{profit_oracle, TechnologySpec};

fn main() -> prodenv::Result<()> {
    println!("type   input l    output y   profit");
    for row in golden_table()? {
        println!(
            "{:>4}   {:.6}   {:.6}   {:.6}   in brackets: {}",
            row.e,
            row.input,
            row.output,
            row.profit,
            row.within_brackets()
        );
    }

    // Profits stay nested across relative prices even though inputs cross.
    let tech = TechnologySpec::nonmonotone_supply_triple();
    for p_o in [0.05, 0.12, 0.3, 1.0] {
        let pi: Vec<f64> = (1..=3)
            .map(|e| profit_oracle(&tech, e, &[p_o, 1.0], None).map(|r| r.0))
            .collect::<prodenv::Result<_>>()?;
        println!("p_o = {p_o:<5} profits {pi:.5?}");
    }
    Ok(())
}
