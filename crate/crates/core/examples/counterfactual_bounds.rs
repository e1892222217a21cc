//! Sharp bounds on profits and quantities at prices never observed.

use prodenv::convex::PriceRay;
use prodenv::counterfactual::{brute_force_bounds, profit_bounds, quantity_bounds, ProfitData};
use prodenv::technology::{profit_oracle, TechnologySpec};

fn main() -> prodenv::Result<()> {
    let tech = TechnologySpec::diewert(vec![vec![vec![2.0, -0.5], vec![-0.5, 1.5]]])?;
    let pairs: Vec<(PriceRay, f64)> = [0.3, 0.7, 1.1]
        .iter()
        .map(|&t| {
            let r = PriceRay::from_angle(t)?;
            let v = profit_oracle(&tech, 1, r.components(), None)?.0;
            Ok((r, v))
        })
        .collect::<prodenv::Result<_>>()?;
    let data = ProfitData::new(1, pairs)?;

    for t in [0.5, 0.9, 1.4] {
        let p_c = PriceRay::from_angle(t)?;
        let b = profit_bounds(&data, &p_c)?;
        let brute = brute_force_bounds(&data, &p_c, 2000)?;
        let truth = profit_oracle(&tech, 1, p_c.components(), None)?.0;
        println!(
            "theta {t}: [{:.5}, {:.5}] contains {truth:.5}; scan gives [{:.5}, {:.5}]; {:?}",
            b.lower,
            b.upper,
            brute.lower,
            brute.upper,
            b.profitability()
        );
    }

    let p_c = PriceRay::from_angle(0.9)?;
    let q = quantity_bounds(&data, &p_c, &[1.0, 0.0])?;
    println!("output at theta 0.9 lies in [{}, {}]", q.lower, q.upper);
    Ok(())
}
