//! Housing prices from average values per acre and land prices.

use prodenv::proxy::{recover_g_housing, tabulate_markets, HousingDgp};

fn main() -> prodenv::Result<()> {
    let dgp = HousingDgp {
        productivity: vec![0.8, 1.0, 1.3],
        weights: vec![0.3, 0.4, 0.3],
        gamma: 0.6,
    };
    let markets = dgp.simulate(400, 20_000, 0.5, 2.0, 3)?;
    let (vbar, p_l) = tabulate_markets(&markets, 25)?;
    let v0 = vbar[12];
    let g = recover_g_housing(&vbar, &p_l, v0, dgp.g(v0))?;
    let worst = vbar
        .iter()
        .zip(&g)
        .map(|(v, est)| (est / dgp.g(*v) - 1.0).abs())
        .fold(0.0, f64::max);
    for i in (0..vbar.len()).step_by(6) {
        println!("vbar {:.4}  g {:.5}  true {:.5}", vbar[i], g[i], dgp.g(vbar[i]));
    }
    println!("largest relative error {worst:.2e}");
    Ok(())
}
