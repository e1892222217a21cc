//! Fit Diewert profit functions and compare sup-norm error with Hausdorff distance.

use prodenv::convex::{PriceRay, RestrictedPriceSet};
use prodenv::counterfactual::ProfitData;
use prodenv::estimation::{duality_check, fit_diewert, FitOptions};
use prodenv::technology::{profit_oracle, TechnologySpec};

fn main() -> prodenv::Result<()> {
    let b = |s: f64| vec![vec![s, -0.2, -0.1], vec![-0.2, 1.5 * s, -0.3], vec![-0.1, -0.3, 2.0 * s]];
    let tech = TechnologySpec::diewert(vec![b(1.0), b(2.0)])?;
    let rays = RestrictedPriceSet::ratio_box_3d(0.5, 2.0, 4)?;
    let data: Vec<ProfitData> = (1..=2)
        .map(|e| {
            let pairs = rays
                .rays()
                .iter()
                .map(|r: &PriceRay| Ok((r.clone(), profit_oracle(&tech, e, r.components(), None)?.0)))
                .collect::<prodenv::Result<Vec<_>>>()?;
            ProfitData::new(e, pairs)
        })
        .collect::<prodenv::Result<_>>()?;
    let fit = fit_diewert(&data, &FitOptions::default())?;
    println!("fitted b(1) = {:.6?}", fit.coefficients[0]);

    // Perturb the fit and check the equality on a compact price set.
    let arc = RestrictedPriceSet::ratio_box_3d(0.5, 2.0, 12)?;
    let truth = |p: &[f64]| profit_oracle(&tech, 1, p, None).map_or(f64::NAN, |r| r.0);
    let shifted = |p: &[f64]| fit.profit(1, p) + 0.01 * p[0];
    let report = duality_check(truth, shifted, &arc, true, 0)?;
    println!(
        "eta {:.6}, hausdorff {:.6}, verdict {:?}",
        report.eta, report.hausdorff, report.verdict
    );
    Ok(())
}
