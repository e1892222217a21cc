//! Outer envelope of a production set from profit values on a few rays.

use prodenv::convex::{free_disposal_hull, support_value, HalfspaceEnvelope, PriceRay, SupportResult};

fn main() -> prodenv::Result<()> {
    // pi(p) = p1^2 / (4 p2) is the profit function of y1 = sqrt(l).
    let pi = |p: &[f64]| p[0] * p[0] / (4.0 * p[1]);
    let pairs: Vec<(PriceRay, f64)> = [0.3, 0.6, 0.9, 1.2]
        .iter()
        .map(|&t| {
            let r = PriceRay::from_angle(t)?;
            let v = pi(r.components());
            Ok((r, v))
        })
        .collect::<prodenv::Result<_>>()?;
    let env = HalfspaceEnvelope::from_rays(&pairs)?;

    for t in [0.3, 0.45, 0.75, 1.4] {
        let ray = PriceRay::from_angle(t)?;
        match support_value(&env, &ray)? {
            SupportResult::Finite { value, maximizer } => println!(
                "theta {t:.2}: support {value:.6} (true {:.6}) at {maximizer:.4?}",
                pi(ray.components())
            ),
            SupportResult::Infinite { direction, .. } => {
                println!("theta {t:.2}: unbounded along {direction:.4?}")
            }
        }
    }

    // Inner approximation from observed netputs.
    let points: Vec<Vec<f64>> = [0.25, 1.0, 4.0].iter().map(|l: &f64| vec![l.sqrt(), -l]).collect();
    let hull = free_disposal_hull(&points)?;
    println!("free disposal hull has {} facets", hull.constraints().len());
    Ok(())
}
