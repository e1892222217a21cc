//! Recover unobserved prices from proxies using homogeneity of profits.

use prodenv::proxy::{recover_proxies, AnalyticSurface, ProxyAnchor, ProxyConfig};
use prodenv::technology::{profit_oracle, TechnologySpec};

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn main() -> prodenv::Result<()> {
    let tech = TechnologySpec::diewert(vec![vec![
        vec![1.0, -0.2, -0.3],
        vec![-0.2, 2.0, -0.4],
        vec![-0.3, -0.4, 1.5],
    ]])?;
    // p1 = x1^2 + 1 and p2 = exp(x2) are unknown to the analyst; p3 is observed.
    let pi = AnalyticSurface::new(
        move |x: &[f64]| {
            let p = [x[0] * x[0] + 1.0, x[1].exp(), x[2]];
            profit_oracle(&tech, 1, &p, None).map_or(f64::NAN, |r| r.0)
        },
        vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)],
    )?;
    let cfg = ProxyConfig {
        grids: vec![linspace(0.5, 2.0, 151), linspace(0.0, 1.0, 101), linspace(0.5, 3.0, 11)],
        anchor: ProxyAnchor {
            x0: vec![1.0, 0.5, 1.5],
            p0: vec![2.0, 0.5f64.exp(), 1.5],
        },
        rank_anchors: None,
    };
    let model = recover_proxies(&pi, &cfg)?;
    for x in [0.6, 1.2, 1.8] {
        println!("g1({x}) = {:.5}  true {:.5}", model.goods[0].g(x), x * x + 1.0);
    }
    for x in [0.1, 0.5, 0.9] {
        println!("g2({x}) = {:.5}  true {:.5}", model.goods[1].g(x), f64::exp(x));
    }
    println!("condition number at the anchor: {:.3}", model.diagnostics[0].condition_number);
    Ok(())
}
