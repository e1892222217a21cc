//! Sets at infinite Hausdorff distance whose extended sets are close.

use prodenv::estimation::infinite_hausdorff_demo;

fn main() -> prodenv::Result<()> {
    let report = infinite_hausdorff_demo(10.0, &[1e2, 1e4, 1e6], 2000)?;
    for w in &report.windows {
        println!("window {:>9.0}: directed distance {:.4}", w.window, w.directed_distance);
    }
    println!(
        "extended sets: eta {:.6}, hausdorff {:.6}",
        report.extended.eta, report.extended.hausdorff
    );
    for (m, eta) in &report.eta_by_m {
        println!("m = {m:>6}: eta {eta:.6}");
    }
    Ok(())
}
