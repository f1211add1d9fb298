//! Finite-difference gradient check over every configuration at two blocks.

use wifi_mode_detect::resnet::gradcheck_suite;

fn main() -> wifi_mode_detect::Result<()> {
    let cases = gradcheck_suite(1)?;
    for c in &cases {
        println!(
            "{} {:<8} {:?}: {} params, max rel {:.2e}",
            c.config,
            c.arch.name(),
            c.phase,
            c.report.checked,
            c.report.max_rel_error
        );
    }
    let worst = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    println!("{} cases, worst {worst:.2e}", cases.len());
    Ok(())
}
