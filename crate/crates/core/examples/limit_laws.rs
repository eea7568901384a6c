//! Limit laws and the tail constant of the initial interval law.

use hcp::analytic::{c0_estimate, Transform};
use hcp::limits::{exp_integral_e1, limit_interval_laplace, limit_leftmost_laplace_case_ii, LimitLawParams};
use hcp::spp::{interval_law_preset, IntervalLawPreset};

fn main() -> hcp::Result<()> {
    let mu = interval_law_preset(&IntervalLawPreset::ZetaTail { alpha: 0.5, h: 1.0 }, (1u64 << 20) as f64)?;
    let c0 = c0_estimate(&mu)?;
    println!("c0 = {:.6} (residual {:.1e})", c0.value, c0.residual);
    let case_i = LimitLawParams::new(Transform::CaseI, c0.value)?;
    let ising = LimitLawParams::new(Transform::CaseII { gamma: 0.0 }, 1.0)?;
    println!("   s      E1(s)     case (i)   ising      first point");
    for s in [0.05, 0.2, 1.0, 3.0, 10.0] {
        println!(
            "{s:>5}  {:.6}  {:.6}   {:.6}   {:.6}",
            exp_integral_e1(s)?,
            limit_interval_laplace(&case_i, s)?,
            limit_interval_laplace(&ising, s)?,
            limit_leftmost_laplace_case_ii(s)?
        );
    }
    Ok(())
}
