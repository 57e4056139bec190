//! Phase-diagram boundaries: where signals become detectable, where they can
//! be discovered marginally, and the covariance-insured bound for a few
//! values of `pi`.

use cislda::boundary::{cai_sun_boundary, cis_upper_boundary, detection_boundary, sample_curves, CurveKind};

fn main() -> cislda::Result<()> {
    println!("beta   detect  cai-sun  cis(pi=.2)  cis(pi=.5)  cis(pi=.8)");
    for beta in [0.1, 0.3, 0.5, 0.6, 0.75, 0.9] {
        let cis = |pi| cis_upper_boundary(beta, 1.0, pi);
        println!(
            "{beta:<6} {:<7.4} {:<8.4} {:<11.4} {:<11.4} {:.4}",
            detection_boundary(beta)?,
            cai_sun_boundary(beta, 1.0)?,
            cis(0.2)?,
            cis(0.5)?,
            cis(0.8)?
        );
    }

    for sigma in [0.8, 1.5] {
        println!("sigma {sigma}: cai-sun at beta 0.2 is {:.4}", cai_sun_boundary(0.2, sigma)?);
    }

    let curves = sample_curves(&[CurveKind::CaiSun, CurveKind::CisUpper], 1.0, &[0.5], 99)?;
    let gap = curves[0]
        .samples
        .iter()
        .zip(&curves[1].samples)
        .map(|(a, b)| a.1 - b.1)
        .fold(f64::INFINITY, f64::min);
    println!("smallest gap between the marginal and covariance-insured curves: {gap:.3e}");

    let mut csv = Vec::new();
    cislda::boundary::write_curves_csv(&curves, &mut csv)?;
    println!("{} csv lines", String::from_utf8_lossy(&csv).lines().count());
    Ok(())
}
