//! Discovery and detection boundaries in the `(beta, r)` plane, where signal
//! sparsity is `p^-beta` and strength is `sqrt(2 r log p)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    CaiSun,
    Detection,
    /// Upper bound on the boundary of covariance-insured screening.
    CisUpper,
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveKind::CaiSun => "CaiSun",
            CurveKind::Detection => "Detection",
            CurveKind::CisUpper => "CisUpper",
        })
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "caisun" => Ok(CurveKind::CaiSun),
            "detection" => Ok(CurveKind::Detection),
            "cisupper" | "cis" => Ok(CurveKind::CisUpper),
            _ => Err(Error::InvalidParameter(format!("unknown curve kind {s:?}"))),
        }
    }
}

fn open_unit(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

fn positive_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")))
    }
}

/// Branch structure shared by the discovery boundary and its covariance-insured
/// bound: the cut-points depend on `beta`, the formulas on `effective`.
fn discovery_branches(beta: f64, effective: f64, sigma: f64) -> f64 {
    let tail = |b: f64| (1.0 - sigma * (1.0 - b).sqrt()).powi(2);
    if sigma == 1.0 {
        tail(effective)
    } else if sigma < 1.0 {
        let cut = 1.0 - sigma * sigma;
        if beta > cut {
            tail(effective)
        } else {
            cut * effective
        }
    } else if beta > 1.0 - 1.0 / (sigma * sigma) {
        tail(effective)
    } else {
        0.0
    }
}

/// Discovery boundary for marginal variance `sigma^2` of the signals.
pub fn cai_sun_boundary(beta: f64, sigma: f64) -> Result<f64> {
    open_unit(beta)?;
    positive_sigma(sigma)?;
    Ok(discovery_branches(beta, beta, sigma))
}

/// Detection boundary.
pub fn detection_boundary(beta: f64) -> Result<f64> {
    open_unit(beta)?;
    Ok(if beta <= 0.5 {
        0.0
    } else if beta <= 0.75 {
        beta - 0.5
    } else {
        (1.0 - (1.0 - beta).sqrt()).powi(2)
    })
}

/// Upper bound on the covariance-insured discovery boundary, where
/// `pi = gamma / beta` relates MUJI sparsity `p^-gamma` to signal sparsity.
/// `pi * beta` replaces `beta` inside each branch; the cut-points stay in `beta`.
pub fn cis_upper_boundary(beta: f64, sigma: f64, pi: f64) -> Result<f64> {
    open_unit(beta)?;
    open_unit(pi)?;
    positive_sigma(sigma)?;
    Ok(discovery_branches(beta, pi * beta, sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub kind: CurveKind,
    pub sigma: f64,
    pub pi: Option<f64>,
    /// `(beta, r)` pairs.
    pub samples: Vec<(f64, f64)>,
}

/// `grid_size` equally spaced points strictly inside (0, 1).
pub fn beta_grid(grid_size: usize) -> Vec<f64> {
    (1..=grid_size).map(|i| i as f64 / (grid_size + 1) as f64).collect()
}

/// One curve per kind, and per `pi` for [`CurveKind::CisUpper`].
pub fn sample_curves(kinds: &[CurveKind], sigma: f64, pis: &[f64], grid_size: usize) -> Result<Vec<BoundaryCurve>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid_size must be at least 2".into()));
    }
    let grid = beta_grid(grid_size);
    let mut curves = Vec::new();
    for &kind in kinds {
        let pis: Vec<Option<f64>> = match kind {
            CurveKind::CisUpper => pis.iter().map(|&p| Some(p)).collect(),
            _ => vec![None],
        };
        for pi in pis {
            let samples = grid
                .iter()
                .map(|&b| {
                    let r = match kind {
                        CurveKind::CaiSun => cai_sun_boundary(b, sigma)?,
                        CurveKind::Detection => detection_boundary(b)?,
                        CurveKind::CisUpper => cis_upper_boundary(b, sigma, pi.expect("pi"))?,
                    };
                    Ok((b, r))
                })
                .collect::<Result<_>>()?;
            curves.push(BoundaryCurve {
                kind,
                sigma,
                pi,
                samples,
            });
        }
    }
    Ok(curves)
}

pub fn write_curves_csv(curves: &[BoundaryCurve], writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["kind", "sigma", "pi", "beta", "r"])?;
    for c in curves {
        for &(b, r) in &c.samples {
            wtr.write_record([
                c.kind.to_string(),
                c.sigma.to_string(),
                c.pi.map(|p| p.to_string()).unwrap_or_default(),
                b.to_string(),
                r.to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<boundary curves>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stated_values() {
        assert_eq!(cai_sun_boundary(0.75, 1.0).unwrap(), 0.25);
        assert_eq!(cai_sun_boundary(0.5, 2.0).unwrap(), 0.0);
        assert!((cai_sun_boundary(0.5, 0.5).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(detection_boundary(0.5).unwrap(), 0.0);
        assert!((detection_boundary(0.6).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(detection_boundary(0.75).unwrap(), 0.25);
        let want = (1.0 - 0.625f64.sqrt()).powi(2);
        assert!((cis_upper_boundary(0.75, 1.0, 0.5).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        for b in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(cai_sun_boundary(b, 1.0), Err(Error::Domain(_))));
            assert!(matches!(detection_boundary(b), Err(Error::Domain(_))));
        }
        assert!(matches!(cis_upper_boundary(0.5, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(cai_sun_boundary(0.5, 0.0).is_err());
    }

    #[test]
    fn grid_and_csv() {
        let curves = sample_curves(&[CurveKind::CaiSun], 1.0, &[], 3).unwrap();
        let betas: Vec<f64> = curves[0].samples.iter().map(|s| s.0).collect();
        assert_eq!(betas, vec![0.25, 0.5, 0.75]);
        let curves = sample_curves(&[CurveKind::CisUpper, CurveKind::Detection], 1.0, &[0.2, 0.8], 4).unwrap();
        assert_eq!(curves.len(), 3);
        let mut out = Vec::new();
        write_curves_csv(&curves, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("kind,sigma,pi,beta,r\nCisUpper,1,0.2,0.2,"));
        assert_eq!(text.lines().count(), 1 + 12);
        assert!(sample_curves(&[CurveKind::CaiSun], 1.0, &[], 1).is_err());
        assert_eq!("cis-upper".parse::<CurveKind>().unwrap(), CurveKind::CisUpper);
    }
}
