use serde::Serialize;

use crate::dephasing::{FidelityCurve, Method};
use crate::error::{Error, Result};

/// Step-by-step `|M_a − M_b|` between two fidelity curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub candidate: Method,
    pub reference: Method,
    pub deviations: Vec<f64>,
    /// Mean absolute deviation over all steps, `t = 0` included.
    pub mad: f64,
    pub max_deviation: f64,
    pub step_of_max: usize,
    #[serde(skip)]
    pub curves: (FidelityCurve, FidelityCurve),
}

pub fn compare(a: &FidelityCurve, b: &FidelityCurve) -> Result<ComparisonReport> {
    if a.points.len() != b.points.len() {
        return Err(Error::invalid(format!("curves have different lengths: {} vs {}", a.points.len(), b.points.len())));
    }
    if a.points.is_empty() {
        return Err(Error::invalid("cannot compare empty curves"));
    }
    let deviations: Vec<f64> = a.points.iter().zip(&b.points).map(|(x, y)| (x.fidelity - y.fidelity).abs()).collect();
    let mad = deviations.iter().sum::<f64>() / deviations.len() as f64;
    let (step_of_max, max_deviation) = deviations
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    Ok(ComparisonReport {
        candidate: a.meta.method,
        reference: b.meta.method,
        deviations,
        mad,
        max_deviation,
        step_of_max,
        curves: (a.clone(), b.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephasing::{CurveMeta, CurvePoint};
    use crate::dynamics::MapSpec;
    use num_complex::Complex64;

    fn flat(value: f64, len: usize) -> FidelityCurve {
        FidelityCurve {
            meta: CurveMeta {
                spec: MapSpec::new(1.0, 0.0, 4).unwrap(),
                state: "test".into(),
                samples: 0,
                seed: None,
                method: Method::Exact,
            },
            points: vec![CurvePoint::exact(Complex64::new(value, 0.0)); len],
        }
    }

    #[test]
    fn identical_curves() {
        let r = compare(&flat(0.3, 5), &flat(0.3, 5)).unwrap();
        assert_eq!((r.mad, r.max_deviation), (0.0, 0.0));
    }

    #[test]
    fn ones_against_zeros() {
        let r = compare(&flat(1.0, 3), &flat(0.0, 3)).unwrap();
        assert_eq!((r.mad, r.max_deviation, r.step_of_max), (1.0, 1.0, 0));
        assert!(r.mad <= r.max_deviation);
    }

    #[test]
    fn length_mismatch() {
        assert!(compare(&flat(1.0, 3), &flat(1.0, 4)).is_err());
    }
}
