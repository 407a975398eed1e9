use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{embed_matrix, validation_grid, Body, FourierTerm, HarmonicTerm};
use crate::error::{Error, Result};

/// Serializable description of a body, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ellipsoid {
        axes: Vec<f64>,
    },
    Ball {
        dim: usize,
    },
    /// `h(θ) = c0 + Σ a cos kθ + b sin kθ`, terms as `[k, a, b]`.
    Fourier {
        c0: f64,
        #[serde(default)]
        terms: Vec<(u32, f64, f64)>,
    },
    /// `h = constant + Σ c Y_l^m`, terms as `[l, m, c]`.
    Sphharm {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        terms: Vec<(usize, i64, f64)>,
    },
    LinearImage {
        base: Box<BodySpec>,
        matrix: Vec<Vec<f64>>,
    },
    Translate {
        base: Box<BodySpec>,
        shift: Vec<f64>,
    },
    Polar {
        base: Box<BodySpec>,
    },
}

impl BodySpec {
    pub fn build(&self) -> Result<Body> {
        match self {
            BodySpec::Ellipsoid { axes } => Body::ellipsoid(axes),
            BodySpec::Ball { dim } => Body::unit_ball(*dim),
            BodySpec::Fourier { c0, terms } => {
                let terms: Vec<FourierTerm> = terms.iter().map(|&(k, a, b)| FourierTerm { k, a, b }).collect();
                Body::fourier(*c0, &terms)
            }
            BodySpec::Sphharm { constant, terms } => {
                let mut all = vec![HarmonicTerm {
                    l: 0,
                    m: 0,
                    c: constant * (4.0 * std::f64::consts::PI).sqrt(),
                }];
                all.extend(terms.iter().map(|&(l, m, c)| HarmonicTerm { l, m, c }));
                Body::sphharm(&all)
            }
            BodySpec::LinearImage { base, matrix } => {
                let base = base.build()?;
                if matrix.len() != base.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is {}×{}, body dimension is {}",
                        matrix.len(),
                        matrix.len(),
                        base.dim()
                    )));
                }
                base.linear_image(&embed_matrix(matrix)?)
            }
            BodySpec::Translate { base, shift } => {
                let base = base.build()?;
                if shift.len() != base.dim() {
                    return Err(Error::InvalidParameter(format!(
                        "shift has {} components, body dimension is {}",
                        shift.len(),
                        base.dim()
                    )));
                }
                let mut t = Vector3::zeros();
                t.as_mut_slice()[..shift.len()].copy_from_slice(shift);
                base.translate(&t)
            }
            BodySpec::Polar { base } => {
                let base = base.build()?;
                base.polar_of(validation_grid(base.dim()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_specs() {
        let json = r#"{"family":"translate","shift":[0.1,0.0],
            "base":{"family":"linear_image","matrix":[[2,0],[0,0.5]],
                    "base":{"family":"fourier","c0":1,"terms":[[3,0.05,0]]}}}"#;
        let spec: BodySpec = serde_json_like(json);
        let body = spec.build().unwrap();
        assert_eq!(body.dim(), 2);
        assert!(body.to_string().starts_with("translate(linear_image(fourier"));
    }

    #[test]
    fn rejects_unknown_family_and_fields() {
        assert!(serde_json_try(r#"{"family":"cube"}"#).is_err());
        assert!(serde_json_try(r#"{"family":"ball","dim":2,"radius":1}"#).is_err());
        let bad = BodySpec::Translate {
            base: Box::new(BodySpec::Ball { dim: 2 }),
            shift: vec![0.1, 0.2, 0.3],
        };
        assert!(matches!(bad.build(), Err(Error::InvalidParameter(_))));
    }

    fn serde_json_try(s: &str) -> std::result::Result<BodySpec, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }

    fn serde_json_like(s: &str) -> BodySpec {
        serde_json_try(s).unwrap()
    }
}
