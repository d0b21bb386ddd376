//! Named analytic families for initial data, boundary signals and coefficient
//! profiles. All of them are functions of one real variable (the tree
//! coordinate `x`, or time `t` for boundary signals) with an exact derivative.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    /// `c[0] + c[1] y + c[2] y² + ...`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `amplitude · sin(wavenumber · y + phase) + offset`
    Sine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · exp(-(y - center)² / (2 width²)) + offset`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Piecewise-linear through `values[i]` at `start + i · step`, held
    /// constant outside the sampled range.
    Samples {
        start: f64,
        step: f64,
        values: Vec<f64>,
    },
    Sum {
        terms: Vec<Profile>,
    },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Zero
    }
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn polynomial(coefficients: &[f64]) -> Self {
        Profile::Polynomial {
            coefficients: coefficients.to_vec(),
        }
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Self {
        Profile::Gaussian {
            amplitude,
            center,
            width,
            offset: 0.0,
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * y + c)
            }
            Profile::Sine {
                amplitude,
                wavenumber,
                phase,
                offset,
            } => amplitude * (wavenumber * y + phase).sin() + offset,
            Profile::Gaussian {
                amplitude,
                center,
                width,
                offset,
            } => {
                let z = (y - center) / width;
                amplitude * (-0.5 * z * z).exp() + offset
            }
            Profile::Samples {
                start,
                step,
                values,
            } => {
                let (k, frac) = sample_position(*start, *step, values.len(), y);
                if values.len() == 1 {
                    values[0]
                } else {
                    values[k] * (1.0 - frac) + values[k + 1] * frac
                }
            }
            Profile::Sum { terms } => terms.iter().map(|t| t.value(y)).sum(),
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Profile::Zero | Profile::Constant { .. } => 0.0,
            Profile::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * y + k as f64 * c),
            Profile::Sine {
                amplitude,
                wavenumber,
                phase,
                ..
            } => amplitude * wavenumber * (wavenumber * y + phase).cos(),
            Profile::Gaussian {
                amplitude,
                center,
                width,
                ..
            } => {
                let z = (y - center) / width;
                -amplitude * z / width * (-0.5 * z * z).exp()
            }
            Profile::Samples {
                start,
                step,
                values,
            } => {
                if values.len() < 2 {
                    return 0.0;
                }
                let (k, _) = sample_position(*start, *step, values.len(), y);
                (values[k + 1] - values[k]) / step
            }
            Profile::Sum { terms } => terms.iter().map(|t| t.derivative(y)).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { value } => *value == 0.0,
            Profile::Polynomial { coefficients } => coefficients.iter().all(|&c| c == 0.0),
            Profile::Sine {
                amplitude, offset, ..
            }
            | Profile::Gaussian {
                amplitude, offset, ..
            } => *amplitude == 0.0 && *offset == 0.0,
            Profile::Samples { values, .. } => values.iter().all(|&v| v == 0.0),
            Profile::Sum { terms } => terms.iter().all(Profile::is_zero),
        }
    }

    pub fn scaled(&self, factor: f64) -> Profile {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::Constant { value } => Profile::constant(value * factor),
            Profile::Polynomial { coefficients } => Profile::Polynomial {
                coefficients: coefficients.iter().map(|c| c * factor).collect(),
            },
            Profile::Sine {
                amplitude,
                wavenumber,
                phase,
                offset,
            } => Profile::Sine {
                amplitude: amplitude * factor,
                wavenumber: *wavenumber,
                phase: *phase,
                offset: offset * factor,
            },
            Profile::Gaussian {
                amplitude,
                center,
                width,
                offset,
            } => Profile::Gaussian {
                amplitude: amplitude * factor,
                center: *center,
                width: *width,
                offset: offset * factor,
            },
            Profile::Samples {
                start,
                step,
                values,
            } => Profile::Samples {
                start: *start,
                step: *step,
                values: values.iter().map(|v| v * factor).collect(),
            },
            Profile::Sum { terms } => Profile::Sum {
                terms: terms.iter().map(|t| t.scaled(factor)).collect(),
            },
        }
    }
}

fn sample_position(start: f64, step: f64, len: usize, y: f64) -> (usize, f64) {
    if len < 2 {
        return (0, 0.0);
    }
    let s = ((y - start) / step).clamp(0.0, (len - 1) as f64);
    let k = (s.floor() as usize).min(len - 2);
    (k, s - k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let profiles = [
            Profile::polynomial(&[1.0, -2.0, 0.5, 0.25]),
            Profile::Sine {
                amplitude: 0.3,
                wavenumber: 4.0,
                phase: 0.2,
                offset: 1.0,
            },
            Profile::gaussian(2.0, 0.4, 0.1),
            Profile::Sum {
                terms: vec![Profile::constant(1.0), Profile::gaussian(1.0, 0.0, 1.0)],
            },
        ];
        let h = 1e-6;
        for p in &profiles {
            for &y in &[-0.3, 0.1, 0.45, 1.7] {
                let fd = (p.value(y + h) - p.value(y - h)) / (2.0 * h);
                assert!((fd - p.derivative(y)).abs() < 1e-6, "{p:?} at {y}");
            }
        }
    }

    #[test]
    fn samples_interpolate_linearly() {
        let p = Profile::Samples {
            start: 1.0,
            step: 0.5,
            values: vec![0.0, 1.0, 4.0],
        };
        assert_eq!(p.value(1.5), 1.0);
        assert_eq!(p.value(1.25), 0.5);
        assert_eq!(p.value(1.75), 2.5);
        assert_eq!(p.value(5.0), 4.0);
        assert_eq!(p.derivative(1.8), 6.0);
    }

    #[test]
    fn toml_tagged_form() {
        #[derive(Deserialize)]
        struct W {
            p: Profile,
        }
        let w: W = toml::from_str("p = { kind = \"gaussian\", amplitude = 1.0, center = 0.5, width = 0.1 }").unwrap();
        assert_eq!(w.p, Profile::gaussian(1.0, 0.5, 0.1));
    }
}
