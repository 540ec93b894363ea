//! Polynomial scaling functions ρ₋(s) and ρ₊(s), s = t/t_f.
//!
//! ρ₋ is the minimal degree-9 polynomial with ρ(0) = 1, ρ(1) = γ₋ and vanishing first
//! four derivatives at both ends. ρ₊ extends the same construction to degree 12 and
//! keeps three free coefficients (a₁₀, a₁₁, a₁₂); the boundary conditions hold for any
//! choice of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEGREE: usize = 12;
const N_COEFFS: usize = DEGREE + 1;

/// Value and first four s-derivatives of a scaling function.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl PolyEval {
    pub fn derivatives(&self) -> [f64; 4] {
        [self.d1, self.d2, self.d3, self.d4]
    }
}

/// Free coefficients of ρ₊ plus the boundary factors they are attached to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub a10: f64,
    pub a11: f64,
    pub a12: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
}

impl AnsatzParams {
    pub fn new(free: [f64; 3], gamma_minus: f64, gamma_plus: f64) -> Self {
        Self { a10: free[0], a11: free[1], a12: free[2], gamma_minus, gamma_plus }
    }

    pub fn free(&self) -> [f64; 3] {
        [self.a10, self.a11, self.a12]
    }

    pub fn with_free(mut self, free: [f64; 3]) -> Self {
        self.a10 = free[0];
        self.a11 = free[1];
        self.a12 = free[2];
        self
    }

    pub fn is_finite(&self) -> bool {
        [self.a10, self.a11, self.a12, self.gamma_minus, self.gamma_plus]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Monomial-basis polynomial of degree ≤ 12 with precomputed derivative coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    // derivs[k][i] is the coefficient of s^i in the k-th derivative.
    derivs: [[f64; N_COEFFS]; 5],
}

impl Polynomial {
    pub fn from_coeffs(coeffs: [f64; N_COEFFS]) -> Self {
        let mut derivs = [[0.0; N_COEFFS]; 5];
        derivs[0] = coeffs;
        for k in 1..5 {
            for i in 0..N_COEFFS - 1 {
                derivs[k][i] = derivs[k - 1][i + 1] * (i + 1) as f64;
            }
        }
        Self { derivs }
    }

    pub fn coeffs(&self) -> &[f64; N_COEFFS] {
        &self.derivs[0]
    }

    /// Horner evaluation; no domain check.
    #[inline]
    pub fn eval(&self, s: f64) -> PolyEval {
        let h = |c: &[f64; N_COEFFS], top: usize| {
            let mut acc = c[top];
            for i in (0..top).rev() {
                acc = acc * s + c[i];
            }
            acc
        };
        PolyEval {
            value: h(&self.derivs[0], DEGREE),
            d1: h(&self.derivs[1], DEGREE - 1),
            d2: h(&self.derivs[2], DEGREE - 2),
            d3: h(&self.derivs[3], DEGREE - 3),
            d4: h(&self.derivs[4], DEGREE - 4),
        }
    }

    pub fn rho_minus(gamma_minus: f64) -> Self {
        let g = gamma_minus - 1.0;
        let mut c = [0.0; N_COEFFS];
        c[0] = 1.0;
        c[5] = 126.0 * g;
        c[6] = -420.0 * g;
        c[7] = 540.0 * g;
        c[8] = -315.0 * g;
        c[9] = 70.0 * g;
        Self::from_coeffs(c)
    }

    pub fn rho_plus(params: &AnsatzParams) -> Self {
        let AnsatzParams { a10, a11, a12, gamma_plus, .. } = *params;
        let g = 1.0 - gamma_plus;
        let mut c = [0.0; N_COEFFS];
        c[0] = 1.0;
        c[5] = -(126.0 * g + a10 + 5.0 * a11 + 15.0 * a12);
        c[6] = 420.0 * g + 5.0 * a10 + 24.0 * a11 + 70.0 * a12;
        c[7] = -(540.0 * g + 10.0 * a10 + 45.0 * a11 + 126.0 * a12);
        c[8] = 315.0 * g + 10.0 * a10 + 40.0 * a11 + 105.0 * a12;
        c[9] = -(70.0 * g + 5.0 * a10 + 15.0 * a11 + 35.0 * a12);
        c[10] = a10;
        c[11] = a11;
        c[12] = a12;
        Self::from_coeffs(c)
    }
}

/// Smoothstep h(s) = 126s⁵ − 420s⁶ + 540s⁷ − 315s⁸ + 70s⁹ and its derivatives.
/// The upper half is taken from h(s) = 1 − h(1 − s) to keep s = 1 exact.
fn smoothstep(s: f64) -> [f64; 5] {
    fn lower(s: f64) -> [f64; 5] {
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s2 * s2;
        [
            s4 * s * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + 70.0 * s)))),
            s4 * (630.0 + s * (-2520.0 + s * (3780.0 + s * (-2520.0 + 630.0 * s)))),
            s3 * (2520.0 + s * (-12600.0 + s * (22680.0 + s * (-17640.0 + 5040.0 * s)))),
            s2 * (7560.0 + s * (-50400.0 + s * (113400.0 + s * (-105840.0 + 35280.0 * s)))),
            s * (15120.0 + s * (-151200.0 + s * (453600.0 + s * (-529200.0 + 211680.0 * s)))),
        ]
    }
    if s <= 0.5 {
        lower(s)
    } else {
        let r = lower(1.0 - s);
        [1.0 - r[0], r[1], -r[2], r[3], -r[4]]
    }
}

/// (s² − s)⁵ and its derivatives.
fn bump(s: f64) -> [f64; 5] {
    let w = s * s - s;
    let w1 = 2.0 * s - 1.0;
    let (w2, w3, w4) = (w * w, w * w * w, w * w * w * w);
    let (v2, v3, v4) = (w1 * w1, w1 * w1 * w1, w1 * w1 * w1 * w1);
    [
        w4 * w,
        5.0 * w4 * w1,
        20.0 * w3 * v2 + 10.0 * w4,
        60.0 * w2 * v3 + 120.0 * w3 * w1,
        120.0 * w * v4 + 720.0 * w2 * v2 + 240.0 * w3,
    ]
}

/// Scaling function in factored form, ρ(s) = 1 + (γ − 1)h(s) + (s² − s)⁵ v(s) with
/// v = a₁₀ + a₁₁(s + 5) + a₁₂(s² + 5s + 15). Same polynomial as [`Polynomial`], but the
/// boundary identities hold to rounding for any size of free coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    jump: f64,
    free: [f64; 3],
}

impl Scaling {
    pub fn rho_minus(gamma_minus: f64) -> Self {
        Self { jump: gamma_minus - 1.0, free: [0.0; 3] }
    }

    pub fn rho_plus(params: &AnsatzParams) -> Self {
        Self { jump: params.gamma_plus - 1.0, free: params.free() }
    }

    /// No domain check.
    #[inline]
    pub fn eval(&self, s: f64) -> PolyEval {
        let h = smoothstep(s);
        let g = self.jump;
        let mut out = [1.0 + g * h[0], g * h[1], g * h[2], g * h[3], g * h[4]];
        let [a10, a11, a12] = self.free;
        if a10 != 0.0 || a11 != 0.0 || a12 != 0.0 {
            let u = bump(s);
            let v = [
                a10 + a11 * (s + 5.0) + a12 * (s * s + 5.0 * s + 15.0),
                a11 + a12 * (2.0 * s + 5.0),
                2.0 * a12,
            ];
            // Leibniz; v is quadratic
            out[0] += u[0] * v[0];
            out[1] += u[1] * v[0] + u[0] * v[1];
            out[2] += u[2] * v[0] + 2.0 * u[1] * v[1] + u[0] * v[2];
            out[3] += u[3] * v[0] + 3.0 * u[2] * v[1] + 3.0 * u[1] * v[2];
            out[4] += u[4] * v[0] + 4.0 * u[3] * v[1] + 6.0 * u[2] * v[2];
        }
        PolyEval { value: out[0], d1: out[1], d2: out[2], d3: out[3], d4: out[4] }
    }
}

fn check_domain(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain(s))
    }
}

pub fn rho_minus(gamma_minus: f64, s: f64) -> Result<PolyEval> {
    check_domain(s)?;
    Ok(Scaling::rho_minus(gamma_minus).eval(s))
}

pub fn rho_plus(params: &AnsatzParams, s: f64) -> Result<PolyEval> {
    check_domain(s)?;
    Ok(Scaling::rho_plus(params).eval(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Minus,
    Plus,
}

/// Which boundary identity a violation refers to: the value (ρ(0) = 1, ρ(1) = γ) or
/// the k-th derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryViolation {
    pub mode: Mode,
    pub s: f64,
    pub order: u8,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub violations: Vec<BoundaryViolation>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BoundaryReport {
    /// Checks the ρ boundary identities for arbitrary polynomials.
    pub fn for_polynomials(
        minus: &Polynomial,
        plus: &Polynomial,
        gamma_minus: f64,
        gamma_plus: f64,
        tol: f64,
    ) -> Self {
        Self::for_evaluators(|s| minus.eval(s), |s| plus.eval(s), gamma_minus, gamma_plus, tol)
    }

    pub fn for_evaluators(
        minus: impl Fn(f64) -> PolyEval,
        plus: impl Fn(f64) -> PolyEval,
        gamma_minus: f64,
        gamma_plus: f64,
        tol: f64,
    ) -> Self {
        let mut violations = Vec::with_capacity(20);
        let evals: [(Mode, &dyn Fn(f64) -> PolyEval, f64); 2] =
            [(Mode::Minus, &minus, gamma_minus), (Mode::Plus, &plus, gamma_plus)];
        for (mode, eval, gamma) in evals {
            for (s, target) in [(0.0, 1.0), (1.0, gamma)] {
                let e = eval(s);
                violations.push(BoundaryViolation { mode, s, order: 0, violation: (e.value - target).abs() });
                for (k, d) in e.derivatives().into_iter().enumerate() {
                    violations.push(BoundaryViolation { mode, s, order: k as u8 + 1, violation: d.abs() });
                }
            }
        }
        let max_violation = violations.iter().map(|v| v.violation).fold(0.0, f64::max);
        Self { violations, max_violation, tolerance: tol, pass: max_violation < tol }
    }

    pub fn worst(&self) -> Option<&BoundaryViolation> {
        self.violations.iter().max_by(|a, b| a.violation.total_cmp(&b.violation))
    }
}

pub fn check_boundaries(params: &AnsatzParams, tol: f64) -> BoundaryReport {
    let (minus, plus) = (Scaling::rho_minus(params.gamma_minus), Scaling::rho_plus(params));
    BoundaryReport::for_evaluators(
        |s| minus.eval(s),
        |s| plus.eval(s),
        params.gamma_minus,
        params.gamma_plus,
        tol,
    )
}
