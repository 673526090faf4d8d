//! Isotropic linear elasticity and the stabilization terms shared by the schemes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fe::assembly::{Atom, DataFn, Op, Region, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LameParams {
    pub e: f64,
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl LameParams {
    pub fn from_e_nu(e: f64, nu: f64) -> Result<Self> {
        if nu == 0.5 {
            return Err(Error::IncompressibleLimit(nu));
        }
        if !(e > 0.0) || !(nu > -1.0 && nu < 0.5) {
            return Err(Error::InvalidParameter(format!("need E > 0 and -1 < nu < 0.5, got E={e}, nu={nu}")));
        }
        Ok(Self { e, nu, mu: e / (2.0 * (1.0 + nu)), lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)) })
    }
}

/// `2 mu sym(G) + lambda tr(G) I` for a row-major displacement gradient `G`.
pub fn stress(grad_u: [[f64; 2]; 2], l: &LameParams) -> [[f64; 2]; 2] {
    let tr = grad_u[0][0] + grad_u[1][1];
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = l.mu * (grad_u[i][j] + grad_u[j][i]) + if i == j { l.lambda * tr } else { 0.0 };
        }
    }
    s
}

/// Stabilization and penalty weights. Each scheme reads only its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    /// Ghost penalty and cell residual (Dirichlet, mixed, crack).
    pub sigma_d: f64,
    /// Dirichlet penalty of the dual and mixed schemes.
    pub gamma: f64,
    /// `y + sigma(u)` matching.
    pub gamma_u: f64,
    /// Multiplier terms of the mixed, interface and crack schemes.
    pub gamma_p: f64,
    /// Flux continuity across the interface.
    pub gamma_y: f64,
    /// `div y = f` least squares.
    pub gamma_div: f64,
    /// `y + sigma(u)` matching on the crack strip.
    pub gamma_u_n: f64,
    /// Neumann relation on the crack strip.
    pub gamma_p_n: f64,
    /// Flux continuity across the fictitious part of the crack line.
    pub sigma_p: f64,
    /// Ghost penalty of the interface scheme.
    pub sigma: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            sigma_d: 20.0,
            gamma: 20.0,
            gamma_u: 1.0,
            gamma_p: 1.0,
            gamma_y: 1.0,
            gamma_div: 1.0,
            gamma_u_n: 1.0,
            gamma_p_n: 1.0,
            sigma_p: 1.0,
            sigma: 0.01,
        }
    }
}

impl SchemeParams {
    pub const KEYS: [&'static str; 10] =
        ["sigma_d", "gamma", "gamma_u", "gamma_p", "gamma_y", "gamma_div", "gamma_u_n", "gamma_p_n", "sigma_p", "sigma"];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "sigma_d" => &mut self.sigma_d,
            "gamma" => &mut self.gamma,
            "gamma_u" => &mut self.gamma_u,
            "gamma_p" => &mut self.gamma_p,
            "gamma_y" => &mut self.gamma_y,
            "gamma_div" => &mut self.gamma_div,
            "gamma_u_n" => &mut self.gamma_u_n,
            "gamma_p_n" => &mut self.gamma_p_n,
            "sigma_p" => &mut self.sigma_p,
            "sigma" => &mut self.sigma,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{key} must be a positive number, got {value}")));
        }
        *self.slot(key).ok_or_else(|| Error::InvalidParameter(format!("unknown scheme parameter {key}")))? = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut copy = *self;
        for k in Self::KEYS {
            let v = *copy.slot(k).unwrap();
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A displacement-like expression `sum_i (phi_h if flag) * field_i`.
pub type FieldExpr = [(usize, bool)];

fn atoms(expr: &FieldExpr, op: Op) -> Vec<Atom> {
    expr.iter()
        .map(|&(f, phi)| {
            let a = Atom::new(f, op);
            if phi {
                a.phi()
            } else {
                a
            }
        })
        .collect()
}

/// `weight * sum_E int_E [sigma(u) n] . [sigma(v) n]`, typically `weight = sigma_D h`.
pub fn ghost_penalty<'a>(facets: Vec<usize>, lame: LameParams, weight: f64, trial: &FieldExpr, test: &FieldExpr) -> Term<'a> {
    Term::bilinear(
        Region::InteriorFacets(facets),
        weight,
        atoms(trial, Op::StressNormal(lame)),
        atoms(test, Op::StressNormal(lame)),
    )
}

/// `weight * int div sigma(u) . div sigma(v)` with right-hand side
/// `-weight * int f . div sigma(v)`; typically `weight = sigma_D h^2`.
pub fn lsq_residual<'a>(
    cells: Vec<usize>,
    lame: LameParams,
    weight: f64,
    trial: &FieldExpr,
    test: &FieldExpr,
    f: Option<DataFn<'a>>,
) -> Term<'a> {
    let data = f.map(|f| -> DataFn<'a> {
        Box::new(move |ctx| {
            let v = f(ctx);
            [-v[0], -v[1], 0.0, 0.0]
        })
    });
    Term {
        region: Region::Cells(cells),
        coef: weight,
        trial: atoms(trial, Op::DivStress(lame)),
        test: atoms(test, Op::DivStress(lame)),
        data,
    }
}

/// `gamma_div * int div y . div z` with right-hand side `gamma_div * int f . div z`.
pub fn div_lsq<'a>(cells: Vec<usize>, tensor_field: usize, gamma_div: f64, f: Option<DataFn<'a>>) -> Term<'a> {
    Term::least_squares(Region::Cells(cells), gamma_div, vec![Atom::new(tensor_field, Op::TensorDiv)], f)
}
