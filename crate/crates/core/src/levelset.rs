//! Analytic level sets of the test geometries and their Lagrange interpolants.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe::element::Jet;
use crate::fe::space::{FeFunction, FeSpace, ValueShape};

/// A scalar function whose negative part is the domain of interest.
pub trait LevelSet: Send + Sync {
    fn eval(&self, p: [f64; 2]) -> f64;
    fn grad(&self, p: [f64; 2]) -> [f64; 2];
    fn hess(&self, p: [f64; 2]) -> [[f64; 2]; 2];
    /// Polynomial degree, `None` if not a polynomial.
    fn degree_hint(&self) -> Option<usize>;
}

/// `(x - cx)^2 + (y - cy)^2 - r^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleLevelSet {
    pub center: [f64; 2],
    pub radius_sq: f64,
}

impl LevelSet for CircleLevelSet {
    fn eval(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        -self.radius_sq + dx * dx + dy * dy
    }

    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        [2.0 * (p[0] - self.center[0]), 2.0 * (p[1] - self.center[1])]
    }

    fn hess(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
        [[2.0, 0.0], [0.0, 2.0]]
    }

    fn degree_hint(&self) -> Option<usize> {
        Some(2)
    }
}

/// `a x + b y + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineLevelSet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LevelSet for AffineLevelSet {
    fn eval(&self, p: [f64; 2]) -> f64 {
        self.a * p[0] + self.b * p[1] + self.c
    }

    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [self.a, self.b]
    }

    fn hess(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }

    fn degree_hint(&self) -> Option<usize> {
        Some(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantLevelSet(pub f64);

impl LevelSet for ConstantLevelSet {
    fn eval(&self, _p: [f64; 2]) -> f64 {
        self.0
    }

    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn hess(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }

    fn degree_hint(&self) -> Option<usize> {
        Some(0)
    }
}

/// `y - amp * sin(2 pi x) - offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineLevelSet {
    pub amplitude: f64,
    pub offset: f64,
}

impl LevelSet for SineLevelSet {
    fn eval(&self, p: [f64; 2]) -> f64 {
        p[1] - self.amplitude * (2.0 * PI * p[0]).sin() - self.offset
    }

    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        [-2.0 * PI * self.amplitude * (2.0 * PI * p[0]).cos(), 1.0]
    }

    fn hess(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        [[4.0 * PI * PI * self.amplitude * (2.0 * PI * p[0]).sin(), 0.0], [0.0, 0.0]]
    }

    fn degree_hint(&self) -> Option<usize> {
        None
    }
}

/// Value, gradient and Hessian of a level set at a point.
pub fn levelset_jet(ls: &dyn LevelSet, p: [f64; 2]) -> Jet {
    Jet { val: ls.eval(p), grad: ls.grad(p), hess: ls.hess(p) }
}

/// Disc of area `pi/8` centred in the unit square.
pub fn circle_levelset() -> CircleLevelSet {
    CircleLevelSet { center: [0.5, 0.5], radius_sq: 0.125 }
}

pub fn interface_levelset(radius: f64) -> Result<CircleLevelSet> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("interface radius must be positive, got {radius}")));
    }
    Ok(CircleLevelSet { center: [0.5, 0.5], radius_sq: radius * radius })
}

/// Crack line `phi = 0` and the tip selector `psi`: the crack is `{phi = 0, psi > 0}`.
pub fn crack_levelsets() -> (SineLevelSet, AffineLevelSet) {
    (SineLevelSet { amplitude: 0.25, offset: 0.5 }, AffineLevelSet { a: 1.0, b: 0.0, c: -0.5 })
}

/// `psi = 0.5 - x`: Dirichlet where `psi < 0`, Neumann where `psi > 0`.
pub fn mixed_secondary_levelset() -> AffineLevelSet {
    AffineLevelSet { a: -1.0, b: 0.0, c: 0.5 }
}

/// Nodal interpolant of `ls` in a scalar space.
pub fn interpolate(ls: &dyn LevelSet, space: &Arc<FeSpace>) -> FeFunction {
    debug_assert_eq!(space.shape(), ValueShape::Scalar);
    space.interpolate(|p| [ls.eval(p)])
}

/// Interpolant of `ls` in the continuous scalar space of degree `k` over the
/// whole background mesh.
pub fn interpolate_on_background(
    ls: &dyn LevelSet,
    mesh: Arc<crate::mesh::BackgroundMesh>,
    k: usize,
) -> Result<FeFunction> {
    if k == 0 {
        return Err(Error::InvalidParameter("level-set interpolant needs degree >= 1".into()));
    }
    let space = Arc::new(FeSpace::on_background(mesh, k, ValueShape::Scalar)?);
    Ok(interpolate(ls, &space))
}
