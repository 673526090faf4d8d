//! Lagrange shape functions on affine triangles, evaluated as second-order
//! jets (value, gradient, Hessian) in physical coordinates.

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub val: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl Jet {
    pub const ZERO: Jet = Jet { val: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2] };

    pub fn constant(val: f64) -> Self {
        Jet { val, ..Jet::ZERO }
    }

    /// Leibniz rule up to second order.
    pub fn mul(&self, o: &Jet) -> Jet {
        let mut hess = [[0.0; 2]; 2];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                *h = self.hess[i][j] * o.val
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.val * o.hess[i][j];
            }
        }
        Jet {
            val: self.val * o.val,
            grad: [self.grad[0] * o.val + self.val * o.grad[0], self.grad[1] * o.val + self.val * o.grad[1]],
            hess,
        }
    }

    pub fn axpy(&mut self, a: f64, o: &Jet) {
        self.val += a * o.val;
        for i in 0..2 {
            self.grad[i] += a * o.grad[i];
            for j in 0..2 {
                self.hess[i][j] += a * o.hess[i][j];
            }
        }
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [[f64; 2]; 3],
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
}

impl CellGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        // grad(lambda_i) is the inward edge normal of the opposite edge over 2|T|.
        let g = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
        Self { vertices, grad_lambda: [g(b, c), g(c, a), g(a, b)], area: 0.5 * det }
    }

    pub fn point(&self, lambda: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            lambda[0] * v[0][0] + lambda[1] * v[1][0] + lambda[2] * v[2][0],
            lambda[0] * v[0][1] + lambda[1] * v[1][1] + lambda[2] * v[2][1],
        ]
    }

    pub fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let v0 = self.vertices[0];
        let d = [p[0] - v0[0], p[1] - v0[1]];
        let g = &self.grad_lambda;
        let l1 = g[1][0] * d[0] + g[1][1] * d[1];
        let l2 = g[2][0] * d[0] + g[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn centroid(&self) -> [f64; 2] {
        self.point(&[1.0 / 3.0; 3])
    }
}

/// Number of scalar shape functions of the degree-`k` Lagrange triangle.
pub fn n_local_nodes(degree: usize) -> usize {
    match degree {
        0 => 1,
        1 => 3,
        2 => 6,
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}

/// Barycentric coordinates of the local Lagrange nodes: vertices, then the
/// midpoints of the edges opposite vertex 0, 1, 2.
pub fn local_node_barycentric(degree: usize) -> &'static [[f64; 3]] {
    const P0: [[f64; 3]; 1] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
    const P2: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ];
    match degree {
        0 => &P0,
        1 => &P2[..3],
        2 => &P2,
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}

/// Shape-function jets at barycentric point `lambda`; writes `n_local_nodes(degree)`
/// entries into `out`.
pub fn basis_jets(degree: usize, geo: &CellGeometry, lambda: &[f64; 3], out: &mut [Jet]) {
    let gl = &geo.grad_lambda;
    match degree {
        0 => out[0] = Jet::constant(1.0),
        1 => {
            for i in 0..3 {
                out[i] = Jet { val: lambda[i], grad: gl[i], hess: [[0.0; 2]; 2] };
            }
        }
        2 => {
            for i in 0..3 {
                let l = lambda[i];
                let g = gl[i];
                let s = 4.0 * l - 1.0;
                out[i] = Jet {
                    val: l * (2.0 * l - 1.0),
                    grad: [s * g[0], s * g[1]],
                    hess: [[4.0 * g[0] * g[0], 4.0 * g[0] * g[1]], [4.0 * g[1] * g[0], 4.0 * g[1] * g[1]]],
                };
            }
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let (li, lj) = (lambda[i], lambda[j]);
                let (gi, gj) = (gl[i], gl[j]);
                let mut hess = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        hess[a][b] = 4.0 * (gi[a] * gj[b] + gj[a] * gi[b]);
                    }
                }
                out[3 + k] = Jet {
                    val: 4.0 * li * lj,
                    grad: [4.0 * (lj * gi[0] + li * gj[0]), 4.0 * (lj * gi[1] + li * gj[1])],
                    hess,
                };
            }
        }
        _ => panic!("Lagrange degree {degree} is not supported"),
    }
}
