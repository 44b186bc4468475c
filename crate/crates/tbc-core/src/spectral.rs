//! Lobatto-Legendre spectral discretization on a rectangle.
//!
//! The reference square `[-1,1]^2` is mapped affinely onto
//! `(x_l, x_r) x (x_b, x_t)`. Fields are expanded in the tensor product of
//! boundary-adapted Lobatto polynomials
//!
//! ```text
//! phi_0 = (L_0 - L_1)/2,  phi_1 = (L_0 + L_1)/2,
//! phi_k = (L_k - L_{k-2}) / sqrt(2(2k-1)),  k >= 2,
//! ```
//!
//! so that only `phi_0` and `phi_1` are nonzero at the end points. The
//! coefficient matrix `U` of a field therefore carries its traces on the four
//! boundary segments in rows 0, 1 (left, right) and columns 0, 1 (bottom, top).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used for all field arithmetic.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense real matrix.
pub type RMat = DMatrix<f64>;

/// Affine map between the reference square and the physical rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainMap {
    pub x_l: f64,
    pub x_r: f64,
    pub x_b: f64,
    pub x_t: f64,
    /// Half-width in `x1`.
    pub j1: f64,
    /// Half-width in `x2`.
    pub j2: f64,
    /// Center in `x1`.
    pub xbar1: f64,
    /// Center in `x2`.
    pub xbar2: f64,
    /// `j1^-2`.
    pub beta1: f64,
    /// `j2^-2`.
    pub beta2: f64,
}

impl DomainMap {
    /// Builds the map for `(x_l, x_r) x (x_b, x_t)`.
    pub fn new(x_l: f64, x_r: f64, x_b: f64, x_t: f64) -> Result<Self> {
        let finite = [x_l, x_r, x_b, x_t].iter().all(|v| v.is_finite());
        if !finite || x_l >= x_r || x_b >= x_t {
            return Err(Error::Config(format!(
                "invalid domain ({x_l}, {x_r}) x ({x_b}, {x_t})"
            )));
        }
        let j1 = 0.5 * (x_r - x_l);
        let j2 = 0.5 * (x_t - x_b);
        Ok(Self {
            x_l,
            x_r,
            x_b,
            x_t,
            j1,
            j2,
            xbar1: 0.5 * (x_r + x_l),
            xbar2: 0.5 * (x_t + x_b),
            beta1: j1.powi(-2),
            beta2: j2.powi(-2),
        })
    }

    /// The square `(-h, h)^2`.
    pub fn square(h: f64) -> Result<Self> {
        Self::new(-h, h, -h, h)
    }

    /// Physical coordinates of a reference point.
    pub fn to_physical(&self, y1: f64, y2: f64) -> (f64, f64) {
        (self.xbar1 + self.j1 * y1, self.xbar2 + self.j2 * y2)
    }
}

/// Quadrature nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Ascending nodes including both end points.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 2.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Applies the rule to `f` on the reference interval.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }
}

/// Legendre polynomials `L_n(y)` and `L_{n-1}(y)` by the three-term recurrence.
fn legendre_pair(n: usize, y: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, y);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Legendre polynomial `L_n(y)`.
pub fn legendre(n: usize, y: f64) -> f64 {
    legendre_pair(n, y).0
}

const LGL_TOL: f64 = 1e-14;
const LGL_MAX_ITER: usize = 100;

/// Legendre-Gauss-Lobatto rule with `n + 1` nodes: the end points and the
/// roots of `L_n'`, with weights `2 / (n (n+1) L_n(y)^2)`.
///
/// Interior nodes are found by Newton iteration on `L_n'` seeded with the
/// Chebyshev-Gauss-Lobatto points; the rule is symmetrized exactly.
pub fn lgl_grid(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::Config("LGL rule needs degree N >= 1".into()));
    }
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;
    for j in 1..=(n / 2) {
        if 2 * j == n {
            nodes[j] = 0.0;
            continue;
        }
        let mut y = -(std::f64::consts::PI * j as f64 / nf).cos();
        let mut converged = false;
        for _ in 0..LGL_MAX_ITER {
            let (ln, lnm1) = legendre_pair(n, y);
            let one_m_y2 = 1.0 - y * y;
            let d1 = nf * (lnm1 - y * ln) / one_m_y2;
            let d2 = (2.0 * y * d1 - nf * (nf + 1.0) * ln) / one_m_y2;
            let dy = d1 / d2;
            y -= dy;
            if dy.abs() <= LGL_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature {
                index: j,
                iterations: LGL_MAX_ITER,
            });
        }
        nodes[j] = y;
        nodes[n - j] = -y;
    }
    let weights = nodes
        .iter()
        .map(|&y| {
            let ln = legendre(n, y);
            2.0 / (nf * (nf + 1.0) * ln * ln)
        })
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Normalization `1 / sqrt(2(2k-1))` of the interior Lobatto polynomials.
pub fn lobatto_norm(k: usize) -> f64 {
    1.0 / (2.0 * (2.0 * k as f64 - 1.0)).sqrt()
}

/// Values and first derivatives of `phi_0 .. phi_n` at `y`.
pub fn lobatto_table(n: usize, y: f64) -> (Vec<f64>, Vec<f64>) {
    let mut leg = vec![0.0; n + 1];
    leg[0] = 1.0;
    if n >= 1 {
        leg[1] = y;
    }
    for k in 1..n {
        let kf = k as f64;
        leg[k + 1] = ((2.0 * kf + 1.0) * y * leg[k] - kf * leg[k - 1]) / (kf + 1.0);
    }
    let mut val = vec![0.0; n + 1];
    let mut der = vec![0.0; n + 1];
    val[0] = 0.5 * (1.0 - y);
    der[0] = -0.5;
    if n >= 1 {
        val[1] = 0.5 * (1.0 + y);
        der[1] = 0.5;
    }
    for k in 2..=n {
        let c = lobatto_norm(k);
        val[k] = c * (leg[k] - leg[k - 2]);
        // L_k' - L_{k-2}' = (2k-1) L_{k-1}
        der[k] = c * (2.0 * k as f64 - 1.0) * leg[k - 1];
    }
    (val, der)
}

/// Value (`order = 0`) or derivative (`order = 1`) of `phi_k` at `y`.
pub fn lobatto_eval(k: usize, y: f64, order: u8) -> f64 {
    let (val, der) = lobatto_table(k, y);
    if order == 0 {
        val[k]
    } else {
        der[k]
    }
}

/// One-dimensional mass, stiffness and boundary-selector matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralOperators {
    /// Polynomial degree bound `N`; matrices are `(N+1) x (N+1)`.
    pub n: usize,
    /// Gram matrix `(phi_j, phi_k)`.
    pub mass: RMat,
    /// Stiffness matrix `(phi_j', phi_k')`.
    pub stiff: RMat,
    /// `diag(1, 1, 0, ..., 0)`.
    pub lambda: RMat,
}

/// Closed-form mass and stiffness matrices of the Lobatto basis of degree `n`.
///
/// The mass matrix is the complete Gram matrix: besides the pentadiagonal
/// interior block and the 2x2 boundary block it contains the couplings of
/// `phi_0, phi_1` with `phi_2, phi_3`.
pub fn assemble_ops(n: usize) -> Result<SpectralOperators> {
    if n == 0 {
        return Err(Error::Config("operators need degree N >= 1".into()));
    }
    let size = n + 1;
    let mut mass = RMat::zeros(size, size);
    let mut stiff = RMat::zeros(size, size);
    let mut lambda = RMat::zeros(size, size);

    mass[(0, 0)] = 2.0 / 3.0;
    mass[(1, 1)] = 2.0 / 3.0;
    mass[(0, 1)] = 1.0 / 3.0;
    mass[(1, 0)] = 1.0 / 3.0;
    stiff[(0, 0)] = 0.5;
    stiff[(1, 1)] = 0.5;
    stiff[(0, 1)] = -0.5;
    stiff[(1, 0)] = -0.5;
    lambda[(0, 0)] = 1.0;
    lambda[(1, 1)] = 1.0;

    if n >= 2 {
        let m02 = -1.0 / 6f64.sqrt();
        for b in 0..2 {
            mass[(b, 2)] = m02;
            mass[(2, b)] = m02;
        }
    }
    if n >= 3 {
        let m03 = 1.0 / (3.0 * 10f64.sqrt());
        mass[(0, 3)] = m03;
        mass[(3, 0)] = m03;
        mass[(1, 3)] = -m03;
        mass[(3, 1)] = -m03;
    }
    for k in 2..=n {
        let kf = k as f64;
        mass[(k, k)] = 2.0 / ((2.0 * kf + 1.0) * (2.0 * kf - 3.0));
        stiff[(k, k)] = 1.0;
        if k >= 4 {
            let off = -1.0 / ((2.0 * kf - 3.0) * ((2.0 * kf - 1.0) * (2.0 * kf - 5.0)).sqrt());
            mass[(k - 2, k)] = off;
            mass[(k, k - 2)] = off;
        }
    }
    Ok(SpectralOperators {
        n,
        mass,
        stiff,
        lambda,
    })
}

/// Everything needed to move between nodal values and Lobatto coefficients on
/// one rectangle: operators, LGL rules and collocation matrices per direction.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub dom: DomainMap,
    pub ops1: SpectralOperators,
    pub ops2: SpectralOperators,
    pub rule1: QuadratureRule,
    pub rule2: QuadratureRule,
    /// `V1[i, p] = phi_p(y1_i)` on the LGL nodes of direction 1.
    pub vand1: RMat,
    /// `V2[j, q] = phi_q(y2_j)`.
    pub vand2: RMat,
    vand1_inv: RMat,
    vand2_inv: RMat,
}

/// Collocation matrix `V[i, p] = phi_p(nodes_i)`.
pub fn collocation_matrix(n: usize, points: &[f64]) -> RMat {
    let mut v = RMat::zeros(points.len(), n + 1);
    for (i, &y) in points.iter().enumerate() {
        let (val, _) = lobatto_table(n, y);
        for p in 0..=n {
            v[(i, p)] = val[p];
        }
    }
    v
}

fn invert(v: &RMat) -> Result<RMat> {
    let lu = v.clone().lu();
    lu.try_inverse().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })
}

impl Discretization {
    /// Discretization of degree `n1 x n2` on `dom`.
    pub fn new(dom: DomainMap, n1: usize, n2: usize) -> Result<Self> {
        let ops1 = assemble_ops(n1)?;
        let ops2 = assemble_ops(n2)?;
        let rule1 = lgl_grid(n1)?;
        let rule2 = lgl_grid(n2)?;
        let vand1 = collocation_matrix(n1, &rule1.nodes);
        let vand2 = collocation_matrix(n2, &rule2.nodes);
        let vand1_inv = invert(&vand1)?;
        let vand2_inv = invert(&vand2)?;
        Ok(Self {
            dom,
            ops1,
            ops2,
            rule1,
            rule2,
            vand1,
            vand2,
            vand1_inv,
            vand2_inv,
        })
    }

    /// Degree in direction 1.
    pub fn n1(&self) -> usize {
        self.ops1.n
    }

    /// Degree in direction 2.
    pub fn n2(&self) -> usize {
        self.ops2.n
    }

    /// Physical coordinates of the LGL grid, `(x1 nodes, x2 nodes)`.
    pub fn physical_nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let x1 = self
            .rule1
            .nodes
            .iter()
            .map(|&y| self.dom.xbar1 + self.dom.j1 * y)
            .collect();
        let x2 = self
            .rule2
            .nodes
            .iter()
            .map(|&y| self.dom.xbar2 + self.dom.j2 * y)
            .collect();
        (x1, x2)
    }

    /// Samples `f(x1, x2)` on the LGL grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> C64) -> CMat {
        let (x1, x2) = self.physical_nodes();
        CMat::from_fn(x1.len(), x2.len(), |i, j| f(x1[i], x2[j]))
    }

    /// Coefficients whose expansion reproduces `values` on the LGL grid.
    pub fn interpolate(&self, values: &CMat) -> Result<CMat> {
        if values.nrows() != self.n1() + 1 || values.ncols() != self.n2() + 1 {
            return Err(Error::Dimension(format!(
                "nodal grid is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                self.n1() + 1,
                self.n2() + 1
            )));
        }
        let a = to_complex(&self.vand1_inv);
        let b = to_complex(&self.vand2_inv.transpose());
        Ok(a * values * b)
    }

    /// Nodal values of the expansion on the LGL grid.
    pub fn nodal_values(&self, u: &CMat) -> CMat {
        let a = to_complex(&self.vand1);
        let b = to_complex(&self.vand2.transpose());
        a * u * b
    }

    /// Evaluates the expansion on the tensor grid `y1 x y2` of reference points.
    pub fn evaluate(&self, u: &CMat, y1: &[f64], y2: &[f64]) -> CMat {
        let a = to_complex(&collocation_matrix(self.n1(), y1));
        let b = to_complex(&collocation_matrix(self.n2(), y2).transpose());
        a * u * b
    }

    /// Physical-domain L2 norm of nodal data by LGL quadrature.
    pub fn nodal_l2(&self, values: &CMat) -> f64 {
        let mut acc = 0.0;
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                acc += self.rule1.weights[i] * self.rule2.weights[j] * values[(i, j)].norm_sqr();
            }
        }
        (self.dom.j1 * self.dom.j2 * acc).sqrt()
    }

    /// Physical-domain L2 norm of the expansion by LGL quadrature.
    pub fn weighted_l2(&self, u: &CMat) -> f64 {
        self.nodal_l2(&self.nodal_values(u))
    }
}

/// Traces of a field on the four boundary segments.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentTraces {
    /// Row 0: trace on `x1 = x_l`, indexed by the direction-2 basis.
    pub left: DVector<C64>,
    /// Row 1: trace on `x1 = x_r`.
    pub right: DVector<C64>,
    /// Column 0: trace on `x2 = x_b`, indexed by the direction-1 basis.
    pub bottom: DVector<C64>,
    /// Column 1: trace on `x2 = x_t`.
    pub top: DVector<C64>,
}

impl SegmentTraces {
    /// Corner values `[lb, rb, lt, rt]`.
    pub fn corners(&self) -> [C64; 4] {
        [self.left[0], self.right[0], self.left[1], self.right[1]]
    }
}

/// Restriction of a coefficient matrix to the boundary segments.
pub fn restrict(u: &CMat) -> SegmentTraces {
    SegmentTraces {
        left: u.row(0).transpose(),
        right: u.row(1).transpose(),
        bottom: u.column(0).into_owned(),
        top: u.column(1).into_owned(),
    }
}

/// Rows 0 and 1 of `u`, i.e. the nonzero part of `Lambda_1 U`.
pub fn boundary_rows(u: &CMat) -> CMat {
    u.rows(0, 2).into_owned()
}

/// Columns 0 and 1 of `u`, i.e. the nonzero part of `U Lambda_2`.
pub fn boundary_cols(u: &CMat) -> CMat {
    u.columns(0, 2).into_owned()
}

/// Complex copy of a real matrix.
pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

/// Complex copies of the one-dimensional operators of both directions.
#[derive(Clone, Debug)]
pub struct ComplexOperators {
    pub m1: CMat,
    pub s1: CMat,
    pub l1: CMat,
    pub m2: CMat,
    pub s2: CMat,
    pub l2: CMat,
}

impl ComplexOperators {
    /// Operators of `disc` in complex arithmetic.
    pub fn new(disc: &Discretization) -> Self {
        Self {
            m1: to_complex(&disc.ops1.mass),
            s1: to_complex(&disc.ops1.stiff),
            l1: to_complex(&disc.ops1.lambda),
            m2: to_complex(&disc.ops2.mass),
            s2: to_complex(&disc.ops2.stiff),
            l2: to_complex(&disc.ops2.lambda),
        }
    }
}

/// `(N1+1) x (N2+1)` matrix whose rows 0 and 1 are `rows` and which is zero
/// elsewhere.
pub fn embed_rows(rows: &CMat, n1: usize) -> CMat {
    let mut out = CMat::zeros(n1, rows.ncols());
    out.rows_mut(0, 2).copy_from(rows);
    out
}

/// `(N1+1) x (N2+1)` matrix whose columns 0 and 1 are `cols`.
pub fn embed_cols(cols: &CMat, n2: usize) -> CMat {
    let mut out = CMat::zeros(cols.nrows(), n2);
    out.columns_mut(0, 2).copy_from(cols);
    out
}
