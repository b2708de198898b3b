//! Hamiltonians, couplings and terminal costs, with flat derivatives in the
//! measure variable.
//!
//! Derivatives use one argument order everywhere: `delta_m(x, m, y)` is the
//! derivative of `m -> F(x, m)` in the direction of a unit mass at `y`,
//! normalized so that `sum_y delta_m(x, m, y) m(y) dx = 0`.
//!
//! Measures are density slices on a one-dimensional [`Grid`]; integrals
//! against `m` are the grid quadrature `sum_j f(z_j) m_j dx`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{check_density_slice, Grid};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type BinaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Separated Hamiltonian `H(x, p, m) = h0(x, p) - F(x, m)` in one space dimension.
#[derive(Clone)]
pub struct Hamiltonian {
    label: String,
    h0: BinaryFn,
    dp_h0: BinaryFn,
    l0: BinaryFn,
    dl0: BinaryFn,
    convexity: f64,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("label", &self.label)
            .field("convexity", &self.convexity)
            .finish_non_exhaustive()
    }
}

impl Hamiltonian {
    /// `dl0` is the derivative of the Lagrangian in `alpha`. `convexity` is a
    /// constant `C` with `1/C <= d2 h0 / dp2 <= C`.
    pub fn new(
        label: impl Into<String>,
        h0: BinaryFn,
        dp_h0: BinaryFn,
        l0: BinaryFn,
        dl0: BinaryFn,
        convexity: f64,
    ) -> Result<Self> {
        if !(convexity >= 1.0 && convexity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "convexity constant {convexity} must be finite and >= 1"
            )));
        }
        Ok(Self {
            label: label.into(),
            h0,
            dp_h0,
            l0,
            dl0,
            convexity,
        })
    }

    /// `h0 = p^2/2`, `l0 = alpha^2/2`.
    pub fn quadratic() -> Self {
        Self {
            label: "quadratic".into(),
            h0: Arc::new(|_, p| 0.5 * p * p),
            dp_h0: Arc::new(|_, p| p),
            l0: Arc::new(|_, a| 0.5 * a * a),
            dl0: Arc::new(|_, a| a),
            convexity: 1.0,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn h0(&self, x: f64, p: f64) -> f64 {
        (self.h0)(x, p)
    }

    pub fn dp_h0(&self, x: f64, p: f64) -> f64 {
        (self.dp_h0)(x, p)
    }

    pub fn l0(&self, x: f64, alpha: f64) -> f64 {
        (self.l0)(x, alpha)
    }

    pub fn dl0(&self, x: f64, alpha: f64) -> f64 {
        (self.dl0)(x, alpha)
    }

    pub fn convexity(&self) -> f64 {
        self.convexity
    }

    /// `l0(x, -dp_h0) + h0 - p * dp_h0`, zero when `h0(x, p) = sup_a (-a p - l0(x, a))`.
    pub fn legendre_defect(&self, x: f64, p: f64) -> f64 {
        let q = self.dp_h0(x, p);
        self.l0(x, -q) + self.h0(x, p) - p * q
    }
}

/// Interaction kernels on `T^1 x T^1`.
#[derive(Clone)]
pub enum Kernel {
    /// `cos(2 pi f (x - y))`
    CosDiff { frequency: f64 },
    /// `cos(2 pi f x) cos(2 pi f y)`
    CosProduct { frequency: f64 },
    Custom(BinaryFn),
}

impl Kernel {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::CosDiff { frequency } => (2.0 * PI * frequency * (x - y)).cos(),
            Kernel::CosProduct { frequency } => {
                (2.0 * PI * frequency * x).cos() * (2.0 * PI * frequency * y).cos()
            }
            Kernel::Custom(f) => f(x, y),
        }
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::CosDiff { frequency: 1.0 }
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::CosDiff { frequency } => write!(f, "CosDiff({frequency})"),
            Kernel::CosProduct { frequency } => write!(f, "CosProduct({frequency})"),
            Kernel::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Profile `g` of an x-free coupling `g(int c dm)`.
#[derive(Clone)]
pub enum Profile {
    /// `g(s) = s^2 / 2`
    Quadratic,
    /// `g(s) = s`
    Linear,
    Custom { g: ScalarFn, dg: ScalarFn },
}

impl Profile {
    pub fn g(&self, s: f64) -> f64 {
        match self {
            Profile::Quadratic => 0.5 * s * s,
            Profile::Linear => s,
            Profile::Custom { g, .. } => g(s),
        }
    }

    pub fn dg(&self, s: f64) -> f64 {
        match self {
            Profile::Quadratic => s,
            Profile::Linear => 1.0,
            Profile::Custom { dg, .. } => dg(s),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Quadratic => f.write_str("Quadratic"),
            Profile::Linear => f.write_str("Linear"),
            Profile::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// Weight `c` whose moment drives an x-free coupling.
#[derive(Clone)]
pub enum Moment {
    /// `cos(2 pi f z)`
    Cos { frequency: f64 },
    Constant(f64),
    Custom(ScalarFn),
}

impl Moment {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Moment::Cos { frequency } => (2.0 * PI * frequency * z).cos(),
            Moment::Constant(c) => *c,
            Moment::Custom(f) => f(z),
        }
    }
}

impl fmt::Debug for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Moment::Cos { frequency } => write!(f, "Cos({frequency})"),
            Moment::Constant(c) => write!(f, "Constant({c})"),
            Moment::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum CouplingKind {
    Zero,
    /// `F(x, m) = lambda f(x)`, independent of `m`.
    Static(StaticField),
    /// `F = lambda int phi(x, y) m(dy)`
    Convolution(Kernel),
    /// `F = lambda (int phi(x,y) m(dy) + int phi(z,x) m(dz) - int int phi m m)`
    Efficient(Kernel),
    /// `F = lambda (int k(x,y) m(dy) - int int k m m)`, the normalized
    /// derivative of `(lambda/2) int int k m m`.
    Potential(Kernel),
    /// `F = lambda g(int c m)`
    XFree { profile: Profile, moment: Moment },
}

#[derive(Clone)]
pub struct StaticField(pub ScalarFn);

impl fmt::Debug for StaticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StaticField")
    }
}

/// A coupling `F(x, m)` (or terminal cost `G(x, m)`) with strength `lambda`.
#[derive(Clone, Debug)]
pub struct Coupling {
    label: String,
    strength: f64,
    kind: CouplingKind,
}

/// Terminal costs share the coupling interface.
pub type TerminalCost = Coupling;

/// Quadrature moments of `m` against a kernel.
struct KernelMoments {
    /// `a(x) = int k(x, y) m(dy)`
    a: f64,
    /// `b(x) = int k(z, x) m(dz)`
    b: f64,
    q: f64,
}

impl Coupling {
    pub fn new(label: impl Into<String>, strength: f64, kind: CouplingKind) -> Self {
        Self {
            label: label.into(),
            strength,
            kind,
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, CouplingKind::Zero)
    }

    pub fn static_field(f: ScalarFn, strength: f64) -> Self {
        Self::new("static", strength, CouplingKind::Static(StaticField(f)))
    }

    pub fn convolution(kernel: Kernel, strength: f64) -> Self {
        Self::new("convolution", strength, CouplingKind::Convolution(kernel))
    }

    pub fn efficient(kernel: Kernel, strength: f64) -> Self {
        Self::new("efficient", strength, CouplingKind::Efficient(kernel))
    }

    pub fn potential(kernel: Kernel, strength: f64) -> Self {
        Self::new("potential", strength, CouplingKind::Potential(kernel))
    }

    pub fn xfree(profile: Profile, moment: Moment, strength: f64) -> Self {
        Self::new("xfree", strength, CouplingKind::XFree { profile, moment })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn with_strength(&self, strength: f64) -> Self {
        Self {
            strength,
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CouplingKind::Zero) || self.strength == 0.0
    }

    pub fn is_xfree(&self) -> bool {
        matches!(self.kind, CouplingKind::XFree { .. })
    }

    /// True when `F` does not depend on `m`.
    pub fn is_measure_free(&self) -> bool {
        match &self.kind {
            CouplingKind::Zero | CouplingKind::Static(_) => true,
            CouplingKind::XFree {
                moment: Moment::Constant(_),
                ..
            } => true,
            _ => self.strength == 0.0,
        }
    }

    fn moments(kernel: &Kernel, x: f64, m: &[f64], grid: &Grid) -> KernelMoments {
        let dx = grid.dx();
        let z = grid.coords();
        let mut a = 0.0;
        let mut b = 0.0;
        let mut q = 0.0;
        for (j, zj) in z.iter().enumerate() {
            a += kernel.eval(x, *zj) * m[j] * dx;
            b += kernel.eval(*zj, x) * m[j] * dx;
            for (i, zi) in z.iter().enumerate() {
                q += kernel.eval(*zi, *zj) * m[i] * m[j] * dx * dx;
            }
        }
        KernelMoments { a, b, q }
    }

    fn moment_of(moment: &Moment, m: &[f64], grid: &Grid) -> f64 {
        grid.coords()
            .iter()
            .zip(m)
            .map(|(z, mj)| moment.eval(*z) * mj)
            .sum::<f64>()
            * grid.dx()
    }

    /// `F(x, m)` at an arbitrary point `x`.
    pub fn eval(&self, x: f64, m: &[f64], grid: &Grid) -> Result<f64> {
        check_slice_shape(m, grid)?;
        let lam = self.strength;
        Ok(match &self.kind {
            CouplingKind::Zero => 0.0,
            CouplingKind::Static(StaticField(f)) => lam * f(x),
            CouplingKind::Convolution(k) => lam * Self::moments(k, x, m, grid).a,
            CouplingKind::Efficient(k) => {
                let s = Self::moments(k, x, m, grid);
                lam * (s.a + s.b - s.q)
            }
            CouplingKind::Potential(k) => {
                let s = Self::moments(k, x, m, grid);
                lam * (0.5 * (s.a + s.b) - s.q)
            }
            CouplingKind::XFree { profile, moment } => {
                lam * profile.g(Self::moment_of(moment, m, grid))
            }
        })
    }

    /// Normalized flat derivative `delta F / delta m (x, m, y)`.
    pub fn delta_m(&self, x: f64, m: &[f64], y: f64, grid: &Grid) -> Result<f64> {
        check_slice_shape(m, grid)?;
        let lam = self.strength;
        Ok(match &self.kind {
            CouplingKind::Zero | CouplingKind::Static(_) => 0.0,
            CouplingKind::Convolution(k) => {
                lam * (k.eval(x, y) - Self::moments(k, x, m, grid).a)
            }
            CouplingKind::Efficient(k) => {
                let sx = Self::moments(k, x, m, grid);
                let sy = Self::moments(k, y, m, grid);
                lam * (k.eval(x, y) + k.eval(y, x) - sy.a - sy.b - sx.a - sx.b + 2.0 * sx.q)
            }
            CouplingKind::Potential(k) => {
                let sx = Self::moments(k, x, m, grid);
                let sy = Self::moments(k, y, m, grid);
                lam * (0.5 * (k.eval(x, y) + k.eval(y, x)) - sy.a - sy.b
                    + 2.0 * sx.q
                    - 0.5 * (sx.a + sx.b))
            }
            CouplingKind::XFree { profile, moment } => {
                let s = Self::moment_of(moment, m, grid);
                lam * profile.dg(s) * (moment.eval(y) - s)
            }
        })
    }

    /// Precomputes kernel matrices for repeated evaluation on grid points.
    pub fn on_grid(&self, grid: &Grid) -> Result<GridCoupling> {
        grid.require_1d()?;
        let n = grid.n();
        let x = grid.coords();
        let kernel_matrix = |k: &Kernel| {
            let mut mat = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    mat[i * n + j] = k.eval(x[i], x[j]);
                }
            }
            mat
        };
        let form = match &self.kind {
            CouplingKind::Zero => GridForm::Zero,
            CouplingKind::Static(StaticField(f)) => {
                GridForm::Static(x.iter().map(|xi| f(*xi)).collect())
            }
            CouplingKind::Convolution(k) => GridForm::Kernel(KernelUse::Convolution, kernel_matrix(k)),
            CouplingKind::Efficient(k) => GridForm::Kernel(KernelUse::Efficient, kernel_matrix(k)),
            CouplingKind::Potential(k) => {
                // only the symmetric part of the kernel enters a potential
                let mut mat = kernel_matrix(k);
                for i in 0..n {
                    for j in 0..i {
                        let s = 0.5 * (mat[i * n + j] + mat[j * n + i]);
                        mat[i * n + j] = s;
                        mat[j * n + i] = s;
                    }
                }
                GridForm::Kernel(KernelUse::Potential, mat)
            }
            CouplingKind::XFree { profile, moment } => GridForm::XFree {
                c: x.iter().map(|z| moment.eval(*z)).collect(),
                profile: profile.clone(),
            },
        };
        Ok(GridCoupling {
            strength: self.strength,
            n,
            dx: grid.dx(),
            form,
        })
    }
}

fn check_slice_shape(m: &[f64], grid: &Grid) -> Result<()> {
    grid.require_1d()?;
    grid.check_len(m.len(), grid.n())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum KernelUse {
    Convolution,
    Efficient,
    Potential,
}

#[derive(Clone, Debug)]
enum GridForm {
    Zero,
    Static(Vec<f64>),
    Kernel(KernelUse, Vec<f64>),
    XFree { c: Vec<f64>, profile: Profile },
}

/// A coupling restricted to the points of a fixed grid.
#[derive(Clone, Debug)]
pub struct GridCoupling {
    strength: f64,
    n: usize,
    dx: f64,
    form: GridForm,
}

/// Per-slice moments reused by field evaluations.
struct SliceMoments {
    a: Vec<f64>,
    b: Vec<f64>,
    q: f64,
}

impl GridCoupling {
    fn slice_moments(&self, k: &[f64], m: &[f64]) -> SliceMoments {
        let n = self.n;
        let dx = self.dx;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for i in 0..n {
            let row = &k[i * n..(i + 1) * n];
            a[i] = row.iter().zip(m).map(|(kij, mj)| kij * mj).sum::<f64>() * dx;
            for j in 0..n {
                b[j] += row[j] * m[i] * dx;
            }
        }
        let q = a.iter().zip(m).map(|(ai, mi)| ai * mi).sum::<f64>() * dx;
        SliceMoments { a, b, q }
    }

    fn moment(&self, c: &[f64], m: &[f64]) -> f64 {
        c.iter().zip(m).map(|(ci, mi)| ci * mi).sum::<f64>() * self.dx
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// `F(x_i, m)` for every grid point.
    pub fn eval(&self, m: &[f64]) -> Vec<f64> {
        let lam = self.strength;
        match &self.form {
            GridForm::Zero => vec![0.0; self.n],
            GridForm::Static(f) => f.iter().map(|v| lam * v).collect(),
            GridForm::Kernel(usage, k) => {
                let s = self.slice_moments(k, m);
                (0..self.n)
                    .map(|i| {
                        lam * match usage {
                            KernelUse::Convolution => s.a[i],
                            KernelUse::Efficient => s.a[i] + s.b[i] - s.q,
                            KernelUse::Potential => s.a[i] - s.q,
                        }
                    })
                    .collect()
            }
            GridForm::XFree { c, profile } => {
                vec![lam * profile.g(self.moment(c, m)); self.n]
            }
        }
    }

    /// Row-major matrix `D[i * n + j] = delta_m(x_i, m, y_j)`.
    pub fn delta_matrix(&self, m: &[f64]) -> Vec<f64> {
        let n = self.n;
        let lam = self.strength;
        let mut out = vec![0.0; n * n];
        match &self.form {
            GridForm::Zero | GridForm::Static(_) => {}
            GridForm::Kernel(usage, k) => {
                let s = self.slice_moments(k, m);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = lam
                            * match usage {
                                KernelUse::Convolution => k[i * n + j] - s.a[i],
                                KernelUse::Efficient => {
                                    k[i * n + j] + k[j * n + i] - s.a[j] - s.b[j] - s.a[i] - s.b[i]
                                        + 2.0 * s.q
                                }
                                KernelUse::Potential => k[i * n + j] - 2.0 * s.a[j] - s.a[i] + 2.0 * s.q,
                            };
                    }
                }
            }
            GridForm::XFree { c, profile } => {
                let s = self.moment(c, m);
                let slope = lam * profile.dg(s);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = slope * (c[j] - s);
                    }
                }
            }
        }
        out
    }

    /// Efficiency residual `r(y_j) = sum_i delta_m(x_i, m, y_j) m_i dx`.
    pub fn residual(&self, m: &[f64]) -> Vec<f64> {
        let n = self.n;
        if matches!(self.form, GridForm::Zero | GridForm::Static(_)) {
            return vec![0.0; n];
        }
        let d = self.delta_matrix(m);
        let mut r = vec![0.0; n];
        for i in 0..n {
            let w = m[i] * self.dx;
            for (rj, dij) in r.iter_mut().zip(&d[i * n..(i + 1) * n]) {
                *rj += dij * w;
            }
        }
        r
    }

    /// `int F(x, m) m(dx)`.
    pub fn mean_cost(&self, m: &[f64]) -> f64 {
        self.eval(m).iter().zip(m).map(|(f, mi)| f * mi).sum::<f64>() * self.dx
    }

    /// Normalized derivative of `m -> int G(x, m) m(dx)`:
    /// `residual(y) + G(y, m) - int G m`.
    pub fn delta_ghat(&self, m: &[f64]) -> Vec<f64> {
        let g = self.eval(m);
        let mean = g.iter().zip(m).map(|(gi, mi)| gi * mi).sum::<f64>() * self.dx;
        self.residual(m)
            .iter()
            .zip(&g)
            .map(|(r, gi)| r + gi - mean)
            .collect()
    }
}

/// Efficiency residual of a coupling on a density slice.
pub fn residual_f(coupling: &Coupling, m: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    validate_slice(m, grid)?;
    Ok(coupling.on_grid(grid)?.residual(m))
}

/// `delta Ghat / delta m (m, y)` for `Ghat(m) = int G(x, m) m(dx)`.
pub fn delta_ghat(terminal: &TerminalCost, m: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    validate_slice(m, grid)?;
    Ok(terminal.on_grid(grid)?.delta_ghat(m))
}

fn validate_slice(m: &[f64], grid: &Grid) -> Result<()> {
    check_slice_shape(m, grid)?;
    check_density_slice(m, grid).map_err(|reason| Error::InvalidDensity { level: 0, reason })
}

/// Relative error between `delta_m(x, m, y)` (minus its `m`-average) and a
/// central difference of `F(x, .)` along `delta_y - m`, where `delta_y` is the
/// single-cell spike of mass one at the grid point nearest to `y`.
pub fn delta_m_fd_check(
    coupling: &Coupling,
    m: &[f64],
    x: f64,
    y: f64,
    s: f64,
    grid: &Grid,
) -> Result<f64> {
    validate_slice(m, grid)?;
    if !(s > 0.0 && s <= 1e-3) {
        return Err(Error::InvalidArgument(format!("step {s} not in (0, 1e-3]")));
    }
    let n = grid.n();
    let j = ((y.rem_euclid(1.0) / grid.dx()).round() as usize) % n;
    let yj = grid.coord(j);
    let mut plus = m.to_vec();
    let mut minus = m.to_vec();
    for i in 0..n {
        let spike = if i == j { 1.0 / grid.dx() } else { 0.0 };
        plus[i] += s * (spike - m[i]);
        minus[i] -= s * (spike - m[i]);
    }
    let fd = (coupling.eval(x, &plus, grid)? - coupling.eval(x, &minus, grid)?) / (2.0 * s);
    let mut avg = 0.0;
    for (i, mi) in m.iter().enumerate() {
        avg += coupling.delta_m(x, m, grid.coord(i), grid)? * mi * grid.dx();
    }
    let analytic = coupling.delta_m(x, m, yj, grid)? - avg;
    let scale = analytic.abs().max(fd.abs()).max(1e-6);
    Ok((fd - analytic).abs() / scale)
}

/// Data of a separated problem on a one-dimensional grid.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: Grid,
    pub hamiltonian: Hamiltonian,
    pub coupling: Coupling,
    pub terminal: TerminalCost,
    pub m0: Vec<f64>,
}

impl Problem {
    pub fn new(
        grid: Grid,
        hamiltonian: Hamiltonian,
        coupling: Coupling,
        terminal: TerminalCost,
        m0: Vec<f64>,
    ) -> Result<Self> {
        grid.require_1d()?;
        validate_slice(&m0, &grid)?;
        Ok(Self {
            grid,
            hamiltonian,
            coupling,
            terminal,
            m0,
        })
    }

    pub fn with_coupling(&self, coupling: Coupling) -> Self {
        Self {
            coupling,
            ..self.clone()
        }
    }
}

/// Uniform density.
pub fn uniform_density(grid: &Grid) -> Vec<f64> {
    vec![1.0; grid.n()]
}

/// `1 + a cos(2 pi f x)`, renormalized to unit mass on the grid.
pub fn cosine_density(grid: &Grid, amplitude: f64, frequency: f64) -> Result<Vec<f64>> {
    if !(amplitude.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude {amplitude} must satisfy |a| < 1 to keep the density positive"
        )));
    }
    let m: Vec<f64> = grid
        .coords()
        .iter()
        .map(|x| 1.0 + amplitude * (2.0 * PI * frequency * x).cos())
        .collect();
    let mass = m.iter().sum::<f64>() * grid.dx();
    Ok(m.into_iter().map(|v| v / mass).collect())
}
