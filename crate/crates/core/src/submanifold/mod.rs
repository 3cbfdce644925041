//! Parametric immersions of a compact surface-with-boundary into an ambient
//! chart: induced metric, second fundamental form, mean curvature, and
//! boundary conormal per vertex; the weighted Neumann problem and the
//! Sobolev functionals live in the submodules.

pub mod functionals;
pub mod mesh;
pub mod neumann;

pub use functionals::{
    functional_lhs, functional_rhs, isoperimetric_rhs, FunctionalMode, IsoperimetricMode,
    LhsBreakdown, RhsBreakdown,
};
pub use mesh::{annulus_mesh, disk_mesh, ParamMesh};
pub use neumann::{lemma_pointwise_check, solve_neumann, LemmaReport, NeumannMode, NeumannSolution};

use crate::geometry::{christoffels_unchecked, GeometryError, MetricChart};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubmanifoldError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("induced metric near-singular at parameter point {point:?} (det {det})")]
    DegenerateImmersion { point: Vec<f64>, det: f64 },
    #[error("mesh is not connected")]
    DisconnectedMesh,
    #[error("mesh invalid: {0}")]
    InvalidMesh(String),
    #[error("density must be strictly positive (min {0})")]
    NonPositiveF(f64),
    #[error("surface is closed; the boundary-flux normalization needs ∂Σ ≠ ∅")]
    ClosedSurface,
    #[error("no positive rescaling satisfies the compatibility condition")]
    CompatibilityUnreachable,
    #[error("linear solver stalled: relative residual {residual} after {iterations} iterations")]
    SolverStalled { residual: f64, iterations: usize },
    #[error("codimension m = {m} below 2; the inequality requires m ≥ 2")]
    BadCodimension { m: usize },
    #[error("submanifold is not minimal: max |H| = {max_h}")]
    NotMinimal { max_h: f64 },
}

type ImmersionMap = dyn Fn(&[f64; 2]) -> DVector<f64> + Send + Sync;
type ImmersionJac = dyn Fn(&[f64; 2]) -> DMatrix<f64> + Send + Sync;
type ImmersionHess = dyn Fn(&[f64; 2]) -> [[DVector<f64>; 2]; 2] + Send + Sync;

/// Immersion of a planar parameter domain into chart coordinates, with
/// optional analytic derivatives (finite differences otherwise).
#[derive(Clone)]
pub struct Immersion {
    pub id: String,
    map: Arc<ImmersionMap>,
    jac: Option<Arc<ImmersionJac>>,
    hess: Option<Arc<ImmersionHess>>,
}

impl Immersion {
    pub fn new(
        id: impl Into<String>,
        map: Arc<ImmersionMap>,
        jac: Option<Arc<ImmersionJac>>,
        hess: Option<Arc<ImmersionHess>>,
    ) -> Self {
        Immersion {
            id: id.into(),
            map,
            jac,
            hess,
        }
    }

    pub fn eval(&self, p: &[f64; 2]) -> DVector<f64> {
        (self.map)(p)
    }

    fn fd_step(p: &[f64; 2]) -> f64 {
        1.0e-4 * (1.0 + (p[0] * p[0] + p[1] * p[1]).sqrt())
    }

    /// `∂_a F` as columns of an N×2 matrix.
    pub fn jacobian(&self, p: &[f64; 2]) -> DMatrix<f64> {
        if let Some(jac) = &self.jac {
            return jac(p);
        }
        let h = Self::fd_step(p);
        let n = self.eval(p).len();
        let mut out = DMatrix::zeros(n, 2);
        for a in 0..2 {
            let mut pp = *p;
            let mut pm = *p;
            pp[a] += h;
            pm[a] -= h;
            out.set_column(a, &((self.eval(&pp) - self.eval(&pm)) / (2.0 * h)));
        }
        out
    }

    /// `∂_a ∂_b F` (symmetric in `a, b`).
    pub fn hessian(&self, p: &[f64; 2]) -> [[DVector<f64>; 2]; 2] {
        if let Some(hess) = &self.hess {
            return hess(p);
        }
        let h = Self::fd_step(p);
        let f0 = self.eval(p);
        let at = |da: f64, db: f64| {
            let q = [p[0] + da, p[1] + db];
            self.eval(&q)
        };
        let dxx = (at(h, 0.0) + at(-h, 0.0) - &f0 * 2.0) / (h * h);
        let dyy = (at(0.0, h) + at(0.0, -h) - &f0 * 2.0) / (h * h);
        let dxy = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        [[dxx, dxy.clone()], [dxy, dyy]]
    }
}

/// Pointwise immersion data: induced metric, tangent frame, second
/// fundamental form, mean curvature, normal frame.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub chart_point: Vec<f64>,
    /// `dF`, N×2.
    pub jacobian: DMatrix<f64>,
    pub induced: Matrix2<f64>,
    pub induced_inv: Matrix2<f64>,
    /// `√det g^Σ`.
    pub area_density: f64,
    /// `II(∂_a, ∂_b)` ambient vectors (normal-projected).
    pub second_form: [[DVector<f64>; 2]; 2],
    /// `H = (g^Σ)^{ab} II(∂_a, ∂_b)`.
    pub mean_curvature: DVector<f64>,
    pub mean_curvature_norm: f64,
    /// g-orthonormal basis of the normal space (m vectors).
    pub normal_frame: Vec<DVector<f64>>,
    /// g-orthonormal tangent vectors (2, from Gram-Schmidt of `dF`).
    pub tangent_frame: Vec<DVector<f64>>,
}

/// Evaluates the full pointwise geometry of `immersion` at `p`.
pub fn point_geometry(
    chart: &MetricChart,
    immersion: &Immersion,
    p: &[f64; 2],
) -> Result<PointGeometry, SubmanifoldError> {
    let x = immersion.eval(p);
    let jac = immersion.jacobian(p);
    let n_amb = chart.dim;
    let (g, gamma) = christoffels_unchecked(chart, x.as_slice());

    let mut induced = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            induced[(a, b)] = jac.column(a).dot(&(&g * jac.column(b)));
        }
    }
    let det = induced.determinant();
    if det < 1.0e-12 {
        return Err(SubmanifoldError::DegenerateImmersion {
            point: p.to_vec(),
            det,
        });
    }
    let induced_inv = induced.try_inverse().expect("det checked above");

    // orthonormal tangent frame from dF columns
    let cols: Vec<DVector<f64>> = (0..2).map(|a| jac.column(a).into_owned()).collect();
    let tangent_frame = crate::transport::greedy_orthonormalize(&g, &cols, 2).ok_or(
        SubmanifoldError::DegenerateImmersion {
            point: p.to_vec(),
            det,
        },
    )?;

    // normal frame: coordinate axes projected off the tangent space
    let mut seeds = tangent_frame.clone();
    for axis in 0..n_amb {
        let mut v = DVector::zeros(n_amb);
        v[axis] = 1.0;
        seeds.push(v);
    }
    let full = crate::transport::greedy_orthonormalize(&g, &seeds, n_amb).ok_or(
        SubmanifoldError::DegenerateImmersion {
            point: p.to_vec(),
            det,
        },
    )?;
    let normal_frame: Vec<DVector<f64>> = full[2..].to_vec();

    // II(∂_a, ∂_b) = (∂²F + Γ̄(dF, dF))^⊥
    let hess = immersion.hessian(p);
    let project_normal = |w: &DVector<f64>| -> DVector<f64> {
        let mut out = w.clone();
        for tau in &tangent_frame {
            let c = tau.dot(&(&g * &out));
            out -= tau * c;
        }
        out
    };
    let mut second_form: [[DVector<f64>; 2]; 2] = [
        [DVector::zeros(n_amb), DVector::zeros(n_amb)],
        [DVector::zeros(n_amb), DVector::zeros(n_amb)],
    ];
    for a in 0..2 {
        for b in 0..2 {
            let mut w = hess[a][b].clone();
            for k in 0..n_amb {
                let mut corr = 0.0;
                for i in 0..n_amb {
                    for j in 0..n_amb {
                        corr += gamma[(k * n_amb + i) * n_amb + j] * jac[(i, a)] * jac[(j, b)];
                    }
                }
                w[k] += corr;
            }
            second_form[a][b] = project_normal(&w);
        }
    }
    let mut mean = DVector::zeros(n_amb);
    for a in 0..2 {
        for b in 0..2 {
            mean += &second_form[a][b] * induced_inv[(a, b)];
        }
    }
    let mean_norm = mean.dot(&(&g * &mean)).sqrt();

    Ok(PointGeometry {
        chart_point: x.as_slice().to_vec(),
        jacobian: jac,
        induced,
        induced_inv,
        area_density: det.sqrt(),
        second_form,
        mean_curvature: mean,
        mean_curvature_norm: mean_norm,
        normal_frame,
        tangent_frame,
    })
}

/// A triangulated immersed submanifold with cached per-vertex and
/// per-triangle geometry.
pub struct ImmersedSubmanifold {
    pub chart: MetricChart,
    pub immersion: Immersion,
    pub mesh: ParamMesh,
    pub refinement: usize,
    pub vertex_geometry: Vec<PointGeometry>,
    /// Geometry at triangle barycenters (quadrature points).
    pub tri_geometry: Vec<PointGeometry>,
    /// Geometry at boundary-edge midpoints, aligned with
    /// `mesh.boundary_edges`.
    pub edge_geometry: Vec<PointGeometry>,
    /// Outward unit conormal per vertex (parameter and ambient components),
    /// boundary vertices only.
    pub conormal: Vec<Option<(Vector2<f64>, DVector<f64>)>>,
    /// Max ambient distance from the chart base point over vertices, when
    /// the chart provides exact distances.
    pub r0: Option<f64>,
}

impl ImmersedSubmanifold {
    pub fn tangent_dim(&self) -> usize {
        2
    }

    pub fn codim(&self) -> usize {
        self.chart.dim - 2
    }

    /// Riemannian area of triangle `t` (barycenter quadrature).
    pub fn tri_area(&self, t: usize) -> f64 {
        self.mesh.param_area(t) * self.tri_geometry[t].area_density
    }

    /// Riemannian length of boundary edge `e`.
    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.mesh.boundary_edges[e];
        let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        let d = Vector2::new(pb[0] - pa[0], pb[1] - pa[1]);
        let gm = &self.edge_geometry[e].induced;
        (d.dot(&(gm * d))).sqrt()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.mesh.n_triangles()).map(|t| self.tri_area(t)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        (0..self.mesh.boundary_edges.len())
            .map(|e| self.edge_length(e))
            .sum()
    }

    pub fn max_mean_curvature(&self) -> f64 {
        self.vertex_geometry
            .iter()
            .map(|v| v.mean_curvature_norm)
            .fold(0.0, f64::max)
    }

    /// Longest edge measured in the induced metric.
    pub fn h_mesh(&self) -> f64 {
        let mut h = 0.0_f64;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let gm = &self.tri_geometry[t].induced;
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
                let d = Vector2::new(pb[0] - pa[0], pb[1] - pa[1]);
                h = h.max(d.dot(&(gm * d)).sqrt());
            }
        }
        h
    }
}

/// Registered immersions.
#[derive(Debug, Clone, PartialEq)]
pub enum ImmersionSpec {
    /// `p ↦ (p₁, p₂, 0, …)`, disk of the given radius.
    FlatDisk { radius: f64 },
    /// `p ↦ (p₁, p₂, 0, …)`, annulus `inner ≤ |p| ≤ outer`.
    FlatAnnulus { inner: f64, outer: f64 },
    /// Geodesic-polar cap of the unit sphere `S² ⊂ ℝ³ ⊂ ℝ^N`:
    /// `p ↦ (sin|p|·p̂, cos|p|, 0, …)`, `|p| ≤ polar_angle`.
    SphericalCap { polar_angle: f64 },
    /// Saddle graph `p ↦ (p₁, p₂, c(p₁² - p₂²)/2, 0, …)`.
    SaddleGraph { radius: f64, coeff: f64 },
    /// Coordinate plane through the center of a warped model chart
    /// (totally geodesic, hence minimal).
    WarpedPlane { radius: f64 },
}

impl ImmersionSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ImmersionSpec::FlatDisk { .. } => "flat_disk",
            ImmersionSpec::FlatAnnulus { .. } => "flat_annulus",
            ImmersionSpec::SphericalCap { .. } => "spherical_cap",
            ImmersionSpec::SaddleGraph { .. } => "saddle_graph",
            ImmersionSpec::WarpedPlane { .. } => "warped_plane",
        }
    }

    fn parameter_mesh(&self, refinement: usize) -> ParamMesh {
        let rings = 1usize << refinement;
        match self {
            ImmersionSpec::FlatDisk { radius } | ImmersionSpec::WarpedPlane { radius } => {
                disk_mesh(*radius, rings)
            }
            ImmersionSpec::SphericalCap { polar_angle } => disk_mesh(*polar_angle, rings),
            ImmersionSpec::SaddleGraph { radius, .. } => disk_mesh(*radius, rings),
            ImmersionSpec::FlatAnnulus { inner, outer } => {
                let angular = 12 * rings;
                annulus_mesh(*inner, *outer, rings.max(2), angular)
            }
        }
    }

    fn immersion(&self, n_amb: usize) -> Immersion {
        match self {
            ImmersionSpec::FlatDisk { .. }
            | ImmersionSpec::FlatAnnulus { .. }
            | ImmersionSpec::WarpedPlane { .. } => {
                let planar = move |p: &[f64; 2]| {
                    let mut x = DVector::zeros(n_amb);
                    x[0] = p[0];
                    x[1] = p[1];
                    x
                };
                let jac = move |_: &[f64; 2]| {
                    let mut j = DMatrix::zeros(n_amb, 2);
                    j[(0, 0)] = 1.0;
                    j[(1, 1)] = 1.0;
                    j
                };
                let hess = move |_: &[f64; 2]| {
                    [
                        [DVector::zeros(n_amb), DVector::zeros(n_amb)],
                        [DVector::zeros(n_amb), DVector::zeros(n_amb)],
                    ]
                };
                Immersion::new(self.id(), Arc::new(planar), Some(Arc::new(jac)), Some(Arc::new(hess)))
            }
            ImmersionSpec::SphericalCap { .. } => {
                let map = move |p: &[f64; 2]| {
                    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    let sinc = if r < 1.0e-8 {
                        1.0 - r * r / 6.0
                    } else {
                        r.sin() / r
                    };
                    let mut x = DVector::zeros(n_amb);
                    x[0] = sinc * p[0];
                    x[1] = sinc * p[1];
                    x[2] = r.cos();
                    x
                };
                Immersion::new(self.id(), Arc::new(map), None, None)
            }
            ImmersionSpec::SaddleGraph { coeff, .. } => {
                let c = *coeff;
                let map = move |p: &[f64; 2]| {
                    let mut x = DVector::zeros(n_amb);
                    x[0] = p[0];
                    x[1] = p[1];
                    x[2] = c * (p[0] * p[0] - p[1] * p[1]) / 2.0;
                    x
                };
                let jac = move |p: &[f64; 2]| {
                    let mut j = DMatrix::zeros(n_amb, 2);
                    j[(0, 0)] = 1.0;
                    j[(1, 1)] = 1.0;
                    j[(2, 0)] = c * p[0];
                    j[(2, 1)] = -c * p[1];
                    j
                };
                let hess = move |_: &[f64; 2]| {
                    let mut dxx = DVector::zeros(n_amb);
                    dxx[2] = c;
                    let mut dyy = DVector::zeros(n_amb);
                    dyy[2] = -c;
                    [[dxx, DVector::zeros(n_amb)], [DVector::zeros(n_amb), dyy]]
                };
                Immersion::new(self.id(), Arc::new(map), Some(Arc::new(jac)), Some(Arc::new(hess)))
            }
        }
    }
}

/// Builds the triangulated immersion with all cached geometry.
pub fn build_immersion(
    chart: &MetricChart,
    spec: &ImmersionSpec,
    refinement: usize,
) -> Result<ImmersedSubmanifold, SubmanifoldError> {
    let mesh = spec.parameter_mesh(refinement);
    mesh.validate().map_err(SubmanifoldError::InvalidMesh)?;
    if !mesh.is_connected() {
        return Err(SubmanifoldError::DisconnectedMesh);
    }
    let immersion = spec.immersion(chart.dim);

    let mut vertex_geometry = Vec::with_capacity(mesh.n_vertices());
    for p in &mesh.vertices {
        vertex_geometry.push(point_geometry(chart, &immersion, p)?);
    }
    let mut tri_geometry = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        tri_geometry.push(point_geometry(chart, &immersion, &mesh.barycenter(t))?);
    }
    let mut edge_geometry = Vec::with_capacity(mesh.boundary_edges.len());
    for &[a, b] in &mesh.boundary_edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        edge_geometry.push(point_geometry(chart, &immersion, &mid)?);
    }

    // outward conormal at boundary vertices: g^Σ-orthogonal to the boundary
    // direction, pointing away from the adjacent triangle centroids
    let mut conormal: Vec<Option<(Vector2<f64>, DVector<f64>)>> = vec![None; mesh.n_vertices()];
    let mut inward: Vec<Vector2<f64>> = vec![Vector2::zeros(); mesh.n_vertices()];
    let mut edge_dir: Vec<Vector2<f64>> = vec![Vector2::zeros(); mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let c = mesh.barycenter(t);
        for &v in tri {
            if mesh.is_boundary[v] {
                inward[v] += Vector2::new(c[0] - mesh.vertices[v][0], c[1] - mesh.vertices[v][1]);
            }
        }
    }
    for &[a, b] in &mesh.boundary_edges {
        let d = Vector2::new(
            mesh.vertices[b][0] - mesh.vertices[a][0],
            mesh.vertices[b][1] - mesh.vertices[a][1],
        );
        edge_dir[a] += d;
        edge_dir[b] += d;
    }
    for v in 0..mesh.n_vertices() {
        if !mesh.is_boundary[v] {
            continue;
        }
        let geom = &vertex_geometry[v];
        let gm = geom.induced;
        let e = edge_dir[v];
        // rotate the tangential direction and orient outward
        let mut nu = Vector2::new(e[1], -e[0]);
        if nu.dot(&(gm * inward[v])) > 0.0 {
            nu = -nu;
        }
        // g^Σ-orthogonalize against the boundary direction and normalize
        let ee = e.dot(&(gm * e));
        if ee > 1.0e-20 {
            let c = nu.dot(&(gm * e)) / ee;
            nu -= e * c;
        }
        let norm = nu.dot(&(gm * nu)).sqrt();
        if norm > 1.0e-12 {
            nu /= norm;
        }
        let ambient = geom.jacobian.column(0) * nu[0] + geom.jacobian.column(1) * nu[1];
        conormal[v] = Some((nu, ambient));
    }

    let r0 = if chart.has_base_distance() {
        Some(
            vertex_geometry
                .iter()
                .map(|g| chart.base_distance(&g.chart_point).unwrap())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    Ok(ImmersedSubmanifold {
        chart: chart.clone(),
        immersion,
        mesh,
        refinement,
        vertex_geometry,
        tri_geometry,
        edge_geometry,
        conormal,
        r0,
    })
}

/// Per-vertex scalar samples with piecewise-linear interpolation implied.
#[derive(Debug, Clone)]
pub struct MeshScalarField {
    pub values: Vec<f64>,
}

impl MeshScalarField {
    pub fn from_fn(mesh: &ParamMesh, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        MeshScalarField {
            values: mesh.vertices.iter().map(f).collect(),
        }
    }

    pub fn constant(mesh: &ParamMesh, c: f64) -> Self {
        MeshScalarField {
            values: vec![c; mesh.n_vertices()],
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Self {
        MeshScalarField {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Field values as CSV (`vertex,value` rows).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}
