//! P1 finite elements on the immersed mesh: the weighted Neumann problem
//! `div_Σ(f D^Σu) = n f^{n/(n-1)} - √(|D^Σf|² + f²|H|²) (- 2n b₁ f)` with
//! `⟨D^Σu, ν⟩ = 1` on `∂Σ`, solved by preconditioned conjugate gradients
//! under the mean-zero gauge, plus derivative recovery and the pointwise
//! estimate report.

use super::{ImmersedSubmanifold, MeshScalarField, SubmanifoldError};
use crate::sampling;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Relative CG tolerance.
pub const CG_TOL: f64 = 1.0e-10;

#[derive(Debug, Clone, Copy)]
pub enum NeumannMode {
    Theorem1,
    /// Adds the `-2n b₁ f` interior term.
    Theorem2 { b1: f64 },
}

impl NeumannMode {
    fn b1(&self) -> f64 {
        match self {
            NeumannMode::Theorem1 => 0.0,
            NeumannMode::Theorem2 { b1 } => *b1,
        }
    }
}

/// Symmetric sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == col {
                    acc += row[k].1;
                    k += 1;
                }
                col_idx.push(col);
                vals.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }
}

/// Jacobi-preconditioned conjugate gradients on the singular-consistent
/// system (`K·1 = 0`), with iterates projected off the constant null space.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize), SubmanifoldError> {
    let n = a.n;
    let project = |v: &mut Vec<f64>| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let diag = a.diagonal();
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(&diag)
            .map(|(v, d)| if d.abs() > 1e-300 { v / d } else { *v })
            .collect()
    };
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    project(&mut r);
    let mut z = precond(&r);
    project(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * norm_b {
            return Ok((x, rnorm / norm_b, it));
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        z = precond(&r);
        project(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(SubmanifoldError::SolverStalled {
        residual: rnorm / norm_b,
        iterations: max_iter,
    })
}

/// Hat-function gradients (covector components) on a parameter triangle.
pub(crate) fn hat_gradients(pa: [f64; 2], pb: [f64; 2], pc: [f64; 2]) -> [Vector2<f64>; 3] {
    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    let g1 = Vector2::new(pb[1] - pc[1], pc[0] - pb[0]) / det;
    let g2 = Vector2::new(pc[1] - pa[1], pa[0] - pc[0]) / det;
    let g3 = Vector2::new(pa[1] - pb[1], pb[0] - pa[0]) / det;
    [g1, g2, g3]
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Quadrature {
    /// ∫ √(|D^Σf|² + f²|H|²), ∫ f, ∫ f^{n/(n-1)}, ∮ f for a vertex field.
    pub grad_term: f64,
    pub f_term: f64,
    pub pow_term: f64,
    pub boundary_term: f64,
}

/// Shared quadrature: per-triangle constants at barycenters (gradient and
/// |H| terms), edge-midpoint rule for the nonlinear density power, exact
/// trapezoid for boundary integrals. The load vector uses the same rules so
/// the discrete compatibility identity is exact.
pub(crate) fn integrals(sigma: &ImmersedSubmanifold, f: &MeshScalarField, q: f64) -> Quadrature {
    let mesh = &sigma.mesh;
    let mut grad_term = 0.0;
    let mut f_term = 0.0;
    let mut pow_term = 0.0;
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let area = sigma.tri_area(t);
        let geo = &sigma.tri_geometry[t];
        let grads = hat_gradients(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let df = grads[0] * f.values[a] + grads[1] * f.values[b] + grads[2] * f.values[c];
        let df2 = df.dot(&(geo.induced_inv * df));
        let fbar = (f.values[a] + f.values[b] + f.values[c]) / 3.0;
        let h2 = geo.mean_curvature_norm * geo.mean_curvature_norm;
        grad_term += area * (df2 + fbar * fbar * h2).sqrt();
        for (i, j) in [(a, b), (b, c), (c, a)] {
            let fm = 0.5 * (f.values[i] + f.values[j]);
            f_term += area / 3.0 * fm;
            pow_term += area / 3.0 * fm.powf(q);
        }
    }
    let mut boundary_term = 0.0;
    for e in 0..mesh.boundary_edges.len() {
        let [a, b] = mesh.boundary_edges[e];
        boundary_term += sigma.edge_length(e) * 0.5 * (f.values[a] + f.values[b]);
    }
    Quadrature {
        grad_term,
        f_term,
        pow_term,
        boundary_term,
    }
}

/// Solution of the weighted Neumann problem with recovered derivatives.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    /// Mean-zero potential.
    pub u: MeshScalarField,
    /// Density after the compatibility rescaling.
    pub scaled_density: MeshScalarField,
    pub scale: f64,
    pub pde_residual: f64,
    /// `|Σ load| / Σ|load|` before the drift projection.
    pub compatibility_gap: f64,
    pub cg_iterations: usize,
    /// Per-triangle gradient covector in parameter coordinates.
    pub grad_tri: Vec<Vector2<f64>>,
    /// `|D^Σu|` per vertex (area-averaged triangle gradients).
    pub grad_norm_vertex: Vec<f64>,
    /// Interior vertices with `|D^Σu| < 1`.
    pub omega_mask: Vec<bool>,
    /// Lumped-mass weak Laplacian `Δ_Σu`, interior vertices.
    pub delta_u: Vec<Option<f64>>,
    /// Covariant Hessian in parameter coordinates (least-squares recovery),
    /// interior vertices.
    pub hessian_param: Vec<Option<Matrix2<f64>>>,
    pub lumped_mass: Vec<f64>,
}

pub fn solve_neumann(
    sigma: &ImmersedSubmanifold,
    f: &MeshScalarField,
    mode: NeumannMode,
) -> Result<NeumannSolution, SubmanifoldError> {
    let mesh = &sigma.mesh;
    let nv = mesh.n_vertices();
    let n = sigma.tangent_dim() as f64;
    let q = n / (n - 1.0);
    let b1 = mode.b1();

    let fmin = f.min();
    if fmin <= 0.0 {
        return Err(SubmanifoldError::NonPositiveF(fmin));
    }
    if !mesh.is_connected() {
        return Err(SubmanifoldError::DisconnectedMesh);
    }
    if mesh.boundary_edges.is_empty() {
        return Err(SubmanifoldError::ClosedSurface);
    }

    // compatibility rescaling f → c·f, making
    //   ∫ n(cf)^q = ∫ √(|D(cf)|² + (cf)²|H|²) + 2n b₁ ∫ cf + ∮ cf
    let raw = integrals(sigma, f, q);
    let numerator = raw.grad_term + 2.0 * n * b1 * raw.f_term + raw.boundary_term;
    if numerator <= 0.0 {
        return Err(SubmanifoldError::CompatibilityUnreachable);
    }
    let scale = (numerator / (n * raw.pow_term)).powf(n - 1.0);
    let fs = f.scaled(scale);

    // stiffness with coefficient fs and load with the same quadrature
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.n_triangles());
    let mut unit_triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.n_triangles());
    let mut load = vec![0.0; nv];
    let mut lumped_mass = vec![0.0; nv];
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let ids = [a, b, c];
        let area = sigma.tri_area(t);
        let geo = &sigma.tri_geometry[t];
        let grads = hat_gradients(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let coef = (fs.values[a] + fs.values[b] + fs.values[c]) / 3.0;
        for i in 0..3 {
            lumped_mass[ids[i]] += area / 3.0;
            for j in 0..3 {
                let k = grads[i].dot(&(geo.induced_inv * grads[j])) * area;
                triplets.push((ids[i], ids[j], coef * k));
                unit_triplets.push((ids[i], ids[j], k));
            }
        }

        // interior load: -(n fs^q - W - 2n b₁ fs) φ_i
        let dfs = grads[0] * fs.values[a] + grads[1] * fs.values[b] + grads[2] * fs.values[c];
        let dfs2 = dfs.dot(&(geo.induced_inv * dfs));
        let fsbar = coef;
        let w = (dfs2 + fsbar * fsbar * geo.mean_curvature_norm * geo.mean_curvature_norm).sqrt();
        for i in 0..3 {
            load[ids[i]] += area / 3.0 * w;
        }
        for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let fm = 0.5 * (fs.values[ids[i]] + fs.values[ids[j]]);
            let dens = n * fm.powf(q) - 2.0 * n * b1 * fm;
            // edge midpoint value splits evenly between its two vertices
            load[ids[i]] -= area / 3.0 * 0.5 * dens;
            load[ids[j]] -= area / 3.0 * 0.5 * dens;
        }
    }
    for e in 0..mesh.boundary_edges.len() {
        let [a, b] = mesh.boundary_edges[e];
        let len = sigma.edge_length(e);
        load[a] += len * (fs.values[a] / 3.0 + fs.values[b] / 6.0);
        load[b] += len * (fs.values[a] / 6.0 + fs.values[b] / 3.0);
    }

    let stiffness = CsrMatrix::from_triplets(nv, &triplets);
    let unit_stiffness = CsrMatrix::from_triplets(nv, &unit_triplets);

    let total: f64 = load.iter().sum();
    let scale_l1: f64 = load.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let compatibility_gap = total.abs() / scale_l1;
    let drift = total / nv as f64;
    load.iter_mut().for_each(|v| *v -= drift);

    let (mut u, pde_residual, cg_iterations) =
        conjugate_gradient(&stiffness, &load, CG_TOL, 50 * nv.max(400))?;

    // mean-zero gauge in the lumped-mass inner product
    let mass_total: f64 = lumped_mass.iter().sum();
    let mean: f64 = u
        .iter()
        .zip(&lumped_mass)
        .map(|(v, m)| v * m)
        .sum::<f64>()
        / mass_total;
    u.iter_mut().for_each(|v| *v -= mean);

    // per-triangle gradients and vertex recovery
    let mut grad_tri = Vec::with_capacity(mesh.n_triangles());
    let mut vertex_grad: Vec<Vector2<f64>> = vec![Vector2::zeros(); nv];
    let mut vertex_weight = vec![0.0; nv];
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let area = sigma.tri_area(t);
        let grads = hat_gradients(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let du = grads[0] * u[a] + grads[1] * u[b] + grads[2] * u[c];
        grad_tri.push(du);
        for &v in &[a, b, c] {
            vertex_grad[v] += du * area;
            vertex_weight[v] += area;
        }
    }
    let mut grad_norm_vertex = vec![0.0; nv];
    let mut omega_mask = vec![false; nv];
    for v in 0..nv {
        let g = vertex_grad[v] / vertex_weight[v];
        let norm2 = g.dot(&(sigma.vertex_geometry[v].induced_inv * g));
        grad_norm_vertex[v] = norm2.max(0.0).sqrt();
        omega_mask[v] = !mesh.is_boundary[v] && grad_norm_vertex[v] < 1.0;
    }

    // weak Laplacian: Δu_i = -(K₁ u)_i / m_i at interior vertices
    let mut k1u = vec![0.0; nv];
    unit_stiffness.matvec(&u, &mut k1u);
    let delta_u: Vec<Option<f64>> = (0..nv)
        .map(|v| (!mesh.is_boundary[v]).then(|| -k1u[v] / lumped_mass[v]))
        .collect();

    let hessian_param = recover_hessians(sigma, &u, &omega_mask);

    Ok(NeumannSolution {
        u: MeshScalarField { values: u },
        scaled_density: fs,
        scale,
        pde_residual,
        compatibility_gap,
        cg_iterations,
        grad_tri,
        grad_norm_vertex,
        omega_mask,
        delta_u,
        hessian_param,
        lumped_mass,
    })
}

/// Covariant Hessian recovery: quadratic least-squares over the two-ring,
/// corrected by the induced-metric Christoffel symbols (finite differences
/// of the immersion geometry in parameter coordinates).
fn recover_hessians(
    sigma: &ImmersedSubmanifold,
    u: &[f64],
    wanted: &[bool],
) -> Vec<Option<Matrix2<f64>>> {
    let mesh = &sigma.mesh;
    let nbrs = mesh.vertex_neighbors();
    let mut out = vec![None; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if !wanted[v] {
            continue;
        }
        // two-ring neighborhood
        let mut ring: Vec<usize> = Vec::new();
        for &w in &nbrs[v] {
            if !ring.contains(&w) && w != v {
                ring.push(w);
            }
            for &z in &nbrs[w] {
                if z != v && !ring.contains(&z) {
                    ring.push(z);
                }
            }
        }
        if ring.len() < 5 {
            continue;
        }
        let p0 = mesh.vertices[v];
        let rows = ring.len();
        let mut a = DMatrix::zeros(rows, 5);
        let mut rhs = DVector::zeros(rows);
        for (r, &w) in ring.iter().enumerate() {
            let dx = mesh.vertices[w][0] - p0[0];
            let dy = mesh.vertices[w][1] - p0[1];
            a[(r, 0)] = dx;
            a[(r, 1)] = dy;
            a[(r, 2)] = 0.5 * dx * dx;
            a[(r, 3)] = dx * dy;
            a[(r, 4)] = 0.5 * dy * dy;
            rhs[r] = u[w] - u[v];
        }
        let svd = a.svd(true, true);
        let coef = match svd.solve(&rhs, 1.0e-12) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let grad = Vector2::new(coef[0], coef[1]);
        let hess_raw = Matrix2::new(coef[2], coef[3], coef[3], coef[4]);

        // Christoffel correction from finite differences of the induced
        // metric around the vertex
        let h = 1.0e-5 * (1.0 + (p0[0] * p0[0] + p0[1] * p0[1]).sqrt());
        let metric_at = |p: [f64; 2]| -> Option<Matrix2<f64>> {
            super::point_geometry(&sigma.chart, &sigma.immersion, &p)
                .ok()
                .map(|g| g.induced)
        };
        let (gp0, gm0) = (
            metric_at([p0[0] + h, p0[1]]),
            metric_at([p0[0] - h, p0[1]]),
        );
        let (gp1, gm1) = (
            metric_at([p0[0], p0[1] + h]),
            metric_at([p0[0], p0[1] - h]),
        );
        let (dg0, dg1) = match (gp0, gm0, gp1, gm1) {
            (Some(a0), Some(b0), Some(a1), Some(b1)) => {
                ((a0 - b0) / (2.0 * h), (a1 - b1) / (2.0 * h))
            }
            _ => continue,
        };
        let dg = [dg0, dg1];
        let ginv = sigma.vertex_geometry[v].induced_inv;
        let mut hess = hess_raw;
        for a_i in 0..2 {
            for b_i in 0..2 {
                let mut corr = 0.0;
                for c_i in 0..2 {
                    let mut gamma = 0.0;
                    for d_i in 0..2 {
                        gamma += 0.5
                            * ginv[(c_i, d_i)]
                            * (dg[a_i][(d_i, b_i)] + dg[b_i][(d_i, a_i)] - dg[d_i][(a_i, b_i)]);
                    }
                    corr += gamma * grad[c_i];
                }
                hess[(a_i, b_i)] -= corr;
            }
        }
        out[v] = Some(hess);
    }
    out
}

/// Report of the pointwise estimate
/// `Δ_Σu - ⟨H, y⟩ ≤ n f^{1/(n-1)} (- 2n b₁)` over `Ω` and sampled normal
/// vectors `y` with `|D^Σu|² + |y|² ≤ 1`.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    /// Max positive part over sampled `(x, y)`.
    pub max_positive_part: f64,
    /// Analytic supremum over the normal disk (the `y`-dependence is
    /// linear), for comparison with the sampled value.
    pub max_positive_part_exact: f64,
    pub worst_vertex: Option<usize>,
    pub checked_vertices: usize,
    pub normal_samples: usize,
}

pub fn lemma_pointwise_check(
    sigma: &ImmersedSubmanifold,
    sol: &NeumannSolution,
    normal_samples: usize,
    mode: NeumannMode,
) -> LemmaReport {
    let n = sigma.tangent_dim() as f64;
    let m = sigma.codim();
    let b1 = mode.b1();
    let ball = sampling::unit_ball_points(m, normal_samples.max(1));
    let mut max_pos = 0.0_f64;
    let mut max_exact = 0.0_f64;
    let mut worst = None;
    let mut checked = 0;
    for v in 0..sigma.mesh.n_vertices() {
        if !sol.omega_mask[v] {
            continue;
        }
        let delta = match sol.delta_u[v] {
            Some(d) => d,
            None => continue,
        };
        checked += 1;
        let geom = &sigma.vertex_geometry[v];
        let g = sigma.chart.metric_unchecked(&geom.chart_point);
        let h_coeffs: Vec<f64> = geom
            .normal_frame
            .iter()
            .map(|nu| geom.mean_curvature.dot(&(&g * nu)))
            .collect();
        let bound = n * sol.scaled_density.values[v].powf(1.0 / (n - 1.0)) - 2.0 * n * b1;
        let du = sol.grad_norm_vertex[v];
        let radius = (1.0 - du * du).max(0.0).sqrt();
        let h_norm = h_coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        let exact = delta + radius * h_norm - bound;
        if exact > max_exact {
            max_exact = exact;
        }
        for point in &ball {
            let pairing: f64 = h_coeffs
                .iter()
                .zip(point.iter())
                .map(|(c, y)| c * y * radius)
                .sum();
            let margin = delta - pairing - bound;
            if margin > max_pos {
                max_pos = margin;
                worst = Some(v);
            }
        }
    }
    LemmaReport {
        max_positive_part: max_pos,
        max_positive_part_exact: max_exact,
        worst_vertex: worst,
        checked_vertices: checked,
        normal_samples,
    }
}
