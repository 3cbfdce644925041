//! Structured triangulations of the parameter domains (disk by concentric
//! rings, annulus by a polar grid) with orientation and boundary extraction,
//! plus OFF-style export for inspection.

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct ParamMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise triangles.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges oriented with the domain on the left.
    pub boundary_edges: Vec<[usize; 2]>,
    pub is_boundary: Vec<bool>,
}

impl ParamMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn param_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        [
            (self.vertices[a][0] + self.vertices[b][0] + self.vertices[c][0]) / 3.0,
            (self.vertices[a][1] + self.vertices[b][1] + self.vertices[c][1]) / 3.0,
        ]
    }

    /// Longest edge in parameter coordinates.
    pub fn h_param(&self) -> f64 {
        let mut h = 0.0_f64;
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                h = h.max(d);
            }
        }
        h
    }

    /// Manifold/orientation sanity: every edge in at most two triangles,
    /// interior edges traversed once in each direction, boundary edges
    /// forming closed cycles, all triangle areas positive.
    pub fn validate(&self) -> Result<(), String> {
        for t in 0..self.triangles.len() {
            if self.param_area(t) <= 0.0 {
                return Err(format!("triangle {t} not counterclockwise"));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                if directed.insert((a, b), 1).is_some() {
                    return Err(format!("directed edge ({a},{b}) repeated"));
                }
            }
        }
        let mut boundary_count = 0;
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                boundary_count += 1;
            }
        }
        if boundary_count != self.boundary_edges.len() {
            return Err(format!(
                "boundary extraction mismatch: {} vs {}",
                boundary_count,
                self.boundary_edges.len()
            ));
        }
        // boundary cycles closed: every boundary vertex has exactly one
        // outgoing and one incoming boundary edge
        let mut outdeg: HashMap<usize, usize> = HashMap::new();
        let mut indeg: HashMap<usize, usize> = HashMap::new();
        for &[a, b] in &self.boundary_edges {
            *outdeg.entry(a).or_insert(0) += 1;
            *indeg.entry(b).or_insert(0) += 1;
        }
        for (v, d) in &outdeg {
            if *d != 1 || indeg.get(v) != Some(&1) {
                return Err(format!("boundary not a disjoint cycle union at vertex {v}"));
            }
        }
        Ok(())
    }

    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for tri in &self.triangles {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                if !nbrs[a].contains(&b) {
                    nbrs[a].push(b);
                }
                if !nbrs[b].contains(&a) {
                    nbrs[b].push(a);
                }
            }
        }
        nbrs
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let nbrs = self.vertex_neighbors();
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &nbrs[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// OFF-style text export (z = 0 plane).
    pub fn to_off(&self) -> String {
        let mut out = String::new();
        out.push_str("OFF\n");
        out.push_str(&format!(
            "{} {} 0\n",
            self.n_vertices(),
            self.n_triangles()
        ));
        for v in &self.vertices {
            out.push_str(&format!("{} {} 0\n", v[0], v[1]));
        }
        for t in &self.triangles {
            out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        out
    }
}

fn extract_boundary(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> (Vec<[usize; 2]>, Vec<bool>) {
    let mut directed: HashMap<(usize, usize), ()> = HashMap::new();
    for tri in triangles {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            directed.insert((a, b), ());
        }
    }
    let mut boundary = Vec::new();
    let mut is_boundary = vec![false; vertices.len()];
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            boundary.push([a, b]);
            is_boundary[a] = true;
            is_boundary[b] = true;
        }
    }
    boundary.sort();
    (boundary, is_boundary)
}

/// Triangulates the band between two concentric vertex rings given by ids
/// and angles (both sorted ascending, spanning `[0, 2π)`), counterclockwise.
fn triangulate_band(
    inner_ids: &[usize],
    inner_angles: &[f64],
    outer_ids: &[usize],
    outer_angles: &[f64],
    triangles: &mut Vec<[usize; 3]>,
) {
    let ni = inner_ids.len();
    let no = outer_ids.len();
    let mut i = 0usize; // completed inner advances
    let mut j = 0usize; // completed outer advances
    let two_pi = 2.0 * std::f64::consts::PI;
    // advance around both rings, always connecting to the nearer next angle
    while i < ni || j < no {
        let next_inner = if i < ni {
            inner_angles[(i + 1) % ni] + if i + 1 >= ni { two_pi } else { 0.0 }
        } else {
            f64::INFINITY
        };
        let next_outer = if j < no {
            outer_angles[(j + 1) % no] + if j + 1 >= no { two_pi } else { 0.0 }
        } else {
            f64::INFINITY
        };
        let vi = inner_ids[i % ni];
        let vo = outer_ids[j % no];
        if next_outer <= next_inner {
            // advance outer: triangle (vo, vo_next, vi)
            let vo_next = outer_ids[(j + 1) % no];
            triangles.push([vo, vo_next, vi]);
            j += 1;
        } else {
            // advance inner: triangle (vi_next, vi, vo)
            let vi_next = inner_ids[(i + 1) % ni];
            triangles.push([vi_next, vi, vo]);
            i += 1;
        }
    }
}

/// Disk of given radius triangulated by concentric rings; ring `k` of `K`
/// carries `6k` vertices, so element size scales like `radius / K`.
pub fn disk_mesh(radius: f64, rings: usize) -> ParamMesh {
    assert!(rings >= 1);
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_ids: Vec<Vec<usize>> = vec![vec![0]];
    let mut ring_angles: Vec<Vec<f64>> = vec![vec![0.0]];
    for k in 1..=rings {
        let count = 6 * k;
        let r = radius * k as f64 / rings as f64;
        let mut ids = Vec::with_capacity(count);
        let mut angles = Vec::with_capacity(count);
        for j in 0..count {
            let th = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
            ids.push(vertices.len());
            vertices.push([r * th.cos(), r * th.sin()]);
            angles.push(th);
        }
        ring_ids.push(ids);
        ring_angles.push(angles);
    }
    let mut triangles = Vec::new();
    // center fan
    for j in 0..6 {
        let ids = &ring_ids[1];
        triangles.push([0, ids[j], ids[(j + 1) % 6]]);
    }
    for k in 2..=rings {
        triangulate_band(
            &ring_ids[k - 1],
            &ring_angles[k - 1],
            &ring_ids[k],
            &ring_angles[k],
            &mut triangles,
        );
    }
    let (boundary_edges, is_boundary) = extract_boundary(&vertices, &triangles);
    ParamMesh {
        vertices,
        triangles,
        boundary_edges,
        is_boundary,
    }
}

/// Annulus `inner ≤ |p| ≤ outer` on a polar grid with `radial` cells and
/// `angular` sectors.
pub fn annulus_mesh(inner: f64, outer: f64, radial: usize, angular: usize) -> ParamMesh {
    assert!(inner > 0.0 && outer > inner && radial >= 1 && angular >= 3);
    let mut vertices = Vec::with_capacity((radial + 1) * angular);
    for k in 0..=radial {
        let r = inner + (outer - inner) * k as f64 / radial as f64;
        for j in 0..angular {
            let th = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let id = |k: usize, j: usize| k * angular + (j % angular);
    let mut triangles = Vec::new();
    for k in 0..radial {
        for j in 0..angular {
            // split each polar quad into two CCW triangles
            triangles.push([id(k, j), id(k + 1, j), id(k, j + 1)]);
            triangles.push([id(k, j + 1), id(k + 1, j), id(k + 1, j + 1)]);
        }
    }
    let (boundary_edges, is_boundary) = extract_boundary(&vertices, &triangles);
    ParamMesh {
        vertices,
        triangles,
        boundary_edges,
        is_boundary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_mesh_valid_and_area_converges() {
        for rings in [2, 4, 8, 16] {
            let mesh = disk_mesh(1.0, rings);
            mesh.validate().unwrap();
            assert!(mesh.is_connected());
            let area: f64 = (0..mesh.n_triangles()).map(|t| mesh.param_area(t)).sum();
            // inscribed polygon area below π, converging at O(h²)
            assert!(area < std::f64::consts::PI);
            assert!((std::f64::consts::PI - area) < 12.0 / (rings * rings) as f64);
        }
    }

    #[test]
    fn disk_boundary_count() {
        let rings = 5;
        let mesh = disk_mesh(2.0, rings);
        assert_eq!(mesh.boundary_edges.len(), 6 * rings);
        let per = mesh.is_boundary.iter().filter(|b| **b).count();
        assert_eq!(per, 6 * rings);
    }

    #[test]
    fn annulus_mesh_valid() {
        let mesh = annulus_mesh(0.5, 1.0, 4, 24);
        mesh.validate().unwrap();
        assert!(mesh.is_connected());
        // two boundary loops
        assert_eq!(mesh.boundary_edges.len(), 48);
        let area: f64 = (0..mesh.n_triangles()).map(|t| mesh.param_area(t)).sum();
        let exact = std::f64::consts::PI * (1.0 - 0.25);
        assert!((exact - area) / exact < 0.02);
    }

    #[test]
    fn off_export_roundtrips_counts() {
        let mesh = disk_mesh(1.0, 3);
        let off = mesh.to_off();
        let mut lines = off.lines();
        assert_eq!(lines.next(), Some("OFF"));
        let counts: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(counts[0], mesh.n_vertices());
        assert_eq!(counts[1], mesh.n_triangles());
        assert_eq!(off.lines().count(), 2 + mesh.n_vertices() + mesh.n_triangles());
    }
}
