//! Masked uniform grids over truncated domains and the Dirichlet `-Δ` with
//! Shortley–Weller arms at curved boundaries.
//!
//! Lattice nodes are numbered with the first axis varying fastest; interior
//! nodes receive equation indices in lattice order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeneralOpenSet;

/// Axis-aligned bounding box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl GridBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        GridBox { lo, hi }
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }
}

/// Whether a boundary value belongs to `∂Ω` or to a truncation face of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Physical,
    Artificial,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArmTarget {
    /// Equation index of an interior neighbour.
    Node(usize),
    /// Boundary point where the arm ends.
    Boundary { point: Vec<f64>, kind: BoundaryKind },
}

/// One half of a 1-D stencil: the neighbour lies `theta * h` away.
#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub theta: f64,
    pub target: ArmTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorNode {
    pub lattice: usize,
    pub position: Vec<f64>,
    /// Per axis: `[minus, plus]`.
    pub arms: Vec<[Arm; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior(usize),
    /// On a box face and inside the domain.
    Face,
    /// Outside the domain.
    Exterior,
}

/// Uniform lattice on a box with an inside/outside mask.
#[derive(Clone, Debug)]
pub struct DomainGrid {
    domain: GeneralOpenSet,
    bbox: GridBox,
    h: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    kinds: Vec<NodeKind>,
    interior: Vec<InteriorNode>,
    /// Per axis: whether the `[lo, hi]` face carries domain points.
    artificial: Vec<[bool; 2]>,
}

/// Two-point weights of the 1-D Shortley–Weller second difference with arms
/// `theta_m h`, `theta_p h`: `-u'' ≈ diag u0 - wm um - wp up`.
pub fn shortley_weller(theta_m: f64, theta_p: f64, h: f64) -> (f64, f64, f64) {
    let h2 = h * h;
    let s = theta_m + theta_p;
    let wm = 2.0 / (h2 * theta_m * s);
    let wp = 2.0 / (h2 * theta_p * s);
    (wm + wp, wm, wp)
}

/// Builds the masked lattice on `bbox` with spacing `h`.
///
/// Nodes strictly inside the box and inside `domain` are unknowns. Arms that
/// leave the domain are cut at the boundary, located by bisection to
/// `h * 1e-10`.
pub fn build_grid(domain: &GeneralOpenSet, bbox: &GridBox, h: f64) -> Result<DomainGrid> {
    let dim = bbox.dimension();
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("grid spacing h must be positive"));
    }
    if dim == 0 || dim > 3 || bbox.hi.len() != dim {
        return Err(Error::invalid(
            "box must have matching lo/hi of dimension 1..=3",
        ));
    }
    let mut shape = Vec::with_capacity(dim);
    for a in 0..dim {
        let len = bbox.hi[a] - bbox.lo[a];
        if !(len > 0.0) {
            return Err(Error::invalid(format!("box is degenerate along axis {a}")));
        }
        let cells = (len / h).round();
        if (cells * h - len).abs() > 1e-9 * len.max(1.0) || cells < 2.0 {
            return Err(Error::invalid(format!(
                "box length {len} along axis {a} is not a multiple (>= 2) of h = {h}"
            )));
        }
        shape.push(cells as usize + 1);
    }
    let mut strides = vec![1usize; dim];
    for a in 1..dim {
        strides[a] = strides[a - 1] * shape[a - 1];
    }
    let total: usize = shape.iter().product();

    let position = |idx: usize| -> Vec<f64> {
        (0..dim)
            .map(|a| bbox.lo[a] + ((idx / strides[a]) % shape[a]) as f64 * h)
            .collect()
    };
    let on_face = |idx: usize| -> bool {
        (0..dim).any(|a| {
            let i = (idx / strides[a]) % shape[a];
            i == 0 || i == shape[a] - 1
        })
    };

    let mut kinds = Vec::with_capacity(total);
    let mut artificial = vec![[false; 2]; dim];
    let mut n_interior = 0;
    for idx in 0..total {
        let x = position(idx);
        let inside = domain.contains(&x);
        let kind = if !inside {
            NodeKind::Exterior
        } else if on_face(idx) {
            for (a, faces) in artificial.iter_mut().enumerate() {
                let i = (idx / strides[a]) % shape[a];
                if i == 0 {
                    faces[0] = true;
                }
                if i == shape[a] - 1 {
                    faces[1] = true;
                }
            }
            NodeKind::Face
        } else {
            n_interior += 1;
            NodeKind::Interior(n_interior - 1)
        };
        kinds.push(kind);
    }
    if n_interior == 0 {
        return Err(Error::EmptyInterior);
    }

    let tol = 1e-10;
    let mut interior = Vec::with_capacity(n_interior);
    for idx in 0..total {
        if !matches!(kinds[idx], NodeKind::Interior(_)) {
            continue;
        }
        let x = position(idx);
        let mut arms = Vec::with_capacity(dim);
        for a in 0..dim {
            let make = |dir: f64, nb: usize| -> Arm {
                match kinds[nb] {
                    NodeKind::Interior(k) => Arm {
                        theta: 1.0,
                        target: ArmTarget::Node(k),
                    },
                    NodeKind::Face => Arm {
                        theta: 1.0,
                        target: ArmTarget::Boundary {
                            point: position(nb),
                            kind: BoundaryKind::Artificial,
                        },
                    },
                    NodeKind::Exterior => {
                        let at = |t: f64| {
                            let mut p = x.clone();
                            p[a] += dir * t * h;
                            p
                        };
                        let (mut lo, mut hi) = (0.0f64, 1.0f64);
                        while hi - lo > tol {
                            let mid = 0.5 * (lo + hi);
                            if domain.contains(&at(mid)) {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        // a crossing within tolerance of the neighbour is the neighbour
                        let (theta, point) = if 1.0 - lo <= tol {
                            (1.0, position(nb))
                        } else {
                            (hi, at(hi))
                        };
                        Arm {
                            theta,
                            target: ArmTarget::Boundary {
                                point,
                                kind: BoundaryKind::Physical,
                            },
                        }
                    }
                }
            };
            arms.push([make(-1.0, idx - strides[a]), make(1.0, idx + strides[a])]);
        }
        interior.push(InteriorNode {
            lattice: idx,
            position: x,
            arms,
        });
    }

    Ok(DomainGrid {
        domain: domain.clone(),
        bbox: bbox.clone(),
        h,
        shape,
        strides,
        kinds,
        interior,
        artificial,
    })
}

impl DomainGrid {
    pub fn domain(&self) -> &GeneralOpenSet {
        &self.domain
    }

    pub fn bbox(&self) -> &GridBox {
        &self.bbox
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dimension(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn lattice_len(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[InteriorNode] {
        &self.interior
    }

    pub fn kind(&self, lattice: usize) -> NodeKind {
        self.kinds[lattice]
    }

    pub fn multi_index(&self, lattice: usize) -> Vec<usize> {
        (0..self.dimension())
            .map(|a| (lattice / self.strides[a]) % self.shape[a])
            .collect()
    }

    pub fn lattice_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn position(&self, lattice: usize) -> Vec<f64> {
        (0..self.dimension())
            .map(|a| {
                self.bbox.lo[a] + ((lattice / self.strides[a]) % self.shape[a]) as f64 * self.h
            })
            .collect()
    }

    /// Coordinate of lattice plane `i` along `axis`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.bbox.lo[axis] + i as f64 * self.h
    }

    /// Lattice neighbour one step along `axis` (`dir = ±1`), if it exists.
    pub fn neighbor(&self, lattice: usize, axis: usize, dir: i64) -> Option<usize> {
        let i = (lattice / self.strides[axis]) % self.shape[axis];
        let j = i as i64 + dir;
        if j < 0 || j >= self.shape[axis] as i64 {
            None
        } else {
            Some((lattice as i64 + dir * self.strides[axis] as i64) as usize)
        }
    }

    /// Truncation faces carrying domain points, per axis `[lo, hi]`.
    pub fn artificial_faces(&self) -> &[[bool; 2]] {
        &self.artificial
    }

    /// Distance from `x` to the nearest artificial face.
    pub fn distance_to_artificial(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (a, faces) in self.artificial.iter().enumerate() {
            if faces[0] {
                d = d.min(x[a] - self.bbox.lo[a]);
            }
            if faces[1] {
                d = d.min(self.bbox.hi[a] - x[a]);
            }
        }
        d
    }

    /// `true` when every arm has `theta = 1` (boundary aligned with the lattice).
    pub fn is_flat(&self) -> bool {
        self.interior.iter().all(|n| {
            n.arms
                .iter()
                .all(|pair| pair.iter().all(|arm| arm.theta == 1.0))
        })
    }

    /// Interior-node values of a closure.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior.iter().map(|n| f(&n.position)).collect()
    }

    /// `-Δ_h u` at every interior node, walking the stored arms directly.
    /// Boundary arms read `boundary(point)`.
    pub fn apply_stencil<B: Fn(&[f64]) -> f64>(&self, values: &[f64], boundary: B) -> Vec<f64> {
        let mut out = vec![0.0; self.interior.len()];
        for (row, node) in self.interior.iter().enumerate() {
            let u0 = values[row];
            let mut acc = 0.0;
            for pair in &node.arms {
                let (diag, wm, wp) = shortley_weller(pair[0].theta, pair[1].theta, self.h);
                let read = |arm: &Arm| match &arm.target {
                    ArmTarget::Node(k) => values[*k],
                    ArmTarget::Boundary { point, .. } => boundary(point),
                };
                acc += diag * u0 - wm * read(&pair[0]) - wp * read(&pair[1]);
            }
            out[row] = acc;
        }
        out
    }

    /// Contribution of boundary values to the right-hand side:
    /// `Σ w * trace(point)` over boundary arms of each row.
    pub fn boundary_rhs<B: Fn(&[f64]) -> f64>(&self, trace: B) -> Vec<f64> {
        self.interior
            .iter()
            .map(|node| {
                let mut acc = 0.0;
                for pair in &node.arms {
                    let (_, wm, wp) = shortley_weller(pair[0].theta, pair[1].theta, self.h);
                    for (arm, w) in pair.iter().zip([wm, wp]) {
                        if let ArmTarget::Boundary { point, .. } = &arm.target {
                            acc += w * trace(point);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// All boundary points reached by arms, with their kind, in row order.
    pub fn boundary_points(&self) -> Vec<(Vec<f64>, BoundaryKind)> {
        let mut out = Vec::new();
        for node in &self.interior {
            for pair in &node.arms {
                for arm in pair {
                    if let ArmTarget::Boundary { point, kind } = &arm.target {
                        out.push((point.clone(), *kind));
                    }
                }
            }
        }
        out
    }
}

/// Row-compressed square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds from per-row `(column, value)` lists; columns are sorted and
    /// duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if c >= n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: c + 1,
                    });
                }
                if col_indices.len() > *row_offsets.last().unwrap()
                    && *col_indices.last().unwrap() == c
                {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        let mut op = SparseOperator {
            n,
            row_offsets,
            col_indices,
            values,
            symmetric: false,
        };
        op.symmetric = op.check_symmetric();
        Ok(op)
    }

    fn check_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `A x`, summing each row left to right.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    /// `A + diag(shift)`.
    pub fn with_diagonal_shift(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: shift.len(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.n {
            let r = out.row_offsets[i]..out.row_offsets[i + 1];
            match out.col_indices[r.clone()].binary_search(&i) {
                Ok(k) => out.values[r.start + k] += shift[i],
                Err(_) => {
                    return Err(Error::invalid("operator has no stored diagonal entry"));
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Positive diagonal, nonpositive off-diagonal and weak row diagonal dominance.
    pub fn is_m_matrix_pattern(&self) -> bool {
        (0..self.n).all(|i| {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, v) in self.row(i) {
                if i == j {
                    diag = v;
                } else if v > 0.0 {
                    return false;
                } else {
                    off -= v;
                }
            }
            diag > 0.0 && diag >= off * (1.0 - 1e-14)
        })
    }
}

/// Discrete `-Δ` on the interior nodes of `grid`. Boundary arms contribute
/// only to the diagonal; see [`DomainGrid::boundary_rhs`] for their values.
pub fn assemble_laplacian(grid: &DomainGrid) -> SparseOperator {
    let rows = grid
        .interior
        .iter()
        .enumerate()
        .map(|(row, node)| {
            let mut entries = Vec::with_capacity(2 * node.arms.len() + 1);
            let mut diag_total = 0.0;
            for pair in &node.arms {
                let (diag, wm, wp) = shortley_weller(pair[0].theta, pair[1].theta, grid.h);
                diag_total += diag;
                for (arm, w) in pair.iter().zip([wm, wp]) {
                    if let ArmTarget::Node(k) = arm.target {
                        entries.push((k, -w));
                    }
                }
            }
            entries.push((row, diag_total));
            entries
        })
        .collect();
    SparseOperator::from_rows(rows).expect("stencil columns are interior indices")
}
