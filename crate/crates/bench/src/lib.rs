//! Shared fixtures for the benchmarks of the assembly, linear solve and
//! eigenvalue kernels.

use epigraph_lab::{build_grid, DomainGrid, EpigraphKind, EpigraphSpec, GeneralOpenSet, GridBox};

/// Unit disk on `[-1, 1]^2` with `cells` cells per axis; every boundary
/// row carries Shortley–Weller arms.
pub fn disk(cells: usize) -> DomainGrid {
    let set = GeneralOpenSet::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    build_grid(
        &set,
        &GridBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
        2.0 / cells as f64,
    )
    .expect("disk grid")
}

/// Window `[-3, 3] x [0, 3]` above the cusp profile.
pub fn cusp(cells_per_unit: usize) -> DomainGrid {
    let spec = EpigraphSpec::new(2, EpigraphKind::LipschitzG1).expect("cusp spec");
    let set = GeneralOpenSet::Epigraph { spec };
    build_grid(
        &set,
        &GridBox::new(vec![-3.0, 0.0], vec![3.0, 3.0]),
        1.0 / cells_per_unit as f64,
    )
    .expect("cusp grid")
}

/// Strip `0 < x_2 < 1` truncated to `[-2, 2]`.
pub fn strip(cells_per_unit: usize) -> DomainGrid {
    let set = GeneralOpenSet::Strip { lo: 0.0, hi: 1.0 };
    build_grid(
        &set,
        &GridBox::new(vec![-2.0, 0.0], vec![2.0, 1.0]),
        1.0 / cells_per_unit as f64,
    )
    .expect("strip grid")
}
