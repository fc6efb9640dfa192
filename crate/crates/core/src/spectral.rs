//! Supra-Laplacian `L = I - P` and its eigendecomposition.
//!
//! Walks on undirected networks under RWC or RWD are reversible: a positive
//! diagonal `w` makes `diag(w) P` symmetric. Those matrices are decomposed
//! through the symmetric similarity `W^{1/2} L W^{-1/2}`, which yields real
//! eigenvalues and a well-conditioned basis. Everything else goes through the
//! general (complex) eigensolver.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::walk::SupraTransitionMatrix;

/// Condition number above which the eigenbasis is considered unusable.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative Frobenius reconstruction residual tolerated.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Sorted by real part ascending (ties by imaginary part).
    pub eigenvalues: Vec<c64>,
    /// Right eigenvectors, column `l` for `eigenvalues[l]`.
    pub vectors: Mat<c64>,
    /// `vectors^{-1}`; row `l` is the matching left eigenvector.
    pub inverse: Mat<c64>,
    /// `||V||_F ||V^{-1}||_F / n`, one for a unitary basis.
    pub condition: f64,
    /// `||L - V diag(eigenvalues) V^{-1}||_F / ||L||_F`.
    pub residual: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_degraded(&self) -> bool {
        !(self.condition <= CONDITION_LIMIT && self.residual <= RESIDUAL_LIMIT)
    }

    /// Errors with [`Error::Degraded`] when the basis is unusable.
    pub fn ensure_usable(&self) -> Result<()> {
        if self.is_degraded() {
            Err(Error::Degraded {
                condition: self.condition,
            })
        } else {
            Ok(())
        }
    }
}

/// `I - P` as a dense matrix.
pub fn supra_laplacian(p: &SupraTransitionMatrix) -> Mat<f64> {
    let dim = p.dim();
    let mut l = Mat::<f64>::identity(dim, dim);
    for r in 0..dim {
        for &(c, v) in p.row(r) {
            l[(r, c)] -= v;
        }
    }
    l
}

fn frobenius_real(m: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

fn frobenius_complex(m: &Mat<c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

fn sort_order(values: &[c64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .re
            .total_cmp(&values[b].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    order
}

fn finish(l: &Mat<f64>, values: Vec<c64>, vectors: Mat<c64>, inverse: Mat<c64>) -> SpectralDecomposition {
    let n = values.len();
    let order = sort_order(&values);
    let eigenvalues: Vec<c64> = order.iter().map(|&k| values[k]).collect();
    let vectors = Mat::<c64>::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    let inverse = Mat::<c64>::from_fn(n, n, |i, j| inverse[(order[i], j)]);

    let condition = if n == 0 {
        1.0
    } else {
        frobenius_complex(&vectors) * frobenius_complex(&inverse) / n as f64
    };
    let scaled = Mat::<c64>::from_fn(n, n, |i, j| vectors[(i, j)] * eigenvalues[j]);
    let rebuilt = &scaled * &inverse;
    let mut diff = 0.0;
    for j in 0..n {
        for i in 0..n {
            diff += (rebuilt[(i, j)] - c64::new(l[(i, j)], 0.0)).norm_sqr();
        }
    }
    let norm = frobenius_real(l);
    let residual = if norm > 0.0 { diff.sqrt() / norm } else { diff.sqrt() };
    let condition = if condition.is_finite() { condition } else { f64::INFINITY };
    clear_upper_registers();
    SpectralDecomposition {
        eigenvalues,
        vectors,
        inverse,
        condition,
        residual,
    }
}

/// faer's wide-vector kernels can return with the upper register halves
/// dirty, and every later SSE instruction (libm `exp` among them) then pays a
/// transition stall. Runs `vzeroupper` when AVX is present.
fn clear_upper_registers() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        #[target_feature(enable = "avx")]
        unsafe fn zeroupper() {
            std::arch::x86_64::_mm256_zeroupper();
        }
        // SAFETY: AVX support was detected at runtime.
        unsafe { zeroupper() }
    }
}

/// Full eigendecomposition of a general real matrix.
pub fn decompose(l: &Mat<f64>) -> Result<SpectralDecomposition> {
    let n = l.nrows();
    if n != l.ncols() {
        return Err(Error::InvalidArgument(format!("matrix is {n} x {}", l.ncols())));
    }
    if n == 0 {
        return Ok(finish(l, Vec::new(), Mat::zeros(0, 0), Mat::zeros(0, 0)));
    }
    let evd = l.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let vectors: Mat<c64> = evd.U().to_owned();
    let s = evd.S();
    let values: Vec<c64> = (0..n).map(|k| s[k]).collect();
    let inverse = vectors.partial_piv_lu().inverse();
    Ok(finish(l, values, vectors, inverse))
}

/// Decomposition of `l` given positive `weights` with `diag(weights) l` symmetric.
pub fn decompose_reversible(l: &Mat<f64>, weights: &[f64]) -> Result<SpectralDecomposition> {
    let n = l.nrows();
    if weights.len() != n || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("symmetrizer must be positive, one weight per row".into()));
    }
    if n == 0 {
        return Ok(finish(l, Vec::new(), Mat::zeros(0, 0), Mat::zeros(0, 0)));
    }
    let root: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let sym = Mat::<f64>::from_fn(n, n, |i, j| {
        let a = root[i] * l[(i, j)] / root[j];
        let b = root[j] * l[(j, i)] / root[i];
        0.5 * (a + b)
    });
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let values: Vec<c64> = (0..n).map(|k| c64::new(s[k], 0.0)).collect();
    let vectors = Mat::<c64>::from_fn(n, n, |i, j| c64::new(u[(i, j)] / root[i], 0.0));
    let inverse = Mat::<c64>::from_fn(n, n, |i, j| c64::new(u[(j, i)] * root[j], 0.0));
    Ok(finish(l, values, vectors, inverse))
}

/// Decomposition of `I - P`, using the symmetric route when `P` is reversible.
pub fn decompose_walk(p: &SupraTransitionMatrix) -> Result<SpectralDecomposition> {
    let l = supra_laplacian(p);
    match p.symmetrizer() {
        Some(w) => decompose_reversible(&l, w),
        None => decompose(&l),
    }
}

/// Eigenvalues of `P` sorted by real part descending.
pub fn transition_spectrum(p: &SupraTransitionMatrix) -> Result<Vec<c64>> {
    let dense = p.to_dense();
    let n = dense.nrows();
    let mut values: Vec<c64> = match p.symmetrizer() {
        Some(w) if n > 0 => {
            let root: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            let sym = Mat::<f64>::from_fn(n, n, |i, j| {
                0.5 * (root[i] * dense[(i, j)] / root[j] + root[j] * dense[(j, i)] / root[i])
            });
            sym.self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?
                .into_iter()
                .map(|x| c64::new(x, 0.0))
                .collect()
        }
        _ if n > 0 => dense.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?,
        _ => Vec::new(),
    };
    clear_upper_registers();
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(values)
}

/// `Re(lambda_1) - Re(lambda_2)` of the transition matrix, eigenvalues ordered
/// by real part.
pub fn spectral_gap(p: &SupraTransitionMatrix) -> Result<f64> {
    if p.dim() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral gap needs at least two supra-states, got {}",
            p.dim()
        )));
    }
    let values = transition_spectrum(p)?;
    Ok(values[0].re - values[1].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_multiplex, FlowEdge, LayerId, NodeId, NodeTable};
    use crate::walk::{build_supra_transition, Strategy};

    fn single_layer(n: usize, directed: bool, edges: &[(usize, usize)]) -> SupraTransitionMatrix {
        let nodes = NodeTable::from_labels((0..n).map(|i| format!("n{i}"))).unwrap();
        let edges: Vec<FlowEdge> = edges
            .iter()
            .map(|&(u, v)| FlowEdge {
                source: NodeId(u),
                target: NodeId(v),
                layer: LayerId(0),
                flow: 1.0,
            })
            .collect();
        let net = build_multiplex(nodes, &edges, 1, directed, 0.0).unwrap();
        build_supra_transition(&net, Strategy::Rwc).unwrap()
    }

    fn real_parts(d: &SpectralDecomposition) -> Vec<f64> {
        d.eigenvalues.iter().map(|z| z.re).collect()
    }

    #[test]
    fn triangle_laplacian_entries() {
        let p = single_layer(3, false, &[(0, 1), (1, 2), (0, 2)]);
        let l = supra_laplacian(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 1.0 } else { -0.5 });
            }
        }
    }

    #[test]
    fn self_loop_row_is_zero_in_laplacian() {
        let p = single_layer(2, true, &[(0, 1)]);
        let l = supra_laplacian(&p);
        assert_eq!((l[(1, 0)], l[(1, 1)]), (0.0, 0.0));
        for r in 0..2 {
            assert!((l[(r, 0)] + l[(r, 1)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn k2_spectrum() {
        let p = single_layer(2, false, &[(0, 1)]);
        for d in [decompose_walk(&p).unwrap(), decompose(&supra_laplacian(&p)).unwrap()] {
            let re = real_parts(&d);
            assert!((re[0] - 0.0).abs() < 1e-12 && (re[1] - 2.0).abs() < 1e-12, "{re:?}");
            assert!(!d.is_degraded());
        }
    }

    #[test]
    fn two_components_double_zero() {
        let p = single_layer(4, false, &[(0, 1), (2, 3)]);
        let d = decompose_walk(&p).unwrap();
        let zeros = d.eigenvalues.iter().filter(|z| z.norm() < 1e-9).count();
        assert_eq!(zeros, 2);
    }

    #[test]
    fn triangle_spectrum_both_routes() {
        let p = single_layer(3, false, &[(0, 1), (1, 2), (0, 2)]);
        for d in [decompose_walk(&p).unwrap(), decompose(&supra_laplacian(&p)).unwrap()] {
            let re = real_parts(&d);
            for (got, want) in re.iter().zip([0.0, 1.5, 1.5]) {
                assert!((got - want).abs() < 1e-9, "{re:?}");
            }
            assert!(d.residual < 1e-12);
        }
    }

    #[test]
    fn directed_cycle_is_complex() {
        let p = single_layer(3, true, &[(0, 1), (1, 2), (2, 0)]);
        let d = decompose_walk(&p).unwrap();
        assert!(d.eigenvalues.iter().any(|z| z.im.abs() > 0.5));
        assert!(!d.is_degraded());
        // eigenvalues 1 - e^{2 pi i k / 3}
        assert!(d.eigenvalues[0].norm() < 1e-12);
        assert!((d.eigenvalues[1].re - 1.5).abs() < 1e-12);
    }

    #[test]
    fn defective_matrix_is_flagged() {
        // Jordan block: L = [[1, -1], [0, 1]]
        let l = Mat::<f64>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => 1.0,
            (0, 1) => -1.0,
            _ => 0.0,
        });
        let d = decompose(&l).unwrap();
        assert!(d.is_degraded(), "condition {} residual {}", d.condition, d.residual);
        assert!(matches!(d.ensure_usable(), Err(Error::Degraded { .. })));
    }

    #[test]
    fn gap_cases() {
        let k4 = single_layer(4, false, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!((spectral_gap(&k4).unwrap() - 4.0 / 3.0).abs() < 1e-9);

        let cycle: Vec<(usize, usize)> = (0..8).map(|i| (i, (i + 1) % 8)).collect();
        let c8 = single_layer(8, false, &cycle);
        let want = 1.0 - (std::f64::consts::PI / 4.0).cos();
        assert!((spectral_gap(&c8).unwrap() - want).abs() < 1e-9);

        let split = single_layer(4, false, &[(0, 1), (1, 2), (0, 2), (3, 0)]);
        assert!(spectral_gap(&split).unwrap() >= 0.0);
        let apart = single_layer(6, false, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        assert!(spectral_gap(&apart).unwrap().abs() < 1e-12);

        assert!(spectral_gap(&single_layer(1, false, &[])).is_err());
    }
}
