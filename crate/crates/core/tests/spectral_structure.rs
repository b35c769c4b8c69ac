use phantomlab::model::{make_params, t_block};
use phantomlab::pseudospectrum::eigenvalues;
use phantomlab::spectral::eigenvalue;
use phantomlab::spectral::structure::structure_report;

#[test]
fn decomposition_is_complete_and_sectors_are_orthogonal() {
    for n in (6..=24).step_by(2) {
        for d in [2u32, 5] {
            let r = structure_report(&make_params(n, 2, d).unwrap(), true).unwrap();
            assert!(r.completeness.unwrap() < 1e-10, "{r:?}");
            assert!(r.sectors.unwrap() < 1e-10, "{r:?}");
        }
    }
}

#[test]
fn eigenpairs_up_to_forty() {
    for n in (4..=40).step_by(2) {
        for d in [2u32, 3, 5] {
            let r = structure_report(&make_params(n, 2, d).unwrap(), false).unwrap();
            assert!(r.residual < 1e-12, "{r:?}");
            assert!(r.biorthogonality < 1e-10, "{r:?}");
            assert!(r.signs_ok, "{r:?}");
        }
    }
}

#[test]
fn closed_form_eigenvalues_match_a_dense_solver() {
    let p = make_params(8, 2, 2).unwrap();
    let mut dense: Vec<f64> = eigenvalues(t_block::<f64>(&p))
        .unwrap()
        .into_iter()
        .map(|(re, _)| re)
        .collect();
    dense.sort_by(|a, b| b.total_cmp(a));
    // three nonzero modes, then the kernel (a triple zero, split to ~eps^{1/3})
    for j in 1..4 {
        let want: f64 = eigenvalue(&p, j);
        assert!(
            (dense[j - 1] - want).abs() < 1e-12,
            "j={j}: {} vs {want}",
            dense[j - 1]
        );
    }
}
