use phantomlab::haar::{compare_with_model, mc_average};

#[test]
fn six_qubits_follow_the_matrix_iteration() {
    let mc = mc_average(6, 2, 10, 10_000, 2024).unwrap();
    let cells = compare_with_model(&mc, 3.0).unwrap();
    let good = cells.iter().filter(|c| c.within).count();
    let frac = good as f64 / cells.len() as f64;
    for c in cells.iter().filter(|c| !c.within) {
        eprintln!(
            "outside 3 sigma: k={} t={} mc={} model={} se={}",
            c.k, c.t, c.mean, c.stderr, c.model
        );
    }
    assert!(frac >= 0.95, "{good}/{} cells within 3 sigma", cells.len());
}

#[test]
fn eight_qubits_follow_the_matrix_iteration() {
    let mc = mc_average(8, 2, 10, 10_000, 2024).unwrap();
    let cells = compare_with_model(&mc, 3.0).unwrap();
    let good = cells.iter().filter(|c| c.within).count();
    assert!(
        good as f64 >= 0.95 * cells.len() as f64,
        "{good}/{} cells within 3 sigma",
        cells.len()
    );
}
