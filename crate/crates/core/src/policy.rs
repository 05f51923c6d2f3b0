//! From optimal weights to feedback controls: state marginals, the control
//! kernels `η0`/`η1`, and strict controls where the kernels are point masses.

use serde::{Deserialize, Serialize};

use crate::discretize::{Atom, DiscreteLP, Grid};

/// Weights at or below this magnitude are treated as zero.
pub const WEIGHT_FLOOR: f64 = 1e-12;

pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("w0 carries no mass")]
    ZeroMass,
    #[error("weight {value} at column {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights do not match the grid: {0}")]
    Dimension(String),
    #[error("w0 mass {got} differs from the required {required}")]
    Mass { got: f64, required: f64 },
}

/// Discrete occupation measures: `w0` on the `μ0` atoms, `w1` on the `μ1` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurePair {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
}

impl MeasurePair {
    /// Splits a solution vector of `lp` into its two measures.
    pub fn from_columns(lp: &DiscreteLP, w: &[f64]) -> Self {
        MeasurePair { w0: w[..lp.n_mu0].to_vec(), w1: w[lp.n_mu0..lp.n_mu0 + lp.n_mu1].to_vec() }
    }

    pub fn columns(&self) -> Vec<f64> {
        self.w0.iter().chain(&self.w1).copied().collect()
    }

    pub fn mass0(&self) -> f64 {
        self.w0.iter().sum()
    }

    pub fn mass1(&self) -> f64 {
        self.w1.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        MeasurePair {
            w0: self.w0.iter().map(|w| w * factor).collect(),
            w1: self.w1.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn check_mass(&self, required: f64) -> Result<(), PolicyError> {
        let got = self.mass0();
        if (got - required).abs() > 1e-8 {
            return Err(PolicyError::Mass { got, required });
        }
        Ok(())
    }
}

/// Conditional control distribution at one state node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub node: usize,
    pub x: f64,
    /// `(u, probability)` pairs in grid order.
    pub controls: Vec<(f64, f64)>,
}

impl KernelRow {
    /// Most probable control; the first in grid order on ties.
    pub fn argmax(&self) -> (f64, f64) {
        self.controls
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
    }
}

/// Disintegration of one measure: rows exist only on nodes of positive
/// marginal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Kernel {
    pub rows: Vec<KernelRow>,
}

impl Kernel {
    pub fn row(&self, node: usize) -> Option<&KernelRow> {
        self.rows.binary_search_by_key(&node, |r| r.node).ok().map(|i| &self.rows[i])
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMass {
    pub node: usize,
    pub x: f64,
    pub mass: f64,
}

/// A strict control at one node, for whichever kernels are defined there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictControl {
    pub node: usize,
    pub x: f64,
    pub u0: Option<f64>,
    pub u1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPolicy {
    pub state_nodes: Vec<f64>,
    /// Positive entries of `μ0^E` in node order.
    pub mu0_marginal: Vec<NodeMass>,
    /// Positive entries of `μ1^E` in node order.
    pub mu1_marginal: Vec<NodeMass>,
    pub eta0: Kernel,
    pub eta1: Kernel,
    pub strict: Option<Vec<StrictControl>>,
}

impl FeedbackPolicy {
    pub fn mu0_total(&self) -> f64 {
        self.mu0_marginal.iter().map(|m| m.mass).sum()
    }

    pub fn mu1_total(&self) -> f64 {
        self.mu1_marginal.iter().map(|m| m.mass).sum()
    }

    /// `μ0^E` normalized to a probability vector over all state nodes.
    pub fn mu0_distribution(&self) -> Vec<f64> {
        let total = self.mu0_total();
        let mut p = vec![0.0; self.state_nodes.len()];
        for m in &self.mu0_marginal {
            p[m.node] = m.mass / total;
        }
        p
    }

    /// Measures obtained by moving each node's marginal onto its strict
    /// control atom. `None` when the policy has no strict map.
    pub fn strict_measures(&self, grid: &Grid) -> Option<MeasurePair> {
        let strict = self.strict.as_ref()?;
        let pick = |atoms: &[Atom], marginal: &[NodeMass], choose: fn(&StrictControl) -> Option<f64>| {
            let mut w = vec![0.0; atoms.len()];
            for m in marginal {
                let s = strict.iter().find(|s| s.node == m.node)?;
                let u = choose(s)?;
                let j = atoms.iter().position(|a| a.node == m.node && a.u == u)?;
                w[j] = m.mass;
            }
            Some(w)
        };
        Some(MeasurePair {
            w0: pick(&grid.mu0_atoms, &self.mu0_marginal, |s| s.u0)?,
            w1: pick(&grid.mu1_atoms, &self.mu1_marginal, |s| s.u1)?,
        })
    }
}

fn disintegrate(atoms: &[Atom], weights: &[f64], offset: usize) -> Result<(Vec<NodeMass>, Kernel), PolicyError> {
    if atoms.len() != weights.len() {
        return Err(PolicyError::Dimension(format!("{} atoms, {} weights", atoms.len(), weights.len())));
    }
    // Atoms are grouped by node in grid order; keep that order.
    let mut marginal: Vec<NodeMass> = Vec::new();
    let mut rows: Vec<KernelRow> = Vec::new();
    for (j, (atom, &w)) in atoms.iter().zip(weights).enumerate() {
        if w < -WEIGHT_FLOOR {
            return Err(PolicyError::NegativeWeight { index: offset + j, value: w });
        }
        if w <= WEIGHT_FLOOR {
            continue;
        }
        match marginal.last_mut() {
            Some(m) if m.node == atom.node => {
                m.mass += w;
                rows.last_mut().unwrap().controls.push((atom.u, w));
            }
            _ => {
                marginal.push(NodeMass { node: atom.node, x: atom.x, mass: w });
                rows.push(KernelRow { node: atom.node, x: atom.x, controls: vec![(atom.u, w)] });
            }
        }
    }
    for (m, row) in marginal.iter().zip(rows.iter_mut()) {
        for c in &mut row.controls {
            c.1 /= m.mass;
        }
    }
    Ok((marginal, Kernel { rows }))
}

/// Marginals `μi^E(x) = Σ_u wi(x,u)` and kernels `ηi(x,u) = wi(x,u)/μi^E(x)`.
pub fn marginals_and_kernels(grid: &Grid, measures: &MeasurePair) -> Result<FeedbackPolicy, PolicyError> {
    let (mu0_marginal, eta0) = disintegrate(&grid.mu0_atoms, &measures.w0, 0)?;
    let (mu1_marginal, eta1) = disintegrate(&grid.mu1_atoms, &measures.w1, grid.mu0_atoms.len())?;
    if mu0_marginal.is_empty() {
        return Err(PolicyError::ZeroMass);
    }
    Ok(FeedbackPolicy {
        state_nodes: grid.state_nodes.clone(),
        mu0_marginal,
        mu1_marginal,
        eta0,
        eta1,
        strict: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictReport {
    /// Strict controls at every covered node whose kernels are point masses.
    pub controls: Vec<StrictControl>,
    /// Covered nodes where some kernel spreads over several controls.
    pub non_degenerate: Vec<usize>,
}

impl StrictReport {
    pub fn is_strict(&self) -> bool {
        self.non_degenerate.is_empty()
    }
}

/// Reads off `u*(x) = argmax η(x,·)` wherever both kernels put at least
/// `1 − degeneracy_tol` on a single control. Never averages controls.
pub fn extract_strict(policy: &FeedbackPolicy, degeneracy_tol: f64) -> StrictReport {
    let mut nodes: Vec<usize> = policy.eta0.rows.iter().chain(&policy.eta1.rows).map(|r| r.node).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let point_mass = |row: Option<&KernelRow>| -> Result<Option<f64>, ()> {
        match row {
            None => Ok(None),
            Some(r) => {
                let (u, p) = r.argmax();
                if p >= 1.0 - degeneracy_tol {
                    Ok(Some(u))
                } else {
                    Err(())
                }
            }
        }
    };
    let mut report = StrictReport { controls: Vec::new(), non_degenerate: Vec::new() };
    for node in nodes {
        match (point_mass(policy.eta0.row(node)), point_mass(policy.eta1.row(node))) {
            (Ok(u0), Ok(u1)) => report.controls.push(StrictControl { node, x: policy.state_nodes[node], u0, u1 }),
            _ => report.non_degenerate.push(node),
        }
    }
    report
}

/// Copy of `policy` carrying the strict map when every covered node is
/// degenerate.
pub fn with_strict(policy: &FeedbackPolicy, degeneracy_tol: f64) -> (FeedbackPolicy, StrictReport) {
    let report = extract_strict(policy, degeneracy_tol);
    let mut out = policy.clone();
    out.strict = report.is_strict().then(|| report.controls.clone());
    (out, report)
}

/// Normalized `μ0^E` mass plus normalized `μ1^E` mass lying within
/// `margin_fraction` of the interval width from either end.
pub fn boundary_mass_diagnostic(policy: &FeedbackPolicy, margin_fraction: f64) -> f64 {
    let (Some(&lo), Some(&hi)) = (policy.state_nodes.first(), policy.state_nodes.last()) else {
        return 0.0;
    };
    let margin = margin_fraction * (hi - lo);
    let near = |x: f64| x <= lo + margin || x >= hi - margin;
    let fraction = |marginal: &[NodeMass]| {
        let total: f64 = marginal.iter().map(|m| m.mass).sum();
        if total <= 0.0 {
            return 0.0;
        }
        marginal.iter().filter(|m| near(m.x)).map(|m| m.mass).sum::<f64>() / total
    };
    fraction(&policy.mu0_marginal) + fraction(&policy.mu1_marginal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_by_two() -> Grid {
        let atoms = vec![
            Atom { x: 0.0, u: 0.0, node: 0 },
            Atom { x: 0.0, u: 1.0, node: 0 },
            Atom { x: 1.0, u: 0.0, node: 1 },
            Atom { x: 1.0, u: 1.0, node: 1 },
        ];
        Grid::from_atoms(vec![0.0, 1.0], atoms.clone(), atoms)
    }

    #[test]
    fn kernels_normalize_each_node() {
        let grid = two_by_two();
        let m = MeasurePair { w0: vec![0.25, 0.25, 0.5, 0.0], w1: vec![0.0; 4] };
        let policy = marginals_and_kernels(&grid, &m).unwrap();
        let masses: Vec<f64> = policy.mu0_marginal.iter().map(|m| m.mass).collect();
        assert_eq!(masses, vec![0.5, 0.5]);
        assert_eq!(policy.eta0.row(0).unwrap().controls, vec![(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(policy.eta0.row(1).unwrap().controls, vec![(0.0, 1.0)]);
        assert!(policy.mu1_marginal.is_empty());
        assert!(policy.eta1.is_empty());
    }

    #[test]
    fn singular_marginal_mass_is_additive() {
        let grid = two_by_two();
        let m = MeasurePair { w0: vec![1.0, 0.0, 0.0, 0.0], w1: vec![0.1, 0.2, 0.3, 0.4] };
        let policy = marginals_and_kernels(&grid, &m).unwrap();
        assert_eq!(policy.mu1_total(), m.mass1());
    }

    #[test]
    fn zero_w0_and_negative_weights_are_errors() {
        let grid = two_by_two();
        let zero = MeasurePair { w0: vec![0.0; 4], w1: vec![1.0, 0.0, 0.0, 0.0] };
        assert!(matches!(marginals_and_kernels(&grid, &zero), Err(PolicyError::ZeroMass)));
        let neg = MeasurePair { w0: vec![1.0, 0.0, 0.0, 0.0], w1: vec![0.0, -1e-6, 0.0, 0.0] };
        assert!(matches!(marginals_and_kernels(&grid, &neg), Err(PolicyError::NegativeWeight { index: 5, .. })));
        let tiny = MeasurePair { w0: vec![1.0, -1e-13, 0.0, 0.0], w1: vec![0.0; 4] };
        assert!(marginals_and_kernels(&grid, &tiny).is_ok());
    }

    #[test]
    fn strict_map_from_point_masses() {
        let atoms: Vec<Atom> = (0..10)
            .flat_map(|n| [Atom { x: n as f64, u: 0.0, node: n }, Atom { x: n as f64, u: 0.5, node: n }])
            .collect();
        let grid = Grid::from_atoms((0..10).map(|n| n as f64).collect(), atoms, vec![]);
        let w0: Vec<f64> = (0..20).map(|j| if j % 2 == 1 { 0.1 } else { 0.0 }).collect();
        let policy = marginals_and_kernels(&grid, &MeasurePair { w0, w1: vec![] }).unwrap();
        let report = extract_strict(&policy, 1e-6);
        assert!(report.is_strict());
        assert!(report.controls.iter().all(|c| c.u0 == Some(0.5) && c.u1.is_none()));
        let (strict, _) = with_strict(&policy, 1e-6);
        assert_eq!(strict.strict.as_ref().unwrap().len(), 10);
    }

    #[test]
    fn split_node_is_reported() {
        let atoms: Vec<Atom> = (0..10)
            .flat_map(|n| [Atom { x: n as f64, u: 0.0, node: n }, Atom { x: n as f64, u: 1.0, node: n }])
            .collect();
        let grid = Grid::from_atoms((0..10).map(|n| n as f64).collect(), atoms, vec![]);
        let mut w0 = vec![0.0; 20];
        for n in 0..10 {
            w0[2 * n] = 0.1;
        }
        w0[2 * 6] = 0.05;
        w0[2 * 6 + 1] = 0.05;
        let policy = marginals_and_kernels(&grid, &MeasurePair { w0, w1: vec![] }).unwrap();
        let report = extract_strict(&policy, 0.01);
        assert_eq!(report.non_degenerate, vec![6]);
        assert_eq!(report.controls.len(), 9);
        let (strict, _) = with_strict(&policy, 0.01);
        assert!(strict.strict.is_none());
    }

    #[test]
    fn boundary_mass_cases() {
        let nodes: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let atoms: Vec<Atom> = nodes.iter().enumerate().map(|(n, &x)| Atom { x, u: 0.0, node: n }).collect();
        let grid = Grid::from_atoms(nodes.clone(), atoms, vec![]);

        let mut center = vec![0.0; 11];
        center[5] = 1.0;
        let p = marginals_and_kernels(&grid, &MeasurePair { w0: center, w1: vec![] }).unwrap();
        assert_eq!(boundary_mass_diagnostic(&p, 0.1), 0.0);

        let mut edge = vec![0.0; 11];
        edge[0] = 1.0;
        let p = marginals_and_kernels(&grid, &MeasurePair { w0: edge, w1: vec![] }).unwrap();
        assert!(boundary_mass_diagnostic(&p, 0.1) >= 1.0);

        let p = marginals_and_kernels(&grid, &MeasurePair { w0: vec![1.0 / 11.0; 11], w1: vec![] }).unwrap();
        let d = boundary_mass_diagnostic(&p, 0.1);
        assert!((d - 0.2).abs() <= 2.0 / 11.0 + 1e-12, "{d}");
    }

    fn random_measures() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 12),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 12),
        )
            .prop_filter("w0 needs mass", |(w0, _)| w0.iter().sum::<f64>() > 1e-6)
    }

    fn three_by_four() -> Grid {
        let atoms: Vec<Atom> = (0..3)
            .flat_map(|n| (0..4).map(move |k| Atom { x: n as f64, u: k as f64 * 0.25, node: n }))
            .collect();
        Grid::from_atoms(vec![0.0, 1.0, 2.0], atoms.clone(), atoms)
    }

    proptest! {
        #[test]
        fn kernels_reconstruct_weights((w0, w1) in random_measures()) {
            let grid = three_by_four();
            let m = MeasurePair { w0: w0.clone(), w1: w1.clone() };
            let policy = marginals_and_kernels(&grid, &m).unwrap();
            for (kernel, marginal, atoms, w) in [
                (&policy.eta0, &policy.mu0_marginal, &grid.mu0_atoms, &w0),
                (&policy.eta1, &policy.mu1_marginal, &grid.mu1_atoms, &w1),
            ] {
                for row in &kernel.rows {
                    let total: f64 = row.controls.iter().map(|c| c.1).sum();
                    prop_assert!((total - 1.0).abs() <= 1e-10);
                    let mass = marginal.iter().find(|m| m.node == row.node).unwrap().mass;
                    for (u, p) in &row.controls {
                        let j = atoms.iter().position(|a| a.node == row.node && a.u == *u).unwrap();
                        prop_assert!((p * mass - w[j]).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn strict_extraction_ignores_positive_rescaling((w0, w1) in random_measures(), scale in 1e-3f64..1e3) {
            let grid = three_by_four();
            let m = MeasurePair { w0, w1 };
            let a = marginals_and_kernels(&grid, &m).unwrap();
            let b = marginals_and_kernels(&grid, &m.scaled(scale)).unwrap();
            let ra = extract_strict(&a, 0.3);
            let rb = extract_strict(&b, 0.3);
            prop_assert_eq!(&ra.non_degenerate, &rb.non_degenerate);
            prop_assert_eq!(ra.controls, rb.controls);
            for (x, y) in a.eta0.rows.iter().zip(&b.eta0.rows) {
                for (cx, cy) in x.controls.iter().zip(&y.controls) {
                    prop_assert!((cx.1 - cy.1).abs() <= 1e-12);
                }
            }
        }
    }
}
