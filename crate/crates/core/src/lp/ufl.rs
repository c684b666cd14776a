use super::{solve_lp, LinearProgram, Relation};
use crate::error::Result;
use crate::rounding::{UflFractional, UflInstance};

/// Solves the standard UFL relaxation: `Σ_i x_ij = 1`, `x_ij ≤ y_i`.
pub fn solve_lp_ufl(ufl: &UflInstance) -> Result<(UflFractional, f64)> {
    let (nf, nc) = (ufl.n_facilities(), ufl.n_clients());
    let mut lp = LinearProgram::new();
    let x: Vec<Vec<usize>> =
        (0..nf).map(|i| (0..nc).map(|j| lp.add_variable(format!("x_{i}_{j}"), ufl.cost(i, j))).collect()).collect();
    let y: Vec<usize> = (0..nf).map(|i| lp.add_variable(format!("y_{i}"), ufl.opening_cost(i))).collect();
    for j in 0..nc {
        lp.add_constraint(format!("assign_{j}"), (0..nf).map(|i| (x[i][j], 1.0)).collect(), Relation::Eq, 1.0)?;
        for i in 0..nf {
            lp.add_constraint(format!("open_{i}_{j}"), vec![(x[i][j], 1.0), (y[i], -1.0)], Relation::Le, 0.0)?;
        }
    }
    let sol = solve_lp(&lp)?;
    let frac = UflFractional {
        x: x.iter().map(|row| row.iter().map(|&v| sol.values[v]).collect()).collect(),
        y: y.iter().map(|&v| sol.values[v]).collect(),
    };
    Ok((frac, sol.objective))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let ufl = UflInstance::new(vec![2.0], vec![vec![5.0]]).unwrap();
        let (frac, value) = solve_lp_ufl(&ufl).unwrap();
        assert!((value - 7.0).abs() < 1e-9);
        assert!((frac.y[0] - 1.0).abs() < 1e-9 && (frac.x[0][0] - 1.0).abs() < 1e-9);
    }
}
