use crate::epot::solve_epot;
use crate::error::Result;
use crate::problem::{PotProblem, Regularizer, TransportPlan};
use crate::qpot::{solve_qpot, DualCertificate, SolverConfig};

/// A solved problem. Only the quadratic solver produces a certificate.
#[derive(Debug, Clone)]
pub struct Solution {
    pub plan: TransportPlan,
    pub certificate: Option<DualCertificate>,
}

/// Dispatches on the problem's regularizer.
pub fn solve(problem: &PotProblem, config: &SolverConfig) -> Result<Solution> {
    match problem.regularizer() {
        Regularizer::Quadratic => {
            let (plan, cert) = solve_qpot(problem, config)?;
            Ok(Solution { plan, certificate: Some(cert) })
        }
        Regularizer::Entropic => Ok(Solution { plan: solve_epot(problem, config)?, certificate: None }),
    }
}
