#pragma once

// Exact non-equilibrium steady states of small arrays: the null vector of the
// Liouvillian, with a time-integration fallback and residual diagnostics.

#include <complex>
#include <string>

#include <Eigen/Dense>

#include "ness/hilbert.hpp"

namespace ness {

struct DensityMatrix {
    Eigen::MatrixXcd data;

    std::size_t dim() const { return static_cast<std::size_t>(data.rows()); }
    Complex trace() const { return data.trace(); }

    static DensityMatrix pure(const StateVector& psi);
};

enum class SteadyMethod { Nullspace, TimeEvolution };

struct SteadyStateSolution {
    DensityMatrix rho;
    double residual = 0.0;  ///< ||L[rho]||_F
    SteadyMethod method = SteadyMethod::Nullspace;
    bool converged = true;
    std::string note;
};

struct NullspaceOptions {
    /// Accept when ||L[rho]||_F <= tol * max(1, L.scale()) for trace-one rho.
    double tol = 1e-10;
    /// Single-mode systems up to this Hilbert-space dimension factorize the
    /// trace-constrained vectorized L directly (sparse LU). Arrays and larger
    /// systems use the iterative path, since LU fill-in grows quickly there.
    std::size_t direct_max_dim = 200;
    /// Shift of the Sylvester preconditioner, relative to gamma_p.
    double preconditioner_shift = 0.05;
    /// Shift of the inverse iteration used by the uniqueness check, relative to L.scale().
    double relative_shift = 1e-10;
    int gmres_restart = 60;
    int gmres_max_restarts = 40;
    double gmres_tol = 1e-12;
    bool check_unique = true;
    /// A second, traceless null vector with ||L x|| / ||x|| below this
    /// (relative to scale) means the steady state is not unique.
    double degeneracy_tol = 1e-7;
    /// Eigenvalues of rho in [-psd_tol, 0) are clipped; anything lower is an error.
    double psd_tol = 1e-8;
};

/// Steady state with tr(rho) = 1. Small single-mode systems factorize the vectorized L
/// with one equation replaced by the trace condition. Larger ones solve the
/// bordered system L[x] + tr(x) 1/d = 1/d by GMRES, right-preconditioned with
/// the inverse of X -> A X + X A^+, A = -i H_eff - shift/2, applied through a
/// Schur form of A. Uniqueness is checked by inverse iteration on traceless
/// matrices.
/// Throws Error(NonConvergence) when the null space is degenerate or GMRES stalls.
SteadyStateSolution steady_state_nullspace(const Liouvillian& liouvillian, const NullspaceOptions& opts = {});

struct TimeEvolveOptions {
    double horizon = 1000.0;    ///< in units of 1/gamma_p
    double tol = 1e-9;          ///< target ||L[rho]||_F / max(1, L.scale())
    double abs_error = 1e-12;   ///< per-step local error target (absolute)
    double rel_error = 1e-10;   ///< per-step local error target (relative)
    double check_interval = 1.0;
};

/// Integrates d(rho)/dt = L[rho] with adaptive Dormand-Prince steps until the
/// residual drops below tol or the horizon is reached (converged = false then).
SteadyStateSolution steady_state_timeevolve(const Liouvillian& liouvillian, const DensityMatrix& rho0,
                                            const TimeEvolveOptions& opts = {});

struct ResidualReport {
    double residual = 0.0;
    double hermiticity_defect = 0.0;  ///< ||rho - rho^+||_F
    double trace_defect = 0.0;        ///< |tr rho - 1|
    double min_eigenvalue = 0.0;
};

ResidualReport validate_steady(const SteadyStateSolution& sol, const Liouvillian& liouvillian);

}  // namespace ness
