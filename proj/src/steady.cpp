#include "ness/steady.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include "ness/error.hpp"

namespace ness {

using Eigen::MatrixXcd;

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
    return DensityMatrix{psi * psi.adjoint() / psi.squaredNorm()};
}

namespace {

Complex inner(const MatrixXcd& a, const MatrixXcd& b) { return (a.conjugate().cwiseProduct(b)).sum(); }

/// Inverse of X -> A X + X A^+ via A = Q T Q^*.
class SylvesterInverse {
public:
    explicit SylvesterInverse(const MatrixXcd& a) {
        Eigen::ComplexSchur<MatrixXcd> schur(a);
        if (schur.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "Schur decomposition failed");
        q_ = schur.matrixU();
        t_ = schur.matrixT();
    }

    MatrixXcd operator()(const MatrixXcd& c) const {
        const Eigen::Index n = t_.rows();
        MatrixXcd y = q_.adjoint() * c * q_;
        // T Y + Y T^+ = C~ ; column k couples to columns l > k through conj(T(k,l)).
        for (Eigen::Index k = n - 1; k >= 0; --k) {
            Eigen::VectorXcd rhs = y.col(k);
            if (k + 1 < n)
                rhs.noalias() -= y.rightCols(n - k - 1) * t_.row(k).tail(n - k - 1).adjoint();
            const Complex shift = std::conj(t_(k, k));
            for (Eigen::Index i = n - 1; i >= 0; --i) {
                Complex s = rhs(i);
                const Eigen::Index m = n - i - 1;
                if (m > 0) s -= t_.row(i).tail(m).transpose().cwiseProduct(rhs.tail(m)).sum();
                rhs(i) = s / (t_(i, i) + shift);
            }
            y.col(k) = rhs;
        }
        return q_ * y * q_.adjoint();
    }

private:
    MatrixXcd q_;
    MatrixXcd t_;
};

struct GmresResult {
    MatrixXcd x;
    double relative_residual = 1.0;
    int iterations = 0;
};

/// Restarted GMRES for op(y) = b over matrices with the Frobenius inner product.
template <class Op>
GmresResult gmres(const Op& op, const MatrixXcd& b, int restart, int max_restarts, double tol) {
    const double bnorm = b.norm();
    GmresResult res;
    res.x = MatrixXcd::Zero(b.rows(), b.cols());
    if (bnorm == 0.0) {
        res.relative_residual = 0.0;
        return res;
    }
    for (int cycle = 0; cycle < max_restarts; ++cycle) {
        MatrixXcd r = b - op(res.x);
        double beta = r.norm();
        res.relative_residual = beta / bnorm;
        if (res.relative_residual <= tol) return res;

        std::vector<MatrixXcd> v;
        v.reserve(static_cast<std::size_t>(restart) + 1);
        v.push_back(r / beta);
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(restart + 1, restart);
        std::vector<std::complex<double>> cs(restart), sn(restart);
        Eigen::VectorXcd g = Eigen::VectorXcd::Zero(restart + 1);
        g(0) = beta;
        int k = 0;
        for (; k < restart; ++k) {
            MatrixXcd w = op(v[k]);
            for (int i = 0; i <= k; ++i) {
                h(i, k) = inner(v[i], w);
                w -= h(i, k) * v[i];
            }
            h(k + 1, k) = w.norm();
            ++res.iterations;
            // Apply accumulated Givens rotations to the new column.
            for (int i = 0; i < k; ++i) {
                const Complex t = std::conj(cs[i]) * h(i, k) + std::conj(sn[i]) * h(i + 1, k);
                h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
                h(i, k) = t;
            }
            const double a = std::abs(h(k, k));
            const double bb = std::abs(h(k + 1, k));
            const double rr = std::hypot(a, bb);
            if (rr == 0.0) {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h(k, k) / rr;
                sn[k] = h(k + 1, k) / rr;
            }
            h(k, k) = rr;
            h(k + 1, k) = 0.0;
            g(k + 1) = -sn[k] * g(k);
            g(k) = std::conj(cs[k]) * g(k);
            const double est = std::abs(g(k + 1)) / bnorm;
            const bool breakdown = std::abs(bb) <= 1e-300;
            if (!breakdown) v.push_back(w / bb);
            if (est <= tol || breakdown) {
                ++k;
                break;
            }
        }
        // Solve the triangular least-squares system and update.
        Eigen::VectorXcd yk = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        for (int i = 0; i < k; ++i) res.x += yk(i) * v[i];
    }
    res.relative_residual = (b - op(res.x)).norm() / bnorm;
    return res;
}

/// Solves (L - shift) x = b with the no-jump part as right preconditioner.
class ShiftedSolver {
public:
    ShiftedSolver(const Liouvillian& l, double shift, const NullspaceOptions& opts)
        : l_(l), opts_(opts), precond_(make_a(l, shift)) {
        for (const auto& a : l.jumps()) jumps_adj_.emplace_back(a.adjoint());
    }

    MatrixXcd solve(const MatrixXcd& b, double tol) const {
        // (L - shift) P y = y + J(P y)
        auto op = [&](const MatrixXcd& y) {
            MatrixXcd p = precond_(y);
            MatrixXcd out = y;
            for (std::size_t k = 0; k < l_.jumps().size(); ++k) {
                const auto& a = l_.jumps()[k];
                MatrixXcd ap = a * p;
                out.noalias() += l_.gamma_p() * (ap * jumps_adj_[k]);
            }
            return out;
        };
        auto res = gmres(op, b, opts_.gmres_restart, opts_.gmres_max_restarts, tol);
        return precond_(res.x);
    }

    static MatrixXcd make_a(const Liouvillian& l, double shift) {
        MatrixXcd a = Complex(0.0, -1.0) * MatrixXcd(l.effective_hamiltonian());
        a.diagonal().array() -= 0.5 * shift;
        return a;
    }

private:
    const Liouvillian& l_;
    const NullspaceOptions& opts_;
    SylvesterInverse precond_;
    std::vector<Operator> jumps_adj_;
};

/// Solves L(x) + tr(x) I / d = I / d, nonsingular exactly when the steady
/// state is unique. Right preconditioner: inverse of X -> A X + X A^+ with
/// A = -i H_eff - shift/2.
class BorderedSolver {
public:
    BorderedSolver(const Liouvillian& l, double shift, const NullspaceOptions& opts)
        : l_(l), opts_(opts), shift_(shift), precond_(ShiftedSolver::make_a(l, shift)) {
        for (const auto& a : l.jumps()) jumps_adj_.emplace_back(a.adjoint());
    }

    MatrixXcd solve(double tol, GmresResult* info) const {
        const auto d = static_cast<Eigen::Index>(l_.dim());
        const double inv_d = 1.0 / static_cast<double>(d);
        // L = S_shift + shift + J, so L(P y) = y + shift P y + J(P y).
        auto op = [&](const MatrixXcd& y) {
            MatrixXcd p = precond_(y);
            MatrixXcd out = y + shift_ * p;
            for (std::size_t k = 0; k < l_.jumps().size(); ++k) {
                MatrixXcd ap = l_.jumps()[k] * p;
                out.noalias() += l_.gamma_p() * (ap * jumps_adj_[k]);
            }
            out.diagonal().array() += p.trace() * inv_d;
            return out;
        };
        MatrixXcd b = MatrixXcd::Identity(d, d) * inv_d;
        auto res = gmres(op, b, opts_.gmres_restart, opts_.gmres_max_restarts, tol);
        if (info) *info = res;
        return precond_(res.x);
    }

private:
    const Liouvillian& l_;
    const NullspaceOptions& opts_;
    double shift_;
    SylvesterInverse precond_;
    std::vector<Operator> jumps_adj_;
};

double residual_of(const Liouvillian& l, const MatrixXcd& rho) { return l.apply(rho).norm(); }

MatrixXcd normalized_hermitian(const MatrixXcd& x) {
    const Complex tr = x.trace();
    if (std::abs(tr) == 0.0) fail(ErrorKind::NonConvergence, "null vector has zero trace");
    MatrixXcd rho = x / tr;
    return 0.5 * (rho + rho.adjoint());
}

// Clip eigenvalues in [-tol, 0) and renormalize; more negative is an error.
MatrixXcd repair_psd(const MatrixXcd& rho, double tol) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho);
    const double min_eval = es.eigenvalues().minCoeff();
    if (min_eval >= -1e-14) return rho;
    if (min_eval < -tol) {
        std::ostringstream os;
        os << "steady state has eigenvalue " << min_eval << " below -" << tol;
        fail(ErrorKind::NonConvergence, os.str());
    }
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    MatrixXcd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    return out / out.trace().real();
}

}  // namespace

namespace {

using SparseCol = Eigen::SparseMatrix<Complex, Eigen::ColMajor>;
using ShiftedSolve = std::function<MatrixXcd(const MatrixXcd&)>;

class DirectSolver {
public:
    explicit DirectSolver(const SparseCol& m) {
        lu_.analyzePattern(m);
        lu_.factorize(m);
        ok_ = lu_.info() == Eigen::Success;
    }
    bool ok() const { return ok_; }
    MatrixXcd solve(const MatrixXcd& b) const {
        const Eigen::Index d = b.rows();
        Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(b.data(), d * d);
        Eigen::VectorXcd x = lu_.solve(v);
        return Eigen::Map<const MatrixXcd>(x.data(), d, d);
    }

private:
    Eigen::SparseLU<SparseCol, Eigen::COLAMDOrdering<int>> lu_;
    bool ok_ = false;
};

// Vectorized L with the equation for rho_00 replaced by tr(rho) = 1.
SparseCol trace_constrained(const Operator& s, Eigen::Index d) {
    std::vector<Eigen::Triplet<Complex>> t;
    t.reserve(static_cast<std::size_t>(s.nonZeros()) + static_cast<std::size_t>(d));
    for (Eigen::Index r = 1; r < s.outerSize(); ++r)
        for (Operator::InnerIterator it(s, r); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < d; ++i) t.emplace_back(0, i * d + i, 1.0);
    SparseCol m(s.rows(), s.cols());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SparseCol shifted(const Operator& s, double shift) {
    SparseCol m(s);
    SparseCol id(m.rows(), m.cols());
    id.setIdentity();
    return m - shift * id;
}

// Counts traceless null vectors of L by inverse iteration with deflation.
int extra_null_vectors(const Liouvillian& l, const ShiftedSolve& solve, double threshold) {
    const auto d = static_cast<Eigen::Index>(l.dim());
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> nd;
    std::vector<MatrixXcd> found;
    constexpr int kMaxNull = 6;
    while (static_cast<int>(found.size()) < kMaxNull) {
        MatrixXcd y(d, d);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = Complex(nd(rng), nd(rng));
        auto project = [&](MatrixXcd& z) {
            z.diagonal().array() -= z.trace() / static_cast<double>(d);
            for (const auto& f : found) z -= inner(f, z) * f;
        };
        project(y);
        double ratio = 1.0;
        for (int it = 0; it < 3; ++it) {
            y = solve(y / y.norm());
            project(y);
            y /= y.norm();
            ratio = l.apply(y).norm();
        }
        if (ratio > threshold) break;
        found.push_back(y);
    }
    return static_cast<int>(found.size());
}

[[noreturn]] void fail_degenerate(int extra) {
    std::ostringstream os;
    os << "steady state is not unique: null-space dimension " << extra + 1 << (extra >= 6 ? " or more" : "");
    fail(ErrorKind::NonConvergence, os.str());
}

}  // namespace

SteadyStateSolution steady_state_nullspace(const Liouvillian& l, const NullspaceOptions& opts) {
    const auto d = static_cast<Eigen::Index>(l.dim());
    const double scale = std::max(1.0, l.scale());
    const double shift = opts.relative_shift * scale;
    const double threshold = opts.degeneracy_tol * scale;
    const bool direct = l.jumps().size() <= 1 && l.dim() <= opts.direct_max_dim;

    MatrixXcd x;
    std::optional<DirectSolver> shifted_lu;
    std::optional<ShiftedSolver> shifted_gmres;
    ShiftedSolve solve_shifted;
    if (direct) {
        const Operator s = l.vectorized();
        DirectSolver lu(trace_constrained(s, d));
        shifted_lu.emplace(shifted(s, shift));
        solve_shifted = [&](const MatrixXcd& b) { return shifted_lu->solve(b); };
        if (!lu.ok()) {
            // singular trace-constrained system: the null space is degenerate
            fail_degenerate(std::max(1, extra_null_vectors(l, solve_shifted, threshold)));
        }
        MatrixXcd rhs = MatrixXcd::Zero(d, d);
        rhs(0, 0) = 1.0;
        x = lu.solve(rhs);
    } else {
        shifted_gmres.emplace(l, shift, opts);
        solve_shifted = [&](const MatrixXcd& b) { return shifted_gmres->solve(b, 1e-8); };
        BorderedSolver bordered(l, opts.preconditioner_shift * std::max(l.gamma_p(), 1e-12 * scale), opts);
        x = bordered.solve(opts.gmres_tol, nullptr);
    }
    if (!x.allFinite()) fail(ErrorKind::NonConvergence, "steady-state solve produced non-finite values");
    x = normalized_hermitian(x);
    const double res = residual_of(l, x);
    if (!(res <= opts.tol * scale)) {
        std::ostringstream os;
        os << "steady-state solve did not converge (residual " << res << ")";
        fail(ErrorKind::NonConvergence, os.str());
    }
    if (opts.check_unique && d > 1) {
        const int extra = extra_null_vectors(l, solve_shifted, threshold);
        if (extra > 0) fail_degenerate(extra);
    }

    SteadyStateSolution sol;
    sol.rho.data = repair_psd(x, opts.psd_tol);
    sol.residual = residual_of(l, sol.rho.data);
    sol.method = SteadyMethod::Nullspace;
    sol.converged = sol.residual <= opts.tol * scale;
    return sol;
}

SteadyStateSolution steady_state_timeevolve(const Liouvillian& l, const DensityMatrix& rho0,
                                            const TimeEvolveOptions& opts) {
    namespace odeint = boost::numeric::odeint;
    require(rho0.dim() == l.dim(), "initial density matrix does not match the Liouvillian");
    // odeint works on a real vector holding (re, im) pairs of rho in column-major order.
    using State = Eigen::VectorXd;
    using Stepper = odeint::runge_kutta_dopri5<State, double, State, double, odeint::vector_space_algebra>;
    auto stepper = odeint::make_dense_output(opts.abs_error, opts.rel_error, Stepper());

    const auto d = static_cast<Eigen::Index>(l.dim());
    State x(2 * d * d);
    auto as_matrix = [d](State& v) { return Eigen::Map<MatrixXcd>(reinterpret_cast<Complex*>(v.data()), d, d); };
    as_matrix(x) = rho0.data;
    auto rhs = [&](const State& v, State& dv, double) {
        dv.resize(v.size());
        Eigen::Map<const MatrixXcd> rho(reinterpret_cast<const Complex*>(v.data()), d, d);
        as_matrix(dv) = l.apply(rho);
    };

    SteadyStateSolution sol;
    sol.method = SteadyMethod::TimeEvolution;
    double t = 0.0;
    const double target = opts.tol * std::max(1.0, l.scale());
    double res = residual_of(l, as_matrix(x));
    while (res >= target && t < opts.horizon) {
        const double t_next = std::min(opts.horizon, t + opts.check_interval);
        odeint::integrate_adaptive(stepper, rhs, x, t, t_next, 0.01 / std::max(1.0, l.scale()));
        t = t_next;
        res = residual_of(l, as_matrix(x));
        if (!std::isfinite(res)) fail(ErrorKind::NonConvergence, "time evolution diverged");
    }
    sol.rho.data = as_matrix(x);
    sol.residual = res;
    sol.converged = res < target;
    if (!sol.converged) {
        std::ostringstream os;
        os << "horizon " << opts.horizon << " reached with residual " << res;
        sol.note = os.str();
    }
    return sol;
}

ResidualReport validate_steady(const SteadyStateSolution& sol, const Liouvillian& l) {
    ResidualReport r;
    const MatrixXcd& rho = sol.rho.data;
    r.residual = residual_of(l, rho);
    r.hermiticity_defect = (rho - rho.adjoint()).norm();
    r.trace_defect = std::abs(rho.trace() - Complex(1.0));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    return r;
}

}  // namespace ness
