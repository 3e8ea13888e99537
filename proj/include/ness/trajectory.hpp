#pragma once

// Quantum-jump unraveling of the master equation: non-Hermitian propagation,
// norm-threshold jumps with site sampling, time averaging after a transient,
// and ensemble statistics. Propagation is delegated to a backend (dense state
// vector here, MPS in ness/mps.hpp).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ness/hilbert.hpp"
#include "ness/observables.hpp"

namespace ness {

enum class Backend { Dense, Mps };

/// Largest dt * gamma_p accepted: jumps are resolved only at step granularity.
inline constexpr double kMaxStepTimesGamma = 0.05;

struct TrajectoryConfig {
    double dt = 0.01;             ///< in units of 1/gamma_p
    double t_transient = 20.0;    ///< averaging starts after this time
    int n_avg_steps = 1000;       ///< number of averaged steps N_T
    int n_trajectories = 100;     ///< R
    std::uint64_t master_seed = 1;
    Backend backend = Backend::Dense;
    int workers = 1;              ///< 0 = hardware concurrency

    /// Throws Error(Config) on dt <= 0, dt * gamma_p > 0.05, N_T < 1, R < 1 or t_transient < 0.
    void validate(double gamma_p) const;
    int transient_steps() const;
};

/// max(500 / g, 20 / gamma_p): five global relaxation times; without atoms 20 / gamma_p.
double default_transient(std::optional<double> g, double gamma_p);

/// splitmix64 of master + (index + 1) * golden ratio; distinct indices give distinct seeds.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trajectory_index);

/// Uniform doubles in (0, 1] from a 64-bit engine, identical on every platform.
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed);
    double next();

private:
    std::uint64_t state_;
};

/// Wave function of one trajectory under a particular backend. The state is
/// kept unnormalized between jumps so that its norm carries the no-jump probability.
class TrajectoryState {
public:
    virtual ~TrajectoryState() = default;
    virtual int sites() const = 0;
    virtual void reset_vacuum() = 0;
    virtual double norm2() const = 0;
    /// One step of exp(-i H_eff dt).
    virtual void propagate() = 0;
    /// ||a_j psi||^2 for every site.
    virtual std::vector<double> jump_weights() const = 0;
    /// psi <- a_j psi / ||a_j psi||.
    virtual void apply_jump(int site) = 0;
    /// Moments of the normalized state.
    virtual Moments moments() const = 0;
    /// Diagnostics accumulated by the backend (e.g. truncation warnings).
    virtual std::vector<std::string> flags() const { return {}; }
};

using StateFactory = std::function<std::unique_ptr<TrajectoryState>()>;

/// exp(-i H_eff dt) psi by scaled Taylor series; local error below 1e-12 ||psi||.
StateVector propagate_step(const StateVector& psi, const Operator& h_eff, double dt);

/// Dense backend. Up to `expm_max_dim` the propagator is precomputed as a dense
/// matrix; above it every step runs the Taylor series on the sparse H_eff.
class DenseState final : public TrajectoryState {
public:
    DenseState(const Basis& basis, const Liouvillian& l, double dt, std::size_t expm_max_dim = 512);

    int sites() const override { return basis_->sites(); }
    void reset_vacuum() override;
    double norm2() const override { return psi_.squaredNorm(); }
    void propagate() override;
    std::vector<double> jump_weights() const override;
    void apply_jump(int site) override;
    Moments moments() const override { return ness::moments(*basis_, psi_); }

    const StateVector& state() const { return psi_; }
    void set_state(const StateVector& psi) { psi_ = psi; }

private:
    const Basis* basis_;
    Operator h_eff_;
    std::vector<Operator> jumps_;
    double dt_;
    std::optional<Eigen::MatrixXcd> propagator_;
    StateVector psi_;
};

/// Outcome of a threshold check: which site jumped, if any.
struct JumpDecision {
    bool jumped = false;
    int site = -1;
};

/// Site j with probability w_j / sum(w) given u in (0, 1]. Throws Error(NonConvergence)
/// when all weights vanish.
int sample_site(const std::vector<double>& weights, double u);

/// If ||psi||^2 < threshold: samples a site, applies its jump and draws a new threshold.
JumpDecision maybe_jump(TrajectoryState& state, UniformSource& rng, double& threshold);

struct JumpRecord {
    double time = 0.0;
    int site = 0;
    double norm = 0.0;  ///< squared norm just before the jump

    bool operator==(const JumpRecord&) const = default;
};

struct TrajectoryResult {
    Moments average;                ///< time average over the N_T recorded steps
    std::vector<JumpRecord> jumps;
    int samples = 0;
    int jumps_in_window = 0;        ///< jumps during the averaging window
    double window = 0.0;            ///< length of the averaging window
    std::uint64_t seed = 0;
    std::vector<std::string> flags;
};

/// Starts from vacuum, propagates with jumps and records moments every step
/// after the transient.
TrajectoryResult run_trajectory(const TrajectoryConfig& config, TrajectoryState& state, std::uint64_t seed);

/// R trajectories with seeds derive_seed(master, i), run on config.workers
/// threads. Results are returned in index order. Errors carry the index.
std::vector<TrajectoryResult> run_ensemble(const TrajectoryConfig& config, const StateFactory& factory);

struct EnsembleEstimate {
    Estimate estimate;
    double jump_rate = 0.0;        ///< jumps per unit time per site in the averaging window
    double jump_rate_error = 0.0;
    std::vector<std::string> flags;
};

/// Throws Error(InvalidArgument) for an empty list or mismatched systems.
EnsembleEstimate ensemble_average(const std::vector<TrajectoryResult>& results);

/// Lines "trajectory time site" for every recorded jump.
void write_jump_log(const std::vector<TrajectoryResult>& results, std::ostream& out);

}  // namespace ness
