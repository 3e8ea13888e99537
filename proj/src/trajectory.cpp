#include "ness/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "ness/error.hpp"
#include "ness/parallel.hpp"

namespace ness {

void TrajectoryConfig::validate(double gamma_p) const {
    auto bad = [](const std::string& msg) { fail(ErrorKind::Config, "trajectory config: " + msg); };
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt must be positive");
    if (dt * gamma_p > kMaxStepTimesGamma * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "dt * gamma_p = " << dt * gamma_p << " exceeds " << kMaxStepTimesGamma;
        bad(os.str());
    }
    if (!(t_transient >= 0.0) || !std::isfinite(t_transient)) bad("t_transient must be non-negative");
    if (n_avg_steps < 1) bad("n_avg_steps must be at least 1");
    if (n_trajectories < 1) bad("n_trajectories must be at least 1");
    if (workers < 0) bad("workers must be non-negative");
}

int TrajectoryConfig::transient_steps() const {
    return static_cast<int>(std::ceil(t_transient / dt - 1e-9));
}

double default_transient(std::optional<double> g, double gamma_p) {
    double t = 20.0 / gamma_p;
    if (g && *g > 0.0) t = std::max(t, 500.0 / *g);
    return t;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trajectory_index) {
    return splitmix64(master_seed + (trajectory_index + 1) * 0x9E3779B97F4A7C15ULL);
}

UniformSource::UniformSource(std::uint64_t seed) : state_(seed) {}

double UniformSource::next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return (static_cast<double>(z >> 11) + 1.0) * 0x1.0p-53;
}

StateVector propagate_step(const StateVector& psi, const Operator& h_eff, double dt) {
    // 1-norm of H bounds the growth of each Taylor term
    Eigen::VectorXd col = Eigen::VectorXd::Zero(h_eff.cols());
    for (Eigen::Index r = 0; r < h_eff.outerSize(); ++r)
        for (Operator::InnerIterator it(h_eff, r); it; ++it) col[it.col()] += std::abs(it.value());
    const double norm1 = col.size() ? col.maxCoeff() : 0.0;
    const int substeps = std::max(1, static_cast<int>(std::ceil(norm1 * std::abs(dt) / 0.5)));
    const Complex factor(0.0, -dt / substeps);
    StateVector out = psi;
    const double scale = std::max(psi.norm(), 1e-300);
    for (int s = 0; s < substeps; ++s) {
        StateVector term = out;
        StateVector sum = out;
        for (int k = 1; k <= 60; ++k) {
            term = (factor / static_cast<double>(k)) * (h_eff * term);
            sum += term;
            if (term.norm() < 1e-16 * scale) break;
        }
        out = std::move(sum);
    }
    return out;
}

DenseState::DenseState(const Basis& basis, const Liouvillian& l, double dt, std::size_t expm_max_dim)
    : basis_(&basis), h_eff_(l.effective_hamiltonian()), jumps_(l.jumps()), dt_(dt) {
    require(l.dim() == basis.dim(), "Liouvillian does not match the basis");
    require(static_cast<int>(jumps_.size()) == basis.sites(), "one jump operator per site is required");
    if (basis.dim() <= expm_max_dim) {
        Eigen::MatrixXcd h = Eigen::MatrixXcd(h_eff_) * Complex(0.0, -dt);
        propagator_ = h.exp();
    }
    reset_vacuum();
}

void DenseState::reset_vacuum() {
    psi_ = StateVector::Zero(static_cast<Eigen::Index>(basis_->dim()));
    std::vector<std::uint8_t> vac(static_cast<std::size_t>(basis_->sites()), 0);
    psi_[static_cast<Eigen::Index>(basis_->index_of(vac))] = 1.0;
}

void DenseState::propagate() {
    if (propagator_) {
        StateVector next = *propagator_ * psi_;
        psi_.swap(next);
    } else {
        psi_ = propagate_step(psi_, h_eff_, dt_);
    }
}

std::vector<double> DenseState::jump_weights() const {
    std::vector<double> w;
    w.reserve(jumps_.size());
    for (const auto& a : jumps_) w.push_back((a * psi_).squaredNorm());
    return w;
}

void DenseState::apply_jump(int site) {
    require(site >= 0 && site < sites(), "jump site out of range");
    StateVector next = jumps_[static_cast<std::size_t>(site)] * psi_;
    const double n = next.norm();
    if (!(n > 0.0)) fail(ErrorKind::NonConvergence, "jump on an empty mode");
    psi_ = next / n;
}

int sample_site(const std::vector<double>& weights, double u) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) fail(ErrorKind::NonConvergence, "norm fell below the jump threshold but every jump weight vanishes");
    const double target = u * total;
    double acc = 0.0;
    int last = -1;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] <= 0.0) continue;
        acc += weights[j];
        last = static_cast<int>(j);
        if (target <= acc) return last;
    }
    return last;
}

JumpDecision maybe_jump(TrajectoryState& state, UniformSource& rng, double& threshold) {
    const double n2 = state.norm2();
    if (!(n2 < threshold)) return {};
    const int site = sample_site(state.jump_weights(), rng.next());
    state.apply_jump(site);
    threshold = rng.next();
    return {true, site};
}

TrajectoryResult run_trajectory(const TrajectoryConfig& config, TrajectoryState& state, std::uint64_t seed) {
    UniformSource rng(seed);
    TrajectoryResult out;
    out.seed = seed;
    state.reset_vacuum();
    const int transient = config.transient_steps();
    const long total = static_cast<long>(transient) + config.n_avg_steps;
    Moments acc;
    bool first = true;
    double threshold = rng.next();
    for (long step = 1; step <= total; ++step) {
        state.propagate();
        const double t = static_cast<double>(step) * config.dt;
        const double n2 = state.norm2();
        if (!(n2 >= 1e-12)) {
            std::ostringstream os;
            os << "state norm underflow at t = " << t << " (dt too large or a jump was missed)";
            fail(ErrorKind::NonConvergence, os.str());
        }
        auto jump = maybe_jump(state, rng, threshold);
        if (jump.jumped) {
            out.jumps.push_back({t, jump.site, n2});
            if (step > transient) ++out.jumps_in_window;
        }
        if (step > transient) {
            Moments m = state.moments();
            if (first) {
                acc = std::move(m);
                first = false;
            } else {
                acc += m;
            }
        }
    }
    acc *= 1.0 / config.n_avg_steps;
    out.average = std::move(acc);
    out.samples = config.n_avg_steps;
    out.window = config.n_avg_steps * config.dt;
    out.flags = state.flags();
    return out;
}

std::vector<TrajectoryResult> run_ensemble(const TrajectoryConfig& config, const StateFactory& factory) {
    const auto r = static_cast<std::size_t>(config.n_trajectories);
    std::vector<TrajectoryResult> results(r);
    parallel_for(r, config.workers, [&](std::size_t i) {
        try {
            auto state = factory();
            results[i] = run_trajectory(config, *state, derive_seed(config.master_seed, i));
        } catch (const Error& e) {
            throw Error(e.kind(), "trajectory " + std::to_string(i) + ": " + e.what());
        }
    });
    return results;
}

EnsembleEstimate ensemble_average(const std::vector<TrajectoryResult>& results) {
    require(!results.empty(), "ensemble_average needs at least one trajectory");
    std::vector<Moments> samples;
    samples.reserve(results.size());
    for (const auto& r : results) {
        if (!samples.empty()) samples.front().require_same_shape(r.average);
        samples.push_back(r.average);
    }
    EnsembleEstimate out;
    out.estimate = estimate(samples);
    const int m = samples.front().sites();
    std::vector<double> rates;
    for (const auto& r : results) rates.push_back(r.window > 0 ? r.jumps_in_window / (r.window * m) : 0.0);
    double mean = 0.0;
    for (double v : rates) mean += v;
    mean /= static_cast<double>(rates.size());
    double ss = 0.0;
    for (double v : rates) ss += (v - mean) * (v - mean);
    out.jump_rate = mean;
    out.jump_rate_error = rates.size() > 1 ? std::sqrt(ss / static_cast<double>(rates.size() - 1) / static_cast<double>(rates.size()))
                                           : kUndefined;
    for (const auto& r : results)
        for (const auto& f : r.flags)
            if (std::find(out.flags.begin(), out.flags.end(), f) == out.flags.end()) out.flags.push_back(f);
    return out;
}

void write_jump_log(const std::vector<TrajectoryResult>& results, std::ostream& out) {
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < results.size(); ++i)
        for (const auto& j : results[i].jumps) out << i << ' ' << j.time << ' ' << j.site << '\n';
    out.precision(old);
}

}  // namespace ness
