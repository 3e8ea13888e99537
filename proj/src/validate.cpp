#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ness/acceptance.hpp"
#include "ness/error.hpp"
#include "ness/experiments.hpp"
#include "ness/spectral.hpp"
#include "ness/steady.hpp"

namespace ness {

namespace {

using spectral::Branch;
using spectral::JaynesCummingsParams;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

template <class F>
CheckResult timed(const std::string& name, F&& body) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

ExperimentConfig single_site(ModelKind kind, double g, double delta, int photons) {
    ExperimentConfig c;
    c.kind = kind;
    c.g = g;
    c.delta = delta;
    c.truncation = {photons, std::nullopt};
    c.sweep = SweepSpec{SweepVariable::DriveDetuning, 0.0, 0.0, 1};
    return c;
}

Eigen::VectorXd spectrum_of(const Operator& h) {
    const Eigen::MatrixXcd dense(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
    return es.eigenvalues();
}

double distance_to_spectrum(const Eigen::VectorXd& ev, double e) {
    return (ev.array() - e).abs().minCoeff();
}

CheckResult linear_cavity() {
    return timed("linear-cavity", [](CheckResult& r) {
        ExperimentConfig c = single_site(ModelKind::BH, 0.0, 0.0, 20);
        c.u = 0.0;
        c.omega = 0.7;
        double worst_n = 0.0, worst_g2 = 0.0;
        for (double dc : {-1.0, 0.0, 0.5, 3.0}) {
            const SpectrumPoint p = solve_dense_point(c, dc);
            const double expect = 0.49 / (dc * dc + 0.25);
            worst_n = std::max(worst_n, std::abs(p.value.photon_number[0] - expect) / expect);
            worst_g2 = std::max(worst_g2, std::abs(p.value.g2(0, 0) - 1.0));
        }
        r.passed = worst_n < 1e-6 && worst_g2 < 1e-6;
        r.detail = "max relative photon-number error " + fmt(worst_n) + ", max |g2 - 1| " + fmt(worst_g2);
    });
}

CheckResult decay_law() {
    return timed("decay-law", [](CheckResult& r) {
        const ModelSpec model = ModelSpec::bose_hubbard(0.0, 0.0);
        const ArraySpec array{1, Boundary::Ring, 0.0};
        const Basis basis = build_basis(array, model, {3, std::nullopt});
        const Operator h = build_hamiltonian(basis, array, model, DriveSpec::homogeneous(1, 0.0));
        const Operator heff = build_effective_hamiltonian(h, DissipationSpec{}, basis);
        StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(basis.dim()));
        psi[1] = 1.0;
        double worst = 0.0;
        double t = 0.0;
        for (int step = 0; step < 40; ++step) {
            psi = propagate_step(psi, heff, 0.05);
            t += 0.05;
            worst = std::max(worst, std::abs(psi.squaredNorm() - std::exp(-t)));
        }
        r.passed = worst < 1e-10;
        r.detail = "max |norm^2 - exp(-gamma t)| over t <= 2: " + fmt(worst);
    });
}

CheckResult polariton_spectrum() {
    return timed("polariton-spectrum", [](CheckResult& r) {
        double worst = 0.0;
        for (double delta : {0.0, 7.0, -12.0}) {
            const JaynesCummingsParams p{20.0, delta};
            const ModelSpec model = ModelSpec::jaynes_cummings(p.g, p.delta, 0.0);
            const ArraySpec array{1, Boundary::Ring, 0.0};
            const Basis basis = build_basis(array, model, {5, std::nullopt});
            const Eigen::VectorXd ev =
                spectrum_of(build_hamiltonian(basis, array, model, DriveSpec::homogeneous(1, 0.0)));
            for (int n = 1; n <= 4; ++n)
                for (Branch b : {Branch::Plus, Branch::Minus})
                    worst = std::max(worst,
                                     distance_to_spectrum(ev, spectral::polariton_mode(n, b, p).frequency_offset));
        }
        r.passed = worst < 1e-9;
        r.detail = "max distance of |n,+/-> (n <= 4) to the exact spectrum: " + fmt(worst);
    });
}

CheckResult resonance_detuning() {
    return timed("resonance-detuning", [](CheckResult& r) {
        double worst = 0.0;
        const JaynesCummingsParams p{20.0, 3.0};
        for (int n = 1; n <= 3; ++n)
            for (Branch b : {Branch::Plus, Branch::Minus}) {
                const double dc = spectral::jc_resonance_detuning(n, b, p);
                const ModelSpec model = ModelSpec::jaynes_cummings(p.g, p.delta, dc);
                const ArraySpec array{1, Boundary::Ring, 0.0};
                const Basis basis = build_basis(array, model, {5, std::nullopt});
                const Eigen::VectorXd ev =
                    spectrum_of(build_hamiltonian(basis, array, model, DriveSpec::homogeneous(1, 0.0)));
                worst = std::max(worst, distance_to_spectrum(ev, 0.0));
            }
        r.passed = worst < 1e-9;
        r.detail = "max smallest |eigenvalue| in the rotating frame at the n-photon resonances: " + fmt(worst);
    });
}

CheckResult kerr_identities() {
    return timed("kerr-identities", [](CheckResult& r) {
        double worst = 0.0;
        for (double delta : {0.0, -40.0, 15.0}) {
            const JaynesCummingsParams p{20.0, delta};
            const double u = spectral::effective_kerr(p);
            const double from_ladder = spectral::polariton_mode(2, Branch::Minus, p).frequency_offset -
                                       2.0 * spectral::polariton_mode(1, Branch::Minus, p).frequency_offset;
            worst = std::max(worst, std::abs(u - from_ladder));
            worst = std::max(worst, std::abs(spectral::bh_resonance_detuning(2, {u}) - u / 2.0));
        }
        const double at_zero = spectral::effective_kerr({20.0, 0.0});
        worst = std::max(worst, std::abs(at_zero - (2.0 - std::sqrt(2.0)) * 20.0));
        r.passed = worst < 1e-9;
        r.detail = "max deviation from the ladder and two-photon identities: " + fmt(worst);
    });
}

CheckResult bloch_peak(bool corrupt_sign, int workers) {
    return timed("bloch-peak", [&](CheckResult& r) {
        const ArraySpec array{3, Boundary::Ring, 1.0};
        const ArraySpec isolated{3, Boundary::Ring, 0.0};
        const DriveSpec drive = DriveSpec::homogeneous(3, 0.1);
        const PointSolver solve = [&](double dc) {
            const ModelSpec model = ModelSpec::bose_hubbard(0.0, dc);
            const Basis basis = build_basis(array, model, {2, std::nullopt});
            Operator h = build_hamiltonian(basis, array, model, drive);
            if (corrupt_sign) {
                // H(J) = H(0) - J T, so 2 H(0) - H(J) = H(0) + J T
                const Operator h0 = build_hamiltonian(basis, isolated, model, drive);
                h = Operator(2.0 * h0 - h);
            }
            const SteadyStateSolution sol = steady_state_nullspace(build_liouvillian(h, DissipationSpec{}, basis));
            SpectrumPoint p;
            p.value = observe(basis, sol.rho);
            p.error = ObservableSet::zero(3, false);
            return p;
        };
        SweepOptions so;
        so.workers = workers;
        const SpectrumTable table = sweep_spectrum(3, false, linear_grid(-3.0, 3.0, 121), solve, so);
        const auto peak = highest_peak(locate_peaks(table, "n_avg"));
        const double expect = -2.0;
        r.passed = peak && std::abs(peak->center - expect) < 0.1;
        r.detail = "3-site ring, J=1, U=0: zero-momentum peak at " + (peak ? fmt(peak->center) : "none") +
                   ", expected " + fmt(expect) + " +- 0.1";
    });
}

CheckResult translation_invariance() {
    return timed("translation-invariance", [](CheckResult& r) {
        ExperimentConfig c;
        c.kind = ModelKind::JCH;
        c.g = 20.0;
        c.delta = 2.0;
        c.sites = 3;
        c.hopping = 1.0;
        c.omega = 2.0;
        c.truncation = {2, std::nullopt};
        c.sweep = SweepSpec{SweepVariable::DriveDetuning, -21.0, -21.0, 1};
        const SpectrumPoint p = solve_dense_point(c, -21.0);
        const auto& n = p.value.photon_number;
        const auto& g2 = p.value.g2;
        const double spread = n.maxCoeff() - n.minCoeff();
        const double g2_spread = std::max(std::abs(g2(0, 1) - g2(1, 2)), std::abs(g2(0, 1) - g2(2, 0)));
        r.passed = spread < 1e-8 * std::max(1.0, n.maxCoeff()) && g2_spread < 1e-7;
        r.detail = "site spread of photon number " + fmt(spread) + ", of nearest-neighbour g2 " + fmt(g2_spread);
    });
}

CheckResult dense_vs_trajectories(int workers) {
    return timed("dense-vs-trajectories", [&](CheckResult& r) {
        ExperimentConfig c;
        c.kind = ModelKind::BH;
        c.u = 4.0;
        c.sites = 2;
        c.hopping = 1.0;
        c.omega = 0.8;
        c.truncation = {4, std::nullopt};
        c.sweep = SweepSpec{SweepVariable::DriveDetuning, 0.5, 0.5, 1};
        c.dt = 0.01;
        c.t_transient = 15.0;
        c.n_avg_steps = 2000;
        c.n_trajectories = 100;
        c.seed = 7;
        const SpectrumPoint exact = solve_dense_point(c, 0.5);
        c.solver = SolverKind::TrajDense;
        const SpectrumPoint traj = solve_trajectory_point(c, 0.5, c.seed, workers);
        double zmax = 0.0;
        for (int j = 0; j < 2; ++j)
            zmax = std::max(zmax, std::abs(traj.value.photon_number[j] - exact.value.photon_number[j]) /
                                      traj.error.photon_number[j]);
        zmax = std::max(zmax, std::abs(traj.value.g2(0, 1) - exact.value.g2(0, 1)) / traj.error.g2(0, 1));
        zmax = std::max(zmax, std::abs(traj.value.g2(0, 0) - exact.value.g2(0, 0)) / traj.error.g2(0, 0));
        r.passed = zmax < 4.0;
        r.detail = "2-site BH, R=100: max |z| of n_j, g2(0,0), g2(0,1) against the exact state " + fmt(zmax);
    });
}

CheckResult dense_vs_mps(int workers) {
    return timed("dense-vs-mps", [&](CheckResult& r) {
        ExperimentConfig c;
        c.kind = ModelKind::JCH;
        c.g = 5.0;
        c.delta = 1.0;
        c.sites = 3;
        c.hopping = 1.0;
        c.omega = 1.0;
        c.truncation = {2, std::nullopt};
        c.sweep = SweepSpec{SweepVariable::DriveDetuning, -4.0, -4.0, 1};
        c.dt = 0.001;
        c.t_transient = 0.5;
        c.n_avg_steps = 300;
        c.n_trajectories = 4;
        c.seed = 11;
        c.mps.chi_max = 64;
        c.mps.discard_tol = 0.0;
        c.solver = SolverKind::TrajDense;
        const SpectrumPoint a = solve_trajectory_point(c, -4.0, c.seed, workers);
        c.solver = SolverKind::TrajMps;
        const SpectrumPoint b = solve_trajectory_point(c, -4.0, c.seed, workers);
        const double dn = (a.value.photon_number - b.value.photon_number).cwiseAbs().maxCoeff();
        const double da = (a.value.atomic_excitation - b.value.atomic_excitation).cwiseAbs().maxCoeff();
        const double dg = std::abs(a.value.g2(0, 1) - b.value.g2(0, 1));
        r.passed = std::max({dn, da, dg}) < 1e-6;
        r.detail = "3-site JCH ring, same seeds: max backend difference of n, atom, g2 " +
                   fmt(std::max({dn, da, dg}));
    });
}

}  // namespace

std::vector<CheckResult> validate_suite(const ValidateOptions& opts) {
    std::vector<CheckResult> out;
    out.push_back(linear_cavity());
    out.push_back(decay_law());
    out.push_back(polariton_spectrum());
    out.push_back(resonance_detuning());
    out.push_back(kerr_identities());
    out.push_back(bloch_peak(opts.corrupt_hopping_sign, opts.workers));
    out.push_back(translation_invariance());
    if (opts.full) {
        out.push_back(dense_vs_trajectories(opts.workers));
        out.push_back(dense_vs_mps(opts.workers));
        AcceptanceOptions ao;
        ao.workers = opts.workers;
        for (const auto& r : run_acceptance(ao))
            out.push_back({"criterion-" + std::to_string(r.id) + " " + r.name, r.passed, r.detail, r.seconds});
    }
    return out;
}

}  // namespace ness
