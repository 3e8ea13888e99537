#include "doctest.h"

#include <cmath>

#include "ness/error.hpp"
#include "ness/spectral.hpp"
#include "ness/steady.hpp"

using namespace ness;
using Eigen::MatrixXcd;

namespace {

struct System {
    Basis basis;
    Liouvillian l;
};

System single_site(const ModelSpec& model, int p, Complex omega) {
    ArraySpec one{1, Boundary::Ring, 0.0};
    Basis b = build_basis(one, model, TruncationPolicy{p, std::nullopt});
    Operator h = build_hamiltonian(b, one, model, DriveSpec::homogeneous(1, omega));
    Liouvillian l = build_liouvillian(h, DissipationSpec{}, b);
    return {std::move(b), std::move(l)};
}

System ring(int m, const ModelSpec& model, int p, std::optional<int> cap, Complex omega, double j) {
    ArraySpec arr{m, Boundary::Ring, j};
    Basis b = build_basis(arr, model, TruncationPolicy{p, cap});
    Operator h = build_hamiltonian(b, arr, model, DriveSpec::homogeneous(m, omega));
    Liouvillian l = build_liouvillian(h, DissipationSpec{}, b);
    return {std::move(b), std::move(l)};
}

double expect(const Operator& op, const MatrixXcd& rho) { return (MatrixXcd(op) * rho).trace().real(); }

double photons(const System& s, const MatrixXcd& rho, int site) {
    return expect(number_operator(s.basis, site), rho);
}

double onsite_g2(const System& s, const MatrixXcd& rho, int site) {
    Operator a = annihilation(s.basis, site);
    Operator aa = a * a;
    const double n = photons(s, rho, site);
    return expect(Operator(aa.adjoint()) * aa, rho) / (n * n);
}

}  // namespace

TEST_CASE("linear cavity steady state is the coherent state") {
    const double dc = 0.9, omega = 0.5;
    auto s = single_site(ModelSpec::bose_hubbard(0.0, dc), 25, omega);
    auto sol = steady_state_nullspace(s.l);
    CHECK(sol.converged);
    CHECK(sol.residual < 1e-10);
    const double n = photons(s, sol.rho.data, 0);
    CHECK(n == doctest::Approx(omega * omega / (dc * dc + 0.25)).epsilon(1e-9));
    CHECK(onsite_g2(s, sol.rho.data, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("undriven system relaxes to vacuum") {
    auto s = ring(2, ModelSpec::jaynes_cummings(3.0, 1.0, 0.5), 2, std::nullopt, 0.0, 1.0);
    auto sol = steady_state_nullspace(s.l);
    CHECK(sol.residual < 1e-12);
    CHECK(std::abs(sol.rho.data(0, 0) - 1.0) < 1e-10);
}

TEST_CASE("single JC resonator: photon blockade dip near dc = -g") {
    // coarse scan around -g; the minimum falls within 0.25 +- 0.05
    double best = 1e9;
    for (double dc = -21.5; dc <= -19.0; dc += 0.25) {
        auto s = single_site(ModelSpec::jaynes_cummings(20.0, 0.0, dc), 10, 2.0);
        auto sol = steady_state_nullspace(s.l);
        best = std::min(best, onsite_g2(s, sol.rho.data, 0));
    }
    CHECK(best == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("single JC resonator spectrum is symmetric at delta = 0") {
    for (double dc : {3.0, 14.1, 20.0, 27.5}) {
        auto sp = single_site(ModelSpec::jaynes_cummings(20.0, 0.0, dc), 8, 2.0);
        auto sm = single_site(ModelSpec::jaynes_cummings(20.0, 0.0, -dc), 8, 2.0);
        const double np = photons(sp, steady_state_nullspace(sp.l).rho.data, 0);
        const double nm = photons(sm, steady_state_nullspace(sm.l).rho.data, 0);
        CHECK(std::abs(np - nm) < 1e-8);
    }
}

TEST_CASE("homogeneous ring steady state is translation invariant") {
    for (auto model : {ModelSpec::jaynes_cummings(20.0, 2.0, -21.0), ModelSpec::bose_hubbard(11.7, -2.0)}) {
        auto s = ring(3, model, 3, 3, 1.0, 1.0);
        auto sol = steady_state_nullspace(s.l);
        const double n0 = photons(s, sol.rho.data, 0);
        for (int j = 1; j < 3; ++j) CHECK(std::abs(photons(s, sol.rho.data, j) - n0) < 1e-8);
        MatrixXcd t = MatrixXcd(translation_operator(s.basis));
        CHECK((t * sol.rho.data * t.adjoint() - sol.rho.data).norm() < 1e-8);
    }
}

TEST_CASE("time evolution agrees with the null-space solve") {
    auto s = single_site(ModelSpec::bose_hubbard(spectral::effective_kerr({20.0, 0.0}), 0.0), 12, 2.0);
    auto exact = steady_state_nullspace(s.l);
    DensityMatrix vac{MatrixXcd::Zero(13, 13)};
    vac.data(0, 0) = 1.0;
    TimeEvolveOptions opts;
    auto te = steady_state_timeevolve(s.l, vac, opts);
    INFO(te.note);
    CHECK(te.converged);
    CHECK(te.method == SteadyMethod::TimeEvolution);
    CHECK(std::abs(photons(s, te.rho.data, 0) - photons(s, exact.rho.data, 0)) < 1e-6);
    CHECK(std::abs(onsite_g2(s, te.rho.data, 0) - onsite_g2(s, exact.rho.data, 0)) < 1e-6);
    CHECK(std::abs(te.rho.trace() - 1.0) < 1e-9);
}

TEST_CASE("time evolution: decay law and horizon flag") {
    auto s = single_site(ModelSpec::bose_hubbard(0.0, 0.3), 3, 0.0);
    DensityMatrix one{MatrixXcd::Zero(4, 4)};
    one.data(1, 1) = 1.0;
    TimeEvolveOptions opts;
    opts.horizon = 2.0;
    opts.tol = 1e-30;
    opts.check_interval = 0.5;
    auto te = steady_state_timeevolve(s.l, one, opts);
    CHECK_FALSE(te.converged);
    CHECK_FALSE(te.note.empty());
    CHECK(photons(s, te.rho.data, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
    CHECK(std::abs(te.rho.trace() - 1.0) < 1e-9);
}

TEST_CASE("validate_steady") {
    auto s = ring(2, ModelSpec::bose_hubbard(3.0, -0.5), 3, std::nullopt, 0.8, 0.7);
    auto sol = steady_state_nullspace(s.l);
    auto rep = validate_steady(sol, s.l);
    CHECK(rep.residual < 1e-9);
    CHECK(rep.hermiticity_defect < 1e-10);
    CHECK(rep.trace_defect < 1e-12);
    CHECK(rep.min_eigenvalue > -1e-8);

    auto perturbed = sol;
    perturbed.rho.data(0, 1) += 1e-3;
    auto rep2 = validate_steady(perturbed, s.l);
    CHECK(rep2.residual > 1e-5);
    CHECK(rep2.hermiticity_defect > 1e-4);
}

TEST_CASE("degenerate null space is reported") {
    // Lossless, undriven: every Fock projector is stationary.
    ArraySpec one{1, Boundary::Ring, 0.0};
    auto model = ModelSpec::bose_hubbard(1.0, 0.5);
    Basis b = build_basis(one, model, TruncationPolicy{2, std::nullopt});
    Operator h = build_hamiltonian(b, one, model, DriveSpec::homogeneous(1, 0.0));
    Liouvillian l(h, {annihilation(b, 0)}, 0.0);
    try {
        steady_state_nullspace(l);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvergence);
        CHECK(std::string(e.what()).find("null-space dimension") != std::string::npos);
    }
}

TEST_CASE("direct and iterative solves agree") {
    auto s = single_site(ModelSpec::jaynes_cummings(20.0, -5.0, -19.0), 12, Complex(1.5, 0.5));
    NullspaceOptions direct;
    NullspaceOptions iterative;
    iterative.direct_max_dim = 0;
    auto a = steady_state_nullspace(s.l, direct);
    auto b = steady_state_nullspace(s.l, iterative);
    CHECK(a.residual < 1e-10);
    CHECK(b.residual < 1e-10);
    CHECK((a.rho.data - b.rho.data).norm() < 1e-9);
}
