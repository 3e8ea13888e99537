#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ness/error.hpp"
#include "ness/observables.hpp"
#include "ness/steady.hpp"
#include "ness/trajectory.hpp"
#include "systems.hpp"

using namespace ness;
using ness::testing::ring;
using ness::testing::single_site;
using ness::testing::System;

namespace {

StateVector basis_state(const Basis& b, std::vector<std::uint8_t> locals) {
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(b.dim()));
    psi[static_cast<Eigen::Index>(b.index_of(locals))] = 1.0;
    return psi;
}

StateFactory dense_factory(const System& s, double dt) {
    return [&s, dt] { return std::make_unique<DenseState>(s.basis, s.l, dt); };
}

double z_score(double value, double reference, double se) { return std::abs(value - reference) / se; }

}  // namespace

TEST_CASE("derive_seed is deterministic and distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t master : {0ULL, 1ULL, 42ULL})
        for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(master, i));
    CHECK(seen.size() == 3000);
    CHECK(derive_seed(7, 0) != derive_seed(7, 1));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
    UniformSource a(5), b(5);
    for (int i = 0; i < 100; ++i) {
        const double u = a.next();
        CHECK(u == b.next());
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("config validation") {
    TrajectoryConfig c;
    c.dt = 0.05;
    CHECK_NOTHROW(c.validate(1.0));
    c.dt = 0.06;
    CHECK_THROWS_AS(c.validate(1.0), Error);
    CHECK_NOTHROW(c.validate(0.5));
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(1.0), Error);
    c = TrajectoryConfig{};
    c.n_avg_steps = 0;
    CHECK_THROWS_AS(c.validate(1.0), Error);
    c = TrajectoryConfig{};
    c.n_trajectories = 0;
    CHECK_THROWS_AS(c.validate(1.0), Error);
    CHECK(default_transient(20.0, 1.0) == 25.0);
    CHECK(default_transient(std::nullopt, 1.0) == 20.0);
    CHECK(default_transient(100.0, 1.0) == 20.0);
}

TEST_CASE("propagate_step: exact decay, unitarity and the exponential oracle") {
    auto s = single_site(ModelSpec::bose_hubbard(0.0, 0.7), 3, 0.0);
    StateVector psi = basis_state(s.basis, {1});
    const Operator& h = s.l.effective_hamiltonian();
    for (int k = 0; k < 30; ++k) psi = propagate_step(psi, h, 0.1);
    CHECK(psi.squaredNorm() == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));

    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd x(8, 8), y(8, 8);
    for (Eigen::Index i = 0; i < 64; ++i) {
        x.data()[i] = Complex(nd(rng), nd(rng));
        y.data()[i] = Complex(nd(rng), 0.0);
    }
    Eigen::MatrixXcd herm = (x + x.adjoint()) / 2.0;
    Eigen::MatrixXcd heff = herm - Complex(0.0, 0.5) * (y * y.transpose()).cast<Complex>();
    StateVector v(8);
    for (Eigen::Index i = 0; i < 8; ++i) v[i] = Complex(nd(rng), nd(rng));
    v.normalize();
    const double dt = 0.37;

    StateVector w = propagate_step(v, Operator(herm.sparseView()), dt);
    CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-9));

    // oracle: eigendecomposition of the non-Hermitian generator
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(heff);
    Eigen::VectorXcd phases = (es.eigenvalues() * Complex(0.0, -dt)).array().exp();
    StateVector expected = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().lu().solve(v);
    StateVector got = propagate_step(v, Operator(heff.sparseView()), dt);
    CHECK((got - expected).norm() < 1e-8);
}

TEST_CASE("dense backend: precomputed propagator and Taylor path agree") {
    auto s = ring(2, ModelSpec::jaynes_cummings(5.0, 1.0, -4.0), 2, std::nullopt, Complex(0.8, 0.3), 1.0);
    DenseState fast(s.basis, s.l, 0.02);
    DenseState slow(s.basis, s.l, 0.02, 0);
    for (int k = 0; k < 50; ++k) {
        fast.propagate();
        slow.propagate();
    }
    CHECK((fast.state() - slow.state()).norm() < 1e-10);
    CHECK(fast.norm2() < 1.0);
}

TEST_CASE("jump site sampling") {
    auto s = ring(2, ModelSpec::bose_hubbard(1.0, 0.0), 2, std::nullopt, 0.0, 1.0);
    DenseState st(s.basis, s.l, 0.01);

    st.set_state(basis_state(s.basis, {1, 0}));
    auto w = st.jump_weights();
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == 0.0);
    for (double u : {1e-9, 0.5, 1.0}) CHECK(sample_site(w, u) == 0);

    StateVector sym = basis_state(s.basis, {1, 0}) + basis_state(s.basis, {0, 1});
    st.set_state(sym / std::sqrt(2.0));
    w = st.jump_weights();
    CHECK(w[0] == doctest::Approx(w[1]));

    StateVector mixed = (basis_state(s.basis, {2, 0}) + basis_state(s.basis, {0, 1})) / std::sqrt(2.0);
    st.set_state(mixed);
    w = st.jump_weights();
    CHECK(w[0] / (w[0] + w[1]) == doctest::Approx(2.0 / 3.0));
    CHECK(sample_site(w, 0.66) == 0);
    CHECK(sample_site(w, 0.67) == 1);

    // post-jump state is a_0 psi normalized: |1,0>
    st.apply_jump(0);
    CHECK(std::abs(st.state()[static_cast<Eigen::Index>(s.basis.index_of(std::vector<std::uint8_t>{1, 0}))]) ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(sample_site({0.0, 0.0}, 0.5), Error);

    // maybe_jump fires only below the threshold and redraws it
    UniformSource rng(1);
    st.set_state(mixed * 0.5);
    double threshold = 0.2;
    CHECK_FALSE(maybe_jump(st, rng, threshold).jumped);
    threshold = 0.3;
    auto d = maybe_jump(st, rng, threshold);
    CHECK(d.jumped);
    CHECK(st.norm2() == doctest::Approx(1.0));
    CHECK(threshold != 0.3);
}

TEST_CASE("undriven trajectory stays in vacuum") {
    auto s = ring(2, ModelSpec::jaynes_cummings(3.0, 0.0, 0.0), 2, std::nullopt, 0.0, 1.0);
    TrajectoryConfig c;
    c.dt = 0.05;
    c.t_transient = 1.0;
    c.n_avg_steps = 100;
    DenseState st(s.basis, s.l, c.dt);
    auto r = run_trajectory(c, st, 9);
    CHECK(r.jumps.empty());
    CHECK(r.samples == 100);
    CHECK(r.average.photons.isZero());
    CHECK(r.average.atoms.isZero());
}

TEST_CASE("norm decays monotonically between jumps without drive") {
    auto s = single_site(ModelSpec::bose_hubbard(2.0, 0.3), 4, 0.0);
    DenseState st(s.basis, s.l, 0.01);
    StateVector psi = StateVector::Constant(5, 1.0);
    st.set_state(psi.normalized());
    double last = st.norm2();
    for (int k = 0; k < 300; ++k) {
        st.propagate();
        CHECK(st.norm2() <= last * (1 + 1e-14));
        last = st.norm2();
    }
}

TEST_CASE("same seed, same trajectory") {
    auto s = ring(2, ModelSpec::bose_hubbard(3.0, -1.0), 3, std::nullopt, 1.0, 1.0);
    TrajectoryConfig c;
    c.dt = 0.02;
    c.t_transient = 5.0;
    c.n_avg_steps = 500;
    c.n_trajectories = 4;
    c.master_seed = 77;
    auto a = run_ensemble(c, dense_factory(s, c.dt));
    c.workers = 3;
    auto b = run_ensemble(c, dense_factory(s, c.dt));
    std::ostringstream la, lb;
    write_jump_log(a, la);
    write_jump_log(b, lb);
    CHECK(la.str() == lb.str());
    CHECK_FALSE(la.str().empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == derive_seed(77, i));
        CHECK(a[i].average.photons == b[i].average.photons);
        for (std::size_t k = 1; k < a[i].jumps.size(); ++k) CHECK(a[i].jumps[k].time > a[i].jumps[k - 1].time);
    }
    CHECK(a[0].jumps != a[1].jumps);
}

TEST_CASE("ensemble_average basics") {
    auto s = single_site(ModelSpec::bose_hubbard(1.0, 0.0), 3, 0.5);
    TrajectoryConfig c;
    c.dt = 0.05;
    c.t_transient = 2.0;
    c.n_avg_steps = 50;
    DenseState st(s.basis, s.l, c.dt);
    auto r1 = run_trajectory(c, st, 1);
    auto r2 = run_trajectory(c, st, 2);
    auto same = ensemble_average({r1, r1, r1});
    CHECK(same.estimate.error.photon_number[0] == 0.0);
    auto two = ensemble_average({r1, r2});
    CHECK(two.estimate.mean.photon_number[0] ==
          doctest::Approx((r1.average.photons[0] + r2.average.photons[0]) / 2));
    CHECK_THROWS_AS(ensemble_average({}), Error);
}

TEST_CASE("linear cavity: time-averaged photon number and jump rate") {
    const double omega = 0.6, dc = 0.5;
    auto s = single_site(ModelSpec::bose_hubbard(0.0, dc), 8, omega);
    TrajectoryConfig c;
    c.dt = 0.005;
    c.t_transient = 40.0;  // the coherent amplitude relaxes as exp(-t/2); its variance is tiny
    c.n_avg_steps = 20000;
    c.n_trajectories = 60;
    c.master_seed = 2024;
    auto est = ensemble_average(run_ensemble(c, dense_factory(s, c.dt)));
    const double exact = omega * omega / (dc * dc + 0.25);
    const auto& e = est.estimate;
    INFO("n = " << e.mean.photon_number[0] << " +- " << e.error.photon_number[0] << ", exact " << exact);
    CHECK(z_score(e.mean.photon_number[0], exact, e.error.photon_number[0]) < 3.0);
    INFO("rate = " << est.jump_rate << " +- " << est.jump_rate_error);
    CHECK(z_score(est.jump_rate, exact, est.jump_rate_error) < 3.0);
}

TEST_CASE("single JC resonator: trajectory g2 matches the dense steady state") {
    auto s = single_site(ModelSpec::jaynes_cummings(20.0, 0.0, -20.0), 6, 2.0);
    auto dense = observe(s.basis, steady_state_nullspace(s.l).rho);
    TrajectoryConfig c;
    c.dt = 0.005;
    c.t_transient = default_transient(20.0, 1.0);
    c.n_avg_steps = 20000;
    c.n_trajectories = 40;
    c.master_seed = 5;
    auto est = ensemble_average(run_ensemble(c, dense_factory(s, c.dt)));
    const auto& e = est.estimate;
    INFO("g2 = " << e.mean.g2(0, 0) << " +- " << e.error.g2(0, 0) << ", dense " << dense.g2(0, 0));
    CHECK(dense.g2(0, 0) == doctest::Approx(0.25).epsilon(0.2));
    CHECK(z_score(e.mean.g2(0, 0), dense.g2(0, 0), e.error.g2(0, 0)) < 3.0);
    CHECK(z_score(e.mean.photon_number[0], dense.photon_number[0], e.error.photon_number[0]) < 3.0);
    CHECK(z_score(e.mean.atomic_excitation[0], dense.atomic_excitation[0], e.error.atomic_excitation[0]) < 3.0);
}

TEST_CASE("errors carry the trajectory index") {
    auto s = single_site(ModelSpec::bose_hubbard(0.0, 0.0), 2, 0.3);
    TrajectoryConfig c;
    c.n_trajectories = 3;
    c.t_transient = 0.0;
    c.n_avg_steps = 1;
    StateFactory broken = [] () -> std::unique_ptr<TrajectoryState> {
        throw Error(ErrorKind::NonConvergence, "boom");
    };
    try {
        run_ensemble(c, broken);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "trajectory 0: boom");
        CHECK(e.kind() == ErrorKind::NonConvergence);
    }
}
