#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "ness/error.hpp"
#include "ness/hilbert.hpp"

using namespace ness;
using Eigen::MatrixXcd;

namespace {

MatrixXcd dense(const Operator& op) { return MatrixXcd(op); }

Basis make_basis(int m, ModelKind kind, int p, std::optional<int> cap = std::nullopt) {
    return Basis::build(ArraySpec{m, Boundary::Ring, 1.0}, kind, TruncationPolicy{p, cap});
}

// Counts configurations by nested enumeration of every product state.
std::size_t brute_force_count(int m, int local_dim, bool atoms, int cap) {
    std::size_t total = 1;
    for (int j = 0; j < m; ++j) total *= static_cast<std::size_t>(local_dim);
    std::size_t count = 0;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        int exc = 0;
        for (int j = 0; j < m; ++j) {
            const int l = static_cast<int>(c % local_dim);
            c /= local_dim;
            exc += atoms ? l / 2 + l % 2 : l;
        }
        if (exc <= cap) ++count;
    }
    return count;
}

MatrixXcd random_hermitian(Eigen::Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    MatrixXcd a(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {nd(rng), nd(rng)};
    return a + a.adjoint();
}

struct System {
    Basis basis;
    Operator h;
    Liouvillian l;
};

System make_system(int m, const ModelSpec& model, int p, std::optional<int> cap, Complex omega, double j = 1.0) {
    ArraySpec arr{m, Boundary::Ring, j};
    Basis b = build_basis(arr, model, TruncationPolicy{p, cap});
    Operator h = build_hamiltonian(b, arr, model, DriveSpec::homogeneous(m, omega));
    Liouvillian l = build_liouvillian(h, DissipationSpec{}, b);
    return {std::move(b), std::move(h), std::move(l)};
}

}  // namespace

TEST_CASE("basis dimensions") {
    CHECK(make_basis(1, ModelKind::BH, 2).dim() == 3);
    CHECK(make_basis(2, ModelKind::JCH, 1).dim() == 16);
    CHECK(make_basis(3, ModelKind::JCH, 4, 4).dim() == brute_force_count(3, 10, true, 4));
    CHECK(make_basis(3, ModelKind::JCH, 4, 4).dim() == 129);
    CHECK(make_basis(4, ModelKind::BH, 3, 5).dim() == brute_force_count(4, 4, false, 5));
    CHECK(make_basis(2, ModelKind::JCH, 3, 2).dim() == brute_force_count(2, 8, true, 2));
}

TEST_CASE("basis round trip and ordering") {
    for (auto kind : {ModelKind::BH, ModelKind::JCH}) {
        Basis b = make_basis(3, kind, 2, 3);
        for (std::size_t i = 0; i < b.dim(); ++i) {
            CHECK(b.index_of(b.local_states(i)) == i);
            CHECK(b.excitations(i) <= 3);
        }
        for (std::size_t i = 1; i < b.dim(); ++i) {
            auto prev = b.local_states(i - 1);
            auto cur = b.local_states(i);
            CHECK(std::lexicographical_compare(prev.begin(), prev.end(), cur.begin(), cur.end()));
        }
        std::vector<std::uint8_t> outside = {2, 2, 0};
        if (kind == ModelKind::JCH) outside = {5, 5, 0};
        CHECK(b.index_of(outside) == Basis::npos);
    }
}

TEST_CASE("dimension overflow reports the computed dimension") {
    try {
        Basis::build(ArraySpec{12, Boundary::Ring, 1.0}, ModelKind::JCH, TruncationPolicy{4, std::nullopt}, 1000);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("1e+12") != std::string::npos);
    }
}

TEST_CASE("spec validation") {
    ModelSpec bad = ModelSpec::jaynes_cummings(1.0, 0.0, 0.0);
    bad.kerr = spectral::KerrParams{1.0};
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS((ArraySpec{0, Boundary::Ring, 1.0}.validate()), Error);
    CHECK_THROWS_AS((ArraySpec{3, Boundary::Ring, -1.0}.validate()), Error);
    CHECK_THROWS_AS((DissipationSpec{0.0, 0.0}.validate()), Error);
    CHECK_THROWS_AS((DissipationSpec{1.0, 0.1}.validate()), Error);
    CHECK_THROWS_AS((TruncationPolicy{0, std::nullopt}.validate()), Error);

    ArraySpec arr{2, Boundary::Ring, 1.0};
    Basis b = build_basis(arr, ModelSpec::bose_hubbard(1.0, 0.0), TruncationPolicy{2, std::nullopt});
    CHECK_THROWS_AS(build_hamiltonian(b, arr, ModelSpec::bose_hubbard(1.0, 0.0), DriveSpec::homogeneous(3, 1.0)), Error);
    CHECK_THROWS_AS(build_hamiltonian(b, arr, ModelSpec::jaynes_cummings(1.0, 0.0, 0.0), DriveSpec::homogeneous(2, 1.0)),
                    Error);
}

TEST_CASE("bonds") {
    CHECK(ArraySpec{1, Boundary::Ring, 1.0}.bonds().empty());
    CHECK(ArraySpec{2, Boundary::Ring, 1.0}.bonds().size() == 1);
    CHECK(ArraySpec{3, Boundary::Ring, 1.0}.bonds().size() == 3);
    CHECK(ArraySpec{3, Boundary::Chain, 1.0}.bonds().size() == 2);
}

TEST_CASE("single-site spectra") {
    // BH, U = 0, no drive: H = -dc a^+a
    ArraySpec one{1, Boundary::Ring, 0.0};
    const double dc = 0.7;
    auto model = ModelSpec::bose_hubbard(0.0, dc);
    Basis b = build_basis(one, model, TruncationPolicy{4, std::nullopt});
    MatrixXcd h = dense(build_hamiltonian(b, one, model, DriveSpec::homogeneous(1, 0.0)));
    for (int n = 0; n <= 4; ++n) CHECK(h(n, n).real() == doctest::Approx(-dc * n));
    CHECK((h - MatrixXcd(h.diagonal().asDiagonal())).norm() == 0.0);

    // JC, delta = 0, dc = 0: one-excitation eigenvalues +-g
    auto jc = ModelSpec::jaynes_cummings(2.5, 0.0, 0.0);
    Basis bj = build_basis(one, jc, TruncationPolicy{3, std::nullopt});
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(dense(build_hamiltonian(bj, one, jc, DriveSpec::homogeneous(1, 0.0))));
    std::vector<double> evs(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    auto has = [&](double v) {
        return std::any_of(evs.begin(), evs.end(), [&](double e) { return std::abs(e - v) < 1e-12; });
    };
    CHECK(has(2.5));
    CHECK(has(-2.5));
    CHECK(has(2.5 * std::sqrt(2.0)));
    CHECK(has(0.0));
}

TEST_CASE("operator algebra") {
    Basis b = make_basis(2, ModelKind::JCH, 3);
    for (int j = 0; j < 2; ++j) {
        MatrixXcd a = dense(annihilation(b, j));
        MatrixXcd n = dense(number_operator(b, j));
        CHECK((a.adjoint() * a - n).norm() < 1e-12);
        MatrixXcd s = dense(atom_lowering(b, j));
        CHECK((s * s).norm() == 0.0);
    }
    // a_0 lowers total photon number by exactly one
    MatrixXcd a0 = dense(annihilation(b, 0));
    for (Eigen::Index r = 0; r < a0.rows(); ++r)
        for (Eigen::Index c = 0; c < a0.cols(); ++c)
            if (std::abs(a0(r, c)) > 0) {
                int nr = 0, nc = 0;
                for (int j = 0; j < 2; ++j) {
                    nr += b.photons(static_cast<std::size_t>(r), j);
                    nc += b.photons(static_cast<std::size_t>(c), j);
                }
                CHECK(nr == nc - 1);
            }
}

TEST_CASE("Hamiltonian symmetries") {
    for (auto model : {ModelSpec::jaynes_cummings(3.0, 1.5, -2.0), ModelSpec::bose_hubbard(4.0, -1.0)}) {
        auto sys = make_system(3, model, 3, 4, Complex(0.8, 0.0));
        MatrixXcd h = dense(sys.h);
        CHECK((h - h.adjoint()).norm() < 1e-12);
        MatrixXcd t = dense(translation_operator(sys.basis));
        CHECK((t * h - h * t).norm() < 1e-10);
        CHECK((t.adjoint() * t - MatrixXcd::Identity(t.rows(), t.cols())).norm() < 1e-12);

        auto dark = make_system(3, model, 3, 4, Complex(0.0));
        MatrixXcd h0 = dense(dark.h);
        MatrixXcd ntot = dense(total_excitation_operator(dark.basis));
        CHECK((h0 * ntot - ntot * h0).norm() < 1e-12);
    }
}

TEST_CASE("k=0 Bloch mode of a BH ring sits at -2J") {
    ArraySpec arr{3, Boundary::Ring, 1.3};
    auto model = ModelSpec::bose_hubbard(5.0, 0.0);
    Basis b = build_basis(arr, model, TruncationPolicy{2, 1});
    MatrixXcd h = dense(build_hamiltonian(b, arr, model, DriveSpec::homogeneous(3, 0.0)));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(-2.6));
}

TEST_CASE("complex drive amplitudes") {
    ArraySpec arr{4, Boundary::Ring, 1.0};
    auto model = ModelSpec::bose_hubbard(2.0, 0.3);
    auto drive = DriveSpec::phased(4, Complex(2.0, 0.0), 3.14159265358979323846 / 2);
    CHECK(std::abs(drive.amplitudes[1] - Complex(0.0, 2.0)) < 1e-12);
    CHECK(std::abs(drive.amplitudes[2] - Complex(-2.0, 0.0)) < 1e-12);
    Basis b = build_basis(arr, model, TruncationPolicy{2, std::nullopt});
    MatrixXcd h = dense(build_hamiltonian(b, arr, model, drive));
    CHECK((h - h.adjoint()).norm() < 1e-12);
    // <1 at site 1| H |vac> = Omega_1
    std::vector<std::uint8_t> one = {0, 1, 0, 0}, vac = {0, 0, 0, 0};
    CHECK(std::abs(h(b.index_of(one), b.index_of(vac)) - drive.amplitudes[1]) < 1e-12);
}

TEST_CASE("effective Hamiltonian") {
    auto sys = make_system(2, ModelSpec::jaynes_cummings(2.0, 0.5, 0.1), 3, std::nullopt, Complex(0.4));
    MatrixXcd h = dense(sys.h);
    MatrixXcd heff = dense(sys.l.effective_hamiltonian());
    MatrixXcd ntot = dense(number_operator(sys.basis, 0) + number_operator(sys.basis, 1));
    MatrixXcd anti = 0.5 * (heff - heff.adjoint());
    CHECK((anti - Complex(0.0, -0.5) * ntot).norm() < 1e-12);
    CHECK((heff.col(0) - h.col(0)).norm() < 1e-14);

    // Fock state norm decays as exp(-gamma n t)
    ArraySpec one{1, Boundary::Ring, 0.0};
    auto model = ModelSpec::bose_hubbard(3.0, 0.4);
    Basis b = build_basis(one, model, TruncationPolicy{4, std::nullopt});
    Operator h1 = build_hamiltonian(b, one, model, DriveSpec::homogeneous(1, 0.0));
    MatrixXcd he = dense(build_effective_hamiltonian(h1, DissipationSpec{1.0, 0.0}, b));
    const double t = 0.37;
    MatrixXcd u = (Complex(0.0, -t) * he).exp();
    for (int n = 0; n <= 4; ++n) CHECK(u.col(n).squaredNorm() == doctest::Approx(std::exp(-n * t)).epsilon(1e-12));
}

TEST_CASE("Liouvillian structure") {
    std::mt19937_64 rng(42);
    auto sys = make_system(2, ModelSpec::jaynes_cummings(2.0, 1.0, -1.0), 2, std::nullopt, Complex(0.7, 0.2));
    const auto d = static_cast<Eigen::Index>(sys.l.dim());
    for (int k = 0; k < 5; ++k) {
        MatrixXcd rho = random_hermitian(d, rng);
        CHECK(std::abs(sys.l.apply(rho).trace()) < 1e-10);
    }

    // vectorized form agrees with the matrix action; identity is a left null vector
    Operator s = sys.l.vectorized();
    MatrixXcd rho = random_hermitian(d, rng);
    Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(rho.data(), d * d);
    Eigen::VectorXcd lv = s * v;
    MatrixXcd lrho = sys.l.apply(rho);
    CHECK((Eigen::Map<MatrixXcd>(lv.data(), d, d) - lrho).norm() < 1e-10);
    MatrixXcd id = MatrixXcd::Identity(d, d);
    Eigen::VectorXcd idv = Eigen::Map<Eigen::VectorXcd>(id.data(), d * d);
    Eigen::VectorXcd left = Operator(s.adjoint()) * idv;
    CHECK(left.norm() < 1e-10);

    // no drive: vacuum projector is stationary
    auto dark = make_system(2, ModelSpec::jaynes_cummings(2.0, 1.0, -1.0), 2, std::nullopt, Complex(0.0));
    MatrixXcd vac = MatrixXcd::Zero(d, d);
    vac(0, 0) = 1.0;
    CHECK(dark.l.apply(vac).norm() < 1e-14);
}

TEST_CASE("linear cavity: coherent state is stationary") {
    // (i dc - gamma/2) alpha = i Omega in the frame with H = -dc a^+a + Omega (a + a^+)
    const double dc = -0.8, omega = 0.6, gamma = 1.0;
    const Complex alpha = Complex(0.0, omega) / Complex(-0.5 * gamma, dc);
    CHECK(std::norm(alpha) == doctest::Approx(omega * omega / (dc * dc + 0.25 * gamma * gamma)));

    ArraySpec one{1, Boundary::Ring, 0.0};
    auto model = ModelSpec::bose_hubbard(0.0, dc);
    const int p = 30;
    Basis b = build_basis(one, model, TruncationPolicy{p, std::nullopt});
    Operator h = build_hamiltonian(b, one, model, DriveSpec::homogeneous(1, omega));
    Liouvillian l = build_liouvillian(h, DissipationSpec{gamma, 0.0}, b);

    Eigen::VectorXcd psi(p + 1);
    psi(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n <= p; ++n) psi(n) = psi(n - 1) * alpha / std::sqrt(double(n));
    MatrixXcd rho = psi * psi.adjoint();
    CHECK(l.apply(rho).norm() < 1e-12);
}

TEST_CASE("coordinate-list export") {
    ArraySpec one{1, Boundary::Ring, 0.0};
    auto model = ModelSpec::bose_hubbard(0.0, 1.0);
    Basis b = build_basis(one, model, TruncationPolicy{2, std::nullopt});
    std::ostringstream os;
    write_coo(os, annihilation(b, 0));
    CHECK(os.str() == "0 1 1 0\n1 2 1.4142135623730951 0\n");
}
