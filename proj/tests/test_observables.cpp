#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "ness/error.hpp"
#include "ness/observables.hpp"
#include "ness/spectral.hpp"
#include "ness/steady.hpp"
#include "systems.hpp"

using namespace ness;
using ness::testing::ring;
using ness::testing::single_site;
using Eigen::MatrixXcd;

namespace {

StateVector basis_state(const Basis& b, std::vector<std::uint8_t> locals) {
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(b.dim()));
    psi[static_cast<Eigen::Index>(b.index_of(locals))] = 1.0;
    return psi;
}

double expect(const Operator& op, const StateVector& psi) { return psi.dot(op * psi).real() / psi.squaredNorm(); }

ObservableSet dense_point(const ness::testing::System& s) {
    return observe(s.basis, steady_state_nullspace(s.l).rho);
}

}  // namespace

TEST_CASE("g2 of a coherent steady state is 1") {
    auto s = single_site(ModelSpec::bose_hubbard(0.0, 0.4), 25, 0.6);
    auto rho = steady_state_nullspace(s.l).rho;
    CHECK(g2(s.basis, rho, 0, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("Fock and atomic basis states") {
    ArraySpec one{1, Boundary::Ring, 0.0};
    Basis bh = build_basis(one, ModelSpec::bose_hubbard(1.0, 0.0), TruncationPolicy{3, std::nullopt});
    CHECK(g2(bh, basis_state(bh, {1}), 0, 0) == 0.0);
    CHECK(g2(bh, basis_state(bh, {2}), 0, 0) == doctest::Approx(0.5));

    Basis jc = build_basis(one, ModelSpec::jaynes_cummings(1.0, 0.0, 0.0), TruncationPolicy{3, std::nullopt});
    auto pop = populations(jc, basis_state(jc, {static_cast<std::uint8_t>(jc.local_index(0, 1))}));
    CHECK(pop.photon_number[0] == 0.0);
    CHECK(pop.atomic_excitation[0] == 1.0);
    CHECK(pop.g2.size() == 0);
}

TEST_CASE("vacuum: zero populations and undefined g2") {
    auto s = ring(3, ModelSpec::jaynes_cummings(2.0, 0.0, 0.0), 2, std::nullopt, 0.0, 1.0);
    auto obs = observe(s.basis, basis_state(s.basis, {0, 0, 0}));
    CHECK(obs.photon_number.isZero());
    CHECK(obs.atomic_excitation.isZero());
    CHECK(obs.total_n == 0.0);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) CHECK(is_undefined(obs.g2(j, k)));
    CHECK(is_undefined(obs.g2_separation[0]));
}

TEST_CASE("moments agree with operator expectation values") {
    auto s = ring(3, ModelSpec::jaynes_cummings(1.0, 0.3, 0.0), 3, 4, 0.0, 1.0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    StateVector psi(static_cast<Eigen::Index>(s.basis.dim()));
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = Complex(nd(rng), nd(rng));
    auto m = moments(s.basis, psi);
    for (int j = 0; j < 3; ++j) {
        Operator aj = annihilation(s.basis, j);
        Operator sj = atom_lowering(s.basis, j);
        CHECK(m.photons[j] == doctest::Approx(expect(number_operator(s.basis, j), psi)).epsilon(1e-12));
        CHECK(m.atoms[j] == doctest::Approx(expect(Operator(sj.adjoint()) * sj, psi)).epsilon(1e-12));
        for (int k = 0; k < 3; ++k) {
            Operator ak = annihilation(s.basis, k);
            Operator num = Operator(aj.adjoint()) * Operator(ak.adjoint()) * aj * ak;
            CHECK(m.pairs(j, k) == doctest::Approx(expect(num, psi)).epsilon(1e-12));
        }
    }
    auto obs = observables_from(m);
    CHECK((obs.g2 - obs.g2.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(obs.total_n == doctest::Approx(expect(total_excitation_operator(s.basis), psi)).epsilon(1e-12));
}

TEST_CASE("Kerr resonator g2 at zero detuning") {
    const double u = spectral::effective_kerr({20.0, 0.0});
    auto s = single_site(ModelSpec::bose_hubbard(u, 0.0), 12, 2.0);
    const double v = dense_point(s).g2(0, 0);
    CHECK(v == doctest::Approx(0.15).epsilon(0.05 / 0.15));
}

TEST_CASE("atomic limit: driven lower polariton saturates at half atomic occupancy") {
    spectral::JaynesCummingsParams jc{20.0, 200.0};
    const double dc = spectral::jc_resonance_detuning(1, spectral::Branch::Minus, jc);
    auto s = single_site(ModelSpec::jaynes_cummings(jc.g, jc.delta, dc), 4, 2.0);
    auto obs = dense_point(s);
    CHECK(obs.atomic_excitation[0] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(obs.photon_number[0] < 0.02);
}

TEST_CASE("ring: g2 depends only on separation") {
    auto s = ring(4, ModelSpec::bose_hubbard(5.0, -1.0), 2, 3, 1.0, 1.0);
    auto obs = dense_point(s);
    for (int j = 0; j < 4; ++j)
        for (int r = 0; r <= 2; ++r) CHECK(std::abs(obs.g2(j, (j + r) % 4) - obs.g2_separation[r]) < 1e-8);
    CHECK(obs.n_avg == doctest::Approx(obs.photon_number[0]));
}

TEST_CASE("truncation sentinel") {
    auto weak = single_site(ModelSpec::bose_hubbard(0.0, 0.0), 6, 0.1);
    CHECK_FALSE(dense_point(weak).truncated);
    auto strong = single_site(ModelSpec::bose_hubbard(0.0, 0.0), 3, 1.0);
    CHECK(dense_point(strong).truncated);
}

TEST_CASE("estimate: means, standard errors and ratios") {
    auto s = ring(2, ModelSpec::bose_hubbard(2.0, 0.0), 3, std::nullopt, 0.0, 1.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<Moments> samples;
    for (int r = 0; r < 5; ++r) {
        StateVector psi(static_cast<Eigen::Index>(s.basis.dim()));
        for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = Complex(nd(rng), nd(rng));
        samples.push_back(moments(s.basis, psi));
    }
    auto e = estimate(samples);
    CHECK(e.samples == 5);
    double mean = 0.0, ss = 0.0;
    for (auto& m : samples) mean += m.photons[1] / 5.0;
    for (auto& m : samples) ss += (m.photons[1] - mean) * (m.photons[1] - mean);
    CHECK(e.mean.photon_number[1] == doctest::Approx(mean).epsilon(1e-13));
    CHECK(e.error.photon_number[1] == doctest::Approx(std::sqrt(ss / 4.0) / std::sqrt(5.0)).epsilon(1e-10));
    // ratio of averages, not average of ratios
    CHECK(e.mean.g2(0, 1) == doctest::Approx(e.moments.pairs(0, 1) / (e.moments.photons[0] * e.moments.photons[1])));
    CHECK(e.error.g2(0, 1) > 0.0);

    auto same = estimate({samples[0], samples[0], samples[0]});
    CHECK(same.error.photon_number.isZero());
    CHECK(same.error.g2(0, 0) == doctest::Approx(0.0).scale(1.0));

    auto two = estimate({samples[0], samples[1]});
    CHECK(two.mean.photon_number[0] == doctest::Approx((samples[0].photons[0] + samples[1].photons[0]) / 2));

    auto single = estimate({samples[0]});
    CHECK(is_undefined(single.error.photon_number[0]));

    Moments other = Moments::zero(3, false);
    CHECK_THROWS_AS(estimate({samples[0], other}), Error);
}

TEST_CASE("locate_peaks on synthetic data") {
    SUBCASE("Lorentzian") {
        const double center = 0.3137, hw = 0.5, step = 0.05;
        std::vector<double> x, y;
        for (double v = -4.0; v <= 4.0 + 1e-12; v += step) {
            x.push_back(v);
            y.push_back(1.0 / ((v - center) * (v - center) + hw * hw));
        }
        auto peaks = locate_peaks(x, y);
        REQUIRE(peaks.size() == 1);
        CHECK(std::abs(peaks[0].center - center) < step / 10);
        CHECK(peaks[0].height == doctest::Approx(1.0 / (hw * hw)).epsilon(0.01));
        // prominence is measured from the higher of the two tails
        const double base = 1.0 / ((4.0 + center) * (4.0 + center) + hw * hw);
        CHECK(peaks[0].prominence == doctest::Approx(peaks[0].height - base).epsilon(0.01));
    }
    SUBCASE("two Gaussians") {
        std::vector<double> x, y;
        for (int i = 0; i <= 400; ++i) {
            const double v = -10.0 + 0.05 * i;
            x.push_back(v);
            y.push_back(std::exp(-(v + 3) * (v + 3) / 2) + 0.5 * std::exp(-(v - 4) * (v - 4) / 0.5));
        }
        auto peaks = locate_peaks(x, y);
        REQUIRE(peaks.size() == 2);
        CHECK(peaks[0].center == doctest::Approx(-3.0).epsilon(0.005));
        CHECK(peaks[1].center == doctest::Approx(4.0).epsilon(0.005));
        CHECK(peaks[0].width == doctest::Approx(2 * std::sqrt(2 * std::log(2.0))).epsilon(0.01));
        CHECK(highest_peak(peaks)->center == peaks[0].center);
    }
    SUBCASE("flat and undefined") {
        std::vector<double> x{0, 1, 2, 3, 4};
        CHECK(locate_peaks(x, {1, 1, 1, 1, 1}).empty());
        CHECK(locate_peaks(x, {kUndefined, 0, 1, kUndefined, 0}).empty());
        CHECK(locate_peaks(x, {0, 1, 0, kUndefined, 0}).size() == 1);
        CHECK_FALSE(highest_peak({}).has_value());
    }
}

TEST_CASE("sweep: linear cavity Lorentzian") {
    const double omega = 0.3;
    PointSolver solve = [&](double dc) {
        auto s = single_site(ModelSpec::bose_hubbard(0.0, dc), 14, omega);
        SpectrumPoint p;
        p.value = dense_point(s);
        p.error = ObservableSet::zero(1, false);
        return p;
    };
    auto table = sweep_spectrum(1, false, linear_grid(-3.0, 3.0, 121), solve);
    auto n = table.column("n_0");
    for (std::size_t i = 0; i < n.size(); ++i) {
        const double dc = table.points[i].delta_c;
        CHECK(n[i] == doctest::Approx(omega * omega / (dc * dc + 0.25)).epsilon(1e-8));
    }
    auto peaks = locate_peaks(table, "n_0");
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0].center) < 0.005);
    CHECK(peaks[0].width == doctest::Approx(1.0).epsilon(0.05));
    CHECK(table.column("se_n_0")[10] == 0.0);
}

TEST_CASE("sweep: single JC resonator resonances at +-g/sqrt(n)") {
    const double g = 20.0;
    PointSolver solve = [&](double dc) {
        SpectrumPoint p;
        p.value = dense_point(single_site(ModelSpec::jaynes_cummings(g, 0.0, dc), 8, 2.0));
        p.error = ObservableSet::zero(1, true);
        return p;
    };
    auto table = sweep_spectrum(1, true, linear_grid(-24.0, 24.0, 481), solve);
    auto peaks = locate_peaks(table, "n_0", PeakOptions{0.0, 1e-3});
    auto near = [&](double where) {
        for (const auto& p : peaks)
            if (std::abs(p.center - where) < 0.5) return true;
        return false;
    };
    for (int n : {1, 2, 3}) {
        INFO("n = " << n);
        CHECK(near(g / std::sqrt(double(n))));
        CHECK(near(-g / std::sqrt(double(n))));
    }
}

TEST_CASE("sweep: 3-site BH single-particle Bloch peak at -2J") {
    PointSolver solve = [&](double dc) {
        SpectrumPoint p;
        p.value = dense_point(ring(3, ModelSpec::bose_hubbard(11.7, dc), 3, 3, 0.3, 1.0));
        p.error = ObservableSet::zero(3, false);
        return p;
    };
    auto table = sweep_spectrum(3, false, linear_grid(-4.0, 1.0, 51), solve);
    auto top = highest_peak(locate_peaks(table, "n_avg"));
    REQUIRE(top);
    CHECK(std::abs(top->center + 2.0) < 0.5);
}

TEST_CASE("sweep: failing points are flagged and the sweep continues") {
    PointSolver solve = [&](double dc) {
        if (dc > 0.5 && dc < 1.5) throw Error(ErrorKind::NonConvergence, "no luck, really");
        SpectrumPoint p;
        p.value = observables_from(Moments::zero(2, false));
        p.error = ObservableSet::zero(2, false);
        return p;
    };
    auto table = sweep_spectrum(2, false, {0.0, 1.0, 2.0}, solve, SweepOptions{2});
    REQUIRE(table.points.size() == 3);
    CHECK(table.points[0].ok);
    CHECK_FALSE(table.points[1].ok);
    CHECK(table.points[2].ok);
    CHECK(is_undefined(table.column("n_0")[1]));

    std::ostringstream csv;
    write_csv(table, csv);
    std::istringstream in(csv.str());
    std::string header, row0, row1;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    INFO(row0);
    CHECK(header.rfind("delta_c,n_0,n_1,g2_0_0,g2_0_1,g2_1_1,total_n,n_avg,g2_r0,g2_r1,se_n_0", 0) == 0);
    CHECK(header.substr(header.size() - 13) == ",status,flags");
    CHECK(row0.rfind("0,0,0,NA,NA,NA,0,0,NA,NA,0,0,", 0) == 0);
    CHECK(row0.substr(row0.size() - 4) == ",ok,");
    CHECK(row1.find(",failed,\"error: no luck, really\"") != std::string::npos);

    CHECK_THROWS_AS(sweep_spectrum(2, false, {0.0, 0.0}, solve), Error);
    CHECK_THROWS_AS(sweep_spectrum(2, false, {}, solve), Error);
    CHECK_THROWS_AS(table.column("bogus"), Error);
}
