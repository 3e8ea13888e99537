#include "ness/mps.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "ness/error.hpp"

namespace ness {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

void TruncationControl::validate() const {
    if (chi_max < 1) fail(ErrorKind::Config, "chi_max must be at least 1");
    if (!(discard_tol >= 0.0)) fail(ErrorKind::Config, "discard_tol must be non-negative");
    if (!(budget >= 0.0)) fail(ErrorKind::Config, "truncation budget must be non-negative");
}

namespace {

// Extra columns of the randomized range finder beyond chi_max, and its power iterations.
constexpr Eigen::Index kSketchOversample = 12;
constexpr int kSketchPowerIterations = 1;

MatrixXcd orthonormal_columns(const MatrixXcd& x) {
    Eigen::HouseholderQR<MatrixXcd> qr(x);
    return qr.householderQ() * MatrixXcd::Identity(x.rows(), x.cols());
}

struct Split {
    MatrixXcd u;          // left isometry, rows (s, left bond)
    MatrixXcd svt;        // singular values times V^+
    Eigen::VectorXd sv;
    double discarded = 0.0;
    bool limited = false;
};

// Truncated SVD of a two-site block. When chi_max is well below the possible
// rank, the leading triplets come from a randomized range finder with a fixed
// seed (so runs stay reproducible); the discarded weight is always measured
// against the exact Frobenius norm.
Split split_two_site(const MatrixXcd& m, const TruncationControl& trunc) {
    const Eigen::Index n = std::min(m.rows(), m.cols());
    const Eigen::Index sketch = static_cast<Eigen::Index>(std::min<long long>(trunc.chi_max, n)) + kSketchOversample;
    MatrixXcd u, v;
    Eigen::VectorXd sv;
    if (2 * sketch <= n) {
        std::mt19937_64 gen(0x243f6a8885a308d3ULL);
        std::normal_distribution<double> normal;
        MatrixXcd omega(m.cols(), sketch);
        for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = Complex(normal(gen), normal(gen));
        MatrixXcd q = orthonormal_columns(m * omega);
        for (int it = 0; it < kSketchPowerIterations; ++it) {
            MatrixXcd z = orthonormal_columns(m.adjoint() * q);
            q = orthonormal_columns(m * z);
        }
        Eigen::BDCSVD<MatrixXcd> svd(MatrixXcd(q.adjoint() * m), Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "SVD failed in a two-site gate");
        u = q * svd.matrixU();
        sv = svd.singularValues();
        v = svd.matrixV();
    } else {
        Eigen::BDCSVD<MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) fail(ErrorKind::NonConvergence, "SVD failed in a two-site gate");
        u = svd.matrixU();
        sv = svd.singularValues();
        v = svd.matrixV();
    }

    const double total = m.squaredNorm();
    Eigen::Index keep = 1;
    if (sv.size() > 0 && sv[0] > 0.0)
        while (keep < sv.size() && sv[keep] > kNumericalZero * sv[0]) ++keep;
    // smallest rank whose discarded tail (including anything the sketch missed) stays within discard_tol
    double tail = std::max(0.0, total - sv.head(keep).squaredNorm());
    while (keep > 1 && tail + sv[keep - 1] * sv[keep - 1] <= trunc.discard_tol * total) {
        tail += sv[keep - 1] * sv[keep - 1];
        --keep;
    }
    Split out;
    if (keep > trunc.chi_max) {
        keep = trunc.chi_max;
        out.limited = true;
    }
    out.discarded = total > 0.0 ? std::max(0.0, (total - sv.head(keep).squaredNorm()) / total) : 0.0;
    out.sv = sv.head(keep);
    out.u = u.leftCols(keep);
    out.svt = out.sv.asDiagonal() * v.leftCols(keep).adjoint();
    return out;
}

}  // namespace

Mps Mps::from_product(const std::vector<VectorXcd>& local_states) {
    require(!local_states.empty(), "an MPS needs at least one site");
    Mps out;
    out.d_ = static_cast<int>(local_states.front().size());
    require(out.d_ > 0, "local dimension must be positive");
    for (const auto& v : local_states) {
        require(v.size() == out.d_, "all local states must have the same dimension");
        const double n = v.norm();
        require(n > 0.0, "local state has zero norm");
        std::vector<MatrixXcd> site(static_cast<std::size_t>(out.d_));
        for (int s = 0; s < out.d_; ++s) site[static_cast<std::size_t>(s)] = MatrixXcd::Constant(1, 1, v[s] / n);
        out.tensors_.push_back(std::move(site));
    }
    out.singular_.assign(local_states.size() - 1, Eigen::VectorXd::Ones(1));
    return out;
}

Mps Mps::from_dense(const VectorXcd& psi, int sites, int local_dim) {
    require(sites >= 1 && local_dim >= 1, "invalid MPS shape");
    Eigen::Index total = 1;
    for (int j = 0; j < sites; ++j) total *= local_dim;
    require(psi.size() == total, "dense vector does not match d^M");
    Mps out;
    out.d_ = local_dim;
    out.tensors_.resize(static_cast<std::size_t>(sites));
    out.singular_.resize(static_cast<std::size_t>(std::max(0, sites - 1)));
    const Eigen::Index d = local_dim;
    // rows (s, l) with l fastest, columns the remaining sites
    Eigen::Index rest = total / d;
    MatrixXcd c(d, rest);
    for (Eigen::Index s = 0; s < d; ++s) c.row(s) = psi.segment(s * rest, rest).transpose();
    Eigen::Index dl = 1;
    for (int j = 0; j < sites - 1; ++j) {
        Eigen::BDCSVD<MatrixXcd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        Eigen::Index k = 1;
        while (k < sv.size() && sv[k] > kNumericalZero * sv[0]) ++k;
        auto& site = out.tensors_[static_cast<std::size_t>(j)];
        site.resize(static_cast<std::size_t>(d));
        for (Eigen::Index s = 0; s < d; ++s) site[static_cast<std::size_t>(s)] = svd.matrixU().block(s * dl, 0, dl, k);
        out.singular_[static_cast<std::size_t>(j)] = sv.head(k);
        MatrixXcd r = sv.head(k).asDiagonal() * svd.matrixV().leftCols(k).adjoint();  // k x rest
        rest /= d;
        MatrixXcd next(d * k, rest);
        for (Eigen::Index s = 0; s < d; ++s) next.middleRows(s * k, k) = r.middleCols(s * rest, rest);
        c = std::move(next);
        dl = k;
    }
    auto& last = out.tensors_.back();
    last.resize(static_cast<std::size_t>(d));
    for (Eigen::Index s = 0; s < d; ++s) last[static_cast<std::size_t>(s)] = c.middleRows(s * dl, dl);
    out.center_ = sites - 1;
    return out;
}

int Mps::bond_dim(int b) const {
    require(b >= 0 && b + 1 < sites(), "bond index out of range");
    return static_cast<int>(tensors_[static_cast<std::size_t>(b)][0].cols());
}

int Mps::max_bond_dim() const {
    int m = 1;
    for (int b = 0; b + 1 < sites(); ++b) m = std::max(m, bond_dim(b));
    return m;
}

double Mps::norm2() const {
    double n = 0.0;
    for (const auto& a : tensors_[static_cast<std::size_t>(center_)]) n += a.squaredNorm();
    return n;
}

void Mps::scale(Complex factor) {
    for (auto& a : tensors_[static_cast<std::size_t>(center_)]) a *= factor;
}

void Mps::shift_right(int c) {
    auto& here = tensors_[static_cast<std::size_t>(c)];
    auto& next = tensors_[static_cast<std::size_t>(c + 1)];
    const Eigen::Index dl = here[0].rows(), dr = here[0].cols();
    MatrixXcd m(d_ * dl, dr);
    for (int s = 0; s < d_; ++s) m.middleRows(s * dl, dl) = here[static_cast<std::size_t>(s)];
    Eigen::HouseholderQR<MatrixXcd> qr(m);
    const Eigen::Index k = std::min(m.rows(), m.cols());
    MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(m.rows(), k);
    MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (int s = 0; s < d_; ++s) {
        here[static_cast<std::size_t>(s)] = q.middleRows(s * dl, dl);
        next[static_cast<std::size_t>(s)] = r * next[static_cast<std::size_t>(s)];
    }
    center_ = c + 1;
}

void Mps::shift_left(int c) {
    auto& here = tensors_[static_cast<std::size_t>(c)];
    auto& prev = tensors_[static_cast<std::size_t>(c - 1)];
    const Eigen::Index dl = here[0].rows(), dr = here[0].cols();
    MatrixXcd mt(d_ * dr, dl);  // adjoint of [A^0 A^1 ...]
    for (int s = 0; s < d_; ++s) mt.middleRows(s * dr, dr) = here[static_cast<std::size_t>(s)].adjoint();
    Eigen::HouseholderQR<MatrixXcd> qr(mt);
    const Eigen::Index k = std::min(mt.rows(), mt.cols());
    MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(mt.rows(), k);
    MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    MatrixXcd radj = r.adjoint();
    for (int s = 0; s < d_; ++s) {
        here[static_cast<std::size_t>(s)] = q.middleRows(s * dr, dr).adjoint();
        prev[static_cast<std::size_t>(s)] = prev[static_cast<std::size_t>(s)] * radj;
    }
    center_ = c - 1;
}

void Mps::move_center(int site) {
    require(site >= 0 && site < sites(), "site index out of range");
    while (center_ < site) shift_right(center_);
    while (center_ > site) shift_left(center_);
}

double Mps::apply_two_site_gate(int b, const MatrixXcd& gate, const TruncationControl& trunc, TruncationStats* stats) {
    require(b >= 0 && b + 1 < sites(), "bond index out of range");
    const Eigen::Index d = d_;
    require(gate.rows() == d * d && gate.cols() == d * d, "two-site gate has the wrong shape");
    move_center(b);
    auto& left = tensors_[static_cast<std::size_t>(b)];
    auto& right = tensors_[static_cast<std::size_t>(b + 1)];
    const Eigen::Index dl = left[0].rows(), dr = right[0].cols();

    MatrixXcd x(d * d, dl * dr);
    for (Eigen::Index t1 = 0; t1 < d; ++t1)
        for (Eigen::Index t2 = 0; t2 < d; ++t2) {
            MatrixXcd theta = left[static_cast<std::size_t>(t1)] * right[static_cast<std::size_t>(t2)];
            x.row(t1 * d + t2) = Eigen::Map<const Eigen::RowVectorXcd>(theta.data(), dl * dr);
        }
    MatrixXcd y = gate * x;
    MatrixXcd big(d * dl, d * dr);
    for (Eigen::Index s1 = 0; s1 < d; ++s1)
        for (Eigen::Index s2 = 0; s2 < d; ++s2) {
            Eigen::RowVectorXcd row = y.row(s1 * d + s2);
            big.block(s1 * dl, s2 * dr, dl, dr) = Eigen::Map<const MatrixXcd>(row.data(), dl, dr);
        }

    const Split split = split_two_site(big, trunc);
    const Eigen::Index keep = split.sv.size();
    for (Eigen::Index s = 0; s < d; ++s) {
        left[static_cast<std::size_t>(s)] = split.u.middleRows(s * dl, dl);
        right[static_cast<std::size_t>(s)] = split.svt.middleCols(s * dr, dr);
    }
    const double discarded = split.discarded;
    const bool limited = split.limited;
    singular_[static_cast<std::size_t>(b)] = split.sv;
    center_ = b + 1;
    if (stats) {
        stats->discarded += std::max(0.0, discarded);
        stats->max_bond = std::max(stats->max_bond, static_cast<int>(keep));
        if (limited && discarded > trunc.discard_tol) ++stats->chi_limited;
    }
    return std::max(0.0, discarded);
}

double Mps::apply_local_operator(int site, const MatrixXcd& op) {
    require(op.rows() == d_ && op.cols() == d_, "local operator has the wrong shape");
    move_center(site);
    auto& t = tensors_[static_cast<std::size_t>(site)];
    std::vector<MatrixXcd> out(t.size(), MatrixXcd::Zero(t[0].rows(), t[0].cols()));
    for (int s = 0; s < d_; ++s)
        for (int u = 0; u < d_; ++u)
            if (op(s, u) != Complex(0.0)) out[static_cast<std::size_t>(s)] += op(s, u) * t[static_cast<std::size_t>(u)];
    t = std::move(out);
    return norm2();
}

std::vector<MatrixXcd> Mps::left_environments() const {
    std::vector<MatrixXcd> e(static_cast<std::size_t>(sites() + 1));
    e[0] = MatrixXcd::Ones(1, 1);
    for (int j = 0; j < sites(); ++j) {
        const auto& t = tensors_[static_cast<std::size_t>(j)];
        MatrixXcd acc = MatrixXcd::Zero(t[0].cols(), t[0].cols());
        for (const auto& a : t) acc.noalias() += a.adjoint() * e[static_cast<std::size_t>(j)] * a;
        e[static_cast<std::size_t>(j + 1)] = std::move(acc);
    }
    return e;
}

std::vector<MatrixXcd> Mps::right_environments() const {
    std::vector<MatrixXcd> f(static_cast<std::size_t>(sites() + 1));
    f[static_cast<std::size_t>(sites())] = MatrixXcd::Ones(1, 1);
    for (int j = sites() - 1; j >= 0; --j) {
        const auto& t = tensors_[static_cast<std::size_t>(j)];
        MatrixXcd acc = MatrixXcd::Zero(t[0].rows(), t[0].rows());
        for (const auto& a : t) acc.noalias() += a * f[static_cast<std::size_t>(j + 1)] * a.adjoint();
        f[static_cast<std::size_t>(j)] = std::move(acc);
    }
    return f;
}

namespace {

// sum_{s,t} op(s,t) A^s^+ E A^t
MatrixXcd transfer(const std::vector<MatrixXcd>& t, const MatrixXcd& e, const MatrixXcd& op) {
    const auto d = static_cast<Eigen::Index>(t.size());
    MatrixXcd acc = MatrixXcd::Zero(t[0].cols(), t[0].cols());
    for (Eigen::Index u = 0; u < d; ++u) {
        MatrixXcd ea = e * t[static_cast<std::size_t>(u)];
        for (Eigen::Index s = 0; s < d; ++s)
            if (op(s, u) != Complex(0.0)) acc.noalias() += op(s, u) * (t[static_cast<std::size_t>(s)].adjoint() * ea);
    }
    return acc;
}

// sum_s w(s) A^s^+ E A^s
MatrixXcd transfer_diag(const std::vector<MatrixXcd>& t, const MatrixXcd& e, const std::vector<double>& w) {
    MatrixXcd acc = MatrixXcd::Zero(t[0].cols(), t[0].cols());
    for (std::size_t s = 0; s < t.size(); ++s)
        if (w[s] != 0.0) acc.noalias() += w[s] * (t[s].adjoint() * e * t[s]);
    return acc;
}

Complex close(const MatrixXcd& x, const MatrixXcd& f) { return (x.transpose().array() * f.array()).sum(); }

}  // namespace

Complex Mps::expectation_two_site(int j, int k, const MatrixXcd& op_j, const MatrixXcd& op_k) const {
    require(j >= 0 && j < sites() && k >= 0 && k < sites(), "site index out of range");
    require(op_j.rows() == d_ && op_k.rows() == d_, "local operator has the wrong shape");
    if (j == k) return expectation(j, op_j * op_k);
    const MatrixXcd& first = j < k ? op_j : op_k;
    const MatrixXcd& second = j < k ? op_k : op_j;
    if (j > k) std::swap(j, k);
    auto e = left_environments();
    auto f = right_environments();
    const MatrixXcd id = MatrixXcd::Identity(d_, d_);
    MatrixXcd x = transfer(tensors_[static_cast<std::size_t>(j)], e[static_cast<std::size_t>(j)], first);
    for (int m = j + 1; m < k; ++m) x = transfer(tensors_[static_cast<std::size_t>(m)], x, id);
    x = transfer(tensors_[static_cast<std::size_t>(k)], x, second);
    const Complex norm = e.back()(0, 0);
    return close(x, f[static_cast<std::size_t>(k + 1)]) / norm;
}

Complex Mps::expectation(int j, const MatrixXcd& op) const {
    require(j >= 0 && j < sites(), "site index out of range");
    auto e = left_environments();
    auto f = right_environments();
    MatrixXcd x = transfer(tensors_[static_cast<std::size_t>(j)], e[static_cast<std::size_t>(j)], op);
    return close(x, f[static_cast<std::size_t>(j + 1)]) / e.back()(0, 0);
}

VectorXcd Mps::to_dense() const {
    MatrixXcd c = MatrixXcd::Ones(1, 1);
    for (const auto& t : tensors_) {
        MatrixXcd next(c.rows() * d_, t[0].cols());
        for (Eigen::Index p = 0; p < c.rows(); ++p)
            for (int s = 0; s < d_; ++s) next.row(p * d_ + s) = c.row(p) * t[static_cast<std::size_t>(s)];
        c = std::move(next);
    }
    return c.col(0);
}

double Mps::isometry_defect() const {
    double worst = 0.0;
    for (int j = 0; j < sites(); ++j) {
        if (j == center_) continue;
        const auto& t = tensors_[static_cast<std::size_t>(j)];
        MatrixXcd acc;
        if (j < center_) {
            acc = MatrixXcd::Zero(t[0].cols(), t[0].cols());
            for (const auto& a : t) acc += a.adjoint() * a;
        } else {
            acc = MatrixXcd::Zero(t[0].rows(), t[0].rows());
            for (const auto& a : t) acc += a * a.adjoint();
        }
        worst = std::max(worst, (acc - MatrixXcd::Identity(acc.rows(), acc.cols())).norm());
    }
    return worst;
}

std::vector<double> Mps::site_expectations_unnormalized(const std::vector<double>& diag) const {
    require(static_cast<int>(diag.size()) == d_, "weights do not match the local dimension");
    auto e = left_environments();
    auto f = right_environments();
    std::vector<double> out(static_cast<std::size_t>(sites()));
    for (int j = 0; j < sites(); ++j)
        out[static_cast<std::size_t>(j)] =
            close(transfer_diag(tensors_[static_cast<std::size_t>(j)], e[static_cast<std::size_t>(j)], diag),
                  f[static_cast<std::size_t>(j + 1)])
                .real();
    return out;
}

Moments Mps::moments(const std::vector<int>& photons, const std::vector<int>& atoms, bool with_atoms,
                     int top_level) const {
    require(static_cast<int>(photons.size()) == d_, "photon table does not match the local dimension");
    const int m = sites();
    auto e = left_environments();
    auto f = right_environments();
    const double norm = e.back()(0, 0).real();
    require(norm > 0.0, "state has zero norm");
    std::vector<double> n(photons.begin(), photons.end()), nn(static_cast<std::size_t>(d_)),
        at(static_cast<std::size_t>(d_)), top(static_cast<std::size_t>(d_)), one(static_cast<std::size_t>(d_), 1.0);
    for (int s = 0; s < d_; ++s) {
        nn[static_cast<std::size_t>(s)] = photons[static_cast<std::size_t>(s)] * (photons[static_cast<std::size_t>(s)] - 1.0);
        at[static_cast<std::size_t>(s)] = with_atoms ? atoms[static_cast<std::size_t>(s)] : 0.0;
        top[static_cast<std::size_t>(s)] = photons[static_cast<std::size_t>(s)] == top_level ? 1.0 : 0.0;
    }
    Moments out = Moments::zero(m, with_atoms);
    for (int j = 0; j < m; ++j) {
        const auto& t = tensors_[static_cast<std::size_t>(j)];
        const auto& ej = e[static_cast<std::size_t>(j)];
        const auto& fj = f[static_cast<std::size_t>(j + 1)];
        out.photons[j] = close(transfer_diag(t, ej, n), fj).real() / norm;
        out.pairs(j, j) = close(transfer_diag(t, ej, nn), fj).real() / norm;
        if (with_atoms) out.atoms[j] = close(transfer_diag(t, ej, at), fj).real() / norm;
        out.top_level[j] = close(transfer_diag(t, ej, top), fj).real() / norm;
        MatrixXcd x = transfer_diag(t, ej, n);
        for (int k = j + 1; k < m; ++k) {
            const auto& tk = tensors_[static_cast<std::size_t>(k)];
            out.pairs(j, k) = out.pairs(k, j) =
                close(transfer_diag(tk, x, n), f[static_cast<std::size_t>(k + 1)]).real() / norm;
            if (k + 1 < m) x = transfer_diag(tk, x, one);
        }
    }
    return out;
}

LocalSpace make_local_space(ModelKind kind, int photons_per_site) {
    require(photons_per_site >= 1, "photons_per_site must be at least 1");
    LocalSpace ls;
    ls.atoms = kind == ModelKind::JCH;
    ls.max_photons = photons_per_site;
    const int na = ls.atoms ? 2 : 1;
    ls.dim = (photons_per_site + 1) * na;
    ls.a = MatrixXcd::Zero(ls.dim, ls.dim);
    ls.sigma = MatrixXcd::Zero(ls.dim, ls.dim);
    for (int n = 0; n <= photons_per_site; ++n)
        for (int s = 0; s < na; ++s) {
            const int idx = n * na + s;
            ls.photons.push_back(n);
            ls.atom.push_back(s);
            if (n > 0) ls.a((n - 1) * na + s, idx) = std::sqrt(static_cast<double>(n));
            if (ls.atoms && s == 1) ls.sigma(n * na, idx) = 1.0;
        }
    return ls;
}

MatrixXcd swap_gate(int d) {
    MatrixXcd g = MatrixXcd::Zero(d * d, d * d);
    for (int s1 = 0; s1 < d; ++s1)
        for (int s2 = 0; s2 < d; ++s2) g(s2 * d + s1, s1 * d + s2) = 1.0;
    return g;
}

TebdSchedule::TebdSchedule(const ArraySpec& array, const ModelSpec& model, const DriveSpec& drive,
                           const DissipationSpec& diss, int photons_per_site, double dt)
    : m_(array.m), dt_(dt), j_hop_(array.j_hop), local_(make_local_space(model.kind, photons_per_site)) {
    array.validate();
    model.validate();
    // a lossless schedule (gamma_p = 0) is accepted for unitary evolution
    if (diss.gamma_p != 0.0) diss.validate();
    require(diss.gamma_a == 0.0, "atomic loss is not supported (gamma_a must be 0)");
    require(static_cast<int>(drive.amplitudes.size()) == m_, "one drive amplitude per site is required");
    require(dt > 0.0, "dt must be positive");

    // on-site effective Hamiltonians from the same assembly as the dense path
    ArraySpec one{1, Boundary::Ring, 0.0};
    Basis b1 = build_basis(one, model, TruncationPolicy{photons_per_site, std::nullopt});
    require(static_cast<int>(b1.dim()) == local_.dim, "local basis mismatch");
    for (int j = 0; j < m_; ++j) {
        DriveSpec dj{{drive.amplitudes[static_cast<std::size_t>(j)]}};
        Operator h = build_hamiltonian(b1, one, model, dj);
        if (diss.gamma_p != 0.0) h = build_effective_hamiltonian(h, diss, b1);
        site_h_.emplace_back(h);
    }

    const auto bonds = array.bonds();
    std::vector<int> degree(static_cast<std::size_t>(m_), 0);
    for (auto [i, k] : bonds) {
        ++degree[static_cast<std::size_t>(i)];
        ++degree[static_cast<std::size_t>(k)];
    }
    for (int j = 0; j < m_; ++j)
        if (degree[static_cast<std::size_t>(j)] == 0) {
            const int g = add_gate((site_h_[static_cast<std::size_t>(j)] * Complex(0.0, -dt)).exp());
            ops_.push_back({Op::Local, j, g});
        }
    if (bonds.empty()) return;

    std::vector<std::pair<int, int>> layer_a, layer_b, closure;
    for (auto [i, k] : bonds) {
        if (k == i + 1)
            (i % 2 == 0 ? layer_a : layer_b).emplace_back(i, k);
        else
            closure.emplace_back(i, k);
    }
    // with even M the closure bond shares no site with the odd layer and joins it
    auto touches = [](const std::vector<std::pair<int, int>>& layer, int site) {
        return std::any_of(layer.begin(), layer.end(), [&](auto b) { return b.first == site || b.second == site; });
    };
    if (!closure.empty() && !touches(layer_b, closure[0].first) && !touches(layer_b, closure[0].second)) {
        layer_b.insert(layer_b.end(), closure.begin(), closure.end());
        closure.clear();
    }
    std::vector<std::vector<std::pair<int, int>>> layers;
    for (auto* l : {&layer_a, &layer_b, &closure})
        if (!l->empty()) layers.push_back(*l);

    const int swap = add_gate(swap_gate(local_.dim));
    auto emit = [&](const std::vector<std::pair<int, int>>& layer, double tau) {
        for (auto [i, k] : layer) {
            const double wi = 1.0 / degree[static_cast<std::size_t>(i)];
            const double wk = 1.0 / degree[static_cast<std::size_t>(k)];
            if (k == i + 1) {
                const int g = add_gate((bond_hamiltonian(i, k, wi, wk) * Complex(0.0, -tau)).exp());
                ops_.push_back({Op::Gate, i, g});
            } else {
                // bring site k (= M-1) next to site i (= 0), act, and move it back
                const int g = add_gate((bond_hamiltonian(i, k, wi, wk) * Complex(0.0, -tau)).exp());
                for (int b = k - 1; b >= i + 1; --b) ops_.push_back({Op::Swap, b, swap});
                ops_.push_back({Op::Gate, i, g});
                for (int b = i + 1; b <= k - 1; ++b) ops_.push_back({Op::Swap, b, swap});
            }
        }
    };
    const std::size_t n = layers.size();
    for (std::size_t l = 0; l + 1 < n; ++l) emit(layers[l], dt / 2.0);
    emit(layers[n - 1], dt);
    for (std::size_t l = n - 1; l-- > 0;) emit(layers[l], dt / 2.0);
}

int TebdSchedule::add_gate(MatrixXcd g) {
    gates_.push_back(std::move(g));
    return static_cast<int>(gates_.size()) - 1;
}

MatrixXcd TebdSchedule::bond_hamiltonian(int i, int k, double wi, double wk) const {
    const MatrixXcd id = MatrixXcd::Identity(local_.dim, local_.dim);
    const MatrixXcd ad = local_.a.adjoint();
    MatrixXcd h = -j_hop_ * (MatrixXcd(Eigen::kroneckerProduct(ad, local_.a)) +
                             MatrixXcd(Eigen::kroneckerProduct(local_.a, ad)));
    h += wi * MatrixXcd(Eigen::kroneckerProduct(site_h_[static_cast<std::size_t>(i)], id));
    h += wk * MatrixXcd(Eigen::kroneckerProduct(id, site_h_[static_cast<std::size_t>(k)]));
    return h;
}

void TebdSchedule::step(Mps& mps, const TruncationControl& trunc, TruncationStats* stats) const {
    require(mps.sites() == m_ && mps.local_dim() == local_.dim, "MPS does not match the schedule");
    for (const auto& op : ops_) {
        const auto& g = gates_[static_cast<std::size_t>(op.gate)];
        if (op.kind == Op::Local)
            mps.apply_local_operator(op.bond, g);
        else
            mps.apply_two_site_gate(op.bond, g, trunc, stats);
    }
}

MpsState::MpsState(const TebdSchedule& schedule, const TruncationControl& trunc)
    : schedule_(&schedule), trunc_(trunc) {
    trunc_.validate();
    reset_vacuum();
}

void MpsState::reset_vacuum() {
    const int d = schedule_->local().dim;
    VectorXcd vac = VectorXcd::Zero(d);
    vac[0] = 1.0;
    mps_ = Mps::from_product(std::vector<VectorXcd>(static_cast<std::size_t>(schedule_->sites()), vac));
    stats_ = TruncationStats{};
    steps_ = 0;
}

void MpsState::propagate() {
    schedule_->step(mps_, trunc_, &stats_);
    ++steps_;
    if (dump_) {
        *dump_ << steps_ * schedule_->dt() << ' ' << stats_.discarded << ' ' << mps_.max_bond_dim();
        for (int b = 0; b + 1 < mps_.sites(); ++b) *dump_ << ' ' << mps_.bond_dim(b);
        *dump_ << '\n';
    }
}

std::vector<double> MpsState::jump_weights() const {
    const auto& ph = schedule_->local().photons;
    return mps_.site_expectations_unnormalized(std::vector<double>(ph.begin(), ph.end()));
}

void MpsState::apply_jump(int site) {
    require(site >= 0 && site < sites(), "jump site out of range");
    const double n2 = mps_.apply_local_operator(site, schedule_->local().a);
    if (!(n2 > 0.0)) fail(ErrorKind::NonConvergence, "jump on an empty mode");
    mps_.scale(1.0 / std::sqrt(n2));
}

Moments MpsState::moments() const {
    const auto& l = schedule_->local();
    return mps_.moments(l.photons, l.atom, l.atoms, l.max_photons);
}

std::vector<std::string> MpsState::flags() const {
    std::vector<std::string> f;
    if (stats_.discarded > trunc_.budget) f.emplace_back("mps-discarded-weight-over-budget");
    if (stats_.chi_limited > 0) f.emplace_back("mps-chi-limited");
    return f;
}

}  // namespace ness
