#pragma once

// Truncated Hermite (Fock) model of the Schroedinger representation pi^lambda.
//
// With a = (xi + d/dxi)/sqrt2 and h_n = |n>, pi^lambda at (p, q, z) in adapted coordinates is
// exp(i lambda(z)) * prod_j D(alpha_j), D the displacement operator and
// alpha_j = sqrt(|lambda|/2) (-p_j + i q_j).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

#include "htype_core.hpp"
#include "quadrature.hpp"

namespace htlab {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using FockVector = CVec;
using FockOperator = CMat;

inline constexpr cplx I_{0.0, 1.0};

struct FockSpace {
    int d = 1;
    int N = 0;
    int dim = 1;
    std::vector<std::vector<int>> index;  // rank -> multi-index
    std::vector<int> level;               // rank -> |alpha|
    std::map<std::vector<int>, int> rank_of;

    int rank(const std::vector<int>& a) const {
        auto it = rank_of.find(a);
        return it == rank_of.end() ? -1 : it->second;
    }
    // ranks with |alpha| <= N - k
    int interior(int k) const {
        int n = 0;
        for (int l : level)
            if (l <= N - k) ++n;
        return n;
    }
};

namespace detail {
inline void enumerate_degree(int d, int n, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out) {
    if (pos == d - 1) {
        cur[pos] = n;
        out.push_back(cur);
        return;
    }
    for (int k = n; k >= 0; --k) {
        cur[pos] = k;
        enumerate_degree(d, n - k, cur, pos + 1, out);
    }
}
}  // namespace detail

// graded, then lexicographically decreasing within a degree
inline FockSpace fock_space(int d, int N) {
    FockSpace s;
    s.d = d;
    s.N = N;
    for (int n = 0; n <= N; ++n) {
        std::vector<int> cur(d, 0);
        std::vector<std::vector<int>> deg;
        detail::enumerate_degree(d, n, cur, 0, deg);
        for (auto& a : deg) {
            s.rank_of[a] = static_cast<int>(s.index.size());
            s.index.push_back(a);
            s.level.push_back(n);
        }
    }
    s.dim = static_cast<int>(s.index.size());
    return s;
}

inline FockVector hermite_vector(const FockSpace& s, const std::vector<int>& alpha) {
    int r = s.rank(alpha);
    if (r < 0) throw DimensionError("multi-index outside the Fock space");
    FockVector v = FockVector::Zero(s.dim);
    v(r) = 1.0;
    return v;
}

// <m| D(alpha) |n>, 0 <= m, n <= N
inline void displacement_1d(cplx alpha, int N, CMat& D) {
    // D_{n+k,n} = e^{ik arg alpha} f^k_n and D_{n,n+k} = (-1)^k e^{-ik arg alpha} f^k_n with
    // f^k_n = sqrt(n!/(n+k)!) |alpha|^k e^{-x/2} L^(k)_n(x), x = |alpha|^2, by the Laguerre recurrence in n
    // normalized to stay within range. Recurring along a column instead (D_{m+1,n} from D_{m,n-1}, D_{m,n})
    // is unstable: it loses the bound |D| <= 1 by 10 orders of magnitude at N = 60.
    D.resize(N + 1, N + 1);
    const double x = std::norm(alpha), th = std::arg(alpha);
    for (int k = 0; k <= N; ++k) {
        double f0;
        if (x == 0)
            f0 = k == 0 ? 1.0 : 0.0;
        else
            f0 = std::exp(0.5 * k * std::log(x) - 0.5 * x - 0.5 * std::lgamma(k + 1.0));
        const cplx lo = std::polar(1.0, k * th), up = (k & 1 ? -1.0 : 1.0) * std::polar(1.0, -k * th);
        double fm = 0, f = f0;
        for (int n = 0; n + k <= N; ++n) {
            D(n + k, n) = lo * f;
            if (k) D(n, n + k) = up * f;
            double fn = ((2 * n + 1 + k - x) * f - std::sqrt(static_cast<double>(n) * (n + k)) * fm) /
                        std::sqrt((n + 1.0) * (n + k + 1.0));
            fm = f;
            f = fn;
        }
    }
}

// normalized Hermite polynomials: h_n(x) = H^_n(x) exp(-x^2/2)
inline void hermite_poly_normalized(double x, int N, std::vector<double>& out) {
    out.resize(N + 1);
    out[0] = std::pow(std::numbers::pi, -0.25);
    if (N >= 1) out[1] = std::sqrt(2.0) * x * out[0];
    for (int n = 1; n < N; ++n)
        out[n + 1] = std::sqrt(2.0 / (n + 1)) * x * out[n] - std::sqrt(static_cast<double>(n) / (n + 1)) * out[n - 1];
}

// integral of h_b(xi) exp(i b xi) h_a(xi + a) dxi times exp(i a b / 2), by Gauss-Hermite
inline void displacement_1d_quadrature(double a, double b, int N, const Rule& gh, CMat& D) {
    D = CMat::Zero(N + 1, N + 1);
    std::vector<double> hm, hp;
    const double env = std::exp(-0.25 * a * a);
    const cplx pre = std::exp(I_ * (0.5 * a * b)) * env;
    for (size_t k = 0; k < gh.x.size(); ++k) {
        double t = gh.x[k];
        hermite_poly_normalized(t - 0.5 * a, N, hm);
        hermite_poly_normalized(t + 0.5 * a, N, hp);
        cplx wk = gh.w[k] * std::exp(I_ * (b * (t - 0.5 * a)));
        for (int bb = 0; bb <= N; ++bb) {
            cplx rb = wk * hm[bb];
            for (int aa = 0; aa <= N; ++aa) D(bb, aa) += rb * hp[aa];
        }
    }
    D *= pre;
}

enum class PiMethod { Quadrature, Ladder };

struct PiOptions {
    PiMethod method = PiMethod::Quadrature;
    double envelope = 64.0;  // max |lambda| |v|^2 for the quadrature route
    int extra_nodes = 20;
};

// Reusable evaluator of truncated pi^lambda matrices; not thread-safe, one per worker.
class PiEvaluator {
public:
    explicit PiEvaluator(const FockSpace& s, PiOptions opt = {}) : s_(s), opt_(opt) {
        if (opt_.method == PiMethod::Quadrature) gh_ = gauss_hermite(2 * (s.N + 1) + opt_.extra_nodes);
        m_.resize(s.d);
    }

    // M = exp(i phase) pi at v-part with adapted coordinates (p, q) for |lambda| = nrm
    void eval(double nrm, const double* p, const double* q, double phase, CMat& M) {
        const int N = s_.N, d = s_.d;
        if (opt_.method == PiMethod::Quadrature) {
            double v2 = 0;
            for (int j = 0; j < d; ++j) v2 += p[j] * p[j] + q[j] * q[j];
            if (nrm * v2 > opt_.envelope)
                throw QuadratureOverflow("|lambda||x|^2 = " + std::to_string(nrm * v2) + " exceeds envelope");
        }
        const double sl = std::sqrt(nrm);
        for (int j = 0; j < d; ++j) {
            if (opt_.method == PiMethod::Ladder)
                displacement_1d(std::sqrt(0.5 * nrm) * cplx(-p[j], q[j]), N, m_[j]);
            else
                displacement_1d_quadrature(sl * p[j], sl * q[j], N, gh_, m_[j]);
        }
        const cplx ph = std::exp(I_ * phase);
        if (d == 1) {
            M = ph * m_[0];
            return;
        }
        M.resize(s_.dim, s_.dim);
        for (int b = 0; b < s_.dim; ++b) {
            const auto& bi = s_.index[b];
            for (int a = 0; a < s_.dim; ++a) {
                const auto& ai = s_.index[a];
                cplx v = ph;
                for (int j = 0; j < d; ++j) v *= m_[j](bi[j], ai[j]);
                M(b, a) = v;
            }
        }
    }

    void eval(const CentralFrequency& cf, const GroupPoint& x, CMat& M) {
        PQZ c = coords_pqz(cf, x);
        eval(cf.norm, c.p.data(), c.q.data(), cf.lambda.dot(x.z), M);
    }

    const FockSpace& space() const { return s_; }

private:
    const FockSpace& s_;
    PiOptions opt_;
    Rule gh_;
    std::vector<CMat> m_;
};

inline FockOperator pi_matrix(const CentralFrequency& cf, const GroupPoint& x, const FockSpace& s, PiOptions opt = {}) {
    PiEvaluator ev(s, opt);
    CMat M;
    ev.eval(cf, x, M);
    return M;
}

// Frobenius norm of the block restricted to ranks < n (ranks are graded, so this is |alpha| <= N-k)
inline double block_norm(const CMat& A, int n) { return A.topLeftCorner(n, n).norm(); }

// block |alpha| <= max_level, default N - 4
inline double homomorphism_residual(const HTypeStructure& g, const CentralFrequency& cf, const GroupPoint& x,
                                    const GroupPoint& y, const FockSpace& s, PiOptions opt = {},
                                    int max_level = -1) {
    CMat Mxy = pi_matrix(cf, group_mul(g, x, y), s, opt);
    CMat Mx = pi_matrix(cf, x, s, opt), My = pi_matrix(cf, y, s, opt);
    int k = max_level < 0 ? 4 : s.N - max_level;
    return block_norm(Mxy - Mx * My, s.interior(k));
}

inline FockOperator h_lambda(const CentralFrequency& cf, const FockSpace& s) {
    CMat H = CMat::Zero(s.dim, s.dim);
    for (int r = 0; r < s.dim; ++r) H(r, r) = cf.norm * (2.0 * s.level[r] + s.d);
    return H;
}

// a_j (annihilation) on the truncated space
inline CMat annihilation(const FockSpace& s, int j) {
    CMat A = CMat::Zero(s.dim, s.dim);
    for (int r = 0; r < s.dim; ++r) {
        auto a = s.index[r];
        if (a[j] == 0) continue;
        double c = std::sqrt(static_cast<double>(a[j]));
        a[j] -= 1;
        A(s.rank(a), r) = c;
    }
    return A;
}

inline CMat creation(const FockSpace& s, int j) { return annihilation(s, j).adjoint(); }

enum class LadderKind { Raise, Lower };

// pi(R_j) = sqrt(|lambda|/2) a_j, pi(Rbar_j) = -sqrt(|lambda|/2) a_j^+
inline FockOperator ladder(const FockSpace& s, int j, LadderKind kind, const CentralFrequency& cf) {
    double c = std::sqrt(0.5 * cf.norm);
    return kind == LadderKind::Lower ? CMat(c * annihilation(s, j)) : CMat(-c * creation(s, j));
}

inline CMat xi_matrix(const FockSpace& s, int j) {
    return (annihilation(s, j) + creation(s, j)) / std::sqrt(2.0);
}

inline CMat d_xi_matrix(const FockSpace& s, int j) {
    return (annihilation(s, j) - creation(s, j)) / std::sqrt(2.0);
}

enum class Generator { P, Q, Z };

inline FockOperator pi_of_generator(const CentralFrequency& cf, const FockSpace& s, Generator gen, int j) {
    double sl = std::sqrt(cf.norm);
    switch (gen) {
        case Generator::P:
            return sl * d_xi_matrix(s, j);
        case Generator::Q:
            return I_ * sl * xi_matrix(s, j);
        case Generator::Z:
            return I_ * cf.lambda(j) * CMat::Identity(s.dim, s.dim);
    }
    return {};
}

// d pi of a first-stratum vector V
inline FockOperator pi_of_vector(const CentralFrequency& cf, const FockSpace& s, const Vec& V) {
    CMat out = CMat::Zero(s.dim, s.dim);
    for (int j = 0; j < s.d; ++j) {
        out += cf.P_basis.col(j).dot(V) * pi_of_generator(cf, s, Generator::P, j);
        out += cf.Q_basis.col(j).dot(V) * pi_of_generator(cf, s, Generator::Q, j);
    }
    return out;
}

inline FockOperator spectral_projector(const FockSpace& s, int n) {
    if (n < 0 || n > s.N) throw DimensionError("level outside the Fock space");
    CMat P = CMat::Zero(s.dim, s.dim);
    for (int r = 0; r < s.dim; ++r)
        if (s.level[r] == n) P(r, r) = 1.0;
    return P;
}

}  // namespace htlab
