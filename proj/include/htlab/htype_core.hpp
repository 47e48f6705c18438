#pragma once

// H-type groups in exponential coordinates x = (v, z), v in R^{2d}, z in R^p.
// Group law: (v, z)(v', z') = (v + v', z_r + z'_r + <v, P_r v'>/2).

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace htlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct HTypeStructure {
    int d = 1;
    int p = 1;
    std::vector<Mat> P;
    double scale_v = std::sqrt(2.0 * std::numbers::pi);
    double scale_z = std::numbers::pi;

    int dim_v() const { return 2 * d; }
    int dim() const { return 2 * d + p; }
    int homogeneous_dim() const { return 2 * d + 2 * p; }
};

// fixed capacity keeps group arithmetic off the heap
inline constexpr int kMaxAxis = 16;
using PointVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAxis, 1>;

struct GroupPoint {
    PointVec v;
    PointVec z;
};

inline HTypeStructure validate_structure(int d, int p, std::vector<Mat> P,
                                         double scale_v = std::sqrt(2.0 * std::numbers::pi),
                                         double scale_z = std::numbers::pi, double tol = 1e-12) {
    if (d < 1 || p < 1) throw StructureError("d and p must be positive");
    if (2 * d > kMaxAxis || p > kMaxAxis) throw StructureError("at most " + std::to_string(kMaxAxis) + " axes per layer");
    if (static_cast<int>(P.size()) != p) throw StructureError("expected p prototype matrices");
    if (!(scale_v > 0) || !(scale_z > 0)) throw StructureError("lattice scales must be positive");
    const int n = 2 * d;
    Mat I = Mat::Identity(n, n);
    for (int r = 0; r < p; ++r) {
        if (P[r].rows() != n || P[r].cols() != n) throw StructureError("prototype matrix is not 2d x 2d");
        if (!P[r].allFinite()) throw StructureError("prototype matrix has non-finite entries");
        if ((P[r].transpose() * P[r] - I).cwiseAbs().maxCoeff() > tol)
            throw StructureError("orthogonality P^T P = I violated for matrix " + std::to_string(r));
        if ((P[r].transpose() + P[r]).cwiseAbs().maxCoeff() > tol)
            throw StructureError("skew-symmetry P^T = -P violated for matrix " + std::to_string(r));
    }
    for (int r = 0; r < p; ++r)
        for (int s = r + 1; s < p; ++s)
            if ((P[r] * P[s] + P[s] * P[r]).cwiseAbs().maxCoeff() > tol)
                throw StructureError("anticommutation P_r P_s + P_s P_r = 0 violated for pair " +
                                     std::to_string(r) + "," + std::to_string(s));
    Mat flat(n * n, p);
    for (int r = 0; r < p; ++r) flat.col(r) = Eigen::Map<const Vec>(P[r].data(), n * n);
    Eigen::JacobiSVD<Mat> svd(flat);
    if (svd.singularValues().minCoeff() < 1e-8) throw StructureError("prototype matrices are linearly dependent");
    HTypeStructure g;
    g.d = d;
    g.p = p;
    g.P = std::move(P);
    g.scale_v = scale_v;
    g.scale_z = scale_z;
    return g;
}

// P = [[0, I], [-I, 0]] on R^{2d} = (x_1..x_d, y_1..y_d)
inline HTypeStructure heisenberg(int d = 1) {
    Mat P = Mat::Zero(2 * d, 2 * d);
    P.topRightCorner(d, d) = Mat::Identity(d, d);
    P.bottomLeftCorner(d, d) = -Mat::Identity(d, d);
    return validate_structure(d, 1, {P});
}

inline GroupPoint identity(const HTypeStructure& g) { return {Vec::Zero(g.dim_v()), Vec::Zero(g.p)}; }

inline GroupPoint make_point(const HTypeStructure& g, const std::vector<double>& coords) {
    if (static_cast<int>(coords.size()) != g.dim()) throw DimensionError("point needs 2d+p coordinates");
    GroupPoint a = identity(g);
    for (int i = 0; i < g.dim_v(); ++i) a.v(i) = coords[i];
    for (int k = 0; k < g.p; ++k) a.z(k) = coords[g.dim_v() + k];
    return a;
}

inline std::vector<double> coords(const GroupPoint& a) {
    std::vector<double> c(a.v.data(), a.v.data() + a.v.size());
    c.insert(c.end(), a.z.data(), a.z.data() + a.z.size());
    return c;
}

inline void check_dims(const HTypeStructure& g, const GroupPoint& a) {
    if (a.v.size() != g.dim_v() || a.z.size() != g.p) throw DimensionError("group point dimension mismatch");
}

// z-part of the product beyond z + z'
template <class A, class B>
inline PointVec twist(const HTypeStructure& g, const Eigen::MatrixBase<A>& v, const Eigen::MatrixBase<B>& w) {
    PointVec t(g.p);
    const int n = g.dim_v();
    for (int r = 0; r < g.p; ++r) {
        double s = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += v(i) * g.P[r](i, j) * w(j);
        t(r) = 0.5 * s;
    }
    return t;
}

inline GroupPoint group_mul(const HTypeStructure& g, const GroupPoint& a, const GroupPoint& b) {
    check_dims(g, a);
    check_dims(g, b);
    return {a.v + b.v, a.z + b.z + twist(g, a.v, b.v)};
}

inline GroupPoint group_inv(const GroupPoint& a) { return {-a.v, -a.z}; }

inline GroupPoint dilate(double t, const GroupPoint& a) { return {t * a.v, t * t * a.z}; }

inline double quasi_norm(const GroupPoint& a) {
    double s = a.v.array().pow(4).sum() + a.z.squaredNorm();
    return std::pow(s, 0.25);
}

struct CentralFrequency {
    Vec lambda;
    double norm = 0;
    Vec unit;
    Mat J;        // defined by <J U, V> = lambda([U, V])
    Mat P_basis;  // 2d x d
    Mat Q_basis;  // 2d x d, Q_j = J P_j / |lambda|
    int d = 1;
    int p = 1;
};

// [U, V]_r = <U, P_r V>, so <J U, V> = sum_r lambda_r <U, P_r V> gives J = sum_r lambda_r P_r^T.
inline CentralFrequency adapted_basis(const HTypeStructure& g, const Vec& lambda, double threshold = 1e-8) {
    if (lambda.size() != g.p) throw DimensionError("lambda must have p entries");
    double nrm = lambda.norm();
    if (!(nrm > 0) || !std::isfinite(nrm)) throw DegenerateBasis("lambda must be nonzero and finite");
    const int n = g.dim_v();
    CentralFrequency cf;
    cf.lambda = lambda;
    cf.norm = nrm;
    cf.unit = lambda / nrm;
    cf.d = g.d;
    cf.p = g.p;
    cf.J = Mat::Zero(n, n);
    for (int r = 0; r < g.p; ++r) cf.J += lambda(r) * g.P[r].transpose();
    Mat Jh = cf.J / nrm;
    cf.P_basis = Mat::Zero(n, g.d);
    cf.Q_basis = Mat::Zero(n, g.d);
    std::vector<Vec> span;
    int next = 0;
    for (int j = 0; j < g.d; ++j) {
        bool found = false;
        for (; next < n && !found; ++next) {
            Vec e = Vec::Unit(n, next);
            Vec r = e;
            for (const Vec& b : span) r -= b.dot(e) * b;
            if (r.norm() > threshold) {
                for (const Vec& b : span) r -= b.dot(r) * b;  // second pass for stability
                r.normalize();
                Vec q = Jh * r;
                cf.P_basis.col(j) = r;
                cf.Q_basis.col(j) = q;
                span.push_back(r);
                span.push_back(q);
                found = true;
            }
        }
        if (!found) throw DegenerateBasis("Gram-Schmidt threshold never met");
    }
    return cf;
}

struct PQZ {
    Vec p, q, z;
};

inline PQZ coords_pqz(const CentralFrequency& cf, const GroupPoint& a) {
    return {cf.P_basis.transpose() * a.v, cf.Q_basis.transpose() * a.v, a.z};
}

inline GroupPoint from_pqz(const CentralFrequency& cf, const PQZ& c) {
    return {cf.P_basis * c.p + cf.Q_basis * c.q, c.z};
}

// Exp(s (n + d/2) Z^(lambda)) x; central, so left and right translation agree
inline GroupPoint flow_phi(const HTypeStructure& g, int n, double s, const GroupPoint& x, const Vec& lambda) {
    check_dims(g, x);
    double nrm = lambda.norm();
    if (!(nrm > 0)) throw DegenerateBasis("lambda must be nonzero");
    return {x.v, x.z + s * (n + 0.5 * g.d) * lambda / nrm};
}

// Exp(s omega.V) x  (left translation)
inline GroupPoint horizontal_flow_left(const HTypeStructure& g, double s, const Vec& omega, const GroupPoint& x) {
    GroupPoint e{s * omega, Vec::Zero(g.p)};
    return group_mul(g, e, x);
}

// x Exp(s omega.V)  (right translation)
inline GroupPoint horizontal_flow_right(const HTypeStructure& g, double s, const Vec& omega, const GroupPoint& x) {
    GroupPoint e{s * omega, Vec::Zero(g.p)};
    return group_mul(g, x, e);
}

struct LatticeReduction {
    GroupPoint rep;
    GroupPoint gamma;
};

namespace detail {
inline double floor_div(double a, double s, double& rem) {
    double k = std::floor(a / s);
    rem = a - k * s;
    if (rem >= s) {
        rem -= s;
        k += 1;
    }
    if (rem < 0) {
        rem += s;
        k -= 1;
    }
    if (rem >= s) rem = 0;  // a/s rounded just below an integer
    return k;
}
}  // namespace detail

// gamma^{-1} x = (w - w_g, s - s_g - <w_g, P w>/2); representative in [0, scale_v)^{2d} x [0, scale_z)^p
inline LatticeReduction lattice_reduce(const HTypeStructure& g, const GroupPoint& x) {
    check_dims(g, x);
    LatticeReduction out;
    out.gamma = identity(g);
    out.rep = identity(g);
    for (int i = 0; i < g.dim_v(); ++i) {
        double rem;
        double k = detail::floor_div(x.v(i), g.scale_v, rem);
        out.gamma.v(i) = k * g.scale_v;
        out.rep.v(i) = rem;
    }
    Vec t = twist(g, out.gamma.v, x.v);
    for (int r = 0; r < g.p; ++r) {
        double rem;
        double k = detail::floor_div(x.z(r) - t(r), g.scale_z, rem);
        out.gamma.z(r) = k * g.scale_z;
        out.rep.z(r) = rem;
    }
    return out;
}

inline std::string to_string(const GroupPoint& a) {
    std::ostringstream os;
    os << "(";
    auto c = coords(a);
    for (size_t i = 0; i < c.size(); ++i) os << (i ? ", " : "") << c[i];
    os << ")";
    return os.str();
}

}  // namespace htlab
