#pragma once

// Operator-valued Fourier transform F f(lambda) = int f(x) (pi^lambda_x)^* dx on a truncated Hermite model,
// its inversion f(x) = c0 int Tr(pi^lambda_x F f(lambda)) |lambda|^d dlambda, and level-diagonal multipliers.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "fock_repr.hpp"
#include "grid.hpp"
#include "quadrature.hpp"

namespace htlab {

inline double closed_form_c0(const HTypeStructure& g) { return std::pow(2 * std::numbers::pi, -(g.d + g.p)); }

// weights carry the |lambda|^d density; c0 is applied separately
struct LambdaGrid {
    int d = 1, p = 1;
    std::vector<Vec> lambda;
    std::vector<double> weight;
    double c0 = 0;
    double spacing = 0;  // > 0: uniform band rule, reconstruction periodic in z with period 2 pi / spacing
    double lambda_min = 0, lambda_max = 0;

    size_t size() const { return lambda.size(); }
};

namespace detail {
inline void push_node(LambdaGrid& G, const Vec& lam, double w) {
    G.lambda.push_back(lam);
    G.weight.push_back(w * std::pow(lam.norm(), G.d));
}

inline std::vector<Vec> sphere_directions(int p, int m) {
    std::vector<Vec> out;
    if (p == 2) {
        for (int k = 0; k < m; ++k) {
            double t = 2 * std::numbers::pi * (k + 0.5) / m;
            Vec u(2);
            u << std::cos(t), std::sin(t);
            out.push_back(u);
        }
        return out;
    }
    if (p == 3) {
        const double ga = std::numbers::pi * (3 - std::sqrt(5.0));
        for (int k = 0; k < m; ++k) {
            double y = 1 - 2 * (k + 0.5) / m, r = std::sqrt(1 - y * y);
            Vec u(3);
            u << r * std::cos(ga * k), y, r * std::sin(ga * k);
            out.push_back(u);
        }
        return out;
    }
    // p > 3: antipodal pairs from a fixed low-discrepancy sequence
    for (int k = 0; k < m / 2; ++k) {
        Vec u(p);
        for (int r = 0; r < p; ++r) {
            double a = std::fmod((k + 1) * std::sqrt(2.0 + 3 * r), 1.0);
            double b = std::fmod((k + 1) * std::sqrt(5.0 + 7 * r), 1.0);
            u(r) = std::sqrt(-2 * std::log(1 - a * 0.999999)) * std::cos(2 * std::numbers::pi * b);
        }
        u.normalize();
        out.push_back(u);
        out.push_back(-u);
    }
    return out;
}

inline double sphere_area(int p) { return 2 * std::pow(std::numbers::pi, 0.5 * p) / std::tgamma(0.5 * p); }
}  // namespace detail

// Gauss-Legendre on lambda_min <= |lambda| <= lambda_max. p = 1: `radial` nodes per sign;
// p > 1: radial rule times `directions` points on the sphere.
inline LambdaGrid shell_grid(const HTypeStructure& g, double lmin, double lmax, int radial, int directions = 0) {
    if (!(lmin > 0) || !(lmax > lmin) || radial < 1) throw DimensionError("shell needs 0 < lambda_min < lambda_max");
    LambdaGrid G;
    G.d = g.d;
    G.p = g.p;
    G.c0 = closed_form_c0(g);
    G.lambda_min = lmin;
    G.lambda_max = lmax;
    int segs = (radial + 15) / 16;
    Rule r = composite_legendre(segs, radial / segs, lmin, lmax);
    if (g.p == 1) {
        for (double s : {-1.0, 1.0})
            for (size_t i = 0; i < r.x.size(); ++i) detail::push_node(G, Vec::Constant(1, s * r.x[i]), r.w[i]);
        return G;
    }
    if (directions < 2) directions = 4 * g.p * g.p;
    auto dirs = detail::sphere_directions(g.p, directions);
    double dw = detail::sphere_area(g.p) / dirs.size();
    for (size_t i = 0; i < r.x.size(); ++i)
        for (const Vec& u : dirs) detail::push_node(G, r.x[i] * u, r.w[i] * std::pow(r.x[i], g.p - 1) * dw);
    return G;
}

// uniform nodes center + k*spacing within half_width (per component); exact for z-periodic data of period
// 2 pi / spacing whose spectrum lies in the band
inline LambdaGrid band_grid(const HTypeStructure& g, const Vec& center, double half_width, double spacing) {
    if (!(spacing > 0) || !(half_width > 0)) throw DimensionError("band needs positive width and spacing");
    if (center.size() != g.p) throw DimensionError("band center must have length p");
    LambdaGrid G;
    G.d = g.d;
    G.p = g.p;
    G.c0 = closed_form_c0(g);
    G.spacing = spacing;
    const int K = static_cast<int>(std::floor(half_width / spacing + 1e-9));
    std::vector<int> k(g.p, -K);
    double w = std::pow(spacing, g.p);
    double lo = 1e300, hi = 0;
    while (true) {
        Vec lam = center;
        for (int r = 0; r < g.p; ++r) lam(r) += k[r] * spacing;
        if (lam.norm() > 1e-12) {
            detail::push_node(G, lam, w);
            lo = std::min(lo, lam.norm());
            hi = std::max(hi, lam.norm());
        }
        int r = g.p - 1;
        while (r >= 0 && k[r] == K) k[r--] = -K;
        if (r < 0) break;
        ++k[r];
    }
    G.lambda_min = lo;
    G.lambda_max = hi;
    return G;
}

// The represented transform is ops[k] * (pi^{lambda_k}_origin)^*.
struct FourierFamily {
    LambdaGrid grid;
    FockSpace space;
    std::vector<CMat> ops;
    GroupPoint origin;
};

inline FourierFamily zero_family(const HTypeStructure& g, const LambdaGrid& grid, const FockSpace& space) {
    FourierFamily F{grid, space, std::vector<CMat>(grid.size(), CMat::Zero(space.dim, space.dim)), identity(g)};
    return F;
}

struct ForwardOptions {
    bool check_boundary = true;
    double boundary_tol = 1e-6;
    double shell_frac = 0.1;
};

inline void check_boundary(const GridField& f, const ForwardOptions& opt = {}) {
    double n = norm2(f);
    if (n == 0) return;
    double b = boundary_shell_mass(f, opt.shell_frac) / n;
    if (b > opt.boundary_tol)
        throw BoundaryMass("relative boundary-shell mass " + std::to_string(b) + " exceeds " +
                           std::to_string(opt.boundary_tol));
}

namespace detail {
using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// E(iz, k) = exp(sign i (lambda_k - carrier).y_z) * scale_k
inline CMat z_phase(const GridField& f, const LambdaGrid& grid, double sign, const std::vector<double>& scale) {
    const size_t nz = f.nz(), K = grid.size();
    CMat E(nz, K);
    std::vector<double> y(f.p);
    for (size_t iz = 0; iz < nz; ++iz) {
        f.z_coords(iz, y.data());
        for (size_t k = 0; k < K; ++k) {
            double ph = 0;
            for (int r = 0; r < f.p; ++r) ph += (grid.lambda[k](r) - f.carrier(r)) * y[r];
            E(iz, k) = std::polar(scale[k], sign * ph);
        }
    }
    return E;
}
}  // namespace detail

inline FourierFamily forward(const HTypeStructure& g, const GridField& f, const LambdaGrid& grid,
                             const FockSpace& space, const ForwardOptions& opt = {}) {
    if (f.d != g.d || f.p != g.p || space.d != g.d) throw DimensionError("field, group and Fock space disagree");
    if (opt.check_boundary) check_boundary(f, opt);
    FourierFamily F = zero_family(g, grid, space);
    F.origin = f.origin;
    const size_t nv = f.nv(), nz = f.nz(), K = grid.size();
    Eigen::Map<const detail::RowMat> W(f.values.data(), nv, nz);
    CMat G = W * detail::z_phase(f, grid, -1.0, std::vector<double>(K, f.cellvol_z()));
    const double cv = f.cellvol_v();
#pragma omp parallel
    {
        PiEvaluator ev(space, {PiMethod::Ladder});
        CMat M;
        std::vector<double> v(2 * g.d), pp(g.d), qq(g.d);
#pragma omp for schedule(dynamic)
        for (long long k = 0; k < static_cast<long long>(K); ++k) {
            auto cf = adapted_basis(g, grid.lambda[k]);
            const double cut = 1e-16 * G.col(k).cwiseAbs().maxCoeff();
            CMat acc = CMat::Zero(space.dim, space.dim);
            for (size_t iv = 0; iv < nv; ++iv) {
                cplx gv = G(iv, k);
                if (std::abs(gv) <= cut) continue;
                f.v_coords(iv, v.data());
                Eigen::Map<const Vec> vv(v.data(), 2 * g.d);
                for (int j = 0; j < g.d; ++j) {
                    pp[j] = -cf.P_basis.col(j).dot(vv);
                    qq[j] = -cf.Q_basis.col(j).dot(vv);
                }
                ev.eval(cf.norm, pp.data(), qq.data(), 0.0, M);
                acc.noalias() += gv * M;
            }
            F.ops[k] = acc * cv;
        }
    }
    return F;
}

inline FourierFamily forward(const HTypeStructure& g, const std::function<cplx(const GroupPoint&)>& f,
                             GridField geometry, const LambdaGrid& grid, const FockSpace& space,
                             const ForwardOptions& opt = {}) {
    sample(g, geometry, f);
    return forward(g, geometry, grid, space, opt);
}

// trace over |alpha| <= N - 2 of A * B
inline cplx interior_trace(const CMat& A, const CMat& B, int n2) {
    return (A.topRows(n2).cwiseProduct(B.leftCols(n2).transpose())).sum();
}

inline cplx inverse(const HTypeStructure& g, const FourierFamily& F, const GroupPoint& x) {
    GroupPoint y = group_mul(g, group_inv(F.origin), x);
    const int n2 = F.space.interior(2);
    PiEvaluator ev(F.space, {PiMethod::Ladder});
    CMat M;
    cplx s = 0;
    for (size_t k = 0; k < F.grid.size(); ++k) {
        ev.eval(adapted_basis(g, F.grid.lambda[k]), y, M);
        s += F.grid.weight[k] * interior_trace(M, F.ops[k], n2);
    }
    return F.grid.c0 * s;
}

// reconstruct on out's geometry (origin, carrier, box); values overwritten
inline void inverse_to_grid(const HTypeStructure& g, const FourierFamily& F, GridField& out) {
    if (out.d != g.d || out.p != g.p) throw DimensionError("output grid does not match the group");
    const size_t nv = out.nv(), nz = out.nz(), K = F.grid.size();
    const int n2 = F.space.interior(2);
    GroupPoint s = group_mul(g, group_inv(F.origin), out.origin);
    const bool central = s.v.norm() == 0;
    CMat T(nv, K);
#pragma omp parallel
    {
        PiEvaluator ev(F.space, {PiMethod::Ladder});
        CMat M, Fk;
        std::vector<double> v(2 * g.d), pp(g.d), qq(g.d);
#pragma omp for schedule(dynamic)
        for (long long k = 0; k < static_cast<long long>(K); ++k) {
            auto cf = adapted_basis(g, F.grid.lambda[k]);
            // pi_{s y} = pi_s pi_y and the trace is cyclic
            if (central) {
                Fk = F.ops[k] * std::exp(I_ * cf.lambda.dot(s.z));
            } else {
                ev.eval(cf, s, M);
                Fk = F.ops[k] * M;
            }
            for (size_t iv = 0; iv < nv; ++iv) {
                out.v_coords(iv, v.data());
                Eigen::Map<const Vec> vv(v.data(), 2 * g.d);
                for (int j = 0; j < g.d; ++j) {
                    pp[j] = cf.P_basis.col(j).dot(vv);
                    qq[j] = cf.Q_basis.col(j).dot(vv);
                }
                ev.eval(cf.norm, pp.data(), qq.data(), 0.0, M);
                T(iv, k) = interior_trace(M, Fk, n2);
            }
        }
    }
    std::vector<double> scale(K);
    for (size_t k = 0; k < K; ++k) scale[k] = F.grid.c0 * F.grid.weight[k];
    CMat E = detail::z_phase(out, F.grid, 1.0, scale).transpose();
    Eigen::Map<detail::RowMat> O(out.values.data(), nv, nz);
    O.noalias() = T * E;
    out.z_periodic = F.grid.spacing > 0;
}

inline double hs_sum(const FourierFamily& F) {
    double s = 0;
    for (size_t k = 0; k < F.ops.size(); ++k) s += F.grid.weight[k] * F.ops[k].squaredNorm();
    return s;
}

inline double plancherel_residual(const HTypeStructure& g, const GridField& f, const LambdaGrid& grid,
                                  const FockSpace& space, const ForwardOptions& opt = {}) {
    double n = norm2(f);
    if (n == 0) return 0;
    return std::abs(n - grid.c0 * hs_sum(forward(g, f, grid, space, opt))) / n;
}

// exp(-|v|^2/(2 sv^2) - z^2/(2 sz^2) + i kappa.z), sampled with carrier kappa on [-7.5 s, 7.5 s] per axis
inline GridField modulated_gaussian(const HTypeStructure& g, double sv, double sz, const Vec& kappa, int nv_axis,
                                    int nz_axis) {
    std::vector<double> half(g.dim());
    std::vector<int> n(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
        bool z = a >= g.dim_v();
        half[a] = 7.5 * (z ? sz : sv);
        n[a] = z ? nz_axis : nv_axis;
    }
    GridField f = centered_field(g, identity(g), kappa, half, n);
    for (size_t i = 0; i < f.size(); ++i) {
        GroupPoint y = f.local_point(i);
        f.values[i] = std::exp(-0.5 * y.v.squaredNorm() / (sv * sv) - 0.5 * y.z.squaredNorm() / (sz * sz));
    }
    return f;
}

// modulated Gaussians whose central spectrum sits well inside the grid's shell; nz_axis is a floor
inline std::vector<GridField> reference_gaussians(const HTypeStructure& g, const LambdaGrid& grid,
                                                  double width_scale = 1.0, int nv_axis = 64, int nz_axis = 96) {
    const double lo = grid.lambda_min, hi = grid.lambda_max, mid = 0.5 * (lo + hi);
    std::vector<GridField> out;
    for (double t : {-0.15, 0.0, 0.15}) {
        double kappa = mid + t * (hi - lo);
        // spectrum in z has std 1/(sqrt2 sz) for |f|^2; keep 8 of them from the shell edges
        double gap = std::min(kappa - lo, hi - kappa);
        double sz = 8 / (std::sqrt(2.0) * gap) * width_scale;
        double sv = std::sqrt(2 / kappa) * width_scale;
        Vec k = Vec::Zero(g.p);
        k(0) = kappa;
        // z aliases of every node lambda - kappa must clear the spectrum (|omega| < 6/sz)
        double hz = 2 * std::numbers::pi / (hi + kappa + 6 / sz);
        int nz = std::max(nz_axis, static_cast<int>(std::ceil(15 * sz / hz)) + 1);
        out.push_back(modulated_gaussian(g, sv, sz, k, nv_axis, nz));
    }
    return out;
}

// least-squares constant for ||f||^2 = c * sum w ||F f||_HS^2 over the references
inline double calibrate_c0(const HTypeStructure& g, const FockSpace& space, const LambdaGrid& grid,
                           const std::vector<GridField>& refs, double tol = 0.01) {
    double num = 0, den = 0;
    for (const auto& f : refs) {
        double n = norm2(f), s = hs_sum(forward(g, f, grid, space));
        num += n * s;
        den += s * s;
    }
    if (!(den > 0)) throw CalibrationDivergence("reference family has no spectral mass on the grid");
    double c = num / den, c_closed = closed_form_c0(g);
    if (std::abs(c / c_closed - 1) > tol)
        throw CalibrationDivergence("calibrated c0 " + std::to_string(c) + " vs closed form " +
                                    std::to_string(c_closed));
    return c;
}

inline double calibrate_c0(const HTypeStructure& g, const FockSpace& space, const LambdaGrid& grid) {
    return calibrate_c0(g, space, grid, reference_gaussians(g, grid));
}

// |lambda|^d (2 pi)^-d int (pi_v Phi, Psi) conj((pi_v Phi2, Psi2)) dv by the trapezoid rule on [-L, L]^{2d};
// the Moyal identity makes this (Phi, Phi2) conj((Psi, Psi2)).
inline cplx moyal_integral(const HTypeStructure& g, const CentralFrequency& cf, const FockSpace& s, const CVec& Phi,
                           const CVec& Phi2, const CVec& Psi, const CVec& Psi2, double L, int n) {
    const int A = g.dim_v();
    const double h = 2 * L / (n - 1);
    long long total = 1;
    for (int a = 0; a < A; ++a) total *= n;
    PiEvaluator ev(s, {PiMethod::Ladder});
    CMat M;
    cplx acc = 0;
    GroupPoint x = identity(g);
    for (long long i = 0; i < total; ++i) {
        long long r = i;
        for (int a = A - 1; a >= 0; --a) {
            x.v(a) = -L + (r % n) * h;
            r /= n;
        }
        ev.eval(cf, x, M);
        acc += Psi.dot(M * Phi) * std::conj(Psi2.dot(M * Phi2));
    }
    return acc * std::pow(h, A) * std::pow(cf.norm / (2 * std::numbers::pi), g.d);
}

using Multiplier = std::function<cplx(const Vec& lambda, int level)>;

inline FourierFamily apply_multiplier(const FourierFamily& F, const Multiplier& m) {
    FourierFamily out = F;
    for (size_t k = 0; k < F.ops.size(); ++k) {
        std::vector<cplx> byl(F.space.N + 1);
        for (int n = 0; n <= F.space.N; ++n) byl[n] = m(F.grid.lambda[k], n);
        for (int r = 0; r < F.space.dim; ++r) out.ops[k].row(r) *= byl[F.space.level[r]];
    }
    return out;
}

// left multiplication by an arbitrary per-node operator
inline FourierFamily apply_operator(const HTypeStructure& g, const FourierFamily& F,
                                    const std::function<CMat(const CentralFrequency&)>& A) {
    FourierFamily out = F;
    for (size_t k = 0; k < F.ops.size(); ++k) out.ops[k] = A(adapted_basis(g, F.grid.lambda[k])) * F.ops[k];
    return out;
}

}  // namespace htlab
