#pragma once

// Semiclassical quantization Op_eps(sigma) f(x) = int kappa^eps_x(y^-1 x) f(y) dy, kappa^eps_x = eps^-Q kappa_x o delta_1/eps.
// Symbols are carried by their kernels kappa_x(w); sigma(x, lambda) = F kappa_x(lambda) is derived on demand.
//
// With y^-1 x = delta_eps(u) the operator reads int kappa_x(u) f(x delta_eps(u)^-1) du; the residual harnesses
// use this form with a fixed u-rule, so quadrature error enters every eps alike and slopes measure the calculus.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "fock_repr.hpp"
#include "grid.hpp"
#include "quadrature.hpp"

namespace htlab {

using PointFn = std::function<cplx(const GroupPoint&)>;
using KernelFn = std::function<cplx(const GroupPoint& x, const GroupPoint& w)>;

struct Symbol {
    KernelFn kernel;
    double support_radius = 1;  // kappa_x(w) = 0 once quasi_norm(w) > radius (effective radius for Schwartz kernels)
    std::vector<double> x_lo, x_hi;  // x-support box in coordinates; empty = unbounded
    // separable form kappa_x(w) = x_factor(x) w_factor(w); both set or both empty
    PointFn x_factor, w_factor;

    cplx operator()(const GroupPoint& x, const GroupPoint& w) const { return kernel(x, w); }
    bool separable() const { return x_factor && w_factor; }
    bool in_x_support(const GroupPoint& x) const {
        if (x_lo.empty()) return true;
        auto c = coords(x);
        for (size_t a = 0; a < c.size(); ++a)
            if (c[a] < x_lo[a] || c[a] > x_hi[a]) return false;
        return true;
    }
};

inline Symbol separable_symbol(PointFn phi, PointFn k, double radius, std::vector<double> x_lo = {},
                               std::vector<double> x_hi = {}) {
    Symbol s;
    s.x_factor = phi;
    s.w_factor = k;
    s.kernel = [phi, k](const GroupPoint& x, const GroupPoint& w) { return phi(x) * k(w); };
    s.support_radius = radius;
    s.x_lo = std::move(x_lo);
    s.x_hi = std::move(x_hi);
    return s;
}

// smooth, compactly supported on [0, 1)
inline double bump(double t) { return t < 1 && t >= 0 ? std::exp(-t / (1 - t)) : (t < 0 ? 1.0 : 0.0); }

// b(|w_v|^2/R^2 + |w_z|^2/R^4) exp(i(omega.w_v + zeta.w_z)); vanishes for quasi_norm(w) >= R
inline PointFn bump_kernel(double R, Vec omega, Vec zeta) {
    return [R, omega, zeta](const GroupPoint& w) {
        double t = w.v.squaredNorm() / (R * R) + w.z.squaredNorm() / (R * R * R * R);
        if (t >= 1) return cplx(0);
        return bump(t) * std::exp(I_ * (omega.dot(w.v) + zeta.dot(w.z)));
    };
}

// exp(-|w_v|^2/(2 s^2) - |w_z|^2/(2 s^4)) exp(i(omega.w_v + zeta.w_z)); effective radius 7 s
inline PointFn gaussian_kernel(double s, Vec omega, Vec zeta) {
    return [s, omega, zeta](const GroupPoint& w) {
        double e = -0.5 * w.v.squaredNorm() / (s * s) - 0.5 * w.z.squaredNorm() / (s * s * s * s);
        return std::exp(e) * std::exp(I_ * (omega.dot(w.v) + zeta.dot(w.z)));
    };
}

// kernel of sigma^*: conj(kappa_x(w^-1))
inline Symbol adjoint_symbol(const Symbol& s) {
    Symbol a = s;
    KernelFn k = s.kernel;
    a.kernel = [k](const GroupPoint& x, const GroupPoint& w) { return std::conj(k(x, group_inv(w))); };
    if (s.separable()) {
        PointFn phi = s.x_factor, kw = s.w_factor;
        a.x_factor = [phi](const GroupPoint& x) { return std::conj(phi(x)); };
        a.w_factor = [kw](const GroupPoint& w) { return std::conj(kw(group_inv(w))); };
    }
    return a;
}

// ---------- quadrature rules on G ----------

struct PointRule {
    std::vector<GroupPoint> x;
    std::vector<double> w;
    size_t size() const { return x.size(); }
};

// tensor Gauss-Legendre on a coordinate box
inline PointRule box_rule(const HTypeStructure& g, const std::vector<double>& lo, const std::vector<double>& hi,
                          const std::vector<int>& n) {
    const int A = g.dim();
    std::vector<Rule> r(A);
    for (int a = 0; a < A; ++a) r[a] = gauss_legendre(n[a], lo[a], hi[a]);
    PointRule out;
    std::vector<int> idx(A, 0);
    while (true) {
        GroupPoint x = identity(g);
        double w = 1;
        for (int a = 0; a < A; ++a) {
            double c = r[a].x[idx[a]];
            if (a < g.dim_v())
                x.v(a) = c;
            else
                x.z(a - g.dim_v()) = c;
            w *= r[a].w[idx[a]];
        }
        out.x.push_back(x);
        out.w.push_back(w);
        int a = A - 1;
        while (a >= 0 && idx[a] == n[a] - 1) idx[a--] = 0;
        if (a < 0) break;
        ++idx[a];
    }
    return out;
}

// rule on the box containing {quasi_norm(u) <= R}
inline PointRule kernel_rule(const HTypeStructure& g, double R, int n_v, int n_z) {
    std::vector<double> lo, hi;
    std::vector<int> n;
    for (int a = 0; a < g.dim(); ++a) {
        double h = a < g.dim_v() ? R : R * R;
        lo.push_back(-h);
        hi.push_back(h);
        n.push_back(a < g.dim_v() ? n_v : n_z);
    }
    return box_rule(g, lo, hi, n);
}

// d = 1: polar in u_v (radial composite Gauss-Legendre, periodic trapezoid in angle) times Gauss-Legendre in u_z;
// resolves the far tails of Schwartz kernels
inline PointRule polar_rule(const HTypeStructure& g, double r_max, double r_seg, int order, int n_theta,
                            double z_half, int n_z) {
    if (g.d != 1) throw DimensionError("polar rule is implemented for d = 1");
    int segs = std::max(1, static_cast<int>(std::ceil(r_max / r_seg)));
    Rule rr = composite_legendre(segs, order, 0, r_max);
    std::vector<double> zlo(g.p, -z_half), zhi(g.p, z_half);
    Rule rz = gauss_legendre(n_z, -z_half, z_half);
    PointRule out;
    const double dt = 2 * std::numbers::pi / n_theta;
    std::vector<int> zi(g.p, 0);
    for (size_t i = 0; i < rr.x.size(); ++i)
        for (int t = 0; t < n_theta; ++t) {
            double r = rr.x[i], th = t * dt;
            std::fill(zi.begin(), zi.end(), 0);
            while (true) {
                GroupPoint u = identity(g);
                u.v << r * std::cos(th), r * std::sin(th);
                double w = rr.w[i] * r * dt;
                for (int k = 0; k < g.p; ++k) {
                    u.z(k) = rz.x[zi[k]];
                    w *= rz.w[zi[k]];
                }
                out.x.push_back(u);
                out.w.push_back(w);
                int k = g.p - 1;
                while (k >= 0 && zi[k] == n_z - 1) zi[k--] = 0;
                if (k < 0) break;
                ++zi[k];
            }
        }
    return out;
}

// ---------- grid application ----------

inline int dilation_weight(const HTypeStructure& g) { return g.homogeneous_dim(); }

// Direct discrete convolution out(x) = sum_y kappa^eps_x(y^-1 x) f(y) cellvol. Periodized fields sum over the
// lattice translates gamma y of each fundamental-domain sample.
inline GridField op_eps_apply(const HTypeStructure& g, const Symbol& sigma, double eps, const GridField& f) {
    const double R = sigma.support_radius, Rv = eps * R, Rz = eps * eps * R * R;
    for (int a = 0; a < g.dim_v(); ++a)
        if (Rv < 2 * f.h[a])
            throw InsufficientResolution("eps-scaled kernel spans fewer than two cells on axis " + std::to_string(a));
    const double scale = std::pow(eps, -g.homogeneous_dim()) * f.cellvol();
    GridField out = same_geometry(f);
    const long long total = static_cast<long long>(f.size());
    const size_t nz = f.nz();
    const int dv = g.dim_v();

    if (f.periodized) {
        // lattice translates: v in {-1,0,1}^{2d} scale_v, z in {-2..2} scale_z (the twist shifts by up to pi)
        std::vector<GroupPoint> gam;
        std::vector<int> k(g.dim(), 0);
        for (int a = 0; a < g.dim(); ++a) k[a] = a < dv ? -1 : -2;
        while (true) {
            GroupPoint c = identity(g);
            for (int a = 0; a < g.dim(); ++a) {
                if (a < dv)
                    c.v(a) = k[a] * g.scale_v;
                else
                    c.z(a - dv) = k[a] * g.scale_z;
            }
            gam.push_back(c);
            int a = g.dim() - 1;
            while (a >= 0 && k[a] == (a < dv ? 1 : 2)) {
                k[a] = a < dv ? -1 : -2;
                --a;
            }
            if (a < 0) break;
            ++k[a];
        }
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < total; ++i) {
            GroupPoint x = f.local_point(i);
            GroupPoint xp = group_mul(g, f.origin, x);
            cplx acc = 0;
            for (size_t j = 0; j < f.values.size(); ++j) {
                if (f.values[j] == cplx(0)) continue;
                GroupPoint y = f.local_point(j);
                for (const auto& c : gam) {
                    GroupPoint gy = group_mul(g, c, y);
                    GroupPoint w = group_mul(g, group_inv(gy), x);
                    if ((w.v.cwiseAbs().array() > Rv).any() || (w.z.cwiseAbs().array() > Rz).any()) continue;
                    acc += sigma(xp, dilate(1 / eps, w)) * f.values[j] * std::exp(I_ * f.carrier.dot(y.z - x.z));
                }
            }
            out.values[i] = acc * scale;
        }
        return out;
    }

    bool overflow = false;
#pragma omp parallel for schedule(dynamic) reduction(|| : overflow)
    for (long long i = 0; i < total; ++i) {
        GroupPoint x = f.local_point(i);
        GroupPoint xp = group_mul(g, f.origin, x);
        // v-index window
        std::vector<int> lo(dv), hi(dv);
        bool clipped = false;
        for (int a = 0; a < dv; ++a) {
            double l = (x.v(a) - Rv - f.lo[a]) / f.h[a], h = (x.v(a) + Rv - f.lo[a]) / f.h[a];
            lo[a] = static_cast<int>(std::ceil(l - 1e-12));
            hi[a] = static_cast<int>(std::floor(h + 1e-12));
            if (lo[a] < 0 || hi[a] > f.n[a] - 1) clipped = true;
            lo[a] = std::max(lo[a], 0);
            hi[a] = std::min(hi[a], f.n[a] - 1);
        }
        cplx acc = 0;
        std::vector<int> iv(lo);
        GroupPoint y = identity(g);
        bool empty = false;
        for (int a = 0; a < dv; ++a) empty |= lo[a] > hi[a];
        while (!empty) {
            size_t flat_v = 0;
            for (int a = 0; a < dv; ++a) {
                y.v(a) = f.lo[a] + iv[a] * f.h[a];
                flat_v = flat_v * f.n[a] + iv[a];
            }
            // y^-1 x has z-part x_z - y_z - <y_v, P x_v>/2
            Vec zc = x.z - twist(g, y.v, x.v);
            std::vector<int> zlo(g.p), zhi(g.p);
            bool zempty = false;
            for (int r = 0; r < g.p; ++r) {
                int a = dv + r;
                double l = (zc(r) - Rz - f.lo[a]) / f.h[a], h = (zc(r) + Rz - f.lo[a]) / f.h[a];
                zlo[r] = static_cast<int>(std::ceil(l - 1e-12));
                zhi[r] = static_cast<int>(std::floor(h + 1e-12));
                if (zlo[r] < 0 || zhi[r] > f.n[a] - 1) clipped = true;
                zlo[r] = std::max(zlo[r], 0);
                zhi[r] = std::min(zhi[r], f.n[a] - 1);
                zempty |= zlo[r] > zhi[r];
            }
            std::vector<int> iz(zlo);
            while (!zempty) {
                size_t flat_z = 0;
                for (int r = 0; r < g.p; ++r) {
                    y.z(r) = f.lo[dv + r] + iz[r] * f.h[dv + r];
                    flat_z = flat_z * f.n[dv + r] + iz[r];
                }
                const cplx fy = f.values[flat_v * nz + flat_z];
                if (fy != cplx(0)) {
                    GroupPoint w = group_mul(g, group_inv(y), x);
                    acc += sigma(xp, dilate(1 / eps, w)) * fy * std::exp(I_ * f.carrier.dot(y.z - x.z));
                }
                int r = g.p - 1;
                while (r >= 0 && iz[r] == zhi[r]) iz[r] = zlo[r], --r;
                if (r < 0) break;
                ++iz[r];
            }
            int a = dv - 1;
            while (a >= 0 && iv[a] == hi[a]) iv[a] = lo[a], --a;
            if (a < 0) break;
            ++iv[a];
        }
        if (clipped && sigma.in_x_support(xp)) overflow = true;
        out.values[i] = acc * scale;
    }
    if (overflow) throw SupportOverflow("eps-scaled kernel support leaves the grid inside the symbol's x-support");
    return out;
}

// sigma(x, lambda) = int kappa_x(w) (pi^lambda_w)^* dw
inline FockOperator symbol_at(const HTypeStructure& g, const Symbol& sigma, const GroupPoint& x,
                              const CentralFrequency& cf, const FockSpace& s, int n_v = 24, int n_z = 24) {
    PointRule r = kernel_rule(g, sigma.support_radius, n_v, n_z);
    PiEvaluator ev(s, {PiMethod::Ladder});
    CMat M, acc = CMat::Zero(s.dim, s.dim);
    for (size_t i = 0; i < r.size(); ++i) {
        cplx k = sigma(x, r.x[i]);
        if (k == cplx(0)) continue;
        ev.eval(cf, group_inv(r.x[i]), M);
        acc.noalias() += (r.w[i] * k) * M;
    }
    return acc;
}

struct DifferenceOps {
    std::vector<CMat> dp, dq;  // Delta_{p_j}, Delta_{q_j}
};

// Delta_p = |lambda|^-1/2 [xi_j, .], Delta_q = |lambda|^-1/2 [i d/dxi_j, .];
// on symbols they multiply the kernel by the adapted coordinates p_j(w), q_j(w).
inline DifferenceOps difference_ops(const FockOperator& A, const CentralFrequency& cf, const FockSpace& s) {
    DifferenceOps out;
    const double c = 1 / std::sqrt(cf.norm);
    for (int j = 0; j < s.d; ++j) {
        CMat X = xi_matrix(s, j), D = I_ * d_xi_matrix(s, j);
        out.dp.push_back(c * (X * A - A * X));
        out.dq.push_back(c * (D * A - A * D));
    }
    return out;
}

// ---------- residual harnesses ----------

struct TestField {
    std::function<cplx(const GroupPoint&, double eps)> f;
    double norm2 = 1;
};

// Gaussian exp(-|x - c|^2/(2 w^2)) in coordinates, alone and times exp(i x_j / eps) for the first two v-axes
inline std::vector<TestField> standard_test_fields(const HTypeStructure& g, const GroupPoint& c, double w) {
    double n2 = std::pow(std::numbers::pi * w * w, 0.5 * g.dim());
    auto gauss = [c, w](const GroupPoint& x) {
        return std::exp(-0.5 * ((x.v - c.v).squaredNorm() + (x.z - c.z).squaredNorm()) / (w * w));
    };
    std::vector<TestField> out;
    out.push_back({[gauss](const GroupPoint& x, double) { return cplx(gauss(x)); }, n2});
    for (int j = 0; j < std::min(2, g.dim_v()); ++j)
        out.push_back({[gauss, j](const GroupPoint& x, double eps) { return gauss(x) * std::exp(I_ * x.v(j) / eps); },
                       n2});
    return out;
}

struct ResidualRow {
    double eps = 0, residual = 0, slope = 0;  // slope of log residual vs log eps over rows so far
};

// least-squares slope of log r against log eps; zero residuals are clipped to 1e-300
inline double loglog_slope(const std::vector<double>& eps, const std::vector<double>& r) {
    const size_t n = eps.size();
    if (n < 2) return 0;
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += std::log(eps[i]);
        my += std::log(std::max(r[i], 1e-300));
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = std::log(eps[i]) - mx;
        sxy += dx * (std::log(std::max(r[i], 1e-300)) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

inline std::vector<ResidualRow> with_slopes(const std::vector<double>& eps, const std::vector<double>& r) {
    std::vector<ResidualRow> out;
    for (size_t i = 0; i < eps.size(); ++i) {
        std::vector<double> e(eps.begin(), eps.begin() + i + 1), rr(r.begin(), r.begin() + i + 1);
        out.push_back({eps[i], r[i], loglog_slope(e, rr)});
    }
    return out;
}

namespace detail {
// d/dt kappa_{x Exp(t e_k)}(u) at t = 0, fourth-order central differences
inline cplx x_derivative(const HTypeStructure& g, const KernelFn& k, const GroupPoint& x, const GroupPoint& u, int axis) {
    const double h = 1e-3;
    auto at = [&](double t) {
        GroupPoint e = identity(g);
        e.v(axis) = t;
        return k(group_mul(g, x, e), u);
    };
    return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12 * h);
}

inline void check_eps_list(const std::vector<double>& eps) {
    if (eps.size() < 3) throw DimensionError("residual harness needs at least three eps values");
}

// sup over fields of ||R f|| / ||f||, R f sampled on the x-rule
template <class Apply>
double worst_ratio(const PointRule& xr, const std::vector<TestField>& fields, double eps, Apply apply) {
    double worst = 0;
    std::vector<double> val(xr.size());
    for (const auto& tf : fields) {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(xr.size()); ++i) val[i] = std::norm(apply(xr.x[i], tf, eps));
        double s = 0;
        for (size_t i = 0; i < xr.size(); ++i) s += xr.w[i] * val[i];
        worst = std::max(worst, std::sqrt(s / tf.norm2));
    }
    return worst;
}
}  // namespace detail

// Refinement check: the smallest eps is recomputed on finer rules (+4 nodes per axis for the adjoint, +2 for the
// six-fold composition integral) and must agree within resolution_tol.
struct HarnessOptions {
    int n_u = 10;  // kernel rule nodes per axis
    int n_x = 10;  // x-rule nodes per axis
    bool resolution_check = true;
    double resolution_tol = 0.25;
};

inline PointRule x_rule(const HTypeStructure& g, const Symbol& s, int n) {
    if (s.x_lo.empty()) throw DimensionError("residual harness needs a bounded x-support box");
    return box_rule(g, s.x_lo, s.x_hi, std::vector<int>(g.dim(), n));
}

// [Op(sigma)^* - Op(sigma^*) + eps Op(P.Delta_p sigma^* + Q.Delta_q sigma^*)] f; the correction in kernel form is
// -sum_k u_k (V_k conj kappa)_x(u) with V_k the left-invariant x-derivatives.
inline double adjoint_residual_at(const HTypeStructure& g, const Symbol& s, double eps,
                                  const std::vector<TestField>& fields, const PointRule& ur, const PointRule& xr) {
    const int dv = g.dim_v();
    return detail::worst_ratio(xr, fields, eps, [&](const GroupPoint& x, const TestField& tf, double e) {
        cplx acc = 0;
        for (size_t i = 0; i < ur.size(); ++i) {
            const GroupPoint& u = ur.x[i];
            cplx k0 = s(x, u);
            GroupPoint y = group_mul(g, x, dilate(e, u));
            cplx k1 = s(y, u);
            if (k0 == cplx(0) && k1 == cplx(0)) continue;
            cplx lin = 0;
            for (int k = 0; k < dv; ++k) lin += u.v(k) * std::conj(detail::x_derivative(g, s.kernel, x, u, k));
            acc += ur.w[i] * (std::conj(k1) - std::conj(k0) - e * lin) * tf.f(y, e);
        }
        return acc;
    });
}

inline std::vector<ResidualRow> adjoint_residual(const HTypeStructure& g, const Symbol& s,
                                                 const std::vector<double>& eps_list,
                                                 const std::vector<TestField>& fields, const HarnessOptions& opt = {}) {
    detail::check_eps_list(eps_list);
    PointRule ur = kernel_rule(g, s.support_radius, opt.n_u, opt.n_u), xr = x_rule(g, s, opt.n_x);
    std::vector<double> r;
    for (double e : eps_list) r.push_back(adjoint_residual_at(g, s, e, fields, ur, xr));
    if (opt.resolution_check) {
        double e = eps_list.back();
        PointRule u2 = kernel_rule(g, s.support_radius, opt.n_u + 4, opt.n_u + 4), x2 = x_rule(g, s, opt.n_x + 4);
        double r2 = adjoint_residual_at(g, s, e, fields, u2, x2);
        if (std::abs(r2 - r.back()) > opt.resolution_tol * r2)
            throw InsufficientResolution("adjoint residual changes from " + std::to_string(r.back()) + " to " +
                                         std::to_string(r2) + " under refinement");
    }
    return with_slopes(eps_list, r);
}

// [Op(s1) Op(s2) - Op(s1 s2) + eps Op(Delta_p s1 . P s2 + Delta_q s1 . Q s2)] f in kernel form
inline double composition_residual_at(const HTypeStructure& g, const Symbol& s1, const Symbol& s2, double eps,
                                      const std::vector<TestField>& fields, const PointRule& ur,
                                      const PointRule& xr) {
    const int dv = g.dim_v();
    return detail::worst_ratio(xr, fields, eps, [&](const GroupPoint& x, const TestField& tf, double e) {
        const size_t n = ur.size();
        std::vector<cplx> k2x(n), dk2x(n * dv);
        for (size_t j = 0; j < n; ++j) {
            k2x[j] = s2(x, ur.x[j]);
            for (int k = 0; k < dv; ++k)
                dk2x[j * dv + k] = k2x[j] == cplx(0) ? cplx(0) : detail::x_derivative(g, s2.kernel, x, ur.x[j], k);
        }
        cplx acc = 0;
        for (size_t i = 0; i < n; ++i) {
            const GroupPoint& u = ur.x[i];
            cplx k1 = s1(x, u);
            if (k1 == cplx(0)) continue;
            GroupPoint y = group_mul(g, x, group_inv(dilate(e, u)));
            cplx inner = 0;
            for (size_t j = 0; j < n; ++j) {
                const GroupPoint& u2 = ur.x[j];
                cplx ky = s2(y, u2);
                if (ky == cplx(0) && k2x[j] == cplx(0)) continue;
                cplx lin = 0;
                for (int k = 0; k < dv; ++k) lin += u.v(k) * dk2x[j * dv + k];
                inner += ur.w[j] * (ky - k2x[j] + e * lin) * tf.f(group_mul(g, y, group_inv(dilate(e, u2))), e);
            }
            acc += ur.w[i] * k1 * inner;
        }
        return acc;
    });
}

inline std::vector<ResidualRow> composition_residual(const HTypeStructure& g, const Symbol& s1, const Symbol& s2,
                                                     const std::vector<double>& eps_list,
                                                     const std::vector<TestField>& fields,
                                                     const HarnessOptions& opt = {}) {
    detail::check_eps_list(eps_list);
    if (s1.support_radius != s2.support_radius) throw DimensionError("composition harness needs equal radii");
    PointRule ur = kernel_rule(g, s1.support_radius, opt.n_u, opt.n_u), xr = x_rule(g, s1, opt.n_x);
    std::vector<double> r;
    for (double e : eps_list) r.push_back(composition_residual_at(g, s1, s2, e, fields, ur, xr));
    if (opt.resolution_check) {
        double e = eps_list.back();
        PointRule u2 = kernel_rule(g, s1.support_radius, opt.n_u + 2, opt.n_u + 2), x2 = x_rule(g, s1, opt.n_x + 2);
        double r2 = composition_residual_at(g, s1, s2, e, fields, u2, x2);
        if (std::abs(r2 - r.back()) > opt.resolution_tol * r2)
            throw InsufficientResolution("composition residual changes from " + std::to_string(r.back()) + " to " +
                                         std::to_string(r2) + " under refinement");
    }
    return with_slopes(eps_list, r);
}

// smooth cutoff in the v-coordinates: 1 on the box [lo - margin, hi + margin], 0 beyond a further `width`
struct VCutoff {
    std::vector<double> lo, hi;
    double margin = 0.2, width = 0.5;

    double at(const double* v) const {
        double c = 1;
        for (size_t a = 0; a < lo.size(); ++a) {
            double out = std::max(lo[a] - margin - v[a], v[a] - hi[a] - margin);
            if (out <= 0) continue;
            if (out >= width) return 0.0;
            double t = out / width, e0 = std::exp(-1 / t), e1 = std::exp(-1 / (1 - t));
            c *= e1 / (e0 + e1);
        }
        return c;
    }
    double operator()(const GroupPoint& x) const { return at(x.v.data()); }
};

// ||Op(sigma) (1 - chi) f|| / ||f||, sup over test fields
inline double locality_residual_at(const HTypeStructure& g, const Symbol& s, const VCutoff& chi, double eps,
                                   const std::vector<TestField>& fields, const PointRule& ur, const PointRule& xr) {
    const int dv = g.dim_v();
    return detail::worst_ratio(xr, fields, eps, [&](const GroupPoint& x, const TestField& tf, double e) {
        cplx acc = 0;
        double yv[64];
        for (size_t i = 0; i < ur.size(); ++i) {
            const GroupPoint& u = ur.x[i];
            // the v-part of x delta_eps(u)^-1 is x_v - eps u_v
            for (int a = 0; a < dv; ++a) yv[a] = x.v(a) - e * u.v(a);
            double c = 1 - chi.at(yv);
            if (c == 0) continue;
            cplx k = s(x, u);
            if (k == cplx(0)) continue;
            acc += ur.w[i] * k * c * tf.f(group_mul(g, x, group_inv(dilate(e, u))), e);
        }
        return acc;
    });
}

inline std::vector<ResidualRow> locality_residual(const HTypeStructure& g, const Symbol& s, const VCutoff& chi,
                                                  const std::vector<double>& eps_list,
                                                  const std::vector<TestField>& fields, const PointRule& ur,
                                                  int n_x = 8) {
    detail::check_eps_list(eps_list);
    PointRule xr = x_rule(g, s, n_x);
    std::vector<double> r;
    for (double e : eps_list) r.push_back(locality_residual_at(g, s, chi, e, fields, ur, xr));
    return with_slopes(eps_list, r);
}

// int sup_x |kappa_x(u)| du, the uniform bound on ||Op_eps(sigma)||
inline double schur_bound(const HTypeStructure& g, const Symbol& s, int n_u = 24, int n_x = 8) {
    PointRule ur = kernel_rule(g, s.support_radius, n_u, n_u);
    PointRule xr = x_rule(g, s, n_x);
    double acc = 0;
    for (size_t i = 0; i < ur.size(); ++i) {
        double m = 0;
        for (const auto& x : xr.x) m = std::max(m, std::abs(s(x, ur.x[i])));
        acc += ur.w[i] * m;
    }
    return acc;
}

// Op_eps(sigma) f(x) = int kappa_x(u) f(x delta_eps(u)^-1) du at one point, for analytic f
inline cplx op_eps_point(const HTypeStructure& g, const Symbol& s, double eps, const PointFn& f, const GroupPoint& x,
                         const PointRule& ur) {
    cplx acc = 0;
    for (size_t i = 0; i < ur.size(); ++i) {
        cplx k = s(x, ur.x[i]);
        if (k == cplx(0)) continue;
        acc += ur.w[i] * k * f(group_mul(g, x, group_inv(dilate(eps, ur.x[i]))));
    }
    return acc;
}

}  // namespace htlab
