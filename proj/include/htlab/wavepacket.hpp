#pragma once

// Wave packets v(x) = |lambda_eps|^{d/2} eps^{-p/2} a(delta_{1/sqrt eps}(x0^-1 x)) (pi^{lambda_eps}_{x0^-1 x} Phi1, Phi2),
// lambda_eps = lambda0 / eps^2.
//
// Samples live in the packet frame: origin x0 and carrier lambda_eps, so the stored values are
// a(...) times a Fock matrix element and carry no eps^-2 oscillation. The matrix element depends on x0^-1 x
// through its v-part only, so it is evaluated once per v-node.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "gft.hpp"
#include "quantize.hpp"

namespace htlab {

// ---------- profiles ----------

struct Profile {
    std::function<cplx(const GroupPoint&)> a;
    std::vector<double> lo, hi;  // support box, coordinates
    // optional bulk evaluation on a geometry (origin identity, carrier 0); used for profiles held as transforms
    std::function<void(const HTypeStructure&, GridField&)> fill;
};

namespace detail {
// 1 on |t| <= flat, smooth step to 0 at |t| = edge
inline double plateau_cut(double t, double flat, double edge) {
    t = std::abs(t);
    if (t <= flat) return 1;
    if (t >= edge) return 0;
    double s = (t - flat) / (edge - flat), e0 = std::exp(-1 / s), e1 = std::exp(-1 / (1 - s));
    return e1 / (e0 + e1);
}
}  // namespace detail

// Gaussian with widths (sv, sz); the v-part is cut smoothly to zero between v_cut and v_edge widths, the z-part
// between 5 and 6 widths
inline Profile gaussian_in_box(const HTypeStructure& g, double sv, double sz, double v_cut = 5, double v_edge = 6) {
    Profile P;
    P.a = [=](const GroupPoint& x) {
        double c = std::exp(-0.5 * x.v.squaredNorm() / (sv * sv) - 0.5 * x.z.squaredNorm() / (sz * sz));
        for (int i = 0; i < x.v.size(); ++i) c *= detail::plateau_cut(x.v(i), v_cut * sv, v_edge * sv);
        for (int i = 0; i < x.z.size(); ++i) c *= detail::plateau_cut(x.z(i), 5 * sz, 6 * sz);
        return cplx(c);
    };
    for (int a = 0; a < g.dim(); ++a) {
        double h = a < g.dim_v() ? v_edge * sv : 6 * sz;
        P.lo.push_back(-h);
        P.hi.push_back(h);
    }
    return P;
}

// flat in v out to flat_v (cut to zero at half_v), Gaussian of width sz in z
inline Profile plateau(const HTypeStructure& g, double flat_v, double half_v, double sz) {
    Profile P;
    P.a = [flat_v, half_v, sz](const GroupPoint& x) {
        double c = std::exp(-0.5 * x.z.squaredNorm() / (sz * sz));
        for (int i = 0; i < x.v.size(); ++i) c *= detail::plateau_cut(x.v(i), flat_v, half_v);
        for (int i = 0; i < x.z.size(); ++i) c *= detail::plateau_cut(x.z(i), 5 * sz, 6 * sz);
        return cplx(c);
    };
    for (int a = 0; a < g.dim(); ++a) {
        double h = a < g.dim_v() ? half_v : 6 * sz;
        P.lo.push_back(-h);
        P.hi.push_back(h);
    }
    return P;
}

inline Profile scaled_profile(const Profile& p, cplx c) {
    Profile q = p;
    auto a = p.a;
    q.a = [a, c](const GroupPoint& x) { return c * a(x); };
    if (p.fill) {
        auto f = p.fill;
        q.fill = [f, c](const HTypeStructure& g, GridField& out) {
            f(g, out);
            for (auto& v : out.values) v *= c;
        };
    }
    return q;
}

// int over the centre of a(0_v, z) conj(b(0_v, z)), tensor Gauss-Legendre on the intersection of the z-boxes
inline cplx center_overlap(const HTypeStructure& g, const Profile& a, const Profile& b, int n = 96) {
    const int dv = g.dim_v();
    std::vector<Rule> r(g.p);
    for (int k = 0; k < g.p; ++k) {
        double lo = std::max(a.lo[dv + k], b.lo[dv + k]), hi = std::min(a.hi[dv + k], b.hi[dv + k]);
        if (!(hi > lo)) return 0;
        r[k] = composite_legendre(n / 16, 16, lo, hi);
    }
    std::vector<size_t> idx(g.p, 0);
    cplx s = 0;
    while (true) {
        GroupPoint x = identity(g);
        double w = 1;
        for (int k = 0; k < g.p; ++k) {
            x.z(k) = r[k].x[idx[k]];
            w *= r[k].w[idx[k]];
        }
        s += w * a.a(x) * std::conj(b.a(x));
        int k = g.p - 1;
        while (k >= 0 && idx[k] == r[k].x.size() - 1) idx[k--] = 0;
        if (k < 0) break;
        ++idx[k];
    }
    return s;
}

// ---------- packets ----------

struct WavePacketSpec {
    GroupPoint x0;
    Vec lambda0;
    Profile a;
    FockVector phi1, phi2;  // in fock_space(d, N) for some N; both the same length
    double eps = 0.1;
};

inline FockSpace harmonic_space(const HTypeStructure& g, const WavePacketSpec& s) {
    int N = 0;
    while (fock_space(g.d, N).dim < s.phi1.size()) ++N;
    FockSpace fs = fock_space(g.d, N);
    if (fs.dim != s.phi1.size() || s.phi2.size() != s.phi1.size())
        throw DimensionError("harmonics must be vectors of a full Fock truncation");
    return fs;
}

inline int top_level(const FockSpace& fs, const FockVector& v) {
    int m = 0;
    for (int r = 0; r < fs.dim; ++r)
        if (std::abs(v(r)) > 0) m = std::max(m, fs.level[r]);
    return m;
}

// embed a harmonic into a larger truncation
inline FockVector embed(const FockSpace& from, const FockVector& v, const FockSpace& to) {
    FockVector out = FockVector::Zero(to.dim);
    for (int r = 0; r < from.dim; ++r) {
        if (v(r) == cplx(0)) continue;
        int k = to.rank(from.index[r]);
        if (k < 0) throw DimensionError("harmonic does not fit the target Fock truncation");
        out(k) = v(r);
    }
    return out;
}

// Support condition: x0 delta_sqrt(eps)(supp a) inside the open fundamental domain. The image of the support box
// is affine in the box coordinates, so its corners bound it.
inline void check_support(const HTypeStructure& g, const WavePacketSpec& s) {
    const int A = g.dim();
    const double se = std::sqrt(s.eps);
    for (int mask = 0; mask < (1 << A); ++mask) {
        GroupPoint c = identity(g);
        for (int a = 0; a < A; ++a) {
            double t = (mask >> a & 1) ? s.a.hi[a] : s.a.lo[a];
            if (a < g.dim_v())
                c.v(a) = t;
            else
                c.z(a - g.dim_v()) = t;
        }
        GroupPoint x = group_mul(g, s.x0, dilate(se, c));
        for (int i = 0; i < g.dim_v(); ++i)
            if (!(x.v(i) > 0 && x.v(i) < g.scale_v))
                throw EpsTooLarge("scaled profile support leaves the fundamental domain (v-axis " + std::to_string(i) +
                                  ") at eps = " + std::to_string(s.eps));
        for (int r = 0; r < g.p; ++r)
            if (!(x.z(r) > 0 && x.z(r) < g.scale_z))
                throw EpsTooLarge("scaled profile support leaves the fundamental domain (z-axis " + std::to_string(r) +
                                  ") at eps = " + std::to_string(s.eps));
    }
}

struct PacketGridOptions {
    int n_v = 48;         // nodes per v-axis
    int n_z = 48;         // nodes per z-axis (one period)
    double v_extent = 0;  // half-width in units eps / sqrt|lambda0|; 0 = from the harmonics' top level
    double z_pad = 0.25;  // periodic z-box = scaled z-support widened by this fraction on each side
};

inline double lambda_eps_norm(const WavePacketSpec& s) { return s.lambda0.norm() / (s.eps * s.eps); }

// Packet frame: origin x0, carrier lambda_eps, z-periodic box over the scaled z-support.
// The Fock matrix elements of harmonics up to level n decay like exp(-|alpha|^2 / 2), |alpha|^2 = |lambda0| |Y|^2 / 2
// in Y = y_v / eps; the default v half-width puts |alpha|^2 = 36 + 4n at the edge.
inline GridField packet_geometry(const HTypeStructure& g, const WavePacketSpec& s, const PacketGridOptions& opt = {}) {
    FockSpace fs = harmonic_space(g, s);
    int n = std::max(top_level(fs, s.phi1), top_level(fs, s.phi2));
    double c = opt.v_extent > 0 ? opt.v_extent : std::sqrt(2.0 * (36 + 4 * n));
    const double l0 = s.lambda0.norm(), se = std::sqrt(s.eps);
    std::vector<double> lo, h;
    std::vector<int> nn;
    for (int a = 0; a < g.dim_v(); ++a) {
        double half = std::min(c * s.eps / std::sqrt(l0), se * std::max(std::abs(s.a.lo[a]), std::abs(s.a.hi[a])));
        lo.push_back(-half);
        h.push_back(2 * half / (opt.n_v - 1));
        nn.push_back(opt.n_v);
    }
    for (int r = 0; r < g.p; ++r) {
        double a0 = s.a.lo[g.dim_v() + r], a1 = s.a.hi[g.dim_v() + r], w = a1 - a0;
        double z0 = s.eps * (a0 - opt.z_pad * w), L = s.eps * w * (1 + 2 * opt.z_pad);
        lo.push_back(z0);
        h.push_back(L / opt.n_z);
        nn.push_back(opt.n_z);
    }
    GridField f = make_field(g, s.x0, s.lambda0 / (s.eps * s.eps), lo, h, nn);
    f.z_periodic = true;
    return f;
}

// uniform band around lambda_eps matching the periodic z-box (p = 1: n_z - 1 nodes)
inline LambdaGrid packet_band(const HTypeStructure& g, const GridField& geom) {
    const int A = g.dim();
    double L = geom.h[A - 1] * geom.n[A - 1];
    for (int a = g.dim_v(); a < A; ++a)
        if (std::abs(geom.h[a] * geom.n[a] - L) > 1e-12 * L) throw DimensionError("packet band needs equal z periods");
    double dl = 2 * std::numbers::pi / L;
    return band_grid(g, geom.carrier, (geom.n[A - 1] / 2 - 1) * dl + 0.5 * dl, dl);
}

// samples the packet on an arbitrary geometry
inline void build_on(const HTypeStructure& g, const WavePacketSpec& s, GridField& out) {
    check_support(g, s);
    FockSpace fs = harmonic_space(g, s);
    const Vec lam = s.lambda0 / (s.eps * s.eps);
    auto cf = adapted_basis(g, lam);
    const double pref = std::pow(cf.norm, 0.5 * g.d) * std::pow(s.eps, -0.5 * g.p);
    const double se = std::sqrt(s.eps);
    const size_t nv = out.nv(), nz = out.nz();
    // y -> w = x0^-1 origin y
    GroupPoint sh = group_mul(g, group_inv(s.x0), out.origin);
    // roundoff in x0^-1 x0 must not leave the aligned path
    if (sh.v.norm() + sh.z.norm() < 1e-13 * (1 + s.x0.v.norm() + s.x0.z.norm())) sh = identity(g);
    const bool aligned = sh.v.norm() == 0 && sh.z.norm() == 0 && (out.carrier - lam).norm() <= 1e-14 * lam.norm();

    // profile values on the scaled box when available in bulk
    GridField scaled;
    const bool bulk = aligned && static_cast<bool>(s.a.fill);
    if (bulk) {
        std::vector<double> lo(out.lo), h(out.h);
        for (int a = 0; a < g.dim(); ++a) {
            double k = a < g.dim_v() ? 1 / se : 1 / s.eps;
            lo[a] *= k;
            h[a] *= k;
        }
        scaled = make_field(g, identity(g), Vec(), lo, h, out.n);
        s.a.fill(g, scaled);
    }
#pragma omp parallel
    {
        PiEvaluator ev(fs, {PiMethod::Ladder});
        CMat M;
        std::vector<double> pp(g.d), qq(g.d);
        GroupPoint y = identity(g);
#pragma omp for schedule(dynamic)
        for (long long iv = 0; iv < static_cast<long long>(nv); ++iv) {
            out.v_coords(iv, y.v.data());
            const Vec wv = y.v + sh.v;
            for (int j = 0; j < g.d; ++j) {
                pp[j] = cf.P_basis.col(j).dot(wv);
                qq[j] = cf.Q_basis.col(j).dot(wv);
            }
            ev.eval(cf.norm, pp.data(), qq.data(), 0.0, M);
            const cplx me = s.phi2.dot(M * s.phi1);
            for (size_t iz = 0; iz < nz; ++iz) {
                const size_t idx = iv * nz + iz;
                if (std::abs(me) < 1e-300) {
                    out.values[idx] = 0;
                    continue;
                }
                out.z_coords(iz, y.z.data());
                cplx av;
                double ph = 0;
                if (aligned) {
                    av = bulk ? scaled.values[idx] : s.a.a(dilate(1 / se, y));
                } else {
                    GroupPoint w = group_mul(g, sh, y);
                    av = s.a.a(dilate(1 / se, w));
                    // lambda.w_z - carrier.y_z, split so the large frequency multiplies an O(1) difference
                    ph = lam.dot(w.z - y.z) + (lam - out.carrier).dot(y.z);
                }
                out.values[idx] = pref * av * me * (ph == 0 ? cplx(1) : std::exp(I_ * ph));
            }
        }
    }
}

inline GridField build(const HTypeStructure& g, const WavePacketSpec& s, const PacketGridOptions& opt = {}) {
    GridField f = packet_geometry(g, s, opt);
    build_on(g, s, f);
    return f;
}

// (2 pi)^d: int |lambda|^d |(pi_v Phi1, Phi2)|^2 dv over v-space for unit harmonics
inline double moyal_constant(const HTypeStructure& g) { return std::pow(2 * std::numbers::pi, g.d); }

// limit of (v_A, v_B): (2 pi)^d (Phi1, Psi1) conj((Phi2, Psi2)) int a conj(b) over the centre
inline cplx overlap_limit(const HTypeStructure& g, const WavePacketSpec& A, const WavePacketSpec& B) {
    return moyal_constant(g) * B.phi1.dot(A.phi1) * std::conj(B.phi2.dot(A.phi2)) * center_overlap(g, A.a, B.a);
}

inline double norm_limit(const HTypeStructure& g, const WavePacketSpec& A) { return overlap_limit(g, A, A).real(); }

// grid inner product of two packets sharing (x0, lambda0, eps), on A's geometry
inline cplx overlap(const HTypeStructure& g, const WavePacketSpec& A, const WavePacketSpec& B,
                    const PacketGridOptions& opt = {}) {
    GridField fa = build(g, A, opt), fb = same_geometry(fa);
    build_on(g, B, fb);
    return inner(fa, fb);
}

// ---------- symbol action ----------

struct SymbolActionOptions {
    PacketGridOptions grid;
    int extra_levels = 10;  // transform truncation beyond the harmonics' top level
    int n_u = 24;           // kernel rule nodes per axis for sigma(lambda)
};

// Op_eps(sigma) v for separable sigma = phi(x) k(w): phi * F^-1(k^(eps^2 lambda) F v). Otherwise the direct
// convolution of op_eps_apply.
inline GridField op_eps_packet(const HTypeStructure& g, const Symbol& sigma, double eps, const GridField& v,
                               const FockSpace& space, int n_u = 24, const ForwardOptions& fwd = {}) {
    if (!sigma.separable()) return op_eps_apply(g, sigma, eps, v);
    LambdaGrid band = packet_band(g, v);
    FourierFamily F = forward(g, v, band, space, fwd);
    Symbol k = separable_symbol([](const GroupPoint&) { return cplx(1); }, sigma.w_factor, sigma.support_radius);
    std::vector<CMat> K(band.size());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(band.size()); ++i)
        K[i] = symbol_at(g, k, identity(g), adapted_basis(g, eps * eps * band.lambda[i]), space, n_u, n_u);
    for (size_t i = 0; i < band.size(); ++i) F.ops[i] = K[i] * F.ops[i];
    GridField out = same_geometry(v);
    inverse_to_grid(g, F, out);
    const long long total = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < total; ++i) out.values[i] *= sigma.x_factor(group_mul(g, out.origin, out.local_point(i)));
    return out;
}

// ||Op_eps(sigma) WP(a, Phi1, Phi2) - WP(a, sigma(x0, lambda0) Phi1, Phi2)|| per eps
inline std::vector<ResidualRow> symbol_action_residual(const HTypeStructure& g, const Symbol& sigma,
                                                       const WavePacketSpec& spec, const std::vector<double>& eps_list,
                                                       const SymbolActionOptions& opt = {}) {
    FockSpace hs = harmonic_space(g, spec);
    int top = std::max(top_level(hs, spec.phi1), top_level(hs, spec.phi2));
    FockSpace big = fock_space(g.d, top + opt.extra_levels);
    CMat S = symbol_at(g, sigma, spec.x0, adapted_basis(g, spec.lambda0), big, opt.n_u, opt.n_u);
    std::vector<double> r;
    for (double e : eps_list) {
        WavePacketSpec s = spec;
        s.eps = e;
        GridField v = build(g, s, opt.grid);
        GridField ov = op_eps_packet(g, sigma, e, v, big, opt.n_u);
        WavePacketSpec t = s;
        t.phi1 = S * embed(hs, spec.phi1, big);
        t.phi2 = embed(hs, spec.phi2, big);
        GridField w = same_geometry(v);
        build_on(g, t, w);
        r.push_back(std::sqrt(diff_norm2(ov, w)));
    }
    return with_slopes(eps_list, r);
}

// ---------- profile transport ----------

// ell(lambda, n) = -(1/(2|lambda0|)) (-(d/2 - 1) mu + h/2) (-h - d mu), mu = lambda(Z^(lambda0)), h = |lambda|(2n + d):
// the image of the profile operator under the transform (Delta -> -H, Z -> i mu)
inline double ell(const HTypeStructure& g, const Vec& lambda0, const Vec& lambda, int n) {
    const double d = g.d, mu = lambda.dot(lambda0) / lambda0.norm(), h = lambda.norm() * (2 * n + d);
    return -(1 / (2 * lambda0.norm())) * (-(d / 2 - 1) * mu + h / 2) * (-h - d * mu);
}

inline Multiplier profile_multiplier(const HTypeStructure& g, const Vec& lambda0, double t) {
    return [g, lambda0, t](const Vec& lambda, int n) { return std::exp(I_ * t * ell(g, lambda0, lambda, n)); };
}

// Profiles carry no central modulation, so their z-spectrum sits around 0. A band shifted by half a spacing
// represents them exactly on one z-period (as antiperiodic extensions) without a lambda = 0 node.
inline LambdaGrid profile_band(const HTypeStructure& g, const GridField& geom) {
    const int A = g.dim();
    double L = geom.h[A - 1] * geom.n[A - 1], dl = 2 * std::numbers::pi / L;
    Vec c = Vec::Constant(g.p, 0.5 * dl);
    return band_grid(g, c, (geom.n[A - 1] / 2 - 1) * dl + 0.25 * dl, dl);
}

// box over the profile support widened by pad on each side, z-periodic
inline GridField profile_geometry(const HTypeStructure& g, const Profile& a, int n_v, int n_z, double pad = 0.25) {
    std::vector<double> lo, h;
    std::vector<int> n;
    for (int i = 0; i < g.dim_v(); ++i) {
        double w = a.hi[i] - a.lo[i];
        lo.push_back(a.lo[i] - pad * w);
        h.push_back(w * (1 + 2 * pad) / (n_v - 1));
        n.push_back(n_v);
    }
    for (int r = 0; r < g.p; ++r) {
        double w = a.hi[g.dim_v() + r] - a.lo[g.dim_v() + r];
        lo.push_back(a.lo[g.dim_v() + r] - pad * w);
        h.push_back(w * (1 + 2 * pad) / n_z);
        n.push_back(n_z);
    }
    GridField f = make_field(g, identity(g), Vec(), lo, h, n);
    f.z_periodic = true;
    return f;
}

inline FourierFamily profile_transform(const HTypeStructure& g, const Profile& a, const GridField& geom,
                                       const LambdaGrid& grid, const FockSpace& space) {
    GridField f = geom;
    sample(g, f, a.a);
    return forward(g, f, grid, space);
}

inline FourierFamily profile_evolve(const HTypeStructure& g, const FourierFamily& A0, const Vec& lambda0, double t) {
    if (t == 0) return A0;
    return apply_multiplier(A0, profile_multiplier(g, lambda0, t));
}

// a(t) on a geometry
inline GridField profile_evolve(const HTypeStructure& g, const GridField& a0, const Vec& lambda0, double t,
                                const LambdaGrid& grid, const FockSpace& space) {
    if (t == 0) return a0;
    FourierFamily F = profile_evolve(g, forward(g, a0, grid, space), lambda0, t);
    GridField out = same_geometry(a0);
    inverse_to_grid(g, F, out);
    return out;
}

// profile held as a transform; support box is the caller's declaration
inline Profile profile_from_family(const HTypeStructure& g, const FourierFamily& F, std::vector<double> lo,
                                   std::vector<double> hi) {
    Profile P;
    P.lo = std::move(lo);
    P.hi = std::move(hi);
    P.a = [g, F](const GroupPoint& x) { return inverse(g, F, x); };
    P.fill = [F](const HTypeStructure& gg, GridField& out) { inverse_to_grid(gg, F, out); };
    return P;
}

// x(t) = Exp((d/2) t Z^(lambda0)) x0 and the transported profile, harmonics h0
inline WavePacketSpec approx_spec(const HTypeStructure& g, const WavePacketSpec& spec, const FourierFamily& A0,
                                  double t) {
    FockSpace hs = harmonic_space(g, spec);
    FockVector h0 = hermite_vector(hs, std::vector<int>(g.d, 0));
    if ((spec.phi1 - h0).norm() > 1e-14 || (spec.phi2 - h0).norm() > 1e-14)
        throw DimensionError("approximate solution is stated for Phi1 = Phi2 = h0");
    WavePacketSpec s = spec;
    s.x0 = flow_phi(g, 0, t, spec.x0, spec.lambda0);
    if (t != 0) s.a = profile_from_family(g, profile_evolve(g, A0, spec.lambda0, t), spec.a.lo, spec.a.hi);
    return s;
}

inline GridField approx_solution(const HTypeStructure& g, const WavePacketSpec& spec, const FourierFamily& A0, double t,
                                 const PacketGridOptions& opt = {}) {
    return build(g, approx_spec(g, spec, A0, t), opt);
}

}  // namespace htlab
