#pragma once

// Control sets on the quotient, the vertical (H-GCC) and horizontal (assumption A) ray conditions, the
// observability energy of propagated packets, and time-weighted semiclassical measure estimates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "evolve.hpp"
#include "wavepacket.hpp"

namespace htlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------- control sets ----------

enum class ControlKind { Whole, BallComplement, ZBand, Custom };

// Membership is decided on lattice representatives. delta > 0 inflates U (open proxy), delta < 0 shrinks it
// (closed proxy).
struct ControlSet {
    ControlKind kind = ControlKind::Whole;
    GroupPoint center;                                  // ball: Euclidean ball in the coordinates of center^-1 x
    double radius = 0;
    double z_lo = 0, z_hi = 0;                          // band: z_lo < z < z_hi on every central axis
    std::function<bool(const GroupPoint&)> predicate;  // custom, on representatives; delta ignored
    double delta = 0;

    ControlSet inflated(double by) const {
        ControlSet c = *this;
        c.delta += by;
        return c;
    }
};

inline ControlSet whole_manifold() { return {}; }

inline ControlSet ball_complement(const HTypeStructure& g, const GroupPoint& center, double r) {
    if (!(r > 0 && r < g.scale_z)) throw DimensionError("ball radius must lie in (0, scale_z)");
    ControlSet U;
    U.kind = ControlKind::BallComplement;
    U.center = center;
    U.radius = r;
    return U;
}

inline ControlSet z_band(double lo, double hi) {
    ControlSet U;
    U.kind = ControlKind::ZBand;
    U.z_lo = lo;
    U.z_hi = hi;
    return U;
}

inline ControlSet custom_set(std::function<bool(const GroupPoint&)> f) {
    ControlSet U;
    U.kind = ControlKind::Custom;
    U.predicate = std::move(f);
    return U;
}

namespace detail {
// smallest Euclidean distance from center to the lattice images gamma * rep, gamma = (k scale_v, m scale_z)
// with every k, m in {-1, 0, 1}; enough while the ball sits inside the fundamental domain. Images farther than
// cut in v are skipped, so the result is only exact below cut.
inline double image_distance(const HTypeStructure& g, const GroupPoint& center, const GroupPoint& rep, double cut) {
    const int nv = g.dim_v(), A = g.dim();
    std::vector<int> k(A, -1);
    const GroupPoint ci = group_inv(center);
    double best = kInf;
    while (true) {
        double dv = 0;
        for (int i = 0; i < nv; ++i) {
            double w = rep.v(i) + k[i] * g.scale_v - center.v(i);
            dv += w * w;
        }
        if (dv < cut * cut) {
            GroupPoint gam = identity(g);
            for (int i = 0; i < nv; ++i) gam.v(i) = k[i] * g.scale_v;
            for (int r = 0; r < g.p; ++r) gam.z(r) = k[nv + r] * g.scale_z;
            GroupPoint w = group_mul(g, ci, group_mul(g, gam, rep));
            best = std::min(best, std::sqrt(w.v.squaredNorm() + w.z.squaredNorm()));
        }
        int a = A - 1;
        while (a >= 0 && k[a] == 1) k[a--] = -1;
        if (a < 0) break;
        ++k[a];
    }
    return best;
}
}  // namespace detail

inline bool contains(const HTypeStructure& g, const ControlSet& U, const GroupPoint& x) {
    switch (U.kind) {
        case ControlKind::Whole:
            return true;
        case ControlKind::Custom:
            return U.predicate(lattice_reduce(g, x).rep);
        case ControlKind::ZBand: {
            GroupPoint r = lattice_reduce(g, x).rep;
            for (int i = 0; i < g.p; ++i)
                if (!(r.z(i) > U.z_lo - U.delta && r.z(i) < U.z_hi + U.delta)) return false;
            return true;
        }
        case ControlKind::BallComplement:
            return detail::image_distance(g, U.center, lattice_reduce(g, x).rep, U.radius - U.delta) > U.radius - U.delta;
    }
    return false;
}

// ---------- vertical rays (H-GCC) ----------

struct RaySamples {
    int n_v = 31;      // nodes per v-axis over the fundamental domain, cell-centred
    int n_z = 0;       // nodes per z-axis; 0 = from the scan step
    double ds = 0;     // flow-time scan step; 0 = margin / (d/2) / 4
    double margin = 0.005;
    int directions = 0;  // central directions for p > 1 (p = 1 uses both signs)
};

struct RayWitness {
    GroupPoint x;
    Vec direction;
    double hit_time;  // first flow time in U, +inf if none within the horizon
};

namespace detail {
inline std::vector<Vec> central_directions(const HTypeStructure& g, int m) {
    if (g.p == 1) return {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    return sphere_directions(g.p, m > 0 ? m : 32);
}

inline double scan_step(const HTypeStructure& g, const RaySamples& s) {
    return s.ds > 0 ? s.ds : s.margin / (0.5 * g.d) / 4;
}

// points of the fundamental domain, cell-centred
inline std::vector<GroupPoint> domain_samples(const HTypeStructure& g, int n_v, int n_z) {
    const int A = g.dim();
    std::vector<int> n(A, n_v), idx(A, 0);
    for (int r = 0; r < g.p; ++r) n[g.dim_v() + r] = n_z;
    std::vector<GroupPoint> out;
    while (true) {
        GroupPoint x = identity(g);
        for (int i = 0; i < g.dim_v(); ++i) x.v(i) = (idx[i] + 0.5) * g.scale_v / n[i];
        for (int r = 0; r < g.p; ++r) x.z(r) = (idx[g.dim_v() + r] + 0.5) * g.scale_z / n[g.dim_v() + r];
        out.push_back(x);
        int a = A - 1;
        while (a >= 0 && idx[a] == n[a] - 1) idx[a--] = 0;
        if (a < 0) break;
        ++idx[a];
    }
    return out;
}

// first s > 0 with flow(s) in U, given flow(0) outside U: march by ds, then bisect the crossing
template <class Flow>
double first_hit(const HTypeStructure& g, const ControlSet& U, const Flow& flow, double horizon, double ds) {
    if (contains(g, U, flow(0.0))) return 0;
    for (double s = ds; s <= horizon + 0.5 * ds; s += ds) {
        if (!contains(g, U, flow(s))) continue;
        double a = s - ds, b = s;
        for (int it = 0; it < 40; ++it) {
            double m = 0.5 * (a + b);
            (contains(g, U, flow(m)) ? b : a) = m;
        }
        return b;
    }
    return kInf;
}
}  // namespace detail

// The slowest sampled vertical ray of each v-column and direction: its start and hitting time (+inf past the
// horizon). Rays starting in U are not reported. For p = 1 each column is a circle of period scale_z: the
// slowest start sits on the near edge of the longest arc outside U, and both arc edges are refined by bisection.
// Elsewhere every sample is marched up to the horizon.
inline std::vector<RayWitness> slowest_vertical_rays(const HTypeStructure& g, const ControlSet& U, double horizon,
                                                     const RaySamples& smp = {}) {
    const double ds = detail::scan_step(g, smp), speed = 0.5 * g.d;
    const auto dirs = detail::central_directions(g, smp.directions);
    std::vector<RayWitness> out;
    if (g.p == 1) {
        const int nz = smp.n_z > 0 ? smp.n_z : static_cast<int>(std::ceil(g.scale_z / (ds * speed)));
        const double hz = g.scale_z / nz;
        auto cols = detail::domain_samples(g, smp.n_v, 1);
        std::vector<std::vector<RayWitness>> per(cols.size());
#pragma omp parallel for schedule(dynamic)
        for (long long c = 0; c < static_cast<long long>(cols.size()); ++c) {
            GroupPoint x = cols[c];
            auto at = [&](double z) {
                x.z(0) = z;
                return contains(g, U, x);
            };
            std::vector<char> in(nz);
            for (int j = 0; j < nz; ++j) in[j] = at((j + 0.5) * hz);
            const int first_in = static_cast<int>(std::find(in.begin(), in.end(), 1) - in.begin());
            if (first_in == nz) {
                for (const Vec& dir : dirs) per[c].push_back({cols[c], dir, kInf});
                continue;
            }
            // edge between a member node zi and an outside node zo, zo - zi = +-hz; returns the outside limit
            auto edge = [&](double zi, double zo) {
                for (int it = 0; it < 48; ++it) {
                    double m = 0.5 * (zi + zo);
                    (at(m) ? zi : zo) = m;
                }
                return zo;
            };
            // arcs outside U as [lo, hi] in unwrapped z, walking once around from a member node
            double best_len = -1, best_lo = 0, best_hi = 0;
            for (int q = 1; q <= nz; ++q) {
                int j = (first_in + q) % nz;
                int jp = (first_in + q - 1) % nz;
                if (in[j] || !in[jp]) continue;
                int r = q;
                while (!in[(first_in + r) % nz]) ++r;
                double zi0 = (first_in + q - 1 + 0.5) * hz, zi1 = (first_in + r + 0.5) * hz;
                double lo = edge(zi0, zi0 + hz), hi = edge(zi1, zi1 - hz);
                if (hi - lo > best_len) best_len = hi - lo, best_lo = lo, best_hi = hi;
                q = r;
            }
            if (best_len < 0) continue;  // U contains every node of this column
            for (const Vec& dir : dirs) {
                GroupPoint x0 = cols[c];
                x0.z(0) = dir(0) > 0 ? best_lo : best_hi;
                double tau = best_len / speed;
                per[c].push_back({lattice_reduce(g, x0).rep, dir, tau > horizon ? kInf : tau});
            }
        }
        for (auto& v : per)
            for (auto& w : v) out.push_back(std::move(w));
        return out;
    }
    const int nz = smp.n_z > 0 ? smp.n_z : smp.n_v;
    auto pts = detail::domain_samples(g, smp.n_v, nz);
    std::vector<RayWitness> all(pts.size() * dirs.size());
    std::vector<char> keep(all.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(pts.size()); ++i)
        for (size_t k = 0; k < dirs.size(); ++k) {
            auto flow = [&](double s) { return flow_phi(g, 0, s, pts[i], dirs[k]); };
            double tau = detail::first_hit(g, U, flow, horizon, ds);
            all[i * dirs.size() + k] = {pts[i], dirs[k], tau};
            keep[i * dirs.size() + k] = tau > 0;
        }
    for (size_t i = 0; i < all.size(); ++i)
        if (keep[i]) out.push_back(std::move(all[i]));
    return out;
}

struct GccCheck {
    bool holds;
    std::vector<RayWitness> witnesses;  // sampled rays not meeting U in (0, T)
};

inline GccCheck check_hgcc(const HTypeStructure& g, const ControlSet& U, double T, const RaySamples& smp = {}) {
    GccCheck r{true, {}};
    for (auto& w : slowest_vertical_rays(g, U, T, smp))
        if (!(w.hit_time < T)) {
            r.holds = false;
            r.witnesses.push_back(w);
        }
    return r;
}

// infimum of T with every sampled ray meeting U in (0, T): the largest hitting time, +inf past T_max
inline double t_gcc(const HTypeStructure& g, const ControlSet& U, double T_max, const RaySamples& smp = {}) {
    double m = 0;
    for (auto& w : slowest_vertical_rays(g, U, T_max, smp)) m = std::max(m, w.hit_time);
    return m > T_max ? kInf : m;
}

struct GccInterval {
    double lower, upper;  // inflated (open) and shrunk (closed) proxies
};

inline GccInterval t_gcc_interval(const HTypeStructure& g, const ControlSet& U, double T_max,
                                  const RaySamples& smp = {}) {
    return {t_gcc(g, U.inflated(smp.margin), T_max, smp), t_gcc(g, U.inflated(-smp.margin), T_max, smp)};
}

// ---------- horizontal lines (assumption A) ----------

struct HorizontalSamples {
    int n = 7;            // nodes per axis over the fundamental domain
    int directions = 16;  // unit covectors on the sphere of the first stratum
    double horizon = 10;  // |s| scanned
    double ds = 0.01;
};

struct LineWitness {
    GroupPoint x;
    Vec omega;
};

struct AssumptionCheck {
    bool holds_up_to_horizon;  // a finite-horizon verification, never a proof
    std::vector<LineWitness> witnesses;
};

namespace detail {
// in the plane the directions include the coordinate axes whenever m is a multiple of 4
inline std::vector<Vec> horizontal_directions(const HTypeStructure& g, int m) {
    if (g.dim_v() != 2) return sphere_directions(g.dim_v(), m);
    std::vector<Vec> out;
    for (int k = 0; k < m; ++k) {
        double t = 2 * std::numbers::pi * k / m;
        Vec u(2);
        u << std::cos(t), std::sin(t);
        if (std::abs(u(0)) < 1e-15) u(0) = 0;
        if (std::abs(u(1)) < 1e-15) u(1) = 0;
        out.push_back(u);
    }
    return out;
}
}  // namespace detail

// x Exp(s omega.V): the right translate is well defined on the left quotient
inline AssumptionCheck check_assumption_A(const HTypeStructure& g, const ControlSet& U,
                                          const HorizontalSamples& smp = {}) {
    auto pts = detail::domain_samples(g, smp.n, smp.n);
    auto dirs = detail::horizontal_directions(g, smp.directions);
    std::vector<char> hit(pts.size() * dirs.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(pts.size()); ++i)
        for (size_t k = 0; k < dirs.size(); ++k) {
            bool h = false;
            for (double s = 0; s <= smp.horizon && !h; s += smp.ds)
                h = contains(g, U, horizontal_flow_right(g, s, dirs[k], pts[i])) ||
                    contains(g, U, horizontal_flow_right(g, -s, dirs[k], pts[i]));
            hit[i * dirs.size() + k] = h;
        }
    AssumptionCheck r{true, {}};
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t k = 0; k < dirs.size(); ++k)
            if (!hit[i * dirs.size() + k]) {
                r.holds_up_to_horizon = false;
                r.witnesses.push_back({pts[i], dirs[k]});
            }
    return r;
}

// ---------- observability energy ----------

inline double mass_in(const HTypeStructure& g, const GridField& u, const ControlSet& U) {
    if (U.kind == ControlKind::Whole) return norm2(u);
    // per-node terms then a serial sum: bitwise the same for any worker count
    std::vector<double> w(u.size(), 0.0);
    const long long total = static_cast<long long>(u.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < total; ++i) {
        double a = std::norm(u.values[i]);
        if (a > 0 && contains(g, U, group_mul(g, u.origin, u.local_point(i)))) w[i] = a;
    }
    double s = 0;
    for (double a : w) s += a;
    return s * u.cellvol();
}

// trapezoid in time of the mass in U; snapshots sorted by time
inline double energy_in_U(const HTypeStructure& g, const std::vector<Snapshot>& snaps, const ControlSet& U) {
    double e = 0, prev = 0;
    for (size_t k = 0; k < snaps.size(); ++k) {
        double m = mass_in(g, snaps[k].u, U);
        if (k > 0) e += 0.5 * (snaps[k].t - snaps[k - 1].t) * (m + prev);
        prev = m;
    }
    return e;
}

// mass within quasi-distance rho of a point
inline double mass_near(const HTypeStructure& g, const GridField& u, const GroupPoint& c, double rho) {
    double s = 0;
    const GroupPoint ci = group_inv(c);
    for (size_t i = 0; i < u.size(); ++i) {
        double w = std::norm(u.values[i]);
        if (w > 0 && quasi_norm(group_mul(g, ci, group_mul(g, u.origin, u.local_point(i)))) <= rho) s += w;
    }
    return s * u.cellvol();
}

struct PacketRunOptions {
    PacketGridOptions grid;
    int extra_levels = 12;  // Fock truncation beyond the harmonics' top level
    double dt = 0.05;       // snapshot spacing; 0 = only the requested times
};

// propagate the packet and follow it; times 0, dt, ..., plus every requested time
inline std::vector<Snapshot> packet_run(const HTypeStructure& g, const WavePacketSpec& spec,
                                        const std::vector<double>& extra_times, const PacketRunOptions& opt = {}) {
    GridField u0 = build(g, spec, opt.grid);
    FockSpace hs = harmonic_space(g, spec);
    int top = std::max(top_level(hs, spec.phi1), top_level(hs, spec.phi2));
    Propagator P(g, u0, packet_band(g, u0), fock_space(g.d, top + opt.extra_levels));
    double tmax = 0;
    for (double t : extra_times) tmax = std::max(tmax, t);
    std::vector<double> ts;
    ts.push_back(0);
    if (opt.dt > 0)
        for (int k = 1; k * opt.dt < tmax + 1e-12; ++k) ts.push_back(k * opt.dt);
    for (double t : extra_times) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             ts.end());
    return track(g, P, ts);
}

struct ObservabilityRow {
    double T, eps, mass0, energy, ratio;  // ratio = mass0 / energy, +inf when no resolved mass enters U
};

inline std::vector<ObservabilityRow> observability_scan(const HTypeStructure& g,
                                                        const std::function<WavePacketSpec(double)>& family,
                                                        const ControlSet& U, const std::vector<double>& T_list,
                                                        const std::vector<double>& eps_list,
                                                        const PacketRunOptions& opt = {}) {
    std::vector<ObservabilityRow> rows;
    for (double e : eps_list) {
        auto snaps = packet_run(g, family(e), T_list, opt);
        const double m0 = norm2(snaps.front().u);
        for (double T : T_list) {
            std::vector<Snapshot> upto;
            for (auto& s : snaps)
                if (s.t <= T + 1e-12) upto.push_back(s);
            double en = energy_in_U(g, upto, U);
            rows.push_back({T, e, m0, en, en > 0 ? m0 / en : kInf});
        }
    }
    return rows;
}

// ---------- semiclassical measure ----------

struct TimeWeights {
    std::vector<double> t, w;  // quadrature of int theta(t) . dt
};

// midpoint-free composite Simpson weights for theta on [0, T], n even
inline TimeWeights simpson_weights(const std::function<double(double)>& theta, double T, int n) {
    if (n < 2 || n % 2) throw DimensionError("Simpson rule needs an even positive node count");
    TimeWeights tw;
    const double h = T / n;
    for (int k = 0; k <= n; ++k) {
        double c = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
        tw.t.push_back(k * h);
        tw.w.push_back(c * h / 3 * theta(k * h));
    }
    return tw;
}

struct MeasureOptions {
    PacketRunOptions run{{}, 12, 0.0};
    int n_u = 24;  // kernel rule nodes for sigma(lambda)
    std::vector<double> powers{1, 2};
};

// sum_j w_j (Op_eps(sigma) u(t_j), u(t_j))
inline cplx ell_eps(const HTypeStructure& g, const WavePacketSpec& spec, const Symbol& sigma, const TimeWeights& tw,
                    const MeasureOptions& opt = {}) {
    auto snaps = packet_run(g, spec, tw.t, opt.run);
    FockSpace hs = harmonic_space(g, spec);
    int top = std::max(top_level(hs, spec.phi1), top_level(hs, spec.phi2));
    FockSpace space = fock_space(g.d, top + opt.run.extra_levels);
    cplx s = 0;
    for (size_t j = 0; j < tw.t.size(); ++j) {
        if (tw.w[j] == 0) continue;
        auto it = std::find_if(snaps.begin(), snaps.end(), [&](const Snapshot& q) { return std::abs(q.t - tw.t[j]) < 1e-12; });
        // propagated data carry the propagator's reported shell mass, not the datum's
        GridField ov = op_eps_packet(g, sigma, spec.eps, it->u, space, opt.n_u, {true, PropagateOptions{}.boundary_tol, 0.1});
        s += tw.w[j] * inner(ov, it->u);
    }
    return s;
}

// packet limit: (2 pi)^d sum_j w_j (sigma(x(t_j), lambda0) Phi1, Phi1) ||Phi2||^2 int |a(0, z)|^2 dz,
// x(t) the centre flow of the harmonics' level (harmonics of a single level)
inline cplx packet_measure_limit(const HTypeStructure& g, const WavePacketSpec& spec, const Symbol& sigma,
                                 const TimeWeights& tw, int n_u = 24) {
    FockSpace hs = harmonic_space(g, spec);
    int n = top_level(hs, spec.phi1);
    auto cf = adapted_basis(g, spec.lambda0);
    const double ca = spec.phi2.squaredNorm() * center_overlap(g, spec.a, spec.a).real();
    cplx s = 0;
    for (size_t j = 0; j < tw.t.size(); ++j) {
        if (tw.w[j] == 0) continue;
        GroupPoint x = flow_phi(g, n, tw.t[j], spec.x0, spec.lambda0);
        CMat S = symbol_at(g, sigma, x, cf, hs, n_u, n_u);
        s += tw.w[j] * spec.phi1.dot(S * spec.phi1);
    }
    return moyal_constant(g) * s * ca;
}

struct MeasureEstimate {
    std::string symbol;
    std::vector<double> eps, values;  // real parts of ell_eps
    std::vector<double> powers, coeffs;  // values ~ limit + sum coeffs_k eps^powers_k
    double limit = 0;
    double fit_residual = 0;  // largest |fit - value|
};

// Least-squares Richardson fit. The default powers {1, 2} suit profiles even in v: their half-order term cancels,
// and a sqrt(eps) column then only soaks up curvature.
inline MeasureEstimate extrapolate_measure(std::string name, const std::vector<double>& eps,
                                           const std::vector<double>& vals, std::vector<double> powers = {1, 2}) {
    if (eps.size() < 3 || eps.size() != vals.size()) throw DimensionError("measure estimate needs at least three eps values");
    if (powers.size() + 1 > eps.size()) throw DimensionError("more extrapolation powers than eps values allow");
    for (size_t k = 1; k < eps.size(); ++k)
        if (!(eps[k] < eps[k - 1])) throw DimensionError("eps list must be strictly decreasing");
    double scale = 0;
    for (double v : vals) scale = std::max(scale, std::abs(v));
    for (size_t k = 2; k < vals.size(); ++k) {
        double d1 = std::abs(vals[k - 1] - vals[k - 2]), d2 = std::abs(vals[k] - vals[k - 1]);
        if (d2 > 1e-12 * scale && !(d2 < d1))
            throw NonConvergent("successive measure differences do not shrink at eps = " + std::to_string(eps[k]));
    }
    Mat A(eps.size(), powers.size() + 1);
    Vec b(eps.size());
    for (size_t k = 0; k < eps.size(); ++k) {
        A(k, 0) = 1;
        for (size_t j = 0; j < powers.size(); ++j) A(k, j + 1) = std::pow(eps[k], powers[j]);
        b(k) = vals[k];
    }
    Vec c = A.colPivHouseholderQr().solve(b);
    MeasureEstimate m{std::move(name), eps, vals, powers, {}, c(0), (A * c - b).cwiseAbs().maxCoeff()};
    for (int j = 1; j < c.size(); ++j) m.coeffs.push_back(c(j));
    return m;
}

inline MeasureEstimate measure_estimate(const HTypeStructure& g, const std::function<WavePacketSpec(double)>& family,
                                        const Symbol& sigma, const TimeWeights& tw, const std::vector<double>& eps,
                                        const std::string& name = "sigma", const MeasureOptions& opt = {}) {
    std::vector<double> v;
    for (double e : eps) v.push_back(ell_eps(g, family(e), sigma, tw, opt).real());
    return extrapolate_measure(name, eps, v, opt.powers);
}

// ell at time t for sigma centred on the flowed centre against ell at time 0 for sigma centred on x0; the
// measure is transported by the flow, so the two agree in the limit
struct TransportCheck {
    cplx at_zero, at_t;
    double rel;
};

inline TransportCheck transport_check(const HTypeStructure& g, const WavePacketSpec& spec,
                                      const std::function<Symbol(const GroupPoint&)>& centred, double t,
                                      const MeasureOptions& opt = {}) {
    int n = top_level(harmonic_space(g, spec), spec.phi1);
    cplx l0 = ell_eps(g, spec, centred(spec.x0), {{0.0}, {1.0}}, opt);
    cplx l1 = ell_eps(g, spec, centred(flow_phi(g, n, t, spec.x0, spec.lambda0)), {{t}, {1.0}}, opt);
    return {l0, l1, std::abs(l1 - l0) / std::abs(l0)};
}

}  // namespace htlab
