#pragma once

// Free Schrodinger flow i d_t u + (1/2) Delta u = 0 as the level multiplier exp(-i t |lambda| (2n + d) / 2),
// Strang splitting with a potential, spectral localization, and mass monitors.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "gft.hpp"

namespace htlab {

inline Multiplier free_multiplier(const HTypeStructure& g, double t) {
    const int d = g.d;
    return [t, d](const Vec& lambda, int n) { return std::exp(-I_ * (0.5 * t * lambda.norm() * (2 * n + d))); };
}

struct PropagateOptions {
    bool check_band = true;
    double band_tol = 1e-3;      // relative forward/inverse reconstruction residual
    double boundary_tol = 1e-4;  // relative shell mass allowed in a reported solution
    double datum_tol = 1e-6;     // relative shell mass allowed in the transformed datum
    double shell_frac = 0.1;
};

inline void check_reported(const GridField& u, const PropagateOptions& opt) {
    double n = norm2(u);
    if (n == 0) return;
    double b = boundary_shell_mass(u, opt.shell_frac) / n;
    if (b >= opt.boundary_tol)
        throw BoundaryMass("solution carries relative shell mass " + std::to_string(b) + " (limit " +
                           std::to_string(opt.boundary_tol) + ")");
}

// One forward transform, then any number of (time, output geometry) reconstructions.
class Propagator {
public:
    Propagator(const HTypeStructure& g, const GridField& u0, const LambdaGrid& grid, const FockSpace& space,
               const PropagateOptions& opt = {})
        : g_(g), u0_(u0), opt_(opt) {
        F0_ = forward(g, u0, grid, space, {true, opt.datum_tol, opt.shell_frac});
        if (opt.check_band) {
            GridField r = same_geometry(u0);
            inverse_to_grid(g, F0_, r);
            double n = norm2(u0);
            band_residual_ = n > 0 ? std::sqrt(diff_norm2(r, u0) / n) : 0;
            if (band_residual_ > opt.band_tol)
                throw BandLimitError("initial datum is not band-limited on the lambda grid: reconstruction residual " +
                                     std::to_string(band_residual_));
        }
    }

    const FourierFamily& initial() const { return F0_; }
    FourierFamily family(double t) const { return t == 0 ? F0_ : apply_multiplier(F0_, free_multiplier(g_, t)); }
    double band_residual() const { return band_residual_; }
    const GridField& datum() const { return u0_; }

    // u(t) on geometry; t = 0 on the datum's own geometry is the datum itself
    GridField at(double t, const GridField& geometry) const {
        if (t == 0 && same_grid(geometry, u0_) && geometry.origin.v == u0_.origin.v &&
            geometry.origin.z == u0_.origin.z && geometry.carrier == u0_.carrier)
            return u0_;
        GridField out = same_geometry(geometry);
        inverse_to_grid(g_, family(t), out);
        check_reported(out, opt_);
        return out;
    }
    GridField at(double t) const { return at(t, u0_); }

private:
    HTypeStructure g_;
    GridField u0_;
    PropagateOptions opt_;
    FourierFamily F0_;
    double band_residual_ = 0;
};

inline GridField free_propagate(const HTypeStructure& g, const GridField& u0, double t, const LambdaGrid& grid,
                                const FockSpace& space, const PropagateOptions& opt = {}) {
    if (t == 0) return u0;
    return Propagator(g, u0, grid, space, opt).at(t);
}

// Strang splitting for i d_t u + (1/2) Delta u + V u = 0, V real on u0's grid.
// V = 0 reduces to one free step; constant V to a global phase.
inline GridField split_step(const HTypeStructure& g, const GridField& u0, const GridField& V, double t, int steps,
                            const LambdaGrid& grid, const FockSpace& space, const PropagateOptions& opt = {}) {
    if (!same_grid(u0, V)) throw DimensionError("potential must share the datum's grid");
    if (steps < 1) throw DimensionError("split_step needs at least one step");
    double vmin = 1e300, vmax = -1e300;
    for (auto v : V.values) {
        vmin = std::min(vmin, v.real());
        vmax = std::max(vmax, v.real());
    }
    if (vmax == vmin) {
        GridField u = free_propagate(g, u0, t, grid, space, opt);
        if (vmin != 0)
            for (auto& x : u.values) x *= std::exp(I_ * (vmin * t));
        return u;
    }
    const double dt = t / steps;
    std::vector<cplx> half(V.size());
    for (size_t i = 0; i < V.size(); ++i) half[i] = std::exp(I_ * (0.5 * dt * V.values[i].real()));
    GridField u = u0;
    PropagateOptions inner = opt;
    for (int s = 0; s < steps; ++s) {
        for (size_t i = 0; i < u.size(); ++i) u.values[i] *= half[i];
        inner.check_band = opt.check_band && s == 0;
        // later data are this loop's own outputs, already held to the reporting limit
        if (s > 0) inner.datum_tol = std::max(opt.datum_tol, opt.boundary_tol);
        u = free_propagate(g, u, dt, grid, space, inner);
        for (size_t i = 0; i < u.size(); ++i) u.values[i] *= half[i];
    }
    return u;
}

// smooth bump supported in (1/2, 2), equal to 1 near 1
inline double default_chi(double s) {
    if (s <= 0.5 || s >= 2) return 0;
    auto step = [](double t) {
        if (t <= 0) return 0.0;
        if (t >= 1) return 1.0;
        double e0 = std::exp(-1 / t), e1 = std::exp(-1 / (1 - t));
        return e0 / (e0 + e1);
    };
    return step((s - 0.5) / 0.25) * step((2 - s) / 0.5);
}

inline Multiplier cutoff_multiplier(const HTypeStructure& g, double h, const std::function<double(double)>& chi) {
    const int d = g.d;
    return [h, chi, d](const Vec& lambda, int n) { return cplx(chi(h * h * lambda.norm() * (2 * n + d) / 2)); };
}

// chi(-h^2 Delta / 2) u
inline GridField spectral_cutoff(const HTypeStructure& g, const GridField& u, double h, const LambdaGrid& grid,
                                 const FockSpace& space, const std::function<double(double)>& chi = default_chi) {
    FourierFamily F = apply_multiplier(forward(g, u, grid, space), cutoff_multiplier(g, h, chi));
    GridField out = same_geometry(u);
    inverse_to_grid(g, F, out);
    return out;
}

struct MassMonitors {
    double total = 0;
    double boundary_shell = 0;  // relative
    GroupPoint center;          // mass-weighted, physical coordinates
};

// Centre of mass in local coordinates mapped through the origin; both layers of origin * y are affine in y.
// Along periodic z axes the local centre is the circular mean over one period.
inline MassMonitors mass_monitors(const HTypeStructure& g, const GridField& u, double shell_frac = 0.1) {
    MassMonitors m;
    const int A = g.dim();
    std::vector<double> s(A, 0);
    std::vector<cplx> circ(g.p, 0);
    double tot = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        double w = std::norm(u.values[i]);
        if (w == 0) continue;
        GroupPoint y = u.local_point(i);
        for (int a = 0; a < g.dim_v(); ++a) s[a] += w * y.v(a);
        for (int r = 0; r < g.p; ++r) {
            int a = g.dim_v() + r;
            s[a] += w * y.z(r);
            double L = u.h[a] * u.n[a];
            circ[r] += w * std::exp(I_ * (2 * std::numbers::pi * (y.z(r) - u.lo[a]) / L));
        }
        tot += w;
    }
    m.total = tot * u.cellvol();
    m.boundary_shell = m.total > 0 ? boundary_shell_mass(u, shell_frac) / m.total : 0;
    GroupPoint c = identity(g);
    if (tot > 0) {
        for (int a = 0; a < g.dim_v(); ++a) c.v(a) = s[a] / tot;
        for (int r = 0; r < g.p; ++r) {
            int a = g.dim_v() + r;
            if (u.z_periodic) {
                double L = u.h[a] * u.n[a], ang = std::arg(circ[r]);
                if (ang < 0) ang += 2 * std::numbers::pi;
                c.z(r) = u.lo[a] + L * ang / (2 * std::numbers::pi);
            } else {
                c.z(r) = s[a] / tot;
            }
        }
    }
    m.center = group_mul(g, u.origin, c);
    return m;
}

// Packet-following snapshots on a z-periodic box. The box is re-centred on the z-centre extrapolated from the
// previous two snapshots; the circular-mean offset measured inside the box corrects it, and a second
// reconstruction is made when the offset exceeds a tenth of the period. Position along z is unambiguous while
// the per-step displacement error stays under half a period.
struct Snapshot {
    double t;
    GridField u;
    GroupPoint center;
};

inline GroupPoint central_shift(const HTypeStructure& g, const GroupPoint& x, const Vec& dz) {
    GroupPoint s = identity(g);
    s.z = dz;
    return group_mul(g, x, s);
}

// highest level carrying more than tol of the transform's mass; bounds the z-speed by (n + d/2)
inline int top_occupied_level(const FourierFamily& F, double tol = 1e-10) {
    std::vector<double> byl(F.space.N + 1, 0);
    double tot = 0;
    for (size_t k = 0; k < F.ops.size(); ++k)
        for (int r = 0; r < F.space.dim; ++r) {
            double w = F.grid.weight[k] * F.ops[k].row(r).squaredNorm();
            byl[F.space.level[r]] += w;
            tot += w;
        }
    int top = 0;
    for (int n = 0; n <= F.space.N; ++n)
        if (byl[n] > tol * tot) top = n;
    return top;
}

inline std::vector<Snapshot> track(const HTypeStructure& g, const Propagator& P, const std::vector<double>& times) {
    const GridField& u0 = P.datum();
    if (!u0.z_periodic) throw DimensionError("tracking needs a z-periodic datum");
    Vec box_mid(g.p);
    double period = 1e300;
    for (int r = 0; r < g.p; ++r) {
        int a = g.dim_v() + r;
        box_mid(r) = u0.lo[a] + 0.5 * u0.h[a] * u0.n[a];
        period = std::min(period, u0.h[a] * u0.n[a]);
    }
    // a step may move the packet by at most a quarter period beyond the extrapolation
    const double vmax = top_occupied_level(P.initial(), 1e-6) + 0.5 * g.d;
    const double max_dt = 0.25 * period / vmax;

    std::vector<Snapshot> out;
    Vec shift = Vec::Zero(g.p), vel = Vec::Zero(g.p);
    double t_prev = times.empty() ? 0 : times[0];
    bool have_prev = false;

    auto measure = [&](double t, GridField& u_out, GroupPoint& c_out) {
        Vec guess = shift + vel * (t - t_prev);
        GridField geom = u0;
        for (int pass = 0;; ++pass) {
            geom.origin = central_shift(g, u0.origin, guess);
            GridField u = P.at(t, geom);
            MassMonitors m = mass_monitors(g, u);
            GroupPoint loc = group_mul(g, group_inv(geom.origin), m.center);
            Vec off(g.p);
            bool recenter = false;
            for (int r = 0; r < g.p; ++r) {
                int a = g.dim_v() + r;
                double L = u0.h[a] * u0.n[a];
                // offset of the circular mean from the box middle, folded into (-L/2, L/2]
                off(r) = loc.z(r) - box_mid(r);
                off(r) -= L * std::round(off(r) / L);
                if (std::abs(off(r)) > 0.1 * L) recenter = true;
            }
            Vec now = guess + off;
            if (recenter && pass == 0) {
                guess = now;
                continue;
            }
            if (have_prev && t > t_prev) vel = (now - shift) / (t - t_prev);
            shift = now;
            t_prev = t;
            have_prev = true;
            // the circular mean fixes z modulo the period; unfold it next to the box middle
            GroupPoint q = loc;
            for (int r = 0; r < g.p; ++r) q.z(r) = box_mid(r) + off(r);
            c_out = group_mul(g, geom.origin, q);
            u_out = std::move(u);
            return;
        }
    };

    int measured = 0;
    for (double t : times) {
        GridField u;
        GroupPoint c;
        // before a velocity estimate exists, steps are short enough for any occupied level
        if (measured == 0 && std::abs(t) > max_dt) {
            t_prev = 0;
            measure(0, u, c);
            measure(std::copysign(max_dt, t), u, c);
            measured = 2;
        } else if (measured == 1 && std::abs(t - t_prev) > max_dt) {
            measure(t_prev + std::copysign(max_dt, t - t_prev), u, c);
            ++measured;
        }
        measure(t, u, c);
        ++measured;
        out.push_back({t, std::move(u), c});
    }
    return out;
}

}  // namespace htlab
