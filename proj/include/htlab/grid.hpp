#pragma once

// Sampled fields on a box in a left-translated frame.
// Physical point: x = origin * y, y on the box. Physical value: u(x) = values(y) exp(i carrier . y_z),
// so a field oscillating at a large central frequency is stored demodulated.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "fock_repr.hpp"

namespace htlab {

struct GridField {
    int d = 1, p = 1;
    GroupPoint origin;
    Vec carrier;
    std::vector<double> lo, h;  // per axis, 2d + p axes
    std::vector<int> n;
    std::vector<cplx> values;  // axis 0 slowest; z axes fastest
    bool periodized = false;   // values stand for a function on the quotient
    bool z_periodic = false;   // reconstruction is periodic along z (no z boundary)

    int axes() const { return 2 * d + p; }
    size_t nv() const {
        size_t k = 1;
        for (int a = 0; a < 2 * d; ++a) k *= n[a];
        return k;
    }
    size_t nz() const {
        size_t k = 1;
        for (int a = 2 * d; a < axes(); ++a) k *= n[a];
        return k;
    }
    size_t size() const { return nv() * nz(); }
    double cellvol_v() const {
        double c = 1;
        for (int a = 0; a < 2 * d; ++a) c *= h[a];
        return c;
    }
    double cellvol_z() const {
        double c = 1;
        for (int a = 2 * d; a < axes(); ++a) c *= h[a];
        return c;
    }
    double cellvol() const { return cellvol_v() * cellvol_z(); }

    void v_coords(size_t iv, double* out) const {
        for (int a = 2 * d - 1; a >= 0; --a) {
            out[a] = lo[a] + (iv % n[a]) * h[a];
            iv /= n[a];
        }
    }
    void z_coords(size_t iz, double* out) const {
        for (int a = axes() - 1; a >= 2 * d; --a) {
            out[a - 2 * d] = lo[a] + (iz % n[a]) * h[a];
            iz /= n[a];
        }
    }
    GroupPoint local_point(size_t idx) const {
        GroupPoint y{Vec(2 * d), Vec(p)};
        v_coords(idx / nz(), y.v.data());
        z_coords(idx % nz(), y.z.data());
        return y;
    }
    cplx physical_value(size_t idx) const {
        GroupPoint y = local_point(idx);
        return values[idx] * std::exp(I_ * carrier.dot(y.z));
    }
};

inline GridField make_field(const HTypeStructure& g, const GroupPoint& origin, const Vec& carrier,
                            std::vector<double> lo, std::vector<double> h, std::vector<int> n) {
    if (static_cast<int>(lo.size()) != g.dim() || h.size() != lo.size() || n.size() != lo.size())
        throw DimensionError("grid axes must number 2d + p");
    GridField f;
    f.d = g.d;
    f.p = g.p;
    f.origin = origin;
    f.carrier = carrier.size() ? carrier : Vec::Zero(g.p);
    f.lo = std::move(lo);
    f.h = std::move(h);
    f.n = std::move(n);
    f.values.assign(f.size(), cplx(0));
    return f;
}

// symmetric box [-L_a, L_a] with n_a points per axis
inline GridField centered_field(const HTypeStructure& g, const GroupPoint& origin, const Vec& carrier,
                                const std::vector<double>& half, const std::vector<int>& n) {
    std::vector<double> lo(half.size()), h(half.size());
    for (size_t a = 0; a < half.size(); ++a) {
        h[a] = n[a] > 1 ? 2 * half[a] / (n[a] - 1) : 1.0;
        lo[a] = -half[a];
    }
    return make_field(g, origin, carrier, lo, h, n);
}

inline GridField same_geometry(const GridField& f) {
    GridField o = f;
    std::fill(o.values.begin(), o.values.end(), cplx(0));
    return o;
}

// samples f at physical points
inline void sample(const HTypeStructure& g, GridField& field, const std::function<cplx(const GroupPoint&)>& f) {
    const long long total = static_cast<long long>(field.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < total; ++i) {
        GroupPoint y = field.local_point(i);
        field.values[i] = f(group_mul(g, field.origin, y)) * std::exp(-I_ * field.carrier.dot(y.z));
    }
}

inline double norm2(const GridField& f) {
    double s = 0;
    for (const cplx& v : f.values) s += std::norm(v);
    return s * f.cellvol();
}

inline bool same_grid(const GridField& a, const GridField& b) {
    if (a.n != b.n || a.lo != b.lo || a.h != b.h) return false;
    return (a.origin.v - b.origin.v).norm() == 0 && (a.origin.z - b.origin.z).norm() == 0 &&
           (a.carrier - b.carrier).norm() == 0;
}

inline cplx inner(const GridField& a, const GridField& b) {
    if (!same_grid(a, b)) throw DimensionError("inner product needs identical grids");
    cplx s = 0;
    for (size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * std::conj(b.values[i]);
    return s * a.cellvol();
}

inline double diff_norm2(const GridField& a, const GridField& b) {
    if (!same_grid(a, b)) throw DimensionError("difference needs identical grids");
    double s = 0;
    for (size_t i = 0; i < a.values.size(); ++i) s += std::norm(a.values[i] - b.values[i]);
    return s * a.cellvol();
}

// mass in the outer `frac` of the box along any axis; z axes skipped when the field is z-periodic
inline double boundary_shell_mass(const GridField& f, double frac = 0.1) {
    const int A = f.axes();
    std::vector<int> idx(A);
    double s = 0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        size_t r = i;
        bool shell = false;
        for (int a = A - 1; a >= 0; --a) {
            int k = static_cast<int>(r % f.n[a]);
            r /= f.n[a];
            if (f.z_periodic && a >= 2 * f.d) continue;
            if (f.n[a] < 2) continue;
            double t = static_cast<double>(k) / (f.n[a] - 1);
            if (t < frac || t > 1 - frac) shell = true;
        }
        if (shell) s += std::norm(f.values[i]);
    }
    return s * f.cellvol();
}

}  // namespace htlab
