// Batch runner: one subcommand per experiment, JSON config in, CSV + manifest + gnuplot scripts out.
// Exit 0 when every declared check passes, 1 on a failed check or numerical error, 2 on a config/schema error.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "htlab/control_obs.hpp"

#ifndef HTLAB_VERSION
#define HTLAB_VERSION "dev"
#endif

using namespace htlab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------- config access ----------

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw SchemaError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw SchemaError("unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
T get(const json& j, const char* key, T dflt) {
    if (!j.contains(key)) return dflt;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("key '") + key + "' has the wrong type");
    }
}

Vec get_vec(const json& j, const char* key, Vec dflt) {
    if (!j.contains(key)) return dflt;
    auto v = get<std::vector<double>>(j, key, {});
    return Eigen::Map<Vec>(v.data(), v.size());
}

json section_of(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

HTypeStructure parse_structure(const json& cfg) {
    if (!cfg.contains("structure")) throw SchemaError("missing required section 'structure'");
    const json& s = cfg.at("structure");
    allow_keys(s, "structure", {"preset", "d", "p", "P", "scale_v", "scale_z"});
    const double sv = get(s, "scale_v", std::sqrt(2 * std::numbers::pi)), sz = get(s, "scale_z", std::numbers::pi);
    const int d = get(s, "d", 1);
    if (!s.contains("P")) {
        if (get<std::string>(s, "preset", "heisenberg") != "heisenberg") throw SchemaError("unknown structure preset");
        auto h = heisenberg(d);
        return validate_structure(h.d, h.p, h.P, sv, sz);
    }
    auto raw = get<std::vector<std::vector<std::vector<double>>>>(s, "P", {});
    std::vector<Mat> P;
    for (auto& m : raw) {
        Mat M(m.size(), m.empty() ? 0 : m[0].size());
        for (size_t i = 0; i < m.size(); ++i) {
            if (m[i].size() != static_cast<size_t>(M.cols())) throw SchemaError("ragged prototype matrix");
            for (size_t k = 0; k < m[i].size(); ++k) M(i, k) = m[i][k];
        }
        P.push_back(M);
    }
    return validate_structure(d, get(s, "p", static_cast<int>(P.size())), P, sv, sz);
}

GroupPoint domain_center(const HTypeStructure& g) {
    GroupPoint c = identity(g);
    for (int i = 0; i < g.dim_v(); ++i) c.v(i) = g.scale_v / 2;
    for (int r = 0; r < g.p; ++r) c.z(r) = g.scale_z / 2;
    return c;
}

// absolute "x0" or "x0_offset" right-multiplied onto the domain centre
GroupPoint parse_point(const HTypeStructure& g, const json& j, const char* abs_key, const char* off_key,
                       const GroupPoint& base) {
    if (j.contains(abs_key)) return make_point(g, get<std::vector<double>>(j, abs_key, {}));
    if (j.contains(off_key)) return group_mul(g, base, make_point(g, get<std::vector<double>>(j, off_key, {})));
    return base;
}

Profile parse_profile(const HTypeStructure& g, const json& j, Profile dflt) {
    if (j.is_null()) return dflt;
    allow_keys(j, "profile", {"kind", "sigma_v", "sigma_z", "v_cut", "v_edge", "flat_v", "half_v"});
    auto kind = get<std::string>(j, "kind", "gaussian");
    if (kind == "gaussian")
        return gaussian_in_box(g, get(j, "sigma_v", 0.5), get(j, "sigma_z", 0.5), get(j, "v_cut", 5.0),
                               get(j, "v_edge", 6.0));
    if (kind == "plateau") return plateau(g, get(j, "flat_v", 2.5), get(j, "half_v", 3.0), get(j, "sigma_z", 0.5));
    throw SchemaError("unknown profile kind '" + kind + "'");
}

PacketGridOptions parse_grid(const json& j, PacketGridOptions o = {}) {
    if (j.is_null()) return o;
    allow_keys(j, "grid", {"n_v", "n_z", "v_extent", "z_pad"});
    o.n_v = get(j, "n_v", o.n_v);
    o.n_z = get(j, "n_z", o.n_z);
    o.v_extent = get(j, "v_extent", o.v_extent);
    o.z_pad = get(j, "z_pad", o.z_pad);
    return o;
}

struct PacketConfig {
    WavePacketSpec spec;
    PacketGridOptions grid;
};

PacketConfig parse_packet(const HTypeStructure& g, const json& sec, Profile dflt_profile, double dflt_eps,
                          std::vector<double> dflt_offset = {}) {
    json j = section_of(sec, "packet");
    allow_keys(j, "packet", {"x0", "x0_offset", "lambda0", "level", "alpha", "profile", "eps", "grid"});
    PacketConfig pc;
    GroupPoint base = domain_center(g);
    if (!dflt_offset.empty() && !j.contains("x0")) base = group_mul(g, base, make_point(g, dflt_offset));
    pc.spec.x0 = parse_point(g, j, "x0", "x0_offset", base);
    if (j.contains("x0_offset")) pc.spec.x0 = parse_point(g, j, "x0", "x0_offset", domain_center(g));
    pc.spec.lambda0 = get_vec(j, "lambda0", Vec::Constant(g.p, 0.0));
    if (!j.contains("lambda0")) pc.spec.lambda0(0) = 1;
    std::vector<int> alpha = get(j, "alpha", std::vector<int>(g.d, 0));
    if (j.contains("level")) {
        alpha.assign(g.d, 0);
        alpha[0] = get(j, "level", 0);
    }
    if (static_cast<int>(alpha.size()) != g.d) throw SchemaError("packet alpha needs d entries");
    int n = 0;
    for (int a : alpha) n += a;
    auto hs = fock_space(g.d, n);
    pc.spec.phi1 = hermite_vector(hs, alpha);
    pc.spec.phi2 = pc.spec.phi1;
    pc.spec.a = parse_profile(g, j.contains("profile") ? j.at("profile") : json(), dflt_profile);
    pc.spec.eps = get(j, "eps", dflt_eps);
    pc.grid = parse_grid(j.contains("grid") ? j.at("grid") : json());
    return pc;
}

ControlSet parse_set(const HTypeStructure& g, const json& sec) {
    json j = section_of(sec, "set");
    allow_keys(j, "set", {"kind", "radius", "center", "center_offset", "lo", "hi", "axis"});
    auto kind = get<std::string>(j, "kind", "ball_complement");
    if (kind == "whole") return whole_manifold();
    if (kind == "ball_complement")
        return ball_complement(g, parse_point(g, j, "center", "center_offset", domain_center(g)), get(j, "radius", 0.5));
    if (kind == "z_band") return z_band(get(j, "lo", 1.0), get(j, "hi", 1.2));
    if (kind == "v_slab") {
        int ax = get(j, "axis", 0);
        double lo = get(j, "lo", 1.0), hi = get(j, "hi", 1.5);
        if (ax < 0 || ax >= g.dim_v()) throw SchemaError("v_slab axis out of range");
        return custom_set([ax, lo, hi](const GroupPoint& x) { return x.v(ax) > lo && x.v(ax) < hi; });
    }
    throw SchemaError("unknown control set kind '" + kind + "'");
}

// ---------- run context ----------

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex(std::uint64_t h) {
    char b[17];
    std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(h));
    return b;
}

std::string num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
}

json jnum(double x) { return std::isfinite(x) ? json(x) : json(num(x)); }

json point_json(const GroupPoint& x) { return coords(x); }

struct Run {
    std::string name;
    json cfg, sec;
    fs::path out;
    double tol_scale = 1;
    json manifest = json::object();
    json failures = json::array();

    double tol(const char* key, double dflt) {
        json t = section_of(sec, "tolerances");
        double v = get(t, key, dflt) * tol_scale;
        manifest["tolerances"][key] = v;
        return v;
    }

    void check(bool ok, const std::string& invariant, const std::string& detail) {
        manifest["checks"].push_back({{"invariant", invariant}, {"passed", ok}, {"detail", detail}});
        if (!ok) failures.push_back({{"invariant", invariant}, {"detail", detail}});
    }

    void csv(const std::string& file, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& rows) {
        std::ofstream f(out / file);
        for (size_t k = 0; k < header.size(); ++k) f << (k ? "," : "") << header[k];
        f << "\n";
        for (auto& r : rows) {
            for (size_t k = 0; k < r.size(); ++k) f << (k ? "," : "") << num(r[k]);
            f << "\n";
        }
        manifest["outputs"].push_back(file);
    }

    void write_json(const std::string& file, const json& j) {
        std::ofstream(out / file) << j.dump(2) << "\n";
        manifest["outputs"].push_back(file);
    }

    // gnuplot script over a CSV with a header row
    void plot(const std::string& file, const std::string& data, const std::string& xlabel, const std::string& ylabel,
              const std::vector<std::pair<int, int>>& cols, bool loglog) {
        std::ofstream f(out / file);
        f << "set datafile separator ','\nset key autotitle columnhead\n";
        f << "set xlabel '" << xlabel << "'\nset ylabel '" << ylabel << "'\n";
        if (loglog) f << "set logscale xy\n";
        f << "set terminal pngcairo size 800,600\nset output '" << fs::path(file).stem().string() << ".png'\nplot ";
        for (size_t k = 0; k < cols.size(); ++k)
            f << (k ? ", " : "") << "'" << data << "' using " << cols[k].first << ":" << cols[k].second
              << " with linespoints";
        f << "\n";
        manifest["outputs"].push_back(file);
    }

    template <class F>
    auto timed(const std::string& label, F&& f) {
        auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            manifest["wall_seconds"][label] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish();
        } else {
            auto r = f();
            finish();
            return r;
        }
    }
};

std::vector<double> eps_list(const json& sec, std::vector<double> dflt) {
    auto e = get(sec, "eps", dflt);
    if (e.empty()) throw SchemaError("eps list is empty");
    return e;
}

std::vector<double> column(const std::vector<ResidualRow>& rows, double ResidualRow::*m) {
    std::vector<double> out;
    for (auto& r : rows) out.push_back(r.*m);
    return out;
}

void residual_csv(Run& R, const std::string& stem, const std::vector<ResidualRow>& rows) {
    std::vector<std::vector<double>> t;
    for (auto& r : rows) t.push_back({r.eps, r.residual, r.slope});
    R.csv(stem + ".csv", {"eps", "residual", "slope"}, t);
    R.plot(stem + ".gp", stem + ".csv", "eps", "residual", {{1, 2}}, true);
}

// ---------- symbol presets ----------

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Symbol calculus_symbol(const HTypeStructure& g) {
    if (g.d != 1 || g.p != 1) throw SchemaError("symbol presets are defined on the three-dimensional group");
    PointFn phi = [](const GroupPoint& x) {
        return std::exp(-0.5 * (x.v.squaredNorm() + x.z.squaredNorm())) * (1.0 + 0.5 * I_ * x.v(0) + 0.3 * x.z(0));
    };
    auto kb = bump_kernel(1.0, vec2(0.7, -0.4), Vec::Constant(1, 0.9));
    PointFn k = [kb](const GroupPoint& u) { return kb(u) * (1.0 + 0.5 * u.v(0)); };
    return separable_symbol(phi, k, 1.0, {-4.5, -4.5, -4.5}, {4.5, 4.5, 4.5});
}

Symbol second_symbol() {
    PointFn phi = [](const GroupPoint& x) {
        return std::exp(-0.5 * (x.v.squaredNorm() + x.z.squaredNorm())) * (1.0 - 0.4 * x.v(1) + 0.2 * I_ * x.z(0));
    };
    return separable_symbol(phi, bump_kernel(1.0, vec2(-0.3, 0.5), Vec::Constant(1, -0.6)), 1.0, {-4.5, -4.5, -4.5},
                            {4.5, 4.5, 4.5});
}

// phi centred at c with Gaussian width w, times a bump kernel
Symbol centred_symbol(const HTypeStructure& g, const GroupPoint& c, double w, const json& kernel) {
    allow_keys(kernel.is_null() ? json::object() : kernel, "kernel", {"radius", "omega", "zeta"});
    json k = kernel.is_null() ? json::object() : kernel;
    double R = get(k, "radius", 1.0);
    Vec om = get_vec(k, "omega", vec2(0.7, -0.4)), ze = get_vec(k, "zeta", Vec::Constant(g.p, 0.9));
    PointFn phi = [c, g, w](const GroupPoint& x) {
        GroupPoint y = group_mul(g, group_inv(c), x);
        return cplx(std::exp(-(y.v.squaredNorm() + y.z.squaredNorm()) / (2 * w * w)));
    };
    return separable_symbol(phi, bump_kernel(R, om, ze), R);
}

// ---------- subcommands ----------

void cmd_validate_structure(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"lambdas", "tolerances"});
    std::vector<std::vector<double>> rows;
    const int n = g.dim_v();
    double orth = 0, skew = 0, anti = 0;
    for (int r = 0; r < g.p; ++r) {
        orth = std::max(orth, (g.P[r].transpose() * g.P[r] - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
        skew = std::max(skew, (g.P[r].transpose() + g.P[r]).cwiseAbs().maxCoeff());
        for (int s = r + 1; s < g.p; ++s)
            anti = std::max(anti, (g.P[r] * g.P[s] + g.P[s] * g.P[r]).cwiseAbs().maxCoeff());
    }
    // J^2 = -|lambda|^2 on sampled frequencies
    double jsq = 0;
    auto lams = get(R.sec, "lambdas", std::vector<std::vector<double>>{});
    if (lams.empty())
        for (auto& u : detail::central_directions(g, 8)) lams.push_back(std::vector<double>(u.data(), u.data() + u.size()));
    for (auto& l : lams) {
        if (static_cast<int>(l.size()) != g.p) throw SchemaError("lambdas need p entries");
        auto cf = adapted_basis(g, Eigen::Map<Vec>(l.data(), l.size()));
        jsq = std::max(jsq, (cf.J * cf.J + cf.norm * cf.norm * Mat::Identity(n, n)).cwiseAbs().maxCoeff() /
                                (cf.norm * cf.norm));
    }
    rows = {{0, orth}, {1, skew}, {2, anti}, {3, jsq}};
    R.csv("invariants.csv", {"invariant", "residual"}, rows);
    R.write_json("structure.json", {{"d", g.d},
                                    {"p", g.p},
                                    {"homogeneous_dim", g.homogeneous_dim()},
                                    {"scale_v", g.scale_v},
                                    {"scale_z", g.scale_z},
                                    {"invariants", {"orthogonality", "skew", "anticommutation", "J_squared"}}});
    double t = R.tol("invariant", 1e-12);
    R.check(std::max({orth, skew, anti, jsq}) < t, "H-type invariants",
            "max residual " + num(std::max({orth, skew, anti, jsq})));
}

LambdaGrid shell_from(const HTypeStructure& g, const json& sec, int radial) {
    return shell_grid(g, get(sec, "lambda_min", 0.3), get(sec, "lambda_max", 6.0), radial);
}

void cmd_gft_roundtrip(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"lambda_min", "lambda_max", "radial", "levels", "n_v", "n_z", "tolerances"});
    auto G = shell_from(g, R.sec, get(R.sec, "radial", 64));
    auto s = fock_space(g.d, get(R.sec, "levels", 14));
    std::vector<std::vector<double>> rows;
    double worst = 0;
    R.timed("roundtrip", [&] {
        auto refs = reference_gaussians(g, G, 1.0, get(R.sec, "n_v", 64), get(R.sec, "n_z", 96));
        for (size_t i = 0; i < refs.size(); ++i) {
            GridField out = same_geometry(refs[i]);
            inverse_to_grid(g, forward(g, refs[i], G, s), out);
            double err = 0;
            for (size_t k = 0; k < out.size(); ++k) err = std::max(err, std::abs(out.values[k] - refs[i].values[k]));
            double rel = std::sqrt(diff_norm2(out, refs[i]) / norm2(refs[i]));
            rows.push_back({static_cast<double>(i), refs[i].carrier(0), err, rel});
            worst = std::max(worst, err);
        }
    });
    R.csv("roundtrip.csv", {"function", "kappa", "max_abs_error", "rel_l2_error"}, rows);
    double t = R.tol("max_abs_error", 1e-4);
    R.check(worst < t, "pointwise round trip", "max error " + num(worst));
}

void cmd_plancherel(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"lambda_min", "lambda_max", "radial", "levels", "n_v", "n_z", "tolerances"});
    auto radial = get(R.sec, "radial", std::vector<int>{16, 32});
    auto levels = get(R.sec, "levels", std::vector<int>{6, 12});
    auto nv = get(R.sec, "n_v", std::vector<int>{36, 64});
    auto nz = get(R.sec, "n_z", std::vector<int>{48, 96});
    if (radial.size() != levels.size() || radial.size() != nv.size() || radial.size() != nz.size() || radial.empty())
        throw SchemaError("radial, levels, n_v, n_z must be lists of one length");
    // the reference family is pinned by the finest grid so every level sees the same functions
    auto Gf = shell_from(g, R.sec, radial.back());
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> res(radial.size());
    R.timed("plancherel", [&] {
        for (size_t k = 0; k < radial.size(); ++k) {
            auto G = shell_from(g, R.sec, radial[k]);
            auto refs = reference_gaussians(g, Gf, 1.0, nv[k], nz[k]);
            for (size_t i = 0; i < refs.size(); ++i) {
                double r = plancherel_residual(g, refs[i], G, fock_space(g.d, levels[k]));
                res[k].push_back(r);
                rows.push_back({static_cast<double>(k), static_cast<double>(radial[k]), static_cast<double>(i), r});
            }
        }
    });
    R.csv("plancherel.csv", {"level", "radial_nodes", "function", "residual"}, rows);
    // c0 is cached per structure and grid under HTLAB_CACHE_DIR
    double c0 = 0;
    json key = {{"structure", R.cfg.at("structure")}, {"radial", radial.back()}, {"levels", levels.back()},
                {"lambda_min", get(R.sec, "lambda_min", 0.3)}, {"lambda_max", get(R.sec, "lambda_max", 6.0)}};
    fs::path cache;
    if (const char* dir = std::getenv("HTLAB_CACHE_DIR")) cache = fs::path(dir) / ("c0-" + hex(fnv1a(key.dump())) + ".json");
    if (!cache.empty() && fs::exists(cache)) {
        c0 = json::parse(std::ifstream(cache)).at("c0").get<double>();
        R.manifest["cache"] = cache.string();
    } else {
        c0 = R.timed("calibrate_c0", [&] {
            return calibrate_c0(g, fock_space(g.d, levels.back()), Gf, reference_gaussians(g, Gf));
        });
        if (!cache.empty()) {
            fs::create_directories(cache.parent_path());
            std::ofstream(cache) << json{{"c0", c0}, {"key", key}}.dump(2);
        }
    }
    double c_closed = closed_form_c0(g);
    R.write_json("c0.json", {{"calibrated", c0}, {"closed_form", c_closed}, {"ratio", c0 / c_closed}});
    double tr = R.tol("residual", 1e-3), tc = R.tol("c0_relative", 0.01);
    double worst = *std::max_element(res.back().begin(), res.back().end());
    R.check(worst < tr, "Plancherel identity", "finest residual " + num(worst));
    if (res.size() > 1)
        for (size_t i = 0; i < res.back().size(); ++i)
            R.check(res.back()[i] < res[res.size() - 2][i], "Plancherel residual decreases under refinement",
                    "function " + std::to_string(i) + ": " + num(res[res.size() - 2][i]) + " -> " + num(res.back()[i]));
    R.check(std::abs(c0 / c_closed - 1) < tc, "c0 calibration", "ratio " + num(c0 / c_closed));
}

void cmd_symbolic_residual(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"eps", "checks", "adjoint", "composition", "locality", "tolerances"});
    auto eps = eps_list(R.sec, {0.2, 0.1, 0.05, 0.025});
    auto checks = get(R.sec, "checks", std::vector<std::string>{"adjoint", "composition", "locality"});
    auto fields = standard_test_fields(g, identity(g), 1.0);
    Symbol s = calculus_symbol(g);
    for (auto& c : checks) {
        json o = section_of(R.sec, c.c_str());
        if (c == "adjoint") {
            allow_keys(o, "adjoint", {"n_u", "n_x"});
            auto rows = R.timed(c, [&] {
                return adjoint_residual(g, s, eps, fields, {get(o, "n_u", 10), get(o, "n_x", 10), true});
            });
            residual_csv(R, "residual_adjoint", rows);
            double t = R.tol("adjoint_slope", 1.7);
            R.check(loglog_slope(eps, column(rows, &ResidualRow::residual)) >= t, "adjoint calculus second order",
                    "slope " + num(loglog_slope(eps, column(rows, &ResidualRow::residual))));
        } else if (c == "composition") {
            allow_keys(o, "composition", {"n_u", "n_x"});
            auto rows = R.timed(c, [&] {
                return composition_residual(g, s, second_symbol(), eps, fields, {get(o, "n_u", 6), get(o, "n_x", 10), true});
            });
            residual_csv(R, "residual_composition", rows);
            double t = R.tol("composition_slope", 1.7);
            double sl = loglog_slope(eps, column(rows, &ResidualRow::residual));
            R.check(sl >= t, "composition calculus second order", "slope " + num(sl));
        } else if (c == "locality") {
            allow_keys(o, "locality", {"n_x", "polar_radius"});
            PointFn phi = [](const GroupPoint& x) {
                return bump(x.v(0) * x.v(0) / 0.36) * bump(x.v(1) * x.v(1) / 0.36) * std::exp(-0.5 * x.z.squaredNorm());
            };
            Symbol ls = separable_symbol(phi, gaussian_kernel(1.0, vec2(0.7, -0.4), Vec::Constant(1, 0.9)), 7.0,
                                         {-0.6, -0.6, -4}, {0.6, 0.6, 4});
            VCutoff chi{{-0.6, -0.6}, {0.6, 0.6}, 0.2, 0.5};
            auto f1 = fields;
            f1.resize(1);
            auto rows = R.timed(c, [&] {
                PointRule ur = polar_rule(g, get(o, "polar_radius", 12.0), 0.5, 8, 64, 6, 12);
                return locality_residual(g, ls, chi, eps, f1, ur, get(o, "n_x", 8));
            });
            residual_csv(R, "residual_locality", rows);
            double t = R.tol("locality_slope", 4.0);
            double sl = loglog_slope(eps, column(rows, &ResidualRow::residual));
            R.check(sl >= t, "locality residual decay", "slope " + num(sl));
        } else {
            throw SchemaError("unknown residual check '" + c + "'");
        }
    }
}

void cmd_wavepacket_norms(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"eps", "packet", "tolerances"});
    auto eps = eps_list(R.sec, {0.08, 0.04, 0.02, 0.01});
    auto pc = parse_packet(g, R.sec, gaussian_in_box(g, 1.0, 0.5, 2.5, 3.0), eps.front());
    // second packet: harmonic mixed with level 1, profile rotated by i
    WavePacketSpec B = pc.spec;
    auto hs = harmonic_space(g, pc.spec);
    auto hs1 = fock_space(g.d, std::max(hs.N, 1));
    WavePacketSpec A = pc.spec;
    A.phi1 = embed(hs, pc.spec.phi1, hs1);
    A.phi2 = embed(hs, pc.spec.phi2, hs1);
    std::vector<int> e1(g.d, 0);
    e1[0] = 1;
    B.phi1 = (A.phi1 + hermite_vector(hs1, e1)) / std::sqrt(2.0);
    B.phi2 = A.phi2;
    B.a = scaled_profile(pc.spec.a, I_);
    std::vector<std::vector<double>> rows;
    std::vector<double> nerr, oerr;
    R.timed("norms", [&] {
        for (double e : eps) {
            A.eps = B.eps = e;
            double n = norm2(build(g, A, pc.grid)), nl = norm_limit(g, A);
            cplx o = overlap(g, A, B, pc.grid), ol = overlap_limit(g, A, B);
            nerr.push_back(std::abs(n / nl - 1));
            oerr.push_back(std::abs(o - ol) / std::abs(ol));
            rows.push_back({e, n, nl, nerr.back(), o.real(), o.imag(), ol.real(), ol.imag(), oerr.back()});
        }
    });
    R.csv("norms.csv", {"eps", "norm", "norm_limit", "norm_rel_error", "overlap_re", "overlap_im", "limit_re",
                        "limit_im", "overlap_rel_error"},
          rows);
    R.plot("norms.gp", "norms.csv", "eps", "relative error", {{1, 4}, {1, 9}}, true);
    double te = R.tol("rel_error", 0.03), ts = R.tol("slope", 0.45);
    R.check(nerr.back() < te, "norm limit", "relative error " + num(nerr.back()) + " at eps " + num(eps.back()));
    R.check(oerr.back() < te, "overlap limit", "relative error " + num(oerr.back()) + " at eps " + num(eps.back()));
    if (eps.size() >= 2) {
        double sl = loglog_slope(eps, nerr);
        R.check(sl >= ts, "norm convergence rate", "slope " + num(sl));
    }
}

void cmd_symbol_action(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"eps", "packet", "n_u", "extra_levels", "tolerances"});
    auto eps = eps_list(R.sec, {0.04, 0.02, 0.01});
    auto pc = parse_packet(g, R.sec, plateau(g, 2.5, 3.0, 0.5), eps.front());
    GroupPoint c = pc.spec.x0;
    PointFn phi = [c, g](const GroupPoint& x) {
        GroupPoint y = group_mul(g, group_inv(c), x);
        return std::exp(-0.5 * (y.v.squaredNorm() + y.z.squaredNorm())) * (1.0 + 0.5 * I_ * y.v(0) + 0.3 * y.z(0));
    };
    auto kb = bump_kernel(1.0, vec2(0.7, -0.4), Vec::Constant(g.p, 0.9));
    PointFn k = [kb](const GroupPoint& u) { return kb(u) * (1.0 + 0.5 * u.v(0)); };
    SymbolActionOptions o{pc.grid, get(R.sec, "extra_levels", 10), get(R.sec, "n_u", 24)};
    auto rows = R.timed("symbol_action",
                        [&] { return symbol_action_residual(g, separable_symbol(phi, k, 1.0), pc.spec, eps, o); });
    residual_csv(R, "symbol_action", rows);
    double sl = loglog_slope(eps, column(rows, &ResidualRow::residual));
    R.check(sl >= R.tol("slope", 0.45), "symbol action first order", "slope " + num(sl));
}

void field_csv(Run& R, const std::string& file, const GridField& f) {
    std::vector<std::vector<double>> rows;
    rows.reserve(f.size());
    for (size_t i = 0; i < f.size(); ++i) rows.push_back({static_cast<double>(i), f.values[i].real(), f.values[i].imag()});
    R.csv(file, {"index", "re", "im"}, rows);
}

void cmd_propagate(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"packet", "t", "steps", "potential", "extra_levels", "tolerances"});
    auto pc = parse_packet(g, R.sec, gaussian_in_box(g, 0.5, 0.5), 0.04);
    GridField u0 = build(g, pc.spec, pc.grid);
    json pot = section_of(R.sec, "potential");
    allow_keys(pot, "potential", {"kind", "amplitude"});
    auto kind = get<std::string>(pot, "kind", "zero");
    double amp = get(pot, "amplitude", 0.0);
    GridField V = same_geometry(u0);
    for (size_t i = 0; i < V.size(); ++i) {
        GroupPoint y = V.local_point(i);
        if (kind == "zero")
            V.values[i] = 0;
        else if (kind == "constant")
            V.values[i] = amp;
        else if (kind == "quadratic")
            V.values[i] = amp * y.v.squaredNorm() / (V.lo[0] * V.lo[0]);
        else
            throw SchemaError("unknown potential kind '" + kind + "'");
    }
    const double t = get(R.sec, "t", 0.1);
    const int steps = get(R.sec, "steps", 8);
    FockSpace hs = harmonic_space(g, pc.spec);
    auto space = fock_space(g.d, top_level(hs, pc.spec.phi1) + get(R.sec, "extra_levels", 12));
    GridField u = R.timed("propagate", [&] { return split_step(g, u0, V, t, steps, packet_band(g, u0), space); });
    field_csv(R, "input.csv", u0);
    field_csv(R, "output.csv", u);
    double change = std::sqrt(diff_norm2(u, u0) / norm2(u0)), ratio = norm2(u) / norm2(u0);
    R.write_json("summary.json", {{"t", t}, {"steps", steps}, {"rel_change", change}, {"norm_ratio", ratio}});
    R.check(std::abs(ratio - 1) < R.tol("norm", 1e-6), "unitarity", "norm ratio " + num(ratio));
}

void cmd_wavepacket_track(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"packet", "levels", "signs", "t_end", "samples", "extra_levels", "tolerances"});
    auto levels = get(R.sec, "levels", std::vector<int>{0, 1, 2});
    auto signs = get(R.sec, "signs", std::vector<double>{1.0, -1.0});
    const double T = get(R.sec, "t_end", 2.0);
    const int m = get(R.sec, "samples", 41);
    if (g.p != 1) throw SchemaError("wavepacket-track regresses a single central coordinate");
    std::vector<double> ts;
    for (int j = 0; j < m; ++j) ts.push_back(T * j / (m - 1));
    const double tol = R.tol("speed_rel_error", 0.02);
    std::vector<std::vector<double>> speeds;
    for (int n : levels)
        for (double sg : signs) {
            json sec = R.sec;
            sec["packet"]["level"] = n;
            auto pc = parse_packet(g, sec, gaussian_in_box(g, 0.5, 0.5), 0.02);
            pc.spec.lambda0 *= sg / std::abs(pc.spec.lambda0(0));
            std::string tag = std::to_string(n) + (sg > 0 ? "_plus" : "_minus");
            auto snaps = R.timed("track_" + tag, [&] {
                GridField u0 = build(g, pc.spec, pc.grid);
                Propagator P(g, u0, packet_band(g, u0), fock_space(g.d, n + get(R.sec, "extra_levels", 12)));
                return track(g, P, ts);
            });
            std::vector<std::vector<double>> rows;
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (auto& s : snaps) {
                double z = s.center.z(0);
                rows.push_back({s.t, z, norm2(s.u)});
                sx += s.t, sy += z, sxx += s.t * s.t, sxy += s.t * z;
            }
            R.csv("track_" + tag + ".csv", {"t", "z_center", "mass"}, rows);
            R.plot("track_" + tag + ".gp", "track_" + tag + ".csv", "t", "z centre", {{1, 2}}, false);
            double speed = (m * sxy - sx * sy) / (m * sxx - sx * sx), want = sg * (n + 0.5 * g.d);
            double err = std::abs(speed / want - 1);
            speeds.push_back({static_cast<double>(n), sg, speed, want, err});
            R.check(err < tol, "quantized transport speed", "level " + std::to_string(n) + " sign " + num(sg) +
                                                                ": speed " + num(speed) + " vs " + num(want));
        }
    R.csv("speeds.csv", {"level", "sign", "speed", "expected", "rel_error"}, speeds);
}

void cmd_profile_evolve(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"packet", "eps", "t", "profile_grid", "extra_levels", "tolerances"});
    auto eps = eps_list(R.sec, {0.04, 0.02, 0.01});
    auto pc = parse_packet(g, R.sec, gaussian_in_box(g, 1.0, 0.5, 3.5, 4.0), eps.front(), {0.0, 0.0, -0.25});
    const double t = get(R.sec, "t", 1.0);
    json pg = section_of(R.sec, "profile_grid");
    allow_keys(pg, "profile_grid", {"n_v", "n_z", "levels"});
    GridField geom = profile_geometry(g, pc.spec.a, get(pg, "n_v", 64), get(pg, "n_z", 24));
    auto band = profile_band(g, geom);
    auto A0 = R.timed("profile_transform",
                      [&] { return profile_transform(g, pc.spec.a, geom, band, fock_space(g.d, get(pg, "levels", 40))); });
    auto At = profile_evolve(g, A0, pc.spec.lambda0, t);
    double drift = std::abs(hs_sum(At) / hs_sum(A0) - 1);
    std::vector<std::vector<double>> rows;
    std::vector<double> err;
    for (double e : eps) {
        pc.spec.eps = e;
        auto r = R.timed("eps_" + num(e), [&] {
            GridField u0 = build(g, pc.spec, pc.grid);
            FockSpace hs = harmonic_space(g, pc.spec);
            Propagator P(g, u0, packet_band(g, u0),
                         fock_space(g.d, top_level(hs, pc.spec.phi1) + get(R.sec, "extra_levels", 12)));
            GridField ap = approx_solution(g, pc.spec, A0, t, pc.grid);
            GridField ex = P.at(t, ap);
            // same centre, profile frozen at t = 0
            WavePacketSpec fr = pc.spec;
            fr.x0 = flow_phi(g, 0, t, pc.spec.x0, pc.spec.lambda0);
            GridField fz = same_geometry(ap);
            build_on(g, fr, fz);
            double n = norm2(ex);
            return std::vector<double>{e, std::sqrt(diff_norm2(ex, ap) / n), std::sqrt(diff_norm2(ex, fz) / n)};
        });
        err.push_back(r[1]);
        rows.push_back(r);
    }
    R.csv("profile_fidelity.csv", {"eps", "approx_rel_error", "frozen_profile_rel_error"}, rows);
    R.plot("profile_fidelity.gp", "profile_fidelity.csv", "eps", "relative error", {{1, 2}, {1, 3}}, true);
    R.write_json("profile_mass.json", {{"t", t}, {"relative_drift", drift}});
    R.check(drift < R.tol("mass", 1e-6), "profile mass conservation", "relative drift " + num(drift));
    if (eps.size() >= 2) {
        double sl = loglog_slope(eps, err);
        R.check(sl >= R.tol("slope", 0.45), "approximate solution converges", "slope " + num(sl));
    }
}

RaySamples parse_rays(const json& sec) {
    RaySamples r;
    r.n_v = get(sec, "n_v", r.n_v);
    r.n_z = get(sec, "n_z", r.n_z);
    r.margin = get(sec, "margin", r.margin);
    r.directions = get(sec, "directions", r.directions);
    return r;
}

json ray_json(const HTypeStructure& g, const RayWitness& w, double T) {
    json trace = json::array();
    const double horizon = std::isfinite(w.hit_time) ? w.hit_time : T;
    for (int k = 0; k <= 10; ++k)
        trace.push_back(point_json(lattice_reduce(g, flow_phi(g, 0, horizon * k / 10, w.x, w.direction)).rep));
    return {{"x", point_json(w.x)},
            {"direction", std::vector<double>(w.direction.data(), w.direction.data() + w.direction.size())},
            {"hit_time", jnum(w.hit_time)},
            {"trace", trace}};
}

const RayWitness* slowest(const std::vector<RayWitness>& rays) {
    const RayWitness* best = nullptr;
    for (auto& w : rays)
        if (!best || w.hit_time > best->hit_time) best = &w;
    return best;
}

void cmd_gcc_time(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"radii", "center", "center_offset", "t_max", "n_v", "n_z", "margin", "directions",
                               "expected", "tolerances"});
    auto radii = get(R.sec, "radii", std::vector<double>{0.5});
    const double T = get(R.sec, "t_max", 10.0);
    RaySamples smp = parse_rays(R.sec);
    GroupPoint c = parse_point(g, R.sec, "center", "center_offset", domain_center(g));
    std::vector<std::vector<double>> rows;
    json wit = json::array();
    for (double r : radii) {
        auto U = ball_complement(g, c, r);
        auto iv = R.timed("r_" + num(r), [&] { return t_gcc_interval(g, U, T, smp); });
        rows.push_back({r, iv.lower, iv.upper});
        R.check(iv.lower <= iv.upper, "open/closed ordering", "r " + num(r));
        auto rays = slowest_vertical_rays(g, U.inflated(-smp.margin), T, smp);
        if (auto w = slowest(rays)) wit.push_back({{"radius", r}, {"ray", ray_json(g, *w, T)}});
    }
    R.csv("gcc_time.csv", {"r", "t_gcc_lower", "t_gcc_upper"}, rows);
    R.plot("gcc_time.gp", "gcc_time.csv", "r", "t_gcc", {{1, 2}, {1, 3}}, false);
    R.write_json("witnesses.json", wit);
    if (R.sec.contains("expected")) {
        auto ex = get(R.sec, "expected", std::vector<double>{});
        if (ex.size() != radii.size()) throw SchemaError("expected needs one value per radius");
        double t = R.tol("bracket", 0.05);
        for (size_t k = 0; k < ex.size(); ++k)
            R.check(rows[k][1] - t <= ex[k] && ex[k] <= rows[k][2] + t, "t_gcc brackets the expected time",
                    "r " + num(radii[k]) + ": [" + num(rows[k][1]) + ", " + num(rows[k][2]) + "] vs " + num(ex[k]));
    }
}

void cmd_assumption_a(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"set", "n", "directions", "horizon", "ds", "expect", "tolerances"});
    auto U = parse_set(g, R.sec);
    HorizontalSamples hs;
    hs.n = get(R.sec, "n", hs.n);
    hs.directions = get(R.sec, "directions", hs.directions);
    hs.horizon = get(R.sec, "horizon", hs.horizon);
    hs.ds = get(R.sec, "ds", hs.ds);
    auto r = R.timed("assumption_a", [&] { return check_assumption_A(g, U, hs); });
    json wit = json::array();
    for (auto& w : r.witnesses) {
        json trace = json::array();
        for (int k = -5; k <= 5; ++k)
            trace.push_back(point_json(lattice_reduce(g, horizontal_flow_right(g, hs.horizon * k / 5, w.omega, w.x)).rep));
        wit.push_back({{"x", point_json(w.x)},
                       {"omega", std::vector<double>(w.omega.data(), w.omega.data() + w.omega.size())},
                       {"trace", trace}});
    }
    R.write_json("assumption_a.json", {{"holds_up_to_horizon", r.holds_up_to_horizon},
                                       {"horizon", hs.horizon},
                                       {"note", "finite-horizon sampling, not a proof"},
                                       {"witnesses", wit}});
    if (R.sec.contains("expect"))
        R.check(r.holds_up_to_horizon == get(R.sec, "expect", true), "assumption A outcome",
                std::string("holds up to horizon: ") + (r.holds_up_to_horizon ? "true" : "false"));
}

// packet on the slowest ray, its [0, T] segment centred in the ray's stay outside U
WavePacketSpec witness_packet(const HTypeStructure& g, const ControlSet& U, double T, const RaySamples& smp,
                              WavePacketSpec base) {
    auto rays = slowest_vertical_rays(g, U.inflated(-smp.margin), 1e3, smp);
    const RayWitness* w = slowest(rays);
    if (!w) throw NonConvergent("no vertical ray avoids the control set");
    double shift = std::isfinite(w->hit_time) ? 0.5 * (w->hit_time - T) : 0.0;
    if (shift < 0) throw NonConvergent("witness ray leaves the closed set before T");
    base.lambda0 = w->direction * base.lambda0.norm();
    base.x0 = flow_phi(g, 0, shift, w->x, w->direction);
    return base;
}

void cmd_observability_scan(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"set", "T", "eps", "packet", "witness", "dt", "n_v", "n_z", "margin", "expect",
                               "extra_levels", "tolerances"});
    auto U = parse_set(g, R.sec);
    auto Ts = get(R.sec, "T", std::vector<double>{1.0, 4.0});
    auto eps = eps_list(R.sec, {0.08, 0.04, 0.02});
    auto pc = parse_packet(g, R.sec, gaussian_in_box(g, 0.5, 0.5), eps.front());
    RaySamples smp = parse_rays(R.sec);
    auto iv = R.timed("t_gcc", [&] { return t_gcc_interval(g, U, 1e3, smp); });
    if (get(R.sec, "witness", true)) {
        double Tw = *std::min_element(Ts.begin(), Ts.end());
        if (Tw < iv.upper) pc.spec = witness_packet(g, U, Tw, smp, pc.spec);
    }
    auto fam = [&](double e) {
        WavePacketSpec s = pc.spec;
        s.eps = e;
        return s;
    };
    PacketRunOptions opt{pc.grid, get(R.sec, "extra_levels", 12), get(R.sec, "dt", 0.05)};
    auto rows = R.timed("scan", [&] { return observability_scan(g, fam, U, Ts, eps, opt); });
    std::vector<std::vector<double>> t;
    for (auto& r : rows) t.push_back({r.T, r.eps, r.mass0, r.energy, r.ratio});
    R.csv("observability.csv", {"T", "eps", "mass0", "energy", "ratio"}, t);
    R.plot("observability.gp", "observability.csv", "eps", "ratio", {{2, 5}}, true);
    R.write_json("scan.json", {{"t_gcc_lower", jnum(iv.lower)},
                               {"t_gcc_upper", jnum(iv.upper)},
                               {"x0", point_json(pc.spec.x0)},
                               {"lambda0", std::vector<double>(pc.spec.lambda0.data(),
                                                               pc.spec.lambda0.data() + pc.spec.lambda0.size())}});
    json ex = section_of(R.sec, "expect");
    allow_keys(ex, "expect", {"growth_below", "band_above"});
    for (double T : Ts) {
        std::vector<double> r;
        for (auto& row : rows)
            if (row.T == T) r.push_back(row.ratio);
        if (T < iv.lower && ex.contains("growth_below")) {
            double want = get(ex, "growth_below", 10.0) / R.tol_scale;
            R.check(r.back() >= want * r.front(), "observability fails below t_gcc",
                    "T " + num(T) + ": ratio " + num(r.front()) + " -> " + num(r.back()));
        }
        if (T > iv.upper && ex.contains("band_above")) {
            double band = get(ex, "band_above", 2.0) * R.tol_scale;
            auto [lo, hi] = std::minmax_element(r.begin(), r.end());
            R.check(std::isfinite(*hi) && *hi <= band * *lo, "observability ratio bounded above t_gcc",
                    "T " + num(T) + ": ratios in [" + num(*lo) + ", " + num(*hi) + "]");
        }
    }
}

void cmd_measure_estimate(Run& R, const HTypeStructure& g) {
    allow_keys(R.sec, R.name, {"eps", "packet", "symbol", "theta", "transport", "powers", "tolerances"});
    auto eps = eps_list(R.sec, {0.08, 0.04, 0.02, 0.01});
    auto pc = parse_packet(g, R.sec, gaussian_in_box(g, 0.5, 0.5), eps.front(), {0.0, 0.0, -0.25});
    json sj = section_of(R.sec, "symbol");
    allow_keys(sj, "symbol", {"center", "center_offset", "width", "kernel"});
    GroupPoint sc = parse_point(g, sj, "center", "center_offset", pc.spec.x0);
    const double width = get(sj, "width", 0.3);
    json kj = sj.contains("kernel") ? sj.at("kernel") : json();
    Symbol sigma = centred_symbol(g, sc, width, kj);
    json th = section_of(R.sec, "theta");
    allow_keys(th, "theta", {"t_end", "nodes"});
    auto tw = simpson_weights([](double) { return 1.0; }, get(th, "t_end", 0.5), get(th, "nodes", 4));
    MeasureOptions opt;
    opt.run.grid = pc.grid;
    opt.powers = get(R.sec, "powers", opt.powers);
    auto fam = [&](double e) {
        WavePacketSpec s = pc.spec;
        s.eps = e;
        return s;
    };
    std::vector<double> vals;
    std::vector<std::vector<double>> rows;
    R.timed("ell", [&] {
        for (double e : eps) {
            cplx l = ell_eps(g, fam(e), sigma, tw, opt);
            vals.push_back(l.real());
            rows.push_back({e, l.real(), l.imag()});
        }
    });
    R.csv("ell.csv", {"eps", "ell_re", "ell_im"}, rows);
    R.plot("ell.gp", "ell.csv", "eps", "ell", {{1, 2}}, false);
    auto est = extrapolate_measure("sigma", eps, vals, opt.powers);
    double pred = packet_measure_limit(g, fam(eps.back()), sigma, tw).real();
    double rel = std::abs(est.limit / pred - 1);
    json out = {{"limit", est.limit}, {"prediction", pred}, {"rel_error", rel}, {"fit_residual", est.fit_residual},
                {"powers", est.powers}, {"coeffs", est.coeffs}};
    R.check(rel < R.tol("prediction", 0.05), "measure matches the packet prediction",
            "extrapolated " + num(est.limit) + " vs " + num(pred));
    json tr = section_of(R.sec, "transport");
    allow_keys(tr, "transport", {"t", "eps"});
    if (get(tr, "t", 1.0) > 0) {
        auto centred = [&](const GroupPoint& c) { return centred_symbol(g, c, width, kj); };
        auto tc = R.timed("transport", [&] {
            return transport_check(g, fam(get(tr, "eps", eps.back())), centred, get(tr, "t", 1.0), opt);
        });
        out["transport"] = {{"at_zero", tc.at_zero.real()}, {"at_t", tc.at_t.real()}, {"rel", tc.rel}};
        R.check(tc.rel < R.tol("transport", 0.05), "measure transported by the flow", "relative change " + num(tc.rel));
    }
    R.write_json("estimate.json", out);
}

using Handler = void (*)(Run&, const HTypeStructure&);

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"validate-structure", cmd_validate_structure}, {"gft-roundtrip", cmd_gft_roundtrip},
        {"plancherel", cmd_plancherel},                 {"symbolic-residual", cmd_symbolic_residual},
        {"wavepacket-norms", cmd_wavepacket_norms},     {"symbol-action", cmd_symbol_action},
        {"propagate", cmd_propagate},                   {"wavepacket-track", cmd_wavepacket_track},
        {"profile-evolve", cmd_profile_evolve},         {"gcc-time", cmd_gcc_time},
        {"assumption-a", cmd_assumption_a},             {"observability-scan", cmd_observability_scan},
        {"measure-estimate", cmd_measure_estimate}};
    return h;
}

void report_failure(const fs::path& out, const std::string& cmd, const json& failures) {
    json rep = {{"subcommand", cmd}, {"violated", failures}};
    if (!out.empty()) {
        std::error_code ec;
        fs::create_directories(out, ec);
        std::ofstream(out / "failure.json") << rep.dump(2) << "\n";
    }
    std::cerr << rep.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"htlab experiment runner"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config, out = "out";
    int workers = 0;
    double tol_scale = 1.0;
    app.add_option("--config", config, "JSON config file")->required();
    app.add_option("--out", out, "output directory");
    app.add_option("--workers", workers, "OpenMP threads (0 = runtime default)");
    app.add_option("--tolerance-scale", tol_scale, "multiplies every pass tolerance")->check(CLI::PositiveNumber);
    for (auto& [name, h] : handlers()) app.add_subcommand(name, "");
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (workers > 0) omp_set_num_threads(workers);

    Run R;
    R.name = cmd;
    R.out = out;
    R.tol_scale = tol_scale;
    try {
        std::ifstream in(config);
        if (!in) throw SchemaError("cannot read config '" + config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        if (ss.str().find_first_not_of(" \t\r\n") == std::string::npos) throw SchemaError("config is empty");
        try {
            R.cfg = json::parse(ss.str());
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!R.cfg.is_object() || R.cfg.empty()) throw SchemaError("config must be a non-empty object");
        for (auto it = R.cfg.begin(); it != R.cfg.end(); ++it)
            if (it.key() != "structure" && !handlers().count(it.key()))
                throw SchemaError("unknown section '" + it.key() + "'");
        HTypeStructure g = parse_structure(R.cfg);
        R.sec = section_of(R.cfg, cmd.c_str());
        fs::create_directories(R.out);
        auto t0 = std::chrono::steady_clock::now();
        handlers().at(cmd)(R, g);
        R.manifest["wall_seconds"]["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        R.failures.push_back({{"invariant", e.kind()}, {"detail", e.what()}});
    }
    R.manifest["subcommand"] = cmd;
    R.manifest["config_hash"] = hex(fnv1a(R.cfg.dump()));
    R.manifest["tolerance_scale"] = tol_scale;
    R.manifest["workers"] = workers > 0 ? workers : omp_get_max_threads();
    R.manifest["versions"] = {{"htlab", HTLAB_VERSION},
                              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                            "." + std::to_string(EIGEN_MINOR_VERSION)},
                              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR)},
                              {"cli11", CLI11_VERSION},
                              {"compiler", __VERSION__}};
    R.manifest["passed"] = R.failures.empty();
    std::error_code ec;
    fs::create_directories(R.out, ec);
    std::ofstream(R.out / "manifest.json") << R.manifest.dump(2) << "\n";
    if (!R.failures.empty()) {
        report_failure(R.out, cmd, R.failures);
        return 1;
    }
    return 0;
}
