// Acceptance runner: `htlab_acceptance k` checks criterion k, prints one PASS/FAIL line, exits nonzero on failure.
// Sub-results are printed above the verdict so a failure carries its numbers.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>

#include "htlab/control_obs.hpp"
#include "test_util.hpp"

using namespace htlab;

namespace {

struct Verdict {
    int id;
    bool ok = true;
    std::string why;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void check(bool pass, const char* what, double value, double bound) {
        std::printf("  [%s] %s: %.6g (bound %.6g)\n", pass ? "ok" : "FAIL", what, value, bound);
        if (!pass) {
            ok = false;
            if (!why.empty()) why += "; ";
            why += what;
        }
    }

    void info(const char* what, double value) { std::printf("  %s: %.6g\n", what, value); }

    int finish(double limit_minutes) {
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        check(sec < 60 * limit_minutes, "runtime seconds", sec, 60 * limit_minutes);
        std::printf("criterion %d %s%s%s\n", id, ok ? "PASS" : "FAIL", ok ? "" : ": ", why.c_str());
        std::fflush(stdout);
        return ok ? 0 : 1;
    }
};

Vec vec(std::initializer_list<double> xs) {
    Vec v(xs.size());
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

GroupPoint domain_center(const HTypeStructure& g) { return make_point(g, {g.scale_v / 2, g.scale_v / 2, g.scale_z / 2}); }

WavePacketSpec packet(const HTypeStructure& g, const GroupPoint& x0, int level, const Profile& a, double eps) {
    WavePacketSpec s;
    s.x0 = x0;
    s.lambda0 = Vec::Constant(1, 1.0);
    s.phi1 = hermite_vector(fock_space(1, level), {level});
    s.phi2 = s.phi1;
    s.a = a;
    s.eps = eps;
    return s;
}

double max_abs(const CMat& A) { return A.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------

int criterion1() {
    Verdict v{1};
    for (auto g : {heisenberg(1), heisenberg(2), testutil::quaternion_structure()}) {
        g = validate_structure(g.d, g.p, g.P, g.scale_v, g.scale_z);
        const int n = g.dim_v();
        double worst = 0;
        for (int r = 0; r < g.p; ++r) {
            worst = std::max(worst, (g.P[r].transpose() * g.P[r] - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
            worst = std::max(worst, (g.P[r].transpose() + g.P[r]).cwiseAbs().maxCoeff());
            for (int s = r + 1; s < g.p; ++s)
                worst = std::max(worst, (g.P[r] * g.P[s] + g.P[s] * g.P[r]).cwiseAbs().maxCoeff());
        }
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        for (int t = 0; t < 20; ++t) {
            Vec lam(g.p);
            for (int r = 0; r < g.p; ++r) lam(r) = nd(rng);
            auto cf = adapted_basis(g, lam);
            worst = std::max(worst, (cf.J * cf.J + cf.norm * cf.norm * Mat::Identity(n, n)).cwiseAbs().maxCoeff() /
                                        (cf.norm * cf.norm));
        }
        v.check(worst < 1e-12, ("structure invariants, d=" + std::to_string(g.d) + " p=" + std::to_string(g.p)).c_str(),
                worst, 1e-12);
    }

    auto g = heisenberg(1);
    auto s = fock_space(1, 12);
    const int n4 = s.interior(4);
    std::mt19937_64 rng(12);
    double unit = 0, inv = 0, weyl = 0, hom = 0;
    for (int t = 0; t < 20; ++t) {
        auto cf = adapted_basis(g, Vec::Constant(1, t % 2 ? 1.0 : -0.6));
        auto x = testutil::random_point(g, rng, 0.15), y = testutil::random_point(g, rng, 0.15);
        CMat M = pi_matrix(cf, x, s);
        CMat G = M.adjoint() * M;
        unit = std::max(unit, block_norm(G - CMat::Identity(s.dim, s.dim), n4));
        inv = std::max(inv, block_norm(pi_matrix(cf, group_inv(x), s) - M.adjoint(), n4));
        hom = std::max(hom, homomorphism_residual(g, cf, x, y, s));
        // covariance of the translations: A B A* B* is the central character
        double p = 0.15 * (t % 3 - 1), q = 0.12;
        PQZ a{Vec::Constant(1, p), Vec::Zero(1), Vec::Zero(1)}, b{Vec::Zero(1), Vec::Constant(1, q), Vec::Zero(1)};
        CMat A = pi_matrix(cf, from_pqz(cf, a), s), B = pi_matrix(cf, from_pqz(cf, b), s);
        weyl = std::max(weyl, block_norm(A * B * A.adjoint() * B.adjoint() -
                                             std::exp(I_ * cf.norm * p * q) * CMat::Identity(s.dim, s.dim),
                                         n4));
    }
    v.check(unit < 1e-6, "unitarity on the interior block, N=12", unit, 1e-6);
    v.check(inv < 1e-6, "pi(x^-1) = pi(x)^* on the interior block", inv, 1e-6);
    v.check(hom < 1e-6, "homomorphism residual, N=12", hom, 1e-6);
    v.check(weyl < 1e-6, "translation covariance residual", weyl, 1e-6);

    double spec = 0;
    for (auto gg : {heisenberg(1), heisenberg(2)})
        for (double l : {0.37, 2.0, -5.5}) {
            auto cf = adapted_basis(gg, Vec::Constant(1, l));
            auto fs = fock_space(gg.d, 10);
            CMat H = h_lambda(cf, fs);
            for (int r = 0; r < fs.dim; ++r) {
                // volatile keeps the product rounded on its own; a fused multiply-subtract would not be
                volatile double want = std::abs(l) * (2.0 * fs.level[r] + gg.d);
                spec = std::max(spec, std::abs(H(r, r) - cplx(want)));
            }
            spec = std::max(spec, max_abs(H - CMat(H.diagonal().asDiagonal())));
        }
    v.check(spec == 0, "H(lambda) spectrum |lambda|(2n+d), exact", spec, 0);
    return v.finish(1);
}

int criterion2() {
    Verdict v{2};
    auto g = heisenberg(1);
    auto G = shell_grid(g, 0.3, 6, 32);
    auto s = fock_space(1, 12);
    auto refs = reference_gaussians(g, G);
    auto coarse_grid = shell_grid(g, 0.3, 6, 16);
    auto coarse_refs = reference_gaussians(g, G, 1.0, 36, 48);
    auto cs = fock_space(1, 6);
    v.check(refs.size() == 3, "Gaussian-family test functions", refs.size(), 3);
    for (size_t i = 0; i < refs.size(); ++i) {
        double r = plancherel_residual(g, refs[i], G, s);
        double rc = plancherel_residual(g, coarse_refs[i], coarse_grid, cs);
        v.check(r < 1e-3, ("Plancherel residual, function " + std::to_string(i)).c_str(), r, 1e-3);
        v.check(r < rc, ("residual decreases under refinement, function " + std::to_string(i)).c_str(), r, rc);
    }
    double c = calibrate_c0(g, s, G);
    double rel = std::abs(c / std::pow(2 * std::numbers::pi, -2) - 1);
    v.info("calibrated c0", c);
    v.check(rel < 0.01, "c0 against (2 pi)^-2, relative", rel, 0.01);
    return v.finish(5);
}

// modulated bump: both factors smooth and compactly supported in the box
Symbol first_symbol() {
    PointFn phi = [](const GroupPoint& x) {
        return std::exp(-0.5 * (x.v.squaredNorm() + x.z.squaredNorm())) * (1.0 + 0.5 * I_ * x.v(0) + 0.3 * x.z(0));
    };
    auto kb = bump_kernel(1.0, vec({0.7, -0.4}), vec({0.9}));
    PointFn k = [kb](const GroupPoint& u) { return kb(u) * (1.0 + 0.5 * u.v(0)); };
    return separable_symbol(phi, k, 1.0, {-4.5, -4.5, -4.5}, {4.5, 4.5, 4.5});
}

Symbol second_symbol() {
    PointFn phi = [](const GroupPoint& x) {
        return std::exp(-0.5 * (x.v.squaredNorm() + x.z.squaredNorm())) * (1.0 - 0.4 * x.v(1) + 0.2 * I_ * x.z(0));
    };
    return separable_symbol(phi, bump_kernel(1.0, vec({-0.3, 0.5}), vec({-0.6})), 1.0, {-4.5, -4.5, -4.5},
                            {4.5, 4.5, 4.5});
}

int criterion3() {
    Verdict v{3};
    auto g = heisenberg(1);
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    auto fields = standard_test_fields(g, identity(g), 1.0);
    auto col = [](const std::vector<ResidualRow>& rows) {
        std::vector<double> r;
        for (auto& x : rows) {
            std::printf("    eps %.4g residual %.6g\n", x.eps, x.residual);
            r.push_back(x.residual);
        }
        return r;
    };
    Symbol s1 = first_symbol();
    double sa = loglog_slope(eps, col(adjoint_residual(g, s1, eps, fields, {10, 10, true})));
    v.check(sa >= 1.7, "adjoint residual slope", sa, 1.7);
    double sc = loglog_slope(eps, col(composition_residual(g, s1, second_symbol(), eps, fields, {6, 10, true})));
    v.check(sc >= 1.7, "composition residual slope", sc, 1.7);

    PointFn phi = [](const GroupPoint& x) {
        return bump(x.v(0) * x.v(0) / 0.36) * bump(x.v(1) * x.v(1) / 0.36) * std::exp(-0.5 * x.z.squaredNorm());
    };
    Symbol ls = separable_symbol(phi, gaussian_kernel(1.0, vec({0.7, -0.4}), vec({0.9})), 7.0, {-0.6, -0.6, -4},
                                 {0.6, 0.6, 4});
    VCutoff chi{{-0.6, -0.6}, {0.6, 0.6}, 0.2, 0.5};
    auto f1 = fields;
    f1.resize(1);
    PointRule ur = polar_rule(g, 12, 0.5, 8, 64, 6, 12);
    double sl = loglog_slope(eps, col(locality_residual(g, ls, chi, eps, f1, ur, 8)));
    v.check(sl >= 4, "locality residual slope", sl, 4);
    return v.finish(10);
}

int criterion4() {
    Verdict v{4};
    auto g = heisenberg(1);
    std::vector<double> eps{0.08, 0.04, 0.02, 0.01}, nerr, oerr;
    auto A = packet(g, domain_center(g), 0, gaussian_in_box(g, 1.0, 0.5, 2.5, 3.0), 0.08);
    auto hs = fock_space(1, 1);
    A.phi1 = hermite_vector(hs, {0});
    A.phi2 = A.phi1;
    auto B = A;
    B.phi1 = (hermite_vector(hs, {0}) + hermite_vector(hs, {1})) / std::sqrt(2.0);
    B.a = scaled_profile(A.a, I_);
    // independent closed forms: int a(0, z)^2 dz = sigma_z sqrt(pi) for the Gaussian profile
    const double mass = 0.5 * std::sqrt(std::numbers::pi);
    const double nlim = 2 * std::numbers::pi * mass;
    const cplx olim = 2 * std::numbers::pi * (1 / std::sqrt(2.0)) * (-I_) * mass;
    v.check(std::abs(norm_limit(g, A) - nlim) < 1e-9, "library norm limit vs closed form", std::abs(norm_limit(g, A) - nlim), 1e-9);
    v.check(std::abs(overlap_limit(g, A, B) - olim) < 1e-9, "library overlap limit vs closed form",
            std::abs(overlap_limit(g, A, B) - olim), 1e-9);
    for (double e : eps) {
        A.eps = B.eps = e;
        nerr.push_back(std::abs(norm2(build(g, A)) / nlim - 1));
        oerr.push_back(std::abs(overlap(g, A, B) - olim) / std::abs(olim));
        std::printf("    eps %.3g norm rel %.6g overlap rel %.6g\n", e, nerr.back(), oerr.back());
    }
    v.check(nerr.back() < 0.03, "norm limit relative error at eps=0.01", nerr.back(), 0.03);
    v.check(oerr.back() < 0.03, "overlap limit relative error at eps=0.01", oerr.back(), 0.03);
    v.check(loglog_slope(eps, nerr) >= 0.45, "norm convergence slope", loglog_slope(eps, nerr), 0.45);
    v.check(loglog_slope(eps, oerr) >= 0.45, "overlap convergence slope", loglog_slope(eps, oerr), 0.45);

    auto s = packet(g, domain_center(g), 0, plateau(g, 2.5, 3.0, 0.5), 0.04);
    GroupPoint c = s.x0;
    PointFn phi = [c, g](const GroupPoint& x) {
        GroupPoint y = group_mul(g, group_inv(c), x);
        return std::exp(-0.5 * (y.v.squaredNorm() + y.z.squaredNorm())) * (1.0 + 0.5 * I_ * y.v(0) + 0.3 * y.z(0));
    };
    auto kb = bump_kernel(1.0, vec({0.7, -0.4}), vec({0.9}));
    PointFn k = [kb](const GroupPoint& u) { return kb(u) * (1.0 + 0.5 * u.v(0)); };
    std::vector<double> se{0.04, 0.02, 0.01}, sr;
    for (auto& r : symbol_action_residual(g, separable_symbol(phi, k, 1.0), s, se)) {
        std::printf("    eps %.3g symbol action residual %.6g\n", r.eps, r.residual);
        sr.push_back(r.residual);
    }
    v.check(loglog_slope(se, sr) >= 0.45, "symbol action residual slope", loglog_slope(se, sr), 0.45);
    return v.finish(10);
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = x.size();
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

int criterion5() {
    Verdict v{5};
    auto g = heisenberg(1);
    std::vector<double> ts;
    for (int j = 0; j <= 40; ++j) ts.push_back(0.05 * j);
    for (int n : {0, 1, 2})
        for (double sgn : {1.0, -1.0}) {
            auto s = packet(g, domain_center(g), n, gaussian_in_box(g, 0.5, 0.5), 0.02);
            s.lambda0(0) = sgn;
            GridField u0 = build(g, s);
            Propagator P(g, u0, packet_band(g, u0), fock_space(1, n + 12));
            std::vector<double> z;
            for (auto& sn : track(g, P, ts)) z.push_back(sn.center.z(0));
            const double want = sgn * (n + 0.5 * g.d), got = regression_slope(ts, z);
            char label[64];
            std::snprintf(label, sizeof label, "speed rel error, n=%d sign=%+g (speed %.5f)", n, sgn, got);
            v.check(std::abs(got / want - 1) < 0.02, label, std::abs(got / want - 1), 0.02);
        }
    return v.finish(10);
}

int criterion6() {
    Verdict v{6};
    auto g = heisenberg(1);
    auto s = packet(g, group_mul(g, domain_center(g), make_point(g, {0.0, 0.0, -0.25})), 0,
                    gaussian_in_box(g, 1.0, 0.5, 3.5, 4.0), 0.04);
    const double t = 1.0;
    GridField geom = profile_geometry(g, s.a, 64, 24);
    auto A0 = profile_transform(g, s.a, geom, profile_band(g, geom), fock_space(1, 40));
    auto At = profile_evolve(g, A0, s.lambda0, t);
    double drift = std::abs(hs_sum(At) / hs_sum(A0) - 1);
    v.check(drift < 1e-6, "profile mass drift", drift, 1e-6);
    std::vector<double> eps{0.04, 0.02, 0.01}, err;
    for (double e : eps) {
        s.eps = e;
        GridField u0 = build(g, s);
        Propagator P(g, u0, packet_band(g, u0), fock_space(1, 12));
        GridField ap = approx_solution(g, s, A0, t);
        GridField ex = P.at(t, ap);
        WavePacketSpec fr = s;
        fr.x0 = flow_phi(g, 0, t, s.x0, s.lambda0);
        GridField fz = same_geometry(ap);
        build_on(g, fr, fz);
        err.push_back(std::sqrt(diff_norm2(ex, ap) / norm2(ex)));
        std::printf("    eps %.3g approx rel error %.6g, frozen-profile rel error %.6g\n", e, err.back(),
                    std::sqrt(diff_norm2(ex, fz) / norm2(ex)));
    }
    v.check(loglog_slope(eps, err) >= 0.45, "approximate solution error slope", loglog_slope(eps, err), 0.45);
    return v.finish(10);
}

// packet on the slowest ray, its [0, T] segment centred in the ray's stay outside U
WavePacketSpec witness_packet(const HTypeStructure& g, const ControlSet& U, double T, double eps) {
    RaySamples smp;
    const RayWitness* w = nullptr;
    auto rays = slowest_vertical_rays(g, U.inflated(-smp.margin), 1e3, smp);
    for (auto& r : rays)
        if (!w || r.hit_time > w->hit_time) w = &r;
    if (!w || !std::isfinite(w->hit_time) || w->hit_time < T) throw NonConvergent("no witness ray for this T");
    auto s = packet(g, flow_phi(g, 0, 0.5 * (w->hit_time - T), w->x, w->direction), 0, gaussian_in_box(g, 0.5, 0.5), eps);
    s.lambda0 = w->direction;
    return s;
}

int criterion7() {
    Verdict v{7};
    auto g = heisenberg(1);
    auto U = ball_complement(g, domain_center(g), 0.5);
    auto iv = t_gcc_interval(g, U, 10, RaySamples{});
    const double hand = 2 * 0.5 / (0.5 * g.d);
    v.info("t_gcc lower", iv.lower);
    v.info("t_gcc upper", iv.upper);
    v.check(iv.lower - 0.05 <= hand && hand <= iv.upper + 0.05, "t_gcc interval brackets 2r/(d/2), distance",
            std::max({0.0, iv.lower - hand, hand - iv.upper}), 0.05);
    auto w = witness_packet(g, U, 1.0, 0.08);
    std::printf("  witness x0 = (%.6f, %.6f, %.6f), lambda0 = %+g\n", w.x0.v(0), w.x0.v(1), w.x0.z(0), w.lambda0(0));
    auto fam = [&](double e) {
        auto s = w;
        s.eps = e;
        return s;
    };
    auto rows = observability_scan(g, fam, U, {1.0, 4.0}, {0.08, 0.04, 0.02});
    std::vector<double> r1, r4;
    for (auto& r : rows) {
        std::printf("    T %.1f eps %.3g mass0 %.6g energy %.6g ratio %.6g\n", r.T, r.eps, r.mass0, r.energy, r.ratio);
        (r.T < 2 ? r1 : r4).push_back(r.ratio);
    }
    v.check(r1.back() >= 10 * r1.front(), "T=1 ratio growth factor (0.08 to 0.02)", r1.back() / r1.front(), 10);
    auto [lo, hi] = std::minmax_element(r4.begin(), r4.end());
    v.check(std::isfinite(*hi) && *hi <= 2 * *lo, "T=4 ratio spread max/min", *hi / *lo, 2);
    return v.finish(30);
}

Symbol centred_symbol(const HTypeStructure& g, const GroupPoint& c) {
    PointFn phi = [c, g](const GroupPoint& x) {
        GroupPoint y = group_mul(g, group_inv(c), x);
        return cplx(std::exp(-(y.v.squaredNorm() + y.z.squaredNorm()) / (2 * 0.3 * 0.3)));
    };
    return separable_symbol(phi, bump_kernel(1.0, vec({0.7, -0.4}), vec({0.9})), 1.0);
}

int criterion8() {
    Verdict v{8};
    auto g = heisenberg(1);
    auto U = ball_complement(g, domain_center(g), 0.5);
    auto w = witness_packet(g, U, 1.0, 0.08);
    auto fam = [&](double e) {
        auto s = w;
        s.eps = e;
        return s;
    };
    Symbol sigma = centred_symbol(g, w.x0);
    auto tw = simpson_weights([](double) { return 1.0; }, 0.5, 4);
    const double pred = packet_measure_limit(g, fam(0.01), sigma, tw).real();
    v.info("packet prediction", pred);
    std::vector<double> eps{0.08, 0.04, 0.02, 0.01}, vals;
    MeasureOptions opt;
    for (double e : eps) {
        vals.push_back(ell_eps(g, fam(e), sigma, tw, opt).real());
        std::printf("    eps %.3g ell %.6g\n", e, vals.back());
    }
    auto est = extrapolate_measure("sigma", eps, vals, opt.powers);
    v.info("extrapolated limit", est.limit);
    v.check(std::abs(est.limit / pred - 1) < 0.05, "extrapolated measure vs prediction, relative",
            std::abs(est.limit / pred - 1), 0.05);
    auto tc = transport_check(g, fam(0.02), [&](const GroupPoint& c) { return centred_symbol(g, c); }, 1.0, opt);
    std::printf("    transport: at 0 %.6g, at t %.6g\n", tc.at_zero.real(), tc.at_t.real());
    v.check(tc.rel < 0.05, "transport along the flow, relative change", tc.rel, 0.05);
    return v.finish(10);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: htlab_acceptance <1..8>\n");
        return 2;
    }
    int (*const run[])() = {criterion1, criterion2, criterion3, criterion4,
                            criterion5, criterion6, criterion7, criterion8};
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > 8) {
        std::fprintf(stderr, "criterion must be 1..8\n");
        return 2;
    }
    try {
        return run[k - 1]();
    } catch (const std::exception& e) {
        std::printf("criterion %d FAIL: %s\n", k, e.what());
        return 1;
    }
}
