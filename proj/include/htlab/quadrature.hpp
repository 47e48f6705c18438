#pragma once

// Gauss rules from the Jacobi matrix (Golub-Welsch).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <vector>

namespace htlab {

struct Rule {
    std::vector<double> x, w;
};

namespace detail {

inline Rule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& off, double mu0) {
    const int n = static_cast<int>(diag.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        r.w[i] = mu0 * v0 * v0;
    }
    return r;
}

}  // namespace detail

// weight exp(-x^2) on the real line. Eigenvector weights lose relative accuracy in the tails,
// so nodes are Newton-polished and weights recomputed as 1 / sum_k p_k(x)^2.
inline Rule gauss_hermite(int n) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b(n > 1 ? n - 1 : 0);
    for (int k = 1; k < n; ++k) b(k - 1) = std::sqrt(0.5 * k);
    Rule r = detail::golub_welsch(a, b, std::sqrt(std::numbers::pi));
    std::vector<double> h(n + 1);
    auto eval = [&](double x) {
        h[0] = std::pow(std::numbers::pi, -0.25);
        if (n >= 1) h[1] = std::sqrt(2.0) * x * h[0];
        for (int k = 1; k < n; ++k)
            h[k + 1] = std::sqrt(2.0 / (k + 1)) * x * h[k] - std::sqrt(static_cast<double>(k) / (k + 1)) * h[k - 1];
    };
    for (int i = 0; i < n; ++i) {
        double x = r.x[i];
        for (int it = 0; it < 3; ++it) {
            eval(x);
            double dp = std::sqrt(2.0 * n) * h[n - 1];
            if (dp == 0) break;
            x -= h[n] / dp;
        }
        eval(x);
        double s = 0;
        for (int k = 0; k < n; ++k) s += h[k] * h[k];
        r.x[i] = x;
        r.w[i] = 1.0 / s;
    }
    return r;
}

// weight 1 on [-1, 1]
inline Rule gauss_legendre(int n) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b(n > 1 ? n - 1 : 0);
    for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Rule r = detail::golub_welsch(a, b, 2.0);
    return r;
}

inline Rule gauss_legendre(int n, double lo, double hi) {
    Rule r = gauss_legendre(n);
    double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    for (int i = 0; i < n; ++i) {
        r.x[i] = c + h * r.x[i];
        r.w[i] *= h;
    }
    return r;
}

// composite rule: `segments` equal pieces of `order` nodes each
inline Rule composite_legendre(int segments, int order, double lo, double hi) {
    Rule out;
    double step = (hi - lo) / segments;
    for (int s = 0; s < segments; ++s) {
        Rule r = gauss_legendre(order, lo + s * step, lo + (s + 1) * step);
        out.x.insert(out.x.end(), r.x.begin(), r.x.end());
        out.w.insert(out.w.end(), r.w.begin(), r.w.end());
    }
    return out;
}

}  // namespace htlab
