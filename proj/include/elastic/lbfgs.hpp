#pragma once

#include "elastic/types.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string_view>
#include <vector>

namespace elastic {

struct OptimConfig {
    int memory = 10;
    int max_iters = 500;
    /// Stop when the sup-norm of the gradient is at most
    /// grad_tol * max(1, |f(x0)|).
    double grad_tol = 1e-8;
    /// Stop when f_k - f_{k+1} <= rel_f_tol * max(|f_k|, |f_{k+1}|).
    double rel_f_tol = 1e-6;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    /// Objective evaluations allowed per line search.
    int max_line_search = 40;

    void validate() const
    {
        if (memory < 1 || max_iters < 1 || max_line_search < 2) {
            throw ConfigError("memory, max_iters and max_line_search must be positive");
        }
        if (!(grad_tol > 0.0) || !(rel_f_tol > 0.0)) {
            throw ConfigError("grad_tol and rel_f_tol must be positive");
        }
        if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
            throw ConfigError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
        }
    }
};

enum class OptimStatus { converged_grad, converged_f, max_iters, line_search_failed };

constexpr std::string_view to_string(OptimStatus s) noexcept
{
    switch (s) {
    case OptimStatus::converged_grad: return "converged_grad";
    case OptimStatus::converged_f: return "converged_f";
    case OptimStatus::max_iters: return "max_iters";
    case OptimStatus::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

struct TracePoint {
    double value;
    double grad_norm;  ///< sup-norm
};

struct OptimReport {
    int iterations = 0;
    int evaluations = 0;
    double final_value = 0.0;
    double final_grad_norm = 0.0;
    OptimStatus status = OptimStatus::max_iters;
    /// Entry 0 is the starting point, entry k the k-th accepted iterate.
    std::vector<TracePoint> trace;
};

namespace detail {

struct LinePoint {
    double step = 0.0;
    double value = 0.0;
    double slope = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd grad;
};

/// Minimiser of the cubic through (a, fa, da) and (b, fb, db), clamped into
/// the middle 80% of the interval; bisection when the fit is unusable.
inline double cubic_step(const LinePoint& a, const LinePoint& b)
{
    const double lo = std::min(a.step, b.step);
    const double hi = std::max(a.step, b.step);
    const double width = hi - lo;
    const double mid = 0.5 * (lo + hi);
    if (!std::isfinite(a.value) || !std::isfinite(b.value) || !std::isfinite(a.slope)
        || !std::isfinite(b.slope)) {
        return mid;
    }
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (!(disc >= 0.0)) {
        return mid;
    }
    const double d2 = std::copysign(std::sqrt(disc), b.step - a.step);
    const double denom = b.slope - a.slope + 2.0 * d2;
    if (denom == 0.0) {
        return mid;
    }
    const double t = b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
    if (!std::isfinite(t)) {
        return mid;
    }
    return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

/// Line search for the strong Wolfe conditions (bracketing phase followed by
/// zoom). Returns false when no acceptable step was found; `out` then holds
/// the best Armijo point if there is one (step > 0), else step = 0.
template <class Objective>
bool strong_wolfe(Objective& f, const Eigen::VectorXd& x, double fx, const Eigen::VectorXd& d,
                  double slope0, double step0, const OptimConfig& cfg, LinePoint& out,
                  int& evaluations)
{
    const double c1 = cfg.wolfe_c1;
    const double c2 = cfg.wolfe_c2;
    int budget = cfg.max_line_search;

    auto eval = [&](double step) {
        LinePoint p;
        p.step = step;
        p.x = x + step * d;
        p.grad.resize(x.size());
        p.value = f(p.x, p.grad);
        ++evaluations;
        --budget;
        if (!std::isfinite(p.value) || !p.grad.allFinite()) {
            p.value = std::numeric_limits<double>::infinity();
            p.slope = std::numeric_limits<double>::quiet_NaN();
        }
        else {
            p.slope = p.grad.dot(d);
        }
        return p;
    };
    auto armijo = [&](const LinePoint& p) { return p.value <= fx + c1 * p.step * slope0; };
    auto curvature = [&](const LinePoint& p) { return std::abs(p.slope) <= -c2 * slope0; };

    auto zoom = [&](LinePoint lo, LinePoint hi) {
        while (budget > 0) {
            LinePoint p = eval(cubic_step(lo, hi));
            if (!armijo(p) || p.value >= lo.value) {
                hi = std::move(p);
            }
            else {
                if (curvature(p)) {
                    out = std::move(p);
                    return true;
                }
                if (p.slope * (hi.step - lo.step) >= 0.0) {
                    hi = std::move(lo);
                }
                lo = std::move(p);
            }
            if (std::abs(hi.step - lo.step) <= 1e-14 * std::max(1.0, std::abs(lo.step))) {
                break;
            }
        }
        out = std::move(lo);
        return false;
    };

    LinePoint prev;
    prev.step = 0.0;
    prev.value = fx;
    prev.slope = slope0;
    double step = step0;
    for (int i = 0; budget > 0; ++i) {
        LinePoint p = eval(step);
        if (!armijo(p) || (i > 0 && p.value >= prev.value)) {
            return zoom(std::move(prev), std::move(p));
        }
        if (curvature(p)) {
            out = std::move(p);
            return true;
        }
        if (p.slope >= 0.0) {
            return zoom(std::move(p), std::move(prev));
        }
        prev = std::move(p);
        step *= 2.0;
    }
    out = std::move(prev);
    return false;
}

} // namespace detail

/// Limited-memory BFGS with a strong Wolfe line search.
///
/// `f(x, grad)` must return the objective at `x` and write its gradient into
/// `grad` (already sized). Non-finite values are treated as +infinity by the
/// line search. `x` holds the starting point on entry and the last accepted
/// iterate on return. Fully sequential, so results are reproducible bit for
/// bit.
template <class Objective>
OptimReport minimize(Objective&& f, Eigen::VectorXd& x, const OptimConfig& cfg = {})
{
    cfg.validate();
    OptimReport report;
    Eigen::VectorXd g(x.size());
    double fx = f(x, g);
    report.evaluations = 1;
    if (!std::isfinite(fx) || !g.allFinite()) {
        throw OptimizationError("objective or gradient is not finite at the starting point");
    }
    const double gtol = cfg.grad_tol * std::max(1.0, std::abs(fx));
    auto finish = [&](OptimStatus s) {
        report.status = s;
        report.final_value = fx;
        report.final_grad_norm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
        return report;
    };
    report.trace.push_back({fx, g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0});
    if (report.trace.back().grad_norm <= gtol) {
        return finish(OptimStatus::converged_grad);
    }

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> alpha(static_cast<std::size_t>(cfg.memory));

    auto direction = [&] {
        Eigen::VectorXd q = -g;
        const auto m = s_hist.size();
        for (std::size_t i = m; i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (m > 0) {
            q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        return q;
    };
    auto clear_memory = [&] {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
    };

    for (int k = 0; k < cfg.max_iters; ++k) {
        Eigen::VectorXd d;
        double slope = 0.0;
        double step0 = 1.0;
        auto steepest = [&] {
            d = -g;
            slope = -g.squaredNorm();
            step0 = std::min(1.0, 1.0 / g.norm());
        };
        if (s_hist.empty()) {
            steepest();
        }
        else {
            d = direction();
            slope = g.dot(d);
            if (!(slope < 0.0)) {
                clear_memory();
                steepest();
            }
        }

        detail::LinePoint next;
        bool ok = detail::strong_wolfe(f, x, fx, d, slope, step0, cfg, next, report.evaluations);
        if (!ok && next.step == 0.0 && !s_hist.empty()) {
            clear_memory();
            steepest();
            ok = detail::strong_wolfe(f, x, fx, d, slope, step0, cfg, next, report.evaluations);
        }
        if (!ok && next.step == 0.0) {
            return finish(OptimStatus::line_search_failed);
        }

        Eigen::VectorXd s = next.x - x;
        Eigen::VectorXd y = next.grad - g;
        const double sy = s.dot(y);
        const double f_prev = fx;
        x = std::move(next.x);
        g = std::move(next.grad);
        fx = next.value;
        ++report.iterations;
        report.trace.push_back({fx, g.lpNorm<Eigen::Infinity>()});

        if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
            if (s_hist.size() == static_cast<std::size_t>(cfg.memory)) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
        }

        if (report.trace.back().grad_norm <= gtol) {
            return finish(OptimStatus::converged_grad);
        }
        if (fx == 0.0 || f_prev - fx <= cfg.rel_f_tol * std::max(std::abs(f_prev), std::abs(fx))) {
            return finish(OptimStatus::converged_f);
        }
    }
    return finish(OptimStatus::max_iters);
}

} // namespace elastic
