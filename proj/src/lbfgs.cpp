#include "oqa/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace oqa {

namespace {

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

bool all_finite(double value, const std::vector<double>& grad) {
    if (!std::isfinite(value)) return false;
    for (double g : grad) {
        if (!std::isfinite(g)) return false;
    }
    return true;
}

// Minimizer of the cubic through (a, fa, ga) and (b, fb, gb); bisection when
// the interpolation degenerates.
double cubic_min(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0) return 0.5 * (a + b);
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = gb - ga + 2.0 * d2;
    if (denom == 0.0) return 0.5 * (a + b);
    double t = b - (b - a) * (gb + d2 - d1) / denom;
    const double lo = std::min(a, b), hi = std::max(a, b);
    // keep strictly inside the bracket
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t <= lo + margin * 0.01 || t >= hi - margin * 0.01) {
        t = 0.5 * (a + b);
    }
    return t;
}

struct PhiPoint {
    double alpha = 0.0;
    double value = 0.0;
    double deriv = 0.0; // d f(x + alpha d) / d alpha
};

} // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double> x0,
                           const LbfgsOptions& opts) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);
    res.grad.assign(n, 0.0);

    res.value = f(res.x, res.grad);
    res.evaluations = 1;
    if (!all_finite(res.value, res.grad)) {
        throw NumericError("lbfgs: non-finite objective at the initial point");
    }

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    std::vector<double> direction(n), x_trial(n), g_trial(n);
    std::vector<double> alpha_buf;

    for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
        if (inf_norm(res.grad) < opts.grad_tol) {
            res.status = LbfgsStatus::Converged;
            return res;
        }

        // two-loop recursion
        direction = res.grad;
        alpha_buf.assign(s_hist.size(), 0.0);
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha_buf[k] = rho_hist[k] * dot_vec(s_hist[k], direction);
            for (std::size_t i = 0; i < n; ++i) direction[i] -= alpha_buf[k] * y_hist[k][i];
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& y = y_hist.back();
            const double gamma = dot_vec(s, y) / dot_vec(y, y);
            for (auto& d : direction) d *= gamma;
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * dot_vec(y_hist[k], direction);
            for (std::size_t i = 0; i < n; ++i) {
                direction[i] += (alpha_buf[k] - beta) * s_hist[k][i];
            }
        }
        for (auto& d : direction) d = -d;

        double dg0 = dot_vec(res.grad, direction);
        if (dg0 >= 0.0) { // fall back to steepest descent
            for (std::size_t i = 0; i < n; ++i) direction[i] = -res.grad[i];
            dg0 = dot_vec(res.grad, direction);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        auto eval_phi = [&](double alpha, PhiPoint& out) {
            for (std::size_t i = 0; i < n; ++i) x_trial[i] = res.x[i] + alpha * direction[i];
            out.value = f(x_trial, g_trial);
            ++res.evaluations;
            out.alpha = alpha;
            out.deriv = all_finite(out.value, g_trial)
                            ? dot_vec(g_trial, direction)
                            : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(out.value)) {
                out.value = std::numeric_limits<double>::infinity();
            }
        };

        const PhiPoint phi0{0.0, res.value, dg0};
        PhiPoint lo, hi, cur, accepted;
        bool have_accept = false;

        auto wolfe_ok = [&](const PhiPoint& p) {
            return p.value <= phi0.value + opts.c1 * p.alpha * phi0.deriv &&
                   std::isfinite(p.deriv) && std::fabs(p.deriv) <= -opts.c2 * phi0.deriv;
        };

        auto zoom = [&](PhiPoint a_lo, PhiPoint a_hi) {
            for (int it = 0; it < opts.max_linesearch; ++it) {
                if (std::fabs(a_hi.alpha - a_lo.alpha) <
                    1e-16 * std::max(1.0, std::fabs(a_lo.alpha))) {
                    break;
                }
                double a = (std::isfinite(a_hi.value) && std::isfinite(a_lo.deriv))
                               ? cubic_min(a_lo.alpha, a_lo.value, a_lo.deriv, a_hi.alpha,
                                           a_hi.value, std::isfinite(a_hi.deriv)
                                                            ? a_hi.deriv
                                                            : a_lo.deriv)
                               : 0.5 * (a_lo.alpha + a_hi.alpha);
                eval_phi(a, cur);
                if (cur.value > phi0.value + opts.c1 * a * phi0.deriv || cur.value >= a_lo.value) {
                    a_hi = cur;
                } else {
                    if (wolfe_ok(cur)) {
                        accepted = cur;
                        have_accept = true;
                        return;
                    }
                    if (cur.deriv * (a_hi.alpha - a_lo.alpha) >= 0.0) a_hi = a_lo;
                    a_lo = cur;
                }
            }
            // interval exhausted: accept the low point if it at least decreases
            if (a_lo.alpha > 0.0 && a_lo.value < phi0.value) {
                eval_phi(a_lo.alpha, cur);
                accepted = cur;
                have_accept = true;
            }
        };

        // bracketing phase
        const double first_step =
            res.iterations == 0 ? 1.0 / std::max(1.0, std::sqrt(dot_vec(res.grad, res.grad)))
                                : 1.0;
        double alpha = first_step;
        PhiPoint prev = phi0;
        for (int it = 0; it < opts.max_linesearch; ++it) {
            eval_phi(alpha, cur);
            if (cur.value > phi0.value + opts.c1 * alpha * phi0.deriv ||
                (it > 0 && cur.value >= prev.value)) {
                zoom(prev, cur);
                break;
            }
            if (wolfe_ok(cur)) {
                accepted = cur;
                have_accept = true;
                break;
            }
            if (std::isfinite(cur.deriv) && cur.deriv >= 0.0) {
                zoom(cur, prev);
                break;
            }
            prev = cur;
            alpha *= 2.0;
            if (alpha > 1e20) break;
        }

        if (!have_accept) {
            res.status = LbfgsStatus::LineSearchFailed;
            return res;
        }

        // every accept path leaves x_trial / g_trial at the accepted point
        const double new_value = accepted.value;
        if (!all_finite(new_value, g_trial)) {
            throw NumericError("lbfgs: non-finite objective at accepted step " +
                               std::to_string(accepted.alpha));
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_trial[i] - res.x[i];
            y[i] = g_trial[i] - res.grad[i];
        }
        const double sy = dot_vec(s, y);
        const double ss = dot_vec(s, s);
        if (sy > 1e-12 * std::sqrt(ss) * std::sqrt(dot_vec(y, y))) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        res.x = x_trial;
        res.grad = g_trial;
        res.value = new_value;
        if (opts.on_iteration) {
            opts.on_iteration(res.iterations + 1, res.value, inf_norm(res.grad));
        }
    }

    res.status = inf_norm(res.grad) < opts.grad_tol ? LbfgsStatus::Converged
                                                    : LbfgsStatus::MaxIterations;
    return res;
}

} // namespace oqa
