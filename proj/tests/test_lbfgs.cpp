#include <doctest.h>

#include <chrono>
#include <cmath>

#include "oqa/lbfgs.hpp"

using namespace oqa;

TEST_CASE("lbfgs solves a shifted quadratic in few iterations") {
    const std::vector<double> c = {1.0, -2.0, 3.0, 0.5};
    auto f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - c[i];
            v += d * d;
            g[i] = 2.0 * d;
        }
        return v;
    };
    const auto res = lbfgs_minimize(f, std::vector<double>(4, 0.0));
    CHECK(res.status == LbfgsStatus::Converged);
    CHECK(res.iterations <= 10);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(std::fabs(res.x[i] - c[i]) < 1e-6);
    }
}

TEST_CASE("lbfgs solves 2-D Rosenbrock from the standard start") {
    auto rosenbrock = [](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    const auto start = std::chrono::steady_clock::now();
    LbfgsOptions opts;
    opts.max_iters = 200;
    opts.grad_tol = 1e-8;
    const auto res = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, opts);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(std::fabs(res.x[0] - 1.0) < 1e-5);
    CHECK(std::fabs(res.x[1] - 1.0) < 1e-5);
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() < 1000);
}

TEST_CASE("lbfgs closed form: <g,x> + ||x||^2 minimized at -g/2") {
    const std::vector<double> lin = {0.7, -1.3, 2.1};
    auto f = [&](std::span<const double> x, std::span<double> g) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            v += lin[i] * x[i] + x[i] * x[i];
            g[i] = lin[i] + 2.0 * x[i];
        }
        return v;
    };
    const auto res = lbfgs_minimize(f, std::vector<double>(3, 0.0));
    for (std::size_t i = 0; i < lin.size(); ++i) {
        CHECK(std::fabs(res.x[i] - (-lin[i] / 2.0)) < 1e-6);
    }
}

TEST_CASE("lbfgs reports non-finite objectives at the start") {
    auto f = [](std::span<const double>, std::span<double> g) {
        g[0] = 0.0;
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(lbfgs_minimize(f, {1.0}), NumericError);
}

TEST_CASE("lbfgs backs off from overshooting steps") {
    // exp overflows for big x; the line search must recover and still converge
    auto f = [](std::span<const double> x, std::span<double> g) {
        const double v = std::exp(x[0]) + x[0] * x[0];
        g[0] = std::exp(x[0]) + 2.0 * x[0];
        return v;
    };
    const auto res = lbfgs_minimize(f, {3.0});
    CHECK(res.value < 1.0);
    CHECK(std::isfinite(res.value));
    // stationary point of e^x + x^2: x ~ -0.3517337
    CHECK(std::fabs(res.x[0] + 0.3517337) < 1e-5);
}

TEST_CASE("lbfgs honors the iteration cap") {
    auto rosenbrock = [](std::span<const double> x, std::span<double> g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    LbfgsOptions opts;
    opts.max_iters = 3;
    const auto res = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, opts);
    CHECK(res.status == LbfgsStatus::MaxIterations);
    CHECK(res.iterations == 3);
}
