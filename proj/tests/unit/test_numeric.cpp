#include "qhmm/numeric/distributions.hpp"
#include "qhmm/numeric/parallel.hpp"
#include "qhmm/numeric/rng.hpp"
#include "qhmm/numeric/stats.hpp"
#include "qhmm/error.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace qhmm;
using namespace qhmm::numeric;

// References from mpmath at 40 digits (tests/oracles/make_oracles.py).
TEST(Distributions, NormalCdfMatchesHighPrecision) {
    EXPECT_NEAR(norm_cdf(-8.0), 6.2209605742717841e-16, 1e-28);
    EXPECT_NEAR(norm_cdf(-3.5), 0.00023262907903552504, 1e-15);
    EXPECT_NEAR(norm_cdf(-1.0), 0.15865525393145705, 1e-15);
    EXPECT_NEAR(norm_cdf(0.25), 0.59870632568292372, 1e-15);
    EXPECT_NEAR(norm_cdf(2.0), 0.97724986805182079, 1e-15);
    EXPECT_NEAR(norm_cdf(7.5), 0.99999999999996809, 1e-15);
}

TEST(Distributions, NormalQuantileMatchesHighPrecision) {
    EXPECT_NEAR(norm_quantile(1e-10), -6.3613409024040562, 1e-12);
    EXPECT_NEAR(norm_quantile(0.001), -3.0902323061678135, 1e-12);
    EXPECT_NEAR(norm_quantile(0.3), -0.52440051270804082, 1e-13);
    EXPECT_NEAR(norm_quantile(0.975), 1.9599639845400539, 1e-13);
}

TEST(Distributions, StudentTCdfAndQuantile) {
    EXPECT_NEAR(t_cdf(-8.0, 3.0), 0.0020382887938927341, 1e-14);
    EXPECT_NEAR(t_cdf(-2.0, 5.0), 0.050969739414929178, 1e-14);
    EXPECT_NEAR(t_cdf(0.5, 2.5), 0.67115104006514266, 1e-14);
    EXPECT_NEAR(t_cdf(3.0, 30.0), 0.99730501796717403, 1e-14);
    EXPECT_NEAR(t_quantile(0.01, 4.0), -3.7469473879791968, 1e-12);
    EXPECT_NEAR(t_quantile(0.9, 5.0), 1.4758840488244813, 1e-12);
    EXPECT_NEAR(t_quantile(0.999, 2.5), 13.822193110865954, 1e-10);
}

TEST(Distributions, InfiniteDofFallsBackToNormal) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_TRUE(is_gaussian_dof(inf));
    EXPECT_DOUBLE_EQ(t_cdf(1.3, inf), norm_cdf(1.3));
    EXPECT_DOUBLE_EQ(t_quantile(0.2, inf), norm_quantile(0.2));
}

TEST(Distributions, KolmogorovSurvival) {
    // scipy.stats.kstwobign.sf
    EXPECT_NEAR(kolmogorov_sf(0.6923443), 0.7239393149533018, 1e-12);
    EXPECT_NEAR(kolmogorov_sf(1.0), 0.26999967167735456, 1e-12);
    EXPECT_NEAR(kolmogorov_sf(1.36), 0.049485876755377876, 1e-12);
    EXPECT_DOUBLE_EQ(kolmogorov_sf(0.0), 1.0);
    EXPECT_LT(kolmogorov_sf(5.0), 1e-20);
}

TEST(Stats, MomentsOfKnownSample) {
    const std::vector<double> x{1, 2, 3, 4, 10};
    EXPECT_DOUBLE_EQ(mean(x), 4.0);
    EXPECT_DOUBLE_EQ(variance(x), 12.5);
    // biased moments: m2 = 10, m3 = 36, m4 = 278.8 (hand computed)
    EXPECT_NEAR(skewness(x), 36.0 / std::pow(10.0, 1.5), 1e-12);
    EXPECT_NEAR(excess_kurtosis(x), 278.8 / 100.0 - 3.0, 1e-12);
}

TEST(Stats, ZeroVarianceMomentsThrow) {
    const std::vector<double> x(10, 3.0);
    EXPECT_THROW(excess_kurtosis(x), NumericError);
    EXPECT_THROW(skewness(x), NumericError);
}

TEST(Stats, Type7Quantile) {
    const std::vector<double> x{4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(quantile(x, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(x, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(x, 0.1), 1.3);  // h = 0.3
    EXPECT_DOUBLE_EQ(median(std::vector<double>{5, 1, 3}), 3.0);
}

TEST(Stats, AutocorrelationOfAlternatingSeries) {
    std::vector<double> x;
    for (int i = 0; i < 100; ++i) x.push_back(i % 2 ? 1.0 : -1.0);
    const auto r = autocorrelation(x, 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_NEAR(r[0], -99.0 / 100.0, 1e-12);
    EXPECT_NEAR(r[1], 98.0 / 100.0, 1e-12);
}

TEST(Stats, PearsonOfAffineIsOne) {
    const std::vector<double> a{1, 2, 4, 8, 3};
    std::vector<double> b;
    for (double v : a) b.push_back(-2.0 * v + 1.0);
    EXPECT_NEAR(pearson(a, b), -1.0, 1e-14);
}

TEST(Rng, DerivedStreamsAreReproducibleAndDistinct) {
    EXPECT_EQ(derive_seed(42, {1, 2}), derive_seed(42, {1, 2}));
    EXPECT_NE(derive_seed(42, {1, 2}), derive_seed(42, {2, 1}));
    EXPECT_NE(derive_seed(42, {1}), derive_seed(43, {1}));
    auto a = make_stream(7, {3});
    auto b = make_stream(7, {3});
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
    auto c = make_stream(7, {3});
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(c);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
    auto run = [](unsigned workers) {
        std::vector<std::uint64_t> out(257);
        parallel_for(out.size(), workers, [&](std::size_t i) {
            auto rng = make_stream(99, {i});
            out[i] = rng();
        });
        return out;
    };
    EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, ExceptionPropagates) {
    std::atomic<int> ran{0};
    EXPECT_THROW(parallel_for(50, 3,
                              [&](std::size_t i) {
                                  ++ran;
                                  if (i == 17) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
    EXPECT_GE(ran.load(), 1);
}
