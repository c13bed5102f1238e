#include "qhmm/data.hpp"
#include "qhmm/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace qhmm;

namespace {

PriceSeries parse(const std::string& text) {
    std::istringstream in(text);
    return parse_price_csv(in, "TEST");
}

std::vector<double> load_t5_series() {
    std::ifstream in(QHMM_TEST_DATA_DIR "/t5_series.txt");
    std::vector<double> x;
    double v;
    while (in >> v) x.push_back(v);
    return x;
}

} // namespace

TEST(Date, ParsesIsoWithOptionalTime) {
    const auto d = Date::parse("2014-01-03");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->year, 2014);
    EXPECT_EQ(d->month, 1);
    EXPECT_EQ(d->day, 3);
    EXPECT_TRUE(Date::parse("2014-01-03T16:00:00"));
    EXPECT_TRUE(Date::parse("2014-01-03 16:00"));
    EXPECT_FALSE(Date::parse("2014/01/03"));
    EXPECT_FALSE(Date::parse("2014-13-01"));
    EXPECT_FALSE(Date::parse("2014-01-03X"));
    EXPECT_EQ(d->to_string(), "2014-01-03");
}

TEST(PriceCsv, HeaderIsCaseInsensitiveAndExtraColumnsIgnored) {
    const auto p = parse("Open,DATE,High,Close,Volume\n1,2020-01-02,3,101.5,9\n1,2020-01-03,3,102,9\n");
    ASSERT_EQ(p.size(), 2u);
    EXPECT_DOUBLE_EQ(p.close[0], 101.5);
    EXPECT_EQ(p.dates[1].to_string(), "2020-01-03");
    EXPECT_EQ(p.ticker, "TEST");
}

TEST(PriceCsv, RowsSortedByDate) {
    const auto p = parse("date,close\n2020-01-03,2\n2020-01-01,1\n2020-01-02,1.5\n");
    EXPECT_EQ(p.dates.front().to_string(), "2020-01-01");
    EXPECT_DOUBLE_EQ(p.close[1], 1.5);
    EXPECT_DOUBLE_EQ(p.close[2], 2.0);
}

TEST(PriceCsv, MissingHeaderColumnsRejected) {
    EXPECT_THROW(parse("date,price\n2020-01-01,1\n"), ParseError);
    EXPECT_THROW(parse(""), ParseError);
}

TEST(PriceCsv, MalformedRowReportsLineNumber) {
    try {
        parse("date,close\n2020-01-01,1\n2020-01-02,abc\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW(parse("date,close\nnot-a-date,1\n"), ParseError);
    EXPECT_THROW(parse("date,close\n2020-01-01\n"), ParseError);
}

TEST(PriceCsv, NonPositiveAndDuplicateRejected) {
    EXPECT_THROW(parse("date,close\n2020-01-01,0\n"), DataError);
    EXPECT_THROW(parse("date,close\n2020-01-01,-3\n"), DataError);
    EXPECT_THROW(parse("date,close\n2020-01-01,1\n2020-01-01,2\n"), DataError);
}

TEST(PriceCsv, MissingFileIsDataError) {
    EXPECT_THROW(load_price_series("/nonexistent/prices.csv", "X"), DataError);
}

TEST(Growth, OnePercentDailyMoveAnnualized) {
    const auto p = parse("date,close\n2020-01-01,100\n2020-01-02,101\n");
    const auto g = compute_growth_rates(p, 0.05);
    ASSERT_EQ(g.size(), 1u);
    // 252 ln(1.01) - 0.05
    EXPECT_NEAR(g.values[0], 2.4574833749983593, 1e-12);
}

TEST(Growth, ConstantPricesGiveMinusRiskFree) {
    const auto p = parse("date,close\n2020-01-01,5\n2020-01-02,5\n2020-01-03,5\n");
    for (double v : compute_growth_rates(p, 0.02).values) EXPECT_DOUBLE_EQ(v, -0.02);
}

TEST(Growth, SingleRowRejected) {
    const auto p = parse("date,close\n2020-01-01,5\n");
    EXPECT_THROW(compute_growth_rates(p, 0.0), DataError);
}

TEST(Growth, LogReturnsTelescope) {
    const auto p = parse("date,close\n2020-01-01,10\n2020-01-02,12\n2020-01-03,9\n2020-01-06,15\n");
    const auto g = compute_growth_rates(p, 0.0, 1.0);
    double sum = 0.0;
    for (double v : g.values) sum += v;
    EXPECT_NEAR(sum, std::log(15.0 / 10.0), 1e-14);
}

// scipy.stats.jarque_bera / statsmodels acorr_ljungbox on tests/data/t5_series.txt
TEST(NormalityTests, JarqueBeraMatchesScipy) {
    const auto x = load_t5_series();
    ASSERT_EQ(x.size(), 400u);
    const auto jb = jarque_bera(x);
    EXPECT_NEAR(jb.statistic, 30.16211057266727, 1e-9);
    EXPECT_NEAR(jb.p_value, 2.820855942556565e-07, 1e-15);
}

TEST(NormalityTests, LjungBoxMatchesStatsmodels) {
    const auto x = load_t5_series();
    const auto lb = ljung_box(x, 10);
    EXPECT_NEAR(lb.statistic, 8.04141447818267, 1e-9);
    EXPECT_NEAR(lb.p_value, 0.6247914999253669, 1e-10);
}

TEST(NormalityTests, GuardsOnShortSeries) {
    const std::vector<double> x{1, 2, 3, 4, 5};
    EXPECT_THROW(jarque_bera(x), NumericError);
    EXPECT_THROW(ljung_box(x, 3), NumericError);
}

TEST(DescriptiveStats, MatchesScipyMoments) {
    const auto x = load_t5_series();
    const auto s = descriptive_stats(x, 10);
    EXPECT_NEAR(s.skewness, 0.1025563536879109, 1e-12);
    EXPECT_NEAR(s.excess_kurtosis, 1.3295320273062234, 1e-12);
    ASSERT_TRUE(s.jb && s.lb_raw && s.lb_abs);
    EXPECT_NEAR(s.lb_raw->statistic, 8.04141447818267, 1e-9);
}

TEST(DescriptiveStats, ShortSeriesOmitsTests) {
    const std::vector<double> x{1, -2, 3, 0.5, 2};
    const auto s = descriptive_stats(x, 20);
    EXPECT_FALSE(s.jb);
    EXPECT_FALSE(s.lb_raw);
    EXPECT_NEAR(s.mean_pct, 100.0 * 0.9, 1e-12);
}

TEST(DescriptiveStats, JsonHasNullForMissingTests) {
    const std::vector<double> x{1, -2, 3, 0.5, 2};
    const nlohmann::json j = descriptive_stats(x);
    EXPECT_TRUE(j.at("jb").is_null());
    EXPECT_TRUE(j.at("lb_abs").is_null());
    EXPECT_TRUE(j.at("excess_kurtosis").is_number());
}
