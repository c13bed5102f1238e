#pragma once

// Price ingestion, excess growth rates and the descriptive statistics /
// stylized-fact tests reported for an observed series.

#include "qhmm/error.hpp"
#include "qhmm/numeric/distributions.hpp"
#include "qhmm/numeric/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qhmm {

/// Calendar date parsed from ISO-8601 (YYYY-MM-DD, optional time suffix ignored).
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static std::optional<Date> parse(std::string_view s) {
        if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        if (s.size() > 10 && s[10] != 'T' && s[10] != ' ') return std::nullopt;
        auto field = [&](std::size_t pos, std::size_t len, int& out) {
            const char* first = s.data() + pos;
            const auto [ptr, ec] = std::from_chars(first, first + len, out);
            return ec == std::errc{} && ptr == first + len;
        };
        Date d;
        if (!field(0, 4, d.year) || !field(5, 2, d.month) || !field(8, 2, d.day)) return std::nullopt;
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return std::nullopt;
        return d;
    }
};

struct PriceSeries {
    std::string ticker;
    std::vector<Date> dates;
    std::vector<double> close;

    std::size_t size() const noexcept { return close.size(); }
};

/// Excess growth rates in year^-1 units.
struct GrowthSeries {
    std::string ticker;
    std::vector<double> values;
    double delta_t = 1.0 / 252.0;
    double risk_free = 0.0;

    std::size_t size() const noexcept { return values.size(); }
};

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;

    bool reject_at(double alpha) const noexcept { return p_value < alpha; }
};

struct StatsSummary {
    double mean_pct = 0.0;
    double std_pct = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    std::optional<TestResult> jb;
    std::optional<TestResult> lb_raw;
    std::optional<TestResult> lb_abs;
};

inline void to_json(nlohmann::json& j, const TestResult& t) {
    j = nlohmann::json{{"statistic", t.statistic}, {"p_value", t.p_value}};
}

inline void from_json(const nlohmann::json& j, TestResult& t) {
    j.at("statistic").get_to(t.statistic);
    j.at("p_value").get_to(t.p_value);
}

inline void to_json(nlohmann::json& j, const StatsSummary& s) {
    auto opt = [](const std::optional<TestResult>& t) {
        return t ? nlohmann::json(*t) : nlohmann::json(nullptr);
    };
    j = nlohmann::json{{"mean_pct", s.mean_pct},
                       {"std_pct", s.std_pct},
                       {"skewness", s.skewness},
                       {"excess_kurtosis", s.excess_kurtosis},
                       {"jb", opt(s.jb)},
                       {"lb_raw", opt(s.lb_raw)},
                       {"lb_abs", opt(s.lb_abs)}};
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace detail

/// Parse a price CSV from a stream. A header row naming at least `date` and
/// `close` is required; other columns are ignored. Rows are returned sorted by date.
inline PriceSeries parse_price_csv(std::istream& in, const std::string& ticker) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> date_col, close_col;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto header = detail::split_csv_line(line);
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto name = detail::lower(header[c]);
            if (name == "date") date_col = c;
            if (name == "close") close_col = c;
        }
        break;
    }
    if (!date_col || !close_col) throw ParseError("header must contain 'date' and 'close' columns", line_no);

    struct Row {
        Date date;
        double close;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() <= std::max(*date_col, *close_col))
            throw ParseError("expected at least " + std::to_string(std::max(*date_col, *close_col) + 1) +
                                 " fields",
                             line_no);
        const auto date = Date::parse(fields[*date_col]);
        if (!date) throw ParseError("invalid ISO-8601 date '" + fields[*date_col] + "'", line_no);
        double close = 0.0;
        const auto& cf = fields[*close_col];
        const auto [ptr, ec] = std::from_chars(cf.data(), cf.data() + cf.size(), close);
        if (ec != std::errc{} || ptr != cf.data() + cf.size())
            throw ParseError("invalid close price '" + cf + "'", line_no);
        if (!(close > 0.0) || !std::isfinite(close))
            throw DataError("line " + std::to_string(line_no) + ": close price must be positive, got " + cf);
        rows.push_back({*date, close, line_no});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].date == rows[i - 1].date)
            throw DataError("duplicate date " + rows[i].date.to_string() + " (line " +
                            std::to_string(rows[i].line) + ")");

    PriceSeries out;
    out.ticker = ticker;
    out.dates.reserve(rows.size());
    out.close.reserve(rows.size());
    for (const auto& r : rows) {
        out.dates.push_back(r.date);
        out.close.push_back(r.close);
    }
    return out;
}

inline PriceSeries load_price_series(const std::string& path, const std::string& ticker) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file '" + path + "'");
    return parse_price_csv(in, ticker);
}

/// G_j = ln(P_j / P_{j-1}) / delta_t - r_f.
inline GrowthSeries compute_growth_rates(const PriceSeries& prices, double r_f, double delta_t = 1.0 / 252.0) {
    if (prices.size() < 2) throw DataError("price series '" + prices.ticker + "' needs at least 2 rows");
    if (!(delta_t > 0.0)) throw ConfigError("delta_t must be positive");
    GrowthSeries g;
    g.ticker = prices.ticker;
    g.delta_t = delta_t;
    g.risk_free = r_f;
    g.values.reserve(prices.size() - 1);
    for (std::size_t j = 1; j < prices.size(); ++j) {
        const double v = std::log(prices.close[j] / prices.close[j - 1]) / delta_t - r_f;
        if (!std::isfinite(v)) throw NumericError("non-finite growth rate at index " + std::to_string(j));
        g.values.push_back(v);
    }
    return g;
}

/// Jarque-Bera: n/6 (S^2 + K^2/4) against chi-square(2).
inline TestResult jarque_bera(std::span<const double> x) {
    if (x.size() < 8) throw NumericError("jarque_bera needs at least 8 observations");
    const double s = numeric::skewness(x);
    const double k = numeric::excess_kurtosis(x);
    TestResult r;
    r.statistic = static_cast<double>(x.size()) / 6.0 * (s * s + k * k / 4.0);
    r.p_value = numeric::chi2_sf(r.statistic, 2.0);
    return r;
}

inline TestResult jarque_bera(const GrowthSeries& g) { return jarque_bera(g.values); }

/// Ljung-Box Q = n(n+2) sum_{k<=lag} rho_k^2 / (n-k) against chi-square(lag).
inline TestResult ljung_box(std::span<const double> x, std::size_t lag) {
    if (lag == 0 || 2 * lag >= x.size()) throw NumericError("ljung_box requires 0 < lag < n/2");
    const auto rho = numeric::autocorrelation(x, lag);
    const double n = static_cast<double>(x.size());
    double q = 0.0;
    for (std::size_t k = 1; k <= lag; ++k) q += rho[k - 1] * rho[k - 1] / (n - static_cast<double>(k));
    TestResult r;
    r.statistic = n * (n + 2.0) * q;
    r.p_value = numeric::chi2_sf(r.statistic, static_cast<double>(lag));
    return r;
}

/// Moments in percent of year^-1 plus the stylized-fact tests. The tests are
/// attached only when the series is long enough for them (JB: n >= 8,
/// LB: n > 2*lb_lag).
inline StatsSummary descriptive_stats(std::span<const double> x, std::size_t lb_lag = 20) {
    if (x.size() < 4) throw NumericError("descriptive_stats needs at least 4 observations");
    StatsSummary s;
    s.skewness = numeric::skewness(x);  // throws on zero variance
    s.excess_kurtosis = numeric::excess_kurtosis(x);
    s.mean_pct = 100.0 * numeric::mean(x);
    s.std_pct = 100.0 * numeric::stddev(x);
    if (x.size() >= 8) s.jb = jarque_bera(x);
    if (2 * lb_lag < x.size()) {
        s.lb_raw = ljung_box(x, lb_lag);
        std::vector<double> abs_x(x.size());
        std::transform(x.begin(), x.end(), abs_x.begin(), [](double v) { return std::abs(v); });
        s.lb_abs = ljung_box(abs_x, lb_lag);
    }
    return s;
}

inline StatsSummary descriptive_stats(const GrowthSeries& g, std::size_t lb_lag = 20) {
    return descriptive_stats(g.values, lb_lag);
}

} // namespace qhmm
