#include "facesketch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "facesketch/errors.hpp"

namespace facesketch {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWindow);
    const int half = kWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-mode Gaussian filter: rows first, then columns.
std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w,
                                const std::vector<double>& k) {
    const int oh = h - kWindow + 1, ow = w - kWindow + 1;
    std::vector<double> rows(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i) s += k[i] * img[static_cast<size_t>(y) * w + x + i];
            rows[static_cast<size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWindow; ++i)
                s += k[i] * rows[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace

double ssim(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b)) throw ValidationError("ssim requires images of identical shape");
    if (a.height < kWindow || a.width < kWindow)
        throw ValidationError("ssim requires images of at least " + std::to_string(kWindow) + "x" +
                              std::to_string(kWindow));

    const std::vector<double> x = to_gray(a);
    const std::vector<double> y = to_gray(b);
    const int h = a.height, w = a.width;
    const size_t n = x.size();

    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }

    const std::vector<double> k = gaussian_kernel();
    const std::vector<double> mu_x = gauss_valid(x, h, w, k);
    const std::vector<double> mu_y = gauss_valid(y, h, w, k);
    const std::vector<double> m_xx = gauss_valid(xx, h, w, k);
    const std::vector<double> m_yy = gauss_valid(yy, h, w, k);
    const std::vector<double> m_xy = gauss_valid(xy, h, w, k);

    double total = 0.0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double var_x = m_xx[i] - mx * mx;
        const double var_y = m_yy[i] - my * my;
        const double cov = m_xy[i] - mx * my;
        const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
        const double den = (mx * mx + my * my + kC1) * (var_x + var_y + kC2);
        total += num / den;
    }
    return total / static_cast<double>(mu_x.size());
}

AggregateTable aggregate(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw ValidationError("cannot aggregate an empty metric set");
    std::set<std::pair<std::string, int>> seen;
    for (const MetricRecord& r : records)
        if (!seen.insert({r.pair_id, r.budget}).second)
            throw ValidationError("duplicate metric record for pair '" + r.pair_id +
                                  "' at budget " + std::to_string(r.budget));

    std::map<int, std::pair<double, size_t>> sums;
    for (const MetricRecord& r : records) {
        sums[r.budget].first += r.ssim;
        sums[r.budget].second += 1;
    }

    AggregateTable table;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [budget, sc] : sums) {
        const double mean = sc.first / static_cast<double>(sc.second);
        table.per_budget.push_back({budget, mean, sc.second});
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
    }
    table.spread = hi - lo;
    return table;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
    out << "pair_id,budget,ssim,runtime_s\n";
    out << std::setprecision(9);
    for (const MetricRecord& r : records)
        out << r.pair_id << ',' << r.budget << ',' << r.ssim << ',' << r.runtime_s << '\n';
}

std::string format_table(const AggregateTable& table) {
    std::ostringstream out;
    out << "budget  mean_ssim  count\n";
    out << std::fixed << std::setprecision(4);
    for (const BudgetSummary& s : table.per_budget)
        out << std::setw(6) << s.budget << "  " << std::setw(9) << s.mean_ssim << "  "
            << std::setw(5) << s.count << '\n';
    out << "spread (max - min of means): " << table.spread << '\n';
    return out.str();
}

} // namespace facesketch
