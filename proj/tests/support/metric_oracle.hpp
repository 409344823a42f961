#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "unica/metrics.hpp"

namespace unica::testing {

inline const std::vector<double> kLevels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

inline EvalFrame frame(std::vector<double> y, const std::vector<std::vector<double>>& q, std::string id = "s", std::size_t origin = 0) {
    std::vector<double> flat;
    for (const auto& row : q) flat.insert(flat.end(), row.begin(), row.end());
    const std::size_t k = q.empty() ? 0 : q[0].size();
    return {std::move(id), origin, std::move(y), Tensor({q.size(), k}, flat)};
}

// Independent restatement of the scoring formulas over flattened arrays.
struct Oracle {
    std::vector<double> y;
    std::vector<std::vector<double>> q;  // per level

    explicit Oracle(const std::vector<EvalFrame>& frames) : q(kLevels.size()) {
        for (const auto& f : frames)
            for (std::size_t h = 0; h < f.y.size(); ++h) {
                y.push_back(f.y[h]);
                for (std::size_t k = 0; k < kLevels.size(); ++k) q[k].push_back(f.quantiles[h * kLevels.size() + k]);
            }
    }
    double lambda(double a, double qq, double yy) const { return yy >= qq ? a * (yy - qq) : (1.0 - a) * (qq - yy); }
    double wql(std::size_t k) const {
        long double num = 0, den = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            num += lambda(kLevels[k], q[k][i], y[i]);
            den += std::fabs(y[i]);
        }
        return static_cast<double>(2 * num / den);
    }
    double crps() const {
        long double s = 0;
        for (std::size_t k = 0; k < kLevels.size(); ++k) s += wql(k);
        return static_cast<double>(s / kLevels.size());
    }
    double mae() const {
        long double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - q[4][i]);
        return static_cast<double>(s / y.size());
    }
    double mse() const {
        long double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - q[4][i]) * (y[i] - q[4][i]);
        return static_cast<double>(s / y.size());
    }
    double mape() const {
        long double s = 0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] != 0.0) {
                s += std::fabs((y[i] - q[4][i]) / y[i]);
                ++n;
            }
        return static_cast<double>(s / n);
    }
};

inline std::vector<EvalFrame> random_frames(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nf(1, 4), nh(1, 6);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<EvalFrame> out;
    const int frames = nf(rng);
    for (int f = 0; f < frames; ++f) {
        const int h = nh(rng);
        std::vector<double> y;
        std::vector<std::vector<double>> q;
        for (int t = 0; t < h; ++t) {
            y.push_back(u(rng) > 4.0 ? 0.0 : u(rng));
            std::vector<double> row;
            for (std::size_t k = 0; k < kLevels.size(); ++k) row.push_back(u(rng));
            q.push_back(row);
        }
        out.push_back(frame(y, q, "s" + std::to_string(f), static_cast<std::size_t>(f)));
    }
    return out;
}

}  // namespace unica::testing
