#include "unica/preprocess.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "unica/errors.hpp"

namespace unica {
namespace {

using namespace std::chrono;

struct Calendar {
    int hour;
    int weekday;  // Monday = 0
    int day;      // 1-based
    int month;    // 1-based
    int months_since_epoch;
    std::int64_t second_of_month;
};

Calendar calendar(std::int64_t ts) {
    const sys_seconds tp{seconds{ts}};
    const auto day_start = floor<days>(tp);
    const year_month_day ymd{day_start};
    const std::int64_t sod = (tp - day_start).count();
    const unsigned wd = weekday{day_start}.iso_encoding();  // Monday = 1
    const int m = static_cast<int>(static_cast<unsigned>(ymd.month()));
    const int d = static_cast<int>(static_cast<unsigned>(ymd.day()));
    return Calendar{static_cast<int>(sod / 3600),
                    static_cast<int>(wd) - 1,
                    d,
                    m,
                    static_cast<int>(ymd.year()) * 12 + (m - 1),
                    (d - 1) * 86400LL + sod};
}

void put_cycle(Tensor& out, std::size_t row, std::size_t col, double k, double period) {
    const double phase = 2.0 * std::numbers::pi * k / period;
    out.at(row, col) = std::sin(phase);
    out.at(row, col + 1) = std::cos(phase);
}

}  // namespace

Imputed forward_fill_impute(const MaybeSeries& values) {
    Imputed out;
    out.filled.resize(values.size());
    out.indicator.resize(values.size());
    std::optional<double> last;
    for (const auto& v : values) {
        if (v) {
            last = v;
            break;
        }
    }
    if (!last) throw DataError("forward_fill_impute: series has no observed values");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i]) {
            last = values[i];
            out.indicator[i] = 0.0;
        } else {
            out.indicator[i] = 1.0;
        }
        out.filled[i] = *last;
    }
    return out;
}

void check_regular_spacing(std::span<const std::int64_t> ts, Frequency freq) {
    for (std::size_t i = 1; i < ts.size(); ++i) {
        bool ok = false;
        switch (freq) {
            case Frequency::hourly: ok = ts[i] - ts[i - 1] == 3600; break;
            case Frequency::daily: ok = ts[i] - ts[i - 1] == 86400; break;
            case Frequency::weekly: ok = ts[i] - ts[i - 1] == 7 * 86400; break;
            case Frequency::monthly: {
                const auto a = calendar(ts[i - 1]);
                const auto b = calendar(ts[i]);
                ok = b.months_since_epoch == a.months_since_epoch + 1 && a.second_of_month == b.second_of_month;
                break;
            }
        }
        if (!ok)
            throw DataError("irregular " + to_string(freq) + " spacing at index " + std::to_string(i));
    }
}

Tensor time_features(std::span<const std::int64_t> ts, Frequency freq) {
    check_regular_spacing(ts, freq);
    const std::size_t f = time_feature_names(freq).size();
    Tensor out({ts.size(), f});
    for (std::size_t t = 0; t < ts.size(); ++t) {
        const auto c = calendar(ts[t]);
        switch (freq) {
            case Frequency::hourly:
                put_cycle(out, t, 0, c.hour, 24.0);
                put_cycle(out, t, 2, c.weekday, 7.0);
                put_cycle(out, t, 4, c.month - 1, 12.0);
                break;
            case Frequency::daily:
                put_cycle(out, t, 0, c.weekday, 7.0);
                put_cycle(out, t, 2, c.day - 1, 31.0);
                put_cycle(out, t, 4, c.month - 1, 12.0);
                break;
            case Frequency::weekly:
            case Frequency::monthly:
                put_cycle(out, t, 0, c.month - 1, 12.0);
                break;
        }
    }
    return out;
}

std::vector<std::string> time_feature_names(Frequency freq) {
    switch (freq) {
        case Frequency::hourly:
            return {"hour_sin", "hour_cos", "weekday_sin", "weekday_cos", "month_sin", "month_cos"};
        case Frequency::daily:
            return {"weekday_sin", "weekday_cos", "monthday_sin", "monthday_cos", "month_sin", "month_cos"};
        case Frequency::weekly:
        case Frequency::monthly:
            return {"month_sin", "month_cos"};
    }
    return {};
}

std::vector<std::string> known_real_channels(const Schema& s) {
    std::vector<std::string> out;
    for (const auto& d : s.known_real) out.push_back(d.name);
    if (s.time_features)
        for (const auto& n : time_feature_names(s.freq)) out.push_back("time:" + n);
    return out;
}

std::vector<std::string> past_real_channels(const Schema& s) {
    std::vector<std::string> out;
    for (const auto& d : s.past_real) out.push_back(d.name);
    for (const auto& d : s.known_real)
        if (d.nullable) out.push_back("missing:" + d.name);
    for (const auto& d : s.past_real)
        if (d.nullable) out.push_back("missing:" + d.name);
    return out;
}

PreparedDataset prepare(const Dataset& ds) {
    ds.validate();
    const Schema& s = ds.schema;
    PreparedDataset pd;
    pd.schema = s;
    pd.context = ds.context;
    pd.horizon = ds.horizon;
    pd.known_real_names = known_real_channels(s);
    pd.past_real_names = past_real_channels(s);

    for (const auto& r : ds.records) {
        const std::size_t n = r.length();
        PreparedSeries ps;
        ps.series_id = r.series_id;
        auto tgt = forward_fill_impute(r.target);
        ps.target = std::move(tgt.filled);
        ps.target_observed.resize(n);
        for (std::size_t t = 0; t < n; ++t) ps.target_observed[t] = 1.0 - tgt.indicator[t];

        const Tensor tf = s.time_features ? time_features(r.timestamps, s.freq) : Tensor({n, 0});
        ps.known_real = Tensor({n, pd.known_real_names.size()});
        ps.past_real = Tensor({n, pd.past_real_names.size()});
        std::vector<std::vector<double>> indicators;
        std::size_t col = 0;
        for (const auto& d : s.known_real) {
            auto imp = forward_fill_impute(r.dyn_known_real.at(d.name));
            for (std::size_t t = 0; t < n; ++t) ps.known_real.at(t, col) = imp.filled[t];
            if (d.nullable) indicators.push_back(std::move(imp.indicator));
            ++col;
        }
        for (std::size_t f = 0; f < tf.cols(); ++f, ++col)
            for (std::size_t t = 0; t < n; ++t) ps.known_real.at(t, col) = tf.at(t, f);

        col = 0;
        for (const auto& d : s.past_real) {
            auto imp = forward_fill_impute(r.past_real.at(d.name));
            for (std::size_t t = 0; t < n; ++t) ps.past_real.at(t, col) = imp.filled[t];
            if (d.nullable) indicators.push_back(std::move(imp.indicator));
            ++col;
        }
        // Indicators were collected known-first, matching past_real_names.
        for (const auto& ind : indicators) {
            for (std::size_t t = 0; t < n; ++t) ps.past_real.at(t, col) = ind[t];
            ++col;
        }

        for (const auto& d : s.known_cat) ps.known_cat.push_back(r.dyn_known_cat.at(d.name));
        for (const auto& d : s.static_cat) ps.static_cat.push_back(r.static_cat.at(d.name));
        for (const auto& d : s.static_real) ps.static_real.push_back(r.static_real.at(d.name).value_or(0.0));
        for (const auto& d : s.het) ps.het.push_back(r.het_features.at(d.name).values);
        pd.series.push_back(std::move(ps));
    }
    return pd;
}

namespace {

Tensor slice_rows(const Tensor& m, std::size_t begin, std::size_t count) {
    const std::size_t c = m.cols();
    std::vector<double> data(m.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                             m.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
    return Tensor({count, c}, std::move(data));
}

}  // namespace

WindowData make_window(const PreparedDataset& pd, const Window& w) {
    if (w.series >= pd.series.size()) throw DataError("window refers to unknown series");
    const auto& ps = pd.series[w.series];
    const std::size_t T = pd.context, H = pd.horizon;
    if (w.origin < T || w.origin + H > ps.length())
        throw DataError("window at origin " + std::to_string(w.origin) + " does not fit series '" + ps.series_id + "'");
    const std::size_t b = w.origin - T;
    WindowData out;
    out.series_id = ps.series_id;
    out.origin = w.origin;
    out.history.assign(ps.target.begin() + b, ps.target.begin() + w.origin);
    out.history_observed.assign(ps.target_observed.begin() + b, ps.target_observed.begin() + w.origin);
    out.future.assign(ps.target.begin() + w.origin, ps.target.begin() + w.origin + H);
    out.known_real = slice_rows(ps.known_real, b, T + H);
    for (const auto& ids : ps.known_cat) out.known_cat.emplace_back(ids.begin() + b, ids.begin() + w.origin + H);
    out.past_real = slice_rows(ps.past_real, b, T);
    for (std::size_t i = 0; i < ps.het.size(); ++i)
        out.het.push_back(slice_rows(ps.het[i], b, pd.schema.het[i].future_known ? T + H : T));
    out.static_cat = ps.static_cat;
    out.static_real = ps.static_real;
    return out;
}

}  // namespace unica
