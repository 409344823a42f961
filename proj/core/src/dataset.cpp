#include "unica/dataset.hpp"

#include <cmath>
#include <set>

#include "unica/errors.hpp"
#include "unica/preprocess.hpp"

namespace unica {
namespace {

[[noreturn]] void fail(const SeriesRecord& r, const std::string& what) {
    throw DataError("record '" + r.series_id + "': " + what);
}

Json maybe_to_json(const MaybeSeries& s) {
    Json a = Json::array();
    for (const auto& v : s) a.push_back(v ? Json(*v) : Json(nullptr));
    return a;
}

MaybeSeries maybe_from_json(const Json& j) {
    MaybeSeries out;
    out.reserve(j.size());
    for (const auto& v : j.get_ref<const Json::array_t&>()) {
        if (v.is_null()) {
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(v.get<double>());
        }
    }
    return out;
}

Json real_decls_to_json(const std::vector<RealDecl>& v) {
    Json a = Json::array();
    for (const auto& d : v) a.push_back({{"name", d.name}, {"nullable", d.nullable}});
    return a;
}

Json cat_decls_to_json(const std::vector<CategoricalDecl>& v) {
    Json a = Json::array();
    for (const auto& d : v) a.push_back({{"name", d.name}, {"vocab", d.vocab}});
    return a;
}

std::vector<RealDecl> real_decls_from_json(const Json& j) {
    std::vector<RealDecl> out;
    for (const auto& d : j) out.push_back({d.at("name").get<std::string>(), d.value("nullable", false)});
    return out;
}

std::vector<CategoricalDecl> cat_decls_from_json(const Json& j) {
    std::vector<CategoricalDecl> out;
    for (const auto& d : j) out.push_back({d.at("name").get<std::string>(), d.at("vocab").get<std::size_t>()});
    return out;
}

const Json& object_field(const Json& j, const char* key) {
    static const Json empty = Json::object();
    const auto it = j.find(key);
    return it == j.end() ? empty : *it;
}

void check_length(const SeriesRecord& r, const std::string& field, std::size_t got) {
    if (got != r.length())
        fail(r, field + " has length " + std::to_string(got) + ", expected " + std::to_string(r.length()));
}

template <typename Map, typename Decls>
void check_keys(const SeriesRecord& r, const std::string& field, const Map& m, const Decls& decls) {
    std::set<std::string> want;
    for (const auto& d : decls) want.insert(d.name);
    for (const auto& [k, v] : m)
        if (!want.count(k)) fail(r, field + " has undeclared covariate '" + k + "'");
    for (const auto& k : want)
        if (!m.count(k)) fail(r, field + " is missing covariate '" + k + "'");
}

void check_finite(const SeriesRecord& r, const std::string& field, const MaybeSeries& s, bool nullable) {
    for (const auto& v : s) {
        if (!v) {
            if (!nullable) fail(r, field + " contains missing values but is not declared nullable");
        } else if (!std::isfinite(*v)) {
            fail(r, field + " contains a non-finite value");
        }
    }
}

}  // namespace

std::string to_string(Frequency f) {
    switch (f) {
        case Frequency::hourly: return "hourly";
        case Frequency::daily: return "daily";
        case Frequency::weekly: return "weekly";
        case Frequency::monthly: return "monthly";
    }
    return "hourly";
}

Frequency parse_frequency(std::string_view s) {
    if (s == "hourly") return Frequency::hourly;
    if (s == "daily") return Frequency::daily;
    if (s == "weekly") return Frequency::weekly;
    if (s == "monthly") return Frequency::monthly;
    throw ConfigError("unknown frequency '" + std::string(s) + "'");
}

std::vector<std::string> Schema::names() const {
    std::vector<std::string> out;
    for (const auto& d : static_cat) out.push_back(d.name);
    for (const auto& d : static_real) out.push_back(d.name);
    for (const auto& d : known_real) out.push_back(d.name);
    for (const auto& d : known_cat) out.push_back(d.name);
    for (const auto& d : past_real) out.push_back(d.name);
    for (const auto& d : het) out.push_back(d.name);
    return out;
}

bool Schema::has_name(std::string_view name) const {
    for (const auto& n : names())
        if (n == name) return true;
    return false;
}

void Dataset::validate() const {
    if (horizon == 0 || context == 0) throw DataError("horizon and context must be positive");
    {
        std::set<std::string> seen;
        for (const auto& n : schema.names())
            if (n.empty() || !seen.insert(n).second) throw DataError("duplicate or empty covariate name '" + n + "'");
        for (const auto& d : schema.static_cat)
            if (d.vocab == 0) throw DataError("categorical '" + d.name + "' has empty vocabulary");
        for (const auto& d : schema.known_cat)
            if (d.vocab == 0) throw DataError("categorical '" + d.name + "' has empty vocabulary");
        for (const auto& d : schema.het)
            if (d.dim == 0) throw DataError("heterogeneous covariate '" + d.name + "' has zero width");
    }
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.series_id).second) fail(r, "duplicate series_id");
        if (r.freq != schema.freq) fail(r, "frequency differs from schema");
        if (r.length() == 0) fail(r, "empty series");
        check_regular_spacing(r.timestamps, r.freq);
        check_length(r, "target", r.target.size());
        check_finite(r, "target", r.target, schema.target_nullable);

        check_keys(r, "static_cat", r.static_cat, schema.static_cat);
        for (const auto& d : schema.static_cat)
            if (r.static_cat.at(d.name) >= d.vocab) fail(r, "static_cat '" + d.name + "' id out of vocabulary");
        check_keys(r, "static_real", r.static_real, schema.static_real);
        for (const auto& d : schema.static_real) {
            const auto& v = r.static_real.at(d.name);
            if (!v && !d.nullable) fail(r, "static_real '" + d.name + "' is missing but not nullable");
            if (v && !std::isfinite(*v)) fail(r, "static_real '" + d.name + "' is not finite");
        }

        check_keys(r, "dyn_known_real", r.dyn_known_real, schema.known_real);
        for (const auto& d : schema.known_real) {
            const auto& s = r.dyn_known_real.at(d.name);
            check_length(r, "dyn_known_real '" + d.name + "'", s.size());
            check_finite(r, "dyn_known_real '" + d.name + "'", s, d.nullable);
        }
        check_keys(r, "dyn_known_cat", r.dyn_known_cat, schema.known_cat);
        for (const auto& d : schema.known_cat) {
            const auto& s = r.dyn_known_cat.at(d.name);
            check_length(r, "dyn_known_cat '" + d.name + "'", s.size());
            for (auto id : s)
                if (id >= d.vocab) fail(r, "dyn_known_cat '" + d.name + "' id out of vocabulary");
        }
        check_keys(r, "past_real", r.past_real, schema.past_real);
        for (const auto& d : schema.past_real) {
            const auto& s = r.past_real.at(d.name);
            check_length(r, "past_real '" + d.name + "'", s.size());
            check_finite(r, "past_real '" + d.name + "'", s, d.nullable);
        }
        check_keys(r, "het_features", r.het_features, schema.het);
        for (const auto& d : schema.het) {
            const auto& h = r.het_features.at(d.name);
            if (h.values.rank() != 2 || h.values.rows() != r.length() || h.values.cols() != d.dim)
                fail(r, "het_features '" + d.name + "' has shape " + shape_str(h.values.shape()));
            if (h.future_known != d.future_known) fail(r, "het_features '" + d.name + "' future_known differs from schema");
        }
    }
}

Json to_json(const Schema& s) {
    Json het = Json::array();
    for (const auto& d : s.het) het.push_back({{"name", d.name}, {"dim", d.dim}, {"future_known", d.future_known}});
    return Json{{"freq", to_string(s.freq)},
                {"target_nullable", s.target_nullable},
                {"time_features", s.time_features},
                {"static_cat", cat_decls_to_json(s.static_cat)},
                {"static_real", real_decls_to_json(s.static_real)},
                {"known_real", real_decls_to_json(s.known_real)},
                {"known_cat", cat_decls_to_json(s.known_cat)},
                {"past_real", real_decls_to_json(s.past_real)},
                {"het", het}};
}

Schema schema_from_json(const Json& j) {
    try {
        Schema s;
        s.freq = parse_frequency(j.at("freq").get<std::string>());
        s.target_nullable = j.value("target_nullable", false);
        s.time_features = j.value("time_features", true);
        if (j.contains("static_cat")) s.static_cat = cat_decls_from_json(j["static_cat"]);
        if (j.contains("static_real")) s.static_real = real_decls_from_json(j["static_real"]);
        if (j.contains("known_real")) s.known_real = real_decls_from_json(j["known_real"]);
        if (j.contains("known_cat")) s.known_cat = cat_decls_from_json(j["known_cat"]);
        if (j.contains("past_real")) s.past_real = real_decls_from_json(j["past_real"]);
        if (j.contains("het"))
            for (const auto& d : j["het"])
                s.het.push_back({d.at("name").get<std::string>(), d.at("dim").get<std::size_t>(), d.value("future_known", true)});
        return s;
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed schema: ") + e.what());
    }
}

Json to_json(const Dataset& ds) {
    Json records = Json::array();
    for (const auto& r : ds.records) {
        Json rec;
        rec["series_id"] = r.series_id;
        rec["freq"] = to_string(r.freq);
        rec["timestamps"] = r.timestamps;
        rec["target"] = maybe_to_json(r.target);
        rec["static_cat"] = Json::object();
        for (const auto& [k, v] : r.static_cat) rec["static_cat"][k] = v;
        rec["static_real"] = Json::object();
        for (const auto& [k, v] : r.static_real) rec["static_real"][k] = v ? Json(*v) : Json(nullptr);
        rec["dyn_known_real"] = Json::object();
        for (const auto& [k, v] : r.dyn_known_real) rec["dyn_known_real"][k] = maybe_to_json(v);
        rec["dyn_known_cat"] = Json::object();
        for (const auto& [k, v] : r.dyn_known_cat) rec["dyn_known_cat"][k] = v;
        rec["past_real"] = Json::object();
        for (const auto& [k, v] : r.past_real) rec["past_real"][k] = maybe_to_json(v);
        rec["het_features"] = Json::object();
        for (const auto& [k, h] : r.het_features) {
            Json rows = Json::array();
            for (std::size_t t = 0; t < h.values.rows(); ++t) {
                Json row = Json::array();
                for (std::size_t c = 0; c < h.values.cols(); ++c) row.push_back(h.values.at(t, c));
                rows.push_back(std::move(row));
            }
            rec["het_features"][k] = {{"future_known", h.future_known}, {"values", rows}};
        }
        records.push_back(std::move(rec));
    }
    return Json{{"schema", to_json(ds.schema)}, {"horizon", ds.horizon}, {"context", ds.context}, {"records", records}};
}

Dataset dataset_from_json(const Json& j) {
    Dataset ds;
    try {
        ds.schema = schema_from_json(j.at("schema"));
        ds.horizon = j.at("horizon").get<std::size_t>();
        ds.context = j.at("context").get<std::size_t>();
        for (const auto& rj : j.at("records")) {
            SeriesRecord r;
            r.series_id = rj.at("series_id").get<std::string>();
            r.freq = parse_frequency(rj.at("freq").get<std::string>());
            r.timestamps = rj.at("timestamps").get<std::vector<std::int64_t>>();
            r.target = maybe_from_json(rj.at("target"));
            for (const auto& [k, v] : object_field(rj, "static_cat").items()) r.static_cat[k] = v.get<std::size_t>();
            for (const auto& [k, v] : object_field(rj, "static_real").items())
                r.static_real[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            for (const auto& [k, v] : object_field(rj, "dyn_known_real").items()) r.dyn_known_real[k] = maybe_from_json(v);
            for (const auto& [k, v] : object_field(rj, "dyn_known_cat").items())
                r.dyn_known_cat[k] = v.get<std::vector<std::size_t>>();
            for (const auto& [k, v] : object_field(rj, "past_real").items()) r.past_real[k] = maybe_from_json(v);
            for (const auto& [k, v] : object_field(rj, "het_features").items()) {
                const auto& rows = v.at("values");
                const std::size_t n = rows.size();
                const std::size_t dim = n ? rows[0].size() : 0;
                std::vector<double> data;
                data.reserve(n * dim);
                for (const auto& row : rows) {
                    if (row.size() != dim) throw DataError("record '" + r.series_id + "': ragged het_features '" + k + "'");
                    for (const auto& x : row) data.push_back(x.get<double>());
                }
                r.het_features[k] = HetSeries{Tensor({n, dim}, std::move(data)), v.value("future_known", true)};
            }
            ds.records.push_back(std::move(r));
        }
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    } catch (const NumericError& e) {
        throw DataError(e.what());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed dataset: ") + e.what());
    }
    ds.validate();
    return ds;
}

std::string serialize(const Dataset& ds) { return dump_stable(to_json(ds)) + "\n"; }

void save_dataset(const std::filesystem::path& path, const Dataset& ds) { write_text_file(path, serialize(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return dataset_from_json(read_json_file(path)); }

}  // namespace unica
