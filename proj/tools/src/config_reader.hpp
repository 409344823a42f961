#pragma once

#include <set>
#include <string>
#include <utility>

#include "unica/errors.hpp"
#include "unica/json_io.hpp"

namespace unica::cli {

/// Strict view over one JSON object: every key must be consumed before
/// finish(), and ill-typed values raise ConfigError naming the field.
class ConfigReader {
public:
    ConfigReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json* find(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        return convert<T>(key, *v);
    }

    template <class T>
    T require(const std::string& key) {
        const Json* v = find(key);
        if (!v) throw ConfigError(where_ + ": missing required field '" + key + "'");
        return convert<T>(key, *v);
    }

    const Json& object(const std::string& key) {
        static const Json empty = Json::object();
        const Json* v = find(key);
        if (!v) return empty;
        if (!v->is_object()) throw ConfigError(where_ + " field '" + key + "' must be a JSON object");
        return *v;
    }

    void finish() const {
        for (const auto& [key, v] : j_.items())
            if (!used_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
    }

private:
    template <class T>
    T convert(const std::string& key, const Json& v) const {
        try {
            return v.get<T>();
        } catch (const Json::exception& e) {
            throw ConfigError(where_ + " field '" + key + "': " + e.what());
        }
    }

    const Json& j_;
    std::string where_;
    std::set<std::string> used_;
};

}  // namespace unica::cli
