#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "scr/error.hpp"

namespace scr {

/// Insertion-ordered JSON used for all emitted artifacts so that reruns are
/// byte-identical.
using Json = nlohmann::ordered_json;

inline const Json& require_field(const Json& j, const char* key,
                                 const std::string& context) {
    const auto it = j.find(key);
    if (it == j.end()) fail(context, ": missing field '", key, "'");
    return *it;
}

inline std::string require_string(const Json& j, const char* key,
                                  const std::string& context) {
    const Json& v = require_field(j, key, context);
    if (!v.is_string())
        fail(context, ": field '", key, "' must be a string");
    return v.get<std::string>();
}

template <class T>
T field_or(const Json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '", path, "'");
    try {
        return Json::parse(in);
    } catch (const std::exception& e) {
        fail("'", path, "' is not valid JSON: ", e.what());
    }
}

inline void save_json_file(const std::string& path, const Json& j,
                           int indent = 2) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write '", path, "'");
    out << j.dump(indent) << '\n';
}

}  // namespace scr
