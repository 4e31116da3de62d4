#pragma once

#include <string>

#include <json.hpp>

#include "ztwin/csv.hpp"
#include "ztwin/errors.hpp"

namespace ztwin {

inline nlohmann::json read_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("not valid JSON: " + path);
    return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    write_text_file(path, j.dump(2) + "\n");
}

} // namespace ztwin
