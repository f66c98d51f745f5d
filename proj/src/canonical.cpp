/* Copyright 2026 The ChainCI Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "chainci/canonical.hpp"

namespace chainci {

namespace {

void reject_unsupported(const json& v, const std::string& path) {
    switch (v.type()) {
    case json::value_t::number_float:
        throw Error("UnsupportedValue", "float at " + path + " (canonical encoding forbids floats)");
    case json::value_t::binary:
        throw Error("UnsupportedValue", "raw binary at " + path + " (encode byte strings as base64 text)");
    case json::value_t::discarded:
        throw Error("UnsupportedValue", "discarded value at " + path);
    case json::value_t::object:
        for (const auto& [key, child] : v.items()) {
            reject_unsupported(child, path + "." + key);
        }
        break;
    case json::value_t::array: {
        std::size_t i = 0;
        for (const auto& child : v) {
            reject_unsupported(child, path + "[" + std::to_string(i++) + "]");
        }
        break;
    }
    default:
        break; // string, integer, unsigned, boolean, null
    }
}

} // namespace

std::string canonical_encode(const json& value) {
    reject_unsupported(value, "$");
    // nlohmann keeps object keys in a std::map<std::string, ...>, which is
    // bytewise-ascending order; dump(-1) emits no whitespace.
    return value.dump();
}

json canonical_decode(std::string_view text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) {
        throw Error("BadEncoding", "not valid JSON");
    }
    return v;
}

bool is_canonical(std::string_view text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) {
        return false;
    }
    try {
        return canonical_encode(v) == text;
    } catch (const Error&) {
        return false;
    }
}

} // namespace chainci
