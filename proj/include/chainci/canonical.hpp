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

#pragma once

#include <nlohmann/json.hpp>

#include "chainci/common.hpp"

namespace chainci {

using json = nlohmann::json;

/// Canonical JSON: UTF-8, object keys sorted bytewise ascending, no
/// insignificant whitespace, integers in minimal decimal form. Floats and
/// raw binary values are rejected (UnsupportedValue) so the encoding is a
/// stable hashing pre-image; byte strings travel as base64 text.
std::string canonical_encode(const json& value);

json canonical_decode(std::string_view text);

/// True when `text` is exactly the canonical encoding of the value it parses
/// to. Used when loading hash-covered files from disk.
bool is_canonical(std::string_view text);

} // namespace chainci
