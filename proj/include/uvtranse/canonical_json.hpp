// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "json.hpp"

namespace uvt {

using Json = nlohmann::json;

/// Compact JSON with sorted object keys and doubles printed with 17
/// significant digits, so parsing the text back yields bit-identical values.
/// Throws DomainError on non-finite numbers.
std::string canonical_dump(const Json& value);

/// Writes canonical_dump(value) plus a trailing newline.
void write_canonical_file(const std::string& path, const Json& value);

Json read_json_file(const std::string& path);

}  // namespace uvt
