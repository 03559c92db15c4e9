// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace csimap {

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, std::string_view bytes);

std::string read_file(const std::string& path);

} // namespace csimap
