// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

namespace xlat::resources {

/// Resolve the bundled resource directory (label tables, script tables,
/// golden prompts). Order: explicit override, XLAT_RESOURCES environment
/// variable, compiled-in source location.
std::filesystem::path resource_dir(
    const std::filesystem::path& override_dir = {});

std::filesystem::path label_table(const std::filesystem::path& resources,
                                  bool slot_filling);

}  // namespace xlat::resources
