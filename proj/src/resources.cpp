// SPDX-License-Identifier: Apache-2.0

#include "xlat/resources.hpp"

#include <cstdlib>
#include <stdexcept>

#ifndef XLAT_DEFAULT_RESOURCE_DIR
#define XLAT_DEFAULT_RESOURCE_DIR ""
#endif

namespace xlat::resources {

std::filesystem::path resource_dir(const std::filesystem::path& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("XLAT_RESOURCES"); env != nullptr && *env) {
    return env;
  }
  std::filesystem::path compiled = XLAT_DEFAULT_RESOURCE_DIR;
  if (!compiled.empty()) return compiled;
  throw std::runtime_error(
      "no resource directory: pass --resources or set XLAT_RESOURCES");
}

std::filesystem::path label_table(const std::filesystem::path& resources,
                                  bool slot_filling) {
  return resources / "labels" /
         (slot_filling ? "massive_slots.txt" : "naamapadam_ner.txt");
}

}  // namespace xlat::resources
