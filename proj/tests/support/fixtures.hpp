#pragma once

#include <filesystem>
#include <string>

#include "sitesel/ingestion.hpp"

namespace testing_support {

inline std::filesystem::path fixture_dir(const std::string& name) {
  return std::filesystem::path(SITESEL_FIXTURE_DIR) / name;
}

inline sitesel::SnapshotPtr case_study() { return sitesel::load_bundle(fixture_dir("case_study")); }

inline sitesel::SnapshotPtr table2() { return sitesel::load_bundle(fixture_dir("table2")); }

inline constexpr sitesel::TimePoint kT0{2016, 1};

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sitesel_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
