#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gbpl/nnet.hpp"

namespace gbpl::csv {

struct Table {
  std::vector<std::string> header;
  Matrix values;  // rows x header.size()

  /// Column index of `name`; throws if absent.
  Eigen::Index column(const std::string& name) const;
};

/// Header row followed by numeric rows. Throws IoError on missing files,
/// ragged rows or non-numeric cells.
Table read(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const Matrix& values);

}  // namespace gbpl::csv
