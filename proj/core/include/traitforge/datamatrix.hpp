#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "traitforge/errors.hpp"

namespace traitforge {

// Observations x named numeric variables, optionally with per-row group
// labels. No missing values: ingestion drops incomplete rows before building
// one of these.
struct DataMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;           // rows x names.size()
  std::vector<std::string> groups;  // empty, or one label per row

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  int column_or_throw(const std::string& name) const {
    const int index = column(name);
    if (index < 0) throw ValidationError("no such variable: " + name);
    return index;
  }
};

}  // namespace traitforge
