#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mview {

using Index = std::int64_t;
using NodeId = std::string;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A facet of the item data. Each view has its own graph and embedding space.
enum class View { item, category, shop };

std::string_view to_string(View v);
View view_from_string(std::string_view s);
/// Single-letter task tag used in task names ("I", "C", "S").
std::string_view view_tag(View v);

/// Bad configuration, schema or I/O. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a structural contract (e.g. an item with two categories).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or divergence. Maps to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mview
