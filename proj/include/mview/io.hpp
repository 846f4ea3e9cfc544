#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace mview {

/// Writes through a temporary sibling file and renames it into place, so a
/// failed write never leaves a truncated file under `path`.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer, bool binary = false);

/// Shortest decimal form that round-trips exactly.
std::string format_double(double x);
double parse_double(const std::string& s);

std::ifstream open_input(const std::filesystem::path& path);

}  // namespace mview
