#include "mview/common.hpp"

namespace mview {

std::string_view to_string(View v) {
  switch (v) {
    case View::item: return "item";
    case View::category: return "category";
    case View::shop: return "shop";
  }
  return "item";
}

View view_from_string(std::string_view s) {
  if (s == "item" || s == "I") return View::item;
  if (s == "category" || s == "C") return View::category;
  if (s == "shop" || s == "S") return View::shop;
  throw ConfigError("unknown view '" + std::string(s) + "'");
}

std::string_view view_tag(View v) {
  switch (v) {
    case View::item: return "I";
    case View::category: return "C";
    case View::shop: return "S";
  }
  return "I";
}

}  // namespace mview
