#include "layoutseq/layout.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "layoutseq/error.hpp"

namespace layoutseq {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::EmptyLayout: return "empty layout";
    case ErrorKind::Capacity: return "capacity exceeded";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::InvalidConstraint: return "invalid constraint";
    case ErrorKind::State: return "state error";
    case ErrorKind::Grammar: return "grammar error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::InvalidUse: return "invalid use";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::EmptyDataset: return "empty dataset";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::UnknownCategory: return "unknown category";
  }
  return "error";
}

CategorySet::CategorySet(std::vector<std::string> names, std::vector<std::string> background)
    : names_(std::move(names)), background_(std::move(background)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw Error(ErrorKind::InvalidInput, "category name is empty");
    if (!seen.insert(n).second) throw Error(ErrorKind::InvalidInput, "duplicate category '" + n + "'");
  }
  background_mask_.assign(names_.size(), false);
  for (const auto& b : background_) {
    auto idx = index_of(b);
    if (!idx) throw Error(ErrorKind::InvalidInput, "background label '" + b + "' is not a category");
    background_mask_[static_cast<std::size_t>(*idx)] = true;
  }
}

std::optional<int> CategorySet::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

bool CategorySet::is_background(int index) const {
  return valid(index) && background_mask_[static_cast<std::size_t>(index)];
}

int quantize(double v, int bins) {
  if (bins < 2) throw Error(ErrorKind::InvalidInput, "bins must be >= 2");
  if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite coordinate");
  const double c = std::clamp(v, 0.0, 1.0);
  const auto b = static_cast<int>(std::floor(c * bins));
  return std::min(b, bins - 1);
}

double dequantize(int bin, int bins) {
  if (bins < 2) throw Error(ErrorKind::InvalidInput, "bins must be >= 2");
  if (bin < 0 || bin >= bins) {
    throw Error(ErrorKind::InvalidInput, "bin " + std::to_string(bin) + " outside [0, " + std::to_string(bins) + ")");
  }
  return (bin + 0.5) / bins;
}

Layout normalize_layout(std::span<const RawElement> raw, double canvas_width, double canvas_height, int bins) {
  if (raw.empty()) throw Error(ErrorKind::EmptyLayout, "layout has no elements");
  if (!(canvas_width > 0.0) || !(canvas_height > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "canvas dimensions must be positive");
  }
  Layout out;
  out.canvas_width = canvas_width;
  out.canvas_height = canvas_height;
  out.elements.reserve(raw.size());
  for (const auto& r : raw) {
    if (r.w < 0.0 || r.h < 0.0) throw Error(ErrorKind::InvalidInput, "negative box extent");
    Element e;
    e.category = r.category;
    e.box.x = quantize(r.x / canvas_width, bins);
    e.box.y = quantize(r.y / canvas_height, bins);
    e.box.w = quantize(r.w / canvas_width, bins);
    e.box.h = quantize(r.h / canvas_height, bins);
    out.elements.push_back(e);
  }
  return out;
}

void validate_layout(const Layout& layout, const CategorySet& categories, int bins, int max_elements) {
  if (layout.empty()) throw Error(ErrorKind::EmptyLayout, "layout has no elements");
  if (layout.size() > max_elements) {
    throw Error(ErrorKind::Capacity, std::to_string(layout.size()) + " elements exceed the limit of " +
                                         std::to_string(max_elements));
  }
  auto in_range = [bins](int b) { return b >= 0 && b < bins; };
  for (std::size_t i = 0; i < layout.elements.size(); ++i) {
    const auto& e = layout.elements[i];
    if (!categories.valid(e.category)) {
      throw Error(ErrorKind::InvalidInput, "element " + std::to_string(i) + " has invalid category");
    }
    if (!in_range(e.box.x) || !in_range(e.box.y) || !in_range(e.box.w) || !in_range(e.box.h)) {
      throw Error(ErrorKind::InvalidInput, "element " + std::to_string(i) + " has a coordinate outside the bin range");
    }
  }
}

std::vector<int> category_multiset(const Layout& layout) {
  std::vector<int> cats;
  cats.reserve(layout.elements.size());
  for (const auto& e : layout.elements) cats.push_back(e.category);
  std::sort(cats.begin(), cats.end());
  return cats;
}

}  // namespace layoutseq
