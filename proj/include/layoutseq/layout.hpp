#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace layoutseq {

inline constexpr int kDefaultBins = 128;
inline constexpr int kDefaultMaxElements = 20;

/// Ordered category labels. The ordering fixes both token ids and what
/// "alphabetic order" means for sequences, so it never changes after
/// construction.
class CategorySet {
 public:
  CategorySet() = default;
  explicit CategorySet(std::vector<std::string> names, std::vector<std::string> background = {});

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& background_labels() const { return background_; }

  std::optional<int> index_of(const std::string& name) const;
  bool is_background(int index) const;
  bool valid(int index) const { return index >= 0 && index < size(); }

  bool operator==(const CategorySet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> background_;
  std::vector<bool> background_mask_;
};

struct QuantizedBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const QuantizedBox&) const = default;
};

struct Element {
  int category = 0;
  QuantizedBox box;

  bool operator==(const Element&) const = default;
};

struct Layout {
  std::vector<Element> elements;
  double canvas_width = 1.0;
  double canvas_height = 1.0;

  int size() const { return static_cast<int>(elements.size()); }
  bool empty() const { return elements.empty(); }

  // Canvas size is metadata; equality is on the element list.
  bool operator==(const Layout& other) const { return elements == other.elements; }
};

/// A dataset element in pixel space, before normalization.
struct RawElement {
  int category = 0;
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
};

int quantize(double v, int bins = kDefaultBins);
double dequantize(int bin, int bins = kDefaultBins);

Layout normalize_layout(std::span<const RawElement> raw, double canvas_width, double canvas_height,
                        int bins = kDefaultBins);

/// Throws InvalidInput if any category or bin is out of range, or the
/// element count is outside [1, max_elements].
void validate_layout(const Layout& layout, const CategorySet& categories, int bins = kDefaultBins,
                     int max_elements = kDefaultMaxElements);

/// Multiset of category indices, sorted.
std::vector<int> category_multiset(const Layout& layout);

}  // namespace layoutseq
