#include "layoutseq/relations.hpp"

#include <cstdlib>

namespace layoutseq {

namespace {
constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "smaller", "larger", "equal", "above", "bottom", "left", "right", "overlap"};
}

std::string_view to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return kAllRelations[i];
  }
  return std::nullopt;
}

bool relation_holds(Relation r, const QuantizedBox& a, const QuantizedBox& b) {
  switch (r) {
    case Relation::Smaller: return box_area(a) < box_area(b);
    case Relation::Larger: return box_area(a) > box_area(b);
    case Relation::Equal: {
      const long diff = std::labs(box_area(a) - box_area(b));
      return static_cast<double>(diff) <= equal_area_tolerance(box_area(b));
    }
    case Relation::Above: return a.y + a.h <= b.y;
    case Relation::Bottom: return b.y + b.h <= a.y;
    case Relation::Left: return a.x + a.w <= b.x;
    case Relation::Right: return b.x + b.w <= a.x;
    case Relation::Overlap: return overlaps_1d(a.x, a.w, b.x, b.w) && overlaps_1d(a.y, a.h, b.y, b.h);
  }
  return false;
}

}  // namespace layoutseq
