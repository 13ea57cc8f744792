#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "layoutseq/layout.hpp"

namespace layoutseq {

/// Size relations compare bin areas; position relations compare bin edges.
enum class Relation { Smaller, Larger, Equal, Above, Bottom, Left, Right, Overlap };

inline constexpr int kNumRelations = 8;
inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::Smaller, Relation::Larger, Relation::Equal, Relation::Above,
    Relation::Bottom,  Relation::Left,   Relation::Right, Relation::Overlap};

std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view name);

inline long box_area(const QuantizedBox& b) { return static_cast<long>(b.w) * b.h; }

/// Area tolerance for `Equal`, relative to the second box.
inline double equal_area_tolerance(long area_b) { return area_b * 0.05 > 1.0 ? area_b * 0.05 : 1.0; }

inline bool overlaps_1d(int a0, int a_len, int b0, int b_len) {
  const int lo = a0 > b0 ? a0 : b0;
  const int hi = (a0 + a_len) < (b0 + b_len) ? (a0 + a_len) : (b0 + b_len);
  return hi - lo > 0;
}

/// Does `r(a, b)` hold? These predicates are shared by relationship
/// extraction, constrained decoding and the violation metric.
bool relation_holds(Relation r, const QuantizedBox& a, const QuantizedBox& b);

struct Relationship {
  int a = 0;
  int b = 0;
  Relation relation = Relation::Above;

  bool operator==(const Relationship&) const = default;
};

}  // namespace layoutseq
