#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layoutseq/layout.hpp"
#include "layoutseq/random.hpp"
#include "layoutseq/relations.hpp"

namespace layoutseq {

enum class Task { UGen, GenT, GenTS, GenR, Refinement, Completion };

inline constexpr int kNumTasks = 6;
inline constexpr std::array<Task, kNumTasks> kAllTasks = {Task::UGen,  Task::GenT,       Task::GenTS,
                                                          Task::GenR,  Task::Refinement, Task::Completion};

std::string_view to_string(Task task);
/// Accepts the canonical names ("ugen", "gen-t", ...) plus "refine"/"complete".
std::optional<Task> parse_task(std::string_view name);

/// Tasks whose output element types are fixed by the input.
inline bool has_type_schedule(Task t) {
  return t == Task::GenT || t == Task::GenTS || t == Task::GenR || t == Task::Refinement;
}

enum class OrderPolicy { Alphabetic, Position };
std::string_view to_string(OrderPolicy p);
std::optional<OrderPolicy> parse_order(std::string_view name);

enum class TokenGroup { Special, TaskPrefix, Category, Coordinate, Relation, Index, Invalid };

/// Contiguous token id space:
///   PAD SOS EOS SEP SEP2 | 6 task prefixes | categories | coordinate bins
///   | 8 relations | element indices 0..max_elements-1
/// One coordinate range is shared by x, y, w and h.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kSep2 = 4;
  static constexpr int kNumSpecials = 5;

  explicit Vocabulary(CategorySet categories, int bins = kDefaultBins, int max_elements = kDefaultMaxElements);

  int size() const { return index_begin_ + max_elements_; }
  int bins() const { return bins_; }
  int max_elements() const { return max_elements_; }
  const CategorySet& categories() const { return categories_; }

  int task_token(Task t) const { return kNumSpecials + static_cast<int>(t); }
  int category_token(int category) const;
  int coord_token(int bin) const;
  int relation_token(Relation r) const { return relation_begin_ + static_cast<int>(r); }
  int index_token(int index) const;

  int category_begin() const { return category_begin_; }
  int coord_begin() const { return coord_begin_; }
  int relation_begin() const { return relation_begin_; }
  int index_begin() const { return index_begin_; }

  TokenGroup group(int id) const;
  int category_of(int id) const { return id - category_begin_; }
  int bin_of(int id) const { return id - coord_begin_; }
  Relation relation_of(int id) const { return kAllRelations[static_cast<std::size_t>(id - relation_begin_)]; }
  int index_of(int id) const { return id - index_begin_; }
  Task task_of(int id) const { return kAllTasks[static_cast<std::size_t>(id - kNumSpecials)]; }

  /// Human readable token, e.g. "<sos>", "cat:text", "7", "rel:above", "#2".
  std::string token_name(int id) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  CategorySet categories_;
  int bins_;
  int max_elements_;
  int category_begin_;
  int coord_begin_;
  int relation_begin_;
  int index_begin_;
};

enum class SeqRole { Input, Output };

struct TokenSequence {
  std::vector<int> ids;
  SeqRole role = SeqRole::Output;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

struct SizeSpec {
  int w = 0;
  int h = 0;
  bool operator==(const SizeSpec&) const = default;
};

/// User constraints for one subtask. Relationship indices refer to
/// positions in `types`.
struct ConstraintSpec {
  Task task = Task::UGen;
  std::vector<int> types;
  std::vector<SizeSpec> sizes;
  std::vector<Relationship> relationships;
  std::optional<Layout> draft;
  std::optional<Layout> partial;

  bool operator==(const ConstraintSpec&) const = default;
};

/// Throws InvalidConstraint (or Capacity for too many elements).
void validate_spec(const ConstraintSpec& spec, const Vocabulary& vocab);

/// Stable-sorts Gen-T/TS/R types into alphabetic order, carrying sizes
/// along and remapping relationship indices. Other tasks are returned as-is.
ConstraintSpec canonicalize_spec(const ConstraintSpec& spec, const CategorySet& categories);

TokenSequence encode_layout(const Layout& layout, const Vocabulary& vocab);
Layout decode_layout(const TokenSequence& seq, const Vocabulary& vocab);
Layout decode_layout(std::span<const int> ids, const Vocabulary& vocab);

/// Lenient decoding: the complete elements before the first grammar
/// error (possibly none). Used to score malformed unconstrained samples.
Layout salvage_layout(std::span<const int> ids, const Vocabulary& vocab);

TokenSequence encode_input(const ConstraintSpec& spec, const Vocabulary& vocab, bool with_prefix);

/// Parses an input sequence under the grammar of `task`. A leading task
/// prefix is accepted when it names `task`.
ConstraintSpec parse_input(const TokenSequence& seq, Task task, const Vocabulary& vocab);

Layout order_elements(const Layout& layout, OrderPolicy policy, const CategorySet& categories);

Layout add_refinement_noise(const Layout& layout, double std_dev, Rng& rng, int bins = kDefaultBins);

/// Every ordered pair's size relation plus each position relation that
/// holds, then ceil(sample_rate * total) of them drawn without replacement
/// and returned in enumeration order.
std::vector<Relationship> extract_relationships(const Layout& layout, double sample_rate, Rng& rng);

}  // namespace layoutseq
