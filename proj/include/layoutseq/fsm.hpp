#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "layoutseq/vocab.hpp"

namespace layoutseq {

/// Attribute slot of the element being decoded. The cycle is
/// Category -> X -> Y -> W -> H -> SepOrEos -> (Category | Done).
enum class Slot { Category, X, Y, W, H, SepOrEos, Done };

std::string_view to_string(Slot s);

/// How the type schedule of Gen-T/TS/R/Refinement is consumed.
/// InOrder pins element k to input type k (alphabetic-order outputs);
/// AnyOrder lets any not-yet-used input type come next (position-order
/// outputs), binding the element to the first unused input of that type.
enum class ScheduleMode { InOrder, AnyOrder };

/// Vocabulary-length boolean mask. `fallback` marks a slot whose
/// constraints were jointly unsatisfiable; the mask then holds the whole
/// slot group instead.
struct FeasibleSet {
  std::vector<bool> allowed;
  bool fallback = false;

  bool contains(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < allowed.size() && allowed[static_cast<std::size_t>(id)];
  }
  int count() const;
  bool empty() const { return count() == 0; }
};

struct DecodedElement {
  int category = -1;
  int input_index = -1;          // bound input element, -1 for unscheduled tasks
  std::array<int, 4> attrs{};    // x, y, w, h bins
  int filled = 0;                // 0 = nothing, 1 = category, 5 = complete

  bool complete() const { return filled == 5; }
  QuantizedBox box() const { return {attrs[0], attrs[1], attrs[2], attrs[3]}; }
};

struct ViolationEvent {
  std::size_t step = 0;
  int element = 0;
  Slot slot = Slot::Category;
  int token = 0;
};

/// Coordinate bins allowed for `slot` of output element `element` by
/// the Gen-R relationships whose other endpoint is fully decoded. Each
/// relationship contributes the values for which some completion of the
/// element's remaining attributes satisfies it; the result is their
/// intersection (all bins when nothing is checkable, empty when the
/// constraints conflict).
std::vector<bool> relation_bounds(std::span<const DecodedElement> decoded, const ConstraintSpec& spec, int element,
                                  Slot slot, int bins);

class Fsm {
 public:
  Fsm(const ConstraintSpec& spec, const Vocabulary& vocab, ScheduleMode mode = ScheduleMode::InOrder);

  Task task() const { return spec_.task; }
  const ConstraintSpec& spec() const { return spec_; }
  Slot slot() const { return slot_; }
  bool done() const { return slot_ == Slot::Done; }
  int element_index() const { return static_cast<int>(decoded_.size()) - (slot_ == Slot::Category ? 0 : 1); }

  FeasibleSet feasible() const;

  /// Consumes one decoder token. Tokens outside the slot's group throw a
  /// grammar error; tokens inside the group but outside the feasible set
  /// (or accepted under fallback) are recorded as violations.
  void advance(int token);

  const std::vector<DecodedElement>& decoded() const { return decoded_; }
  /// Decoder prefix so far, starting with <sos> (force-fed tokens included).
  const std::vector<int>& tokens() const { return tokens_; }
  const std::vector<ViolationEvent>& violations() const { return violations_; }
  bool any_fallback() const { return any_fallback_; }

 private:
  FeasibleSet compute_feasible() const;
  int scheduled_remaining() const;
  std::optional<int> next_input_for(int category) const;

  ConstraintSpec spec_;
  Vocabulary vocab_;
  ScheduleMode mode_;
  Slot slot_ = Slot::Category;
  std::vector<DecodedElement> decoded_;
  std::vector<bool> input_used_;
  std::vector<int> tokens_;
  std::vector<ViolationEvent> violations_;
  bool any_fallback_ = false;
  mutable std::optional<FeasibleSet> cache_;
};

}  // namespace layoutseq
