#include "layoutseq/fsm.hpp"

#include <algorithm>
#include <functional>

#include "layoutseq/error.hpp"

namespace layoutseq {

namespace {

constexpr int kX = 0;
constexpr int kY = 1;
constexpr int kW = 2;
constexpr int kH = 3;

int attr_of(Slot s) {
  switch (s) {
    case Slot::X: return kX;
    case Slot::Y: return kY;
    case Slot::W: return kW;
    case Slot::H: return kH;
    default: return -1;
  }
}

// One checkable condition of a relation: a predicate over the two boxes
// that reads only attributes `first` and `second` of each.
struct Condition {
  int first;
  int second;
  std::function<bool(const QuantizedBox&, const QuantizedBox&)> holds;
};

std::vector<Condition> conditions_for(Relation r) {
  auto whole = [r](const QuantizedBox& a, const QuantizedBox& b) { return relation_holds(r, a, b); };
  switch (r) {
    case Relation::Smaller:
    case Relation::Larger:
    case Relation::Equal: return {{kW, kH, whole}};
    case Relation::Above:
    case Relation::Bottom: return {{kY, kH, whole}};
    case Relation::Left:
    case Relation::Right: return {{kX, kW, whole}};
    case Relation::Overlap:
      return {{kX, kW, [](const QuantizedBox& a, const QuantizedBox& b) { return overlaps_1d(a.x, a.w, b.x, b.w); }},
              {kY, kH, [](const QuantizedBox& a, const QuantizedBox& b) { return overlaps_1d(a.y, a.h, b.y, b.h); }}};
  }
  return {};
}

int& attr_ref(QuantizedBox& b, int attr) {
  switch (attr) {
    case kX: return b.x;
    case kY: return b.y;
    case kW: return b.w;
    default: return b.h;
  }
}

void fill_group(std::vector<bool>& mask, int begin, int count) {
  for (int i = 0; i < count; ++i) mask[static_cast<std::size_t>(begin + i)] = true;
}

}  // namespace

std::string_view to_string(Slot s) {
  switch (s) {
    case Slot::Category: return "category";
    case Slot::X: return "x";
    case Slot::Y: return "y";
    case Slot::W: return "w";
    case Slot::H: return "h";
    case Slot::SepOrEos: return "separator";
    case Slot::Done: return "done";
  }
  return "?";
}

int FeasibleSet::count() const { return static_cast<int>(std::count(allowed.begin(), allowed.end(), true)); }

std::vector<bool> relation_bounds(std::span<const DecodedElement> decoded, const ConstraintSpec& spec, int element,
                                  Slot slot, int bins) {
  std::vector<bool> allowed(static_cast<std::size_t>(bins), true);
  const int attr = attr_of(slot);
  if (attr < 0 || element < 0 || element >= static_cast<int>(decoded.size())) return allowed;
  const DecodedElement& cur = decoded[static_cast<std::size_t>(element)];
  if (cur.input_index < 0) return allowed;

  auto find_complete = [&](int input_index) -> const DecodedElement* {
    for (const auto& d : decoded) {
      if (d.input_index == input_index && d.complete()) return &d;
    }
    return nullptr;
  };

  QuantizedBox known{};
  for (int i = 0; i < attr; ++i) attr_ref(known, i) = cur.attrs[static_cast<std::size_t>(i)];

  for (const auto& rel : spec.relationships) {
    const bool cur_is_a = rel.a == cur.input_index;
    if (!cur_is_a && rel.b != cur.input_index) continue;
    const DecodedElement* other = find_complete(cur_is_a ? rel.b : rel.a);
    if (other == nullptr) continue;
    const QuantizedBox other_box = other->box();
    for (const auto& cond : conditions_for(rel.relation)) {
      if (attr != cond.first && attr != cond.second) continue;
      auto eval = [&](const QuantizedBox& mine) {
        return cur_is_a ? cond.holds(mine, other_box) : cond.holds(other_box, mine);
      };
      for (int v = 0; v < bins; ++v) {
        if (!allowed[static_cast<std::size_t>(v)]) continue;
        QuantizedBox box = known;
        attr_ref(box, attr) = v;
        bool ok = false;
        if (attr == cond.second) {
          ok = eval(box);
        } else {
          for (int q = 0; q < bins && !ok; ++q) {
            attr_ref(box, cond.second) = q;
            ok = eval(box);
          }
        }
        allowed[static_cast<std::size_t>(v)] = ok;
      }
    }
  }
  return allowed;
}

Fsm::Fsm(const ConstraintSpec& spec, const Vocabulary& vocab, ScheduleMode mode)
    : spec_(canonicalize_spec(spec, vocab.categories())), vocab_(vocab), mode_(mode) {
  validate_spec(spec_, vocab_);
  if (spec_.task == Task::Refinement) {
    for (const auto& e : spec_.draft->elements) spec_.types.push_back(e.category);
  }
  input_used_.assign(spec_.types.size(), false);
  tokens_.push_back(Vocabulary::kSos);
  if (spec_.task == Task::Completion) {
    const auto& els = spec_.partial->elements;
    for (std::size_t i = 0; i < els.size(); ++i) {
      if (i > 0) advance(Vocabulary::kSep);
      advance(vocab_.category_token(els[i].category));
      advance(vocab_.coord_token(els[i].box.x));
      advance(vocab_.coord_token(els[i].box.y));
      advance(vocab_.coord_token(els[i].box.w));
      advance(vocab_.coord_token(els[i].box.h));
    }
    violations_.clear();
  }
}

int Fsm::scheduled_remaining() const {
  return static_cast<int>(std::count(input_used_.begin(), input_used_.end(), false));
}

std::optional<int> Fsm::next_input_for(int category) const {
  if (mode_ == ScheduleMode::InOrder) {
    const auto k = decoded_.size();
    if (k < spec_.types.size() && !input_used_[k] && spec_.types[k] == category) return static_cast<int>(k);
    return std::nullopt;
  }
  for (std::size_t i = 0; i < spec_.types.size(); ++i) {
    if (!input_used_[i] && spec_.types[i] == category) return static_cast<int>(i);
  }
  return std::nullopt;
}

FeasibleSet Fsm::feasible() const {
  if (done()) throw Error(ErrorKind::State, "feasible() on a finished FSM");
  if (!cache_) cache_ = compute_feasible();
  return *cache_;
}

FeasibleSet Fsm::compute_feasible() const {
  FeasibleSet fs;
  fs.allowed.assign(static_cast<std::size_t>(vocab_.size()), false);
  const bool scheduled = has_type_schedule(spec_.task);
  const int ncat = vocab_.categories().size();
  const int bins = vocab_.bins();

  switch (slot_) {
    case Slot::Category: {
      if (!scheduled) {
        fill_group(fs.allowed, vocab_.category_begin(), ncat);
        break;
      }
      for (int c = 0; c < ncat; ++c) {
        if (next_input_for(c)) fs.allowed[static_cast<std::size_t>(vocab_.category_token(c))] = true;
      }
      if (fs.empty()) {
        fs.fallback = true;
        fill_group(fs.allowed, vocab_.category_begin(), ncat);
      }
      break;
    }
    case Slot::X:
    case Slot::Y:
    case Slot::W:
    case Slot::H: {
      const DecodedElement& cur = decoded_.back();
      std::vector<bool> bins_ok(static_cast<std::size_t>(bins), true);
      if (spec_.task == Task::GenTS && cur.input_index >= 0 && (slot_ == Slot::W || slot_ == Slot::H)) {
        const auto& size = spec_.sizes[static_cast<std::size_t>(cur.input_index)];
        std::fill(bins_ok.begin(), bins_ok.end(), false);
        bins_ok[static_cast<std::size_t>(slot_ == Slot::W ? size.w : size.h)] = true;
      } else if (spec_.task == Task::GenR) {
        bins_ok = relation_bounds(decoded_, spec_, static_cast<int>(decoded_.size()) - 1, slot_, bins);
      }
      for (int b = 0; b < bins; ++b) {
        if (bins_ok[static_cast<std::size_t>(b)]) fs.allowed[static_cast<std::size_t>(vocab_.coord_token(b))] = true;
      }
      if (fs.empty()) {
        fs.fallback = true;
        fill_group(fs.allowed, vocab_.coord_begin(), bins);
      }
      break;
    }
    case Slot::SepOrEos: {
      if (scheduled) {
        fs.allowed[scheduled_remaining() > 0 ? Vocabulary::kSep : Vocabulary::kEos] = true;
      } else {
        fs.allowed[Vocabulary::kEos] = true;
        if (static_cast<int>(decoded_.size()) < vocab_.max_elements()) fs.allowed[Vocabulary::kSep] = true;
      }
      break;
    }
    case Slot::Done: break;
  }
  return fs;
}

void Fsm::advance(int token) {
  if (done()) throw Error(ErrorKind::State, "advance() on a finished FSM");
  const TokenGroup g = vocab_.group(token);
  const bool group_ok = slot_ == Slot::Category   ? g == TokenGroup::Category
                        : slot_ == Slot::SepOrEos ? (token == Vocabulary::kSep || token == Vocabulary::kEos)
                                                  : g == TokenGroup::Coordinate;
  if (!group_ok) {
    throw Error(ErrorKind::Grammar, "token " + vocab_.token_name(token) + " is not valid in the " +
                                        std::string(to_string(slot_)) + " slot");
  }
  const FeasibleSet fs = feasible();
  if (fs.fallback) any_fallback_ = true;
  if (fs.fallback || !fs.contains(token)) {
    violations_.push_back({tokens_.size(), element_index(), slot_, token});
  }
  tokens_.push_back(token);
  cache_.reset();

  switch (slot_) {
    case Slot::Category: {
      DecodedElement d;
      d.category = vocab_.category_of(token);
      d.filled = 1;
      if (has_type_schedule(spec_.task)) {
        if (auto idx = next_input_for(d.category)) {
          d.input_index = *idx;
          input_used_[static_cast<std::size_t>(*idx)] = true;
        }
      }
      decoded_.push_back(d);
      slot_ = Slot::X;
      break;
    }
    case Slot::X:
    case Slot::Y:
    case Slot::W:
    case Slot::H: {
      auto& cur = decoded_.back();
      cur.attrs[static_cast<std::size_t>(attr_of(slot_))] = vocab_.bin_of(token);
      ++cur.filled;
      slot_ = static_cast<Slot>(static_cast<int>(slot_) + 1);
      break;
    }
    case Slot::SepOrEos: slot_ = token == Vocabulary::kEos ? Slot::Done : Slot::Category; break;
    case Slot::Done: break;
  }
}

}  // namespace layoutseq
