#include "layoutseq/io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "layoutseq/error.hpp"
#include "layoutseq/relations.hpp"
#include "layoutseq/tensor.hpp"

namespace layoutseq {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, "field '" + field + "': " + what);
}

int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) bad(field, "expected an integer");
  return j.get<int>();
}

const json& require(const json& j, const char* key, const std::string& field) {
  if (!j.is_object()) bad(field, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(field + "." + key, "missing");
  return *it;
}

int category_by_name(const json& j, const CategorySet& cats, const std::string& field) {
  if (!j.is_string()) bad(field, "expected a category name");
  const auto idx = cats.index_of(j.get<std::string>());
  if (!idx) throw Error(ErrorKind::UnknownCategory, "field '" + field + "': '" + j.get<std::string>() + "'");
  return *idx;
}

}  // namespace

json layout_to_json(const Layout& layout, const CategorySet& categories, int bins) {
  json j;
  j["canvas"] = {{"w", bins}, {"h", bins}};
  j["elements"] = json::array();
  for (const auto& e : layout.elements) {
    j["elements"].push_back({{"category", categories.name(e.category)}, {"bbox", {e.box.x, e.box.y, e.box.w, e.box.h}}});
  }
  return j;
}

Layout layout_from_json(const json& j, const CategorySet& categories, int bins, const std::string& field) {
  const json& els = require(j, "elements", field);
  if (!els.is_array()) bad(field + ".elements", "expected an array");
  Layout l;
  l.canvas_width = bins;
  l.canvas_height = bins;
  for (std::size_t i = 0; i < els.size(); ++i) {
    const std::string f = field + ".elements[" + std::to_string(i) + "]";
    const int cat = category_by_name(require(els[i], "category", f), categories, f + ".category");
    const json& bb = require(els[i], "bbox", f);
    if (!bb.is_array() || bb.size() != 4) bad(f + ".bbox", "expected [x, y, w, h]");
    QuantizedBox b{get_int(bb[0], f + ".bbox"), get_int(bb[1], f + ".bbox"), get_int(bb[2], f + ".bbox"),
                   get_int(bb[3], f + ".bbox")};
    for (int v : {b.x, b.y, b.w, b.h}) {
      if (v < 0 || v >= bins) bad(f + ".bbox", "bins must lie in [0, " + std::to_string(bins - 1) + "]");
    }
    l.elements.push_back({cat, b});
  }
  return l;
}

ConstraintSpec spec_from_json(const json& j, const Vocabulary& vocab, std::optional<Task> task) {
  if (!j.is_object()) bad("body", "expected a JSON object");
  const auto& cats = vocab.categories();
  ConstraintSpec spec;
  if (task) {
    spec.task = *task;
  } else {
    const json& t = require(j, "task", "body");
    if (!t.is_string() || !parse_task(t.get<std::string>())) bad("task", "unknown task");
    spec.task = *parse_task(t.get<std::string>());
  }
  if (auto it = j.find("types"); it != j.end()) {
    if (!it->is_array()) bad("types", "expected an array of category names");
    for (std::size_t i = 0; i < it->size(); ++i) {
      spec.types.push_back(category_by_name((*it)[i], cats, "types[" + std::to_string(i) + "]"));
    }
  }
  if (auto it = j.find("sizes"); it != j.end()) {
    if (!it->is_array()) bad("sizes", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string f = "sizes[" + std::to_string(i) + "]";
      const json& s = (*it)[i];
      if (s.is_array() && s.size() == 2) {
        spec.sizes.push_back({get_int(s[0], f), get_int(s[1], f)});
      } else {
        spec.sizes.push_back({get_int(require(s, "w", f), f + ".w"), get_int(require(s, "h", f), f + ".h")});
      }
    }
  }
  if (auto it = j.find("relationships"); it != j.end()) {
    if (!it->is_array()) bad("relationships", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string f = "relationships[" + std::to_string(i) + "]";
      const json& r = (*it)[i];
      const json& name = require(r, "relation", f);
      if (!name.is_string() || !parse_relation(name.get<std::string>())) bad(f + ".relation", "unknown relation");
      spec.relationships.push_back({get_int(require(r, "a", f), f + ".a"), get_int(require(r, "b", f), f + ".b"),
                                    *parse_relation(name.get<std::string>())});
    }
  }
  if (auto it = j.find("draft"); it != j.end()) spec.draft = layout_from_json(*it, cats, vocab.bins(), "draft");
  if (auto it = j.find("partial"); it != j.end()) spec.partial = layout_from_json(*it, cats, vocab.bins(), "partial");
  if (spec.task == Task::Refinement && !spec.draft) bad("draft", "missing");
  if (spec.task == Task::Completion && !spec.partial) bad("partial", "missing");
  return spec;
}

json spec_to_json(const ConstraintSpec& spec, const CategorySet& categories, int bins) {
  json j;
  j["task"] = std::string(to_string(spec.task));
  if (!spec.types.empty()) {
    j["types"] = json::array();
    for (int t : spec.types) j["types"].push_back(categories.name(t));
  }
  if (!spec.sizes.empty()) {
    j["sizes"] = json::array();
    for (const auto& s : spec.sizes) j["sizes"].push_back({{"w", s.w}, {"h", s.h}});
  }
  if (!spec.relationships.empty()) {
    j["relationships"] = json::array();
    for (const auto& r : spec.relationships) {
      j["relationships"].push_back({{"a", r.a}, {"b", r.b}, {"relation", std::string(to_string(r.relation))}});
    }
  }
  if (spec.draft) j["draft"] = layout_to_json(*spec.draft, categories, bins);
  if (spec.partial) j["partial"] = layout_to_json(*spec.partial, categories, bins);
  return j;
}

json sequence_to_json(const TokenSequence& seq, Task task) {
  return {{"task", std::string(to_string(task))},
          {"role", seq.role == SeqRole::Input ? "input" : "output"},
          {"ids", seq.ids}};
}

TokenSequence sequence_from_json(const json& j, const Vocabulary& vocab, Task* task) {
  if (!j.is_object() || !j.contains("ids") || !j["ids"].is_array()) {
    throw Error(ErrorKind::InvalidInput, "sequence: expected an object with an 'ids' array");
  }
  TokenSequence seq;
  for (const auto& v : j["ids"]) {
    if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() >= vocab.size()) {
      throw Error(ErrorKind::InvalidInput, "sequence.ids: token out of range");
    }
    seq.ids.push_back(v.get<int>());
  }
  if (j.value("role", std::string("output")) == "input") seq.role = SeqRole::Input;
  if (task) {
    const auto t = parse_task(j.value("task", std::string()));
    if (!t) throw Error(ErrorKind::InvalidInput, "sequence.task: unknown task");
    *task = *t;
  }
  return seq;
}

json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"d_model", c.d_model},
          {"d_ff", c.d_ff},
          {"max_input_len", c.max_input_len},
          {"max_output_len", c.max_output_len},
          {"architecture", std::string(to_string(c.architecture))},
          {"output_order", std::string(to_string(c.output_order))},
          {"dropout", c.dropout},
          {"tie_embeddings", c.tie_embeddings}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_input_len = j.at("max_input_len").get<int>();
    c.max_output_len = j.at("max_output_len").get<int>();
    const auto arch = parse_architecture(j.at("architecture").get<std::string>());
    const auto order = parse_order(j.at("output_order").get<std::string>());
    if (!arch || !order) throw Error(ErrorKind::Config, "bad architecture or output_order in model config");
    c.architecture = *arch;
    c.output_order = *order;
    c.dropout = j.at("dropout").get<double>();
    c.tie_embeddings = j.at("tie_embeddings").get<bool>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("model config: ") + e.what());
  }
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

namespace {
std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}
}  // namespace

void save_model(const std::filesystem::path& stem, const Seq2SeqModel& model, const Vocabulary& vocab,
                bool with_prefix, const json& metadata) {
  const auto ckpt = with_suffix(stem, ".ckpt");
  tensor::save_checkpoint(ckpt, model.state());
  json side;
  side["model"] = to_json(model.config());
  side["vocab"] = {{"categories", vocab.categories().names()},
                   {"background_labels", vocab.categories().background_labels()},
                   {"bins", vocab.bins()},
                   {"max_elements", vocab.max_elements()},
                   {"size", vocab.size()}};
  side["with_prefix"] = with_prefix;
  side["checkpoint"] = ckpt.filename().string();
  side["metadata"] = metadata;
  write_json_file(with_suffix(stem, ".json"), side);
}

ModelBundle load_model(const std::filesystem::path& stem) {
  const auto ckpt = with_suffix(stem, ".ckpt");
  const auto sidecar = with_suffix(stem, ".json");
  if (!std::filesystem::exists(ckpt)) throw Error(ErrorKind::Io, "checkpoint not found: " + ckpt.string());
  const json side = read_json_file(sidecar);
  ModelBundle b;
  try {
    b.config = model_config_from_json(side.at("model"));
    const json& v = side.at("vocab");
    b.vocab = std::make_unique<Vocabulary>(
        CategorySet(v.at("categories").get<std::vector<std::string>>(),
                    v.value("background_labels", std::vector<std::string>{})),
        v.at("bins").get<int>(), v.at("max_elements").get<int>());
    b.with_prefix = side.value("with_prefix", false);
    b.metadata = side.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, "malformed sidecar " + sidecar.string() + ": " + e.what());
  }
  b.model = std::make_unique<Seq2SeqModel>(b.config, b.vocab->size(), 0);
  const auto state = tensor::load_checkpoint(ckpt);
  b.model->load_state(state);
  b.snapshot_id = file_digest(ckpt);
  return b;
}

}  // namespace layoutseq
