#include "cwescan/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>

#include "cwescan/error.hpp"
#include "cwescan/seeded_rng.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Labels

std::string render_label(const Verdict& verdict) {
  if (verdict.is_secure()) return "Secure";
  return "Vulnerable - " + verdict.cwe()->str();
}

Verdict parse_label_strict(std::string_view text) {
  std::string_view t = text;
  if (!t.empty() && t.back() == '\n') t.remove_suffix(1);
  if (t == "Secure") return Verdict::secure();
  constexpr std::string_view kPrefix = "Vulnerable - ";
  if (t.starts_with(kPrefix)) {
    const std::string_view id_text = t.substr(kPrefix.size());
    if (auto id = try_parse_cwe_id(id_text); id && id->str() == id_text) {
      return Verdict::vulnerable(*id);
    }
  }
  throw ParseError("not a strict label: '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Snippet / review state / pair

Snippet::Snippet(std::string code) : code_(std::move(code)) {
  if (trim(code_).empty()) throw ValidationError("snippet is empty");
}

std::size_t Snippet::line_count() const noexcept { return split_lines(code_).size(); }

ReviewState ReviewState::rejected(std::string reason) {
  if (trim(reason).empty()) throw ValidationError("reject requires a non-empty reason");
  return ReviewState(Kind::kRejected, std::move(reason));
}

std::string_view ReviewState::name() const noexcept {
  switch (kind_) {
    case Kind::kPending: return "pending";
    case Kind::kAccepted: return "accepted";
    case Kind::kRejected: return "rejected";
    case Kind::kEditedThenAccepted: return "edited_then_accepted";
  }
  return "pending";
}

ReviewState ReviewState::transition_to(const ReviewState& next) const {
  if (!is_pending()) {
    throw ConflictError("item already reviewed (" + std::string(name()) + ")");
  }
  if (next.is_pending()) throw ContractError("cannot transition pending -> pending");
  return next;
}

PairedExample::PairedExample(CweId cwe_, Snippet vulnerable_, Snippet fixed_, Provenance provenance_,
                             ReviewState review_state_)
    : cwe(cwe_),
      vulnerable(std::move(vulnerable_)),
      fixed(std::move(fixed_)),
      provenance(std::move(provenance_)),
      review_state(std::move(review_state_)) {
  if (vulnerable.code() == fixed.code()) throw ValidationError("pair not distinct");
}

std::string PairedExample::content_digest() const {
  // Length-prefixed so field boundaries cannot be forged by the content.
  std::string buf = cwe.str();
  for (const auto* s : {&vulnerable.code(), &fixed.code()}) {
    buf += '\0';
    buf += std::to_string(s->size());
    buf += ':';
    buf += *s;
  }
  return sha256_hex(buf);
}

std::vector<LabeledInstance> expand_pair(const PairedExample& pair, std::string_view instruction) {
  if (!pair.review_state.is_accepted_family()) {
    throw ContractError("cannot expand a " + std::string(pair.review_state.name()) + " pair");
  }
  return {
      LabeledInstance{std::string(instruction), pair.vulnerable.code(),
                      render_label(Verdict::vulnerable(pair.cwe)), pair.cwe},
      LabeledInstance{std::string(instruction), pair.fixed.code(), render_label(Verdict::secure()),
                      pair.cwe},
  };
}

void require_single_instruction(std::span<const LabeledInstance> instances) {
  for (std::size_t i = 1; i < instances.size(); ++i) {
    if (instances[i].instruction != instances[0].instruction) {
      throw ValidationError("instance " + std::to_string(i + 1) +
                            " uses a different instruction than instance 1");
    }
  }
}

// ---------------------------------------------------------------------------
// Split

namespace {

struct StratumKey {
  std::uint32_t cwe = 0;  // 0 = unknown source
  bool secure = false;
  auto operator<=>(const StratumKey&) const = default;
};

StratumKey stratum_of(const LabeledInstance& inst) {
  const Verdict v = parse_label_strict(inst.output);
  if (v.is_vulnerable()) return {v.cwe()->number(), false};
  return {inst.source_cwe ? inst.source_cwe->number() : 0u, true};
}

std::string stratum_name(std::uint32_t cwe) {
  return cwe == 0 ? std::string("unknown") : CweId(cwe).str();
}

std::map<std::string, StratumCounts> count_strata(std::span<const LabeledInstance> rows) {
  std::map<std::string, StratumCounts> counts;
  for (const auto& r : rows) {
    const auto key = stratum_of(r);
    auto& c = counts[stratum_name(key.cwe)];
    (key.secure ? c.secure : c.vulnerable) += 1;
  }
  return counts;
}

}  // namespace

nlohmann::json SplitManifest::to_json() const {
  auto side = [](const std::map<std::string, StratumCounts>& m) {
    json out = json::object();
    for (const auto& [k, c] : m) out[k] = {{"vulnerable", c.vulnerable}, {"secure", c.secure}};
    return out;
  };
  return {{"schema_version", 1},
          {"seed", seed},
          {"test_size", test_size},
          {"counts", {{"train", side(train_counts)}, {"test", side(test_counts)}}},
          {"digests", {{"train", train_digest}, {"test", test_digest}}}};
}

DatasetSplit split_dataset(std::span<const LabeledInstance> instances, std::size_t test_size,
                           std::uint64_t seed) {
  const std::size_t total = instances.size();
  if (test_size == 0 || test_size >= total) {
    throw ArgumentError("test_size must be in (0, " + std::to_string(total) + "), got " +
                        std::to_string(test_size));
  }

  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < total; ++i) strata[stratum_of(instances[i])].push_back(i);

  struct Quota {
    std::vector<std::size_t>* members;
    std::size_t take;
    std::size_t remainder;
    std::uint64_t tie;
  };
  SeededRng rng(seed);
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [key, members] : strata) {
    const std::size_t scaled = test_size * members.size();
    quotas.push_back({&members, scaled / total, scaled % total, 0});
    assigned += scaled / total;
  }
  std::vector<std::uint64_t> ties(quotas.size());
  std::iota(ties.begin(), ties.end(), 0);
  rng.shuffle(std::span(ties));
  for (std::size_t i = 0; i < quotas.size(); ++i) quotas[i].tie = ties[i];

  std::vector<Quota*> order;
  for (auto& q : quotas) order.push_back(&q);
  std::sort(order.begin(), order.end(), [](const Quota* a, const Quota* b) {
    return std::tie(b->remainder, a->tie) < std::tie(a->remainder, b->tie);
  });
  for (std::size_t i = 0; assigned < test_size; ++i, ++assigned) order[i]->take += 1;

  std::vector<bool> in_test(total, false);
  for (auto& q : quotas) {
    std::vector<std::size_t> shuffled = *q.members;
    rng.shuffle(std::span(shuffled));
    for (std::size_t k = 0; k < q.take; ++k) in_test[shuffled[k]] = true;
  }

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < total; ++i) {
    (in_test[i] ? split.test : split.train).push_back(instances[i]);
  }
  split.manifest.seed = seed;
  split.manifest.test_size = test_size;
  split.manifest.train_counts = count_strata(split.train);
  split.manifest.test_counts = count_strata(split.test);
  split.manifest.train_digest = sha256_hex(to_jsonl(split.train));
  split.manifest.test_digest = sha256_hex(to_jsonl(split.test));
  return split;
}

// ---------------------------------------------------------------------------
// JSON records

namespace {

void require_fields(const json& j, const std::set<std::string>& required,
                    const std::set<std::string>& optional, std::string_view what) {
  if (!j.is_object()) throw ParseError(std::string(what) + " record is not a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!required.count(key) && !optional.count(key)) {
      throw ParseError("unknown field '" + key + "' in " + std::string(what) + " record");
    }
  }
  for (const auto& key : required) {
    if (!j.contains(key)) {
      throw ParseError("missing field '" + key + "' in " + std::string(what) + " record");
    }
  }
}

std::string get_string(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

json to_json(const LabeledInstance& instance) {
  json j = {{"instruction", instance.instruction},
            {"input", instance.input},
            {"output", instance.output}};
  if (instance.source_cwe) j["cwe"] = instance.source_cwe->str();
  return j;
}

LabeledInstance instance_from_json(const json& j) {
  require_fields(j, {"instruction", "input", "output"}, {"cwe"}, "instance");
  LabeledInstance inst{get_string(j, "instruction"), get_string(j, "input"),
                       get_string(j, "output"), std::nullopt};
  const Verdict v = parse_label_strict(inst.output);
  if (inst.output != render_label(v)) throw ParseError("output label has a trailing newline");
  if (j.contains("cwe")) {
    inst.source_cwe = parse_cwe_id(get_string(j, "cwe"));
    if (v.is_vulnerable() && *v.cwe() != *inst.source_cwe) {
      throw ParseError("cwe field disagrees with the output label");
    }
  }
  return inst;
}

json to_json(const ReviewState& state) {
  json j = {{"state", state.name()}};
  if (state.kind() == ReviewState::Kind::kRejected) j["reason"] = state.reason();
  return j;
}

ReviewState review_state_from_json(const json& j) {
  require_fields(j, {"state"}, {"reason"}, "review_state");
  const std::string name = get_string(j, "state");
  if (name == "rejected") {
    if (!j.contains("reason")) throw ParseError("rejected state requires a reason");
    return ReviewState::rejected(get_string(j, "reason"));
  }
  if (j.contains("reason")) throw ParseError("only rejected states carry a reason");
  if (name == "pending") return ReviewState::pending();
  if (name == "accepted") return ReviewState::accepted();
  if (name == "edited_then_accepted") return ReviewState::edited_then_accepted();
  throw ParseError("unknown review state '" + name + "'");
}

json to_json(const PairedExample& pair) {
  return {{"cwe", pair.cwe.str()},
          {"vulnerable", pair.vulnerable.code()},
          {"fixed", pair.fixed.code()},
          {"provenance",
           {{"backend", pair.provenance.backend},
            {"template_version", pair.provenance.template_version},
            {"generated_at", pair.provenance.generated_at}}},
          {"review_state", to_json(pair.review_state)}};
}

PairedExample pair_from_json(const json& j) {
  require_fields(j, {"cwe", "vulnerable", "fixed", "provenance", "review_state"}, {}, "pair");
  const json& p = j.at("provenance");
  require_fields(p, {"backend", "template_version", "generated_at"}, {}, "provenance");
  return PairedExample(parse_cwe_id(get_string(j, "cwe")), Snippet(get_string(j, "vulnerable")),
                       Snippet(get_string(j, "fixed")),
                       Provenance{get_string(p, "backend"), get_string(p, "template_version"),
                                  get_string(p, "generated_at")},
                       review_state_from_json(j.at("review_state")));
}

// ---------------------------------------------------------------------------
// JSONL files

namespace {

// Dataset files must be valid UTF-8; a snippet that is not is a data error.
std::string dump_strict(const nlohmann::json& j) {
  try {
    return j.dump();
  } catch (const nlohmann::json::type_error& e) {
    throw ValidationError(std::string("record is not valid UTF-8: ") + e.what());
  }
}

}  // namespace

std::string to_jsonl(std::span<const LabeledInstance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += dump_strict(to_json(inst));
    out += '\n';
  }
  return out;
}

namespace {

template <typename T>
std::size_t write_records(std::span<const T> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& r : records) out << dump_strict(to_json(r)) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
  return records.size();
}

template <typename Decode>
auto read_records(const std::filesystem::path& path, Decode decode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<decltype(decode(json{}))> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(decode(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace

std::size_t write_jsonl(std::span<const LabeledInstance> instances,
                        const std::filesystem::path& path) {
  return write_records(instances, path);
}

std::size_t write_jsonl(std::span<const PairedExample> pairs, const std::filesystem::path& path) {
  return write_records(pairs, path);
}

std::vector<LabeledInstance> read_instances_jsonl(const std::filesystem::path& path) {
  return read_records(path, [](const json& j) { return instance_from_json(j); });
}

std::vector<PairedExample> read_pairs_jsonl(const std::filesystem::path& path) {
  return read_records(path, [](const json& j) { return pair_from_json(j); });
}

}  // namespace cwescan
