#include "dd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

using nlohmann::json;

std::string generator_label(const Sample& sample) {
  return sample.is_ai() ? sample.s : std::string(kHumanClass);
}

Corpus::Corpus(std::vector<Sample> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.y != 0 && s.y != 1)
      throw ValidationError("sample '" + s.id + "': label must be 0 or 1, got " + std::to_string(s.y));
    if (s.s.empty()) throw ValidationError("sample '" + s.id + "': empty generator category");
    if (!index_.emplace(s.id, i).second) throw ValidationError("duplicate sample id '" + s.id + "'");
    categories_.insert(s.s);
  }
}

std::optional<std::size_t> Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    auto at = find(id);
    if (!at) throw ValidationError("unknown sample id '" + id + "'");
    rows.push_back(*at);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<Sample> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(samples_[r]);
  return Corpus(std::move(out));
}

Corpus parse_corpus(std::istream& in) {
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    for (const char* key : {"text", "label", "generator"})
      if (!obj.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
    if (!obj["text"].is_string()) throw ValidationError(where + ": 'text' must be a string");
    if (!obj["generator"].is_string()) throw ValidationError(where + ": 'generator' must be a string");
    const json& label = obj["label"];
    if (!label.is_number_integer() || (label.get<long long>() != 0 && label.get<long long>() != 1))
      throw ValidationError(where + ": 'label' must be 0 or 1, got " + label.dump());

    Sample s;
    s.id = obj.contains("id") ? (obj["id"].is_string() ? obj["id"].get<std::string>() : obj["id"].dump())
                              : std::to_string(line_no);
    s.text = obj["text"].get<std::string>();
    s.y = label.get<int>();
    s.s = obj["generator"].get<std::string>();
    if (s.s.empty()) throw ValidationError(where + ": empty 'generator'");
    if (obj.contains("domain") && obj["domain"].is_string()) s.domain = obj["domain"].get<std::string>();
    samples.push_back(std::move(s));
  }
  return Corpus(std::move(samples));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& s : corpus.samples()) {
    json obj = {{"id", s.id}, {"text", s.text}, {"label", s.y}, {"generator", s.s}};
    if (s.domain) obj["domain"] = *s.domain;
    out << obj.dump() << '\n';
  }
}

namespace {

// Row indices per (category, y) cell, in corpus order.
std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells_of(const Corpus& corpus) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < corpus.size(); ++i) cells[{corpus[i].s, corpus[i].y}].push_back(i);
  return cells;
}

std::string cell_name(const std::string& category, int y) {
  return "(" + category + ", " + (y == 1 ? "AI" : "human") + ")";
}

// Draws `k` of `rows` uniformly without replacement.
std::vector<std::size_t> draw(std::vector<std::size_t> rows, std::size_t k, Rng& rng,
                              const std::string& category, int y) {
  if (rows.size() < k)
    throw CapacityError("cell " + cell_name(category, y) + " has " + std::to_string(rows.size()) +
                        " samples, " + std::to_string(k) + " requested");
  shuffle(rows.begin(), rows.end(), rng);
  rows.resize(k);
  return rows;
}

}  // namespace

Corpus balanced_sample(const Corpus& corpus, std::size_t per_category, std::uint64_t seed) {
  auto cells = cells_of(corpus);
  std::vector<std::size_t> keep;
  for (const auto& cat : corpus.categories()) {
    for (int y : {0, 1}) {
      Rng rng(seed, "balance:" + cat + ":" + std::to_string(y));
      auto picked = draw(cells[{cat, y}], per_category, rng, cat, y);
      keep.insert(keep.end(), picked.begin(), picked.end());
    }
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Sample> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(corpus[i]);
  return Corpus(std::move(out));
}

std::string to_string(Protocol p) { return p == Protocol::LeaveOneOut ? "leave-one-out" : "diversity"; }

Protocol parse_protocol(std::string_view s) {
  if (s == "leave-one-out") return Protocol::LeaveOneOut;
  if (s == "diversity") return Protocol::Diversity;
  throw ValidationError("unknown split protocol '" + std::string(s) + "'");
}

std::string SplitPlan::to_json() const {
  json obj = {{"protocol", to_string(protocol)}, {"held_out", held_out},
              {"train_categories", train_categories}, {"seed", seed},
              {"train_ids", train_ids}, {"test_ids", test_ids}};
  return obj.dump(2) + "\n";
}

SplitPlan SplitPlan::from_json(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("split plan: malformed JSON (") + e.what() + ")");
  }
  SplitPlan p;
  try {
    p.protocol = parse_protocol(obj.at("protocol").get<std::string>());
    p.held_out = obj.at("held_out").get<std::string>();
    p.train_categories = obj.at("train_categories").get<std::vector<std::string>>();
    p.seed = obj.at("seed").get<std::uint64_t>();
    p.train_ids = obj.at("train_ids").get<std::vector<std::string>>();
    p.test_ids = obj.at("test_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("split plan: ") + e.what());
  }
  return p;
}

void SplitPlan::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json();
}

SplitPlan SplitPlan::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open split file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

SplitPlan make_logo_split(const Corpus& corpus, const std::string& held_out) {
  if (!corpus.categories().contains(held_out))
    throw ValidationError("unknown held-out category '" + held_out + "'");
  SplitPlan plan;
  plan.protocol = Protocol::LeaveOneOut;
  plan.held_out = held_out;
  for (const auto& c : corpus.categories())
    if (c != held_out) plan.train_categories.push_back(c);
  for (const auto& s : corpus.samples()) (s.s == held_out ? plan.test_ids : plan.train_ids).push_back(s.id);
  if (plan.train_ids.empty())
    throw ValidationError("holding out '" + held_out + "' leaves an empty training set");
  return plan;
}

SplitPlan make_diversity_split(const Corpus& corpus, const std::vector<std::string>& train_categories,
                               std::size_t budget, const std::string& held_out, std::uint64_t seed) {
  if (!corpus.categories().contains(held_out))
    throw ValidationError("unknown held-out category '" + held_out + "'");
  if (train_categories.empty()) throw ValidationError("diversity split needs at least one training category");
  std::set<std::string> seen;
  for (const auto& c : train_categories) {
    if (c == held_out) throw ValidationError("held-out category '" + c + "' listed as a training category");
    if (!corpus.categories().contains(c)) throw ValidationError("unknown training category '" + c + "'");
    if (!seen.insert(c).second) throw ValidationError("training category '" + c + "' listed twice");
  }

  auto cells = cells_of(corpus);
  const std::size_t n = train_categories.size();
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& cat = train_categories[k];
    const std::size_t share = budget / n + (k < budget % n ? 1 : 0);
    const std::size_t ai = (share + 1) / 2;
    const std::size_t human = share / 2;
    for (auto [y, count] : {std::pair<int, std::size_t>{0, human}, {1, ai}}) {
      Rng rng(seed, "diversity:" + cat + ":" + std::to_string(y));
      auto picked = draw(cells[{cat, y}], count, rng, cat, y);
      keep.insert(keep.end(), picked.begin(), picked.end());
    }
  }
  std::sort(keep.begin(), keep.end());

  SplitPlan plan;
  plan.protocol = Protocol::Diversity;
  plan.held_out = held_out;
  plan.train_categories = train_categories;
  plan.seed = seed;
  for (auto i : keep) plan.train_ids.push_back(corpus[i].id);
  for (const auto& s : corpus.samples())
    if (s.s == held_out) plan.test_ids.push_back(s.id);
  return plan;
}

std::string to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::Delete: return "delete";
    case PerturbKind::Swap: return "swap";
    case PerturbKind::Insert: return "insert";
    case PerturbKind::Replace: return "replace";
  }
  return "?";
}

PerturbKind parse_perturb_kind(std::string_view s) {
  if (s == "delete") return PerturbKind::Delete;
  if (s == "swap") return PerturbKind::Swap;
  if (s == "insert") return PerturbKind::Insert;
  if (s == "replace") return PerturbKind::Replace;
  throw ValidationError("unknown perturbation kind '" + std::string(s) + "'");
}

std::string perturb_text(std::string_view text, PerturbKind kind, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("perturbation rate must lie in [0, 1]");
  std::vector<std::string> tokens;
  {
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
  }
  const std::size_t n = tokens.size();
  // The 1e-9 keeps products like 0.15 * 20 = 3.0000000000000004 from rounding up.
  const auto affected = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(rate * n - 1e-9)));
  if (n == 0 || affected == 0) return std::string(text);

  Rng rng(seed, "perturb:" + to_string(kind));
  std::vector<std::size_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = i;
  shuffle(positions.begin(), positions.end(), rng);
  positions.resize(affected);
  std::sort(positions.begin(), positions.end());

  const std::vector<std::string> original = tokens;
  switch (kind) {
    case PerturbKind::Delete:
      for (auto it = positions.rbegin(); it != positions.rend(); ++it)
        tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(*it));
      break;
    case PerturbKind::Swap:
      if (n >= 2) {
        for (auto p : positions) {
          const std::size_t q = p + 1 < n ? p + 1 : p - 1;
          std::swap(tokens[p], tokens[q]);
        }
      }
      break;
    case PerturbKind::Insert:
      // Back to front so earlier positions stay valid.
      for (auto it = positions.rbegin(); it != positions.rend(); ++it)
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(*it), original[rng.index(n)]);
      break;
    case PerturbKind::Replace:
      for (auto p : positions) tokens[p] = original[rng.index(n)];
      break;
  }

  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<Batch> batch_iter(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch, bool cross_view) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cross_view && batch_size < 2)
    throw ConfigError("batch_size must be at least 2 when cross-view regularization is active");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed, "shuffle", epoch);
  shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      const Sample& s = corpus[order[i]];
      b.indices.push_back(order[i]);
      b.texts.push_back(s.text);
      b.y.push_back(s.y);
      b.s.push_back(s.s);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace dd
