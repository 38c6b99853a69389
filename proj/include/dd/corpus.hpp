#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dd {

// Generator-supervision class shared by all human-written samples.
inline constexpr std::string_view kHumanClass = "HUMAN";

struct Sample {
  std::string id;
  std::string text;
  int y = 0;          // 0 = human, 1 = AI
  std::string s;      // generator category of the slice the sample belongs to
  std::optional<std::string> domain;

  bool is_ai() const { return y == 1; }
};

// Class used to supervise the generator head: the category for AI text,
// kHumanClass for human text.
std::string generator_label(const Sample& sample);

class Corpus {
 public:
  Corpus() = default;
  // Validates ids are unique, y is 0/1 and s is non-empty.
  explicit Corpus(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const { return samples_; }
  const std::set<std::string>& categories() const { return categories_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  std::optional<std::size_t> find(const std::string& id) const;
  // Subset restricted to `ids`, in corpus order. Unknown ids are an error.
  Corpus subset(const std::vector<std::string>& ids) const;

 private:
  std::vector<Sample> samples_;
  std::set<std::string> categories_;
  std::map<std::string, std::size_t> index_;
};

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Exactly `per_category` human and `per_category` AI samples for each category,
// drawn uniformly without replacement. Output keeps corpus order.
Corpus balanced_sample(const Corpus& corpus, std::size_t per_category, std::uint64_t seed);

enum class Protocol { LeaveOneOut, Diversity };

std::string to_string(Protocol p);
Protocol parse_protocol(std::string_view s);

struct SplitPlan {
  Protocol protocol = Protocol::LeaveOneOut;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::string held_out;
  std::vector<std::string> train_categories;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static SplitPlan from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static SplitPlan load(const std::filesystem::path& path);
};

SplitPlan make_logo_split(const Corpus& corpus, const std::string& held_out);

// Fixed-size training set spread evenly over `train_categories` (the first
// budget % N categories get one extra sample), human/AI balanced within each
// category share. The test set is the whole held-out slice.
SplitPlan make_diversity_split(const Corpus& corpus, const std::vector<std::string>& train_categories,
                               std::size_t budget, const std::string& held_out, std::uint64_t seed);

enum class PerturbKind { Delete, Swap, Insert, Replace };

inline constexpr double kDefaultPerturbRate = 0.15;

std::string to_string(PerturbKind k);
PerturbKind parse_perturb_kind(std::string_view s);

// Word-level corruption of ceil(rate * n_tokens) whitespace tokens.
std::string perturb_text(std::string_view text, PerturbKind kind, double rate, std::uint64_t seed);

struct Batch {
  std::vector<std::size_t> indices;  // positions in the source corpus
  std::vector<std::string> texts;
  std::vector<int> y;
  std::vector<std::string> s;

  std::size_t size() const { return indices.size(); }
};

// One epoch of shuffled mini-batches; the trailing partial batch is kept.
std::vector<Batch> batch_iter(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed,
                              std::uint64_t epoch = 0, bool cross_view = true);

}  // namespace dd
