#include "dd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/kernels.hpp"
#include "dd/rng.hpp"

namespace dd {

using ordered_json = nlohmann::ordered_json;

namespace {

Metrics metrics_of(std::span<const int> preds, std::span<const int> labels, std::span<const std::size_t> rows) {
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (auto i : rows) {
    const int p = preds[i];
    const int y = labels[i];
    if (p == y) ++correct;
    if (p == 1 && y == 1) ++tp;
    if (p == 1 && y == 0) ++fp;
    if (p == 0 && y == 1) ++fn;
  }
  Metrics m;
  m.n = rows.size();
  m.accuracy = m.n ? static_cast<double>(correct) / static_cast<double>(m.n) : 0.0;
  // Harmonic mean of precision and recall, as one division of the counts so
  // the result is the correctly rounded ratio.
  m.f1 = tp > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  return m;
}

ordered_json metrics_json(const Metrics& m) { return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"n", m.n}}; }

std::vector<int> labels_of(const std::vector<Prediction>& preds) {
  std::vector<int> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) out[i] = preds[i].label;
  return out;
}

}  // namespace

std::string EvalReport::to_json() const {
  ordered_json j = metrics_json(*this);
  ordered_json per = ordered_json::object();
  for (const auto& [k, m] : per_generator) per[k] = metrics_json(m);
  j["per_generator"] = per;
  return j.dump(2);
}

EvalReport classification_metrics(std::span<const int> preds, std::span<const int> labels,
                                  std::span<const std::string> generators) {
  if (preds.size() != labels.size()) throw ValidationError("classification_metrics: length mismatch");
  if (!generators.empty() && generators.size() != labels.size())
    throw ValidationError("classification_metrics: generator list length mismatch");
  std::vector<std::size_t> all(preds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EvalReport r;
  static_cast<Metrics&>(r) = metrics_of(preds, labels, all);
  std::map<std::string, std::vector<std::size_t>> by_gen;
  for (std::size_t i = 0; i < generators.size(); ++i) by_gen[generators[i]].push_back(i);
  for (const auto& [g, rows] : by_gen) r.per_generator[g] = metrics_of(preds, labels, rows);
  return r;
}

double attack_success_rate(std::span<const int> clean_preds, std::span<const int> attacked_preds,
                           std::span<const int> labels) {
  if (clean_preds.size() != labels.size() || attacked_preds.size() != labels.size())
    throw ValidationError("attack_success_rate: length mismatch");
  std::size_t clean_correct = 0, flipped = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (clean_preds[i] != labels[i]) continue;
    ++clean_correct;
    if (attacked_preds[i] != labels[i]) ++flipped;
  }
  return clean_correct ? static_cast<double>(flipped) / static_cast<double>(clean_correct) : 0.0;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ClassCompactness CompactnessReport::mean() const {
  ClassCompactness m;
  if (per_class.empty()) return m;
  for (const auto& [c, v] : per_class) {
    m.mean_to_center += v.mean_to_center;
    m.cov_trace += v.cov_trace;
    m.p90_pairwise += v.p90_pairwise;
  }
  const double n = static_cast<double>(per_class.size());
  m.mean_to_center /= n;
  m.cov_trace /= n;
  m.p90_pairwise /= n;
  return m;
}

std::string CompactnessReport::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& [c, v] : per_class)
    j[std::to_string(c)] = {{"mean_to_center", v.mean_to_center}, {"cov_trace", v.cov_trace},
                            {"p90_pairwise", v.p90_pairwise}};
  return j.dump(2);
}

CompactnessReport compactness(const Matrix& latents, std::span<const int> class_labels) {
  if (class_labels.size() != latents.rows) throw ValidationError("compactness: label count mismatch");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < class_labels.size(); ++i) members[class_labels[i]].push_back(i);

  CompactnessReport report;
  for (const auto& [cls, rows] : members) {
    if (rows.size() < 2) throw ValidationError("compactness: class " + std::to_string(cls) + " has a single sample");
    const Matrix pts = gather_rows(latents, rows);
    const double n = static_cast<double>(pts.rows);
    std::vector<double> center(pts.cols, 0.0);
    for (std::size_t r = 0; r < pts.rows; ++r)
      for (std::size_t c = 0; c < pts.cols; ++c) center[c] += pts(r, c);
    for (auto& v : center) v /= n;

    ClassCompactness cc;
    for (std::size_t r = 0; r < pts.rows; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < pts.cols; ++c) sq += (pts(r, c) - center[c]) * (pts(r, c) - center[c]);
      cc.mean_to_center += std::sqrt(sq);
      // Trace of the population covariance is the mean squared distance to the centroid.
      cc.cov_trace += sq;
    }
    cc.mean_to_center /= n;
    cc.cov_trace /= n;
    cc.p90_pairwise = percentile(kernels::pairwise_distances(pts), 0.9);
    report.per_class[cls] = cc;
  }
  return report;
}

EvalReport evaluate(const Model& model, const Corpus& corpus) {
  const auto preds = labels_of(model.predict(corpus));
  std::vector<int> labels;
  std::vector<std::string> gens;
  for (const auto& s : corpus.samples()) {
    labels.push_back(s.y);
    gens.push_back(s.s);
  }
  return classification_metrics(preds, labels, gens);
}

std::map<std::string, EvalReport> robustness_sweep(const Model& model, const Corpus& corpus,
                                                   std::span<const PerturbKind> kinds, double rate,
                                                   std::uint64_t seed) {
  std::vector<int> labels;
  std::vector<std::string> gens, texts;
  for (const auto& s : corpus.samples()) {
    labels.push_back(s.y);
    gens.push_back(s.s);
    texts.push_back(s.text);
  }
  std::map<std::string, EvalReport> out;
  out["clean"] = classification_metrics(labels_of(model.predict_texts(texts)), labels, gens);
  for (auto kind : kinds) {
    std::vector<std::string> perturbed(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i)
      perturbed[i] = perturb_text(texts[i], kind, rate, Rng::derive_seed(seed, corpus[i].id, 0));
    out[to_string(kind)] = classification_metrics(labels_of(model.predict_texts(perturbed)), labels, gens);
  }
  return out;
}

void export_embeddings(const Model& model, const Corpus& corpus, const std::string& branch,
                       const std::filesystem::path& path) {
  const Matrix vecs = model.latents(model.embed_all(corpus), branch);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto row = vecs.row(i);
    ordered_json j = {{"id", corpus[i].id}, {"y", corpus[i].y}, {"s", corpus[i].s},
                      {"vector", std::vector<double>(row.begin(), row.end())}};
    out << j.dump() << '\n';
  }
  if (!out) throw ValidationError("failed writing " + path.string());
}

double linear_probe_accuracy(const Matrix& features, std::span<const std::size_t> labels, std::uint64_t seed,
                             std::size_t epochs) {
  if (labels.size() != features.rows || features.rows < 4) throw ValidationError("linear probe: bad input");
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> order(features.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed, "probe-split");
  shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = order.size() * 7 / 10;
  const std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  // Standardize with training statistics.
  const std::size_t d = features.cols;
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (auto r : train_rows)
    for (std::size_t c = 0; c < d; ++c) mean[c] += features(r, c);
  for (auto& m : mean) m /= static_cast<double>(n_train);
  for (auto r : train_rows)
    for (std::size_t c = 0; c < d; ++c) sd[c] += (features(r, c) - mean[c]) * (features(r, c) - mean[c]);
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n_train)) + 1e-8;
  auto standardized = [&](const std::vector<std::size_t>& rows) {
    Matrix x = gather_rows(features, rows);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < d; ++c) x(r, c) = (x(r, c) - mean[c]) / sd[c];
    return x;
  };
  const Matrix xtr = standardized(train_rows);
  const Matrix xte = standardized(test_rows);
  std::vector<std::size_t> ytr, yte;
  for (auto r : train_rows) ytr.push_back(labels[r]);
  for (auto r : test_rows) yte.push_back(labels[r]);

  Dense probe(d, classes, "probe");
  Rng init(seed, "probe-init");
  probe.init(init);
  Adam opt(probe.parameters(), Adam::Options{0.05, 0.9, 0.999, 1e-8});
  for (std::size_t e = 0; e < epochs; ++e) {
    probe.weight.zero_grad();
    probe.bias.zero_grad();
    Matrix dlogits;
    cross_entropy_rows(softmax_rows(probe.forward(xtr)), ytr, 1.0 / static_cast<double>(xtr.rows), &dlogits);
    probe.backward(xtr, dlogits, true);
    opt.step();
  }
  const Matrix probs = softmax_rows(probe.forward(xte));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < probs.rows; ++r) {
    auto row = probs.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == yte[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

}  // namespace dd
