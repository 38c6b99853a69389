#include "dd/model.hpp"

#include <cmath>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size >= 2, "batch_size must be at least 2");
  require(k_samples >= 1, "K must be at least 1");
  require(beta >= 0.0, "beta must be non-negative");
  require(d_h >= 1 && d_e >= 1 && d_z >= 2 && head_hidden >= 1, "dimensions must be positive (d_z >= 2)");
  require(gamma_low >= 0.5 && gamma_low < gamma_high && gamma_high <= 1.0, "gamma_range must satisfy 0.5 <= low < high <= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(sigma_floor > 0.0, "sigma_floor must be positive");
  require(eps > 0.0, "eps must be positive");
  require(lambda_grl >= 0.0, "lambda_grl must be non-negative");
  require(!cross_view || dual_branch, "cross_view requires dual_branch");
  require(!adaptation || dual_branch, "adaptation requires dual_branch");
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["K"] = k_samples;
  j["beta"] = beta;
  j["epochs"] = epochs;
  j["d_h"] = d_h;
  j["d_e"] = d_e;
  j["d_z"] = d_z;
  j["head_hidden"] = head_hidden;
  j["seed"] = seed;
  j["gamma_range"] = {gamma_low, gamma_high};
  j["dropout"] = dropout;
  j["sigma_floor"] = sigma_floor;
  j["eps"] = eps;
  j["lambda_grl"] = lambda_grl;
  j["prior_trainable"] = prior_trainable;
  j["dual_branch"] = dual_branch;
  j["variational"] = variational;
  j["cross_view"] = cross_view;
  j["adaptation"] = adaptation;
  return j.dump(2) + "\n";
}

void TrainConfig::merge_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "learning_rate") learning_rate = v.get<double>();
      else if (k == "batch_size") batch_size = v.get<std::size_t>();
      else if (k == "K") k_samples = v.get<std::size_t>();
      else if (k == "beta") beta = v.get<double>();
      else if (k == "epochs") epochs = v.get<std::size_t>();
      else if (k == "d_h") d_h = v.get<std::size_t>();
      else if (k == "d_e") d_e = v.get<std::size_t>();
      else if (k == "d_z") d_z = v.get<std::size_t>();
      else if (k == "head_hidden") head_hidden = v.get<std::size_t>();
      else if (k == "seed") seed = v.get<std::uint64_t>();
      else if (k == "gamma_range") {
        auto r = v.get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("config: gamma_range needs two values");
        gamma_low = r[0];
        gamma_high = r[1];
      }
      else if (k == "dropout") dropout = v.get<double>();
      else if (k == "sigma_floor") sigma_floor = v.get<double>();
      else if (k == "eps") eps = v.get<double>();
      else if (k == "lambda_grl") lambda_grl = v.get<double>();
      else if (k == "prior_trainable") prior_trainable = v.get<bool>();
      else if (k == "dual_branch") dual_branch = v.get<bool>();
      else if (k == "variational") variational = v.get<bool>();
      else if (k == "cross_view") cross_view = v.get<bool>();
      else if (k == "adaptation") adaptation = v.get<bool>();
      else throw ConfigError("config: unknown key '" + k + "'");
    }
  } catch (const ordered_json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  TrainConfig c;
  c.merge_json(text);
  return c;
}

TrainConfig TrainConfig::baseline() {
  TrainConfig c;
  c.dual_branch = c.variational = c.cross_view = c.adaptation = false;
  return c;
}

TrainConfig TrainConfig::with_db() {
  TrainConfig c;
  c.cross_view = c.adaptation = false;
  return c;
}

TrainConfig TrainConfig::with_db_crossview() {
  TrainConfig c;
  c.adaptation = false;
  return c;
}

TrainConfig TrainConfig::full() { return {}; }

std::string LossBundle::to_json() const {
  ordered_json j;
  j["type"] = "step";
  j["step"] = step;
  j["epoch"] = epoch;
  j["l_db"] = l_db;
  j["l_reg"] = l_reg;
  j["l_stage1"] = l_stage1;
  j["l_adapt"] = l_adapt;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Model

std::vector<std::string> generator_classes_for(const std::vector<std::string>& train_categories) {
  std::vector<std::string> out = train_categories;
  out.emplace_back(kHumanClass);
  return out;
}

Model::Model(const TrainConfig& config, Embedder emb, std::vector<std::string> generator_classes)
    : embedder(std::move(emb)), config_(config), generator_classes_(std::move(generator_classes)) {
  config_.validate();
  if (!embedder.initialized()) throw StateError("model needs an initialized embedder");
  if (embedder.dim() != config_.d_h)
    throw ConfigError("embedder dimension " + std::to_string(embedder.dim()) + " differs from configured d_h " +
                      std::to_string(config_.d_h));
  if (generator_classes_.size() < 2) throw ConfigError("generator head needs at least one training category");
  for (std::size_t i = 0; i < generator_classes_.size(); ++i)
    if (!generator_lookup_.emplace(generator_classes_[i], i).second)
      throw ConfigError("duplicate generator class '" + generator_classes_[i] + "'");
  if (!generator_lookup_.contains(std::string(kHumanClass)))
    throw ConfigError("generator classes must include the HUMAN pseudo-class");

  enc_a = BranchEncoder(config_.d_h, config_.d_e, config_.d_z, "E_a", config_.sigma_floor);
  enc_g = BranchEncoder(config_.d_h, config_.d_e, config_.d_z, "E_g", config_.sigma_floor);
  prior_a = LearnablePrior(config_.d_z, "prior_a", config_.prior_trainable);
  prior_g = LearnablePrior(config_.d_z, "prior_g", config_.prior_trainable);
  d_a = Discriminator(config_.d_z, config_.head_hidden, 2, "D_a", config_.dropout);
  d_g = Discriminator(config_.d_z, config_.head_hidden, generator_classes_.size(), "D_g", config_.dropout);

  Rng ra(config_.seed, "init:E_a");
  enc_a.init(ra);
  Rng rg(config_.seed, "init:E_g");
  enc_g.init(rg);
  Rng rda(config_.seed, "init:D_a");
  d_a.init(rda);
  Rng rdg(config_.seed, "init:D_g");
  d_g.init(rdg);
}

std::size_t Model::generator_index(const Sample& sample) const {
  auto it = generator_lookup_.find(generator_label(sample));
  if (it == generator_lookup_.end())
    throw ValidationError("sample '" + sample.id + "' has generator '" + sample.s +
                          "' outside the generator head's classes");
  return it->second;
}

std::map<std::string, std::vector<Parameter*>> Model::groups() {
  std::map<std::string, std::vector<Parameter*>> g;
  g["embedder"] = embedder.parameters();
  g["E_a"] = enc_a.parameters();
  g["E_g"] = enc_g.parameters();
  g["prior_a"] = prior_a.parameters();
  g["prior_g"] = prior_g.parameters();
  g["D_a"] = d_a.parameters();
  g["D_g"] = d_g.parameters();
  return g;
}

std::vector<Parameter*> Model::group(const std::string& name) {
  auto g = groups();
  auto it = g.find(name);
  if (it == g.end()) throw ValidationError("unknown parameter group '" + name + "'");
  return it->second;
}

std::vector<Parameter*> Model::all_parameters() {
  std::vector<Parameter*> out;
  for (const char* name : kParameterGroups)
    for (auto* p : group(name)) out.push_back(p);
  return out;
}

std::uint64_t Model::group_hash(const std::string& name) {
  std::uint64_t h = 14695981039346656037ULL;
  for (auto* p : group(name)) h = hash_doubles(p->value.data, h);
  return h;
}

void Model::zero_grad() {
  for (auto* p : all_parameters()) p->zero_grad();
}

void Model::check_dim(const Matrix& h) const {
  if (h.cols != config_.d_h)
    throw ValidationError("embedding dimension " + std::to_string(h.cols) + " differs from model d_h " +
                          std::to_string(config_.d_h));
}

namespace {

void check_finite(double v, const std::string& what, std::uint64_t step) {
  if (!std::isfinite(v)) throw NumericError("non-finite " + what + " at step " + std::to_string(step));
}

Matrix stack(const std::vector<Matrix>& parts, std::size_t cols) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.rows;
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at));
    at += p.size();
  }
  return out;
}

Matrix slice_rows(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(count, m.cols);
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(first * m.cols),
            m.data.begin() + static_cast<std::ptrdiff_t>((first + count) * m.cols), out.data.begin());
  return out;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
std::vector<T> repeat(const std::vector<T>& v, std::size_t times) {
  std::vector<T> out;
  out.reserve(v.size() * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// KL of every row against the prior; adds scaled gradients when requested.
double batch_kl(const BranchEncoder::Forward& f, LearnablePrior& prior, double scale, bool accumulate,
                Matrix& dmu, Matrix& dsigma) {
  const auto p = prior.distribution();
  std::vector<double> d_sigma_p(prior.dim(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < f.mu.rows; ++i) {
    total += kl_diag(f.mu.row(i), f.sigma.row(i), p.mu, p.sigma);
    if (accumulate) {
      std::span<double> dmu_p, dsp;
      if (prior.trainable) {
        dmu_p = prior.mu.grad.data;
        dsp = d_sigma_p;
      }
      kl_diag_grad(f.mu.row(i), f.sigma.row(i), p.mu, p.sigma, scale, dmu.row(i), dsigma.row(i), dmu_p, dsp);
    }
  }
  if (accumulate && prior.trainable)
    for (std::size_t d = 0; d < prior.dim(); ++d) prior.raw_sigma.grad.data[d] += d_sigma_p[d] * p.sigma[d];
  return total;
}

}  // namespace

LossBundle Model::stage1(const Corpus& corpus, std::span<const std::size_t> rows, std::uint64_t step,
                         bool accumulate) {
  return stage1(corpus, rows, step, accumulate, Stage1Weights{config_.beta, 1.0});
}

LossBundle Model::stage1(const Corpus& corpus, std::span<const std::size_t> rows, std::uint64_t step,
                         bool accumulate, Stage1Weights weights) {
  LossBundle bundle;
  bundle.step = step;
  const std::size_t batch = rows.size();
  if (batch == 0) return bundle;

  const bool dual = config_.dual_branch;
  const bool variational = config_.variational;
  const bool mix = dual && config_.cross_view && batch >= 2;
  const std::size_t k_draws = variational ? config_.k_samples : 1;
  const std::size_t dz = config_.d_z;

  std::vector<int> y(batch);
  std::vector<std::size_t> y_idx(batch), s_idx(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const Sample& s = corpus[rows[i]];
    y[i] = s.y;
    y_idx[i] = static_cast<std::size_t>(s.y);
    if (dual) s_idx[i] = generator_index(s);
  }

  const auto hf = embedder.embed(corpus, rows);
  const Matrix& h = hf.h;
  check_dim(h);
  if (!h.all_finite()) throw NumericError("non-finite embedding at step " + std::to_string(step));

  const auto fa = enc_a.forward(h);
  const auto fg = dual ? enc_g.forward(h) : BranchEncoder::Forward{};

  Matrix dmu_a(batch, dz), dsig_a(batch, dz), dmu_g, dsig_g;
  if (dual) {
    dmu_g = Matrix(batch, dz);
    dsig_g = Matrix(batch, dz);
  }

  // Dual-bottleneck KL, closed form once per instance.
  if (variational) {
    const double scale = weights.db / static_cast<double>(batch);
    double kl = batch_kl(fa, prior_a, scale, accumulate, dmu_a, dsig_a);
    if (dual) kl += batch_kl(fg, prior_g, scale, accumulate, dmu_g, dsig_g);
    bundle.l_db = kl / static_cast<double>(batch);
    check_finite(bundle.l_db, "L_DB", step);
  }

  // Reparameterized draws.
  Rng eps_rng(config_.seed, "eps", step);
  std::vector<Matrix> eps_a(k_draws), eps_g(k_draws), lat_a(k_draws), lat_g(k_draws);
  for (std::size_t k = 0; k < k_draws; ++k) {
    lat_a[k] = fa.mu;
    if (dual) lat_g[k] = fg.mu;
    if (!variational) continue;
    eps_a[k] = Matrix(batch, dz);
    for (auto& e : eps_a[k].data) e = eps_rng.normal();
    for (std::size_t i = 0; i < lat_a[k].size(); ++i) lat_a[k].data[i] += fa.sigma.data[i] * eps_a[k].data[i];
    if (dual) {
      eps_g[k] = Matrix(batch, dz);
      for (auto& e : eps_g[k].data) e = eps_rng.normal();
      for (std::size_t i = 0; i < lat_g[k].size(); ++i) lat_g[k].data[i] += fg.sigma.data[i] * eps_g[k].data[i];
    }
  }

  // Cross-view perturbation, same partners and gammas for every draw.
  const MixOptions mix_opts{config_.eps, config_.gamma_low, config_.gamma_high};
  const std::uint64_t mix_seed = Rng::derive_seed(config_.seed, "mix", step);
  std::vector<PerturbedBatch> pb(k_draws);
  std::vector<Matrix> a_in(k_draws), g_in(k_draws), aug_in(k_draws);
  std::vector<std::size_t> aug_labels;
  for (std::size_t k = 0; k < k_draws; ++k) {
    if (mix) {
      pb[k] = perturb_batch(lat_a[k], lat_g[k], y, mix_seed, mix_opts);
      a_in[k] = pb[k].a_tilde;
      g_in[k] = pb[k].g_tilde;
      aug_in[k] = pb[k].a_aug;
    } else {
      a_in[k] = lat_a[k];
      if (dual) g_in[k] = lat_g[k];
    }
  }
  if (mix)
    for (auto r : pb[0].aug_rows) aug_labels.push_back(y_idx[r]);

  // Discriminators in training mode over all draws at once.
  Rng drop(config_.seed, "dropout", step);
  const Matrix za = stack(a_in, dz);
  const auto out_a = d_a.forward(za, true, &drop);
  const auto ya_rep = repeat(y_idx, k_draws);
  const double rows_a = static_cast<double>(za.rows);
  Matrix dlog_a;
  double l_reg = cross_entropy_rows(out_a.probs, ya_rep, weights.reg / rows_a, accumulate ? &dlog_a : nullptr);

  Matrix zaug, dlog_aug;
  Discriminator::Forward out_aug;
  const bool has_aug = mix && !aug_labels.empty();
  if (has_aug) {
    zaug = stack(aug_in, dz);
    out_aug = d_a.forward(zaug, true, &drop);
    const auto yaug_rep = repeat(aug_labels, k_draws);
    l_reg += cross_entropy_rows(out_aug.probs, yaug_rep, weights.reg / static_cast<double>(zaug.rows),
                                accumulate ? &dlog_aug : nullptr);
  }

  Matrix zg, dlog_g;
  Discriminator::Forward out_g;
  if (dual) {
    zg = stack(g_in, dz);
    out_g = d_g.forward(zg, true, &drop);
    const auto s_rep = repeat(s_idx, k_draws);
    l_reg += cross_entropy_rows(out_g.probs, s_rep, weights.reg / static_cast<double>(zg.rows),
                                accumulate ? &dlog_g : nullptr);
  }
  bundle.l_reg = l_reg;
  check_finite(bundle.l_reg, "L_reg", step);
  bundle.l_stage1 = config_.beta * bundle.l_db + bundle.l_reg;
  check_finite(bundle.l_stage1, "L_stage1", step);
  if (!accumulate) return bundle;

  // Backward.
  const Matrix dza = d_a.backward(za, out_a, dlog_a, true);
  const Matrix dzaug = has_aug ? d_a.backward(zaug, out_aug, dlog_aug, true) : Matrix();
  const Matrix dzg = dual ? d_g.backward(zg, out_g, dlog_g, true) : Matrix();
  const std::size_t n_aug = has_aug ? aug_labels.size() : 0;

  for (std::size_t k = 0; k < k_draws; ++k) {
    const Matrix da_in = slice_rows(dza, k * batch, batch);
    Matrix da_lat, dg_lat;
    if (mix) {
      const Matrix dg_in = slice_rows(dzg, k * batch, batch);
      const Matrix daug_in = n_aug ? slice_rows(dzaug, k * n_aug, n_aug) : Matrix(0, dz);
      da_lat = Matrix(batch, dz);
      dg_lat = Matrix(batch, dz);
      perturb_batch_backward(lat_a[k], lat_g[k], pb[k], config_.eps, da_in, dg_in, daug_in, da_lat, dg_lat);
    } else {
      da_lat = da_in;
      if (dual) dg_lat = slice_rows(dzg, k * batch, batch);
    }
    add_into(dmu_a, da_lat);
    if (variational)
      for (std::size_t i = 0; i < da_lat.size(); ++i) dsig_a.data[i] += da_lat.data[i] * eps_a[k].data[i];
    if (dual) {
      add_into(dmu_g, dg_lat);
      if (variational)
        for (std::size_t i = 0; i < dg_lat.size(); ++i) dsig_g.data[i] += dg_lat.data[i] * eps_g[k].data[i];
    }
  }

  Matrix dh = enc_a.backward(h, fa, dmu_a, variational ? dsig_a : Matrix(), true);
  if (dual) add_into(dh, enc_g.backward(h, fg, dmu_g, variational ? dsig_g : Matrix(), true));
  if (embedder.trainable()) embedder.backward(hf, dh);
  return bundle;
}

double Model::stage2(const Corpus& corpus, std::span<const std::size_t> rows, bool accumulate, AdaptTerms terms) {
  if (!config_.dual_branch) throw ConfigError("stage II needs the generator branch");
  const std::size_t batch = rows.size();
  if (batch == 0) return 0.0;

  std::vector<std::size_t> y_idx(batch), s_idx(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    y_idx[i] = static_cast<std::size_t>(corpus[rows[i]].y);
    s_idx[i] = generator_index(corpus[rows[i]]);
  }

  const Matrix h = embedder.embed(corpus, rows).h;
  check_dim(h);
  const auto fa = enc_a.forward(h);
  const auto fg = enc_g.forward(h);
  const Matrix& a = fa.mu;
  const Matrix& g = fg.mu;
  const ReversalGate grl{config_.lambda_grl};
  const double scale = 1.0 / static_cast<double>(batch);

  // Frozen discriminators run in inference mode on clean latents.
  const auto pa_a = d_a.forward(a, false, nullptr);
  const auto pa_g = d_a.forward(grl.forward(g), false, nullptr);
  const auto pg_g = d_g.forward(g, false, nullptr);
  const auto pg_a = d_g.forward(grl.forward(a), false, nullptr);

  Matrix d1, d2, d3, d4;
  const bool grad = accumulate;
  double loss = terms.a_own * cross_entropy_rows(pa_a.probs, y_idx, terms.a_own * scale, grad ? &d1 : nullptr);
  loss += terms.g_into_da * cross_entropy_rows(pa_g.probs, y_idx, terms.g_into_da * scale, grad ? &d2 : nullptr);
  loss += terms.g_own * cross_entropy_rows(pg_g.probs, s_idx, terms.g_own * scale, grad ? &d3 : nullptr);
  loss += terms.a_into_dg * cross_entropy_rows(pg_a.probs, s_idx, terms.a_into_dg * scale, grad ? &d4 : nullptr);
  if (!std::isfinite(loss)) throw NumericError("non-finite L_adapt");
  if (!accumulate) return loss;

  Matrix da = d_a.backward(a, pa_a, d1, false);
  add_into(da, grl.backward(d_g.backward(a, pg_a, d4, false)));
  Matrix dg = d_g.backward(g, pg_g, d3, false);
  add_into(dg, grl.backward(d_a.backward(g, pa_g, d2, false)));
  enc_a.backward(h, fa, da, Matrix(), true);
  enc_g.backward(h, fg, dg, Matrix(), true);
  return loss;
}

std::vector<Prediction> Model::predict(const Matrix& h) const {
  check_dim(h);
  if (!h.all_finite()) throw NumericError("non-finite embedding passed to predict");
  const auto probs = d_a.forward(enc_a.forward(h).mu, false, nullptr).probs;
  std::vector<Prediction> out(h.rows);
  for (std::size_t i = 0; i < h.rows; ++i) {
    out[i].p_ai = probs(i, 1);
    out[i].label = probs(i, 1) > probs(i, 0) ? 1 : 0;
  }
  return out;
}

Matrix Model::embed_all(const Corpus& corpus) const {
  std::vector<std::size_t> rows(corpus.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return embedder.embed(corpus, rows).h;
}

std::vector<Prediction> Model::predict(const Corpus& corpus) const { return predict(embed_all(corpus)); }

std::vector<Prediction> Model::predict_texts(std::span<const std::string> texts) const {
  return predict(embedder.embed_texts(texts).h);
}

Matrix Model::latents(const Matrix& h, const std::string& branch) const {
  check_dim(h);
  if (branch == "h") return h;
  if (branch == "a") return enc_a.forward(h).mu;
  if (branch == "g") return enc_g.forward(h).mu;
  throw ValidationError("unknown branch '" + branch + "' (expected h, a or g)");
}

}  // namespace dd
