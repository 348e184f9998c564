#include "vtreid/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "vtreid/error.hpp"
#include "vtreid/rng.hpp"

namespace vtreid {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return Rng::stream(seed, purpose).engine()();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidConfig, what);
}

void adam_on(EncoderParams& params, const EncoderParams& grads, AdamMoments& moments,
             const AdamHyper& hyper) {
  Vec64 flat = params.flatten();
  const Vec64 g = grads.flatten();
  adam_step(flat, g, moments, hyper, ++moments.steps);
  params.assign(flat);
}

void check_modality(const FeatureDataset& dataset, Modality m) {
  if (!dataset.has(m)) {
    throw Error(Errc::ModeDataMismatch,
                "mode needs " + std::string(modality_name(m)) + " records, dataset has none");
  }
  for (const auto& id : dataset.splits().train) dataset.vector(id, m);
}

std::vector<Vec64> gather(const FeatureDataset& dataset, std::span<const std::string> ids,
                          Modality m) {
  std::vector<Vec64> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(dataset.vector(id, m));
  return out;
}

template <class Embed>
EvalSet embed_split(const FeatureDataset& dataset, Embed embed) {
  EvalSet out;
  for (const auto& id : dataset.splits().query) out.queries.push_back(embed(id));
  for (const auto& id : dataset.splits().gallery) out.gallery.push_back(embed(id));
  if (out.queries.empty() || out.gallery.empty()) {
    throw Error(Errc::EmptyDataset, "evaluation split has no queries or no gallery");
  }
  return out;
}

}  // namespace

std::string_view mode_name(TrainMode m) noexcept {
  switch (m) {
    case TrainMode::baseline: return "baseline";
    case TrainMode::text_only: return "text_only";
    case TrainMode::video_only: return "video_only";
    case TrainMode::total: return "total";
  }
  return "unknown";
}

TrainMode parse_mode(std::string_view s) {
  for (TrainMode m : kAllModes) {
    if (mode_name(m) == s) return m;
  }
  throw Error(Errc::InvalidConfig, "unknown mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch size must be at least 1");
  require(tau > 0.0, "tau must be positive");
  require(eta >= 0.0, "eta must be non-negative");
  require(tau_instance > 0.0, "instance temperature must be positive");
  require(momentum >= 0.0 && momentum <= 1.0, "momentum must lie in [0, 1]");
  require(queue_capacity >= 1, "queue capacity must be at least 1");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(weight_decay_visual >= 0.0 && weight_decay_text >= 0.0, "weight decay must be non-negative");
  require(clusters != 1, "need at least two clusters");
  require(hidden_dim >= 1 && embed_dim >= 1, "encoder dims must be positive");
  require(aug_sigma >= 0.0 && aug_dropout >= 0.0 && aug_dropout < 1.0, "bad augmentation settings");
  require(fusion_weight >= 0.0 && fusion_weight <= 1.0, "fusion weight must lie in [0, 1]");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               const AdamHyper& hyper, std::uint64_t t) {
  if (params.size() != grads.size()) {
    throw Error(Errc::ShapeMismatch, "params and grads differ in length");
  }
  if (t < 1) throw Error(Errc::InvalidConfig, "adam step counter starts at 1");
  if (moments.m.empty() && moments.v.empty()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
  }
  if (moments.m.size() != params.size() || moments.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "moment buffers differ from params in length");
  }
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double lr = hyper.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * hyper.weight_decay * params[i];
    moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * grads[i];
    moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = moments.m[i] / bias1;
    const double v_hat = moments.v[i] / bias2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

double total_loss(double visual_loss, double text_loss) {
  if (!std::isfinite(visual_loss) || !std::isfinite(text_loss)) {
    throw Error(Errc::NonFinite, "loss terms must be finite");
  }
  return visual_loss + text_loss;
}

TrainState init_state(const TrainConfig& config, const FeatureDataset& dataset) {
  config.validate();
  if (dataset.records().empty()) throw Error(Errc::EmptyDataset, "dataset has no records");
  if (dataset.splits().train.empty()) throw Error(Errc::EmptyDataset, "training split is empty");
  if (uses_video(config.mode)) check_modality(dataset, Modality::visual);
  if (uses_text(config.mode)) check_modality(dataset, Modality::text);

  // An absent modality gets a 1-input placeholder encoder that is never used.
  const std::size_t vdim = std::max<std::size_t>(dataset.visual_dim(), 1);
  const std::size_t tdim = std::max<std::size_t>(dataset.text_dim(), 1);
  const std::size_t vd[] = {vdim, config.hidden_dim, config.embed_dim};
  const std::size_t td[] = {tdim, config.hidden_dim, config.embed_dim};

  TrainState s;
  s.visual = make_pair(init_params(vd, derive_seed(config.seed, "visual-encoder")), config.momentum);
  s.text = init_params(td, derive_seed(config.seed, "text-encoder"));
  s.queue = KeyQueue(config.queue_capacity, config.embed_dim);

  std::set<int> train_identities;
  for (const auto& id : dataset.splits().train) train_identities.insert(dataset.sample(id).identity);
  const std::size_t k = config.clusters ? config.clusters : std::max<std::size_t>(train_identities.size(), 2);
  if (dataset.has(Modality::text)) {
    std::vector<Vec64> z;
    for (const auto& id : dataset.splits().train) {
      if (dataset.sample(id).text) z.push_back(forward(s.text, dataset.vector(id, Modality::text)));
    }
    s.clusters = init_centers(z, k, derive_seed(config.seed, "centers"));
  } else {
    s.clusters = ClusterState{Mat64(k, config.embed_dim), 1.0};
  }
  return s;
}

TrainResult train(const TrainConfig& config, const FeatureDataset& dataset) {
  return train(config, dataset, init_state(config, dataset));
}

TrainResult train(const TrainConfig& config, const FeatureDataset& dataset, TrainState start) {
  config.validate();
  if (dataset.splits().train.empty()) throw Error(Errc::EmptyDataset, "training split is empty");
  if (uses_video(config.mode)) check_modality(dataset, Modality::visual);
  if (uses_text(config.mode)) check_modality(dataset, Modality::text);

  TrainResult out{std::move(start), {}};
  TrainState& s = out.state;
  if (config.mode == TrainMode::baseline) return out;

  const auto& train_ids = dataset.splits().train;
  const Augmentation aug = FeatureNoise{config.aug_sigma, config.aug_dropout};
  const VisualLossConfig vcfg{config.tau};
  const TextLossConfig tcfg{config.eta, config.tau_instance, config.batch_size};
  const AdamHyper visual_hyper{config.learning_rate, config.weight_decay_visual};
  const AdamHyper text_hyper{config.learning_rate, config.weight_decay_text};

  std::vector<std::string> batch(config.batch_size);
  while (s.iteration < config.iterations) {
    const std::uint64_t it = s.iteration + 1;
    Rng batch_rng = Rng::stream(config.seed, "batch", it);
    for (auto& id : batch) id = train_ids[batch_rng.below(train_ids.size())];

    const bool warmup = config.mode == TrainMode::total && it <= config.text_warmup_iterations;
    LossRecord rec{it, 0.0, 0.0, 0.0};

    if (uses_video(config.mode) && !warmup) {
      Rng rng = Rng::stream(config.seed, "visual-augment", it);
      const auto x = gather(dataset, batch, Modality::visual);
      VisualStepResult r = visual_step(s.visual, s.queue, x, aug, vcfg, rng);
      rec.video = r.loss;
      s.visual = std::move(r.pair);
      s.queue = std::move(r.queue);
      adam_on(s.visual.query, r.query_grads, s.visual_moments, visual_hyper);
    }
    if (uses_text(config.mode)) {
      Rng rng = Rng::stream(config.seed, "text-augment", it);
      const auto x = gather(dataset, batch, Modality::text);
      TextLossResult r = text_loss(x, s.text, s.clusters, tcfg, aug, rng);
      rec.text = r.loss;
      adam_on(s.text, r.encoder_grads, s.text_moments, text_hyper);
      adam_step(s.clusters.centers.values(), r.center_grads.values(), s.center_moments, text_hyper,
                ++s.center_moments.steps);
    }
    rec.total = total_loss(rec.video, rec.text);
    out.trace.push_back(rec);
    s.iteration = it;
  }
  return out;
}

EvalSet embed_eval_split(const TrainState& state, const FeatureDataset& dataset,
                         double fusion_weight) {
  const bool need_visual = fusion_weight > 0.0;
  const bool need_text = fusion_weight < 1.0;
  auto embed = [&](const std::string& id) {
    const Sample& s = dataset.sample(id);
    Vec64 v(state.visual.query.output_dim(), 0.0);
    Vec64 t(state.text.output_dim(), 0.0);
    v[0] = t[0] = 1.0;  // stands in for a modality that carries zero weight
    if (need_visual) v = forward(state.visual.query, dataset.vector(id, Modality::visual));
    if (need_text) t = forward(state.text, dataset.vector(id, Modality::text));
    return GalleryItem{id, s.identity, s.camera, fuse(v, t, fusion_weight)};
  };
  return embed_split(dataset, embed);
}

EvalSet raw_eval_split(const FeatureDataset& dataset, double fusion_weight) {
  const bool need_visual = fusion_weight > 0.0;
  const bool need_text = fusion_weight < 1.0;
  auto embed = [&](const std::string& id) {
    const Sample& s = dataset.sample(id);
    Vec64 v{1.0}, t{1.0};
    if (need_visual) v = l2_normalize(dataset.vector(id, Modality::visual));
    if (need_text) t = l2_normalize(dataset.vector(id, Modality::text));
    return GalleryItem{id, s.identity, s.camera, fuse(v, t, fusion_weight)};
  };
  return embed_split(dataset, embed);
}

RankProtocol default_protocol(const FeatureDataset& dataset) {
  return RankProtocol{dataset.camera_count() > 1};
}

Metrics evaluate_state(const TrainState& state, const FeatureDataset& dataset, double fusion_weight) {
  const EvalSet set = embed_eval_split(state, dataset, fusion_weight);
  return evaluate(set.queries, set.gallery, default_protocol(dataset));
}

Metrics evaluate_raw(const FeatureDataset& dataset, double fusion_weight) {
  const EvalSet set = raw_eval_split(dataset, fusion_weight);
  return evaluate(set.queries, set.gallery, default_protocol(dataset));
}

std::vector<AblationRow> ablate(const TrainConfig& base, const FeatureDataset& dataset) {
  std::vector<AblationRow> rows;
  for (TrainMode m : kAllModes) {
    TrainConfig cfg = base;
    cfg.mode = m;
    const TrainResult r = train(cfg, dataset);
    rows.push_back({m, evaluate_state(r.state, dataset, cfg.fusion_weight)});
  }
  return rows;
}

std::string loss_trace_csv(std::span<const LossRecord> trace) {
  std::string out = "iter,l_video,l_text,l_total\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.iteration), r.video, r.text, r.total);
    out += buf;
  }
  return out;
}

std::string metrics_csv_row(std::string_view label, const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", std::string(label).c_str(), m.mAP,
                m.cmc_at(1), m.cmc_at(5), m.cmc_at(10));
  return buf;
}

std::string metrics_csv(std::span<const AblationRow> rows) {
  std::string out(kMetricsCsvHeader);
  for (const auto& r : rows) out += metrics_csv_row(mode_name(r.mode), r.metrics);
  return out;
}

std::string metrics_table(std::span<const AblationRow> rows) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-12s %-5s %-6s %7s %7s %7s %7s\n", "Method", "Text", "Image",
                "mAP", "Rank-1", "Rank-5", "Rank-10");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %-5s %-6s %7.1f %7.1f %7.1f %7.1f\n",
                  std::string(mode_name(r.mode)).c_str(), uses_text(r.mode) ? "yes" : "no",
                  uses_video(r.mode) ? "yes" : "no", 100.0 * r.metrics.mAP,
                  100.0 * r.metrics.cmc_at(1), 100.0 * r.metrics.cmc_at(5),
                  100.0 * r.metrics.cmc_at(10));
    out += buf;
  }
  return out;
}

}  // namespace vtreid
