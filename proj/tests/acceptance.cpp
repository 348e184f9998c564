// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vtreid/checkpoint.hpp"
#include "vtreid/retrieval_eval.hpp"
#include "vtreid/text_cluster_contrast.hpp"
#include "vtreid/trainer.hpp"
#include "vtreid/visual_contrast.hpp"

using namespace vtreid;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Mat64 random_mat(std::mt19937_64& gen, std::size_t r, std::size_t c, double scale = 1.0) {
  return Mat64(r, c, oracle::random_vec(gen, r * c, scale));
}

Mat64 random_simplex_rows(std::mt19937_64& gen, std::size_t n, std::size_t k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Mat64 m(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += (m(r, c) = u(gen));
    for (std::size_t c = 0; c < k; ++c) m(r, c) /= s;
  }
  return m;
}

Vec64 concat(const std::vector<Vec64>& rows) {
  Vec64 out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<Vec64> split(std::span<const double> flat, std::size_t d) {
  std::vector<Vec64> out;
  for (std::size_t i = 0; i < flat.size(); i += d) out.emplace_back(flat.begin() + i, flat.begin() + i + d);
  return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradients() {
  constexpr double kEps = 1e-5;
  constexpr int kTrials = 100;
  const auto start = Clock::now();
  std::mt19937_64 gen(1001);
  double worst[4] = {0, 0, 0, 0};

  for (int t = 0; t < kTrials; ++t) {
    const Vec64 q = oracle::random_unit(gen, 8);
    const Vec64 kp = oracle::random_unit(gen, 8);
    std::vector<Vec64> neg;
    for (int i = 0; i < 16; ++i) neg.push_back(oracle::random_unit(gen, 8));
    const VisualLossConfig cfg{0.07};
    const Vec64 g = info_nce(q, kp, neg, cfg).grad;
    auto f = [&](std::span<const double> x) {
      return oracle::info_nce(Vec64(x.begin(), x.end()), kp, neg, cfg.tau);
    };
    worst[0] = std::max(worst[0], relative_error(g, finite_diff_grad(f, q, kEps)));
  }

  for (int t = 0; t < kTrials; ++t) {
    const ClusterState s{random_mat(gen, 4, 6, 0.5), 1.0};
    const Mat64 z = random_mat(gen, 10, 6, 0.5);
    const Mat64 p = random_simplex_rows(gen, 10, 4);
    const ClusteringLossResult r = clustering_loss(p, z, s);
    auto fz = [&](std::span<const double> x) {
      return clustering_loss(p, Mat64(10, 6, Vec64(x.begin(), x.end())), s).loss;
    };
    auto fc = [&](std::span<const double> x) {
      return clustering_loss(p, z, {Mat64(4, 6, Vec64(x.begin(), x.end())), 1.0}).loss;
    };
    const Vec64 analytic = concat({r.grad_embeddings.values(), r.grad_centers.values()});
    const Vec64 numeric =
        concat({finite_diff_grad(fz, z.values(), kEps), finite_diff_grad(fc, s.centers.values(), kEps)});
    worst[1] = std::max(worst[1], relative_error(analytic, numeric));
  }

  for (int t = 0; t < kTrials; ++t) {
    std::vector<Vec64> views;
    for (int i = 0; i < 12; ++i) views.push_back(oracle::random_unit(gen, 6));
    const InstanceLossResult r = instance_cl_loss(views, 0.5);
    // The probe may leave the unit sphere, so it uses the direct formula.
    auto f = [&](std::span<const double> x) { return oracle::instance_cl(split(x, 6), 0.5); };
    worst[2] = std::max(worst[2], relative_error(concat(r.grads), finite_diff_grad(f, concat(views), kEps)));
  }

  for (int t = 0; t < kTrials; ++t) {
    const std::size_t dims[] = {7, 10, 5};
    const EncoderParams enc = init_params(dims, gen());
    const ClusterState s{random_mat(gen, 3, 5, 0.4), 1.0};
    std::vector<Vec64> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(oracle::random_vec(gen, 7));
    const TextLossConfig cfg{10.0, 0.5, 8};
    const Augmentation aug = FeatureNoise{};
    const std::uint64_t seed = gen();
    Rng rng(seed);
    const TextLossResult r = text_loss(batch, enc, s, cfg, aug, rng);
    auto fe = [&](std::span<const double> x) {
      EncoderParams probe = enc;
      probe.assign(x);
      Rng same(seed);
      return text_loss_against(batch, probe, s, r.target, cfg, aug, same).loss;
    };
    auto fc = [&](std::span<const double> x) {
      Rng same(seed);
      return text_loss_against(batch, enc, {Mat64(3, 5, Vec64(x.begin(), x.end())), 1.0}, r.target, cfg,
                               aug, same)
          .loss;
    };
    const Vec64 analytic = concat({r.encoder_grads.flatten(), r.center_grads.values()});
    const Vec64 numeric = concat({finite_diff_grad(fe, enc.flatten(), kEps),
                                  finite_diff_grad(fc, s.centers.values(), kEps)});
    worst[3] = std::max(worst[3], relative_error(analytic, numeric));
  }

  const double elapsed = seconds_since(start);
  const bool ok = *std::max_element(worst, worst + 4) <= 1e-4 && elapsed < 30.0;
  return {ok, fmt("max rel err info_nce %.1e clustering %.1e instance %.1e text %.1e; %.2fs", worst[0],
                  worst[1], worst[2], worst[3], elapsed)};
}

// --- 2 ---------------------------------------------------------------------

Outcome closed_forms() {
  std::mt19937_64 gen(1002);
  double worst_nce = 0.0, worst_inst = 0.0, worst_kl = 0.0;
  for (std::size_t k = 1; k <= 64; ++k) {
    const Vec64 q = oracle::random_unit(gen, 5);
    const std::vector<Vec64> neg(k, q);
    worst_nce = std::max(worst_nce, std::abs(info_nce(q, q, neg, {0.07}).loss - std::log(k + 1.0)));
  }
  for (std::size_t m = 2; m <= 16; ++m) {
    const std::vector<Vec64> views(2 * m, oracle::random_unit(gen, 5));
    worst_inst = std::max(worst_inst, std::abs(instance_cl_loss(views, 0.5).loss - std::log(2.0 * m - 1.0)));
  }
  for (int t = 0; t < 100; ++t) {
    const Mat64 p = random_simplex_rows(gen, 8, 5);
    worst_kl = std::max(worst_kl, std::abs(kl_divergence_loss(p, p)));
  }
  const bool ok = worst_nce <= 1e-9 && worst_inst <= 1e-9 && worst_kl <= 1e-12;
  return {ok, fmt("info_nce dev %.1e, instance dev %.1e, KL(P||P) %.1e", worst_nce, worst_inst, worst_kl)};
}

// --- 3 ---------------------------------------------------------------------

Outcome queue_semantics() {
  std::mt19937_64 gen(1003);
  std::size_t checks = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    const std::size_t cap = std::uniform_int_distribution<std::size_t>(1, 24)(gen);
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(1, 6)(gen);
    KeyQueue q(cap, dim);
    std::vector<Vec64> model;
    const int pushes = std::uniform_int_distribution<int>(1, 12)(gen);
    for (int p = 0; p < pushes; ++p) {
      std::vector<Vec64> batch(std::uniform_int_distribution<std::size_t>(1, 2 * cap)(gen));
      for (auto& k : batch) k = oracle::random_unit(gen, dim);
      q = enqueue_dequeue(q, batch);
      model.insert(model.end(), batch.begin(), batch.end());
      if (model.size() > cap) model.erase(model.begin(), model.end() - static_cast<std::ptrdiff_t>(cap));

      const auto& e = q.entries();
      if (q.size() > cap) return {false, fmt("sequence %d: size %zu > capacity %zu", seq, q.size(), cap)};
      if (!std::equal(e.begin(), e.end(), model.begin(), model.end())) {
        return {false, fmt("sequence %d: FIFO order differs from reference", seq)};
      }
      const std::size_t tail = std::min(batch.size(), cap);
      if (!std::equal(e.end() - static_cast<std::ptrdiff_t>(tail), e.end(),
                      batch.end() - static_cast<std::ptrdiff_t>(tail))) {
        return {false, fmt("sequence %d: newest entries differ from last batch", seq)};
      }
      ++checks;
    }
  }
  return {true, fmt("1000 sequences, %zu enqueues checked", checks)};
}

// --- 4 ---------------------------------------------------------------------

Outcome momentum() {
  std::mt19937_64 gen(1004);
  const std::size_t dims[] = {6, 9, 4};

  EncoderPair frozen = make_pair(init_params(dims, 1), 1.0);
  const EncoderParams key0 = frozen.key;
  for (int step = 0; step < 100; ++step) {
    Vec64 w = frozen.query.flatten();
    for (double& x : w) x += oracle::random_vec(gen, 1, 0.1)[0];
    frozen.query.assign(w);
    frozen = momentum_update(frozen);
  }
  const bool m1 = frozen.key == key0;

  EncoderPair zero{init_params(dims, 2), init_params(dims, 3), 0.0};
  const bool m0 = momentum_update(zero).key == zero.query;

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double m = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    EncoderPair pair{init_params(dims, gen()), init_params(dims, gen()), m};
    auto gap = [](const EncoderParams& a, const EncoderParams& b) {
      Vec64 d = a.flatten();
      const Vec64 bf = b.flatten();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= bf[i];
      return norm(d);
    };
    const double before = gap(pair.key, pair.query);
    const double after = gap(momentum_update(pair).key, pair.query);
    worst = std::max(worst, std::abs(after - m * before));
  }
  return {m1 && m0 && worst <= 1e-12,
          fmt("m=1 key unchanged: %s; m=0 key==query: %s; contraction dev %.1e", m1 ? "yes" : "no",
              m0 ? "yes" : "no", worst)};
}

// --- 5 ---------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 gen(1005);
  std::vector<std::size_t> ranks(100);
  std::iota(ranks.begin(), ranks.end(), 1);
  int compared = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::uniform_int_distribution<int> ids(1, 8), cams(1, 3);
    const int ng = std::uniform_int_distribution<int>(2, 100)(gen);
    const int nq = std::uniform_int_distribution<int>(1, 20)(gen);
    auto emb = [&] {
      Vec64 v = oracle::random_vec(gen, 3);
      for (double& x : v) x = std::round(x * 2.0) / 2.0;  // coarse grid makes ties common
      if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) v[2] = 1.0;
      return l2_normalize(v);
    };
    std::vector<GalleryItem> gallery, queries;
    for (int i = 0; i < ng; ++i) gallery.push_back({fmt("g%03d", i), ids(gen), cams(gen), emb()});
    for (int i = 0; i < nq; ++i) {
      const auto& anchor = gallery[std::uniform_int_distribution<int>(0, ng - 1)(gen)];
      queries.push_back({fmt("q%03d", i), anchor.identity, anchor.camera % 3 + 1, emb()});
    }
    std::vector<oracle::BruteItem> bq, bg;
    for (const auto& g : queries) bq.push_back({g.id, g.identity, g.camera, g.embedding});
    for (const auto& g : gallery) bg.push_back({g.id, g.identity, g.camera, g.embedding});

    for (bool filter : {true, false}) {
      const Metrics m = evaluate(queries, gallery, {filter}, ranks);
      const auto ref = oracle::brute_evaluate(bq, bg, filter, ranks);
      if (m.mAP != ref.mAP) return {false, fmt("instance %d: mAP %.17g vs %.17g", inst, m.mAP, ref.mAP)};
      for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (m.cmc[i] != ref.cmc.at(ranks[i])) return {false, fmt("instance %d: CMC@%zu differs", inst, ranks[i])};
        if (i > 0 && m.cmc[i] < m.cmc[i - 1]) return {false, fmt("instance %d: CMC not monotone", inst)};
      }
      ++compared;
    }
  }
  return {true, fmt("%d evaluations identical to brute force, CMC monotone", compared)};
}

// --- 6 ---------------------------------------------------------------------

Outcome ablation_trend() {
  int holds = 0;
  double slowest = 0.0;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.noise = 1.0;
    spec.seed = seed;
    const FeatureDataset ds = synth_generate(spec);
    TrainConfig cfg;
    cfg.seed = seed;
    const auto start = Clock::now();
    const auto table = ablate(cfg, ds);
    slowest = std::max(slowest, seconds_since(start));
    const double b = table[0].metrics.mAP, t = table[1].metrics.mAP, v = table[2].metrics.mAP,
                 a = table[3].metrics.mAP;
    const bool ok = a >= v && v >= b && a >= t && t >= b;
    holds += ok;
    rows += fmt(" seed %llu %.3f/%.3f/%.3f/%.3f%s;", static_cast<unsigned long long>(seed), b, t, v, a,
                ok ? "" : " (order broken)");
  }
  return {holds >= 4 && slowest < 120.0,
          fmt("ordering held in %d/5 seeds, slowest ablation %.1fs; mAP base/text/video/total:", holds,
              slowest) +
              rows};
}

// --- 7 ---------------------------------------------------------------------

Outcome determinism() {
  SynthSpec spec;
  spec.noise = 1.0;
  spec.seed = 11;
  const FeatureDataset ds = synth_generate(spec);
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.iterations = 40;

  const TrainResult a = train(cfg, ds);
  const TrainResult b = train(cfg, ds);
  const bool trace_same = loss_trace_csv(a.trace) == loss_trace_csv(b.trace);
  const bool ckpt_same = encode_checkpoint(a.state) == encode_checkpoint(b.state);
  const std::vector<AblationRow> ra = {{cfg.mode, evaluate_state(a.state, ds, cfg.fusion_weight)}};
  const std::vector<AblationRow> rb = {{cfg.mode, evaluate_state(b.state, ds, cfg.fusion_weight)}};
  const bool csv_same = metrics_csv(ra) == metrics_csv(rb);

  TrainConfig half = cfg;
  half.iterations = 17;
  const TrainResult first = train(half, ds);
  const TrainState restored = decode_checkpoint(encode_checkpoint(first.state));
  const TrainResult rest = train(cfg, ds, restored);
  std::vector<LossRecord> joined = first.trace;
  joined.insert(joined.end(), rest.trace.begin(), rest.trace.end());
  const bool resume_same = loss_trace_csv(joined) == loss_trace_csv(a.trace) &&
                           encode_checkpoint(rest.state) == encode_checkpoint(a.state);

  return {trace_same && ckpt_same && csv_same && resume_same,
          fmt("trace %s, checkpoint %s, metrics csv %s, resume at 17/40 %s", trace_same ? "identical" : "differs",
              ckpt_same ? "identical" : "differs", csv_same ? "identical" : "differs",
              resume_same ? "identical" : "differs")};
}

// --- 8 ---------------------------------------------------------------------

Outcome fusion_endpoints() {
  std::mt19937_64 gen(1008);
  for (int g = 0; g < 50; ++g) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 80)(gen);
    std::vector<Vec64> vis, txt;
    for (std::size_t i = 0; i <= n; ++i) {
      vis.push_back(oracle::random_unit(gen, 6));
      txt.push_back(oracle::random_unit(gen, 4));
    }
    for (double w : {1.0, 0.0}) {
      const auto& single = w == 1.0 ? vis : txt;
      std::vector<GalleryItem> plain, fused;
      for (std::size_t i = 1; i <= n; ++i) {
        const int camera = static_cast<int>(i % 2) + 1;
        plain.push_back({fmt("g%03zu", i), 1, camera, single[i]});
        fused.push_back({fmt("g%03zu", i), 1, camera, fuse(vis[i], txt[i], w)});
      }
      const RankingResult a = rank({"q", 1, 0, single[0]}, plain, {});
      const RankingResult b = rank({"q", 1, 0, fuse(vis[0], txt[0], w)}, fused, {});
      if (a.entries.size() != b.entries.size() ||
          !std::equal(a.entries.begin(), a.entries.end(), b.entries.begin(),
                      [](const RankedEntry& x, const RankedEntry& y) { return x.id == y.id; })) {
        return {false, fmt("gallery %d, w=%.0f: ranking differs", g, w)};
      }
    }
  }
  return {true, "50 galleries, w=1 and w=0 rankings identical to single modality"};
}

}  // namespace

int main() {
  report(1, "gradient correctness", gradients);
  report(2, "closed-form loss values", closed_forms);
  report(3, "queue semantics", queue_semantics);
  report(4, "momentum endpoints", momentum);
  report(5, "metric oracle equivalence", metric_oracle);
  report(6, "ablation trend", ablation_trend);
  report(7, "determinism", determinism);
  report(8, "fusion endpoints", fusion_endpoints);
  std::printf("%d/8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
