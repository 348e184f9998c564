// vtreid: synthesize data, train, run the loss ablation, evaluate, and rank.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vtreid/checkpoint.hpp"
#include "vtreid/dataset.hpp"
#include "vtreid/error.hpp"
#include "vtreid/io.hpp"
#include "vtreid/trainer.hpp"

using namespace vtreid;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct TrainFlags {
  TrainConfig cfg;
  std::string mode = "total";
};

// Flags shared by train and ablate.
void add_train_flags(CLI::App* app, TrainFlags& f) {
  TrainConfig& c = f.cfg;
  app->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  app->add_option("--iterations", c.iterations, "Training iterations")->capture_default_str();
  app->add_option("--batch", c.batch_size, "Samples per batch")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--tau", c.tau, "InfoNCE temperature")->capture_default_str();
  app->add_option("--eta", c.eta, "Weight of the instance-contrastive text term")->capture_default_str();
  app->add_option("--momentum", c.momentum, "Key encoder momentum")->capture_default_str();
  app->add_option("--queue", c.queue_capacity, "Negative key queue capacity")->capture_default_str();
  app->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--wd-visual", c.weight_decay_visual, "Visual encoder weight decay")->capture_default_str();
  app->add_option("--wd-text", c.weight_decay_text, "Text encoder and center weight decay")->capture_default_str();
  app->add_option("--clusters", c.clusters, "Cluster count (0: number of training identities)")
      ->capture_default_str();
  app->add_option("--fusion-weight", c.fusion_weight, "Visual weight when fusing embeddings")->capture_default_str();
  app->add_option("--hidden-dim", c.hidden_dim, "Encoder hidden width")->capture_default_str();
  app->add_option("--embed-dim", c.embed_dim, "Embedding width")->capture_default_str();
  app->add_option("--warmup", c.text_warmup_iterations, "Text-only iterations before video joins (total mode)")
      ->capture_default_str();
}

void add_config(CLI::App* app, std::string& path) {
  app->add_option("--config", path, "TOML/INI file of flag values; command-line flags win");
}

// CLI11 only reads config files for the top-level app, so subcommands fill in
// options the command line left unset. Keys may sit at top level or under a
// section named after the subcommand.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  for (const CLI::ConfigItem& item : CLI::ConfigTOML().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    const bool scoped = item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == sub->get_name());
    CLI::Option* opt = scoped ? sub->get_option_no_throw("--" + item.name) : nullptr;
    if (opt == nullptr || item.name == "config") throw CLI::ConfigError::Extras(item.fullname());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

FeatureDataset load(const std::string& path) { return load_dataset(path); }

// Embeddings for the evaluation split from raw features or a checkpoint.
EvalSet eval_set(const FeatureDataset& ds, const std::string& checkpoint, double w) {
  if (checkpoint == "none") return raw_eval_split(ds, w);
  return embed_eval_split(load_checkpoint(checkpoint), ds, w);
}

std::string metrics_line(const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "mAP %.3f  Rank-1 %.3f  Rank-5 %.3f  Rank-10 %.3f", m.mAP, m.cmc_at(1),
                m.cmc_at(5), m.cmc_at(10));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video/text re-identification trainer on feature vectors"};
  app.require_subcommand(1);
  std::map<std::string, std::string> config_paths;

  // synth
  SynthSpec spec;
  std::string synth_out, synth_format = "jsonl";
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  synth->add_option("--identities", spec.identities, "Identity count")->capture_default_str();
  synth->add_option("--samples", spec.samples_per_identity, "Samples per identity")->capture_default_str();
  synth->add_option("--visual-dim", spec.visual_dim, "Visual feature width")->capture_default_str();
  synth->add_option("--text-dim", spec.text_dim, "Text feature width")->capture_default_str();
  synth->add_option("--spread", spec.cluster_spread, "Prototype scale")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Per-sample noise scale")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--format", synth_format, "Output format")
      ->check(CLI::IsMember({"jsonl", "binary"}))
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  add_config(synth, config_paths[synth->get_name()]);

  // train
  TrainFlags tf;
  std::string train_data, train_out, train_trace, train_resume;
  auto* train_cmd = app.add_subcommand("train", "Train one mode and write a checkpoint");
  train_cmd->add_option("--data", train_data, "Dataset (JSONL or binary)")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--trace", train_trace, "Loss trace CSV path");
  train_cmd->add_option("--resume", train_resume, "Continue from this checkpoint");
  train_cmd->add_option("--mode", tf.mode, "Losses to optimize")
      ->check(CLI::IsMember({"baseline", "text_only", "video_only", "total"}))
      ->capture_default_str();
  add_train_flags(train_cmd, tf);
  add_config(train_cmd, config_paths[train_cmd->get_name()]);

  // ablate
  TrainFlags af;
  std::string ablate_data, ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate all four loss settings");
  ablate_cmd->add_option("--data", ablate_data, "Dataset (JSONL or binary)")->required();
  ablate_cmd->add_option("--out", ablate_out, "Metrics CSV path");
  add_train_flags(ablate_cmd, af);
  add_config(ablate_cmd, config_paths[ablate_cmd->get_name()]);

  // eval
  std::string eval_data, eval_ckpt, eval_out;
  double eval_w = 0.5;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or raw features");
  eval_cmd->add_option("--data", eval_data, "Dataset (JSONL or binary)")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path, or 'none' for raw features")->required();
  eval_cmd->add_option("--fusion-weight", eval_w, "Visual weight when fusing embeddings")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Metrics CSV path");
  add_config(eval_cmd, config_paths[eval_cmd->get_name()]);

  // rank
  std::string rank_data, rank_ckpt, rank_out;
  double rank_w = 0.5;
  std::size_t rank_top = 10;
  auto* rank_cmd = app.add_subcommand("rank", "Print ranked gallery lists per query");
  rank_cmd->add_option("--data", rank_data, "Dataset (JSONL or binary)")->required();
  rank_cmd->add_option("--checkpoint", rank_ckpt, "Checkpoint path, or 'none' for raw features")->required();
  rank_cmd->add_option("--fusion-weight", rank_w, "Visual weight when fusing embeddings")->capture_default_str();
  rank_cmd->add_option("--top", rank_top, "Entries per query")->capture_default_str()->check(CLI::PositiveNumber);
  rank_cmd->add_option("--out", rank_out, "Write rankings here instead of stdout");
  add_config(rank_cmd, config_paths[rank_cmd->get_name()]);

  try {
    app.parse(argc, argv);
    for (auto* sub : app.get_subcommands()) apply_config(sub, config_paths.at(sub->get_name()));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) {
      const FeatureDataset ds = synth_generate(spec);
      if (synth_format == "binary") {
        save_dataset_binary(ds, synth_out);
      } else {
        save_dataset_jsonl(ds, synth_out);
      }
      std::printf("wrote %zu records (%zu identities) to %s\n", ds.records().size(), ds.identity_count(),
                  synth_out.c_str());
    } else if (*train_cmd) {
      tf.cfg.mode = parse_mode(tf.mode);
      tf.cfg.validate();
      const FeatureDataset ds = load(train_data);
      const TrainResult r = train_resume.empty() ? train(tf.cfg, ds)
                                                 : train(tf.cfg, ds, load_checkpoint(train_resume));
      save_checkpoint(r.state, train_out);
      if (!train_trace.empty()) write_file_atomic(train_trace, loss_trace_csv(r.trace));
      if (!r.trace.empty()) {
        const LossRecord& last = r.trace.back();
        std::printf("iteration %llu  l_video %.6f  l_text %.6f  l_total %.6f\n",
                    static_cast<unsigned long long>(last.iteration), last.video, last.text, last.total);
      }
      std::printf("%s\n", metrics_line(evaluate_state(r.state, ds, tf.cfg.fusion_weight)).c_str());
    } else if (*ablate_cmd) {
      af.cfg.validate();
      const FeatureDataset ds = load(ablate_data);
      const auto rows = ablate(af.cfg, ds);
      if (!ablate_out.empty()) write_file_atomic(ablate_out, metrics_csv(rows));
      std::cout << metrics_table(rows);
    } else if (*eval_cmd) {
      const FeatureDataset ds = load(eval_data);
      const EvalSet set = eval_set(ds, eval_ckpt, eval_w);
      const Metrics m = evaluate(set.queries, set.gallery, default_protocol(ds));
      const std::string label = eval_ckpt == "none" ? "raw" : "checkpoint";
      if (!eval_out.empty()) {
        write_file_atomic(eval_out, std::string(kMetricsCsvHeader) + metrics_csv_row(label, m));
      }
      std::printf("%s\n", metrics_line(m).c_str());
    } else if (*rank_cmd) {
      const FeatureDataset ds = load(rank_data);
      const EvalSet set = eval_set(ds, rank_ckpt, rank_w);
      const RankProtocol protocol = default_protocol(ds);
      std::string text;
      for (const auto& q : set.queries) text += format_ranking(rank(q, set.gallery, protocol), rank_top) + "\n";
      if (rank_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(rank_out, text);
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return 0;
}
