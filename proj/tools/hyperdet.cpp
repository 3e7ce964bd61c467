#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hyperdet/commands.hpp"

using namespace hyperdet;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::string> model, variant;
  std::optional<double> delta, group_coeff, recovery_prob, lr_pretrain, lr_finetune, lambda, incomplete;
  std::optional<std::size_t> count, epochs, pretrain_epochs, patience, threads, batch_size;
  std::optional<std::uint64_t> seed;

  void add_propagation(CLI::App* app) {
    app->add_option("--model", model, "Diffusion model: IC, SI, SIS or SIR");
    app->add_option("--delta", delta, "Spreader fraction at capture");
    app->add_option("--count", count, "Number of cascades");
    app->add_option("--group-coeff", group_coeff, "Group pressure coefficient");
    app->add_option("--recovery-prob", recovery_prob, "Recovery probability (SIS/SIR)");
  }
  void add_training(CLI::App* app) {
    app->add_option("--lr-pretrain", lr_pretrain, "Autoencoder pretraining learning rate");
    app->add_option("--lr-finetune", lr_finetune, "Fine-tuning learning rate");
    app->add_option("--lambda", lambda, "L2 coefficient");
    app->add_option("--epochs", epochs, "Fine-tuning epochs");
    app->add_option("--pretrain-epochs", pretrain_epochs, "Pretraining epochs");
    app->add_option("--patience", patience, "Early-stopping patience (epochs)");
    app->add_option("--batch-size", batch_size, "Snapshots per optimizer step (0 = all)");
  }
  void add_common(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("-o,--out", out, "Write into this directory instead of a fresh timestamped one");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--variant", variant, "Model variant: full, woH, woD, woE, wAL, wAS, woA");
    app->add_option("--incomplete-rate", incomplete, "Fraction of nodes with masked features");
    app->add_option("--threads", threads, "Worker threads (default HYPERDET_THREADS or all cores)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (seed) c.master_seed = *seed;
    if (model) c.propagation.model = parse_diffusion_model(*model);
    if (variant) c.variant = parse_variant(*variant);
    if (delta) c.propagation.delta = *delta;
    if (group_coeff) c.propagation.group_coeff = *group_coeff;
    if (recovery_prob) c.propagation.recovery_prob = *recovery_prob;
    if (count) c.count = *count;
    if (lr_pretrain) c.train.lr_pretrain = *lr_pretrain;
    if (lr_finetune) c.train.lr_finetune = *lr_finetune;
    if (lambda) c.train.lambda = *lambda;
    if (epochs) c.train.finetune_epochs = *epochs;
    if (pretrain_epochs) c.train.pretrain_epochs = *pretrain_epochs;
    if (patience) c.train.patience = *patience;
    if (batch_size) c.train.batch_size = *batch_size;
    if (incomplete) c.incomplete_rate = *incomplete;
    if (threads) c.threads = *threads;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source detection on hypergraphs: cascade generation, training, evaluation and sweeps"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, eval_o, sweep_o;
  std::string train_data, eval_data, checkpoint, sweep_kind, report_dir;

  auto* gen = app.add_subcommand("gen", "Simulate cascades and write train/test datasets");
  gen_o.add_common(gen);
  gen_o.add_propagation(gen);

  auto* train = app.add_subcommand("train", "Pretrain and fine-tune on a generated dataset");
  train_o.add_common(train);
  train_o.add_training(train);
  train->add_option("-d,--data", train_data, "Dataset directory from 'gen'")->required()->check(CLI::ExistingDirectory);

  auto* eval = app.add_subcommand("eval", "Score the test split with a checkpoint and the baseline");
  eval_o.add_common(eval);
  eval->add_option("-d,--data", eval_data, "Dataset directory from 'gen'")->required()->check(CLI::ExistingDirectory);
  eval->add_option("-k,--checkpoint", checkpoint, "Checkpoint from 'train'")->required();

  auto* sweep = app.add_subcommand("sweep", "Run an early / incomplete / ablation / models sweep");
  sweep_o.add_common(sweep);
  sweep_o.add_propagation(sweep);
  sweep_o.add_training(sweep);
  sweep->add_option("--kind", sweep_kind, "early, incomplete, ablation or models")->required();

  auto* report = app.add_subcommand("report", "Print aggregate metrics of the reports in a directory");
  report->add_option("dir", report_dir, "Directory holding report JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = gen_o.resolve();
      const auto dir = output_dir(cfg.output, "gen", gen_o.out);
      const auto r = cmd_gen(cfg, dir);
      std::cout << dir << ": " << r.train << " train / " << r.test << " test snapshots, " << r.redraws
                << " re-drawn cascades, " << r.died_out_kept << " died out\n";
    } else if (train->parsed()) {
      const auto cfg = train_o.resolve();
      const auto dir = output_dir(cfg.output, "train", train_o.out);
      cmd_train(cfg, train_data, dir, std::cout);
      std::cout << dir << '\n';
    } else if (eval->parsed()) {
      const auto cfg = eval_o.resolve();
      const auto dir = output_dir(cfg.output, "eval", eval_o.out);
      const auto r = cmd_eval(cfg, eval_data, checkpoint, dir);
      std::cout << dir << ": HyperDet F1 " << r.hyperdet.mean("f1") << ", LPSI F1 " << r.lpsi.mean("f1") << '\n';
    } else if (sweep->parsed()) {
      const auto cfg = sweep_o.resolve();
      const auto kind = parse_sweep_kind(sweep_kind);
      const auto dir = output_dir(cfg.output, "sweep-" + sweep_kind, sweep_o.out);
      const auto r = cmd_sweep(cfg, kind, dir);
      for (std::size_t a = 0; a < r.keys.size(); ++a)
        std::cout << r.keys[a] << ": HyperDet F1 " << r.hyperdet[a].mean("f1") << ", LPSI F1 "
                  << r.lpsi[a].mean("f1") << '\n';
      std::cout << dir << '\n';
    } else if (report->parsed()) {
      cmd_report(report_dir, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
