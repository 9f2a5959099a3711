// Command-line front end: train, sr, eval, sweep, make-corpus, gradcheck.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lapsr/imaging/corpus.hpp"
#include "lapsr/imaging/png_io.hpp"
#include "lapsr/model/checkpoint.hpp"
#include "lapsr/pipeline/evaluate.hpp"
#include "lapsr/pipeline/gradcheck.hpp"
#include "lapsr/pipeline/sweep.hpp"
#include "lapsr/pipeline/train.hpp"

namespace fs = std::filesystem;
using namespace lapsr;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

// Bare `key = value` lines belong to the subcommand being run; INI sections
// still work for files shared between subcommands.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(std::string section) : section_(std::move(section)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    if (!section_.empty())
      for (auto& item : items)
        if (item.parents.empty() && item.name != "--" && item.name != "++") item.parents = {section_};
    return items;
  }

 private:
  std::string section_;
};

void write_config_echo(const CLI::App& sub, const fs::path& path) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  write_text(path, "# lapsr " + sub.get_name() + "\n" + sub.config_to_str(true, false));
}

struct TrainFlags {
  TrainConfig config;
  std::string manifest;
  std::string out = "run";
  std::string resume;
  std::string optimizer = "sgd";
  bool no_augment = false;
  std::uint32_t log_every = 0;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  auto& c = f.config;
  sub->add_option("--manifest", f.manifest, "Corpus directory or manifest.tsv")->required();
  sub->add_option("--out", f.out, "Output directory")->capture_default_str();
  sub->add_option("--scale", c.model.scale, "Upscaling factor S (2, 4 or 8)")->capture_default_str();
  sub->add_option("--depth", c.model.convs_per_level, "Convolutions per pyramid level")->capture_default_str();
  sub->add_option("--features", c.model.feature_channels, "Feature channels")->capture_default_str();
  sub->add_option("--leaky-slope", c.model.leaky_slope, "Leaky ReLU negative slope")->capture_default_str();
  sub->add_option("--epochs", c.epochs)->capture_default_str();
  sub->add_option("--iters-per-epoch", c.iters_per_epoch)->capture_default_str();
  sub->add_option("--batch", c.batch, "Patches per iteration")->capture_default_str();
  sub->add_option("--patch", c.patch, "HR patch size in pixels")->capture_default_str();
  sub->add_option("--lr", c.lr, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-halving-period", c.lr_halving_period, "Epochs between learning-rate halvings")
      ->capture_default_str();
  sub->add_option("--optimizer", f.optimizer, "sgd (momentum) or adam")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  sub->add_option("--momentum", c.momentum, "SGD momentum, or Adam beta1")->capture_default_str();
  sub->add_option("--beta2", c.beta2, "Adam second-moment decay")->capture_default_str();
  sub->add_option("--adam-epsilon", c.adam_epsilon)->capture_default_str();
  sub->add_option("--weight-decay", c.weight_decay)->capture_default_str();
  sub->add_option("--epsilon", c.loss.epsilon, "Charbonnier epsilon")->capture_default_str();
  sub->add_option("--lambda-gdl", c.loss.lambda_gdl, "Gradient difference loss weight")->capture_default_str();
  sub->add_option("--seed", c.seed)->capture_default_str();
  sub->add_option("--checkpoint-every", c.checkpoint_every, "Epochs between checkpoints (0: final only)")
      ->capture_default_str();
  sub->add_flag("--no-augment", f.no_augment, "Disable scale/rotation/flip augmentation");
  sub->add_option("--log-every", f.log_every, "Iterations between progress lines (0: once per epoch)")
      ->capture_default_str();
}

TrainConfig resolved(const TrainFlags& f) {
  TrainConfig c = f.config;
  if (f.no_augment) c.augment = AugmentSpec::identity();
  c.optimizer = parse_optimizer(f.optimizer);
  return c;
}

TrainHooks progress(const TrainFlags& f) {
  const std::uint32_t every = f.log_every ? f.log_every : f.config.iters_per_epoch;
  TrainHooks hooks;
  hooks.on_iteration = [every](const TrainLogRow& r) {
    if (r.iter % every == 0)
      std::printf("epoch %u iter %llu lr %s loss %.6g charbonnier %.6g gdl %.6g\n", r.epoch,
                  static_cast<unsigned long long>(r.iter), format_metric(r.lr).c_str(), r.loss, r.charbonnier, r.gdl);
  };
  hooks.on_checkpoint = [](const std::string& path) { std::printf("wrote %s\n", path.c_str()); };
  return hooks;
}

void warn(const std::string& msg) { std::fprintf(stderr, "warning: %s\n", msg.c_str()); }

int run_train(const CLI::App& sub, const TrainFlags& f) {
  const TrainConfig cfg = resolved(f);
  cfg.validate();
  write_config_echo(sub, fs::path(f.out) / "config.ini");
  std::optional<Resume<float>> resume;
  if (!f.resume.empty()) {
    const fs::path ckpt = f.resume;
    resume = Resume<float>{load_checkpoint<float>(ckpt), load_train_state<float>(fs::path(ckpt).replace_extension(".state"))};
    std::printf("resuming at iteration %llu\n", static_cast<unsigned long long>(resume->state.next_iteration));
  }
  auto result = train<float>(cfg, read_manifest(f.manifest), std::move(resume), fs::path(f.out), progress(f), warn);
  std::printf("final loss %.6g after %zu iterations\n", result.log.rows.empty() ? 0.0 : result.log.rows.back().loss,
              result.log.rows.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian pyramid super-resolution: training, inference and evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.fallthrough();  // lets --config follow the subcommand name

  // train
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus's train split");
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--resume", train_flags.resume, "Checkpoint (.lpsr) to continue; its .state file is read too");

  // sr
  std::string sr_ckpt, sr_in, sr_out;
  std::uint32_t sr_scale = 0;
  auto* sr_cmd = app.add_subcommand("sr", "Super-resolve one PNG");
  sr_cmd->add_option("--checkpoint", sr_ckpt)->required();
  sr_cmd->add_option("--input", sr_in)->required();
  sr_cmd->add_option("--output", sr_out)->required();
  sr_cmd->add_option("--scale", sr_scale, "Requested factor (default: the model's)");

  // eval
  std::string eval_method = "bicubic", eval_manifest, eval_out = "eval";
  std::uint32_t eval_scale = 4;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or bicubic on the test split");
  eval_cmd->add_option("--method", eval_method, "\"bicubic\" or a checkpoint path")->capture_default_str();
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--scale", eval_scale)->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Directory for eval.csv / eval.json")->capture_default_str();

  // sweep
  TrainFlags sweep_flags;
  sweep_flags.out = "sweep";
  std::vector<double> lambdas;
  std::vector<std::string> overrides;
  bool standard_grid = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate one model per GDL weight");
  add_train_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--lambdas", lambdas, "GDL weights")->delimiter(',');
  sweep_cmd->add_option("--lr-override", overrides, "lambda=lr pairs")->delimiter(',');
  sweep_cmd->add_flag("--standard-grid", standard_grid,
                      "Use lambdas 0,0.05,0.1,0.5,1 with lr/2 at 0.05 and lr/10 at 0.5 and 1");

  // make-corpus
  SyntheticCorpusSpec corpus;
  std::string corpus_out = "corpus";
  std::uint64_t corpus_seed = 1;
  auto* corpus_cmd = app.add_subcommand("make-corpus", "Write a synthetic text-image corpus");
  corpus_cmd->add_option("--out", corpus_out)->capture_default_str();
  corpus_cmd->add_option("--count", corpus.count)->capture_default_str();
  corpus_cmd->add_option("--train-count", corpus.train_count)->capture_default_str();
  corpus_cmd->add_option("--width", corpus.width)->capture_default_str();
  corpus_cmd->add_option("--height", corpus.height)->capture_default_str();
  corpus_cmd->add_option("--seed", corpus_seed)->capture_default_str();

  // gradcheck
  gradcheck::Options gc;
  std::string gc_out;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  gc_cmd->add_option("--instances", gc.instances)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--out", gc_out, "Directory for a config echo and gradcheck.csv");

  std::string section;
  for (int i = 1; i < argc && section.empty(); ++i)
    for (const auto* sub : app.get_subcommands({}))
      if (sub->get_name() == argv[i]) section = argv[i];
  app.config_formatter(std::make_shared<FlatConfig>(section));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*train_cmd) return run_train(*train_cmd, train_flags);

    if (*sr_cmd) {
      const auto params = load_checkpoint<float>(sr_ckpt);
      const std::uint32_t scale = sr_scale ? sr_scale : params.config.scale;
      write_config_echo(*sr_cmd, fs::path(sr_out).concat(".config.ini"));
      const Image out = superresolve(params, load_image(sr_in), scale);
      save_image(out, sr_out);
      std::printf("wrote %s (%zux%zu)\n", sr_out.c_str(), out.width, out.height);
      return 0;
    }

    if (*eval_cmd) {
      check_eval_scale(eval_scale);
      const SrMethod method =
          eval_method == "bicubic" ? bicubic_method() : model_method(load_checkpoint<float>(eval_method), eval_method);
      const fs::path out = eval_out;
      write_config_echo(*eval_cmd, out / "config.ini");
      const auto report = evaluate(method, read_manifest(eval_manifest), eval_scale);
      write_report(report, out / "eval.csv", out / "eval.json");
      for (const auto& row : report.rows)
        if (!row.ok()) warn(row.path + ": " + row.error);
      std::printf("%s x%u: psnr %.4f ssim %.4f ifc %.4f over %zu images (%zu failed)\n", method.name.c_str(), eval_scale,
                  report.mean_psnr, report.mean_ssim, report.mean_ifc, report.rows.size(), report.failures);
      return 0;
    }

    if (*sweep_cmd) {
      const TrainConfig base = resolved(sweep_flags);
      SweepSpec spec = standard_grid ? standard_lambda_grid(base.lr) : SweepSpec{};
      if (!lambdas.empty()) spec.lambdas = lambdas;
      if (spec.lambdas.empty()) throw ConfigError("sweep needs --lambdas or --standard-grid");
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--lr-override expects lambda=lr, got '" + o + "'");
        try {
          spec.lr_overrides[std::stod(o.substr(0, eq))] = std::stod(o.substr(eq + 1));
        } catch (const std::logic_error&) {
          throw ConfigError("--lr-override expects numbers, got '" + o + "'");
        }
      }
      const fs::path out = sweep_flags.out;
      write_config_echo(*sweep_cmd, out / "config.ini");
      const auto rows = sweep_lambda<float>(base, spec, read_manifest(sweep_flags.manifest), out, progress(sweep_flags));
      write_text(out / "sweep.csv", sweep_csv(rows));
      std::fputs(sweep_csv(rows).c_str(), stdout);
      return 0;
    }

    if (*corpus_cmd) {
      write_config_echo(*corpus_cmd, fs::path(corpus_out) / "config.ini");
      const auto m = generate_synthetic_corpus(corpus, corpus_out, corpus_seed);
      std::printf("wrote %zu images to %s\n", m.entries.size(), corpus_out.c_str());
      return 0;
    }

    if (*gc_cmd) {
      if (!gc_out.empty()) write_config_echo(*gc_cmd, fs::path(gc_out) / "config.ini");
      const auto results = gradcheck::run_cases(gradcheck::standard_cases(), gc);
      std::string csv = "case,instances,max_error,tolerance,passed\n";
      bool ok = true;
      for (const auto& r : results) {
        std::printf("%-40s %3zu  max rel err %.3e  (tol %.0e)  %s\n", r.name.c_str(), r.instances, r.max_error, r.tolerance,
                    r.passed() ? "ok" : "FAIL");
        csv += r.name + ',' + std::to_string(r.instances) + ',' + format_metric(r.max_error) + ',' +
               format_metric(r.tolerance) + ',' + (r.passed() ? "1" : "0") + '\n';
        ok = ok && r.passed();
      }
      if (!gc_out.empty()) write_text(fs::path(gc_out) / "gradcheck.csv", csv);
      return ok ? 0 : kRuntimeError;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
