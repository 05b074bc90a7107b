// evflow command line: gen / train / eval / viz.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 numerical abort. EVFLOW_SEED overrides the configured seed.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "evflow/config.hpp"
#include "evflow/dataset.hpp"
#include "evflow/errors.hpp"
#include "evflow/train.hpp"
#include "evflow/viz.hpp"

namespace fs = std::filesystem;
using namespace evflow;

namespace {

TrainConfig load_config(const std::string& path) {
  TrainConfig cfg = path.empty() ? TrainConfig::toy() : train_config_from(KeyValues::load(path));
  if (const char* env = std::getenv("EVFLOW_SEED")) {
    KeyValues kv;
    kv.set("EVFLOW_SEED", env);
    cfg.seed = kv.get_u64("EVFLOW_SEED", cfg.seed);
    cfg.model.seed = cfg.seed;
  }
  cfg.validate();
  return cfg;
}

std::string indexed(const std::string& stem, std::size_t k, const std::string& ext) {
  std::ostringstream os;
  os << stem << std::setw(4) << std::setfill('0') << k << ext;
  return os.str();
}

void print_summary(const MetricReport& report) {
  const MetricRow s = report.summary();
  std::cout << std::fixed << std::setprecision(4);
  if (s.aee) std::cout << "AEE " << *s.aee << "  outlier% " << *s.outlier_pct << "  ";
  std::cout << "FWL " << s.fwl << "  RSAT " << s.rsat << "  (" << report.rows.size() << " volumes)\n";
  std::cout.unsetf(std::ios::floatfield);
}

std::vector<Sequence> dataset_or_held_out(const std::string& data, const TrainConfig& cfg) {
  return data.empty() ? held_out_set(cfg) : load_dataset(data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent unsupervised optical flow from event streams"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, ckpt_path, flow_path;
  int count = 0, multiplier = 1;
  bool text = false, held_out = false, both_ends = false, eval_after = false;

  auto* gen = app.add_subcommand("gen", "Write synthetic sequences with ground truth");
  gen->add_option("-c,--config", config_path, "Configuration file");
  gen->add_option("-o,--out", out_path, "Output directory")->required();
  gen->add_option("-n,--sequences", count, "Number of sequences (default: data.eval_sequences)");
  gen->add_flag("--held-out", held_out, "Draw from the held-out split instead of the training split");
  gen->add_flag("--text", text, "Write events as text instead of binary");

  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoint.bin, loss.csv and config.txt");
  tr->add_option("-c,--config", config_path, "Configuration file");
  tr->add_option("-o,--out", out_path, "Output directory")->required();
  tr->add_flag("--eval", eval_after, "Evaluate on the held-out set before and after training");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; writes a metric CSV");
  ev->add_option("-k,--checkpoint", ckpt_path, "Checkpoint file")->required();
  ev->add_option("-d,--data", data_path, "Dataset directory (default: synthetic held-out set)");
  ev->add_option("-m,--multiplier", multiplier, "Volume interval multiplier")->check(CLI::IsMember({1, 4}));
  ev->add_option("-o,--out", out_path, "Metric CSV path (default: stdout)");
  ev->add_flag("--rsat-both-ends", both_ends, "Sum RSAT over both reference times");

  auto* vz = app.add_subcommand("viz", "Render flow as colour-wheel PNGs");
  vz->add_option("-k,--checkpoint", ckpt_path, "Checkpoint to run over --data");
  vz->add_option("-d,--data", data_path, "Dataset directory (default: synthetic held-out set)");
  vz->add_option("-f,--flow", flow_path, "Flow file to render instead of a checkpoint");
  vz->add_option("-o,--out", out_path, "Output directory, or PNG path with --flow")->required();
  vz->add_option("-n,--sequences", count, "Render at most this many sequences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const TrainConfig cfg = load_config(config_path);
      const int n = count > 0 ? count : cfg.data.eval_sequences;
      const Split split = held_out ? Split::held_out : Split::train;
      for (int i = 0; i < n; ++i) {
        const Sequence seq = make_synthetic_sequence(cfg.data, cfg.sequence_length, cfg.seed, split, i);
        save_sequence(fs::path(out_path) / seq.name, seq, !text);
      }
      std::cout << "wrote " << n << " sequences to " << out_path << '\n';
    } else if (*tr) {
      const TrainConfig cfg = load_config(config_path);
      fs::create_directories(out_path);
      std::ofstream(fs::path(out_path) / "config.txt") << to_text(cfg);
      Model model = make_model(cfg);
      Adam opt = make_optimizer(cfg, model);
      std::cout << "parameters: " << model.parameter_count() << '\n';
      std::vector<Sequence> held;
      if (eval_after) {
        held = held_out_set(cfg);
        std::cout << "untrained: ";
        print_summary(evaluate(model, held));
      }
      std::ofstream csv(fs::path(out_path) / "loss.csv");
      write_loss_csv_header(csv);
      const auto start = std::chrono::steady_clock::now();
      train(cfg, model, opt, [&](const TrainProgress& p) {
        write_loss_csv_row(csv, p.update, p.mean);
        if (p.update % cfg.log_every == 0) {
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          std::cout << "update " << p.update << "  " << to_string(p.mean) << "  (" << std::fixed
                    << std::setprecision(1) << secs << " s)\n";
          std::cout.unsetf(std::ios::floatfield);
        }
      });
      save_checkpoint(fs::path(out_path) / "checkpoint.bin", cfg, model, &opt);
      if (eval_after) {
        std::cout << "trained:   ";
        print_summary(evaluate(model, held));
      }
    } else if (*ev) {
      const Checkpoint ck = load_checkpoint(ckpt_path);
      Model model = make_model(ck.config);
      restore(ck, model);
      const MetricReport report = evaluate(model, dataset_or_held_out(data_path, ck.config), multiplier, both_ends);
      if (out_path.empty()) {
        write_report_csv(std::cout, report);
      } else {
        std::ofstream os(out_path);
        if (!os) throw IoError("cannot write " + out_path);
        write_report_csv(os, report);
        print_summary(report);
      }
    } else if (*vz) {
      if (!flow_path.empty()) {
        write_flow_png(out_path, load_flow(flow_path).u);
        return 0;
      }
      if (ckpt_path.empty()) throw ConfigError("viz needs --checkpoint or --flow");
      const Checkpoint ck = load_checkpoint(ckpt_path);
      Model model = make_model(ck.config);
      restore(ck, model);
      std::vector<Sequence> data = dataset_or_held_out(data_path, ck.config);
      if (count > 0 && static_cast<std::size_t>(count) < data.size()) data.resize(static_cast<std::size_t>(count));
      for (const Sequence& seq : data) {
        const fs::path dir = fs::path(out_path) / seq.name;
        fs::create_directories(dir);
        const std::vector<Tensor> flows = infer_sequence(model, seq.volumes);
        for (std::size_t k = 0; k < flows.size(); ++k) {
          write_flow_png(dir / indexed("flow_", k, ".png"), flows[k]);
          if (seq.has_ground_truth()) write_flow_png(dir / indexed("gt_", k, ".png"), seq.ground_truth[k].u);
        }
      }
      std::cout << "rendered " << data.size() << " sequences to " << out_path << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
