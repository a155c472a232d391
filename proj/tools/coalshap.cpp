// coalshap: experiment runner.
//
//   coalshap <bench|axioms|fidelity|attribute|lds|counterfactual>
//            [--config PATH] [--seed U64] [--out DIR] [--threads K]
//   coalshap attribute [--dataset PATH] [--estimator KIND] [--budget M]
//
// Exit status: 0 when every output was written and every configured check
// passed, 1 when a check failed, 2 on usage / config / runtime errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "coalshap/experiments.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = coalshap::default_thread_count();
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "Base seed (overrides the config)");
  cmd->add_option("--out", opt.out, "Output directory (overrides the config)");
  cmd->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
}

coalshap::ExperimentConfig load_config(const std::string& name, const CommonOptions& opt) {
  nlohmann::json j;
  std::filesystem::path base_dir;
  if (opt.config.empty()) {
    j = coalshap::default_config_json(name);
  } else {
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config '" + opt.config + "'");
    try {
      j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("config '" + opt.config + "': " + e.what());
    }
    base_dir = std::filesystem::path(opt.config).parent_path();
  }
  if (opt.seed) {
    if (!j.is_object()) throw coalshap::ConfigError("", "expected an object");
    j["seed"] = *opt.seed;
  }
  auto cfg = coalshap::parse_experiment_config(j, base_dir);
  if (!opt.out.empty()) cfg.out = opt.out;
  return cfg;
}

int finish(const coalshap::Outcome& outcome, const coalshap::ExperimentConfig& cfg) {
  coalshap::write_outcome(outcome, cfg, cfg.out);
  for (const auto& m : outcome.messages) std::cout << m << '\n';
  for (const auto& c : outcome.checks) {
    if (!c.passed) std::cerr << "check failed: " << c.name << " (" << c.detail << ")\n";
  }
  return outcome.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley attribution via boosted-tree surrogates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(coalshap::kVersion));

  CommonOptions opt;
  std::string dataset;
  std::string estimator;
  std::optional<std::uint64_t> budget;

  auto* bench = app.add_subcommand("bench", "Estimator error vs budget against the exact oracle");
  auto* axioms = app.add_subcommand("axioms", "Efficiency gap and null-player magnitude vs budget");
  auto* fidelity = app.add_subcommand("fidelity", "Proxy vs retrain utilities in the mixture simulator");
  auto* attribute = app.add_subcommand("attribute", "Write one attribution document");
  auto* lds = app.add_subcommand("lds", "Linear datamodeling score per estimator");
  auto* counterfactual = app.add_subcommand("counterfactual", "Top / bottom / random removal deltas");
  for (auto* cmd : {bench, axioms, fidelity, attribute, lds, counterfactual}) add_common(cmd, opt);
  attribute->add_option("--dataset", dataset, "Coalition dataset CSV (mask,utility)")->check(CLI::ExistingFile);
  attribute->add_option("--estimator", estimator, "exact | kernel_shap | surrogate_shap");
  attribute->add_option("--budget", budget, "Utility query budget M");

  CLI11_PARSE(app, argc, argv);

  try {
    auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    const auto cfg = load_config(name, opt);
    if (name == "bench") return finish(coalshap::run_bench(cfg, opt.threads), cfg);
    if (name == "axioms") return finish(coalshap::run_axioms(cfg, opt.threads), cfg);
    if (name == "fidelity") return finish(coalshap::run_fidelity(cfg, opt.threads), cfg);
    if (name == "lds") return finish(coalshap::run_lds(cfg, opt.threads), cfg);
    if (name == "counterfactual") return finish(coalshap::run_counterfactual(cfg, opt.threads), cfg);
    coalshap::AttributeRequest req;
    if (!dataset.empty()) req.dataset_path = dataset;
    if (!estimator.empty()) req.estimator = coalshap::parse_estimator_kind(estimator);
    req.budget = budget;
    return finish(coalshap::run_attribute(cfg, req), cfg);
  } catch (const std::exception& e) {
    std::cerr << "coalshap: " << e.what() << '\n';
    return 2;
  }
}
