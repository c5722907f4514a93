#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"
#include "policylearn/errors.hpp"
#include "run_config.hpp"

namespace {

using policylearn::cli::CommandContext;

void print_error(const std::string& type, const std::string& message) {
  nlohmann::json j;
  j["error"] = {{"type", type}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policylearn: latent-group policy learning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 1;
  bool verbose = false;
  app.add_option("--threads", threads, "worker cap for restarts and folds")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "log artifact paths and fit summaries");

  const std::map<std::string, std::pair<std::string, std::function<void(const CommandContext&)>>>
      commands{
          {"generate", {"synthesize a cohort CSV from the dgp block", policylearn::cli::cmd_generate}},
          {"cluster", {"fit the weighted K-means group memberships", policylearn::cli::cmd_cluster}},
          {"fit", {"fit per-group outcome models (optionally with split inference)",
                   policylearn::cli::cmd_fit}},
          {"adherence", {"fit the two-part adherence model on treated rows",
                         policylearn::cli::cmd_adherence}},
          {"tree", {"fit the surrogate decision tree over a covariate subset",
                    policylearn::cli::cmd_tree}},
          {"policy", {"emit per-observation treatment decisions", policylearn::cli::cmd_policy}},
          {"cea", {"sweep willingness-to-pay and compare against a benchmark",
                   policylearn::cli::cmd_cea}},
          {"validate", {"cross-validate the (S, lambda_min) grid", policylearn::cli::cmd_validate}},
          {"pipeline", {"run every configured stage in order", policylearn::cli::cmd_pipeline}},
      };

  std::string chosen;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->callback([&chosen, name = name]() { chosen = name; });
  }

  std::string footer = "Config keys (one JSON object, unknown keys rejected):\n";
  for (const auto& line : policylearn::cli::config_key_help()) footer += "  " + line + "\n";
  app.footer(footer);

  CLI11_PARSE(app, argc, argv);

  try {
    CommandContext ctx;
    ctx.config = policylearn::cli::load_run_config(config_path);
    ctx.threads = threads;
    ctx.verbose = verbose;
    commands.at(chosen).second(ctx);
  } catch (const policylearn::ValidationError& e) {
    print_error("validation", e.what());
    return 1;
  } catch (const policylearn::NumericError& e) {
    print_error("numeric", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 2;
  }
  return 0;
}
