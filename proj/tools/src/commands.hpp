#pragma once

#include <string>

#include "run_config.hpp"

namespace policylearn::cli {

struct CommandContext {
  RunConfig config;
  int threads = 1;
  bool verbose = false;
};

// Each command reads its upstream artifacts from config.paths.out_dir and
// writes its own there; see the README for the artifact list.
void cmd_generate(const CommandContext& ctx);
void cmd_cluster(const CommandContext& ctx);
void cmd_fit(const CommandContext& ctx);
void cmd_adherence(const CommandContext& ctx);
void cmd_tree(const CommandContext& ctx);
void cmd_policy(const CommandContext& ctx);
void cmd_cea(const CommandContext& ctx);
void cmd_validate(const CommandContext& ctx);
void cmd_pipeline(const CommandContext& ctx);

}  // namespace policylearn::cli
