// sim2real command-line driver.
//
//   sim2real <generate|curate|render-prompts|evaluate|report|sim2real> [options]
//
// Exit codes: 0 ok, 1 other failure, 2 missing input, 3 schema violation,
// 4 quota shortfall.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sim2real/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace sim2real;
  CLI::App app{"Sim2Real planning-data toolkit"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string quota;
  std::string planner = "linear";
  bool no_align = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config (defaults when omitted)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_flag("--no-align", no_align, "relabel sim records instead of converting their frames");
  };
  for (const char* name : {"generate", "render-prompts", "sim2real"}) {
    add_common(app.add_subcommand(name, std::string(name) + " stage"));
  }
  auto* curate = app.add_subcommand("curate", "stratified sampling with balance report");
  add_common(curate);
  curate->add_option("--quota", quota, "quota preset: HASS or nuScenes-like");
  for (const char* name : {"evaluate", "report"}) {
    auto* sub = app.add_subcommand(name, std::string(name) + " stage");
    add_common(sub);
    sub->add_option("--planner", planner, "gt, cv, ctrv or linear")->check(CLI::IsMember({"gt", "cv", "ctrv", "linear"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? default_config() : config_from_json(load_json(config_path));
    if (!quota.empty()) quota_preset(quota);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  if (seed) cfg.seed = *seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (no_align) cfg.align = false;

  const CommandResult res = run_pipeline(cfg, command, quota, parse_planner(planner));
  if (res.exit_code == kExitOk) {
    std::cout << res.message << (res.message.empty() || res.message.back() == '\n' ? "" : "\n");
  } else {
    std::cerr << "error: " << res.message << (res.message.empty() || res.message.back() == '\n' ? "" : "\n");
  }
  return res.exit_code;
}
