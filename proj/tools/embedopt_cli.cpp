#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embedopt/experiments.hpp"
#include "embedopt/io.hpp"
#include "embedopt/kernels.hpp"
#include "embedopt/verification.hpp"

namespace {

using namespace embedopt;

// "0,1,2" or "0-9" or a mix ("0-2,7").
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    if (item.empty()) throw CLI::ValidationError("--seeds", "empty entry in seed list");
    const std::size_t dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        const std::uint64_t lo = std::stoull(item.substr(0, dash));
        const std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw CLI::ValidationError("--seeds", "descending range " + item);
        for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--seeds", "not a seed: " + item);
    }
    pos = end + 1;
  }
  return out;
}

int verify_without_config(const std::optional<std::string>& out_dir) {
  const auto checks = run_verification_suite();
  bool all = true;
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << std::string(width + 2 - c.name.size(), ' ')
              << c.detail << "\n";
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  std::cout << (all ? "all checks passed" : "some checks failed") << " (simd "
            << simd::isa_name(simd::active_isa()) << ")\n";
  if (out_dir) {
    try {
      std::filesystem::create_directories(*out_dir);
      write_file_atomic(std::filesystem::path(*out_dir) / "verify.json",
                        nlohmann::json{{"checks", arr}, {"all_passed", all}}.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << nlohmann::json{{"error", "io"}, {"exit_code", exit_code::io}, {"message", e.what()}}.dump()
                << "\n";
      return exit_code::io;
    }
  }
  return all ? exit_code::ok : exit_code::failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-space steering benchmarks for toy diffusion models"};
  app.require_subcommand(1);

  std::optional<std::string> out_dir;
  std::optional<std::string> seeds_text;
  std::optional<std::size_t> jobs;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--seeds", seeds_text, "Seed list, e.g. 0,1,2 or 0-9 (overrides the config)");
    sub->add_option("--jobs", jobs, "Worker threads; 0 uses every hardware thread");
  };

  struct Command {
    const char* name;
    const char* help;
    std::optional<ExperimentKind> kind;
  };
  const Command commands[] = {
      {"run", "Run any experiment config", std::nullopt},
      {"sweep", "Learning-rate sweep on a toy task", ExperimentKind::lr_sweep},
      {"scale", "Step-count scaling at constant alpha * T", ExperimentKind::step_scaling},
      {"fig1", "One-dimensional conjugate experiment histograms", ExperimentKind::synthetic_fig1},
  };
  std::string config_path;
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("config", config_path, "Experiment config (JSON)")->required();
    add_common(sub);
    subs.push_back(sub);
  }
  CLI::App* verify = app.add_subcommand("verify", "Run the verification suite and print a pass/fail table");
  verify->add_option("config", config_path, "Optional verify config (JSON)");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  ConfigOverrides overrides;
  if (out_dir) overrides.output_dir = *out_dir;
  if (jobs) overrides.jobs = *jobs;
  if (seeds_text) {
    try {
      overrides.seeds = parse_seed_list(*seeds_text);
    } catch (const CLI::ValidationError& e) {
      std::cerr << e.what() << "\n";
      return exit_code::usage;
    }
  }

  if (verify->parsed()) {
    if (config_path.empty()) return verify_without_config(out_dir);
    overrides.expected_kind = ExperimentKind::verify;
    return run_from_config(config_path, overrides, std::cout, std::cerr);
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    overrides.expected_kind = commands[i].kind;
    return run_from_config(config_path, overrides, std::cout, std::cerr);
  }
  return exit_code::usage;
}
