// convbf: run Monte Carlo filtering campaigns and the convolution self-checks.
//
//   convbf run      --system wiener --case b --filter convkf --beta 0.01 --out r.csv --format csv
//   convbf sweep    --system wiener --case a --filter kf,convkf --alpha off,0.005,0.05 --out s.csv --format csv
//   convbf validate
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure budget
// exceeded (or a failed self-check), 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "convbf/convbf.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct CliOptions {
  std::string config_path;
  std::string system;
  std::string mismatch;
  std::string filter;
  std::string alpha;
  std::string beta;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> particles;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  unsigned threads = 1;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  out.push_back(item);
  return out;
}

std::string json_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return convbf::format_double(v.get<double>());
  if (v.is_array()) {
    std::string joined;
    for (const auto& e : v) {
      if (!joined.empty()) joined += ',';
      joined += e.is_string() ? e.get<std::string>() : convbf::format_double(e.get<double>());
    }
    return joined;
  }
  throw convbf::ConfigError(std::string("config field '") + key + "' has an unsupported type");
}

/// Fills unset options from the JSON file named by --config. Flags given on
/// the command line take precedence.
void merge_config_file(CliOptions& o) {
  if (o.config_path.empty()) return;
  std::ifstream in(o.config_path);
  if (!in) throw convbf::IoError(o.config_path, "cannot open config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw convbf::ConfigError(std::string("invalid config JSON: ") + e.what());
  }
  auto fill = [&](std::string& field, const char* key) {
    if (field.empty()) field = json_field(j, key);
  };
  fill(o.system, "system");
  fill(o.mismatch, "case");
  fill(o.filter, "filter");
  fill(o.alpha, "alpha");
  fill(o.beta, "beta");
  fill(o.out, "out");
  fill(o.format, "format");
  try {
    if (!o.runs && j.contains("runs")) o.runs = j.at("runs").get<std::size_t>();
    if (!o.steps && j.contains("steps")) o.steps = j.at("steps").get<std::size_t>();
    if (!o.particles && j.contains("particles")) o.particles = j.at("particles").get<std::size_t>();
    if (!o.seed && j.contains("seed")) o.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw convbf::ConfigError(std::string("invalid config value: ") + e.what());
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw convbf::ConfigError(std::string("missing required option --") + flag);
}

convbf::ExperimentConfig base_config(const CliOptions& o) {
  require(o.system, "system");
  require(o.mismatch, "case");
  require(o.filter, "filter");
  require(o.out, "out");
  require(o.format, "format");
  convbf::ExperimentConfig cfg;
  cfg.system = convbf::parse_system(o.system);
  cfg.mismatch = convbf::parse_case(o.mismatch);
  if (o.runs) cfg.runs = *o.runs;
  if (o.steps) cfg.steps = *o.steps;
  if (o.particles) cfg.particles = *o.particles;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

int report_and_export(const std::vector<convbf::CampaignResult>& results, const CliOptions& o) {
  convbf::export_results(results, convbf::parse_format(o.format), o.out);
  int code = 0;
  for (const auto& r : results) {
    const auto& s = r.summary;
    std::cout << convbf::to_string(r.config.filter) << " alpha=" << convbf::format_threshold(r.config.alpha, "off")
              << " beta=" << convbf::format_threshold(r.config.beta, "off") << " mean=" << convbf::format_double(s.mean)
              << " median=" << convbf::format_double(s.median) << " failed=" << s.failed_runs << "/"
              << s.per_run_rmse.size() << "\n";
    if (!convbf::within_failure_budget(s)) {
      std::cerr << "error: " << convbf::to_string(r.config.filter) << " failed " << s.failed_runs << " of "
                << s.per_run_rmse.size() << " runs (budget 5%)\n";
      code = kExitNumerical;
    }
  }
  return code;
}

int command_run(CliOptions o) {
  merge_config_file(o);
  convbf::ExperimentConfig cfg = base_config(o);
  cfg.filter = convbf::parse_filter(o.filter);
  if (!o.alpha.empty()) cfg.alpha = convbf::parse_threshold(o.alpha);
  if (!o.beta.empty()) cfg.beta = convbf::parse_threshold(o.beta);
  const auto results = convbf::run_campaign({cfg}, o.threads);
  return report_and_export(results, o);
}

int command_sweep(CliOptions o) {
  merge_config_file(o);
  const convbf::ExperimentConfig base = base_config(o);
  std::vector<convbf::FilterKind> filters;
  for (const auto& f : split_list(o.filter)) filters.push_back(convbf::parse_filter(f));
  std::vector<convbf::ExponentialThreshold> alphas{convbf::ExponentialThreshold::disabled()};
  std::vector<convbf::ExponentialThreshold> betas{convbf::ExponentialThreshold::disabled()};
  if (!o.alpha.empty()) {
    alphas.clear();
    for (const auto& a : split_list(o.alpha)) alphas.push_back(convbf::parse_threshold(a));
  }
  if (!o.beta.empty()) {
    betas.clear();
    for (const auto& b : split_list(o.beta)) betas.push_back(convbf::parse_threshold(b));
  }
  const auto results = convbf::run_campaign(convbf::expand_sweep(base, filters, alphas, betas), o.threads);
  return report_and_export(results, o);
}

int command_validate() {
  bool all = true;
  for (const auto& c : convbf::convolution_self_checks()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << convbf::format_double(c.value)
              << " <= " << convbf::format_double(c.tolerance) << ")\n";
    all = all && c.passed;
  }
  return all ? 0 : kExitNumerical;
}

void add_campaign_options(CLI::App* cmd, CliOptions& o, bool lists) {
  cmd->add_option("--config", o.config_path, "JSON file with fields named like the flags");
  cmd->add_option("--system", o.system, "wiener | sequence | reactor");
  cmd->add_option("--case", o.mismatch, "none | a | b");
  cmd->add_option("--filter", o.filter, lists ? "comma-separated filter names" : "filter name");
  cmd->add_option("--alpha", o.alpha, lists ? "comma-separated rates or off" : "transition threshold rate or off");
  cmd->add_option("--beta", o.beta, lists ? "comma-separated rates or off" : "measurement threshold rate or off");
  cmd->add_option("--runs", o.runs, "Monte Carlo runs (default 100)");
  cmd->add_option("--steps", o.steps, "time steps per run (default 40)");
  cmd->add_option("--particles", o.particles, "particles for PF-family filters (default 200)");
  cmd->add_option("--seed", o.seed, "campaign seed (default 42)");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--format", o.format, "csv | json");
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores (default 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional Bayesian filtering benchmarks"};
  app.require_subcommand(1);
  CliOptions run_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "run one filter configuration");
  add_campaign_options(run, run_opts, false);
  auto* sweep = app.add_subcommand("sweep", "run the cross product of filters, alphas and betas");
  add_campaign_options(sweep, sweep_opts, true);
  auto* validate = app.add_subcommand("validate", "check the convolution quadrature against closed forms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return command_run(run_opts);
    if (*sweep) return command_sweep(sweep_opts);
    if (*validate) return command_validate();
  } catch (const convbf::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const convbf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const convbf::InputError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
