#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "project_config.hpp"
#include "tally/event_log.hpp"
#include "tally/manifest.hpp"
#include "tally/scenarios.hpp"
#include "tally/service.hpp"
#include "tally/simulator.hpp"

namespace {

using namespace tally;

void print_warnings(Engine& engine) {
  for (const std::string& warning : engine.drain_warnings()) {
    std::cerr << "warning: " << warning << '\n';
  }
}

int cmd_init(const std::string& out_dir) {
  cli::write_sample_project(out_dir);
  std::cout << "wrote project skeleton to " << out_dir << '\n';
  return 0;
}

int cmd_load_manifest(const std::string& manifest_path,
                      const std::string& out_path) {
  const std::vector<Subject> subjects = load_manifest_file(manifest_path);
  std::cout << "loaded " << subjects.size() << " subjects from "
            << manifest_path << '\n';
  if (!out_path.empty()) {
    save_manifest_file(subjects, out_path);
    std::cout << "wrote canonical manifest to " << out_path << '\n';
  }
  return 0;
}

int cmd_filter_manifest(const std::string& manifest_path, double threshold,
                        const std::string& out_prefix) {
  const std::vector<Subject> subjects = load_manifest_file(manifest_path);
  FilterResult result = filter_manifest(subjects, threshold);
  for (Subject& subject : result.rejected) {
    subject.state = SubjectState::Retired;
    subject.retirement_reason = RetirementReason::OfflineFiltered;
  }
  const std::string kept_path = out_prefix + ".kept.tsv";
  const std::string rejected_path = out_prefix + ".rejected.tsv";
  save_manifest_file(result.kept, kept_path);
  save_manifest_file(result.rejected, rejected_path);
  std::cout << "kept " << result.kept.size() << " -> " << kept_path << '\n';
  std::cout << "rejected " << result.rejected.size() << " -> "
            << rejected_path << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& log_path,
            const std::string& dump_path) {
  const cli::ProjectConfig config = cli::load_project_file(config_path);
  std::unique_ptr<Engine> engine = cli::build_engine(config);
  ReplayStats stats;
  try {
    stats = replay_log_file(log_path, *engine);
  } catch (const CorruptLine& e) {
    std::cerr << "corrupt event log line " << e.line << ": " << e.what()
              << '\n';
    std::cerr << "state reflects all lines before it\n";
    return 1;
  }
  print_warnings(*engine);
  std::cout << "replayed " << stats.lines << " events (" << stats.accepted
            << " accepted, " << stats.rejected << " rejected)\n";
  if (!dump_path.empty()) {
    std::ofstream out(dump_path);
    if (!out) {
      std::cerr << "cannot write state dump: " << dump_path << '\n';
      return 1;
    }
    out << engine->state_dump().dump(2) << '\n';
    std::cout << "wrote state dump to " << dump_path << '\n';
  }
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& log_path,
              const std::string& host, int port) {
  const cli::ProjectConfig config = cli::load_project_file(config_path);
  std::unique_ptr<Engine> engine = cli::build_engine(config);
  // Resume from the existing log before accepting new submissions.
  std::ifstream existing(log_path);
  if (existing) {
    const ReplayStats stats = replay_log(existing, *engine);
    std::cout << "resumed from " << stats.lines << " logged events\n";
  }
  existing.close();
  EventLogWriter writer(log_path);
  Service service(*engine, &writer);
  std::cout << "serving on " << host << ":" << port << '\n';
  if (!service.listen(host, port)) {
    std::cerr << "cannot bind " << host << ":" << port << '\n';
    return 1;
  }
  return 0;
}

int cmd_simulate(const std::string& scenario_token,
                 const std::string& config_path, std::uint64_t seed,
                 bool seed_given, const std::string& out_path) {
  ScenarioConfig config;
  if (!config_path.empty()) {
    config = load_scenario_config_file(config_path);
    if (seed_given) {
      config.seed = seed;
    }
  } else if (!scenario_token.empty()) {
    config = default_scenario_config(scenario_from_string(scenario_token));
    config.seed = seed;
  } else {
    std::cerr << "simulate needs --scenario or --config\n";
    return 1;
  }
  const MetricsReport report = run_scenario(config);
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write report: " << out_path << '\n';
    return 1;
  }
  out << report_to_json(report).dump(2) << '\n';
  std::cout << render_report_text(report);
  std::cout << "wrote report to " << out_path << '\n';
  return 0;
}

int cmd_report(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) {
    std::cerr << "cannot open report: " << in_path << '\n';
    return 1;
  }
  nlohmann::json doc;
  in >> doc;
  std::cout << render_report_text(report_from_json(doc));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tally: crowdsourcing decision engine"};
  app.require_subcommand(1);

  std::string init_dir = ".";
  CLI::App* init = app.add_subcommand("init", "write a project skeleton");
  init->add_option("--out", init_dir, "target directory");

  std::string manifest_path;
  std::string manifest_out;
  CLI::App* load =
      app.add_subcommand("load-manifest", "validate a subject manifest");
  load->add_option("--manifest", manifest_path, "manifest file")->required();
  load->add_option("--out", manifest_out, "write canonical copy here");

  std::string filter_manifest_path;
  std::string filter_out = "filtered";
  double threshold = 0.0;
  CLI::App* filter = app.add_subcommand(
      "filter-manifest", "split a manifest by machine score");
  filter->add_option("--manifest", filter_manifest_path, "manifest file")
      ->required();
  filter->add_option("--threshold", threshold, "keep score >= threshold")
      ->required();
  filter->add_option("--out", filter_out,
                     "output prefix (.kept.tsv / .rejected.tsv)");

  std::string run_config;
  std::string run_log;
  std::string run_dump;
  CLI::App* run = app.add_subcommand("run", "replay an event log");
  run->add_option("--config", run_config, "project config")->required();
  run->add_option("--log", run_log, "event log to replay")->required();
  run->add_option("--dump", run_dump, "write the state dump here");

  std::string serve_config;
  std::string serve_log = "events.jsonl";
  std::string host = "127.0.0.1";
  int port = 8080;
  CLI::App* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--config", serve_config, "project config")->required();
  serve->add_option("--log", serve_log, "event log (created if missing)");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");

  std::string scenario_token;
  std::string scenario_config;
  std::uint64_t seed = 0;
  std::string report_out = "report.json";
  CLI::App* simulate =
      app.add_subcommand("simulate", "run a synthetic scenario");
  simulate->add_option("--scenario", scenario_token,
                       "S1_agree_with_model | S2_expert_gate | "
                       "S3_active_learning | S4_confidence_order");
  simulate->add_option("--config", scenario_config, "scenario config file");
  CLI::Option* seed_opt =
      simulate->add_option("--seed", seed, "master seed (default 0)");
  simulate->add_option("--out", report_out, "report file");

  std::string report_in;
  CLI::App* report = app.add_subcommand("report", "render a metrics report");
  report->add_option("--in", report_in, "report JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) {
      return cmd_init(init_dir);
    }
    if (load->parsed()) {
      return cmd_load_manifest(manifest_path, manifest_out);
    }
    if (filter->parsed()) {
      return cmd_filter_manifest(filter_manifest_path, threshold, filter_out);
    }
    if (run->parsed()) {
      return cmd_run(run_config, run_log, run_dump);
    }
    if (serve->parsed()) {
      return cmd_serve(serve_config, serve_log, host, port);
    }
    if (simulate->parsed()) {
      return cmd_simulate(scenario_token, scenario_config, seed,
                          seed_opt->count() > 0, report_out);
    }
    if (report->parsed()) {
      return cmd_report(report_in);
    }
  } catch (const MissingMachineScore& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
