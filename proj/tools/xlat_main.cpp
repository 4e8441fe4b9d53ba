// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Stage subcommands operate on an existing output
// directory so a pipeline can be replayed piecewise; run-icl and emit-sft
// execute the full recipe for their mode.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xlat/runner.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> endpoint;
  std::optional<std::string> resources;
  bool allow_deviation = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "experiment config (JSON)")
      ->required();
  sub->add_option("--seed", flags.seed, "override the split/sampling seed");
  sub->add_option("--out", flags.out_dir, "override the output directory");
  sub->add_option("--endpoint", flags.endpoint,
                  "override the completion endpoint (URL or mock:project)");
  sub->add_option("--resources", flags.resources,
                  "override the resource directory");
  sub->add_flag("--allow-deviation", flags.allow_deviation,
                "permit recipes that are off by default");
}

xlat::runner::ExperimentConfig make_config(const CommonFlags& flags) {
  xlat::runner::ExperimentConfig config =
      xlat::runner::load_config(flags.config_path);
  if (flags.seed) {
    config.seed = *flags.seed;
    config.mauve.seed = *flags.seed;
  }
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.endpoint) config.generation.endpoint = *flags.endpoint;
  if (flags.resources) config.resources = *flags.resources;
  if (flags.allow_deviation) config.allow_deviation = true;
  return config;
}

int run_full(const CommonFlags& flags, xlat::runner::RunMode mode) {
  xlat::runner::ExperimentConfig config = make_config(flags);
  config.mode = mode;
  const xlat::runner::RunManifest manifest = xlat::runner::run(config);
  std::cout << "status: " << manifest.status << '\n';
  if (manifest.report.is_object()) {
    std::cout << manifest.report.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual annotation transfer harness"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* ingest = app.add_subcommand("ingest", "load, pair, and split");
  CLI::App* pseudo =
      app.add_subcommand("pseudo-label", "label the source side");
  CLI::App* align_cmd =
      app.add_subcommand("align", "train or import word alignments");
  CLI::App* masquerade =
      app.add_subcommand("masquerade", "reorder/transliterate target text");
  CLI::App* build =
      app.add_subcommand("build-prompts", "render prompts or SFT datasets");
  CLI::App* run_icl =
      app.add_subcommand("run-icl", "full in-context-learning pipeline");
  CLI::App* emit_sft =
      app.add_subcommand("emit-sft", "emit fine-tuning datasets and config");
  CLI::App* score =
      app.add_subcommand("score", "score generations against references");
  for (CLI::App* sub :
       {ingest, pseudo, align_cmd, masquerade, build, run_icl, emit_sft,
        score}) {
    add_common(sub, flags);
  }

  CLI::App* report = app.add_subcommand(
      "report", "consolidated metric table over run manifests");
  std::vector<std::string> manifest_paths;
  std::string report_out;
  report->add_option("manifests", manifest_paths, "manifest.json paths")
      ->required();
  report->add_option("--out", report_out, "write the table here (else stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(manifest_paths.begin(),
                                               manifest_paths.end());
      const std::string table = xlat::runner::report(paths);
      if (report_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream out(report_out, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + report_out);
        out << table;
      }
      return 0;
    }

    if (run_icl->parsed()) {
      return run_full(flags, xlat::runner::RunMode::Icl);
    }
    if (emit_sft->parsed()) {
      return run_full(flags, xlat::runner::RunMode::SftEmit);
    }

    xlat::runner::ExperimentConfig config = make_config(flags);
    xlat::runner::validate_config(config);
    std::filesystem::create_directories(config.out_dir);
    if (ingest->parsed()) {
      xlat::runner::stage_ingest(config);
    } else if (pseudo->parsed()) {
      xlat::runner::stage_pseudo_label(config);
    } else if (align_cmd->parsed()) {
      xlat::runner::stage_align(config);
    } else if (masquerade->parsed()) {
      xlat::runner::stage_masquerade(config);
    } else if (build->parsed()) {
      xlat::runner::stage_build_prompts(config);
    } else if (score->parsed()) {
      if (config.mode == xlat::runner::RunMode::Score) {
        return run_full(flags, xlat::runner::RunMode::Score);
      }
      std::cout << xlat::runner::stage_score(config).dump(2) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
