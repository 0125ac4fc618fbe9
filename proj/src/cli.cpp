#include "comir/cli.hpp"

#include "comir/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace comir {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string input;
  std::string modality;
  std::string ref_modality;
  std::vector<std::string> methods;
  std::string results;
  std::string image;
  double step = 15.0;
  int jobs = 1;
  std::string out;
};

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

std::optional<std::string> optional_string(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"CoMIR training, registration and evaluation", "comir"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "Run directory (must not exist or be empty); default <output_dir>/<command>-<stamp>");
  };
  auto add_jobs = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "Registration pairs processed in parallel")->check(CLI::PositiveNumber);
  };

  CLI::App* train = app.add_subcommand("train", "Train CoMIR encoders");
  train->add_option("--config", o.config, "Run configuration")->required();
  add_out(train);

  CLI::App* infer = app.add_subcommand("infer", "Compute CoMIRs for a directory of images");
  infer->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  infer->add_option("--input", o.input, "Directory of .tif/.png images")->required();
  infer->add_option("--modality", o.modality, "Encoder to use (default: first modality)");
  add_out(infer);

  CLI::App* reg = app.add_subcommand("register", "Register synthetic evaluation pairs");
  reg->add_option("--config", o.config, "Run configuration")->required();
  reg->add_option("--method", o.methods, "mi, intensity or feature (repeatable; default: register.methods)")
      ->check(CLI::IsMember({"mi", "intensity", "feature"}));
  reg->add_option("--ref-modality", o.ref_modality, "Reference modality")->required();
  reg->add_option("--checkpoint", o.checkpoint, "Checkpoint, required for CoMIR inputs");
  add_jobs(reg);
  add_out(reg);

  CLI::App* eval = app.add_subcommand("evaluate", "Statistics over registration results");
  eval->add_option("--results", o.results, "Output directory of a register run")->required();
  add_out(eval);

  CLI::App* eqv = app.add_subcommand("equivariance", "Rotation-equivariance curve of a checkpoint");
  eqv->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  eqv->add_option("--image", o.image, "Square input image")->required();
  eqv->add_option("--step", o.step, "Angle step in degrees (must divide 360)")->required();
  eqv->add_option("--modality", o.modality, "Encoder to use (default: first modality)");
  add_out(eqv);

  CLI::App* rep = app.add_subcommand("reproduce", "train -> infer -> register -> evaluate");
  rep->add_option("--config", o.config, "Run configuration")->required();
  add_jobs(rep);
  add_out(rep);

  CLI::App* val = app.add_subcommand("validate", "Print the fully resolved configuration");
  val->add_option("--config", o.config, "Run configuration")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "validate") {
      out << validate_config(o.config).echo().dump();
      return kExitOk;
    }

    std::optional<RunConfig> cfg;
    if (!o.config.empty()) cfg = validate_config(o.config);
    const fs::path parent = cfg ? cfg->output_dir : fs::path("runs");
    if (command == "register" && !o.checkpoint.empty() && !fs::is_regular_file(o.checkpoint)) {
      throw ConfigError("--checkpoint", "file not found: " + o.checkpoint);
    }
    if (command == "register" && cfg->inputs == InputKind::comir && o.checkpoint.empty()) {
      throw ConfigError("--checkpoint", "CoMIR inputs requested (register.inputs = comir) but no checkpoint given");
    }

    const fs::path run_dir = create_run_dir(parent, command, optional_path(o.out));
    Manifest manifest(command, run_dir);
    if (cfg) manifest.set_config(*cfg);
    err << command << ": writing to " << run_dir.string() << "\n";

    if (command == "train") {
      run_train(*cfg, manifest);
    } else if (command == "infer") {
      run_infer(o.checkpoint, o.input, optional_string(o.modality), manifest);
    } else if (command == "register") {
      RegisterOptions opt;
      for (const std::string& m : o.methods) opt.methods.push_back(parse_method(m));
      opt.ref_modality = o.ref_modality;
      opt.checkpoint = optional_path(o.checkpoint);
      opt.jobs = o.jobs;
      run_register(*cfg, opt, manifest);
    } else if (command == "evaluate") {
      run_evaluate(o.results, manifest);
    } else if (command == "equivariance") {
      run_equivariance(o.checkpoint, o.image, o.step, optional_string(o.modality), manifest);
    } else if (command == "reproduce") {
      run_reproduce(*cfg, o.jobs, manifest);
    }
    manifest.write();
    out << run_dir.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << command << " failed: " << e.what() << "\n";
    return kExitStage;
  }
}

}  // namespace comir
